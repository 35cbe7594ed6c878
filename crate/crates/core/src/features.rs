//! The 24 configuration tokens the classifier looks at.
//!
//! Order: `s1..s4`, `b1..b4`, then `lc1, lc2, rc1, rc2` of `s1`, `s2` and
//! `s3`, then `s1.lc1.lc1`, `s1.lc1.rc1`, `s1.rc1.lc1`, `s1.rc1.rc1`.

use crate::corpus::{Sentence, Vocabulary};
use crate::transition::Configuration;

pub const NUM_SLOTS: usize = 24;

/// A token position referenced by a feature slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotToken {
    Null,
    Root,
    Token(usize),
}

/// Token references of the 24 slots. Children slots also carry the label
/// index of the arc attaching them.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeatureSlots {
    pub tokens: [SlotToken; NUM_SLOTS],
    pub arc_labels: [Option<usize>; NUM_SLOTS],
}

/// Embedding ids of one slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SlotIds {
    pub token: SlotToken,
    pub word: usize,
    pub tag: usize,
    pub label: usize,
}

fn slot_token(position: Option<usize>) -> SlotToken {
    match position {
        None => SlotToken::Null,
        Some(0) => SlotToken::Root,
        Some(i) => SlotToken::Token(i),
    }
}

/// Extracts the slots from the partial parse in `config`.
pub fn extract(config: &Configuration) -> FeatureSlots {
    let mut positions: [Option<usize>; NUM_SLOTS] = [None; NUM_SLOTS];
    let mut labelled = [false; NUM_SLOTS];

    for i in 0..4 {
        positions[i] = config.stack_from_top(i);
        positions[4 + i] = config.buffer_at(i);
    }

    let lc = |h: Option<usize>, i| h.and_then(|h| config.left_child(h, i));
    let rc = |h: Option<usize>, i| h.and_then(|h| config.right_child(h, i));

    for s in 0..3 {
        let head = positions[s];
        let base = 8 + 4 * s;
        positions[base] = lc(head, 0);
        positions[base + 1] = lc(head, 1);
        positions[base + 2] = rc(head, 0);
        positions[base + 3] = rc(head, 1);
    }
    let s1_lc1 = positions[8];
    let s1_rc1 = positions[10];
    positions[20] = lc(s1_lc1, 0);
    positions[21] = rc(s1_lc1, 0);
    positions[22] = lc(s1_rc1, 0);
    positions[23] = rc(s1_rc1, 0);
    labelled[8..].iter_mut().for_each(|l| *l = true);

    let mut tokens = [SlotToken::Null; NUM_SLOTS];
    let mut arc_labels = [None; NUM_SLOTS];
    for i in 0..NUM_SLOTS {
        tokens[i] = slot_token(positions[i]);
        if labelled[i] {
            arc_labels[i] = positions[i].and_then(|p| config.head_of(p)).map(|(_, l)| l);
        }
    }
    FeatureSlots { tokens, arc_labels }
}

impl FeatureSlots {
    /// Resolves slots to embedding ids. `words` and `tags` hold the ids of the
    /// sentence tokens, with `words[0]`/`tags[0]` for token 1.
    pub fn resolve(&self, words: &[usize], tags: &[usize], vocab: &Vocabulary) -> [SlotIds; NUM_SLOTS] {
        let mut ids = [SlotIds {
            token: SlotToken::Null,
            word: vocab.word_null(),
            tag: vocab.tag_null(),
            label: vocab.label_null(),
        }; NUM_SLOTS];
        for (i, slot) in ids.iter_mut().enumerate() {
            let label = match self.arc_labels[i] {
                Some(l) => vocab.label_feature_id(l),
                None => vocab.label_nolabel(),
            };
            *slot = match self.tokens[i] {
                SlotToken::Null => continue,
                SlotToken::Root => SlotIds {
                    token: SlotToken::Root,
                    word: vocab.word_root(),
                    tag: vocab.tag_root(),
                    label,
                },
                SlotToken::Token(t) => SlotIds {
                    token: SlotToken::Token(t),
                    word: words[t - 1],
                    tag: tags[t - 1],
                    label,
                },
            };
        }
        ids
    }

    /// Resolves slots by looking up the sentence's forms and tags.
    pub fn resolve_sentence(&self, sentence: &Sentence, vocab: &Vocabulary) -> [SlotIds; NUM_SLOTS] {
        let words: Vec<usize> = sentence.tokens.iter().map(|t| vocab.word_id(&t.form)).collect();
        let tags: Vec<usize> = sentence.tokens.iter().map(|t| vocab.tag_id(&t.tag)).collect();
        self.resolve(&words, &tags, vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::transition::{Transition, TransitionSystem};

    fn sentence() -> Sentence {
        Sentence::from_tuples(vec![("a", "X", 0, "root"), ("b", "Y", 1, "obj")])
    }

    #[test]
    fn initial_slots() {
        let s = sentence();
        let vocab = build_vocab(std::slice::from_ref(&s));
        let config = TransitionSystem::default().initial_config(&s).unwrap();
        let slots = extract(&config);
        assert_eq!(slots.tokens[0], SlotToken::Root);
        assert_eq!(slots.tokens[4], SlotToken::Token(1));
        assert_eq!(slots.tokens[5], SlotToken::Token(2));
        assert!(slots.tokens[8..].iter().all(|&t| t == SlotToken::Null));
        assert!(slots.tokens[1..4].iter().all(|&t| t == SlotToken::Null));

        let ids = slots.resolve_sentence(&s, &vocab);
        assert_eq!(ids[0].word, vocab.word_root());
        assert_eq!(ids[0].label, vocab.label_nolabel());
        assert_eq!(ids[4].word, vocab.word_id("a"));
        assert_eq!(ids[4].label, vocab.label_nolabel());
        assert_eq!(ids[9].word, vocab.word_null());
        assert_eq!(ids[9].tag, vocab.tag_null());
        assert_eq!(ids[9].label, vocab.label_null());
    }

    #[test]
    fn child_after_right() {
        let s = sentence();
        let vocab = build_vocab(std::slice::from_ref(&s));
        let system = TransitionSystem::default();
        let mut config = system.initial_config(&s).unwrap();
        let obj = vocab.label_index("obj").unwrap();
        for t in [Transition::Shift, Transition::Shift, Transition::Right(obj)] {
            system.apply_mut(&mut config, t).unwrap();
        }
        let slots = extract(&config);
        assert_eq!(slots.tokens[0], SlotToken::Token(1));
        assert_eq!(slots.tokens[1], SlotToken::Root);
        // s1.rc1
        assert_eq!(slots.tokens[10], SlotToken::Token(2));
        assert_eq!(slots.arc_labels[10], Some(obj));
        let ids = slots.resolve_sentence(&s, &vocab);
        assert_eq!(ids[10].label, vocab.label_id("obj"));
        assert_eq!(ids[10].word, vocab.word_id("b"));
        // b is a right child only.
        assert_eq!(slots.tokens[8], SlotToken::Null);
    }
}
