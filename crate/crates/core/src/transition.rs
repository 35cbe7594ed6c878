//! Arc-standard transitions extended with `Left2`/`Right2`, which attach the
//! stack top to the third stack element (or the reverse). This covers a large
//! part of the non-projective trees found in treebanks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Vocabulary};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    Shift,
    Left,
    Right,
    Left2,
    Right2,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 5] = [
        TransitionKind::Shift,
        TransitionKind::Left,
        TransitionKind::Right,
        TransitionKind::Left2,
        TransitionKind::Right2,
    ];

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// A transition; arc transitions carry a dependency label index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Transition {
    Shift,
    Left(usize),
    Right(usize),
    Left2(usize),
    Right2(usize),
}

impl Transition {
    pub fn kind(self) -> TransitionKind {
        match self {
            Transition::Shift => TransitionKind::Shift,
            Transition::Left(_) => TransitionKind::Left,
            Transition::Right(_) => TransitionKind::Right,
            Transition::Left2(_) => TransitionKind::Left2,
            Transition::Right2(_) => TransitionKind::Right2,
        }
    }

    pub fn label(self) -> Option<usize> {
        match self {
            Transition::Shift => None,
            Transition::Left(l) | Transition::Right(l) | Transition::Left2(l) | Transition::Right2(l) => {
                Some(l)
            }
        }
    }

    pub fn with_kind(kind: TransitionKind, label: usize) -> Transition {
        match kind {
            TransitionKind::Shift => Transition::Shift,
            TransitionKind::Left => Transition::Left(label),
            TransitionKind::Right => Transition::Right(label),
            TransitionKind::Left2 => Transition::Left2(label),
            TransitionKind::Right2 => Transition::Right2(label),
        }
    }

    /// Size of the classifier output space for `num_labels` labels.
    pub fn output_size(num_labels: usize) -> usize {
        1 + 4 * num_labels
    }

    /// Position of this transition in the classifier output.
    pub fn index(self, num_labels: usize) -> usize {
        match self {
            Transition::Shift => 0,
            Transition::Left(l) => 1 + l,
            Transition::Right(l) => 1 + num_labels + l,
            Transition::Left2(l) => 1 + 2 * num_labels + l,
            Transition::Right2(l) => 1 + 3 * num_labels + l,
        }
    }

    pub fn from_index(index: usize, num_labels: usize) -> Transition {
        if index == 0 {
            return Transition::Shift;
        }
        let (group, label) = ((index - 1) / num_labels, (index - 1) % num_labels);
        match group {
            0 => Transition::Left(label),
            1 => Transition::Right(label),
            2 => Transition::Left2(label),
            3 => Transition::Right2(label),
            _ => panic!("transition index {} out of range", index),
        }
    }
}

/// A set of transition kinds.
#[derive(Clone, Copy, Default, PartialEq, Eq)]
pub struct KindSet(u8);

impl KindSet {
    pub fn empty() -> Self {
        KindSet(0)
    }

    pub fn insert(&mut self, kind: TransitionKind) {
        self.0 |= kind.bit();
    }

    pub fn contains(self, kind: TransitionKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = TransitionKind> {
        TransitionKind::ALL
            .into_iter()
            .filter(move |k| self.contains(*k))
    }

    /// Expands the set into a mask over the classifier output space.
    pub fn output_mask(self, num_labels: usize) -> Vec<bool> {
        let mut mask = vec![false; Transition::output_size(num_labels)];
        for kind in self.iter() {
            if kind == TransitionKind::Shift {
                mask[0] = true;
            } else {
                for l in 0..num_labels {
                    mask[Transition::with_kind(kind, l).index(num_labels)] = true;
                }
            }
        }
        mask
    }
}

impl FromIterator<TransitionKind> for KindSet {
    fn from_iter<I: IntoIterator<Item = TransitionKind>>(iter: I) -> Self {
        let mut set = KindSet::empty();
        for k in iter {
            set.insert(k);
        }
        set
    }
}

impl fmt::Debug for KindSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arc {
    pub head: usize,
    pub dependent: usize,
    pub label: usize,
}

/// Parser state: stack, buffer and the arcs built so far.
///
/// The buffer is always a suffix `next..=n` of the sentence, so it is stored
/// as its front position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    stack: Vec<usize>,
    next: usize,
    len: usize,
    heads: Vec<Option<(usize, usize)>>,
    children: Vec<Vec<usize>>,
    num_arcs: usize,
}

impl Configuration {
    /// Stack with the top as last element.
    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    /// The `i`-th element from the stack top (0 = top).
    pub fn stack_from_top(&self, i: usize) -> Option<usize> {
        self.stack.len().checked_sub(i + 1).map(|p| self.stack[p])
    }

    /// The `i`-th buffer element (0 = front).
    pub fn buffer_at(&self, i: usize) -> Option<usize> {
        let pos = self.next + i;
        (pos <= self.len).then_some(pos)
    }

    pub fn buffer(&self) -> std::ops::RangeInclusive<usize> {
        self.next..=self.len
    }

    pub fn buffer_len(&self) -> usize {
        self.len + 1 - self.next
    }

    /// Number of tokens, root excluded.
    pub fn sentence_len(&self) -> usize {
        self.len
    }

    /// Head and label index of `token`, if attached.
    pub fn head_of(&self, token: usize) -> Option<(usize, usize)> {
        self.heads[token]
    }

    /// Dependents of `head` in increasing position order.
    pub fn children(&self, head: usize) -> &[usize] {
        &self.children[head]
    }

    /// `i`-th leftmost dependent preceding `head` (0 = leftmost).
    pub fn left_child(&self, head: usize, i: usize) -> Option<usize> {
        self.children[head]
            .iter()
            .take_while(|&&c| c < head)
            .nth(i)
            .copied()
    }

    /// `i`-th rightmost dependent following `head` (0 = rightmost).
    pub fn right_child(&self, head: usize, i: usize) -> Option<usize> {
        self.children[head]
            .iter()
            .rev()
            .take_while(|&&c| c > head)
            .nth(i)
            .copied()
    }

    pub fn num_arcs(&self) -> usize {
        self.num_arcs
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        self.heads.iter().enumerate().filter_map(|(dependent, h)| {
            h.map(|(head, label)| Arc {
                head,
                dependent,
                label,
            })
        })
    }

    fn add_arc(&mut self, head: usize, dependent: usize, label: usize) {
        debug_assert!(self.heads[dependent].is_none());
        self.heads[dependent] = Some((head, label));
        let children = &mut self.children[head];
        let pos = children.partition_point(|&c| c < dependent);
        children.insert(pos, dependent);
        self.num_arcs += 1;
    }
}

/// How the artificial root may take dependents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootPolicy {
    /// The root takes exactly one dependent, attached last by `Right`.
    #[default]
    Single,
    /// The root may take any number of dependents.
    Multiple,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionSystem {
    pub root_policy: RootPolicy,
}

impl TransitionSystem {
    pub fn new(root_policy: RootPolicy) -> Self {
        TransitionSystem { root_policy }
    }

    /// The root on the stack, all tokens in the buffer. Rejects empty sentences.
    pub fn initial(&self, sentence_len: usize) -> Result<Configuration> {
        if sentence_len == 0 {
            return Err(Error::Config("cannot parse an empty sentence".into()));
        }
        Ok(Configuration {
            stack: vec![0],
            next: 1,
            len: sentence_len,
            heads: vec![None; sentence_len + 1],
            children: vec![Vec::new(); sentence_len + 1],
            num_arcs: 0,
        })
    }

    pub fn initial_config(&self, sentence: &Sentence) -> Result<Configuration> {
        self.initial(sentence.len())
    }

    pub fn is_terminal(&self, config: &Configuration) -> bool {
        config.buffer_len() == 0 && config.stack == [0]
    }

    /// Why `kind` cannot be applied, or `None` when it is legal.
    fn violation(&self, config: &Configuration, kind: TransitionKind) -> Option<&'static str> {
        let depth = config.stack.len();
        let buffer_empty = config.buffer_len() == 0;
        let single = self.root_policy == RootPolicy::Single;
        match kind {
            TransitionKind::Shift => buffer_empty.then_some("buffer is empty"),
            TransitionKind::Left | TransitionKind::Right if depth < 2 => {
                Some("stack has fewer than two elements")
            }
            TransitionKind::Left2 | TransitionKind::Right2 if depth < 3 => {
                Some("stack has fewer than three elements")
            }
            TransitionKind::Left => {
                (config.stack[depth - 2] == 0).then_some("the root cannot be a dependent")
            }
            TransitionKind::Left2 => {
                (config.stack[depth - 3] == 0).then_some("the root cannot be a dependent")
            }
            TransitionKind::Right => (single && config.stack[depth - 2] == 0 && !(buffer_empty && depth == 2))
                .then_some("the root takes its single dependent only when it is the last unattached token"),
            TransitionKind::Right2 => (single && config.stack[depth - 3] == 0)
                .then_some("the root takes its single dependent only when it is the last unattached token"),
        }
    }

    pub fn is_legal(&self, config: &Configuration, kind: TransitionKind) -> bool {
        self.violation(config, kind).is_none()
    }

    pub fn legal(&self, config: &Configuration) -> KindSet {
        TransitionKind::ALL
            .into_iter()
            .filter(|&k| self.is_legal(config, k))
            .collect()
    }

    /// Applies `transition` in place.
    pub fn apply_mut(&self, config: &mut Configuration, transition: Transition) -> Result<()> {
        if let Some(reason) = self.violation(config, transition.kind()) {
            return Err(Error::IllegalTransition {
                kind: transition.kind(),
                reason,
            });
        }
        let depth = config.stack.len();
        match transition {
            Transition::Shift => {
                config.stack.push(config.next);
                config.next += 1;
            }
            Transition::Left(label) => {
                let dependent = config.stack.remove(depth - 2);
                let head = config.stack[depth - 2];
                config.add_arc(head, dependent, label);
            }
            Transition::Right(label) => {
                let dependent = config.stack.pop().unwrap();
                let head = config.stack[depth - 2];
                config.add_arc(head, dependent, label);
            }
            Transition::Left2(label) => {
                let dependent = config.stack.remove(depth - 3);
                let head = config.stack[depth - 2];
                config.add_arc(head, dependent, label);
            }
            Transition::Right2(label) => {
                let dependent = config.stack.pop().unwrap();
                let head = config.stack[depth - 3];
                config.add_arc(head, dependent, label);
            }
        }
        Ok(())
    }

    pub fn apply(&self, config: &Configuration, transition: Transition) -> Result<Configuration> {
        let mut next = config.clone();
        self.apply_mut(&mut next, transition)?;
        Ok(next)
    }

    /// Static oracle: the next transition towards `gold`, preferring
    /// `Left`, `Right`, `Left2`, `Right2`, then `Shift`.
    pub fn oracle_next(&self, config: &Configuration, gold: &GoldTree) -> Result<Transition> {
        let finished = |token: usize| config.children[token].len() == gold.num_children[token];
        let gold_head = |token: usize| if token == 0 { None } else { Some(gold.heads[token]) };

        let top = config.stack_from_top(0);
        let second = config.stack_from_top(1);
        let third = config.stack_from_top(2);

        let candidates = [
            (TransitionKind::Left, second, top),
            (TransitionKind::Right, top, second),
            (TransitionKind::Left2, third, top),
            (TransitionKind::Right2, top, third),
        ];
        for (kind, dependent, head) in candidates {
            if let (Some(dependent), Some(head)) = (dependent, head) {
                if gold_head(dependent) == Some(head)
                    && finished(dependent)
                    && self.is_legal(config, kind)
                {
                    return Ok(Transition::with_kind(kind, gold.labels[dependent]));
                }
            }
        }

        if config.buffer_len() > 0 {
            Ok(Transition::Shift)
        } else {
            Err(Error::UnreachableTree)
        }
    }

    /// Runs the static oracle from the initial configuration to the end,
    /// returning every visited configuration with the transition taken there.
    pub fn derive(&self, gold: &GoldTree) -> Result<Vec<(Configuration, Transition)>> {
        let mut config = self.initial(gold.len())?;
        let mut derivation = Vec::with_capacity(2 * gold.len());
        while !self.is_terminal(&config) {
            let transition = self.oracle_next(&config, gold)?;
            let next = self.apply(&config, transition)?;
            derivation.push((config, transition));
            config = next;
        }
        Ok(derivation)
    }
}

/// Gold heads and label indices of a sentence, indexed by token position
/// (position 0 is the root and carries no annotation).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldTree {
    heads: Vec<usize>,
    labels: Vec<usize>,
    num_children: Vec<usize>,
}

impl GoldTree {
    /// `heads[i]` and `labels[i]` annotate token `i + 1`.
    pub fn new(heads: &[usize], labels: &[usize]) -> Self {
        assert_eq!(heads.len(), labels.len());
        let n = heads.len();
        let mut num_children = vec![0; n + 1];
        for &h in heads {
            num_children[h] += 1;
        }
        GoldTree {
            heads: std::iter::once(0).chain(heads.iter().copied()).collect(),
            labels: std::iter::once(0).chain(labels.iter().copied()).collect(),
            num_children,
        }
    }

    /// Resolves label names through the vocabulary. Fails on unseen labels.
    pub fn from_sentence(sentence: &Sentence, vocab: &Vocabulary) -> Result<Self> {
        let labels = sentence
            .tokens
            .iter()
            .map(|t| {
                vocab
                    .label_index(&t.label)
                    .ok_or_else(|| Error::Config(format!("unknown dependency label {:?}", t.label)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GoldTree::new(&sentence.heads(), &labels))
    }

    pub fn len(&self) -> usize {
        self.heads.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn head(&self, token: usize) -> usize {
        self.heads[token]
    }

    pub fn label(&self, token: usize) -> usize {
        self.labels[token]
    }

    /// Gold arcs in dependent order.
    pub fn arcs(&self) -> Vec<Arc> {
        (1..self.heads.len())
            .map(|d| Arc {
                head: self.heads[d],
                dependent: d,
                label: self.labels[d],
            })
            .collect()
    }
}
