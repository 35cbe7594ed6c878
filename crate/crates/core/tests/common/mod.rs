//! A generated agglutinative toy language.
//!
//! Sentences are verb-final sequences of noun phrases `[adjective] noun`.
//! Each noun carries a case suffix that alone determines its dependency
//! label; genitive nouns attach to the following noun, all other nouns to
//! the verb. Tags are coarse (`N`, `A`, `V`), so the label of an unseen noun
//! can only be recovered from its characters.

#![allow(dead_code)]

use chardep::corpus::{Sentence, Token};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// (suffix, label) of the non-genitive cases.
const CASES: [(&str, &str); 4] = [("ak", "nsubj"), ("ot", "obj"), ("ine", "iobj"), ("ban", "obl")];
const GENITIVE: (&str, &str) = ("esh", "nmod");
const ADJ_SUFFIX: &str = "u";
const VERB_SUFFIXES: [&str; 2] = ["ta", "mi"];

const CONSONANTS: &[char] = &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

pub struct Lexicon {
    pub train_nouns: Vec<String>,
    pub new_nouns: Vec<String>,
    pub adjectives: Vec<String>,
    pub verbs: Vec<String>,
}

fn stem<R: Rng>(rng: &mut R) -> String {
    let syllables = rng.random_range(1..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(*CONSONANTS.choose(rng).unwrap());
        s.push(*VOWELS.choose(rng).unwrap());
    }
    s.push(*CONSONANTS.choose(rng).unwrap());
    s
}

fn distinct_stems<R: Rng>(n: usize, taken: &mut std::collections::HashSet<String>, rng: &mut R) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s = stem(rng);
        if taken.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

impl Lexicon {
    pub fn new(seed: u64, nouns: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut taken = std::collections::HashSet::new();
        Lexicon {
            train_nouns: distinct_stems(nouns, &mut taken, &mut rng),
            new_nouns: distinct_stems(nouns, &mut taken, &mut rng),
            adjectives: distinct_stems(30, &mut taken, &mut rng),
            verbs: distinct_stems(20, &mut taken, &mut rng),
        }
    }
}

/// One sentence. Nouns come from the held-out stems with probability `new_noun_rate`.
pub fn sentence<R: Rng>(lex: &Lexicon, new_noun_rate: f64, rng: &mut R) -> Sentence {
    // Each phrase: (adjective?, noun form, label, genitive).
    let phrases = rng.random_range(1..=3);
    let mut rows: Vec<(String, &str, usize, &str)> = Vec::new();
    let mut noun_positions = Vec::new();
    let mut pending_genitive: Vec<usize> = Vec::new();
    let mut attach_to_verb: Vec<usize> = Vec::new();

    let pick_noun = |rng: &mut R| -> String {
        let pool = if rng.random::<f64>() < new_noun_rate {
            &lex.new_nouns
        } else {
            &lex.train_nouns
        };
        pool.choose(rng).unwrap().clone()
    };

    for _ in 0..phrases {
        if rng.random::<f64>() < 0.3 {
            let stem = pick_noun(rng);
            rows.push((format!("{}{}", stem, GENITIVE.0), "N", 0, GENITIVE.1));
            pending_genitive.push(rows.len());
        }
        let adjective = rng.random::<f64>() < 0.35;
        if adjective {
            let a = lex.adjectives.choose(rng).unwrap();
            rows.push((format!("{}{}", a, ADJ_SUFFIX), "A", rows.len() + 2, "amod"));
        }
        let (suffix, label) = *CASES.choose(rng).unwrap();
        let stem = pick_noun(rng);
        rows.push((format!("{}{}", stem, suffix), "N", 0, label));
        let noun = rows.len();
        for g in pending_genitive.drain(..) {
            rows[g - 1].2 = noun;
        }
        noun_positions.push(noun);
        attach_to_verb.push(noun);
    }
    let verb = lex.verbs.choose(rng).unwrap();
    let suffix = VERB_SUFFIXES.choose(rng).unwrap();
    rows.push((format!("{}{}", verb, suffix), "V", 0, "root"));
    let verb_index = rows.len();
    for n in attach_to_verb {
        rows[n - 1].2 = verb_index;
    }

    Sentence::new(
        rows.into_iter()
            .enumerate()
            .map(|(i, (form, tag, head, label))| Token::new(i + 1, form, tag, head, label))
            .collect(),
    )
}

pub fn corpus(lex: &Lexicon, n: usize, new_noun_rate: f64, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sentence(lex, new_noun_rate, &mut rng)).collect()
}
