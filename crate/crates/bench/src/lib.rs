//! Inputs shared by the benchmarks.

use chardep::{Sentence, Token};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random sentences with chain-shaped projective trees and word forms drawn
/// from a vocabulary of `vocab` random strings.
pub fn corpus(sentences: usize, vocab: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..vocab)
        .map(|_| {
            let len = rng.random_range(2..12);
            (0..len).map(|_| rng.random_range('a'..='z')).collect()
        })
        .collect();
    (0..sentences)
        .map(|_| {
            let n = rng.random_range(5..30);
            let root = rng.random_range(1..=n);
            let tokens = (1..=n)
                .map(|i| {
                    let head = match i.cmp(&root) {
                        std::cmp::Ordering::Less => i + 1,
                        std::cmp::Ordering::Equal => 0,
                        std::cmp::Ordering::Greater => i - 1,
                    };
                    let label = if head == 0 { "root" } else { ["nsubj", "obj", "amod"][i % 3] };
                    let tag = ["N", "V", "A", "D"][rng.random_range(0..4)];
                    Token::new(i, words[rng.random_range(0..vocab)].clone(), tag, head, label)
                })
                .collect();
            Sentence::new(tokens)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn corpus_is_valid_and_deterministic() {
        let c = super::corpus(20, 50, 1);
        for (i, s) in c.iter().enumerate() {
            s.validate_tree(i).unwrap();
            assert!(s.is_projective());
        }
        assert_eq!(c, super::corpus(20, 50, 1));
    }
}
