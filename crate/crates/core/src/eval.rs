//! Attachment scores, IV/OOV buckets, the character-thirds masking ablation
//! and result tables.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::corpus::{check_prediction_shape, Attachment, Sentence, Token, Vocabulary};
use crate::error::{Error, Result};

/// Character written in place of masked characters. It never occurs in a
/// treebank, so it reads back as the unknown character.
pub const MASK_CHAR: char = '\u{FFFD}';

/// Attachment counts over a set of tokens. Every token counts, punctuation included.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Score {
    pub total: usize,
    pub heads: usize,
    /// Tokens with both head and label correct.
    pub labeled: usize,
}

impl Score {
    fn add(&mut self, gold: &Token, predicted: &Attachment) {
        self.total += 1;
        if gold.head == predicted.head {
            self.heads += 1;
            if gold.label == predicted.label {
                self.labeled += 1;
            }
        }
    }

    /// Labeled attachment score; 0 for an empty set.
    pub fn las(&self) -> f64 {
        ratio(self.labeled, self.total)
    }

    /// Unlabeled attachment score; 0 for an empty set.
    pub fn uas(&self) -> f64 {
        ratio(self.heads, self.total)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn score(gold: &[Sentence], predicted: &[Vec<Attachment>]) -> Result<Score> {
    check_prediction_shape(gold, predicted)?;
    let mut s = Score::default();
    for (sentence, attachments) in gold.iter().zip(predicted) {
        for (token, attachment) in sentence.tokens.iter().zip(attachments) {
            s.add(token, attachment);
        }
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BucketScores {
    /// Dependent and gold head both seen in training.
    pub iv: Score,
    /// At least one of them unseen.
    pub oov: Score,
}

/// Splits tokens by whether the dependent and its gold head occurred in
/// training. The root counts as in-vocabulary.
pub fn oov_buckets(gold: &[Sentence], predicted: &[Vec<Attachment>], vocab: &Vocabulary) -> Result<BucketScores> {
    check_prediction_shape(gold, predicted)?;
    let mut buckets = BucketScores::default();
    for (sentence, attachments) in gold.iter().zip(predicted) {
        let seen: Vec<bool> = sentence.tokens.iter().map(|t| vocab.in_training(&t.form)).collect();
        for (i, (token, attachment)) in sentence.tokens.iter().zip(attachments).enumerate() {
            let head_seen = token.head == 0 || seen[token.head - 1];
            let bucket = if seen[i] && head_seen {
                &mut buckets.iv
            } else {
                &mut buckets.oov
            };
            bucket.add(token, attachment);
        }
    }
    Ok(buckets)
}

/// Which thirds of every word are masked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MaskSpec {
    pub masked: [bool; 3],
}

impl MaskSpec {
    /// The six patterns masking one or two thirds.
    pub fn all() -> Vec<MaskSpec> {
        ["•bc", "a•c", "ab•", "a••", "•b•", "••c"]
            .iter()
            .map(|p| p.parse().expect("valid pattern"))
            .collect()
    }

    /// Pattern notation, e.g. `a•c` for a masked middle third.
    pub fn name(&self) -> String {
        self.masked
            .iter()
            .zip(['a', 'b', 'c'])
            .map(|(&m, c)| if m { '•' } else { c })
            .collect()
    }
}

impl FromStr for MaskSpec {
    type Err = Error;

    /// Accepts `•`, `*`, `_` or `.` for a masked third, so `a*c` equals `a•c`.
    fn from_str(s: &str) -> Result<MaskSpec> {
        let chars: Vec<char> = s.trim().chars().collect();
        let bad = || Error::Config(format!("unknown mask pattern {:?}", s));
        if chars.len() != 3 {
            return Err(bad());
        }
        let mut masked = [false; 3];
        for (i, (&c, letter)) in chars.iter().zip(['a', 'b', 'c']).enumerate() {
            masked[i] = match c {
                '•' | '*' | '_' | '.' => true,
                c if c.eq_ignore_ascii_case(&letter) => false,
                _ => return Err(bad()),
            };
        }
        let count = masked.iter().filter(|&&m| m).count();
        if count == 0 || count == 3 {
            return Err(bad());
        }
        Ok(MaskSpec { masked })
    }
}

/// Ends of the first and second thirds of a word of `len` characters.
/// Remainder characters go to the earlier thirds.
pub fn third_boundaries(len: usize) -> (usize, usize) {
    (len.div_ceil(3), len - len / 3)
}

pub fn mask_form(form: &str, spec: &MaskSpec) -> String {
    let len = form.chars().count();
    let (first, second) = third_boundaries(len);
    form.chars()
        .enumerate()
        .map(|(i, c)| {
            let third = if i < first {
                0
            } else if i < second {
                1
            } else {
                2
            };
            if spec.masked[third] {
                MASK_CHAR
            } else {
                c
            }
        })
        .collect()
}

/// Masks the forms of every token; all other fields are kept.
pub fn mask_corpus(corpus: &[Sentence], spec: &MaskSpec) -> Vec<Sentence> {
    corpus
        .iter()
        .map(|s| {
            let mut s = s.clone();
            for t in &mut s.tokens {
                t.form = mask_form(&t.form, spec);
            }
            s
        })
        .collect()
}

/// A named result row.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedScore {
    pub name: String,
    pub score: Score,
    pub buckets: Option<BucketScores>,
}

/// The same results as an aligned text table and as tab-separated values.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub text: String,
    pub tsv: String,
}

/// Percentage with two decimals.
pub fn percent(x: f64) -> String {
    format!("{:.2}", (x * 10000.0).round() / 100.0)
}

fn signed_percent(x: f64) -> String {
    let p = percent(x);
    if p.starts_with('-') || p == "0.00" {
        p
    } else {
        format!("+{}", p)
    }
}

/// Tabulates LAS and UAS, with IV/OOV LAS when every row has buckets.
/// Δ columns are each row minus the first row.
pub fn report(results: &[NamedScore]) -> Report {
    let with_buckets = !results.is_empty() && results.iter().all(|r| r.buckets.is_some());
    let mut header = vec!["run", "LAS", "UAS", "ΔLAS"];
    if with_buckets {
        header.extend(["IV", "OOV", "ΔIV", "ΔOOV"]);
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    if let Some(base) = results.first() {
        for r in results {
            let mut row = vec![
                r.name.clone(),
                percent(r.score.las()),
                percent(r.score.uas()),
                signed_percent(r.score.las() - base.score.las()),
            ];
            if with_buckets {
                let (b, b0) = (r.buckets.unwrap(), base.buckets.unwrap());
                row.push(percent(b.iv.las()));
                row.push(percent(b.oov.las()));
                row.push(signed_percent(b.iv.las() - b0.iv.las()));
                row.push(signed_percent(b.oov.las() - b0.oov.las()));
            }
            rows.push(row);
        }
    }

    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }

    let mut text = String::new();
    let mut tsv = String::new();
    let line = |cells: &[String], text: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                let fill = " ".repeat(w - c.chars().count());
                if i == 0 {
                    format!("{}{}", c, fill)
                } else {
                    format!("{}{}", fill, c)
                }
            })
            .collect();
        let _ = writeln!(text, "{}", padded.join("  ").trim_end());
    };
    let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    line(&header, &mut text);
    let _ = writeln!(tsv, "{}", header.join("\t"));
    for row in &rows {
        line(row, &mut text);
        let _ = writeln!(tsv, "{}", row.join("\t"));
    }
    Report { text, tsv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    fn sentence() -> Sentence {
        Sentence::from_tuples(vec![
            ("a", "X", 0, "root"),
            ("b", "X", 1, "obj"),
            ("c", "X", 2, "obj"),
            ("d", "X", 1, "mod"),
        ])
    }

    #[test]
    fn perfect() {
        let s = sentence();
        let s = score(std::slice::from_ref(&s), &[s.gold_attachments()]).unwrap();
        assert_eq!((s.las(), s.uas()), (1.0, 1.0));
    }

    #[test]
    fn one_wrong_head_of_two() {
        let s = Sentence::from_tuples(vec![("a", "X", 0, "root"), ("b", "X", 1, "obj")]);
        let pred = vec![Attachment::new(0, "root"), Attachment::new(0, "obj")];
        assert_eq!(score(&[s], &[pred]).unwrap().uas(), 0.5);
    }

    #[test]
    fn one_wrong_label_of_four() {
        let s = sentence();
        let mut pred = s.gold_attachments();
        pred[3].label = "obj".into();
        let sc = score(&[s], &[pred]).unwrap();
        assert_eq!((sc.las(), sc.uas()), (0.75, 1.0));
    }

    #[test]
    fn count_mismatch() {
        let s = sentence();
        assert!(score(&[s], &[vec![Attachment::new(0, "root")]]).is_err());
    }

    #[test]
    fn bucket_rule() {
        let train = vec![Sentence::from_tuples(vec![("a", "X", 0, "root"), ("b", "X", 1, "obj")])];
        let vocab = build_vocab(&train);
        let dev = Sentence::from_tuples(vec![("a", "X", 0, "root"), ("b", "X", 1, "obj"), ("X", "X", 2, "obj")]);
        let b = oov_buckets(std::slice::from_ref(&dev), &[dev.gold_attachments()], &vocab).unwrap();
        assert_eq!(b.iv.total, 2);
        assert_eq!(b.oov.total, 1);
        let none = oov_buckets(&train, &[train[0].gold_attachments()], &vocab).unwrap();
        assert_eq!(none.oov.total, 0);
    }

    #[test]
    fn middle_third() {
        let spec: MaskSpec = "a•c".parse().unwrap();
        let m = mask_form("abcdef", &spec);
        assert_eq!(m.replace(MASK_CHAR, "?"), "ab??ef");
    }

    #[test]
    fn single_character_is_first_third() {
        assert_eq!(mask_form("x", &"ab•".parse().unwrap()), "x");
        assert_eq!(third_boundaries(1), (1, 1));
        assert_eq!(third_boundaries(4), (2, 3));
        assert_eq!(third_boundaries(5), (2, 4));
    }

    #[test]
    fn only_last_third_visible() {
        let spec: MaskSpec = "••c".parse().unwrap();
        assert_eq!(mask_form("abcdefg", &spec).replace(MASK_CHAR, "?"), "?????fg");
    }

    #[test]
    fn patterns() {
        let all = MaskSpec::all();
        assert_eq!(all.len(), 6);
        for spec in &all {
            assert_eq!(spec.name().parse::<MaskSpec>().unwrap(), *spec);
        }
        assert_eq!("A*C".parse::<MaskSpec>().unwrap(), "a•c".parse().unwrap());
        for bad in ["abc", "•••", "ab", "xbc", "a•cd"] {
            assert!(bad.parse::<MaskSpec>().is_err(), "{}", bad);
        }
    }

    #[test]
    fn report_formatting() {
        let run = |name: &str, labeled, heads| NamedScore {
            name: name.into(),
            score: Score {
                total: 10000,
                heads,
                labeled,
            },
            buckets: None,
        };
        let r = report(&[run("WORD", 8058, 8500), run("CNN", 8275, 8600)]);
        assert!(r.text.contains("82.75"));
        let lines: Vec<&str> = r.tsv.lines().collect();
        assert_eq!(lines[0], "run\tLAS\tUAS\tΔLAS");
        assert_eq!(lines[2], "CNN\t82.75\t86.00\t+2.17");

        let empty = report(&[]);
        assert_eq!(empty.tsv.lines().count(), 1);
        assert_eq!(empty.text.lines().count(), 1);
    }
}
