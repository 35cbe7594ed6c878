use std::io::{BufRead, Write};

use super::{check_prediction_shape, Attachment, Sentence, Token};
use crate::error::{Error, Result};

const HEAD_COLUMN: usize = 6;
const LABEL_COLUMN: usize = 7;
const MIN_COLUMNS: usize = 8;

#[derive(Clone, Debug)]
pub struct ReadOptions {
    /// 0-based column holding the POS tag. 4 is the fine tag column of
    /// CoNLL-X (and XPOS in CoNLL-U); 3 selects the coarse/UPOS column.
    pub tag_column: usize,
    /// Reject sentences whose heads do not form a tree. When false, a `_`
    /// head is accepted and read as 0, which allows parsing raw input.
    pub require_tree: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            tag_column: 4,
            require_tree: true,
        }
    }
}

/// Reads a CoNLL-X/CoNLL-U treebank with the default options.
pub fn read_conll<R: BufRead>(reader: R) -> Result<Vec<Sentence>> {
    read_conll_with(reader, &ReadOptions::default())
}

pub fn read_conll_with<R: BufRead>(reader: R, options: &ReadOptions) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();

    let finish = |tokens: &mut Vec<Token>, sentences: &mut Vec<Sentence>| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let sentence = Sentence::new(std::mem::take(tokens));
        if options.require_tree {
            sentence.validate_tree(sentences.len())?;
        }
        sentences.push(sentence);
        Ok(())
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_number = lineno + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() {
            finish(&mut tokens, &mut sentences)?;
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }

        let columns: Vec<&str> = if trimmed.contains('\t') {
            trimmed.split('\t').collect()
        } else {
            trimmed.split_whitespace().collect()
        };
        let parse_err = |message: String| Error::Parse {
            line: line_number,
            message,
        };
        if columns.len() < MIN_COLUMNS.max(options.tag_column + 1) {
            return Err(parse_err(format!(
                "expected at least {} columns, found {}",
                MIN_COLUMNS.max(options.tag_column + 1),
                columns.len()
            )));
        }

        // Multiword ranges (1-2) and empty nodes (1.1) are not syntactic tokens.
        let index = match columns[0].parse::<usize>() {
            Ok(i) => i,
            Err(_) if columns[0].contains(['-', '.']) => continue,
            Err(_) => return Err(parse_err(format!("invalid token id {:?}", columns[0]))),
        };
        if index != tokens.len() + 1 {
            return Err(parse_err(format!(
                "expected token id {}, found {}",
                tokens.len() + 1,
                index
            )));
        }

        let head = match columns[HEAD_COLUMN].parse::<usize>() {
            Ok(h) => h,
            Err(_) if !options.require_tree && columns[HEAD_COLUMN] == "_" => 0,
            Err(_) => {
                return Err(parse_err(format!(
                    "non-numeric head {:?}",
                    columns[HEAD_COLUMN]
                )))
            }
        };

        tokens.push(Token::new(
            index,
            columns[1],
            columns[options.tag_column],
            head,
            columns[LABEL_COLUMN],
        ));
    }
    finish(&mut tokens, &mut sentences)?;

    Ok(sentences)
}

/// Writes sentences in 10-column CoNLL-X layout, taking heads and labels from
/// `predicted` rather than from the sentences' own annotation.
///
/// The tag is written to both POS columns so that either column choice reads it back.
pub fn write_conll<W: Write>(
    mut writer: W,
    sentences: &[Sentence],
    predicted: &[Vec<Attachment>],
) -> Result<()> {
    check_prediction_shape(sentences, predicted)?;
    for (sentence, attachments) in sentences.iter().zip(predicted) {
        for (token, attachment) in sentence.tokens.iter().zip(attachments) {
            writeln!(
                writer,
                "{}\t{}\t_\t{}\t{}\t_\t{}\t{}\t_\t_",
                token.index,
                token.form,
                token.tag,
                token.tag,
                attachment.head,
                attachment.label
            )?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EIN_HAUS: &str = "1\tein\t_\t_\tART\t_\t2\tdet\t_\t_\n2\tHaus\t_\t_\tN\t_\t0\troot\t_\t_\n";

    #[test]
    fn minimal_sentence() {
        let sentences = read_conll(EIN_HAUS.as_bytes()).unwrap();
        assert_eq!(sentences.len(), 1);
        assert_eq!(sentences[0].len(), 2);
        assert_eq!(sentences[0].heads(), vec![2, 0]);
        assert_eq!(sentences[0].tokens[0].tag, "ART");
        assert_eq!(sentences[0].tokens[1].label, "root");
    }

    #[test]
    fn empty_stream() {
        assert!(read_conll("".as_bytes()).unwrap().is_empty());
        assert!(read_conll("\n\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn non_numeric_head_names_line() {
        let input = "1\tein\t_\t_\tART\t_\t2\tdet\t_\t_\n2\tHaus\t_\t_\tN\t_\tx\troot\t_\t_\n";
        match read_conll(input.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("head"));
            }
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn wrong_column_count() {
        let input = "1\tein\t_\t_\tART\n";
        assert!(matches!(
            read_conll(input.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn cycle_is_structural_error() {
        let input = "1\ta\t_\t_\tX\t_\t2\tl\n2\tb\t_\t_\tX\t_\t1\tl\n\n1\tc\t_\t_\tX\t_\t0\tl\n";
        assert!(matches!(
            read_conll(input.as_bytes()),
            Err(Error::Structure { sentence: 0, .. })
        ));
        let input = "1\tc\t_\t_\tX\t_\t0\tl\n\n1\ta\t_\t_\tX\t_\t2\tl\n2\tb\t_\t_\tX\t_\t1\tl\n";
        assert!(matches!(
            read_conll(input.as_bytes()),
            Err(Error::Structure { sentence: 1, .. })
        ));
    }

    #[test]
    fn skips_multiword_and_empty_nodes() {
        let input = "# sent_id = 1\n1-2\tzum\t_\t_\t_\t_\t_\t_\t_\t_\n1\tzu\t_\t_\tAPPR\t_\t0\troot\t_\t_\n2\tdem\t_\t_\tART\t_\t1\tdet\t_\t_\n2.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n";
        let s = read_conll(input.as_bytes()).unwrap();
        assert_eq!(s[0].len(), 2);
        assert_eq!(s[0].tokens[1].form, "dem");
    }

    #[test]
    fn tag_column_option() {
        let input = "1\tein\t_\tDET\tART\t_\t0\troot\t_\t_\n";
        let opts = ReadOptions {
            tag_column: 3,
            ..Default::default()
        };
        let s = read_conll_with(input.as_bytes(), &opts).unwrap();
        assert_eq!(s[0].tokens[0].tag, "DET");
    }

    #[test]
    fn unannotated_input() {
        let input = "1\tein\t_\t_\tART\t_\t_\t_\t_\t_\n";
        assert!(read_conll(input.as_bytes()).is_err());
        let opts = ReadOptions {
            require_tree: false,
            ..Default::default()
        };
        let s = read_conll_with(input.as_bytes(), &opts).unwrap();
        assert_eq!(s[0].tokens[0].head, 0);
    }

    #[test]
    fn write_uses_predictions() {
        let sentences = read_conll(EIN_HAUS.as_bytes()).unwrap();
        let predicted = vec![vec![Attachment::new(0, "root"), Attachment::new(1, "nk")]];
        let mut out = Vec::new();
        write_conll(&mut out, &sentences, &predicted).unwrap();
        let back = read_conll(out.as_slice()).unwrap();
        assert_eq!(back[0].heads(), vec![0, 1]);
        assert_eq!(back[0].tokens[1].label, "nk");
        assert_eq!(back[0].tokens[1].form, "Haus");
    }

    #[test]
    fn write_round_trip_and_empty() {
        let sentences = read_conll(EIN_HAUS.as_bytes()).unwrap();
        let gold: Vec<_> = sentences.iter().map(Sentence::gold_attachments).collect();
        let mut out = Vec::new();
        write_conll(&mut out, &sentences, &gold).unwrap();
        assert_eq!(read_conll(out.as_slice()).unwrap(), sentences);

        let mut out = Vec::new();
        write_conll(&mut out, &[], &[]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn write_rejects_missing_prediction() {
        let sentences = read_conll(EIN_HAUS.as_bytes()).unwrap();
        let predicted = vec![vec![Attachment::new(0, "root")]];
        assert!(write_conll(Vec::new(), &sentences, &predicted).is_err());
    }
}
