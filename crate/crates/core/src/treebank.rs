//! CoNLL-X treebank reading and writing.
//!
//! Sentences are read from the 10-column CoNLL-X layout (`ID FORM LEMMA CPOS
//! POS FEATS HEAD DEPREL PHEAD PDEPREL`), one token per line, with blank lines
//! between sentences. Head indices are stored with `0` denoting the artificial
//! root. CoNLL-U extensions (comment lines, multiword ranges, empty nodes) are
//! rejected.

use std::fmt::{self, Write as _};

use thiserror::Error;

const N_COLUMNS: usize = 10;
const EMPTY: &str = "_";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConllError {
    #[error("line {line}: expected {N_COLUMNS} tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },

    #[error("line {line}: invalid {column} value `{value}`")]
    InvalidNumber {
        line: usize,
        column: &'static str,
        value: String,
    },

    #[error("line {line}: {what} are CoNLL-U constructs and are not supported")]
    Unsupported { line: usize, what: &'static str },

    #[error("line {line}: token id {found} out of sequence (expected {expected})")]
    IdSequence {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: empty {column} column")]
    EmptyField { line: usize, column: &'static str },

    #[error("sentence {sentence} (line {line}): {reason}")]
    InvalidTree {
        sentence: usize,
        line: usize,
        reason: TreeError,
    },

    #[error("sentence {sentence}: {found} predicted attachments for {expected} tokens")]
    LengthMismatch {
        sentence: usize,
        expected: usize,
        found: usize,
    },

    #[error("{found} predicted sentences for {expected} input sentences")]
    SentenceCountMismatch { expected: usize, found: usize },

    #[error("requested {requested} test sentences from a corpus of {available}")]
    SplitTooLarge { requested: usize, available: usize },
}

/// Structural problems with a sentence's head assignment.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("no token is attached to the root")]
    NoRoot,
    #[error("multiple root tokens: {0:?}")]
    MultipleRoots(Vec<usize>),
    #[error("token {token} has head {head} outside the sentence")]
    HeadOutOfRange { token: usize, head: usize },
    #[error("token {0} is its own head")]
    SelfLoop(usize),
    #[error("token {0} is part of a cycle")]
    Cycle(usize),
    #[error("empty sentence")]
    Empty,
}

/// A single token. `index` is 1-based and `head == 0` attaches to the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub cpos: String,
    pub pos: String,
    pub feats: String,
    pub head: usize,
    pub deprel: String,
}

impl Token {
    /// Token with `_` in the columns the parser does not use.
    pub fn new(
        index: usize,
        form: impl Into<String>,
        pos: impl Into<String>,
        head: usize,
        deprel: impl Into<String>,
    ) -> Self {
        Token {
            index,
            form: form.into(),
            lemma: EMPTY.to_owned(),
            cpos: EMPTY.to_owned(),
            pos: pos.into(),
            feats: EMPTY.to_owned(),
            head,
            deprel: deprel.into(),
        }
    }
}

/// A predicted attachment for one token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadAssignment {
    pub head: usize,
    pub deprel: String,
}

impl HeadAssignment {
    pub fn new(head: usize, deprel: impl Into<String>) -> Self {
        HeadAssignment {
            head,
            deprel: deprel.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    /// Builds a sentence from `(form, pos, head, deprel)` tuples.
    pub fn from_parts<'a, I>(parts: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, usize, &'a str)>,
    {
        Sentence {
            tokens: parts
                .into_iter()
                .enumerate()
                .map(|(i, (form, pos, head, deprel))| Token::new(i + 1, form, pos, head, deprel))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    /// Gold attachments of this sentence.
    pub fn assignments(&self) -> Vec<HeadAssignment> {
        self.tokens
            .iter()
            .map(|t| HeadAssignment::new(t.head, t.deprel.clone()))
            .collect()
    }

    /// Checks the single-root, in-range, and acyclicity constraints.
    pub fn validate(&self) -> Result<(), TreeError> {
        validate_heads(&self.heads())
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let forms: Vec<&str> = self.forms().collect();
        f.write_str(&forms.join(" "))
    }
}

/// Validates a head vector where `heads[i]` is the head of token `i + 1`.
pub fn validate_heads(heads: &[usize]) -> Result<(), TreeError> {
    let n = heads.len();
    if n == 0 {
        return Err(TreeError::Empty);
    }

    let mut roots = Vec::new();
    for (i, &head) in heads.iter().enumerate() {
        let token = i + 1;
        if head > n {
            return Err(TreeError::HeadOutOfRange { token, head });
        }
        if head == token {
            return Err(TreeError::SelfLoop(token));
        }
        if head == 0 {
            roots.push(token);
        }
    }
    match roots.len() {
        0 => return Err(TreeError::NoRoot),
        1 => {}
        _ => return Err(TreeError::MultipleRoots(roots)),
    }

    // 0 = unvisited, 1 = on current path, 2 = reaches the root.
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut node = start;
        while state[node] == 0 {
            state[node] = 1;
            path.push(node);
            node = heads[node - 1];
        }
        if state[node] == 1 {
            return Err(TreeError::Cycle(node));
        }
        for p in path {
            state[p] = 2;
        }
    }
    Ok(())
}

/// Reads a CoNLL-X treebank, validating every sentence as a tree.
pub fn parse_conll(text: &str) -> Result<Vec<Sentence>, ConllError> {
    read_blocks(text, true)
}

/// Reads CoNLL-X input whose HEAD and DEPREL columns are ignored.
///
/// Any HEAD value (including `_` or garbage) is accepted and stored as `0`,
/// DEPREL is kept verbatim, and no tree validation is performed. This is the
/// reader for parser input.
pub fn parse_conll_unannotated(text: &str) -> Result<Vec<Sentence>, ConllError> {
    read_blocks(text, false)
}

fn read_blocks(text: &str, annotated: bool) -> Result<Vec<Sentence>, ConllError> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut block_start = 0;

    let finish = |tokens: &mut Vec<Token>, start: usize, sentences: &mut Vec<Sentence>| {
        if tokens.is_empty() {
            return Ok(());
        }
        let sentence = Sentence::new(std::mem::take(tokens));
        if annotated {
            sentence.validate().map_err(|reason| ConllError::InvalidTree {
                sentence: sentences.len() + 1,
                line: start,
                reason,
            })?;
        }
        sentences.push(sentence);
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            finish(&mut tokens, block_start, &mut sentences)?;
            continue;
        }
        if tokens.is_empty() {
            block_start = line_no;
        }
        if line.starts_with('#') {
            return Err(ConllError::Unsupported {
                line: line_no,
                what: "comment lines",
            });
        }

        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != N_COLUMNS {
            return Err(ConllError::ColumnCount {
                line: line_no,
                found: columns.len(),
            });
        }

        let id_field = columns[0];
        if id_field.contains('-') {
            return Err(ConllError::Unsupported {
                line: line_no,
                what: "multiword token ranges",
            });
        }
        if id_field.contains('.') {
            return Err(ConllError::Unsupported {
                line: line_no,
                what: "empty nodes",
            });
        }
        let index: usize = id_field.parse().map_err(|_| ConllError::InvalidNumber {
            line: line_no,
            column: "ID",
            value: id_field.to_owned(),
        })?;
        if index != tokens.len() + 1 {
            return Err(ConllError::IdSequence {
                line: line_no,
                expected: tokens.len() + 1,
                found: index,
            });
        }

        let form = columns[1];
        if form.is_empty() {
            return Err(ConllError::EmptyField {
                line: line_no,
                column: "FORM",
            });
        }
        let pos = if columns[4] == EMPTY || columns[4].is_empty() {
            columns[3]
        } else {
            columns[4]
        };
        if pos.is_empty() {
            return Err(ConllError::EmptyField {
                line: line_no,
                column: "POS",
            });
        }

        let head = if annotated {
            columns[6].parse().map_err(|_| ConllError::InvalidNumber {
                line: line_no,
                column: "HEAD",
                value: columns[6].to_owned(),
            })?
        } else {
            0
        };

        tokens.push(Token {
            index,
            form: form.to_owned(),
            lemma: non_empty(columns[2]),
            cpos: non_empty(columns[3]),
            pos: pos.to_owned(),
            feats: non_empty(columns[5]),
            head,
            deprel: non_empty(columns[7]),
        });
    }
    finish(&mut tokens, block_start, &mut sentences)?;

    Ok(sentences)
}

fn non_empty(field: &str) -> String {
    if field.is_empty() {
        EMPTY.to_owned()
    } else {
        field.to_owned()
    }
}

/// Writes sentences in CoNLL-X format. When `predicted` is given, its heads
/// and relations replace the gold HEAD and DEPREL columns.
pub fn write_conll(
    sentences: &[Sentence],
    predicted: Option<&[Vec<HeadAssignment>]>,
) -> Result<String, ConllError> {
    if let Some(predicted) = predicted {
        if predicted.len() != sentences.len() {
            return Err(ConllError::SentenceCountMismatch {
                expected: sentences.len(),
                found: predicted.len(),
            });
        }
        for (i, (s, p)) in sentences.iter().zip(predicted).enumerate() {
            if s.len() != p.len() {
                return Err(ConllError::LengthMismatch {
                    sentence: i + 1,
                    expected: s.len(),
                    found: p.len(),
                });
            }
        }
    }

    let mut out = String::new();
    for (si, sentence) in sentences.iter().enumerate() {
        for (ti, token) in sentence.tokens.iter().enumerate() {
            let (head, deprel) = match predicted {
                Some(p) => (p[si][ti].head, p[si][ti].deprel.as_str()),
                None => (token.head, token.deprel.as_str()),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t_\t_",
                ti + 1,
                token.form,
                token.lemma,
                token.cpos,
                token.pos,
                token.feats,
                head,
                deprel
            )
            .expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    Ok(out)
}

/// True iff no two arcs cross, counting the arc from the artificial root.
pub fn is_projective(sentence: &Sentence) -> bool {
    heads_projective(&sentence.heads())
}

/// Projectivity test on a raw head vector (`heads[i]` heads token `i + 1`).
pub fn heads_projective(heads: &[usize]) -> bool {
    let spans: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let d = i + 1;
            (h.min(d), h.max(d))
        })
        .collect();
    for (a, &(l1, r1)) in spans.iter().enumerate() {
        for &(l2, r2) in &spans[a + 1..] {
            if (l1 < l2 && l2 < r1 && r1 < r2) || (l2 < l1 && l1 < r2 && r2 < r1) {
                return false;
            }
        }
    }
    true
}

/// Train/test partition of a treebank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreebankSplit {
    pub train: Vec<Sentence>,
    pub test: Vec<Sentence>,
}

/// Holds out the final `test_size` sentences, in file order, for testing.
pub fn split_train_test(
    mut sentences: Vec<Sentence>,
    test_size: usize,
) -> Result<TreebankSplit, ConllError> {
    if test_size > sentences.len() {
        return Err(ConllError::SplitTooLarge {
            requested: test_size,
            available: sentences.len(),
        });
    }
    let test = sentences.split_off(sentences.len() - test_size);
    Ok(TreebankSplit {
        train: sentences,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TOKENS: &str = "1\tTôi\t_\tP\tP\t_\t2\tnsubj\t_\t_\n2\tcó\t_\tV\tV\t_\t0\troot\t_\t_\n";

    fn cat_sentence() -> Sentence {
        Sentence::from_parts([
            ("Tôi", "P", 2, "nsubj"),
            ("có", "V", 0, "root"),
            ("một", "M", 5, "det"),
            ("con", "Nc", 5, "nmod"),
            ("mèo", "N", 2, "dobj"),
        ])
    }

    #[test]
    fn minimal_block() {
        let sentences = parse_conll(TWO_TOKENS).unwrap();
        assert_eq!(sentences.len(), 1);
        let s = &sentences[0];
        assert_eq!(s.len(), 2);
        assert_eq!(s.tokens[0].form, "Tôi");
        assert_eq!(s.tokens[0].pos, "P");
        assert_eq!(s.heads(), vec![2, 0]);
        assert_eq!(s.tokens[1].deprel, "root");
    }

    #[test]
    fn empty_input() {
        assert!(parse_conll("").unwrap().is_empty());
        assert!(parse_conll("\n\n  \n").unwrap().is_empty());
    }

    #[test]
    fn pos_falls_back_to_cpos() {
        let text = "1\tx\t_\tN\t_\t_\t0\troot\t_\t_\n";
        assert_eq!(parse_conll(text).unwrap()[0].tokens[0].pos, "N");
    }

    #[test]
    fn crlf_and_missing_final_newline() {
        let text = "1\ta\t_\tN\tN\t_\t0\troot\t_\t_\r\n\r\n1\tb\t_\tN\tN\t_\t0\troot\t_\t_";
        let sentences = parse_conll(text).unwrap();
        assert_eq!(sentences.len(), 2);
        assert_eq!(sentences[0].tokens[0].deprel, "root");
    }

    #[test]
    fn column_count_error_has_line() {
        let text = "1\ta\t_\tN\tN\t_\t0\troot\t_\t_\n2\tb\tN\n";
        assert_eq!(
            parse_conll(text),
            Err(ConllError::ColumnCount { line: 2, found: 3 })
        );
    }

    #[test]
    fn non_integer_head() {
        let text = "1\ta\t_\tN\tN\t_\tx\troot\t_\t_\n";
        assert!(matches!(
            parse_conll(text),
            Err(ConllError::InvalidNumber {
                line: 1,
                column: "HEAD",
                ..
            })
        ));
    }

    #[test]
    fn conllu_rejected() {
        let comment = "# sent_id = 1\n1\ta\t_\tN\tN\t_\t0\troot\t_\t_\n";
        assert!(matches!(
            parse_conll(comment),
            Err(ConllError::Unsupported { line: 1, .. })
        ));
        let range = "1-2\tab\t_\t_\t_\t_\t_\t_\t_\t_\n";
        assert!(matches!(
            parse_conll(range),
            Err(ConllError::Unsupported { line: 1, .. })
        ));
    }

    #[test]
    fn cycle_and_multiroot_identify_sentence() {
        let ok = "1\ta\t_\tN\tN\t_\t0\troot\t_\t_\n\n";
        let cyclic = "1\ta\t_\tN\tN\t_\t2\tx\t_\t_\n2\tb\t_\tN\tN\t_\t1\tx\t_\t_\n3\tc\t_\tN\tN\t_\t0\troot\t_\t_\n";
        let err = parse_conll(&format!("{ok}{cyclic}")).unwrap_err();
        assert!(matches!(
            err,
            ConllError::InvalidTree {
                sentence: 2,
                line: 3,
                reason: TreeError::Cycle(_)
            }
        ));

        let multi = "1\ta\t_\tN\tN\t_\t0\troot\t_\t_\n2\tb\t_\tN\tN\t_\t0\troot\t_\t_\n";
        assert!(matches!(
            parse_conll(multi),
            Err(ConllError::InvalidTree {
                sentence: 1,
                reason: TreeError::MultipleRoots(_),
                ..
            })
        ));
    }

    #[test]
    fn unannotated_reader_ignores_heads() {
        let text = "1\ta\t_\tN\tN\t_\t_\t_\t_\t_\n2\tb\t_\tN\tN\t_\tgarbage\tx\t_\t_\n";
        let sentences = parse_conll_unannotated(text).unwrap();
        assert_eq!(sentences[0].heads(), vec![0, 0]);
    }

    #[test]
    fn predicted_overrides_gold() {
        let s = parse_conll(TWO_TOKENS).unwrap();
        let predicted = vec![vec![
            HeadAssignment::new(0, "root"),
            HeadAssignment::new(1, "dobj"),
        ]];
        let text = write_conll(&s, Some(&predicted)).unwrap();
        let back = parse_conll(&text).unwrap();
        assert_eq!(back[0].heads(), vec![0, 1]);
        assert_eq!(back[0].tokens[1].deprel, "dobj");
        assert_eq!(back[0].tokens[0].form, "Tôi");
    }

    #[test]
    fn predicted_length_mismatch() {
        let s = parse_conll(TWO_TOKENS).unwrap();
        let predicted = vec![vec![HeadAssignment::new(0, "root")]];
        assert!(matches!(
            write_conll(&s, Some(&predicted)),
            Err(ConllError::LengthMismatch { sentence: 1, .. })
        ));
    }

    #[test]
    fn write_emits_final_newline_and_blank_separator() {
        let s = cat_sentence();
        let text = write_conll(&[s.clone(), s], None).unwrap();
        assert!(text.ends_with("\n\n"));
        assert_eq!(text.lines().filter(|l| l.is_empty()).count(), 2);
    }

    #[test]
    fn projectivity_examples() {
        let chain = Sentence::from_parts([("a", "N", 2, "x"), ("b", "N", 3, "x"), ("c", "N", 0, "root")]);
        assert!(is_projective(&chain));
        assert!(is_projective(&cat_sentence()));
        // arcs 1->3 and 2->4 cross
        assert!(!heads_projective(&[0, 1, 1, 2]));
    }

    #[test]
    fn root_arc_counts_for_projectivity() {
        // token 2 is the root but lies under the arc 3 -> 1
        assert!(!heads_projective(&[3, 0, 2]));
    }

    #[test]
    fn split_protocol() {
        let sentences: Vec<Sentence> = (0..5)
            .map(|i| Sentence::from_parts([(["a", "b", "c", "d", "e"][i], "N", 0, "root")]))
            .collect();
        let split = split_train_test(sentences.clone(), 2).unwrap();
        assert_eq!(split.train, sentences[..3]);
        assert_eq!(split.test, sentences[3..]);

        let all = split_train_test(sentences.clone(), 0).unwrap();
        assert_eq!(all.train.len(), 5);
        assert!(all.test.is_empty());

        assert_eq!(
            split_train_test(sentences, 6),
            Err(ConllError::SplitTooLarge {
                requested: 6,
                available: 5
            })
        );
    }
}
