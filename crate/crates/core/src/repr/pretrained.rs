use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::ReprError;

const UNKNOWN_ENTRY: &str = "<unk>";

/// Frozen word vectors loaded from a text embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
    unknown: Vec<f64>,
}

/// Exact-match type coverage of a word list by a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub covered: usize,
    pub total: usize,
}

impl Coverage {
    /// Covered fraction in `[0, 1]`; zero for an empty word list.
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.covered as f64 / self.total as f64
        }
    }
}

impl PretrainedTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&k| &self.values[k * self.dim..(k + 1) * self.dim])
    }

    /// Vector for the `<unk>` entry when the file has one, zeros otherwise.
    pub fn unknown(&self) -> &[f64] {
        &self.unknown
    }

    /// Exact form, then lowercased form, then the unknown vector.
    pub fn lookup(&self, form: &str) -> &[f64] {
        self.get(form)
            .or_else(|| {
                let lower = form.to_lowercase();
                if lower != form {
                    self.get(&lower)
                } else {
                    None
                }
            })
            .unwrap_or(&self.unknown)
    }

    /// Distinct words of `vocabulary` present verbatim in the table.
    pub fn coverage<'a, I>(&self, vocabulary: I) -> Coverage
    where
        I: IntoIterator<Item = &'a str>,
    {
        let types: HashSet<&str> = vocabulary.into_iter().collect();
        Coverage {
            covered: types.iter().filter(|w| self.contains(w)).count(),
            total: types.len(),
        }
    }
}

/// Parses `word v1 ... vd` lines, with an optional `count dim` header.
/// Repeated words keep their first vector.
pub fn parse_pretrained(text: &str) -> Result<PretrainedTable, ReprError> {
    let mut dim: Option<usize> = None;
    let mut words = Vec::new();
    let mut index = HashMap::new();
    let mut values = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line");
        let rest: Vec<&str> = fields.collect();

        if k == 0 && rest.len() == 1 {
            if let (Ok(_), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                if d == 0 {
                    return Err(ReprError::PretrainedHeader { line: line_no });
                }
                dim = Some(d);
                continue;
            }
        }

        let expected = *dim.get_or_insert(rest.len());
        if rest.len() != expected || expected == 0 {
            return Err(ReprError::PretrainedDimension {
                line: line_no,
                expected,
                found: rest.len(),
            });
        }
        let start = values.len();
        for v in &rest {
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => values.push(x),
                _ => {
                    return Err(ReprError::PretrainedValue {
                        line: line_no,
                        value: (*v).to_owned(),
                    })
                }
            }
        }
        if index.contains_key(word) {
            values.truncate(start);
            continue;
        }
        index.insert(word.to_owned(), words.len());
        words.push(word.to_owned());
    }

    let dim = match dim {
        Some(d) if !words.is_empty() => d,
        _ => return Err(ReprError::EmptyPretrained),
    };
    let unknown = match index.get(UNKNOWN_ENTRY) {
        Some(&k) => values[k * dim..(k + 1) * dim].to_vec(),
        None => vec![0.0; dim],
    };
    Ok(PretrainedTable {
        dim,
        words,
        index,
        values,
        unknown,
    })
}

pub fn load_pretrained(path: &Path) -> Result<PretrainedTable, ReprError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReprError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_pretrained(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn with_and_without_header() {
        let plain = parse_pretrained("mèo 0.1 0.2 0.3\ncon 1 2 3\n").unwrap();
        let headed = parse_pretrained("2 3\nmèo 0.1 0.2 0.3\ncon 1 2 3\n").unwrap();
        assert_eq!(plain, headed);
        assert_eq!(plain.dim(), 3);
        assert_eq!(plain.len(), 2);
        assert_eq!(plain.get("con").unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn inconsistent_dimension_names_line() {
        let err = parse_pretrained("a 1 2\nb 1 2\nc 1 2 3\n").unwrap_err();
        assert!(matches!(
            err,
            ReprError::PretrainedDimension { line: 3, expected: 2, found: 3 }
        ));
        let err = parse_pretrained("2 4\na 1 2\n").unwrap_err();
        assert!(matches!(err, ReprError::PretrainedDimension { line: 2, .. }));
    }

    #[test]
    fn empty_file() {
        assert!(matches!(parse_pretrained(""), Err(ReprError::EmptyPretrained)));
        assert!(matches!(parse_pretrained("5 0\n"), Err(ReprError::PretrainedHeader { .. })));
        assert!(matches!(parse_pretrained("10 5\n"), Err(ReprError::EmptyPretrained)));
    }

    #[test]
    fn bad_value() {
        assert!(matches!(
            parse_pretrained("a 1 x\n"),
            Err(ReprError::PretrainedValue { line: 1, .. })
        ));
        assert!(parse_pretrained("a 1 NaN\n").is_err());
    }

    #[test]
    fn lookup_fallbacks() {
        let t = parse_pretrained("hà 1 1\nHà_Nội 2 2\n").unwrap();
        assert_eq!(t.lookup("Hà_Nội"), &[2.0, 2.0]);
        assert_eq!(t.lookup("Hà"), &[1.0, 1.0]);
        assert_eq!(t.lookup("xyz"), &[0.0, 0.0]);
        let with_unk = parse_pretrained("<unk> 5 5\nhà 1 1\n").unwrap();
        assert_eq!(with_unk.lookup("xyz"), &[5.0, 5.0]);
    }

    #[test]
    fn coverage_matches_set_intersection() {
        let t = parse_pretrained("a 1\nb 1\nc 1\nD 1\n").unwrap();
        let vocab = ["a", "b", "a", "d", "e", "f"];
        let cov = t.coverage(vocab.iter().copied());
        let types: HashSet<&str> = vocab.iter().copied().collect();
        let brute = types.iter().filter(|w| ["a", "b", "c", "D"].contains(w)).count();
        assert_eq!(cov.covered, brute);
        assert_eq!(cov.total, 5);
        assert!((cov.ratio() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn duplicate_words_keep_first() {
        let t = parse_pretrained("a 1\na 2\nb 3\n").unwrap();
        assert_eq!(t.get("a").unwrap(), &[1.0]);
        assert_eq!(t.get("b").unwrap(), &[3.0]);
    }
}
