//! Attachment scores and ablation tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::Serialize;

use crate::treebank::{HeadAssignment, Sentence};

/// POS tags treated as punctuation when exclusion is on.
pub const DEFAULT_PUNCT_TAGS: [&str; 3] = ["CH", "PUNCT", "PU"];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub exclude_punct: bool,
    pub punct_tags: Vec<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            exclude_punct: false,
            punct_tags: DEFAULT_PUNCT_TAGS.iter().map(|t| t.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tokens: usize,
    pub correct_heads: usize,
    pub correct_labels: usize,
}

impl Counts {
    fn add(&mut self, head_ok: bool, label_ok: bool) {
        self.tokens += 1;
        self.correct_heads += head_ok as usize;
        self.correct_labels += (head_ok && label_ok) as usize;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    /// Percent of scored tokens with the correct head.
    pub uas: f64,
    /// Percent of scored tokens with the correct head and relation.
    pub las: f64,
    pub counts: Counts,
    /// Counts per gold relation.
    pub per_relation: BTreeMap<String, Counts>,
}

impl EvalResult {
    fn from_counts(counts: Counts, per_relation: BTreeMap<String, Counts>) -> Self {
        let pct = |k: usize| {
            if counts.tokens == 0 {
                0.0
            } else {
                100.0 * k as f64 / counts.tokens as f64
            }
        };
        EvalResult {
            uas: pct(counts.correct_heads),
            las: pct(counts.correct_labels),
            counts,
            per_relation,
        }
    }

    /// `UAS xx.xx LAS xx.xx`.
    pub fn summary(&self) -> String {
        format!("UAS {:.2} LAS {:.2}", self.uas, self.las)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold has {gold} sentences, predictions have {predicted}")]
    SentenceCount { gold: usize, predicted: usize },
    #[error("sentence {sentence}: gold has {gold} tokens, prediction has {predicted}")]
    TokenCount {
        sentence: usize,
        gold: usize,
        predicted: usize,
    },
    #[error("sentence {sentence}, token {token}: gold form {gold:?} differs from {predicted:?}")]
    FormMismatch {
        sentence: usize,
        token: usize,
        gold: String,
        predicted: String,
    },
}

/// UAS and LAS of `predicted` against `gold`; sentence numbers in errors are
/// 1-based.
pub fn score(
    gold: &[Sentence],
    predicted: &[Vec<HeadAssignment>],
    options: &EvalOptions,
) -> Result<EvalResult, EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::SentenceCount {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    let mut counts = Counts::default();
    let mut per_relation: BTreeMap<String, Counts> = BTreeMap::new();
    for (k, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if g.len() != p.len() {
            return Err(EvalError::TokenCount {
                sentence: k + 1,
                gold: g.len(),
                predicted: p.len(),
            });
        }
        for (token, pred) in g.tokens.iter().zip(p) {
            if options.exclude_punct && options.punct_tags.iter().any(|t| *t == token.pos) {
                continue;
            }
            let head_ok = token.head == pred.head;
            let label_ok = token.deprel == pred.deprel;
            counts.add(head_ok, label_ok);
            per_relation
                .entry(token.deprel.clone())
                .or_default()
                .add(head_ok, label_ok);
        }
    }
    Ok(EvalResult::from_counts(counts, per_relation))
}

/// Scores two parsed files, requiring identical word forms.
pub fn score_sentences(
    gold: &[Sentence],
    predicted: &[Sentence],
    options: &EvalOptions,
) -> Result<EvalResult, EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::SentenceCount {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    for (k, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if g.len() != p.len() {
            return Err(EvalError::TokenCount {
                sentence: k + 1,
                gold: g.len(),
                predicted: p.len(),
            });
        }
        if let Some((t, (a, b))) = g
            .tokens
            .iter()
            .zip(&p.tokens)
            .enumerate()
            .find(|(_, (a, b))| a.form != b.form)
        {
            return Err(EvalError::FormMismatch {
                sentence: k + 1,
                token: t + 1,
                gold: a.form.clone(),
                predicted: b.form.clone(),
            });
        }
    }
    let assignments: Vec<Vec<HeadAssignment>> = predicted.iter().map(Sentence::assignments).collect();
    score(gold, &assignments, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PosCondition {
    Gold,
    Auto,
}

impl PosCondition {
    pub const ALL: [PosCondition; 2] = [PosCondition::Gold, PosCondition::Auto];

    pub fn name(self) -> &'static str {
        match self {
            PosCondition::Gold => "gold",
            PosCondition::Auto => "auto",
        }
    }
}

/// Results per feature configuration (rows) and POS condition (columns), in
/// insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AblationTable {
    rows: IndexMap<String, [Option<EvalResult>; 2]>,
}

#[derive(Serialize)]
struct AblationRecord<'a> {
    config: &'a str,
    pos: &'static str,
    uas: f64,
    las: f64,
    tokens: usize,
}

impl AblationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, config: &str, condition: PosCondition, result: EvalResult) {
        let row = self.rows.entry(config.to_owned()).or_default();
        row[condition as usize] = Some(result);
    }

    pub fn get(&self, config: &str, condition: PosCondition) -> Option<&EvalResult> {
        self.rows.get(config)?[condition as usize].as_ref()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(UAS, LAS)` of `config` minus those of `baseline`.
    pub fn delta(&self, config: &str, baseline: &str, condition: PosCondition) -> Option<(f64, f64)> {
        let a = self.get(config, condition)?;
        let b = self.get(baseline, condition)?;
        Some((a.uas - b.uas, a.las - b.las))
    }

    /// Aligned text table; missing cells print as `-`.
    pub fn render_text(&self) -> String {
        let width = self
            .rows
            .keys()
            .map(|k| k.chars().count())
            .max()
            .unwrap_or(0)
            .max("config".len());
        let mut out = format!(
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}\n",
            "config", "gold UAS", "gold LAS", "auto UAS", "auto LAS"
        );
        for (config, cells) in &self.rows {
            let _ = write!(out, "{config:<width$}");
            for cell in cells {
                match cell {
                    Some(r) => {
                        let _ = write!(out, "  {:>8.2}  {:>8.2}", r.uas, r.las);
                    }
                    None => {
                        let _ = write!(out, "  {:>8}  {:>8}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// One JSON object per filled cell:
    /// `{"config":..,"pos":"gold"|"auto","uas":..,"las":..,"tokens":..}`.
    pub fn render_json_lines(&self) -> String {
        let mut out = String::new();
        for (config, cells) in &self.rows {
            for (condition, cell) in PosCondition::ALL.iter().zip(cells) {
                if let Some(r) = cell {
                    let record = AblationRecord {
                        config,
                        pos: condition.name(),
                        uas: r.uas,
                        las: r.las,
                        tokens: r.counts.tokens,
                    };
                    out.push_str(&serde_json::to_string(&record).expect("plain record"));
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Text table followed by its JSON lines.
pub fn ablation_report(table: &AblationTable) -> String {
    let mut out = table.render_text();
    out.push_str(&table.render_json_lines());
    out
}
