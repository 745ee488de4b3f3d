use std::fmt;

use crate::treebank::{HeadAssignment, Sentence};

use super::action::argmax;
use super::pending::arcs_to_heads;
use super::{Action, Arc, Direction, ParseError, Pending};

/// Scores actions over a pending list and maintains per-item state.
pub trait Scorer {
    type State;

    /// Relation labels; ids index this slice.
    fn relations(&self) -> &[String];

    /// Relation of the arc from the artificial root.
    fn root_relation(&self) -> usize;

    fn init(&mut self, sentence: &Sentence) -> Result<Vec<Self::State>, ParseError>;

    /// Scores for every action in canonical order.
    fn score(&mut self, pending: &Pending<Self::State>) -> Result<Vec<f64>, ParseError>;

    /// Folds `child` into `receiver` after an attachment.
    fn attach(
        &mut self,
        receiver: &mut Self::State,
        child: Self::State,
        direction: Direction,
        relation: usize,
    ) -> Result<(), ParseError>;

    /// Records the hinge term `1 - score(valid) + score(invalid)` on the
    /// current pending list.
    fn record_loss(
        &mut self,
        _pending: &Pending<Self::State>,
        _valid: &Action,
        _invalid: &Action,
    ) -> Result<(), ParseError> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub action: Action,
    pub relation: String,
    pub head_form: String,
    pub dep_form: String,
    pub score: f64,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {:.4}",
            self.step,
            self.action.position,
            self.action.direction,
            self.relation,
            self.head_form,
            self.dep_form,
            self.score
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutput {
    /// `n` arcs; the last one comes from the root.
    pub arcs: Vec<Arc>,
    pub trace: Vec<TraceStep>,
}

impl ParseOutput {
    pub fn heads(&self, n: usize) -> Vec<usize> {
        arcs_to_heads(n, &self.arcs)
    }

    pub fn assignments(&self, n: usize, relations: &[String]) -> Vec<HeadAssignment> {
        let mut out = vec![HeadAssignment::new(0, ""); n];
        for arc in &self.arcs {
            out[arc.dependent - 1] = HeadAssignment::new(arc.head, relations[arc.relation].clone());
        }
        out
    }

    /// Trace lines followed by a `heads ...` summary line.
    pub fn render_trace(&self, n: usize) -> String {
        let mut out = String::new();
        for step in &self.trace {
            out.push_str(&step.to_string());
            out.push('\n');
        }
        let heads: Vec<String> = self.heads(n).iter().map(usize::to_string).collect();
        out.push_str("heads ");
        out.push_str(&heads.join(" "));
        out.push('\n');
        out
    }
}

/// Greedy loop: apply the best-scoring action until one item remains, then
/// attach it to the root.
pub fn parse_with<S: Scorer>(
    scorer: &mut S,
    sentence: &Sentence,
    trace: bool,
) -> Result<ParseOutput, ParseError> {
    let states = scorer.init(sentence)?;
    let mut pending = Pending::new(states)?;
    let relations = scorer.relations().len();
    let mut steps = Vec::new();

    while pending.len() > 1 {
        let scores = scorer.score(&pending)?;
        let best = argmax(&scores).ok_or(ParseError::NoRelations)?;
        let action = Action::from_canonical(best, relations);
        if trace {
            let (head, dep) = pending.endpoints(&action)?;
            steps.push(TraceStep {
                step: steps.len() + 1,
                action,
                relation: scorer.relations()[action.relation].clone(),
                head_form: sentence.tokens[head - 1].form.clone(),
                dep_form: sentence.tokens[dep - 1].form.clone(),
                score: scores[best],
            });
        }
        pending.apply(&action, |r, c, d, l| scorer.attach(r, c, d, l))?;
    }

    Ok(ParseOutput {
        arcs: pending.finish(scorer.root_relation())?,
        trace: steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
struct Rule {
    head: String,
    dependent: String,
    direction: Direction,
    relation: usize,
    score: f64,
}

/// Hand-written scorer over word forms: each rule assigns a fixed score to
/// one `(head, dependent, direction, relation)` combination and every other
/// action scores zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LexicalScorer {
    rules: Vec<Rule>,
    relations: Vec<String>,
    root_relation: usize,
    forms: Vec<String>,
}

impl LexicalScorer {
    /// Parses lines of `head_form dep_form LEFT|RIGHT relation score`;
    /// blank lines and `#` comments are skipped.
    pub fn parse_rules(text: &str, root_label: &str) -> Result<Self, ParseError> {
        let mut relations: Vec<String> = Vec::new();
        let mut intern = |label: &str| match relations.iter().position(|r| r == label) {
            Some(k) => k,
            None => {
                relations.push(label.to_owned());
                relations.len() - 1
            }
        };
        let mut rules = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || ParseError::Rule {
                line: k + 1,
                text: line.to_owned(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [head, dependent, direction, relation, score] = fields[..] else {
                return Err(bad());
            };
            let direction = Direction::parse(direction).ok_or_else(bad)?;
            let score: f64 = score.parse().map_err(|_| bad())?;
            if !score.is_finite() {
                return Err(bad());
            }
            rules.push(Rule {
                head: head.to_owned(),
                dependent: dependent.to_owned(),
                direction,
                relation: intern(relation),
                score,
            });
        }
        let root_relation = intern(root_label);
        Ok(LexicalScorer {
            rules,
            relations,
            root_relation,
            forms: Vec::new(),
        })
    }
}

impl Scorer for LexicalScorer {
    type State = ();

    fn relations(&self) -> &[String] {
        &self.relations
    }

    fn root_relation(&self) -> usize {
        self.root_relation
    }

    fn init(&mut self, sentence: &Sentence) -> Result<Vec<()>, ParseError> {
        self.forms = sentence.forms().map(str::to_owned).collect();
        Ok(vec![(); sentence.len()])
    }

    fn score(&mut self, pending: &Pending<()>) -> Result<Vec<f64>, ParseError> {
        let relations = self.relations.len();
        let mut scores = Vec::with_capacity(2 * relations * (pending.len() - 1));
        for k in 0..2 * relations * (pending.len() - 1) {
            let action = Action::from_canonical(k, relations);
            let (head, dep) = pending.endpoints(&action)?;
            let score = self
                .rules
                .iter()
                .find(|r| {
                    r.direction == action.direction
                        && r.relation == action.relation
                        && r.head == self.forms[head - 1]
                        && r.dependent == self.forms[dep - 1]
                })
                .map_or(0.0, |r| r.score);
            scores.push(score);
        }
        Ok(scores)
    }

    fn attach(&mut self, _: &mut (), _: (), _: Direction, _: usize) -> Result<(), ParseError> {
        Ok(())
    }
}
