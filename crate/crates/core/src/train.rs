//! Hinge-loss training under the dynamic oracle.

use std::ops::ControlFlow;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::easyfirst::{Action, ParseError, ParserModel, Pending, Scorer, Session};
use crate::eval::{score, EvalError, EvalOptions, EvalResult};
use crate::oracle::OracleState;
use crate::treebank::{is_projective, HeadAssignment, Sentence};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("no valid action in the current state")]
    NoValidAction,
    #[error("score and validity vectors differ in length ({scores} vs {valid})")]
    MaskLength { scores: usize, valid: usize },
    #[error("training corpus has no projective sentences")]
    EmptyCorpus,
    #[error("relation {0:?} is not in the model vocabulary")]
    UnknownRelation(String),
    #[error("non-finite loss {0}")]
    NonFiniteLoss(f64),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A positive hinge term `1 - score[best_valid] + score[best_invalid]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeOutcome {
    pub loss: f64,
    pub best_valid: usize,
    pub best_invalid: usize,
}

fn first_max(scores: &[f64], keep: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &s) in scores.iter().enumerate() {
        if keep(k) && best.map_or(true, |b| s > scores[b]) {
            best = Some(k);
        }
    }
    best
}

/// `max{0, 1 - max_valid + max_invalid}`; `None` when the margin holds or
/// there is no invalid action.
pub fn hinge_loss(scores: &[f64], valid: &[bool]) -> Result<Option<HingeOutcome>, TrainError> {
    if scores.len() != valid.len() {
        return Err(TrainError::MaskLength {
            scores: scores.len(),
            valid: valid.len(),
        });
    }
    let best_valid = first_max(scores, |k| valid[k]).ok_or(TrainError::NoValidAction)?;
    let Some(best_invalid) = first_max(scores, |k| !valid[k]) else {
        return Ok(None);
    };
    let loss = 1.0 - scores[best_valid] + scores[best_invalid];
    Ok((loss > 0.0).then_some(HingeOutcome {
        loss,
        best_valid,
        best_invalid,
    }))
}

/// Per-sentence tallies from one oracle-guided pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpisodeStats {
    pub steps: usize,
    /// Steps that produced a positive hinge term.
    pub errors: usize,
    /// Steps that followed an invalid action.
    pub explored: usize,
    pub loss: f64,
}

/// Runs one training pass over `sentence`. At each step the best valid
/// action is taken and a hinge term recorded when the margin is violated,
/// unless exploration is on and the best action beats the best valid one by
/// more than the margin, in which case that action is taken instead.
pub fn run_episode<S: Scorer>(
    scorer: &mut S,
    sentence: &Sentence,
    gold_relations: &[usize],
    explore: bool,
) -> Result<EpisodeStats, TrainError> {
    let relations = scorer.relations().len();
    let mut oracle = OracleState::new(&sentence.heads(), gold_relations);
    let mut pending = Pending::new(scorer.init(sentence)?)?;
    let mut stats = EpisodeStats::default();

    while pending.len() > 1 {
        let scores = scorer.score(&pending)?;
        let valid = oracle.valid_mask(&pending, relations);
        let best_valid = first_max(&scores, |k| valid[k]).ok_or(TrainError::NoValidAction)?;
        let best = first_max(&scores, |_| true).expect("non-empty");

        let chosen = if explore && scores[best] > 1.0 + scores[best_valid] {
            stats.explored += 1;
            best
        } else {
            if let Some(h) = hinge_loss(&scores, &valid)? {
                scorer.record_loss(
                    &pending,
                    &Action::from_canonical(h.best_valid, relations),
                    &Action::from_canonical(h.best_invalid, relations),
                )?;
                stats.errors += 1;
                stats.loss += h.loss;
            }
            best_valid
        };

        let action = Action::from_canonical(chosen, relations);
        let arc = pending
            .apply(&action, |r, c, d, l| scorer.attach(r, c, d, l))?
            .clone();
        oracle.observe(&arc);
        stats.steps += 1;
    }
    Ok(stats)
}

/// Error counter for deferred parameter updates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    threshold: usize,
    errors: usize,
    loss: f64,
}

impl TrainBatch {
    pub fn new(threshold: usize) -> Self {
        TrainBatch {
            threshold,
            errors: 0,
            loss: 0.0,
        }
    }

    pub fn add(&mut self, errors: usize, loss: f64) {
        self.errors += errors;
        self.loss += loss;
    }

    pub fn errors(&self) -> usize {
        self.errors
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn is_empty(&self) -> bool {
        self.errors == 0
    }

    /// More errors than the threshold have accumulated.
    pub fn is_full(&self) -> bool {
        self.errors > self.threshold
    }

    pub fn reset(&mut self) {
        self.errors = 0;
        self.loss = 0.0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub error_threshold: usize,
    pub explore: bool,
    /// `alpha` of word dropout; `None` disables it.
    pub word_dropout: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            learning_rate: 1e-3,
            error_threshold: 50,
            explore: true,
            word_dropout: Some(0.25),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub sentences: usize,
    pub loss: f64,
    pub errors: usize,
    pub updates: usize,
    pub dev: Option<EvalResult>,
}

impl EpochReport {
    /// Training log line.
    pub fn log_line(&self) -> String {
        let dev = match &self.dev {
            Some(r) => format!("dev_uas {:.2} dev_las {:.2}", r.uas, r.las),
            None => "dev_uas - dev_las -".to_owned(),
        };
        format!(
            "epoch {} sentences {} loss {:.4} errors {} updates {} {}",
            self.epoch, self.sentences, self.loss, self.errors, self.updates, dev
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    /// Epoch whose parameters were kept, when dev data was given.
    pub best_epoch: Option<usize>,
    pub skipped_nonprojective: usize,
}

/// Gold relation ids of `sentence`.
pub fn gold_relations(model: &ParserModel, sentence: &Sentence) -> Result<Vec<usize>, TrainError> {
    sentence
        .tokens
        .iter()
        .map(|t| {
            model
                .vocab
                .relation_id(&t.deprel)
                .ok_or_else(|| TrainError::UnknownRelation(t.deprel.clone()))
        })
        .collect()
}

/// Parses `sentences` in parallel, preserving order.
pub fn parse_all(model: &ParserModel, sentences: &[Sentence]) -> Result<Vec<Vec<HeadAssignment>>, ParseError> {
    sentences.par_iter().map(|s| model.parse(s)).collect()
}

pub fn evaluate(model: &ParserModel, gold: &[Sentence], options: &EvalOptions) -> Result<EvalResult, TrainError> {
    let predicted = parse_all(model, gold)?;
    Ok(score(gold, &predicted, options)?)
}

/// One oracle-guided pass over `sentence`; gradients of the recorded hinge
/// terms are added to the store.
pub fn train_sentence(
    model: &mut ParserModel,
    sentence: &Sentence,
    relations: &[usize],
    config: &TrainConfig,
    dropout_seed: u64,
) -> Result<EpisodeStats, TrainError> {
    let (stats, grads) = {
        let mut session = Session::new(model);
        if let Some(alpha) = config.word_dropout {
            session = session.with_word_dropout(alpha, dropout_seed);
        }
        let stats = run_episode(&mut session, sentence, relations, config.explore)?;
        (stats, session.backward_losses()?)
    };
    if let Some((value, grads)) = grads {
        if !value.is_finite() {
            return Err(TrainError::NonFiniteLoss(value));
        }
        model.store.accumulate(&grads);
    }
    Ok(stats)
}

/// Trains for `config.epochs` epochs, shuffling each epoch. Parameters are
/// updated whenever more than `error_threshold` errors have accumulated and
/// once more at the end of an epoch with pending errors. With `dev`, the
/// parameters of the best dev-UAS epoch are kept. `on_epoch` may stop
/// training early.
pub fn train<F>(
    model: &mut ParserModel,
    corpus: &[Sentence],
    dev: Option<&[Sentence]>,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainReport, TrainError>
where
    F: FnMut(&EpochReport) -> ControlFlow<()>,
{
    let mut data = Vec::with_capacity(corpus.len());
    let mut skipped = 0;
    for s in corpus {
        if is_projective(s) {
            data.push((s, gold_relations(model, s)?));
        } else {
            skipped += 1;
        }
    }
    if skipped > 0 {
        warn!("skipping {skipped} non-projective training sentences");
    }
    if data.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch = TrainBatch::new(config.error_threshold);
    let mut report = TrainReport {
        skipped_nonprojective: skipped,
        ..TrainReport::default()
    };
    let mut best: Option<(f64, usize, Vec<crate::tensor::Tensor>)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_report = EpochReport {
            epoch,
            sentences: data.len(),
            loss: 0.0,
            errors: 0,
            updates: 0,
            dev: None,
        };
        for &k in &order {
            let (sentence, relations) = &data[k];
            let seed = rng.gen::<u64>();
            let stats = train_sentence(model, sentence, relations, config, seed)?;
            epoch_report.loss += stats.loss;
            epoch_report.errors += stats.errors;
            batch.add(stats.errors, stats.loss);
            if batch.is_full() {
                model.store.adam_step(config.learning_rate);
                epoch_report.updates += 1;
                batch.reset();
            }
        }
        if !batch.is_empty() {
            model.store.adam_step(config.learning_rate);
            epoch_report.updates += 1;
            batch.reset();
        }
        if !epoch_report.loss.is_finite() {
            return Err(TrainError::NonFiniteLoss(epoch_report.loss));
        }

        if let Some(dev) = dev {
            let result = evaluate(model, dev, &EvalOptions::default())?;
            if best.as_ref().map_or(true, |(uas, _, _)| result.uas > *uas) {
                best = Some((result.uas, epoch, model.store.snapshot()));
            }
            epoch_report.dev = Some(result);
        }
        info!("{}", epoch_report.log_line());
        let flow = on_epoch(&epoch_report);
        report.epochs.push(epoch_report);
        if flow.is_break() {
            break;
        }
    }

    if let Some((_, epoch, snapshot)) = best {
        model.store.restore(&snapshot);
        report.best_epoch = Some(epoch);
    }
    Ok(report)
}
