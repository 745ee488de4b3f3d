//! Command implementations behind the `easyfirst` binary.

use std::fs;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::warn;
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::easyfirst::{parse_with, LexicalScorer, ParserModel};
use crate::eval::{score_sentences, AblationTable, EvalOptions, EvalResult, PosCondition, DEFAULT_PUNCT_TAGS};
use crate::repr::{build_vocab, load_pretrained, PretrainedTable};
use crate::train::{evaluate, parse_all, train, TrainReport};
use crate::treebank::{parse_conll, parse_conll_unannotated, split_train_test, write_conll, Sentence, Token};

/// Failure of a command, classified for the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn data(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {err}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "easyfirst", version, about = "Easy-first dependency parser")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a configuration file.
    Train(TrainArgs),
    /// Parse a CoNLL-X file with a trained model.
    Parse(ParseArgs),
    /// Score predicted CoNLL-X files against gold.
    Eval(EvalArgs),
    /// Print the action sequence chosen for one sentence.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Configuration file in `key = value` format.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Override a configuration key, e.g. `--set epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Pre-trained vectors; required when the model was trained with them.
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, short)]
    pub gold: PathBuf,
    /// Predicted file aligned with the gold file.
    #[arg(long, short, conflicts_with = "ablation", required_unless_present = "ablation")]
    pub predicted: Option<PathBuf>,
    /// Directory of `{name}.gold-pos.conll` and `{name}.auto-pos.conll` files.
    #[arg(long)]
    pub ablation: Option<PathBuf>,
    /// Leave out tokens tagged as punctuation.
    #[arg(long)]
    pub exclude_punct: bool,
    /// Punctuation tags, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub punct_tags: Vec<String>,
    /// Emit JSON lines instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Whitespace-separated words.
    #[arg(long, short)]
    pub sentence: String,
    /// Whitespace-separated POS tags, one per word.
    #[arg(long)]
    pub pos: Option<String>,
    /// Rule file of `head dependent LEFT|RIGHT relation score` lines.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Relation used for the root arc with `--rules`.
    #[arg(long, default_value = "root")]
    pub root_label: String,
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
}

/// Dispatches a parsed command line; normal output goes to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => {
            let mut config = Config::load(&args.config)?;
            for o in &args.overrides {
                config.apply_override(o)?;
            }
            config.apply_env()?;
            cmd_train(&config, out).map(|_| ())
        }
        Command::Parse(args) => {
            let count = cmd_parse(&args.model, &args.input, &args.output, args.pretrained.as_deref())?;
            log::info!("parsed {count} sentences");
            Ok(())
        }
        Command::Eval(args) => {
            let opts = EvalOptions {
                exclude_punct: args.exclude_punct,
                punct_tags: if args.punct_tags.is_empty() {
                    DEFAULT_PUNCT_TAGS.iter().map(|s| s.to_string()).collect()
                } else {
                    args.punct_tags.clone()
                },
            };
            let text = match (&args.predicted, &args.ablation) {
                (Some(p), _) => {
                    let r = cmd_eval(&args.gold, p, &opts)?;
                    if args.json {
                        format!(
                            "{}\n",
                            serde_json::json!({"uas": r.uas, "las": r.las, "tokens": r.counts.tokens})
                        )
                    } else {
                        format!("{}\n", r.summary())
                    }
                }
                (None, Some(dir)) => {
                    let table = cmd_ablation(&args.gold, dir, &opts)?;
                    if args.json {
                        table.render_json_lines()
                    } else {
                        table.render_text()
                    }
                }
                (None, None) => return Err(CliError::Usage("eval needs --predicted or --ablation".into())),
            };
            write_out(out, &text)
        }
        Command::Trace(args) => {
            let text = cmd_trace(&args)?;
            write_out(out, &text)
        }
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::data("writing output", e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))
}

fn read_treebank(path: &Path) -> Result<Vec<Sentence>, CliError> {
    parse_conll(&read_text(path)?).map_err(|e| CliError::data(path.display(), e))
}

fn read_pretrained(path: &Path) -> Result<PretrainedTable, CliError> {
    load_pretrained(path).map_err(|e| CliError::data(path.display(), e))
}

/// Outcome of [`cmd_train`].
#[derive(Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub test: Option<EvalResult>,
    pub model_path: PathBuf,
}

/// Builds the vocabulary, trains, and writes the model file. One log line
/// per epoch goes to `log`.
pub fn cmd_train(config: &Config, log: &mut dyn Write) -> Result<TrainOutcome, CliError> {
    config.validate()?;
    let train_path = config.train.as_deref().ok_or(ConfigError::Required("train"))?;
    let model_path = config.model.clone().ok_or(ConfigError::Required("model"))?;
    let mut config = config.clone();

    let pretrained = if config.model_config.repr.use_pretrained {
        let path = config.pretrained.as_deref().ok_or(ConfigError::PretrainedPathMissing)?;
        let table = read_pretrained(path)?;
        config.reconcile_pretrained_dim(table.dim())?;
        Some(Arc::new(table))
    } else {
        if config.pretrained.is_some() {
            warn!("`pretrained` is set but use_pretrained is false; ignoring it");
        }
        None
    };

    let mut corpus = read_treebank(train_path)?;
    let test = match (&config.test, config.test_size) {
        (Some(path), _) => Some(read_treebank(path)?),
        (None, Some(size)) => {
            let split = split_train_test(corpus, size).map_err(|e| CliError::data(train_path.display(), e))?;
            corpus = split.train;
            Some(split.test)
        }
        (None, None) => None,
    };
    let dev = config.dev.as_deref().map(read_treebank).transpose()?;

    let vocab = build_vocab(&corpus, config.min_word_freq).map_err(|e| CliError::data(train_path.display(), e))?;
    let mut model = ParserModel::new(config.model_config.clone(), vocab, config.training.seed)
        .map_err(|e| CliError::data("building model", e))?;
    model.store.set_adam_config(config.adam);
    if let Some(table) = &pretrained {
        model
            .attach_pretrained(table.clone())
            .map_err(|e| CliError::data("pretrained vectors", e))?;
    }

    let mut write_error = None;
    let report = train(&mut model, &corpus, dev.as_deref(), &config.training, |epoch| {
        match writeln!(log, "{}", epoch.log_line()) {
            Ok(()) => ControlFlow::Continue(()),
            Err(e) => {
                write_error = Some(e);
                ControlFlow::Break(())
            }
        }
    })
    .map_err(|e| CliError::data("training", e))?;
    if let Some(e) = write_error {
        return Err(CliError::data("writing training log", e));
    }

    let test_result = match &test {
        Some(test) if !test.is_empty() => {
            let r = evaluate(&model, test, &EvalOptions::default()).map_err(|e| CliError::data("test set", e))?;
            writeln!(log, "test {}", r.summary()).map_err(|e| CliError::data("writing training log", e))?;
            Some(r)
        }
        _ => None,
    };

    let bytes = model.to_bytes().map_err(|e| CliError::data("serializing model", e))?;
    fs::write(&model_path, bytes).map_err(|e| CliError::data(model_path.display(), e))?;
    Ok(TrainOutcome {
        report,
        test: test_result,
        model_path,
    })
}

/// Reads a model file and attaches pre-trained vectors when the model needs
/// them.
pub fn load_model(path: &Path, pretrained: Option<&Path>) -> Result<ParserModel, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::data(path.display(), e))?;
    let mut model = ParserModel::from_bytes(&bytes).map_err(|e| CliError::data(path.display(), e))?;
    if model.config.repr.use_pretrained {
        let p = pretrained.ok_or(ConfigError::Required("pretrained"))?;
        let table = read_pretrained(p)?;
        model
            .attach_pretrained(Arc::new(table))
            .map_err(|e| CliError::data(p.display(), e))?;
    }
    Ok(model)
}

/// Parses every sentence of `input` and writes it to `output` with
/// predicted HEAD and DEPREL columns. Returns the sentence count.
pub fn cmd_parse(model: &Path, input: &Path, output: &Path, pretrained: Option<&Path>) -> Result<usize, CliError> {
    let model = load_model(model, pretrained)?;
    let sentences = parse_conll_unannotated(&read_text(input)?).map_err(|e| CliError::data(input.display(), e))?;
    let predicted = parse_all(&model, &sentences).map_err(|e| CliError::data(input.display(), e))?;
    let text = write_conll(&sentences, Some(&predicted)).map_err(|e| CliError::data(output.display(), e))?;
    fs::write(output, text).map_err(|e| CliError::data(output.display(), e))?;
    Ok(sentences.len())
}

pub fn cmd_eval(gold: &Path, predicted: &Path, opts: &EvalOptions) -> Result<EvalResult, CliError> {
    let g = read_treebank(gold)?;
    let p = read_treebank(predicted)?;
    score_sentences(&g, &p, opts).map_err(|e| CliError::data(predicted.display(), e))
}

/// Scores every `{name}.{gold-pos,auto-pos}.conll` file in `dir` against
/// `gold`; rows follow file-name order.
pub fn cmd_ablation(gold: &Path, dir: &Path, opts: &EvalOptions) -> Result<AblationTable, CliError> {
    let g = read_treebank(gold)?;
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::data(dir.display(), e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::data(dir.display(), e))?;
    entries.sort();

    let mut table = AblationTable::new();
    for path in entries {
        let Some(file) = path.file_name().and_then(|f| f.to_str()) else {
            continue;
        };
        let parsed = [PosCondition::Gold, PosCondition::Auto].into_iter().find_map(|c| {
            file.strip_suffix(&format!(".{}-pos.conll", c.name()))
                .map(|name| (name.to_owned(), c))
        });
        let Some((name, condition)) = parsed else {
            continue;
        };
        let p = read_treebank(&path)?;
        let r = score_sentences(&g, &p, opts).map_err(|e| CliError::data(path.display(), e))?;
        table.insert(&name, condition, r);
    }
    if table.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no *.gold-pos.conll or *.auto-pos.conll files",
            dir.display()
        )));
    }
    Ok(table)
}

fn trace_sentence(words: &str, pos: Option<&str>) -> Result<Sentence, CliError> {
    let forms: Vec<&str> = words.split_whitespace().collect();
    if forms.is_empty() {
        return Err(CliError::Usage("--sentence is empty".into()));
    }
    let tags: Vec<&str> = match pos {
        Some(p) => p.split_whitespace().collect(),
        None => vec!["_"; forms.len()],
    };
    if tags.len() != forms.len() {
        return Err(CliError::Usage(format!(
            "{} POS tags for {} words",
            tags.len(),
            forms.len()
        )));
    }
    let tokens = forms
        .iter()
        .zip(&tags)
        .enumerate()
        .map(|(i, (f, t))| Token::new(i + 1, *f, *t, 0, "_"))
        .collect();
    Ok(Sentence::new(tokens))
}

/// The step-by-step action trace for one sentence, followed by its heads.
pub fn cmd_trace(args: &TraceArgs) -> Result<String, CliError> {
    let sentence = trace_sentence(&args.sentence, args.pos.as_deref())?;
    let n = sentence.len();
    let output = match (&args.rules, &args.model) {
        (Some(rules), _) => {
            let mut scorer = LexicalScorer::parse_rules(&read_text(rules)?, &args.root_label)
                .map_err(|e| CliError::data(rules.display(), e))?;
            parse_with(&mut scorer, &sentence, true).map_err(|e| CliError::data("trace", e))?
        }
        (None, Some(model)) => {
            let model = load_model(model, args.pretrained.as_deref())?;
            model
                .parse_full(&sentence, true)
                .map_err(|e| CliError::data("trace", e))?
        }
        (None, None) => return Err(CliError::Usage("trace needs --rules or --model".into())),
    };
    Ok(output.render_trace(n))
}
