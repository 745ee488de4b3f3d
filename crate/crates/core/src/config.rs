//! Experiment configuration in a `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored; a `#` after a value
//! starts a trailing comment. Later assignments override earlier ones, and
//! `--set key=value` overrides from the command line are applied the same
//! way after the file. Relative paths resolve against the file's directory.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::easyfirst::ModelConfig;
use crate::tensor::AdamConfig;
use crate::train::TrainConfig;

/// Environment variable overriding `seed`.
pub const SEED_ENV: &str = "EASYFIRST_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },

    #[error("`{0}` must be positive")]
    NotPositive(&'static str),

    #[error("`{key}` refers to missing file {path}")]
    MissingPath { key: &'static str, path: PathBuf },

    #[error("`{0}` is required for this command")]
    Required(&'static str),

    #[error("use_pretrained is set but no `pretrained` path is given")]
    PretrainedPathMissing,

    #[error("pretrained_dim is {configured} but the pretrained table has dimension {loaded}")]
    PretrainedDimension { configured: usize, loaded: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Sentences held out from the end of `train` when no `test` file is set.
    pub test_size: Option<usize>,
    pub pretrained: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub min_word_freq: u32,
    pub model_config: ModelConfig,
    pub training: TrainConfig,
    pub adam: AdamConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            train: None,
            dev: None,
            test: None,
            test_size: None,
            pretrained: None,
            model: None,
            min_word_freq: 1,
            model_config: ModelConfig::default(),
            training: TrainConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

/// Every recognised key, in the order used by [`Config::render`].
pub const KEYS: &[&str] = &[
    "train",
    "dev",
    "test",
    "test_size",
    "pretrained",
    "model",
    "min_word_freq",
    "use_char",
    "use_pretrained",
    "pretrained_dim",
    "word_dim",
    "pos_dim",
    "char_dim",
    "char_hidden",
    "char_layers",
    "vprime_dim",
    "sent_hidden",
    "sent_layers",
    "tree_hidden",
    "rel_dim",
    "mlp_hidden",
    "learning_rate",
    "beta1",
    "beta2",
    "eps",
    "seed",
    "epochs",
    "error_threshold",
    "explore",
    "word_dropout",
];

fn invalid(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: reason.to_string(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| invalid(key, value, e))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

fn parse_float(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_num(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, value, "must be finite"))
    }
}

fn parse_path(value: &str, base: Option<&Path>) -> Option<PathBuf> {
    if value.is_empty() {
        return None;
    }
    let p = PathBuf::from(value);
    Some(match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    })
}

impl Config {
    /// Parses configuration text; relative paths stay relative to `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(k) => &raw[..k],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_owned(),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_owned(),
                });
            }
            config.set_with_base(key, value.trim(), base)?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Config::parse(&text, path.parent())
    }

    /// Applies one `key=value` override; paths resolve against the working
    /// directory.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: assignment.to_owned(),
        })?;
        self.set(key.trim(), value.trim())
    }

    /// Applies the seed override from the environment, if present.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        self.apply_seed_env(std::env::var(SEED_ENV).ok().as_deref())
    }

    pub fn apply_seed_env(&mut self, value: Option<&str>) -> Result<(), ConfigError> {
        match value {
            Some(v) => self.set("seed", v.trim()),
            None => Ok(()),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_with_base(key, value, None)
    }

    fn set_with_base(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<(), ConfigError> {
        let repr = &mut self.model_config.repr;
        match key {
            "train" => self.train = parse_path(value, base),
            "dev" => self.dev = parse_path(value, base),
            "test" => self.test = parse_path(value, base),
            "pretrained" => self.pretrained = parse_path(value, base),
            "model" => self.model = parse_path(value, base),
            "test_size" => {
                self.test_size = match value {
                    "" | "none" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "min_word_freq" => self.min_word_freq = parse_num(key, value)?,
            "use_char" => repr.use_char = parse_bool(key, value)?,
            "use_pretrained" => repr.use_pretrained = parse_bool(key, value)?,
            "pretrained_dim" => repr.pretrained_dim = parse_num(key, value)?,
            "word_dim" => repr.word_dim = parse_num(key, value)?,
            "pos_dim" => repr.pos_dim = parse_num(key, value)?,
            "char_dim" => repr.char_dim = parse_num(key, value)?,
            "char_hidden" => repr.char_hidden = parse_num(key, value)?,
            "char_layers" => repr.char_layers = parse_num(key, value)?,
            "vprime_dim" => repr.vprime_dim = parse_num(key, value)?,
            "sent_hidden" => repr.sent_hidden = parse_num(key, value)?,
            "sent_layers" => repr.sent_layers = parse_num(key, value)?,
            "tree_hidden" => self.model_config.tree_hidden = parse_num(key, value)?,
            "rel_dim" => self.model_config.rel_dim = parse_num(key, value)?,
            "mlp_hidden" => self.model_config.mlp_hidden = parse_num(key, value)?,
            "learning_rate" => self.training.learning_rate = parse_float(key, value)?,
            "beta1" => self.adam.beta1 = parse_float(key, value)?,
            "beta2" => self.adam.beta2 = parse_float(key, value)?,
            "eps" => self.adam.eps = parse_float(key, value)?,
            "seed" => self.training.seed = parse_num(key, value)?,
            "epochs" => self.training.epochs = parse_num(key, value)?,
            "error_threshold" => self.training.error_threshold = parse_num(key, value)?,
            "explore" => self.training.explore = parse_bool(key, value)?,
            "word_dropout" => {
                self.training.word_dropout = match value {
                    "none" | "off" => None,
                    v => {
                        let alpha = parse_float(key, v)?;
                        if alpha < 0.0 {
                            return Err(invalid(key, v, "must be non-negative"));
                        }
                        (alpha > 0.0).then_some(alpha)
                    }
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.to_owned())),
        }
        Ok(())
    }

    /// Checks dimensions, thresholds, optimizer ranges and that every
    /// referenced input file exists. `model` is an output and is not checked.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let repr = &self.model_config.repr;
        let mut dims = vec![
            ("word_dim", repr.word_dim),
            ("pos_dim", repr.pos_dim),
            ("vprime_dim", repr.vprime_dim),
            ("sent_hidden", repr.sent_hidden),
            ("sent_layers", repr.sent_layers),
            ("tree_hidden", self.model_config.tree_hidden),
            ("rel_dim", self.model_config.rel_dim),
            ("mlp_hidden", self.model_config.mlp_hidden),
            ("error_threshold", self.training.error_threshold),
            ("epochs", self.training.epochs),
            ("min_word_freq", self.min_word_freq as usize),
        ];
        if repr.use_char {
            dims.extend([
                ("char_dim", repr.char_dim),
                ("char_hidden", repr.char_hidden),
                ("char_layers", repr.char_layers),
            ]);
        }
        if let Some((name, _)) = dims.into_iter().find(|&(_, v)| v == 0) {
            return Err(ConfigError::NotPositive(name));
        }
        if self.training.learning_rate <= 0.0 {
            return Err(ConfigError::NotPositive("learning_rate"));
        }
        if self.adam.eps <= 0.0 {
            return Err(ConfigError::NotPositive("eps"));
        }
        for (key, beta) in [("beta1", self.adam.beta1), ("beta2", self.adam.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(invalid(key, &beta.to_string(), "must lie in [0, 1)"));
            }
        }
        if let Some(alpha) = self.training.word_dropout {
            if alpha < 0.0 {
                return Err(invalid("word_dropout", &alpha.to_string(), "must be non-negative"));
            }
        }
        if repr.use_pretrained && self.pretrained.is_none() {
            return Err(ConfigError::PretrainedPathMissing);
        }
        for (key, path) in [
            ("train", &self.train),
            ("dev", &self.dev),
            ("test", &self.test),
            ("pretrained", &self.pretrained),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(ConfigError::MissingPath {
                        key,
                        path: p.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Fixes `pretrained_dim` from a loaded table; a conflicting explicit
    /// value is an error.
    pub fn reconcile_pretrained_dim(&mut self, loaded: usize) -> Result<(), ConfigError> {
        let repr = &mut self.model_config.repr;
        if repr.pretrained_dim != 0 && repr.pretrained_dim != loaded {
            return Err(ConfigError::PretrainedDimension {
                configured: repr.pretrained_dim,
                loaded,
            });
        }
        repr.pretrained_dim = loaded;
        Ok(())
    }

    /// The configuration as `key = value` lines that parse back to `self`.
    pub fn render(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let repr = &self.model_config.repr;
        let values: Vec<String> = vec![
            path(&self.train),
            path(&self.dev),
            path(&self.test),
            self.test_size.map_or_else(|| "none".to_owned(), |v| v.to_string()),
            path(&self.pretrained),
            path(&self.model),
            self.min_word_freq.to_string(),
            repr.use_char.to_string(),
            repr.use_pretrained.to_string(),
            repr.pretrained_dim.to_string(),
            repr.word_dim.to_string(),
            repr.pos_dim.to_string(),
            repr.char_dim.to_string(),
            repr.char_hidden.to_string(),
            repr.char_layers.to_string(),
            repr.vprime_dim.to_string(),
            repr.sent_hidden.to_string(),
            repr.sent_layers.to_string(),
            self.model_config.tree_hidden.to_string(),
            self.model_config.rel_dim.to_string(),
            self.model_config.mlp_hidden.to_string(),
            format!("{:?}", self.training.learning_rate),
            format!("{:?}", self.adam.beta1),
            format!("{:?}", self.adam.beta2),
            format!("{:?}", self.adam.eps),
            self.training.seed.to_string(),
            self.training.epochs.to_string(),
            self.training.error_threshold.to_string(),
            self.training.explore.to_string(),
            self.training.word_dropout.map_or_else(|| "none".to_owned(), |a| format!("{a:?}")),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library_defaults() {
        let c = Config::parse("", None).unwrap();
        assert_eq!(c.model_config, ModelConfig::default());
        assert_eq!(c.training, TrainConfig::default());
        assert_eq!(c.training.error_threshold, 50);
        assert_eq!(c.model_config.repr.char_dim, 100);
        assert_eq!(c.model_config.repr.char_hidden, 100);
        assert_eq!(c.model_config.repr.char_layers, 2);
    }

    #[test]
    fn comments_overrides_and_env() {
        let text = "# experiment\nepochs = 3  # short\nseed=4\nuse_char = false\n\nepochs = 5\n";
        let mut c = Config::parse(text, None).unwrap();
        assert_eq!(c.training.epochs, 5);
        assert_eq!(c.training.seed, 4);
        assert!(!c.model_config.repr.use_char);
        c.apply_override("seed=9").unwrap();
        assert_eq!(c.training.seed, 9);
        c.apply_seed_env(Some("12")).unwrap();
        assert_eq!(c.training.seed, 12);
        c.apply_seed_env(None).unwrap();
        assert_eq!(c.training.seed, 12);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(
            Config::parse("epochs\n", None),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            Config::parse("colour = red\n", None),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            Config::parse("epochs = many\n", None),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(
            Config::parse("learning_rate = NaN\n", None),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(Config::parse("explore = maybe\n", None), Err(_)));
    }

    #[test]
    fn validation() {
        let c = Config::parse("word_dim = 0\n", None).unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::NotPositive("word_dim"))));
        let c = Config::parse("error_threshold = 0\n", None).unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::NotPositive("error_threshold"))));
        let c = Config::parse("use_pretrained = true\n", None).unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::PretrainedPathMissing)));
        let c = Config::parse("use_pretrained = true\npretrained = /nonexistent/vec.txt\n", None).unwrap();
        assert!(matches!(
            c.validate(),
            Err(ConfigError::MissingPath { key: "pretrained", .. })
        ));
        let c = Config::parse("use_char = false\nchar_dim = 0\n", None).unwrap();
        c.validate().unwrap();
        let c = Config::parse("beta2 = 1.0\n", None).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let c = Config::parse("train = data/train.conll\nmodel = /abs/m.bin\n", Some(Path::new("/exp"))).unwrap();
        assert_eq!(c.train.as_deref(), Some(Path::new("/exp/data/train.conll")));
        assert_eq!(c.model.as_deref(), Some(Path::new("/abs/m.bin")));
    }

    #[test]
    fn word_dropout_forms() {
        let mut c = Config::default();
        c.set("word_dropout", "none").unwrap();
        assert_eq!(c.training.word_dropout, None);
        c.set("word_dropout", "0").unwrap();
        assert_eq!(c.training.word_dropout, None);
        c.set("word_dropout", "0.5").unwrap();
        assert_eq!(c.training.word_dropout, Some(0.5));
        assert!(c.set("word_dropout", "-1").is_err());
    }

    #[test]
    fn pretrained_dimension_conflict() {
        let mut c = Config::default();
        c.reconcile_pretrained_dim(300).unwrap();
        assert_eq!(c.model_config.repr.pretrained_dim, 300);
        assert!(matches!(
            c.reconcile_pretrained_dim(100),
            Err(ConfigError::PretrainedDimension {
                configured: 300,
                loaded: 100
            })
        ));
    }

    #[test]
    fn render_round_trips() {
        let mut c = Config::default();
        c.set("train", "/data/train.conll").unwrap();
        c.set("test_size", "1020").unwrap();
        c.set("learning_rate", "0.0025").unwrap();
        c.set("word_dropout", "none").unwrap();
        c.set("explore", "false").unwrap();
        let back = Config::parse(&c.render(), None).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.render().lines().count(), KEYS.len());
    }
}
