//! Run configuration: a JSON file merged with command-line flags, flags
//! taking precedence.

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use eeg_entropy::features::FeatureKey;
use eeg_entropy::svc::Grouping;
use eeg_entropy::{EntropyConfig, EntropyMethod};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Write a seeded surrogate dataset
    Synth,
    /// Load and screen a dataset
    Validate,
    /// Write the feature matrix of one estimator
    Extract,
    /// Evaluate every point of an estimator's parameter grid
    Sweep,
    /// Two-stage cross-validated accuracy of a feature set
    Cv,
    /// Greedy forward feature selection
    Select,
    /// Per-variant, per-channel, per-feature, segment-length or histogram study
    Study,
    /// Time feature computation and prediction for one segment
    Bench,
    /// Classify the trend of an entropy history
    Monitor,
    /// Evaluate one estimator on a series
    Entropy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Validate => "validate",
            Command::Extract => "extract",
            Command::Sweep => "sweep",
            Command::Cv => "cv",
            Command::Select => "select",
            Command::Study => "study",
            Command::Bench => "bench",
            Command::Monitor => "monitor",
            Command::Entropy => "entropy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StudyAxis {
    Variant,
    Channel,
    Feature,
    Length,
    Histogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingArg {
    Segment,
    Subject,
}

impl From<GroupingArg> for Grouping {
    fn from(g: GroupingArg) -> Self {
        match g {
            GroupingArg::Segment => Grouping::Segment,
            GroupingArg::Subject => Grouping::Subject,
        }
    }
}

/// Serde adapter storing a value through its text form.
mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.collect_str(v),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(de::Error::custom))
            .transpose()
    }
}

mod text_list {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Display, S: Serializer>(
        v: &Option<Vec<T>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|v| v.iter().map(ToString::to_string).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Option<Vec<T>>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Option::<Vec<String>>::deserialize(d)?
            .map(|v| {
                v.iter()
                    .map(|s| s.parse().map_err(de::Error::custom))
                    .collect()
            })
            .transpose()
    }
}

/// Every setting of a run. Absent values fall back to per-command defaults
/// at execution time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Feature matrix CSV written by `extract`, used instead of a manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_stage1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_stage2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<GroupingArg>,
    #[serde(default, with = "text", skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<EntropyMethod>,
    #[serde(default, with = "text_list", skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<EntropyConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<StudyAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<usize>>,
    /// `full`, or a list of `channel|variant` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subjects: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_effect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    #[serde(default, with = "text", skip_serializing_if = "Option::is_none")]
    pub key: Option<FeatureKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dead_band: Option<f64>,
    /// Series file for `entropy`: one value per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(
    name = "eeg-entropy",
    version,
    about = "Entropy-feature EEG classification: datasets, features, cross-validation and studies"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON run configuration; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Folds per repeat
    #[arg(long = "k")]
    pub k: Option<usize>,
    /// Repeats of the parameter-selection stage
    #[arg(long)]
    pub n_stage1: Option<usize>,
    /// Repeats of the scoring stage
    #[arg(long)]
    pub n_stage2: Option<usize>,
    #[arg(long, value_enum)]
    pub grouping: Option<GroupingArg>,
    /// Estimator, e.g. "FuzzyEn(m=1,r=0.15,r2=5)"
    #[arg(long)]
    pub entropy: Option<EntropyConfig>,
    #[arg(long)]
    pub method: Option<EntropyMethod>,
    /// Sweep points separated by ';'
    #[arg(long, value_delimiter = ';')]
    pub points: Option<Vec<EntropyConfig>>,
    #[arg(long, value_enum)]
    pub axis: Option<StudyAxis>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub plateau_eps: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    /// "full" or comma-separated channel|variant pairs
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Subjects per class for synth
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub class_effect: Option<f64>,
    #[arg(long)]
    pub segment_len: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Feature key, e.g. "T8|cA3|FuzzyEn(m=1,r=0.15,r2=5)"
    #[arg(long)]
    pub key: Option<FeatureKey>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub history: Option<Vec<f64>>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub dead_band: Option<f64>,
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug)]
pub enum ConfigError {
    /// Bad or missing arguments; carries the message to print.
    Usage(String),
    /// `--help` or `--version` output.
    Info(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Usage(m) | ConfigError::Info(m) => f.write_str(m),
        }
    }
}

macro_rules! overlay {
    ($cfg:ident, $cli:ident: $($field:ident),* $(,)?) => {
        $( if $cli.$field.is_some() { $cfg.$field = $cli.$field; } )*
    };
}

/// Parses `argv` (including the program name), reading `--config` first.
pub fn parse_config<I, S>(argv: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    use clap::error::ErrorKind;
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ConfigError::Info(e.to_string()),
        _ => ConfigError::Usage(e.to_string()),
    })?;
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                ConfigError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| {
                ConfigError::Usage(format!("invalid config {}: {e}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    overlay!(cfg, cli: command, manifest, matrix, out, seed, k, n_stage1, n_stage2, grouping,
        entropy, method, points, axis, budget, plateau_eps, lengths, features, top_n, subjects,
        class_effect, segment_len, repetitions, key, bins, history, window, dead_band, input);
    if cfg.command.is_none() {
        return Err(ConfigError::Usage(
            <Cli as clap::CommandFactory>::command().render_help().to_string(),
        ));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Flags that reproduce this configuration.
    pub fn to_args(&self) -> Vec<String> {
        let mut a = vec!["eeg-entropy".to_string()];
        if let Some(c) = self.command {
            a.push(c.name().into());
        }
        let mut flag = |name: &str, v: String| {
            a.push(format!("--{name}"));
            a.push(v);
        };
        let path = |p: &PathBuf| p.display().to_string();
        let join = |v: &[String], sep: &str| v.join(sep);
        if let Some(v) = &self.manifest {
            flag("manifest", path(v));
        }
        if let Some(v) = &self.matrix {
            flag("matrix", path(v));
        }
        if let Some(v) = &self.out {
            flag("out", path(v));
        }
        if let Some(v) = self.seed {
            flag("seed", v.to_string());
        }
        if let Some(v) = self.k {
            flag("k", v.to_string());
        }
        if let Some(v) = self.n_stage1 {
            flag("n-stage1", v.to_string());
        }
        if let Some(v) = self.n_stage2 {
            flag("n-stage2", v.to_string());
        }
        if let Some(v) = self.grouping {
            flag("grouping", v.to_possible_value().unwrap().get_name().into());
        }
        if let Some(v) = &self.entropy {
            flag("entropy", v.to_string());
        }
        if let Some(v) = self.method {
            flag("method", v.to_string());
        }
        if let Some(v) = &self.points {
            let s: Vec<String> = v.iter().map(ToString::to_string).collect();
            flag("points", join(&s, ";"));
        }
        if let Some(v) = self.axis {
            flag("axis", v.to_possible_value().unwrap().get_name().into());
        }
        if let Some(v) = self.budget {
            flag("budget", v.to_string());
        }
        if let Some(v) = self.plateau_eps {
            flag("plateau-eps", v.to_string());
        }
        if let Some(v) = &self.lengths {
            let s: Vec<String> = v.iter().map(ToString::to_string).collect();
            flag("lengths", join(&s, ","));
        }
        if let Some(v) = &self.features {
            flag("features", join(v, ","));
        }
        if let Some(v) = self.top_n {
            flag("top-n", v.to_string());
        }
        if let Some(v) = self.subjects {
            flag("subjects", v.to_string());
        }
        if let Some(v) = self.class_effect {
            flag("class-effect", v.to_string());
        }
        if let Some(v) = self.segment_len {
            flag("segment-len", v.to_string());
        }
        if let Some(v) = self.repetitions {
            flag("repetitions", v.to_string());
        }
        if let Some(v) = &self.key {
            flag("key", v.to_string());
        }
        if let Some(v) = self.bins {
            flag("bins", v.to_string());
        }
        if let Some(v) = &self.history {
            let s: Vec<String> = v.iter().map(ToString::to_string).collect();
            flag("history", join(&s, ","));
        }
        if let Some(v) = self.window {
            flag("window", v.to_string());
        }
        if let Some(v) = self.dead_band {
            flag("dead-band", v.to_string());
        }
        if let Some(v) = &self.input {
            flag("input", path(v));
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"command":"cv","seed":9,"k":5}"#).unwrap();
        let cfg = parse_config(["eeg-entropy", "--config", path.to_str().unwrap(), "--seed", "7"])
            .unwrap();
        assert_eq!(cfg.seed(), 7);
        assert_eq!(cfg.k, Some(5));
        assert_eq!(cfg.command, Some(Command::Cv));
    }

    #[test]
    fn no_args_is_usage() {
        assert!(matches!(parse_config(["eeg-entropy"]), Err(ConfigError::Usage(_))));
        assert!(matches!(
            parse_config(["eeg-entropy", "cv", "--bogus"]),
            Err(ConfigError::Usage(_))
        ));
    }

    #[test]
    fn seed_default() {
        let cfg = parse_config(["eeg-entropy", "cv"]).unwrap();
        assert_eq!(cfg.seed(), 42);
    }

    #[test]
    fn list_flags() {
        let cfg = parse_config([
            "eeg-entropy",
            "sweep",
            "--points",
            "PhaseEn(K=2);PhaseEn(K=3)",
            "--lengths",
            "150,300",
            "--history",
            "-1,2.5",
        ])
        .unwrap();
        assert_eq!(cfg.points.unwrap().len(), 2);
        assert_eq!(cfg.lengths.unwrap(), vec![150, 300]);
        assert_eq!(cfg.history.unwrap(), vec![-1.0, 2.5]);
    }
}
