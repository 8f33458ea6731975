use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Normalization;
use crate::dropout::{DropoutKind, DropoutPolicy};
use crate::error::{Error, Result};
use crate::network::OutputHead;
use crate::trainer::Hyperparams;

/// Experimental condition: the SC baseline or one of the three PC variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "ND")]
    Nd,
    #[serde(rename = "NFD")]
    Nfd,
    #[serde(rename = "FD")]
    Fd,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::Sc, Condition::Nd, Condition::Nfd, Condition::Fd];

    pub fn label(self) -> &'static str {
        match self {
            Condition::Sc => "SC",
            Condition::Nd => "ND",
            Condition::Nfd => "NFD",
            Condition::Fd => "FD",
        }
    }

    /// SC is a single fully connected circuit trained with standard dropout.
    pub fn dropout_kind(self) -> DropoutKind {
        match self {
            Condition::Sc | Condition::Nd => DropoutKind::NodeDropout,
            Condition::Nfd => DropoutKind::NonfixedDropcircuit,
            Condition::Fd => DropoutKind::FixedDropcircuit,
        }
    }

    pub fn policy(self, retain_p: f64) -> DropoutPolicy {
        DropoutPolicy::new(self.dropout_kind(), retain_p)
    }

    pub fn is_parallel(self) -> bool {
        self != Condition::Sc
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SC" => Ok(Condition::Sc),
            "ND" => Ok(Condition::Nd),
            "NFD" => Ok(Condition::Nfd),
            "FD" => Ok(Condition::Fd),
            other => Err(Error::Config(format!("unknown condition `{other}`"))),
        }
    }
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_true() -> bool {
    true
}

/// Experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset manifest; relative paths resolve against the config file.
    pub manifest: PathBuf,
    pub datasets: Vec<String>,
    /// Hidden-layer total widths per architecture, e.g. `[[100, 100]]`.
    pub architectures: Vec<Vec<usize>>,
    pub conditions: Vec<Condition>,
    /// Circuit counts tried for every PC condition.
    pub circuit_counts: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_true")]
    pub stratified: bool,
    /// Overrides each dataset's default normalization.
    #[serde(default)]
    pub normalization: Option<Normalization>,
    #[serde(default)]
    pub head: OutputHead,
    /// Gives every trial of a cell the same seed (for checking the
    /// statistics plumbing; real runs leave this off).
    #[serde(default)]
    pub identical_trial_seeds: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `manifest` is resolved against the
    /// file's directory and made absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::parse(&text)?;
        if cfg.manifest.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.manifest = dir.join(&cfg.manifest);
            }
        }
        if let Ok(abs) = cfg.manifest.canonicalize() {
            cfg.manifest = abs;
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        if self.datasets.is_empty() || self.architectures.is_empty() || self.conditions.is_empty() {
            return err("datasets, architectures and conditions must be non-empty".into());
        }
        if let Some(d) = self
            .datasets
            .iter()
            .find(|d| d.is_empty() || !d.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'))
        {
            return err(format!("dataset name `{d}` may only use letters, digits, `-` and `_`"));
        }
        if self.architectures.iter().any(|a| a.is_empty() || a.contains(&0)) {
            return err("every architecture needs at least one non-empty hidden layer".into());
        }
        if self.conditions.iter().any(|c| c.is_parallel()) && self.circuit_counts.is_empty() {
            return err("PC conditions need at least one circuit count".into());
        }
        for &c in &self.conditions {
            if c.dropout_kind().granularity() == Some(crate::dropout::Granularity::Circuit) {
                if let Some(k) = self.circuit_counts.iter().find(|&&k| k < 2) {
                    return err(format!("{c} needs at least two circuits, got k={k}"));
                }
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return err(format!("test_fraction must be in (0, 1), got {}", self.test_fraction));
        }
        self.hyperparams.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

pub fn architecture_label(hidden: &[usize]) -> String {
    hidden.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
manifest = "data/manifest.toml"
datasets = ["glass"]
architectures = [[100, 100]]
conditions = ["SC", "NFD"]
circuit_counts = [5]
trials = 3
base_seed = 7

[hyperparams]
epochs = 10
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.conditions, vec![Condition::Sc, Condition::Nfd]);
        assert_eq!(cfg.hyperparams.epochs, 10);
        assert_eq!(cfg.hyperparams.learning_rate, 0.1);
        assert_eq!(cfg.test_fraction, 0.2);
        assert!(cfg.stratified);
        let again = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse(&MINIMAL.replace("trials = 3", "trials = 0")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("[5]", "[1]")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("\"NFD\"", "\"XYZ\"")).is_err());
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}\nunknown_key = 1")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("epochs = 10", "epochs = 0")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("\"glass\"", "\"a,b\"")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("[[100, 100]]", "[[]]")).is_err());
    }

    #[test]
    fn condition_policies() {
        assert_eq!(Condition::Sc.dropout_kind(), DropoutKind::NodeDropout);
        assert_eq!(Condition::Fd.policy(0.5).kind, DropoutKind::FixedDropcircuit);
        assert_eq!("nfd".parse::<Condition>().unwrap(), Condition::Nfd);
        assert_eq!(architecture_label(&[1000, 500]), "1000x500");
    }
}
