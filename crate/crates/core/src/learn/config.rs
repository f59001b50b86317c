//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may
//! appear once; unknown keys and malformed values are reported with their
//! line number.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::encoder::Activation;
use super::features::HeadMode;
use super::model::IntermediateTask;
use super::optim::OptimizerKind;
use crate::proxy::{ProxyKind, DEFAULT_GRAPH_ETA, DEFAULT_TREE_ETA};
use crate::{Error, Result};

/// Parsed but not yet interpreted configuration entries.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected 'key = value', found '{trimmed}'"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "empty key".into(),
                });
            }
            if let Some((first, _)) = entries.get(&key) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key '{key}' (first set on line {first})"),
                });
            }
            entries.insert(key, (line, value.trim().to_string()));
        }
        Ok(KeyValues { entries })
    }

    /// Removes and parses `key`, if present.
    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|e: T::Err| Error::Parse {
                line,
                msg: format!("invalid value '{value}' for '{key}': {e}"),
            }),
        }
    }

    pub fn take_or<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    /// Removes a comma-separated list.
    pub fn take_list<T>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|item| {
                    item.parse().map_err(|e: T::Err| Error::Parse {
                        line,
                        msg: format!("invalid item '{item}' for '{key}': {e}"),
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Line on which `key` was set.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|(line, _)| *line)
    }

    /// Fails on the first key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::Parse {
                line: *line,
                msg: format!("unknown key '{key}'"),
            }),
        }
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::invalid(format!(
            "{name} must be positive, got {value}"
        )));
    }
    Ok(())
}

/// How training instances are drawn from the two datasets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Sampling {
    /// Every epoch visits the union of both datasets in random order.
    Union,
    /// Train the intermediate model alone first, then visit all end
    /// instances plus a random `fraction` of intermediate ones per epoch.
    PretrainSubsample {
        pretrain_epochs: usize,
        fraction: f64,
    },
}

/// Supervised objective of the intermediate model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntermediateLoss {
    Hinge,
    LogLoss,
}

impl FromStr for IntermediateLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(IntermediateLoss::Hinge),
            "log_loss" => Ok(IntermediateLoss::LogLoss),
            other => Err(Error::invalid(format!("unknown loss '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub anneal_factor: f64,
    pub anneal_every: usize,
    pub clip_norm: f64,
    pub batch_size: usize,
    /// SPIGOT step size; `None` uses the layer default.
    pub eta: Option<f64>,
    /// Probability of drawing an end-task instance. `None` draws in
    /// proportion to the dataset sizes.
    pub alpha: Option<f64>,
    pub sampling: Sampling,
    pub seed: u64,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub cost_weight: f64,
    /// `None` picks hinge loss, or log-loss for structured attention.
    pub intermediate_loss: Option<IntermediateLoss>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            anneal_factor: 0.5,
            anneal_every: 5,
            clip_norm: 5.0,
            batch_size: 8,
            eta: None,
            alpha: None,
            sampling: Sampling::Union,
            seed: 1,
            epochs: 10,
            optimizer: OptimizerKind::Sgd,
            cost_weight: 1.0,
            intermediate_loss: None,
        }
    }
}

impl TrainConfig {
    /// Reads the training keys out of `kv`, leaving the rest.
    pub fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let d = TrainConfig::default();
        let pretrain_epochs: Option<usize> = kv.take("pretrain_epochs")?;
        let fraction: Option<f64> = kv.take("subsample_fraction")?;
        let sampling = match kv.take::<String>("sampling")?.as_deref() {
            None | Some("union") => Sampling::Union,
            Some("pretrain_subsample") => Sampling::PretrainSubsample {
                pretrain_epochs: pretrain_epochs.unwrap_or(5),
                fraction: fraction.unwrap_or(0.2),
            },
            Some(other) => {
                return Err(Error::invalid(format!(
                    "unknown sampling mode '{other}' (expected union or pretrain_subsample)"
                )))
            }
        };
        let cfg = TrainConfig {
            learning_rate: kv.take_or("learning_rate", d.learning_rate)?,
            anneal_factor: kv.take_or("anneal_factor", d.anneal_factor)?,
            anneal_every: kv.take_or("anneal_every", d.anneal_every)?,
            clip_norm: kv.take_or("clip_norm", d.clip_norm)?,
            batch_size: kv.take_or("batch_size", d.batch_size)?,
            eta: kv.take("eta")?,
            alpha: kv.take("alpha")?,
            sampling,
            seed: kv.take_or("seed", d.seed)?,
            epochs: kv.take_or("epochs", d.epochs)?,
            optimizer: kv.take_or("optimizer", d.optimizer)?,
            cost_weight: kv.take_or("cost_weight", d.cost_weight)?,
            intermediate_loss: kv.take("intermediate_loss")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        positive("learning_rate", self.learning_rate)?;
        positive("anneal_factor", self.anneal_factor)?;
        positive("clip_norm", self.clip_norm)?;
        positive("cost_weight", self.cost_weight)?;
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch_size and epochs must be positive"));
        }
        if let Some(eta) = self.eta {
            positive("eta", eta)?;
        }
        if let Some(alpha) = self.alpha {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::invalid(format!(
                    "alpha must lie in [0, 1], got {alpha}"
                )));
            }
        }
        if let Sampling::PretrainSubsample { fraction, .. } = self.sampling {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::invalid("subsample_fraction must lie in (0, 1]"));
            }
            if self.alpha.is_some() {
                return Err(Error::invalid("alpha only applies to union sampling"));
            }
        }
        Ok(())
    }

    /// Fills in the SPIGOT step size: the configured `eta` if set, else the
    /// default for the intermediate structure. Other proxies pass through.
    pub fn resolve_proxy(&self, kind: ProxyKind, structure: IntermediateTask) -> Result<ProxyKind> {
        let default = match structure {
            IntermediateTask::Tree => DEFAULT_TREE_ETA,
            IntermediateTask::Graph { .. } => DEFAULT_GRAPH_ETA,
        };
        kind.with_eta(self.eta.unwrap_or(default))
    }
}

/// Network sizes shared by both models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub window: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub scorer_hidden: usize,
    pub max_distance: usize,
    pub role_dim: usize,
    pub classifier_token_dim: usize,
    pub classifier_hidden: usize,
    /// Pooling of head representations in the end model; `None` uses sum
    /// for trees and average for graphs.
    pub head_mode: Option<HeadMode>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 16,
            window: 1,
            hidden_dim: 24,
            activation: Activation::Tanh,
            scorer_hidden: 24,
            max_distance: 4,
            role_dim: 8,
            classifier_token_dim: 16,
            classifier_hidden: 16,
            head_mode: None,
        }
    }
}

impl FromStr for HeadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(HeadMode::Sum),
            "average" => Ok(HeadMode::Average),
            other => Err(Error::invalid(format!("unknown head mode '{other}'"))),
        }
    }
}

impl ModelConfig {
    pub fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let d = ModelConfig::default();
        let cfg = ModelConfig {
            embedding_dim: kv.take_or("embedding_dim", d.embedding_dim)?,
            window: kv.take_or("window", d.window)?,
            hidden_dim: kv.take_or("hidden_dim", d.hidden_dim)?,
            activation: kv.take_or("activation", d.activation)?,
            scorer_hidden: kv.take_or("scorer_hidden", d.scorer_hidden)?,
            max_distance: kv.take_or("max_distance", d.max_distance)?,
            role_dim: kv.take_or("role_dim", d.role_dim)?,
            classifier_token_dim: kv.take_or("classifier_token_dim", d.classifier_token_dim)?,
            classifier_hidden: kv.take_or("classifier_hidden", d.classifier_hidden)?,
            head_mode: kv.take("head_mode")?,
        };
        if [
            cfg.embedding_dim,
            cfg.hidden_dim,
            cfg.scorer_hidden,
            cfg.role_dim,
        ]
        .contains(&0)
        {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reports_lines() {
        let mut kv = KeyValues::parse("# comment\nlearning_rate = 0.1\n\nepochs=3\n").unwrap();
        let cfg = TrainConfig::from_kv(&mut kv).unwrap();
        assert_eq!(cfg.learning_rate, 0.1);
        assert_eq!(cfg.epochs, 3);
        kv.finish().unwrap();

        let mut kv = KeyValues::parse("epochs = 3\nlearning_rate = fast\n").unwrap();
        match TrainConfig::from_kv(&mut kv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let mut kv = KeyValues::parse("epochs = 3\nbogus = 1\n").unwrap();
        TrainConfig::from_kv(&mut kv).unwrap();
        assert!(matches!(kv.finish(), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(
            KeyValues::parse("a = 1\na = 2"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            KeyValues::parse("just words"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn validates_ranges() {
        let mut kv = KeyValues::parse("alpha = 1.5").unwrap();
        assert!(TrainConfig::from_kv(&mut kv).is_err());
        let mut kv =
            KeyValues::parse("sampling = pretrain_subsample\nsubsample_fraction = 0.2").unwrap();
        let cfg = TrainConfig::from_kv(&mut kv).unwrap();
        assert_eq!(
            cfg.sampling,
            Sampling::PretrainSubsample {
                pretrain_epochs: 5,
                fraction: 0.2
            }
        );
    }
}
