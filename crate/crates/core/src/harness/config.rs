//! Flat `key = value` configuration files (TOML syntax, no tables).
//!
//! Experiment keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `data` | `generated` or `csv` | `generated` |
//! | `train_csv`, `test_csv` | dataset files when `data = "csv"`, relative to the config file | |
//! | `num_classes` | class count (cohort size or CSV label bound) | 3 / inferred |
//! | cohort keys | see [`parse_cohort_spec`] | |
//! | `strategy` | `random`, `least_confidence`, `margin`, `entropy`, `badge` | `entropy` |
//! | `patient_aware` | wrap the strategy | `false` |
//! | `patient_pick` | `informed` or `random` | `informed` |
//! | `allow_refill` | let patients contribute twice when patients run out | `true` |
//! | `initial_budget` | randomly labeled samples before round 0 | 128 |
//! | `per_round_k` | samples acquired per round | 128 |
//! | `num_rounds` | acquisition rounds | 10 |
//! | `seeds` | list of integers | `[0, 1, 2, 3, 4]` |
//! | `warm_start` | continue from the previous round's weights | `false` |
//! | `output` | output directory | |
//! | `hidden_units`, `learning_rate`, `adam_beta1`, `adam_beta2`, `adam_eps`, `batch_size`, `target_train_accuracy`, `max_epochs` | classifier | see [`ModelConfig`] |
//!
//! Unknown keys are an error.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use super::{DataSource, ExperimentConfig};
use crate::datagen::CohortSpec;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::patient_aware::PatientPick;
use crate::strategies::QueryStrategy;

struct Keys {
    table: toml::Table,
}

impl Keys {
    fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some((key, _)) = table.iter().find(|(_, v)| v.is_table()) {
            return Err(Error::Config(format!("`{key}`: nested tables are not supported")));
        }
        Ok(Self { table })
    }

    fn take<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>> {
        self.table
            .remove(key)
            .map(|v| {
                v.try_into()
                    .map_err(|e: toml::de::Error| Error::Config(format!("`{key}`: {}", e.message())))
            })
            .transpose()
    }

    fn take_or<T: DeserializeOwned>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn finish(self) -> Result<()> {
        match self.table.keys().next() {
            Some(key) => Err(Error::Config(format!("unknown key `{key}`"))),
            None => Ok(()),
        }
    }
}

fn take_cohort(keys: &mut Keys) -> Result<CohortSpec> {
    let d = CohortSpec::default();
    Ok(CohortSpec {
        num_classes: keys.take_or("num_classes", d.num_classes)?,
        num_patients: keys.take_or("num_patients", d.num_patients)?,
        feature_dim: keys.take_or("feature_dim", d.feature_dim)?,
        class_separation: keys.take_or("class_separation", d.class_separation)?,
        patient_offset_scale: keys.take_or("patient_offset_scale", d.patient_offset_scale)?,
        noise_scale: keys.take_or("noise_scale", d.noise_scale)?,
        size_alpha: keys.take_or("size_alpha", d.size_alpha)?,
        min_samples_per_patient: keys.take_or("min_samples_per_patient", d.min_samples_per_patient)?,
        max_samples_per_patient: keys.take_or("max_samples_per_patient", d.max_samples_per_patient)?,
        test_patient_fraction: keys.take_or("test_patient_fraction", d.test_patient_fraction)?,
        class_weights: keys.take_or("class_weights", d.class_weights)?,
        seed: keys.take_or("data_seed", d.seed)?,
    })
}

/// Parses a cohort description for `gen-data`.
///
/// Keys: `num_classes`, `num_patients`, `feature_dim`, `class_separation`,
/// `patient_offset_scale`, `noise_scale`, `size_alpha`,
/// `min_samples_per_patient`, `max_samples_per_patient`,
/// `test_patient_fraction`, `class_weights`, `data_seed`.
pub fn parse_cohort_spec(text: &str) -> Result<CohortSpec> {
    let mut keys = Keys::parse(text)?;
    let spec = take_cohort(&mut keys)?;
    keys.finish()?;
    spec.validate()?;
    Ok(spec)
}

fn take_model(keys: &mut Keys) -> Result<ModelConfig> {
    let d = ModelConfig::default();
    let cfg = ModelConfig {
        hidden_units: keys.take_or("hidden_units", d.hidden_units)?,
        learning_rate: keys.take_or("learning_rate", d.learning_rate)?,
        adam_beta1: keys.take_or("adam_beta1", d.adam_beta1)?,
        adam_beta2: keys.take_or("adam_beta2", d.adam_beta2)?,
        adam_eps: keys.take_or("adam_eps", d.adam_eps)?,
        batch_size: keys.take_or("batch_size", d.batch_size)?,
        target_train_accuracy: keys.take_or("target_train_accuracy", d.target_train_accuracy)?,
        max_epochs: keys.take_or("max_epochs", d.max_epochs)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parses an experiment config. Relative paths are resolved against
/// `base_dir`.
pub fn parse_experiment_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let mut keys = Keys::parse(text)?;
    let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };

    let data_kind: String = keys.take_or("data", "generated".to_string())?;
    let data = match data_kind.as_str() {
        "generated" => DataSource::Generated(take_cohort(&mut keys)?),
        "csv" => {
            let train: PathBuf = keys
                .take("train_csv")?
                .ok_or_else(|| Error::Config("`train_csv` is required when data = \"csv\"".into()))?;
            let test: PathBuf = keys
                .take("test_csv")?
                .ok_or_else(|| Error::Config("`test_csv` is required when data = \"csv\"".into()))?;
            DataSource::Csv {
                train: resolve(train),
                test: resolve(test),
                num_classes: keys.take("num_classes")?,
            }
        }
        other => return Err(Error::Config(format!("unknown data source `{other}`"))),
    };

    let strategy: String = keys.take_or("strategy", "entropy".to_string())?;
    let patient_pick: String = keys.take_or("patient_pick", "informed".to_string())?;
    let defaults = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        data,
        strategy: strategy.parse::<QueryStrategy>()?,
        patient_aware: keys.take_or("patient_aware", defaults.patient_aware)?,
        patient_pick: patient_pick.parse::<PatientPick>()?,
        allow_refill: keys.take_or("allow_refill", defaults.allow_refill)?,
        initial_budget: keys.take_or("initial_budget", defaults.initial_budget)?,
        per_round_k: keys.take_or("per_round_k", defaults.per_round_k)?,
        num_rounds: keys.take_or("num_rounds", defaults.num_rounds)?,
        seeds: keys.take_or("seeds", defaults.seeds)?,
        warm_start: keys.take_or("warm_start", defaults.warm_start)?,
        output: keys.take::<PathBuf>("output")?.map(resolve),
        model: take_model(&mut keys)?,
    };
    keys.finish()?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_experiment_config(&text, base)
}

pub fn load_cohort_spec(path: &Path) -> Result<CohortSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_cohort_spec(&text)
}
