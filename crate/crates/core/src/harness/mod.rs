//! Experiment orchestration.
//!
//! One experiment runs the acquisition loop once per seed:
//!
//! 1. label `initial_budget` random samples;
//! 2. for each round: train to threshold, evaluate on the test split, select
//!    `per_round_k` samples (plain or patient-aware), label them;
//! 3. train and evaluate once more after the last acquisition.
//!
//! Seeds run in parallel and share nothing mutable. Each seed draws from
//! separate random streams for the initial pool, model initialisation,
//! mini-batch shuffling and selection.

pub mod config;
pub mod output;
pub mod summary;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::datagen::{self, CohortSpec};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::patient_aware::{patient_aware_select, PatientAwareConfig, PatientPick};
use crate::pool::{Dataset, PoolState, SampleId};
use crate::rng::{self, Stream};
use crate::strategies::{select_batch, QueryStrategy};

pub use config::{load_cohort_spec, load_experiment_config, parse_cohort_spec, parse_experiment_config};
pub use output::{read_curves, write_outputs};
pub use summary::{summarize, CurvePoint, CurveSummary, SummaryRow};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Generated(CohortSpec),
    Csv {
        train: PathBuf,
        test: PathBuf,
        num_classes: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub strategy: QueryStrategy,
    pub patient_aware: bool,
    pub patient_pick: PatientPick,
    pub allow_refill: bool,
    pub initial_budget: usize,
    pub per_round_k: usize,
    pub num_rounds: usize,
    pub seeds: Vec<u64>,
    pub warm_start: bool,
    pub model: ModelConfig,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Generated(CohortSpec::default()),
            strategy: QueryStrategy::Entropy,
            patient_aware: false,
            patient_pick: PatientPick::Informed,
            allow_refill: true,
            initial_budget: 128,
            per_round_k: 128,
            num_rounds: 10,
            seeds: vec![0, 1, 2, 3, 4],
            warm_start: false,
            model: ModelConfig::default(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    /// Checks everything that does not depend on the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.initial_budget == 0 {
            return Err(Error::Config("initial_budget must be at least 1".into()));
        }
        if self.per_round_k == 0 && self.num_rounds > 0 {
            return Err(Error::Config("per_round_k must be at least 1".into()));
        }
        self.model.validate()
    }

    /// Samples labeled after all acquisition rounds.
    pub fn final_labeled_count(&self) -> usize {
        self.initial_budget + self.num_rounds * self.per_round_k
    }

    /// Checks the budget against the training pool and the splits against
    /// each other.
    pub fn validate_against(&self, train: &Dataset, test: &Dataset) -> Result<()> {
        self.validate()?;
        if self.final_labeled_count() > train.len() {
            return Err(Error::Config(format!(
                "initial_budget + num_rounds * per_round_k = {} exceeds the {} training samples",
                self.final_labeled_count(),
                train.len()
            )));
        }
        if test.is_empty() {
            return Err(Error::Config("the test split is empty".into()));
        }
        if train.feature_dim() != test.feature_dim() || train.num_classes() != test.num_classes() {
            return Err(Error::Config(format!(
                "train ({} features, {} classes) and test ({} features, {} classes) disagree",
                train.feature_dim(),
                train.num_classes(),
                test.feature_dim(),
                test.num_classes()
            )));
        }
        Ok(())
    }

    /// Generates or loads the train and test splits.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        match &self.data {
            DataSource::Generated(spec) => {
                let cohort = datagen::generate_cohort(spec)?;
                Ok((cohort.train, cohort.test))
            }
            DataSource::Csv {
                train,
                test,
                num_classes,
            } => {
                let train = datagen::load_dataset_csv(train, *num_classes)?;
                let test = datagen::load_dataset_csv(test, Some(train.num_classes()))?;
                Ok((train, test))
            }
        }
    }
}

/// One train/evaluate/select cycle of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Labeled samples the model was trained on this round.
    pub labeled_count: usize,
    pub test_accuracy: f64,
    pub epochs_run: usize,
    pub threshold_reached: bool,
    /// Ids acquired at the end of this round; empty for the final round.
    pub selected: Vec<SampleId>,
}

impl RoundRecord {
    pub fn point(&self) -> CurvePoint {
        CurvePoint {
            round: self.round,
            labeled_count: self.labeled_count,
            test_accuracy: self.test_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    /// The learning curve, or the error that aborted this seed.
    pub outcome: std::result::Result<Vec<RoundRecord>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub runs: Vec<SeedRun>,
}

impl ExperimentResult {
    pub fn successful(&self) -> impl Iterator<Item = (u64, &Vec<RoundRecord>)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|rec| (r.seed, rec)))
    }

    pub fn failures(&self) -> impl Iterator<Item = (u64, &str)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.seed, e.as_str())))
    }

    /// Mean and standard error over the successful seeds, accumulated in
    /// ascending seed order so the result does not depend on the seed list order.
    pub fn summary(&self) -> Result<CurveSummary> {
        let mut runs: Vec<_> = self.successful().collect();
        runs.sort_by_key(|(seed, _)| *seed);
        let curves: Vec<Vec<CurvePoint>> = runs
            .into_iter()
            .map(|(_, records)| records.iter().map(RoundRecord::point).collect())
            .collect();
        summarize(&curves)
    }
}

/// Runs every seed of `config` on the given splits.
pub fn run_experiment(config: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<ExperimentResult> {
    config.validate_against(train, test)?;
    let runs = config
        .seeds
        .par_iter()
        .map(|&seed| SeedRun {
            seed,
            outcome: run_seed(config, train, test, seed).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(ExperimentResult { runs })
}

/// The acquisition loop for one seed.
pub fn run_seed(config: &ExperimentConfig, train: &Dataset, test: &Dataset, seed: u64) -> Result<Vec<RoundRecord>> {
    let mut pool_rng = rng::stream(seed, Stream::InitialPool);
    let mut init_rng = rng::stream(seed, Stream::ModelInit);
    let mut shuffle_rng = rng::stream(seed, Stream::Shuffle);
    let mut select_rng = rng::stream(seed, Stream::Selection);

    let mut pool = PoolState::new(train).seed_initial(config.initial_budget, &mut pool_rng)?;
    let initial = Model::init(&config.model, train.feature_dim(), train.num_classes(), &mut init_rng)?;
    let mut previous = initial.clone();
    let aware = PatientAwareConfig {
        base_strategy: config.strategy,
        k: config.per_round_k,
        allow_refill: config.allow_refill,
        patient_pick: config.patient_pick,
    };

    let mut records = Vec::with_capacity(config.num_rounds + 1);
    for round in 0..=config.num_rounds {
        let start = if config.warm_start { &previous } else { &initial };
        let labeled = pool.labeled_samples(train);
        let (trained, report) = start.train_to_threshold(&labeled, &config.model, &mut shuffle_rng)?;
        let test_accuracy = trained.evaluate_accuracy(test.samples())?;

        let selected = if round < config.num_rounds {
            if config.patient_aware {
                patient_aware_select(&aware, &trained, &pool, train, &mut select_rng)?
            } else {
                select_batch(config.strategy, &trained, &pool, train, config.per_round_k, &mut select_rng)?
            }
        } else {
            Vec::new()
        };

        records.push(RoundRecord {
            round,
            labeled_count: pool.labeled().len(),
            test_accuracy,
            epochs_run: report.epochs_run,
            threshold_reached: report.threshold_reached,
            selected: selected.clone(),
        });
        pool = pool.label_samples(&selected)?;
        previous = trained;
    }
    Ok(records)
}
