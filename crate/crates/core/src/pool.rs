//! Datasets, the labeled/unlabeled split, and the per-patient partition of
//! the unlabeled pool.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{Error, Result};

pub type SampleId = usize;
pub type PatientId = u64;

/// One feature vector with its class label and the patient it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: SampleId,
    pub patient_id: PatientId,
    pub features: Vec<f64>,
    pub label: usize,
}

/// An ordered collection of samples whose ids are `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    num_classes: usize,
    feature_dim: usize,
}

impl Dataset {
    /// Validates and wraps `samples`.
    ///
    /// Ids must be dense and in order, every feature vector must have
    /// `feature_dim` finite entries, labels must be below `num_classes`, and
    /// every class must occur at least once.
    pub fn new(samples: Vec<Sample>, num_classes: usize, feature_dim: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if feature_dim == 0 {
            return Err(Error::InvalidDataset("feature dimension must be at least 1".into()));
        }
        let mut seen = vec![false; num_classes];
        for (index, sample) in samples.iter().enumerate() {
            if sample.id != index {
                return Err(Error::InvalidDataset(format!(
                    "sample at position {index} has id {}",
                    sample.id
                )));
            }
            if sample.features.len() != feature_dim {
                return Err(Error::InvalidDataset(format!(
                    "sample {index} has {} features, expected {feature_dim}",
                    sample.features.len()
                )));
            }
            if sample.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "sample {index} has a non-finite feature"
                )));
            }
            if sample.label >= num_classes {
                return Err(Error::InvalidDataset(format!(
                    "sample {index} has label {} but there are {num_classes} classes",
                    sample.label
                )));
            }
            seen[sample.label] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!("class {missing} has no samples")));
        }
        Ok(Self {
            samples,
            num_classes,
            feature_dim,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, id: SampleId) -> &Sample {
        &self.samples[id]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Distinct patient ids, ascending.
    pub fn patient_ids(&self) -> BTreeSet<PatientId> {
        self.samples.iter().map(|s| s.patient_id).collect()
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }
}

/// Which samples have been annotated so far.
///
/// Values are immutable snapshots: every mutating operation returns a new
/// state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    labeled: BTreeSet<SampleId>,
    unlabeled: BTreeSet<SampleId>,
}

impl PoolState {
    /// Everything unlabeled.
    pub fn new(dataset: &Dataset) -> Self {
        Self {
            labeled: BTreeSet::new(),
            unlabeled: (0..dataset.len()).collect(),
        }
    }

    pub fn labeled(&self) -> &BTreeSet<SampleId> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<SampleId> {
        &self.unlabeled
    }

    /// Checks disjointness and coverage of `0..dataset.len()`.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        if let Some(id) = self.labeled.intersection(&self.unlabeled).next() {
            return Err(Error::InvalidSelection {
                id: *id,
                reason: "sample is both labeled and unlabeled",
            });
        }
        if self.labeled.len() + self.unlabeled.len() != dataset.len() {
            return Err(Error::InvalidInput(format!(
                "pool covers {} ids but the dataset has {}",
                self.labeled.len() + self.unlabeled.len(),
                dataset.len()
            )));
        }
        let out_of_range = self
            .labeled
            .iter()
            .chain(self.unlabeled.iter())
            .find(|&&id| id >= dataset.len());
        if let Some(&id) = out_of_range {
            return Err(Error::InvalidSelection {
                id,
                reason: "id is not part of the dataset",
            });
        }
        Ok(())
    }

    /// Moves `count` uniformly chosen unlabeled ids into the labeled set.
    pub fn seed_initial<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Self> {
        if count > self.unlabeled.len() {
            return Err(Error::BudgetExhausted {
                requested: count,
                available: self.unlabeled.len(),
            });
        }
        let candidates: Vec<SampleId> = self.unlabeled.iter().copied().collect();
        let picked: Vec<SampleId> = rand::seq::index::sample(rng, candidates.len(), count)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        self.label_samples(&picked)
    }

    /// Moves `ids` from unlabeled to labeled.
    pub fn label_samples(&self, ids: &[SampleId]) -> Result<Self> {
        let mut next = self.clone();
        for &id in ids {
            if !next.unlabeled.remove(&id) {
                let reason = if next.labeled.contains(&id) {
                    "sample is already labeled"
                } else {
                    "unknown sample id"
                };
                return Err(Error::InvalidSelection { id, reason });
            }
            next.labeled.insert(id);
        }
        Ok(next)
    }

    /// The labeled samples of `dataset`, in ascending id order.
    pub fn labeled_samples<'a>(&self, dataset: &'a Dataset) -> Vec<&'a Sample> {
        self.labeled.iter().map(|&id| dataset.sample(id)).collect()
    }
}

/// The unlabeled pool grouped by patient. Groups are never empty and their
/// ids are ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatientPartition {
    groups: BTreeMap<PatientId, Vec<SampleId>>,
}

impl PatientPartition {
    pub fn groups(&self) -> &BTreeMap<PatientId, Vec<SampleId>> {
        &self.groups
    }

    pub fn num_patients(&self) -> usize {
        self.groups.len()
    }

    pub fn num_samples(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn group(&self, patient: PatientId) -> Option<&[SampleId]> {
        self.groups.get(&patient).map(Vec::as_slice)
    }

    /// Builds a partition from arbitrary ids, keeping the same ordering
    /// guarantees as [`partition_by_patient`].
    pub fn from_ids<I>(dataset: &Dataset, ids: I) -> Self
    where
        I: IntoIterator<Item = SampleId>,
    {
        let mut groups: BTreeMap<PatientId, Vec<SampleId>> = BTreeMap::new();
        for id in ids {
            groups.entry(dataset.sample(id).patient_id).or_default().push(id);
        }
        for group in groups.values_mut() {
            group.sort_unstable();
            group.dedup();
        }
        Self { groups }
    }
}

/// Groups the unlabeled ids of `pool` by patient.
pub fn partition_by_patient(dataset: &Dataset, pool: &PoolState) -> PatientPartition {
    PatientPartition::from_ids(dataset, pool.unlabeled().iter().copied())
}
