//! Pool-based active learning with a patient-aware selection wrapper.
//!
//! The crate is organised bottom-up:
//!
//! * [`pool`]: datasets, the labeled/unlabeled split and the patient partition.
//! * [`model`]: a small softmax classifier (optionally with one ReLU hidden
//!   layer) trained with Adam until a training-accuracy threshold is met.
//! * [`strategies`]: random, least-confidence, margin, entropy and BADGE
//!   batch selection.
//! * [`patient_aware`]: wraps any strategy so that a round draws one sample
//!   from each of `k` distinct patients.
//! * [`datagen`]: synthetic patient cohorts and the CSV dataset format.
//! * [`harness`]: multi-seed experiment runner, learning-curve output and
//!   summaries.

pub mod datagen;
pub mod error;
pub mod harness;
pub mod model;
pub mod patient_aware;
pub mod pool;
pub mod rng;
pub mod strategies;

pub use error::{Error, Result};
pub use model::{Model, ModelConfig, TrainReport};
pub use patient_aware::{PatientAwareConfig, PatientPick};
pub use pool::{Dataset, PatientPartition, PoolState, Sample};
pub use strategies::QueryStrategy;
