//! Patient-aware batch selection.
//!
//! Wraps a base [`QueryStrategy`] so that one acquisition round of `k`
//! samples takes a single sample from each of `k` distinct patients. The
//! unlabeled pool is first partitioned by patient; the base strategy then
//! decides which sample represents each patient and, for the informed
//! patient pick, which patients are chosen.
//!
//! When fewer than `k` patients still have unlabeled samples and refill is
//! allowed, the round is completed in further passes over what is left, so
//! a patient may contribute a second sample, then a third, and so on.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::pool::{partition_by_patient, Dataset, PatientId, PatientPartition, PoolState, SampleId};
use crate::strategies::{self, rank_order, DSquaredSampler, QueryStrategy, ScoredSample};

/// How the `k` patients of a round are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PatientPick {
    /// The patients whose best sample scores highest under the base strategy.
    #[default]
    Informed,
    /// Patients drawn uniformly; the base strategy picks within each.
    Random,
}

impl PatientPick {
    pub fn name(self) -> &'static str {
        match self {
            PatientPick::Informed => "informed",
            PatientPick::Random => "random",
        }
    }
}

impl fmt::Display for PatientPick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatientPick {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "informed" => Ok(PatientPick::Informed),
            "random" => Ok(PatientPick::Random),
            other => Err(Error::Config(format!(
                "unknown patient_pick `{other}` (expected informed | random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatientAwareConfig {
    pub base_strategy: QueryStrategy,
    pub k: usize,
    pub allow_refill: bool,
    pub patient_pick: PatientPick,
}

impl PatientAwareConfig {
    pub fn new(base_strategy: QueryStrategy, k: usize) -> Self {
        Self {
            base_strategy,
            k,
            allow_refill: true,
            patient_pick: PatientPick::Informed,
        }
    }
}

/// Selects `cfg.k` unlabeled ids, one per patient whenever at least `k`
/// patients remain.
pub fn patient_aware_select<R: Rng + ?Sized>(
    cfg: &PatientAwareConfig,
    model: &Model,
    pool: &PoolState,
    dataset: &Dataset,
    rng: &mut R,
) -> Result<Vec<SampleId>> {
    if cfg.k == 0 {
        return Err(Error::Config("patient-aware k must be at least 1".into()));
    }
    let available = pool.unlabeled().len();
    if available < cfg.k {
        return Err(Error::BudgetExhausted {
            requested: cfg.k,
            available,
        });
    }
    let partition = partition_by_patient(dataset, pool);
    if partition.num_patients() < cfg.k && !cfg.allow_refill {
        return Err(Error::InsufficientPatients {
            required: cfg.k,
            available: partition.num_patients(),
        });
    }

    match cfg.base_strategy {
        QueryStrategy::Random => Ok(run_passes(dataset, &partition, cfg.k, |remaining, n| {
            random_pass(remaining, n, rng)
        })),
        QueryStrategy::Badge => badge_select(cfg, model, dataset, &partition, rng),
        base => {
            let scores: BTreeMap<SampleId, f64> =
                strategies::score_samples(base, model, dataset, pool.unlabeled().iter().copied())?
                    .into_iter()
                    .map(|s| (s.sample_id, s.score))
                    .collect();
            Ok(run_passes(dataset, &partition, cfg.k, |remaining, n| {
                match cfg.patient_pick {
                    PatientPick::Informed => pick_champions(remaining, &scores, n),
                    PatientPick::Random => random_patients_champions(remaining, &scores, n, rng),
                }
            }))
        }
    }
}

/// Repeats `pass` over the not-yet-selected remainder until `k` ids are
/// chosen. Each pass is asked for at most one sample per remaining patient.
fn run_passes<F>(dataset: &Dataset, partition: &PatientPartition, k: usize, mut pass: F) -> Vec<SampleId>
where
    F: FnMut(&PatientPartition, usize) -> Vec<SampleId>,
{
    let mut selected: Vec<SampleId> = Vec::with_capacity(k);
    let mut remaining = partition.clone();
    while selected.len() < k {
        let n = (k - selected.len()).min(remaining.num_patients());
        debug_assert!(n > 0, "caller guarantees enough unlabeled samples");
        let picked = pass(&remaining, n);
        debug_assert_eq!(picked.len(), n);
        selected.extend_from_slice(&picked);
        remaining = PatientPartition::from_ids(
            dataset,
            remaining
                .groups()
                .values()
                .flatten()
                .copied()
                .filter(|id| !picked.contains(id)),
        );
    }
    selected
}

/// Each patient's best-scoring sample (lowest id on ties), then the `n`
/// best of those champions.
pub fn pick_champions(
    partition: &PatientPartition,
    scores: &BTreeMap<SampleId, f64>,
    n: usize,
) -> Vec<SampleId> {
    let champions: Vec<ScoredSample> = partition
        .groups()
        .values()
        .map(|ids| champion(ids, scores))
        .collect();
    strategies::top_k(champions, n)
}

fn champion(ids: &[SampleId], scores: &BTreeMap<SampleId, f64>) -> ScoredSample {
    ids.iter()
        .map(|&id| ScoredSample {
            sample_id: id,
            score: scores[&id],
        })
        .min_by(rank_order)
        .expect("partition groups are non-empty")
}

fn random_patients_champions<R: Rng + ?Sized>(
    partition: &PatientPartition,
    scores: &BTreeMap<SampleId, f64>,
    n: usize,
    rng: &mut R,
) -> Vec<SampleId> {
    let groups: Vec<&Vec<SampleId>> = partition.groups().values().collect();
    rand::seq::index::sample(rng, groups.len(), n)
        .into_iter()
        .map(|i| champion(groups[i], scores).sample_id)
        .collect()
}

/// `n` uniformly drawn patients, then one uniform sample from each.
///
/// Patients are indexed in order of their lowest remaining sample id so that
/// a pool with one sample per patient draws exactly like plain random
/// selection.
fn random_pass<R: Rng + ?Sized>(partition: &PatientPartition, n: usize, rng: &mut R) -> Vec<SampleId> {
    let mut groups: Vec<&Vec<SampleId>> = partition.groups().values().collect();
    groups.sort_by_key(|ids| ids[0]);
    rand::seq::index::sample(rng, groups.len(), n)
        .into_iter()
        .map(|i| {
            let ids = groups[i];
            if ids.len() == 1 {
                ids[0]
            } else {
                ids[rng.random_range(0..ids.len())]
            }
        })
        .collect()
}

/// k-means++ over the gradient embeddings of the whole unlabeled pool, where
/// drawing a sample masks the rest of that patient's samples for the
/// remainder of the pass.
fn badge_select<R: Rng + ?Sized>(
    cfg: &PatientAwareConfig,
    model: &Model,
    dataset: &Dataset,
    partition: &PatientPartition,
    rng: &mut R,
) -> Result<Vec<SampleId>> {
    let mut ids: Vec<SampleId> = partition.groups().values().flatten().copied().collect();
    ids.sort_unstable();
    let embeddings = strategies::grad_embeddings(model, dataset, ids.iter().copied())?;
    let patient_of: Vec<PatientId> = ids.iter().map(|&id| dataset.sample(id).patient_id).collect();
    let mut members: BTreeMap<PatientId, Vec<usize>> = BTreeMap::new();
    for (index, &patient) in patient_of.iter().enumerate() {
        members.entry(patient).or_default().push(index);
    }

    let mut sampler = DSquaredSampler::new(&embeddings);
    let mut selected = Vec::with_capacity(cfg.k);
    while selected.len() < cfg.k {
        sampler.clear_mask();
        let open: Vec<PatientId> = members
            .iter()
            .filter(|(_, idx)| idx.iter().any(|&i| !sampler.is_chosen(i)))
            .map(|(&p, _)| p)
            .collect();
        let n = (cfg.k - selected.len()).min(open.len());
        if cfg.patient_pick == PatientPick::Random {
            let keep: Vec<PatientId> = rand::seq::index::sample(rng, open.len(), n)
                .into_iter()
                .map(|i| open[i])
                .collect();
            for (patient, idx) in &members {
                if !keep.contains(patient) {
                    idx.iter().for_each(|&i| sampler.set_masked(i, true));
                }
            }
        }
        for _ in 0..n {
            let index = sampler
                .draw(rng)
                .expect("one open patient per remaining draw");
            sampler.add_center(index);
            selected.push(embeddings[index].0);
            for &i in &members[&patient_of[index]] {
                sampler.set_masked(i, true);
            }
        }
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::pool::Sample;
    use crate::rng::seeded;
    use crate::strategies::select_batch;
    use std::collections::BTreeSet;

    fn dataset(patients: &[PatientId], seed: u64) -> Dataset {
        let mut rng = seeded(seed);
        let samples = patients
            .iter()
            .enumerate()
            .map(|(id, &patient_id)| Sample {
                id,
                patient_id,
                features: (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(),
                label: id % 3,
            })
            .collect();
        Dataset::new(samples, 3, 3).unwrap()
    }

    fn model(seed: u64) -> Model {
        let cfg = ModelConfig { hidden_units: 5, ..Default::default() };
        Model::init(&cfg, 3, 3, &mut seeded(seed)).unwrap()
    }

    fn patients_of(ds: &Dataset, ids: &[SampleId]) -> BTreeSet<PatientId> {
        ids.iter().map(|&i| ds.sample(i).patient_id).collect()
    }

    #[test]
    fn champion_example() {
        // A = {s0, s1}, B = {s2}, C = {s3}
        let ds = dataset(&[0, 0, 1, 2], 0);
        let partition = partition_by_patient(&ds, &PoolState::new(&ds));
        let scores: BTreeMap<SampleId, f64> = [(0, 0.9), (1, 1.0), (2, 0.2), (3, 0.5)].into();
        let mut got = pick_champions(&partition, &scores, 2);
        got.sort_unstable();
        assert_eq!(got, vec![1, 3]);
    }

    #[test]
    fn champion_rule_by_enumeration() {
        // Brute force: for each patient take its best sample; rank all
        // champions; compare against the function on random instances.
        let mut rng = seeded(12);
        for _ in 0..200 {
            let n = rng.random_range(3..30);
            let patients: Vec<PatientId> = (0..n).map(|_| rng.random_range(0..8)).collect();
            let ds = dataset(&patients, 1);
            let partition = partition_by_patient(&ds, &PoolState::new(&ds));
            // coarse scores so ties happen
            let scores: BTreeMap<SampleId, f64> =
                (0..n).map(|i| (i, rng.random_range(0..4) as f64)).collect();
            let mut champs: Vec<(f64, SampleId)> = Vec::new();
            for p in patients.iter().collect::<BTreeSet<_>>() {
                let best = (0..n)
                    .filter(|&i| patients[i] == *p)
                    .max_by(|&a, &b| scores[&a].total_cmp(&scores[&b]).then(b.cmp(&a)))
                    .unwrap();
                champs.push((scores[&best], best));
            }
            champs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let k = rng.random_range(1..=champs.len());
            let expected: Vec<SampleId> = champs.iter().take(k).map(|c| c.1).collect();
            assert_eq!(pick_champions(&partition, &scores, k), expected);
        }
    }

    #[test]
    fn one_sample_per_patient_reduces_to_base() {
        let patients: Vec<PatientId> = (0..40).map(|i| 1000 - 7 * i).collect();
        let ds = dataset(&patients, 4);
        let m = model(5);
        let pool = PoolState::new(&ds).label_samples(&[3, 17, 22]).unwrap();
        for base in QueryStrategy::ALL {
            for seed in 0..5 {
                let cfg = PatientAwareConfig::new(base, 9);
                let wrapped = patient_aware_select(&cfg, &m, &pool, &ds, &mut seeded(seed)).unwrap();
                let plain = select_batch(base, &m, &pool, &ds, 9, &mut seeded(seed)).unwrap();
                let a: BTreeSet<_> = wrapped.into_iter().collect();
                let b: BTreeSet<_> = plain.into_iter().collect();
                assert_eq!(a, b, "{base} seed {seed}");
            }
        }
    }

    #[test]
    fn batches_span_distinct_patients() {
        let patients: Vec<PatientId> = (0..120).map(|i| (i * i % 17) as PatientId).collect();
        let ds = dataset(&patients, 6);
        let m = model(7);
        let pool = PoolState::new(&ds).seed_initial(20, &mut seeded(1)).unwrap();
        let n_patients = partition_by_patient(&ds, &pool).num_patients();
        for base in QueryStrategy::ALL {
            for pick in [PatientPick::Informed, PatientPick::Random] {
                let cfg = PatientAwareConfig { patient_pick: pick, ..PatientAwareConfig::new(base, 8) };
                assert!(n_patients >= 8);
                let ids = patient_aware_select(&cfg, &m, &pool, &ds, &mut seeded(3)).unwrap();
                assert_eq!(ids.len(), 8);
                assert_eq!(patients_of(&ds, &ids).len(), 8, "{base} {pick}");
                assert!(ids.iter().all(|id| pool.unlabeled().contains(id)));
                let again = patient_aware_select(&cfg, &m, &pool, &ds, &mut seeded(3)).unwrap();
                assert_eq!(ids, again);
            }
        }
    }

    #[test]
    fn champions_dominate_their_patient() {
        let patients: Vec<PatientId> = (0..90).map(|i| (i % 11) as PatientId).collect();
        let ds = dataset(&patients, 8);
        let m = model(9);
        let pool = PoolState::new(&ds);
        for base in [QueryStrategy::LeastConfidence, QueryStrategy::Margin, QueryStrategy::Entropy] {
            for pick in [PatientPick::Informed, PatientPick::Random] {
                let cfg = PatientAwareConfig { patient_pick: pick, ..PatientAwareConfig::new(base, 6) };
                let ids = patient_aware_select(&cfg, &m, &pool, &ds, &mut seeded(0)).unwrap();
                for id in ids {
                    let mine = base.score(&m.predict_proba(&ds.sample(id).features).unwrap()).unwrap();
                    for other in (0..90).filter(|&o| patients[o] == patients[id]) {
                        let s = base.score(&m.predict_proba(&ds.sample(other).features).unwrap()).unwrap();
                        assert!(s <= mine);
                    }
                }
            }
        }
    }

    #[test]
    fn refill_when_patients_run_short() {
        let ds = dataset(&[0, 0, 0, 1, 1], 2);
        let m = model(1);
        let pool = PoolState::new(&ds);
        for base in QueryStrategy::ALL {
            let cfg = PatientAwareConfig::new(base, 3);
            let ids = patient_aware_select(&cfg, &m, &pool, &ds, &mut seeded(4)).unwrap();
            assert_eq!(ids.len(), 3);
            assert_eq!(ids.iter().collect::<BTreeSet<_>>().len(), 3);
            assert_eq!(patients_of(&ds, &ids).len(), 2);
            // the first pass covers both patients before any repeats
            assert_eq!(patients_of(&ds, &ids[..2]).len(), 2, "{base}");

            let all = patient_aware_select(&PatientAwareConfig::new(base, 5), &m, &pool, &ds, &mut seeded(4)).unwrap();
            assert_eq!(all.iter().collect::<BTreeSet<_>>().len(), 5);
        }
    }

    #[test]
    fn refill_disabled_errors() {
        let ds = dataset(&[0, 0, 0, 1, 1], 2);
        let cfg = PatientAwareConfig { allow_refill: false, ..PatientAwareConfig::new(QueryStrategy::Entropy, 3) };
        let err = patient_aware_select(&cfg, &model(0), &PoolState::new(&ds), &ds, &mut seeded(0)).unwrap_err();
        assert!(matches!(err, Error::InsufficientPatients { required: 3, available: 2 }));
    }

    #[test]
    fn over_budget_errors() {
        let ds = dataset(&[0, 1, 2], 2);
        let cfg = PatientAwareConfig::new(QueryStrategy::Random, 4);
        let err = patient_aware_select(&cfg, &model(0), &PoolState::new(&ds), &ds, &mut seeded(0)).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { requested: 4, available: 3 }));
    }

    #[test]
    fn patient_pick_parses() {
        assert_eq!("informed".parse::<PatientPick>().unwrap(), PatientPick::Informed);
        assert_eq!("random".parse::<PatientPick>().unwrap(), PatientPick::Random);
        assert!("best".parse::<PatientPick>().is_err());
    }
}
