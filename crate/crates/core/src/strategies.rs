//! Query strategies.
//!
//! Every uncertainty score is oriented so that a larger value means a more
//! informative sample. Ties are always broken by the lower sample id.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::pool::{Dataset, PoolState, SampleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryStrategy {
    Random,
    LeastConfidence,
    Margin,
    Entropy,
    Badge,
}

impl QueryStrategy {
    pub const ALL: [QueryStrategy; 5] = [
        QueryStrategy::Random,
        QueryStrategy::LeastConfidence,
        QueryStrategy::Margin,
        QueryStrategy::Entropy,
        QueryStrategy::Badge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryStrategy::Random => "random",
            QueryStrategy::LeastConfidence => "least_confidence",
            QueryStrategy::Margin => "margin",
            QueryStrategy::Entropy => "entropy",
            QueryStrategy::Badge => "badge",
        }
    }

    /// The per-sample score for the uncertainty strategies; `None` for
    /// strategies that do not rank samples independently.
    pub fn score(self, probs: &[f64]) -> Option<f64> {
        match self {
            QueryStrategy::LeastConfidence => Some(score_least_confidence(probs)),
            QueryStrategy::Margin => Some(score_margin(probs)),
            QueryStrategy::Entropy => Some(score_entropy(probs)),
            QueryStrategy::Random | QueryStrategy::Badge => None,
        }
    }

    pub fn is_uncertainty(self) -> bool {
        matches!(
            self,
            QueryStrategy::LeastConfidence | QueryStrategy::Margin | QueryStrategy::Entropy
        )
    }
}

impl fmt::Display for QueryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QueryStrategy::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown strategy `{s}` (expected random | least_confidence | margin | entropy | badge)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub sample_id: SampleId,
    pub score: f64,
}

/// `1 - max_c p_c`.
pub fn score_least_confidence(probs: &[f64]) -> f64 {
    1.0 - probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Negated gap between the two largest probabilities.
pub fn score_margin(probs: &[f64]) -> f64 {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &p in probs {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    -(first - second)
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn score_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Descending score, then ascending id.
pub fn rank_order(a: &ScoredSample, b: &ScoredSample) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.sample_id.cmp(&b.sample_id))
}

/// Scores `ids` with an uncertainty strategy.
pub fn score_samples(
    strategy: QueryStrategy,
    model: &Model,
    dataset: &Dataset,
    ids: impl IntoIterator<Item = SampleId>,
) -> Result<Vec<ScoredSample>> {
    if !strategy.is_uncertainty() {
        return Err(Error::InvalidInput(format!(
            "strategy `{strategy}` does not score samples individually"
        )));
    }
    ids.into_iter()
        .map(|id| {
            let probs = model.predict_proba(&dataset.sample(id).features)?;
            let score = strategy.score(&probs).expect("uncertainty strategy");
            Ok(ScoredSample { sample_id: id, score })
        })
        .collect()
}

/// The `k` highest-scoring ids.
pub fn top_k(mut scored: Vec<ScoredSample>, k: usize) -> Vec<SampleId> {
    scored.sort_by(rank_order);
    scored.into_iter().take(k).map(|s| s.sample_id).collect()
}

/// Gradient embeddings of `ids`, in the given order.
pub fn grad_embeddings(
    model: &Model,
    dataset: &Dataset,
    ids: impl IntoIterator<Item = SampleId>,
) -> Result<Vec<(SampleId, Vec<f64>)>> {
    ids.into_iter()
        .map(|id| Ok((id, model.grad_embedding(&dataset.sample(id).features)?)))
        .collect()
}

/// Selects `k` unlabeled ids with `strategy`.
pub fn select_batch<R: Rng + ?Sized>(
    strategy: QueryStrategy,
    model: &Model,
    pool: &PoolState,
    dataset: &Dataset,
    k: usize,
    rng: &mut R,
) -> Result<Vec<SampleId>> {
    let unlabeled = pool.unlabeled();
    if k > unlabeled.len() {
        return Err(Error::BudgetExhausted {
            requested: k,
            available: unlabeled.len(),
        });
    }
    match strategy {
        QueryStrategy::Random => {
            let ids: Vec<SampleId> = unlabeled.iter().copied().collect();
            Ok(rand::seq::index::sample(rng, ids.len(), k)
                .into_iter()
                .map(|i| ids[i])
                .collect())
        }
        QueryStrategy::LeastConfidence | QueryStrategy::Margin | QueryStrategy::Entropy => {
            let scored = score_samples(strategy, model, dataset, unlabeled.iter().copied())?;
            Ok(top_k(scored, k))
        }
        QueryStrategy::Badge => {
            let embeddings = grad_embeddings(model, dataset, unlabeled.iter().copied())?;
            kmeanspp_select(&embeddings, k, rng)
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Incremental k-means++ seeding over a fixed set of embeddings.
///
/// Without any center, candidates are weighted by their squared norm (their
/// squared distance to the origin). Once a center exists, candidates are
/// weighted by the squared distance to the nearest center. When every
/// candidate weight is zero the draw is uniform over candidates. Candidates
/// are the points that are neither chosen nor masked.
#[derive(Debug, Clone)]
pub struct DSquaredSampler<'a> {
    embeddings: &'a [(SampleId, Vec<f64>)],
    nearest: Vec<f64>,
    chosen: Vec<bool>,
    masked: Vec<bool>,
}

impl<'a> DSquaredSampler<'a> {
    pub fn new(embeddings: &'a [(SampleId, Vec<f64>)]) -> Self {
        let nearest = embeddings
            .iter()
            .map(|(_, e)| e.iter().map(|v| v * v).sum())
            .collect();
        Self {
            embeddings,
            nearest,
            chosen: vec![false; embeddings.len()],
            masked: vec![false; embeddings.len()],
        }
    }

    pub fn embeddings(&self) -> &'a [(SampleId, Vec<f64>)] {
        self.embeddings
    }

    /// Marks `index` as a center and updates nearest-center distances.
    pub fn add_center(&mut self, index: usize) {
        let first = !self.chosen.iter().any(|&c| c);
        self.chosen[index] = true;
        let center = &self.embeddings[index].1;
        for (d, (_, e)) in self.nearest.iter_mut().zip(self.embeddings) {
            let dist = squared_distance(e, center);
            *d = if first { dist } else { d.min(dist) };
        }
    }

    pub fn is_chosen(&self, index: usize) -> bool {
        self.chosen[index]
    }

    pub fn set_masked(&mut self, index: usize, masked: bool) {
        self.masked[index] = masked;
    }

    pub fn clear_mask(&mut self) {
        self.masked.iter_mut().for_each(|m| *m = false);
    }

    pub fn is_candidate(&self, index: usize) -> bool {
        !self.chosen[index] && !self.masked[index]
    }

    /// Current sampling weight of `index` (zero for non-candidates).
    pub fn weight(&self, index: usize) -> f64 {
        if self.is_candidate(index) {
            self.nearest[index]
        } else {
            0.0
        }
    }

    /// Draws one candidate index without marking it; `None` if no candidate
    /// remains.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let candidates: Vec<usize> = (0..self.embeddings.len())
            .filter(|&i| self.is_candidate(i))
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let weights: Vec<f64> = candidates.iter().map(|&i| self.nearest[i]).collect();
        match WeightedIndex::new(&weights) {
            Ok(dist) => Some(candidates[dist.sample(rng)]),
            // all remaining weights are zero
            Err(_) => Some(candidates[rng.random_range(0..candidates.len())]),
        }
    }
}

/// k-means++ seeding: returns `k` distinct ids in the order they were drawn.
pub fn kmeanspp_select<R: Rng + ?Sized>(
    embeddings: &[(SampleId, Vec<f64>)],
    k: usize,
    rng: &mut R,
) -> Result<Vec<SampleId>> {
    if k > embeddings.len() {
        return Err(Error::BudgetExhausted {
            requested: k,
            available: embeddings.len(),
        });
    }
    let mut sampler = DSquaredSampler::new(embeddings);
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let index = sampler.draw(rng).expect("k does not exceed the embedding count");
        sampler.add_center(index);
        picked.push(embeddings[index].0);
    }
    Ok(picked)
}
