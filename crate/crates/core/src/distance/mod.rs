//! Evolution measures over state vectors.
//!
//! The relative distance between two states is computed from their
//! neighbourhoods: each state's month cohort is ranked by euclidean distance
//! to it, and the two rankings (compared by subreddit name) are scored with
//! rank-biased overlap. Consecutive-month RBO distances form a subreddit's
//! evolution series.

mod ks;
mod rbo;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::StateId;
use crate::time::YearMonth;
use crate::vectors::{SparseVector, VectorKind, VectorSet};

pub use ks::{kolmogorov_survival, ks_two_sample, KsResult};
pub use rbo::{rbo, rbo_distance, DEFAULT_PERSISTENCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error("cosine similarity of a zero vector")]
    ZeroVector,
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("persistence {0} outside (0, 1)")]
    InvalidPersistence(f64),
    #[error("empty ranked list")]
    EmptyList,
    #[error("ranked list contains duplicates")]
    DuplicateInList,
    #[error("no vector for state {0}")]
    MissingVector(StateId),
    #[error("{subreddit} has {months} active month(s); at least 2 are needed")]
    TooFewMonths { subreddit: String, months: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("sample contains NaN")]
    NanSample,
}

/// `Σ a_i b_i / (‖a‖ ‖b‖)`.
pub fn cosine_similarity(a: &SparseVector, b: &SparseVector) -> Result<f64, DistanceError> {
    if a.dim() != b.dim() {
        return Err(DistanceError::LengthMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(DistanceError::ZeroVector);
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Cohort of an anchor's month, ascending by euclidean distance to the anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborRanking {
    pub anchor: StateId,
    pub cohort_month: YearMonth,
    pub ordered: Vec<StateId>,
}

impl NeighborRanking {
    pub fn subreddits(&self) -> Vec<&str> {
        self.ordered.iter().map(|s| s.subreddit.as_str()).collect()
    }
}

/// Rank the anchor's month cohort by distance; ties fall back to `(subreddit, month)`.
pub fn neighbor_ranking(
    anchor: &StateId,
    set: &VectorSet,
) -> Result<NeighborRanking, DistanceError> {
    let v = set
        .get(anchor)
        .ok_or_else(|| DistanceError::MissingVector(anchor.clone()))?;
    let mut scored: Vec<(f64, &StateId)> = set
        .cohort(anchor.month)
        .into_iter()
        .filter(|(id, _)| *id != anchor)
        .map(|(id, w)| (v.squared_euclidean(w), id))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    Ok(NeighborRanking {
        anchor: anchor.clone(),
        cohort_month: anchor.month,
        ordered: scored.into_iter().map(|(_, id)| id.clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPoint {
    pub month_from: YearMonth,
    pub month_to: YearMonth,
    pub rbo_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSeries {
    pub subreddit: String,
    pub kind: VectorKind,
    pub persistence: f64,
    pub points: Vec<EvolutionPoint>,
}

impl EvolutionSeries {
    pub fn mean_distance(&self) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().map(|p| p.rbo_distance).sum::<f64>() / self.points.len() as f64)
    }
}

/// RBO distance between neighbour rankings of calendar-consecutive active months.
///
/// A pair whose anchor has no neighbours in one of the months (single-state
/// cohort) is skipped.
pub fn evolution_series(
    subreddit: &str,
    set: &VectorSet,
    p: f64,
) -> Result<EvolutionSeries, DistanceError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DistanceError::InvalidPersistence(p));
    }
    let months: Vec<YearMonth> = set
        .vectors
        .keys()
        .filter(|s| s.subreddit == subreddit)
        .map(|s| s.month)
        .collect();
    if months.len() < 2 {
        return Err(DistanceError::TooFewMonths {
            subreddit: subreddit.to_string(),
            months: months.len(),
        });
    }
    let mut rankings: BTreeMap<YearMonth, NeighborRanking> = BTreeMap::new();
    for &m in &months {
        rankings.insert(m, neighbor_ranking(&StateId::new(subreddit, m), set)?);
    }
    let mut points = Vec::new();
    for pair in months.windows(2) {
        let (m1, m2) = (pair[0], pair[1]);
        if m1.next() != m2 {
            continue;
        }
        let (x1, x2) = (rankings[&m1].subreddits(), rankings[&m2].subreddits());
        if x1.is_empty() || x2.is_empty() {
            continue;
        }
        points.push(EvolutionPoint {
            month_from: m1,
            month_to: m2,
            rbo_distance: rbo_distance(&x1, &x2, p)?,
        });
    }
    Ok(EvolutionSeries {
        subreddit: subreddit.to_string(),
        kind: set.kind,
        persistence: p,
        points,
    })
}

/// Two-sample KS test of the pooled evolution distances of the series whose
/// subreddit is in `group` against those of all other series.
pub fn group_ks(
    series: &[EvolutionSeries],
    group: &BTreeSet<String>,
) -> Result<KsResult, DistanceError> {
    let (inside, outside): (Vec<&EvolutionSeries>, Vec<&EvolutionSeries>) =
        series.iter().partition(|s| group.contains(&s.subreddit));
    let pool = |v: Vec<&EvolutionSeries>| -> Vec<f64> {
        v.into_iter()
            .flat_map(|s| s.points.iter().map(|p| p.rbo_distance))
            .collect()
    };
    ks_two_sample(&pool(inside), &pool(outside))
}
