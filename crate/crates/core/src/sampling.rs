//! Class-imbalance handling for training portions only.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("{minority} minority rows; ADASYN with k = {k} needs at least k + 1")]
    TooFewMinority { minority: usize, k: usize },
    #[error("beta {0} outside (0, 1]")]
    Beta(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no minority rows")]
    EmptyMinority,
    #[error("majority ({majority}) smaller than minority ({minority})")]
    MajorityTooSmall { majority: usize, minority: usize },
    #[error("rows have inconsistent widths")]
    Ragged,
    #[error("empty vote")]
    EmptyVote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Real,
    Synthetic,
}

/// Aligned feature matrix, binary labels (`true` = intervened) and provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self, SamplingError> {
        if rows.len() != labels.len() {
            return Err(SamplingError::Ragged);
        }
        if let Some(w) = rows.first().map(Vec::len) {
            if rows.iter().any(|r| r.len() != w) {
                return Err(SamplingError::Ragged);
            }
        }
        let provenance = vec![Provenance::Real; rows.len()];
        Ok(Self {
            rows,
            labels,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            provenance: idx.iter().map(|&i| self.provenance[i]).collect(),
        }
    }

    /// Indices of (minority, majority) rows; positives are the minority on ties.
    pub fn class_split(&self) -> (Vec<usize>, Vec<usize>) {
        let (pos, neg): (Vec<usize>, Vec<usize>) = (0..self.len()).partition(|&i| self.labels[i]);
        if pos.len() <= neg.len() {
            (pos, neg)
        } else {
            (neg, pos)
        }
    }

    fn push(&mut self, row: Vec<f64>, label: bool, provenance: Provenance) {
        self.rows.push(row);
        self.labels.push(label);
        self.provenance.push(provenance);
    }
}

/// Per-feature z-scoring fitted on a training portion. Constant features get scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if *s <= f64::EPSILON {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SamplingStrategy {
    None,
    RandomOversample,
    Adasyn { k: usize, beta: f64 },
    EnsembleUndersample,
}

impl Default for SamplingStrategy {
    fn default() -> Self {
        SamplingStrategy::Adasyn { k: 5, beta: 1.0 }
    }
}

impl std::fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SamplingStrategy::None => f.write_str("none"),
            SamplingStrategy::RandomOversample => f.write_str("random_oversample"),
            SamplingStrategy::Adasyn { k, beta } => write!(f, "adasyn(k={k},beta={beta})"),
            SamplingStrategy::EnsembleUndersample => f.write_str("ensemble_undersample"),
        }
    }
}

impl std::str::FromStr for SamplingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(SamplingStrategy::None),
            "random" | "random_oversample" => Ok(SamplingStrategy::RandomOversample),
            "adasyn" => Ok(SamplingStrategy::default()),
            "ensemble" | "ensemble_undersample" | "undersample" => {
                Ok(SamplingStrategy::EnsembleUndersample)
            }
            other => Err(format!("unknown sampling strategy {other:?}")),
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Indices of the `k` nearest `candidates` to `query`, excluding `skip`;
/// ties broken by candidate index.
fn nearest(rows: &[Vec<f64>], query: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&c| c != query)
        .map(|&c| (squared_distance(&rows[query], &rows[c]), c))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, c)| c).collect()
}

/// ADASYN allocation: integer counts `g_i` summing to `total`, proportional
/// to each minority row's count of majority neighbours (`r_i * k`). Shares are
/// rounded by largest remainder, ties to the lower index. Integer arithmetic
/// keeps equal remainders equal.
pub fn adasyn_allocation(hits: &[usize], total: usize) -> Vec<usize> {
    let n = hits.len();
    if n == 0 {
        return Vec::new();
    }
    let sum: usize = hits.iter().sum();
    // (weight, denominator): all-zero hits spread uniformly
    let (weights, denom): (Vec<usize>, usize) = if sum > 0 {
        (hits.to_vec(), sum)
    } else {
        (vec![1; n], n)
    };
    let mut counts: Vec<usize> = weights.iter().map(|w| w * total / denom).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(weights[i] * total % denom), i));
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// One synthetic minority row with its generating pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRow {
    pub row: Vec<f64>,
    pub base: usize,
    pub neighbor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdasynOutput {
    /// Difficulty ratio per minority row, in `minority` order.
    pub ratios: Vec<f64>,
    pub allocation: Vec<usize>,
    pub synthetic: Vec<SyntheticRow>,
}

/// Adaptive synthetic oversampling of the minority rows of `rows`.
///
/// Neighbourhoods of minority rows are taken over all rows for the
/// difficulty ratios and over minority rows only for interpolation.
pub fn adasyn(
    rows: &[Vec<f64>],
    minority: &[usize],
    majority: &[usize],
    k: usize,
    beta: f64,
    seed: u64,
) -> Result<AdasynOutput, SamplingError> {
    if k == 0 {
        return Err(SamplingError::ZeroK);
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(SamplingError::Beta(beta));
    }
    if minority.len() <= k {
        return Err(SamplingError::TooFewMinority {
            minority: minority.len(),
            k,
        });
    }
    if minority.len() >= majority.len() {
        return Ok(AdasynOutput {
            ratios: vec![0.0; minority.len()],
            allocation: vec![0; minority.len()],
            synthetic: Vec::new(),
        });
    }
    let total = ((majority.len() - minority.len()) as f64 * beta).ceil() as usize;
    let all: Vec<usize> = minority.iter().chain(majority).copied().collect();
    let is_majority = |i: usize| majority.contains(&i);
    let hits: Vec<usize> = minority
        .iter()
        .map(|&i| {
            nearest(rows, i, &all, k)
                .into_iter()
                .filter(|&j| is_majority(j))
                .count()
        })
        .collect();
    let ratios = hits.iter().map(|&h| h as f64 / k as f64).collect();
    let allocation = adasyn_allocation(&hits, total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut synthetic = Vec::with_capacity(total);
    for (pos, &i) in minority.iter().enumerate() {
        if allocation[pos] == 0 {
            continue;
        }
        let neighbors = nearest(rows, i, minority, k);
        for _ in 0..allocation[pos] {
            let z = *neighbors
                .choose(&mut rng)
                .expect("k >= 1 minority neighbours");
            let lambda: f64 = rng.gen();
            let row = rows[i]
                .iter()
                .zip(&rows[z])
                .map(|(a, b)| a + lambda * (b - a))
                .collect();
            synthetic.push(SyntheticRow {
                row,
                base: i,
                neighbor: z,
            });
        }
    }
    Ok(AdasynOutput {
        ratios,
        allocation,
        synthetic,
    })
}

/// Duplicate uniformly drawn minority rows until the classes balance.
pub fn random_oversample(
    minority: &[usize],
    majority: &[usize],
    seed: u64,
) -> Result<Vec<usize>, SamplingError> {
    if minority.is_empty() {
        return Err(SamplingError::EmptyMinority);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let need = majority.len().saturating_sub(minority.len());
    Ok((0..need)
        .map(|_| *minority.choose(&mut rng).expect("nonempty"))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndersamplePlan {
    /// Disjoint majority partitions, each the size of the minority class.
    pub partitions: Vec<Vec<usize>>,
    /// Majority rows left over after the last full partition.
    pub discarded: Vec<usize>,
}

/// Split the (seed-shuffled) majority into ⌊|maj|/|min|⌋ partitions of |min| rows.
pub fn ensemble_undersample(
    majority: &[usize],
    minority: &[usize],
    seed: u64,
) -> Result<UndersamplePlan, SamplingError> {
    if minority.is_empty() {
        return Err(SamplingError::EmptyMinority);
    }
    if majority.len() < minority.len() {
        return Err(SamplingError::MajorityTooSmall {
            majority: majority.len(),
            minority: minority.len(),
        });
    }
    let mut shuffled = majority.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let size = minority.len();
    let n = shuffled.len() / size;
    let discarded = shuffled.split_off(n * size);
    if !discarded.is_empty() {
        log::info!(
            "ensemble undersampling discards {} majority rows",
            discarded.len()
        );
    }
    Ok(UndersamplePlan {
        partitions: shuffled.chunks(size).map(<[usize]>::to_vec).collect(),
        discarded,
    })
}

/// Majority label; ties go to the positive class.
pub fn majority_vote(labels: &[bool]) -> Result<bool, SamplingError> {
    if labels.is_empty() {
        return Err(SamplingError::EmptyVote);
    }
    let yes = labels.iter().filter(|l| **l).count();
    Ok(2 * yes >= labels.len())
}

/// Training sets after applying `strategy` to `data`: one set, or one per
/// ensemble partition. Synthetic rows are marked in `provenance`.
pub fn resample(
    data: &Dataset,
    strategy: SamplingStrategy,
    seed: u64,
) -> Result<Vec<Dataset>, SamplingError> {
    let (minority, majority) = data.class_split();
    let minority_label =
        !data.labels.is_empty() && minority.first().map_or(true, |&i| data.labels[i]);
    match strategy {
        SamplingStrategy::None => Ok(vec![data.clone()]),
        SamplingStrategy::RandomOversample => {
            let mut out = data.clone();
            for i in random_oversample(&minority, &majority, seed)? {
                out.push(data.rows[i].clone(), data.labels[i], Provenance::Synthetic);
            }
            Ok(vec![out])
        }
        SamplingStrategy::Adasyn { k, beta } => {
            let result = adasyn(&data.rows, &minority, &majority, k, beta, seed)?;
            let mut out = data.clone();
            for s in result.synthetic {
                out.push(s.row, minority_label, Provenance::Synthetic);
            }
            Ok(vec![out])
        }
        SamplingStrategy::EnsembleUndersample => {
            let plan = ensemble_undersample(&majority, &minority, seed)?;
            Ok(plan
                .partitions
                .iter()
                .map(|part| {
                    let idx: Vec<usize> = part.iter().chain(&minority).copied().collect();
                    data.subset(&idx)
                })
                .collect())
        }
    }
}
