//! Behavioural impact of joining or intervention events, measured against
//! matched control users.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CommentRecord, Corpus, AUTOMODERATOR};
use crate::features::ScorerPlugin;
use crate::time::YearMonth;
use crate::vectors::SparseVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImpactError {
    #[error("no control candidates")]
    NoCandidates,
    #[error("LSH needs at least one table and between 1 and 32 hyperplanes per table")]
    BadIndexShape,
    #[error("{0:?} never took part in the studied community")]
    NoTreatment(String),
}

/// Comments per subreddit by one user in one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipationVector {
    pub user: String,
    pub month: YearMonth,
    pub counts: SparseVector,
}

/// Dimension index of every subreddit in the corpus, in name order.
pub fn subreddit_dims(corpus: &Corpus) -> BTreeMap<String, u32> {
    let names: BTreeSet<&str> = corpus
        .comments()
        .iter()
        .map(|c| c.subreddit.as_str())
        .chain(corpus.posts().iter().map(|p| p.subreddit.as_str()))
        .collect();
    names
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), i as u32))
        .collect()
}

fn counts_user(c: &CommentRecord) -> bool {
    c.has_live_author() && c.author != AUTOMODERATOR
}

/// Participation vectors of every user commenting in `month`, by user name.
pub fn participation_vectors(
    corpus: &Corpus,
    month: YearMonth,
    dims: &BTreeMap<String, u32>,
) -> BTreeMap<String, ParticipationVector> {
    let mut counts: BTreeMap<&str, BTreeMap<u32, f64>> = BTreeMap::new();
    for c in corpus
        .comments()
        .iter()
        .filter(|c| c.month() == month && counts_user(c))
    {
        if let Some(&d) = dims.get(&c.subreddit) {
            *counts
                .entry(c.author.as_str())
                .or_default()
                .entry(d)
                .or_insert(0.0) += 1.0;
        }
    }
    counts
        .into_iter()
        .map(|(u, m)| {
            (
                u.to_string(),
                ParticipationVector {
                    user: u.to_string(),
                    month,
                    counts: SparseVector::from_entries(dims.len(), m.into_iter().collect()),
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LshConfig {
    pub tables: usize,
    pub hyperplanes: usize,
    pub seed: u64,
}

impl Default for LshConfig {
    fn default() -> Self {
        Self {
            tables: 16,
            hyperplanes: 12,
            seed: 0,
        }
    }
}

/// Random-hyperplane (sign) hashes over dense Gaussian planes.
pub struct LshIndex<'a> {
    planes: Vec<Vec<Vec<f64>>>,
    buckets: Vec<HashMap<u32, Vec<usize>>>,
    items: &'a [ParticipationVector],
}

fn signature(planes: &[Vec<f64>], v: &SparseVector) -> u32 {
    planes.iter().enumerate().fold(0u32, |acc, (b, plane)| {
        let dot: f64 = v
            .entries()
            .iter()
            .map(|&(i, x)| plane[i as usize] * x)
            .sum();
        if dot >= 0.0 {
            acc | (1 << b)
        } else {
            acc
        }
    })
}

impl<'a> LshIndex<'a> {
    pub fn build(
        items: &'a [ParticipationVector],
        dim: usize,
        config: LshConfig,
    ) -> Result<Self, ImpactError> {
        if config.tables == 0 || config.hyperplanes == 0 || config.hyperplanes > 32 {
            return Err(ImpactError::BadIndexShape);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let planes: Vec<Vec<Vec<f64>>> = (0..config.tables)
            .map(|_| {
                (0..config.hyperplanes)
                    .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
                    .collect()
            })
            .collect();
        let buckets = planes
            .iter()
            .map(|table| {
                let mut b: HashMap<u32, Vec<usize>> = HashMap::new();
                for (i, item) in items.iter().enumerate() {
                    b.entry(signature(table, &item.counts)).or_default().push(i);
                }
                b
            })
            .collect();
        Ok(Self {
            planes,
            buckets,
            items,
        })
    }

    /// Indices colliding with `v` in any table, ascending.
    pub fn collisions(&self, v: &SparseVector) -> Vec<usize> {
        let mut out: BTreeSet<usize> = BTreeSet::new();
        for (table, buckets) in self.planes.iter().zip(&self.buckets) {
            if let Some(hits) = buckets.get(&signature(table, v)) {
                out.extend(hits);
            }
        }
        out.into_iter().collect()
    }

    /// Nearest item by euclidean distance among the collisions, or among all
    /// items when nothing collides (second value `true`). Ties go to the lower user name.
    pub fn nearest(&self, v: &SparseVector) -> Option<(usize, f64, bool)> {
        let hits = self.collisions(v);
        let fallback = hits.is_empty();
        let pool: Box<dyn Iterator<Item = usize>> = if fallback {
            Box::new(0..self.items.len())
        } else {
            Box::new(hits.into_iter())
        };
        exact_nearest(self.items, pool, v).map(|(i, d)| (i, d, fallback))
    }
}

fn exact_nearest(
    items: &[ParticipationVector],
    pool: impl Iterator<Item = usize>,
    v: &SparseVector,
) -> Option<(usize, f64)> {
    pool.map(|i| (i, items[i].counts.euclidean(v)))
        .min_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then_with(|| items[a.0].user.cmp(&items[b.0].user))
        })
}

/// Exact nearest neighbour by full scan, for reference.
pub fn exact_nn(items: &[ParticipationVector], v: &SparseVector) -> Option<(usize, f64)> {
    exact_nearest(items, 0..items.len(), v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMatch {
    pub treatment: String,
    pub control: String,
    pub month: YearMonth,
    pub distance: f64,
    /// No LSH collision; the control came from a full scan.
    pub fallback: bool,
}

/// Match each treatment vector to its approximate nearest candidate. Candidates
/// whose user is in `excluded` (members of the studied community) are dropped.
pub fn lsh_match_controls(
    treatment: &[ParticipationVector],
    candidates: &[ParticipationVector],
    excluded: &BTreeSet<String>,
    config: LshConfig,
) -> Result<Vec<ControlMatch>, ImpactError> {
    let pool: Vec<ParticipationVector> = candidates
        .iter()
        .filter(|c| !excluded.contains(&c.user))
        .cloned()
        .collect();
    if pool.is_empty() {
        return Err(ImpactError::NoCandidates);
    }
    let dim = pool
        .iter()
        .chain(treatment)
        .map(|v| v.counts.dim())
        .max()
        .unwrap_or(0);
    let index = LshIndex::build(&pool, dim, config)?;
    Ok(treatment
        .par_iter()
        .map(|t| {
            let (i, distance, fallback) = index.nearest(&t.counts).expect("pool is nonempty");
            if fallback {
                log::debug!("no LSH collision for {}; exact scan", t.user);
            }
            ControlMatch {
                treatment: t.user.clone(),
                control: pool[i].user.clone(),
                month: t.month,
                distance,
                fallback,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpactMetric {
    /// Share of a user's comments scored as hateful.
    HateIncidence,
    /// Share of a user's comments made in eventually-intervened communities.
    ProblematicParticipation,
}

impl std::str::FromStr for ImpactMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hate_incidence" | "hate" => Ok(ImpactMetric::HateIncidence),
            "problematic_participation" | "participation" => {
                Ok(ImpactMetric::ProblematicParticipation)
            }
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

impl std::fmt::Display for ImpactMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ImpactMetric::HateIncidence => "hate_incidence",
            ImpactMetric::ProblematicParticipation => "problematic_participation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub offset: i64,
    /// Mean over treatment users active at this offset; `None` with none active.
    pub treatment: Option<f64>,
    pub control: Option<f64>,
    pub treatment_active: usize,
    pub control_active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    pub metric: ImpactMetric,
    pub points: Vec<SeriesPoint>,
    /// Some offsets fell outside the corpus window for some users.
    pub truncated: bool,
}

/// What the metric needs besides the corpus.
pub struct MetricContext<'a> {
    pub scorer: &'a dyn ScorerPlugin,
    pub threshold: f64,
    /// Eventually-intervened communities.
    pub intervened: &'a BTreeSet<String>,
}

/// Metric values per (user, month) for the given users.
fn user_month_values(
    corpus: &Corpus,
    users: &BTreeSet<&str>,
    metric: ImpactMetric,
    ctx: &MetricContext<'_>,
) -> HashMap<(String, YearMonth), f64> {
    let mut tallies: HashMap<(String, YearMonth), (usize, usize)> = HashMap::new();
    for c in corpus
        .comments()
        .iter()
        .filter(|c| counts_user(c) && users.contains(c.author.as_str()))
    {
        let hit = match metric {
            ImpactMetric::HateIncidence => ctx.scorer.score(&c.body) >= ctx.threshold,
            ImpactMetric::ProblematicParticipation => ctx.intervened.contains(&c.subreddit),
        };
        let t = tallies
            .entry((c.author.clone(), c.month()))
            .or_insert((0, 0));
        t.0 += hit as usize;
        t.1 += 1;
    }
    tallies
        .into_iter()
        .map(|(k, (hit, n))| (k, hit as f64 / n as f64))
        .collect()
}

/// Mean metric per offset in `-k..=k` around each user's event month, for
/// treatment and control users (each paired with its own event month).
pub fn event_series(
    corpus: &Corpus,
    treatment: &[(String, YearMonth)],
    controls: &[(String, YearMonth)],
    metric: ImpactMetric,
    k: i64,
    ctx: &MetricContext<'_>,
) -> EventSeries {
    let users: BTreeSet<&str> = treatment
        .iter()
        .chain(controls)
        .map(|(u, _)| u.as_str())
        .collect();
    let values = user_month_values(corpus, &users, metric, ctx);
    let window = corpus.window();
    let mut truncated = false;
    let mut mean_at = |group: &[(String, YearMonth)], offset: i64| {
        let mut sum = 0.0;
        let mut n = 0;
        for (u, event) in group {
            let m = event.offset(offset);
            if !window.contains(m) {
                truncated = true;
                continue;
            }
            if let Some(v) = values.get(&(u.clone(), m)) {
                sum += v;
                n += 1;
            }
        }
        ((n > 0).then(|| sum / n as f64), n)
    };
    let points = (-k..=k)
        .map(|offset| {
            let (t, tn) = mean_at(treatment, offset);
            let (c, cn) = mean_at(controls, offset);
            SeriesPoint {
                offset,
                treatment: t,
                control: c,
                treatment_active: tn,
                control_active: cn,
            }
        })
        .collect();
    if truncated {
        log::warn!("event window exceeds the corpus for some users; those offsets are skipped");
    }
    EventSeries {
        metric,
        points,
        truncated,
    }
}

/// Users joining `community`: each user's first month with a comment there.
pub fn joining_events(corpus: &Corpus, community: &str) -> Vec<(String, YearMonth)> {
    let mut first: BTreeMap<&str, YearMonth> = BTreeMap::new();
    for c in corpus
        .comments()
        .iter()
        .filter(|c| c.subreddit == community && counts_user(c))
    {
        let e = first.entry(c.author.as_str()).or_insert(c.month());
        *e = (*e).min(c.month());
    }
    first.into_iter().map(|(u, m)| (u.to_string(), m)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactStudy {
    pub community: String,
    pub matches: Vec<ControlMatch>,
    pub series: EventSeries,
}

/// Joiners of `community` against LSH-matched users who never took part in it,
/// matched on their participation in the joining month.
pub fn joining_impact(
    corpus: &Corpus,
    community: &str,
    metric: ImpactMetric,
    k: i64,
    lsh: LshConfig,
    ctx: &MetricContext<'_>,
) -> Result<ImpactStudy, ImpactError> {
    let events = joining_events(corpus, community);
    if events.is_empty() {
        return Err(ImpactError::NoTreatment(community.to_string()));
    }
    let members: BTreeSet<String> = events.iter().map(|(u, _)| u.clone()).collect();
    let dims = subreddit_dims(corpus);
    let mut by_month: BTreeMap<YearMonth, Vec<String>> = BTreeMap::new();
    for (u, m) in &events {
        by_month.entry(*m).or_default().push(u.clone());
    }
    let mut matches = Vec::new();
    for (month, users) in by_month {
        let vectors = participation_vectors(corpus, month, &dims);
        let treatment: Vec<ParticipationVector> = users
            .iter()
            .filter_map(|u| vectors.get(u).cloned())
            .collect();
        let candidates: Vec<ParticipationVector> = vectors.into_values().collect();
        match lsh_match_controls(&treatment, &candidates, &members, lsh) {
            Ok(mut m) => matches.append(&mut m),
            Err(ImpactError::NoCandidates) => log::warn!("{month}: no control candidates"),
            Err(e) => return Err(e),
        }
    }
    let treatment: Vec<(String, YearMonth)> = matches
        .iter()
        .map(|m| (m.treatment.clone(), m.month))
        .collect();
    let controls: Vec<(String, YearMonth)> = matches
        .iter()
        .map(|m| (m.control.clone(), m.month))
        .collect();
    let series = event_series(corpus, &treatment, &controls, metric, k, ctx);
    Ok(ImpactStudy {
        community: community.to_string(),
        matches,
        series,
    })
}
