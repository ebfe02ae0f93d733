//! Stratified 80/20 split with 5-fold cross-validation over quarter-prefix windows.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, train, EvalReport, Hyperparameters, ModelArtifact, ModelError, ModelKind};
use crate::features::{FeatureRow, FeatureSchema};
use crate::sampling::{Dataset, SamplingStrategy};

pub const FOLDS: usize = 5;
pub const HOLDOUT_FRACTION: f64 = 0.2;

/// Which leading quarters contribute features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Window {
    #[serde(rename = "Q1")]
    Q1,
    #[serde(rename = "Q1+Q2")]
    Q1Q2,
    #[serde(rename = "Q1+Q2+Q3")]
    Q1Q2Q3,
    #[serde(rename = "Total")]
    Total,
}

impl Window {
    pub const ALL: [Window; 4] = [Window::Q1, Window::Q1Q2, Window::Q1Q2Q3, Window::Total];

    pub fn quarters(self) -> u8 {
        match self {
            Window::Q1 => 1,
            Window::Q1Q2 => 2,
            Window::Q1Q2Q3 => 3,
            Window::Total => 4,
        }
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Window::Q1 => "Q1",
            Window::Q1Q2 => "Q1+Q2",
            Window::Q1Q2Q3 => "Q1+Q2+Q3",
            Window::Total => "Total",
        })
    }
}

impl std::str::FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(Window::Q1),
            "q1+q2" | "q2" => Ok(Window::Q1Q2),
            "q1+q2+q3" | "q3" => Ok(Window::Q1Q2Q3),
            "total" | "q4" => Ok(Window::Total),
            other => Err(format!("unknown window {other:?}")),
        }
    }
}

/// One row per subreddit with `q{i}_`-prefixed features of the window's quarters.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowData {
    pub schema: FeatureSchema,
    pub subreddits: Vec<String>,
    pub data: Dataset,
}

pub fn window_dataset(rows: &[FeatureRow], window: Window) -> Result<WindowData, ModelError> {
    let base = FeatureSchema::of_rows(rows)?;
    let k = window.quarters();
    let mut by_sub: BTreeMap<&str, BTreeMap<u8, &FeatureRow>> = BTreeMap::new();
    for r in rows {
        if let Some(q) = r.quarter {
            by_sub.entry(r.subreddit.as_str()).or_default().insert(q, r);
        }
    }
    let names: Vec<String> = (1..=k)
        .flat_map(|q| base.names.iter().map(move |n| format!("q{q}_{n}")))
        .collect();
    let mut subreddits = Vec::new();
    let mut matrix = Vec::new();
    let mut labels = Vec::new();
    for (sub, quarters) in by_sub {
        if !(1..=k).all(|q| quarters.contains_key(&q)) {
            log::warn!("{sub} lacks quarters for window {window}; skipped");
            continue;
        }
        let mut v = Vec::with_capacity(names.len());
        for q in 1..=k {
            v.extend(quarters[&q].vector(&base)?);
        }
        subreddits.push(sub.to_string());
        labels.push(quarters[&1].label.is_positive());
        matrix.push(v);
    }
    Ok(WindowData {
        schema: FeatureSchema::new(names),
        subreddits,
        data: Dataset::new(matrix, labels)?,
    })
}

fn class_indices(labels: &[bool], seed: u64) -> [Vec<usize>; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    [pos, neg]
}

/// Per-class random split; `round(fraction · n_class)` rows of each class go
/// to the holdout. Every class needs one holdout row and `FOLDS` training rows.
pub fn stratified_split(
    labels: &[bool],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), ModelError> {
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for (class, mut idx) in ["positive", "negative"]
        .into_iter()
        .zip(class_indices(labels, seed))
    {
        let n_hold = (fraction * idx.len() as f64).round() as usize;
        let needed = FOLDS + 1;
        if n_hold == 0 || idx.len() - n_hold < FOLDS {
            return Err(ModelError::TooFewForStratification {
                class,
                count: idx.len(),
                needed,
            });
        }
        holdout.extend(idx.drain(..n_hold));
        train.extend(idx);
    }
    train.sort_unstable();
    holdout.sort_unstable();
    Ok((train, holdout))
}

/// Validation folds (positions into `labels`); each class is dealt round
/// robin so every fold's class counts are within one of proportional.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for idx in class_indices(labels, seed) {
        for i in idx {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub auc: Option<f64>,
    pub f1_negative: f64,
    pub f1_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub window: Window,
    pub kind: ModelKind,
    pub sampling: SamplingStrategy,
    pub seed: u64,
    pub folds: Vec<EvalReport>,
    pub cv_mean: CvSummary,
    pub holdout: EvalReport,
    pub train_subreddits: Vec<String>,
    pub holdout_subreddits: Vec<String>,
    /// Final-model importances summed over quarter prefixes.
    pub base_importances: BTreeMap<String, f64>,
}

/// Sum `q{i}_name` importances into `name`.
pub fn aggregate_by_base(importances: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (k, v) in importances {
        let base = match k.split_once('_') {
            Some((q, rest))
                if q.len() == 2 && q.starts_with('q') && q.as_bytes()[1].is_ascii_digit() =>
            {
                rest
            }
            _ => k.as_str(),
        };
        *out.entry(base.to_string()).or_insert(0.0) += v;
    }
    out
}

/// Cross-validate on 80% of each class and report the final fit on the rest.
pub fn protocol_run(
    rows: &[FeatureRow],
    window: Window,
    kind: ModelKind,
    hyper: &Hyperparameters,
    sampling: SamplingStrategy,
    seed: u64,
) -> Result<(ProtocolReport, ModelArtifact), ModelError> {
    let wd = window_dataset(rows, window)?;
    let (train_idx, holdout_idx) = stratified_split(&wd.data.labels, HOLDOUT_FRACTION, seed)?;
    let train_set = wd.data.subset(&train_idx);
    let holdout = wd.data.subset(&holdout_idx);

    let mut folds = Vec::with_capacity(FOLDS);
    for (f, val) in stratified_folds(&train_set.labels, FOLDS, seed.wrapping_add(1))
        .iter()
        .enumerate()
    {
        let fit_idx: Vec<usize> = (0..train_set.len())
            .filter(|i| val.binary_search(i).is_err())
            .collect();
        let fit = train_set.subset(&fit_idx);
        let valid = train_set.subset(val);
        let artifact = train(
            &fit,
            &wd.schema,
            kind,
            hyper,
            sampling,
            seed.wrapping_add(10 + f as u64),
        )?;
        let mut report = evaluate(&artifact, &valid.rows, &valid.labels, hyper.threshold)?;
        report.window = Some(window);
        folds.push(report);
    }
    let aucs: Vec<f64> = folds.iter().filter_map(|r| r.auc).collect();
    let mean = |f: fn(&EvalReport) -> f64| folds.iter().map(f).sum::<f64>() / folds.len() as f64;
    let cv_mean = CvSummary {
        auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        f1_negative: mean(|r| r.f1_negative),
        f1_positive: mean(|r| r.f1_positive),
    };

    let mut artifact = train(&train_set, &wd.schema, kind, hyper, sampling, seed)?;
    artifact.metadata.training_window = Some(window.to_string());
    let mut holdout_report = evaluate(&artifact, &holdout.rows, &holdout.labels, hyper.threshold)?;
    holdout_report.window = Some(window);
    let pick = |idx: &[usize]| idx.iter().map(|&i| wd.subreddits[i].clone()).collect();
    let report = ProtocolReport {
        window,
        kind,
        sampling,
        seed,
        folds,
        cv_mean,
        holdout: holdout_report,
        train_subreddits: pick(&train_idx),
        holdout_subreddits: pick(&holdout_idx),
        base_importances: aggregate_by_base(&artifact.importances),
    };
    Ok((report, artifact))
}
