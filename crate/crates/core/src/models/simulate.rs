//! Month-by-month deployment simulation with false-negative feedback.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, Hyperparameters, ModelArtifact, ModelError, ModelKind};
use crate::features::{FeatureContext, FeatureRow, FeatureSchema, Label, Span};
use crate::sampling::{Dataset, SamplingStrategy};
use crate::time::{MonthWindow, YearMonth};

/// Per-month single-month feature rows.
pub trait MonthlySource: Sync {
    fn window(&self) -> MonthWindow;
    /// Subreddits with activity in `month`, sorted.
    fn active(&self, month: YearMonth) -> Vec<String>;
    fn interventions(&self) -> &BTreeMap<String, YearMonth>;
    fn row(&self, subreddit: &str, month: YearMonth) -> Result<FeatureRow, ModelError>;
}

impl MonthlySource for FeatureContext<'_> {
    fn window(&self) -> MonthWindow {
        self.corpus().window()
    }

    fn active(&self, month: YearMonth) -> Vec<String> {
        self.states()
            .cohort(month)
            .into_iter()
            .map(|s| s.subreddit.clone())
            .collect()
    }

    fn interventions(&self) -> &BTreeMap<String, YearMonth> {
        FeatureContext::interventions(self)
    }

    fn row(&self, subreddit: &str, month: YearMonth) -> Result<FeatureRow, ModelError> {
        Ok(self.extract(subreddit, Span::single(month), None)?)
    }
}

/// Scores single-month rows; retrained as the training set grows.
pub trait Flagger: Sync {
    fn name(&self) -> String;
    fn retrain(&mut self, training: &[FeatureRow]) -> Result<(), ModelError>;
    fn score(&self, row: &FeatureRow) -> Result<f64, ModelError>;
    fn model_hash(&self) -> Option<String> {
        None
    }
}

/// Flags nothing.
pub struct NullFlagger;

impl Flagger for NullFlagger {
    fn name(&self) -> String {
        "null".into()
    }

    fn retrain(&mut self, _: &[FeatureRow]) -> Result<(), ModelError> {
        Ok(())
    }

    fn score(&self, _: &FeatureRow) -> Result<f64, ModelError> {
        Ok(0.0)
    }
}

/// Scores 1 for communities that are eventually intervened on.
pub struct OracleFlagger {
    pub interventions: BTreeMap<String, YearMonth>,
}

impl Flagger for OracleFlagger {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn retrain(&mut self, _: &[FeatureRow]) -> Result<(), ModelError> {
        Ok(())
    }

    fn score(&self, row: &FeatureRow) -> Result<f64, ModelError> {
        Ok(if self.interventions.contains_key(&row.subreddit) {
            1.0
        } else {
            0.0
        })
    }
}

/// A trained classifier, refitted from scratch on every retrain.
pub struct ModelFlagger {
    pub kind: ModelKind,
    pub hyper: Hyperparameters,
    pub sampling: SamplingStrategy,
    pub seed: u64,
    pub artifact: Option<ModelArtifact>,
}

impl ModelFlagger {
    pub fn new(
        kind: ModelKind,
        hyper: Hyperparameters,
        sampling: SamplingStrategy,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            hyper,
            sampling,
            seed,
            artifact: None,
        }
    }

    pub fn artifact(&self) -> Option<&ModelArtifact> {
        self.artifact.as_ref()
    }
}

impl Flagger for ModelFlagger {
    fn name(&self) -> String {
        format!("{}+{}", self.kind, self.sampling)
    }

    fn retrain(&mut self, training: &[FeatureRow]) -> Result<(), ModelError> {
        let schema = FeatureSchema::of_rows(training)?;
        let rows = training
            .iter()
            .map(|r| r.vector(&schema))
            .collect::<Result<Vec<_>, _>>()?;
        let labels = training.iter().map(|r| r.label.is_positive()).collect();
        let data = Dataset::new(rows, labels)?;
        let sampling = match self.sampling {
            // early in a stream the minority class can be tiny
            SamplingStrategy::Adasyn { k, beta } => {
                let minority = data.class_split().0.len();
                if minority > k {
                    self.sampling
                } else if minority >= 2 {
                    log::info!("ADASYN k reduced from {k} to {}", minority - 1);
                    SamplingStrategy::Adasyn {
                        k: minority - 1,
                        beta,
                    }
                } else {
                    log::info!("{minority} minority row(s); random oversampling instead of ADASYN");
                    SamplingStrategy::RandomOversample
                }
            }
            other => other,
        };
        self.artifact = Some(train(
            &data,
            &schema,
            self.kind,
            &self.hyper,
            sampling,
            self.seed,
        )?);
        Ok(())
    }

    fn score(&self, row: &FeatureRow) -> Result<f64, ModelError> {
        self.artifact
            .as_ref()
            .ok_or_else(|| ModelError::Simulation("model flagger used before training".into()))?
            .predict_row(row)
    }

    fn model_hash(&self) -> Option<String> {
        self.artifact.as_ref().map(ModelArtifact::hash)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub initial_start: YearMonth,
    pub initial_end: YearMonth,
    pub start: YearMonth,
    pub end: YearMonth,
    pub threshold: f64,
}

/// Replayable record of how the training set evolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TrainingEvent {
    Initial {
        rows: Vec<FeatureRow>,
    },
    Append {
        month: YearMonth,
        rows: Vec<FeatureRow>,
    },
    Retrain {
        month: YearMonth,
        training_size: usize,
        model_hash: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthOutcome {
    pub month: YearMonth,
    pub candidates: usize,
    pub flagged: usize,
    pub true_positives: Vec<String>,
    pub false_positives: Vec<String>,
    pub false_negatives: Vec<String>,
    /// Training-set size after this month's feedback.
    pub training_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationLedger {
    pub config: SimulationConfig,
    pub flagger: String,
    pub months: Vec<MonthOutcome>,
    /// Whole months from first flag to intervention.
    pub lead_times: BTreeMap<String, i64>,
    /// Flagged communities never intervened on, still awaiting review.
    pub pending_false_positives: Vec<String>,
    pub final_model_hash: Option<String>,
    #[serde(skip)]
    pub log: Vec<TrainingEvent>,
}

impl SimulationLedger {
    pub fn mean_lead_time(&self) -> Option<f64> {
        (!self.lead_times.is_empty())
            .then(|| self.lead_times.values().sum::<i64>() as f64 / self.lead_times.len() as f64)
    }
}

fn live(source: &dyn MonthlySource, month: YearMonth) -> Vec<String> {
    let interventions = source.interventions();
    source
        .active(month)
        .into_iter()
        .filter(|s| interventions.get(s).map_or(true, |&m| m > month))
        .collect()
}

/// Latest active month of `subreddit` in `[from, month]`.
pub fn last_active(
    source: &dyn MonthlySource,
    subreddit: &str,
    from: YearMonth,
    month: YearMonth,
) -> Option<YearMonth> {
    let mut m = month;
    while m >= from {
        if source
            .active(m)
            .binary_search_by(|s| s.as_str().cmp(subreddit))
            .is_ok()
        {
            return Some(m);
        }
        m = m.prev();
    }
    None
}

/// Single-month rows for every active month in `[start, end]` up to each
/// community's intervention, labelled by what was known at `end`.
pub fn initial_rows(
    source: &dyn MonthlySource,
    start: YearMonth,
    end: YearMonth,
) -> Result<Vec<FeatureRow>, ModelError> {
    let interventions = source.interventions();
    let mut training = Vec::new();
    for m in YearMonth::range_inclusive(start, end) {
        for sub in source.active(m) {
            let known = interventions.get(&sub).copied();
            if known.is_some_and(|im| m > im) {
                continue;
            }
            let mut row = source.row(&sub, m)?;
            row.label = if known.is_some_and(|im| im <= end) {
                Label::Intervened
            } else {
                Label::Clean
            };
            training.push(row);
        }
    }
    Ok(training)
}

/// Run the monthly flag / compare / feedback loop.
pub fn simulate_continuous(
    source: &dyn MonthlySource,
    flagger: &mut dyn Flagger,
    config: SimulationConfig,
) -> Result<SimulationLedger, ModelError> {
    let window = source.window();
    for (what, m) in [
        ("initial start", config.initial_start),
        ("initial end", config.initial_end),
        ("start", config.start),
        ("end", config.end),
    ] {
        if !window.contains(m) {
            return Err(ModelError::Simulation(format!(
                "{what} month {m} outside corpus {}..{}",
                window.start, window.end
            )));
        }
    }
    if config.initial_start > config.initial_end || config.start > config.end {
        return Err(ModelError::Simulation("empty month range".into()));
    }
    let interventions = source.interventions().clone();
    if !interventions
        .values()
        .any(|&m| m >= config.start && m <= config.end)
    {
        return Err(ModelError::Simulation(format!(
            "no interventions between {} and {}",
            config.start, config.end
        )));
    }

    let mut training = initial_rows(source, config.initial_start, config.initial_end)?;
    let mut log = vec![TrainingEvent::Initial {
        rows: training.clone(),
    }];
    flagger.retrain(&training)?;
    log.push(TrainingEvent::Retrain {
        month: config.initial_end,
        training_size: training.len(),
        model_hash: flagger.model_hash(),
    });

    let mut first_flag: BTreeMap<String, YearMonth> = BTreeMap::new();
    let mut pending: BTreeSet<String> = BTreeSet::new();
    let mut months = Vec::new();
    for month in YearMonth::range_inclusive(config.start, config.end) {
        let candidates = live(source, month);
        let scored = {
            let f: &dyn Flagger = flagger;
            candidates
                .par_iter()
                .map(|s| Ok((s.clone(), f.score(&source.row(s, month)?)?)))
                .collect::<Result<Vec<_>, ModelError>>()?
        };
        let mut outcome = MonthOutcome {
            month,
            candidates: candidates.len(),
            flagged: 0,
            true_positives: Vec::new(),
            false_positives: Vec::new(),
            false_negatives: Vec::new(),
            training_size: training.len(),
        };
        for (sub, score) in scored {
            if score < config.threshold {
                continue;
            }
            outcome.flagged += 1;
            if first_flag.contains_key(&sub) {
                continue;
            }
            first_flag.insert(sub.clone(), month);
            if interventions.contains_key(&sub) {
                outcome.true_positives.push(sub);
            } else {
                pending.insert(sub.clone());
                outcome.false_positives.push(sub);
            }
        }
        let mut appended = Vec::new();
        for (sub, _) in interventions
            .iter()
            .filter(|(s, &m)| m == month && !first_flag.contains_key(*s))
        {
            outcome.false_negatives.push(sub.clone());
            // the row must not look past the intervention
            let Some(at) = last_active(source, sub, config.initial_start, month) else {
                log::warn!("{sub} missed but has no activity to learn from");
                continue;
            };
            let mut row = source.row(sub, at)?;
            row.label = Label::Intervened;
            appended.push(row);
        }
        if !appended.is_empty() {
            training.extend(appended.iter().cloned());
            log.push(TrainingEvent::Append {
                month,
                rows: appended,
            });
            flagger.retrain(&training)?;
            log.push(TrainingEvent::Retrain {
                month,
                training_size: training.len(),
                model_hash: flagger.model_hash(),
            });
        }
        outcome.training_size = training.len();
        log::info!(
            "{month}: {} candidates, {} TP, {} FP, {} FN",
            outcome.candidates,
            outcome.true_positives.len(),
            outcome.false_positives.len(),
            outcome.false_negatives.len()
        );
        months.push(outcome);
    }

    let lead_times = first_flag
        .iter()
        .filter_map(|(s, &f)| {
            interventions
                .get(s)
                .map(|&m| (s.clone(), f.months_until(m)))
        })
        .collect();
    Ok(SimulationLedger {
        config,
        flagger: flagger.name(),
        months,
        lead_times,
        pending_false_positives: pending.into_iter().collect(),
        final_model_hash: flagger.model_hash(),
        log,
    })
}

/// Rebuild the training set from `log`, retraining `flagger` at every
/// retrain event and checking the recorded hash. Returns the final hash.
pub fn replay_training(
    log: &[TrainingEvent],
    flagger: &mut dyn Flagger,
) -> Result<Option<String>, ModelError> {
    let mut training: Vec<FeatureRow> = Vec::new();
    let mut last = None;
    for event in log {
        match event {
            TrainingEvent::Initial { rows } => training = rows.clone(),
            TrainingEvent::Append { rows, .. } => training.extend(rows.iter().cloned()),
            TrainingEvent::Retrain {
                month,
                training_size,
                model_hash,
            } => {
                if training.len() != *training_size {
                    return Err(ModelError::Simulation(format!(
                        "replay at {month}: {} training rows, log says {training_size}",
                        training.len()
                    )));
                }
                flagger.retrain(&training)?;
                let hash = flagger.model_hash();
                if &hash != model_hash {
                    return Err(ModelError::Simulation(format!(
                        "replay at {month}: model hash differs"
                    )));
                }
                last = hash;
            }
        }
    }
    Ok(last)
}
