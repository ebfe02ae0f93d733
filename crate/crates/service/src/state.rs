use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use modwatch_core::features::FeatureRow;
use modwatch_core::models::{Flagger, Hyperparameters, ModelArtifact, ModelFlagger, ModelKind};
use modwatch_core::sampling::SamplingStrategy;
use modwatch_core::YearMonth;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Months whose rows (labelled by what was known at `initial_end`) seed the first model.
    pub initial_start: YearMonth,
    pub initial_end: YearMonth,
    pub kind: ModelKind,
    pub hyper: Hyperparameters,
    pub sampling: SamplingStrategy,
    pub seed: u64,
    pub threshold: f64,
    pub top_factors: usize,
    /// Write a snapshot after this many events; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            initial_start: YearMonth::new(2018, 1).expect("valid month"),
            initial_end: YearMonth::new(2018, 6).expect("valid month"),
            kind: ModelKind::Forest,
            hyper: Hyperparameters::default(),
            sampling: SamplingStrategy::default(),
            seed: 0,
            threshold: 0.5,
            top_factors: 5,
            snapshot_every: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    Intervened,
    Dismissed,
}

impl std::str::FromStr for Status {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pending" => Ok(Self::Pending),
            "intervened" => Ok(Self::Intervened),
            "dismissed" => Ok(Self::Dismissed),
            other => Err(ServiceError::BadRequest(format!(
                "unknown status {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Intervened,
    Dismissed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub feature: String,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub id: usize,
    pub subreddit: String,
    pub flagged_month: YearMonth,
    pub score: f64,
    pub top_factors: Vec<Factor>,
    pub model_version: u32,
    pub status: Status,
    pub decided_by: Option<String>,
    pub decided_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruePositive {
    pub subreddit: String,
    pub flagged_month: YearMonth,
    pub intervened_month: YearMonth,
    pub lead_time: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseNegative {
    pub subreddit: String,
    pub month: YearMonth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVersion {
    pub version: u32,
    pub hash: String,
    pub training_size: usize,
    pub artifact: Arc<ModelArtifact>,
}

/// Append-only log entries. Everything needed to rebuild [`ServiceState`] is
/// in here except the models themselves, which are retrained and checked
/// against the recorded hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Ingest {
        at: DateTime<Utc>,
        config: ServiceConfig,
        fingerprint: String,
        rows: Vec<FeatureRow>,
        model_hash: Option<String>,
    },
    Flag {
        at: DateTime<Utc>,
        month: YearMonth,
        items: Vec<ReviewItem>,
    },
    Label {
        at: DateTime<Utc>,
        subreddit: String,
        decision: Decision,
        actor: String,
        month: YearMonth,
        delta: Vec<FeatureRow>,
    },
    Retrain {
        at: DateTime<Utc>,
        version: u32,
        training_size: usize,
        model_hash: String,
    },
}

/// What a label does to the state, worked out before any rows are extracted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LabelPlan {
    /// Decide the pending item at this index.
    Decide(usize),
    /// Intervention on a community the model never flagged.
    OutOfBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceState {
    pub config: ServiceConfig,
    pub fingerprint: String,
    pub items: Vec<ReviewItem>,
    pub training: Vec<FeatureRow>,
    /// Rows waiting for the next retrain.
    pub queue: Vec<FeatureRow>,
    pub models: Vec<ModelVersion>,
    pub true_positives: Vec<TruePositive>,
    pub false_negatives: Vec<FalseNegative>,
    pub cycles: Vec<YearMonth>,
    /// Number of log events folded into this state.
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub model_version: u32,
    pub model_hash: Option<String>,
    pub cycles: usize,
    pub last_month: Option<YearMonth>,
    pub flagged: usize,
    pub pending: usize,
    pub dismissed: usize,
    pub true_positives: Vec<TruePositive>,
    pub false_negatives: Vec<FalseNegative>,
    pub mean_lead_time: Option<f64>,
    pub training_size: usize,
    pub queued_rows: usize,
}

impl ServiceState {
    pub(crate) fn new(config: ServiceConfig, fingerprint: String, rows: Vec<FeatureRow>) -> Self {
        Self {
            config,
            fingerprint,
            items: Vec::new(),
            training: rows,
            queue: Vec::new(),
            models: Vec::new(),
            true_positives: Vec::new(),
            false_negatives: Vec::new(),
            cycles: Vec::new(),
            events: 0,
        }
    }

    pub fn current_model(&self) -> Option<&ModelVersion> {
        self.models.last()
    }

    /// 0 before the first model.
    pub fn version(&self) -> u32 {
        self.current_model().map_or(0, |m| m.version)
    }

    pub fn current_month(&self) -> Option<YearMonth> {
        self.cycles.last().copied()
    }

    pub fn items_with(&self, status: Option<Status>) -> Vec<&ReviewItem> {
        self.items
            .iter()
            .filter(|i| status.map_or(true, |s| i.status == s))
            .collect()
    }

    pub fn pending_item(&self, subreddit: &str) -> Option<usize> {
        self.items
            .iter()
            .rposition(|i| i.subreddit == subreddit && i.status == Status::Pending)
    }

    /// Communities already intervened on, whether flagged first or not.
    pub fn intervened(&self) -> BTreeSet<&str> {
        self.true_positives
            .iter()
            .map(|t| t.subreddit.as_str())
            .chain(self.false_negatives.iter().map(|f| f.subreddit.as_str()))
            .collect()
    }

    pub fn metrics(&self) -> Metrics {
        let mean_lead_time = (!self.true_positives.is_empty()).then(|| {
            self.true_positives.iter().map(|t| t.lead_time).sum::<i64>() as f64
                / self.true_positives.len() as f64
        });
        Metrics {
            model_version: self.version(),
            model_hash: self.current_model().map(|m| m.hash.clone()),
            cycles: self.cycles.len(),
            last_month: self.current_month(),
            flagged: self.items.len(),
            pending: self.items_with(Some(Status::Pending)).len(),
            dismissed: self.items_with(Some(Status::Dismissed)).len(),
            true_positives: self.true_positives.clone(),
            false_negatives: self.false_negatives.clone(),
            mean_lead_time,
            training_size: self.training.len(),
            queued_rows: self.queue.len(),
        }
    }

    pub(crate) fn plan_label(
        &self,
        subreddit: &str,
        decision: Decision,
        month: YearMonth,
    ) -> Result<LabelPlan, ServiceError> {
        if self.intervened().contains(subreddit) {
            return Err(ServiceError::Conflict(format!(
                "{subreddit} has already been intervened on"
            )));
        }
        if let Some(i) = self.pending_item(subreddit) {
            let flagged = self.items[i].flagged_month;
            if month < flagged {
                return Err(ServiceError::BadRequest(format!(
                    "decision month {month} precedes the flag in {flagged}"
                )));
            }
            return Ok(LabelPlan::Decide(i));
        }
        match decision {
            Decision::Intervened => Ok(LabelPlan::OutOfBand),
            Decision::Dismissed if self.items.iter().any(|i| i.subreddit == subreddit) => {
                Err(ServiceError::Conflict(format!(
                    "{subreddit} has no pending item; it was already decided"
                )))
            }
            Decision::Dismissed => Err(ServiceError::NotFound(format!(
                "{subreddit} has never been flagged"
            ))),
        }
    }

    pub(crate) fn apply_flag(&mut self, month: YearMonth, items: Vec<ReviewItem>) {
        self.items.extend(items);
        self.cycles.push(month);
    }

    pub(crate) fn apply_label(
        &mut self,
        plan: LabelPlan,
        subreddit: &str,
        decision: Decision,
        actor: &str,
        month: YearMonth,
        at: DateTime<Utc>,
        delta: Vec<FeatureRow>,
    ) {
        match plan {
            LabelPlan::Decide(i) => {
                let item = &mut self.items[i];
                item.decided_by = Some(actor.to_string());
                item.decided_at = Some(at);
                item.status = match decision {
                    Decision::Intervened => Status::Intervened,
                    Decision::Dismissed => Status::Dismissed,
                };
                if decision == Decision::Intervened {
                    self.true_positives.push(TruePositive {
                        subreddit: subreddit.to_string(),
                        flagged_month: item.flagged_month,
                        intervened_month: month,
                        lead_time: item.flagged_month.months_until(month),
                    });
                }
            }
            LabelPlan::OutOfBand => self.false_negatives.push(FalseNegative {
                subreddit: subreddit.to_string(),
                month,
            }),
        }
        self.queue.extend(delta);
    }

    pub(crate) fn install(
        &mut self,
        version: u32,
        artifact: ModelArtifact,
        training: Vec<FeatureRow>,
    ) {
        self.training = training;
        self.queue.clear();
        self.models.push(ModelVersion {
            version,
            hash: artifact.hash(),
            training_size: self.training.len(),
            artifact: Arc::new(artifact),
        });
    }
}

/// Train on `rows` the way the simulation does, so the two loops behave alike.
pub(crate) fn fit(
    config: &ServiceConfig,
    rows: &[FeatureRow],
) -> Result<ModelArtifact, ServiceError> {
    let labels: BTreeMap<bool, usize> = rows.iter().fold(BTreeMap::new(), |mut m, r| {
        *m.entry(r.label.is_positive()).or_default() += 1;
        m
    });
    if labels.len() < 2 {
        return Err(ServiceError::SingleClass(format!(
            "{} rows, {:?}",
            rows.len(),
            labels
        )));
    }
    let mut flagger = ModelFlagger::new(config.kind, config.hyper, config.sampling, config.seed);
    flagger.retrain(rows)?;
    Ok(flagger.artifact().cloned().expect("trained above"))
}
