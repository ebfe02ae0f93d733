use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use modwatch_core::distance::EvolutionSeries;
use modwatch_core::features::{Label, RowFlag};
use modwatch_core::models::{initial_rows, last_active};
use modwatch_core::YearMonth;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::source::CommunitySource;
use crate::state::{
    fit, Decision, Event, Factor, LabelPlan, ReviewItem, ServiceConfig, ServiceState, Status,
};
use crate::store::Store;
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub subreddit: String,
    pub decision: Decision,
    pub actor: String,
    /// Month of the decision; defaults to the latest flag cycle.
    #[serde(default)]
    pub month: Option<YearMonth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelOutcomeKind {
    TruePositive,
    FalseNegative,
    Dismissed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelOutcome {
    pub outcome: LabelOutcomeKind,
    pub item: Option<ReviewItem>,
    pub lead_time: Option<i64>,
    pub queued_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainOutcome {
    /// False when nothing was queued.
    pub retrained: bool,
    pub version: u32,
    pub training_size: usize,
    pub model_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dossier {
    pub subreddit: String,
    pub month: YearMonth,
    pub features: BTreeMap<String, f64>,
    pub flags: Vec<RowFlag>,
    pub score: Option<f64>,
    pub factors: Vec<Factor>,
    pub items: Vec<ReviewItem>,
    pub evolution: Vec<EvolutionSeries>,
}

/// The single writer. Every command appends one event, then folds it into
/// the state.
pub struct Service<S> {
    source: Arc<S>,
    state: ServiceState,
    store: Option<Store>,
}

impl<S: CommunitySource> Service<S> {
    /// Start a fresh service: extract the initial rows and train version 1
    /// (skipped with a warning when the initial rows hold only one class).
    pub fn bootstrap(
        source: Arc<S>,
        config: ServiceConfig,
        dir: Option<&Path>,
        at: DateTime<Utc>,
    ) -> Result<Self, ServiceError> {
        let store = match dir {
            Some(d) => {
                let (store, events) = Store::open(d)?;
                if !events.is_empty() {
                    return Err(ServiceError::Conflict(format!(
                        "{} already holds {} events",
                        d.display(),
                        events.len()
                    )));
                }
                Some(store)
            }
            None => None,
        };
        let window = source.window();
        if config.initial_start > config.initial_end
            || !window.contains(config.initial_start)
            || !window.contains(config.initial_end)
        {
            return Err(ServiceError::BadRequest(format!(
                "initial window {}..{} must lie inside {}..{}",
                config.initial_start, config.initial_end, window.start, window.end
            )));
        }
        if !(0.0..=1.0).contains(&config.threshold) {
            return Err(ServiceError::BadRequest(format!(
                "threshold {} outside [0, 1]",
                config.threshold
            )));
        }
        let rows = initial_rows(source.as_ref(), config.initial_start, config.initial_end)?;
        let artifact = match fit(&config, &rows) {
            Ok(a) => Some(a),
            Err(ServiceError::SingleClass(msg)) => {
                log::warn!("no initial model: {msg}");
                None
            }
            Err(e) => return Err(e),
        };
        let event = Event::Ingest {
            at,
            config: config.clone(),
            fingerprint: source.fingerprint(),
            rows: rows.clone(),
            model_hash: artifact.as_ref().map(|a| a.hash()),
        };
        let mut service = Self {
            state: ServiceState::new(config, source.fingerprint(), rows.clone()),
            source,
            store,
        };
        service.append(&event)?;
        if let Some(a) = artifact {
            service.state.install(1, a, rows);
        }
        service.commit()?;
        Ok(service)
    }

    /// Rebuild from the store in `dir`: load the snapshot if any, then
    /// replay the later events, retraining and checking every model hash.
    pub fn open(source: Arc<S>, dir: &Path) -> Result<Self, ServiceError> {
        let (store, events) = Store::open(dir)?;
        if events.is_empty() {
            return Err(ServiceError::NotFound(format!(
                "no event log in {}",
                dir.display()
            )));
        }
        let mut state = match store.read_snapshot()? {
            Some(s) if s.events <= events.len() => {
                log::info!("snapshot covers {} of {} events", s.events, events.len());
                Some(s)
            }
            Some(s) => {
                log::warn!(
                    "snapshot is ahead of the log ({} > {}); replaying from scratch",
                    s.events,
                    events.len()
                );
                None
            }
            None => None,
        };
        let skip = state.as_ref().map_or(0, |s| s.events);
        for event in &events[skip..] {
            replay(&mut state, event)?;
        }
        let state = state.expect("log is nonempty");
        if state.fingerprint != source.fingerprint() {
            return Err(ServiceError::Replay(
                "event log was written against a different corpus".into(),
            ));
        }
        Ok(Self {
            source,
            state,
            store: Some(store),
        })
    }

    pub fn state(&self) -> &ServiceState {
        &self.state
    }

    pub fn source(&self) -> &Arc<S> {
        &self.source
    }

    /// Append `event` to the log; the caller then folds it in and calls [`Self::commit`].
    fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        if let Some(store) = &mut self.store {
            store.append(event)?;
        }
        Ok(())
    }

    fn commit(&mut self) -> Result<(), ServiceError> {
        self.state.events += 1;
        let every = self.state.config.snapshot_every;
        if let Some(store) = &self.store {
            if every > 0 && self.state.events % every == 0 {
                store.write_snapshot(&self.state)?;
            }
        }
        Ok(())
    }

    /// Score every live community in `month` and open a pending item for
    /// each one at or above the threshold that is neither pending review nor
    /// already intervened on. Dismissed communities may be flagged again.
    pub fn flag_cycle(
        &mut self,
        month: YearMonth,
        at: DateTime<Utc>,
    ) -> Result<Vec<ReviewItem>, ServiceError> {
        let model = self.state.current_model().ok_or(ServiceError::NoModel)?;
        if !self.source.window().contains(month) {
            return Err(ServiceError::BadRequest(format!(
                "{month} is outside the corpus"
            )));
        }
        if let Some(last) = self.state.current_month() {
            if month < last {
                return Err(ServiceError::BadRequest(format!(
                    "{month} is before the last cycle ({last})"
                )));
            }
        }
        let skip = self.state.intervened();
        let candidates: Vec<String> = self
            .source
            .active(month)
            .into_iter()
            .filter(|s| !skip.contains(s.as_str()) && self.state.pending_item(s).is_none())
            .collect();
        let artifact = &model.artifact;
        let threshold = self.state.config.threshold;
        let top = self.state.config.top_factors;
        let scored = candidates
            .par_iter()
            .map(|sub| {
                let row = self.source.row(sub, month)?;
                let v = row
                    .vector(&artifact.schema)
                    .map_err(modwatch_core::models::ModelError::from)?;
                let score = artifact.predict_proba(&v)?;
                if score < threshold {
                    return Ok(None);
                }
                let factors = artifact
                    .contributions(&v)?
                    .into_iter()
                    .take(top)
                    .map(|(feature, contribution)| Factor {
                        feature,
                        contribution,
                    })
                    .collect();
                Ok(Some((sub.clone(), score, factors)))
            })
            .collect::<Result<Vec<_>, ServiceError>>()?;
        let first = self.state.items.len();
        let version = model.version;
        let items: Vec<ReviewItem> = scored
            .into_iter()
            .flatten()
            .enumerate()
            .map(|(i, (subreddit, score, top_factors))| ReviewItem {
                id: first + i,
                subreddit,
                flagged_month: month,
                score,
                top_factors,
                model_version: version,
                status: Status::Pending,
                decided_by: None,
                decided_at: None,
            })
            .collect();
        log::info!(
            "{month}: {} candidates, {} flagged",
            candidates.len(),
            items.len()
        );
        let event = Event::Flag {
            at,
            month,
            items: items.clone(),
        };
        self.append(&event)?;
        self.state.apply_flag(month, items.clone());
        self.commit()?;
        Ok(items)
    }

    pub fn submit_label(
        &mut self,
        req: LabelRequest,
        at: DateTime<Utc>,
    ) -> Result<LabelOutcome, ServiceError> {
        let month = req.month.or(self.state.current_month()).ok_or_else(|| {
            ServiceError::BadRequest("no flag cycle has run; give the decision month".into())
        })?;
        if !self.source.window().contains(month) {
            return Err(ServiceError::BadRequest(format!(
                "{month} is outside the corpus"
            )));
        }
        if req.actor.trim().is_empty() {
            return Err(ServiceError::BadRequest("actor must not be empty".into()));
        }
        let plan = self.state.plan_label(&req.subreddit, req.decision, month)?;
        let mut delta = Vec::new();
        if req.decision == Decision::Intervened {
            // the row may only see data up to the decision month
            match last_active(
                self.source.as_ref(),
                &req.subreddit,
                self.source.window().start,
                month,
            ) {
                Some(m) => {
                    let mut row = self.source.row(&req.subreddit, m)?;
                    row.label = Label::Intervened;
                    delta.push(row);
                }
                None => log::warn!(
                    "{} has no activity up to {month}; nothing to learn from",
                    req.subreddit
                ),
            }
        }
        let event = Event::Label {
            at,
            subreddit: req.subreddit.clone(),
            decision: req.decision,
            actor: req.actor.clone(),
            month,
            delta: delta.clone(),
        };
        self.append(&event)?;
        let queued_rows = delta.len();
        self.state.apply_label(
            plan,
            &req.subreddit,
            req.decision,
            &req.actor,
            month,
            at,
            delta,
        );
        self.commit()?;
        Ok(match plan {
            LabelPlan::Decide(i) => {
                let item = self.state.items[i].clone();
                let lead_time = (req.decision == Decision::Intervened)
                    .then(|| item.flagged_month.months_until(month));
                LabelOutcome {
                    outcome: match req.decision {
                        Decision::Intervened => LabelOutcomeKind::TruePositive,
                        Decision::Dismissed => LabelOutcomeKind::Dismissed,
                    },
                    item: Some(item),
                    lead_time,
                    queued_rows,
                }
            }
            LabelPlan::OutOfBand => LabelOutcome {
                outcome: LabelOutcomeKind::FalseNegative,
                item: None,
                lead_time: None,
                queued_rows,
            },
        })
    }

    /// Retrain on the training set plus queued rows. An empty queue is a
    /// no-op; a failed fit leaves the version and the queue untouched.
    pub fn retrain(&mut self, at: DateTime<Utc>) -> Result<RetrainOutcome, ServiceError> {
        if self.state.queue.is_empty() {
            return Ok(RetrainOutcome {
                retrained: false,
                version: self.state.version(),
                training_size: self.state.training.len(),
                model_hash: self.state.current_model().map(|m| m.hash.clone()),
            });
        }
        let rows: Vec<_> = self
            .state
            .training
            .iter()
            .chain(&self.state.queue)
            .cloned()
            .collect();
        let artifact = fit(&self.state.config, &rows)?;
        let version = self.state.version() + 1;
        let hash = artifact.hash();
        let event = Event::Retrain {
            at,
            version,
            training_size: rows.len(),
            model_hash: hash.clone(),
        };
        self.append(&event)?;
        self.state.install(version, artifact, rows);
        self.commit()?;
        log::info!("model version {version} ({hash})");
        Ok(RetrainOutcome {
            retrained: true,
            version,
            training_size: self.state.training.len(),
            model_hash: Some(hash),
        })
    }
}

/// Everything the dashboard shows for one community in one month.
pub fn dossier<S: CommunitySource>(
    state: &ServiceState,
    source: &S,
    subreddit: &str,
    month: Option<YearMonth>,
) -> Result<Dossier, ServiceError> {
    let month = month
        .or(state.current_month())
        .unwrap_or_else(|| source.window().end);
    if source
        .active(month)
        .binary_search_by(|s| s.as_str().cmp(subreddit))
        .is_err()
    {
        return Err(ServiceError::NotFound(format!(
            "{subreddit} has no activity in {month}"
        )));
    }
    let row = source.row(subreddit, month)?;
    let (score, factors) = match state.current_model() {
        Some(m) => {
            let v = row
                .vector(&m.artifact.schema)
                .map_err(modwatch_core::models::ModelError::from)?;
            let factors = m
                .artifact
                .contributions(&v)?
                .into_iter()
                .take(state.config.top_factors)
                .map(|(feature, contribution)| Factor {
                    feature,
                    contribution,
                })
                .collect();
            (Some(m.artifact.predict_proba(&v)?), factors)
        }
        None => (None, Vec::new()),
    };
    Ok(Dossier {
        subreddit: subreddit.to_string(),
        month,
        features: row.values,
        flags: row.flags.into_iter().collect(),
        score,
        factors,
        items: state
            .items
            .iter()
            .filter(|i| i.subreddit == subreddit)
            .cloned()
            .collect(),
        evolution: source.evolution(subreddit, month),
    })
}

fn replay(state: &mut Option<ServiceState>, event: &Event) -> Result<(), ServiceError> {
    match (event, state.as_mut()) {
        (
            Event::Ingest {
                config,
                fingerprint,
                rows,
                model_hash,
                ..
            },
            None,
        ) => {
            let mut s = ServiceState::new(config.clone(), fingerprint.clone(), rows.clone());
            if let Some(expected) = model_hash {
                let artifact = fit(config, rows)?;
                check_hash(1, expected, &artifact.hash())?;
                s.install(1, artifact, rows.clone());
            }
            *state = Some(s);
        }
        (Event::Ingest { .. }, Some(_)) => {
            return Err(ServiceError::Replay("second ingest event".into()))
        }
        (_, None) => {
            return Err(ServiceError::Replay(
                "log does not start with an ingest event".into(),
            ))
        }
        (Event::Flag { month, items, .. }, Some(s)) => s.apply_flag(*month, items.clone()),
        (
            Event::Label {
                at,
                subreddit,
                decision,
                actor,
                month,
                delta,
            },
            Some(s),
        ) => {
            let plan = s.plan_label(subreddit, *decision, *month)?;
            s.apply_label(
                plan,
                subreddit,
                *decision,
                actor,
                *month,
                *at,
                delta.clone(),
            );
        }
        (
            Event::Retrain {
                version,
                training_size,
                model_hash,
                ..
            },
            Some(s),
        ) => {
            let rows: Vec<_> = s.training.iter().chain(&s.queue).cloned().collect();
            if rows.len() != *training_size {
                return Err(ServiceError::Replay(format!(
                    "version {version}: {} training rows, log says {training_size}",
                    rows.len()
                )));
            }
            let artifact = fit(&s.config, &rows)?;
            check_hash(*version, model_hash, &artifact.hash())?;
            s.install(*version, artifact, rows);
        }
    }
    if let Some(s) = state.as_mut() {
        s.events += 1;
    }
    Ok(())
}

fn check_hash(version: u32, expected: &str, got: &str) -> Result<(), ServiceError> {
    if expected != got {
        return Err(ServiceError::Replay(format!(
            "model version {version} hash {got} differs from logged {expected}"
        )));
    }
    Ok(())
}
