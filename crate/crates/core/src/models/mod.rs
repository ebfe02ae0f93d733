//! Interpretable classifiers, their artifacts, evaluation protocol and the
//! continuous-learning simulator.

mod logistic;
mod metrics;
mod protocol;
mod simulate;
mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{FeatureError, FeatureRow, FeatureSchema};
use crate::sampling::{
    majority_vote, resample, Dataset, Provenance, SamplingError, SamplingStrategy, Standardizer,
};

pub use logistic::{fit_logistic, logistic_gradient, logistic_loss, sigmoid, LogisticModel};
pub use metrics::{auc, Confusion};
pub use protocol::{
    aggregate_by_base, protocol_run, stratified_folds, stratified_split, window_dataset,
    ProtocolReport, Window, WindowData,
};
pub use simulate::{
    initial_rows, last_active, replay_training, simulate_continuous, Flagger, ModelFlagger,
    MonthOutcome, MonthlySource, NullFlagger, OracleFlagger, SimulationConfig, SimulationLedger,
    TrainingEvent,
};
pub use tree::{gini, sqrt_features, Forest, Node, Tree, TreeParams};

pub const ARTIFACT_FORMAT: &str = "modwatch-model";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training rows contain a single class")]
    SingleClass,
    #[error("NaN in {0}")]
    NaN(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("AUC is undefined for a single-class test set")]
    AucUndefined,
    #[error("{0} requires a {1} model")]
    WrongKind(&'static str, &'static str),
    #[error("{class} class has {count} row(s); stratification needs at least {needed}")]
    TooFewForStratification {
        class: &'static str,
        count: usize,
        needed: usize,
    },
    #[error("artifact: {0}")]
    Artifact(String),
    #[error("simulation: {0}")]
    Simulation(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Tree,
    Forest,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logistic" | "lr" => Ok(ModelKind::Logistic),
            "tree" | "dt" => Ok(ModelKind::Tree),
            "forest" | "rf" => Ok(ModelKind::Forest),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub lambda: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub n_trees: usize,
    /// Per-split features for forests; ⌊√d⌋ when unset.
    pub max_features: Option<usize>,
    pub threshold: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            tolerance: 1e-8,
            max_iter: 200_000,
            max_depth: 12,
            min_leaf: 2,
            n_trees: 100,
            max_features: None,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Logistic(LogisticModel),
    Tree(Tree),
    Forest(Forest),
}

impl Model {
    fn predict_proba(&self, z: &[f64]) -> f64 {
        match self {
            Model::Logistic(m) => m.predict_proba(z),
            Model::Tree(t) => t.predict_proba(z),
            Model::Forest(f) => f.predict_proba(z),
        }
    }

    fn predict_label(&self, z: &[f64], threshold: f64) -> bool {
        match self {
            Model::Forest(f) => f.predict_label(z, threshold),
            other => other.predict_proba(z) >= threshold,
        }
    }

    fn importances(&self) -> Vec<f64> {
        match self {
            Model::Logistic(m) => tree::normalize(m.weights.iter().map(|w| w.abs()).collect()),
            Model::Tree(t) => t.importances(),
            Model::Forest(f) => f.importances(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub sampling: SamplingStrategy,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub training_window: Option<String>,
    pub real_rows: usize,
    pub positive_rows: usize,
    pub synthetic_rows: usize,
}

/// A trained model with everything needed to score raw feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub format_version: u32,
    pub kind: ModelKind,
    pub schema: FeatureSchema,
    pub standardizer: Standardizer,
    /// One member, or one per partition under ensemble undersampling.
    pub members: Vec<Model>,
    /// Normalized importances: Gini for trees and forests, |weight| share for logistic.
    pub importances: BTreeMap<String, f64>,
    pub metadata: TrainingMetadata,
}

fn check_finite(data: &Dataset) -> Result<(), ModelError> {
    for (i, r) in data.rows.iter().enumerate() {
        if r.iter().any(|v| v.is_nan()) {
            return Err(ModelError::NaN(format!("training row {i}")));
        }
    }
    Ok(())
}

/// Fit a model on raw (unstandardized) rows. Standardization is fitted on
/// `data`, then `sampling` is applied in the standardized space.
pub fn train(
    data: &Dataset,
    schema: &FeatureSchema,
    kind: ModelKind,
    hyper: &Hyperparameters,
    sampling: SamplingStrategy,
    seed: u64,
) -> Result<ModelArtifact, ModelError> {
    if data.width() != schema.len() {
        return Err(ModelError::Shape(format!(
            "rows have {} features, schema {}",
            data.width(),
            schema.len()
        )));
    }
    check_finite(data)?;
    let positives = data.positives();
    if positives == 0 || positives == data.len() {
        return Err(ModelError::SingleClass);
    }
    let standardizer = Standardizer::fit(&data.rows);
    let scaled = Dataset {
        rows: standardizer.transform_all(&data.rows),
        labels: data.labels.clone(),
        provenance: data.provenance.clone(),
    };
    let sets = resample(&scaled, sampling, seed)?;
    let synthetic_rows = sets
        .iter()
        .map(|s| {
            s.provenance
                .iter()
                .filter(|p| **p == Provenance::Synthetic)
                .count()
        })
        .sum();
    let members: Vec<Model> = sets
        .iter()
        .enumerate()
        .map(|(i, set)| fit_one(set, kind, hyper, seed.wrapping_add(i as u64)))
        .collect();
    let mut imp = vec![0.0; schema.len()];
    for m in &members {
        for (a, b) in imp.iter_mut().zip(m.importances()) {
            *a += b;
        }
    }
    let imp = tree::normalize(imp);
    Ok(ModelArtifact {
        format: ARTIFACT_FORMAT.to_string(),
        format_version: ARTIFACT_VERSION,
        kind,
        schema: schema.clone(),
        standardizer,
        members,
        importances: schema.names.iter().cloned().zip(imp).collect(),
        metadata: TrainingMetadata {
            sampling,
            seed,
            hyperparameters: *hyper,
            training_window: None,
            real_rows: data.len(),
            positive_rows: positives,
            synthetic_rows,
        },
    })
}

fn fit_one(set: &Dataset, kind: ModelKind, hyper: &Hyperparameters, seed: u64) -> Model {
    let d = set.width();
    let params = TreeParams {
        max_depth: hyper.max_depth,
        min_leaf: hyper.min_leaf,
        max_features: None,
    };
    match kind {
        ModelKind::Logistic => Model::Logistic(fit_logistic(
            &set.rows,
            &set.labels,
            hyper.lambda,
            hyper.tolerance,
            hyper.max_iter,
        )),
        ModelKind::Tree => Model::Tree(Tree::fit(&set.rows, &set.labels, params)),
        ModelKind::Forest => Model::Forest(Forest::fit(
            &set.rows,
            &set.labels,
            hyper.n_trees,
            TreeParams {
                max_features: Some(hyper.max_features.unwrap_or_else(|| sqrt_features(d))),
                ..params
            },
            seed,
        )),
    }
}

impl ModelArtifact {
    fn standardized(&self, row: &[f64]) -> Result<Vec<f64>, ModelError> {
        if row.len() != self.schema.len() {
            return Err(ModelError::Shape(format!(
                "row has {} features, schema {} has {}",
                row.len(),
                self.schema.version,
                self.schema.len()
            )));
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(ModelError::NaN("input row".into()));
        }
        Ok(self.standardizer.transform(row))
    }

    /// Mean member probability of the positive class for a raw row in schema order.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, ModelError> {
        let z = self.standardized(row)?;
        Ok(self
            .members
            .iter()
            .map(|m| m.predict_proba(&z))
            .sum::<f64>()
            / self.members.len() as f64)
    }

    /// Hard label: each member decides at `threshold` (forests by tree vote),
    /// then members vote with ties to the positive class.
    pub fn predict_label(&self, row: &[f64], threshold: f64) -> Result<bool, ModelError> {
        let z = self.standardized(row)?;
        let votes: Vec<bool> = self
            .members
            .iter()
            .map(|m| m.predict_label(&z, threshold))
            .collect();
        Ok(majority_vote(&votes)?)
    }

    pub fn predict_row(&self, row: &FeatureRow) -> Result<f64, ModelError> {
        self.predict_proba(&row.vector(&self.schema)?)
    }

    /// Per-feature contribution to a row's score, largest magnitude first:
    /// weight × z for logistic models, importance × z for trees and forests.
    pub fn contributions(&self, row: &[f64]) -> Result<Vec<(String, f64)>, ModelError> {
        let z = self.standardized(row)?;
        let mut out: Vec<(String, f64)> = match self.kind {
            ModelKind::Logistic => {
                let n = self.members.len() as f64;
                let mut w = vec![0.0; z.len()];
                for m in &self.members {
                    if let Model::Logistic(l) = m {
                        for (a, b) in w.iter_mut().zip(&l.weights) {
                            *a += b / n;
                        }
                    }
                }
                self.schema
                    .names
                    .iter()
                    .zip(w.iter().zip(&z))
                    .map(|(k, (w, z))| (k.clone(), w * z))
                    .collect()
            }
            _ => self
                .schema
                .names
                .iter()
                .zip(&z)
                .map(|(k, z)| {
                    (
                        k.clone(),
                        self.importances.get(k).copied().unwrap_or(0.0) * z,
                    )
                })
                .collect(),
        };
        out.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
        Ok(out)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("artifact serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ModelError> {
        let a: ModelArtifact =
            serde_json::from_slice(bytes).map_err(|e| ModelError::Artifact(e.to_string()))?;
        if a.format != ARTIFACT_FORMAT || a.format_version != ARTIFACT_VERSION {
            return Err(ModelError::Artifact(format!(
                "unsupported artifact {} v{}",
                a.format, a.format_version
            )));
        }
        Ok(a)
    }

    /// SHA-256 of the serialized artifact, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `(weight, exp(weight))` per feature, on the standardized scale recorded
/// in the artifact's standardizer.
pub fn odds_ratios(artifact: &ModelArtifact) -> Result<BTreeMap<String, (f64, f64)>, ModelError> {
    match (artifact.kind, artifact.members.as_slice()) {
        (ModelKind::Logistic, [Model::Logistic(m)]) => Ok(artifact
            .schema
            .names
            .iter()
            .zip(&m.weights)
            .map(|(k, &w)| (k.clone(), (w, w.exp())))
            .collect()),
        _ => Err(ModelError::WrongKind("odds ratios", "single logistic")),
    }
}

/// Normalized Gini importances of a tree or forest artifact.
pub fn gini_importances(artifact: &ModelArtifact) -> Result<BTreeMap<String, f64>, ModelError> {
    match artifact.kind {
        ModelKind::Tree | ModelKind::Forest => Ok(artifact.importances.clone()),
        ModelKind::Logistic => Err(ModelError::WrongKind("Gini importances", "tree or forest")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    /// `None` when the test rows hold a single class.
    pub auc: Option<f64>,
    pub f1_negative: f64,
    pub f1_positive: f64,
    pub confusion: Confusion,
    pub threshold: f64,
}

/// Score raw rows and report AUC, per-class F1 and confusion counts.
pub fn evaluate(
    artifact: &ModelArtifact,
    rows: &[Vec<f64>],
    labels: &[bool],
    threshold: f64,
) -> Result<EvalReport, ModelError> {
    let scores = rows
        .iter()
        .map(|r| artifact.predict_proba(r))
        .collect::<Result<Vec<_>, _>>()?;
    let predicted = rows
        .iter()
        .map(|r| artifact.predict_label(r, threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let confusion = Confusion::from_labels(&predicted, labels);
    let auc = match auc(&scores, labels) {
        Ok(a) => Some(a),
        Err(ModelError::AucUndefined) => {
            log::warn!("AUC undefined: test rows hold a single class");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        window: None,
        auc,
        f1_negative: confusion.f1_negative(),
        f1_positive: confusion.f1_positive(),
        confusion,
        threshold,
    })
}
