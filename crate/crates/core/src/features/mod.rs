//! Leakage-gated per-quarter features.
//!
//! Every value of a [`FeatureRow`] is computed only from records dated at or
//! before the row's cutoff month (the end of its span). Interventions count
//! as "previously banned" only when dated at or before the cutoff, and the
//! vocabulary similarity uses a token corpus restricted to the same cutoff.

mod context;
mod lexicon;
mod quarters;
mod scorer;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::vectors::VectorError;

pub use context::{FeatureConfig, FeatureContext, FeatureContextBuilder};
pub use lexicon::{lexicon_scores, Category, Lexicon, DEMO_LEXICON, TOXIC_LEXICON};
pub use quarters::{split_quarters, QuarterSpan, Span};
pub use scorer::{
    toxicity_rate, ConstantScorer, LexiconScoreMode, LexiconScorer, ScorerPlugin,
    DEFAULT_TOXICITY_THRESHOLD,
};
pub use stats::Moments;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{subreddit} has a lifespan of {months} month(s); at least 4 are needed")]
    LifespanTooShort { subreddit: String, months: usize },
    #[error("no lexicon configured")]
    MissingLexicon,
    #[error("no comment scorer configured")]
    MissingScorer,
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("unknown subreddit {0:?}")]
    UnknownSubreddit(String),
    #[error("{subreddit} has no activity before its intervention")]
    NoLifespan { subreddit: String },
    #[error("feature table: {0}")]
    Table(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Vectors(#[from] VectorError),
}

/// Prediction target of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Intervened,
    Clean,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Intervened
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Intervened => "intervened",
            Label::Clean => "clean",
        }
    }
}

/// Provenance markers attached to a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFlag {
    /// No posts or comments in the span; every value is zero.
    EmptyActivity,
    /// No moderator roster was ingested; moderator features are zero.
    ModeratorsUnavailable,
    /// Quarter-schema features computed over a single month.
    SingleMonthSpan,
}

impl RowFlag {
    fn as_str(self) -> &'static str {
        match self {
            RowFlag::EmptyActivity => "empty_activity",
            RowFlag::ModeratorsUnavailable => "moderators_unavailable",
            RowFlag::SingleMonthSpan => "single_month_span",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            RowFlag::EmptyActivity,
            RowFlag::ModeratorsUnavailable,
            RowFlag::SingleMonthSpan,
        ]
        .into_iter()
        .find(|f| f.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub subreddit: String,
    pub span: Span,
    /// 1..=4 for quarter rows, `None` for ad-hoc spans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quarter: Option<u8>,
    pub label: Label,
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub flags: BTreeSet<RowFlag>,
}

impl FeatureRow {
    pub fn cutoff(&self) -> crate::time::YearMonth {
        self.span.end
    }

    /// Values in `schema` order.
    pub fn vector(&self, schema: &FeatureSchema) -> Result<Vec<f64>, FeatureError> {
        schema
            .names
            .iter()
            .map(|n| {
                self.values.get(n).copied().ok_or_else(|| {
                    FeatureError::Table(format!("{} lacks feature {n:?}", self.subreddit))
                })
            })
            .collect()
    }
}

/// Ordered feature names plus a content hash identifying the schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub version: String,
}

impl FeatureSchema {
    pub fn new(names: Vec<String>) -> Self {
        let mut h = Sha256::new();
        for n in &names {
            h.update(n.as_bytes());
            h.update([0u8]);
        }
        let digest = h.finalize();
        Self {
            names,
            version: digest.iter().take(8).map(|b| format!("{b:02x}")).collect(),
        }
    }

    /// Schema of a set of rows; errors unless every row has the same key set.
    pub fn of_rows(rows: &[FeatureRow]) -> Result<Self, FeatureError> {
        let first = rows
            .first()
            .ok_or_else(|| FeatureError::Table("no rows".into()))?;
        let names: Vec<String> = first.values.keys().cloned().collect();
        for r in rows {
            if r.values.len() != names.len() || !r.values.keys().eq(names.iter()) {
                return Err(FeatureError::Table(format!(
                    "row {}@{} has a different feature set",
                    r.subreddit, r.span
                )));
            }
        }
        Ok(Self::new(names))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

const FIXED_COLUMNS: [&str; 6] = ["subreddit", "quarter", "start", "end", "label", "flags"];

/// Write rows as CSV with a header; feature columns follow the fixed columns in schema order.
pub fn write_feature_csv<W: Write>(rows: &[FeatureRow], out: W) -> Result<(), FeatureError> {
    let schema = FeatureSchema::of_rows(rows)?;
    let mut w = csv::Writer::from_writer(out);
    let table_err = |e: csv::Error| FeatureError::Table(e.to_string());
    w.write_record(
        FIXED_COLUMNS
            .iter()
            .copied()
            .chain(schema.names.iter().map(String::as_str)),
    )
    .map_err(table_err)?;
    for r in rows {
        let mut rec = vec![
            r.subreddit.clone(),
            r.quarter.map(|q| q.to_string()).unwrap_or_default(),
            r.span.start.to_string(),
            r.span.end.to_string(),
            r.label.as_str().to_string(),
            r.flags
                .iter()
                .map(|f| f.as_str())
                .collect::<Vec<_>>()
                .join(";"),
        ];
        // shortest round-trip representation
        rec.extend(r.vector(&schema)?.into_iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(table_err)?;
    }
    w.flush().map_err(|e| FeatureError::Table(e.to_string()))
}

pub fn read_feature_csv<R: Read>(input: R) -> Result<Vec<FeatureRow>, FeatureError> {
    let bad = |msg: String| FeatureError::Table(msg);
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() < FIXED_COLUMNS.len()
        || !headers.iter().zip(FIXED_COLUMNS).all(|(a, b)| a == b)
    {
        return Err(bad("unexpected header".into()));
    }
    let names: Vec<&str> = headers.iter().skip(FIXED_COLUMNS.len()).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| rec.get(k).unwrap_or_default();
        let line = i + 2;
        let quarter = match field(1) {
            "" => None,
            q => Some(
                q.parse()
                    .map_err(|_| bad(format!("line {line}: bad quarter")))?,
            ),
        };
        let start = field(2)
            .parse()
            .map_err(|_| bad(format!("line {line}: bad start")))?;
        let end = field(3)
            .parse()
            .map_err(|_| bad(format!("line {line}: bad end")))?;
        let label = match field(4) {
            "intervened" => Label::Intervened,
            "clean" => Label::Clean,
            other => return Err(bad(format!("line {line}: bad label {other:?}"))),
        };
        let flags = field(5)
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| RowFlag::parse(s).ok_or_else(|| bad(format!("line {line}: bad flag {s:?}"))))
            .collect::<Result<_, _>>()?;
        let mut values = BTreeMap::new();
        for (k, name) in names.iter().enumerate() {
            let v: f64 = field(FIXED_COLUMNS.len() + k)
                .parse()
                .map_err(|_| bad(format!("line {line}: bad value for {name}")))?;
            values.insert(name.to_string(), v);
        }
        rows.push(FeatureRow {
            subreddit: field(0).to_string(),
            span: Span::new(start, end),
            quarter,
            label,
            values,
            flags,
        });
    }
    Ok(rows)
}
