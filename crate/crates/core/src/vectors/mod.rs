//! Fixed-length state vectors.
//!
//! Two vector kinds describe each subreddit state:
//!
//! * vocabulary vectors, TF-IDF weights over the token corpus `T`, with
//!   `weight(t) = tf(t, d) * ln(|D| / df(t))`;
//! * active-user vectors, whose entry for state `j` is the fraction of the
//!   state's active users also active in `j`, `|A_i ∩ A_j| / |A_i|`.
//!
//! Both are stored sparsely; the logical length is carried alongside.

mod sidecar;
mod sparse;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, StateId, StateIndex, Tokenizer};
use crate::time::{MonthWindow, YearMonth};

pub use sidecar::{read_sidecars, write_sidecars, SIDECAR_FORMAT, SIDECAR_VERSION};
pub use sparse::SparseVector;

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("no documents dated at or before {0}")]
    EmptyCorpus(YearMonth),
    #[error("unknown subreddit {0:?}")]
    UnknownSubreddit(String),
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sidecar io: {0}")]
    Io(#[from] std::io::Error),
    #[error("sidecar format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorKind {
    Vocabulary,
    User,
}

impl VectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VectorKind::Vocabulary => "vocabulary",
            VectorKind::User => "user",
        }
    }
}

impl std::str::FromStr for VectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vocabulary" | "vocab" => Ok(VectorKind::Vocabulary),
            "user" | "users" => Ok(VectorKind::User),
            other => Err(format!("unknown vector kind {other:?}")),
        }
    }
}

/// Term counts of one state's document (sampled comment bodies plus post titles).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDocument {
    pub state: StateId,
    pub terms: BTreeMap<String, u32>,
}

impl StateDocument {
    pub fn from_tokens<I: IntoIterator<Item = String>>(state: StateId, tokens: I) -> Self {
        let mut terms = BTreeMap::new();
        for t in tokens {
            *terms.entry(t).or_insert(0) += 1;
        }
        Self { state, terms }
    }
}

/// Adds `src` term counts into `dst`.
pub fn accumulate_terms(dst: &mut BTreeMap<String, u32>, src: &BTreeMap<String, u32>) {
    for (t, n) in src {
        *dst.entry(t.clone()).or_insert(0) += n;
    }
}

/// Build one document per state. Comment bodies are taken only when the
/// comment id is in `sample`; post titles are always included.
pub fn build_documents(
    corpus: &Corpus,
    states: &StateIndex,
    sample: &BTreeSet<String>,
    tokenizer: &Tokenizer,
) -> Vec<StateDocument> {
    let ids: Vec<(&StateId, &crate::corpus::StateSlice)> = states.iter().collect();
    ids.par_iter()
        .map(|(id, slice)| {
            let mut terms = BTreeMap::new();
            let mut add = |text: &str| {
                tokenizer.for_each_token(text, |t| *terms.entry(t).or_insert(0) += 1);
            };
            for &ci in &slice.comments {
                let c = &corpus.comments()[ci];
                if sample.contains(&c.id) {
                    add(&c.body);
                }
            }
            for &pi in &slice.posts {
                add(&corpus.posts()[pi].title);
            }
            StateDocument {
                state: (*id).clone(),
                terms,
            }
        })
        .collect()
}

/// The unique tokens `T` of all documents dated at or before `as_of`, with
/// their document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenCorpus {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    doc_frequency: Vec<u32>,
    n_docs: usize,
    as_of: YearMonth,
}

impl TokenCorpus {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// `|D|`, the number of documents the statistics were built from.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn as_of(&self) -> YearMonth {
        self.as_of
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn doc_frequency(&self, token: &str) -> Option<u32> {
        self.index_of(token).map(|i| self.doc_frequency[i as usize])
    }

    pub fn idf(&self, index: u32) -> f64 {
        (self.n_docs as f64 / f64::from(self.doc_frequency[index as usize])).ln()
    }
}

pub fn build_token_corpus(
    docs: &[StateDocument],
    as_of: YearMonth,
) -> Result<TokenCorpus, VectorError> {
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    let mut n_docs = 0;
    for d in docs.iter().filter(|d| d.state.month <= as_of) {
        n_docs += 1;
        for t in d.terms.keys() {
            *df.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    if n_docs == 0 {
        return Err(VectorError::EmptyCorpus(as_of));
    }
    let tokens: Vec<String> = df.keys().map(|t| t.to_string()).collect();
    let index = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    Ok(TokenCorpus {
        doc_frequency: df.into_values().collect(),
        tokens,
        index,
        n_docs,
        as_of,
    })
}

/// TF-IDF vector of a set of term counts. Terms outside `T` are dropped.
pub fn tfidf(terms: &BTreeMap<String, u32>, corpus: &TokenCorpus) -> SparseVector {
    let entries = terms
        .iter()
        .filter_map(|(t, &tf)| {
            let i = corpus.index_of(t)?;
            Some((i, f64::from(tf) * corpus.idf(i)))
        })
        .collect();
    SparseVector::from_entries(corpus.len(), entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabularyVector {
    pub state: StateId,
    pub weights: SparseVector,
}

pub fn tfidf_vector(doc: &StateDocument, corpus: &TokenCorpus) -> VocabularyVector {
    VocabularyVector {
        state: doc.state.clone(),
        weights: tfidf(&doc.terms, corpus),
    }
}

/// Vectors of one kind for a set of states.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    pub kind: VectorKind,
    pub dim: usize,
    /// Human-readable name of every dimension (token or state), when known.
    pub labels: Vec<String>,
    pub vectors: BTreeMap<StateId, SparseVector>,
}

impl VectorSet {
    pub fn get(&self, id: &StateId) -> Option<&SparseVector> {
        self.vectors.get(id)
    }

    pub fn cohort(&self, month: YearMonth) -> Vec<(&StateId, &SparseVector)> {
        self.vectors
            .iter()
            .filter(|(s, _)| s.month == month)
            .collect()
    }

    pub fn months(&self) -> BTreeSet<YearMonth> {
        self.vectors.keys().map(|s| s.month).collect()
    }
}

/// Vocabulary vectors of every document against one token corpus.
pub fn vocabulary_vectors(docs: &[StateDocument], corpus: &TokenCorpus) -> VectorSet {
    let vectors = docs
        .par_iter()
        .filter(|d| d.state.month <= corpus.as_of())
        .map(|d| (d.state.clone(), tfidf(&d.terms, corpus)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    VectorSet {
        kind: VectorKind::Vocabulary,
        dim: corpus.len(),
        labels: corpus.tokens().to_vec(),
        vectors,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveUserVector {
    pub state: StateId,
    pub overlaps: SparseVector,
}

/// Active-user vectors for every state, plus the states excluded for having
/// no active users.
#[derive(Debug, Clone, PartialEq)]
pub struct UserVectors {
    /// Dimension order: position `j` is the overlap with `states[j]`.
    pub states: Vec<StateId>,
    pub vectors: BTreeMap<StateId, ActiveUserVector>,
    pub excluded: Vec<StateId>,
}

impl UserVectors {
    pub fn overlap(&self, i: &StateId, j: &StateId) -> Option<f64> {
        let pos = self.states.binary_search(j).ok()?;
        Some(self.vectors.get(i)?.overlaps.get(pos as u32))
    }

    pub fn into_set(self) -> VectorSet {
        VectorSet {
            kind: VectorKind::User,
            dim: self.states.len(),
            labels: self.states.iter().map(|s| s.to_string()).collect(),
            vectors: self
                .vectors
                .into_iter()
                .map(|(k, v)| (k, v.overlaps))
                .collect(),
        }
    }
}

/// `entry(i, j) = |A_i ∩ A_j| / |A_i|` over all given states.
pub fn active_user_vectors<'a>(
    states: impl IntoIterator<Item = (&'a StateId, &'a BTreeSet<String>)>,
) -> UserVectors {
    let mut kept: Vec<(&StateId, &BTreeSet<String>)> = Vec::new();
    let mut excluded = Vec::new();
    for (id, users) in states {
        if users.is_empty() {
            excluded.push(id.clone());
        } else {
            kept.push((id, users));
        }
    }
    kept.sort_by(|a, b| a.0.cmp(b.0));
    excluded.sort();
    if !excluded.is_empty() {
        log::info!(
            "{} states without active users excluded from user vectors",
            excluded.len()
        );
    }

    // user -> positions of states they were active in
    let mut membership: HashMap<&str, Vec<u32>> = HashMap::new();
    for (pos, (_, users)) in kept.iter().enumerate() {
        for u in users.iter() {
            membership.entry(u.as_str()).or_default().push(pos as u32);
        }
    }
    let dim = kept.len();
    let vectors = kept
        .par_iter()
        .map(|(id, users)| {
            let mut counts: HashMap<u32, u32> = HashMap::new();
            for u in users.iter() {
                for &p in &membership[u.as_str()] {
                    *counts.entry(p).or_insert(0) += 1;
                }
            }
            let n = users.len() as f64;
            let entries = counts
                .into_iter()
                .map(|(p, c)| (p, f64::from(c) / n))
                .collect();
            (
                (*id).clone(),
                ActiveUserVector {
                    state: (*id).clone(),
                    overlaps: SparseVector::from_entries(dim, entries),
                },
            )
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    UserVectors {
        states: kept.into_iter().map(|(id, _)| id.clone()).collect(),
        vectors,
        excluded,
    }
}

/// Monthly comment counts of one subreddit over the corpus window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityVector {
    pub subreddit: String,
    pub counts: BTreeMap<YearMonth, u64>,
}

impl ActivityVector {
    pub fn to_sparse(&self) -> SparseVector {
        let entries = self
            .counts
            .values()
            .enumerate()
            .map(|(i, &c)| (i as u32, c as f64))
            .collect();
        SparseVector::from_entries(self.counts.len(), entries)
    }
}

pub fn activity_vector(
    states: &StateIndex,
    subreddit: &str,
    window: MonthWindow,
) -> Result<ActivityVector, VectorError> {
    let months = states.active_months(subreddit);
    if months.is_empty() {
        return Err(VectorError::UnknownSubreddit(subreddit.to_string()));
    }
    let mut counts: BTreeMap<YearMonth, u64> = window.months().map(|m| (m, 0)).collect();
    for m in months {
        if let (Some(slot), Some(slice)) =
            (counts.get_mut(&m), states.get(&StateId::new(subreddit, m)))
        {
            *slot = slice.comments.len() as u64;
        }
    }
    Ok(ActivityVector {
        subreddit: subreddit.to_string(),
        counts,
    })
}
