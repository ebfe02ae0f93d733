//! Event-log ingestion and monthly subreddit states.
//!
//! A [`Corpus`] is filled by a single writer through [`Corpus::ingest_events`]
//! and is read-only afterwards. [`Corpus::build_states`] partitions all posts
//! and comments into `(subreddit, month)` states, the unit every downstream
//! measure is computed over.

mod controls;
mod records;
mod sample;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{MonthWindow, YearMonth};

pub use controls::{match_controls, ControlMatch, SubredditProfiles};
pub use records::{
    CommentRecord, InterventionAction, InterventionRecord, MentionRecord, MentionSource,
    ModeratorRecord, PostRecord, RecordKind, Sentiment, AUTOMODERATOR, DELETED_AUTHOR,
};
pub use sample::sample_comments;
pub use tokenize::{StopWords, Tokenizer, DEFAULT_STOP_WORDS};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unreadable stream at line {line}: {source}")]
    Unreadable {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown record kind {0:?}")]
    UnknownKind(String),
    #[error("sample fraction {0} is outside [0, 1]")]
    Fraction(f64),
    #[error("no control candidates")]
    NoCandidates,
    #[error("unknown subreddit {0:?}")]
    UnknownSubreddit(String),
    #[error(transparent)]
    Vectors(#[from] crate::vectors::VectorError),
}

/// Why a line was not accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Parse,
    Duplicate,
    OutOfWindow,
    Invalid,
    Conflict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub skipped: usize,
    pub reasons: BTreeMap<SkipReason, usize>,
}

impl IngestReport {
    fn skip(&mut self, reason: SkipReason) {
        self.skipped += 1;
        *self.reasons.entry(reason).or_default() += 1;
    }

    pub fn merge(&mut self, other: &IngestReport) {
        self.accepted += other.accepted;
        self.skipped += other.skipped;
        for (r, n) in &other.reasons {
            *self.reasons.entry(*r).or_default() += n;
        }
    }
}

/// Identifier of a subreddit state: one community in one calendar month.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId {
    pub subreddit: String,
    pub month: YearMonth,
}

impl StateId {
    pub fn new(subreddit: impl Into<String>, month: YearMonth) -> Self {
        Self {
            subreddit: subreddit.into(),
            month,
        }
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.subreddit, self.month)
    }
}

/// Activity of one state, as indices into the corpus record vectors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateSlice {
    pub comments: Vec<usize>,
    pub posts: Vec<usize>,
    /// Users with any posting or commenting activity (deleted accounts excluded).
    pub active_users: BTreeSet<String>,
}

/// All states of a corpus keyed by `(subreddit, month)`.
#[derive(Debug, Clone, Default)]
pub struct StateIndex {
    states: BTreeMap<StateId, StateSlice>,
}

impl StateIndex {
    pub fn get(&self, id: &StateId) -> Option<&StateSlice> {
        self.states.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateId, &StateSlice)> {
        self.states.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &StateId> {
        self.states.keys()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// States of one month, in subreddit order.
    pub fn cohort(&self, month: YearMonth) -> Vec<&StateId> {
        self.states.keys().filter(|s| s.month == month).collect()
    }

    /// Months in which `subreddit` has at least one state, ascending.
    pub fn active_months(&self, subreddit: &str) -> Vec<YearMonth> {
        self.states
            .range(StateId::new(subreddit, YearMonth::new(i32::MIN, 1).unwrap())..)
            .take_while(|(id, _)| id.subreddit == subreddit)
            .map(|(id, _)| id.month)
            .collect()
    }

    pub fn subreddits(&self) -> BTreeSet<&str> {
        self.states.keys().map(|s| s.subreddit.as_str()).collect()
    }

    pub fn months(&self) -> BTreeSet<YearMonth> {
        self.states.keys().map(|s| s.month).collect()
    }
}

/// The ingested record store.
#[derive(Debug, Clone)]
pub struct Corpus {
    window: MonthWindow,
    comments: Vec<CommentRecord>,
    posts: Vec<PostRecord>,
    interventions: Vec<InterventionRecord>,
    mentions: Vec<MentionRecord>,
    moderators: Vec<ModeratorRecord>,
    seen: HashSet<(RecordKind, String)>,
}

impl Corpus {
    pub fn new(window: MonthWindow) -> Self {
        Self {
            window,
            comments: Vec::new(),
            posts: Vec::new(),
            interventions: Vec::new(),
            mentions: Vec::new(),
            moderators: Vec::new(),
            seen: HashSet::new(),
        }
    }

    pub fn window(&self) -> MonthWindow {
        self.window
    }

    pub fn comments(&self) -> &[CommentRecord] {
        &self.comments
    }

    pub fn posts(&self) -> &[PostRecord] {
        &self.posts
    }

    pub fn interventions(&self) -> &[InterventionRecord] {
        &self.interventions
    }

    pub fn mentions(&self) -> &[MentionRecord] {
        &self.mentions
    }

    pub fn moderators(&self) -> &[ModeratorRecord] {
        &self.moderators
    }

    /// Ingest a stream of newline-delimited JSON records of one kind.
    ///
    /// Malformed, duplicate, out-of-window and invalid lines are skipped and
    /// counted. An I/O or UTF-8 failure aborts the whole call.
    pub fn ingest_events<R: BufRead>(
        &mut self,
        reader: R,
        kind: RecordKind,
    ) -> Result<IngestReport, CorpusError> {
        let mut report = IngestReport::default();
        // occurrence counters for records without a natural id
        let mut occurrences: HashMap<String, usize> = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| CorpusError::Unreadable {
                line: lineno + 1,
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let outcome = match kind {
                RecordKind::Comment => self.accept_comment(&line),
                RecordKind::Post => self.accept_post(&line),
                RecordKind::Intervention => {
                    self.accept_keyless(&line, kind, &mut occurrences, Self::push_intervention)
                }
                RecordKind::Mention => {
                    self.accept_keyless(&line, kind, &mut occurrences, Self::push_mention)
                }
                RecordKind::Moderator => {
                    self.accept_keyless(&line, kind, &mut occurrences, Self::push_moderator)
                }
            };
            match outcome {
                Ok(()) => report.accepted += 1,
                Err(reason) => report.skip(reason),
            }
        }
        log::debug!("ingested {kind}: {report:?}");
        Ok(report)
    }

    pub fn ingest_str(
        &mut self,
        text: &str,
        kind: RecordKind,
    ) -> Result<IngestReport, CorpusError> {
        self.ingest_events(text.as_bytes(), kind)
    }

    fn in_window_ts(&self, created: i64) -> bool {
        YearMonth::from_epoch_seconds(created).is_ok_and(|m| self.window.contains(m))
    }

    fn accept_comment(&mut self, line: &str) -> Result<(), SkipReason> {
        let rec: CommentRecord = serde_json::from_str(line).map_err(|_| SkipReason::Parse)?;
        if rec.id.is_empty() || rec.subreddit.is_empty() {
            return Err(SkipReason::Invalid);
        }
        if rec.body.is_empty() && !rec.removed {
            return Err(SkipReason::Invalid);
        }
        if !self.in_window_ts(rec.created) {
            return Err(SkipReason::OutOfWindow);
        }
        if !self.seen.insert((RecordKind::Comment, rec.id.clone())) {
            return Err(SkipReason::Duplicate);
        }
        self.comments.push(rec);
        Ok(())
    }

    fn accept_post(&mut self, line: &str) -> Result<(), SkipReason> {
        let rec: PostRecord = serde_json::from_str(line).map_err(|_| SkipReason::Parse)?;
        if rec.id.is_empty() || rec.subreddit.is_empty() {
            return Err(SkipReason::Invalid);
        }
        if rec.title.is_empty() && !rec.removed {
            return Err(SkipReason::Invalid);
        }
        if !self.in_window_ts(rec.created) {
            return Err(SkipReason::OutOfWindow);
        }
        if !self.seen.insert((RecordKind::Post, rec.id.clone())) {
            return Err(SkipReason::Duplicate);
        }
        self.posts.push(rec);
        Ok(())
    }

    /// Records without an id are keyed by their canonical JSON plus the
    /// occurrence count within the stream, so that repeated identical lines in
    /// one stream are kept while re-ingesting the stream is a no-op.
    fn accept_keyless<T>(
        &mut self,
        line: &str,
        kind: RecordKind,
        occurrences: &mut HashMap<String, usize>,
        push: fn(&mut Self, T) -> Result<(), SkipReason>,
    ) -> Result<(), SkipReason>
    where
        T: serde::de::DeserializeOwned + Serialize,
    {
        let rec: T = serde_json::from_str(line).map_err(|_| SkipReason::Parse)?;
        let canonical = serde_json::to_string(&rec).map_err(|_| SkipReason::Parse)?;
        let n = occurrences.entry(canonical.clone()).or_default();
        *n += 1;
        let key = format!("{canonical}#{n}");
        if self.seen.contains(&(kind, key.clone())) {
            return Err(SkipReason::Duplicate);
        }
        push(self, rec)?;
        self.seen.insert((kind, key));
        Ok(())
    }

    fn push_intervention(&mut self, rec: InterventionRecord) -> Result<(), SkipReason> {
        if rec.subreddit.is_empty() {
            return Err(SkipReason::Invalid);
        }
        if !self.window.contains(rec.date) {
            return Err(SkipReason::OutOfWindow);
        }
        let existing: Vec<&InterventionRecord> = self
            .interventions
            .iter()
            .filter(|i| i.subreddit == rec.subreddit)
            .collect();
        if existing.iter().any(|i| **i == rec) {
            return Err(SkipReason::Duplicate);
        }
        let ban = existing
            .iter()
            .find(|i| i.action == InterventionAction::Ban);
        match rec.action {
            InterventionAction::Ban => {
                if ban.is_some() {
                    return Err(SkipReason::Conflict);
                }
                if existing
                    .iter()
                    .any(|i| i.action == InterventionAction::Quarantine && i.date > rec.date)
                {
                    return Err(SkipReason::Conflict);
                }
            }
            InterventionAction::Quarantine => {
                if ban.is_some_and(|b| rec.date > b.date) {
                    return Err(SkipReason::Conflict);
                }
            }
        }
        self.interventions.push(rec);
        Ok(())
    }

    fn push_mention(&mut self, rec: MentionRecord) -> Result<(), SkipReason> {
        if rec.target_subreddit.is_empty() {
            return Err(SkipReason::Invalid);
        }
        if !self.window.contains(rec.date) {
            return Err(SkipReason::OutOfWindow);
        }
        self.mentions.push(rec);
        Ok(())
    }

    fn push_moderator(&mut self, rec: ModeratorRecord) -> Result<(), SkipReason> {
        if rec.subreddit.is_empty() || rec.user.is_empty() {
            return Err(SkipReason::Invalid);
        }
        if rec.end_month.is_some_and(|e| e < rec.start_month) {
            return Err(SkipReason::Invalid);
        }
        if !self.window.contains(rec.start_month) {
            return Err(SkipReason::OutOfWindow);
        }
        self.moderators.push(rec);
        Ok(())
    }

    /// First intervention month (ban or quarantine) per subreddit.
    pub fn intervention_months(&self) -> BTreeMap<String, YearMonth> {
        let mut out: BTreeMap<String, YearMonth> = BTreeMap::new();
        for i in &self.interventions {
            out.entry(i.subreddit.clone())
                .and_modify(|m| *m = (*m).min(i.date))
                .or_insert(i.date);
        }
        out
    }

    /// Partition every post and comment into its `(subreddit, month)` state.
    pub fn build_states(&self) -> StateIndex {
        let mut states: BTreeMap<StateId, StateSlice> = BTreeMap::new();
        for (i, c) in self.comments.iter().enumerate() {
            let slice = states
                .entry(StateId::new(&c.subreddit, c.month()))
                .or_default();
            slice.comments.push(i);
            if c.has_live_author() {
                slice.active_users.insert(c.author.clone());
            }
        }
        for (i, p) in self.posts.iter().enumerate() {
            let slice = states
                .entry(StateId::new(&p.subreddit, p.month()))
                .or_default();
            slice.posts.push(i);
            if p.has_live_author() {
                slice.active_users.insert(p.author.clone());
            }
        }
        StateIndex { states }
    }

    /// Copy of the corpus holding only records dated at or before `cutoff`.
    pub fn truncated(&self, cutoff: YearMonth) -> Corpus {
        let mut out = Corpus::new(self.window);
        out.comments = self
            .comments
            .iter()
            .filter(|c| c.month() <= cutoff)
            .cloned()
            .collect();
        out.posts = self
            .posts
            .iter()
            .filter(|p| p.month() <= cutoff)
            .cloned()
            .collect();
        out.interventions = self
            .interventions
            .iter()
            .filter(|i| i.date <= cutoff)
            .cloned()
            .collect();
        out.mentions = self
            .mentions
            .iter()
            .filter(|m| m.date <= cutoff)
            .cloned()
            .collect();
        out.moderators = self
            .moderators
            .iter()
            .filter(|m| m.start_month <= cutoff)
            .cloned()
            .collect();
        out.seen = self.seen.clone();
        out
    }
}
