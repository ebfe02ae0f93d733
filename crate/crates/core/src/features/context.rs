use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use super::quarters::{split_quarters, Span};
use super::scorer::{ScorerPlugin, DEFAULT_TOXICITY_THRESHOLD};
use super::stats::Moments;
use super::{FeatureError, FeatureRow, Label, RowFlag};
use crate::corpus::{
    sample_comments, Corpus, MentionSource, Sentiment, StateId, StateIndex, Tokenizer,
    AUTOMODERATOR,
};
use crate::distance::cosine_similarity;
use crate::time::YearMonth;
use crate::vectors::{
    accumulate_terms, build_documents, build_token_corpus, tfidf, SparseVector, TokenCorpus,
    VectorError,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Fraction of comments whose text enters vocabulary documents.
    pub sample_fraction: f64,
    pub sample_seed: u64,
    pub toxicity_threshold: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_fraction: 0.1,
            sample_seed: 0,
            toxicity_threshold: DEFAULT_TOXICITY_THRESHOLD,
        }
    }
}

pub struct FeatureContextBuilder<'a> {
    corpus: &'a Corpus,
    lexicon: Option<Lexicon>,
    scorer: Option<Arc<dyn ScorerPlugin>>,
    tokenizer: Tokenizer,
    config: FeatureConfig,
}

impl<'a> FeatureContextBuilder<'a> {
    pub fn lexicon(mut self, lexicon: Lexicon) -> Self {
        self.lexicon = Some(lexicon);
        self
    }

    pub fn scorer(mut self, scorer: Arc<dyn ScorerPlugin>) -> Self {
        self.scorer = Some(scorer);
        self
    }

    pub fn tokenizer(mut self, tokenizer: Tokenizer) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn config(mut self, config: FeatureConfig) -> Self {
        self.config = config;
        self
    }

    pub fn build(self) -> Result<FeatureContext<'a>, FeatureError> {
        let lexicon = self.lexicon.ok_or(FeatureError::MissingLexicon)?;
        let scorer = self.scorer.ok_or(FeatureError::MissingScorer)?;
        FeatureContext::prepare(self.corpus, lexicon, scorer, self.tokenizer, self.config)
    }
}

/// Language counts of one state's comments.
#[derive(Debug, Clone, Default)]
struct StateLanguage {
    tokens: u64,
    /// Aligned with the lexicon's category order.
    categories: Vec<u64>,
    toxic: u64,
}

/// Token corpus and banned-community vectors as of one cutoff.
struct CutoffVocabulary {
    corpus: Option<TokenCorpus>,
    banned: Vec<(String, SparseVector)>,
}

/// Immutable inputs shared by every extraction. Per-state summaries are
/// computed once; per-cutoff vocabulary data is built lazily and cached.
pub struct FeatureContext<'a> {
    corpus: &'a Corpus,
    states: StateIndex,
    lexicon: Lexicon,
    scorer: Arc<dyn ScorerPlugin>,
    config: FeatureConfig,
    interventions: BTreeMap<String, YearMonth>,
    documents: BTreeMap<StateId, BTreeMap<String, u32>>,
    language: HashMap<StateId, StateLanguage>,
    subreddit_names: Vec<String>,
    subreddit_ids: HashMap<String, u32>,
    /// user -> sorted, deduplicated (subreddit id, month) activity
    user_activity: HashMap<String, Vec<(u32, YearMonth)>>,
    vocab_cache: Mutex<HashMap<YearMonth, Arc<CutoffVocabulary>>>,
}

impl<'a> FeatureContext<'a> {
    pub fn builder(corpus: &'a Corpus) -> FeatureContextBuilder<'a> {
        FeatureContextBuilder {
            corpus,
            lexicon: None,
            scorer: None,
            tokenizer: Tokenizer::default(),
            config: FeatureConfig::default(),
        }
    }

    fn prepare(
        corpus: &'a Corpus,
        lexicon: Lexicon,
        scorer: Arc<dyn ScorerPlugin>,
        tokenizer: Tokenizer,
        config: FeatureConfig,
    ) -> Result<Self, FeatureError> {
        let states = corpus.build_states();
        let sample = sample_comments(
            corpus.comments(),
            config.sample_fraction,
            config.sample_seed,
        )?;
        let documents = build_documents(corpus, &states, &sample, &tokenizer)
            .into_iter()
            .map(|d| (d.state, d.terms))
            .collect();

        let slices: Vec<_> = states.iter().collect();
        let language = slices
            .par_iter()
            .map(|(id, slice)| {
                let mut lang = StateLanguage {
                    categories: vec![0; lexicon.categories.len()],
                    ..Default::default()
                };
                for &ci in &slice.comments {
                    let body = &corpus.comments()[ci].body;
                    let tokens = tokenizer.tokenize(body);
                    let (total, counts) = lexicon.count(tokens.iter().map(String::as_str));
                    lang.tokens += total;
                    for (slot, n) in lang.categories.iter_mut().zip(counts.values()) {
                        *slot += n;
                    }
                    if scorer.score(body) >= config.toxicity_threshold {
                        lang.toxic += 1;
                    }
                }
                ((*id).clone(), lang)
            })
            .collect();

        let subreddit_names: Vec<String> =
            states.subreddits().into_iter().map(String::from).collect();
        let subreddit_ids: HashMap<String, u32> = subreddit_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let mut user_activity: HashMap<String, Vec<(u32, YearMonth)>> = HashMap::new();
        for (id, slice) in states.iter() {
            let sid = subreddit_ids[&id.subreddit];
            for u in &slice.active_users {
                user_activity
                    .entry(u.clone())
                    .or_default()
                    .push((sid, id.month));
            }
        }
        for acts in user_activity.values_mut() {
            acts.sort_unstable();
            acts.dedup();
        }

        Ok(Self {
            corpus,
            interventions: corpus.intervention_months(),
            states,
            lexicon,
            scorer,
            config,
            documents,
            language,
            subreddit_names,
            subreddit_ids,
            user_activity,
            vocab_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn states(&self) -> &StateIndex {
        &self.states
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn scorer(&self) -> &dyn ScorerPlugin {
        self.scorer.as_ref()
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn interventions(&self) -> &BTreeMap<String, YearMonth> {
        &self.interventions
    }

    pub fn label(&self, subreddit: &str) -> Label {
        if self.interventions.contains_key(subreddit) {
            Label::Intervened
        } else {
            Label::Clean
        }
    }

    /// Calendar months from first activity to the intervention month, or to
    /// the end of the corpus window for communities never intervened on.
    pub fn lifespan(&self, subreddit: &str) -> Result<Vec<YearMonth>, FeatureError> {
        let active = self.states.active_months(subreddit);
        let first = *active
            .first()
            .ok_or_else(|| FeatureError::UnknownSubreddit(subreddit.to_string()))?;
        let window_end = self.corpus.window().end;
        let end = self
            .interventions
            .get(subreddit)
            .map_or(window_end, |m| (*m).min(window_end));
        if end < first {
            return Err(FeatureError::NoLifespan {
                subreddit: subreddit.to_string(),
            });
        }
        Ok(YearMonth::range_inclusive(first, end).collect())
    }

    /// The four quarter rows of one subreddit.
    pub fn extract_quarters(&self, subreddit: &str) -> Result<Vec<FeatureRow>, FeatureError> {
        let lifespan = self.lifespan(subreddit)?;
        split_quarters(subreddit, &lifespan)?
            .iter()
            .map(|q| self.extract(subreddit, q.span, Some(q.index)))
            .collect()
    }

    /// Quarter rows of every subreddit in parallel. Subreddits whose
    /// lifespan cannot be split are returned with their error.
    pub fn extract_all(&self) -> (Vec<FeatureRow>, Vec<(String, FeatureError)>) {
        let results: Vec<_> = self
            .subreddit_names
            .par_iter()
            .map(|s| (s.clone(), self.extract_quarters(s)))
            .collect();
        let mut rows = Vec::new();
        let mut excluded = Vec::new();
        for (s, r) in results {
            match r {
                Ok(mut rs) => rows.append(&mut rs),
                Err(e) => {
                    log::warn!("excluding {s}: {e}");
                    excluded.push((s, e));
                }
            }
        }
        (rows, excluded)
    }

    /// Features of `subreddit` over `span`, using only records dated at or before `span.end`.
    pub fn extract(
        &self,
        subreddit: &str,
        span: Span,
        quarter: Option<u8>,
    ) -> Result<FeatureRow, FeatureError> {
        let cutoff = span.end;
        let corpus = self.corpus;
        let months: Vec<YearMonth> = span.months().collect();
        let slices: Vec<_> = months
            .iter()
            .filter_map(|m| {
                self.states
                    .get(&StateId::new(subreddit, *m))
                    .map(|s| (*m, s))
            })
            .collect();
        let comments: Vec<_> = slices
            .iter()
            .flat_map(|(_, s)| s.comments.iter().map(|&i| &corpus.comments()[i]))
            .collect();
        let posts: Vec<_> = slices
            .iter()
            .flat_map(|(_, s)| s.posts.iter().map(|&i| &corpus.posts()[i]))
            .collect();
        let active: BTreeSet<&str> = slices
            .iter()
            .flat_map(|(_, s)| s.active_users.iter().map(String::as_str))
            .collect();

        let mut out = Values::default();

        // community
        let commenters: BTreeSet<&str> = comments
            .iter()
            .filter(|c| c.has_live_author())
            .map(|c| c.author.as_str())
            .collect();
        out.put("active_commenters", commenters.len() as f64);
        out.put("posts", posts.len() as f64);
        out.put("comments", comments.len() as f64);
        let mut per_user: HashMap<&str, f64> = HashMap::new();
        for a in comments
            .iter()
            .filter(|c| c.has_live_author())
            .map(|c| c.author.as_str())
            .chain(
                posts
                    .iter()
                    .filter(|p| p.has_live_author())
                    .map(|p| p.author.as_str()),
            )
        {
            *per_user.entry(a).or_default() += 1.0;
        }
        let first_users = self
            .states
            .get(&StateId::new(subreddit, span.start))
            .map_or(0, |s| s.active_users.len());
        let last_users = self
            .states
            .get(&StateId::new(subreddit, span.end))
            .map_or(0, |s| s.active_users.len());
        out.put(
            "active_user_growth",
            (last_users as f64 - first_users as f64) / first_users.max(1) as f64,
        );
        let mut controversial_by_post: HashMap<&str, f64> =
            posts.iter().map(|p| (p.id.as_str(), 0.0)).collect();
        for c in comments.iter().filter(|c| c.controversial) {
            if let Some(parent) = c.parent_id.as_deref() {
                let bare = parent
                    .strip_prefix("t3_")
                    .or_else(|| parent.strip_prefix("t1_"))
                    .unwrap_or(parent);
                if let Some(n) = controversial_by_post.get_mut(bare) {
                    *n += 1.0;
                }
            }
        }
        out.put(
            "controversial_comments",
            comments.iter().filter(|c| c.controversial).count() as f64,
        );
        out.put(
            "gilded_comments",
            comments.iter().filter(|c| c.gilded).count() as f64,
        );
        out.moments("activity_per_user", per_user.values().copied().collect());
        out.moments(
            "comment_score",
            comments.iter().map(|c| c.score as f64).collect(),
        );
        out.moments(
            "controversial_per_post",
            controversial_by_post.values().copied().collect(),
        );

        // moderators
        let roster: Vec<_> = corpus
            .moderators()
            .iter()
            .filter(|m| m.subreddit == subreddit && m.start_month <= cutoff)
            .collect();
        let serving: BTreeSet<&str> = roster
            .iter()
            .filter(|m| m.serving_at(cutoff))
            .map(|m| m.user.as_str())
            .collect();
        let incoming = roster
            .iter()
            .filter(|m| span.contains(m.start_month))
            .count();
        let outgoing = roster
            .iter()
            .filter(|m| m.end_month.is_some_and(|e| span.contains(e)))
            .count();
        let mod_scores: Vec<f64> = comments
            .iter()
            .filter(|c| {
                let m = c.month();
                roster.iter().any(|r| r.user == c.author && r.serving_at(m))
            })
            .map(|c| c.score as f64)
            .collect();
        out.moments("moderator_comment_score", mod_scores);
        out.put("moderators", serving.len() as f64);
        out.put("incoming_moderators", incoming as f64);
        out.put("outgoing_moderators", outgoing as f64);
        out.put(
            "automoderator_comments",
            comments
                .iter()
                .filter(|c| c.author == AUTOMODERATOR)
                .count() as f64,
        );
        let removed_posts: Vec<_> = posts.iter().filter(|p| p.removed).collect();
        out.put("removed_posts", removed_posts.len() as f64);
        out.put(
            "removed_posts_score",
            removed_posts.iter().map(|p| p.score as f64).sum(),
        );
        let removed_comments = comments.iter().filter(|c| c.removed).count();
        out.put(
            "removed_comments_rate",
            ratio(removed_comments as u64, comments.len() as u64),
        );

        // users
        let sid = self.subreddit_ids.get(subreddit).copied();
        let mut active_months_total = 0usize;
        for u in &active {
            let acts = &self.user_activity[*u];
            active_months_total += acts
                .iter()
                .filter(|(s, m)| Some(*s) == sid && *m <= cutoff)
                .count();
        }
        out.put(
            "mean_active_months",
            ratio(active_months_total as u64, active.len() as u64),
        );
        out.put(
            "deleted_account_comments",
            comments.iter().filter(|c| !c.has_live_author()).count() as f64,
        );

        // structural
        let structural = self.structural(sid, &active, span);
        out.put("connected_communities", structural.connected as f64);
        out.put("total_connections", structural.total as f64);
        out.put("users_connected_to_banned", structural.banned_users as f64);

        // mentions
        let mention = |source: MentionSource, negative: bool| {
            corpus
                .mentions()
                .iter()
                .filter(|m| {
                    m.target_subreddit == subreddit && m.date <= cutoff && m.source == source
                })
                .filter(|m| !negative || m.sentiment == Sentiment::Negative)
                .count() as f64
        };
        let mentions = [
            (
                "community_mentions",
                mention(MentionSource::Community, false),
            ),
            (
                "negative_community_mentions",
                mention(MentionSource::Community, true),
            ),
            ("news_mentions", mention(MentionSource::News, false)),
            ("negative_news_mentions", mention(MentionSource::News, true)),
        ];
        for (k, v) in mentions {
            out.put(k, v);
        }

        // language
        let mut lang = StateLanguage {
            categories: vec![0; self.lexicon.categories.len()],
            ..Default::default()
        };
        for (m, _) in &slices {
            if let Some(l) = self.language.get(&StateId::new(subreddit, *m)) {
                lang.tokens += l.tokens;
                lang.toxic += l.toxic;
                for (a, b) in lang.categories.iter_mut().zip(&l.categories) {
                    *a += b;
                }
            }
        }
        for (name, n) in self.lexicon.categories.keys().zip(&lang.categories) {
            out.put(&format!("lex_{name}"), ratio(*n, lang.tokens));
        }
        out.put("toxic_comments", lang.toxic as f64);
        out.put("toxic_rate", ratio(lang.toxic, comments.len() as u64));

        // vocabulary
        let similarity = self.banned_vocab_similarity(subreddit, span)?;
        out.put("banned_vocab_similarity", similarity);

        let mut values = out.0;
        let mut flags = BTreeSet::new();
        if comments.is_empty() && posts.is_empty() {
            flags.insert(RowFlag::EmptyActivity);
            values.values_mut().for_each(|v| *v = 0.0);
        }
        // roster availability is itself judged as of the cutoff
        if !corpus.moderators().iter().any(|m| m.start_month <= cutoff) {
            flags.insert(RowFlag::ModeratorsUnavailable);
        }
        if quarter.is_none() && span.start == span.end {
            flags.insert(RowFlag::SingleMonthSpan);
        }
        // normalize negative zero so rows serialize identically
        values.values_mut().for_each(|v| *v += 0.0);
        debug_assert!(values.values().all(|v| v.is_finite()));
        Ok(FeatureRow {
            subreddit: subreddit.to_string(),
            span,
            quarter,
            label: self.label(subreddit),
            values,
            flags,
        })
    }

    fn is_banned_by(&self, sid: u32, cutoff: YearMonth) -> bool {
        self.interventions
            .get(&self.subreddit_names[sid as usize])
            .is_some_and(|m| *m <= cutoff)
    }

    fn structural(&self, sid: Option<u32>, active: &BTreeSet<&str>, span: Span) -> Structural {
        let mut connected: BTreeSet<u32> = BTreeSet::new();
        let mut out = Structural::default();
        for u in active {
            let acts = &self.user_activity[*u];
            let others: BTreeSet<u32> = acts
                .iter()
                .filter(|(s, m)| Some(*s) != sid && span.contains(*m))
                .map(|(s, _)| *s)
                .collect();
            out.total += others.len();
            connected.extend(others);
            if acts
                .iter()
                .any(|(s, m)| Some(*s) != sid && *m <= span.end && self.is_banned_by(*s, span.end))
            {
                out.banned_users += 1;
            }
        }
        out.connected = connected.len();
        out
    }

    fn cutoff_vocabulary(&self, cutoff: YearMonth) -> Result<Arc<CutoffVocabulary>, FeatureError> {
        if let Some(v) = self.vocab_cache.lock().expect("cache lock").get(&cutoff) {
            return Ok(Arc::clone(v));
        }
        let docs: Vec<_> = self
            .documents
            .iter()
            .filter(|(id, _)| id.month <= cutoff)
            .map(|(id, terms)| crate::vectors::StateDocument {
                state: id.clone(),
                terms: terms.clone(),
            })
            .collect();
        let token_corpus = match build_token_corpus(&docs, cutoff) {
            Ok(c) => Some(c),
            Err(VectorError::EmptyCorpus(_)) => None,
            Err(e) => return Err(e.into()),
        };
        let mut banned = Vec::new();
        if let Some(tc) = &token_corpus {
            for (sub, m) in &self.interventions {
                if *m > cutoff {
                    continue;
                }
                let mut terms = BTreeMap::new();
                for d in docs.iter().filter(|d| &d.state.subreddit == sub) {
                    accumulate_terms(&mut terms, &d.terms);
                }
                banned.push((sub.clone(), tfidf(&terms, tc)));
            }
        }
        let entry = Arc::new(CutoffVocabulary {
            corpus: token_corpus,
            banned,
        });
        self.vocab_cache
            .lock()
            .expect("cache lock")
            .insert(cutoff, Arc::clone(&entry));
        Ok(entry)
    }

    /// Mean cosine similarity between the span's vocabulary vector and those
    /// of other communities intervened on by the cutoff. Zero vectors count as 0.
    fn banned_vocab_similarity(&self, subreddit: &str, span: Span) -> Result<f64, FeatureError> {
        let vocab = self.cutoff_vocabulary(span.end)?;
        let Some(tc) = &vocab.corpus else {
            return Ok(0.0);
        };
        let others: Vec<&SparseVector> = vocab
            .banned
            .iter()
            .filter(|(s, _)| s != subreddit)
            .map(|(_, v)| v)
            .collect();
        if others.is_empty() {
            return Ok(0.0);
        }
        let mut terms = BTreeMap::new();
        for m in span.months() {
            if let Some(t) = self.documents.get(&StateId::new(subreddit, m)) {
                accumulate_terms(&mut terms, t);
            }
        }
        let v = tfidf(&terms, tc);
        let total: f64 = others
            .iter()
            .map(|b| cosine_similarity(&v, b).unwrap_or(0.0))
            .sum();
        Ok(total / others.len() as f64)
    }
}

#[derive(Default)]
struct Values(BTreeMap<String, f64>);

impl Values {
    fn put(&mut self, name: &str, v: f64) {
        self.0.insert(name.to_string(), v);
    }

    fn moments(&mut self, prefix: &str, mut sample: Vec<f64>) {
        self.0.extend(Moments::of(&mut sample).named(prefix));
    }
}

#[derive(Debug, Default)]
struct Structural {
    connected: usize,
    total: usize,
    banned_users: usize,
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}
