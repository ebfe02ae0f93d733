//! Where the service gets monthly feature rows and evolution series from.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use modwatch_core::corpus::{sample_comments, Corpus, Tokenizer};
use modwatch_core::distance::{evolution_series, EvolutionSeries};
use modwatch_core::features::{FeatureContext, FeatureRow};
use modwatch_core::models::{ModelError, MonthlySource};
use modwatch_core::vectors::{
    active_user_vectors, build_documents, build_token_corpus, vocabulary_vectors, VectorSet,
};
use modwatch_core::{MonthWindow, YearMonth};
use sha2::{Digest, Sha256};

/// A [`MonthlySource`] that can also describe a community's evolution.
pub trait CommunitySource: MonthlySource + Send + Sync {
    /// Identifies the underlying data so a log is never replayed against a
    /// different corpus.
    fn fingerprint(&self) -> String;

    /// Consecutive-month distance series of `subreddit`, truncated at `month`.
    fn evolution(&self, _subreddit: &str, _month: YearMonth) -> Vec<EvolutionSeries> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolutionOptions {
    pub sample_fraction: f64,
    pub sample_seed: u64,
    pub persistence: f64,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self {
            sample_fraction: 0.1,
            sample_seed: 0,
            persistence: 0.98,
        }
    }
}

/// Corpus-backed source. Vector sets are built on first use.
pub struct CorpusSource {
    ctx: FeatureContext<'static>,
    fingerprint: String,
    options: EvolutionOptions,
    users: OnceLock<VectorSet>,
    vocabulary: OnceLock<Option<VectorSet>>,
}

impl CorpusSource {
    /// `ctx` must borrow a corpus that lives for the whole process, e.g. one
    /// obtained from `Box::leak`.
    pub fn new(ctx: FeatureContext<'static>, options: EvolutionOptions) -> Self {
        let fingerprint = corpus_fingerprint(ctx.corpus());
        Self {
            ctx,
            fingerprint,
            options,
            users: OnceLock::new(),
            vocabulary: OnceLock::new(),
        }
    }

    pub fn context(&self) -> &FeatureContext<'static> {
        &self.ctx
    }

    fn user_vectors(&self) -> &VectorSet {
        self.users.get_or_init(|| {
            let states = self.ctx.states();
            active_user_vectors(states.iter().map(|(id, s)| (id, &s.active_users))).into_set()
        })
    }

    fn vocabulary_vectors(&self) -> Option<&VectorSet> {
        self.vocabulary
            .get_or_init(|| {
                let corpus = self.ctx.corpus();
                let sample = match sample_comments(
                    corpus.comments(),
                    self.options.sample_fraction,
                    self.options.sample_seed,
                ) {
                    Ok(s) => s,
                    Err(e) => {
                        log::warn!("no vocabulary vectors: {e}");
                        return None;
                    }
                };
                let docs =
                    build_documents(corpus, self.ctx.states(), &sample, &Tokenizer::default());
                match build_token_corpus(&docs, corpus.window().end) {
                    Ok(tc) => Some(vocabulary_vectors(&docs, &tc)),
                    Err(e) => {
                        log::warn!("no vocabulary vectors: {e}");
                        None
                    }
                }
            })
            .as_ref()
    }
}

impl MonthlySource for CorpusSource {
    fn window(&self) -> MonthWindow {
        self.ctx.window()
    }

    fn active(&self, month: YearMonth) -> Vec<String> {
        self.ctx.active(month)
    }

    fn interventions(&self) -> &BTreeMap<String, YearMonth> {
        MonthlySource::interventions(&self.ctx)
    }

    fn row(&self, subreddit: &str, month: YearMonth) -> Result<FeatureRow, ModelError> {
        self.ctx.row(subreddit, month)
    }
}

impl CommunitySource for CorpusSource {
    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn evolution(&self, subreddit: &str, month: YearMonth) -> Vec<EvolutionSeries> {
        let mut sets = vec![self.user_vectors()];
        sets.extend(self.vocabulary_vectors());
        sets.into_iter()
            .filter_map(
                |set| match evolution_series(subreddit, set, self.options.persistence) {
                    Ok(mut s) => {
                        s.points.retain(|p| p.month_to <= month);
                        Some(s)
                    }
                    Err(e) => {
                        log::debug!("no evolution series for {subreddit}: {e}");
                        None
                    }
                },
            )
            .collect()
    }
}

fn corpus_fingerprint(corpus: &Corpus) -> String {
    let mut h = Sha256::new();
    let w = corpus.window();
    h.update(format!("{}..{}\n", w.start, w.end));
    for c in corpus.comments() {
        h.update(&c.id);
        h.update([0]);
    }
    for p in corpus.posts() {
        h.update(&p.id);
        h.update([0]);
    }
    for (sub, m) in corpus.intervention_months() {
        h.update(format!("{sub}\t{m}\n"));
    }
    format!("{:x}", h.finalize())
}
