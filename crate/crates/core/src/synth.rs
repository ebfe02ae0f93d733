//! Synthetic corpora with planted structure.
//!
//! [`generate`] builds a community corpus in which a set of "problematic"
//! communities receive elevated user inflow from early-banned communities,
//! a higher rate of toxic-lexicon comments, more negative mentions, and a
//! drifting vocabulary. [`random_fixture`] builds small unstructured corpora
//! for property checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    CommentRecord, Corpus, CorpusError, IngestReport, InterventionAction, InterventionRecord,
    MentionRecord, MentionSource, ModeratorRecord, PostRecord, RecordKind, Sentiment,
    AUTOMODERATOR,
};
use crate::features::{DEMO_LEXICON, TOXIC_LEXICON};
use crate::time::{MonthWindow, YearMonth};

/// Records of every kind, in ingestion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordSet {
    pub comments: Vec<CommentRecord>,
    pub posts: Vec<PostRecord>,
    pub interventions: Vec<InterventionRecord>,
    pub mentions: Vec<MentionRecord>,
    pub moderators: Vec<ModeratorRecord>,
}

fn ndjson<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

impl RecordSet {
    /// NDJSON text of one record kind.
    pub fn to_ndjson(&self, kind: RecordKind) -> String {
        match kind {
            RecordKind::Comment => ndjson(&self.comments),
            RecordKind::Post => ndjson(&self.posts),
            RecordKind::Intervention => ndjson(&self.interventions),
            RecordKind::Mention => ndjson(&self.mentions),
            RecordKind::Moderator => ndjson(&self.moderators),
        }
    }

    pub fn ingest_into(&self, corpus: &mut Corpus) -> Result<IngestReport, CorpusError> {
        let mut report = IngestReport::default();
        for kind in RecordKind::ALL {
            report.merge(&corpus.ingest_str(&self.to_ndjson(kind), kind)?);
        }
        Ok(report)
    }

    pub fn to_corpus(&self, window: MonthWindow) -> Result<Corpus, CorpusError> {
        let mut c = Corpus::new(window);
        self.ingest_into(&mut c)?;
        Ok(c)
    }

    /// Writes `<kind>s.ndjson` for every kind into `dir`.
    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for kind in RecordKind::ALL {
            let mut f = BufWriter::new(fs::File::create(dir.join(format!("{kind}s.ndjson")))?);
            f.write_all(self.to_ndjson(kind).as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }

    pub fn extend(&mut self, other: RecordSet) {
        self.comments.extend(other.comments);
        self.posts.extend(other.posts);
        self.interventions.extend(other.interventions);
        self.mentions.extend(other.mentions);
        self.moderators.extend(other.moderators);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub start: YearMonth,
    pub months: usize,
    /// Studied communities, problematic ones included.
    pub communities: usize,
    pub problematic: usize,
    /// How many of the problematic interventions are quarantines rather than bans.
    pub quarantined: usize,
    /// Communities active and banned in the first months, before the studied ones mature.
    pub legacy: usize,
    pub min_members: usize,
    pub max_members: usize,
    /// Probability a member is active in a given month.
    pub activity: f64,
    /// Mean extra comments per active member and month (at least one is written).
    pub extra_comments: f64,
    /// Share of a community's members recruited from banned-community users.
    pub inflow_problematic: f64,
    pub inflow_clean: f64,
    pub toxic_problematic: f64,
    pub toxic_clean: f64,
    pub mentions_per_month: f64,
    pub negative_share_problematic: f64,
    pub negative_share_clean: f64,
    /// Problematic communities change topic every month.
    pub vocabulary_drift: bool,
    /// A second violation family appearing part-way through the window.
    #[serde(default)]
    pub shift: Option<PolicyShift>,
}

/// Communities of a new violation family: clean on every planted signal but
/// with a high share of moderator-removed comments, each intervened on a few
/// months after it appears.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyShift {
    /// Month offset (from the window start) of the first such community.
    pub onset: usize,
    pub communities: usize,
    /// Months over which first appearances are spread.
    pub spread: usize,
    pub removed_rate: f64,
    pub min_lifetime: usize,
    pub max_lifetime: usize,
}

impl Default for PolicyShift {
    fn default() -> Self {
        Self {
            onset: 8,
            communities: 12,
            spread: 10,
            removed_rate: 0.4,
            min_lifetime: 3,
            max_lifetime: 5,
        }
    }
}

impl SynthConfig {
    /// Stream used for continuous-learning runs: the default corpus plus a
    /// policy-shift family.
    pub fn policy_shift() -> Self {
        Self {
            communities: 40,
            problematic: 8,
            quarantined: 0,
            shift: Some(PolicyShift::default()),
            ..Self::default()
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            start: YearMonth::new(2018, 1).expect("valid month"),
            months: 24,
            communities: 60,
            problematic: 10,
            quarantined: 2,
            legacy: 3,
            min_members: 60,
            max_members: 180,
            activity: 0.55,
            extra_comments: 1.5,
            inflow_problematic: 0.3,
            inflow_clean: 0.03,
            toxic_problematic: 0.2,
            toxic_clean: 0.03,
            mentions_per_month: 4.0,
            negative_share_problematic: 0.75,
            negative_share_clean: 0.1,
            vocabulary_drift: true,
            shift: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub config: SynthConfig,
    pub window: MonthWindow,
    pub records: RecordSet,
    pub studied: BTreeSet<String>,
    pub problematic: BTreeSet<String>,
    pub legacy: BTreeSet<String>,
    /// Policy-shift family members (also in `studied`, not in `problematic`).
    pub shifted: BTreeSet<String>,
}

impl SyntheticCorpus {
    pub fn corpus(&self) -> Result<Corpus, CorpusError> {
        self.records.to_corpus(self.window)
    }
}

/// Feature names carrying the planted signals.
pub const PLANTED_SIGNALS: [&str; 3] = [
    "users_connected_to_banned",
    "toxic_rate",
    "negative_community_mentions",
];

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "re", "tu", "sa", "ne", "vo", "di", "pe", "zu", "ga", "bo", "fi", "ru", "te",
];

/// Deterministic pseudo-word for an index.
fn pseudo_word(i: usize) -> String {
    let n = SYLLABLES.len();
    format!(
        "{}{}{}",
        SYLLABLES[i % n],
        SYLLABLES[(i / n) % n],
        SYLLABLES[(i / n / n) % n]
    )
}

/// Raw words of a shipped lexicon file (prefix markers dropped).
fn lexicon_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut header = true;
    for line in text.lines().map(str::trim) {
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            header = true;
            continue;
        }
        if header {
            header = false;
            continue;
        }
        out.push(line.trim_end_matches('*').to_string());
    }
    out
}

struct Vocab {
    general: Vec<String>,
    topics: Vec<Vec<String>>,
    style: Vec<String>,
    toxic: Vec<String>,
}

impl Vocab {
    fn new() -> Self {
        const GENERAL: usize = 300;
        const TOPICS: usize = 20;
        const TOPIC_WORDS: usize = 15;
        Self {
            general: (0..GENERAL).map(pseudo_word).collect(),
            topics: (0..TOPICS)
                .map(|t| {
                    (0..TOPIC_WORDS)
                        .map(|w| pseudo_word(GENERAL + t * TOPIC_WORDS + w))
                        .collect()
                })
                .collect(),
            style: lexicon_words(DEMO_LEXICON),
            toxic: lexicon_words(TOXIC_LEXICON),
        }
    }

    fn sentence(
        &self,
        rng: &mut ChaCha8Rng,
        topic: usize,
        style_rate: f64,
        toxic: bool,
        len: usize,
    ) -> String {
        let mut words: Vec<&str> = (0..len)
            .map(|_| {
                let r: f64 = rng.gen();
                if r < style_rate {
                    self.style.choose(rng).expect("nonempty")
                } else if r < style_rate + 0.35 {
                    self.topics[topic].choose(rng).expect("nonempty")
                } else {
                    self.general.choose(rng).expect("nonempty")
                }
            })
            .map(String::as_str)
            .collect();
        if toxic {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, self.toxic.choose(rng).expect("nonempty"));
        }
        words.join(" ")
    }
}

fn timestamp(rng: &mut ChaCha8Rng, m: YearMonth) -> i64 {
    m.start_epoch_seconds() + rng.gen_range(0..28 * 86_400)
}

struct Community {
    name: String,
    members: Vec<String>,
    topic: usize,
    style_rate: f64,
    toxic_rate: f64,
    removed_rate: f64,
    first: YearMonth,
    /// Last month with activity.
    last: YearMonth,
    problematic: bool,
    legacy: bool,
    intervention: Option<(InterventionAction, YearMonth)>,
}

/// Generate the planted-signal corpus.
pub fn generate(config: &SynthConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = Vocab::new();
    let start = config.start;
    let end = start.offset(config.months as i64 - 1);
    let window = MonthWindow::new(start, end).expect("start <= end");

    // user pools
    let hateful: Vec<String> = (0..400).map(|i| format!("h{i:04}")).collect();
    let general_pool = config.communities * config.max_members;
    let mut next_general = 0usize;
    let mut fresh_user = |rng: &mut ChaCha8Rng| -> String {
        // most users belong to one community, some are shared
        if next_general > 0 && rng.gen_bool(0.2) {
            format!("u{:05}", rng.gen_range(0..next_general))
        } else {
            next_general += 1;
            format!("u{:05}", (next_general - 1) % general_pool)
        }
    };

    let mut names: Vec<String> = (0..config.communities)
        .map(|i| format!("sub_{i:02}"))
        .collect();
    names.shuffle(&mut rng);
    let problematic: BTreeSet<String> = names.iter().take(config.problematic).cloned().collect();
    names.sort();

    let mut communities = Vec::new();
    for l in 0..config.legacy {
        let members: Vec<String> = hateful.choose_multiple(&mut rng, 150).cloned().collect();
        let last = start.offset(2.min(config.months as i64 - 1));
        communities.push(Community {
            name: format!("legacy_{l}"),
            members,
            topic: rng.gen_range(0..vocab.topics.len()),
            style_rate: rng.gen_range(0.02..0.08),
            toxic_rate: 0.4,
            removed_rate: 0.03,
            first: start,
            last,
            problematic: true,
            legacy: true,
            intervention: Some((InterventionAction::Ban, last)),
        });
    }
    let mut quarantines_left = config.quarantined;
    for name in &names {
        let is_problematic = problematic.contains(name);
        let size = rng.gen_range(config.min_members..=config.max_members);
        let inflow = if is_problematic {
            config.inflow_problematic
        } else {
            config.inflow_clean
        };
        let n_hateful = (size as f64 * inflow).round() as usize;
        let mut members: Vec<String> = hateful
            .choose_multiple(&mut rng, n_hateful)
            .cloned()
            .collect();
        while members.len() < size {
            members.push(fresh_user(&mut rng));
        }
        members.sort();
        members.dedup();
        let first = start.offset(rng.gen_range(0..6.min(config.months as i64)));
        let (last, intervention) = if is_problematic {
            let earliest = (first.offset(11)).min(end);
            let m = earliest.offset(rng.gen_range(0..=earliest.months_until(end)));
            if quarantines_left > 0 {
                quarantines_left -= 1;
                (end, Some((InterventionAction::Quarantine, m)))
            } else {
                (m, Some((InterventionAction::Ban, m)))
            }
        } else {
            (end, None)
        };
        let toxic_rate = if is_problematic {
            (config.toxic_problematic + rng.gen_range(-0.05..0.05)).max(0.0)
        } else {
            (config.toxic_clean + rng.gen_range(-0.015..0.015)).max(0.0)
        };
        communities.push(Community {
            name: name.clone(),
            members,
            topic: rng.gen_range(0..vocab.topics.len()),
            style_rate: rng.gen_range(0.02..0.08),
            toxic_rate,
            removed_rate: 0.03,
            first,
            last,
            problematic: is_problematic,
            legacy: false,
            intervention,
        });
    }
    let mut shifted = BTreeSet::new();
    if let Some(shift) = &config.shift {
        for i in 0..shift.communities {
            let name = format!("shift_{i:02}");
            let size = rng.gen_range(config.min_members..=config.max_members);
            let members: Vec<String> = (0..size)
                .map(|_| fresh_user(&mut rng))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let first =
                start.offset((shift.onset + i * shift.spread / shift.communities.max(1)) as i64);
            let last = first.offset(rng.gen_range(shift.min_lifetime..=shift.max_lifetime) as i64);
            if last > end {
                continue;
            }
            shifted.insert(name.clone());
            communities.push(Community {
                name,
                members,
                topic: rng.gen_range(0..vocab.topics.len()),
                style_rate: rng.gen_range(0.02..0.08),
                toxic_rate: (config.toxic_clean + rng.gen_range(-0.015..0.015)).max(0.0),
                removed_rate: shift.removed_rate,
                first,
                last,
                problematic: false,
                legacy: false,
                intervention: Some((InterventionAction::Ban, last)),
            });
        }
    }

    let mut records = RecordSet::default();
    let extra = Poisson::new(config.extra_comments.max(1e-9)).expect("positive rate");
    let mentions = Poisson::new(config.mentions_per_month.max(1e-9)).expect("positive rate");
    let news = Poisson::new(0.5).expect("positive rate");
    let (mut n_comments, mut n_posts) = (0usize, 0usize);
    for c in &communities {
        // moderators: a few members from the start, one change later on
        let mut mods: Vec<&String> = c.members.choose_multiple(&mut rng, 3).collect();
        mods.sort();
        for (k, u) in mods.iter().enumerate() {
            let leaves = k == 0 && c.first.months_until(c.last) > 6;
            records.moderators.push(ModeratorRecord {
                subreddit: c.name.clone(),
                user: (*u).clone(),
                start_month: c.first,
                end_month: leaves.then(|| c.first.offset(6)),
            });
        }
        if c.first.months_until(c.last) > 6 {
            if let Some(u) = c.members.choose(&mut rng) {
                records.moderators.push(ModeratorRecord {
                    subreddit: c.name.clone(),
                    user: u.clone(),
                    start_month: c.first.offset(7),
                    end_month: None,
                });
            }
        }
        if let Some((action, date)) = c.intervention {
            records.interventions.push(InterventionRecord {
                subreddit: c.name.clone(),
                action,
                date,
            });
        }

        for m in YearMonth::range_inclusive(c.first, c.last) {
            let topic = if c.problematic && !c.legacy && config.vocabulary_drift {
                rng.gen_range(0..vocab.topics.len())
            } else {
                c.topic
            };
            let active: Vec<&String> = c
                .members
                .iter()
                .filter(|_| rng.gen_bool(config.activity))
                .collect();
            let mut post_ids = Vec::new();
            for _ in 0..(active.len() / 4).max(1) {
                let author = active
                    .choose(&mut rng)
                    .map_or_else(|| c.members[0].clone(), |a| (*a).clone());
                let id = format!("p{n_posts}");
                n_posts += 1;
                let len = rng.gen_range(4..9);
                records.posts.push(PostRecord {
                    id: id.clone(),
                    author,
                    subreddit: c.name.clone(),
                    created: timestamp(&mut rng, m),
                    title: vocab.sentence(&mut rng, topic, c.style_rate, false, len),
                    score: rng.gen_range(0..100),
                    removed: rng.gen_bool(0.03),
                    author_deleted: false,
                });
                post_ids.push(id);
            }
            for author in &active {
                let n = 1 + extra.sample(&mut rng) as usize;
                for _ in 0..n {
                    let toxic = rng.gen_bool(c.toxic_rate.min(1.0));
                    let deleted = rng.gen_bool(0.02);
                    let len = rng.gen_range(8..20);
                    records.comments.push(CommentRecord {
                        id: format!("c{n_comments}"),
                        author: if deleted {
                            "[deleted]".into()
                        } else {
                            (*author).clone()
                        },
                        subreddit: c.name.clone(),
                        created: timestamp(&mut rng, m),
                        body: vocab.sentence(&mut rng, topic, c.style_rate, toxic, len),
                        score: rng.gen_range(-5..60),
                        parent_id: if rng.gen_bool(0.7) {
                            post_ids.choose(&mut rng).map(|p| format!("t3_{p}"))
                        } else {
                            None
                        },
                        removed: rng.gen_bool(c.removed_rate),
                        author_deleted: deleted,
                        gilded: rng.gen_bool(0.01),
                        controversial: rng.gen_bool(0.05),
                    });
                    n_comments += 1;
                }
            }
            for _ in 0..2 {
                records.comments.push(CommentRecord {
                    id: format!("c{n_comments}"),
                    author: AUTOMODERATOR.into(),
                    subreddit: c.name.clone(),
                    created: timestamp(&mut rng, m),
                    body: "your submission was reviewed".into(),
                    score: 1,
                    parent_id: post_ids.choose(&mut rng).map(|p| format!("t3_{p}")),
                    removed: false,
                    author_deleted: false,
                    gilded: false,
                    controversial: false,
                });
                n_comments += 1;
            }
            if c.legacy {
                continue;
            }
            let neg_share = if c.problematic {
                config.negative_share_problematic
            } else {
                config.negative_share_clean
            };
            for _ in 0..mentions.sample(&mut rng) as usize {
                records.mentions.push(MentionRecord {
                    target_subreddit: c.name.clone(),
                    source: MentionSource::Community,
                    date: m,
                    sentiment: if rng.gen_bool(neg_share) {
                        Sentiment::Negative
                    } else {
                        Sentiment::Other
                    },
                });
            }
            for _ in 0..news.sample(&mut rng) as usize {
                records.mentions.push(MentionRecord {
                    target_subreddit: c.name.clone(),
                    source: MentionSource::News,
                    date: m,
                    sentiment: if rng.gen_bool(0.3) {
                        Sentiment::Negative
                    } else {
                        Sentiment::Other
                    },
                });
            }
        }
    }
    log::info!(
        "generated {} comments, {} posts over {} communities",
        records.comments.len(),
        records.posts.len(),
        communities.len()
    );
    SyntheticCorpus {
        config: config.clone(),
        window,
        records,
        studied: names.into_iter().chain(shifted.iter().cloned()).collect(),
        problematic,
        legacy: communities
            .iter()
            .filter(|c| c.legacy)
            .map(|c| c.name.clone())
            .collect(),
        shifted,
    }
}

/// A small unstructured corpus over 2019: a handful of communities, users,
/// and records of every kind at random dates. Used for property checks.
pub fn random_fixture(seed: u64) -> (MonthWindow, RecordSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = YearMonth::new(2019, 1).expect("valid month");
    let window = MonthWindow::new(start, start.offset(11)).expect("valid window");
    let vocab = Vocab::new();
    let subs: Vec<String> = (0..rng.gen_range(2..6)).map(|i| format!("s{i}")).collect();
    let users: Vec<String> = (0..rng.gen_range(3..12))
        .map(|i| format!("user{i}"))
        .collect();
    let month = |rng: &mut ChaCha8Rng| start.offset(rng.gen_range(0..12));
    let mut r = RecordSet::default();
    for i in 0..rng.gen_range(5..15) {
        let m = month(&mut rng);
        r.posts.push(PostRecord {
            id: format!("p{i}"),
            author: users.choose(&mut rng).expect("users").clone(),
            subreddit: subs.choose(&mut rng).expect("subs").clone(),
            created: timestamp(&mut rng, m),
            title: vocab.sentence(&mut rng, 0, 0.2, false, 4),
            score: rng.gen_range(-3..30),
            removed: rng.gen_bool(0.2),
            author_deleted: rng.gen_bool(0.1),
        });
    }
    let n_posts = r.posts.len();
    for i in 0..rng.gen_range(10..60) {
        let m = month(&mut rng);
        let topic = rng.gen_range(0..vocab.topics.len());
        let toxic = rng.gen_bool(0.3);
        let len = rng.gen_range(1..10);
        r.comments.push(CommentRecord {
            id: format!("c{i}"),
            author: if rng.gen_bool(0.1) {
                "[deleted]".into()
            } else if rng.gen_bool(0.05) {
                AUTOMODERATOR.into()
            } else {
                users.choose(&mut rng).expect("users").clone()
            },
            subreddit: subs.choose(&mut rng).expect("subs").clone(),
            created: timestamp(&mut rng, m),
            body: vocab.sentence(&mut rng, topic, 0.3, toxic, len),
            score: rng.gen_range(-10..40),
            parent_id: rng
                .gen_bool(0.6)
                .then(|| format!("t3_p{}", rng.gen_range(0..n_posts))),
            removed: rng.gen_bool(0.1),
            author_deleted: false,
            gilded: rng.gen_bool(0.1),
            controversial: rng.gen_bool(0.3),
        });
    }
    let mut banned: BTreeMap<String, YearMonth> = BTreeMap::new();
    for s in &subs {
        if rng.gen_bool(0.4) {
            let m = month(&mut rng);
            banned.insert(s.clone(), m);
            r.interventions.push(InterventionRecord {
                subreddit: s.clone(),
                action: if rng.gen_bool(0.7) {
                    InterventionAction::Ban
                } else {
                    InterventionAction::Quarantine
                },
                date: m,
            });
        }
    }
    for _ in 0..rng.gen_range(0..10) {
        r.mentions.push(MentionRecord {
            target_subreddit: subs.choose(&mut rng).expect("subs").clone(),
            source: if rng.gen_bool(0.5) {
                MentionSource::Community
            } else {
                MentionSource::News
            },
            date: month(&mut rng),
            sentiment: if rng.gen_bool(0.5) {
                Sentiment::Negative
            } else {
                Sentiment::Other
            },
        });
    }
    for _ in 0..rng.gen_range(0..5) {
        let s = month(&mut rng);
        r.moderators.push(ModeratorRecord {
            subreddit: subs.choose(&mut rng).expect("subs").clone(),
            user: users.choose(&mut rng).expect("users").clone(),
            start_month: s,
            end_month: rng.gen_bool(0.5).then(|| s.offset(rng.gen_range(0..4))),
        });
    }
    (window, r)
}

/// Records of `set` dated strictly after `cutoff`, re-keyed so that their ids
/// cannot collide with existing ones. Moderator tenures count as dated by
/// their start month.
pub fn shifted_after(
    set: &RecordSet,
    cutoff: YearMonth,
    window: MonthWindow,
    tag: &str,
) -> RecordSet {
    let after = |m: YearMonth| m > cutoff && window.contains(m);
    let mut out = RecordSet::default();
    for c in &set.comments {
        let m = c.month();
        if after(m) {
            out.comments.push(CommentRecord {
                id: format!("{tag}{}", c.id),
                ..c.clone()
            });
        }
    }
    for p in &set.posts {
        if after(p.month()) {
            out.posts.push(PostRecord {
                id: format!("{tag}{}", p.id),
                ..p.clone()
            });
        }
    }
    out.interventions = set
        .interventions
        .iter()
        .filter(|i| after(i.date))
        .cloned()
        .collect();
    out.mentions = set
        .mentions
        .iter()
        .filter(|i| after(i.date))
        .cloned()
        .collect();
    out.moderators = set
        .moderators
        .iter()
        .filter(|i| after(i.start_month))
        .cloned()
        .collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_words_are_distinct() {
        let words: BTreeSet<String> = (0..600).map(pseudo_word).collect();
        assert_eq!(words.len(), 600);
    }

    #[test]
    fn random_fixture_is_deterministic_and_ingests() {
        let (w, a) = random_fixture(3);
        let (_, b) = random_fixture(3);
        assert_eq!(a, b);
        let c = a.to_corpus(w).unwrap();
        assert_eq!(c.comments().len(), a.comments.len());
    }

    #[test]
    fn small_generated_corpus_has_planted_labels() {
        let cfg = SynthConfig {
            communities: 8,
            problematic: 2,
            quarantined: 1,
            min_members: 10,
            max_members: 20,
            ..SynthConfig::default()
        };
        let s = generate(&cfg);
        let corpus = s.corpus().unwrap();
        let intervened = corpus.intervention_months();
        for p in &s.problematic {
            assert!(intervened.contains_key(p));
        }
        assert_eq!(intervened.len(), 2 + cfg.legacy);
        assert_eq!(corpus.comments().len(), s.records.comments.len());
    }
}
