use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::YearMonth;

/// Author value platforms use for accounts that no longer exist.
pub const DELETED_AUTHOR: &str = "[deleted]";
/// Bot account whose comments are counted as a moderator feature.
pub const AUTOMODERATOR: &str = "AutoModerator";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub id: String,
    pub author: String,
    pub subreddit: String,
    /// UTC epoch seconds.
    pub created: i64,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub score: i64,
    #[serde(default)]
    pub parent_id: Option<String>,
    #[serde(default)]
    pub removed: bool,
    #[serde(default)]
    pub author_deleted: bool,
    #[serde(default)]
    pub gilded: bool,
    #[serde(default)]
    pub controversial: bool,
}

impl CommentRecord {
    pub fn month(&self) -> YearMonth {
        // validated at ingestion
        YearMonth::from_epoch_seconds(self.created).expect("validated timestamp")
    }

    /// Whether the author counts towards the active-user set.
    pub fn has_live_author(&self) -> bool {
        !self.author_deleted && self.author != DELETED_AUTHOR && !self.author.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    pub author: String,
    pub subreddit: String,
    pub created: i64,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub score: i64,
    #[serde(default)]
    pub removed: bool,
    #[serde(default)]
    pub author_deleted: bool,
}

impl PostRecord {
    pub fn month(&self) -> YearMonth {
        YearMonth::from_epoch_seconds(self.created).expect("validated timestamp")
    }

    pub fn has_live_author(&self) -> bool {
        !self.author_deleted && self.author != DELETED_AUTHOR && !self.author.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionAction {
    Ban,
    Quarantine,
}

/// Bans and quarantines are both treated as the positive label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub subreddit: String,
    pub action: InterventionAction,
    pub date: YearMonth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionSource {
    Community,
    News,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sentiment {
    Negative,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionRecord {
    pub target_subreddit: String,
    pub source: MentionSource,
    pub date: YearMonth,
    pub sentiment: Sentiment,
}

/// One moderator tenure. `end_month` is inclusive; `None` means still serving.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeratorRecord {
    pub subreddit: String,
    pub user: String,
    pub start_month: YearMonth,
    #[serde(default)]
    pub end_month: Option<YearMonth>,
}

impl ModeratorRecord {
    pub fn serving_at(&self, m: YearMonth) -> bool {
        self.start_month <= m && self.end_month.map_or(true, |e| m <= e)
    }
}

/// Record kinds accepted by `ingest_events`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Comment,
    Post,
    Intervention,
    Mention,
    Moderator,
}

impl RecordKind {
    pub const ALL: [RecordKind; 5] = [
        RecordKind::Comment,
        RecordKind::Post,
        RecordKind::Intervention,
        RecordKind::Mention,
        RecordKind::Moderator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Comment => "comment",
            RecordKind::Post => "post",
            RecordKind::Intervention => "intervention",
            RecordKind::Mention => "mention",
            RecordKind::Moderator => "moderator",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = super::CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = match s.trim().to_ascii_lowercase().trim_end_matches('s') {
            "comment" => RecordKind::Comment,
            "post" => RecordKind::Post,
            "intervention" => RecordKind::Intervention,
            "mention" => RecordKind::Mention,
            "moderator" => RecordKind::Moderator,
            _ => return Err(super::CorpusError::UnknownKind(s.to_string())),
        };
        Ok(k)
    }
}
