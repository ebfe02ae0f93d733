use std::fmt;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::time::YearMonth;

/// Inclusive month span. Its `end` is the cutoff of the leakage clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl Span {
    pub fn new(start: YearMonth, end: YearMonth) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn single(m: YearMonth) -> Self {
        Self { start: m, end: m }
    }

    pub fn cutoff(&self) -> YearMonth {
        self.end
    }

    pub fn contains(&self, m: YearMonth) -> bool {
        self.start <= m && m <= self.end
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> {
        YearMonth::range_inclusive(self.start, self.end)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarterSpan {
    pub subreddit: String,
    /// 1..=4
    pub index: u8,
    pub span: Span,
}

impl QuarterSpan {
    pub fn cutoff(&self) -> YearMonth {
        self.span.end
    }
}

/// Split a lifespan into four contiguous quarters whose sizes differ by at
/// most one month, giving the remainder to the earliest quarters.
pub fn split_quarters(
    subreddit: &str,
    lifespan: &[YearMonth],
) -> Result<[QuarterSpan; 4], FeatureError> {
    if lifespan.len() < 4 {
        return Err(FeatureError::LifespanTooShort {
            subreddit: subreddit.to_string(),
            months: lifespan.len(),
        });
    }
    let (base, extra) = (lifespan.len() / 4, lifespan.len() % 4);
    let mut offset = 0;
    let quarters = std::array::from_fn(|q| {
        let size = base + usize::from(q < extra);
        let span = Span::new(lifespan[offset], lifespan[offset + size - 1]);
        offset += size;
        QuarterSpan {
            subreddit: subreddit.to_string(),
            index: q as u8 + 1,
            span,
        }
    });
    Ok(quarters)
}
