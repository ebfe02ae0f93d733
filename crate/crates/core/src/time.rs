//! Calendar-month arithmetic.
//!
//! Everything in the pipeline is bucketed by calendar month: subreddit states,
//! quarter boundaries, intervention dates and the leakage clock. `YearMonth`
//! serializes as the `"YYYY-MM"` string used by the input files.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MonthError {
    #[error("invalid year-month {0:?}, expected YYYY-MM")]
    Parse(String),
    #[error("timestamp {0} is out of range")]
    Timestamp(i64),
    #[error("empty window: {start} is after {end}")]
    EmptyWindow { start: YearMonth, end: YearMonth },
}

/// A calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self, MonthError> {
        if !(1..=12).contains(&month) {
            return Err(MonthError::Parse(format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Month containing a UTC epoch-seconds timestamp.
    pub fn from_epoch_seconds(secs: i64) -> Result<Self, MonthError> {
        let dt = DateTime::from_timestamp(secs, 0).ok_or(MonthError::Timestamp(secs))?;
        Ok(Self {
            year: dt.year(),
            month: dt.month(),
        })
    }

    /// Epoch seconds of the first instant of this month (UTC).
    pub fn start_epoch_seconds(self) -> i64 {
        chrono::NaiveDate::from_ymd_opt(self.year, self.month, 1)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(|dt| dt.and_utc().timestamp())
            .unwrap_or(i64::MIN)
    }

    fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn offset(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    pub fn next(self) -> Self {
        self.offset(1)
    }

    pub fn prev(self) -> Self {
        self.offset(-1)
    }

    /// Signed number of months from `self` to `later`.
    pub fn months_until(self, later: YearMonth) -> i64 {
        later.ordinal() - self.ordinal()
    }

    /// Inclusive range of months.
    pub fn range_inclusive(start: YearMonth, end: YearMonth) -> impl Iterator<Item = YearMonth> {
        let (a, b) = (start.ordinal(), end.ordinal());
        (a..=b).map(Self::from_ordinal)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = MonthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || MonthError::Parse(s.to_string());
        let (y, m) = s.trim().split_once('-').ok_or_else(err)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(err());
        }
        let year = y.parse::<i32>().map_err(|_| err())?;
        let month = m.parse::<u32>().map_err(|_| err())?;
        Self::new(year, month).map_err(|_| err())
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive month window, e.g. the corpus window from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthWindow {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthWindow {
    pub fn new(start: YearMonth, end: YearMonth) -> Result<Self, MonthError> {
        if start > end {
            return Err(MonthError::EmptyWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, m: YearMonth) -> bool {
        self.start <= m && m <= self.end
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> {
        YearMonth::range_inclusive(self.start, self.end)
    }

    pub fn len(&self) -> usize {
        (self.start.months_until(self.end) + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        assert_eq!(ym("2019-09").to_string(), "2019-09");
        assert!("2019-13".parse::<YearMonth>().is_err());
        assert!("2019-9".parse::<YearMonth>().is_err());
        assert!("201909".parse::<YearMonth>().is_err());
    }

    #[test]
    fn offsets_cross_year_boundaries() {
        assert_eq!(ym("2019-12").next(), ym("2020-01"));
        assert_eq!(ym("2020-01").prev(), ym("2019-12"));
        assert_eq!(ym("2018-01").offset(27), ym("2020-04"));
        assert_eq!(ym("2018-01").months_until(ym("2020-04")), 27);
    }

    #[test]
    fn epoch_seconds_map_to_months() {
        // 2019-09-15T12:00:00Z
        assert_eq!(
            YearMonth::from_epoch_seconds(1_568_548_800).unwrap(),
            ym("2019-09")
        );
        let start = ym("2019-09").start_epoch_seconds();
        assert_eq!(YearMonth::from_epoch_seconds(start).unwrap(), ym("2019-09"));
        assert_eq!(
            YearMonth::from_epoch_seconds(start - 1).unwrap(),
            ym("2019-08")
        );
    }

    #[test]
    fn window_membership() {
        let w = MonthWindow::new(ym("2018-01"), ym("2018-12")).unwrap();
        assert_eq!(w.len(), 12);
        assert!(w.contains(ym("2018-06")));
        assert!(!w.contains(ym("2019-01")));
        assert!(MonthWindow::new(ym("2019-01"), ym("2018-01")).is_err());
    }
}
