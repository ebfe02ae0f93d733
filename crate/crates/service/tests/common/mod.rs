#![allow(dead_code)]

use std::collections::BTreeMap;

use modwatch_core::features::{FeatureRow, Label, Span};
use modwatch_core::models::{Hyperparameters, ModelError, ModelKind, MonthlySource};
use modwatch_core::{MonthWindow, YearMonth};
use modwatch_service::{CommunitySource, ServiceConfig};

pub fn ym(s: &str) -> YearMonth {
    s.parse().unwrap()
}

/// Ten communities active through 2020 from `first` until intervened on.
/// `signal` is 1 in the two months before an intervention; `noise` carries
/// no information.
pub struct Toy {
    pub interventions: BTreeMap<String, YearMonth>,
    pub first: YearMonth,
}

impl Toy {
    pub fn new(interventions: &[(usize, &str)]) -> Self {
        Self {
            interventions: interventions
                .iter()
                .map(|(i, m)| (format!("s{i}"), ym(m)))
                .collect(),
            first: ym("2020-01"),
        }
    }

    /// s0 and s1 intervened inside the default initial window, s2..s4 later.
    pub fn standard() -> Self {
        Self::new(&[
            (0, "2020-02"),
            (1, "2020-03"),
            (2, "2020-06"),
            (3, "2020-08"),
            (4, "2020-11"),
        ])
    }
}

impl MonthlySource for Toy {
    fn window(&self) -> MonthWindow {
        MonthWindow::new(ym("2020-01"), ym("2020-12")).unwrap()
    }

    fn active(&self, month: YearMonth) -> Vec<String> {
        if month < self.first {
            return Vec::new();
        }
        (0..10)
            .map(|i| format!("s{i}"))
            .filter(|s| self.interventions.get(s).map_or(true, |&m| month <= m))
            .collect()
    }

    fn interventions(&self) -> &BTreeMap<String, YearMonth> {
        &self.interventions
    }

    fn row(&self, subreddit: &str, month: YearMonth) -> Result<FeatureRow, ModelError> {
        let i: i64 = subreddit[1..].parse().unwrap();
        let signal = match self.interventions.get(subreddit) {
            Some(m) if month.months_until(*m) <= 2 => 1.0,
            _ => 0.0,
        };
        let noise = ((i * 7 + ym("2020-01").months_until(month)) % 5) as f64;
        Ok(FeatureRow {
            subreddit: subreddit.into(),
            span: Span::single(month),
            quarter: None,
            label: Label::Clean,
            values: [("signal".to_string(), signal), ("noise".to_string(), noise)]
                .into_iter()
                .collect(),
            flags: Default::default(),
        })
    }
}

impl CommunitySource for Toy {
    fn fingerprint(&self) -> String {
        format!("toy:{:?}:{}", self.interventions, self.first)
    }
}

pub fn config() -> ServiceConfig {
    ServiceConfig {
        initial_start: ym("2020-01"),
        initial_end: ym("2020-03"),
        kind: ModelKind::Forest,
        hyper: Hyperparameters {
            n_trees: 15,
            ..Hyperparameters::default()
        },
        snapshot_every: 0,
        ..ServiceConfig::default()
    }
}
