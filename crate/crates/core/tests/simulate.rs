use std::collections::BTreeMap;

use modwatch_core::features::{FeatureRow, Label, Span};
use modwatch_core::models::*;
use modwatch_core::sampling::SamplingStrategy;
use modwatch_core::{MonthWindow, YearMonth};

fn ym(s: &str) -> YearMonth {
    s.parse().unwrap()
}

/// Ten communities active every month of 2020 until intervened on. Rows carry a
/// `signal` feature equal to 1 in the two months before an intervention.
struct Toy {
    interventions: BTreeMap<String, YearMonth>,
}

impl Toy {
    fn new(interventions: &[(usize, &str)]) -> Self {
        Self {
            interventions: interventions
                .iter()
                .map(|(i, m)| (format!("s{i}"), ym(m)))
                .collect(),
        }
    }
}

impl MonthlySource for Toy {
    fn window(&self) -> MonthWindow {
        MonthWindow::new(ym("2020-01"), ym("2020-12")).unwrap()
    }

    fn active(&self, month: YearMonth) -> Vec<String> {
        (0..10)
            .map(|i| format!("s{i}"))
            .filter(|s| self.interventions.get(s).map_or(true, |&m| month <= m))
            .collect()
    }

    fn interventions(&self) -> &BTreeMap<String, YearMonth> {
        &self.interventions
    }

    fn row(&self, subreddit: &str, month: YearMonth) -> Result<FeatureRow, ModelError> {
        let i: f64 = subreddit[1..].parse().unwrap();
        let signal = match self.interventions.get(subreddit) {
            Some(m) if month.months_until(*m) <= 2 => 1.0,
            _ => 0.0,
        };
        Ok(FeatureRow {
            subreddit: subreddit.into(),
            span: Span::single(month),
            quarter: None,
            label: Label::Clean,
            values: [("signal".to_string(), signal), ("id".to_string(), i)]
                .into_iter()
                .collect(),
            flags: Default::default(),
        })
    }
}

fn config(initial_end: &str, start: &str, end: &str) -> SimulationConfig {
    SimulationConfig {
        initial_start: ym("2020-01"),
        initial_end: ym(initial_end),
        start: ym(start),
        end: ym(end),
        threshold: 0.5,
    }
}

const ONE_PER_MONTH: [(usize, &str); 6] = [
    (0, "2020-04"),
    (1, "2020-05"),
    (2, "2020-06"),
    (3, "2020-07"),
    (4, "2020-08"),
    (5, "2020-09"),
];

#[test]
fn null_flagger_misses_everything() {
    let toy = Toy::new(&ONE_PER_MONTH);
    let ledger = simulate_continuous(
        &toy,
        &mut NullFlagger,
        config("2020-02", "2020-04", "2020-09"),
    )
    .unwrap();
    let initial = ledger.months[0].training_size - 1;
    for (k, m) in ledger.months.iter().enumerate() {
        assert_eq!(m.false_negatives.len(), 1);
        assert!(m.true_positives.is_empty() && m.false_positives.is_empty());
        assert_eq!(m.training_size, initial + k + 1);
    }
    assert!(ledger.lead_times.is_empty());
}

#[test]
fn oracle_flags_everything_first() {
    let toy = Toy::new(&ONE_PER_MONTH);
    let mut oracle = OracleFlagger {
        interventions: toy.interventions.clone(),
    };
    let ledger =
        simulate_continuous(&toy, &mut oracle, config("2020-02", "2020-03", "2020-10")).unwrap();
    let tps: Vec<&String> = ledger
        .months
        .iter()
        .flat_map(|m| &m.true_positives)
        .collect();
    assert_eq!(tps.len(), 6);
    assert!(ledger
        .months
        .iter()
        .all(|m| m.false_negatives.is_empty() && m.false_positives.is_empty()));
    for (sub, month) in &toy.interventions {
        assert_eq!(ledger.lead_times[sub], ym("2020-03").months_until(*month));
    }
}

#[test]
fn missed_rows_never_look_past_the_intervention() {
    let toy = Toy::new(&[
        (0, "2020-02"),
        (1, "2020-05"),
        (2, "2020-07"),
        (3, "2020-12"),
    ]);
    let ledger = simulate_continuous(
        &toy,
        &mut NullFlagger,
        config("2020-03", "2020-04", "2020-12"),
    )
    .unwrap();
    for e in &ledger.log {
        if let TrainingEvent::Append { rows, .. } = e {
            for r in rows {
                assert!(r.cutoff() <= toy.interventions[&r.subreddit]);
                assert_eq!(r.label, Label::Intervened);
            }
        }
    }
    let initial = match &ledger.log[0] {
        TrainingEvent::Initial { rows } => rows,
        other => panic!("{other:?}"),
    };
    // only s0 was intervened on by the end of the initial window
    assert!(initial
        .iter()
        .all(|r| r.label.is_positive() == (r.subreddit == "s0")));
}

#[test]
fn model_flagger_learns_and_replays() {
    let toy = Toy::new(&[
        (0, "2020-02"),
        (1, "2020-03"),
        (2, "2020-06"),
        (3, "2020-08"),
        (4, "2020-11"),
    ]);
    let make = || {
        ModelFlagger::new(
            ModelKind::Forest,
            Hyperparameters {
                n_trees: 20,
                ..Hyperparameters::default()
            },
            SamplingStrategy::default(),
            5,
        )
    };
    let mut flagger = make();
    let ledger =
        simulate_continuous(&toy, &mut flagger, config("2020-03", "2020-04", "2020-12")).unwrap();
    assert!(ledger.lead_times.len() >= 2, "{ledger:?}");
    let mut tp_seen = std::collections::BTreeSet::new();
    for m in &ledger.months {
        for s in &m.true_positives {
            assert!(tp_seen.insert(s.clone()), "{s} counted twice");
        }
    }
    let replayed = replay_training(&ledger.log, &mut make()).unwrap();
    assert_eq!(replayed, ledger.final_model_hash);
    assert!(replayed.is_some());
}

#[test]
fn rejects_months_outside_the_corpus() {
    let toy = Toy::new(&ONE_PER_MONTH);
    let err = simulate_continuous(
        &toy,
        &mut NullFlagger,
        config("2020-02", "2019-06", "2020-09"),
    );
    assert!(matches!(err, Err(ModelError::Simulation(_))));
    let none = Toy::new(&[(0, "2020-02")]);
    assert!(simulate_continuous(
        &none,
        &mut NullFlagger,
        config("2020-02", "2020-04", "2020-09")
    )
    .is_err());
}
