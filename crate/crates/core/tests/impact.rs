use std::collections::BTreeSet;

use modwatch_core::corpus::{CommentRecord, Corpus};
use modwatch_core::features::LexiconScorer;
use modwatch_core::impact::*;
use modwatch_core::vectors::SparseVector;
use modwatch_core::{MonthWindow, YearMonth};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ym(s: &str) -> YearMonth {
    s.parse().unwrap()
}

fn planted_candidates(seed: u64, n: usize, dim: usize) -> Vec<ParticipationVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let dims: Vec<u32> = (0..dim as u32).collect();
            let k = rng.gen_range(2..7);
            let entries = dims
                .choose_multiple(&mut rng, k)
                .map(|&d| (d, rng.gen_range(1..25) as f64))
                .collect();
            ParticipationVector {
                user: format!("c{i:04}"),
                month: ym("2020-01"),
                counts: SparseVector::from_entries(dim, entries),
            }
        })
        .collect()
}

/// Each treatment user is a slightly perturbed copy of a random candidate.
fn planted_treatment(
    seed: u64,
    candidates: &[ParticipationVector],
    n: usize,
) -> Vec<ParticipationVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n)
        .map(|i| {
            let base = candidates.choose(&mut rng).unwrap();
            let entries = base
                .counts
                .entries()
                .iter()
                .map(|&(d, v)| (d, (v + rng.gen_range(-1.0..1.0f64)).max(0.5)))
                .collect();
            ParticipationVector {
                user: format!("t{i:04}"),
                month: base.month,
                counts: SparseVector::from_entries(base.counts.dim(), entries),
            }
        })
        .collect()
}

#[test]
fn lsh_agrees_with_exact_scan() {
    let mut agree = 0;
    let mut total = 0;
    for seed in 0..20 {
        let candidates = planted_candidates(seed, 500, 60);
        let treatment = planted_treatment(seed, &candidates, 200);
        let config = LshConfig {
            seed,
            ..LshConfig::default()
        };
        let matches =
            lsh_match_controls(&treatment, &candidates, &BTreeSet::new(), config).unwrap();
        for (t, m) in treatment.iter().zip(&matches) {
            let (i, d) = exact_nn(&candidates, &t.counts).unwrap();
            total += 1;
            if candidates[i].user == m.control {
                agree += 1;
            } else {
                assert!(m.distance >= d);
            }
        }
    }
    assert!(agree as f64 >= 0.95 * total as f64, "{agree}/{total}");
}

#[test]
fn rerank_is_exact_within_collisions() {
    let candidates = planted_candidates(3, 300, 40);
    let treatment = planted_treatment(3, &candidates, 50);
    let index = LshIndex::build(&candidates, 40, LshConfig::default()).unwrap();
    for t in &treatment {
        let (i, d, fallback) = index.nearest(&t.counts).unwrap();
        assert_eq!(candidates[i].counts.euclidean(&t.counts), d);
        let pool = if fallback {
            (0..candidates.len()).collect()
        } else {
            index.collisions(&t.counts)
        };
        assert!(pool
            .iter()
            .all(|&j| candidates[j].counts.euclidean(&t.counts) >= d));
    }
}

#[test]
fn excluded_users_never_matched() {
    let candidates = planted_candidates(5, 200, 30);
    let treatment = planted_treatment(5, &candidates, 100);
    let excluded: BTreeSet<String> = candidates
        .iter()
        .step_by(2)
        .map(|c| c.user.clone())
        .collect();
    let matches =
        lsh_match_controls(&treatment, &candidates, &excluded, LshConfig::default()).unwrap();
    assert!(matches.iter().all(|m| !excluded.contains(&m.control)));
}

fn comment(id: usize, author: &str, sub: &str, month: YearMonth, body: &str) -> CommentRecord {
    CommentRecord {
        id: format!("c{id}"),
        author: author.into(),
        subreddit: sub.into(),
        created: month.start_epoch_seconds() + 3600,
        body: body.into(),
        score: 1,
        parent_id: None,
        removed: false,
        author_deleted: false,
        gilded: false,
        controversial: false,
    }
}

/// Treatment users write 10 comments a month with 2 toxic ones before their
/// event and 4 afterwards; controls stay at 2 throughout.
fn planted_corpus() -> (Corpus, Vec<(String, YearMonth)>, Vec<(String, YearMonth)>) {
    let window = MonthWindow::new(ym("2019-01"), ym("2019-12")).unwrap();
    let mut comments = Vec::new();
    let mut treatment = Vec::new();
    let mut controls = Vec::new();
    let mut id = 0;
    for u in 0..8 {
        let event = ym("2019-04").offset(u % 3);
        for (name, group) in [
            (format!("t{u}"), &mut treatment),
            (format!("k{u}"), &mut controls),
        ] {
            let doubles = name.starts_with('t');
            for m in window.months() {
                let toxic = if doubles && m > event { 4 } else { 2 };
                for j in 0..10 {
                    let sub = if j % 2 == 0 { "bad" } else { "fine" };
                    let body = if j < toxic {
                        "you idiot"
                    } else {
                        "lovely weather"
                    };
                    comments.push(comment(id, &name, sub, m, body));
                    id += 1;
                }
            }
            group.push((name, event));
        }
    }
    let mut c = Corpus::new(window);
    let text: String = comments
        .iter()
        .map(|c| serde_json::to_string(c).unwrap() + "\n")
        .collect();
    c.ingest_str(&text, modwatch_core::corpus::RecordKind::Comment)
        .unwrap();
    (c, treatment, controls)
}

#[test]
fn series_reproduce_planted_means() {
    let (corpus, treatment, controls) = planted_corpus();
    let scorer = LexiconScorer::default_toxic();
    let intervened: BTreeSet<String> = ["bad".to_string()].into();
    let ctx = MetricContext {
        scorer: &scorer,
        threshold: 0.5,
        intervened: &intervened,
    };
    let s = event_series(
        &corpus,
        &treatment,
        &controls,
        ImpactMetric::HateIncidence,
        3,
        &ctx,
    );
    assert!(!s.truncated);
    for p in &s.points {
        let expected = if p.offset > 0 { 0.4 } else { 0.2 };
        assert!((p.treatment.unwrap() - expected).abs() < 1e-12, "{p:?}");
        assert!((p.control.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!((p.treatment_active, p.control_active), (8, 8));
    }
    assert_eq!(
        s.points.iter().map(|p| p.offset).collect::<Vec<_>>(),
        (-3..=3).collect::<Vec<_>>()
    );

    let s = event_series(
        &corpus,
        &treatment,
        &controls,
        ImpactMetric::ProblematicParticipation,
        2,
        &ctx,
    );
    assert!(s
        .points
        .iter()
        .all(|p| p.treatment == Some(0.5) && p.control == Some(0.5)));

    let everything: BTreeSet<String> = ["bad".to_string(), "fine".to_string()].into();
    let ctx_all = MetricContext {
        intervened: &everything,
        ..ctx
    };
    let s = event_series(
        &corpus,
        &treatment,
        &controls,
        ImpactMetric::ProblematicParticipation,
        2,
        &ctx_all,
    );
    assert!(s.points.iter().all(|p| p.treatment == Some(1.0)));

    let s = event_series(
        &corpus,
        &treatment,
        &controls,
        ImpactMetric::HateIncidence,
        6,
        &ctx,
    );
    assert!(s.truncated);
    assert!(s
        .points
        .iter()
        .flat_map(|p| [p.treatment, p.control])
        .flatten()
        .all(|v| (0.0..=1.0).contains(&v)));
}

#[test]
fn clean_users_give_flat_zero() {
    let (corpus, treatment, controls) = planted_corpus();
    let scorer = modwatch_core::features::ConstantScorer(0.0);
    let none = BTreeSet::new();
    let ctx = MetricContext {
        scorer: &scorer,
        threshold: 0.5,
        intervened: &none,
    };
    let s = event_series(
        &corpus,
        &treatment,
        &controls,
        ImpactMetric::HateIncidence,
        2,
        &ctx,
    );
    assert!(s
        .points
        .iter()
        .all(|p| p.treatment == Some(0.0) && p.control == Some(0.0)));
}

#[test]
fn joining_study_on_generated_corpus() {
    let (window, records) = modwatch_core::synth::random_fixture(4);
    let corpus = records.to_corpus(window).unwrap();
    let community = corpus.comments()[0].subreddit.clone();
    let scorer = LexiconScorer::default_toxic();
    let none = BTreeSet::new();
    let ctx = MetricContext {
        scorer: &scorer,
        threshold: 0.5,
        intervened: &none,
    };
    match joining_impact(
        &corpus,
        &community,
        ImpactMetric::HateIncidence,
        2,
        LshConfig::default(),
        &ctx,
    ) {
        Ok(study) => {
            let members: BTreeSet<String> = joining_events(&corpus, &community)
                .into_iter()
                .map(|(u, _)| u)
                .collect();
            assert!(study.matches.iter().all(|m| !members.contains(&m.control)));
        }
        Err(e) => assert_eq!(e, ImpactError::NoTreatment(community)),
    }
}
