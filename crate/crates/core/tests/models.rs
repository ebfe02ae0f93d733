use std::collections::BTreeMap;

use approx::assert_abs_diff_eq;
use modwatch_core::features::FeatureSchema;
use modwatch_core::models::*;
use modwatch_core::sampling::{resample, Dataset, Provenance, SamplingStrategy, Standardizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn schema(d: usize) -> FeatureSchema {
    FeatureSchema::new((0..d).map(|i| format!("f{i}")).collect())
}

fn random_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let labels = rows
        .iter()
        .map(|r| r[0] + rng.gen_range(-1.0..1.0) > 0.0)
        .collect();
    (rows, labels)
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let d = rng.gen_range(1..5);
        let (rows, labels) = random_problem(seed, rng.gen_range(3..12), d);
        let params: Vec<f64> = (0..=d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let lambda = rng.gen_range(0.0..2.0);
        let g = logistic_gradient(&params, &rows, &labels, lambda);
        let h = 1e-6;
        for j in 0..=d {
            let mut up = params.clone();
            let mut down = params.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (logistic_loss(&up, &rows, &labels, lambda)
                - logistic_loss(&down, &rows, &labels, lambda))
                / (2.0 * h);
            assert!(
                (fd - g[j]).abs() < 1e-5,
                "seed {seed} coordinate {j}: {fd} vs {}",
                g[j]
            );
        }
    }
}

#[test]
fn logistic_reaches_tolerance() {
    let (rows, labels) = random_problem(3, 80, 6);
    let m = fit_logistic(&rows, &labels, 1.0, 1e-8, 200_000);
    assert!(m.converged);
    let mut params = m.weights.clone();
    params.push(m.intercept);
    let g = logistic_gradient(&params, &rows, &labels, 1.0);
    assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-8);
}

#[test]
fn logistic_separates_separable_toy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..60 {
        let pos = i % 2 == 0;
        let c = if pos { 3.0 } else { -3.0 };
        rows.push(vec![
            c + rng.gen_range(-1.0..1.0),
            c + rng.gen_range(-1.0..1.0),
        ]);
        labels.push(pos);
    }
    let data = Dataset::new(rows.clone(), labels.clone()).unwrap();
    let a = train(
        &data,
        &schema(2),
        ModelKind::Logistic,
        &Hyperparameters::default(),
        SamplingStrategy::None,
        0,
    )
    .unwrap();
    let report = evaluate(&a, &rows, &labels, 0.5).unwrap();
    assert_eq!(report.confusion.tp + report.confusion.tn, 60);
}

#[test]
fn training_rejects_single_class_and_nan() {
    let data = Dataset::new(vec![vec![1.0], vec![2.0]], vec![true, true]).unwrap();
    let h = Hyperparameters::default();
    assert!(matches!(
        train(
            &data,
            &schema(1),
            ModelKind::Tree,
            &h,
            SamplingStrategy::None,
            0
        ),
        Err(ModelError::SingleClass)
    ));
    let data = Dataset::new(vec![vec![f64::NAN], vec![2.0]], vec![true, false]).unwrap();
    assert!(matches!(
        train(
            &data,
            &schema(1),
            ModelKind::Logistic,
            &h,
            SamplingStrategy::None,
            0
        ),
        Err(ModelError::NaN(_))
    ));
    let data = Dataset::new(vec![vec![1.0], vec![2.0]], vec![true, false]).unwrap();
    let a = train(
        &data,
        &schema(1),
        ModelKind::Tree,
        &h,
        SamplingStrategy::None,
        0,
    )
    .unwrap();
    assert!(matches!(
        a.predict_proba(&[1.0, 2.0]),
        Err(ModelError::Shape(_))
    ));
}

#[test]
fn one_feature_depth_one_tree() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
    let labels: Vec<bool> = (0..10).map(|i| i >= 5).collect();
    let data = Dataset::new(rows, labels).unwrap();
    let h = Hyperparameters {
        max_depth: 1,
        ..Hyperparameters::default()
    };
    let a = train(
        &data,
        &schema(1),
        ModelKind::Tree,
        &h,
        SamplingStrategy::None,
        0,
    )
    .unwrap();
    assert_eq!(gini_importances(&a).unwrap()["f0"], 1.0);
}

/// (x0, x1) → label: (0,0)F×2, (0,1)F×3, (1,0)F×2, (1,1)T×2.
fn two_split_fixture() -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (x0, x1, y, n) in [
        (0.0, 0.0, false, 2),
        (0.0, 1.0, false, 3),
        (1.0, 0.0, false, 2),
        (1.0, 1.0, true, 2),
    ] {
        for _ in 0..n {
            rows.push(vec![x0, x1]);
            labels.push(y);
        }
    }
    (rows, labels)
}

#[test]
fn two_split_tree_matches_hand_trace() {
    let (rows, labels) = two_split_fixture();
    let params = TreeParams {
        max_depth: 12,
        min_leaf: 2,
        max_features: None,
    };
    let t = Tree::fit(&rows, &labels, params);
    // root: gini 28/81; x0 <= 0.5 leaves 5 negatives and a 2/2 node (weighted 2/9),
    // decrease 10/81. That node splits on x1 with decrease 1/2, weighted 4/9 → 18/81.
    match &t.nodes[0] {
        Node::Split {
            feature,
            threshold,
            impurity,
            ..
        } => {
            assert_eq!((*feature, *threshold), (0, 0.5));
            assert_abs_diff_eq!(*impurity, 28.0 / 81.0, epsilon = 1e-15);
        }
        other => panic!("{other:?}"),
    }
    let imp = t.importances();
    assert_abs_diff_eq!(imp[0], 10.0 / 28.0, epsilon = 1e-12);
    assert_abs_diff_eq!(imp[1], 18.0 / 28.0, epsilon = 1e-12);
    assert_eq!(t.predict_proba(&[1.0, 0.7]), 1.0);
    assert_eq!(t.predict_proba(&[1.0, 0.2]), 0.0);
    assert_eq!(t.predict_proba(&[0.0, 1.0]), 0.0);
    assert_eq!(t.depth(), 2);
}

#[test]
fn forest_probability_is_mean_of_trees() {
    let (rows, labels) = random_problem(8, 60, 4);
    let params = TreeParams {
        max_depth: 12,
        min_leaf: 2,
        max_features: Some(2),
    };
    let f = Forest::fit(&rows, &labels, 25, params, 4);
    for r in &rows {
        let mean = f.trees.iter().map(|t| t.predict_proba(r)).sum::<f64>() / 25.0;
        assert_eq!(f.predict_proba(r), mean);
    }
    let imp = f.importances();
    assert_abs_diff_eq!(imp.iter().sum::<f64>(), 1.0, epsilon = 1e-12);

    let single = Tree::fit(&rows, &labels, params);
    let same = Forest {
        trees: vec![single.clone(); 7],
    };
    for r in &rows {
        assert_eq!(same.predict_proba(r), single.predict_proba(r));
    }
}

#[test]
fn unused_feature_has_zero_importance() {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 3.0]).collect();
    let labels: Vec<bool> = (0..20).map(|i| i >= 10).collect();
    let data = Dataset::new(rows, labels).unwrap();
    let a = train(
        &data,
        &schema(2),
        ModelKind::Forest,
        &Hyperparameters::default(),
        SamplingStrategy::None,
        1,
    )
    .unwrap();
    let imp = gini_importances(&a).unwrap();
    assert_eq!(imp["f1"], 0.0);
    assert_abs_diff_eq!(imp["f0"], 1.0, epsilon = 1e-12);
}

fn logistic_artifact(weights: Vec<f64>) -> ModelArtifact {
    let d = weights.len();
    ModelArtifact {
        format: ARTIFACT_FORMAT.into(),
        format_version: ARTIFACT_VERSION,
        kind: ModelKind::Logistic,
        schema: schema(d),
        standardizer: Standardizer::identity(d),
        members: vec![Model::Logistic(LogisticModel {
            weights,
            intercept: 0.0,
            iterations: 0,
            gradient_norm: 0.0,
            converged: true,
        })],
        importances: BTreeMap::new(),
        metadata: TrainingMetadata {
            sampling: SamplingStrategy::None,
            seed: 0,
            hyperparameters: Hyperparameters::default(),
            training_window: None,
            real_rows: 0,
            positive_rows: 0,
            synthetic_rows: 0,
        },
    }
}

#[test]
fn odds_ratio_values() {
    let a = logistic_artifact(vec![0.0, 0.32, -0.5]);
    let or = odds_ratios(&a).unwrap();
    assert_eq!(or["f0"], (0.0, 1.0));
    // a 0.32 weight is a 1.37x change in the odds
    assert_abs_diff_eq!(or["f1"].1, 1.377, epsilon = 5e-4);
    assert_abs_diff_eq!(or["f2"].1, 0.6065, epsilon = 1e-4);
    assert_eq!(
        logistic_artifact(vec![0.0; 4])
            .predict_proba(&[1.0, -3.0, 2.0, 9.0])
            .unwrap(),
        0.5
    );

    let (rows, labels) = random_problem(1, 30, 2);
    let data = Dataset::new(rows, labels).unwrap();
    let tree = train(
        &data,
        &schema(2),
        ModelKind::Tree,
        &Hyperparameters::default(),
        SamplingStrategy::None,
        0,
    )
    .unwrap();
    assert!(matches!(odds_ratios(&tree), Err(ModelError::WrongKind(..))));
    assert!(gini_importances(&a).is_err());
}

fn pair_counting_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

#[test]
fn auc_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.gen_range(2..60);
        // coarse scores so ties are common
        let scores: Vec<f64> = (0..n)
            .map(|_| (rng.gen_range(0.0..1.0f64) * 10.0).round() / 10.0)
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        if labels.iter().all(|l| *l) || labels.iter().all(|l| !*l) {
            continue;
        }
        assert_abs_diff_eq!(
            auc(&scores, &labels).unwrap(),
            pair_counting_auc(&scores, &labels),
            epsilon = 1e-12
        );
        checked += 1;
    }
}

#[test]
fn single_class_test_set_reports_f1_only() {
    let (rows, labels) = random_problem(2, 40, 3);
    let data = Dataset::new(rows.clone(), labels.clone()).unwrap();
    let a = train(
        &data,
        &schema(3),
        ModelKind::Logistic,
        &Hyperparameters::default(),
        SamplingStrategy::None,
        0,
    )
    .unwrap();
    let pos: Vec<Vec<f64>> = rows
        .iter()
        .zip(&labels)
        .filter(|(_, l)| **l)
        .map(|(r, _)| r.clone())
        .collect();
    let report = evaluate(&a, &pos, &vec![true; pos.len()], 0.5).unwrap();
    assert_eq!(report.auc, None);
    assert_eq!(report.confusion.total(), pos.len());
    assert!(report.f1_positive > 0.0 && report.f1_negative == 0.0);
}

#[test]
fn artifacts_are_deterministic_and_round_trip() {
    let (rows, labels) = random_problem(4, 50, 5);
    let data = Dataset::new(rows.clone(), labels).unwrap();
    for kind in [ModelKind::Logistic, ModelKind::Tree, ModelKind::Forest] {
        for sampling in [
            SamplingStrategy::default(),
            SamplingStrategy::EnsembleUndersample,
        ] {
            let h = Hyperparameters {
                n_trees: 15,
                ..Hyperparameters::default()
            };
            let a = train(&data, &schema(5), kind, &h, sampling, 9).unwrap();
            let b = train(&data, &schema(5), kind, &h, sampling, 9).unwrap();
            assert_eq!(a.to_json(), b.to_json());
            let back = ModelArtifact::from_json(&a.to_json()).unwrap();
            assert_eq!(back, a);
            assert_eq!(back.hash(), a.hash());
            for r in &rows {
                assert_eq!(back.predict_proba(r).unwrap(), a.predict_proba(r).unwrap());
                let p = a.predict_proba(r).unwrap();
                assert!((0.0..=1.0).contains(&p));
            }
            if kind != ModelKind::Logistic {
                assert_abs_diff_eq!(a.importances.values().sum::<f64>(), 1.0, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn ensemble_members_vote() {
    let (rows, labels) = random_problem(6, 60, 3);
    let data = Dataset::new(rows.clone(), labels).unwrap();
    let a = train(
        &data,
        &schema(3),
        ModelKind::Tree,
        &Hyperparameters::default(),
        SamplingStrategy::EnsembleUndersample,
        2,
    )
    .unwrap();
    assert!(a.members.len() >= 1);
    for r in &rows {
        let z = a.standardizer.transform(r);
        let yes = a
            .members
            .iter()
            .filter(|m| match m {
                Model::Tree(t) => t.predict_proba(&z) >= 0.5,
                _ => unreachable!(),
            })
            .count();
        assert_eq!(a.predict_label(r, 0.5).unwrap(), 2 * yes >= a.members.len());
    }
}

fn row_hash(r: &[f64]) -> Vec<u64> {
    r.iter().map(|v| v.to_bits()).collect()
}

#[test]
fn fold_sampling_never_reaches_validation() {
    let (rows, labels) = random_problem(12, 80, 3);
    let labels: Vec<bool> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| *l && i % 3 == 0)
        .collect();
    let data = Dataset::new(rows, labels).unwrap();
    let (train_idx, holdout_idx) = stratified_split(&data.labels, 0.2, 1).unwrap();
    let before: Vec<_> = holdout_idx
        .iter()
        .map(|&i| row_hash(&data.rows[i]))
        .collect();
    let train_set = data.subset(&train_idx);
    let folds = stratified_folds(&train_set.labels, 5, 2);
    let mut seen: Vec<usize> = folds.concat();
    seen.sort();
    assert_eq!(seen, (0..train_set.len()).collect::<Vec<_>>());
    for val in &folds {
        let fit: Vec<usize> = (0..train_set.len()).filter(|i| !val.contains(i)).collect();
        let sets = resample(&train_set.subset(&fit), SamplingStrategy::default(), 3).unwrap();
        let validation: Vec<_> = val.iter().map(|&i| row_hash(&train_set.rows[i])).collect();
        for (r, p) in sets[0].rows.iter().zip(&sets[0].provenance) {
            if *p == Provenance::Synthetic {
                assert!(!validation.contains(&row_hash(r)));
                assert!(!before.contains(&row_hash(r)));
            }
        }
    }
    let after: Vec<_> = holdout_idx
        .iter()
        .map(|&i| row_hash(&data.rows[i]))
        .collect();
    assert_eq!(before, after);
}
