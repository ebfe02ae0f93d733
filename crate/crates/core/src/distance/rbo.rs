use std::collections::HashSet;
use std::hash::Hash;

use super::DistanceError;

/// Persistence used when a run does not configure one.
pub const DEFAULT_PERSISTENCE: f64 = 0.98;

/// Extrapolated rank-biased overlap of two duplicate-free ranked lists.
///
/// With `A_d = |x1[..d] ∩ x2[..d]| / d` and `k = min(|x1|, |x2|)`:
///
/// ```text
/// rbo = (1 - p) * Σ_{d=1..k} p^(d-1) * A_d  +  A_k * p^k
/// ```
///
/// The tail beyond depth `k` is extrapolated at the agreement observed at
/// `k`, so identical lists score exactly 1 at any depth.
pub fn rbo<T: Eq + Hash>(x1: &[T], x2: &[T], p: f64) -> Result<f64, DistanceError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DistanceError::InvalidPersistence(p));
    }
    if x1.is_empty() || x2.is_empty() {
        return Err(DistanceError::EmptyList);
    }
    if has_duplicates(x1) || has_duplicates(x2) {
        return Err(DistanceError::DuplicateInList);
    }
    let k = x1.len().min(x2.len());
    let mut seen1: HashSet<&T> = HashSet::with_capacity(k);
    let mut seen2: HashSet<&T> = HashSet::with_capacity(k);
    let mut overlap = 0usize;
    let mut weighted = 0.0;
    let mut weight = 1.0; // p^(d-1)
    let mut agreement = 0.0;
    for d in 1..=k {
        let (a, b) = (&x1[d - 1], &x2[d - 1]);
        if a == b {
            overlap += 1;
        } else {
            if seen2.contains(a) {
                overlap += 1;
            }
            if seen1.contains(b) {
                overlap += 1;
            }
        }
        seen1.insert(a);
        seen2.insert(b);
        agreement = overlap as f64 / d as f64;
        weighted += weight * agreement;
        weight *= p;
    }
    // `weight` is now p^k
    let score = (1.0 - p) * weighted + agreement * weight;
    Ok(score.clamp(0.0, 1.0))
}

/// `1 - rbo`.
pub fn rbo_distance<T: Eq + Hash>(x1: &[T], x2: &[T], p: f64) -> Result<f64, DistanceError> {
    rbo(x1, x2, p).map(|s| 1.0 - s)
}

fn has_duplicates<T: Eq + Hash>(xs: &[T]) -> bool {
    let mut seen = HashSet::with_capacity(xs.len());
    !xs.iter().all(|x| seen.insert(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_lists_score_one() {
        for p in [0.1, 0.5, 0.9, 0.98] {
            assert!((rbo(&["a", "b", "c"], &["a", "b", "c"], p).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn disjoint_lists_score_zero() {
        assert_eq!(rbo(&["a", "b"], &["c", "d"], 0.9).unwrap(), 0.0);
    }

    #[test]
    fn swapped_head_example() {
        // A = (0, 1, 1): 0.5 * (0 + 0.5 + 0.25) + 1 * 0.125
        let s = rbo(&['a', 'b', 'c'], &['b', 'a', 'c'], 0.5).unwrap();
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(
            rbo(&[1], &[1], 1.0),
            Err(DistanceError::InvalidPersistence(_))
        ));
        assert!(matches!(
            rbo(&[1], &[1], 0.0),
            Err(DistanceError::InvalidPersistence(_))
        ));
        assert!(matches!(
            rbo::<i32>(&[], &[1], 0.5),
            Err(DistanceError::EmptyList)
        ));
        assert!(matches!(
            rbo(&[1, 1], &[1, 2], 0.5),
            Err(DistanceError::DuplicateInList)
        ));
    }

    fn list() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..12, 1..10).prop_map(|v| {
            let mut seen = HashSet::new();
            v.into_iter().filter(|x| seen.insert(*x)).collect()
        })
    }

    proptest! {
        #[test]
        fn bounded_and_symmetric_for_equal_lengths(a in list(), b in list(), p in 0.05f64..0.99) {
            let s = rbo(&a, &b, p).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            if a.len() == b.len() {
                prop_assert!((s - rbo(&b, &a, p).unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn prepending_a_common_element_never_decreases(a in list(), b in list(), p in 0.05f64..0.99) {
            let s = rbo(&a, &b, p).unwrap();
            let a2: Vec<u8> = std::iter::once(100).chain(a.iter().copied()).collect();
            let b2: Vec<u8> = std::iter::once(100).chain(b.iter().copied()).collect();
            prop_assert!(rbo(&a2, &b2, p).unwrap() >= s - 1e-12);
        }
    }
}
