use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use super::{CommentRecord, CorpusError};

/// Uniform value in `[0, 1)` derived from `(seed, id)`.
pub(crate) fn unit_hash(seed: u64, id: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(head) >> 11) as f64 / (1u64 << 53) as f64
}

/// Bernoulli sample of comment ids: a comment is kept iff its hash falls
/// below `fraction`. Samples for a smaller fraction are subsets of samples
/// for a larger one under the same seed.
pub fn sample_comments(
    comments: &[CommentRecord],
    fraction: f64,
    seed: u64,
) -> Result<BTreeSet<String>, CorpusError> {
    if !(0.0..=1.0).contains(&fraction) || fraction.is_nan() {
        return Err(CorpusError::Fraction(fraction));
    }
    Ok(comments
        .iter()
        .filter(|c| unit_hash(seed, &c.id) < fraction)
        .map(|c| c.id.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comments(n: usize) -> Vec<CommentRecord> {
        (0..n)
            .map(|i| CommentRecord {
                id: format!("c{i}"),
                author: "u".into(),
                subreddit: "s".into(),
                created: 0,
                body: "x".into(),
                score: 0,
                parent_id: None,
                removed: false,
                author_deleted: false,
                gilded: false,
                controversial: false,
            })
            .collect()
    }

    #[test]
    fn full_and_empty_fractions() {
        let cs = comments(50);
        assert_eq!(sample_comments(&cs, 1.0, 3).unwrap().len(), 50);
        assert!(sample_comments(&cs, 0.0, 3).unwrap().is_empty());
        assert!(sample_comments(&cs, 1.5, 3).is_err());
        assert!(sample_comments(&cs, -0.1, 3).is_err());
    }

    #[test]
    fn ten_percent_is_within_three_sigma() {
        let cs = comments(10_000);
        let n = sample_comments(&cs, 0.1, 7).unwrap().len() as f64;
        let sigma = (10_000.0f64 * 0.1 * 0.9).sqrt();
        assert!((n - 1000.0).abs() <= 3.0 * sigma, "sample size {n}");
    }

    #[test]
    fn samples_are_nested_and_deterministic() {
        let cs = comments(2000);
        let small = sample_comments(&cs, 0.1, 11).unwrap();
        let large = sample_comments(&cs, 0.3, 11).unwrap();
        assert!(small.is_subset(&large));
        assert_eq!(small, sample_comments(&cs, 0.1, 11).unwrap());
        assert_ne!(small, sample_comments(&cs, 0.1, 12).unwrap());
    }
}
