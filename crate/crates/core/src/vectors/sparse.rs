use serde::{Deserialize, Serialize};

/// Sparse real vector: sorted `(index, value)` pairs with no explicit zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Duplicate indices are summed; zeros are dropped.
    pub fn from_entries(dim: usize, mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            debug_assert!((i as usize) < dim, "index {i} out of range {dim}");
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        Self {
            dim,
            entries: merged,
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, v))
            .collect();
        Self::from_entries(values.len(), entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map_or(0.0, |p| self.entries[p].1)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    pub fn scaled(&self, k: f64) -> Self {
        let entries = self.entries.iter().map(|&(i, v)| (i, v * k)).collect();
        Self::from_entries(self.dim, entries)
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (
            self.entries.iter().peekable(),
            other.entries.iter().peekable(),
        );
        let mut acc = 0.0;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    acc += x * y;
                    a.next();
                    b.next();
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn squared_euclidean(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() || j < b.len() {
            let d = match (a.get(i), b.get(j)) {
                (Some(&(ia, x)), Some(&(ib, y))) if ia == ib => {
                    i += 1;
                    j += 1;
                    x - y
                }
                (Some(&(ia, x)), Some(&(ib, _))) if ia < ib => {
                    i += 1;
                    x
                }
                (Some(_), Some(&(_, y))) => {
                    j += 1;
                    -y
                }
                (Some(&(_, x)), None) => {
                    i += 1;
                    x
                }
                (None, Some(&(_, y))) => {
                    j += 1;
                    -y
                }
                (None, None) => unreachable!(),
            };
            acc += d * d;
        }
        acc
    }

    pub fn euclidean(&self, other: &SparseVector) -> f64 {
        self.squared_euclidean(other).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn merges_duplicates_and_drops_zeros() {
        let v = SparseVector::from_entries(5, vec![(3, 1.0), (1, 2.0), (3, -1.0), (4, 0.5)]);
        assert_eq!(v.entries(), &[(1, 2.0), (4, 0.5)]);
        assert_eq!(v.get(3), 0.0);
    }

    proptest! {
        #[test]
        fn sparse_ops_match_dense(a in prop::collection::vec(-3i32..3, 8), b in prop::collection::vec(-3i32..3, 8)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let (sa, sb) = (SparseVector::from_dense(&a), SparseVector::from_dense(&b));
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            prop_assert!((sa.dot(&sb) - dot).abs() < 1e-12);
            prop_assert!((sa.euclidean(&sb) - dense_dist(&a, &b)).abs() < 1e-12);
            prop_assert_eq!(sa.to_dense(), a);
        }
    }
}
