//! CART with Gini splitting, and bagged forests of such trees.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sampling::majority_vote;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Fraction of positive training rows reaching the leaf.
        proba: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
        impurity: f64,
        /// Gini decrease weighted by this node's share of the root's rows.
        weighted_decrease: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per split; `None` considers all of them.
    pub max_features: Option<usize>,
}

pub fn gini(positives: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = positives as f64 / total as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

struct Builder<'a, R> {
    rows: &'a [Vec<f64>],
    labels: &'a [bool],
    params: TreeParams,
    root_samples: f64,
    rng: Option<&'a mut R>,
    nodes: Vec<Node>,
}

struct Best {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.labels[i]).count();
        let impurity = gini(pos, n);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            proba: pos as f64 / n as f64,
            samples: n,
        });
        if depth >= self.params.max_depth || impurity == 0.0 || n < 2 * self.params.min_leaf.max(1)
        {
            return slot;
        }
        let Some(best) = self.best_split(&idx, pos, impurity) else {
            return slot;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.rows[i][best.feature] <= best.threshold);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            samples: n,
            impurity,
            weighted_decrease: n as f64 / self.root_samples * best.decrease,
        };
        slot
    }

    fn candidates(&mut self) -> Vec<usize> {
        let d = self.rows[0].len();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Largest Gini decrease; ties keep the lowest feature, then the lowest threshold.
    fn best_split(&mut self, idx: &[usize], pos: usize, impurity: f64) -> Option<Best> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<Best> = None;
        let mut column: Vec<(f64, bool)> = Vec::with_capacity(n);
        for f in self.candidates() {
            column.clear();
            column.extend(idx.iter().map(|&i| (self.rows[i][f], self.labels[i])));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for i in 1..n {
                left_pos += column[i - 1].1 as usize;
                if i < min_leaf || n - i < min_leaf || column[i - 1].0 >= column[i].0 {
                    continue;
                }
                let (nl, nr) = (i as f64, (n - i) as f64);
                let child =
                    nl / n as f64 * gini(left_pos, i) + nr / n as f64 * gini(pos - left_pos, n - i);
                let decrease = impurity - child;
                if decrease > 1e-12 && best.as_ref().map_or(true, |b| decrease > b.decrease) {
                    let (lo, hi) = (column[i - 1].0, column[i].0);
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some(Best {
                        feature: f,
                        threshold: if mid < hi { mid } else { lo },
                        decrease,
                    });
                }
            }
        }
        best
    }
}

impl Tree {
    /// Fit on the rows named by `idx` (duplicates allowed, as in a bootstrap).
    pub fn fit_indices<R: Rng>(
        rows: &[Vec<f64>],
        labels: &[bool],
        idx: Vec<usize>,
        params: TreeParams,
        rng: Option<&mut R>,
    ) -> Tree {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut b = Builder {
            rows,
            labels,
            params,
            root_samples: idx.len() as f64,
            rng,
            nodes: Vec::new(),
        };
        b.grow(idx, 0);
        Tree {
            nodes: b.nodes,
            n_features,
        }
    }

    pub fn fit(rows: &[Vec<f64>], labels: &[bool], params: TreeParams) -> Tree {
        Self::fit_indices::<ChaCha8Rng>(rows, labels, (0..rows.len()).collect(), params, None)
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { proba, .. } => return *proba,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Summed weighted impurity decrease per feature, unnormalized.
    pub fn raw_importances(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for node in &self.nodes {
            if let Node::Split {
                feature,
                weighted_decrease,
                ..
            } = node
            {
                out[*feature] += weighted_decrease;
            }
        }
        out
    }

    /// Importances normalized to sum 1, or all zero for a single-leaf tree.
    pub fn importances(&self) -> Vec<f64> {
        normalize(self.raw_importances())
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Bootstrap-bagged trees, each with its own ChaCha stream of `seed`.
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[bool],
        n_trees: usize,
        params: TreeParams,
        seed: u64,
    ) -> Forest {
        let n = rows.len();
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64 + 1);
                let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                Tree::fit_indices(rows, labels, idx, params, Some(&mut rng))
            })
            .collect();
        Forest { trees }
    }

    /// Exact mean of member-tree probabilities.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_proba(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Majority vote of per-tree labels; ties go to the positive class.
    pub fn predict_label(&self, row: &[f64], threshold: f64) -> bool {
        let votes: Vec<bool> = self
            .trees
            .iter()
            .map(|t| t.predict_proba(row) >= threshold)
            .collect();
        majority_vote(&votes).unwrap_or(false)
    }

    /// Per-tree normalized importances, averaged, renormalized.
    pub fn importances(&self) -> Vec<f64> {
        let d = self.trees.first().map_or(0, |t| t.n_features);
        let mut sum = vec![0.0; d];
        for t in &self.trees {
            for (s, v) in sum.iter_mut().zip(t.importances()) {
                *s += v;
            }
        }
        normalize(sum)
    }
}

/// ⌊√d⌋, at least 1.
pub fn sqrt_features(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: TreeParams = TreeParams {
        max_depth: 12,
        min_leaf: 1,
        max_features: None,
    };

    #[test]
    fn gini_values() {
        assert_eq!(gini(0, 4), 0.0);
        assert_eq!(gini(2, 4), 0.5);
    }

    #[test]
    fn single_split_on_one_feature() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let labels = vec![false, false, true, true];
        let t = Tree::fit(&rows, &labels, FULL);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.importances(), vec![1.0]);
        match &t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 2.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn depth_and_leaf_limits() {
        let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let labels: Vec<bool> = (0..16).map(|i| i % 2 == 0).collect();
        let t = Tree::fit(
            &rows,
            &labels,
            TreeParams {
                max_depth: 3,
                ..FULL
            },
        );
        assert!(t.depth() <= 3);
        let t = Tree::fit(
            &rows,
            &labels,
            TreeParams {
                min_leaf: 3,
                ..FULL
            },
        );
        for n in &t.nodes {
            if let Node::Leaf { samples, .. } = n {
                assert!(*samples >= 3);
            }
        }
    }

    #[test]
    fn pure_node_is_leaf() {
        let t = Tree::fit(&[vec![0.0], vec![1.0]], &[true, true], FULL);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.importances(), vec![0.0]);
    }

    #[test]
    fn forest_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![i as f64, (i * 7 % 5) as f64])
            .collect();
        let labels: Vec<bool> = (0..30).map(|i| i > 14).collect();
        let p = TreeParams {
            max_features: Some(1),
            ..FULL
        };
        assert_eq!(
            Forest::fit(&rows, &labels, 10, p, 3),
            Forest::fit(&rows, &labels, 10, p, 3)
        );
    }
}
