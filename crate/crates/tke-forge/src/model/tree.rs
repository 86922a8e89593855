//! Regression trees shared by the ensemble models: a variance-reduction CART
//! for forests and gradient boosting, and a second-order tree whose leaf
//! weights solve the l1/l2-regularized per-leaf objective in closed form.
//!
//! Split tie-breaking is deterministic: features are scanned in ascending
//! index order and thresholds in ascending value order, and a candidate only
//! replaces the incumbent on strictly larger gain, so the lowest feature
//! index and smallest threshold win ties.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

/// One node in the arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

/// A trained regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Growth limits shared by both tree kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// None grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; None means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

struct VarianceBuilder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

/// Fit a CART on `(x, y)` restricted to `idx`, maximizing the reduction in
/// the sum of squared errors. `rng` is only consulted when `max_features`
/// subsamples the feature set, so forests with all features stay identical
/// regardless of the rng handed in.
pub fn fit_variance_tree(
    x: &Matrix,
    y: &[f64],
    idx: &[usize],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let mut b = VarianceBuilder {
        x,
        y,
        params,
        nodes: Vec::new(),
    };
    let mut idx = idx.to_vec();
    b.build(&mut idx, 0, rng);
    DecisionTree { nodes: b.nodes }
}

impl VarianceBuilder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let mean = sum / n as f64;

        let lo = idx.iter().map(|&i| self.y[i]).fold(f64::INFINITY, f64::min);
        let hi = idx
            .iter()
            .map(|&i| self.y[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let pure = lo == hi;

        let at_depth_limit = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || at_depth_limit || n < self.params.min_samples_split {
            // a pure node keeps the shared target exactly
            let value = if pure { lo } else { mean };
            self.nodes.push(Node::Leaf { value });
            return (self.nodes.len() - 1) as u32;
        }

        let best = self.best_split(idx, rng);
        let Some((feature, threshold)) = best else {
            self.nodes.push(Node::Leaf { value: mean });
            return (self.nodes.len() - 1) as u32;
        };

        let mid = partition(self.x, idx, feature, threshold);
        let placeholder = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean });
        let (left_idx, right_idx) = idx.split_at_mut(mid);
        let left = self.build(left_idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        self.nodes[placeholder] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        placeholder as u32
    }

    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let n = idx.len();
        let total_sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total_sum * total_sum / n as f64;

        let features = candidate_features(self.x.cols(), self.params.max_features, rng);
        let min_leaf = self.params.min_samples_leaf;

        let mut best: Option<(usize, f64)> = None;
        let mut best_gain = 0.0f64;
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for &feature in &features {
            order.clear();
            order.extend_from_slice(idx);
            order.sort_unstable_by(|&a, &b| {
                self.x
                    .get(a, feature)
                    .partial_cmp(&self.x.get(b, feature))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for (count, pair) in order.windows(2).enumerate() {
                let yi = self.y[pair[0]];
                left_sum += yi;
                left_sq += yi * yi;
                let n_left = count + 1;
                let v0 = self.x.get(pair[0], feature);
                let v1 = self.x.get(pair[1], feature);
                if v0 == v1 {
                    continue;
                }
                let n_right = n - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let right_sum = total_sum - left_sum;
                let right_sq = total_sq - left_sq;
                let sse_left = left_sq - left_sum * left_sum / n_left as f64;
                let sse_right = right_sq - right_sum * right_sum / n_right as f64;
                let gain = parent_sse - sse_left - sse_right;
                if gain > best_gain {
                    best_gain = gain;
                    best = Some((feature, 0.5 * (v0 + v1)));
                }
            }
        }
        best
    }
}

/// Second-order split statistics: gradient and hessian sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma: f64,
}

/// `sign(g) * max(|g| - lambda1, 0)`.
pub fn soft_threshold(g: f64, lambda1: f64) -> f64 {
    g.signum() * (g.abs() - lambda1).max(0.0)
}

/// Closed-form minimizer of the per-leaf objective
/// `G w + (H + lambda2) w^2 / 2 + lambda1 |w|`.
pub fn leaf_weight(g_sum: f64, h_sum: f64, lambda1: f64, lambda2: f64) -> f64 {
    -soft_threshold(g_sum, lambda1) / (h_sum + lambda2)
}

/// Regularized structure score of a candidate leaf.
fn leaf_score(g_sum: f64, h_sum: f64, lambda1: f64, lambda2: f64) -> f64 {
    let t = soft_threshold(g_sum, lambda1);
    t * t / (h_sum + lambda2)
}

struct BoostBuilder<'a> {
    x: &'a Matrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a BoostTreeParams,
    nodes: Vec<Node>,
}

/// Fit a second-order tree on gradient/hessian statistics. Leaves hold the
/// regularized weight; the booster applies its learning rate on top.
pub fn fit_boost_tree(
    x: &Matrix,
    grad: &[f64],
    hess: &[f64],
    idx: &[usize],
    params: &BoostTreeParams,
) -> DecisionTree {
    let mut b = BoostBuilder {
        x,
        grad,
        hess,
        params,
        nodes: Vec::new(),
    };
    let mut idx = idx.to_vec();
    b.build(&mut idx, 0);
    DecisionTree { nodes: b.nodes }
}

impl BoostBuilder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let g_sum: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h_sum: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        let value = leaf_weight(g_sum, h_sum, self.params.lambda1, self.params.lambda2);

        let at_depth_limit = self.params.max_depth.is_some_and(|d| depth >= d);
        if at_depth_limit || idx.len() < 2 {
            self.nodes.push(Node::Leaf { value });
            return (self.nodes.len() - 1) as u32;
        }

        let Some((feature, threshold)) = self.best_split(idx, g_sum, h_sum) else {
            self.nodes.push(Node::Leaf { value });
            return (self.nodes.len() - 1) as u32;
        };

        let mid = partition(self.x, idx, feature, threshold);
        let placeholder = self.nodes.len();
        self.nodes.push(Node::Leaf { value });
        let (left_idx, right_idx) = idx.split_at_mut(mid);
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[placeholder] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        placeholder as u32
    }

    fn best_split(&self, idx: &[usize], g_total: f64, h_total: f64) -> Option<(usize, f64)> {
        let p = self.params;
        let parent = leaf_score(g_total, h_total, p.lambda1, p.lambda2);
        let n = idx.len();

        let mut best: Option<(usize, f64)> = None;
        let mut best_gain = 0.0f64;
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for feature in 0..self.x.cols() {
            order.clear();
            order.extend_from_slice(idx);
            order.sort_unstable_by(|&a, &b| {
                self.x
                    .get(a, feature)
                    .partial_cmp(&self.x.get(b, feature))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut g_left = 0.0;
            let mut h_left = 0.0;
            for (count, pair) in order.windows(2).enumerate() {
                g_left += self.grad[pair[0]];
                h_left += self.hess[pair[0]];
                let n_left = count + 1;
                let v0 = self.x.get(pair[0], feature);
                let v1 = self.x.get(pair[1], feature);
                if v0 == v1 {
                    continue;
                }
                if n_left < p.min_samples_leaf || n - n_left < p.min_samples_leaf {
                    continue;
                }
                let score_l = leaf_score(g_left, h_left, p.lambda1, p.lambda2);
                let score_r = leaf_score(g_total - g_left, h_total - h_left, p.lambda1, p.lambda2);
                let gain = 0.5 * (score_l + score_r - parent) - p.gamma;
                if gain > best_gain {
                    best_gain = gain;
                    best = Some((feature, 0.5 * (v0 + v1)));
                }
            }
        }
        best
    }
}

/// Stable in-place partition of `idx` by `x[feature] <= threshold`; returns
/// the left-block length. Row order within each side is preserved.
fn partition(x: &Matrix, idx: &mut [usize], feature: usize, threshold: f64) -> usize {
    let left: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|&i| x.get(i, feature) <= threshold)
        .collect();
    let right: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|&i| x.get(i, feature) > threshold)
        .collect();
    let mid = left.len();
    idx[..mid].copy_from_slice(&left);
    idx[mid..].copy_from_slice(&right);
    mid
}

fn candidate_features(
    n_features: usize,
    max_features: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    match max_features {
        Some(k) if k < n_features => {
            let mut picked = sample(rng, n_features, k).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..n_features).collect(),
    }
}
