//! Second-order gradient boosting with l1/l2-regularized leaf weights and a
//! leaf-count penalty, in the style of extreme gradient boosting.
//!
//! With squared loss the per-sample gradient is `pred - y` and the hessian
//! is 1; each leaf weight minimizes
//! `G w + (H + lambda2) w^2 / 2 + lambda1 |w|` in closed form via soft
//! thresholding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::tree::{fit_boost_tree, BoostTreeParams, DecisionTree};

pub use crate::model::tree::{leaf_weight, soft_threshold};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XgbParams {
    pub estimators: usize,
    pub depth: Option<usize>,
    pub learning_rate: f64,
    /// l1 leaf-weight penalty.
    pub l1: f64,
    /// l2 leaf-weight penalty.
    pub l2: f64,
    /// Per-leaf structure penalty subtracted from every split gain.
    pub gamma: f64,
}

impl Default for XgbParams {
    fn default() -> Self {
        XgbParams {
            estimators: 200,
            depth: Some(10),
            learning_rate: 0.01,
            l1: 1.0,
            l2: 1.5,
            gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XgbModel {
    base: f64,
    learning_rate: f64,
    trees: Vec<DecisionTree>,
    n_features: usize,
}

impl XgbModel {
    pub fn fit(params: &XgbParams, x: &Matrix, y: &[f64]) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Shape(format!(
                "{} rows vs {} targets",
                x.rows(),
                y.len()
            )));
        }
        if x.rows() < 2 {
            return Err(Error::InsufficientData {
                got: x.rows(),
                need: 2,
            });
        }
        let tree_params = BoostTreeParams {
            max_depth: params.depth,
            min_samples_leaf: 1,
            lambda1: params.l1,
            lambda2: params.l2,
            gamma: params.gamma,
        };
        let n = x.rows();
        let base = crate::linalg::centered_mean(y);
        let mut current = vec![base; n];
        let hess = vec![1.0; n];
        let idx: Vec<usize> = (0..n).collect();
        let mut trees = Vec::with_capacity(params.estimators);
        for _ in 0..params.estimators {
            let grad: Vec<f64> = current.iter().zip(y).map(|(f, t)| f - t).collect();
            let tree = fit_boost_tree(x, &grad, &hess, &idx, &tree_params);
            for (i, f) in current.iter_mut().enumerate() {
                *f += params.learning_rate * tree.predict_row(x.row(i));
            }
            trees.push(tree);
        }
        Ok(XgbModel {
            base,
            learning_rate: params.learning_rate,
            trees,
            n_features: x.cols(),
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::Shape(format!(
                "query has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let mut f = self.base;
        for tree in &self.trees {
            f += self.learning_rate * tree.predict_row(row);
        }
        Ok(f)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|row| self.predict_row(row)).collect()
    }
}

/// Value of the per-leaf objective at weight `w`; used by the optimality
/// tests to confirm the closed form is never beaten.
pub fn leaf_objective(w: f64, g_sum: f64, h_sum: f64, lambda1: f64, lambda2: f64) -> f64 {
    g_sum * w + 0.5 * (h_sum + lambda2) * w * w + lambda1 * w.abs()
}
