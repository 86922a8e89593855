//! Gradient boosting: stagewise trees fit to residuals, combined with a
//! constant learning rate on top of a mean initial prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::tree::{fit_variance_tree, DecisionTree, TreeParams};
use crate::seed::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrParams {
    pub estimators: usize,
    /// Step size applied to every stage.
    pub rate: f64,
    pub depth: Option<usize>,
    pub min_split: usize,
}

impl Default for GbrParams {
    fn default() -> Self {
        GbrParams {
            estimators: 100,
            rate: 0.2,
            depth: Some(3),
            min_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrModel {
    /// Initial constant prediction: the train-target mean.
    f0: f64,
    rate: f64,
    trees: Vec<DecisionTree>,
    n_features: usize,
}

impl GbrModel {
    pub fn fit(params: &GbrParams, x: &Matrix, y: &[f64], seed: u64) -> Result<Self> {
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
        let tree_params = TreeParams {
            max_depth: params.depth,
            min_samples_split: params.min_split,
            min_samples_leaf: 1,
            max_features: None,
        };
        let n = x.rows();
        let f0 = crate::linalg::centered_mean(y);
        let mut current = vec![f0; n];
        let mut trees = Vec::with_capacity(params.estimators);
        let idx: Vec<usize> = (0..n).collect();
        let mut rng = rng_from(seed);
        for _ in 0..params.estimators {
            let residuals: Vec<f64> = y.iter().zip(&current).map(|(t, f)| t - f).collect();
            let tree = fit_variance_tree(x, &residuals, &idx, &tree_params, &mut rng);
            for (i, f) in current.iter_mut().enumerate() {
                *f += params.rate * tree.predict_row(x.row(i));
            }
            trees.push(tree);
        }
        Ok(GbrModel {
            f0,
            rate: params.rate,
            trees,
            n_features: x.cols(),
        })
    }

    /// Prediction after only the first `stages` boosting stages.
    pub fn predict_row_staged(&self, row: &[f64], stages: usize) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::Shape(format!(
                "query has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let mut f = self.f0;
        for tree in self.trees.iter().take(stages) {
            f += self.rate * tree.predict_row(row);
        }
        Ok(f)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        self.predict_row_staged(row, self.trees.len())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|row| self.predict_row(row)).collect()
    }

    pub fn n_stages(&self) -> usize {
        self.trees.len()
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }
}
