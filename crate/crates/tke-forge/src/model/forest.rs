//! Random forest regression: variance-reduction trees over bootstrap
//! resamples, averaged at prediction time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::tree::{fit_variance_tree, DecisionTree, TreeParams};
use crate::seed::{derive_seed_indexed, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub estimators: usize,
    pub depth: Option<usize>,
    pub min_split: usize,
    /// Features considered per split; None keeps all of them.
    pub max_features: Option<usize>,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            estimators: 200,
            depth: Some(10),
            min_split: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

impl RfModel {
    /// Train `estimators` trees, each on its own seeded bootstrap resample.
    /// Tree seeds depend only on `(seed, tree index)`, so results are
    /// identical for any worker count.
    pub fn fit(params: &RfParams, x: &Matrix, y: &[f64], seed: u64) -> Result<Self> {
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
            max_features: params.max_features,
        };
        let n = x.rows();
        let trees: Vec<DecisionTree> = (0..params.estimators)
            .into_par_iter()
            .map(|m| {
                let mut rng = rng_from(derive_seed_indexed(seed, "rf-tree", m as u64));
                let idx: Vec<usize> = (0..n)
                    .map(|_| rand::Rng::gen_range(&mut rng, 0..n))
                    .collect();
                fit_variance_tree(x, y, &idx, &tree_params, &mut rng)
            })
            .collect();
        Ok(RfModel {
            trees,
            n_features: x.cols(),
        })
    }

    /// Per-tree predictions for one query, in tree order.
    pub fn tree_predictions(&self, row: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_row(row)).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::Shape(format!(
                "query has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let preds = self.tree_predictions(row);
        Ok(crate::linalg::centered_mean(&preds))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|row| self.predict_row(row)).collect()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave_data(n: usize) -> (Matrix, Vec<f64>) {
        let x = Matrix::from_rows(
            &(0..n)
                .map(|i| {
                    let t = i as f64 / n as f64 * 6.0;
                    vec![t, (t * 2.0).sin()]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64 * 6.0;
                t * 0.5 + (t * 2.0).sin()
            })
            .collect();
        (x, y)
    }

    #[test]
    fn constant_targets_predict_exactly() {
        let (x, _) = wave_data(50);
        let y = vec![7.5; 50];
        let model = RfModel::fit(&RfParams::default(), &x, &y, 3).unwrap();
        assert_eq!(model.predict_row(&[100.0, -3.0]).unwrap(), 7.5);
    }

    #[test]
    fn prediction_lies_within_tree_envelope() {
        let (x, y) = wave_data(120);
        let model = RfModel::fit(&RfParams::default(), &x, &y, 11).unwrap();
        for i in (0..120).step_by(7) {
            let row = x.row(i);
            let preds = model.tree_predictions(row);
            let lo = preds.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = model.predict_row(row).unwrap();
            assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn identical_seeds_give_identical_forests() {
        let (x, y) = wave_data(60);
        let params = RfParams {
            estimators: 20,
            ..RfParams::default()
        };
        let a = RfModel::fit(&params, &x, &y, 42).unwrap();
        let b = RfModel::fit(&params, &x, &y, 42).unwrap();
        assert_eq!(a, b);
        let c = RfModel::fit(&params, &x, &y, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn worker_count_does_not_change_the_model() {
        let (x, y) = wave_data(80);
        let params = RfParams {
            estimators: 16,
            ..RfParams::default()
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| RfModel::fit(&params, &x, &y, 5).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| RfModel::fit(&params, &x, &y, 5).unwrap());
        assert_eq!(single, many);
    }
}
