//! k-nearest-neighbor regression with Euclidean distance and either uniform
//! or inverse-distance weighting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Neighbor weighting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    /// Weight each neighbor by the reciprocal of its distance.
    #[default]
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub neighbors: usize,
    pub weights: Weighting,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            neighbors: 3,
            weights: Weighting::Distance,
        }
    }
}

/// Stored training set plus the query policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    x: Matrix,
    y: Vec<f64>,
    params: KnnParams,
}

/// Euclidean distance between two points of equal dimension.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "vectors of dimension {} and {} cannot be compared",
            a.len(),
            b.len()
        )));
    }
    Ok(crate::linalg::squared_distance(a, b).sqrt())
}

impl KnnModel {
    pub fn fit(params: &KnnParams, x: &Matrix, y: &[f64]) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Shape(format!(
                "{} rows vs {} targets",
                x.rows(),
                y.len()
            )));
        }
        if params.neighbors == 0 {
            return Err(Error::Parameter("neighbor count must be >= 1".into()));
        }
        if params.neighbors > x.rows() {
            return Err(Error::Parameter(format!(
                "k = {} exceeds the {} training samples",
                params.neighbors,
                x.rows()
            )));
        }
        Ok(KnnModel {
            x: x.clone(),
            y: y.to_vec(),
            params: params.clone(),
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.x.cols() {
            return Err(Error::Shape(format!(
                "query has {} features, model expects {}",
                row.len(),
                self.x.cols()
            )));
        }
        let mut dist: Vec<(f64, usize)> = (0..self.x.rows())
            .map(|i| (crate::linalg::squared_distance(self.x.row(i), row), i))
            .collect();
        dist.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let selected = &dist[..self.params.neighbors];

        // Exact matches dominate in the infinite-weight limit of
        // inverse-distance weighting; return their average directly.
        let exact: Vec<usize> = selected
            .iter()
            .filter(|(d2, _)| *d2 == 0.0)
            .map(|&(_, i)| i)
            .collect();
        if !exact.is_empty() {
            return Ok(exact.iter().map(|&i| self.y[i]).sum::<f64>() / exact.len() as f64);
        }

        // both averages are computed about the first neighbor's target, so
        // a constant training target is reproduced bit-exactly
        let anchor = self.y[selected[0].1];
        match self.params.weights {
            Weighting::Uniform => {
                let correction: f64 = selected
                    .iter()
                    .map(|&(_, i)| self.y[i] - anchor)
                    .sum::<f64>()
                    / selected.len() as f64;
                Ok(anchor + correction)
            }
            Weighting::Distance => {
                let mut num = 0.0;
                let mut den = 0.0;
                for &(d2, i) in selected {
                    let w = 1.0 / d2.sqrt();
                    num += w * (self.y[i] - anchor);
                    den += w;
                }
                Ok(anchor + num / den)
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|row| self.predict_row(row)).collect()
    }
}
