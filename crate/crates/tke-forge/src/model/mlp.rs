//! Multilayer perceptron regression trained with Adam on MSE plus an l1
//! weight penalty, with patience-based early stopping on a validation set.
//!
//! Hidden layers use ReLU and the output unit is linear. The alternative
//! `paper_activation` mode applies a softmax to the last hidden layer
//! instead, with a linear readout on top.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed::{derive_seed, derive_seed_indexed, rng_from};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Epochs without validation improvement tolerated beyond the best.
    pub patience: usize,
    /// l1 penalty weight on connection weights (biases are exempt).
    pub l1: f64,
    /// Softmax on the last hidden layer instead of ReLU.
    pub paper_activation: bool,
    /// Fraction of the training rows held out internally for early stopping
    /// when no explicit validation set is provided.
    pub val_fraction: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![64, 32, 16],
            learning_rate: 1e-4,
            batch: 42,
            epochs: 1000,
            patience: 10,
            l1: 0.01,
            paper_activation: false,
            val_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    /// out x in
    w: Matrix,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AdamState {
    m_w: Vec<Matrix>,
    v_w: Vec<Matrix>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: usize,
}

/// Norm-inequality chain values for one weight vector:
/// `l2 <= l1 <= sqrt(n) l2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormChain {
    pub l2: f64,
    pub l1: f64,
    pub sqrt_n_l2: f64,
}

/// `(||w||_2, ||w||_1, sqrt(n) ||w||_2)` for a weight vector.
pub fn norm_chain_check(omega: &[f64]) -> NormChain {
    let l1: f64 = omega.iter().map(|w| w.abs()).sum();
    let l2: f64 = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    NormChain {
        l2,
        l1,
        sqrt_n_l2: (omega.len() as f64).sqrt() * l2,
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Mean minibatch objective (MSE + l1 penalty).
    pub train_loss: f64,
    /// Plain MSE on the validation set.
    pub val_loss: f64,
    /// Norm chain of all connection weights at epoch end.
    pub norms: NormChain,
}

/// Gradients of the batch objective, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub w: Vec<Matrix>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layers: Vec<Layer>,
    params: MlpParams,
    adam: AdamState,
    input_dim: usize,
    shuffle_seed: u64,
    pub history: Vec<EpochRecord>,
}

impl MlpModel {
    /// Seeded He-normal initialization; biases start at zero.
    pub fn new(input_dim: usize, params: &MlpParams, seed: u64) -> Result<Self> {
        if input_dim == 0 || params.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Parameter("layer widths must be >= 1".into()));
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&params.hidden);
        dims.push(1);

        let mut rng = rng_from(derive_seed(seed, "mlp-init"));
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let mut w = Matrix::zeros(fan_out, fan_in);
            for i in 0..fan_out {
                for j in 0..fan_in {
                    let g: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                    w.set(i, j, g * std);
                }
            }
            layers.push(Layer {
                w,
                b: vec![0.0; fan_out],
            });
        }
        let adam = AdamState {
            m_w: layers.iter().map(|l| Matrix::zeros(l.w.rows(), l.w.cols())).collect(),
            v_w: layers.iter().map(|l| Matrix::zeros(l.w.rows(), l.w.cols())).collect(),
            m_b: layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
            v_b: layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
            step: 0,
        };
        Ok(MlpModel {
            layers,
            params: params.clone(),
            adam,
            input_dim,
            shuffle_seed: derive_seed(seed, "mlp-shuffle"),
            history: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn weight_shape(&self, layer: usize) -> (usize, usize) {
        (self.layers[layer].w.rows(), self.layers[layer].w.cols())
    }

    pub fn weight(&self, layer: usize, out: usize, inp: usize) -> f64 {
        self.layers[layer].w.get(out, inp)
    }

    pub fn set_weight(&mut self, layer: usize, out: usize, inp: usize, v: f64) {
        self.layers[layer].w.set(out, inp, v);
    }

    pub fn bias(&self, layer: usize, out: usize) -> f64 {
        self.layers[layer].b[out]
    }

    pub fn set_bias(&mut self, layer: usize, out: usize, v: f64) {
        self.layers[layer].b[out] = v;
    }

    /// All connection weights flattened, layer by layer.
    pub fn weight_vector(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.w.data());
        }
        out
    }

    fn softmax_layer(&self) -> Option<usize> {
        if self.params.paper_activation && self.layers.len() >= 2 {
            Some(self.layers.len() - 2)
        } else {
            None
        }
    }

    /// Forward pass; returns per-layer activations (index 0 is the input).
    fn forward(&self, row: &[f64]) -> Vec<Vec<f64>> {
        let softmax_at = self.softmax_layer();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(row.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let prev = &acts[li];
            let mut z = layer.b.clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let wrow = layer.w.row(o);
                for (j, p) in prev.iter().enumerate() {
                    *zo += wrow[j] * p;
                }
            }
            let a = if li == self.layers.len() - 1 {
                z // linear output
            } else if Some(li) == softmax_at {
                softmax(&z)
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            acts.push(a);
        }
        acts
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "query has {} features, model expects {}",
                row.len(),
                self.input_dim
            )));
        }
        Ok(self.forward(row).last().unwrap()[0])
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|row| self.predict_row(row)).collect()
    }

    /// Mean squared error of predictions on `(x, y)`, no penalty term.
    pub fn mse_on(&self, x: &Matrix, y: &[f64]) -> Result<f64> {
        let preds = self.predict(x)?;
        crate::stats::mse(y, &preds)
    }

    /// Objective value and parameter gradients for one batch:
    /// `mean((pred - y)^2) + l1 sum|w|`.
    pub fn loss_and_gradients(&self, x: &Matrix, y: &[f64]) -> Result<(f64, MlpGradients)> {
        if x.rows() != y.len() {
            return Err(Error::Shape(format!(
                "{} rows vs {} targets",
                x.rows(),
                y.len()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::EmptyInput("empty batch"));
        }
        if x.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} features, model expects {}",
                x.cols(),
                self.input_dim
            )));
        }
        let softmax_at = self.softmax_layer();
        let batch = x.rows() as f64;
        let mut grads = MlpGradients {
            w: self
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.w.rows(), l.w.cols()))
                .collect(),
            b: self.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        };
        let mut loss = 0.0;
        for (r, &target) in y.iter().enumerate() {
            let acts = self.forward(x.row(r));
            let pred = acts.last().unwrap()[0];
            let err = pred - target;
            loss += err * err / batch;

            // delta of the linear output unit
            let mut delta = vec![2.0 * err / batch];
            for li in (0..self.layers.len()).rev() {
                let prev = &acts[li];
                for (o, d) in delta.iter().enumerate() {
                    grads.b[li][o] += d;
                    let grow = grads.w[li].row_mut(o);
                    for (j, p) in prev.iter().enumerate() {
                        grow[j] += d * p;
                    }
                }
                if li == 0 {
                    break;
                }
                // propagate into the previous activation
                let mut da = vec![0.0; prev.len()];
                for (o, d) in delta.iter().enumerate() {
                    let wrow = self.layers[li].w.row(o);
                    for (j, daj) in da.iter_mut().enumerate() {
                        *daj += wrow[j] * d;
                    }
                }
                // through the previous layer's activation function
                let below = li - 1;
                delta = if Some(below) == softmax_at {
                    let sig = &acts[li];
                    let dot: f64 = da.iter().zip(sig).map(|(g, s)| g * s).sum();
                    sig.iter().zip(&da).map(|(s, g)| s * (g - dot)).collect()
                } else {
                    acts[li]
                        .iter()
                        .zip(&da)
                        .map(|(a, g)| if *a > 0.0 { *g } else { 0.0 })
                        .collect()
                };
            }
        }
        // l1 penalty on weights only
        for (li, layer) in self.layers.iter().enumerate() {
            let gw = grads.w[li].data_mut();
            for (gi, wi) in gw.iter_mut().zip(layer.w.data()) {
                loss += self.params.l1 * wi.abs();
                *gi += self.params.l1 * wi.signum_or_zero();
            }
        }
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step: self.adam.step,
            });
        }
        Ok((loss, grads))
    }

    /// One Adam step on a batch. Returns the batch objective.
    pub fn train_step(&mut self, x: &Matrix, y: &[f64]) -> Result<f64> {
        let (loss, grads) = self.loss_and_gradients(x, y)?;
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        let lr = self.params.learning_rate;
        for li in 0..self.layers.len() {
            adam_update(
                self.layers[li].w.data_mut(),
                grads.w[li].data(),
                self.adam.m_w[li].data_mut(),
                self.adam.v_w[li].data_mut(),
                lr,
                bc1,
                bc2,
            );
            adam_update(
                &mut self.layers[li].b,
                &grads.b[li],
                &mut self.adam.m_b[li],
                &mut self.adam.v_b[li],
                lr,
                bc1,
                bc2,
            );
        }
        Ok(loss)
    }

    /// Minibatch training with early stopping: stops once the validation MSE
    /// has not improved for more than `patience` epochs, and restores the
    /// best-validation snapshot. Appends one [`EpochRecord`] per epoch run.
    pub fn train(
        &mut self,
        train_x: &Matrix,
        train_y: &[f64],
        val_x: &Matrix,
        val_y: &[f64],
    ) -> Result<()> {
        if train_x.rows() == 0 || val_x.rows() == 0 {
            return Err(Error::EmptyInput("training requires train and val rows"));
        }
        let n = train_x.rows();
        let batch = self.params.batch.max(1).min(n);
        let mut best_val = f64::INFINITY;
        let mut best_snapshot: Option<Vec<Layer>> = None;
        let mut stale = 0usize;

        for epoch in 0..self.params.epochs {
            let mut order: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(
                &mut order[..],
                &mut rng_from(derive_seed_indexed(self.shuffle_seed, "epoch", epoch as u64)),
            );
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(batch) {
                let bx = train_x.select_rows(chunk);
                let by: Vec<f64> = chunk.iter().map(|&i| train_y[i]).collect();
                epoch_loss += self.train_step(&bx, &by)?;
                batches += 1;
            }
            let val_loss = self.mse_on(val_x, val_y)?;
            if !val_loss.is_finite() {
                return Err(Error::Divergence {
                    step: self.adam.step,
                });
            }
            self.history.push(EpochRecord {
                train_loss: epoch_loss / batches as f64,
                val_loss,
                norms: norm_chain_check(&self.weight_vector()),
            });
            if val_loss < best_val {
                best_val = val_loss;
                best_snapshot = Some(self.layers.clone());
                stale = 0;
            } else {
                stale += 1;
                if stale > self.params.patience {
                    break;
                }
            }
        }
        if let Some(snapshot) = best_snapshot {
            self.layers = snapshot;
        }
        Ok(())
    }

    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_batch(n: usize, dims: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = rng_from(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 - r[dims - 1]).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn small_params(hidden: Vec<usize>) -> MlpParams {
        MlpParams {
            hidden,
            learning_rate: 1e-2,
            batch: 8,
            epochs: 50,
            patience: 10,
            l1: 0.01,
            paper_activation: false,
            val_fraction: 0.1,
        }
    }

    fn gradient_check(params: &MlpParams, seed: u64) -> f64 {
        let (x, y) = toy_batch(5, 2, seed);
        let mut model = MlpModel::new(2, params, seed).unwrap();
        // keep weights clear of the l1 kink and biases off the relu kink
        // (a zero bias parks dead units exactly where the derivative jumps)
        for li in 0..model.layer_count() {
            let (rows, cols) = model.weight_shape(li);
            for i in 0..rows {
                for j in 0..cols {
                    let w = model.weight(li, i, j);
                    let sign = if w == 0.0 { 1.0 } else { w.signum() };
                    model.set_weight(li, i, j, sign * (w.abs() + 0.15));
                }
                model.set_bias(li, i, 0.07 + 0.05 * i as f64 + 0.02 * li as f64);
            }
        }
        let (_, grads) = model.loss_and_gradients(&x, &y).unwrap();
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for li in 0..model.layer_count() {
            let (rows, cols) = model.weight_shape(li);
            for i in 0..rows {
                for j in 0..cols {
                    let w0 = model.weight(li, i, j);
                    model.set_weight(li, i, j, w0 + eps);
                    let (lp, _) = model.loss_and_gradients(&x, &y).unwrap();
                    model.set_weight(li, i, j, w0 - eps);
                    let (lm, _) = model.loss_and_gradients(&x, &y).unwrap();
                    model.set_weight(li, i, j, w0);
                    let fd = (lp - lm) / (2.0 * eps);
                    let a = grads.w[li].get(i, j);
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                    worst = worst.max(rel);
                }
            }
            for o in 0..rows {
                let b0 = model.bias(li, o);
                model.set_bias(li, o, b0 + eps);
                let (lp, _) = model.loss_and_gradients(&x, &y).unwrap();
                model.set_bias(li, o, b0 - eps);
                let (lm, _) = model.loss_and_gradients(&x, &y).unwrap();
                model.set_bias(li, o, b0);
                let fd = (lp - lm) / (2.0 * eps);
                let a = grads.b[li][o];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn tiny_net_gradients_match_closed_form() {
        // 1-1-1 net: pred = w1 * relu(w0 x + b0) + b1
        let params = MlpParams { hidden: vec![1], l1: 0.0, ..small_params(vec![1]) };
        let mut m = MlpModel::new(1, &params, 0).unwrap();
        let (w0, b0, w1, b1) = (0.7, 0.3, -1.2, 0.4);
        m.set_weight(0, 0, 0, w0);
        m.set_bias(0, 0, b0);
        m.set_weight(1, 0, 0, w1);
        m.set_bias(1, 0, b1);
        let x = Matrix::from_rows(&[vec![2.0]]).unwrap();
        let y = vec![1.0];
        let h = (w0 * 2.0 + b0).max(0.0);
        let pred = w1 * h + b1;
        let dpred = 2.0 * (pred - y[0]);
        let (loss, g) = m.loss_and_gradients(&x, &y).unwrap();
        assert!((loss - (pred - y[0]).powi(2)).abs() < 1e-15);
        assert!((g.b[1][0] - dpred).abs() < 1e-15);
        assert!((g.w[1].get(0, 0) - dpred * h).abs() < 1e-15);
        assert!((g.b[0][0] - dpred * w1).abs() < 1e-15);
        assert!((g.w[0].get(0, 0) - dpred * w1 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        for seed in 0..5 {
            let worst = gradient_check(&small_params(vec![2, 2, 2]), seed);
            assert!(worst <= 1e-4, "seed {seed}: max relative error {worst}");
        }
    }

    #[test]
    fn backprop_matches_finite_differences_with_softmax_layer() {
        let mut params = small_params(vec![2, 2, 2]);
        params.paper_activation = true;
        for seed in 0..3 {
            let worst = gradient_check(&params, seed);
            assert!(worst <= 1e-4, "seed {seed}: max relative error {worst}");
        }
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let (x, y) = toy_batch(10, 2, 3);
        let mut params = small_params(vec![3]);
        params.learning_rate = 0.0;
        let mut model = MlpModel::new(2, &params, 1).unwrap();
        let before = model.clone();
        model.train_step(&x, &y).unwrap();
        assert_eq!(model.layers, before.layers);
    }

    #[test]
    fn adam_step_size_is_bounded() {
        let (x, y) = toy_batch(16, 2, 9);
        let params = small_params(vec![4, 3]);
        let mut model = MlpModel::new(2, &params, 2).unwrap();
        for _ in 0..25 {
            let before = model.weight_vector();
            model.train_step(&x, &y).unwrap();
            let after = model.weight_vector();
            for (a, b) in before.iter().zip(&after) {
                assert!((a - b).abs() <= 10.0 * params.learning_rate + 1e-15);
            }
        }
    }

    #[test]
    fn large_l1_shrinks_weights_on_noise() {
        let (x, _) = toy_batch(64, 2, 11);
        let mut rng = rng_from(12);
        let noise: Vec<f64> = (0..64).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let mut params = small_params(vec![4]);
        params.l1 = 10.0;
        params.learning_rate = 1e-2;
        let mut model = MlpModel::new(2, &params, 5).unwrap();
        let median = |mut v: Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let before = median(model.weight_vector().iter().map(|w| w.abs()).collect());
        for _ in 0..200 {
            model.train_step(&x, &noise).unwrap();
        }
        let after = median(model.weight_vector().iter().map(|w| w.abs()).collect());
        assert!(after < before, "median |w| {before} -> {after}");
    }

    #[test]
    fn frozen_validation_stops_after_patience_plus_one() {
        let (x, y) = toy_batch(20, 2, 21);
        let (vx, vy) = toy_batch(8, 2, 22);
        let mut params = small_params(vec![3]);
        params.learning_rate = 0.0; // no updates, so val loss is frozen
        params.epochs = 100;
        params.patience = 3;
        let mut model = MlpModel::new(2, &params, 7).unwrap();
        model.train(&x, &y, &vx, &vy).unwrap();
        // best at epoch 1, then patience + 1 stale epochs
        assert_eq!(model.epochs_run(), 1 + params.patience + 1);
    }

    #[test]
    fn improving_validation_runs_all_epochs() {
        let (x, y) = toy_batch(60, 2, 31);
        let (vx, vy) = toy_batch(20, 2, 32);
        let mut params = small_params(vec![6]);
        params.epochs = 25;
        params.learning_rate = 5e-3;
        let mut model = MlpModel::new(2, &params, 3).unwrap();
        model.train(&x, &y, &vx, &vy).unwrap();
        let strictly_improving = model
            .history
            .windows(2)
            .all(|w| w[1].val_loss < w[0].val_loss);
        assert!(
            strictly_improving,
            "fixture must improve every epoch: {:?}",
            model.history.iter().map(|r| r.val_loss).collect::<Vec<_>>()
        );
        assert_eq!(model.epochs_run(), 25);
    }

    #[test]
    fn learns_a_linear_task() {
        let (x, y) = toy_batch(400, 2, 41);
        let (vx, vy) = toy_batch(100, 2, 42);
        let mut params = small_params(vec![16, 8]);
        params.epochs = 300;
        params.learning_rate = 3e-3;
        params.l1 = 1e-4;
        let mut model = MlpModel::new(2, &params, 8).unwrap();
        model.train(&x, &y, &vx, &vy).unwrap();
        let val_mse = model.mse_on(&vx, &vy).unwrap();
        let var = {
            let m = vy.iter().sum::<f64>() / vy.len() as f64;
            vy.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vy.len() as f64
        };
        assert!(val_mse < 0.1 * var, "val mse {val_mse} vs variance {var}");
    }

    #[test]
    fn norm_chain_cases() {
        // one-hot: l1 == l2 exactly
        let mut one_hot = vec![0.0; 9];
        one_hot[4] = -2.5;
        let c = norm_chain_check(&one_hot);
        assert_eq!(c.l1, 2.5);
        assert_eq!(c.l2, 2.5);
        assert_eq!(c.sqrt_n_l2, 3.0 * 2.5);

        // all-equal with a perfect-square length: l1 == sqrt(n) l2 exactly
        let equal = vec![0.75; 16];
        let c = norm_chain_check(&equal);
        assert_eq!(c.l1, 16.0 * 0.75);
        assert_eq!(c.sqrt_n_l2, c.l1);
        assert!(c.l2 <= c.l1);

        // random vector keeps the chain ordered
        let mut rng = rng_from(9);
        let v: Vec<f64> = (0..37).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let c = norm_chain_check(&v);
        assert!(c.l2 <= c.l1 && c.l1 <= c.sqrt_n_l2);
    }

    #[test]
    fn history_norm_chain_holds_during_training() {
        let (x, y) = toy_batch(50, 2, 51);
        let (vx, vy) = toy_batch(20, 2, 52);
        let mut params = small_params(vec![5, 4]);
        params.epochs = 15;
        let mut model = MlpModel::new(2, &params, 4).unwrap();
        model.train(&x, &y, &vx, &vy).unwrap();
        for rec in &model.history {
            assert!(rec.norms.l2 <= rec.norms.l1 + 1e-12);
            assert!(rec.norms.l1 <= rec.norms.sqrt_n_l2 + 1e-12);
        }
    }
}
