//! Multilayer perceptron with batch normalization, trained by Adam.
//!
//! Hidden layers are `dense → batch-norm → ReLU`; the output layer is a
//! single linear unit predicting the standardized mass. The loss is
//! `MSE + l2 · Σ‖W‖²` over the dense weight matrices only.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::FeatureEncoder;
use super::shaped;
use crate::error::{Error, Result};
use crate::preprocess::FeatureRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_depth: usize,
    pub layer_width: usize,
    pub l2_penalty: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub bn_epsilon: f64,
    /// Weight of the newest batch in the running statistics.
    pub bn_momentum: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_depth: 5,
            layer_width: 80,
            l2_penalty: 0.01,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 256,
            max_epochs: 300,
            patience: 20,
            seed: 0,
            bn_epsilon: 1e-5,
            bn_momentum: 0.1,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(3..=9).contains(&self.hidden_depth) {
            return bad(format!("mlp hidden_depth must lie in [3, 9], got {}", self.hidden_depth));
        }
        if !(32..=100).contains(&self.layer_width) {
            return bad(format!("mlp layer_width must lie in [32, 100], got {}", self.layer_width));
        }
        if !(0.001..=0.05).contains(&self.l2_penalty) {
            return bad(format!("mlp l2_penalty must lie in [0.001, 0.05], got {}", self.l2_penalty));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam needs lr > 0 and betas in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) || self.bn_epsilon < 0.0 || !(0.0..=1.0).contains(&self.bn_momentum) {
            return bad("epsilons must be non-negative and bn_momentum in [0, 1]".into());
        }
        if self.batch_size < 2 || self.max_epochs == 0 {
            return bad("batch_size must be >= 2 and max_epochs >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs × outputs`.
    #[serde(with = "shaped::matrix")]
    pub weight: DMatrix<f64>,
    #[serde(with = "shaped::vector")]
    pub bias: DVector<f64>,
}

impl Dense {
    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * &self.weight;
        for (mut col, b) in z.column_iter_mut().zip(self.bias.iter()) {
            col.add_scalar_mut(*b);
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    #[serde(with = "shaped::vector")]
    pub gamma: DVector<f64>,
    #[serde(with = "shaped::vector")]
    pub beta: DVector<f64>,
    #[serde(with = "shaped::vector")]
    pub running_mean: DVector<f64>,
    #[serde(with = "shaped::vector")]
    pub running_var: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub dense: Dense,
    pub norm: BatchNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub hidden: Vec<HiddenLayer>,
    pub output: Dense,
    pub bn_epsilon: f64,
}

struct LayerCache {
    input: DMatrix<f64>,
    x_hat: DMatrix<f64>,
    inv_std: DVector<f64>,
    pre_relu: DMatrix<f64>,
}

/// Batch mean and biased variance of each hidden layer, in layer order.
pub struct BatchStats(pub Vec<(DVector<f64>, DVector<f64>)>);

fn he_uniform(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> DMatrix<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    DMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..limit))
}

fn col_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

impl Network {
    /// Fresh network with He-uniform weights, zero biases and identity
    /// batch-norm.
    pub fn new(input: usize, hidden: &[usize], seed: u64, bn_epsilon: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = input;
        let mut layers = Vec::with_capacity(hidden.len());
        for &w in hidden {
            layers.push(HiddenLayer {
                dense: Dense {
                    weight: he_uniform(&mut rng, fan_in, w),
                    bias: DVector::zeros(w),
                },
                norm: BatchNorm {
                    gamma: DVector::from_element(w, 1.0),
                    beta: DVector::zeros(w),
                    running_mean: DVector::zeros(w),
                    running_var: DVector::from_element(w, 1.0),
                },
            });
            fan_in = w;
        }
        Self {
            hidden: layers,
            output: Dense {
                weight: he_uniform(&mut rng, fan_in, 1),
                bias: DVector::zeros(1),
            },
            bn_epsilon,
        }
    }

    pub fn input_width(&self) -> usize {
        self.hidden.first().map_or(self.output.weight.nrows(), |l| l.dense.weight.nrows())
    }

    fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(Error::DimensionMismatch {
                expected: self.input_width(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Inference with running statistics; row results do not depend on the
    /// rest of the batch.
    pub fn infer(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        let mut a = x.clone();
        for layer in &self.hidden {
            let mut z = layer.dense.forward(&a);
            let n = &layer.norm;
            for (j, mut col) in z.column_iter_mut().enumerate() {
                let scale = n.gamma[j] / (n.running_var[j] + self.bn_epsilon).sqrt();
                let shift = n.beta[j] - n.running_mean[j] * scale;
                col.apply(|v| *v = (*v * scale + shift).max(0.0));
            }
            a = z;
        }
        Ok(self.output.forward(&a).column(0).into_owned())
    }

    fn forward_train(&self, x: &DMatrix<f64>) -> (DVector<f64>, Vec<LayerCache>, BatchStats) {
        let b = x.nrows() as f64;
        let mut a = x.clone();
        let mut caches = Vec::with_capacity(self.hidden.len());
        let mut stats = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let z = layer.dense.forward(&a);
            let mean = col_sums(&z) / b;
            let mut x_hat = z;
            let mut var = DVector::zeros(x_hat.ncols());
            let mut inv_std = DVector::zeros(x_hat.ncols());
            for (j, mut col) in x_hat.column_iter_mut().enumerate() {
                col.add_scalar_mut(-mean[j]);
                var[j] = col.norm_squared() / b;
                inv_std[j] = 1.0 / (var[j] + self.bn_epsilon).sqrt();
                col *= inv_std[j];
            }
            let mut pre = x_hat.clone();
            for (j, mut col) in pre.column_iter_mut().enumerate() {
                let (g, bt) = (layer.norm.gamma[j], layer.norm.beta[j]);
                col.apply(|v| *v = *v * g + bt);
            }
            let next = pre.map(|v| v.max(0.0));
            caches.push(LayerCache {
                input: a,
                x_hat,
                inv_std,
                pre_relu: pre,
            });
            stats.push((mean, var));
            a = next;
        }
        let out = self.output.forward(&a).column(0).into_owned();
        caches.push(LayerCache {
            input: a,
            x_hat: DMatrix::zeros(0, 0),
            inv_std: DVector::zeros(0),
            pre_relu: DMatrix::zeros(0, 0),
        });
        (out, caches, BatchStats(stats))
    }

    fn weight_penalty(&self) -> f64 {
        self.hidden.iter().map(|l| l.dense.weight.norm_squared()).sum::<f64>() + self.output.weight.norm_squared()
    }

    /// Training-mode loss `MSE + l2 · Σ‖W‖²` on one batch.
    pub fn loss(&self, x: &DMatrix<f64>, target: &DVector<f64>, l2: f64) -> f64 {
        let (out, _, _) = self.forward_train(x);
        (out - target).norm_squared() / x.nrows() as f64 + l2 * self.weight_penalty()
    }

    /// Training-mode loss, its data part, the gradient of every parameter in
    /// [`Network::params_mut`] order, and the batch statistics.
    pub fn loss_and_grad(&self, x: &DMatrix<f64>, target: &DVector<f64>, l2: f64) -> (f64, f64, Vec<DMatrix<f64>>, BatchStats) {
        let b = x.nrows() as f64;
        let (out, caches, stats) = self.forward_train(x);
        let err = out - target;
        let mse = err.norm_squared() / b;
        let loss = mse + l2 * self.weight_penalty();

        let mut grads_rev: Vec<DMatrix<f64>> = Vec::with_capacity(4 * self.hidden.len() + 2);
        let d_out = DMatrix::from_column_slice(x.nrows(), 1, (err * (2.0 / b)).as_slice());
        let last = caches.last().expect("output cache");
        let dw = last.input.transpose() * &d_out + &self.output.weight * (2.0 * l2);
        grads_rev.push(DMatrix::from_column_slice(1, 1, &[d_out.sum()]));
        grads_rev.push(dw);
        let mut da = &d_out * self.output.weight.transpose();

        for (layer, cache) in self.hidden.iter().zip(&caches).rev() {
            let mut dy = da;
            dy.zip_apply(&cache.pre_relu, |g, p| {
                if p <= 0.0 {
                    *g = 0.0
                }
            });
            let d_gamma = DVector::from_iterator(dy.ncols(), dy.column_iter().zip(cache.x_hat.column_iter()).map(|(g, h)| g.dot(&h)));
            let d_beta = col_sums(&dy);
            let mut dz = dy;
            for (j, mut col) in dz.column_iter_mut().enumerate() {
                let g = layer.norm.gamma[j];
                let s1 = g * d_beta[j];
                let s2 = g * d_gamma[j];
                let xh = cache.x_hat.column(j);
                let k = cache.inv_std[j] / b;
                for (i, v) in col.iter_mut().enumerate() {
                    *v = k * (b * g * *v - s1 - xh[i] * s2);
                }
            }
            let dw = cache.input.transpose() * &dz + &layer.dense.weight * (2.0 * l2);
            let db = col_sums(&dz);
            grads_rev.push(DMatrix::from_column_slice(d_beta.len(), 1, d_beta.as_slice()));
            grads_rev.push(DMatrix::from_column_slice(d_gamma.len(), 1, d_gamma.as_slice()));
            grads_rev.push(DMatrix::from_column_slice(db.len(), 1, db.as_slice()));
            grads_rev.push(dw);
            da = dz * layer.dense.weight.transpose();
        }
        grads_rev.reverse();
        (loss, mse, grads_rev, stats)
    }

    /// Trainable parameters: per hidden layer `W, b, γ, β`, then the output
    /// `W, b`. Slices are column-major.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(4 * self.hidden.len() + 2);
        for l in &mut self.hidden {
            out.push(l.dense.weight.as_mut_slice());
            out.push(l.dense.bias.as_mut_slice());
            out.push(l.norm.gamma.as_mut_slice());
            out.push(l.norm.beta.as_mut_slice());
        }
        out.push(self.output.weight.as_mut_slice());
        out.push(self.output.bias.as_mut_slice());
        out
    }

    pub fn update_running_stats(&mut self, stats: &BatchStats, momentum: f64, batch: usize) {
        let unbias = if batch > 1 { batch as f64 / (batch as f64 - 1.0) } else { 1.0 };
        for (l, (mean, var)) in self.hidden.iter_mut().zip(&stats.0) {
            l.norm.running_mean = &l.norm.running_mean * (1.0 - momentum) + mean * momentum;
            l.norm.running_var = &l.norm.running_var * (1.0 - momentum) + var * (momentum * unbias);
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[&[f64]]) {
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            for (i, (w, &gi)) in p.iter_mut().zip(g.iter()).enumerate() {
                let m = &mut self.m[k][i];
                let v = &mut self.v[k][i];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
                *w -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch MSE in standardized units, without the penalty.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub encoder: FeatureEncoder,
    pub network: Network,
}

impl MlpModel {
    /// Predicted gross mass (kg) for each row.
    pub fn predict(&self, rows: &[FeatureRow]) -> Result<Vec<f64>> {
        let x = self.encoder.inputs(rows)?;
        let z = self.network.infer(&x)?;
        Ok(z.iter().map(|&v| self.encoder.standardizer.inverse_y(v)).collect())
    }
}

fn mse_infer(net: &Network, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    Ok((net.infer(x)? - y).norm_squared() / y.len() as f64)
}

/// Trains on `train`, keeping the parameters with the lowest validation loss.
pub fn mlp_train(config: &MlpConfig, train: &[FeatureRow], val: &[FeatureRow]) -> Result<(MlpModel, TrainingHistory)> {
    if train.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    mlp_train_encoded(config, FeatureEncoder::fit(train, false)?, train, val)
}

/// [`mlp_train`] with a caller-supplied encoder.
pub fn mlp_train_encoded(
    config: &MlpConfig,
    encoder: FeatureEncoder,
    train: &[FeatureRow],
    val: &[FeatureRow],
) -> Result<(MlpModel, TrainingHistory)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation rows"));
    }
    let x = encoder.inputs(train)?;
    let y = DVector::from_vec(encoder.targets(train));
    let xv = encoder.inputs(val)?;
    let yv = DVector::from_vec(encoder.targets(val));

    let widths = vec![config.layer_width; config.hidden_depth];
    let mut net = Network::new(encoder.width(), &widths, config.seed, config.bn_epsilon);
    let mut adam = Adam::new(config.learning_rate, config.beta1, config.beta2, config.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..x.nrows()).collect();

    let mut history = TrainingHistory::default();
    let mut best = (f64::INFINITY, net.clone());
    let mut wait = 0;
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut seen) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let xb = x.select_rows(batch);
            let yb = DVector::from_iterator(batch.len(), batch.iter().map(|&i| y[i]));
            let (loss, mse, grads, stats) = net.loss_and_grad(&xb, &yb, config.l2_penalty);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            let slices: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
            adam.step(net.params_mut(), &slices);
            net.update_running_stats(&stats, config.bn_momentum, batch.len());
            sum += mse * batch.len() as f64;
            seen += batch.len();
        }
        let train_loss = sum / seen.max(1) as f64;
        let val_loss = mse_infer(&net, &xv, &yv)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, loss: val_loss });
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, net.clone());
            history.best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((
        MlpModel {
            config: *config,
            encoder,
            network: best.1,
        },
        history,
    ))
}

/// Worst relative error between backprop gradients and central finite
/// differences over every parameter of `net`.
///
/// Differences below the rounding noise of the central difference count as
/// agreement. Dense biases feeding batch norm have an identically zero
/// gradient, so their numeric estimate is nothing but that noise.
pub fn max_gradient_error(net: &Network, x: &DMatrix<f64>, y: &DVector<f64>, l2: f64) -> f64 {
    let (loss, _, grads, _) = net.loss_and_grad(x, y, l2);
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    let noise = 64.0 * f64::EPSILON * loss.abs().max(1.0) / h;
    let n_params = grads.len();
    for k in 0..n_params {
        for i in 0..grads[k].len() {
            let mut plus = net.clone();
            plus.params_mut()[k][i] += h;
            let mut minus = net.clone();
            minus.params_mut()[k][i] -= h;
            let numeric = (plus.loss(x, y, l2) - minus.loss(x, y, l2)) / (2.0 * h);
            let analytic = grads[k].as_slice()[i];
            if (analytic - numeric).abs() <= noise {
                continue;
            }
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn random_batch(rows: usize, cols: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0));
        (x, y)
    }

    /// Largest relative error between backprop and central differences.
    #[test]
    fn gradients_match_finite_differences() {
        let mut net = Network::new(2, &[3], 4, 1e-5);
        net.hidden[0].norm.gamma = DVector::from_vec(vec![1.3, 0.7, 1.1]);
        net.hidden[0].norm.beta = DVector::from_vec(vec![0.2, -0.1, 0.4]);
        let (x, y) = random_batch(4, 2, 5);
        assert!(max_gradient_error(&net, &x, &y, 0.01) < 1e-4);

        let net = Network::new(4, &[5, 4, 3], 6, 1e-5);
        let (x, y) = random_batch(7, 4, 7);
        assert!(max_gradient_error(&net, &x, &y, 0.03) < 1e-4);
    }

    #[test]
    fn bias_before_batch_norm_has_no_gradient() {
        let net = Network::new(3, &[4, 2], 9, 1e-3);
        let (x, y) = random_batch(6, 3, 10);
        let (_, _, grads, _) = net.loss_and_grad(&x, &y, 0.01);
        // per hidden layer W, b, γ, β
        for layer in 0..2 {
            assert!(grads[4 * layer + 1].amax() < 1e-12);
        }
    }

    #[test]
    fn adam_single_step_by_hand() {
        let mut w = [0.5, -1.0];
        let g = [0.2, -3.0];
        let mut adam = Adam::new(1e-3, 0.9, 0.999, 1e-8);
        adam.step(vec![&mut w[..]], &[&g[..]]);
        // m̂ = g, v̂ = g², so the step is lr · g / (|g| + ε)
        assert!((w[0] - (0.5 - 1e-3 * 0.2 / (0.2 + 1e-8))).abs() < 1e-12);
        assert!((w[1] - (-1.0 + 1e-3 * 3.0 / (3.0 + 1e-8))).abs() < 1e-12);
        assert!((w[0] - 0.49900000005).abs() < 1e-12);

        // second step with a new gradient, against an independently evaluated value
        adam.step(vec![&mut w[..]], &[&[0.1, 1.0][..]]);
        assert!((w[0] - 0.49806782047015365).abs() < 1e-12, "{}", w[0]);
    }

    #[test]
    fn hand_forward_pass() {
        let mut net = Network::new(1, &[1], 0, 0.0);
        net.hidden[0].dense.weight = DMatrix::from_element(1, 1, 1.5);
        net.hidden[0].dense.bias = DVector::from_element(1, -0.5);
        net.output.weight = DMatrix::from_element(1, 1, -2.0);
        net.output.bias = DVector::from_element(1, 0.25);
        let y = net.infer(&DMatrix::from_element(1, 1, 2.0)).unwrap();
        // relu(2·1.5 − 0.5)·(−2) + 0.25
        assert_eq!(y[0], -4.75);
        let y = net.infer(&DMatrix::from_element(1, 1, -2.0)).unwrap();
        assert_eq!(y[0], 0.25);
    }

    #[test]
    fn constant_network() {
        let mut net = Network::new(3, &[4, 4, 4], 1, 1e-5);
        for l in &mut net.hidden {
            l.dense.weight.fill(0.0);
        }
        net.output.weight.fill(0.0);
        net.output.bias[0] = 0.8;
        let (x, _) = random_batch(10, 3, 2);
        let out = net.infer(&x).unwrap();
        assert!(out.iter().all(|&v| v == 0.8));
    }

    #[test]
    fn infer_rejects_wrong_width() {
        let net = Network::new(3, &[4], 1, 1e-5);
        assert!(matches!(
            net.infer(&DMatrix::zeros(2, 5)),
            Err(Error::DimensionMismatch { expected: 3, got: 5 })
        ));
    }

    #[test]
    fn config_ranges() {
        assert!(MlpConfig::default().validate().is_ok());
        assert!(MlpConfig { hidden_depth: 2, ..Default::default() }.validate().is_err());
        assert!(MlpConfig { layer_width: 101, ..Default::default() }.validate().is_err());
        assert!(MlpConfig { l2_penalty: 0.1, ..Default::default() }.validate().is_err());
    }

    fn toy_rows(n: usize, seed: u64) -> Vec<FeatureRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut x = [0.0; 15];
                x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                let m = 250_000.0 + 20_000.0 * x[0] - 10_000.0 * x[1] * x[2];
                FeatureRow {
                    x,
                    dh: rng.random_range(0.0..5000.0),
                    dt: i as f64,
                    reg: if i % 2 == 0 { "A".into() } else { "B".into() },
                    target_m: m,
                    fuel_burned: 0.0,
                }
            })
            .collect()
    }

    fn small_config() -> MlpConfig {
        MlpConfig {
            hidden_depth: 3,
            layer_width: 32,
            batch_size: 64,
            max_epochs: 15,
            learning_rate: 3e-3,
            ..Default::default()
        }
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let train = toy_rows(600, 1);
        let val = toy_rows(150, 2);
        let (a, ha) = mlp_train(&small_config(), &train, &val).unwrap();
        let (b, hb) = mlp_train(&small_config(), &train, &val).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        let first = ha.epochs[0].val_loss;
        let best = ha.epochs[ha.best_epoch - 1].val_loss;
        assert!(best < 0.5 * first, "{first} -> {best}");
        let p1 = a.predict(&val).unwrap();
        assert_eq!(p1, a.predict(&val).unwrap());
    }

    #[test]
    fn inference_is_batch_size_invariant() {
        let train = toy_rows(300, 3);
        let (model, _) = mlp_train(&MlpConfig { max_epochs: 3, ..small_config() }, &train, &train[..50]).unwrap();
        let all = model.predict(&train[..40]).unwrap();
        for (i, row) in train[..40].iter().enumerate() {
            let one = model.predict(std::slice::from_ref(row)).unwrap()[0];
            assert!((one - all[i]).abs() <= 1e-9 * all[i].abs(), "{one} vs {}", all[i]);
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        let rows = toy_rows(10, 0);
        assert!(mlp_train(&small_config(), &[], &rows).is_err());
        assert!(mlp_train(&small_config(), &rows, &[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn random_small_networks_pass_gradient_check(
            seed in 0u64..10_000,
            input in 1usize..4,
            h1 in 1usize..4,
            h2 in 0usize..4,
            batch in 3usize..7,
        ) {
            let hidden: Vec<usize> = [h1, h2].into_iter().filter(|&w| w > 0).collect();
            let net = Network::new(input, &hidden, seed, 1e-3);
            let (x, y) = random_batch(batch, input, seed + 1);
            prop_assert!(max_gradient_error(&net, &x, &y, 0.01) < 1e-4);
        }
    }
}
