//! Dynamic-inner canonical correlation analysis (DiCCA) smoothing.
//!
//! Each dynamic latent variable (DLV) is a score `v = X w` chosen so that an
//! AR(s) model of its own past explains as much of it as possible. Components
//! are extracted one at a time from the standardized data and deflated with
//! `X ← X − v pᵀ`, `p = Xᵀv / vᵀv`. Smoothing keeps the first `n_dlv`
//! reconstructions `v pᵀ` and drops the remainder, which holds the least
//! predictable (noisiest) directions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_core::{FlightSample, FEATURE_CHANNELS, N_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiccaConfig {
    pub n_dlv: usize,
    pub ar_order: usize,
    /// Relative change of the objective that ends the alternation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DiccaConfig {
    fn default() -> Self {
        Self {
            n_dlv: 14,
            ar_order: 5,
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl DiccaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_dlv == 0 || self.n_dlv > N_FEATURES {
            return Err(Error::Config(format!("dicca n_dlv must lie in [1, {N_FEATURES}], got {}", self.n_dlv)));
        }
        if self.ar_order == 0 {
            return Err(Error::Config("dicca ar_order must be >= 1".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("dicca tol must be > 0 and max_iter >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiccaModel {
    pub n_dlv: usize,
    pub ar_order: usize,
    /// `p × n_dlv`, unit-norm columns.
    pub weights: DMatrix<f64>,
    /// `p × n_dlv`.
    pub loadings: DMatrix<f64>,
    /// `n_dlv × ar_order`; row `k` holds `β_1..β_s` of component `k`.
    pub ar_coefficients: DMatrix<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Fraction of each score explained by its AR prediction, in extraction order.
    pub objectives: Vec<f64>,
    pub converged: Vec<bool>,
}

fn is_constant(values: impl Iterator<Item = f64> + Clone) -> bool {
    let mut it = values.clone();
    let Some(first) = it.next() else {
        return true;
    };
    it.all(|v| v == first)
}

fn column_stats(data: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let t = data.nrows() as f64;
    let mut means = Vec::with_capacity(data.ncols());
    let mut scales = Vec::with_capacity(data.ncols());
    for col in data.column_iter() {
        let mean = col.sum() / t;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1.0);
        means.push(mean);
        scales.push(var.sqrt());
    }
    (means, scales)
}

/// Dominant eigenvector of a symmetric matrix with the sign fixed so that the
/// largest-magnitude entry is positive.
fn dominant_eigenvector(m: &DMatrix<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let k = eig.eigenvalues.imax();
    let mut v = eig.eigenvectors.column(k).into_owned();
    if v[v.iamax()] < 0.0 {
        v.neg_mut();
    }
    v
}

/// `B^{-1/2}` on the range of `B`, zero on its null space.
fn pinv_sqrt(b: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(b.clone());
    let top = eig.eigenvalues.max().max(0.0);
    let floor = top * 1e-12;
    let inv = eig.eigenvalues.map(|l| if l > floor && l > 0.0 { 1.0 / l.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Least-squares AR(s) coefficients of `v`, and the explained fraction.
fn fit_ar(v: &DVector<f64>, s: usize) -> (DVector<f64>, f64) {
    let t = v.len();
    let n = t - s;
    let target = v.rows(s, n);
    let lags = DMatrix::from_fn(n, s, |r, i| v[s + r - i - 1]);
    let beta = lags
        .clone()
        .svd(true, true)
        .solve(&target, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(s));
    let pred = &lags * &beta;
    let denom = target.norm_squared();
    let j = if denom > 0.0 { pred.norm_squared() / denom } else { 0.0 };
    (beta, j)
}

struct Component {
    w: DVector<f64>,
    beta: DVector<f64>,
    objective: f64,
    converged: bool,
}

fn extract_component(x: &DMatrix<f64>, s: usize, tol: f64, max_iter: usize) -> Component {
    let t = x.nrows();
    let n = t - s;
    let y = x.rows(s, n);
    let b = y.transpose() * y;
    let b_isqrt = pinv_sqrt(&b);
    let cross: Vec<DMatrix<f64>> = (1..=s).map(|i| y.transpose() * x.rows(s - i, n)).collect();

    let mut w = dominant_eigenvector(&(x.transpose() * x));
    let (mut beta, mut objective) = fit_ar(&(x * &w), s);
    let mut best = (w.clone(), beta.clone(), objective);
    let mut converged = false;
    for _ in 0..max_iter {
        let mut a = DMatrix::zeros(x.ncols(), x.ncols());
        for (c, &bi) in cross.iter().zip(beta.iter()) {
            a += c * bi;
        }
        let a = 0.5 * (&a + a.transpose());
        let u = dominant_eigenvector(&(&b_isqrt * a * &b_isqrt));
        let next = &b_isqrt * u;
        let norm = next.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            break;
        }
        w = next / norm;
        if w[w.iamax()] < 0.0 {
            w.neg_mut();
        }
        let (nb, nj) = fit_ar(&(x * &w), s);
        let change = (nj - objective).abs() / objective.abs().max(f64::MIN_POSITIVE);
        beta = nb;
        objective = nj;
        if objective > best.2 {
            best = (w.clone(), beta.clone(), objective);
        }
        if change < tol {
            converged = true;
            break;
        }
    }
    Component {
        w: best.0,
        beta: best.1,
        objective: best.2,
        converged,
    }
}

/// Fits `config.n_dlv` dynamic latent variables to a `T × p` matrix.
pub fn dicca_fit(data: &DMatrix<f64>, config: &DiccaConfig) -> Result<DiccaModel> {
    let (t, p) = data.shape();
    if config.ar_order == 0 || config.n_dlv == 0 || config.n_dlv > p {
        return Err(Error::Config(format!(
            "dicca needs 1 <= n_dlv <= p ({p}) and ar_order >= 1, got n_dlv = {}, ar_order = {}",
            config.n_dlv, config.ar_order
        )));
    }
    if t <= config.ar_order + 10 {
        return Err(Error::TooFewSamples(t));
    }
    for (j, col) in data.column_iter().enumerate() {
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "dicca input",
                value: f64::NAN,
                bound: "finite",
            });
        }
        if is_constant(col.iter().copied()) {
            return Err(Error::ZeroVariance(format!("dicca column {j}")));
        }
    }
    let (means, scales) = column_stats(data);
    let mut x = standardize_with(data, &means, &scales);

    let s = config.ar_order;
    let mut weights = DMatrix::zeros(p, config.n_dlv);
    let mut loadings = DMatrix::zeros(p, config.n_dlv);
    let mut ar = DMatrix::zeros(config.n_dlv, s);
    let mut objectives = Vec::with_capacity(config.n_dlv);
    let mut converged = Vec::with_capacity(config.n_dlv);
    for k in 0..config.n_dlv {
        let c = extract_component(&x, s, config.tol, config.max_iter);
        if !c.converged {
            log::warn!("dicca component {k} stopped after {} iterations without converging", config.max_iter);
        }
        let v = &x * &c.w;
        let vv = v.norm_squared();
        let load = if vv > 0.0 { x.transpose() * &v / vv } else { DVector::zeros(p) };
        x -= &v * load.transpose();
        weights.set_column(k, &c.w);
        loadings.set_column(k, &load);
        ar.set_row(k, &c.beta.transpose());
        objectives.push(c.objective);
        converged.push(c.converged);
    }
    Ok(DiccaModel {
        n_dlv: config.n_dlv,
        ar_order: s,
        weights,
        loadings,
        ar_coefficients: ar,
        means,
        scales,
        objectives,
        converged,
    })
}

fn standardize_with(data: &DMatrix<f64>, means: &[f64], scales: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(data.nrows(), data.ncols(), |r, c| (data[(r, c)] - means[c]) / scales[c])
}

impl DiccaModel {
    pub fn channels(&self) -> usize {
        self.means.len()
    }

    fn check(&self, data: &DMatrix<f64>) -> Result<()> {
        if data.ncols() != self.channels() {
            return Err(Error::DimensionMismatch {
                expected: self.channels(),
                got: data.ncols(),
            });
        }
        Ok(())
    }

    pub fn standardize(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(data)?;
        Ok(standardize_with(data, &self.means, &self.scales))
    }

    /// Sequential scores and the standardized reconstruction `Σ v_k p_kᵀ`.
    fn project(&self, z: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut x = z.clone();
        let mut scores = DMatrix::zeros(z.nrows(), self.n_dlv);
        for k in 0..self.n_dlv {
            let v = &x * self.weights.column(k);
            x -= &v * self.loadings.column(k).transpose();
            scores.set_column(k, &v);
        }
        (scores, z - x)
    }

    /// Latent scores, `T × n_dlv`.
    pub fn scores(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let z = self.standardize(data)?;
        Ok(self.project(&z).0)
    }

    /// Reconstruction in standardized units.
    pub fn reconstruct_standardized(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let z = self.standardize(data)?;
        Ok(self.project(&z).1)
    }
}

/// Projects `data` onto the model's DLVs and maps the reconstruction back to
/// the original units.
pub fn dicca_smooth(model: &DiccaModel, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = model.reconstruct_standardized(data)?;
    Ok(DMatrix::from_fn(r.nrows(), r.ncols(), |i, c| r[(i, c)] * model.scales[c] + model.means[c]))
}

/// Per-flight diagnostics from [`smooth_channels`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub n_dlv: usize,
    /// Channels held constant over the segment and passed through untouched.
    pub constant_channels: Vec<String>,
    pub objectives: Vec<f64>,
    pub converged: bool,
}

/// Smooths the fifteen feature channels of a segment in place.
///
/// Constant channels are left out of the fit. The number of DLVs shrinks with
/// them so that the same number of trailing directions is discarded.
pub fn smooth_channels(samples: &mut [FlightSample], config: &DiccaConfig) -> Result<SmoothingReport> {
    config.validate()?;
    let varying: Vec<usize> = (0..N_FEATURES)
        .filter(|&c| !is_constant(samples.iter().map(|s| s.get(FEATURE_CHANNELS[c]))))
        .collect();
    let constant_channels = (0..N_FEATURES)
        .filter(|c| !varying.contains(c))
        .map(|c| FEATURE_CHANNELS[c].symbol().to_string())
        .collect();
    if varying.is_empty() {
        return Ok(SmoothingReport {
            constant_channels,
            converged: true,
            ..Default::default()
        });
    }
    let p = varying.len();
    let n_dlv = p.saturating_sub(N_FEATURES - config.n_dlv).max(1);
    let data = DMatrix::from_fn(samples.len(), p, |r, c| samples[r].get(FEATURE_CHANNELS[varying[c]]));
    let model = dicca_fit(&data, &DiccaConfig { n_dlv, ..*config })?;
    let smooth = dicca_smooth(&model, &data)?;
    for (r, s) in samples.iter_mut().enumerate() {
        for (c, &ch) in varying.iter().enumerate() {
            s.set(FEATURE_CHANNELS[ch], smooth[(r, c)]);
        }
    }
    Ok(SmoothingReport {
        n_dlv,
        constant_channels,
        converged: model.converged.iter().all(|&c| c),
        objectives: model.objectives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ar1_benchmark(t: usize, phi: f64, noise: f64, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        let mut z = 0.0;
        let mut latent = Vec::with_capacity(t);
        for _ in 0..t {
            z = phi * z + unit.sample(&mut rng);
            latent.push(z);
        }
        let gains = [1.0, -0.7, 0.4];
        DMatrix::from_fn(t, 3, |r, c| gains[c] * latent[r] + noise * unit.sample(&mut rng))
    }

    fn random(t: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        // mildly autocorrelated channels with distinct dynamics
        let mut m = DMatrix::zeros(t, p);
        for c in 0..p {
            let phi = 0.1 + 0.8 * c as f64 / p as f64;
            let mut z = 0.0;
            for r in 0..t {
                z = phi * z + unit.sample(&mut rng);
                m[(r, c)] = z + 0.3 * c as f64;
            }
        }
        m
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let data = ar1_benchmark(2000, 0.95, 0.05, 3);
        let model = dicca_fit(&data, &DiccaConfig { n_dlv: 1, ..Default::default() }).unwrap();
        let beta1 = model.ar_coefficients[(0, 0)];
        assert!((beta1 - 0.95).abs() <= 0.05, "beta1 = {beta1}");
        assert!((model.weights.column(0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_basis_reconstructs_exactly() {
        let data = random(300, 6, 1);
        let model = dicca_fit(&data, &DiccaConfig { n_dlv: 6, ..Default::default() }).unwrap();
        let z = model.standardize(&data).unwrap();
        let r = model.reconstruct_standardized(&data).unwrap();
        assert!((&z - &r).amax() < 1e-6);
        let smooth = dicca_smooth(&model, &data).unwrap();
        for (a, b) in smooth.iter().zip(data.iter()) {
            assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn zero_column_rejected() {
        let mut data = random(100, 3, 2);
        data.column_mut(1).fill(0.0);
        assert!(matches!(
            dicca_fit(&data, &DiccaConfig { n_dlv: 2, ..Default::default() }),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn shape_errors() {
        let data = random(100, 3, 2);
        assert!(dicca_fit(&data, &DiccaConfig { n_dlv: 4, ..Default::default() }).is_err());
        assert!(matches!(
            dicca_fit(&data.rows(0, 12).into_owned(), &DiccaConfig { n_dlv: 1, ..Default::default() }),
            Err(Error::TooFewSamples(12))
        ));
        let model = dicca_fit(&data, &DiccaConfig { n_dlv: 2, ..Default::default() }).unwrap();
        assert!(matches!(
            dicca_smooth(&model, &random(50, 4, 0)),
            Err(Error::DimensionMismatch { expected: 3, got: 4 })
        ));
    }

    #[test]
    fn scores_are_uncorrelated() {
        let data = random(400, 5, 4);
        let model = dicca_fit(&data, &DiccaConfig { n_dlv: 5, ..Default::default() }).unwrap();
        let v = model.scores(&data).unwrap();
        for i in 0..5 {
            for j in 0..i {
                let (a, b) = (v.column(i), v.column(j));
                let denom = a.norm() * b.norm();
                if denom > 1e-9 {
                    assert!((a.dot(&b) / denom).abs() < 1e-6);
                }
            }
        }
        assert!(model.objectives.iter().all(|j| j.is_finite()));
    }

    #[test]
    fn residual_shrinks_with_more_components() {
        let data = random(300, 6, 5);
        let mut last = f64::INFINITY;
        for n in 1..=6 {
            let model = dicca_fit(&data, &DiccaConfig { n_dlv: n, ..Default::default() }).unwrap();
            let z = model.standardize(&data).unwrap();
            let err = (z - model.reconstruct_standardized(&data).unwrap()).norm();
            assert!(err <= last + 1e-9, "n = {n}: {err} > {last}");
            last = err;
        }
    }

    #[test]
    fn smoothing_is_linear_about_the_means() {
        let data = random(200, 4, 6);
        let model = dicca_fit(&data, &DiccaConfig { n_dlv: 2, ..Default::default() }).unwrap();
        let mu = DMatrix::from_fn(200, 4, |_, c| model.means[c]);
        let lin = |x: &DMatrix<f64>| dicca_smooth(&model, &(x + &mu)).unwrap() - &mu;
        let (x, y) = (random(200, 4, 7), random(200, 4, 8));
        let (a, b) = (1.7, -0.4);
        let lhs = lin(&(&x * a + &y * b));
        let rhs = lin(&x) * a + lin(&y) * b;
        assert!((lhs - rhs).amax() < 1e-9);
    }

    #[test]
    fn deterministic_fit() {
        let data = random(250, 5, 9);
        let cfg = DiccaConfig { n_dlv: 3, ..Default::default() };
        assert_eq!(dicca_fit(&data, &cfg).unwrap(), dicca_fit(&data, &cfg).unwrap());
    }

    #[test]
    fn constant_channels_pass_through() {
        let data = random(120, N_FEATURES, 10);
        let mut samples: Vec<FlightSample> = (0..120)
            .map(|r| {
                let mut s = FlightSample {
                    t: r as f64,
                    ..Default::default()
                };
                for (c, ch) in FEATURE_CHANNELS.iter().enumerate() {
                    s.set(*ch, data[(r, c)]);
                }
                s.psi = 0.0;
                s.mu = 1.25;
                s
            })
            .collect();
        let report = smooth_channels(&mut samples, &DiccaConfig::default()).unwrap();
        assert_eq!(report.n_dlv, 12);
        assert_eq!(report.constant_channels, ["psi", "mu"]);
        assert!(samples.iter().all(|s| s.psi == 0.0 && s.mu == 1.25 && s.t.fract() == 0.0));
    }
}
