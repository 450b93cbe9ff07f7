use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::encode::FeatureEncoder;
use super::shaped;
use crate::error::{Error, Result};
use crate::preprocess::FeatureRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    #[serde(with = "shaped::vector")]
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                got: x.ncols(),
            });
        }
        Ok((x * &self.coefficients).add_scalar(self.intercept))
    }
}

/// Solves `(XcᵀXc + λI) w = Xcᵀ yc` on column-centered data by Cholesky; the
/// intercept restores the means.
pub fn ridge_fit(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    if x.nrows() == 0 {
        return Err(Error::Empty("ridge rows"));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let n = x.nrows() as f64;
    let x_mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let y_mean = y.iter().sum::<f64>() / n;
    let mut xc = x.clone();
    for (mut col, m) in xc.column_iter_mut().zip(x_mean.iter()) {
        col.add_scalar_mut(-m);
    }
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));

    let mut gram = xc.transpose() * &xc;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let chol = gram.cholesky().ok_or(Error::Singular)?;
    let coefficients = chol.solve(&(xc.transpose() * yc));
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Singular);
    }
    let intercept = y_mean - x_mean.dot(&coefficients);
    Ok(RidgeModel {
        coefficients,
        intercept,
        lambda,
    })
}

/// Ridge on encoded, standardized feature rows, predicting kilograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeRegressor {
    pub encoder: FeatureEncoder,
    pub model: RidgeModel,
}

impl RidgeRegressor {
    pub fn fit(rows: &[FeatureRow], lambda: f64) -> Result<Self> {
        Self::fit_encoded(FeatureEncoder::fit(rows, false)?, rows, lambda)
    }

    pub fn fit_encoded(encoder: FeatureEncoder, rows: &[FeatureRow], lambda: f64) -> Result<Self> {
        let x = encoder.inputs(rows)?;
        let y: Vec<f64> = rows.iter().map(|r| r.target_m).collect();
        let model = ridge_fit(&x, &y, lambda)?;
        Ok(Self { encoder, model })
    }

    pub fn predict(&self, rows: &[FeatureRow]) -> Result<Vec<f64>> {
        Ok(self.model.predict(&self.encoder.inputs(rows)?)?.as_slice().to_vec())
    }
}
