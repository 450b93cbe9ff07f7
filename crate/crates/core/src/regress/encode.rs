//! Feature encoding `X' = [X, Δh, Δt, one-hot(Reg)]` and standardization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_core::{FEATURE_CHANNELS, N_FEATURES};
use crate::preprocess::FeatureRow;

/// Continuous columns: the fifteen instantaneous features, `dh` and `dt`.
pub const N_CONTINUOUS: usize = N_FEATURES + 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Sorted registration ids.
    pub regs: Vec<String>,
    /// Map unseen registrations to an extra column instead of failing.
    pub unknown_bucket: bool,
}

impl Vocabulary {
    pub fn from_rows(rows: &[FeatureRow], unknown_bucket: bool) -> Self {
        let mut regs: Vec<String> = rows.iter().map(|r| r.reg.clone()).collect();
        regs.sort();
        regs.dedup();
        Self { regs, unknown_bucket }
    }

    /// One-hot columns emitted; a single category carries no information
    /// and is dropped.
    pub fn one_hot_width(&self) -> usize {
        let w = self.regs.len() + usize::from(self.unknown_bucket);
        if w <= 1 {
            0
        } else {
            w
        }
    }

    /// Column offset (within the one-hot block) for `reg`.
    pub fn column(&self, reg: &str) -> Result<Option<usize>> {
        if self.one_hot_width() == 0 {
            return match self.regs.binary_search_by(|r| r.as_str().cmp(reg)) {
                Ok(_) => Ok(None),
                Err(_) if self.unknown_bucket => Ok(None),
                Err(_) => Err(Error::UnknownRegistration(reg.to_string())),
            };
        }
        match self.regs.binary_search_by(|r| r.as_str().cmp(reg)) {
            Ok(i) => Ok(Some(i)),
            Err(_) if self.unknown_bucket => Ok(Some(self.regs.len())),
            Err(_) => Err(Error::UnknownRegistration(reg.to_string())),
        }
    }

    pub fn width(&self) -> usize {
        N_CONTINUOUS + self.one_hot_width()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = FEATURE_CHANNELS.iter().map(|c| c.symbol().to_string()).collect();
        names.push("dh".into());
        names.push("dt".into());
        if self.one_hot_width() > 0 {
            names.extend(self.regs.iter().map(|r| format!("reg={r}")));
            if self.unknown_bucket {
                names.push("reg=<unknown>".into());
            }
        }
        names
    }
}

/// Raw (unstandardized) design matrix, one row per feature row.
pub fn encode_features(rows: &[FeatureRow], vocab: &Vocabulary) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows.len(), vocab.width());
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.x.iter().enumerate() {
            m[(i, j)] = v;
        }
        m[(i, N_FEATURES)] = r.dh;
        m[(i, N_FEATURES + 1)] = r.dt;
        if let Some(k) = vocab.column(&r.reg)? {
            m[(i, N_CONTINUOUS + k)] = 1.0;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Standardizer {
    /// Fits on the first `n_continuous` columns of `x` and on `y`.
    pub fn fit(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty("training rows"));
        }
        let mut x_mean = Vec::with_capacity(N_CONTINUOUS);
        let mut x_std = Vec::with_capacity(N_CONTINUOUS);
        for j in 0..N_CONTINUOUS.min(x.ncols()) {
            let (m, s) = mean_std(x.column(j).iter().copied());
            if !(s > 1e-12 * (1.0 + m.abs())) {
                return Err(Error::ZeroVariance(names.get(j).cloned().unwrap_or_else(|| j.to_string())));
            }
            x_mean.push(m);
            x_std.push(s);
        }
        let (y_mean, y_std) = mean_std(y.iter().copied());
        if !(y_std > 0.0) {
            return Err(Error::ZeroVariance("target mass".into()));
        }
        Ok(Self {
            x_mean,
            x_std,
            y_mean,
            y_std,
        })
    }

    pub fn transform_x(&self, x: &mut DMatrix<f64>) {
        for (j, (m, s)) in self.x_mean.iter().zip(&self.x_std).enumerate() {
            x.column_mut(j).apply(|v| *v = (*v - m) / s);
        }
    }

    pub fn transform_y(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_std
    }

    pub fn inverse_y(&self, z: f64) -> f64 {
        z * self.y_std + self.y_mean
    }
}

/// Vocabulary plus standardizer: everything needed to turn feature rows into
/// model inputs and model outputs back into kilograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub vocabulary: Vocabulary,
    pub standardizer: Standardizer,
}

impl FeatureEncoder {
    pub fn fit(rows: &[FeatureRow], unknown_bucket: bool) -> Result<Self> {
        let vocabulary = Vocabulary::from_rows(rows, unknown_bucket);
        let x = encode_features(rows, &vocabulary)?;
        let y: Vec<f64> = rows.iter().map(|r| r.target_m).collect();
        let standardizer = Standardizer::fit(&x, &y, &vocabulary.column_names())?;
        Ok(Self {
            vocabulary,
            standardizer,
        })
    }

    pub fn width(&self) -> usize {
        self.vocabulary.width()
    }

    pub fn inputs(&self, rows: &[FeatureRow]) -> Result<DMatrix<f64>> {
        let mut x = encode_features(rows, &self.vocabulary)?;
        self.standardizer.transform_x(&mut x);
        Ok(x)
    }

    pub fn targets(&self, rows: &[FeatureRow]) -> Vec<f64> {
        rows.iter().map(|r| self.standardizer.transform_y(r.target_m)).collect()
    }
}
