use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::mlp::MlpModel;
use super::ridge::RidgeRegressor;
use super::tree::TreeRegressor;
use crate::error::{Error, Result};
use crate::preprocess::FeatureRow;

pub const BUNDLE_FORMAT: &str = "qar-mass-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Mlp,
    Ridge,
    Tree,
}

impl RegressorKind {
    pub const ALL: [RegressorKind; 3] = [RegressorKind::Mlp, RegressorKind::Ridge, RegressorKind::Tree];

    pub fn name(self) -> &'static str {
        match self {
            RegressorKind::Mlp => "mlp",
            RegressorKind::Ridge => "ridge",
            RegressorKind::Tree => "tree",
        }
    }

    /// Method label as used in comparison tables.
    pub fn label(self) -> &'static str {
        match self {
            RegressorKind::Mlp => "MLPNN",
            RegressorKind::Ridge => "RR",
            RegressorKind::Tree => "DTR",
        }
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(RegressorKind::Mlp),
            "ridge" => Ok(RegressorKind::Ridge),
            "tree" => Ok(RegressorKind::Tree),
            other => Err(Error::Config(format!("unknown regressor '{other}' (expected mlp, ridge or tree)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    Mlp(MlpModel),
    Ridge(RidgeRegressor),
    Tree(TreeRegressor),
}

impl Regressor {
    pub fn kind(&self) -> RegressorKind {
        match self {
            Regressor::Mlp(_) => RegressorKind::Mlp,
            Regressor::Ridge(_) => RegressorKind::Ridge,
            Regressor::Tree(_) => RegressorKind::Tree,
        }
    }

    /// Predicted gross mass (kg) per row.
    pub fn predict(&self, rows: &[FeatureRow]) -> Result<Vec<f64>> {
        match self {
            Regressor::Mlp(m) => m.predict(rows),
            Regressor::Ridge(m) => m.predict(rows),
            Regressor::Tree(m) => m.predict(rows),
        }
    }
}

/// Versioned on-disk form of a fitted regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub model: Regressor,
}

impl ModelBundle {
    pub fn new(model: Regressor) -> Self {
        Self {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format != BUNDLE_FORMAT {
            return Err(Error::Bundle(format!("unexpected format '{}'", header.format)));
        }
        if header.version != BUNDLE_VERSION {
            return Err(Error::Bundle(format!(
                "version {} is not supported (expected {BUNDLE_VERSION})",
                header.version
            )));
        }
        Ok(serde_json::from_str(text)?)
    }
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Per-sample initial-mass estimates `ĝ(X'_j) + m_f,j` and their median.
pub fn predict_initial_mass(model: &Regressor, rows: &[FeatureRow]) -> Result<(f64, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::Empty("flight rows"));
    }
    let per_sample: Vec<f64> = model
        .predict(rows)?
        .into_iter()
        .zip(rows)
        .map(|(m, r)| m + r.fuel_burned)
        .collect();
    let flight = median(&per_sample).expect("non-empty");
    Ok((flight, per_sample))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{MlpConfig, TreeConfig};

    fn rows(n: usize) -> Vec<FeatureRow> {
        (0..n)
            .map(|i| {
                let k = i as f64;
                let mut x = [0.0; 15];
                x.iter_mut().enumerate().for_each(|(j, v)| *v = (k * 0.1 + j as f64).sin() * (j as f64 + 1.0));
                FeatureRow {
                    x,
                    dh: 8.0 * k,
                    dt: k,
                    reg: ["A", "B", "C"][i % 3].into(),
                    target_m: 260_000.0 - 9.0 * k + 1000.0 * x[0],
                    fuel_burned: 9.0 * k,
                }
            })
            .collect()
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[7.0; 5]), Some(7.0));
        let mut v = vec![300_000.0; 99];
        v.push(500_000.0);
        assert_eq!(median(&v), Some(300_000.0));
        assert_eq!(median(&[1.0, 4.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn flight_estimate_is_median_of_samples() {
        let data = rows(90);
        let model = Regressor::Ridge(RidgeRegressor::fit(&data, 1.0).unwrap());
        let (flight, per) = predict_initial_mass(&model, &data).unwrap();
        assert_eq!(per.len(), 90);
        assert_eq!(Some(flight), median(&per));
        assert!(matches!(predict_initial_mass(&model, &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn bundles_round_trip_bit_identically() {
        let data = rows(150);
        let mlp = MlpConfig {
            hidden_depth: 3,
            layer_width: 32,
            max_epochs: 2,
            ..Default::default()
        };
        let models = [
            Regressor::Mlp(crate::regress::mlp_train(&mlp, &data[..120], &data[120..]).unwrap().0),
            Regressor::Ridge(RidgeRegressor::fit(&data, 1.0).unwrap()),
            Regressor::Tree(TreeRegressor::fit(&data, &TreeConfig { ccp_alpha: 0.001, ..TreeConfig::single_aircraft() }).unwrap()),
        ];
        for model in models {
            let json = ModelBundle::new(model.clone()).to_json().unwrap();
            let back = ModelBundle::from_json(&json).unwrap();
            assert_eq!(back.model, model);
            let a = model.predict(&data).unwrap();
            let b = back.model.predict(&data).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let data = rows(30);
        let json = ModelBundle::new(Regressor::Ridge(RidgeRegressor::fit(&data, 1.0).unwrap()))
            .to_json()
            .unwrap()
            .replace("\"version\": 1", "\"version\": 99");
        assert!(matches!(ModelBundle::from_json(&json), Err(Error::Bundle(_))));
    }

    #[test]
    fn kinds_parse() {
        for k in RegressorKind::ALL {
            assert_eq!(k.name().parse::<RegressorKind>().unwrap(), k);
        }
        assert!("svr".parse::<RegressorKind>().is_err());
    }
}
