use serde::{Deserialize, Serialize};

use super::segment::ClimbSegment;
use crate::error::{Error, Result};
use crate::model_core::{FlightSample, N_FEATURES};

/// One training sample: the instantaneous parameters, the cumulative
/// altitude and time since segment start, the registration and the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    /// Instantaneous parameters in [`crate::model_core::FEATURE_CHANNELS`] order.
    pub x: [f64; N_FEATURES],
    pub dh: f64,
    pub dt: f64,
    pub reg: String,
    pub target_m: f64,
    pub fuel_burned: f64,
}

impl FeatureRow {
    /// Reconstructed initial mass under a perfect regressor.
    pub fn initial_mass(&self) -> f64 {
        self.target_m + self.fuel_burned
    }
}

/// Cumulative trapezoidal fuel burn from the first sample, one entry per sample.
pub fn fuel_burned_series(samples: &[FlightSample]) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    if !samples.is_empty() {
        out.push(0.0);
    }
    for w in samples.windows(2) {
        acc += 0.5 * (w[0].fuel_flow() + w[1].fuel_flow()) * (w[1].t - w[0].t);
        out.push(acc);
    }
    out
}

/// Fuel burned between the segment start and sample `j` (kg).
pub fn fuel_burned(segment: &ClimbSegment, j: usize) -> Result<f64> {
    if j >= segment.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: segment.len(),
        });
    }
    Ok(fuel_burned_series(&segment.samples[..=j])[j])
}

pub fn assemble_features(segment: &ClimbSegment) -> Vec<FeatureRow> {
    let Some(first) = segment.samples.first() else {
        return Vec::new();
    };
    segment
        .samples
        .iter()
        .zip(fuel_burned_series(&segment.samples))
        .map(|(s, mf)| FeatureRow {
            x: s.features(),
            dh: s.h - first.h,
            dt: s.t - first.t,
            reg: segment.reg.clone(),
            target_m: s.m,
            fuel_burned: mf,
        })
        .collect()
}
