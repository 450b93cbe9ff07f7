//! Flight-level splitting, the accuracy metrics and per-flight error reports.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train, self.val, self.test];
        if f.iter().any(|v| !(*v > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must be positive and sum to 1, got {} / {} / {}",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    /// Partition sizes for `n` flights.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = (self.train * n as f64).round() as usize;
        let val = ((self.val * n as f64).round() as usize).min(n - train);
        (train, val, n - train - val)
    }
}

pub const MIN_SPLIT_FLIGHTS: usize = 5;

/// Shuffles whole flights with the spec's seed and cuts them into
/// train / validation / test partitions.
pub fn split_flights<T: Clone>(flights: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    spec.validate()?;
    if flights.len() < MIN_SPLIT_FLIGHTS {
        return Err(Error::TooFewFlights {
            got: flights.len(),
            min: MIN_SPLIT_FLIGHTS,
        });
    }
    let mut order: Vec<usize> = (0..flights.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (n_train, n_val, _) = spec.sizes(flights.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| flights[i].clone()).collect::<Vec<T>>();
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_val]),
        pick(&order[n_train + n_val..]),
    ))
}

fn check_pair(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::Empty("metric inputs"));
    }
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    Ok(())
}

/// Mean absolute percentage error, in percent.
pub fn mape(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    if let Some(&m) = truth.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::Domain {
            what: "true mass",
            value: m,
            bound: "> 0",
        });
    }
    let sum: f64 = truth.iter().zip(pred).map(|(m, p)| (m - p).abs() / m).sum();
    Ok(100.0 * sum / truth.len() as f64)
}

/// Root-mean-square error over the fleet mass range `m_max − m_min`.
pub fn nrmsd(truth: &[f64], pred: &[f64], m_max: f64, m_min: f64) -> Result<f64> {
    check_pair(truth, pred)?;
    if !(m_max > m_min) {
        return Err(Error::Domain {
            what: "mass range",
            value: m_max - m_min,
            bound: "m_max > m_min",
        });
    }
    let mse = truth.iter().zip(pred).map(|(m, p)| (m - p).powi(2)).sum::<f64>() / truth.len() as f64;
    Ok(mse.sqrt() / (m_max - m_min))
}

/// Coefficient of determination about the mean of `truth`.
pub fn r2(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    if truth.len() < 2 {
        return Err(Error::TooFewSamples(truth.len()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|m| (m - mean).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::ZeroVariance("true mass".into()));
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(m, p)| (m - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPrediction {
    pub flight_id: String,
    pub reg: String,
    pub true_mass: f64,
    pub predicted_mass: f64,
    /// `(predicted − true) / true`.
    pub relative_error: f64,
}

impl FlightPrediction {
    pub fn new(flight_id: impl Into<String>, reg: impl Into<String>, true_mass: f64, predicted_mass: f64) -> Self {
        Self {
            flight_id: flight_id.into(),
            reg: reg.into(),
            true_mass,
            predicted_mass,
            relative_error: (predicted_mass - true_mass) / true_mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    /// Histogram bin width in percentage points.
    pub bin_width_pct: f64,
    /// Flights with |relative error| above this (percent) are flagged.
    pub flag_threshold_pct: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            bin_width_pct: 0.5,
            flag_threshold_pct: 5.0,
        }
    }
}

impl ReportConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width_pct > 0.0) || !(self.flag_threshold_pct >= 0.0) {
            return Err(Error::Config("report bin width must be > 0 and flag threshold >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower_pct: f64,
    pub upper_pct: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_flights: usize,
    pub mape: f64,
    pub nrmsd: f64,
    /// Undefined for fewer than two flights or identical true masses.
    pub r2: Option<f64>,
}

pub fn metrics(flights: &[FlightPrediction], m_max: f64, m_min: f64) -> Result<Metrics> {
    let truth: Vec<f64> = flights.iter().map(|f| f.true_mass).collect();
    let pred: Vec<f64> = flights.iter().map(|f| f.predicted_mass).collect();
    Ok(Metrics {
        n_flights: flights.len(),
        mape: mape(&truth, &pred)?,
        nrmsd: nrmsd(&truth, &pred, m_max, m_min)?,
        r2: r2(&truth, &pred).ok(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_star: usize,
    pub flights: Vec<FlightPrediction>,
    pub mape: f64,
    pub nrmsd: f64,
    pub r2: Option<f64>,
    pub m_max: f64,
    pub m_min: f64,
    pub histogram: Vec<HistogramBin>,
    pub flagged: Vec<String>,
}

/// Relative-error histogram in percent, with contiguous bins aligned to
/// multiples of `width`.
pub fn error_histogram(errors_pct: &[f64], width: f64) -> Vec<HistogramBin> {
    if errors_pct.is_empty() {
        return Vec::new();
    }
    let idx: Vec<i64> = errors_pct.iter().map(|e| (e / width).floor() as i64).collect();
    let lo = *idx.iter().min().expect("non-empty");
    let hi = *idx.iter().max().expect("non-empty");
    let mut bins: Vec<HistogramBin> = (lo..=hi)
        .map(|k| HistogramBin {
            lower_pct: k as f64 * width,
            upper_pct: (k + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for k in idx {
        bins[(k - lo) as usize].count += 1;
    }
    bins
}

pub fn error_report(flights: &[FlightPrediction], m_max: f64, m_min: f64, config: &ReportConfig) -> Result<EvalReport> {
    config.validate()?;
    let m = metrics(flights, m_max, m_min)?;
    let pct: Vec<f64> = flights.iter().map(|f| 100.0 * f.relative_error).collect();
    let flagged = flights
        .iter()
        .zip(&pct)
        .filter(|(_, e)| e.abs() > config.flag_threshold_pct)
        .map(|(f, _)| f.flight_id.clone())
        .collect();
    Ok(EvalReport {
        n_star: flights.len(),
        flights: flights.to_vec(),
        mape: m.mape,
        nrmsd: m.nrmsd,
        r2: m.r2,
        m_max,
        m_min,
        histogram: error_histogram(&pct, config.bin_width_pct),
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};
    use std::collections::BTreeSet;

    #[test]
    fn partition_arithmetic() {
        let spec = SplitSpec::default();
        assert_eq!(spec.sizes(190), (114, 38, 38));
        assert_eq!(spec.sizes(3480), (2088, 696, 696));
        let ids: Vec<usize> = (0..190).collect();
        let (a, b, c) = split_flights(&ids, &spec).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (114, 38, 38));
        assert_eq!(split_flights(&ids, &spec).unwrap(), (a, b, c));
        assert!(matches!(
            split_flights(&ids[..4], &spec),
            Err(Error::TooFewFlights { got: 4, min: 5 })
        ));
        assert!(SplitSpec { train: 0.7, ..spec }.validate().is_err());
    }

    #[test]
    fn metric_examples() {
        assert_eq!(mape(&[100.0], &[90.0]).unwrap(), 10.0);
        assert!((mape(&[200.0, 400.0], &[210.0, 380.0]).unwrap() - 5.0).abs() < 1e-12);
        assert!((nrmsd(&[0.0, 0.0], &[3.0, 4.0], 10.0, 0.0).unwrap() - 12.5f64.sqrt() / 10.0).abs() < 1e-12);
        assert!((nrmsd(&[0.0, 0.0], &[3.0, 4.0], 10.0, 0.0).unwrap() - 0.3535533905932738).abs() < 1e-12);
        assert!((r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        let m = [250_000.0, 300_000.0, 310_000.0];
        assert_eq!(mape(&m, &m).unwrap(), 0.0);
        assert_eq!(nrmsd(&m, &m, 350_942.0, 227_409.0).unwrap(), 0.0);
        assert_eq!(r2(&m, &m).unwrap(), 1.0);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(mape(&[1.0, 2.0], &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(mape(&[0.0], &[1.0]), Err(Error::Domain { .. })));
        assert!(matches!(nrmsd(&[1.0], &[1.0], 5.0, 5.0), Err(Error::Domain { .. })));
        assert!(matches!(r2(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::ZeroVariance(_))));
    }

    fn flights(errors_pct: &[f64]) -> Vec<FlightPrediction> {
        errors_pct
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let m = 250_000.0 + 1000.0 * i as f64;
                FlightPrediction::new(format!("F{i}"), "R", m, m * (1.0 + e / 100.0))
            })
            .collect()
    }

    #[test]
    fn flags_and_histogram() {
        let r = error_report(&flights(&[0.3, -1.9, 1.2, -0.1]), 350_942.0, 227_409.0, &ReportConfig::default()).unwrap();
        assert!(r.flagged.is_empty());
        assert_eq!(r.histogram.iter().map(|b| b.count).sum::<usize>(), 4);
        assert_eq!(r.histogram.first().unwrap().lower_pct, -2.0);
        assert_eq!(r.histogram.last().unwrap().upper_pct, 1.5);

        let r = error_report(&flights(&[0.3, -6.0, 1.2]), 350_942.0, 227_409.0, &ReportConfig::default()).unwrap();
        assert_eq!(r.flagged, ["F1"]);
        assert_eq!(r.n_star, 3);
    }

    proptest! {
        #[test]
        fn split_is_a_disjoint_cover(n in 5usize..400, seed in 0u64..1000) {
            let ids: Vec<usize> = (0..n).collect();
            let (a, b, c) = split_flights(&ids, &SplitSpec { seed, ..Default::default() }).unwrap();
            let all: BTreeSet<usize> = a.iter().chain(&b).chain(&c).copied().collect();
            prop_assert_eq!(all.len(), n);
            prop_assert_eq!(a.len() + b.len() + c.len(), n);
        }

        #[test]
        fn metrics_are_permutation_invariant_and_scale_free(
            pairs in prop::collection::vec((2.0e5..3.6e5f64, -0.05..0.05f64), 2..40),
            c in 0.1..10.0f64,
        ) {
            let truth: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<f64> = pairs.iter().map(|p| p.0 * (1.0 + p.1)).collect();
            let (rt, rp): (Vec<f64>, Vec<f64>) = (truth.iter().rev().copied().collect(), pred.iter().rev().copied().collect());
            prop_assert!((mape(&truth, &pred).unwrap() - mape(&rt, &rp).unwrap()).abs() < 1e-9);
            prop_assert!(mape(&truth, &pred).unwrap() >= 0.0);
            let n1 = nrmsd(&truth, &pred, 4e5, 2e5).unwrap();
            let st: Vec<f64> = truth.iter().map(|v| v * c).collect();
            let sp: Vec<f64> = pred.iter().map(|v| v * c).collect();
            let n2 = nrmsd(&st, &sp, 4e5 * c, 2e5 * c).unwrap();
            prop_assert!(n1 >= 0.0 && (n1 - n2).abs() < 1e-9 * n1.max(1e-12));
            if let Ok(r) = r2(&truth, &pred) {
                prop_assert!(r <= 1.0);
            }
        }
    }
}
