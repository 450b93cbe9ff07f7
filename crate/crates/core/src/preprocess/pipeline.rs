use serde::{Deserialize, Serialize};

use super::cleaning::{clean_mass_channels, CleaningConfig, CleaningReport};
use super::features::{assemble_features, FeatureRow};
use super::segment::{longest_climb_segment, SegmentConfig};
use crate::denoise::{smooth_channels, DiccaConfig, SmoothingReport};
use crate::error::{Error, Result};
use crate::model_core::{resample_uniform, FlightRecord, DEFAULT_SAMPLE_INTERVAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub resample_interval: f64,
    pub segment: SegmentConfig,
    pub cleaning: CleaningConfig,
    pub dicca: DiccaConfig,
    /// Skip DiCCA and keep the raw channels.
    pub smooth: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            resample_interval: DEFAULT_SAMPLE_INTERVAL,
            segment: SegmentConfig::default(),
            cleaning: CleaningConfig::default(),
            dicca: DiccaConfig::default(),
            smooth: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resample_interval > 0.0 && self.resample_interval.is_finite()) {
            return Err(Error::Config(format!("resample_interval must be > 0, got {}", self.resample_interval)));
        }
        self.segment.validate()?;
        self.cleaning.validate()?;
        self.dicca.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedFlight {
    pub flight_id: String,
    pub reg: String,
    /// Climb segment bounds in the resampled record.
    pub start: usize,
    pub end: usize,
    pub rows: Vec<FeatureRow>,
    pub cleaning: CleaningReport,
    pub smoothing: SmoothingReport,
}

/// Resample, extract the longest climb, clean, smooth and assemble features.
pub fn process_record(record: &FlightRecord, config: &PreprocessConfig) -> Result<ProcessedFlight> {
    config.validate()?;
    let uniform = resample_uniform(record, config.resample_interval)?;
    let segment = longest_climb_segment(&uniform, &config.segment)?;
    let (mut segment, cleaning) = clean_mass_channels(&segment, &config.cleaning)?;
    let smoothing = if config.smooth {
        smooth_channels(&mut segment.samples, &config.dicca)?
    } else {
        SmoothingReport::default()
    };
    Ok(ProcessedFlight {
        flight_id: segment.flight_id.clone(),
        reg: segment.reg.clone(),
        start: segment.start,
        end: segment.end,
        rows: assemble_features(&segment),
        cleaning,
        smoothing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate_fleet, FleetSpec};

    #[test]
    fn noiseless_flights_reconstruct_initial_mass() {
        let mut spec = FleetSpec::new(2, 2, [227_409.0, 350_942.0], 11);
        spec.noise = crate::simulator::NoiseSpec::none();
        spec.target_altitude_range = [4_000.0, 5_000.0];
        for f in generate_fleet(&spec).unwrap() {
            let out = process_record(&f.record, &PreprocessConfig::default()).unwrap();
            assert_eq!(out.start, 0);
            assert_eq!(out.rows.len(), out.end - out.start);
            assert_eq!(out.cleaning, CleaningReport::default());
            for r in &out.rows {
                assert!((r.initial_mass() - f.initial_mass).abs() <= 1e-6 * f.initial_mass);
            }
        }
    }

    #[test]
    fn noisy_flight_is_smoothed() {
        let mut spec = FleetSpec::new(1, 1, [227_409.0, 350_942.0], 12);
        spec.target_altitude_range = [4_000.0, 5_000.0];
        let f = &generate_fleet(&spec).unwrap()[0];
        let out = process_record(&f.record, &PreprocessConfig::default()).unwrap();
        assert!(out.smoothing.n_dlv >= 1 && out.smoothing.n_dlv <= 14);
        let raw = PreprocessConfig {
            smooth: false,
            ..Default::default()
        };
        let unsmoothed = process_record(&f.record, &raw).unwrap();
        assert_eq!(unsmoothed.rows.len(), out.rows.len());
        assert_ne!(unsmoothed.rows[10].x, out.rows[10].x);
        // mass labels are untouched by smoothing
        assert_eq!(unsmoothed.rows[10].target_m, out.rows[10].target_m);
    }
}
