use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_core::{FlightRecord, FlightSample};

/// A contiguous climb slice of a parent record.
///
/// `start..end` indexes the parent's samples. Cleaning may later drop
/// samples, so `samples.len()` can be smaller than `end - start`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimbSegment {
    pub flight_id: String,
    pub reg: String,
    pub samples: Vec<FlightSample>,
    pub start: usize,
    pub end: usize,
}

impl ClimbSegment {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The whole record as one segment, without any climb test.
    pub fn whole(record: &FlightRecord) -> Self {
        Self {
            flight_id: record.flight_id.clone(),
            reg: record.reg.clone(),
            samples: record.samples.clone(),
            start: 0,
            end: record.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    /// Vertical speed that counts as climbing (m/s).
    pub climb_threshold: f64,
    /// Longest run of sub-threshold samples bridged inside a climb.
    pub gap_tolerance: usize,
    pub min_len: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            climb_threshold: 2.0,
            gap_tolerance: 10,
            min_len: 60,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.climb_threshold.is_finite() {
            return Err(Error::Config("climb_threshold must be finite".into()));
        }
        if self.min_len < 2 {
            return Err(Error::Config("segment min_len must be >= 2".into()));
        }
        Ok(())
    }
}

/// Maximal climb runs as `(start, end)` half-open index pairs. Runs begin and
/// end on above-threshold samples; interior dips of at most `gap_tolerance`
/// samples are bridged.
pub fn climb_runs(vv: &[f64], climb_threshold: f64, gap_tolerance: usize) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    for (i, &v) in vv.iter().enumerate() {
        if !(v > climb_threshold) {
            continue;
        }
        current = match current {
            Some((s, e)) if i - e <= gap_tolerance => Some((s, i + 1)),
            Some(run) => {
                runs.push(run);
                Some((i, i + 1))
            }
            None => Some((i, i + 1)),
        };
    }
    runs.extend(current);
    runs
}

/// Longest climb run of a uniformly sampled record; ties go to the earliest.
pub fn longest_climb_segment(record: &FlightRecord, config: &SegmentConfig) -> Result<ClimbSegment> {
    config.validate()?;
    let vv = record.channel(crate::model_core::Channel::Vv);
    let best = climb_runs(&vv, config.climb_threshold, config.gap_tolerance)
        .into_iter()
        .fold(None, |best: Option<(usize, usize)>, run| match best {
            Some(b) if b.1 - b.0 >= run.1 - run.0 => Some(b),
            _ => Some(run),
        });
    match best {
        Some((start, end)) if end - start >= config.min_len => Ok(ClimbSegment {
            flight_id: record.flight_id.clone(),
            reg: record.reg.clone(),
            samples: record.samples[start..end].to_vec(),
            start,
            end,
        }),
        _ => Err(Error::NoClimb {
            min_len: config.min_len,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(vv: &[f64]) -> FlightRecord {
        FlightRecord {
            flight_id: "F".into(),
            reg: "R".into(),
            samples: vv
                .iter()
                .enumerate()
                .map(|(i, &v)| FlightSample {
                    t: i as f64,
                    vv: v,
                    ..Default::default()
                })
                .collect(),
            sample_interval: 1.0,
        }
    }

    #[test]
    fn monotone_climb_spans_record() {
        let rec = record(&[8.0; 500]);
        let seg = longest_climb_segment(&rec, &SegmentConfig::default()).unwrap();
        assert_eq!((seg.start, seg.end), (0, 500));
        assert_eq!(seg.len(), 500);
    }

    #[test]
    fn picks_longer_of_two_step_climbs() {
        let mut vv = vec![0.0; 50];
        vv.extend([10.0; 300]);
        vv.extend([0.0; 120]);
        vv.extend([7.0; 600]);
        vv.extend([0.0; 30]);
        let seg = longest_climb_segment(&record(&vv), &SegmentConfig::default()).unwrap();
        assert_eq!((seg.start, seg.end), (470, 1070));
    }

    #[test]
    fn level_record_has_no_climb() {
        let rec = record(&[0.1; 400]);
        assert!(matches!(
            longest_climb_segment(&rec, &SegmentConfig::default()),
            Err(Error::NoClimb { min_len: 60 })
        ));
    }

    #[test]
    fn short_dips_are_bridged_long_ones_split() {
        let mut vv = vec![5.0; 40];
        vv.extend([1.0; 10]);
        vv.extend([5.0; 40]);
        assert_eq!(climb_runs(&vv, 2.0, 10), vec![(0, 90)]);
        vv.insert(45, 1.0);
        assert_eq!(climb_runs(&vv, 2.0, 10), vec![(0, 40), (51, 91)]);
    }

    #[test]
    fn ties_prefer_earliest() {
        let mut vv = vec![5.0; 80];
        vv.extend([0.0; 20]);
        vv.extend([5.0; 80]);
        let seg = longest_climb_segment(&record(&vv), &SegmentConfig::default()).unwrap();
        assert_eq!(seg.start, 0);
    }
}
