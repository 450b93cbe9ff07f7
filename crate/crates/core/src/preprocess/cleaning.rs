//! Gross-mass and fuel channel cleaning.
//!
//! Three rules are enforced on a climb segment:
//!
//! * R1: gross mass is positive and the burned fuel is non-negative (fuel
//!   flows are non-negative and finite);
//! * R2: gross mass is non-increasing and burned fuel non-decreasing;
//! * R3: `max(m + m_f) − min(m + m_f) < L`.
//!
//! R1/R2 offenders are found per sample. Mass samples outside a longest
//! non-increasing subsequence are the minimal set whose removal restores
//! monotonicity. Runs of consecutive offenders no longer than the transient
//! limit are overwritten with the preceding valid neighbour; longer runs are
//! dropped. R3 is checked after repair and rejects the whole flight.

use serde::{Deserialize, Serialize};

use super::features::fuel_burned_series;
use super::segment::ClimbSegment;
use crate::error::{Error, RejectReason, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    /// Bound on the fluctuation of `m + m_f` (kg).
    pub sum_bound: f64,
    /// Longest violation run (samples) repaired rather than dropped.
    pub transient_limit: usize,
    /// Fewest samples a cleaned segment may keep.
    pub min_len: usize,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            sum_bound: 300.0,
            transient_limit: 3,
            min_len: 60,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sum_bound > 0.0) {
            return Err(Error::Config(format!("cleaning L must be > 0, got {}", self.sum_bound)));
        }
        if self.min_len < 2 {
            return Err(Error::Config("cleaning min_len must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub replaced: usize,
    pub eliminated: usize,
    pub flights_rejected: usize,
    pub r1_violations: usize,
    pub r2_violations: usize,
    pub r3_violations: usize,
}

impl CleaningReport {
    pub fn merge(&mut self, other: &CleaningReport) {
        self.replaced += other.replaced;
        self.eliminated += other.eliminated;
        self.flights_rejected += other.flights_rejected;
        self.r1_violations += other.r1_violations;
        self.r2_violations += other.r2_violations;
        self.r3_violations += other.r3_violations;
    }
}

/// Indices of one longest non-increasing subsequence of `values`.
fn longest_non_increasing(values: &[f64]) -> Vec<usize> {
    // Patience sorting on the negated sequence (longest non-decreasing).
    let mut tails: Vec<usize> = Vec::new();
    let mut prev = vec![usize::MAX; values.len()];
    for (i, &v) in values.iter().enumerate() {
        let key = -v;
        let pos = tails.partition_point(|&j| -values[j] <= key);
        if pos > 0 {
            prev[i] = tails[pos - 1];
        }
        if pos == tails.len() {
            tails.push(i);
        } else {
            tails[pos] = i;
        }
    }
    let mut out = Vec::with_capacity(tails.len());
    let mut cur = tails.last().copied().unwrap_or(usize::MAX);
    while cur != usize::MAX {
        out.push(cur);
        cur = prev[cur];
    }
    out.reverse();
    out
}

fn runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < flags.len() {
        if flags[i] {
            let s = i;
            while i < flags.len() && flags[i] {
                i += 1;
            }
            out.push((s, i));
        } else {
            i += 1;
        }
    }
    out
}

fn flow_ok(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Enforces the three mass-channel rules; see the module docs.
pub fn clean_mass_channels(
    segment: &ClimbSegment,
    config: &CleaningConfig,
) -> Result<(ClimbSegment, CleaningReport)> {
    config.validate()?;
    if segment.is_empty() {
        return Err(Error::Empty("climb segment"));
    }
    let n = segment.len();
    let s = &segment.samples;
    let mut report = CleaningReport::default();

    // R1 on the flows shows up as a negative (or shrinking) burned-fuel total.
    let bad_flow: Vec<bool> = s.iter().map(|x| !(flow_ok(x.mdot_l) && flow_ok(x.mdot_r))).collect();
    let mut bad_mass: Vec<bool> = s.iter().map(|x| !(x.m.is_finite() && x.m > 0.0)).collect();

    let raw_burn = fuel_burned_series(s);
    for j in 0..n {
        if !(s[j].m.is_finite() && s[j].m > 0.0) || raw_burn[j] < 0.0 || raw_burn[j].is_nan() {
            report.r1_violations += 1;
        } else if bad_flow[j] {
            report.r2_violations += 1;
        }
    }

    // R2 on the mass channel.
    let candidates: Vec<usize> = (0..n).filter(|&j| !bad_mass[j]).collect();
    let masses: Vec<f64> = candidates.iter().map(|&j| s[j].m).collect();
    let mut keep = vec![false; n];
    for k in longest_non_increasing(&masses) {
        keep[candidates[k]] = true;
    }
    for &j in &candidates {
        if !keep[j] {
            bad_mass[j] = true;
            report.r2_violations += 1;
        }
    }

    let flagged: Vec<bool> = (0..n).map(|j| bad_mass[j] || bad_flow[j]).collect();
    let mut out = s.clone();
    let mut drop = vec![false; n];
    for (a, b) in runs(&flagged) {
        if b - a > config.transient_limit {
            drop[a..b].iter_mut().for_each(|d| *d = true);
            report.eliminated += b - a;
            continue;
        }
        // Nearest valid neighbour, preferring the preceding one.
        let Some(src) = a.checked_sub(1).or((b < n).then_some(b)) else {
            drop[a..b].iter_mut().for_each(|d| *d = true);
            report.eliminated += b - a;
            continue;
        };
        for j in a..b {
            if bad_mass[j] {
                out[j].m = s[src].m;
            }
            if bad_flow[j] {
                out[j].mdot_l = s[src].mdot_l;
                out[j].mdot_r = s[src].mdot_r;
            }
            report.replaced += 1;
        }
    }
    let samples: Vec<_> = out
        .into_iter()
        .zip(&drop)
        .filter_map(|(x, &d)| (!d).then_some(x))
        .collect();

    if samples.len() < config.min_len {
        return Err(Error::FlightRejected(RejectReason::TooFewSamples));
    }

    let burn = fuel_burned_series(&samples);
    let (lo, hi) = samples
        .iter()
        .zip(&burn)
        .map(|(x, mf)| x.m + mf)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(hi - lo < config.sum_bound) {
        return Err(Error::FlightRejected(RejectReason::SumFluctuation));
    }

    Ok((
        ClimbSegment {
            samples,
            ..segment.clone()
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_core::FlightSample;

    /// A clean segment burning 9 kg/s from 300 t.
    fn segment(n: usize) -> ClimbSegment {
        let samples = (0..n)
            .map(|i| FlightSample {
                t: i as f64,
                m: 300_000.0 - 9.0 * i as f64,
                mdot_l: 4.5,
                mdot_r: 4.5,
                vv: 10.0,
                ..Default::default()
            })
            .collect();
        ClimbSegment {
            flight_id: "F".into(),
            reg: "R".into(),
            samples,
            start: 0,
            end: n,
        }
    }

    #[test]
    fn lnis_skips_a_dip() {
        let idx = longest_non_increasing(&[5.0, 4.0, 1.0, 3.0, 3.0, 2.0]);
        assert_eq!(idx, vec![0, 1, 3, 4, 5]);
    }

    #[test]
    fn clean_segment_is_untouched() {
        let seg = segment(200);
        let (out, report) = clean_mass_channels(&seg, &CleaningConfig::default()).unwrap();
        assert_eq!(out, seg);
        assert_eq!(report, CleaningReport::default());
    }

    #[test]
    fn single_spike_replaced_by_neighbour() {
        let mut seg = segment(200);
        seg.samples[50].m += 5_000.0;
        let (out, report) = clean_mass_channels(&seg, &CleaningConfig::default()).unwrap();
        assert_eq!(out.len(), 200);
        assert_eq!(out.samples[50].m, seg.samples[49].m);
        assert_eq!(report.replaced, 1);
        assert_eq!(report.eliminated, 0);

        let mut seg = segment(200);
        seg.samples[80].m -= 5_000.0;
        let (out, _) = clean_mass_channels(&seg, &CleaningConfig::default()).unwrap();
        assert_eq!(out.samples[80].m, seg.samples[79].m);
    }

    #[test]
    fn persistent_violation_eliminated() {
        let mut seg = segment(200);
        for x in &mut seg.samples[100..110] {
            x.m = -1.0;
        }
        let (out, report) = clean_mass_channels(&seg, &CleaningConfig::default()).unwrap();
        assert_eq!(out.len(), 190);
        assert_eq!(report.eliminated, 10);
        assert!(out.samples.iter().all(|x| x.m > 0.0));
    }

    #[test]
    fn negative_flow_repaired() {
        let mut seg = segment(200);
        seg.samples[10].mdot_r = -50.0;
        let (out, report) = clean_mass_channels(&seg, &CleaningConfig::default()).unwrap();
        assert_eq!(out.samples[10].mdot_r, 4.5);
        assert_eq!(report.replaced, 1);
    }

    #[test]
    fn drift_rejects_flight() {
        let mut seg = segment(200);
        // mass falls 2 kg/s slower than fuel burn: +400 kg over the segment
        for (i, x) in seg.samples.iter_mut().enumerate() {
            x.m += 2.0 * i as f64;
        }
        assert!(matches!(
            clean_mass_channels(&seg, &CleaningConfig::default()),
            Err(Error::FlightRejected(RejectReason::SumFluctuation))
        ));
    }

    #[test]
    fn too_few_survivors_rejects() {
        let mut seg = segment(70);
        for x in &mut seg.samples[0..20] {
            x.mdot_l = f64::NAN;
        }
        assert!(matches!(
            clean_mass_channels(&seg, &CleaningConfig::default()),
            Err(Error::FlightRejected(RejectReason::TooFewSamples))
        ));
    }

    #[test]
    fn idempotent_after_repair() {
        let mut seg = segment(300);
        seg.samples[5].m += 800.0;
        seg.samples[150].mdot_l = -3.0;
        for x in &mut seg.samples[200..220] {
            x.m = 0.0;
        }
        let cfg = CleaningConfig::default();
        let (once, _) = clean_mass_channels(&seg, &cfg).unwrap();
        let (twice, report) = clean_mass_channels(&once, &cfg).unwrap();
        assert_eq!(once, twice);
        assert_eq!(report, CleaningReport::default());
    }
}
