//! Shared record types, physical constants and record-level utilities.
//!
//! Everything is SI: metres, seconds, kilograms, radians, pascals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Surface gravitational acceleration (m/s²).
pub const G0: f64 = 9.80665;
/// Earth mean radius (m).
pub const EARTH_RADIUS: f64 = 6.3781e6;

/// Default output sampling interval (s).
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 1.0;

/// Inverse-square gravity model.
pub fn gravity_at_altitude(h: f64) -> Result<f64> {
    if !(h >= -500.0) || !h.is_finite() {
        return Err(Error::Domain {
            what: "altitude",
            value: h,
            bound: "h >= -500 m",
        });
    }
    let ratio = EARTH_RADIUS / (EARTH_RADIUS + h);
    Ok(G0 * ratio * ratio)
}

/// A recorded flight channel.
///
/// The first fifteen variants, in declaration order, are the instantaneous
/// feature vector consumed by the regressors (see [`FEATURE_CHANNELS`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Alpha,
    Gamma,
    Theta,
    Psi,
    Mu,
    Va,
    Vv,
    Vg,
    ATheta,
    H,
    Ax,
    Ay,
    Az,
    Mach,
    Q,
    M,
    MdotL,
    MdotR,
}

/// The instantaneous parameters `[α, γ, θ, ψ, μ, Va, Vv, Vg, aθ, h, ax, ay, az, M, q]`.
pub const FEATURE_CHANNELS: [Channel; 15] = [
    Channel::Alpha,
    Channel::Gamma,
    Channel::Theta,
    Channel::Psi,
    Channel::Mu,
    Channel::Va,
    Channel::Vv,
    Channel::Vg,
    Channel::ATheta,
    Channel::H,
    Channel::Ax,
    Channel::Ay,
    Channel::Az,
    Channel::Mach,
    Channel::Q,
];

pub const N_FEATURES: usize = FEATURE_CHANNELS.len();

impl Channel {
    pub const ALL: [Channel; 18] = [
        Channel::Alpha,
        Channel::Gamma,
        Channel::Theta,
        Channel::Psi,
        Channel::Mu,
        Channel::Va,
        Channel::Vv,
        Channel::Vg,
        Channel::ATheta,
        Channel::H,
        Channel::Ax,
        Channel::Ay,
        Channel::Az,
        Channel::Mach,
        Channel::Q,
        Channel::M,
        Channel::MdotL,
        Channel::MdotR,
    ];

    /// Short symbol used in file headers (before the unit suffix).
    pub fn symbol(self) -> &'static str {
        match self {
            Channel::Alpha => "alpha",
            Channel::Gamma => "gamma",
            Channel::Theta => "theta",
            Channel::Psi => "psi",
            Channel::Mu => "mu",
            Channel::Va => "Va",
            Channel::Vv => "Vv",
            Channel::Vg => "Vg",
            Channel::ATheta => "a_theta",
            Channel::H => "h",
            Channel::Ax => "ax",
            Channel::Ay => "ay",
            Channel::Az => "az",
            Channel::Mach => "M",
            Channel::Q => "q",
            Channel::M => "m",
            Channel::MdotL => "mdot_l",
            Channel::MdotR => "mdot_r",
        }
    }

    /// Canonical SI unit suffix.
    pub fn si_unit(self) -> &'static str {
        match self {
            Channel::Alpha | Channel::Gamma | Channel::Theta | Channel::Psi | Channel::Mu => "rad",
            Channel::Va | Channel::Vv | Channel::Vg => "mps",
            Channel::ATheta => "radps",
            Channel::H => "m",
            Channel::Ax | Channel::Ay | Channel::Az => "mps2",
            Channel::Mach => "nd",
            Channel::Q => "Pa",
            Channel::M => "kg",
            Channel::MdotL | Channel::MdotR => "kgps",
        }
    }
}

/// One time step of a flight record.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlightSample {
    /// Time since record start (s).
    pub t: f64,
    /// Angle of attack (rad).
    pub alpha: f64,
    /// Flight path angle (rad).
    pub gamma: f64,
    /// Pitch angle (rad).
    pub theta: f64,
    /// Roll angle (rad).
    pub psi: f64,
    /// True track angle (rad), unwrapped.
    pub mu: f64,
    /// True airspeed (m/s).
    pub va: f64,
    /// Vertical speed (m/s).
    pub vv: f64,
    /// Ground speed (m/s).
    pub vg: f64,
    /// Pitch angle rate (rad/s).
    pub a_theta: f64,
    /// Altitude (m).
    pub h: f64,
    /// Body-axis specific force components (m/s²), see the simulator docs
    /// for the sign convention.
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub mach: f64,
    /// Dynamic pressure (Pa).
    pub q: f64,
    /// Gross mass (kg).
    pub m: f64,
    /// Left and right engine fuel flow (kg/s).
    pub mdot_l: f64,
    pub mdot_r: f64,
}

impl FlightSample {
    pub fn get(&self, ch: Channel) -> f64 {
        match ch {
            Channel::Alpha => self.alpha,
            Channel::Gamma => self.gamma,
            Channel::Theta => self.theta,
            Channel::Psi => self.psi,
            Channel::Mu => self.mu,
            Channel::Va => self.va,
            Channel::Vv => self.vv,
            Channel::Vg => self.vg,
            Channel::ATheta => self.a_theta,
            Channel::H => self.h,
            Channel::Ax => self.ax,
            Channel::Ay => self.ay,
            Channel::Az => self.az,
            Channel::Mach => self.mach,
            Channel::Q => self.q,
            Channel::M => self.m,
            Channel::MdotL => self.mdot_l,
            Channel::MdotR => self.mdot_r,
        }
    }

    pub fn set(&mut self, ch: Channel, value: f64) {
        let slot = match ch {
            Channel::Alpha => &mut self.alpha,
            Channel::Gamma => &mut self.gamma,
            Channel::Theta => &mut self.theta,
            Channel::Psi => &mut self.psi,
            Channel::Mu => &mut self.mu,
            Channel::Va => &mut self.va,
            Channel::Vv => &mut self.vv,
            Channel::Vg => &mut self.vg,
            Channel::ATheta => &mut self.a_theta,
            Channel::H => &mut self.h,
            Channel::Ax => &mut self.ax,
            Channel::Ay => &mut self.ay,
            Channel::Az => &mut self.az,
            Channel::Mach => &mut self.mach,
            Channel::Q => &mut self.q,
            Channel::M => &mut self.m,
            Channel::MdotL => &mut self.mdot_l,
            Channel::MdotR => &mut self.mdot_r,
        };
        *slot = value;
    }

    /// The fifteen instantaneous features in [`FEATURE_CHANNELS`] order.
    pub fn features(&self) -> [f64; N_FEATURES] {
        FEATURE_CHANNELS.map(|ch| self.get(ch))
    }

    /// Total fuel flow of both engines (kg/s).
    pub fn fuel_flow(&self) -> f64 {
        self.mdot_l + self.mdot_r
    }
}

/// A time-indexed multichannel record of one flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightRecord {
    pub flight_id: String,
    /// Aircraft registration.
    pub reg: String,
    pub samples: Vec<FlightSample>,
    /// Nominal spacing between samples (s).
    pub sample_interval: f64,
}

impl FlightRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks sample count and strict time monotonicity.
    pub fn validate(&self) -> Result<()> {
        validate_times(&self.samples)
    }

    pub fn channel(&self, ch: Channel) -> Vec<f64> {
        self.samples.iter().map(|s| s.get(ch)).collect()
    }
}

fn validate_times(samples: &[FlightSample]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    for (i, w) in samples.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(Error::NonMonotoneTime { index: i + 1 });
        }
    }
    if !(samples[0].t >= 0.0) {
        return Err(Error::NonMonotoneTime { index: 0 });
    }
    Ok(())
}

/// Resamples every channel onto the grid `t0, t0 + Δ, t0 + 2Δ, …` by linear
/// interpolation. Grid points that coincide with an input time copy that
/// sample exactly, which makes the operation idempotent.
pub fn resample_uniform(record: &FlightRecord, interval: f64) -> Result<FlightRecord> {
    if !(interval > 0.0) || !interval.is_finite() {
        return Err(Error::Domain {
            what: "resample interval",
            value: interval,
            bound: "interval > 0",
        });
    }
    record.validate()?;

    let src = &record.samples;
    let t0 = src[0].t;
    let t_end = src[src.len() - 1].t;
    // Tolerate round-off so a grid point landing on the final sample is kept.
    let n = ((t_end - t0) / interval + 1e-9).floor() as usize + 1;

    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let t = t0 + k as f64 * interval;
        while seg + 2 < src.len() && src[seg + 1].t <= t {
            seg += 1;
        }
        let (a, b) = (&src[seg], &src[seg + 1]);
        let sample = if t == a.t {
            *a
        } else if t == b.t {
            *b
        } else {
            let frac = ((t - a.t) / (b.t - a.t)).min(1.0);
            let mut s = *a;
            for ch in Channel::ALL {
                let (va, vb) = (a.get(ch), b.get(ch));
                s.set(ch, va + (vb - va) * frac);
            }
            s
        };
        let mut sample = sample;
        sample.t = t;
        out.push(sample);
    }

    if out.len() < 2 {
        return Err(Error::TooFewSamples(out.len()));
    }

    Ok(FlightRecord {
        flight_id: record.flight_id.clone(),
        reg: record.reg.clone(),
        samples: out,
        sample_interval: interval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn record_from(times: &[f64], f: impl Fn(f64) -> f64) -> FlightRecord {
        let samples = times
            .iter()
            .map(|&t| {
                let mut s = FlightSample {
                    t,
                    ..Default::default()
                };
                s.h = f(t);
                s.va = 200.0;
                s
            })
            .collect();
        FlightRecord {
            flight_id: "F1".into(),
            reg: "B-0001".into(),
            samples,
            sample_interval: 1.0,
        }
    }

    #[test]
    fn gravity_reference_points() {
        assert_eq!(gravity_at_altitude(0.0).unwrap(), 9.80665);
        assert_abs_diff_eq!(
            gravity_at_altitude(EARTH_RADIUS).unwrap(),
            2.4516625,
            epsilon = 1e-12
        );
        // 9.80665 * (6.3781e6 / 6.3881e6)^2 at 40 significant digits
        assert_abs_diff_eq!(
            gravity_at_altitude(10_000.0).unwrap(),
            9.775971161902128,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gravity_rejects_subterranean_altitude() {
        assert!(gravity_at_altitude(-501.0).is_err());
        assert!(gravity_at_altitude(f64::NAN).is_err());
        assert!(gravity_at_altitude(-500.0).is_ok());
    }

    #[test]
    fn gravity_band_over_flight_envelope() {
        let mut prev = f64::INFINITY;
        for i in 0..=150 {
            let g = gravity_at_altitude(i as f64 * 100.0).unwrap();
            assert!(g < prev);
            assert!(g > 9.76 && g < 9.807);
            prev = g;
        }
    }

    #[test]
    fn resample_midpoint() {
        let rec = record_from(&[0.0, 2.0], |t| t * 50.0);
        let out = resample_uniform(&rec, 1.0).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.samples[1].h, 50.0);
    }

    #[test]
    fn resample_irregular_identity_channel() {
        let rec = record_from(&[0.0, 0.4, 1.1, 2.0], |t| t);
        let out = resample_uniform(&rec, 0.5).unwrap();
        assert_eq!(out.len(), 5);
        for s in &out.samples {
            assert_abs_diff_eq!(s.h, s.t, epsilon = 1e-9);
        }
    }

    #[test]
    fn resample_uniform_input_is_unchanged() {
        let times: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let rec = record_from(&times, |t| (t * 0.3).sin());
        let out = resample_uniform(&rec, 1.0).unwrap();
        assert_eq!(out, rec);
    }

    #[test]
    fn resample_errors() {
        let rec = record_from(&[0.0], |t| t);
        assert!(matches!(
            resample_uniform(&rec, 1.0),
            Err(Error::TooFewSamples(1))
        ));
        let rec = record_from(&[0.0, 2.0, 1.0], |t| t);
        assert!(matches!(
            resample_uniform(&rec, 1.0),
            Err(Error::NonMonotoneTime { index: 2 })
        ));
        let rec = record_from(&[0.0, 1.0], |t| t);
        assert!(resample_uniform(&rec, 0.0).is_err());
    }

    fn irregular_times() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..3.0, 2..40).prop_map(|gaps| {
            let mut t = 0.0;
            gaps.into_iter()
                .map(|g| {
                    let now = t;
                    t += g;
                    now
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn resample_is_idempotent(times in irregular_times(), interval in 0.1f64..2.0) {
            let rec = record_from(&times, |t| (t * 0.7).cos() * 100.0);
            if let Ok(once) = resample_uniform(&rec, interval) {
                let twice = resample_uniform(&once, interval).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn resample_preserves_constants(times in irregular_times(), interval in 0.1f64..2.0, c in -1e4f64..1e4) {
            let rec = record_from(&times, |_| c);
            if let Ok(out) = resample_uniform(&rec, interval) {
                for s in &out.samples {
                    prop_assert_eq!(s.h, c);
                    prop_assert_eq!(s.va, 200.0);
                }
            }
        }
    }
}
