//! Point-mass longitudinal climb integration.
//!
//! State is `(Va, γ, h, m, μ)`; the angle of attack and (in vertical-speed
//! mode) the thrust are algebraic and solved at every derivative evaluation
//! so that the force balance
//!
//! ```text
//! T cos α − D − m g sin γ            = m dVa/dt
//! (T sin α + L) cos ψ − m g cos γ    = m Va dγ/dt
//! (T sin α + L) sin ψ                = m Va cos γ dμ/dt
//! ```
//!
//! holds exactly, with L and D from the linear lift curve and parabolic drag
//! polar and g from the inverse-square gravity model.
//!
//! # Accelerometer convention
//!
//! `ax`, `az` are body-axis specific forces (gravity excluded) in m/s²: `ax`
//! along the fuselage, positive forward; `az` normal to it in the symmetry
//! plane, positive up (so level flight reads `az ≈ +g`). The body axis is the
//! wind axis rotated nose-up by α:
//!
//! ```text
//! ax =  f_x cos α + f_n sin α
//! az = −f_x sin α + f_n cos α
//! ```
//!
//! with `f_x = (T cos α − D)/m` and `f_n = (T sin α + L)/m`. Turns are
//! coordinated, so `ay` is zero before noise.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::aircraft::AircraftModel;
use super::atmosphere::{atmosphere, SEA_LEVEL_DENSITY};
use crate::error::{Error, Result};
use crate::model_core::{gravity_at_altitude, Channel, FlightRecord, FlightSample};

/// Samples with |ψ| at or above this are treated as rolling (rad).
pub const ROLL_THRESHOLD: f64 = 0.05;

const SPEED_GAIN: f64 = 0.05;
const PATH_GAIN: f64 = 0.3;
const MAX_ACCEL: f64 = 1.0;
const MAX_PATH_RATE: f64 = 0.03;

/// A bank-and-return manoeuvre with linear roll-in and roll-out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollManeuver {
    pub start: f64,
    pub ramp: f64,
    pub hold: f64,
    /// Bank angle during the hold (rad), signed.
    pub bank: f64,
}

impl RollManeuver {
    pub fn roll_at(&self, t: f64) -> f64 {
        let dt = t - self.start;
        let ramp = self.ramp.max(1e-9);
        if dt <= 0.0 || dt >= 2.0 * ramp + self.hold {
            0.0
        } else if dt < ramp {
            self.bank * dt / ramp
        } else if dt <= ramp + self.hold {
            self.bank
        } else {
            self.bank * (2.0 * ramp + self.hold - dt) / ramp
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Guidance {
    /// Fixed throttle; pitch is used to hold a constant equivalent airspeed
    /// (converted to true airspeed), capped at a Mach number.
    SpeedSchedule {
        throttle: f64,
        eas: f64,
        mach_cap: f64,
    },
    /// Autothrottle holds the initial true airspeed while the path angle is
    /// steered to a commanded vertical speed.
    VerticalSpeed { vertical_speed: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimbProfileSpec {
    pub initial_mass: f64,
    pub initial_altitude: f64,
    pub target_altitude: f64,
    pub initial_va: f64,
    pub guidance: Guidance,
    #[serde(default)]
    pub roll: Vec<RollManeuver>,
    /// RK4 step (s).
    pub step: f64,
    /// Spacing of emitted samples (s); must be a whole number of steps.
    pub output_interval: f64,
    pub duration_limit: f64,
}

impl ClimbProfileSpec {
    pub fn new(initial_mass: f64, initial_altitude: f64, target_altitude: f64, initial_va: f64, guidance: Guidance) -> Self {
        Self {
            initial_mass,
            initial_altitude,
            target_altitude,
            initial_va,
            guidance,
            roll: Vec::new(),
            step: 0.1,
            output_interval: 1.0,
            duration_limit: 3600.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.initial_mass > 0.0) {
            return bad(format!("initial_mass must be > 0, got {}", self.initial_mass));
        }
        if !(self.target_altitude > self.initial_altitude) {
            return bad("target_altitude must exceed initial_altitude".into());
        }
        if !(self.initial_va > 0.0) {
            return bad("initial_va must be > 0".into());
        }
        if !(self.step > 0.0) || !(self.output_interval >= self.step) {
            return bad("step must be > 0 and no larger than output_interval".into());
        }
        let ratio = self.output_interval / self.step;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return bad("output_interval must be a whole multiple of step".into());
        }
        if !(self.duration_limit > 0.0) {
            return bad("duration_limit must be > 0".into());
        }
        if let Guidance::SpeedSchedule {
            throttle,
            eas,
            mach_cap,
        } = self.guidance
        {
            if !(throttle > 0.0 && throttle <= 1.2) || !(eas > 0.0) || !(mach_cap > 0.0) {
                return bad("speed schedule needs 0 < throttle <= 1.2, eas > 0, mach_cap > 0".into());
            }
        }
        Ok(())
    }

    fn roll_at(&self, t: f64) -> f64 {
        self.roll.iter().map(|r| r.roll_at(t)).sum()
    }

    fn steps_per_output(&self) -> usize {
        (self.output_interval / self.step).round() as usize
    }
}

/// Additive Gaussian sensor noise and constant biases, per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub sigma: BTreeMap<Channel, f64>,
    #[serde(default)]
    pub bias: BTreeMap<Channel, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        let deg = std::f64::consts::PI / 180.0;
        let sigma = [
            (Channel::Alpha, 0.2 * deg),
            (Channel::Gamma, 0.2 * deg),
            (Channel::Theta, 0.2 * deg),
            (Channel::Psi, 0.2 * deg),
            (Channel::Mu, 0.2 * deg),
            (Channel::ATheta, 0.05 * deg),
            (Channel::Va, 0.5),
            (Channel::Vv, 0.5),
            (Channel::Vg, 0.5),
            (Channel::H, 3.0),
            (Channel::Ax, 0.05),
            (Channel::Ay, 0.05),
            (Channel::Az, 0.05),
            (Channel::Mach, 0.0015),
            (Channel::Q, 20.0),
        ]
        .into_iter()
        .collect();
        Self {
            sigma,
            bias: BTreeMap::new(),
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            sigma: BTreeMap::new(),
            bias: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (ch, s) in &self.sigma {
            if !(*s >= 0.0) || !s.is_finite() {
                return Err(Error::Config(format!("noise sigma for {ch:?} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.sigma.values().all(|&s| s == 0.0) && self.bias.values().all(|&b| b == 0.0)
    }

    /// Returns a noisy copy of `record`. Time stamps are left untouched.
    pub fn apply(&self, record: &FlightRecord) -> FlightRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut out = record.clone();
        for s in &mut out.samples {
            for ch in Channel::ALL {
                let sigma = self.sigma.get(&ch).copied().unwrap_or(0.0);
                let bias = self.bias.get(&ch).copied().unwrap_or(0.0);
                if sigma == 0.0 && bias == 0.0 {
                    continue;
                }
                let mut v = s.get(ch) + bias;
                if sigma > 0.0 {
                    v += sigma * unit.sample(&mut rng);
                }
                if matches!(ch, Channel::Va | Channel::Vg | Channel::Mach | Channel::Q) {
                    v = v.max(0.0);
                }
                s.set(ch, v);
            }
        }
        out
    }
}

/// A simulated flight: the noisy record, its noiseless twin and the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedFlight {
    pub record: FlightRecord,
    pub clean: FlightRecord,
    pub initial_mass: f64,
}

/// When to end an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop on the first emitted sample at or above the target altitude;
    /// hitting the profile's duration limit first is an error.
    TargetAltitude,
    /// Stop after a fixed time regardless of altitude.
    Duration(f64),
}

// State vector layout.
const VA: usize = 0;
const GAMMA: usize = 1;
const H: usize = 2;
const MASS: usize = 3;
const MU: usize = 4;
type State = [f64; 5];

#[derive(Debug, Clone, Copy)]
struct Eval {
    deriv: State,
    alpha: f64,
    psi: f64,
    theta: f64,
    f_x: f64,
    f_n: f64,
    q: f64,
    mach: f64,
    mdot_l: f64,
    mdot_r: f64,
}

struct Dynamics<'a> {
    model: &'a AircraftModel,
    profile: &'a ClimbProfileSpec,
}

impl Dynamics<'_> {
    /// α such that `T sin α + qS·CL(α) = normal_force` for a given thrust.
    fn alpha_for_thrust(&self, thrust: f64, qs: f64, normal_force: f64) -> f64 {
        let m = self.model;
        let mut a: f64 = 0.05;
        for _ in 0..60 {
            let f = thrust * a.sin() + qs * m.lift_coefficient(a) - normal_force;
            let df = thrust * a.cos() + qs * m.cl_alpha;
            let delta = f / df;
            a -= delta;
            if delta.abs() < 1e-15 {
                break;
            }
        }
        a
    }

    /// α such that thrust can simultaneously deliver `axial_force + D(α)`
    /// along the path and `normal_force` across it; returns `(α, T)`.
    fn alpha_and_thrust(&self, qs: f64, axial_force: f64, normal_force: f64) -> (f64, f64) {
        let m = self.model;
        let mut a: f64 = 0.05;
        for _ in 0..60 {
            let cl = m.lift_coefficient(a);
            let fx = qs * m.drag_coefficient(cl) + axial_force;
            let dfx = qs * 2.0 * m.k * cl * m.cl_alpha;
            let (tan, sec2) = (a.tan(), 1.0 / (a.cos() * a.cos()));
            let f = fx * tan + qs * cl - normal_force;
            let df = dfx * tan + fx * sec2 + qs * m.cl_alpha;
            let delta = f / df;
            a -= delta;
            if delta.abs() < 1e-15 {
                break;
            }
        }
        let cl = m.lift_coefficient(a);
        let fx = qs * m.drag_coefficient(cl) + axial_force;
        (a, fx / a.cos())
    }

    fn eval(&self, x: &State, t: f64) -> Result<Eval> {
        let (model, profile) = (self.model, self.profile);
        let (va, gamma, h, mass) = (x[VA], x[GAMMA], x[H], x[MASS]);
        if !(va > 1.0) {
            return Err(Error::Domain {
                what: "true airspeed",
                value: va,
                bound: "Va > 1 m/s",
            });
        }
        let g = gravity_at_altitude(h)?;
        let atm = atmosphere(h)?;
        let q = 0.5 * atm.density * va * va;
        let qs = q * model.wing_area;
        let mach = va / atm.speed_of_sound;
        let psi = profile.roll_at(t);
        let cos_psi = psi.cos();

        let normal_for = |gamma_dot: f64| mass * (g * gamma.cos() + va * gamma_dot) / cos_psi;

        let (alpha, thrust) = match profile.guidance {
            Guidance::SpeedSchedule {
                throttle,
                eas,
                mach_cap,
            } => {
                let thrust = model.thrust.thrust(atm.density, mach, throttle);
                let va_cmd =
                    (eas * (SEA_LEVEL_DENSITY / atm.density).sqrt()).min(mach_cap * atm.speed_of_sound);
                let accel_cmd = (SPEED_GAIN * (va_cmd - va)).clamp(-MAX_ACCEL, MAX_ACCEL);
                let mut alpha = self.alpha_for_thrust(thrust, qs, normal_for(0.0));
                for _ in 0..4 {
                    let gamma_dot = path_rate_command(model, thrust, qs, alpha, mass, g, accel_cmd, gamma);
                    alpha = self.alpha_for_thrust(thrust, qs, normal_for(gamma_dot));
                }
                (alpha, thrust)
            }
            Guidance::VerticalSpeed { vertical_speed } => {
                let accel_cmd =
                    (SPEED_GAIN * (profile.initial_va - va)).clamp(-MAX_ACCEL, MAX_ACCEL);
                let gamma_cmd = (vertical_speed / va).clamp(-0.3, 0.3).asin();
                let gamma_dot =
                    (PATH_GAIN * (gamma_cmd - gamma)).clamp(-MAX_PATH_RATE, MAX_PATH_RATE);
                let axial = mass * (accel_cmd + g * gamma.sin());
                self.alpha_and_thrust(qs, axial, normal_for(gamma_dot))
            }
        };

        let cl = model.lift_coefficient(alpha);
        if cl > model.cl_max {
            return Err(Error::Stall {
                cl,
                cl_max: model.cl_max,
                t,
            });
        }
        let (lift, drag) = model.aero_forces(q, alpha);
        let f_x = (thrust * alpha.cos() - drag) / mass;
        let f_n = (thrust * alpha.sin() + lift) / mass;
        let (mdot_l, mdot_r) = model.fuel_flow.flows(thrust);

        let deriv = [
            f_x - g * gamma.sin(),
            (f_n * cos_psi - g * gamma.cos()) / va,
            va * gamma.sin(),
            -(mdot_l + mdot_r),
            f_n * psi.sin() / (va * gamma.cos()),
        ];
        Ok(Eval {
            deriv,
            alpha,
            psi,
            theta: gamma + alpha * cos_psi,
            f_x,
            f_n,
            q,
            mach,
            mdot_l,
            mdot_r,
        })
    }

    /// Steady-state path angle for the initial condition.
    fn trim_gamma(&self, x: &State) -> Result<f64> {
        let mut state = *x;
        match self.profile.guidance {
            Guidance::VerticalSpeed { vertical_speed } => {
                Ok((vertical_speed / state[VA]).clamp(-0.3, 0.3).asin())
            }
            Guidance::SpeedSchedule { .. } => {
                // Fixed point: the commanded path rate vanishes at trim.
                for _ in 0..50 {
                    let e = self.eval(&state, 0.0)?;
                    let next = state[GAMMA] + e.deriv[GAMMA] / PATH_GAIN;
                    if (next - state[GAMMA]).abs() < 1e-13 {
                        state[GAMMA] = next;
                        break;
                    }
                    state[GAMMA] = next;
                }
                Ok(state[GAMMA])
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn path_rate_command(
    model: &AircraftModel,
    thrust: f64,
    qs: f64,
    alpha: f64,
    mass: f64,
    g: f64,
    accel_cmd: f64,
    gamma: f64,
) -> f64 {
    let drag = qs * model.drag_coefficient(model.lift_coefficient(alpha));
    let sin_cmd = ((thrust * alpha.cos() - drag) / mass - accel_cmd) / g;
    let gamma_cmd = sin_cmd.clamp(-0.25, 0.35).asin();
    (PATH_GAIN * (gamma_cmd - gamma)).clamp(-MAX_PATH_RATE, MAX_PATH_RATE)
}

fn add_scaled(x: &State, k: &State, h: f64) -> State {
    std::array::from_fn(|i| x[i] + h * k[i])
}

/// Integrates a noiseless trajectory with fixed-step RK4.
pub fn integrate(
    model: &AircraftModel,
    profile: &ClimbProfileSpec,
    stop: StopRule,
    flight_id: &str,
    reg: &str,
) -> Result<FlightRecord> {
    model.validate()?;
    profile.validate()?;
    let dynamics = Dynamics { model, profile };
    let dt = profile.step;
    let ratio = profile.steps_per_output();

    let mut x: State = [
        profile.initial_va,
        0.0,
        profile.initial_altitude,
        profile.initial_mass,
        0.0,
    ];
    x[GAMMA] = dynamics.trim_gamma(&x)?;

    let mut theta_fine = Vec::new();
    let mut snapshots: Vec<(usize, State, Eval)> = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * dt;
        let k1 = dynamics.eval(&x, t)?;
        theta_fine.push(k1.theta);
        if k % ratio == 0 {
            snapshots.push((k, x, k1));
            let done = match stop {
                StopRule::TargetAltitude => x[H] >= profile.target_altitude,
                StopRule::Duration(d) => t >= d,
            };
            if done {
                break;
            }
            if stop == StopRule::TargetAltitude && t >= profile.duration_limit {
                return Err(Error::DurationLimit {
                    limit: profile.duration_limit,
                    altitude: x[H],
                });
            }
        }
        let k2 = dynamics.eval(&add_scaled(&x, &k1.deriv, dt / 2.0), t + dt / 2.0)?;
        let k3 = dynamics.eval(&add_scaled(&x, &k2.deriv, dt / 2.0), t + dt / 2.0)?;
        let k4 = dynamics.eval(&add_scaled(&x, &k3.deriv, dt), t + dt)?;
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1.deriv[i] + 2.0 * k2.deriv[i] + 2.0 * k3.deriv[i] + k4.deriv[i]);
        }
        k += 1;
    }

    let last = theta_fine.len() - 1;
    let samples = snapshots
        .iter()
        .map(|&(k, x, e)| {
            let a_theta = match (k.checked_sub(1), (k < last).then_some(k + 1)) {
                (Some(lo), Some(hi)) => (theta_fine[hi] - theta_fine[lo]) / (2.0 * dt),
                (None, Some(hi)) => (theta_fine[hi] - theta_fine[k]) / dt,
                (Some(lo), None) => (theta_fine[k] - theta_fine[lo]) / dt,
                (None, None) => 0.0,
            };
            let (va, gamma, alpha) = (x[VA], x[GAMMA], e.alpha);
            FlightSample {
                t: k as f64 * dt,
                alpha,
                gamma,
                theta: e.theta,
                psi: e.psi,
                mu: x[MU],
                va,
                vv: va * gamma.sin(),
                vg: va * gamma.cos(),
                a_theta,
                h: x[H],
                ax: e.f_x * alpha.cos() + e.f_n * alpha.sin(),
                ay: 0.0,
                az: -e.f_x * alpha.sin() + e.f_n * alpha.cos(),
                mach: e.mach,
                q: e.q,
                m: x[MASS],
                mdot_l: e.mdot_l,
                mdot_r: e.mdot_r,
            }
        })
        .collect();

    Ok(FlightRecord {
        flight_id: flight_id.to_string(),
        reg: reg.to_string(),
        samples,
        sample_interval: profile.output_interval,
    })
}

/// Simulates one climb to the target altitude; returns the noisy record
/// together with its noiseless twin.
pub fn simulate_climb(
    model: &AircraftModel,
    profile: &ClimbProfileSpec,
    noise: &NoiseSpec,
    reg: &str,
    flight_id: &str,
) -> Result<SimulatedFlight> {
    noise.validate()?;
    let clean = integrate(model, profile, StopRule::TargetAltitude, flight_id, reg)?;
    let record = noise.apply(&clean);
    Ok(SimulatedFlight {
        record,
        clean,
        initial_mass: profile.initial_mass,
    })
}

/// Signed residual (N) of the thrust-free longitudinal force balance
///
/// ```text
/// q S CL0 + q α S CLα + q tan α (S CD0 + S K CL0²) + q α tan α (2 S K CL0 CLα)
///   + q α² tan α (S K CLα²) + m (g sin γ tan α + dVa/dt tan α − Va dγ/dt − g cos γ)
/// ```
///
/// evaluated with the supplied coefficients and mass. `dVa/dt` and `dγ/dt`
/// are recovered from the body-axis accelerometer channels.
pub fn longitudinal_residual(sample: &FlightSample, model: &AircraftModel, mass: f64) -> Result<f64> {
    if !(sample.psi.abs() < ROLL_THRESHOLD) {
        return Err(Error::Rolling {
            psi: sample.psi,
            threshold: ROLL_THRESHOLD,
        });
    }
    let g = gravity_at_altitude(sample.h)?;
    let (alpha, gamma, q, va) = (sample.alpha, sample.gamma, sample.q, sample.va);
    let (s, cl0, cla, cd0, k) = (model.wing_area, model.cl0, model.cl_alpha, model.cd0, model.k);
    let tan = alpha.tan();

    let f_x = sample.ax * alpha.cos() - sample.az * alpha.sin();
    let f_n = sample.ax * alpha.sin() + sample.az * alpha.cos();
    let va_dot = f_x - g * gamma.sin();
    let gamma_dot = (f_n - g * gamma.cos()) / va;

    let aero = q * (s * cl0)
        + q * alpha * (s * cla)
        + q * tan * (s * cd0 + s * k * cl0 * cl0)
        + q * alpha * tan * (2.0 * s * k * cl0 * cla)
        + q * alpha * alpha * tan * (s * k * cla * cla);
    let inertial = mass * (g * gamma.sin() * tan + va_dot * tan - va * gamma_dot - g * gamma.cos());
    Ok(aero + inertial)
}
