//! Synthetic fleets: several airframes with perturbed coefficients, each
//! flying a number of climbs with randomized mass, throttle and schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::aircraft::AircraftModel;
use super::atmosphere::{isa_state, SEA_LEVEL_DENSITY};
use super::flight::{simulate_climb, ClimbProfileSpec, Guidance, NoiseSpec, RollManeuver, SimulatedFlight};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetSpec {
    pub n_aircraft: usize,
    pub flights_per_aircraft: usize,
    /// Bounds of the initial-mass distribution (kg).
    pub mass_range: [f64; 2],
    pub seed: u64,
    pub base_model: AircraftModel,
    /// Relative half-width of the per-airframe coefficient perturbations.
    pub coefficient_spread: f64,
    pub throttle_range: [f64; 2],
    pub initial_altitude_range: [f64; 2],
    pub target_altitude_range: [f64; 2],
    /// Equivalent airspeed of the climb schedule (m/s).
    pub eas_range: [f64; 2],
    pub mach_cap: f64,
    /// Probability that a flight contains one banked turn.
    pub turn_probability: f64,
    /// Bank angle magnitude range for turns (rad).
    pub bank_range: [f64; 2],
    pub noise: NoiseSpec,
}

impl Default for FleetSpec {
    fn default() -> Self {
        let deg = std::f64::consts::PI / 180.0;
        Self {
            n_aircraft: 19,
            flights_per_aircraft: 10,
            mass_range: [227_409.0, 350_942.0],
            seed: 0,
            base_model: AircraftModel::default(),
            coefficient_spread: 0.03,
            throttle_range: [0.85, 1.0],
            initial_altitude_range: [450.0, 1_200.0],
            target_altitude_range: [7_500.0, 10_000.0],
            eas_range: [145.0, 160.0],
            mach_cap: 0.84,
            turn_probability: 0.5,
            bank_range: [10.0 * deg, 25.0 * deg],
            noise: NoiseSpec::default(),
        }
    }
}

impl FleetSpec {
    pub fn new(n_aircraft: usize, flights_per_aircraft: usize, mass_range: [f64; 2], seed: u64) -> Self {
        Self {
            n_aircraft,
            flights_per_aircraft,
            mass_range,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_aircraft == 0 || self.flights_per_aircraft == 0 {
            return Err(Error::Config("fleet counts must be >= 1".into()));
        }
        let ordered = |name: &str, r: [f64; 2]| {
            if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be an ordered finite interval")))
            }
        };
        ordered("mass_range", self.mass_range)?;
        if !(self.mass_range[0] > 0.0) || self.mass_range[0] >= self.mass_range[1] {
            return Err(Error::Config("mass_range must be positive with min < max".into()));
        }
        ordered("throttle_range", self.throttle_range)?;
        ordered("initial_altitude_range", self.initial_altitude_range)?;
        ordered("target_altitude_range", self.target_altitude_range)?;
        ordered("eas_range", self.eas_range)?;
        ordered("bank_range", self.bank_range)?;
        if self.initial_altitude_range[1] >= self.target_altitude_range[0] {
            return Err(Error::Config("initial altitudes must lie below target altitudes".into()));
        }
        if !(0.0..=1.0).contains(&self.turn_probability) {
            return Err(Error::Config("turn_probability must lie in [0, 1]".into()));
        }
        if !(0.0..0.5).contains(&self.coefficient_spread) {
            return Err(Error::Config("coefficient_spread must lie in [0, 0.5)".into()));
        }
        self.base_model.validate()?;
        self.noise.validate()
    }
}

pub fn registration(index: usize) -> String {
    format!("B-77{:02}", index + 1)
}

pub fn flight_id(reg: &str, index: usize) -> String {
    format!("{reg}-F{:03}", index + 1)
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..range[1])
    }
}

fn perturbed_model(base: &AircraftModel, spread: f64, rng: &mut ChaCha8Rng) -> AircraftModel {
    let mut jitter = |v: f64| v * (1.0 + spread * rng.random_range(-1.0..=1.0));
    let mut m = *base;
    m.cl0 = jitter(m.cl0);
    m.cl_alpha = jitter(m.cl_alpha);
    m.cd0 = jitter(m.cd0);
    m.k = jitter(m.k);
    m.thrust.sea_level_thrust = jitter(m.thrust.sea_level_thrust);
    m.fuel_flow.tsfc = jitter(m.fuel_flow.tsfc);
    m.fuel_flow.right_engine_factor = jitter(1.0).clamp(0.9, 1.1);
    m
}

/// Bell-shaped mass draw truncated to `range` (rejection sampling).
fn draw_mass(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    let mid = 0.5 * (range[0] + range[1]);
    let bell = Normal::new(mid, (range[1] - range[0]) / 5.0).expect("finite spread");
    loop {
        let m = bell.sample(rng);
        if m >= range[0] && m <= range[1] {
            return m;
        }
    }
}

/// Per-flight draws, made sequentially from the fleet seed before any
/// integration so the result does not depend on evaluation order.
#[derive(Debug, Clone)]
pub struct PlannedFlight {
    pub flight_id: String,
    pub reg: String,
    pub model: AircraftModel,
    pub profile: ClimbProfileSpec,
    pub noise: NoiseSpec,
}

pub fn plan_fleet(spec: &FleetSpec) -> Result<Vec<PlannedFlight>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let models: Vec<AircraftModel> = (0..spec.n_aircraft)
        .map(|_| perturbed_model(&spec.base_model, spec.coefficient_spread, &mut rng))
        .collect();

    let mut plans = Vec::with_capacity(spec.n_aircraft * spec.flights_per_aircraft);
    for (a, model) in models.iter().enumerate() {
        let reg = registration(a);
        for f in 0..spec.flights_per_aircraft {
            let mass = draw_mass(&mut rng, spec.mass_range);
            let throttle = uniform(&mut rng, spec.throttle_range);
            let h0 = uniform(&mut rng, spec.initial_altitude_range);
            let h1 = uniform(&mut rng, spec.target_altitude_range);
            let eas = uniform(&mut rng, spec.eas_range);
            let noise_seed: u64 = rng.random();
            let turn = rng.random_bool(spec.turn_probability);
            let bank = uniform(&mut rng, spec.bank_range) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let turn_start = uniform(&mut rng, [60.0, 240.0]);

            let (rho0, _) = isa_state(h0)?;
            let va0 = eas * (SEA_LEVEL_DENSITY / rho0).sqrt();
            let mut profile = ClimbProfileSpec::new(
                mass,
                h0,
                h1,
                va0,
                Guidance::SpeedSchedule {
                    throttle,
                    eas,
                    mach_cap: spec.mach_cap,
                },
            );
            if turn {
                profile.roll.push(RollManeuver {
                    start: turn_start,
                    ramp: 8.0,
                    hold: 40.0,
                    bank,
                });
            }
            plans.push(PlannedFlight {
                flight_id: flight_id(&reg, f),
                reg: reg.clone(),
                model: *model,
                profile,
                noise: spec.noise.clone().with_seed(noise_seed),
            });
        }
    }
    Ok(plans)
}

pub fn simulate_planned(plan: &PlannedFlight) -> Result<SimulatedFlight> {
    simulate_climb(&plan.model, &plan.profile, &plan.noise, &plan.reg, &plan.flight_id)
}

/// Generates `n_aircraft × flights_per_aircraft` simulated climbs.
pub fn generate_fleet(spec: &FleetSpec) -> Result<Vec<SimulatedFlight>> {
    plan_fleet(spec)?.iter().map(simulate_planned).collect()
}
