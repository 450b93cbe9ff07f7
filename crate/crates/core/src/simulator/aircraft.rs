use serde::{Deserialize, Serialize};

use super::atmosphere::SEA_LEVEL_DENSITY;
use crate::error::{Error, Result};

pub const N_ENGINES: usize = 2;

/// Maximum climb thrust, affine in the density ratio σ = ρ/ρ0:
/// `T = throttle · scale · sea_level_thrust · (lapse_offset + lapse_slope · σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThrustProfile {
    /// Total sea-level maximum climb thrust of all engines (N).
    pub sea_level_thrust: f64,
    pub lapse_offset: f64,
    pub lapse_slope: f64,
}

impl Default for ThrustProfile {
    fn default() -> Self {
        Self {
            sea_level_thrust: 600_000.0,
            lapse_offset: 0.3,
            lapse_slope: 0.7,
        }
    }
}

impl ThrustProfile {
    /// Total thrust (N). Mach dependence is folded into the density lapse.
    pub fn thrust(&self, density: f64, _mach: f64, throttle: f64) -> f64 {
        let sigma = density / SEA_LEVEL_DENSITY;
        throttle * self.sea_level_thrust * (self.lapse_offset + self.lapse_slope * sigma)
    }
}

/// Per-engine fuel flow, affine in that engine's thrust.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuelFlowProfile {
    /// Flow at zero thrust (kg/s).
    pub base_flow: f64,
    /// Thrust-specific fuel consumption (kg/(N·s)).
    pub tsfc: f64,
    /// Right-engine flow relative to the left one.
    pub right_engine_factor: f64,
}

impl Default for FuelFlowProfile {
    fn default() -> Self {
        Self {
            base_flow: 0.3,
            tsfc: 1.6e-5,
            right_engine_factor: 1.0,
        }
    }
}

impl FuelFlowProfile {
    /// `(left, right)` flows (kg/s) for a total thrust split evenly over the engines.
    pub fn flows(&self, total_thrust: f64) -> (f64, f64) {
        let left = self.base_flow + self.tsfc * total_thrust / N_ENGINES as f64;
        (left, left * self.right_engine_factor)
    }
}

/// Aerodynamic, thrust and fuel coefficients of one airframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AircraftModel {
    /// Wing reference area (m²).
    pub wing_area: f64,
    pub cl0: f64,
    /// Lift slope (1/rad).
    pub cl_alpha: f64,
    pub cd0: f64,
    /// Drag polar constant.
    pub k: f64,
    /// Stall limit on the lift coefficient.
    pub cl_max: f64,
    pub thrust: ThrustProfile,
    pub fuel_flow: FuelFlowProfile,
}

impl Default for AircraftModel {
    /// A large twin-engine long-haul airliner in clean climb configuration.
    fn default() -> Self {
        Self {
            wing_area: 436.8,
            cl0: 0.25,
            cl_alpha: 5.5,
            cd0: 0.020,
            k: 0.045,
            cl_max: 1.3,
            thrust: ThrustProfile::default(),
            fuel_flow: FuelFlowProfile::default(),
        }
    }
}

impl AircraftModel {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("wing_area", self.wing_area),
            ("cl_alpha", self.cl_alpha),
            ("cd0", self.cd0),
            ("k", self.k),
            ("cl_max", self.cl_max),
            ("sea_level_thrust", self.thrust.sea_level_thrust),
        ];
        for (name, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("aircraft {name} must be > 0, got {v}")));
            }
        }
        if self.fuel_flow.base_flow < 0.0
            || self.fuel_flow.tsfc < 0.0
            || self.fuel_flow.right_engine_factor <= 0.0
        {
            return Err(Error::Config("fuel-flow coefficients must be non-negative".into()));
        }
        Ok(())
    }

    pub fn lift_coefficient(&self, alpha: f64) -> f64 {
        self.cl0 + self.cl_alpha * alpha
    }

    pub fn drag_coefficient(&self, cl: f64) -> f64 {
        self.cd0 + self.k * cl * cl
    }

    /// `(lift, drag)` in newtons.
    pub fn aero_forces(&self, q: f64, alpha: f64) -> (f64, f64) {
        let cl = self.lift_coefficient(alpha);
        let qs = q * self.wing_area;
        (qs * cl, qs * self.drag_coefficient(cl))
    }
}
