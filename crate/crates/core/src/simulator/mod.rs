//! Synthetic QAR-like flight records with known ground-truth mass.

pub mod aircraft;
pub mod atmosphere;
pub mod fleet;
pub mod flight;

pub use aircraft::{AircraftModel, FuelFlowProfile, ThrustProfile, N_ENGINES};
pub use atmosphere::isa_state;
pub use fleet::{generate_fleet, plan_fleet, simulate_planned, FleetSpec, PlannedFlight};
pub use flight::{
    integrate, longitudinal_residual, simulate_climb, ClimbProfileSpec, Guidance, NoiseSpec,
    RollManeuver, SimulatedFlight, StopRule, ROLL_THRESHOLD,
};
