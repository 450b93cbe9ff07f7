//! International Standard Atmosphere, troposphere and lower stratosphere.

use crate::error::{Error, Result};
use crate::model_core::G0;

pub const SEA_LEVEL_TEMPERATURE: f64 = 288.15;
pub const SEA_LEVEL_PRESSURE: f64 = 101_325.0;
pub const SEA_LEVEL_DENSITY: f64 = 1.225;
pub const LAPSE_RATE: f64 = 0.0065;
pub const TROPOPAUSE: f64 = 11_000.0;
/// Specific gas constant of dry air (J/(kg·K)).
pub const GAS_CONSTANT: f64 = 287.052_87;
pub const HEAT_CAPACITY_RATIO: f64 = 1.4;

pub const MAX_ALTITUDE: f64 = 20_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphereState {
    pub temperature: f64,
    pub pressure: f64,
    pub density: f64,
    pub speed_of_sound: f64,
}

pub fn atmosphere(h: f64) -> Result<AtmosphereState> {
    if !(0.0..=MAX_ALTITUDE).contains(&h) {
        return Err(Error::Domain {
            what: "altitude",
            value: h,
            bound: "0 <= h <= 20000 m",
        });
    }
    let exponent = G0 / (LAPSE_RATE * GAS_CONSTANT);
    let (temperature, pressure) = if h <= TROPOPAUSE {
        let t = SEA_LEVEL_TEMPERATURE - LAPSE_RATE * h;
        (t, SEA_LEVEL_PRESSURE * (t / SEA_LEVEL_TEMPERATURE).powf(exponent))
    } else {
        let t11 = SEA_LEVEL_TEMPERATURE - LAPSE_RATE * TROPOPAUSE;
        let p11 = SEA_LEVEL_PRESSURE * (t11 / SEA_LEVEL_TEMPERATURE).powf(exponent);
        (
            t11,
            p11 * (-G0 * (h - TROPOPAUSE) / (GAS_CONSTANT * t11)).exp(),
        )
    };
    Ok(AtmosphereState {
        temperature,
        pressure,
        density: pressure / (GAS_CONSTANT * temperature),
        speed_of_sound: (HEAT_CAPACITY_RATIO * GAS_CONSTANT * temperature).sqrt(),
    })
}

/// Air density (kg/m³) and speed of sound (m/s) at geopotential altitude `h`.
pub fn isa_state(h: f64) -> Result<(f64, f64)> {
    let s = atmosphere(h)?;
    Ok((s.density, s.speed_of_sound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sea_level() {
        let (rho, a) = isa_state(0.0).unwrap();
        assert_abs_diff_eq!(rho, 1.2250, epsilon = 1e-4);
        assert_abs_diff_eq!(a, 340.294, epsilon = 1e-3);
    }

    #[test]
    fn tropopause() {
        let (rho, a) = isa_state(11_000.0).unwrap();
        assert_abs_diff_eq!(rho, 0.36392, epsilon = 1e-4);
        assert_abs_diff_eq!(a, 295.07, epsilon = 1e-2);
        // continuous across the layer boundary
        let (below, _) = isa_state(TROPOPAUSE - 1e-6).unwrap();
        let (above, _) = isa_state(TROPOPAUSE + 1e-6).unwrap();
        assert_abs_diff_eq!(below, above, epsilon = 1e-9);
    }

    #[test]
    fn density_decreases() {
        assert!(isa_state(5_000.0).unwrap().0 > isa_state(10_000.0).unwrap().0);
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let rho = isa_state(i as f64 * 100.0).unwrap().0;
            assert!(rho < prev);
            prev = rho;
        }
    }

    #[test]
    fn out_of_range() {
        assert!(isa_state(-1.0).is_err());
        assert!(isa_state(20_000.1).is_err());
    }
}
