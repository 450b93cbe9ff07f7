//! Aircraft initial-climb mass estimation from QAR-style multichannel
//! flight records.
//!
//! The pipeline is: resample and extract the longest climb
//! ([`preprocess`]), clean the mass channels, smooth the instantaneous
//! parameters with dynamic-inner CCA ([`denoise`]), assemble instantaneous
//! plus cumulative features, and regress the gross mass ([`regress`]).
//! Adding the integrated fuel burn back yields the initial climb mass.
//! [`simulator`] provides synthetic flights with known truth.

pub mod denoise;
pub mod error;
pub mod evaluate;
pub mod model_core;
pub mod preprocess;
pub mod regress;
pub mod simulator;

pub use error::{Error, ErrorCategory, RejectReason, Result};
