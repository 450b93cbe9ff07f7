//! Climb extraction, mass-channel cleaning, fuel integration and feature
//! assembly.

pub mod cleaning;
pub mod features;
pub mod pipeline;
pub mod segment;

pub use cleaning::{clean_mass_channels, CleaningConfig, CleaningReport};
pub use features::{assemble_features, fuel_burned, fuel_burned_series, FeatureRow};
pub use pipeline::{process_record, PreprocessConfig, ProcessedFlight};
pub use segment::{climb_runs, longest_climb_segment, ClimbSegment, SegmentConfig};
