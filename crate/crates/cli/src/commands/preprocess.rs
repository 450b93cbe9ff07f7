use std::collections::BTreeSet;
use std::path::Path;

use qar_mass::preprocess::{process_record, CleaningReport, PreprocessConfig, ProcessedFlight};
use qar_mass::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::csv_files;
use crate::config::PipelineConfig;
use crate::error::CliResult;
use crate::records::{file_stem, read_record, write_features};
use crate::{write_json, Layout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightSummary {
    pub flight_id: String,
    pub reg: String,
    pub record: String,
    /// Feature table path relative to the run directory.
    pub features: String,
    pub segment_start: usize,
    pub segment_end: usize,
    pub rows: usize,
    pub cleaning: CleaningReport,
    pub dicca_n_dlv: usize,
    pub dicca_constant_channels: Vec<String>,
    pub dicca_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub record: String,
    pub flight_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub n_records: usize,
    pub n_processed: usize,
    pub n_rejected: usize,
    pub total_rows: usize,
    pub cleaning: CleaningReport,
    pub config: PreprocessConfig,
    pub flights: Vec<FlightSummary>,
    pub rejected: Vec<Rejection>,
}

fn display_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Cleaning rejections report the rule; everything else reports the error.
fn reason(e: &Error) -> String {
    match e {
        Error::FlightRejected(r) => r.to_string(),
        other => other.to_string(),
    }
}

/// Processes every record; failures are listed, never dropped.
pub fn preprocess(config: &PipelineConfig, layout: &Layout) -> CliResult<PreprocessSummary> {
    let files = csv_files(&layout.records)?;
    log::info!("preprocessing {} records from {}", files.len(), layout.records.display());
    let outcomes: Vec<(String, Result<ProcessedFlight, (Option<String>, String)>)> = files
        .par_iter()
        .map(|path| {
            let outcome = read_record(path).map_err(|e| (None, e.detail())).and_then(|record| {
                process_record(&record, &config.preprocess)
                    .map_err(|e| (Some(record.flight_id.clone()), reason(&e)))
            });
            (display_name(path), outcome)
        })
        .collect();

    let mut seen = BTreeSet::new();
    let mut flights = Vec::new();
    let mut rejected = Vec::new();
    let mut kept = Vec::new();
    for (record, outcome) in outcomes {
        match outcome {
            Ok(p) if !seen.insert(p.flight_id.clone()) => rejected.push(Rejection {
                record,
                flight_id: Some(p.flight_id),
                reason: "duplicate flight id".into(),
            }),
            Ok(p) => kept.push((record, p)),
            Err((flight_id, reason)) => {
                log::warn!("{record}: rejected: {reason}");
                rejected.push(Rejection { record, flight_id, reason });
            }
        }
    }

    let features_dir = layout.features_dir();
    kept.par_iter()
        .map(|(_, p)| {
            let path = features_dir.join(format!("{}.csv", file_stem(&p.flight_id)));
            write_features(&path, &p.flight_id, &p.reg, &p.rows)
        })
        .collect::<CliResult<()>>()?;

    let mut cleaning = CleaningReport::default();
    for (record, p) in &kept {
        cleaning.merge(&p.cleaning);
        flights.push(FlightSummary {
            flight_id: p.flight_id.clone(),
            reg: p.reg.clone(),
            record: record.clone(),
            features: format!("features/{}.csv", file_stem(&p.flight_id)),
            segment_start: p.start,
            segment_end: p.end,
            rows: p.rows.len(),
            cleaning: p.cleaning,
            dicca_n_dlv: p.smoothing.n_dlv,
            dicca_constant_channels: p.smoothing.constant_channels.clone(),
            dicca_converged: p.smoothing.converged,
        });
    }
    cleaning.flights_rejected += rejected
        .iter()
        .filter(|r| r.reason == qar_mass::RejectReason::SumFluctuation.to_string())
        .count();

    let summary = PreprocessSummary {
        n_records: files.len(),
        n_processed: flights.len(),
        n_rejected: rejected.len(),
        total_rows: flights.iter().map(|f| f.rows).sum(),
        cleaning,
        config: config.preprocess,
        flights,
        rejected,
    };
    write_json(&layout.preprocess_summary(), &summary)?;
    log::info!("{} flights processed, {} rejected", summary.n_processed, summary.n_rejected);
    Ok(summary)
}
