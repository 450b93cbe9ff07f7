use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qar_mass::preprocess::process_record;
use qar_mass::regress::{predict_initial_mass, ModelBundle};
use rayon::prelude::*;

use super::csv_files;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, Context};
use crate::records::{read_manifest, read_record, write_table};
use crate::Layout;

/// One line of `predictions.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub record: String,
    pub flight_id: Option<String>,
    pub reg: Option<String>,
    /// `ok`, or the reason the flight could not be estimated.
    pub status: String,
    pub predicted_mass: Option<f64>,
    pub n_samples: Option<usize>,
    /// Manifest mass, when the run directory has a manifest entry.
    pub true_mass: Option<f64>,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// Estimates the initial mass of every record; unusable records are listed
/// with their reason instead of an estimate.
pub fn predict(config: &PipelineConfig, layout: &Layout, records: &[PathBuf], model: Option<&Path>) -> CliResult<Vec<PredictionRow>> {
    let bundle_path = model
        .map(Path::to_path_buf)
        .or_else(|| config.paths.model.clone())
        .unwrap_or_else(|| layout.model(config.train.predict_with));
    let text = std::fs::read_to_string(&bundle_path).map_err(|e| CliError::io(&bundle_path, e))?;
    let bundle = ModelBundle::from_json(&text).context(|| bundle_path.display().to_string())?;
    let files = if records.is_empty() { csv_files(&layout.records)? } else { records.to_vec() };
    if files.is_empty() {
        return Err(CliError::Config("no record files to predict".into()));
    }

    let manifest: BTreeMap<String, f64> = if layout.manifest().is_file() {
        read_manifest(&layout.manifest())?
            .into_iter()
            .map(|e| (e.flight_id, e.initial_mass_kg))
            .collect()
    } else {
        BTreeMap::new()
    };

    let rows: Vec<PredictionRow> = files
        .par_iter()
        .map(|path| {
            let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let mut row = PredictionRow {
                record: name,
                flight_id: None,
                reg: None,
                status: "ok".into(),
                predicted_mass: None,
                n_samples: None,
                true_mass: None,
            };
            let record = match read_record(path) {
                Ok(r) => r,
                Err(e) => {
                    row.status = e.detail();
                    return row;
                }
            };
            row.true_mass = manifest.get(&record.flight_id).copied();
            row.flight_id = Some(record.flight_id.clone());
            row.reg = Some(record.reg.clone());
            let estimate = process_record(&record, &config.preprocess)
                .and_then(|p| predict_initial_mass(&bundle.model, &p.rows).map(|(m, per)| (m, per.len())));
            match estimate {
                Ok((m, n)) => {
                    row.predicted_mass = Some(m);
                    row.n_samples = Some(n);
                }
                Err(qar_mass::Error::FlightRejected(r)) => row.status = r.to_string(),
                Err(e) => row.status = e.to_string(),
            }
            row
        })
        .collect();

    let header = [
        "record",
        "flight_id",
        "reg",
        "status",
        "predicted_initial_mass_kg",
        "n_samples",
        "true_initial_mass_kg",
        "relative_error_pct",
    ]
    .map(String::from);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let rel = match (r.predicted_mass, r.true_mass) {
                (Some(p), Some(t)) => Some(100.0 * (p - t) / t),
                _ => None,
            };
            vec![
                r.record.clone(),
                opt(&r.flight_id),
                opt(&r.reg),
                r.status.clone(),
                opt(&r.predicted_mass),
                opt(&r.n_samples),
                opt(&r.true_mass),
                opt(&rel),
            ]
        })
        .collect();
    write_table(&layout.predictions(), None, &header, &table)?;
    let ok = rows.iter().filter(|r| r.status == "ok").count();
    log::info!("{ok} of {} records estimated", rows.len());
    Ok(rows)
}
