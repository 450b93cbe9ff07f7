mod evaluate;
mod predict;
mod preprocess;
mod report;
mod simulate;
mod train;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use evaluate::{evaluate, EvalFile, PartitionMetrics};
pub use predict::{predict, PredictionRow};
pub use preprocess::{preprocess, FlightSummary, PreprocessSummary, Rejection};
pub use report::report;
pub use simulate::simulate;
pub use train::{train, SplitFile};

use crate::error::{CliError, CliResult};
use crate::records::{read_features, FeatureTable};

/// `*.csv` files directly inside `dir`, sorted by name.
pub(crate) fn csv_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Feature tables of every processed flight, in summary order.
pub(crate) fn load_processed(layout: &crate::Layout) -> CliResult<(PreprocessSummary, Vec<FeatureTable>)> {
    let summary: PreprocessSummary = crate::read_json(&layout.preprocess_summary())?;
    let tables = summary
        .flights
        .par_iter()
        .map(|f| {
            let path = layout.out.join(&f.features);
            let table = read_features(&path)?;
            if table.flight_id != f.flight_id {
                return Err(CliError::malformed(&path, format!("expected flight {}, found {}", f.flight_id, table.flight_id)));
            }
            if table.rows.is_empty() {
                return Err(CliError::malformed(&path, "feature table has no rows"));
            }
            Ok(table)
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((summary, tables))
}
