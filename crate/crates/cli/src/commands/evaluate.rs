use std::collections::BTreeMap;

use qar_mass::evaluate::{error_report, metrics, EvalReport, FlightPrediction, Metrics};
use qar_mass::regress::{predict_initial_mass, ModelBundle, RegressorKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_processed, SplitFile};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, Context};
use crate::plots::{write_histogram, write_scatter, ScatterPoint};
use crate::records::{write_table, FeatureTable};
use crate::{read_json, write_json, Layout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionMetrics {
    pub train: Metrics,
    pub val: Metrics,
    /// Training and validation flights together.
    pub train_val: Metrics,
    pub test: Metrics,
}

/// Contents of `eval/eval_<kind>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFile {
    pub regressor: RegressorKind,
    pub label: String,
    pub metrics: PartitionMetrics,
    /// Per-flight report on the test partition.
    pub test: EvalReport,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flight-level truth: recorded mass at the start of the climb segment.
pub(crate) fn segment_initial_mass(table: &FeatureTable) -> f64 {
    table.rows[0].initial_mass()
}

pub fn evaluate(config: &PipelineConfig, layout: &Layout) -> CliResult<()> {
    let (_, tables) = load_processed(layout)?;
    let split: SplitFile = read_json(&layout.split())?;
    let by_id: BTreeMap<&str, &FeatureTable> = tables.iter().map(|t| (t.flight_id.as_str(), t)).collect();
    for (name, ids) in split.partitions() {
        if let Some(id) = ids.iter().find(|id| !by_id.contains_key(id.as_str())) {
            return Err(CliError::malformed(&layout.split(), format!("{name} flight {id} has no feature table")));
        }
    }
    let truths: Vec<f64> = tables.iter().map(segment_initial_mass).collect();
    let m_max = truths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m_min = truths.iter().copied().fold(f64::INFINITY, f64::min);

    let mut comparison = Vec::new();
    for &kind in &config.train.regressors {
        let bundle_path = layout.model(kind);
        let text = std::fs::read_to_string(&bundle_path).map_err(|e| CliError::io(&bundle_path, e))?;
        let bundle = ModelBundle::from_json(&text).context(|| bundle_path.display().to_string())?;
        if bundle.model.kind() != kind {
            return Err(CliError::malformed(&bundle_path, format!("bundle holds a {} model", bundle.model.kind())));
        }
        let model = &bundle.model;

        let mut predictions: BTreeMap<&str, Vec<FlightPrediction>> = BTreeMap::new();
        for (name, ids) in split.partitions() {
            let preds = ids
                .par_iter()
                .map(|id| {
                    let t = by_id[id.as_str()];
                    let (estimate, _) = predict_initial_mass(model, &t.rows).context(|| format!("{kind} on {id}"))?;
                    Ok(FlightPrediction::new(&t.flight_id, &t.reg, segment_initial_mass(t), estimate))
                })
                .collect::<CliResult<Vec<_>>>()?;
            predictions.insert(name, preds);
        }
        let score = |flights: &[FlightPrediction]| metrics(flights, m_max, m_min).context(|| format!("{kind} metrics"));
        let train_val: Vec<FlightPrediction> = predictions["train"].iter().chain(&predictions["val"]).cloned().collect();
        let partition_metrics = PartitionMetrics {
            train: score(&predictions["train"])?,
            val: score(&predictions["val"])?,
            train_val: score(&train_val)?,
            test: score(&predictions["test"])?,
        };
        let test = error_report(&predictions["test"], m_max, m_min, &config.report).context(|| format!("{kind} report"))?;
        log::info!(
            "{kind}: test MAPE {:.3}%, NRMSD {:.4}, R2 {}",
            test.mape,
            test.nrmsd,
            test.r2.map_or("n/a".into(), |r| format!("{r:.4}"))
        );

        let dir = layout.eval_dir();
        let flagged: std::collections::BTreeSet<&str> = test.flagged.iter().map(String::as_str).collect();
        let header = ["partition", "flight_id", "reg", "true_mass_kg", "predicted_mass_kg", "relative_error_pct", "flagged"].map(String::from);
        let mut rows = Vec::new();
        let mut points = Vec::new();
        for (name, preds) in &predictions {
            for p in preds {
                rows.push(vec![
                    name.to_string(),
                    p.flight_id.clone(),
                    p.reg.clone(),
                    p.true_mass.to_string(),
                    p.predicted_mass.to_string(),
                    (100.0 * p.relative_error).to_string(),
                    (*name == "test" && flagged.contains(p.flight_id.as_str())).to_string(),
                ]);
                points.push(ScatterPoint {
                    partition: name,
                    flight_id: p.flight_id.clone(),
                    true_mass: p.true_mass,
                    predicted_mass: p.predicted_mass,
                });
            }
        }
        write_table(&dir.join(format!("flights_{kind}.csv")), None, &header, &rows)?;
        write_scatter(
            &dir.join(format!("scatter_{kind}.csv")),
            &dir.join(format!("scatter_{kind}.svg")),
            &format!("{}: predicted vs. true initial mass", kind.label()),
            &points,
        )?;
        write_histogram(
            &dir.join(format!("histogram_{kind}.csv")),
            &dir.join(format!("histogram_{kind}.svg")),
            &format!("{}: test relative error", kind.label()),
            &test.histogram,
        )?;

        for (name, m) in [
            ("train", &partition_metrics.train),
            ("val", &partition_metrics.val),
            ("train_val", &partition_metrics.train_val),
            ("test", &partition_metrics.test),
        ] {
            comparison.push(vec![
                kind.label().to_string(),
                name.to_string(),
                m.n_flights.to_string(),
                m.mape.to_string(),
                m.nrmsd.to_string(),
                fmt_opt(m.r2),
            ]);
        }
        write_json(
            &layout.eval_report(kind),
            &EvalFile {
                regressor: kind,
                label: kind.label().into(),
                metrics: partition_metrics,
                test,
            },
        )?;
    }
    let header = ["method", "partition", "n_flights", "mape_pct", "nrmsd", "r2"].map(String::from);
    write_table(&layout.eval_dir().join("comparison.csv"), None, &header, &comparison)
}
