use std::fmt::Write as _;

use qar_mass::evaluate::Metrics;

use super::{EvalFile, PreprocessSummary, SplitFile};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::{read_json, Layout};

fn r2(m: &Metrics) -> String {
    m.r2.map_or("n/a".into(), |r| format!("{r:.4}"))
}

/// Writes `report.md` from the preprocessing summary and every available
/// evaluation file.
pub fn report(config: &PipelineConfig, layout: &Layout) -> CliResult<()> {
    let summary: PreprocessSummary = read_json(&layout.preprocess_summary())?;
    let split: Option<SplitFile> = layout.split().is_file().then(|| read_json(&layout.split())).transpose()?;
    let mut evals = Vec::new();
    for &kind in &config.train.regressors {
        let path = layout.eval_report(kind);
        if path.is_file() {
            evals.push(read_json::<EvalFile>(&path)?);
        } else {
            log::warn!("{} not found; {kind} left out of the report", path.display());
        }
    }

    let mut md = String::new();
    let w = &mut md;
    let _ = writeln!(w, "# Initial-climb mass estimation\n");
    let _ = writeln!(w, "## Data\n");
    let _ = writeln!(w, "| records | processed | rejected | climb samples |");
    let _ = writeln!(w, "|---|---|---|---|");
    let _ = writeln!(
        w,
        "| {} | {} | {} | {} |\n",
        summary.n_records, summary.n_processed, summary.n_rejected, summary.total_rows
    );
    let c = &summary.cleaning;
    let _ = writeln!(
        w,
        "Mass-channel cleaning replaced {} samples and eliminated {}; rule violations R1 {}, R2 {}, R3 {}.\n",
        c.replaced, c.eliminated, c.r1_violations, c.r2_violations, c.r3_violations
    );
    if !summary.rejected.is_empty() {
        let _ = writeln!(w, "| rejected record | flight | reason |");
        let _ = writeln!(w, "|---|---|---|");
        for r in &summary.rejected {
            let _ = writeln!(w, "| {} | {} | {} |", r.record, r.flight_id.as_deref().unwrap_or("-"), r.reason);
        }
        let _ = writeln!(w);
    }
    if let Some(s) = &split {
        let _ = writeln!(
            w,
            "Flights split {}/{}/{} (train/validation/test), seed {}.\n",
            s.train.len(),
            s.val.len(),
            s.test.len(),
            s.spec.seed
        );
    }

    if evals.is_empty() {
        let _ = writeln!(w, "No evaluation results yet; run `train` and `evaluate`.");
    } else {
        let _ = writeln!(w, "## Comparison\n");
        let _ = writeln!(w, "| method | train & val MAPE (%) | NRMSD | R² | test MAPE (%) | NRMSD | R² |");
        let _ = writeln!(w, "|---|---|---|---|---|---|---|");
        for e in &evals {
            let (a, b) = (&e.metrics.train_val, &e.metrics.test);
            let _ = writeln!(
                w,
                "| {} | {:.3} | {:.4} | {} | {:.3} | {:.4} | {} |",
                e.label,
                a.mape,
                a.nrmsd,
                r2(a),
                b.mape,
                b.nrmsd,
                r2(b)
            );
        }
        let _ = writeln!(w);
        for e in &evals {
            let t = &e.test;
            let within = t.flights.iter().filter(|f| f.relative_error.abs() <= 0.02).count();
            let _ = writeln!(w, "## {} on the test flights\n", e.label);
            let _ = writeln!(
                w,
                "{} of {} test flights within ±2.0% (NRMSD range {:.0}–{:.0} kg).\n",
                within, t.n_star, t.m_min, t.m_max
            );
            if t.flagged.is_empty() {
                let _ = writeln!(w, "No flight exceeds ±{}%.\n", config.report.flag_threshold_pct);
            } else {
                let _ = writeln!(w, "Flights beyond ±{}%:\n", config.report.flag_threshold_pct);
                for id in &t.flagged {
                    let f = t.flights.iter().find(|f| &f.flight_id == id).expect("flagged flights are in the report");
                    let _ = writeln!(w, "- {id}: {:+.2}%", 100.0 * f.relative_error);
                }
                let _ = writeln!(w);
            }
            let kind = e.regressor;
            let _ = writeln!(
                w,
                "Plots: [scatter](eval/scatter_{kind}.svg) ([data](eval/scatter_{kind}.csv)), \
                 [error histogram](eval/histogram_{kind}.svg) ([data](eval/histogram_{kind}.csv)), \
                 [per-flight errors](eval/flights_{kind}.csv).\n"
            );
        }
    }
    let path = layout.report();
    std::fs::write(&path, md).map_err(|e| CliError::io(&path, e))
}
