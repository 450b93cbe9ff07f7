use qar_mass::simulator::{plan_fleet, simulate_planned};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{CliResult, Context};
use crate::records::{file_stem, write_manifest, write_record, ManifestEntry};
use crate::Layout;

/// Writes one record per simulated flight and the ground-truth manifest.
pub fn simulate(config: &PipelineConfig, layout: &Layout) -> CliResult<Vec<ManifestEntry>> {
    let plans = plan_fleet(&config.simulate).context(|| "simulate".into())?;
    log::info!("simulating {} flights into {}", plans.len(), layout.records.display());
    let entries = plans
        .par_iter()
        .map(|plan| {
            let flight = simulate_planned(plan).context(|| format!("flight {}", plan.flight_id))?;
            let name = format!("{}.csv", file_stem(&plan.flight_id));
            write_record(&layout.records.join(&name), &flight.record)?;
            Ok(ManifestEntry {
                flight_id: plan.flight_id.clone(),
                reg: plan.reg.clone(),
                initial_mass_kg: flight.initial_mass,
                n_samples: flight.record.len(),
                record: name,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_manifest(&layout.manifest(), &entries)?;
    Ok(entries)
}
