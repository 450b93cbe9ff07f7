use std::collections::BTreeMap;

use qar_mass::evaluate::{split_flights, SplitSpec};
use qar_mass::preprocess::FeatureRow;
use qar_mass::regress::{mlp_train_encoded, FeatureEncoder, ModelBundle, Regressor, RegressorKind, RidgeRegressor, TreeRegressor};
use serde::{Deserialize, Serialize};

use super::load_processed;
use crate::config::PipelineConfig;
use crate::error::{CliResult, Context};
use crate::records::{write_table, FeatureTable};
use crate::{write_json, Layout};

/// Flight-level partition written by `train` and reused by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub spec: SplitSpec,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitFile {
    pub fn partitions(&self) -> [(&'static str, &[String]); 3] {
        [("train", &self.train), ("val", &self.val), ("test", &self.test)]
    }
}

fn rows_of(tables: &BTreeMap<&str, &FeatureTable>, ids: &[String]) -> Vec<FeatureRow> {
    ids.iter().flat_map(|id| tables[id.as_str()].rows.iter().cloned()).collect()
}

/// Per-sample MSE in units of the training target's standard deviation.
fn standardized_mse(model: &Regressor, rows: &[FeatureRow], y_std: f64) -> CliResult<f64> {
    let pred = model.predict(rows).context(|| "prediction".into())?;
    let sse: f64 = pred.iter().zip(rows).map(|(p, r)| ((p - r.target_m) / y_std).powi(2)).sum();
    Ok(sse / rows.len().max(1) as f64)
}

fn fit(config: &PipelineConfig, kind: RegressorKind, train: &[FeatureRow], val: &[FeatureRow]) -> CliResult<(Regressor, Vec<Vec<String>>)> {
    let what = || format!("training {kind}");
    let encoder = FeatureEncoder::fit(train, config.train.unknown_registration).context(what)?;
    let one_row = |model: &Regressor, y_std: f64| -> CliResult<Vec<Vec<String>>> {
        let t = standardized_mse(model, train, y_std)?;
        let v = standardized_mse(model, val, y_std)?;
        Ok(vec![vec!["1".into(), t.to_string(), v.to_string()]])
    };
    match kind {
        RegressorKind::Mlp => {
            let (model, history) = mlp_train_encoded(&config.train.mlp, encoder, train, val).context(what)?;
            log::info!(
                "mlp: {} epochs, best {} (val {:.6})",
                history.epochs.len(),
                history.best_epoch,
                history.epochs.get(history.best_epoch.saturating_sub(1)).map_or(f64::NAN, |e| e.val_loss)
            );
            let rows = history
                .epochs
                .iter()
                .map(|e| vec![e.epoch.to_string(), e.train_loss.to_string(), e.val_loss.to_string()])
                .collect();
            Ok((Regressor::Mlp(model), rows))
        }
        RegressorKind::Ridge => {
            let r = RidgeRegressor::fit_encoded(encoder, train, config.train.ridge_lambda).context(what)?;
            let y_std = r.encoder.standardizer.y_std;
            let model = Regressor::Ridge(r);
            let rows = one_row(&model, y_std)?;
            Ok((model, rows))
        }
        RegressorKind::Tree => {
            let t = TreeRegressor::fit_encoded(encoder, train, &config.train.tree).context(what)?;
            log::info!("tree: depth {}, {} leaves", t.model.depth(), t.model.leaves().count());
            let y_std = t.encoder.standardizer.y_std;
            let model = Regressor::Tree(t);
            let rows = one_row(&model, y_std)?;
            Ok((model, rows))
        }
    }
}

/// Splits flights, fits every configured regressor and writes bundles and
/// per-epoch histories. Baselines get a single history row.
pub fn train(config: &PipelineConfig, layout: &Layout) -> CliResult<()> {
    let (_, tables) = load_processed(layout)?;
    let ids: Vec<String> = tables.iter().map(|t| t.flight_id.clone()).collect();
    let (train_ids, val_ids, test_ids) = split_flights(&ids, &config.split).context(|| "split".into())?;
    let split = SplitFile {
        spec: config.split,
        train: train_ids,
        val: val_ids,
        test: test_ids,
    };
    write_json(&layout.split(), &split)?;
    let by_id: BTreeMap<&str, &FeatureTable> = tables.iter().map(|t| (t.flight_id.as_str(), t)).collect();
    let train_rows = rows_of(&by_id, &split.train);
    let val_rows = rows_of(&by_id, &split.val);
    log::info!(
        "split {}/{}/{} flights, {} training rows",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        train_rows.len()
    );

    for &kind in &config.train.regressors {
        let (model, history) = fit(config, kind, &train_rows, &val_rows)?;
        let path = layout.model(kind);
        let json = ModelBundle::new(model).to_json().context(|| format!("serializing {kind}"))?;
        std::fs::create_dir_all(path.parent().expect("models dir")).map_err(|e| crate::CliError::io(&path, e))?;
        std::fs::write(&path, json + "\n").map_err(|e| crate::CliError::io(&path, e))?;
        let header = ["epoch", "train_loss", "val_loss"].map(String::from);
        write_table(&layout.history(kind), None, &header, &history)?;
    }
    Ok(())
}
