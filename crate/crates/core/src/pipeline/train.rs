use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::features::{assemble_features, prediction_block, FeatureGroup, FeatureGroupSpec};
use crate::ingest::{Cohort, Partition};
use crate::learners::{fit_algorithm, Algorithm, Model, Protocol};
use crate::pca::{fit_pca, optimize_pc_count, project, PcSweep, PcaBasis};
use crate::pose_rmsd::{apply_rmsd_cutoff, RmsdFilterMode};
use crate::seed;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const LINEAR_OBJECTIVE: &str =
    "(1/(2n))||y - Zb||^2 + alpha*l1_ratio*||b||_1 + alpha*(1 - l1_ratio)/2*||b||^2 on z-scored features";
const TREE_OBJECTIVE: &str = "squared error; gain in half-squared-error units";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub seed: u64,
    /// Full protocol for the final fit.
    pub protocol: Protocol,
    /// Protocol for the fits inside the PC-count sweep.
    pub sweep_protocol: Protocol,
    pub k_max: usize,
    pub validation_fraction: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            seed: crate::pipeline::DEFAULT_SEED,
            protocol: Protocol::default(),
            sweep_protocol: Protocol::sweep(),
            k_max: 22,
            validation_fraction: 0.2,
        }
    }
}

/// Provenance of one trained cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub master_seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub filter: String,
    pub n_train: usize,
    /// Hash of the training ids and labels.
    pub train_hash: String,
    /// Hash of the final training feature matrix.
    pub feature_hash: String,
    pub objective: String,
    pub protocol: Protocol,
    pub sweep_protocol: Option<Protocol>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedMetaModel {
    pub format_version: u32,
    pub name: String,
    pub spec: FeatureGroupSpec,
    pub algorithm: Algorithm,
    pub feature_names: Vec<String>,
    pub model: Model,
    /// Basis truncated to the chosen component count.
    pub pca: Option<PcaBasis>,
    pub pc_sweep: Option<PcSweep>,
    pub manifest: RunManifest,
}

impl FittedMetaModel {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: FittedMetaModel = serde_json::from_str(text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                model.format_version
            )));
        }
        model.spec.validate()?;
        if model.pca.is_some() != model.spec.group.is_pca() {
            return Err(Error::Schema("PCA basis presence does not match the feature group".into()));
        }
        if model.model.n_features() != model.feature_names.len() {
            return Err(Error::Schema("model width does not match its feature names".into()));
        }
        Ok(model)
    }
}

/// File stem such as `ED2-F_VvS_101.0_LinReg`.
pub fn model_name(group: FeatureGroup, mode: RmsdFilterMode, algorithm: Algorithm) -> String {
    format!("{group}_{mode}_{algorithm}")
}

/// Seeded split of `0..n` into sorted (train, validation) rows.
pub fn split_validation(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("validation fraction must lie in (0, 1), got {fraction}")));
    }
    let n_val = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

fn hash_train(cohort: &Cohort) -> String {
    let mut text = String::new();
    for (id, rec) in cohort.records() {
        text.push_str(id);
        text.push('\t');
        text.push_str(&rec.label.value.to_string());
        text.push('\n');
    }
    seed::content_hash(text.as_bytes())
}

/// Train one meta-model cell: filter TRAIN by the RMSD cutoff, pick the PC
/// count for PCA groups, assemble features and run the algorithm's protocol.
pub fn train_meta_model(
    cohort: &Cohort,
    group: FeatureGroup,
    rmsd_mode: RmsdFilterMode,
    algorithm: Algorithm,
    options: &TrainOptions,
) -> Result<FittedMetaModel> {
    let name = model_name(group, rmsd_mode, algorithm);
    let train = apply_rmsd_cutoff(&cohort.partition(Partition::Train), rmsd_mode)?;
    if train.is_empty() {
        return Err(Error::invalid(format!("{name}: no TRAIN complexes survive the RMSD cutoff")));
    }
    let labels: Vec<f64> = train.records().map(|(_, r)| r.label.value).collect();
    let mut seeds = BTreeMap::new();
    let fit_seed = seed::derive(options.seed, "fit", 0);
    seeds.insert("fit".to_string(), fit_seed);

    let (spec, pca, pc_sweep) = match group.pca_source() {
        None => (FeatureGroupSpec::new(group, rmsd_mode, None)?, None, None),
        Some(source) => {
            if train.len() < 10 {
                return Err(Error::invalid(format!(
                    "{name}: PC-count selection needs at least 10 TRAIN rows, got {}",
                    train.len()
                )));
            }
            let (block, column_ids) = prediction_block(&train, group.tables())?;
            let basis = fit_pca(&block, column_ids, source)?;
            let k_max = options.k_max.min(basis.n_components()).max(1);
            let scores = project(&basis, &block, k_max)?;
            let fixed_spec = FeatureGroupSpec::new(
                if group.uses_mw() { FeatureGroup::EW } else { FeatureGroup::E },
                rmsd_mode,
                None,
            )?;
            let fixed = assemble_features(&train, &fixed_spec, None)?.values;
            let split_seed = seed::derive(options.seed, "pc-split", 0);
            let sweep_seed = seed::derive(options.seed, "pc-sweep", 0);
            seeds.insert("pc-split".to_string(), split_seed);
            seeds.insert("pc-sweep".to_string(), sweep_seed);
            let (tr, val) = split_validation(train.len(), options.validation_fraction, split_seed)?;
            let sweep = optimize_pc_count(&fixed, &scores, &labels, k_max, &tr, &val, |xt, yt, xv| {
                fit_algorithm(algorithm, xt, yt, &options.sweep_protocol, sweep_seed)?.predict(xv)
            })?;
            log::info!("{name}: chose {} principal components", sweep.best_k);
            let spec = FeatureGroupSpec::new(group, rmsd_mode, Some(sweep.best_k))?;
            (spec, Some(basis.truncated(sweep.best_k)), Some(sweep))
        }
    };

    let features = assemble_features(&train, &spec, pca.as_ref())?;
    let model = fit_algorithm(algorithm, &features.values, &features.labels, &options.protocol, fit_seed)
        .map_err(|e| match e {
            Error::InvalidInput(m) => Error::InvalidInput(format!("{name}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{name}: {m}")),
            other => other,
        })?;
    let objective = match algorithm {
        Algorithm::Xgb => TREE_OBJECTIVE,
        _ => LINEAR_OBJECTIVE,
    };
    let manifest = RunManifest {
        master_seed: options.seed,
        seeds,
        filter: rmsd_mode.to_string(),
        n_train: train.len(),
        train_hash: hash_train(&train),
        feature_hash: seed::content_hash(features.to_tsv().as_bytes()),
        objective: objective.to_string(),
        protocol: options.protocol.clone(),
        sweep_protocol: pc_sweep.as_ref().map(|_| options.sweep_protocol.clone()),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(FittedMetaModel {
        format_version: FORMAT_VERSION,
        name,
        spec,
        algorithm,
        feature_names: features.column_names,
        model,
        pca,
        pc_sweep,
        manifest,
    })
}

/// Predict every record of `partition`. No RMSD filtering is applied.
pub fn predict_meta(model: &FittedMetaModel, cohort: &Cohort, partition: Partition) -> Result<BTreeMap<String, f64>> {
    let subset = cohort.partition(partition);
    if subset.is_empty() {
        return Ok(BTreeMap::new());
    }
    let features = assemble_features(&subset, &model.spec, model.pca.as_ref())?;
    if features.column_names != model.feature_names {
        return Err(Error::Schema(format!(
            "model {} expects columns [{}], data provides [{}]",
            model.name,
            model.feature_names.join(", "),
            features.column_names.join(", ")
        )));
    }
    let pred = predict_matrix(&model.model, &features.values)?;
    Ok(features.complex_ids.into_iter().zip(pred).collect())
}

fn predict_matrix(model: &Model, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let pred = model.predict(x)?;
    if pred.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical("non-finite prediction".into()));
    }
    Ok(pred)
}
