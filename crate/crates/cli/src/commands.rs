//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use affistack::evaluate::{evaluate as score, grouped_report, screen_report, EvaluationReport, ScoredLigand};
use affistack::features::{assemble_features, prediction_block, FeatureGroupSpec};
use affistack::ingest::{parse_labels, Partition};
use affistack::pca::{fit_pca, PcaBasis};
use affistack::pipeline::{predict_meta, train_meta_model, FittedMetaModel, TrainOptions};
use affistack::pose_rmsd::{apply_rmsd_cutoff, filter_table_name, write_filter_table, FilterResult};
use affistack::seed::content_hash;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Cell, Narrowing, RunConfig};
use crate::data::{self, combined_hash, InputHashes, LoadedData};
use crate::output::{is_up_to_date, to_json, write_atomic, write_with_manifest};
use crate::{CliError, Common, MatrixArgs};

/// Upper MW bound of the low-weight group.
const MW_SPLIT: f64 = 900.0;

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: Option<&RunConfig>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.as_ref().map(|p| c.resolve(p))))
        .unwrap_or_else(|| PathBuf::from("affistack-out"))
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError> {
    if workers == 0 {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

fn narrowing(m: &MatrixArgs) -> Narrowing {
    Narrowing {
        groups: m.groups.clone(),
        algorithms: m.algorithms.clone(),
        modes: m.modes.clone(),
        cutoffs: m.cutoffs.clone(),
    }
}

fn parse_partition(s: &str) -> Result<Partition, CliError> {
    s.parse().map_err(|e: affistack::Error| CliError::Config(e.to_string()))
}

/// Fail when any complex of `partition` could not be loaded.
fn require_loaded(data: &LoadedData, partition: Partition) -> Result<(), CliError> {
    let bad: Vec<&(String, String)> = data
        .errors
        .iter()
        .filter(|(id, _)| data.cohort.get(id).is_some_and(|r| r.partition == partition))
        .collect();
    match bad.first() {
        None => Ok(()),
        Some((id, msg)) => Err(CliError::Data(format!(
            "{} {partition} complex(es) failed to load; first: {id}: {msg}",
            bad.len()
        ))),
    }
}

pub fn filter_poses(common: &Common, matrix: &MatrixArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let out = out_dir(common, Some(&cfg)).join("filters");
    let modes = cfg.filter_modes(&narrowing(matrix))?;
    let data = with_pool(cfg.workers, || data::load(&cfg))?;
    for mode in &modes {
        let results: Vec<FilterResult> = data
            .cohort
            .records()
            .filter_map(|(_, r)| r.filter_results.get(mode).cloned())
            .collect();
        let body = write_filter_table(&results);
        write_with_manifest(
            &out.join(filter_table_name(*mode)),
            body.as_bytes(),
            "filter-poses",
            None,
            None,
            data.hashes.clone(),
        )?;
        println!("{}: {} complexes", filter_table_name(*mode), results.len());
    }
    if !data.errors.is_empty() {
        let mut body = String::from("complex_id\terror\n");
        for (id, msg) in &data.errors {
            let _ = writeln!(body, "{id}\t{}", msg.replace(['\t', '\n'], " "));
        }
        write_atomic(&out.join("errors.tsv"), body.as_bytes())?;
        return Err(CliError::Data(format!(
            "{} complex(es) could not be read; see {}",
            data.errors.len(),
            out.join("errors.tsv").display()
        )));
    }
    Ok(())
}

pub fn assemble(common: &Common, matrix: &MatrixArgs, partition: &str, pcs: Option<usize>) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let partition = parse_partition(partition)?;
    let cell = *cfg
        .cells(&narrowing(matrix))?
        .first()
        .ok_or_else(|| CliError::Config("no matrix cell selected".into()))?;
    let data = with_pool(cfg.workers, || data::load(&cfg))?;
    require_loaded(&data, partition)?;
    let train = apply_rmsd_cutoff(&data.cohort.partition(Partition::Train), cell.mode)?;
    let subset = if partition == Partition::Train {
        train.clone()
    } else {
        data.cohort.partition(partition)
    };
    let (spec, basis): (FeatureGroupSpec, Option<PcaBasis>) = match cell.group.pca_source() {
        None => (FeatureGroupSpec::new(cell.group, cell.mode, None)?, None),
        Some(source) => {
            let k = pcs.ok_or_else(|| CliError::Config(format!("group {} needs --pcs", cell.group)))?;
            let (block, ids) = prediction_block(&train, cell.group.tables())?;
            let basis = fit_pca(&block, ids, source)?;
            (FeatureGroupSpec::new(cell.group, cell.mode, Some(k))?, Some(basis))
        }
    };
    let features = assemble_features(&subset, &spec, basis.as_ref())?;
    let path = out_dir(common, Some(&cfg))
        .join("features")
        .join(format!("{}_{partition}.tsv", spec.cell_name()));
    write_with_manifest(
        &path,
        features.to_tsv().as_bytes(),
        "assemble",
        None,
        None,
        data.hashes.clone(),
    )?;
    println!("{}: {} rows x {} columns", path.display(), features.n_rows(), features.n_cols());
    Ok(())
}

#[derive(Serialize)]
struct CellIdentity<'a> {
    inputs: &'a str,
    name: &'a str,
    seed: u64,
    options: &'a TrainOptions,
    version: &'static str,
}

fn cell_hash(inputs: &str, name: &str, options: &TrainOptions) -> Result<String, CliError> {
    let identity = CellIdentity {
        inputs,
        name,
        seed: options.seed,
        options,
        version: env!("CARGO_PKG_VERSION"),
    };
    Ok(content_hash(to_json(&identity)?.as_bytes()))
}

pub fn train(common: &Common, matrix: &MatrixArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let cells = cfg.cells(&narrowing(matrix))?;
    let models_dir = out_dir(common, Some(&cfg)).join("models");
    let options = TrainOptions {
        seed: cfg.seed,
        protocol: cfg.protocol.clone(),
        sweep_protocol: cfg.training.sweep_protocol.clone(),
        k_max: cfg.training.k_max,
        validation_fraction: cfg.training.validation_fraction,
    };
    let outcomes = with_pool(cfg.workers, || {
        let data = data::load(&cfg)?;
        require_loaded(&data, Partition::Train)?;
        let inputs = combined_hash(&data.hashes);
        Ok(cells
            .par_iter()
            .map(|cell| train_cell(&data, &inputs, cell, &options, &models_dir))
            .collect::<Vec<_>>())
    })?;
    let mut trained = 0;
    let mut reused = 0;
    let mut first_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(true) => trained += 1,
            Ok(false) => reused += 1,
            Err(e) => {
                eprintln!("affistack: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    println!("trained {trained} model(s), reused {reused}");
    first_error.map_or(Ok(()), Err)
}

/// Train one cell unless an up-to-date model exists. Returns whether it trained.
fn train_cell(
    data: &LoadedData,
    inputs: &str,
    cell: &Cell,
    options: &TrainOptions,
    dir: &Path,
) -> Result<bool, CliError> {
    let name = affistack::pipeline::model_name(cell.group, cell.mode, cell.algorithm);
    let path = dir.join(format!("{name}.json"));
    let hash = cell_hash(inputs, &name, options)?;
    if is_up_to_date(&path, &hash) {
        log::info!("{name}: up to date");
        return Ok(false);
    }
    log::info!("{name}: training");
    let model = train_meta_model(&data.cohort, cell.group, cell.mode, cell.algorithm, options)?;
    let body = model.to_json()?;
    write_with_manifest(&path, body.as_bytes(), "train", Some(options.seed), Some(hash), relevant_inputs(data))?;
    Ok(true)
}

/// Non-structure inputs; structure files are covered by the cell hash.
fn relevant_inputs(data: &LoadedData) -> InputHashes {
    let mut map: InputHashes = data
        .hashes
        .iter()
        .filter(|(k, _)| !k.ends_with(".sdf"))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    map.insert("structures".into(), combined_hash(&data.hashes.iter().filter(|(k, _)| k.ends_with(".sdf")).map(|(k, v)| (k.clone(), v.clone())).collect()));
    map
}

fn load_model(path: &Path) -> Result<FittedMetaModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(FittedMetaModel::from_json(&text)?)
}

fn predictions_tsv(pred: &BTreeMap<String, f64>) -> String {
    let mut out = String::from("complex_id\tprediction\n");
    for (id, v) in pred {
        let _ = writeln!(out, "{id}\t{v}");
    }
    out
}

pub fn predict(common: &Common, model_path: &Path, partition: &str) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let partition = parse_partition(partition)?;
    let model = load_model(model_path)?;
    let data = with_pool(cfg.workers, || data::load(&cfg))?;
    require_loaded(&data, partition)?;
    let pred = predict_meta(&model, &data.cohort, partition)?;
    let path = out_dir(common, Some(&cfg))
        .join("predictions")
        .join(format!("{}_{partition}.tsv", model.name));
    let mut inputs = relevant_inputs(&data);
    inputs.insert("model".into(), content_hash(model.to_json()?.as_bytes()));
    write_with_manifest(&path, predictions_tsv(&pred).as_bytes(), "predict", None, None, inputs)?;
    println!("{}: {} predictions", path.display(), pred.len());
    Ok(())
}

/// Two-column TSV with a header row.
fn read_pairs(path: &Path) -> Result<Vec<(usize, Vec<String>)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').split('\t').map(str::to_string).collect()))
        .collect())
}

fn read_scores(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let mut out = BTreeMap::new();
    for (row, cells) in read_pairs(path)? {
        let bad = |m: &str| CliError::Data(format!("{} row {row}: {m}", path.display()));
        if cells.len() < 2 {
            return Err(bad("expected two cells"));
        }
        let v: f64 = cells[1].trim().parse().map_err(|_| bad("non-numeric score"))?;
        if out.insert(cells[0].clone(), v).is_some() {
            return Err(bad("duplicate id"));
        }
    }
    Ok(out)
}

fn report_row(out: &mut String, name: &str, r: &EvaluationReport) {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    let _ = writeln!(
        out,
        "{name}\t{}\t{}\t{}\t{}\t{}",
        r.n,
        opt(r.pearson),
        opt(r.spearman),
        r.mse,
        r.rmse
    );
}

const REPORT_HEADER: &str = "name\tn\tpearson\tspearman\tmse\trmse\n";

pub fn evaluate(common: &Common, pred: &Path, truth: &Path, groups: Option<&Path>) -> Result<(), CliError> {
    let pred = read_scores(pred)?;
    let text = fs::read_to_string(truth).map_err(|e| CliError::Data(format!("cannot read {}: {e}", truth.display())))?;
    let truth: BTreeMap<String, f64> = parse_labels(&text)?
        .into_iter()
        .map(|l| (l.complex_id, l.value))
        .collect();
    let overall = score(&pred, &truth)?;
    let mut tsv = String::from(REPORT_HEADER);
    report_row(&mut tsv, "all", &overall);
    let by_group = match groups {
        None => BTreeMap::new(),
        Some(path) => {
            let mut map = BTreeMap::new();
            for (_, cells) in read_pairs(path)? {
                if cells.len() >= 2 {
                    map.insert(cells[0].clone(), cells[1].clone());
                }
            }
            grouped_report(&pred, &truth, |id| map.get(id).cloned())?
        }
    };
    for (g, r) in &by_group {
        report_row(&mut tsv, g, r);
    }
    #[derive(Serialize)]
    struct Evaluation<'a> {
        overall: &'a EvaluationReport,
        groups: &'a BTreeMap<String, EvaluationReport>,
    }
    let dir = out_dir(common, None);
    write_atomic(&dir.join("evaluation.tsv"), tsv.as_bytes())?;
    write_atomic(
        &dir.join("evaluation.json"),
        to_json(&Evaluation {
            overall: &overall,
            groups: &by_group,
        })?
        .as_bytes(),
    )?;
    print!("{tsv}");
    Ok(())
}

pub fn screen(common: &Common, pred: &Path, labels: &Path, orientation: Option<&str>) -> Result<(), CliError> {
    let orientation = orientation
        .map(|o| o.parse().map_err(|e: affistack::Error| CliError::Config(e.to_string())))
        .transpose()?
        .unwrap_or_default();
    let scores = read_scores(pred)?;
    let mut by_target: BTreeMap<String, Vec<ScoredLigand>> = BTreeMap::new();
    let mut unscored = Vec::new();
    for (row, cells) in read_pairs(labels)? {
        if cells.len() < 3 {
            return Err(CliError::Data(format!("{} row {row}: expected three cells", labels.display())));
        }
        let active = match cells[2].trim() {
            "1" | "true" | "active" => true,
            "0" | "false" | "inactive" => false,
            other => {
                return Err(CliError::Data(format!(
                    "{} row {row}: bad activity flag `{other}`",
                    labels.display()
                )))
            }
        };
        match scores.get(&cells[1]) {
            Some(&score) => by_target.entry(cells[0].clone()).or_default().push(ScoredLigand {
                id: cells[1].clone(),
                score,
                active,
            }),
            None => unscored.push(cells[1].clone()),
        }
    }
    if !unscored.is_empty() {
        return Err(affistack::Error::MissingData {
            what: "score".into(),
            ids: unscored,
        }
        .into());
    }
    let report = screen_report(&by_target, orientation)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    let mut tsv = String::from(
        "target\tn_ligands\tn_actives\ttop5_recall\ttop10_recall\tprecision_at_actives\twelch_t\twelch_p\tmwu_u\tmwu_p\n",
    );
    for t in &report {
        let _ = writeln!(
            tsv,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            t.target,
            t.n_ligands,
            t.n_actives,
            opt(t.top5_recall),
            opt(t.top10_recall),
            t.precision_at_actives,
            opt(t.welch_t),
            opt(t.welch_p),
            opt(t.mwu_u),
            opt(t.mwu_p)
        );
    }
    let dir = out_dir(common, None);
    write_atomic(&dir.join("screen.tsv"), tsv.as_bytes())?;
    write_atomic(&dir.join("screen.json"), to_json(&report)?.as_bytes())?;
    print!("{tsv}");
    Ok(())
}

#[derive(Serialize)]
struct ModelReport {
    overall: EvaluationReport,
    by_mw: BTreeMap<String, EvaluationReport>,
}

pub fn report(common: &Common, partition: &str) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let partition = parse_partition(partition)?;
    let out = out_dir(common, Some(&cfg));
    let models_dir = out.join("models");
    let mut paths: Vec<PathBuf> = fs::read_dir(&models_dir)
        .map_err(|e| CliError::Data(format!("cannot list {}: {e}", models_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && !p.to_string_lossy().ends_with(".manifest.json")
                && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!("no models in {}", models_dir.display())));
    }
    let reports = with_pool(cfg.workers, || {
        let data = data::load(&cfg)?;
        require_loaded(&data, partition)?;
        let truth: BTreeMap<String, f64> = data
            .cohort
            .records()
            .map(|(id, r)| (id.to_string(), r.label.value))
            .collect();
        let mw: BTreeMap<String, f64> = data
            .cohort
            .records()
            .filter_map(|(id, r)| r.molecular_weight().map(|w| (id.to_string(), w)))
            .collect();
        paths
            .par_iter()
            .map(|p| {
                let model = load_model(p)?;
                let pred = predict_meta(&model, &data.cohort, partition)?;
                let overall = score(&pred, &truth)?;
                let by_mw = grouped_report(&pred, &truth, |id| {
                    mw.get(id)
                        .map(|&w| if w <= MW_SPLIT { "low_mw" } else { "high_mw" }.to_string())
                })?;
                Ok((model.name, ModelReport { overall, by_mw }))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let mut tsv = String::from(REPORT_HEADER);
    for (name, r) in &reports {
        report_row(&mut tsv, name, &r.overall);
    }
    let json: BTreeMap<&str, &ModelReport> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
    let dir = out.join("reports");
    write_atomic(&dir.join(format!("summary_{partition}.tsv")), tsv.as_bytes())?;
    write_atomic(&dir.join(format!("report_{partition}.json")), to_json(&json)?.as_bytes())?;
    print!("{tsv}");
    Ok(())
}
