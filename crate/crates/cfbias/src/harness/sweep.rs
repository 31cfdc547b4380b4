use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::attribution::biomarker_scores;
use crate::bias::{bias_report, BiasReport};
use crate::dgp::{true_cate, PotentialDataset};
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::learners::{fit_learner, CateModel, LearnerKind};
use crate::metrics::{
    model_policy, pehe, precision_assignment, rmse_counterfactual, rmse_factual, MetricsRow,
};
use crate::numerics::{mix_seed, RngStream};
use crate::policy::{assign, ObservationalDataset, PolicySpec};

/// Fixed column order of the results CSV.
pub const RESULTS_COLUMNS: &str = "dataset,policy_source,beta,seed,fold,learner,pehe,rmse_f,rmse_cf,rmse_y0_cf,rmse_y1_cf,prec_ass_pi,prec_ass_model,attr_pred,attr_prog,status";

const BIAS_COLUMNS: &str =
    "dataset,policy_source,beta,seed,b_y0,b_y1,b_effect,b_joint,b_x,h_a,prec_ass_pi,bins_y0,bins_y1,bins_effect,n,status";

// substream labels under each experiment seed
const CH_POLICY: u64 = 100;
const CH_FOLDS: u64 = 200;
const CH_LEARNER: u64 = 300;
const CH_ATTR: u64 = 400;

/// One bias evaluation, keyed by (dataset, policy, beta, seed).
#[derive(Debug, Clone)]
pub struct BiasRow {
    pub dataset: String,
    pub policy_source: String,
    pub beta: f64,
    pub seed: u64,
    pub report: Option<BiasReport>,
    pub status: String,
}

/// All rows produced by a sweep.
#[derive(Debug, Default)]
pub struct ResultsTable {
    pub rows: Vec<MetricsRow>,
    pub bias_rows: Vec<BiasRow>,
}

/// Shuffled contiguous fold split; the shuffle is keyed by the experiment
/// seed so folds are shared across policies and bias scales.
pub fn fold_indices(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    RngStream::root(mix_seed(seed, CH_FOLDS))
        .draws()
        .shuffle(&mut order);
    let mut out = Vec::with_capacity(folds);
    let base = n / folds;
    let extra = n % folds;
    let mut pos = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(order[pos..pos + len].to_vec());
        pos += len;
    }
    out
}

fn policy_seed(seed: u64, source_idx: usize) -> u64 {
    mix_seed(seed, CH_POLICY + source_idx as u64)
}

fn learner_seed(seed: u64, source_idx: usize, beta_idx: usize, fold: usize, learner_idx: usize) -> u64 {
    let mut s = mix_seed(seed, CH_LEARNER);
    for label in [source_idx as u64, beta_idx as u64, fold as u64, learner_idx as u64] {
        s = mix_seed(s, label);
    }
    s
}

struct CellSpec<'a> {
    dataset: &'a str,
    beta: f64,
    seed: u64,
    fold: usize,
    folds_total: usize,
    learner_name: &'a str,
    attribution: Option<(usize, usize)>, // (budget, max units)
    attr_seed: u64,
}

fn error_row(spec: &CellSpec, source: &str, err: &Error) -> MetricsRow {
    MetricsRow {
        dataset: spec.dataset.to_string(),
        policy_source: source.to_string(),
        beta: spec.beta,
        seed: spec.seed,
        fold: spec.fold,
        learner: spec.learner_name.to_string(),
        pehe: None,
        rmse_f: None,
        rmse_cf: None,
        rmse_y0_cf: None,
        rmse_y1_cf: None,
        prec_ass_pi: None,
        prec_ass_model: None,
        attr_pred: None,
        attr_prog: None,
        status: format!("error: {err}"),
    }
}

fn eval_cell(
    obs: &ObservationalDataset,
    spec: &CellSpec,
    model: &dyn CateModel,
) -> Result<MetricsRow> {
    let n = obs.n();
    let folds = fold_indices(n, spec.folds_total, spec.seed);
    let test_idx = &folds[spec.fold];

    // fold hygiene: no test unit may appear in the training set
    let mut in_test = vec![false; n];
    for &i in test_idx {
        in_test[i] = true;
    }
    let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    debug_assert!(train_idx.iter().all(|&i| !in_test[i]));

    let base = &obs.base;
    let x_test = base.x.select_rows(test_idx);
    let a_test: Vec<u8> = test_idx.iter().map(|&i| obs.a[i]).collect();
    let yf_test: Vec<f64> = test_idx.iter().map(|&i| obs.yf[i]).collect();
    let ycf_test: Vec<f64> = test_idx.iter().map(|&i| obs.ycf[i]).collect();
    let y0_test: Vec<f64> = test_idx.iter().map(|&i| base.y0[i]).collect();
    let y1_test: Vec<f64> = test_idx.iter().map(|&i| base.y1[i]).collect();
    let tau = true_cate(base);
    let tau_test: Vec<f64> = test_idx.iter().map(|&i| tau[i]).collect();

    let caps = model.capabilities();
    let pehe_value = if caps.cate {
        Some(pehe(&model.predict_cate(&x_test)?, &tau_test)?)
    } else {
        None
    };
    let rmse_f = rmse_factual(&x_test, &a_test, &yf_test, model)?;
    let cf = rmse_counterfactual(&x_test, &a_test, &ycf_test, model)?;
    let prec_pi = precision_assignment(&a_test, &y0_test, &y1_test)?;
    let prec_model = if caps.cate || caps.propensity {
        let chosen = model_policy(model, &x_test)?;
        Some(precision_assignment(&chosen, &y0_test, &y1_test)?)
    } else {
        None
    };

    let (attr_pred, attr_prog) = match spec.attribution {
        Some((budget, max_units)) if !base.partition.is_empty() => {
            let x_train = base.x.select_rows(&train_idx);
            let limit = test_idx.len().min(max_units);
            let x_attr = x_test.select_rows(&(0..limit).collect::<Vec<_>>());
            biomarker_scores(
                model,
                &x_attr,
                &x_train,
                &base.partition,
                budget,
                spec.attr_seed,
            )?
        }
        _ => (None, None),
    };

    Ok(MetricsRow {
        dataset: spec.dataset.to_string(),
        policy_source: obs.policy.source.name().to_string(),
        beta: spec.beta,
        seed: spec.seed,
        fold: spec.fold,
        learner: spec.learner_name.to_string(),
        pehe: pehe_value,
        rmse_f,
        rmse_cf: cf.as_ref().map(|c| c.overall),
        rmse_y0_cf: cf.as_ref().and_then(|c| c.arm0),
        rmse_y1_cf: cf.as_ref().and_then(|c| c.arm1),
        prec_ass_pi: Some(prec_pi),
        prec_ass_model: prec_model,
        attr_pred,
        attr_prog,
        status: "ok".into(),
    })
}

fn fit_and_eval(
    obs: &ObservationalDataset,
    spec: &CellSpec,
    kind: &LearnerKind,
    learner_seed: u64,
) -> Result<MetricsRow> {
    let n = obs.n();
    let folds = fold_indices(n, spec.folds_total, spec.seed);
    let test_idx = &folds[spec.fold];
    let mut in_test = vec![false; n];
    for &i in test_idx {
        in_test[i] = true;
    }
    let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();

    let x_train = obs.base.x.select_rows(&train_idx);
    let a_train: Vec<u8> = train_idx.iter().map(|&i| obs.a[i]).collect();
    let yf_train: Vec<f64> = train_idx.iter().map(|&i| obs.yf[i]).collect();

    let model = fit_learner(kind, &x_train, &a_train, &yf_train, learner_seed)?;
    eval_cell(obs, spec, model.as_ref())
}

/// Runs one sweep cell: instantiate the observational dataset, split folds,
/// train on the factual training triples, and evaluate all applicable
/// metrics on the held-out fold. Learner failures come back as error-tagged
/// rows rather than hard errors.
pub fn run_cell(
    ds: &PotentialDataset,
    dataset_label: &str,
    policy: &PolicySpec,
    seed: u64,
    fold_index: usize,
    folds_total: usize,
    learner_name: &str,
) -> Result<MetricsRow> {
    let kind = crate::learners::parse_learner(learner_name)?;
    let obs = assign(ds, policy)?;
    let spec = CellSpec {
        dataset: dataset_label,
        beta: policy.beta,
        seed,
        fold: fold_index,
        folds_total,
        learner_name,
        attribution: None,
        attr_seed: 0,
    };
    Ok(
        match fit_and_eval(&obs, &spec, &kind, mix_seed(seed, CH_LEARNER)) {
            Ok(row) => row,
            Err(err) => error_row(&spec, policy.source.name(), &err),
        },
    )
}

/// [`run_cell`] with an externally supplied model; the test hook for oracle
/// learners.
pub fn run_cell_with_model(
    ds: &PotentialDataset,
    dataset_label: &str,
    policy: &PolicySpec,
    seed: u64,
    fold_index: usize,
    folds_total: usize,
    model_name: &str,
    model: &dyn CateModel,
) -> Result<MetricsRow> {
    let obs = assign(ds, policy)?;
    let spec = CellSpec {
        dataset: dataset_label,
        beta: policy.beta,
        seed,
        fold: fold_index,
        folds_total,
        learner_name: model_name,
        attribution: None,
        attr_seed: 0,
    };
    eval_cell(&obs, &spec, model)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metrics_csv_line(r: &MetricsRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.dataset,
        r.policy_source,
        r.beta,
        r.seed,
        r.fold,
        r.learner,
        fmt_opt(r.pehe),
        fmt_opt(r.rmse_f),
        fmt_opt(r.rmse_cf),
        fmt_opt(r.rmse_y0_cf),
        fmt_opt(r.rmse_y1_cf),
        fmt_opt(r.prec_ass_pi),
        fmt_opt(r.prec_ass_model),
        fmt_opt(r.attr_pred),
        fmt_opt(r.attr_prog),
        r.status
    )
}

fn bias_csv_line(r: &BiasRow) -> String {
    match &r.report {
        Some(b) => format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.dataset,
            r.policy_source,
            r.beta,
            r.seed,
            b.b_y0,
            b.b_y1,
            b.b_effect,
            b.b_joint,
            b.b_x,
            b.h_a,
            b.prec_ass_pi,
            b.bins_y0,
            b.bins_y1,
            b.bins_effect,
            b.n,
            r.status
        ),
        None => format!(
            "{},{},{},{},,,,,,,,,,,,{}",
            r.dataset, r.policy_source, r.beta, r.seed, r.status
        ),
    }
}

fn cell_sort_key(
    cfg: &ExperimentConfig,
    row: &MetricsRow,
) -> (usize, usize, usize, usize, usize) {
    let source_idx = cfg
        .policy_sources
        .iter()
        .position(|s| s.name() == row.policy_source)
        .unwrap_or(usize::MAX);
    let beta_idx = cfg
        .beta_grid
        .iter()
        .position(|b| *b == row.beta)
        .unwrap_or(usize::MAX);
    let seed_idx = cfg
        .seeds
        .iter()
        .position(|s| *s == row.seed)
        .unwrap_or(usize::MAX);
    let learner_idx = cfg
        .learners
        .iter()
        .position(|l| *l == row.learner)
        .unwrap_or(usize::MAX);
    (source_idx, beta_idx, seed_idx, row.fold, learner_idx)
}

fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(|e| Error::FileWrite {
        path: tmp.clone(),
        source: e,
    })?;
    fs::rename(&tmp, path).map_err(|e| Error::FileWrite {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_partial_rows(path: &Path) -> (Vec<MetricsRow>, HashSet<String>) {
    let mut rows = Vec::new();
    let mut keys = HashSet::new();
    let Ok(mut reader) = csv::ReaderBuilder::new().has_headers(true).from_path(path) else {
        return (rows, keys);
    };
    for record in reader.records().flatten() {
        if record.len() != 16 {
            continue;
        }
        let opt = |i: usize| -> Option<f64> { record.get(i).and_then(|s| s.parse().ok()) };
        let (Some(beta), Some(seed), Some(fold)) = (
            record.get(2).and_then(|s| s.parse::<f64>().ok()),
            record.get(3).and_then(|s| s.parse::<u64>().ok()),
            record.get(4).and_then(|s| s.parse::<usize>().ok()),
        ) else {
            continue;
        };
        let row = MetricsRow {
            dataset: record[0].to_string(),
            policy_source: record[1].to_string(),
            beta,
            seed,
            fold,
            learner: record[5].to_string(),
            pehe: opt(6),
            rmse_f: opt(7),
            rmse_cf: opt(8),
            rmse_y0_cf: opt(9),
            rmse_y1_cf: opt(10),
            prec_ass_pi: opt(11),
            prec_ass_model: opt(12),
            attr_pred: opt(13),
            attr_prog: opt(14),
            status: record[15].to_string(),
        };
        keys.insert(row_key(&row));
        rows.push(row);
    }
    (rows, keys)
}

fn row_key(r: &MetricsRow) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}",
        r.dataset, r.policy_source, r.beta, r.seed, r.fold, r.learner
    )
}

/// Runs the full Cartesian sweep and writes `results.csv`, `biases.csv`,
/// `summary.csv` and `run_meta.json` into `out_dir`. Interrupted runs leave
/// a `results.partial.csv` that a rerun picks up by cell key.
pub fn run_sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<ResultsTable> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::FileWrite {
        path: out_dir.to_path_buf(),
        source: e,
    })?;

    let (dataset, dataset_label) = config.build_dataset()?;
    let learner_grid = config.learner_grid()?;

    let partial_path = out_dir.join("results.partial.csv");
    let (done_rows, done_keys) = if partial_path.exists() {
        load_partial_rows(&partial_path)
    } else {
        (Vec::new(), HashSet::new())
    };
    let partial_file = Mutex::new(
        fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&partial_path)
            .map_err(|e| Error::FileWrite {
                path: partial_path.clone(),
                source: e,
            })?,
    );
    if done_rows.is_empty() {
        let mut f = partial_file.lock().unwrap();
        let _ = writeln!(f, "{RESULTS_COLUMNS}");
    }

    // phase A: observational datasets and bias reports per (source, beta, seed)
    let triples: Vec<(usize, usize, usize)> = (0..config.policy_sources.len())
        .flat_map(|si| {
            (0..config.beta_grid.len())
                .flat_map(move |bi| (0..config.seeds.len()).map(move |ki| (si, bi, ki)))
        })
        .collect();

    let assignments: Vec<((usize, usize, usize), Result<ObservationalDataset>, BiasRow)> =
        triples
            .par_iter()
            .map(|&(si, bi, ki)| {
                let source = config.policy_sources[si];
                let beta = config.beta_grid[bi];
                let seed = config.seeds[ki];
                let policy = PolicySpec {
                    source,
                    beta,
                    m: config.score_features,
                    seed: policy_seed(seed, si),
                };
                let obs = assign(&dataset, &policy);
                let bias_row = match &obs {
                    Ok(o) => match bias_report(o) {
                        Ok(report) => BiasRow {
                            dataset: dataset_label.clone(),
                            policy_source: source.name().into(),
                            beta,
                            seed,
                            report: Some(report),
                            status: "ok".into(),
                        },
                        Err(err) => BiasRow {
                            dataset: dataset_label.clone(),
                            policy_source: source.name().into(),
                            beta,
                            seed,
                            report: None,
                            status: format!("error: {err}"),
                        },
                    },
                    Err(err) => BiasRow {
                        dataset: dataset_label.clone(),
                        policy_source: source.name().into(),
                        beta,
                        seed,
                        report: None,
                        status: format!("error: {err}"),
                    },
                };
                ((si, bi, ki), obs, bias_row)
            })
            .collect();

    let mut bias_rows: Vec<BiasRow> = assignments.iter().map(|(_, _, b)| b.clone()).collect();
    bias_rows.sort_by_key(|r| {
        (
            config
                .policy_sources
                .iter()
                .position(|s| s.name() == r.policy_source)
                .unwrap_or(usize::MAX),
            config
                .beta_grid
                .iter()
                .position(|b| *b == r.beta)
                .unwrap_or(usize::MAX),
            config.seeds.iter().position(|s| *s == r.seed).unwrap_or(usize::MAX),
        )
    });

    let obs_map: HashMap<(usize, usize, usize), &Result<ObservationalDataset>> = assignments
        .iter()
        .map(|(key, obs, _)| (*key, obs))
        .collect();

    // phase B: the full cell product
    struct Cell {
        si: usize,
        bi: usize,
        ki: usize,
        fold: usize,
        li: usize,
    }
    let mut cells = Vec::new();
    for si in 0..config.policy_sources.len() {
        for bi in 0..config.beta_grid.len() {
            for ki in 0..config.seeds.len() {
                for fold in 0..config.folds {
                    for li in 0..learner_grid.len() {
                        cells.push(Cell { si, bi, ki, fold, li });
                    }
                }
            }
        }
    }

    let mut rows: Vec<MetricsRow> = cells
        .par_iter()
        .filter_map(|cell| {
            let source = config.policy_sources[cell.si];
            let beta = config.beta_grid[cell.bi];
            let seed = config.seeds[cell.ki];
            let (learner_name, kind) = &learner_grid[cell.li];
            let spec = CellSpec {
                dataset: &dataset_label,
                beta,
                seed,
                fold: cell.fold,
                folds_total: config.folds,
                learner_name,
                attribution: config
                    .attribution
                    .enabled
                    .then_some((config.attribution.budget, config.attribution.max_units)),
                attr_seed: mix_seed(
                    mix_seed(seed, CH_ATTR),
                    (cell.si * 1000 + cell.bi * 100 + cell.fold * 10 + cell.li) as u64,
                ),
            };

            let probe = MetricsRow {
                dataset: dataset_label.clone(),
                policy_source: source.name().into(),
                beta,
                seed,
                fold: cell.fold,
                learner: learner_name.to_string(),
                pehe: None,
                rmse_f: None,
                rmse_cf: None,
                rmse_y0_cf: None,
                rmse_y1_cf: None,
                prec_ass_pi: None,
                prec_ass_model: None,
                attr_pred: None,
                attr_prog: None,
                status: String::new(),
            };
            if done_keys.contains(&row_key(&probe)) {
                return None; // already computed by an earlier interrupted run
            }

            let row = match obs_map[&(cell.si, cell.bi, cell.ki)] {
                Ok(obs) => {
                    let lseed = learner_seed(seed, cell.si, cell.bi, cell.fold, cell.li);
                    match fit_and_eval(obs, &spec, kind, lseed) {
                        Ok(row) => row,
                        Err(err) => error_row(&spec, source.name(), &err),
                    }
                }
                Err(err) => error_row(&spec, source.name(), err),
            };
            {
                let mut f = partial_file.lock().unwrap();
                let _ = writeln!(f, "{}", metrics_csv_line(&row));
            }
            Some(row)
        })
        .collect();

    rows.extend(done_rows);
    rows.sort_by_key(|r| cell_sort_key(config, r));

    // final artifacts, atomically renamed into place
    let mut results_csv = String::from(RESULTS_COLUMNS);
    results_csv.push('\n');
    for row in &rows {
        results_csv.push_str(&metrics_csv_line(row));
        results_csv.push('\n');
    }
    atomic_write(&out_dir.join("results.csv"), &results_csv)?;

    let mut bias_csv = String::from(BIAS_COLUMNS);
    bias_csv.push('\n');
    for row in &bias_rows {
        bias_csv.push_str(&bias_csv_line(row));
        bias_csv.push('\n');
    }
    atomic_write(&out_dir.join("biases.csv"), &bias_csv)?;

    atomic_write(&out_dir.join("summary.csv"), &summarize(config, &rows))?;

    let n_failed = rows.iter().filter(|r| r.status != "ok").count()
        + bias_rows.iter().filter(|r| r.status != "ok").count();
    let meta = serde_json::json!({
        "schema": 1,
        "config": config,
        "dataset_label": dataset_label,
        "cells_total": cells.len(),
        "cells_failed": n_failed,
        "notes": {
            "prec_ass_evaluation": "both prec_ass_pi and prec_ass_model are computed on the held-out fold",
            "bias_rows": "one per (policy_source, beta, seed), computed on the full cohort",
        },
    });
    atomic_write(
        &out_dir.join("run_meta.json"),
        &serde_json::to_string_pretty(&meta)?,
    )?;

    let _ = fs::remove_file(&partial_path);
    Ok(ResultsTable { rows, bias_rows })
}

/// Long-format mean/std aggregation per (policy, beta, learner) cell.
fn summarize(config: &ExperimentConfig, rows: &[MetricsRow]) -> String {
    let metric_names = [
        "pehe",
        "rmse_f",
        "rmse_cf",
        "rmse_y0_cf",
        "rmse_y1_cf",
        "prec_ass_pi",
        "prec_ass_model",
        "attr_pred",
        "attr_prog",
    ];
    let metric_of = |r: &MetricsRow, name: &str| -> Option<f64> {
        match name {
            "pehe" => r.pehe,
            "rmse_f" => r.rmse_f,
            "rmse_cf" => r.rmse_cf,
            "rmse_y0_cf" => r.rmse_y0_cf,
            "rmse_y1_cf" => r.rmse_y1_cf,
            "prec_ass_pi" => r.prec_ass_pi,
            "prec_ass_model" => r.prec_ass_model,
            "attr_pred" => r.attr_pred,
            "attr_prog" => r.attr_prog,
            _ => None,
        }
    };

    let mut out = String::from("dataset,policy_source,beta,learner,metric,mean,std,count\n");
    for source in &config.policy_sources {
        for &beta in &config.beta_grid {
            for learner in &config.learners {
                let cell: Vec<&MetricsRow> = rows
                    .iter()
                    .filter(|r| {
                        r.status == "ok"
                            && r.policy_source == source.name()
                            && r.beta == beta
                            && &r.learner == learner
                    })
                    .collect();
                if cell.is_empty() {
                    continue;
                }
                for metric in metric_names {
                    let values: Vec<f64> =
                        cell.iter().filter_map(|r| metric_of(r, metric)).collect();
                    if values.is_empty() {
                        continue;
                    }
                    let mean = values.iter().sum::<f64>() / values.len() as f64;
                    let var = values
                        .iter()
                        .map(|v| (v - mean) * (v - mean))
                        .sum::<f64>()
                        / values.len() as f64;
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        cell[0].dataset,
                        source.name(),
                        beta,
                        learner,
                        metric,
                        mean,
                        var.sqrt(),
                        values.len()
                    ));
                }
            }
        }
    }
    out
}

/// Reads a results CSV produced by [`run_sweep`].
pub fn read_results_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let (rows, _) = load_partial_rows(path);
    if rows.is_empty() {
        return Err(Error::MalformedTable {
            path: path.to_path_buf(),
            reason: "no result rows".into(),
        });
    }
    Ok(rows)
}

/// Reads a biases CSV produced by [`run_sweep`].
pub fn read_bias_csv(path: &Path) -> Result<Vec<BiasRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(Error::Csv)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 16 {
            continue;
        }
        let parse = |i: usize| -> Option<f64> { record.get(i).and_then(|s| s.parse().ok()) };
        let report = match (
            parse(4),
            parse(5),
            parse(6),
            parse(7),
            parse(8),
            parse(9),
            parse(10),
        ) {
            (Some(b_y0), Some(b_y1), Some(b_effect), Some(b_joint), Some(b_x), Some(h_a), Some(p)) => {
                Some(BiasReport {
                    b_y0,
                    b_y1,
                    b_effect,
                    b_joint,
                    b_x,
                    h_a,
                    prec_ass_pi: p,
                    bins_y0: parse(11).unwrap_or(0.0) as usize,
                    bins_y1: parse(12).unwrap_or(0.0) as usize,
                    bins_effect: parse(13).unwrap_or(0.0) as usize,
                    n: parse(14).unwrap_or(0.0) as usize,
                })
            }
            _ => None,
        };
        out.push(BiasRow {
            dataset: record[0].to_string(),
            policy_source: record[1].to_string(),
            beta: record
                .get(2)
                .and_then(|s| s.parse().ok())
                .unwrap_or(f64::NAN),
            seed: record.get(3).and_then(|s| s.parse().ok()).unwrap_or(0),
            report,
            status: record[15].to_string(),
        });
    }
    Ok(out)
}
