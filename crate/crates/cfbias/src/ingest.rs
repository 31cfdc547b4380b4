//! Loading of user-supplied covariate and dual-arm response tables, feature
//! selection by correlation, and the on-disk dataset bundle format
//! (`X.csv`, `Y.csv`, `meta.json`).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dgp::{FeaturePartition, PotentialDataset, ToyKind};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Numeric table with row ids and column names.
#[derive(Debug, Clone)]
pub struct NamedTable {
    pub row_ids: Vec<String>,
    pub col_names: Vec<String>,
    pub values: Matrix,
}

impl NamedTable {
    pub fn col_index(&self, name: &str) -> Option<usize> {
        self.col_names.iter().position(|c| c == name)
    }
}

/// A loaded table plus how many malformed rows were dropped on the way in.
#[derive(Debug)]
pub struct CsvLoad {
    pub table: NamedTable,
    pub dropped_rows: usize,
}

/// Reads a CSV whose first column is the unit id and whose remaining cells
/// are numeric. Rows containing any non-numeric or missing cell are dropped
/// and counted rather than imputed.
pub fn load_csv(path: &Path) -> Result<CsvLoad> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::FileRead {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv(e),
        })?;

    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::MalformedTable {
            path: path.to_path_buf(),
            reason: "need an id column plus at least one value column".into(),
        });
    }
    let col_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    {
        let mut sorted = col_names.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::MalformedTable {
                path: path.to_path_buf(),
                reason: "duplicate column names".into(),
            });
        }
    }

    let mut row_ids = Vec::new();
    let mut data = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        let Some(id) = record.get(0) else {
            dropped += 1;
            continue;
        };
        if record.len() != headers.len() {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(col_names.len());
        let mut ok = true;
        for cell in record.iter().skip(1) {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            row_ids.push(id.to_string());
            data.extend(row);
        } else {
            dropped += 1;
        }
    }

    if row_ids.is_empty() {
        return Err(Error::MalformedTable {
            path: path.to_path_buf(),
            reason: "no usable data rows".into(),
        });
    }
    {
        let mut sorted = row_ids.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::MalformedTable {
                path: path.to_path_buf(),
                reason: format!("duplicate row id {:?}", w[0]),
            });
        }
    }

    let values = Matrix::new(row_ids.len(), col_names.len(), data)?;
    Ok(CsvLoad {
        table: NamedTable {
            row_ids,
            col_names,
            values,
        },
        dropped_rows: dropped,
    })
}

fn pearson_abs(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0; // constant columns carry no correlation signal
    }
    (sxy / (sxx * syy).sqrt()).abs()
}

/// Indices of the `k` columns with the largest |Pearson correlation| to the
/// target; ties break toward the lower column index.
pub fn select_top_correlated(x: &NamedTable, target: &[f64], k: usize) -> Result<Vec<usize>> {
    let (n, d) = (x.values.rows(), x.values.cols());
    if target.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "target length {} != {} rows",
            target.len(),
            n
        )));
    }
    if k > d {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} of {d} columns"
        )));
    }
    let t_std: f64 = {
        let m = target.iter().sum::<f64>() / n as f64;
        target.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
    };
    if t_std == 0.0 {
        return Err(Error::DegenerateInput(
            "correlation target is constant".into(),
        ));
    }

    let mut scored: Vec<(usize, f64)> = (0..d)
        .map(|j| (j, pearson_abs(&x.values.col(j), target)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(k).map(|(j, _)| j).collect())
}

fn standardize_or_zero(col: &mut [f64]) {
    let n = col.len() as f64;
    let m = col.iter().sum::<f64>() / n;
    let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        col.iter_mut().for_each(|v| *v = (*v - m) / sd);
    } else {
        col.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Assembles an empirical potential-outcome dataset from a covariate table
/// and a dual-arm response table. Units are the id intersection; covariates
/// are the `k` columns most correlated with the mean of the two arm
/// responses, standardized per feature over the assembled cohort.
pub fn build_empirical_dataset(
    cov: &NamedTable,
    resp: &NamedTable,
    arm0: &str,
    arm1: &str,
    k: usize,
    standardize_arms: bool,
) -> Result<PotentialDataset> {
    let a0 = resp
        .col_index(arm0)
        .ok_or_else(|| Error::InvalidArgument(format!("response table has no column {arm0:?}")))?;
    let a1 = resp
        .col_index(arm1)
        .ok_or_else(|| Error::InvalidArgument(format!("response table has no column {arm1:?}")))?;

    let resp_pos: HashMap<&str, usize> = resp
        .row_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    // cohort in covariate-table order
    let mut unit_ids = Vec::new();
    let mut cov_rows = Vec::new();
    let mut y0 = Vec::new();
    let mut y1 = Vec::new();
    for (i, id) in cov.row_ids.iter().enumerate() {
        if let Some(&r) = resp_pos.get(id.as_str()) {
            unit_ids.push(id.clone());
            cov_rows.push(i);
            y0.push(resp.values.get(r, a0));
            y1.push(resp.values.get(r, a1));
        }
    }
    if unit_ids.is_empty() {
        return Err(Error::DegenerateInput(
            "no unit ids shared between covariate and response tables".into(),
        ));
    }

    if standardize_arms {
        standardize_or_zero(&mut y0);
        standardize_or_zero(&mut y1);
    }

    let cohort = NamedTable {
        row_ids: unit_ids.clone(),
        col_names: cov.col_names.clone(),
        values: cov.values.select_rows(&cov_rows),
    };
    let target: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| (a + b) / 2.0).collect();
    let selected = select_top_correlated(&cohort, &target, k)?;

    let mut x = cohort.values.select_columns(&selected)?;
    for j in 0..x.cols() {
        let mut col = x.col(j);
        standardize_or_zero(&mut col);
        for (i, v) in col.into_iter().enumerate() {
            x.set(i, j, v);
        }
    }

    let ds = PotentialDataset {
        x,
        y0,
        y1,
        partition: FeaturePartition::default(),
        feature_names: selected
            .iter()
            .map(|&j| cohort.col_names[j].clone())
            .collect(),
        unit_ids,
        toy: None,
    };
    ds.validate()?;
    Ok(ds)
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    schema: u32,
    provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    toy: Option<ToyKind>,
    feature_names: Vec<String>,
    partition: FeaturePartition,
}

/// Writes a dataset bundle: `X.csv` (id + features), `Y.csv`
/// (`id,Y0,Y1`) and `meta.json`.
pub fn save_dataset(ds: &PotentialDataset, dir: &Path, provenance: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::FileWrite {
        path: dir.to_path_buf(),
        source: e,
    })?;

    let write = |name: &str, content: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| Error::FileWrite { path, source: e })
    };

    let mut xcsv = String::from("id");
    for f in &ds.feature_names {
        xcsv.push(',');
        xcsv.push_str(f);
    }
    xcsv.push('\n');
    for i in 0..ds.n() {
        xcsv.push_str(&ds.unit_ids[i]);
        for v in ds.x.row(i) {
            xcsv.push(',');
            xcsv.push_str(&format!("{v}"));
        }
        xcsv.push('\n');
    }
    write("X.csv", xcsv)?;

    let mut ycsv = String::from("id,Y0,Y1\n");
    for i in 0..ds.n() {
        ycsv.push_str(&format!("{},{},{}\n", ds.unit_ids[i], ds.y0[i], ds.y1[i]));
    }
    write("Y.csv", ycsv)?;

    let meta = DatasetMeta {
        schema: 1,
        provenance: provenance.to_string(),
        toy: ds.toy,
        feature_names: ds.feature_names.clone(),
        partition: ds.partition.clone(),
    };
    write("meta.json", serde_json::to_string_pretty(&meta)?)
}

/// Reads a dataset bundle written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<PotentialDataset> {
    let x_load = load_csv(&dir.join("X.csv"))?;
    let y_load = load_csv(&dir.join("Y.csv"))?;
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(&meta_path).map_err(|e| {
        Error::FileRead {
            path: meta_path.clone(),
            source: e,
        }
    })?)?;

    if x_load.table.row_ids != y_load.table.row_ids {
        return Err(Error::MalformedTable {
            path: dir.to_path_buf(),
            reason: "X.csv and Y.csv disagree on unit ids".into(),
        });
    }
    let y0_idx = y_load.table.col_index("Y0").ok_or_else(|| Error::MalformedTable {
        path: dir.join("Y.csv"),
        reason: "missing Y0 column".into(),
    })?;
    let y1_idx = y_load.table.col_index("Y1").ok_or_else(|| Error::MalformedTable {
        path: dir.join("Y.csv"),
        reason: "missing Y1 column".into(),
    })?;

    let ds = PotentialDataset {
        y0: y_load.table.values.col(y0_idx),
        y1: y_load.table.values.col(y1_idx),
        x: x_load.table.values,
        partition: meta.partition,
        feature_names: meta.feature_names,
        unit_ids: x_load.table.row_ids,
        toy: meta.toy,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::gen_toy;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_csv() {
        let f = write_tmp("id,a,b\nu1,1.0,2.0\nu2,3.5,4.5\nu3,-1,0\n");
        let load = load_csv(f.path()).unwrap();
        assert_eq!(load.table.row_ids, vec!["u1", "u2", "u3"]);
        assert_eq!(load.table.col_names, vec!["a", "b"]);
        assert_eq!(load.dropped_rows, 0);
        assert_eq!(load.table.values.get(1, 1), 4.5);
    }

    #[test]
    fn drops_and_counts_bad_rows() {
        let f = write_tmp("id,a,b\nu1,1.0,NA\nu2,3.5,4.5\nu3,2.0,1.0\n");
        let load = load_csv(f.path()).unwrap();
        assert_eq!(load.table.row_ids.len(), 2);
        assert_eq!(load.dropped_rows, 1);
    }

    #[test]
    fn rejects_duplicate_ids() {
        let f = write_tmp("id,a\nu1,1.0\nu1,2.0\n");
        assert!(matches!(
            load_csv(f.path()),
            Err(Error::MalformedTable { .. })
        ));
    }

    #[test]
    fn rejects_missing_file() {
        assert!(load_csv(Path::new("/nonexistent/x.csv")).is_err());
    }

    #[test]
    fn rejects_empty_table() {
        let f = write_tmp("id,a\n");
        assert!(load_csv(f.path()).is_err());
    }

    fn table(cols: &[(&str, Vec<f64>)]) -> NamedTable {
        let n = cols[0].1.len();
        let mut data = vec![0.0; n * cols.len()];
        for (j, (_, col)) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * cols.len() + j] = v;
            }
        }
        NamedTable {
            row_ids: (0..n).map(|i| format!("u{i}")).collect(),
            col_names: cols.iter().map(|(name, _)| name.to_string()).collect(),
            values: Matrix::new(n, cols.len(), data).unwrap(),
        }
    }

    #[test]
    fn exact_column_selected_first() {
        let t = table(&[
            ("c0", vec![5.0, 1.0, 3.0, 2.0]),
            ("c1", vec![0.0, 1.0, 0.5, 0.7]),
            ("c2", vec![9.0, 9.1, 8.7, 9.3]),
            ("c3", vec![1.0, 2.0, 3.0, 4.0]),
        ]);
        let target = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(select_top_correlated(&t, &target, 1).unwrap(), vec![3]);
    }

    #[test]
    fn ties_break_to_lower_index() {
        let t = table(&[
            ("dup_a", vec![1.0, 2.0, 3.0]),
            ("dup_b", vec![1.0, 2.0, 3.0]),
        ]);
        let target = vec![2.0, 4.0, 6.0];
        assert_eq!(select_top_correlated(&t, &target, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn exhaustive_selection_matches_bruteforce_ranking() {
        let mut draws = crate::numerics::RngStream::root(31).draws();
        let n = 60;
        let d = 8;
        let cols: Vec<(String, Vec<f64>)> = (0..d)
            .map(|j| {
                (
                    format!("g{j}"),
                    (0..n).map(|_| draws.normal()).collect::<Vec<f64>>(),
                )
            })
            .collect();
        let named: Vec<(&str, Vec<f64>)> = cols
            .iter()
            .map(|(name, v)| (name.as_str(), v.clone()))
            .collect();
        let t = table(&named);
        let target: Vec<f64> = (0..n)
            .map(|i| cols[2].1[i] * 2.0 + 0.3 * cols[5].1[i])
            .collect();

        let got = select_top_correlated(&t, &target, d).unwrap();
        // brute-force oracle: rank all columns by |r| descending
        let mut oracle: Vec<(usize, f64)> = (0..d)
            .map(|j| (j, pearson_abs(&t.values.col(j), &target)))
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let oracle_idx: Vec<usize> = oracle.into_iter().map(|(j, _)| j).collect();
        assert_eq!(got, oracle_idx);
        assert_eq!(got[0], 2);
    }

    #[test]
    fn constant_target_rejected() {
        let t = table(&[("a", vec![1.0, 2.0, 3.0])]);
        assert!(select_top_correlated(&t, &[1.0, 1.0, 1.0], 1).is_err());
    }

    #[test]
    fn empirical_dataset_uses_id_intersection() {
        let cov = NamedTable {
            row_ids: vec!["a".into(), "b".into(), "c".into()],
            col_names: vec!["g1".into(), "g2".into()],
            values: Matrix::from_rows(&[
                vec![1.0, 0.0],
                vec![2.0, 1.0],
                vec![3.0, -1.0],
            ])
            .unwrap(),
        };
        let resp = NamedTable {
            row_ids: vec!["b".into(), "c".into(), "d".into()],
            col_names: vec!["p0".into(), "p1".into()],
            values: Matrix::from_rows(&[
                vec![0.5, 0.6],
                vec![0.7, 0.2],
                vec![0.9, 0.9],
            ])
            .unwrap(),
        };
        let ds = build_empirical_dataset(&cov, &resp, "p0", "p1", 2, false).unwrap();
        assert_eq!(ds.unit_ids, vec!["b", "c"]);
        assert_eq!(ds.y0, vec![0.5, 0.7]);
        assert_eq!(ds.y1, vec![0.6, 0.2]);
        assert!(ds.partition.is_empty());
    }

    #[test]
    fn empirical_dataset_rejects_oversized_k() {
        let cov = NamedTable {
            row_ids: vec!["a".into(), "b".into()],
            col_names: vec!["g1".into()],
            values: Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap(),
        };
        let resp = NamedTable {
            row_ids: vec!["a".into(), "b".into()],
            col_names: vec!["p0".into(), "p1".into()],
            values: Matrix::from_rows(&[vec![0.1, 0.4], vec![0.3, 0.2]]).unwrap(),
        };
        assert!(build_empirical_dataset(&cov, &resp, "p0", "p1", 5, false).is_err());
        assert!(build_empirical_dataset(&cov, &resp, "missing", "p1", 1, false).is_err());
    }

    #[test]
    fn bundle_round_trip_is_exact() {
        let ds = gen_toy(crate::dgp::ToyKind::Toy3, 40, 11, 0.02).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path(), "toy3").unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.unit_ids, ds.unit_ids);
        assert_eq!(back.feature_names, ds.feature_names);
        assert_eq!(back.x.data(), ds.x.data());
        assert_eq!(back.y0, ds.y0);
        assert_eq!(back.y1, ds.y1);
        assert_eq!(back.toy, ds.toy);
    }
}
