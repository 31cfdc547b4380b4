//! Feature attribution and the biomarker-identification scores: exact
//! additive attributions for linear targets, a seeded permutation-sampling
//! Shapley estimator for everything else, and the normalized attribution
//! mass on declared feature sets.

use rayon::prelude::*;

use crate::dgp::FeaturePartition;
use crate::error::{Error, Result};
use crate::learners::CateModel;
use crate::numerics::{mix_seed, Matrix, RngStream};

/// Per-unit, per-feature attribution values for one prediction target.
#[derive(Debug, Clone)]
pub struct AttributionMatrix {
    pub values: Matrix,
}

/// Exact additive attribution of a linear model: the contribution of
/// feature j at x is `w_j (x_j - background_mean_j)`, so attributions plus
/// the base value recover the prediction exactly.
pub fn linear_shapley(
    weights: &[f64],
    _intercept: f64,
    x: &Matrix,
    background_mean: &[f64],
) -> Result<AttributionMatrix> {
    if weights.len() != x.cols() || background_mean.len() != x.cols() {
        return Err(Error::DimensionMismatch(
            "weights/background length must match feature count".into(),
        ));
    }
    let mut values = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            values.set(i, j, weights[j] * (x.get(i, j) - background_mean[j]));
        }
    }
    Ok(AttributionMatrix { values })
}

/// Permutation-sampling Shapley estimate for one unit: averages marginal
/// contributions over `budget` random feature orderings, imputing absent
/// features from a single background row drawn per permutation.
pub fn sampled_shapley(
    f: &(dyn Fn(&Matrix) -> Result<Vec<f64>> + Sync),
    x: &[f64],
    background: &Matrix,
    budget: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be >= 1".into()));
    }
    if background.rows() == 0 {
        return Err(Error::DegenerateInput("empty background".into()));
    }
    if background.cols() != x.len() {
        return Err(Error::DimensionMismatch(
            "background width must match unit dimension".into(),
        ));
    }
    let d = x.len();
    let mut totals = vec![0.0; d];
    let mut draws = RngStream::root(seed).draws();
    let mut perm: Vec<usize> = (0..d).collect();

    for _ in 0..budget {
        let bg_row = background.row(draws.index(background.rows()));
        draws.shuffle(&mut perm);

        // batch the d+1 prefix states of this permutation into one call
        let mut states = Matrix::zeros(d + 1, d);
        let mut cur: Vec<f64> = bg_row.to_vec();
        for (j, v) in cur.iter().enumerate() {
            states.set(0, j, *v);
        }
        for (step, &feat) in perm.iter().enumerate() {
            cur[feat] = x[feat];
            for (j, v) in cur.iter().enumerate() {
                states.set(step + 1, j, *v);
            }
        }
        let outs = f(&states)?;
        if outs.len() != d + 1 {
            return Err(Error::DimensionMismatch(
                "attribution target returned wrong batch size".into(),
            ));
        }
        for (step, &feat) in perm.iter().enumerate() {
            totals[feat] += outs[step + 1] - outs[step];
        }
    }
    Ok(totals.into_iter().map(|t| t / budget as f64).collect())
}

/// Mean over units of the fraction of absolute attribution mass that falls
/// on the given feature set. Units with no attribution mass at all are
/// skipped; returns `None` when every unit is degenerate.
pub fn attr_score(attr: &AttributionMatrix, index_set: &[usize]) -> Result<Option<f64>> {
    if index_set.is_empty() {
        return Err(Error::InvalidArgument(
            "attribution index set is empty".into(),
        ));
    }
    let d = attr.values.cols();
    for &j in index_set {
        if j >= d {
            return Err(Error::IndexOutOfRange {
                what: "feature",
                index: j,
                size: d,
            });
        }
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..attr.values.rows() {
        let row = attr.values.row(i);
        let mass: f64 = row.iter().map(|v| v.abs()).sum();
        if mass == 0.0 {
            continue;
        }
        let on_set: f64 = index_set.iter().map(|&j| row[j].abs()).sum();
        total += on_set / mass;
        used += 1;
    }
    Ok((used > 0).then(|| total / used as f64))
}

/// Budget defaults for biomarker scoring.
pub const DEFAULT_SHAPLEY_BUDGET: usize = 64;
pub const MAX_ATTRIBUTED_UNITS: usize = 200;

/// Biomarker identification scores: attribution of the effect estimate
/// against the predictive set and of the control-outcome estimate against
/// the prognostic set. Linear targets use the exact closed form; others use
/// the sampling estimator with per-unit seed substreams.
pub fn biomarker_scores(
    model: &dyn CateModel,
    x_test: &Matrix,
    background: &Matrix,
    partition: &FeaturePartition,
    budget: usize,
    seed: u64,
) -> Result<(Option<f64>, Option<f64>)> {
    if partition.prognostic.is_empty() && partition.predictive.is_empty() {
        return Ok((None, None));
    }
    let caps = model.capabilities();
    let n_units = x_test.rows().min(MAX_ATTRIBUTED_UNITS);
    let x_eval = x_test.select_rows(&(0..n_units).collect::<Vec<_>>());
    let bg_mean = background.col_means();
    let forms = model.linear_forms();

    let mut attr_pred = None;
    if !partition.predictive.is_empty() {
        let target: Option<Box<dyn Fn(&Matrix) -> Result<Vec<f64>> + Sync + '_>> = if caps.cate {
            Some(Box::new(move |m: &Matrix| model.predict_cate(m)))
        } else if caps.propensity {
            Some(Box::new(move |m: &Matrix| model.predict_propensity(m)))
        } else {
            None
        };
        if let Some(target) = target {
            let linear_cate = forms.as_ref().and_then(|f| f.cate.as_ref());
            let attr = match (caps.cate, linear_cate) {
                (true, Some(form)) => {
                    linear_shapley(&form.weights, form.intercept, &x_eval, &bg_mean)?
                }
                _ => sampled_attr(&*target, &x_eval, background, budget, seed)?,
            };
            attr_pred = attr_score(&attr, &partition.predictive)?;
        }
    }

    let mut attr_prog = None;
    if !partition.prognostic.is_empty() {
        let target: Option<Box<dyn Fn(&Matrix) -> Result<Vec<f64>> + Sync + '_>> =
            if caps.outcomes {
                Some(Box::new(move |m: &Matrix| model.predict_mu0(m)))
            } else if caps.propensity {
                Some(Box::new(move |m: &Matrix| model.predict_propensity(m)))
            } else {
                None
            };
        if let Some(target) = target {
            let linear_mu0 = forms.as_ref().and_then(|f| f.mu0.as_ref());
            let attr = match (caps.outcomes, linear_mu0) {
                (true, Some(form)) => {
                    linear_shapley(&form.weights, form.intercept, &x_eval, &bg_mean)?
                }
                _ => sampled_attr(&*target, &x_eval, background, budget, seed ^ 0x5eed)?,
            };
            attr_prog = attr_score(&attr, &partition.prognostic)?;
        }
    }

    Ok((attr_pred, attr_prog))
}

fn sampled_attr(
    f: &(dyn Fn(&Matrix) -> Result<Vec<f64>> + Sync),
    x_eval: &Matrix,
    background: &Matrix,
    budget: usize,
    seed: u64,
) -> Result<AttributionMatrix> {
    let rows: Vec<Vec<f64>> = (0..x_eval.rows())
        .into_par_iter()
        .map(|i| {
            sampled_shapley(
                f,
                x_eval.row(i),
                background,
                budget,
                mix_seed(seed, i as u64),
            )
        })
        .collect::<Result<_>>()?;
    Ok(AttributionMatrix {
        values: Matrix::from_rows(&rows)?,
    })
}

/// One row of the ranked-biomarker export.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BiomarkerRow {
    pub feature_name: String,
    pub mean_abs_attribution: f64,
    pub in_pred_set: bool,
    pub in_prog_set: bool,
}

/// Ranks features by mean absolute attribution, carrying the ground-truth
/// set memberships for downstream comparison.
pub fn ranked_biomarkers(
    attr: &AttributionMatrix,
    feature_names: &[String],
    partition: &FeaturePartition,
) -> Vec<BiomarkerRow> {
    let d = attr.values.cols();
    let n = attr.values.rows().max(1) as f64;
    let mut rows: Vec<BiomarkerRow> = (0..d)
        .map(|j| {
            let mass: f64 = (0..attr.values.rows())
                .map(|i| attr.values.get(i, j).abs())
                .sum();
            BiomarkerRow {
                feature_name: feature_names
                    .get(j)
                    .cloned()
                    .unwrap_or_else(|| format!("f{j}")),
                mean_abs_attribution: mass / n,
                in_pred_set: partition.predictive.contains(&j),
                in_prog_set: partition.prognostic.contains(&j),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mean_abs_attribution
            .partial_cmp(&a.mean_abs_attribution)
            .unwrap()
            .then(a.feature_name.cmp(&b.feature_name))
    });
    rows
}
