//! The CATE learner zoo: linear base regressors, S/T/X meta-learners, and
//! the shared-representation network family (TARNet, CFRNet with a linear
//! MMD balancing term, DragonNet with a propensity head, and the
//! propensity-only ActionNet).

mod linear;
mod meta;
mod net;

pub use linear::{
    fit_lasso, fit_lasso_with, fit_logistic, fit_ols, fit_ridge, fit_ridge_raw, LinearModel,
    LogisticModel,
};
pub use meta::{fit_slearner, fit_tlearner, fit_xlearner, fit_xlearner_weighted, GWeight};
pub use net::{
    fit_actionnet, fit_tarnet_family, loss_and_grad, mmd_linear, ActionNetModel, LossSpec,
    NetParams, NetSpec, TarFamilyModel,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// What a fitted model can predict.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Capabilities {
    pub outcomes: bool,
    pub cate: bool,
    pub propensity: bool,
}

/// Raw-space linear coefficients of a prediction target.
#[derive(Debug, Clone)]
pub struct LinearForm {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearForm {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.times_vec(&self.weights)
            .into_iter()
            .map(|v| v + self.intercept)
            .collect()
    }
}

/// Linear coefficient views for models whose targets are exactly linear in
/// the raw covariates; lets attribution use the closed-form values.
#[derive(Debug, Clone, Default)]
pub struct LinearForms {
    pub mu0: Option<LinearForm>,
    pub cate: Option<LinearForm>,
}

/// A fitted counterfactual model. Prediction methods take raw (unscaled)
/// covariates; any internal standardization travels with the model.
pub trait CateModel: Send + Sync {
    fn capabilities(&self) -> Capabilities;

    fn predict_mu0(&self, _x: &Matrix) -> Result<Vec<f64>> {
        Err(Error::MissingCapability(
            "model does not predict potential outcomes".into(),
        ))
    }

    fn predict_mu1(&self, _x: &Matrix) -> Result<Vec<f64>> {
        Err(Error::MissingCapability(
            "model does not predict potential outcomes".into(),
        ))
    }

    fn predict_cate(&self, x: &Matrix) -> Result<Vec<f64>> {
        let mu0 = self.predict_mu0(x)?;
        let mu1 = self.predict_mu1(x)?;
        Ok(mu1.iter().zip(&mu0).map(|(a, b)| a - b).collect())
    }

    fn predict_propensity(&self, _x: &Matrix) -> Result<Vec<f64>> {
        Err(Error::MissingCapability(
            "model does not predict propensities".into(),
        ))
    }

    /// Linear coefficient views when available.
    fn linear_forms(&self) -> Option<LinearForms> {
        None
    }
}

/// Base regressor for the meta-learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseRegressorSpec {
    pub kind: BaseKind,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Ols,
    Ridge,
    Lasso,
}

impl BaseRegressorSpec {
    pub fn ols() -> Self {
        Self {
            kind: BaseKind::Ols,
            lambda: 0.0,
        }
    }

    pub fn ridge(lambda: f64) -> Self {
        Self {
            kind: BaseKind::Ridge,
            lambda,
        }
    }

    pub fn lasso(lambda: f64) -> Self {
        Self {
            kind: BaseKind::Lasso,
            lambda,
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[f64]) -> Result<LinearModel> {
        match self.kind {
            BaseKind::Ols => fit_ridge(x, y, 0.0),
            BaseKind::Ridge => fit_ridge(x, y, self.lambda),
            BaseKind::Lasso => fit_lasso(x, y, self.lambda),
        }
    }
}

/// Per-column standardization fitted on training data and replayed on any
/// later input, so test folds reuse the training statistics.
#[derive(Debug, Clone)]
pub struct ColumnScaler {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl ColumnScaler {
    pub fn fit(x: &Matrix) -> Self {
        let means = x.col_means();
        let sds = x
            .col_stds()
            .into_iter()
            .map(|s| if s > 0.0 { s } else { 1.0 })
            .collect();
        Self { means, sds }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                out.set(i, j, (out.get(i, j) - self.means[j]) / self.sds[j]);
            }
        }
        out
    }

    /// Maps scaled-space linear coefficients back to raw space.
    pub fn compose(&self, scaled: &LinearForm) -> LinearForm {
        let weights: Vec<f64> = scaled
            .weights
            .iter()
            .zip(&self.sds)
            .map(|(w, s)| w / s)
            .collect();
        let intercept = scaled.intercept
            - weights
                .iter()
                .zip(&self.means)
                .map(|(w, m)| w * m)
                .sum::<f64>();
        LinearForm { weights, intercept }
    }
}

const DEFAULT_RIDGE_LAMBDA: f64 = 1e-3;
const DEFAULT_LASSO_LAMBDA: f64 = 1e-3;

/// A named entry of the learner grid.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerKind {
    SLearner(BaseRegressorSpec),
    TLearner(BaseRegressorSpec),
    XLearner(BaseRegressorSpec),
    TarFamily { lambda_ipm: f64, lambda_prop: f64 },
    ActionNet,
}

/// Parses a learner-grid name such as `tlearner-lasso`, `cfrnet-0.001` or
/// `dragonnet-2`.
pub fn parse_learner(name: &str) -> Result<LearnerKind> {
    let lower = name.to_ascii_lowercase();
    if lower == "tarnet" {
        return Ok(LearnerKind::TarFamily {
            lambda_ipm: 0.0,
            lambda_prop: 0.0,
        });
    }
    if lower == "actionnet" {
        return Ok(LearnerKind::ActionNet);
    }
    if let Some(rest) = lower.strip_prefix("cfrnet-") {
        let lambda: f64 = rest
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad cfrnet penalty {rest:?}")))?;
        if lambda < 0.0 {
            return Err(Error::InvalidArgument("cfrnet penalty must be >= 0".into()));
        }
        return Ok(LearnerKind::TarFamily {
            lambda_ipm: lambda,
            lambda_prop: 0.0,
        });
    }
    if let Some(rest) = lower.strip_prefix("dragonnet-") {
        let lambda: f64 = rest
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad dragonnet penalty {rest:?}")))?;
        if lambda < 0.0 {
            return Err(Error::InvalidArgument(
                "dragonnet penalty must be >= 0".into(),
            ));
        }
        return Ok(LearnerKind::TarFamily {
            lambda_ipm: 0.0,
            lambda_prop: lambda,
        });
    }

    let (meta, base) = lower
        .split_once('-')
        .ok_or_else(|| Error::InvalidArgument(format!("unknown learner {name:?}")))?;
    let base = match base {
        "ols" => BaseRegressorSpec::ols(),
        "ridge" => BaseRegressorSpec::ridge(DEFAULT_RIDGE_LAMBDA),
        "lasso" => BaseRegressorSpec::lasso(DEFAULT_LASSO_LAMBDA),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown base regressor {other:?}"
            )))
        }
    };
    match meta {
        "slearner" => Ok(LearnerKind::SLearner(base)),
        "tlearner" => Ok(LearnerKind::TLearner(base)),
        "xlearner" => Ok(LearnerKind::XLearner(base)),
        other => Err(Error::InvalidArgument(format!(
            "unknown meta-learner {other:?}"
        ))),
    }
}

/// Fits a named learner on factual training data. `seed` drives network
/// initialization and batching; linear learners are deterministic and
/// ignore it.
pub fn fit_learner(
    kind: &LearnerKind,
    x: &Matrix,
    a: &[u8],
    yf: &[f64],
    seed: u64,
) -> Result<Box<dyn CateModel>> {
    match kind {
        LearnerKind::SLearner(base) => Ok(Box::new(fit_slearner(x, a, yf, base)?)),
        LearnerKind::TLearner(base) => Ok(Box::new(fit_tlearner(x, a, yf, base)?)),
        LearnerKind::XLearner(base) => Ok(Box::new(fit_xlearner(x, a, yf, base)?)),
        LearnerKind::TarFamily {
            lambda_ipm,
            lambda_prop,
        } => {
            let spec = NetSpec {
                lambda_ipm: *lambda_ipm,
                lambda_prop: *lambda_prop,
                seed,
                ..NetSpec::default()
            };
            Ok(Box::new(fit_tarnet_family(x, a, yf, &spec)?))
        }
        LearnerKind::ActionNet => {
            let spec = NetSpec {
                seed,
                ..NetSpec::default()
            };
            Ok(Box::new(fit_actionnet(x, a, &spec)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grid_names() {
        assert!(matches!(
            parse_learner("slearner-ridge").unwrap(),
            LearnerKind::SLearner(BaseRegressorSpec {
                kind: BaseKind::Ridge,
                ..
            })
        ));
        assert!(matches!(
            parse_learner("tlearner-lasso").unwrap(),
            LearnerKind::TLearner(BaseRegressorSpec {
                kind: BaseKind::Lasso,
                ..
            })
        ));
        assert_eq!(
            parse_learner("cfrnet-0.001").unwrap(),
            LearnerKind::TarFamily {
                lambda_ipm: 0.001,
                lambda_prop: 0.0
            }
        );
        assert_eq!(
            parse_learner("dragonnet-4").unwrap(),
            LearnerKind::TarFamily {
                lambda_ipm: 0.0,
                lambda_prop: 4.0
            }
        );
        assert_eq!(parse_learner("actionnet").unwrap(), LearnerKind::ActionNet);
        assert!(parse_learner("forest").is_err());
        assert!(parse_learner("tlearner-boost").is_err());
    }

    #[test]
    fn scaler_round_trips_linear_form() {
        let x = Matrix::from_rows(&[vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 60.0]]).unwrap();
        let scaler = ColumnScaler::fit(&x);
        let xs = scaler.transform(&x);
        let means = xs.col_means();
        assert!(means.iter().all(|m| m.abs() < 1e-12));

        let scaled_form = LinearForm {
            weights: vec![2.0, -1.0],
            intercept: 0.5,
        };
        let raw_form = scaler.compose(&scaled_form);
        let from_scaled = scaled_form.predict(&xs);
        let from_raw = raw_form.predict(&x);
        for (a, b) in from_scaled.iter().zip(&from_raw) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
