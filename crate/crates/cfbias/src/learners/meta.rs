//! S-, T- and X-learner constructions over the linear base regressors.

use crate::error::{Error, Result};
use crate::learners::{
    fit_logistic, BaseRegressorSpec, CateModel, Capabilities, ColumnScaler, LinearForm,
    LinearForms, LinearModel,
};
use crate::numerics::Matrix;

fn split_arms(a: &[u8]) -> (Vec<usize>, Vec<usize>) {
    let mut controls = Vec::new();
    let mut treated = Vec::new();
    for (i, &ai) in a.iter().enumerate() {
        if ai == 1 {
            treated.push(i);
        } else {
            controls.push(i);
        }
    }
    (controls, treated)
}

fn subset(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Single pooled regression over `[X, A]`; the treatment indicator is one
/// more covariate.
pub struct SLearnerModel {
    scaler: ColumnScaler,
    model: LinearModel,
}

pub fn fit_slearner(
    x: &Matrix,
    a: &[u8],
    yf: &[f64],
    base: &BaseRegressorSpec,
) -> Result<SLearnerModel> {
    let (controls, treated) = split_arms(a);
    if controls.is_empty() || treated.is_empty() {
        return Err(Error::DegenerateInput(
            "s-learner needs both arms in the training data".into(),
        ));
    }
    let scaler = ColumnScaler::fit(x);
    let a_col: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let design = scaler.transform(x).with_column(&a_col);
    let model = base.fit(&design, yf)?;
    Ok(SLearnerModel { scaler, model })
}

impl SLearnerModel {
    fn predict_arm(&self, x: &Matrix, arm: f64) -> Vec<f64> {
        let design = self.scaler.transform(x).with_column(&vec![arm; x.rows()]);
        self.model.predict(&design)
    }

    fn covariate_form(&self) -> LinearForm {
        let d = self.model.weights.len() - 1;
        self.scaler.compose(&LinearForm {
            weights: self.model.weights[..d].to_vec(),
            intercept: self.model.intercept,
        })
    }
}

impl CateModel for SLearnerModel {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            outcomes: true,
            cate: true,
            propensity: false,
        }
    }

    fn predict_mu0(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.predict_arm(x, 0.0))
    }

    fn predict_mu1(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.predict_arm(x, 1.0))
    }

    fn linear_forms(&self) -> Option<LinearForms> {
        let d = self.model.weights.len() - 1;
        let a_coef = self.model.weights[d];
        Some(LinearForms {
            mu0: Some(self.covariate_form()),
            // without interactions the effect estimate is the constant
            // treatment coefficient
            cate: Some(LinearForm {
                weights: vec![0.0; d],
                intercept: a_coef,
            }),
        })
    }
}

/// Independent per-arm regressions.
pub struct TLearnerModel {
    scaler: ColumnScaler,
    model0: LinearModel,
    model1: LinearModel,
}

pub fn fit_tlearner(
    x: &Matrix,
    a: &[u8],
    yf: &[f64],
    base: &BaseRegressorSpec,
) -> Result<TLearnerModel> {
    let (controls, treated) = split_arms(a);
    if controls.len() < 2 || treated.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "t-learner needs >= 2 samples per arm, got {} controls / {} treated",
            controls.len(),
            treated.len()
        )));
    }
    let scaler = ColumnScaler::fit(x);
    let xs = scaler.transform(x);
    let model0 = base.fit(&xs.select_rows(&controls), &subset(yf, &controls))?;
    let model1 = base.fit(&xs.select_rows(&treated), &subset(yf, &treated))?;
    Ok(TLearnerModel {
        scaler,
        model0,
        model1,
    })
}

impl TLearnerModel {
    fn form(&self, model: &LinearModel) -> LinearForm {
        self.scaler.compose(&LinearForm {
            weights: model.weights.clone(),
            intercept: model.intercept,
        })
    }
}

impl CateModel for TLearnerModel {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            outcomes: true,
            cate: true,
            propensity: false,
        }
    }

    fn predict_mu0(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.model0.predict(&self.scaler.transform(x)))
    }

    fn predict_mu1(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.model1.predict(&self.scaler.transform(x)))
    }

    fn linear_forms(&self) -> Option<LinearForms> {
        let f0 = self.form(&self.model0);
        let f1 = self.form(&self.model1);
        let cate = LinearForm {
            weights: f1
                .weights
                .iter()
                .zip(&f0.weights)
                .map(|(a, b)| a - b)
                .collect(),
            intercept: f1.intercept - f0.intercept,
        };
        Some(LinearForms {
            mu0: Some(f0),
            cate: Some(cate),
        })
    }
}

/// How the X-learner combines its per-arm effect estimates.
#[derive(Debug, Clone, Copy)]
pub enum GWeight {
    /// Logistic-regression propensity estimate (the default).
    Propensity,
    /// Fixed constant weight, mainly for tests.
    Fixed(f64),
}

enum GModel {
    Logistic(crate::learners::LogisticModel),
    Fixed(f64),
}

/// Two-stage effect learner: per-arm outcome fits, imputed per-unit effects,
/// per-arm effect regressions, propensity-weighted combination. Exposes the
/// effect estimate only.
pub struct XLearnerModel {
    scaler: ColumnScaler,
    tau0: LinearModel,
    tau1: LinearModel,
    g: GModel,
}

pub fn fit_xlearner(
    x: &Matrix,
    a: &[u8],
    yf: &[f64],
    base: &BaseRegressorSpec,
) -> Result<XLearnerModel> {
    fit_xlearner_weighted(x, a, yf, base, GWeight::Propensity)
}

pub fn fit_xlearner_weighted(
    x: &Matrix,
    a: &[u8],
    yf: &[f64],
    base: &BaseRegressorSpec,
    g: GWeight,
) -> Result<XLearnerModel> {
    let (controls, treated) = split_arms(a);
    if controls.len() < 2 || treated.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "x-learner needs >= 2 samples per arm, got {} controls / {} treated",
            controls.len(),
            treated.len()
        )));
    }
    let scaler = ColumnScaler::fit(x);
    let xs = scaler.transform(x);
    let x0 = xs.select_rows(&controls);
    let x1 = xs.select_rows(&treated);
    let y0 = subset(yf, &controls);
    let y1 = subset(yf, &treated);

    // stage 1: per-arm outcome models
    let mu0 = base.fit(&x0, &y0)?;
    let mu1 = base.fit(&x1, &y1)?;

    // stage 2: imputed effects, D1 on the treated, D0 on the controls
    let d1: Vec<f64> = mu0
        .predict(&x1)
        .iter()
        .zip(&y1)
        .map(|(m, y)| y - m)
        .collect();
    let d0: Vec<f64> = mu1
        .predict(&x0)
        .iter()
        .zip(&y0)
        .map(|(m, y)| m - y)
        .collect();
    let tau1 = base.fit(&x1, &d1)?;
    let tau0 = base.fit(&x0, &d0)?;

    let g = match g {
        GWeight::Fixed(v) => GModel::Fixed(v),
        GWeight::Propensity => GModel::Logistic(fit_logistic(&xs, a, 1e-4, 25)?),
    };

    Ok(XLearnerModel {
        scaler,
        tau0,
        tau1,
        g,
    })
}

impl CateModel for XLearnerModel {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            outcomes: false,
            cate: true,
            propensity: false,
        }
    }

    fn predict_cate(&self, x: &Matrix) -> Result<Vec<f64>> {
        let xs = self.scaler.transform(x);
        let t0 = self.tau0.predict(&xs);
        let t1 = self.tau1.predict(&xs);
        let g: Vec<f64> = match &self.g {
            GModel::Fixed(v) => vec![*v; x.rows()],
            GModel::Logistic(m) => m.predict_proba(&xs),
        };
        Ok((0..x.rows())
            .map(|i| g[i] * t0[i] + (1.0 - g[i]) * t1[i])
            .collect())
    }
}
