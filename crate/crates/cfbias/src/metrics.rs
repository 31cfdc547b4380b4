//! Evaluation metrics: treatment-effect precision (PEHE), factual and
//! counterfactual outcome RMSE, assignment precision, and the policy a
//! fitted model implies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::CateModel;
use crate::numerics::Matrix;

/// Root mean squared error between predicted and true treatment effects.
pub fn pehe(tau_hat: &[f64], tau: &[f64]) -> Result<f64> {
    if tau_hat.len() != tau.len() {
        return Err(Error::DimensionMismatch(
            "effect vectors differ in length".into(),
        ));
    }
    if tau.is_empty() {
        return Err(Error::DegenerateInput("pehe needs at least 1 unit".into()));
    }
    let mse = tau_hat
        .iter()
        .zip(tau)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / tau.len() as f64;
    Ok(mse.sqrt())
}

fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    debug_assert_eq!(pred.len(), truth.len());
    if pred.is_empty() {
        return f64::NAN;
    }
    (pred
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / pred.len() as f64)
        .sqrt()
}

/// RMSE of the assigned arm's predicted outcome against the factual outcome.
/// `None` when the model does not predict potential outcomes.
pub fn rmse_factual(
    x: &Matrix,
    a: &[u8],
    yf: &[f64],
    model: &dyn CateModel,
) -> Result<Option<f64>> {
    let Some((mu0, mu1)) = outcome_predictions(x, model)? else {
        return Ok(None);
    };
    let pred: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(i, &ai)| if ai == 1 { mu1[i] } else { mu0[i] })
        .collect();
    Ok(Some(rmse(&pred, yf)))
}

/// Counterfactual RMSE plus the per-arm variants restricted to units whose
/// counterfactual arm is 0 (currently treated) or 1 (currently control).
/// `None` when the model does not predict potential outcomes.
pub struct CounterfactualRmse {
    pub overall: f64,
    pub arm0: Option<f64>,
    pub arm1: Option<f64>,
}

pub fn rmse_counterfactual(
    x: &Matrix,
    a: &[u8],
    ycf: &[f64],
    model: &dyn CateModel,
) -> Result<Option<CounterfactualRmse>> {
    let Some((mu0, mu1)) = outcome_predictions(x, model)? else {
        return Ok(None);
    };
    let mut pred = Vec::with_capacity(a.len());
    let mut pred0 = Vec::new();
    let mut truth0 = Vec::new();
    let mut pred1 = Vec::new();
    let mut truth1 = Vec::new();
    for (i, &ai) in a.iter().enumerate() {
        // the counterfactual arm is the one not assigned
        if ai == 1 {
            pred.push(mu0[i]);
            pred0.push(mu0[i]);
            truth0.push(ycf[i]);
        } else {
            pred.push(mu1[i]);
            pred1.push(mu1[i]);
            truth1.push(ycf[i]);
        }
    }
    Ok(Some(CounterfactualRmse {
        overall: rmse(&pred, ycf),
        arm0: (!pred0.is_empty()).then(|| rmse(&pred0, &truth0)),
        arm1: (!pred1.is_empty()).then(|| rmse(&pred1, &truth1)),
    }))
}

fn outcome_predictions(
    x: &Matrix,
    model: &dyn CateModel,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    if !model.capabilities().outcomes {
        return Ok(None);
    }
    let mu0 = model.predict_mu0(x)?;
    let mu1 = model.predict_mu1(x)?;
    Ok(Some((mu0, mu1)))
}

/// Fraction of units whose chosen arm has the weakly greater potential
/// outcome; ties count as correct.
pub fn precision_assignment(a_chosen: &[u8], y0: &[f64], y1: &[f64]) -> Result<f64> {
    if a_chosen.len() != y0.len() || a_chosen.len() != y1.len() {
        return Err(Error::DimensionMismatch(
            "assignment and outcome lengths differ".into(),
        ));
    }
    if a_chosen.is_empty() {
        return Err(Error::DegenerateInput(
            "precision needs at least 1 unit".into(),
        ));
    }
    let correct = a_chosen
        .iter()
        .zip(y0.iter().zip(y1))
        .filter(|(&a, (&u0, &u1))| {
            let chosen = if a == 1 { u1 } else { u0 };
            let other = if a == 1 { u0 } else { u1 };
            chosen >= other
        })
        .count();
    Ok(correct as f64 / a_chosen.len() as f64)
}

/// The deterministic policy a fitted model implies: treat when the
/// predicted effect is strictly positive, or — for propensity-only models —
/// when the predicted propensity is at least one half.
pub fn model_policy(model: &dyn CateModel, x: &Matrix) -> Result<Vec<u8>> {
    let caps = model.capabilities();
    if caps.cate {
        let tau = model.predict_cate(x)?;
        Ok(tau.iter().map(|&t| u8::from(t > 0.0)).collect())
    } else if caps.propensity {
        let p = model.predict_propensity(x)?;
        Ok(p.iter().map(|&v| u8::from(v >= 0.5)).collect())
    } else {
        Err(Error::MissingCapability(
            "model predicts neither effects nor propensities".into(),
        ))
    }
}

/// One long-format result record for a single
/// (dataset, policy, beta, seed, fold, learner) evaluation. Fields are
/// absent exactly where the learner lacks the capability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub dataset: String,
    pub policy_source: String,
    pub beta: f64,
    pub seed: u64,
    pub fold: usize,
    pub learner: String,
    pub pehe: Option<f64>,
    pub rmse_f: Option<f64>,
    pub rmse_cf: Option<f64>,
    pub rmse_y0_cf: Option<f64>,
    pub rmse_y1_cf: Option<f64>,
    pub prec_ass_pi: Option<f64>,
    pub prec_ass_model: Option<f64>,
    pub attr_pred: Option<f64>,
    pub attr_prog: Option<f64>,
    pub status: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pehe_cases() {
        assert_eq!(pehe(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let shifted = pehe(&[1.5, 2.5], &[1.0, 2.0]).unwrap();
        assert!((shifted - 0.5).abs() < 1e-12);
        let hand = pehe(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((hand - 2.160_247).abs() < 1e-6);
        assert!(pehe(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pehe_permutation_invariant() {
        let tau_hat = [0.3, -0.2, 1.5, 0.0];
        let tau = [0.1, 0.2, 1.0, -0.4];
        let a = pehe(&tau_hat, &tau).unwrap();
        let perm = [2usize, 0, 3, 1];
        let th: Vec<f64> = perm.iter().map(|&i| tau_hat[i]).collect();
        let tt: Vec<f64> = perm.iter().map(|&i| tau[i]).collect();
        assert!((pehe(&th, &tt).unwrap() - a).abs() < 1e-15);
    }

    #[test]
    fn precision_cases() {
        // always pick the argmax outcome
        let y0 = [1.0, 0.0, 2.0];
        let y1 = [0.0, 1.0, 1.0];
        let best: Vec<u8> = y0
            .iter()
            .zip(&y1)
            .map(|(u0, u1)| u8::from(u1 > u0))
            .collect();
        assert_eq!(precision_assignment(&best, &y0, &y1).unwrap(), 1.0);

        let a = [0u8, 1, 1];
        let p = precision_assignment(&a, &y0, &y1).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-12);

        // ties all correct
        let same = [0.5, 0.5];
        assert_eq!(
            precision_assignment(&[0, 1], &same, &same).unwrap(),
            1.0
        );
    }

    #[test]
    fn precision_complement_inequality() {
        let y0 = [1.0, 3.0, 0.0, 2.0, 2.0];
        let y1 = [2.0, 1.0, 1.0, 0.0, 2.0];
        let a = [0u8, 0, 1, 1, 0];
        let flip: Vec<u8> = a.iter().map(|&v| 1 - v).collect();
        let p = precision_assignment(&a, &y0, &y1).unwrap();
        let q = precision_assignment(&flip, &y0, &y1).unwrap();
        assert!(p + q >= 1.0 - 1e-12);
    }
}
