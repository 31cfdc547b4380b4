//! Assignment-score construction, the sigmoid bias-scale policy
//! `pi(x) = sigmoid(beta * z(x))`, and sampling of observational datasets.

use serde::{Deserialize, Serialize};

use crate::dgp::PotentialDataset;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, standardize, RngStream};

/// Where the raw assignment score comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicySource {
    /// Control potential outcome.
    Y0,
    /// Treated potential outcome.
    Y1,
    /// True treatment effect Y1 - Y0.
    Effect,
    /// Weighted combination of randomly chosen features, weights U[-1, 1].
    XRand,
    /// Weighted combination of predictive features, weights U[0, 1] drawn
    /// independently of the outcome weights.
    XPred,
    /// The toy mechanism's canonical score.
    ToyCanonical,
}

impl PolicySource {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "y0" => Ok(Self::Y0),
            "y1" => Ok(Self::Y1),
            "effect" => Ok(Self::Effect),
            "xrand" => Ok(Self::XRand),
            "xpred" => Ok(Self::XPred),
            "toycanonical" | "canonical" => Ok(Self::ToyCanonical),
            other => Err(Error::InvalidArgument(format!(
                "unknown policy source {other:?}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Y0 => "Y0",
            Self::Y1 => "Y1",
            Self::Effect => "Effect",
            Self::XRand => "XRand",
            Self::XPred => "XPred",
            Self::ToyCanonical => "ToyCanonical",
        }
    }
}

/// A fully specified observational assignment policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub source: PolicySource,
    pub beta: f64,
    /// Number of score features for XRand / XPred.
    #[serde(default = "default_m")]
    pub m: usize,
    pub seed: u64,
}

fn default_m() -> usize {
    20
}

impl PolicySpec {
    pub fn new(source: PolicySource, beta: f64, seed: u64) -> Self {
        Self {
            source,
            beta,
            m: default_m(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta {} must be >= 0",
                self.beta
            )));
        }
        if matches!(self.source, PolicySource::XRand | PolicySource::XPred) && self.m == 0 {
            return Err(Error::InvalidArgument(
                "m must be >= 1 for XRand/XPred".into(),
            ));
        }
        Ok(())
    }
}

/// A potential-outcome dataset together with one sampled assignment.
#[derive(Debug, Clone)]
pub struct ObservationalDataset {
    pub base: PotentialDataset,
    /// Standardized assignment score.
    pub z: Vec<f64>,
    /// True propensities sigmoid(beta * z).
    pub pi: Vec<f64>,
    /// Sampled assignments, one byte per unit (0 or 1).
    pub a: Vec<u8>,
    /// Factual outcome: the assigned arm's potential outcome.
    pub yf: Vec<f64>,
    /// Counterfactual outcome: the other arm's.
    pub ycf: Vec<f64>,
    pub policy: PolicySpec,
}

impl ObservationalDataset {
    pub fn n(&self) -> usize {
        self.base.n()
    }
}

/// Builds the standardized assignment score for a dataset under a policy
/// spec. The raw score is standardized so that the bias scale means the
/// same thing across score sources.
pub fn build_score(ds: &PotentialDataset, spec: &PolicySpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let raw = match spec.source {
        PolicySource::Y0 => ds.y0.clone(),
        PolicySource::Y1 => ds.y1.clone(),
        PolicySource::Effect => ds.y1.iter().zip(&ds.y0).map(|(a, b)| a - b).collect(),
        PolicySource::XRand => {
            let mut draws = RngStream::root(spec.seed).child(0).draws();
            let m = spec.m.min(ds.d());
            let cols = draws.sample_without_replacement(ds.d(), m);
            let weights: Vec<f64> = (0..m).map(|_| draws.uniform_in(-1.0, 1.0)).collect();
            weighted_columns(ds, &cols, &weights)
        }
        PolicySource::XPred => {
            let pred = &ds.partition.predictive;
            if pred.is_empty() {
                return Err(Error::DegenerateInput(
                    "XPred policy needs a nonempty predictive feature set".into(),
                ));
            }
            let mut draws = RngStream::root(spec.seed).child(0).draws();
            let m = if spec.m > pred.len() {
                eprintln!(
                    "warning: XPred m={} exceeds predictive set size {}; using the whole set",
                    spec.m,
                    pred.len()
                );
                pred.len()
            } else {
                spec.m
            };
            let picked = draws.sample_without_replacement(pred.len(), m);
            let cols: Vec<usize> = picked.iter().map(|&i| pred[i]).collect();
            let weights: Vec<f64> = (0..m).map(|_| draws.uniform()).collect();
            weighted_columns(ds, &cols, &weights)
        }
        PolicySource::ToyCanonical => {
            let kind = ds.toy.ok_or_else(|| {
                Error::InvalidArgument(
                    "ToyCanonical policy requires a toy-generated dataset".into(),
                )
            })?;
            (0..ds.n())
                .map(|i| kind.canonical_score(ds.x.get(i, 0), ds.x.get(i, 1)))
                .collect()
        }
    };
    standardize(&raw).map_err(|_| {
        Error::DegenerateInput(format!(
            "{} score is constant on this dataset",
            spec.source.name()
        ))
    })
}

fn weighted_columns(ds: &PotentialDataset, cols: &[usize], weights: &[f64]) -> Vec<f64> {
    (0..ds.n())
        .map(|i| {
            let row = ds.x.row(i);
            cols.iter().zip(weights).map(|(&j, &w)| w * row[j]).sum()
        })
        .collect()
}

/// Samples treatment assignments `A_i ~ Bernoulli(sigmoid(beta * z_i))` and
/// fills factual/counterfactual outcomes.
pub fn assign(ds: &PotentialDataset, spec: &PolicySpec) -> Result<ObservationalDataset> {
    let z = build_score(ds, spec)?;
    let pi: Vec<f64> = z.iter().map(|&zi| sigmoid(spec.beta * zi)).collect();

    let mut draws = RngStream::root(spec.seed).child(1).draws();
    let n = ds.n();
    let mut a = Vec::with_capacity(n);
    let mut yf = Vec::with_capacity(n);
    let mut ycf = Vec::with_capacity(n);
    for i in 0..n {
        let ai = draws.bernoulli(pi[i]);
        a.push(ai as u8);
        if ai {
            yf.push(ds.y1[i]);
            ycf.push(ds.y0[i]);
        } else {
            yf.push(ds.y0[i]);
            ycf.push(ds.y1[i]);
        }
    }

    Ok(ObservationalDataset {
        base: ds.clone(),
        z,
        pi,
        a,
        yf,
        ycf,
        policy: spec.clone(),
    })
}

/// The default bias-scale sweep from RCT to fully biased.
pub fn default_beta_grid() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
}
