//! Potential-outcome data generators: four closed-form toy mechanisms and
//! a linear semi-synthetic outcome scheme over arbitrary covariates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{population_std, Matrix, RngStream};

/// Logistic-shaped nonlinearity used by all toy outcome surfaces.
pub fn toy_nonlinearity(v: f64) -> f64 {
    1.0 / (1.0 + (-10.0 * (v - 0.5)).exp())
}

/// The four closed-form toy mechanisms, each paired with a canonical
/// assignment score (see the policy module).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyKind {
    Toy1,
    Toy2,
    Toy3,
    Toy4,
}

impl ToyKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "toy1" => Ok(Self::Toy1),
            "toy2" => Ok(Self::Toy2),
            "toy3" => Ok(Self::Toy3),
            "toy4" => Ok(Self::Toy4),
            other => Err(Error::InvalidArgument(format!("unknown toy kind {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Toy1 => "toy1",
            Self::Toy2 => "toy2",
            Self::Toy3 => "toy3",
            Self::Toy4 => "toy4",
        }
    }

    /// Noiseless potential outcomes at a single point (x0, x1).
    pub fn outcomes(&self, x0: f64, x1: f64) -> (f64, f64) {
        let f = toy_nonlinearity;
        match self {
            // toy1 and toy2 share the outcome mechanism; they differ in the
            // canonical policy dimension
            Self::Toy1 | Self::Toy2 => (f(x0), f(1.0 - x0)),
            Self::Toy3 => (f(x0), f(1.0 - x1)),
            Self::Toy4 => (f(x0), f(x1)),
        }
    }

    /// Raw canonical policy score at (x0, x1); higher favors arm 1.
    pub fn canonical_score(&self, x0: f64, x1: f64) -> f64 {
        match self {
            Self::Toy1 => 1.0 - x0,
            Self::Toy2 => 1.0 - x1,
            Self::Toy3 => 1.0 - x0 - x1,
            Self::Toy4 => x0,
        }
    }
}

/// Disjoint column-index sets declaring which features drive the control
/// outcome, the treatment effect, and nothing at all.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturePartition {
    pub prognostic: Vec<usize>,
    pub predictive: Vec<usize>,
    pub control: Vec<usize>,
}

impl FeaturePartition {
    pub fn is_empty(&self) -> bool {
        self.prognostic.is_empty() && self.predictive.is_empty() && self.control.is_empty()
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let mut seen = vec![false; n_features];
        for (label, set) in [
            ("prognostic", &self.prognostic),
            ("predictive", &self.predictive),
            ("control", &self.control),
        ] {
            for &j in set {
                if j >= n_features {
                    return Err(Error::IndexOutOfRange {
                        what: "feature",
                        index: j,
                        size: n_features,
                    });
                }
                if seen[j] {
                    return Err(Error::InvalidArgument(format!(
                        "feature {j} appears in more than one partition set ({label})"
                    )));
                }
                seen[j] = true;
            }
        }
        Ok(())
    }
}

/// Weighted-linear outcome mechanism. The control arm depends only on the
/// prognostic set; arm 1 adds an effect driven by the predictive set, so
/// predictive biomarkers coincide with the arm-1 feature set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearOutcomeSpec {
    pub partition: FeaturePartition,
    pub w_prog: Vec<f64>,
    pub w_pred: Vec<f64>,
    /// Absolute noise standard deviation; `None` resolves at simulation
    /// time to 0.1 x std of the noiseless signal.
    pub noise_sd: Option<f64>,
    pub seed: u64,
}

impl LinearOutcomeSpec {
    fn validate(&self, n_features: usize) -> Result<()> {
        self.partition.validate(n_features)?;
        if self.w_prog.len() != self.partition.prognostic.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} prognostic weights for {} indices",
                self.w_prog.len(),
                self.partition.prognostic.len()
            )));
        }
        if self.w_pred.len() != self.partition.predictive.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictive weights for {} indices",
                self.w_pred.len(),
                self.partition.predictive.len()
            )));
        }
        if let Some(sd) = self.noise_sd {
            if !(sd >= 0.0) {
                return Err(Error::InvalidArgument(format!("noise_sd {sd} < 0")));
            }
        }
        Ok(())
    }
}

/// Covariates plus both potential outcomes for every unit.
#[derive(Debug, Clone)]
pub struct PotentialDataset {
    pub x: Matrix,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub partition: FeaturePartition,
    pub feature_names: Vec<String>,
    pub unit_ids: Vec<String>,
    /// Set when the dataset came out of a toy generator; enables the
    /// canonical policy score.
    pub toy: Option<ToyKind>,
}

impl PotentialDataset {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.rows();
        if self.y0.len() != n || self.y1.len() != n || self.unit_ids.len() != n {
            return Err(Error::DimensionMismatch(
                "dataset vectors must all have length n".into(),
            ));
        }
        if self.feature_names.len() != self.x.cols() {
            return Err(Error::DimensionMismatch(
                "feature_names length must equal the number of columns".into(),
            ));
        }
        if self.y0.iter().chain(&self.y1).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("outcomes must be finite".into()));
        }
        self.partition.validate(self.x.cols())
    }
}

/// Generates a toy dataset with x0, x1 ~ U[0,1] i.i.d. and outcomes from the
/// closed-form mechanism; optional additive Gaussian noise.
pub fn gen_toy(kind: ToyKind, n: usize, seed: u64, noise_sd: f64) -> Result<PotentialDataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("gen_toy needs n >= 2, got {n}")));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise_sd {noise_sd} < 0")));
    }
    let root = RngStream::root(seed);
    let mut covar = root.child(0).draws();
    let mut noise = root.child(1).draws();

    let mut data = Vec::with_capacity(n * 2);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for _ in 0..n {
        let x0 = covar.uniform();
        let x1 = covar.uniform();
        data.push(x0);
        data.push(x1);
        let (a, b) = kind.outcomes(x0, x1);
        if noise_sd > 0.0 {
            y0.push(a + noise_sd * noise.normal());
            y1.push(b + noise_sd * noise.normal());
        } else {
            y0.push(a);
            y1.push(b);
        }
    }

    Ok(PotentialDataset {
        x: Matrix::new(n, 2, data)?,
        y0,
        y1,
        partition: FeaturePartition::default(),
        feature_names: vec!["x0".into(), "x1".into()],
        unit_ids: (0..n).map(|i| i.to_string()).collect(),
        toy: Some(kind),
    })
}

/// Applies a linear outcome spec to an existing covariate matrix.
pub fn simulate_linear_outcomes(x: &Matrix, spec: &LinearOutcomeSpec) -> Result<PotentialDataset> {
    spec.validate(x.cols())?;
    let n = x.rows();

    let mut base = vec![0.0; n];
    let mut effect = vec![0.0; n];
    for i in 0..n {
        let row = x.row(i);
        base[i] = spec
            .partition
            .prognostic
            .iter()
            .zip(&spec.w_prog)
            .map(|(&j, &w)| w * row[j])
            .sum();
        effect[i] = spec
            .partition
            .predictive
            .iter()
            .zip(&spec.w_pred)
            .map(|(&j, &w)| w * row[j])
            .sum();
    }

    let noise_sd = match spec.noise_sd {
        Some(sd) => sd,
        None => {
            let mut signal = base.clone();
            signal.extend(base.iter().zip(&effect).map(|(b, e)| b + e));
            0.1 * population_std(&signal)
        }
    };

    let mut noise = RngStream::root(spec.seed).child(2).draws();
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for i in 0..n {
        let (e0, e1) = if noise_sd > 0.0 {
            (noise_sd * noise.normal(), noise_sd * noise.normal())
        } else {
            (0.0, 0.0)
        };
        y0.push(base[i] + e0);
        y1.push(base[i] + effect[i] + e0 + e1);
    }

    Ok(PotentialDataset {
        x: x.clone(),
        y0,
        y1,
        partition: spec.partition.clone(),
        feature_names: (0..x.cols()).map(|j| format!("f{j}")).collect(),
        unit_ids: (0..n).map(|i| i.to_string()).collect(),
        toy: None,
    })
}

/// Draws disjoint prognostic/predictive index sets without replacement and
/// U[0,1] weights for both.
pub fn random_linear_spec(
    d: usize,
    n_prog: usize,
    n_pred: usize,
    seed: u64,
) -> Result<LinearOutcomeSpec> {
    if n_prog + n_pred > d {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {n_prog}+{n_pred} disjoint features from d={d}"
        )));
    }
    let root = RngStream::root(seed);
    let mut idx_draws = root.child(0).draws();
    let mut w_draws = root.child(1).draws();

    let combined = idx_draws.sample_without_replacement(d, n_prog + n_pred);
    let mut prognostic = combined[..n_prog].to_vec();
    let mut predictive = combined[n_prog..].to_vec();
    prognostic.sort_unstable();
    predictive.sort_unstable();

    let w_prog = (0..n_prog).map(|_| w_draws.uniform()).collect();
    let w_pred = (0..n_pred).map(|_| w_draws.uniform()).collect();

    Ok(LinearOutcomeSpec {
        partition: FeaturePartition {
            prognostic,
            predictive,
            control: Vec::new(),
        },
        w_prog,
        w_pred,
        noise_sd: None,
        seed,
    })
}

/// Gaussian covariate matrix for fully synthetic linear datasets.
pub fn synthetic_covariates(n: usize, d: usize, seed: u64) -> Result<Matrix> {
    let mut draws = RngStream::root(seed).child(3).draws();
    let data: Vec<f64> = (0..n * d).map(|_| draws.normal()).collect();
    Matrix::new(n, d, data)
}

/// Per-unit treatment effect Y1 - Y0.
pub fn true_cate(ds: &PotentialDataset) -> Vec<f64> {
    ds.y1.iter().zip(&ds.y0).map(|(a, b)| a - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find_unit_near(ds: &PotentialDataset, x0: f64, tol: f64) -> Option<usize> {
        (0..ds.n()).find(|&i| (ds.x.get(i, 0) - x0).abs() < tol)
    }

    #[test]
    fn toy_nonlinearity_midpoint() {
        assert_eq!(toy_nonlinearity(0.5), 0.5);
    }

    #[test]
    fn toy1_endpoint_values() {
        // direct evaluation of 1/(1+e^5) and 1/(1+e^-5)
        let (y0, y1) = ToyKind::Toy1.outcomes(0.0, 0.3);
        assert!((y0 - 0.006_692_9).abs() < 1e-6);
        assert!((y1 - 0.993_307_1).abs() < 1e-6);
    }

    #[test]
    fn toy4_symmetric_point() {
        let (y0, y1) = ToyKind::Toy4.outcomes(0.5, 0.5);
        assert_eq!(y0, 0.5);
        assert_eq!(y1, 0.5);
    }

    #[test]
    fn gen_toy_outcomes_recomputable_when_noiseless() {
        for kind in [ToyKind::Toy1, ToyKind::Toy2, ToyKind::Toy3, ToyKind::Toy4] {
            let ds = gen_toy(kind, 200, 9, 0.0).unwrap();
            for i in 0..ds.n() {
                let (a, b) = kind.outcomes(ds.x.get(i, 0), ds.x.get(i, 1));
                assert_eq!(ds.y0[i], a);
                assert_eq!(ds.y1[i], b);
            }
        }
    }

    #[test]
    fn gen_toy_deterministic() {
        let a = gen_toy(ToyKind::Toy3, 128, 77, 0.05).unwrap();
        let b = gen_toy(ToyKind::Toy3, 128, 77, 0.05).unwrap();
        assert_eq!(a.x.data(), b.x.data());
        assert_eq!(a.y0, b.y0);
        assert_eq!(a.y1, b.y1);
    }

    #[test]
    fn gen_toy_rejects_tiny_n() {
        assert!(gen_toy(ToyKind::Toy1, 1, 0, 0.0).is_err());
    }

    #[test]
    fn x0_midpoint_has_half_outcome() {
        let ds = gen_toy(ToyKind::Toy1, 5000, 3, 0.0).unwrap();
        if let Some(i) = find_unit_near(&ds, 0.5, 1e-3) {
            assert!((ds.y0[i] - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn linear_identity_mechanism() {
        let x = Matrix::from_rows(&[vec![1.0, 9.0], vec![2.0, 8.0], vec![3.0, 7.0]]).unwrap();
        let spec = LinearOutcomeSpec {
            partition: FeaturePartition {
                prognostic: vec![0],
                predictive: vec![],
                control: vec![],
            },
            w_prog: vec![1.0],
            w_pred: vec![],
            noise_sd: Some(0.0),
            seed: 0,
        };
        let ds = simulate_linear_outcomes(&x, &spec).unwrap();
        assert_eq!(ds.y0, vec![1.0, 2.0, 3.0]);
        assert_eq!(true_cate(&ds), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn linear_true_control() {
        let x = Matrix::from_rows(&[vec![0.5], vec![1.5]]).unwrap();
        let spec = LinearOutcomeSpec {
            partition: FeaturePartition {
                prognostic: vec![],
                predictive: vec![0],
                control: vec![],
            },
            w_prog: vec![],
            w_pred: vec![2.0],
            noise_sd: Some(0.0),
            seed: 0,
        };
        let ds = simulate_linear_outcomes(&x, &spec).unwrap();
        assert_eq!(ds.y0, vec![0.0, 0.0]);
        assert_eq!(true_cate(&ds), vec![1.0, 3.0]);
    }

    #[test]
    fn linear_hand_arithmetic() {
        let x = Matrix::from_rows(&[vec![1.0, 3.0]]).unwrap();
        let spec = LinearOutcomeSpec {
            partition: FeaturePartition {
                prognostic: vec![0],
                predictive: vec![1],
                control: vec![],
            },
            w_prog: vec![0.5],
            w_pred: vec![-1.0],
            noise_sd: Some(0.0),
            seed: 0,
        };
        let ds = simulate_linear_outcomes(&x, &spec).unwrap();
        assert_eq!(ds.y0[0], 0.5);
        assert_eq!(ds.y1[0], -2.5);
        assert_eq!(true_cate(&ds)[0], -3.0);
    }

    #[test]
    fn cate_ignores_non_predictive_columns() {
        let mut draws = RngStream::root(21).draws();
        let data: Vec<f64> = (0..50 * 6).map(|_| draws.normal()).collect();
        let x = Matrix::new(50, 6, data).unwrap();
        let spec = LinearOutcomeSpec {
            partition: FeaturePartition {
                prognostic: vec![0, 1],
                predictive: vec![3],
                control: vec![],
            },
            w_prog: vec![0.7, 0.2],
            w_pred: vec![1.3],
            noise_sd: Some(0.0),
            seed: 4,
        };
        let tau = true_cate(&simulate_linear_outcomes(&x, &spec).unwrap());

        let mut bumped = x.clone();
        for i in 0..50 {
            bumped.set(i, 1, bumped.get(i, 1) + 5.0); // prognostic column
            bumped.set(i, 5, bumped.get(i, 5) - 3.0); // unused column
        }
        let tau2 = true_cate(&simulate_linear_outcomes(&bumped, &spec).unwrap());
        for (a, b) in tau.iter().zip(&tau2) {
            // tau is a difference of sums, so rounding shifts by ~1 ulp when
            // the base magnitude changes
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn random_spec_draws_disjoint_sets() {
        let spec = random_linear_spec(100, 20, 20, 5).unwrap();
        let mut all: Vec<usize> = spec
            .partition
            .prognostic
            .iter()
            .chain(&spec.partition.predictive)
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 40);
        assert!(spec.w_prog.iter().all(|w| (0.0..1.0).contains(w)));
        assert!(spec.w_pred.iter().all(|w| (0.0..1.0).contains(w)));
    }

    #[test]
    fn random_spec_deterministic() {
        let a = random_linear_spec(50, 10, 10, 123).unwrap();
        let b = random_linear_spec(50, 10, 10, 123).unwrap();
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.w_prog, b.w_prog);
        assert_eq!(a.w_pred, b.w_pred);
    }

    #[test]
    fn random_spec_rejects_infeasible() {
        assert!(random_linear_spec(10, 8, 8, 0).is_err());
    }

    #[test]
    fn true_cate_subtraction() {
        let ds = PotentialDataset {
            x: Matrix::zeros(2, 1),
            y0: vec![1.0, 2.0],
            y1: vec![3.0, 1.0],
            partition: FeaturePartition::default(),
            feature_names: vec!["f0".into()],
            unit_ids: vec!["0".into(), "1".into()],
            toy: None,
        };
        assert_eq!(true_cate(&ds), vec![2.0, -1.0]);
    }

    #[test]
    fn toy4_cate_by_construction() {
        let ds = gen_toy(ToyKind::Toy4, 100, 17, 0.0).unwrap();
        let tau = true_cate(&ds);
        for i in 0..ds.n() {
            let expect = toy_nonlinearity(ds.x.get(i, 1)) - toy_nonlinearity(ds.x.get(i, 0));
            assert!((tau[i] - expect).abs() < 1e-15);
        }
    }
}
