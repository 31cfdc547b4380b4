//! Experiment orchestration: configuration, the
//! (policy source x beta x seed x fold x learner) sweep, cross-validated
//! train/eval cells, results persistence and SVG sweep plots.

mod plot;
mod sweep;

pub use plot::emit_plots;
pub use sweep::{
    fold_indices, read_bias_csv, read_results_csv, run_cell, run_cell_with_model, run_sweep,
    BiasRow, ResultsTable, RESULTS_COLUMNS,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dgp::{
    gen_toy, random_linear_spec, simulate_linear_outcomes, synthetic_covariates, PotentialDataset,
    ToyKind,
};
use crate::error::{Error, Result};
use crate::ingest::{build_empirical_dataset, load_csv, load_dataset};
use crate::learners::{parse_learner, LearnerKind};
use crate::numerics::mix_seed;
use crate::policy::{default_beta_grid, PolicySource};

/// Where the sweep's potential-outcome data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    Toy1,
    Toy2,
    Toy3,
    Toy4,
    LinearSynthetic {
        n: usize,
        d: usize,
        #[serde(default = "default_truth_set")]
        n_prog: usize,
        #[serde(default = "default_truth_set")]
        n_pred: usize,
        #[serde(default)]
        noise_sd: Option<f64>,
    },
    Empirical {
        cov: PathBuf,
        resp: PathBuf,
        arm0: String,
        arm1: String,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        standardize_arms: bool,
    },
    /// A dataset bundle directory written by `gen-toy` or `ingest`.
    Bundle { path: PathBuf },
}

fn default_truth_set() -> usize {
    20
}

fn default_k() -> usize {
    200
}

impl DatasetSpec {
    fn toy_kind(&self) -> Option<ToyKind> {
        match self {
            Self::Toy1 => Some(ToyKind::Toy1),
            Self::Toy2 => Some(ToyKind::Toy2),
            Self::Toy3 => Some(ToyKind::Toy3),
            Self::Toy4 => Some(ToyKind::Toy4),
            _ => None,
        }
    }
}

/// Attribution settings for the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionConfig {
    pub enabled: bool,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_max_units")]
    pub max_units: usize,
}

fn default_budget() -> usize {
    crate::attribution::DEFAULT_SHAPLEY_BUDGET
}

fn default_max_units() -> usize {
    crate::attribution::MAX_ATTRIBUTED_UNITS
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            budget: default_budget(),
            max_units: default_max_units(),
        }
    }
}

/// One sweep configuration document (`"schema": 1`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub dataset: DatasetSpec,
    /// Unit count for generated toy datasets.
    #[serde(default = "default_toy_n")]
    pub n: usize,
    pub policy_sources: Vec<PolicySource>,
    #[serde(default = "default_beta_grid")]
    pub beta_grid: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub learners: Vec<String>,
    #[serde(default)]
    pub attribution: AttributionConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub master_seed: u64,
    /// Feature count for XRand / XPred scores.
    #[serde(default = "default_score_features")]
    pub score_features: usize,
}

fn default_toy_n() -> usize {
    4000
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_folds() -> usize {
    5
}

fn default_score_features() -> usize {
    20
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::FileRead {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            return Err(Error::Config(format!(
                "unsupported schema version {}",
                self.schema
            )));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        if self.policy_sources.is_empty() {
            return Err(Error::Config("policy_sources must be nonempty".into()));
        }
        if self.beta_grid.is_empty() {
            return Err(Error::Config("beta_grid must be nonempty".into()));
        }
        if self.beta_grid.iter().any(|&b| !(b >= 0.0)) {
            return Err(Error::Config("beta values must be >= 0".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if self.learners.is_empty() {
            return Err(Error::Config("learners must be nonempty".into()));
        }
        for name in &self.learners {
            parse_learner(name)?;
        }
        Ok(())
    }

    /// Parses the learner grid, preserving config order.
    pub fn learner_grid(&self) -> Result<Vec<(String, LearnerKind)>> {
        self.learners
            .iter()
            .map(|name| Ok((name.clone(), parse_learner(name)?)))
            .collect()
    }

    /// Materializes the dataset and its display label.
    pub fn build_dataset(&self) -> Result<(PotentialDataset, String)> {
        match &self.dataset {
            DatasetSpec::Toy1 | DatasetSpec::Toy2 | DatasetSpec::Toy3 | DatasetSpec::Toy4 => {
                let kind = self.dataset.toy_kind().expect("toy variant");
                let ds = gen_toy(kind, self.n, mix_seed(self.master_seed, 1), 0.0)?;
                Ok((ds, kind.name().to_string()))
            }
            DatasetSpec::LinearSynthetic {
                n,
                d,
                n_prog,
                n_pred,
                noise_sd,
            } => {
                let mut spec =
                    random_linear_spec(*d, *n_prog, *n_pred, mix_seed(self.master_seed, 2))?;
                spec.noise_sd = *noise_sd;
                let x = synthetic_covariates(*n, *d, mix_seed(self.master_seed, 3))?;
                Ok((simulate_linear_outcomes(&x, &spec)?, "linear-synthetic".into()))
            }
            DatasetSpec::Empirical {
                cov,
                resp,
                arm0,
                arm1,
                k,
                standardize_arms,
            } => {
                let cov_load = load_csv(cov)?;
                let resp_load = load_csv(resp)?;
                let ds = build_empirical_dataset(
                    &cov_load.table,
                    &resp_load.table,
                    arm0,
                    arm1,
                    *k,
                    *standardize_arms,
                )?;
                Ok((ds, "empirical".into()))
            }
            DatasetSpec::Bundle { path } => {
                let ds = load_dataset(path)?;
                let label = path
                    .file_name()
                    .and_then(|s| s.to_str())
                    .unwrap_or("bundle")
                    .to_string();
                Ok((ds, label))
            }
        }
    }
}
