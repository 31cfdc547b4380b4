//! Executable property suite binding the bias-ordering theory and the
//! documented toy-example trends to the implementation. Runnable from the
//! CLI (`cfbias selftest`) and from the acceptance tests.

use rayon::prelude::*;
use serde::Serialize;

use crate::bias::{bias_report, x_bias_analytic, z_bias};
use crate::dgp::{gen_toy, ToyKind};
use crate::error::Result;
use crate::harness::run_cell;
use crate::numerics::{mix_seed, RngStream};
use crate::policy::{assign, PolicySource, PolicySpec};

/// Estimator slack for plug-in mutual-information comparisons.
pub const ORDERING_EPSILON: f64 = 0.05;

/// Desk-scale encodings of the qualitative toy findings: "significantly
/// worse" must exceed 1.5x, "little to no effect" must stay under 1.25x.
/// Calibration constants of this suite, not quantities from elsewhere.
pub const DEGRADE_RATIO: f64 = 1.5;
pub const STABLE_RATIO: f64 = 1.25;

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub cells_checked: usize,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            passed: true,
            cells_checked: 0,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn fail(&mut self, msg: String) {
        self.passed = false;
        self.failures.push(msg);
    }
}

#[derive(Debug, Serialize)]
pub struct SelftestVerdict {
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

const ALL_TOYS: [ToyKind; 4] = [ToyKind::Toy1, ToyKind::Toy2, ToyKind::Toy3, ToyKind::Toy4];
const PROP1_SOURCES: [PolicySource; 4] = [
    PolicySource::Y0,
    PolicySource::Y1,
    PolicySource::Effect,
    PolicySource::ToyCanonical,
];

/// Checks the bias ordering `b_x >= b_joint >= max(b_y0, b_y1, b_effect)`
/// (within estimator slack) over the toy grid, plus a mutation-style
/// negative control on the analytic covariate bias.
pub fn check_proposition_1(quick: bool) -> Result<CheckReport> {
    let mut report = CheckReport::new("proposition_1_ordering");
    let (toys, sources, betas, seeds, n): (&[ToyKind], &[PolicySource], &[f64], u64, usize) =
        if quick {
            (
                &ALL_TOYS[..2],
                &PROP1_SOURCES[..2],
                &[0.0, 16.0],
                1,
                2000,
            )
        } else {
            (&ALL_TOYS, &PROP1_SOURCES, &[0.0, 2.0, 8.0, 16.0], 3, 5000)
        };

    let mut grid = Vec::new();
    for &toy in toys {
        for seed in 0..seeds {
            for &source in sources {
                for &beta in betas {
                    grid.push((toy, seed, source, beta));
                }
            }
        }
    }

    let outcomes: Vec<std::result::Result<(), String>> = grid
        .par_iter()
        .map(|&(toy, seed, source, beta)| {
            let ds = gen_toy(toy, n, mix_seed(7000, seed), 0.0)
                .map_err(|e| format!("{} gen failed: {e}", toy.name()))?;
            let policy = PolicySpec {
                source,
                beta,
                m: 2,
                seed: mix_seed(seed, 11 + beta as u64),
            };
            let obs = assign(&ds, &policy).map_err(|e| {
                format!("{}/{}/beta={beta}: assignment failed: {e}", toy.name(), source.name())
            })?;
            let r = bias_report(&obs).map_err(|e| {
                format!("{}/{}/beta={beta}: report failed: {e}", toy.name(), source.name())
            })?;
            let max_single = r.b_y0.max(r.b_y1).max(r.b_effect);
            if r.b_x + ORDERING_EPSILON < r.b_joint {
                return Err(format!(
                    "{}/{}/beta={beta}/seed={seed}: b_x {:.4} < b_joint {:.4}",
                    toy.name(),
                    source.name(),
                    r.b_x,
                    r.b_joint
                ));
            }
            if r.b_joint + ORDERING_EPSILON < max_single {
                return Err(format!(
                    "{}/{}/beta={beta}/seed={seed}: b_joint {:.4} < max single {:.4}",
                    toy.name(),
                    source.name(),
                    r.b_joint,
                    max_single
                ));
            }
            Ok(())
        })
        .collect();

    report.cells_checked = grid.len();
    for outcome in outcomes {
        if let Err(msg) = outcome {
            report.fail(msg);
        }
    }

    // negative control: a shuffled propensity vector no longer describes the
    // assignment mechanism, and the disagreement between the analytic
    // covariate bias and the empirical score bias must expose it
    {
        let ds = gen_toy(ToyKind::Toy1, n, 999, 0.0)?;
        let obs = assign(&ds, &PolicySpec::new(PolicySource::ToyCanonical, 16.0, 5))?;
        let analytic = x_bias_analytic(&obs.pi, &obs.a)?;
        let empirical = z_bias(&obs.a, &obs.pi)?;
        if (analytic - empirical).abs() > 0.1 {
            report.fail(format!(
                "true propensities disagree with empirical bias: {analytic:.4} vs {empirical:.4}"
            ));
        }
        let mut shuffled = obs.pi.clone();
        RngStream::root(31).draws().shuffle(&mut shuffled);
        let empirical_shuffled = z_bias(&obs.a, &shuffled)?;
        if (analytic - empirical_shuffled).abs() < 0.3 {
            report.fail(format!(
                "shuffled propensities were not detected: {analytic:.4} vs {empirical_shuffled:.4}"
            ));
        } else {
            report.notes.push(format!(
                "negative control fires: analytic {analytic:.4}, shuffled empirical {empirical_shuffled:.4}"
            ));
        }
    }

    Ok(report)
}

/// Maximal covariate bias implies an overlap violation, exactly; the
/// converse does not hold, witnessed by a policy that mixes deterministic
/// and coin-flip propensities.
pub fn check_proposition_2(n: usize, seed: u64) -> Result<CheckReport> {
    let mut report = CheckReport::new("proposition_2_overlap");
    report.cells_checked = 3;
    let mut draws = RngStream::root(seed).draws();

    // deterministic balanced policy: b_x = 1 exactly, overlap violated
    let pi_det: Vec<f64> = (0..n).map(|i| f64::from(i % 2 == 0)).collect();
    let a_det: Vec<u8> = pi_det.iter().map(|&p| p as u8).collect();
    let b = x_bias_analytic(&pi_det, &a_det)?;
    if b != 1.0 {
        report.fail(format!("deterministic balanced policy: b_x = {b} != 1"));
    }
    let overlap_violated = pi_det.iter().any(|&p| p == 0.0 || p == 1.0);
    if !overlap_violated {
        report.fail("deterministic policy did not violate overlap".into());
    }

    // RCT: overlap holds and the bias clamps to zero
    let pi_rct = vec![0.5; n];
    let a_rct: Vec<u8> = (0..n).map(|_| draws.bernoulli(0.5) as u8).collect();
    let b_rct = x_bias_analytic(&pi_rct, &a_rct)?;
    if b_rct != 0.0 {
        report.fail(format!("RCT: b_x = {b_rct} != 0"));
    }
    if pi_rct.iter().any(|&p| p == 0.0 || p == 1.0) {
        report.fail("RCT unexpectedly violates overlap".into());
    }

    // converse counterexample: overlap violated while b_x is near one half
    let pi_mixed: Vec<f64> = (0..n)
        .map(|i| match i % 4 {
            0 | 1 => 0.5,
            2 => 0.0,
            _ => 1.0,
        })
        .collect();
    let a_mixed: Vec<u8> = pi_mixed.iter().map(|&p| draws.bernoulli(p) as u8).collect();
    let b_mixed = x_bias_analytic(&pi_mixed, &a_mixed)?;
    let mixed_violates = pi_mixed.iter().any(|&p| p == 0.0 || p == 1.0);
    if !mixed_violates {
        report.fail("mixed policy should violate overlap".into());
    }
    if (b_mixed - 0.5).abs() > 0.05 {
        report.fail(format!("mixed policy: b_x = {b_mixed}, expected ~0.5"));
    }
    if b_mixed >= 1.0 {
        report.fail("converse direction failed: overlap violation forced b_x = 1".into());
    }
    report.notes.push(format!(
        "overlap violated with b_x = {b_mixed:.4} < 1: maximal bias is not implied"
    ));
    Ok(report)
}

struct ToySweep {
    pehe: [Vec<f64>; 2],       // [beta=0, beta=16]
    rmse_y0_cf: [Vec<f64>; 2],
    rmse_y1_cf: [Vec<f64>; 2],
}

fn toy_sweep(kind: ToyKind, learner: &str, n: usize, seeds: u64, folds: usize) -> Result<ToySweep> {
    let mut out = ToySweep {
        pehe: [Vec::new(), Vec::new()],
        rmse_y0_cf: [Vec::new(), Vec::new()],
        rmse_y1_cf: [Vec::new(), Vec::new()],
    };
    let cells: Vec<(u64, usize, usize)> = (0..seeds)
        .flat_map(|s| (0..2usize).flat_map(move |bi| (0..folds).map(move |f| (s, bi, f))))
        .collect();
    let rows: Vec<(usize, crate::metrics::MetricsRow)> = cells
        .par_iter()
        .map(|&(seed, bi, fold)| {
            let beta = if bi == 0 { 0.0 } else { 16.0 };
            let ds = gen_toy(kind, n, mix_seed(8000, seed), 0.0)?;
            let policy = PolicySpec {
                source: PolicySource::ToyCanonical,
                beta,
                m: 2,
                seed: mix_seed(seed, 77),
            };
            let row = run_cell(&ds, kind.name(), &policy, seed, fold, folds, learner)?;
            Ok((bi, row))
        })
        .collect::<Result<_>>()?;
    for (bi, row) in rows {
        if row.status != "ok" {
            return Err(crate::error::Error::Config(format!(
                "toy sweep cell failed: {}",
                row.status
            )));
        }
        if let Some(v) = row.pehe {
            out.pehe[bi].push(v);
        }
        if let Some(v) = row.rmse_y0_cf {
            out.rmse_y0_cf[bi].push(v);
        }
        if let Some(v) = row.rmse_y1_cf {
            out.rmse_y1_cf[bi].push(v);
        }
    }
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    crate::numerics::mean(v)
}

/// Reduced toy sweeps asserting the documented per-toy performance trends.
pub fn check_toy_findings(quick: bool) -> Result<CheckReport> {
    let mut report = CheckReport::new("toy_findings");
    let (n, seeds, folds) = if quick { (1500, 2, 2) } else { (4000, 3, 2) };

    // toy1: every bias rises with the scale, so effect prediction and
    // counterfactual prediction degrade sharply
    {
        let sweep = toy_sweep(ToyKind::Toy1, "tlearner-lasso", n, seeds, folds)?;
        let (p0, p16) = (mean(&sweep.pehe[0]), mean(&sweep.pehe[1]));
        report.cells_checked += sweep.pehe[0].len() + sweep.pehe[1].len();
        if p16 <= DEGRADE_RATIO * p0 {
            report.fail(format!(
                "toy1: PEHE should degrade > {DEGRADE_RATIO}x, got {p0:.4} -> {p16:.4}"
            ));
        }
        // the canonical score favors the better arm, so the observational
        // policy itself approaches perfect assignment precision
        let ds = gen_toy(ToyKind::Toy1, 10_000, 42, 0.0)?;
        let obs = assign(&ds, &PolicySpec::new(PolicySource::ToyCanonical, 16.0, 3))?;
        let r = bias_report(&obs)?;
        if r.prec_ass_pi < 0.95 {
            report.fail(format!(
                "toy1: policy precision at beta=16 should approach 1, got {:.4}",
                r.prec_ass_pi
            ));
        }
    }

    // toy2: the policy reads a dimension the outcomes ignore; overlap is
    // violated but nothing relevant is biased, so performance holds
    {
        let sweep = toy_sweep(ToyKind::Toy2, "tlearner-lasso", n, seeds, folds)?;
        let (p0, p16) = (mean(&sweep.pehe[0]), mean(&sweep.pehe[1]));
        report.cells_checked += sweep.pehe[0].len() + sweep.pehe[1].len();
        if p16 >= STABLE_RATIO * p0 {
            report.fail(format!(
                "toy2: PEHE should stay within {STABLE_RATIO}x, got {p0:.4} -> {p16:.4}"
            ));
        }
        let ds = gen_toy(ToyKind::Toy2, 10_000, 43, 0.0)?;
        let obs = assign(&ds, &PolicySpec::new(PolicySource::ToyCanonical, 16.0, 4))?;
        let r = bias_report(&obs)?;
        if r.b_x < 0.9 || r.b_effect > 0.05 {
            report.fail(format!(
                "toy2: expected b_x >= 0.9 and b_effect <= 0.05, got {:.4} / {:.4}",
                r.b_x, r.b_effect
            ));
        }
    }

    // toy3: effect bias without outcome bias hurts the direct learner more
    {
        let t = toy_sweep(ToyKind::Toy3, "tlearner-ridge", n, seeds, folds)?;
        let x = toy_sweep(ToyKind::Toy3, "xlearner-ridge", n, seeds, folds)?;
        report.cells_checked += t.pehe[0].len() + x.pehe[0].len();
        let ratio_t = mean(&t.pehe[1]) / mean(&t.pehe[0]);
        let ratio_x = mean(&x.pehe[1]) / mean(&x.pehe[0]);
        if ratio_x <= ratio_t {
            report.fail(format!(
                "toy3: direct learner should degrade more, got x-ratio {ratio_x:.3} vs t-ratio {ratio_t:.3}"
            ));
        }
    }

    // toy4: bias sits on the control outcome only, so only the control
    // counterfactual deteriorates
    {
        let sweep = toy_sweep(ToyKind::Toy4, "tlearner-lasso", n, seeds, folds)?;
        report.cells_checked += sweep.pehe[0].len() + sweep.pehe[1].len();
        let r0 = mean(&sweep.rmse_y0_cf[1]) / mean(&sweep.rmse_y0_cf[0]);
        let r1 = mean(&sweep.rmse_y1_cf[1]) / mean(&sweep.rmse_y1_cf[0]);
        if r1 >= r0 {
            report.fail(format!(
                "toy4: arm-1 CF error ratio {r1:.3} should stay below arm-0 ratio {r0:.3}"
            ));
        }
        let ds = gen_toy(ToyKind::Toy4, 10_000, 44, 0.0)?;
        let obs = assign(&ds, &PolicySpec::new(PolicySource::ToyCanonical, 16.0, 5))?;
        let r = bias_report(&obs)?;
        if r.b_y0 < 0.6 || r.b_y1 > 0.1 {
            report.fail(format!(
                "toy4: expected b_y0 >= 0.6 and b_y1 <= 0.1, got {:.4} / {:.4}",
                r.b_y0, r.b_y1
            ));
        }
    }

    Ok(report)
}

/// Runs the whole suite and aggregates a verdict.
pub fn run_selftest(quick: bool) -> Result<SelftestVerdict> {
    let n = if quick { 2000 } else { 10_000 };
    let checks = vec![
        check_proposition_1(quick)?,
        check_proposition_2(n, 12345)?,
        check_toy_findings(quick)?,
    ];
    Ok(SelftestVerdict {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proposition_2_suite_passes() {
        let report = check_proposition_2(10_000, 7).unwrap();
        assert!(report.passed, "{:?}", report.failures);
    }

    #[test]
    fn quick_selftest_passes() {
        let verdict = run_selftest(true).unwrap();
        for check in &verdict.checks {
            assert!(check.passed, "{}: {:?}", check.name, check.failures);
        }
    }
}
