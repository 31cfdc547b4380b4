//! Estimation of assignment biases as normalized mutual information between
//! treatment assignment and outcome-related variables, using plug-in
//! entropies over automatic histogram bins, plus the analytic
//! covariate-bias that is available whenever true propensities are known.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::precision_assignment;
use crate::numerics::{auto_bins, auto_bins_capped, binary_entropy, BinEdges};
use crate::policy::ObservationalDataset;

/// Per-dimension bin cap for the joint outcome bias. The 2-D plug-in
/// estimate is biased upward by roughly (cells - 1) / (2 n ln 2); with 64
/// cells that stays below 0.01 at n = 5000, small against the 0.05 ordering
/// slack even where the joint bias coincides with the covariate bias.
pub const JOINT_BIN_CAP: usize = 8;

/// The five bias estimates for one observational dataset, plus estimator
/// metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasReport {
    pub b_y0: f64,
    pub b_y1: f64,
    pub b_effect: f64,
    pub b_joint: f64,
    pub b_x: f64,
    /// Entropy of the assignment vector, bits.
    pub h_a: f64,
    /// Fraction of units for which the observational policy picked the
    /// weakly better arm.
    pub prec_ass_pi: f64,
    pub bins_y0: usize,
    pub bins_y1: usize,
    pub bins_effect: usize,
    pub n: usize,
}

/// Plug-in entropy of the empirical assignment distribution, bits.
pub fn entropy_of_assignment(a: &[u8]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let n = a.len() as f64;
    let ones = a.iter().filter(|&&v| v == 1).count() as f64;
    let mut h = 0.0;
    for count in [ones, n - ones] {
        if count > 0.0 {
            let p = count / n;
            h -= p * p.log2();
        }
    }
    h
}

fn plugin_entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Plug-in mutual information I(A; bin(z)) in bits for an explicit binning,
/// computed as H[Zb] - H[Zb | A] and clamped below at zero.
pub fn mutual_information_with_bins(a: &[u8], z: &[f64], bins: &BinEdges) -> Result<f64> {
    if a.len() != z.len() {
        return Err(Error::DimensionMismatch(
            "assignment and score lengths differ".into(),
        ));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::DegenerateInput("need at least 2 units".into()));
    }
    let k = bins.k();
    let mut marginal = vec![0usize; k];
    let mut by_arm = vec![0usize; 2 * k];
    let mut arm_totals = [0usize; 2];
    for (&ai, &zi) in a.iter().zip(z) {
        let b = bins.bin_of(zi);
        marginal[b] += 1;
        by_arm[ai as usize * k + b] += 1;
        arm_totals[ai as usize] += 1;
    }

    let h_z = plugin_entropy(&marginal, n);
    let mut h_z_given_a = 0.0;
    for arm in 0..2 {
        if arm_totals[arm] == 0 {
            continue;
        }
        let weight = arm_totals[arm] as f64 / n as f64;
        h_z_given_a += weight * plugin_entropy(&by_arm[arm * k..(arm + 1) * k], arm_totals[arm]);
    }
    Ok((h_z - h_z_given_a).max(0.0))
}

/// Mutual information with bins chosen automatically over the pooled sample.
pub fn mutual_information_binned(a: &[u8], z: &[f64]) -> Result<f64> {
    let bins = auto_bins(z)?;
    mutual_information_with_bins(a, z, &bins)
}

fn normalized(mi: f64, h_a: f64) -> Result<f64> {
    if h_a <= 0.0 {
        return Err(Error::DegenerateInput(
            "assignment entropy is zero (all units in one arm)".into(),
        ));
    }
    Ok((mi / h_a).clamp(0.0, 1.0))
}

/// Normalized bias of the assignment with respect to a scalar variable:
/// I(A; Z) / H[A], clamped to [0, 1].
pub fn z_bias(a: &[u8], z: &[f64]) -> Result<f64> {
    normalized(mutual_information_binned(a, z)?, entropy_of_assignment(a))
}

/// `z_bias` with a caller-fixed binning; used where two estimates must share
/// cells.
pub fn z_bias_with_bins(a: &[u8], z: &[f64], bins: &BinEdges) -> Result<f64> {
    normalized(
        mutual_information_with_bins(a, z, bins)?,
        entropy_of_assignment(a),
    )
}

/// Normalized bias with respect to the joint outcome pair: each outcome is
/// binned independently (bin count capped per dimension) and the pair is
/// treated as one discrete cell index.
pub fn joint_outcome_bias(a: &[u8], y0: &[f64], y1: &[f64]) -> Result<f64> {
    if a.len() != y0.len() || a.len() != y1.len() {
        return Err(Error::DimensionMismatch(
            "assignment and outcome lengths differ".into(),
        ));
    }
    let bins0 = auto_bins_capped(y0, JOINT_BIN_CAP)?;
    let bins1 = auto_bins_capped(y1, JOINT_BIN_CAP)?;
    let k1 = bins1.k();
    let cells: Vec<f64> = y0
        .iter()
        .zip(y1)
        .map(|(&u, &v)| (bins0.bin_of(u) * k1 + bins1.bin_of(v)) as f64)
        .collect();
    // cells are already discrete; bin them by their own distinct values
    let max_cell = (bins0.k() * k1) as f64;
    let cell_bins = BinEdges::from_edges(
        (0..=bins0.k() * k1)
            .map(|c| c as f64 - 0.5)
            .collect::<Vec<_>>(),
    )?;
    debug_assert!(cells.iter().all(|&c| c < max_cell));
    normalized(
        mutual_information_with_bins(a, &cells, &cell_bins)?,
        entropy_of_assignment(a),
    )
}

/// Analytic covariate bias from known true propensities:
/// `1 - E[h(pi_i)] / H[A]`, clamped to [0, 1]. Under the simulator the
/// assignment given covariates is Bernoulli(pi(x)), so the conditional
/// entropy H[A | X] is exactly the mean binary entropy of the propensities.
pub fn x_bias_analytic(pi: &[f64], a: &[u8]) -> Result<f64> {
    if pi.len() != a.len() {
        return Err(Error::DimensionMismatch(
            "propensity and assignment lengths differ".into(),
        ));
    }
    let h_a = entropy_of_assignment(a);
    if h_a <= 0.0 {
        return Err(Error::DegenerateInput(
            "assignment entropy is zero (all units in one arm)".into(),
        ));
    }
    let mut h_sum = 0.0;
    for &p in pi {
        h_sum += binary_entropy(p)?;
    }
    let h_a_given_x = h_sum / pi.len() as f64;
    Ok((1.0 - h_a_given_x / h_a).clamp(0.0, 1.0))
}

/// Interaction information I(A; Y0; Y1-Y0) in bits, estimated with the same
/// binning scheme as the biases. Positive values indicate redundancy between
/// the control-outcome and effect information about the assignment. Exposed
/// as a diagnostic only.
pub fn interaction_information(a: &[u8], y0: &[f64], effect: &[f64]) -> Result<f64> {
    let mi_y0 = mutual_information_binned(a, y0)?;
    let mi_eff = mutual_information_binned(a, effect)?;

    let bins0 = auto_bins_capped(y0, JOINT_BIN_CAP)?;
    let bins1 = auto_bins_capped(effect, JOINT_BIN_CAP)?;
    let k1 = bins1.k();
    let cells: Vec<f64> = y0
        .iter()
        .zip(effect)
        .map(|(&u, &v)| (bins0.bin_of(u) * k1 + bins1.bin_of(v)) as f64)
        .collect();
    let cell_bins = BinEdges::from_edges(
        (0..=bins0.k() * k1)
            .map(|c| c as f64 - 0.5)
            .collect::<Vec<_>>(),
    )?;
    let mi_joint = mutual_information_with_bins(a, &cells, &cell_bins)?;
    Ok(mi_y0 + mi_eff - mi_joint)
}

/// Computes the full bias report for one observational dataset.
pub fn bias_report(obs: &ObservationalDataset) -> Result<BiasReport> {
    let a = &obs.a;
    let y0 = &obs.base.y0;
    let y1 = &obs.base.y1;
    let effect: Vec<f64> = y1.iter().zip(y0).map(|(u, v)| u - v).collect();

    let h_a = entropy_of_assignment(a);
    if h_a <= 0.0 {
        return Err(Error::DegenerateInput(
            "assignment entropy is zero (all units in one arm)".into(),
        ));
    }

    let bins_y0 = auto_bins(y0)?;
    let bins_y1 = auto_bins(y1)?;
    let bins_eff = auto_bins(&effect)?;

    Ok(BiasReport {
        b_y0: normalized(mutual_information_with_bins(a, y0, &bins_y0)?, h_a)?,
        b_y1: normalized(mutual_information_with_bins(a, y1, &bins_y1)?, h_a)?,
        b_effect: normalized(mutual_information_with_bins(a, &effect, &bins_eff)?, h_a)?,
        b_joint: joint_outcome_bias(a, y0, y1)?,
        b_x: x_bias_analytic(&obs.pi, a)?,
        h_a,
        prec_ass_pi: precision_assignment(a, y0, y1)?,
        bins_y0: bins_y0.k(),
        bins_y1: bins_y1.k(),
        bins_effect: bins_eff.k(),
        n: obs.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{gen_toy, ToyKind};
    use crate::numerics::RngStream;
    use crate::policy::{assign, default_beta_grid, PolicySource, PolicySpec};

    /// Brute-force discrete MI oracle over exact cell probabilities.
    fn discrete_mi_oracle(joint: &[(u8, usize, f64)]) -> f64 {
        let mut pa = [0.0f64; 2];
        let mut pz = std::collections::HashMap::new();
        for &(a, z, p) in joint {
            pa[a as usize] += p;
            *pz.entry(z).or_insert(0.0) += p;
        }
        joint
            .iter()
            .filter(|(_, _, p)| *p > 0.0)
            .map(|&(a, z, p)| p * (p / (pa[a as usize] * pz[&z])).log2())
            .sum()
    }

    #[test]
    fn assignment_entropy_cases() {
        let half: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        assert!((entropy_of_assignment(&half) - 1.0).abs() < 1e-12);
        assert_eq!(entropy_of_assignment(&vec![1u8; 50]), 0.0);
        let quarter: Vec<u8> = (0..100).map(|i| u8::from(i % 4 == 0)).collect();
        assert!((entropy_of_assignment(&quarter) - 0.811_278_1).abs() < 1e-6);
    }

    #[test]
    fn independent_score_has_near_zero_mi() {
        let root = RngStream::root(1001);
        let mut da = root.child(0).draws();
        let mut dz = root.child(1).draws();
        let n = 10_000;
        let a: Vec<u8> = (0..n).map(|_| da.bernoulli(0.5) as u8).collect();
        let z: Vec<f64> = (0..n).map(|_| dz.normal()).collect();
        let mi = mutual_information_binned(&a, &z).unwrap();
        assert!(mi <= 0.02, "mi = {mi}");
    }

    #[test]
    fn median_threshold_with_two_bins_is_one_bit() {
        let mut dz = RngStream::root(77).draws();
        let n = 2000;
        let z: Vec<f64> = (0..n).map(|_| dz.normal()).collect();
        let mut sorted = z.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
        let a: Vec<u8> = z.iter().map(|&v| u8::from(v >= median)).collect();
        let bins = BinEdges::from_edges(vec![sorted[0], median, sorted[n - 1]]).unwrap();
        let mi = mutual_information_with_bins(&a, &z, &bins).unwrap();
        assert!((mi - 1.0).abs() < 1e-9, "mi = {mi}");
    }

    /// The exact four-cell joint used across the estimator checks:
    /// P(A, b) = {(0,0): 0.4, (0,1): 0.1, (1,0): 0.1, (1,1): 0.4}.
    fn four_cell_sample(scale: usize) -> (Vec<u8>, Vec<f64>) {
        let mut a = Vec::new();
        let mut z = Vec::new();
        for (arm, val, cnt) in [(0u8, 0.0, 4), (0, 1.0, 1), (1, 0.0, 1), (1, 1.0, 4)] {
            for _ in 0..cnt * scale {
                a.push(arm);
                z.push(val);
            }
        }
        (a, z)
    }

    #[test]
    fn four_cell_joint_matches_oracle() {
        let (a, z) = four_cell_sample(10);
        let oracle = discrete_mi_oracle(&[
            (0, 0, 0.4),
            (0, 1, 0.1),
            (1, 0, 0.1),
            (1, 1, 0.4),
        ]);
        assert!((oracle - 0.278_072).abs() < 1e-6, "oracle = {oracle}");
        let mi = mutual_information_binned(&a, &z).unwrap();
        assert!((mi - oracle).abs() < 1e-12, "mi = {mi}");
        let b = z_bias(&a, &z).unwrap();
        assert!((b - 0.278_072).abs() < 1e-6, "b = {b}");
    }

    #[test]
    fn estimator_exact_on_discrete_support() {
        // three-valued z, bins at the distinct values
        let mut a = Vec::new();
        let mut z = Vec::new();
        let spec = [
            (0u8, -1.0, 30),
            (0, 0.0, 10),
            (0, 2.0, 10),
            (1, -1.0, 5),
            (1, 0.0, 20),
            (1, 2.0, 25),
        ];
        for &(arm, val, cnt) in &spec {
            for _ in 0..cnt {
                a.push(arm);
                z.push(val);
            }
        }
        let bins = BinEdges::from_edges(vec![-1.5, -0.5, 1.0, 2.5]).unwrap();
        let mi = mutual_information_with_bins(&a, &z, &bins).unwrap();
        let total = 100.0;
        let joint: Vec<(u8, usize, f64)> = spec
            .iter()
            .enumerate()
            .map(|(i, &(arm, _, cnt))| (arm, i % 3, cnt as f64 / total))
            .collect();
        let oracle = discrete_mi_oracle(&joint);
        assert!((mi - oracle).abs() < 1e-12);
    }

    #[test]
    fn z_bias_rejects_degenerate_assignment() {
        let a = vec![1u8; 100];
        let z: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(matches!(z_bias(&a, &z), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn rct_z_bias_small() {
        let root = RngStream::root(2024);
        let mut da = root.child(0).draws();
        let mut dz = root.child(1).draws();
        let n = 10_000;
        let a: Vec<u8> = (0..n).map(|_| da.bernoulli(0.5) as u8).collect();
        let z: Vec<f64> = (0..n).map(|_| dz.uniform()).collect();
        assert!(z_bias(&a, &z).unwrap() <= 0.02);
    }

    #[test]
    fn two_valued_threshold_policy_fully_biased() {
        // deterministic balanced threshold policy on a two-valued score
        let n = 5000;
        let z: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let a: Vec<u8> = z.iter().map(|&v| u8::from(v > 0.0)).collect();
        let b = z_bias(&a, &z).unwrap();
        assert!(b >= 0.98, "b = {b}");
    }

    #[test]
    fn joint_bias_independent_small() {
        let root = RngStream::root(3030);
        let mut da = root.child(0).draws();
        let mut dy = root.child(1).draws();
        let n = 10_000;
        let a: Vec<u8> = (0..n).map(|_| da.bernoulli(0.5) as u8).collect();
        let y0: Vec<f64> = (0..n).map(|_| dy.normal()).collect();
        let y1: Vec<f64> = (0..n).map(|_| dy.normal()).collect();
        let b = joint_outcome_bias(&a, &y0, &y1).unwrap();
        assert!(b <= 0.03, "b = {b}");
    }

    #[test]
    fn joint_bias_high_when_assignment_follows_effect() {
        let ds = gen_toy(ToyKind::Toy1, 10_000, 8, 0.0).unwrap();
        let a: Vec<u8> = ds
            .y1
            .iter()
            .zip(&ds.y0)
            .map(|(y1, y0)| u8::from(y1 - y0 > 0.0))
            .collect();
        let b = joint_outcome_bias(&a, &ds.y0, &ds.y1).unwrap();
        assert!(b >= 0.9, "b = {b}");
    }

    #[test]
    fn joint_bias_degenerates_to_marginal_when_outcomes_equal() {
        let mut dy = RngStream::root(555).draws();
        let n = 3000;
        let y0: Vec<f64> = (0..n).map(|_| dy.normal()).collect();
        let a: Vec<u8> = y0.iter().map(|&v| u8::from(v > 0.3)).collect();
        let joint = joint_outcome_bias(&a, &y0, &y0).unwrap();
        let bins = auto_bins_capped(&y0, JOINT_BIN_CAP).unwrap();
        let marginal = z_bias_with_bins(&a, &y0, &bins).unwrap();
        assert!((joint - marginal).abs() < 1e-9);
    }

    #[test]
    fn x_bias_rct_is_zero() {
        let a: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let pi = vec![0.5; 100];
        assert_eq!(x_bias_analytic(&pi, &a).unwrap(), 0.0);
    }

    #[test]
    fn x_bias_deterministic_balanced_is_one() {
        let pi: Vec<f64> = (0..100).map(|i| f64::from(i % 2 == 0)).collect();
        let a: Vec<u8> = pi.iter().map(|&p| p as u8).collect();
        assert_eq!(x_bias_analytic(&pi, &a).unwrap(), 1.0);
    }

    #[test]
    fn x_bias_half_mixed_cohort() {
        // half the cohort at pi = 0.5, half deterministic and balanced
        let n = 10_000;
        let mut pi = Vec::with_capacity(n);
        for i in 0..n {
            pi.push(match i % 4 {
                0 | 1 => 0.5,
                2 => 0.0,
                _ => 1.0,
            });
        }
        let mut draws = RngStream::root(808).draws();
        let a: Vec<u8> = pi.iter().map(|&p| draws.bernoulli(p) as u8).collect();
        let b = x_bias_analytic(&pi, &a).unwrap();
        assert!((b - 0.5).abs() < 0.02, "b = {b}");
    }

    #[test]
    fn report_rct_all_biases_small() {
        let ds = gen_toy(ToyKind::Toy1, 10_000, 4, 0.0).unwrap();
        let obs = assign(&ds, &PolicySpec::new(PolicySource::ToyCanonical, 0.0, 17)).unwrap();
        let r = bias_report(&obs).unwrap();
        for (name, b) in [
            ("b_y0", r.b_y0),
            ("b_y1", r.b_y1),
            ("b_effect", r.b_effect),
            ("b_joint", r.b_joint),
            ("b_x", r.b_x),
        ] {
            assert!(b <= 0.03, "{name} = {b}");
        }
        assert!(r.h_a > 0.99);
    }

    #[test]
    fn report_toy2_outcome_blind_policy() {
        let ds = gen_toy(ToyKind::Toy2, 10_000, 6, 0.0).unwrap();
        let obs = assign(&ds, &PolicySpec::new(PolicySource::ToyCanonical, 16.0, 23)).unwrap();
        let r = bias_report(&obs).unwrap();
        assert!(r.b_x >= 0.9, "b_x = {}", r.b_x);
        assert!(r.b_y0 <= 0.05, "b_y0 = {}", r.b_y0);
        assert!(r.b_y1 <= 0.05, "b_y1 = {}", r.b_y1);
        assert!(r.b_effect <= 0.05, "b_effect = {}", r.b_effect);
    }

    #[test]
    fn report_toy1_everything_biased() {
        let ds = gen_toy(ToyKind::Toy1, 10_000, 7, 0.0).unwrap();
        let obs = assign(&ds, &PolicySpec::new(PolicySource::ToyCanonical, 16.0, 29)).unwrap();
        let r = bias_report(&obs).unwrap();
        for (name, b) in [
            ("b_y0", r.b_y0),
            ("b_y1", r.b_y1),
            ("b_effect", r.b_effect),
            ("b_x", r.b_x),
        ] {
            assert!(b >= 0.8, "{name} = {b}");
        }
    }

    #[test]
    fn empirical_bias_monotone_in_beta() {
        let ds = gen_toy(ToyKind::Toy1, 5000, 15, 0.0).unwrap();
        let mut last = -1.0f64;
        for &beta in &default_beta_grid() {
            let obs = assign(&ds, &PolicySpec::new(PolicySource::ToyCanonical, beta, 31)).unwrap();
            let b = z_bias(&obs.a, &obs.z).unwrap();
            assert!(
                b + 0.02 >= last,
                "z-bias decreased: beta={beta} b={b} last={last}"
            );
            last = last.max(b);
        }
    }

    #[test]
    fn scale_invariance_exact_for_binary_scalings() {
        let mut dz = RngStream::root(99).draws();
        let n = 4000;
        let z: Vec<f64> = (0..n).map(|_| dz.normal()).collect();
        let a: Vec<u8> = z.iter().map(|&v| u8::from(v > 0.5)).collect();
        let base = z_bias(&a, &z).unwrap();
        for c in [2.0, 0.25, 8.0] {
            let scaled: Vec<f64> = z.iter().map(|&v| c * v).collect();
            let b = z_bias(&a, &scaled).unwrap();
            assert_eq!(b, base, "c = {c}");
        }
        // negative scalings reverse bin order: identical counts, but the
        // entropy sums accumulate in reverse, so compare with tolerance
        for c in [-0.5, -4.0] {
            let scaled: Vec<f64> = z.iter().map(|&v| c * v).collect();
            let b = z_bias(&a, &scaled).unwrap();
            assert!((b - base).abs() < 1e-12, "c = {c}");
        }
    }

    #[test]
    fn scale_invariance_tolerant_for_general_affine() {
        let mut dz = RngStream::root(100).draws();
        let n = 4000;
        let z: Vec<f64> = (0..n).map(|_| dz.uniform()).collect();
        let a: Vec<u8> = z.iter().map(|&v| u8::from(v > 0.4)).collect();
        let base = z_bias(&a, &z).unwrap();
        for (c, b0) in [(3.7, 1.2), (-1.3, -0.7), (0.001, 55.0)] {
            let t: Vec<f64> = z.iter().map(|&v| c * v + b0).collect();
            let b = z_bias(&a, &t).unwrap();
            assert!((b - base).abs() < 1e-9, "c={c} b0={b0}: {b} vs {base}");
        }
    }

    #[test]
    fn interaction_information_finite_on_toys() {
        let ds = gen_toy(ToyKind::Toy1, 4000, 2, 0.0).unwrap();
        let obs = assign(&ds, &PolicySpec::new(PolicySource::ToyCanonical, 8.0, 3)).unwrap();
        let eff: Vec<f64> = ds.y1.iter().zip(&ds.y0).map(|(a, b)| a - b).collect();
        let ii = interaction_information(&obs.a, &ds.y0, &eff).unwrap();
        assert!(ii.is_finite());
    }
}
