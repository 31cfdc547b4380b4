use crate::error::{Error, Result};

/// Numerically stable logistic function e^x / (1 + e^x).
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Entropy of a Bernoulli(p) variable in bits, with 0 log 0 := 0.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population (1/n) standard deviation.
pub fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Centers and scales to mean 0 and population standard deviation 1.
pub fn standardize(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::DegenerateInput(
            "standardize needs at least 2 values".into(),
        ));
    }
    let m = mean(v);
    let s = population_std(v);
    if s == 0.0 || !s.is_finite() {
        return Err(Error::DegenerateInput(
            "standardize called on a constant vector".into(),
        ));
    }
    Ok(v.iter().map(|x| (x - m) / s).collect())
}

/// Linear-interpolation quantile of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// Spearman rank correlation; average ranks for ties.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(
            "spearman inputs differ in length".into(),
        ));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateInput("spearman needs >= 2 points".into()));
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let mx = mean(&rx);
    let my = mean(&ry);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "spearman input has constant ranks".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_known_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-12);
        assert!((sigmoid(1.0) - 0.731_058_6).abs() < 1e-6);
    }

    #[test]
    fn sigmoid_symmetry_grid() {
        for &x in &[-100.0, -10.0, -2.5, -0.1, 0.0, 0.1, 2.5, 10.0, 100.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn entropy_known_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.25).unwrap() - 0.811_278_1).abs() < 1e-6);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn entropy_concave_max_at_half() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let h: Vec<f64> = grid.iter().map(|&p| binary_entropy(p).unwrap()).collect();
        let max_idx = h
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(grid[max_idx], 0.5);
        // midpoint concavity on interior points
        for w in h.windows(3) {
            assert!(w[1] + 1e-12 >= (w[0] + w[2]) / 2.0);
        }
    }

    #[test]
    fn standardize_hand_example() {
        let z = standardize(&[1.0, 2.0, 3.0]).unwrap();
        assert!((z[0] + 1.224_745).abs() < 1e-6);
        assert!(z[1].abs() < 1e-12);
        assert!((z[2] - 1.224_745).abs() < 1e-6);
    }

    #[test]
    fn standardize_idempotent() {
        let z = standardize(&[1.0, 2.0, 3.0, 10.0]).unwrap();
        let z2 = standardize(&z).unwrap();
        for (a, b) in z.iter().zip(&z2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn standardize_rejects_constant() {
        assert!(standardize(&[5.0, 5.0, 5.0]).is_err());
    }

    proptest! {
        #[test]
        fn standardize_moments(v in proptest::collection::vec(-1e6f64..1e6, 2..200)) {
            prop_assume!(population_std(&v) > 1e-9);
            let z = standardize(&v).unwrap();
            prop_assert!(mean(&z).abs() < 1e-9);
            prop_assert!((population_std(&z) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
    }

    #[test]
    fn spearman_monotone_and_ties() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 6.0, 8.0, 10.0];
        assert!((spearman_rho(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let yr: Vec<f64> = y.iter().rev().copied().collect();
        assert!((spearman_rho(&x, &yr).unwrap() + 1.0).abs() < 1e-12);
        let tied = [1.0, 1.0, 2.0, 2.0, 3.0];
        assert!(spearman_rho(&x, &tied).unwrap() > 0.9);
    }
}
