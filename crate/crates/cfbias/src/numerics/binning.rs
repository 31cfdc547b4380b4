use crate::error::{Error, Result};
use crate::numerics::stats::quantile_sorted;

pub const MAX_BINS: usize = 64;

/// Equal-width histogram edges. Intervals are right-open except the last,
/// which is right-closed, so every value in [first, last] lands in exactly
/// one bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEdges {
    edges: Vec<f64>,
}

impl BinEdges {
    /// `k` equal-width bins spanning [lo, hi].
    pub fn equal_width(lo: f64, hi: f64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("bin count must be >= 1".into()));
        }
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "bin range [{lo}, {hi}] is empty"
            )));
        }
        let mut edges = Vec::with_capacity(k + 1);
        for i in 0..=k {
            edges.push(lo + (hi - lo) * i as f64 / k as f64);
        }
        Ok(Self { edges })
    }

    /// Explicit edges; must be strictly increasing.
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidArgument("need at least 2 edges".into()));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "edges must be strictly increasing".into(),
            ));
        }
        Ok(Self { edges })
    }

    pub fn k(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bin index for `x`; values outside the range clamp into the end bins.
    pub fn bin_of(&self, x: f64) -> usize {
        let lo = self.edges[0];
        let hi = self.edges[self.edges.len() - 1];
        if x <= lo {
            return 0;
        }
        if x >= hi {
            return self.k() - 1;
        }
        // binary search over edges: first edge strictly greater than x
        let mut l = 0usize;
        let mut r = self.edges.len() - 1;
        while l + 1 < r {
            let m = (l + r) / 2;
            if self.edges[m] <= x {
                l = m;
            } else {
                r = m;
            }
        }
        l
    }

    /// Discretizes a sample.
    pub fn digitize(&self, v: &[f64]) -> Vec<usize> {
        v.iter().map(|&x| self.bin_of(x)).collect()
    }
}

/// Automatic equal-width binning: `k = clamp(max(Sturges, Freedman-Diaconis),
/// 2, 64)` over the sample range. A constant sample yields a single bin, so
/// mutual information against it is 0.
pub fn auto_bins(v: &[f64]) -> Result<BinEdges> {
    auto_bins_capped(v, MAX_BINS)
}

/// `auto_bins` with a caller-supplied upper cap on the bin count.
pub fn auto_bins_capped(v: &[f64], cap: usize) -> Result<BinEdges> {
    if v.len() < 2 {
        return Err(Error::DegenerateInput(
            "auto_bins needs at least 2 values".into(),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "auto_bins input must be finite".into(),
        ));
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        // single bin around the constant value
        return BinEdges::from_edges(vec![lo - 0.5, lo + 0.5]);
    }

    let n = v.len() as f64;
    let sturges = n.log2().ceil() as usize + 1;

    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let fd = if iqr > 0.0 {
        let width = 2.0 * iqr / n.cbrt();
        ((hi - lo) / width).ceil() as usize
    } else {
        0
    };

    let k = sturges.max(fd).clamp(2, cap.max(2));
    BinEdges::equal_width(lo, hi, k)
}
