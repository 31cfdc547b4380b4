//! Shared-representation networks trained by mini-batch Adam: a
//! representation stack feeding two outcome heads, an optional linear-MMD
//! balancing term between the arms' representations, an optional propensity
//! head, and the propensity-only ActionNet.

use crate::error::{Error, Result};
use crate::learners::{CateModel, Capabilities, ColumnScaler};
use crate::numerics::{sigmoid, Matrix, RngStream};

/// Architecture and training settings for the network family.
#[derive(Debug, Clone)]
pub struct NetSpec {
    pub rep_layers: Vec<usize>,
    pub head_layers: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Weight of the squared linear MMD between arm representations.
    pub lambda_ipm: f64,
    /// Weight of the propensity-head cross-entropy.
    pub lambda_prop: f64,
    pub validation_fraction: f64,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            rep_layers: vec![64, 64],
            head_layers: vec![32],
            epochs: 300,
            batch: 128,
            step_size: 1e-3,
            seed: 0,
            lambda_ipm: 0.0,
            lambda_prop: 0.0,
            validation_fraction: 0.2,
        }
    }
}

impl NetSpec {
    fn validate(&self) -> Result<()> {
        if self.rep_layers.iter().chain(&self.head_layers).any(|&w| w == 0) {
            return Err(Error::InvalidArgument("layer widths must be >= 1".into()));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::InvalidArgument(
                "epochs and batch size must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument(
                "validation_fraction must be in [0, 1)".into(),
            ));
        }
        if self.lambda_ipm < 0.0 || self.lambda_prop < 0.0 {
            return Err(Error::InvalidArgument("penalties must be >= 0".into()));
        }
        Ok(())
    }
}

/// Which loss terms are active.
#[derive(Debug, Clone, Copy)]
pub struct LossSpec {
    pub outcomes: bool,
    pub lambda_ipm: f64,
    pub lambda_prop: f64,
}

#[derive(Debug, Clone)]
struct Dense {
    w: Matrix, // in_dim x out_dim
    b: Vec<f64>,
}

impl Dense {
    fn init(in_dim: usize, out_dim: usize, draws: &mut crate::numerics::Draws) -> Self {
        let scale = (2.0 / in_dim as f64).sqrt();
        let data: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| scale * draws.normal())
            .collect();
        // small random biases keep pre-activations off the exact ReLU kink
        let b: Vec<f64> = (0..out_dim).map(|_| 0.01 * draws.normal()).collect();
        Self {
            w: Matrix::new(in_dim, out_dim, data).expect("finite init"),
            b,
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w: Matrix::zeros(self.w.rows(), self.w.cols()),
            b: vec![0.0; self.b.len()],
        }
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = x.matmul(&self.w);
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                out.set(i, j, out.get(i, j) + self.b[j]);
            }
        }
        out
    }
}

/// out = aᵀ b for a: n x m, b: n x k.
fn at_b(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.cols(), b.cols());
    for i in 0..a.rows() {
        let ra = a.row(i);
        let rb = b.row(i);
        for (j, &va) in ra.iter().enumerate() {
            if va == 0.0 {
                continue;
            }
            for (k, &vb) in rb.iter().enumerate() {
                out.set(j, k, out.get(j, k) + va * vb);
            }
        }
    }
    out
}

/// out = a bᵀ for a: n x k, b: m x k.
fn a_bt(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let ra = a.row(i);
        for j in 0..b.rows() {
            let rb = b.row(j);
            let dot: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
            out.set(i, j, dot);
        }
    }
    out
}

fn relu_inplace(m: &mut Matrix) {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if m.get(i, j) < 0.0 {
                m.set(i, j, 0.0);
            }
        }
    }
}

struct StackCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation output of each layer.
    pre: Vec<Matrix>,
}

/// Runs a dense stack; every layer is ReLU except, when `final_linear`,
/// the last one.
fn forward_stack(layers: &[Dense], x: &Matrix, final_linear: bool) -> (StackCache, Matrix) {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut cur = x.clone();
    for (l, layer) in layers.iter().enumerate() {
        inputs.push(cur.clone());
        let z = layer.forward(&cur);
        pre.push(z.clone());
        cur = z;
        if !(final_linear && l == layers.len() - 1) {
            relu_inplace(&mut cur);
        }
    }
    (StackCache { inputs, pre }, cur)
}

/// Backpropagates `d_out` through a stack; returns per-layer gradients and
/// the gradient with respect to the stack input.
fn backward_stack(
    layers: &[Dense],
    cache: &StackCache,
    d_out: Matrix,
    final_linear: bool,
) -> (Vec<Dense>, Matrix) {
    let mut grads: Vec<Dense> = layers.iter().map(Dense::zeros_like).collect();
    let mut d_cur = d_out;
    for l in (0..layers.len()).rev() {
        if !(final_linear && l == layers.len() - 1) {
            // gate by the ReLU mask
            let z = &cache.pre[l];
            for i in 0..d_cur.rows() {
                for j in 0..d_cur.cols() {
                    if z.get(i, j) <= 0.0 {
                        d_cur.set(i, j, 0.0);
                    }
                }
            }
        }
        grads[l].w = at_b(&cache.inputs[l], &d_cur);
        for j in 0..d_cur.cols() {
            grads[l].b[j] = (0..d_cur.rows()).map(|i| d_cur.get(i, j)).sum();
        }
        d_cur = a_bt(&d_cur, &layers[l].w);
    }
    (grads, d_cur)
}

/// All parameters of one network.
#[derive(Debug, Clone)]
pub struct NetParams {
    rep: Vec<Dense>,
    head0: Option<Vec<Dense>>,
    head1: Option<Vec<Dense>>,
    prop: Option<Vec<Dense>>,
}

fn build_head(
    in_dim: usize,
    widths: &[usize],
    draws: &mut crate::numerics::Draws,
) -> Vec<Dense> {
    let mut layers = Vec::with_capacity(widths.len() + 1);
    let mut cur = in_dim;
    for &w in widths {
        layers.push(Dense::init(cur, w, draws));
        cur = w;
    }
    layers.push(Dense::init(cur, 1, draws));
    layers
}

impl NetParams {
    /// Outcome heads plus a propensity head; initialization order is
    /// representation, head 0, head 1, propensity, so zero-penalty variants
    /// share the draws that matter.
    pub fn tar_family(d: usize, spec: &NetSpec, stream: &RngStream) -> Self {
        let mut draws = stream.draws();
        let mut rep = Vec::with_capacity(spec.rep_layers.len());
        let mut cur = d;
        for &w in &spec.rep_layers {
            rep.push(Dense::init(cur, w, &mut draws));
            cur = w;
        }
        let head0 = build_head(cur, &spec.head_layers, &mut draws);
        let head1 = build_head(cur, &spec.head_layers, &mut draws);
        let prop = build_head(cur, &spec.head_layers, &mut draws);
        Self {
            rep,
            head0: Some(head0),
            head1: Some(head1),
            prop: Some(prop),
        }
    }

    /// Propensity-only network.
    pub fn action_net(d: usize, spec: &NetSpec, stream: &RngStream) -> Self {
        let mut draws = stream.draws();
        let mut rep = Vec::with_capacity(spec.rep_layers.len());
        let mut cur = d;
        for &w in &spec.rep_layers {
            rep.push(Dense::init(cur, w, &mut draws));
            cur = w;
        }
        let prop = build_head(cur, &spec.head_layers, &mut draws);
        Self {
            rep,
            head0: None,
            head1: None,
            prop: Some(prop),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            rep: self.rep.iter().map(Dense::zeros_like).collect(),
            head0: self
                .head0
                .as_ref()
                .map(|h| h.iter().map(Dense::zeros_like).collect()),
            head1: self
                .head1
                .as_ref()
                .map(|h| h.iter().map(Dense::zeros_like).collect()),
            prop: self
                .prop
                .as_ref()
                .map(|h| h.iter().map(Dense::zeros_like).collect()),
        }
    }

    fn stacks(&self) -> impl Iterator<Item = &Vec<Dense>> {
        std::iter::once(&self.rep)
            .chain(self.head0.iter())
            .chain(self.head1.iter())
            .chain(self.prop.iter())
    }

    /// Flattens every parameter in a fixed traversal order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for stack in self.stacks() {
            for layer in stack {
                out.extend_from_slice(layer.w.data());
                out.extend_from_slice(&layer.b);
            }
        }
        out
    }

    /// Writes back a flat vector produced by [`NetParams::to_flat`].
    pub fn set_from_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        let mut stacks: Vec<&mut Vec<Dense>> = Vec::new();
        stacks.push(&mut self.rep);
        if let Some(h) = self.head0.as_mut() {
            stacks.push(h);
        }
        if let Some(h) = self.head1.as_mut() {
            stacks.push(h);
        }
        if let Some(h) = self.prop.as_mut() {
            stacks.push(h);
        }
        for stack in stacks {
            for layer in stack {
                let (r, c) = (layer.w.rows(), layer.w.cols());
                layer.w =
                    Matrix::new(r, c, flat[pos..pos + r * c].to_vec()).expect("flat params finite");
                pos += r * c;
                let blen = layer.b.len();
                layer.b.copy_from_slice(&flat[pos..pos + blen]);
                pos += blen;
            }
        }
        assert_eq!(pos, flat.len(), "flat parameter length mismatch");
    }

    fn rep_forward(&self, x: &Matrix) -> Matrix {
        if self.rep.is_empty() {
            return x.clone();
        }
        forward_stack(&self.rep, x, false).1
    }

    fn head_forward(&self, head: &[Dense], phi: &Matrix) -> Vec<f64> {
        forward_stack(head, phi, true).1.col(0)
    }

    /// Outcome predictions on (already scaled) inputs.
    pub fn predict_outcomes(&self, x: &Matrix) -> Option<(Vec<f64>, Vec<f64>)> {
        let (h0, h1) = (self.head0.as_ref()?, self.head1.as_ref()?);
        let phi = self.rep_forward(x);
        Some((self.head_forward(h0, &phi), self.head_forward(h1, &phi)))
    }

    /// Propensity predictions on (already scaled) inputs.
    pub fn predict_propensity(&self, x: &Matrix) -> Option<Vec<f64>> {
        let prop = self.prop.as_ref()?;
        let phi = self.rep_forward(x);
        Some(
            self.head_forward(prop, &phi)
                .into_iter()
                .map(sigmoid)
                .collect(),
        )
    }
}

/// Squared Euclidean distance between the column means of two
/// representation batches.
pub fn mmd_linear(rep0: &Matrix, rep1: &Matrix) -> Result<f64> {
    if rep0.rows() == 0 || rep1.rows() == 0 {
        return Err(Error::DegenerateInput(
            "mmd needs both sides nonempty".into(),
        ));
    }
    if rep0.cols() != rep1.cols() {
        return Err(Error::DimensionMismatch(
            "representation widths differ".into(),
        ));
    }
    let m0 = rep0.col_means();
    let m1 = rep1.col_means();
    Ok(m0
        .iter()
        .zip(&m1)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// One forward/backward pass over a batch. Inputs are already scaled;
/// `y` is consulted only when the loss spec has outcomes enabled.
pub fn loss_and_grad(
    params: &NetParams,
    x: &Matrix,
    a: &[u8],
    y: &[f64],
    loss: &LossSpec,
) -> Result<(f64, NetParams)> {
    let b_size = x.rows();
    assert_eq!(a.len(), b_size, "assignment length mismatch");
    if loss.outcomes {
        assert_eq!(y.len(), b_size, "outcome length mismatch");
    }

    let (rep_cache, phi) = if params.rep.is_empty() {
        (
            StackCache {
                inputs: Vec::new(),
                pre: Vec::new(),
            },
            x.clone(),
        )
    } else {
        forward_stack(&params.rep, x, false)
    };

    let mut grads = params.zeros_like();
    let mut d_phi = Matrix::zeros(phi.rows(), phi.cols());
    let mut total = 0.0;
    let bf = b_size as f64;

    if loss.outcomes {
        let h0 = params.head0.as_ref().expect("outcome loss without head0");
        let h1 = params.head1.as_ref().expect("outcome loss without head1");
        let (c0, out0) = forward_stack(h0, &phi, true);
        let (c1, out1) = forward_stack(h1, &phi, true);

        let mut d_out0 = Matrix::zeros(b_size, 1);
        let mut d_out1 = Matrix::zeros(b_size, 1);
        for i in 0..b_size {
            let (pred, d_slot) = if a[i] == 1 {
                (out1.get(i, 0), &mut d_out1)
            } else {
                (out0.get(i, 0), &mut d_out0)
            };
            let resid = pred - y[i];
            total += 0.5 * resid * resid / bf;
            d_slot.set(i, 0, resid / bf);
        }

        let (g0, dp0) = backward_stack(h0, &c0, d_out0, true);
        let (g1, dp1) = backward_stack(h1, &c1, d_out1, true);
        accumulate(grads.head0.as_mut().unwrap(), g0);
        accumulate(grads.head1.as_mut().unwrap(), g1);
        add_matrix(&mut d_phi, &dp0);
        add_matrix(&mut d_phi, &dp1);
    }

    if loss.lambda_ipm > 0.0 {
        let idx0: Vec<usize> = (0..b_size).filter(|&i| a[i] == 0).collect();
        let idx1: Vec<usize> = (0..b_size).filter(|&i| a[i] == 1).collect();
        // skip the balancing term when a batch misses an arm
        if !idx0.is_empty() && !idx1.is_empty() {
            let r0 = phi.select_rows(&idx0);
            let r1 = phi.select_rows(&idx1);
            let m0 = r0.col_means();
            let m1 = r1.col_means();
            let mmd: f64 = m0.iter().zip(&m1).map(|(u, v)| (u - v) * (u - v)).sum();
            total += loss.lambda_ipm * mmd;
            let (n0, n1) = (idx0.len() as f64, idx1.len() as f64);
            for i in 0..b_size {
                let (sign, n_arm) = if a[i] == 0 { (1.0, n0) } else { (-1.0, n1) };
                for j in 0..phi.cols() {
                    let g = loss.lambda_ipm * 2.0 * (m0[j] - m1[j]) * sign / n_arm;
                    d_phi.set(i, j, d_phi.get(i, j) + g);
                }
            }
        }
    }

    if loss.lambda_prop > 0.0 {
        let hp = params.prop.as_ref().expect("propensity loss without head");
        let (cp, logits) = forward_stack(hp, &phi, true);
        let mut d_logit = Matrix::zeros(b_size, 1);
        for i in 0..b_size {
            let logit = logits.get(i, 0);
            let ai = a[i] as f64;
            total += loss.lambda_prop * (softplus(logit) - ai * logit) / bf;
            d_logit.set(i, 0, loss.lambda_prop * (sigmoid(logit) - ai) / bf);
        }
        let (gp, dpp) = backward_stack(hp, &cp, d_logit, true);
        accumulate(grads.prop.as_mut().unwrap(), gp);
        add_matrix(&mut d_phi, &dpp);
    }

    if !params.rep.is_empty() {
        let (g_rep, _) = backward_stack(&params.rep, &rep_cache, d_phi, false);
        accumulate(&mut grads.rep, g_rep);
    }

    if !total.is_finite() {
        return Err(Error::Diverged(format!("non-finite loss {total}")));
    }
    Ok((total, grads))
}

fn accumulate(into: &mut [Dense], from: Vec<Dense>) {
    for (dst, src) in into.iter_mut().zip(from) {
        let mut w = dst.w.clone();
        for i in 0..w.rows() {
            for j in 0..w.cols() {
                w.set(i, j, w.get(i, j) + src.w.get(i, j));
            }
        }
        dst.w = w;
        for (b, s) in dst.b.iter_mut().zip(&src.b) {
            *b += s;
        }
    }
}

fn add_matrix(dst: &mut Matrix, src: &Matrix) {
    for i in 0..dst.rows() {
        for j in 0..dst.cols() {
            dst.set(i, j, dst.get(i, j) + src.get(i, j));
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
    lr: f64,
}

impl Adam {
    fn new(dim: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t as i32);
        let c2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grads[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grads[i] * grads[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + EPS);
        }
    }
}

/// Mini-batch training with a best-validation snapshot.
fn train(
    mut params: NetParams,
    x: &Matrix,
    a: &[u8],
    y: &[f64],
    spec: &NetSpec,
    loss_spec: &LossSpec,
) -> Result<NetParams> {
    let n = x.rows();
    let stream = RngStream::root(spec.seed);
    let mut shuffle_draws = stream.child(1).draws();
    let mut split_draws = stream.child(2).draws();

    let mut order: Vec<usize> = (0..n).collect();
    split_draws.shuffle(&mut order);
    let n_val = ((n as f64) * spec.validation_fraction).floor() as usize;
    let (val_idx, train_idx) = if n_val >= 1 && n - n_val >= 2 {
        (order[..n_val].to_vec(), order[n_val..].to_vec())
    } else {
        (Vec::new(), order)
    };

    let subset = |idx: &[usize]| -> (Matrix, Vec<u8>, Vec<f64>) {
        let xm = x.select_rows(idx);
        let am: Vec<u8> = idx.iter().map(|&i| a[i]).collect();
        let ym: Vec<f64> = if y.is_empty() {
            Vec::new()
        } else {
            idx.iter().map(|&i| y[i]).collect()
        };
        (xm, am, ym)
    };
    let (val_x, val_a, val_y) = subset(&val_idx);

    let mut flat = params.to_flat();
    let mut adam = Adam::new(flat.len(), spec.step_size);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut train_order = train_idx.clone();

    for _epoch in 0..spec.epochs {
        shuffle_draws.shuffle(&mut train_order);
        for chunk in train_order.chunks(spec.batch.max(1)) {
            let (bx, ba, by) = subset(chunk);
            let (_, grads) = loss_and_grad(&params, &bx, &ba, &by, loss_spec)?;
            let gflat = grads.to_flat();
            adam.step(&mut flat, &gflat);
            params.set_from_flat(&flat);
        }
        if !val_idx.is_empty() {
            let (val_loss, _) = loss_and_grad(&params, &val_x, &val_a, &val_y, loss_spec)?;
            if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
                best = Some((val_loss, flat.clone()));
            }
        }
    }

    if let Some((_, best_flat)) = best {
        params.set_from_flat(&best_flat);
    }
    Ok(params)
}

/// Outcome-head network with optional balancing and propensity terms.
/// Zero penalties recover the plain shared-representation baseline.
pub struct TarFamilyModel {
    scaler: ColumnScaler,
    params: NetParams,
    has_propensity: bool,
}

pub fn fit_tarnet_family(
    x: &Matrix,
    a: &[u8],
    yf: &[f64],
    spec: &NetSpec,
) -> Result<TarFamilyModel> {
    spec.validate()?;
    let n1 = a.iter().filter(|&&v| v == 1).count();
    if n1 == 0 || n1 == a.len() {
        return Err(Error::DegenerateInput(
            "network training needs both arms present".into(),
        ));
    }
    let scaler = ColumnScaler::fit(x);
    let xs = scaler.transform(x);
    let init = NetParams::tar_family(x.cols(), spec, &RngStream::root(spec.seed).child(0));
    let loss_spec = LossSpec {
        outcomes: true,
        lambda_ipm: spec.lambda_ipm,
        lambda_prop: spec.lambda_prop,
    };
    let params = train(init, &xs, a, yf, spec, &loss_spec)?;
    Ok(TarFamilyModel {
        scaler,
        params,
        has_propensity: spec.lambda_prop > 0.0,
    })
}

impl CateModel for TarFamilyModel {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            outcomes: true,
            cate: true,
            propensity: self.has_propensity,
        }
    }

    fn predict_mu0(&self, x: &Matrix) -> Result<Vec<f64>> {
        let (mu0, _) = self
            .params
            .predict_outcomes(&self.scaler.transform(x))
            .expect("outcome heads present");
        Ok(mu0)
    }

    fn predict_mu1(&self, x: &Matrix) -> Result<Vec<f64>> {
        let (_, mu1) = self
            .params
            .predict_outcomes(&self.scaler.transform(x))
            .expect("outcome heads present");
        Ok(mu1)
    }

    fn predict_propensity(&self, x: &Matrix) -> Result<Vec<f64>> {
        if !self.has_propensity {
            return Err(Error::MissingCapability(
                "propensity head was not trained (zero penalty)".into(),
            ));
        }
        Ok(self
            .params
            .predict_propensity(&self.scaler.transform(x))
            .expect("propensity head present"))
    }
}

/// Propensity-only network over observed treatment decisions; treats when
/// the predicted propensity is at least one half.
pub struct ActionNetModel {
    scaler: ColumnScaler,
    params: NetParams,
}

pub fn fit_actionnet(x: &Matrix, a: &[u8], spec: &NetSpec) -> Result<ActionNetModel> {
    spec.validate()?;
    let n1 = a.iter().filter(|&&v| v == 1).count();
    if n1 == 0 || n1 == a.len() {
        return Err(Error::DegenerateInput(
            "network training needs both arms present".into(),
        ));
    }
    let scaler = ColumnScaler::fit(x);
    let xs = scaler.transform(x);
    let init = NetParams::action_net(x.cols(), spec, &RngStream::root(spec.seed).child(0));
    let loss_spec = LossSpec {
        outcomes: false,
        lambda_ipm: 0.0,
        lambda_prop: 1.0,
    };
    let params = train(init, &xs, a, &[], spec, &loss_spec)?;
    Ok(ActionNetModel { scaler, params })
}

impl CateModel for ActionNetModel {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            outcomes: false,
            cate: false,
            propensity: true,
        }
    }

    fn predict_propensity(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self
            .params
            .predict_propensity(&self.scaler.transform(x))
            .expect("propensity head present"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::fit_logistic;
    use crate::metrics::model_policy;

    fn small_spec(seed: u64) -> NetSpec {
        NetSpec {
            rep_layers: vec![8],
            head_layers: vec![6],
            epochs: 150,
            batch: 32,
            step_size: 3e-3,
            seed,
            lambda_ipm: 0.0,
            lambda_prop: 0.0,
            validation_fraction: 0.2,
        }
    }

    fn random_design(n: usize, d: usize, seed: u64) -> Matrix {
        let mut draws = RngStream::root(seed).draws();
        Matrix::new(n, d, (0..n * d).map(|_| draws.normal()).collect()).unwrap()
    }

    fn random_batch(
        seed: u64,
        b: usize,
        d: usize,
    ) -> (Matrix, Vec<u8>, Vec<f64>) {
        let mut draws = RngStream::root(seed).draws();
        let x = Matrix::new(b, d, (0..b * d).map(|_| draws.normal()).collect()).unwrap();
        let a: Vec<u8> = (0..b).map(|_| draws.bernoulli(0.5) as u8).collect();
        let y: Vec<f64> = (0..b).map(|_| draws.normal()).collect();
        (x, a, y)
    }

    /// Central finite differences over the flattened parameters.
    fn fd_grad(
        params: &NetParams,
        x: &Matrix,
        a: &[u8],
        y: &[f64],
        loss: &LossSpec,
        h: f64,
    ) -> Vec<f64> {
        let flat = params.to_flat();
        let mut out = vec![0.0; flat.len()];
        let mut work = params.clone();
        for i in 0..flat.len() {
            let mut plus = flat.clone();
            plus[i] += h;
            work.set_from_flat(&plus);
            let (lp, _) = loss_and_grad(&work, x, a, y, loss).unwrap();
            let mut minus = flat.clone();
            minus[i] -= h;
            work.set_from_flat(&minus);
            let (lm, _) = loss_and_grad(&work, x, a, y, loss).unwrap();
            out[i] = (lp - lm) / (2.0 * h);
        }
        out
    }

    fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(&ga, &gn)| {
                let denom = ga.abs().max(gn.abs()).max(1e-6);
                (ga - gn).abs() / denom
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradients_match_finite_differences_all_head_combos() {
        let d = 3;
        let spec = NetSpec {
            rep_layers: vec![4],
            head_layers: vec![3],
            ..small_spec(0)
        };
        let combos = [
            LossSpec { outcomes: true, lambda_ipm: 0.0, lambda_prop: 0.0 },
            LossSpec { outcomes: true, lambda_ipm: 0.01, lambda_prop: 0.0 },
            LossSpec { outcomes: true, lambda_ipm: 0.0, lambda_prop: 2.0 },
            LossSpec { outcomes: true, lambda_ipm: 0.005, lambda_prop: 1.0 },
        ];
        for (ci, loss) in combos.iter().enumerate() {
            let stream = RngStream::root(100 + ci as u64);
            let params = NetParams::tar_family(d, &spec, &stream.child(0));
            let (x, mut a, y) = random_batch(200 + ci as u64, 8, d);
            a[0] = 0;
            a[1] = 1; // both arms present so the MMD term is active
            let (_, grads) = loss_and_grad(&params, &x, &a, &y, loss).unwrap();
            let numeric = fd_grad(&params, &x, &a, &y, loss, 1e-5);
            let err = max_rel_err(&grads.to_flat(), &numeric);
            assert!(err < 1e-4, "combo {ci}: max rel err {err}");
        }
    }

    #[test]
    fn gradients_match_for_propensity_only_net() {
        let spec = small_spec(0);
        let stream = RngStream::root(300);
        let params = NetParams::action_net(3, &spec, &stream.child(0));
        let (x, a, _) = random_batch(301, 10, 3);
        let loss = LossSpec {
            outcomes: false,
            lambda_ipm: 0.0,
            lambda_prop: 1.0,
        };
        let (_, grads) = loss_and_grad(&params, &x, &a, &[], &loss).unwrap();
        let numeric = fd_grad(&params, &x, &a, &[], &loss, 1e-5);
        let err = max_rel_err(&grads.to_flat(), &numeric);
        assert!(err < 1e-4, "max rel err {err}");
    }

    #[test]
    fn zero_network_loss_and_bias_gradient() {
        let spec = small_spec(0);
        let stream = RngStream::root(400);
        let mut params = NetParams::tar_family(2, &spec, &stream.child(0));
        let zeros = vec![0.0; params.to_flat().len()];
        params.set_from_flat(&zeros);

        let x = random_design(6, 2, 401);
        let a = vec![0u8; 6]; // single arm: head 0 sees every unit
        let y = vec![1.0, 2.0, -1.0, 0.5, 3.0, -2.0];
        let loss = LossSpec {
            outcomes: true,
            lambda_ipm: 0.0,
            lambda_prop: 0.0,
        };
        let (l, grads) = loss_and_grad(&params, &x, &a, &y, &loss).unwrap();
        let mean_sq = y.iter().map(|v| v * v).sum::<f64>() / 6.0;
        assert!((l - mean_sq / 2.0).abs() < 1e-12);

        // gradient of head-0 output bias is -mean(y)
        let head0 = grads.head0.as_ref().unwrap();
        let out_bias_grad = head0.last().unwrap().b[0];
        let mean_y = y.iter().sum::<f64>() / 6.0;
        assert!((out_bias_grad + mean_y).abs() < 1e-12);
    }

    #[test]
    fn loss_invariant_to_batch_permutation() {
        let spec = small_spec(0);
        let stream = RngStream::root(500);
        let params = NetParams::tar_family(3, &spec, &stream.child(0));
        let (x, a, y) = random_batch(501, 12, 3);
        let loss = LossSpec {
            outcomes: true,
            lambda_ipm: 0.01,
            lambda_prop: 0.5,
        };
        let (l1, _) = loss_and_grad(&params, &x, &a, &y, &loss).unwrap();

        let perm: Vec<usize> = (0..12).rev().collect();
        let xp = x.select_rows(&perm);
        let ap: Vec<u8> = perm.iter().map(|&i| a[i]).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let (l2, _) = loss_and_grad(&params, &xp, &ap, &yp, &loss).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
    }

    #[test]
    fn mmd_cases() {
        let r0 = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let r1 = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(mmd_linear(&r0, &r0).unwrap(), 0.0);
        assert_eq!(mmd_linear(&r0, &r1).unwrap(), 1.0);

        // translation invariance
        let shift = |m: &Matrix, dx: f64| {
            let mut out = m.clone();
            for i in 0..out.rows() {
                for j in 0..out.cols() {
                    out.set(i, j, out.get(i, j) + dx);
                }
            }
            out
        };
        let a = random_design(5, 3, 601);
        let b = random_design(7, 3, 602);
        let base = mmd_linear(&a, &b).unwrap();
        let shifted = mmd_linear(&shift(&a, 2.5), &shift(&b, 2.5)).unwrap();
        assert!((base - shifted).abs() < 1e-9);

        let empty = Matrix::zeros(0, 2);
        assert!(mmd_linear(&empty, &r1).is_err());
    }

    #[test]
    fn linear_reduction_recovers_per_arm_fits() {
        // no hidden layers: the heads are linear maps, so the network should
        // approach the per-arm least-squares solution
        let n = 400;
        let x = random_design(n, 2, 700);
        let a: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                if a[i] == 1 {
                    0.8 * x.get(i, 1) + 0.2
                } else {
                    0.5 * x.get(i, 0)
                }
            })
            .collect();
        let spec = NetSpec {
            rep_layers: vec![],
            head_layers: vec![],
            epochs: 800,
            batch: 64,
            step_size: 5e-3,
            seed: 7,
            lambda_ipm: 0.0,
            lambda_prop: 0.0,
            validation_fraction: 0.2,
        };
        let model = fit_tarnet_family(&x, &a, &y, &spec).unwrap();
        let tau = model.predict_cate(&x).unwrap();
        let truth: Vec<f64> = (0..n)
            .map(|i| 0.8 * x.get(i, 1) + 0.2 - 0.5 * x.get(i, 0))
            .collect();
        let pehe = (tau
            .iter()
            .zip(&truth)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(pehe < 0.05, "pehe = {pehe}");
    }

    #[test]
    fn zero_penalty_variants_identical() {
        let n = 160;
        let x = random_design(n, 3, 800);
        let a: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<f64> = (0..n).map(|i| x.get(i, 0) + a[i] as f64 * x.get(i, 2)).collect();

        let spec = |ipm: f64, prop: f64| NetSpec {
            epochs: 30,
            lambda_ipm: ipm,
            lambda_prop: prop,
            seed: 42,
            ..small_spec(42)
        };
        let tarnet = fit_tarnet_family(&x, &a, &y, &spec(0.0, 0.0)).unwrap();
        let cfr0 = fit_tarnet_family(&x, &a, &y, &spec(0.0, 0.0)).unwrap();
        let dragon0 = fit_tarnet_family(&x, &a, &y, &spec(0.0, 0.0)).unwrap();

        let p_tar = tarnet.predict_cate(&x).unwrap();
        assert_eq!(p_tar, cfr0.predict_cate(&x).unwrap());
        assert_eq!(p_tar, dragon0.predict_cate(&x).unwrap());
    }

    #[test]
    fn deterministic_given_seed() {
        let n = 100;
        let x = random_design(n, 2, 900);
        let a: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<f64> = (0..n).map(|i| x.get(i, 0) * a[i] as f64).collect();
        let spec = NetSpec {
            epochs: 20,
            ..small_spec(5)
        };
        let m1 = fit_tarnet_family(&x, &a, &y, &spec).unwrap();
        let m2 = fit_tarnet_family(&x, &a, &y, &spec).unwrap();
        assert_eq!(m1.predict_cate(&x).unwrap(), m2.predict_cate(&x).unwrap());
    }

    #[test]
    fn consistency_cate_equals_head_difference() {
        let n = 80;
        let x = random_design(n, 2, 1000);
        let a: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<f64> = (0..n).map(|i| x.get(i, 1)).collect();
        let spec = NetSpec {
            epochs: 10,
            ..small_spec(3)
        };
        let m = fit_tarnet_family(&x, &a, &y, &spec).unwrap();
        let mu0 = m.predict_mu0(&x).unwrap();
        let mu1 = m.predict_mu1(&x).unwrap();
        let tau = m.predict_cate(&x).unwrap();
        for i in 0..n {
            assert!((tau[i] - (mu1[i] - mu0[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn dragonnet_propensity_learns_threshold_policy() {
        let n = 600;
        let x = random_design(n, 3, 1100);
        let a: Vec<u8> = (0..n).map(|i| u8::from(x.get(i, 0) > 0.0)).collect();
        let y: Vec<f64> = (0..n).map(|i| x.get(i, 1)).collect();
        let spec = NetSpec {
            epochs: 200,
            lambda_prop: 2.0,
            ..small_spec(11)
        };
        let model = fit_tarnet_family(&x, &a, &y, &spec).unwrap();

        let test_x = random_design(300, 3, 1101);
        let truth: Vec<u8> = (0..300).map(|i| u8::from(test_x.get(i, 0) > 0.0)).collect();
        let probs = model.predict_propensity(&test_x).unwrap();
        let acc = probs
            .iter()
            .zip(&truth)
            .filter(|(&p, &t)| u8::from(p >= 0.5) == t)
            .count() as f64
            / 300.0;
        assert!(acc >= 0.95, "net accuracy {acc}");

        // logistic-regression oracle agrees that the boundary is learnable
        let lr = fit_logistic(&x, &a, 1e-6, 25).unwrap();
        let lr_acc = lr
            .predict_proba(&test_x)
            .iter()
            .zip(&truth)
            .filter(|(&p, &t)| u8::from(p >= 0.5) == t)
            .count() as f64
            / 300.0;
        assert!(lr_acc >= 0.95, "oracle accuracy {lr_acc}");
    }

    #[test]
    fn actionnet_near_chance_on_rct() {
        let n = 1200;
        let x = random_design(n, 3, 1200);
        let mut draws = RngStream::root(1201).draws();
        let a: Vec<u8> = (0..n).map(|_| draws.bernoulli(0.5) as u8).collect();
        let spec = NetSpec {
            epochs: 60,
            ..small_spec(13)
        };
        let model = fit_actionnet(&x, &a, &spec).unwrap();
        // held-out units: with no signal, out-of-sample accuracy is chance
        let x_test = random_design(n, 3, 1202);
        let mut test_draws = RngStream::root(1203).draws();
        let a_test: Vec<u8> = (0..n).map(|_| test_draws.bernoulli(0.5) as u8).collect();
        let probs = model.predict_propensity(&x_test).unwrap();
        let acc = probs
            .iter()
            .zip(&a_test)
            .filter(|(&p, &t)| u8::from(p >= 0.5) == t)
            .count() as f64
            / n as f64;
        assert!((acc - 0.5).abs() <= 0.05, "acc = {acc}");
    }

    #[test]
    fn actionnet_learns_threshold_policy() {
        let n = 600;
        let x = random_design(n, 2, 1300);
        let a: Vec<u8> = (0..n).map(|i| u8::from(x.get(i, 0) > 0.0)).collect();
        let spec = NetSpec {
            epochs: 200,
            ..small_spec(17)
        };
        let model = fit_actionnet(&x, &a, &spec).unwrap();
        let probs = model.predict_propensity(&x).unwrap();
        let acc = probs
            .iter()
            .zip(&a)
            .filter(|(&p, &t)| u8::from(p >= 0.5) == t)
            .count() as f64
            / n as f64;
        assert!(acc >= 0.95, "acc = {acc}");
    }

    #[test]
    fn propensity_tie_assigns_arm_one() {
        struct Half;
        impl CateModel for Half {
            fn capabilities(&self) -> Capabilities {
                Capabilities {
                    outcomes: false,
                    cate: false,
                    propensity: true,
                }
            }
            fn predict_propensity(&self, x: &Matrix) -> Result<Vec<f64>> {
                Ok(vec![0.5; x.rows()])
            }
        }
        let x = Matrix::zeros(3, 2);
        assert_eq!(model_policy(&Half, &x).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn single_arm_training_rejected() {
        let x = random_design(10, 2, 1400);
        let a = vec![1u8; 10];
        let y = vec![0.0; 10];
        assert!(fit_tarnet_family(&x, &a, &y, &small_spec(1)).is_err());
        assert!(fit_actionnet(&x, &a, &small_spec(1)).is_err());
    }
}
