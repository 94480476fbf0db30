//! Uncertainty-aware recurrent imputation cell.
//!
//! Per step `t`, with row-batched `B x D` inputs:
//!
//! ```text
//! υ   = exp(-max(0, ū W_ū + b_ū))            uncertainty decay
//! x^υ = (x̄ W_υ + b_υ) ⊙ υ                     W_υ diagonal masked
//! γ   = exp(-max(0, Δ W_γ + b_γ))             temporal decay, B x H
//! ĥ   = h ⊙ γ
//! x^r = ĥ W_r + b_r
//! x^τ = x^r W_τ + b_τ                          W_τ diagonal masked
//! c   = a·x^υ + b·x^τ + c₀                     1x1 convolution over 2 channels
//! x^c = m ⊙ x̃ + (1 - m) ⊙ c
//! h'  = GRU([x^c, m], ĥ)
//! ```
//!
//! Weights are stored `[in, out]` and applied as `x W`.

use alloc::vec::Vec;

use rand::Rng;

use crate::graph::{Graph, Var};
use crate::params::{Group, ParamId, ParameterStore};
use crate::{Result, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct CellParams {
    pub w_u: ParamId,
    pub b_u: ParamId,
    pub w_v: ParamId,
    pub b_v: ParamId,
    pub w_g: ParamId,
    pub b_g: ParamId,
    pub w_r: ParamId,
    pub b_r: ParamId,
    pub w_t: ParamId,
    pub b_t: ParamId,
    /// `[1, 2]`: channel weights (a, b) of the combiner.
    pub comb_w: ParamId,
    /// `[1]`: combiner bias c₀.
    pub comb_b: ParamId,
    pub wz: ParamId,
    pub bz: ParamId,
    pub wr: ParamId,
    pub br: ParamId,
    pub wh: ParamId,
    pub bh: ParamId,
    pub w_y: ParamId,
    pub b_y: ParamId,
    pub features: usize,
    pub hidden: usize,
}

impl CellParams {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        prefix: &str,
        features: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let (d, h) = (features, hidden);
        let gru_in = 2 * d + h;
        let grp = Group::Recurrent;
        let n = |s: &str| alloc::format!("{prefix}.{s}");
        CellParams {
            w_u: store.weight(&n("w_u"), d, d, grp, false, rng),
            b_u: store.bias(&n("b_u"), d, grp),
            w_v: store.weight(&n("w_v"), d, d, grp, true, rng),
            b_v: store.bias(&n("b_v"), d, grp),
            w_g: store.weight(&n("w_g"), d, h, grp, false, rng),
            b_g: store.bias(&n("b_g"), h, grp),
            w_r: store.weight(&n("w_r"), h, d, grp, false, rng),
            b_r: store.bias(&n("b_r"), d, grp),
            w_t: store.weight(&n("w_t"), d, d, grp, true, rng),
            b_t: store.bias(&n("b_t"), d, grp),
            comb_w: store.weight(&n("comb_w"), 1, 2, grp, false, rng),
            comb_b: store.bias(&n("comb_b"), 1, grp),
            wz: store.weight(&n("gru_z.w"), gru_in, h, grp, false, rng),
            bz: store.bias(&n("gru_z.b"), h, grp),
            wr: store.weight(&n("gru_r.w"), gru_in, h, grp, false, rng),
            br: store.bias(&n("gru_r.b"), h, grp),
            wh: store.weight(&n("gru_h.w"), gru_in, h, grp, false, rng),
            bh: store.bias(&n("gru_h.b"), h, grp),
            w_y: store.weight(&n("w_y"), h, 1, grp, false, rng),
            b_y: store.bias(&n("b_y"), 1, grp),
            features,
            hidden,
        }
    }

    /// Places every parameter on `g` once, with the diagonal masks applied.
    pub fn bind(&self, g: &mut Graph, store: &ParameterStore) -> Result<BoundCell> {
        let mut p = |id| g.param(store, id);
        let (w_u, b_u, w_v_raw, b_v) = (p(self.w_u), p(self.b_u), p(self.w_v), p(self.b_v));
        let (w_g, b_g, w_r, b_r) = (p(self.w_g), p(self.b_g), p(self.w_r), p(self.b_r));
        let (w_t_raw, b_t, comb_w, comb_b) = (p(self.w_t), p(self.b_t), p(self.comb_w), p(self.comb_b));
        let (wz, bz, wr, br, wh, bh) = (p(self.wz), p(self.bz), p(self.wr), p(self.br), p(self.wh), p(self.bh));
        let (w_y, b_y) = (p(self.w_y), p(self.b_y));
        let w_v = g.zero_diag(w_v_raw)?;
        let w_t = g.zero_diag(w_t_raw)?;
        let comb_a = g.slice_cols(comb_w, 0, 1)?;
        let comb_b_w = g.slice_cols(comb_w, 1, 1)?;
        Ok(BoundCell {
            w_u,
            b_u,
            w_v,
            b_v,
            w_g,
            b_g,
            w_r,
            b_r,
            w_t,
            b_t,
            comb_a,
            comb_b: comb_b_w,
            comb_c: comb_b,
            wz,
            bz,
            wr,
            br,
            wh,
            bh,
            w_y,
            b_y,
        })
    }
}

/// [`CellParams`] placed on a particular graph.
#[derive(Debug, Clone, Copy)]
pub struct BoundCell {
    pub w_u: Var,
    pub b_u: Var,
    pub w_v: Var,
    pub b_v: Var,
    pub w_g: Var,
    pub b_g: Var,
    pub w_r: Var,
    pub b_r: Var,
    pub w_t: Var,
    pub b_t: Var,
    pub comb_a: Var,
    pub comb_b: Var,
    pub comb_c: Var,
    pub wz: Var,
    pub bz: Var,
    pub wr: Var,
    pub br: Var,
    pub wh: Var,
    pub bh: Var,
    pub w_y: Var,
    pub b_y: Var,
}

fn affine(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = g.matmul(x, w)?;
    g.add_row(xw, b)
}

/// `exp(-max(0, x W + b))`, which always lies in `(0, 1]`.
fn negative_exp_rectifier(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let a = affine(g, x, w, b)?;
    let r = g.relu(a)?;
    let n = g.neg(r)?;
    g.exp(n)
}

impl BoundCell {
    /// Returns `(υ, x^υ)`. With `gated == false` the decay is skipped
    /// entirely and `υ` is `None`.
    pub fn uncertainty_gated_estimate(
        &self,
        g: &mut Graph,
        estimate: Var,
        uncertainty: Var,
        gated: bool,
    ) -> Result<(Option<Var>, Var)> {
        let regressed = affine(g, estimate, self.w_v, self.b_v)?;
        if !gated {
            return Ok((None, regressed));
        }
        let upsilon = negative_exp_rectifier(g, uncertainty, self.w_u, self.b_u)?;
        let x_v = g.mul(regressed, upsilon)?;
        Ok((Some(upsilon), x_v))
    }

    /// Returns `(γ, ĥ)`.
    pub fn temporal_decayed_history(&self, g: &mut Graph, h: Var, delta: Var) -> Result<(Var, Var)> {
        let gamma = negative_exp_rectifier(g, delta, self.w_g, self.b_g)?;
        let h_hat = g.mul(h, gamma)?;
        Ok((gamma, h_hat))
    }

    /// Returns `(x^r, x^τ)`.
    pub fn history_feature_estimate(&self, g: &mut Graph, h_hat: Var) -> Result<(Var, Var)> {
        let x_r = affine(g, h_hat, self.w_r, self.b_r)?;
        let x_tau = self.cross_feature(g, x_r)?;
        Ok((x_r, x_tau))
    }

    /// `x^τ = x^r W_τ + b_τ`; each feature is estimated from the others only.
    pub fn cross_feature(&self, g: &mut Graph, x_r: Var) -> Result<Var> {
        affine(g, x_r, self.w_t, self.b_t)
    }

    /// Returns `(c, x^c)`.
    pub fn combine_and_complete(
        &self,
        g: &mut Graph,
        x_v: Var,
        x_tau: Var,
        observed: &StepInputs,
    ) -> Result<(Var, Var)> {
        let left = g.mul(self.comb_a, x_v)?;
        let right = g.mul(self.comb_b, x_tau)?;
        let sum = g.add(left, right)?;
        let c = g.add(sum, self.comb_c)?;
        let kept = g.mul(observed.mask, observed.values)?;
        let filled = g.mul(observed.inv_mask, c)?;
        let x_c = g.add(kept, filled)?;
        Ok((c, x_c))
    }

    /// GRU update on input `[x^c, m]` from the decayed state `ĥ`.
    pub fn gated_cell_step(&self, g: &mut Graph, x_c: Var, mask: Var, h_hat: Var) -> Result<Var> {
        let input = g.concat_cols(x_c, mask)?;
        let with_h = g.concat_cols(input, h_hat)?;
        let za = affine(g, with_h, self.wz, self.bz)?;
        let z = g.sigmoid(za)?;
        let ra = affine(g, with_h, self.wr, self.br)?;
        let r = g.sigmoid(ra)?;
        let reset_h = g.mul(r, h_hat)?;
        let with_reset = g.concat_cols(input, reset_h)?;
        let ca = affine(g, with_reset, self.wh, self.bh)?;
        let candidate = g.tanh(ca)?;
        let step = g.sub(candidate, h_hat)?;
        let moved = g.mul(z, step)?;
        g.add(h_hat, moved)
    }

    /// Pre-sigmoid outcome logit `h W_y + b_y`, shaped `B x 1`.
    pub fn predict_logit(&self, g: &mut Graph, h: Var) -> Result<Var> {
        affine(g, h, self.w_y, self.b_y)
    }
}

/// Per-step graph inputs for one direction.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs {
    /// VAE merged estimate x̄_t.
    pub estimate: Var,
    /// VAE uncertainty ū_t.
    pub uncertainty: Var,
    /// Zero-filled observations x̃_t.
    pub values: Var,
    pub mask: Var,
    pub inv_mask: Var,
    pub delta: Var,
}

/// Intermediates of one step.
#[derive(Debug, Clone, Copy)]
pub struct StepTrace {
    pub upsilon: Option<Var>,
    pub x_v: Var,
    pub gamma: Var,
    pub h_hat: Var,
    pub x_r: Var,
    pub x_tau: Var,
    pub combined: Var,
    pub completed: Var,
    pub h: Var,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub steps: Vec<StepTrace>,
    pub logit: Var,
}

/// Runs the cell over `inputs` in order, starting from `h₀ = 0`.
pub fn unroll(g: &mut Graph, cell: &BoundCell, inputs: &[StepInputs], hidden: usize, gated: bool) -> Result<Trace> {
    let rows = g.value(inputs[0].values).dims2().0;
    let mut h = g.constant(Tensor::zeros(&[rows, hidden]));
    let mut steps = Vec::with_capacity(inputs.len());
    for step in inputs {
        let (upsilon, x_v) = cell.uncertainty_gated_estimate(g, step.estimate, step.uncertainty, gated)?;
        let (gamma, h_hat) = cell.temporal_decayed_history(g, h, step.delta)?;
        let (x_r, x_tau) = cell.history_feature_estimate(g, h_hat)?;
        let (combined, completed) = cell.combine_and_complete(g, x_v, x_tau, step)?;
        h = cell.gated_cell_step(g, completed, step.mask, h_hat)?;
        steps.push(StepTrace {
            upsilon,
            x_v,
            gamma,
            h_hat,
            x_r,
            x_tau,
            combined,
            completed,
            h,
        });
    }
    let logit = cell.predict_logit(g, h)?;
    Ok(Trace { steps, logit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use alloc::vec;

    fn setup(d: usize, h: usize) -> (ParameterStore, CellParams) {
        let mut store = ParameterStore::new();
        let cell = CellParams::new(&mut store, "fwd", d, h, &mut stream(5, 0));
        (store, cell)
    }

    fn set(store: &mut ParameterStore, id: ParamId, data: &[f64]) {
        store.tensor_mut(id).data_mut().copy_from_slice(data);
    }

    fn row(g: &mut Graph, v: &[f64]) -> Var {
        g.constant(Tensor::matrix(1, v.len(), v.to_vec()).unwrap())
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn uncertainty_gate() {
        let (mut store, cell) = setup(2, 2);
        set(&mut store, cell.w_u, &[0.0; 4]);
        let mut g = Graph::new();
        let bound = cell.bind(&mut g, &store).unwrap();
        let xbar = row(&mut g, &[2.0, 3.0]);
        let u = row(&mut g, &[10.0, 0.0]);
        let (ups, _) = bound.uncertainty_gated_estimate(&mut g, xbar, u, true).unwrap();
        assert_eq!(g.value(ups.unwrap()).data(), &[1.0, 1.0]);

        set(&mut store, cell.w_u, &[1.0, 0.0, 0.0, 1.0]);
        set(&mut store, cell.w_v, &[0.0, 1.0, 1.0, 0.0]);
        let mut g = Graph::new();
        let bound = cell.bind(&mut g, &store).unwrap();
        let xbar = row(&mut g, &[2.0, 3.0]);
        let u = row(&mut g, &[10.0, 0.0]);
        let (ups, _) = bound.uncertainty_gated_estimate(&mut g, xbar, u, true).unwrap();
        assert!(close(g.value(ups.unwrap()).data(), &[libm::exp(-10.0), 1.0]));
        let zero_u = row(&mut g, &[0.0, 0.0]);
        let (_, x_v) = bound.uncertainty_gated_estimate(&mut g, xbar, zero_u, true).unwrap();
        assert_eq!(g.value(x_v).data(), &[3.0, 2.0]);
    }

    #[test]
    fn temporal_decay() {
        let (mut store, cell) = setup(2, 2);
        set(&mut store, cell.w_g, &[1.0, 0.0, 0.0, 1.0]);
        let mut g = Graph::new();
        let bound = cell.bind(&mut g, &store).unwrap();
        let h = row(&mut g, &[1.0, 1.0]);
        let delta = row(&mut g, &[0.0, 2.0]);
        let (gamma, h_hat) = bound.temporal_decayed_history(&mut g, h, delta).unwrap();
        assert!(close(g.value(gamma).data(), &[1.0, libm::exp(-2.0)]));
        assert!((g.value(h_hat).data()[1] - 0.1353352832366127).abs() < 1e-15);

        set(&mut store, cell.w_g, &[-1.0, -1.0, -1.0, -1.0]);
        let mut g = Graph::new();
        let bound = cell.bind(&mut g, &store).unwrap();
        let h = row(&mut g, &[0.7, -0.2]);
        let delta = row(&mut g, &[3.0, 1.0]);
        let (gamma, h_hat) = bound.temporal_decayed_history(&mut g, h, delta).unwrap();
        assert_eq!(g.value(gamma).data(), &[1.0, 1.0]);
        assert_eq!(g.value(h_hat).data(), &[0.7, -0.2]);
    }

    #[test]
    fn history_regression_masks_diagonal() {
        let (mut store, cell) = setup(2, 2);
        set(&mut store, cell.w_r, &[1.0, 0.0, 0.0, 1.0]);
        set(&mut store, cell.w_t, &[5.0, 1.0, 1.0, 5.0]);
        let mut g = Graph::new();
        let bound = cell.bind(&mut g, &store).unwrap();
        let h_hat = row(&mut g, &[1.0, 2.0]);
        let (x_r, x_tau) = bound.history_feature_estimate(&mut g, h_hat).unwrap();
        assert_eq!(g.value(x_r).data(), &[1.0, 2.0]);
        assert_eq!(g.value(x_tau).data(), &[2.0, 1.0]);
    }

    #[test]
    fn combine_then_complete() {
        let (mut store, cell) = setup(2, 2);
        set(&mut store, cell.comb_w, &[0.5, 0.5]);
        let mut g = Graph::new();
        let bound = cell.bind(&mut g, &store).unwrap();
        let x_v = row(&mut g, &[2.0, 4.0]);
        let x_tau = row(&mut g, &[4.0, 0.0]);
        let zero = row(&mut g, &[0.0, 0.0]);
        let step = StepInputs {
            estimate: zero,
            uncertainty: zero,
            values: row(&mut g, &[7.0, 0.0]),
            mask: row(&mut g, &[1.0, 0.0]),
            inv_mask: row(&mut g, &[0.0, 1.0]),
            delta: zero,
        };
        let (c, x_c) = bound.combine_and_complete(&mut g, x_v, x_tau, &step).unwrap();
        assert_eq!(g.value(c).data(), &[3.0, 2.0]);
        assert_eq!(g.value(x_c).data(), &[7.0, 2.0]);
    }

    #[test]
    fn gru_with_zero_weights_halves_state() {
        let (mut store, cell) = setup(2, 3);
        for id in [cell.wz, cell.wr, cell.wh] {
            store.tensor_mut(id).data_mut().fill(0.0);
        }
        let mut g = Graph::new();
        let bound = cell.bind(&mut g, &store).unwrap();
        let x_c = row(&mut g, &[0.3, -2.0]);
        let m = row(&mut g, &[1.0, 0.0]);
        let h_hat = row(&mut g, &[1.0, -0.4, 0.0]);
        let h = bound.gated_cell_step(&mut g, x_c, m, h_hat).unwrap();
        assert_eq!(g.value(h).data(), &[0.5, -0.2, 0.0]);
        let zero_in = row(&mut g, &[0.0, 0.0]);
        let zero_h = row(&mut g, &[0.0, 0.0, 0.0]);
        let h = bound.gated_cell_step(&mut g, zero_in, zero_in, zero_h).unwrap();
        assert_eq!(g.value(h).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn prediction_from_zero_weights_is_half() {
        let (mut store, cell) = setup(2, 3);
        store.tensor_mut(cell.w_y).data_mut().fill(0.0);
        let mut g = Graph::new();
        let bound = cell.bind(&mut g, &store).unwrap();
        let h = row(&mut g, &[0.2, 0.9, -0.3]);
        let logit = bound.predict_logit(&mut g, h).unwrap();
        let p = g.sigmoid(logit).unwrap();
        assert_eq!(g.value(p).data(), &[0.5]);
        let two = g.constant(Tensor::scalar(2.0));
        let p2 = g.sigmoid(two).unwrap();
        assert!((g.value(p2).item() - 0.8807970779778823).abs() < 1e-15);
    }

    #[test]
    fn single_step_unroll_starts_from_zero_state() {
        let (store, cell) = setup(2, 3);
        let mut g = Graph::new();
        let bound = cell.bind(&mut g, &store).unwrap();
        let v = row(&mut g, &[0.5, 0.0]);
        let step = StepInputs {
            estimate: v,
            uncertainty: row(&mut g, &[0.0, 0.7]),
            values: v,
            mask: row(&mut g, &[1.0, 0.0]),
            inv_mask: row(&mut g, &[0.0, 1.0]),
            delta: row(&mut g, &[1.0, 1.0]),
        };
        let trace = unroll(&mut g, &bound, &[step], 3, true).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(g.value(trace.steps[0].h_hat).data(), &vec![0.0; 3][..]);
        assert_eq!(g.value(trace.steps[0].completed).data()[0], 0.5);
    }
}
