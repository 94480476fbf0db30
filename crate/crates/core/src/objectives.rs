//! Loss terms. Each builder records its term on a [`Graph`] so the composite
//! loss can be differentiated end to end.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::config::Direction;
use crate::graph::{Graph, Var};
use crate::params::ParamId;
use crate::{Result, Tensor};

/// Scalar values of every loss term for one batch (or the mean over an epoch).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_vae: f64,
    pub l_reg: f64,
    pub l_pred: f64,
    pub l_cons: f64,
    pub l_total: f64,
    /// `λ₁ Σ|θ|` over VAE parameters, already included in `l_vae`.
    pub l1_penalty: f64,
    /// Set when the regression loss had no observed entry to score.
    pub reg_empty: bool,
}

impl LossBreakdown {
    /// Elementwise mean of several breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut out = LossBreakdown::default();
        for b in items {
            out.l_vae += b.l_vae / n;
            out.l_reg += b.l_reg / n;
            out.l_pred += b.l_pred / n;
            out.l_cons += b.l_cons / n;
            out.l_total += b.l_total / n;
            out.l1_penalty += b.l1_penalty / n;
            out.reg_empty |= b.reg_empty;
        }
        out
    }

    /// Name of the first non-finite term, in evaluation order.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        [
            ("l_vae", self.l_vae),
            ("l_reg", self.l_reg),
            ("l_pred", self.l_pred),
            ("l_cons", self.l_cons),
            ("l_total", self.l_total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

/// `KL(N(μ, diag σ²) ‖ N(0, I)) = ½ Σ (σ² + μ² - 1 - log σ²)`, summed over all entries.
pub fn kl_diag_gaussian(g: &mut Graph, mu: Var, logvar: Var) -> Result<Var> {
    let var = g.exp(logvar)?;
    let mu2 = g.mul(mu, mu)?;
    let a = g.add(var, mu2)?;
    let b = g.sub(a, logvar)?;
    let c = g.shift(b, -1.0)?;
    let s = g.sum(c)?;
    g.scale(s, 0.5)
}

/// `Σ w ⊙ (-½ log 2π - ½ logvar - ½ (x - μ)² / exp(logvar))`.
///
/// `weight` is the observation mask (or all ones for the zero-filled variant).
pub fn gaussian_log_likelihood(g: &mut Graph, x: Var, mu: Var, logvar: Var, weight: Var) -> Result<Var> {
    let r = g.sub(x, mu)?;
    let r2 = g.mul(r, r)?;
    let neg_lv = g.neg(logvar)?;
    let precision = g.exp(neg_lv)?;
    let quad = g.mul(r2, precision)?;
    let inner = g.add(quad, logvar)?;
    let scaled = g.scale(inner, -0.5)?;
    let per_entry = g.shift(scaled, -0.5 * libm::log(2.0 * PI))?;
    let weighted = g.mul(per_entry, weight)?;
    g.sum(weighted)
}

/// `λ₁ Σ |θ|` over the listed parameters.
pub fn l1_penalty(g: &mut Graph, params: &[Var], lambda: f64) -> Result<Var> {
    let mut total = g.constant(Tensor::scalar(0.0));
    for &p in params {
        let a = g.abs(p)?;
        let s = g.sum(a)?;
        total = g.add(total, s)?;
    }
    g.scale(total, lambda)
}

/// Negative ELBO `-(log-likelihood - KL)` plus an already-scaled penalty.
pub fn loss_vae(g: &mut Graph, log_likelihood: Var, kl: Var, penalty: Var) -> Result<Var> {
    let elbo = g.sub(log_likelihood, kl)?;
    let neg = g.neg(elbo)?;
    g.add(neg, penalty)
}

/// Mean absolute error between observations and combined estimates over
/// observed entries. Each element of `steps` is `(x̃_t, m_t, c_t)`; `observed`
/// is the number of ones across all masks. Returns the loss and whether it was
/// empty (zero observed entries, loss fixed at 0).
pub fn loss_reg(g: &mut Graph, steps: &[(Var, Var, Var)], observed: usize) -> Result<(Var, bool)> {
    if observed == 0 {
        return Ok((g.constant(Tensor::scalar(0.0)), true));
    }
    let mut total = g.constant(Tensor::scalar(0.0));
    for &(x, m, c) in steps {
        let r = g.sub(x, c)?;
        let a = g.abs(r)?;
        let masked = g.mul(a, m)?;
        let s = g.sum(masked)?;
        total = g.add(total, s)?;
    }
    Ok((g.scale(total, 1.0 / observed as f64)?, false))
}

/// Mean binary cross-entropy from logits.
pub fn loss_pred(g: &mut Graph, logits: Var, labels: &[f64]) -> Result<Var> {
    g.bce_with_logits(logits, labels)
}

/// Mean absolute difference between aligned forward and backward completions.
pub fn loss_consistency(g: &mut Graph, pairs: &[(Var, Var)]) -> Result<Var> {
    let mut total = g.constant(Tensor::scalar(0.0));
    let mut count = 0usize;
    for &(f, b) in pairs {
        let r = g.sub(f, b)?;
        let a = g.abs(r)?;
        count += g.value(a).numel();
        let s = g.sum(a)?;
        total = g.add(total, s)?;
    }
    g.scale(total, 1.0 / count.max(1) as f64)
}

/// Loss weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub xi: f64,
}

/// `α L_vae + β L_reg + L_pred`, plus `ξ L_cons` in bidirectional mode.
pub fn loss_total(
    g: &mut Graph,
    vae: Var,
    reg: Var,
    pred: Var,
    cons: Option<Var>,
    w: Weights,
    direction: Direction,
) -> Result<Var> {
    let a = g.scale(vae, w.alpha)?;
    let b = g.scale(reg, w.beta)?;
    let ab = g.add(a, b)?;
    let mut total = g.add(ab, pred)?;
    if let (Direction::Bi, Some(c)) = (direction, cons) {
        let xc = g.scale(c, w.xi)?;
        total = g.add(total, xc)?;
    }
    Ok(total)
}

/// Closed-form KL for plain slices.
pub fn kl_value(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(&m, &lv)| libm::exp(lv) + m * m - 1.0 - lv)
        .sum::<f64>()
}

/// Collects the VAE parameters as graph leaves for the ℓ1 penalty.
pub fn bind_params(g: &mut Graph, store: &crate::ParameterStore, ids: &[ParamId]) -> Vec<Var> {
    ids.iter().map(|&id| g.param(store, id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn v(g: &mut Graph, x: &[f64]) -> Var {
        g.constant(Tensor::vector(x.to_vec()))
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn kl_spot_values() {
        let mut g = Graph::new();
        let cases = [
            (0.0, 0.0, 0.0),
            (1.0, 0.0, 0.5),
            (0.0, libm::log(4.0), 0.5 * (4.0 - 1.0 - libm::log(4.0))),
        ];
        for (m, lv, want) in cases {
            let (mu, logvar) = (v(&mut g, &[m]), v(&mut g, &[lv]));
            let kl = kl_diag_gaussian(&mut g, mu, logvar).unwrap();
            assert!(close(g.value(kl).item(), want, 1e-12));
        }
        assert!(close(0.5 * (4.0 - 1.0 - libm::log(4.0)), 0.8069, 1e-4));
    }

    #[test]
    fn log_likelihood_cases() {
        let mut g = Graph::new();
        let (x, mu, lv, one) = (v(&mut g, &[3.0]), v(&mut g, &[3.0]), v(&mut g, &[0.0]), v(&mut g, &[1.0]));
        let ll = gaussian_log_likelihood(&mut g, x, mu, lv, one).unwrap();
        assert!(close(g.value(ll).item(), -0.9189385332046727, 1e-12));

        let x2 = v(&mut g, &[4.0]);
        let ll = gaussian_log_likelihood(&mut g, x2, mu, lv, one).unwrap();
        assert!(close(g.value(ll).item(), -1.4189385332046727, 1e-12));

        let (xs, mus, lvs, zero) = (
            v(&mut g, &[1.0, 2.0]),
            v(&mut g, &[0.0, 0.0]),
            v(&mut g, &[0.0, 1.0]),
            v(&mut g, &[0.0, 0.0]),
        );
        let ll = gaussian_log_likelihood(&mut g, xs, mus, lvs, zero).unwrap();
        assert_eq!(g.value(ll).item(), 0.0);
    }

    #[test]
    fn reg_loss_cases() {
        let mut g = Graph::new();
        let x = v(&mut g, &[1.0, 2.0]);
        let c = v(&mut g, &[2.0, 2.0]);
        let m11 = v(&mut g, &[1.0, 1.0]);
        let m10 = v(&mut g, &[1.0, 0.0]);
        let (l, empty) = loss_reg(&mut g, &[(x, m11, c)], 2).unwrap();
        assert_eq!((g.value(l).item(), empty), (0.5, false));
        let (l, _) = loss_reg(&mut g, &[(x, m10, c)], 1).unwrap();
        assert_eq!(g.value(l).item(), 1.0);
        let (l, _) = loss_reg(&mut g, &[(x, m11, x)], 2).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
        let (l, empty) = loss_reg(&mut g, &[], 0).unwrap();
        assert_eq!((g.value(l).item(), empty), (0.0, true));
    }

    #[test]
    fn prediction_loss_cases() {
        let mut g = Graph::new();
        let l = v(&mut g, &[0.0]);
        let p = loss_pred(&mut g, l, &[1.0]).unwrap();
        assert!(close(g.value(p).item(), core::f64::consts::LN_2, 1e-12));
        let l = v(&mut g, &[-60.0]);
        let p = loss_pred(&mut g, l, &[0.0]).unwrap();
        assert!(g.value(p).item() < 1e-25);
        let l = v(&mut g, &[100.0, -100.0]);
        let p = loss_pred(&mut g, l, &[1.0, 0.0]).unwrap();
        assert!(g.value(p).item().is_finite());
    }

    #[test]
    fn consistency_cases() {
        let mut g = Graph::new();
        let a = v(&mut g, &[0.0, 2.0]);
        let b = v(&mut g, &[1.0, 1.0]);
        let l = loss_consistency(&mut g, &[(a, b)]).unwrap();
        assert_eq!(g.value(l).item(), 1.0);
        let l = loss_consistency(&mut g, &[(a, a)]).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
        let c = v(&mut g, &[1.0, 3.0]);
        let l = loss_consistency(&mut g, &[(a, c), (c, a)]).unwrap();
        assert_eq!(g.value(l).item(), 1.0);
    }

    #[test]
    fn total_weights() {
        let mut g = Graph::new();
        let (vae, reg, pred, cons) = (v(&mut g, &[8.0]), v(&mut g, &[4.0]), v(&mut g, &[0.5]), v(&mut g, &[2.0]));
        let zero = Weights { alpha: 0.0, beta: 0.0, xi: 0.1 };
        let t = loss_total(&mut g, vae, reg, pred, Some(cons), zero, Direction::Uni).unwrap();
        assert_eq!(g.value(t).item(), 0.5);
        let w = Weights { alpha: 0.75, beta: 0.25, xi: 0.1 };
        let t = loss_total(&mut g, vae, reg, pred, Some(cons), w, Direction::Uni).unwrap();
        assert_eq!(g.value(t).item(), 6.0 + 1.0 + 0.5);
        let t = loss_total(&mut g, vae, reg, pred, Some(cons), w, Direction::Bi).unwrap();
        assert!(close(g.value(t).item(), 7.7, 1e-12));
    }

    #[test]
    fn vae_loss_is_negative_elbo_plus_penalty() {
        let mut g = Graph::new();
        let ll = v(&mut g, &[-3.0]);
        let kl = v(&mut g, &[0.0]);
        let p0 = v(&mut g, &[0.0]);
        let l = loss_vae(&mut g, ll, kl, p0).unwrap();
        assert_eq!(g.value(l).item(), 3.0);

        let w = g.constant(Tensor::vector(vec![1.0, -2.0]));
        let p1 = l1_penalty(&mut g, &[w], 0.1).unwrap();
        let p2 = l1_penalty(&mut g, &[w], 0.2).unwrap();
        assert_eq!(g.value(p2).item(), 2.0 * g.value(p1).item());
    }
}
