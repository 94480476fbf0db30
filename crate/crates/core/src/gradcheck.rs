//! Central-difference verification of analytic gradients.

use crate::graph::{Graph, Var};
use crate::params::ParameterStore;
use crate::{Error, Result};

/// Largest relative disagreement, over every entry of every parameter in
/// `store`, between the reverse-mode gradient of `f` and the central
/// difference `(f(θ+eps) - f(θ-eps)) / 2eps`. Relative error is
/// `|a - n| / max(1, |a|, |n|)`.
///
/// `f` must build a scalar on the given graph and be deterministic.
pub fn grad_check<F>(store: &ParameterStore, eps: f64, mut f: F) -> Result<f64>
where
    F: FnMut(&ParameterStore, &mut Graph) -> Result<Var>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::Invalid(alloc::format!("eps must be in (0, 1e-2], got {eps}")));
    }
    let mut g = Graph::new();
    let loss = f(store, &mut g)?;
    let analytic = g.backward(loss)?.param_grads(&g, store);

    let mut eval = |s: &ParameterStore| -> Result<f64> {
        let mut g = Graph::new();
        let v = f(s, &mut g)?;
        Ok(g.value(v).item())
    };

    let mut probe = store.clone();
    let mut worst = 0.0f64;
    for id in store.ids() {
        for i in 0..store.tensor(id).numel() {
            let orig = store.tensor(id).data()[i];
            probe.tensor_mut(id).data_mut()[i] = orig + eps;
            let up = eval(&probe)?;
            probe.tensor_mut(id).data_mut()[i] = orig - eps;
            let down = eval(&probe)?;
            probe.tensor_mut(id).data_mut()[i] = orig;

            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.get(id)[i];
            let denom = 1.0f64.max(libm::fabs(a)).max(libm::fabs(numeric));
            worst = worst.max(libm::fabs(a - numeric) / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Group;
    use crate::Tensor;

    #[test]
    fn square_at_three() {
        let mut s = ParameterStore::new();
        let x = s.insert("x", Tensor::scalar(3.0), Group::Recurrent, false);
        let err = grad_check(&s, 1e-5, |s, g| {
            let v = g.param(s, x);
            g.mul(v, v)
        })
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constant_function_is_exact() {
        let mut s = ParameterStore::new();
        s.insert("x", Tensor::vector(alloc::vec![1.0, -2.0]), Group::Recurrent, false);
        let err = grad_check(&s, 1e-4, |_, g| Ok(g.constant(Tensor::scalar(4.0)))).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn rejects_bad_eps() {
        let s = ParameterStore::new();
        assert!(grad_check(&s, 0.5, |_, g| Ok(g.constant(Tensor::scalar(0.0)))).is_err());
    }
}
