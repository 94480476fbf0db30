//! Named learnable arrays and their gradient slots.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Which sub-network a parameter belongs to. The ℓ1 penalty only covers the
/// VAE group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Vae,
    Recurrent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
    pub group: Group,
    /// Square weight whose diagonal is masked out on every forward pass.
    pub zero_diag: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    params: Vec<Param>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor, group: Group, zero_diag: bool) -> ParamId {
        self.params.push(Param {
            name: name.to_string(),
            tensor,
            group,
            zero_diag,
        });
        ParamId(self.params.len() - 1)
    }

    /// A `[fan_in, fan_out]` weight drawn uniformly from `±sqrt(1 / fan_in)`.
    /// With `zero_diag` the diagonal starts (and, since its gradient is always
    /// zero, stays) at exactly zero.
    pub fn weight<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        group: Group,
        zero_diag: bool,
        rng: &mut R,
    ) -> ParamId {
        let bound = libm::sqrt(1.0 / fan_in as f64);
        let mut data: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        if zero_diag {
            for i in 0..fan_in.min(fan_out) {
                data[i * fan_out + i] = 0.0;
            }
        }
        let t = Tensor::new(vec![fan_in, fan_out], data).expect("positive dims");
        self.insert(name, t, group, zero_diag)
    }

    pub fn bias(&mut self, name: &str, len: usize, group: Group) -> ParamId {
        self.insert(name, Tensor::zeros(&[len]), group, false)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].tensor
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].tensor
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    /// Overwrites the values of `name`, keeping its shape.
    pub fn set(&mut self, name: &str, data: &[f64]) -> Result<()> {
        let id = self
            .find(name)
            .ok_or_else(|| Error::Invalid(alloc::format!("unknown parameter `{name}`")))?;
        let t = self.tensor_mut(id);
        if t.numel() != data.len() {
            return Err(Error::ShapeMismatch {
                op: "set_param",
                left: t.shape().to_vec(),
                right: vec![data.len()],
            });
        }
        t.data_mut().copy_from_slice(data);
        Ok(())
    }
}

/// One gradient array per parameter, aligned with a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParameterStore) -> Self {
        Gradients {
            grads: store.params.iter().map(|p| vec![0.0; p.tensor.numel()]).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}
