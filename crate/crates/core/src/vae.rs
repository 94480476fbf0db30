//! Per-timestep VAE: inference network, reparameterized sample, generative
//! network, and the merged estimate / uncertainty pair handed to the
//! recurrent imputer.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Var};
use crate::params::{Group, ParamId, ParameterStore};
use crate::{Result, Tensor};

/// Log-variance heads are clamped into this range.
pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

impl Dense {
    fn new<R: Rng + ?Sized>(store: &mut ParameterStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let w = store.weight(&alloc::format!("{name}.w"), fan_in, fan_out, Group::Vae, false, rng);
        let b = store.bias(&alloc::format!("{name}.b"), fan_out, Group::Vae);
        Dense { w, b }
    }

    fn apply(&self, g: &mut Graph, store: &ParameterStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let xw = g.matmul(x, w)?;
        g.add_row(xw, b)
    }
}

/// Mean and clamped log-variance of a diagonal Gaussian, one row per input row.
#[derive(Debug, Clone, Copy)]
pub struct GaussianVars {
    pub mu: Var,
    pub logvar: Var,
}

/// Where the dropout masks and reparameterization noise come from.
pub struct Stochasticity<'a> {
    /// `None` disables dropout (evaluation).
    pub dropout: Option<&'a mut ChaCha8Rng>,
    pub noise: Noise<'a>,
}

impl Stochasticity<'_> {
    pub fn eval() -> Self {
        Stochasticity {
            dropout: None,
            noise: Noise::Zero,
        }
    }
}

pub enum Noise<'a> {
    /// ε = 0: the posterior mean is decoded.
    Zero,
    Sample(&'a mut ChaCha8Rng),
    /// Pre-drawn ε, row-major with the latent's shape.
    Fixed(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct VaeParams {
    encoder: Vec<Dense>,
    enc_mu: Dense,
    enc_logvar: Dense,
    decoder: Vec<Dense>,
    dec_mu: Dense,
    dec_logvar: Dense,
    pub features: usize,
    pub latent: usize,
}

impl VaeParams {
    /// Encoder `features -> hidden[0] -> ... -> (latent, latent)`; the decoder
    /// runs the same widths in reverse.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        features: usize,
        hidden: &[usize],
        latent: usize,
        rng: &mut R,
    ) -> Self {
        let mut encoder = Vec::new();
        let mut width = features;
        for (i, &h) in hidden.iter().enumerate() {
            encoder.push(Dense::new(store, &name("vae.enc", i), width, h, rng));
            width = h;
        }
        let enc_mu = Dense::new(store, "vae.enc_mu", width, latent, rng);
        let enc_logvar = Dense::new(store, "vae.enc_logvar", width, latent, rng);
        let mut decoder = Vec::new();
        width = latent;
        for (i, &h) in hidden.iter().rev().enumerate() {
            decoder.push(Dense::new(store, &name("vae.dec", i), width, h, rng));
            width = h;
        }
        let dec_mu = Dense::new(store, "vae.dec_mu", width, features, rng);
        let dec_logvar = Dense::new(store, "vae.dec_logvar", width, features, rng);
        VaeParams {
            encoder,
            enc_mu,
            enc_logvar,
            decoder,
            dec_mu,
            dec_logvar,
            features,
            latent,
        }
    }

    fn trunk(
        layers: &[Dense],
        g: &mut Graph,
        store: &ParameterStore,
        mut x: Var,
        dropout: f64,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        for layer in layers {
            let a = layer.apply(g, store, x)?;
            x = g.tanh(a)?;
            if let Some(r) = rng.as_deref_mut() {
                x = g.dropout(x, dropout, r)?;
            }
        }
        Ok(x)
    }

    fn heads(mu: Dense, logvar: Dense, g: &mut Graph, store: &ParameterStore, x: Var) -> Result<GaussianVars> {
        let mu = mu.apply(g, store, x)?;
        let lv = logvar.apply(g, store, x)?;
        let logvar = g.clamp(lv, LOGVAR_MIN, LOGVAR_MAX)?;
        Ok(GaussianVars { mu, logvar })
    }

    /// q(z | x̃): rows of `x` are zero-filled observation vectors.
    pub fn encode(
        &self,
        g: &mut Graph,
        store: &ParameterStore,
        x: Var,
        dropout: f64,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<GaussianVars> {
        let h = Self::trunk(&self.encoder, g, store, x, dropout, rng)?;
        Self::heads(self.enc_mu, self.enc_logvar, g, store, h)
    }

    /// p(x̃ | z).
    pub fn decode(
        &self,
        g: &mut Graph,
        store: &ParameterStore,
        z: Var,
        dropout: f64,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<GaussianVars> {
        let h = Self::trunk(&self.decoder, g, store, z, dropout, rng)?;
        Self::heads(self.dec_mu, self.dec_logvar, g, store, h)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.encoder
            .iter()
            .chain([&self.enc_mu, &self.enc_logvar])
            .chain(&self.decoder)
            .chain([&self.dec_mu, &self.dec_logvar])
            .flat_map(|d| [d.w, d.b])
            .collect()
    }
}

fn name(prefix: &str, i: usize) -> String {
    alloc::format!("{prefix}{i}")
}

/// `z = μ + exp(logvar / 2) ⊙ ε`.
pub fn reparameterize(g: &mut Graph, mu: Var, logvar: Var, eps: Var) -> Result<Var> {
    let half = g.scale(logvar, 0.5)?;
    let sigma = g.exp(half)?;
    let spread = g.mul(sigma, eps)?;
    g.add(mu, spread)
}

/// Draws (or fixes) ε with the latent's shape and applies [`reparameterize`].
pub fn sample_latent(g: &mut Graph, latent: GaussianVars, noise: &mut Noise<'_>) -> Result<Var> {
    let shape = g.value(latent.mu).shape().to_vec();
    let n = g.value(latent.mu).numel();
    let eps = match noise {
        Noise::Zero => return Ok(latent.mu),
        Noise::Sample(rng) => (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect(),
        Noise::Fixed(values) => values.to_vec(),
    };
    let eps = g.constant(Tensor::new(shape, eps)?);
    reparameterize(g, latent.mu, latent.logvar, eps)
}

/// Merged estimate and uncertainty.
#[derive(Debug, Clone, Copy)]
pub struct Merged {
    /// `x̄ = m ⊙ x̃ + (1 - m) ⊙ μ_x̄`
    pub estimate: Var,
    /// `ū = (1 - m) ⊙ exp(logvar_x̄ / 2)`
    pub uncertainty: Var,
}

/// `mask` and `inv_mask` (= 1 - mask) are constants shaped like `x`.
pub fn merge_and_uncertainty(
    g: &mut Graph,
    x: Var,
    mask: Var,
    inv_mask: Var,
    recon: GaussianVars,
) -> Result<Merged> {
    let kept = g.mul(mask, x)?;
    let filled = g.mul(inv_mask, recon.mu)?;
    let estimate = g.add(kept, filled)?;
    let half = g.scale(recon.logvar, 0.5)?;
    let sigma = g.exp(half)?;
    let uncertainty = g.mul(inv_mask, sigma)?;
    Ok(Merged { estimate, uncertainty })
}
