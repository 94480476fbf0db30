//! The full network: per-timestep VAE feeding one (or two, when
//! bidirectional) recurrent imputers, and the composite training loss.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::config::{Direction, TrainConfig};
use crate::data::MaskedBatch;
use crate::graph::{sigmoid, Graph, Var};
use crate::objectives::{self, LossBreakdown, Weights};
use crate::params::ParameterStore;
use crate::recurrent::{unroll, CellParams, StepInputs, Trace};
use crate::vae::{merge_and_uncertainty, sample_latent, Stochasticity, VaeParams};
use crate::{Error, Result, Tensor};

/// Architecture sizes; everything needed to rebuild the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDims {
    pub features: usize,
    pub hidden: usize,
    pub latent: usize,
    pub vae_hidden: Vec<usize>,
    pub direction: Direction,
}

impl ModelDims {
    pub fn from_config(c: &TrainConfig) -> Self {
        ModelDims {
            features: c.features,
            hidden: c.hidden,
            latent: c.latent,
            vae_hidden: c.vae_hidden.clone(),
            direction: c.direction,
        }
    }
}

/// Everything about a forward pass that is not a parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardSettings {
    pub gated: bool,
    pub weights: Weights,
    pub l1: f64,
    pub dropout: f64,
    pub recon_on_missing: bool,
}

impl ForwardSettings {
    pub fn from_config(c: &TrainConfig) -> Self {
        ForwardSettings {
            gated: c.gated(),
            weights: Weights {
                alpha: c.alpha,
                beta: c.beta,
                xi: c.xi,
            },
            l1: c.l1,
            dropout: c.dropout,
            recon_on_missing: c.recon_on_missing,
        }
    }
}

/// Numeric outputs of a forward pass, all sample-major `N x T x D` (or `N`).
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub samples: usize,
    pub steps: usize,
    pub features: usize,
    /// VAE merged estimate x̄.
    pub estimate: Vec<f64>,
    /// VAE uncertainty ū (standard deviation, zero on observed entries).
    pub uncertainty: Vec<f64>,
    /// Forward-direction combined estimate c.
    pub combined: Vec<f64>,
    /// Completed series x^c; the mean of both directions when bidirectional.
    pub completed: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Outputs {
    fn append(&mut self, other: Outputs) {
        self.samples += other.samples;
        self.estimate.extend(other.estimate);
        self.uncertainty.extend(other.uncertainty);
        self.combined.extend(other.combined);
        self.completed.extend(other.completed);
        self.logits.extend(other.logits);
        self.probs.extend(other.probs);
    }
}

/// Graph handles of one direction's intermediates.
pub struct DirectionTrace {
    pub trace: Trace,
    /// Original time index of each trace step.
    pub time_index: Vec<usize>,
}

/// Handles into a recorded forward pass, ready for [`Graph::backward`].
pub struct Forward {
    pub loss: Var,
    pub breakdown: LossBreakdown,
    pub outputs: Outputs,
    pub forward: DirectionTrace,
    pub backward: Option<DirectionTrace>,
    /// VAE merged estimate / uncertainty, `(T*B) x D`, time-major rows.
    pub estimate: Var,
    pub uncertainty: Var,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub dims: ModelDims,
    pub store: ParameterStore,
    vae: VaeParams,
    fwd: CellParams,
    bwd: Option<CellParams>,
}

impl Model {
    pub fn new<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Self {
        let mut store = ParameterStore::new();
        let vae = VaeParams::new(&mut store, dims.features, &dims.vae_hidden, dims.latent, rng);
        let fwd = CellParams::new(&mut store, "fwd", dims.features, dims.hidden, rng);
        let bwd = match dims.direction {
            Direction::Bi => Some(CellParams::new(&mut store, "bwd", dims.features, dims.hidden, rng)),
            Direction::Uni => None,
        };
        Model {
            dims,
            store,
            vae,
            fwd,
            bwd,
        }
    }

    /// Rebuilds the layout for `dims` and copies values from `store`, which
    /// must hold exactly the same names and shapes.
    pub fn from_store(dims: ModelDims, store: ParameterStore) -> Result<Self> {
        let mut model = Model::new(dims, &mut crate::rng::stream(0, 0));
        if model.store.len() != store.len() {
            return Err(Error::Invalid(alloc::format!(
                "parameter count mismatch: model has {}, store has {}",
                model.store.len(),
                store.len()
            )));
        }
        for (id, p) in model.store.clone().iter() {
            let src = store
                .find(&p.name)
                .ok_or_else(|| Error::Invalid(alloc::format!("missing parameter `{}`", p.name)))?;
            let t = store.tensor(src);
            if t.shape() != p.tensor.shape() {
                return Err(Error::ShapeMismatch {
                    op: "load_param",
                    left: p.tensor.shape().to_vec(),
                    right: t.shape().to_vec(),
                });
            }
            *model.store.tensor_mut(id) = t.clone();
        }
        Ok(model)
    }

    pub fn cell(&self) -> &CellParams {
        &self.fwd
    }

    pub fn backward_cell(&self) -> Option<&CellParams> {
        self.bwd.as_ref()
    }

    /// Records the forward pass and composite loss for `batch` using the
    /// current parameters on a fresh graph.
    pub fn forward(
        &self,
        batch: &MaskedBatch,
        settings: &ForwardSettings,
        stoch: Stochasticity<'_>,
    ) -> Result<(Graph, Forward)> {
        let mut g = Graph::new();
        let f = self.forward_in(&mut g, &self.store, batch, settings, stoch)?;
        Ok((g, f))
    }

    /// As [`Model::forward`] but recording onto `g` and reading parameters
    /// from `store`, which must share this model's layout.
    pub fn forward_in(
        &self,
        g: &mut Graph,
        store: &ParameterStore,
        batch: &MaskedBatch,
        settings: &ForwardSettings,
        stoch: Stochasticity<'_>,
    ) -> Result<Forward> {
        let (b, t_len, d) = (batch.samples, batch.steps, batch.features);
        if d != self.dims.features {
            return Err(Error::ShapeMismatch {
                op: "forward",
                left: vec![self.dims.features],
                right: vec![d],
            });
        }
        let Stochasticity { mut dropout, mut noise } = stoch;

        // Time-major rows: row = t * B + n.
        let values = time_major(batch, &batch.values);
        let mask = time_major(batch, &batch.mask);
        let inv_mask: Vec<f64> = mask.iter().map(|m| 1.0 - m).collect();
        let rows = t_len * b;
        let x = g.constant(Tensor::matrix(rows, d, values.clone())?);
        let m = g.constant(Tensor::matrix(rows, d, mask.clone())?);
        let inv_m = g.constant(Tensor::matrix(rows, d, inv_mask.clone())?);

        // VAE over every timestep at once.
        let q = self.vae.encode(g, store, x, settings.dropout, &mut dropout)?;
        let z = sample_latent(g, q, &mut noise)?;
        let p = self.vae.decode(g, store, z, settings.dropout, &mut dropout)?;
        let merged = merge_and_uncertainty(g, x, m, inv_m, p)?;

        let kl = objectives::kl_diag_gaussian(g, q.mu, q.logvar)?;
        let weight = if settings.recon_on_missing {
            g.constant(Tensor::full(&[rows, d], 1.0))
        } else {
            m
        };
        let ll = objectives::gaussian_log_likelihood(g, x, p.mu, p.logvar, weight)?;
        let vae_params = objectives::bind_params(g, store, &self.vae.param_ids());
        let penalty = objectives::l1_penalty(g, &vae_params, settings.l1)?;
        let l_vae = objectives::loss_vae(g, ll, kl, penalty)?;

        let step_const = |data: &[f64], t: usize| -> Result<Tensor> {
            Tensor::matrix(b, d, data[t * b * d..(t + 1) * b * d].to_vec())
        };

        // Forward direction.
        let delta_f = time_major(batch, &batch.delta);
        let order_f: Vec<usize> = (0..t_len).collect();
        let mut inputs_f = Vec::with_capacity(t_len);
        for &t in &order_f {
            inputs_f.push(StepInputs {
                estimate: g.slice_rows(merged.estimate, t * b, b)?,
                uncertainty: g.slice_rows(merged.uncertainty, t * b, b)?,
                values: g.constant(step_const(&values, t)?),
                mask: g.constant(step_const(&mask, t)?),
                inv_mask: g.constant(step_const(&inv_mask, t)?),
                delta: g.constant(step_const(&delta_f, t)?),
            });
        }
        let cell_f = self.fwd.bind(g, store)?;
        let trace_f = unroll(g, &cell_f, &inputs_f, self.dims.hidden, settings.gated)?;

        let observed = batch.observed();
        let reg_steps: Vec<_> = inputs_f
            .iter()
            .zip(&trace_f.steps)
            .map(|(i, s)| (i.values, i.mask, s.combined))
            .collect();
        let (mut l_reg, reg_empty) = objectives::loss_reg(g, &reg_steps, observed)?;

        // Backward direction on the time-reversed sequence.
        let mut backward = None;
        let mut logit = trace_f.logit;
        let mut l_cons = None;
        if let Some(bwd) = &self.bwd {
            let rev = batch.reversed()?;
            let delta_b = time_major(&rev, &rev.delta);
            let order_b: Vec<usize> = (0..t_len).rev().collect();
            let mut inputs_b = Vec::with_capacity(t_len);
            for (j, &t) in order_b.iter().enumerate() {
                inputs_b.push(StepInputs {
                    estimate: g.slice_rows(merged.estimate, t * b, b)?,
                    uncertainty: g.slice_rows(merged.uncertainty, t * b, b)?,
                    values: g.constant(step_const(&values, t)?),
                    mask: g.constant(step_const(&mask, t)?),
                    inv_mask: g.constant(step_const(&inv_mask, t)?),
                    delta: g.constant(step_const(&delta_b, j)?),
                });
            }
            let cell_b = bwd.bind(g, store)?;
            let trace_b = unroll(g, &cell_b, &inputs_b, self.dims.hidden, settings.gated)?;

            let reg_b: Vec<_> = inputs_b
                .iter()
                .zip(&trace_b.steps)
                .map(|(i, s)| (i.values, i.mask, s.combined))
                .collect();
            let (reg_back, _) = objectives::loss_reg(g, &reg_b, observed)?;
            let both = g.add(l_reg, reg_back)?;
            l_reg = g.scale(both, 0.5)?;

            let pairs: Vec<_> = (0..t_len)
                .map(|t| (trace_f.steps[t].completed, trace_b.steps[t_len - 1 - t].completed))
                .collect();
            l_cons = Some(objectives::loss_consistency(g, &pairs)?);

            let sum = g.add(trace_f.logit, trace_b.logit)?;
            logit = g.scale(sum, 0.5)?;
            backward = Some(DirectionTrace {
                trace: trace_b,
                time_index: order_b,
            });
        }

        let l_pred = objectives::loss_pred(g, logit, &batch.labels)?;
        let loss = objectives::loss_total(g, l_vae, l_reg, l_pred, l_cons, settings.weights, self.dims.direction)?;

        let breakdown = LossBreakdown {
            l_vae: g.value(l_vae).item(),
            l_reg: g.value(l_reg).item(),
            l_pred: g.value(l_pred).item(),
            l_cons: l_cons.map_or(0.0, |c| g.value(c).item()),
            l_total: g.value(loss).item(),
            l1_penalty: g.value(penalty).item(),
            reg_empty,
        };

        let forward = DirectionTrace {
            trace: trace_f,
            time_index: order_f,
        };
        let outputs = self.collect_outputs(g, batch, merged.estimate, merged.uncertainty, &forward, backward.as_ref(), logit);
        Ok(Forward {
            loss,
            breakdown,
            outputs,
            forward,
            backward,
            estimate: merged.estimate,
            uncertainty: merged.uncertainty,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn collect_outputs(
        &self,
        g: &Graph,
        batch: &MaskedBatch,
        estimate: Var,
        uncertainty: Var,
        fwd: &DirectionTrace,
        bwd: Option<&DirectionTrace>,
        logit: Var,
    ) -> Outputs {
        let (b, t_len, d) = (batch.samples, batch.steps, batch.features);
        let mut combined = vec![0.0; b * t_len * d];
        let mut completed = vec![0.0; b * t_len * d];
        let scatter = |dst: &mut [f64], src: &[f64], t: usize, blend: Option<f64>| {
            for n in 0..b {
                for j in 0..d {
                    let v = src[n * d + j];
                    let slot = &mut dst[(n * t_len + t) * d + j];
                    *slot = match blend {
                        None => v,
                        Some(w) => (*slot + v) * w,
                    };
                }
            }
        };
        for (step, &t) in fwd.trace.steps.iter().zip(&fwd.time_index) {
            scatter(&mut combined, g.value(step.combined).data(), t, None);
            scatter(&mut completed, g.value(step.completed).data(), t, None);
        }
        if let Some(bwd) = bwd {
            for (step, &t) in bwd.trace.steps.iter().zip(&bwd.time_index) {
                scatter(&mut completed, g.value(step.completed).data(), t, Some(0.5));
            }
        }
        let logits = g.value(logit).data().to_vec();
        Outputs {
            samples: b,
            steps: t_len,
            features: d,
            estimate: sample_major(batch, g.value(estimate).data()),
            uncertainty: sample_major(batch, g.value(uncertainty).data()),
            combined,
            completed,
            probs: logits.iter().map(|&l| sigmoid(l)).collect(),
            logits,
        }
    }

    /// Deterministic evaluation (no dropout, ε = 0) in chunks of `chunk` samples.
    pub fn predict(&self, batch: &MaskedBatch, settings: &ForwardSettings, chunk: usize) -> Result<Outputs> {
        let chunk = chunk.max(1);
        let mut out: Option<Outputs> = None;
        let mut start = 0;
        while start < batch.samples {
            let idx: Vec<usize> = (start..(start + chunk).min(batch.samples)).collect();
            let part = batch.subset(&idx);
            let (_, f) = self.forward(&part, settings, Stochasticity::eval())?;
            match &mut out {
                None => out = Some(f.outputs),
                Some(o) => o.append(f.outputs),
            }
            start += chunk;
        }
        out.ok_or_else(|| Error::Invalid("cannot predict on an empty batch".into()))
    }
}

fn time_major(batch: &MaskedBatch, data: &[f64]) -> Vec<f64> {
    let (b, t_len, d) = (batch.samples, batch.steps, batch.features);
    let mut out = vec![0.0; b * t_len * d];
    for n in 0..b {
        for t in 0..t_len {
            let src = (n * t_len + t) * d;
            let dst = (t * b + n) * d;
            out[dst..dst + d].copy_from_slice(&data[src..src + d]);
        }
    }
    out
}

fn sample_major(batch: &MaskedBatch, data: &[f64]) -> Vec<f64> {
    let (b, t_len, d) = (batch.samples, batch.steps, batch.features);
    let mut out = vec![0.0; b * t_len * d];
    for n in 0..b {
        for t in 0..t_len {
            let src = (t * b + n) * d;
            let dst = (n * t_len + t) * d;
            out[dst..dst + d].copy_from_slice(&data[src..src + d]);
        }
    }
    out
}
