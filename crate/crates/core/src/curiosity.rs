//! Per-level curiosity: a learned state embedding `φ`, a forward model
//! predicting `φ(s')` from `(φ(s), a)`, and a reverse model predicting `φ(s)`
//! from `(φ(s'), a)`.
//!
//! The exploration bonus is `η ‖F(φ(s), a) − φ(s')‖₂`. The models minimize
//!
//! ```text
//! β ‖F − φ(s')‖₂ + (1 − β) ‖R − φ(s)‖₂ − λ (‖φ(s)‖₁ + ‖φ(s')‖₁)
//! ```
//!
//! averaged over the batch. Embedding outputs pass through `tanh`, which keeps
//! the negative L1 term bounded below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, AdamState, MlpGrads, MlpParams};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuriosityConfig {
    pub enabled: bool,
    /// Weight of the forward error; the reverse error gets `1 - beta`.
    pub beta: f64,
    /// Scale of the embedding L1 bonus.
    pub lambda: f64,
    /// Scale of the intrinsic reward.
    pub eta: f64,
    pub lr: f64,
    pub embed_dim: usize,
    /// Full-batch Adam steps per training round.
    pub updates_per_round: usize,
}

impl Default for CuriosityConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            beta: 0.2,
            lambda: 1e-3,
            eta: 0.1,
            lr: 0.005,
            embed_dim: 16,
            updates_per_round: 8,
        }
    }
}

impl CuriosityConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("curiosity beta {} not in (0, 1)", self.beta)));
        }
        if self.embed_dim == 0 || !(self.eta >= 0.0) || !(self.lr >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config("invalid curiosity config".into()));
        }
        Ok(())
    }
}

/// One minibatch of level-clock transitions `(s, a, s')`; actions are dense
/// feature rows.
#[derive(Debug, Clone)]
pub struct TransitionBatch {
    pub states: Tensor,
    pub actions: Tensor,
    pub next_states: Tensor,
}

impl TransitionBatch {
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuriosityModels {
    pub embed: MlpParams,
    pub forward: MlpParams,
    pub reverse: MlpParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuriosityGrads {
    pub embed: MlpGrads,
    pub forward: MlpGrads,
    pub reverse: MlpGrads,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CuriosityLoss {
    pub total: f64,
    /// Batch mean `‖F − φ(s')‖₂`.
    pub forward_error: f64,
    /// Batch mean `‖R − φ(s)‖₂`.
    pub reverse_error: f64,
    /// Batch mean `‖φ(s)‖₁ + ‖φ(s')‖₁`.
    pub embed_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuriosityAdam {
    pub embed: AdamState,
    pub forward: AdamState,
    pub reverse: AdamState,
}

impl CuriosityAdam {
    pub fn new(models: &CuriosityModels, lr: f64) -> Self {
        let cfg = AdamConfig::with_lr(lr);
        Self {
            embed: AdamState::new(&models.embed, cfg),
            forward: AdamState::new(&models.forward, cfg),
            reverse: AdamState::new(&models.reverse, cfg),
        }
    }
}

fn tanh_inplace(t: &mut Tensor) {
    t.data_mut().iter_mut().for_each(|v| *v = v.tanh());
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl CuriosityModels {
    pub fn new(state_dim: usize, action_width: usize, embed_dim: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            embed: MlpParams::standard(state_dim, embed_dim, seed)?,
            forward: MlpParams::standard(embed_dim + action_width, embed_dim, seed ^ 0x9e37_79b9)?,
            reverse: MlpParams::standard(embed_dim + action_width, embed_dim, seed ^ 0x7f4a_7c15)?,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.embed.output_dim()
    }

    /// `φ(states)`, tanh-bounded.
    pub fn embed(&self, states: &Tensor) -> Result<Tensor> {
        let mut e = self.embed.forward(states)?;
        tanh_inplace(&mut e);
        Ok(e)
    }

    /// Per-transition bonus `η ‖F(φ(s), a) − φ(s')‖₂`; no gradient flows
    /// through it.
    pub fn intrinsic_rewards(&self, batch: &TransitionBatch, eta: f64) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let phi = self.embed(&batch.states)?;
        let phi_next = self.embed(&batch.next_states)?;
        let pred = self.forward.forward(&phi.hcat(&batch.actions)?)?;
        Ok((0..batch.len())
            .map(|i| {
                let e: Vec<f64> = pred.row(i).iter().zip(phi_next.row(i)).map(|(a, b)| a - b).collect();
                eta * l2(&e)
            })
            .collect())
    }

    pub fn intrinsic_reward(&self, state: &[f64], action: &[f64], next_state: &[f64], eta: f64) -> Result<f64> {
        let batch = TransitionBatch {
            states: Tensor::new(vec![1, state.len()], state.to_vec())?,
            actions: Tensor::new(vec![1, action.len()], action.to_vec())?,
            next_states: Tensor::new(vec![1, next_state.len()], next_state.to_vec())?,
        };
        Ok(self.intrinsic_rewards(&batch, eta)?[0])
    }

    /// Batch-mean joint loss and exact gradients for all three networks.
    pub fn loss_and_grads(&self, batch: &TransitionBatch, config: &CuriosityConfig) -> Result<(CuriosityLoss, CuriosityGrads)> {
        if batch.is_empty() {
            return Err(Error::Precondition("empty curiosity batch".into()));
        }
        if !(config.beta > 0.0 && config.beta < 1.0) {
            return Err(Error::Config(format!("curiosity beta {} not in (0, 1)", config.beta)));
        }
        let (beta, lambda) = (config.beta, config.lambda);
        let n = batch.len();
        let inv_n = 1.0 / n as f64;
        let d = self.embed_dim();

        let (mut phi, cache_s) = self.embed.forward_cached(&batch.states)?;
        let (mut phi_next, cache_n) = self.embed.forward_cached(&batch.next_states)?;
        tanh_inplace(&mut phi);
        tanh_inplace(&mut phi_next);
        let (pred_f, cache_f) = self.forward.forward_cached(&phi.hcat(&batch.actions)?)?;
        let (pred_r, cache_r) = self.reverse.forward_cached(&phi_next.hcat(&batch.actions)?)?;

        let mut loss = CuriosityLoss::default();
        let mut d_pred_f = Tensor::zeros(&[n, d]);
        let mut d_pred_r = Tensor::zeros(&[n, d]);
        let mut d_phi = Tensor::zeros(&[n, d]);
        let mut d_phi_next = Tensor::zeros(&[n, d]);
        for i in 0..n {
            let ef: Vec<f64> = pred_f.row(i).iter().zip(phi_next.row(i)).map(|(a, b)| a - b).collect();
            let er: Vec<f64> = pred_r.row(i).iter().zip(phi.row(i)).map(|(a, b)| a - b).collect();
            let (nf, nr) = (l2(&ef), l2(&er));
            let l1: f64 = phi.row(i).iter().chain(phi_next.row(i)).map(|x| x.abs()).sum();
            loss.forward_error += nf * inv_n;
            loss.reverse_error += nr * inv_n;
            loss.embed_l1 += l1 * inv_n;
            for j in 0..d {
                let gf = if nf > 0.0 { beta * ef[j] / nf * inv_n } else { 0.0 };
                let gr = if nr > 0.0 { (1.0 - beta) * er[j] / nr * inv_n } else { 0.0 };
                d_pred_f.row_mut(i)[j] = gf;
                d_pred_r.row_mut(i)[j] = gr;
                d_phi_next.row_mut(i)[j] = -gf - lambda * phi_next.row(i)[j].signum() * inv_n;
                d_phi.row_mut(i)[j] = -gr - lambda * phi.row(i)[j].signum() * inv_n;
            }
        }
        loss.total = beta * loss.forward_error + (1.0 - beta) * loss.reverse_error - lambda * loss.embed_l1;

        let (g_forward, d_in_f) = self.forward.backward_cached(&cache_f, &d_pred_f)?;
        let (g_reverse, d_in_r) = self.reverse.backward_cached(&cache_r, &d_pred_r)?;
        for i in 0..n {
            for j in 0..d {
                d_phi.row_mut(i)[j] += d_in_f.row(i)[j];
                d_phi_next.row_mut(i)[j] += d_in_r.row(i)[j];
            }
        }
        // Through the output tanh.
        for (g, y) in d_phi.data_mut().iter_mut().zip(phi.data()) {
            *g *= 1.0 - y * y;
        }
        for (g, y) in d_phi_next.data_mut().iter_mut().zip(phi_next.data()) {
            *g *= 1.0 - y * y;
        }
        let (mut g_embed, _) = self.embed.backward_cached(&cache_s, &d_phi)?;
        let (g_embed_next, _) = self.embed.backward_cached(&cache_n, &d_phi_next)?;
        g_embed.add_assign(&g_embed_next);
        Ok((
            loss,
            CuriosityGrads {
                embed: g_embed,
                forward: g_forward,
                reverse: g_reverse,
            },
        ))
    }

    pub fn loss(&self, batch: &TransitionBatch, config: &CuriosityConfig) -> Result<CuriosityLoss> {
        Ok(self.loss_and_grads(batch, config)?.0)
    }

    /// `steps` full-batch Adam steps; returns the loss measured before the last step.
    pub fn update(
        &mut self,
        batch: &TransitionBatch,
        opt: &mut CuriosityAdam,
        config: &CuriosityConfig,
        steps: usize,
    ) -> Result<CuriosityLoss> {
        let mut last = CuriosityLoss::default();
        for _ in 0..steps {
            let (loss, g) = self.loss_and_grads(batch, config)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFinite("curiosity loss".into()));
            }
            adam_step(&mut self.embed, &g.embed, &mut opt.embed)?;
            adam_step(&mut self.forward, &g.forward, &mut opt.forward)?;
            adam_step(&mut self.reverse, &g.reverse, &mut opt.reverse)?;
            last = loss;
        }
        Ok(last)
    }
}
