//! Policy networks: a standard MLP whose outputs parameterize one of the
//! distribution heads.

use serde::{Deserialize, Serialize};

use crate::distributions::{BernoulliVector, Categorical, DiagGaussian, Distribution};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, AdamState, MlpGrads, MlpParams, VecAdam};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    /// `m` independent bits from sigmoid logits.
    Bernoulli(usize),
    /// One of `k` choices from softmax logits.
    Categorical(usize),
    /// Diagonal Gaussian with a state-independent log-std vector.
    Gaussian(usize),
}

impl HeadKind {
    pub fn output_dim(self) -> usize {
        match self {
            HeadKind::Bernoulli(n) | HeadKind::Categorical(n) | HeadKind::Gaussian(n) => n,
        }
    }

    /// Width of the dense encoding of an action from this head.
    pub fn action_width(self) -> usize {
        self.output_dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub net: MlpParams,
    pub head: HeadKind,
    /// Only used by Gaussian heads.
    pub log_std: Vec<f64>,
}

impl PolicyNet {
    pub fn new(obs_dim: usize, head: HeadKind, seed: u64) -> Result<Self> {
        let log_std = match head {
            HeadKind::Gaussian(d) => vec![0.0; d],
            _ => Vec::new(),
        };
        if head.output_dim() == 0 {
            return Err(Error::Config("policy head with zero outputs".into()));
        }
        if let HeadKind::Categorical(k) = head {
            if k < 2 {
                return Err(Error::Config("categorical head needs at least two choices".into()));
            }
        }
        Ok(Self {
            net: MlpParams::standard(obs_dim, head.output_dim(), seed)?,
            head,
            log_std,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn dist_from_output(&self, row: &[f64]) -> Result<Distribution> {
        Ok(match self.head {
            HeadKind::Bernoulli(_) => Distribution::Bernoulli(BernoulliVector::from_logits(row)),
            HeadKind::Categorical(_) => Distribution::Categorical(Categorical::from_logits(row)?),
            HeadKind::Gaussian(_) => Distribution::Gaussian(DiagGaussian::new(row, &self.log_std)?),
        })
    }

    pub fn dists_from_outputs(&self, out: &Tensor) -> Result<Vec<Distribution>> {
        (0..out.rows()).map(|i| self.dist_from_output(out.row(i))).collect()
    }

    pub fn distributions(&self, obs: &Tensor) -> Result<Vec<Distribution>> {
        self.dists_from_outputs(&self.net.forward(obs)?)
    }

    pub fn all_finite(&self) -> bool {
        self.net.all_finite() && self.log_std.iter().all(|v| v.is_finite())
    }
}

/// Gradients for a [`PolicyNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrads {
    pub net: MlpGrads,
    pub log_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAdam {
    pub net: AdamState,
    pub log_std: VecAdam,
}

impl PolicyAdam {
    pub fn new(policy: &PolicyNet, lr: f64) -> Self {
        let cfg = AdamConfig::with_lr(lr);
        Self {
            net: AdamState::new(&policy.net, cfg),
            log_std: VecAdam::new(policy.log_std.len(), cfg),
        }
    }

    pub fn step(&mut self, policy: &mut PolicyNet, grads: &PolicyGrads) -> Result<()> {
        adam_step(&mut policy.net, &grads.net, &mut self.net)?;
        if !policy.log_std.is_empty() {
            self.log_std.step(&mut policy.log_std, &grads.log_std)?;
        }
        Ok(())
    }
}
