//! Random ergodic finite MDPs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transition kernel `p(s' | s, a)` stored as `[s][a][s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    kernel: Vec<f64>,
    pub ergodic: bool,
}

impl TabularMdp {
    pub fn from_kernel(num_states: usize, num_actions: usize, kernel: Vec<f64>) -> Result<Self> {
        if kernel.len() != num_states * num_actions * num_states {
            return Err(Error::dim(
                "TabularMdp::from_kernel",
                &[num_states * num_actions * num_states],
                &[kernel.len()],
            ));
        }
        for row in kernel.chunks_exact(num_states) {
            let s: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("kernel row {row:?} is not a distribution")));
            }
        }
        let ergodic = kernel.iter().all(|&p| p > 0.0);
        Ok(Self {
            num_states,
            num_actions,
            kernel,
            ergodic,
        })
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.kernel[(s * self.num_actions + a) * self.num_states + next]
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.num_states;
        let i = (s * self.num_actions + a) * n;
        &self.kernel[i..i + n]
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// State chain `P[s][s'] = Σ_a π(a|s) p(s'|s,a)` under a policy given as
    /// `[s][a]` probabilities.
    pub fn induced_chain(&self, policy: &[f64]) -> Result<Vec<f64>> {
        let (n, m) = (self.num_states, self.num_actions);
        if policy.len() != n * m {
            return Err(Error::dim("induced_chain", &[n * m], &[policy.len()]));
        }
        let mut chain = vec![0.0; n * n];
        for s in 0..n {
            for a in 0..m {
                let w = policy[s * m + a];
                for (c, p) in chain[s * n..(s + 1) * n].iter_mut().zip(self.row(s, a)) {
                    *c += w * p;
                }
            }
        }
        Ok(chain)
    }

    /// Stationary distribution of the induced chain, by solving
    /// `μᵀ (P − I) = 0`, `Σ μ = 1` with Gaussian elimination.
    pub fn stationary_distribution(&self, policy: &[f64]) -> Result<Vec<f64>> {
        let n = self.num_states;
        let chain = self.induced_chain(policy)?;
        // Rows of the system: (Pᵀ − I) μ = 0 with the last equation replaced by Σ μ = 1.
        let mut a = vec![0.0; n * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                a[i * (n + 1) + j] = chain[j * n + i] - f64::from(u8::from(i == j));
            }
        }
        for j in 0..n {
            a[(n - 1) * (n + 1) + j] = 1.0;
        }
        a[(n - 1) * (n + 1) + n] = 1.0;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[x * (n + 1) + col].abs().total_cmp(&a[y * (n + 1) + col].abs()))
                .expect("non-empty");
            if a[piv * (n + 1) + col].abs() < 1e-14 {
                return Err(Error::Domain("stationary distribution is not unique".into()));
            }
            for k in 0..=n {
                a.swap(col * (n + 1) + k, piv * (n + 1) + k);
            }
            for r in 0..n {
                if r != col {
                    let f = a[r * (n + 1) + col] / a[col * (n + 1) + col];
                    for k in col..=n {
                        a[r * (n + 1) + k] -= f * a[col * (n + 1) + k];
                    }
                }
            }
        }
        Ok((0..n).map(|i| a[i * (n + 1) + n] / a[i * (n + 1) + i]).collect())
    }
}

/// Rows are `ε + (1 − Sε)·Dirichlet(1,…,1)`, so every entry is at least `ε`.
pub fn random_tabular(num_states: usize, num_actions: usize, seed: u64, eps_erg: f64) -> Result<TabularMdp> {
    if num_states < 2 || num_actions < 2 {
        return Err(Error::Config(format!(
            "tabular MDP needs S, A >= 2 (got S={num_states}, A={num_actions})"
        )));
    }
    if !(eps_erg > 0.0 && eps_erg * (num_states as f64) < 1.0) {
        return Err(Error::Config(format!(
            "ergodicity floor {eps_erg} infeasible for {num_states} states"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(1.0, 1.0).expect("valid gamma");
    let mass = 1.0 - eps_erg * num_states as f64;
    let mut kernel = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        let draws: Vec<f64> = (0..num_states).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        let mut row: Vec<f64> = draws.iter().map(|g| eps_erg + mass * g / total).collect();
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
        kernel.extend(row);
    }
    let mut mdp = TabularMdp::from_kernel(num_states, num_actions, kernel)?;
    mdp.ergodic = true;
    Ok(mdp)
}
