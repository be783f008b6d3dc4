//! Fully connected tanh networks with hand-written backward passes and Adam.
//!
//! Every hidden layer applies `tanh`; the output layer is affine. Heads that
//! need squashing (sigmoid probabilities, bounded embeddings) apply it on top
//! of [`MlpParams::forward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{gemm, MatRef, Tensor};

/// Hidden width used by every network in the system.
pub const HIDDEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `[in × out]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

/// Gradient accumulators, shape-congruent with an [`MlpParams`].
pub type MlpGrads = MlpParams;

/// Activations saved by [`MlpParams::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; entry `l > 0` is `tanh` of layer `l-1`'s pre-activation.
    layer_inputs: Vec<Tensor>,
}

/// Fan-in scaled uniform init: weights in `±1/sqrt(fan_in)`, zero biases.
pub fn init_params(layer_dims: &[usize], seed: u64) -> Result<MlpParams> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::Config(format!(
            "layer dims must have at least two positive entries, got {layer_dims:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_dims
        .windows(2)
        .map(|w| {
            let (fan_in, out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data = (0..fan_in * out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            Layer {
                weight: Tensor::new(vec![fan_in, out], data).expect("finite init"),
                bias: Tensor::zeros(&[out]),
            }
        })
        .collect();
    Ok(MlpParams { layers })
}

impl MlpParams {
    /// `[input, 64, 64, output]`.
    pub fn standard(input: usize, output: usize, seed: u64) -> Result<Self> {
        init_params(&[input, HIDDEN, HIDDEN, output], seed)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].weight.cols() != pair[1].weight.rows() {
                return Err(Error::dim(
                    "MlpParams::from_layers",
                    &[pair[0].weight.cols()],
                    &[pair[1].weight.rows()],
                ));
            }
        }
        for l in &layers {
            if l.bias.len() != l.weight.cols() {
                return Err(Error::dim(
                    "MlpParams::from_layers",
                    &[l.weight.cols()],
                    &[l.bias.len()],
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Tensor::zeros(l.weight.shape()),
                    bias: Tensor::zeros(l.bias.shape()),
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.cols()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn slot(&self, mut i: usize) -> (usize, bool, usize) {
        for (li, l) in self.layers.iter().enumerate() {
            if i < l.weight.len() {
                return (li, true, i);
            }
            i -= l.weight.len();
            if i < l.bias.len() {
                return (li, false, i);
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter by flat index (weights then bias, layer by layer).
    pub fn get_flat(&self, i: usize) -> f64 {
        let (li, w, j) = self.slot(i);
        let l = &self.layers[li];
        if w {
            l.weight.data()[j]
        } else {
            l.bias.data()[j]
        }
    }

    pub fn set_flat(&mut self, i: usize, v: f64) {
        let (li, w, j) = self.slot(i);
        let l = &mut self.layers[li];
        if w {
            l.weight.data_mut()[j] = v;
        } else {
            l.bias.data_mut()[j] = v;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.all_finite() && l.bias.all_finite())
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weight.shape() == b.weight.shape() && a.bias.shape() == b.bias.shape()
            })
    }

    pub fn add_assign(&mut self, other: &MlpParams) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                *x += y;
            }
            for (x, y) in a.bias.data_mut().iter_mut().zip(b.bias.data()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight.data_mut().iter_mut().for_each(|x| *x *= s);
            l.bias.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape().len() != 2 || input.cols() != self.input_dim() {
            return Err(Error::dim(
                "mlp input",
                &[input.rows(), self.input_dim()],
                input.shape(),
            ));
        }
        Ok(())
    }

    /// Pre-activation outputs of the final layer, `[batch × out]`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(input)?;
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut a = input.clone();
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let mut z = a.affine(&l.weight, &l.bias)?;
            if li < last {
                z.data_mut().iter_mut().for_each(|v| *v = v.tanh());
            }
            layer_inputs.push(std::mem::replace(&mut a, z));
        }
        if !a.all_finite() {
            return Err(Error::NonFinite("mlp forward output".into()));
        }
        Ok((a, ForwardCache { layer_inputs }))
    }

    /// Gradients of `sum(upstream ⊙ forward(input))` with respect to every
    /// parameter and to the input.
    pub fn backward(&self, input: &Tensor, upstream: &Tensor) -> Result<(MlpGrads, Tensor)> {
        let (out, cache) = self.forward_cached(input)?;
        if out.shape() != upstream.shape() {
            return Err(Error::dim("mlp upstream grad", out.shape(), upstream.shape()));
        }
        self.backward_cached(&cache, upstream)
    }

    pub fn backward_cached(
        &self,
        cache: &ForwardCache,
        upstream: &Tensor,
    ) -> Result<(MlpGrads, Tensor)> {
        let batch = cache.layer_inputs[0].rows();
        if upstream.rows() != batch || upstream.cols() != self.output_dim() {
            return Err(Error::dim(
                "mlp upstream grad",
                &[batch, self.output_dim()],
                upstream.shape(),
            ));
        }
        let mut grads = self.zeros_like();
        let mut g = upstream.clone();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let a = &cache.layer_inputs[li];
            let (inp, out) = (layer.weight.rows(), layer.weight.cols());
            let gl = &mut grads.layers[li];
            gemm(
                (inp, batch, out),
                MatRef { data: a.data(), row_stride: 1, col_stride: inp },
                MatRef { data: g.data(), row_stride: out, col_stride: 1 },
                1.0,
                gl.weight.data_mut(),
            );
            {
                let db = gl.bias.data_mut();
                for i in 0..batch {
                    for (d, gj) in db.iter_mut().zip(g.row(i)) {
                        *d += gj;
                    }
                }
            }
            let mut da = Tensor::zeros(&[batch, inp]);
            gemm(
                (batch, out, inp),
                MatRef { data: g.data(), row_stride: out, col_stride: 1 },
                MatRef { data: layer.weight.data(), row_stride: 1, col_stride: out },
                0.0,
                da.data_mut(),
            );
            if li > 0 {
                // a is tanh of the previous pre-activation.
                for (d, &t) in da.data_mut().iter_mut().zip(a.data()) {
                    *d *= 1.0 - t * t;
                }
            }
            g = da;
        }
        Ok((grads, g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam over a flat slice. `step` is the post-increment count.
fn adam_slice(cfg: &AdamConfig, step: u64, p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..p.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: MlpGrads,
    pub second_moment: MlpGrads,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
        }
    }
}

pub fn adam_step(params: &mut MlpParams, grads: &MlpGrads, state: &mut AdamState) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.first_moment) {
        return Err(Error::Dimension {
            context: "adam_step",
            expected: vec![params.num_params()],
            got: vec![grads.num_params(), state.first_moment.num_params()],
        });
    }
    state.step += 1;
    let cfg = state.config;
    for (li, layer) in params.layers.iter_mut().enumerate() {
        let g = &grads.layers[li];
        let m = &mut state.first_moment.layers[li];
        let v = &mut state.second_moment.layers[li];
        adam_slice(
            &cfg,
            state.step,
            layer.weight.data_mut(),
            g.weight.data(),
            m.weight.data_mut(),
            v.weight.data_mut(),
        );
        adam_slice(
            &cfg,
            state.step,
            layer.bias.data_mut(),
            g.bias.data(),
            m.bias.data_mut(),
            v.bias.data_mut(),
        );
    }
    Ok(())
}

/// Adam for a free-standing parameter vector (e.g. a Gaussian head's log-std).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecAdam {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl VecAdam {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::dim("VecAdam::step", &[self.m.len()], &[params.len(), grads.len()]));
        }
        self.step += 1;
        adam_slice(&self.config, self.step, params, grads, &mut self.m, &mut self.v);
        Ok(())
    }
}
