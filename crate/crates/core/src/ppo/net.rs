//! Actor-critic multilayer perceptrons with batched forward and exact
//! backward passes.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out × in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { w: Array2::zeros((output, input)), b: Array1::zeros(output) }
    }

    fn random<R: Rng>(input: usize, output: usize, scale: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, scale / (input as f64).sqrt()).expect("positive std");
        Self { w: Array2::from_shape_simple_fn((output, input), || normal.sample(rng)), b: Array1::zeros(output) }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Tanh hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        Self { layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect() }
    }

    /// Gaussian weights with variance `1/fan_in`; the output layer is scaled
    /// by `out_scale`.
    pub fn random<R: Rng>(sizes: &[usize], out_scale: f64, rng: &mut R) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let scale = if i + 1 == n { out_scale } else { 1.0 };
                Dense::random(sizes[i], sizes[i + 1], scale, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(Dense::output_dim));
        s
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    /// Layer outputs for a batch of row inputs; element 0 is the input.
    pub fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.to_owned()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.w.t());
            z += &layer.b;
            if i < last {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        acts
    }

    /// Accumulates parameter gradients into `grad` (same layout as
    /// [`Mlp::write_flat`]) given the gradient of the loss wrt the output.
    pub fn backward(&self, acts: &[Array2<f64>], grad_out: Array2<f64>, grad: &mut [f64]) {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut o = 0;
        for l in &self.layers {
            offsets.push(o);
            o += l.n_params();
        }
        let mut g = grad_out;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let dw = g.t().dot(&acts[i]);
            let db = g.sum_axis(Axis(0));
            let off = offsets[i];
            for (dst, v) in grad[off..off + dw.len()].iter_mut().zip(dw.iter()) {
                *dst += v;
            }
            let boff = off + dw.len();
            for (dst, v) in grad[boff..boff + db.len()].iter_mut().zip(db.iter()) {
                *dst += v;
            }
            if i > 0 {
                let mut gp = g.dot(&layer.w);
                gp.zip_mut_with(&acts[i], |gv, &a| *gv *= 1.0 - a * a);
                g = gp;
            }
        }
    }

    /// Row-major weights then biases, layer by layer.
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
    }

    /// Reads parameters in [`Mlp::write_flat`] order; returns the count read.
    pub fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut o = 0;
        for l in &mut self.layers {
            for v in l.w.iter_mut() {
                *v = src[o];
                o += 1;
            }
            for v in l.b.iter_mut() {
                *v = src[o];
                o += 1;
            }
        }
        o
    }
}

/// Gaussian actor with state-independent log standard deviation, plus a
/// separate critic.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub log_std: Array1<f64>,
    pub critic: Mlp,
}

/// Output of one policy evaluation. `mean` is the pre-squash action mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value: f64,
}

const ACTOR_OUT_SCALE: f64 = 0.01;

impl PolicyParams {
    pub fn new<R: Rng>(obs_dim: usize, act_dim: usize, hidden: &[usize], log_std_init: f64, rng: &mut R) -> Self {
        let sizes = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        Self {
            actor: Mlp::random(&sizes(act_dim), ACTOR_OUT_SCALE, rng),
            log_std: Array1::from_elem(act_dim, log_std_init),
            critic: Mlp::random(&sizes(1), 1.0, rng),
        }
    }

    pub fn zeros(obs_dim: usize, act_dim: usize, hidden: &[usize]) -> Self {
        let sizes = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        Self { actor: Mlp::zeros(&sizes(act_dim)), log_std: Array1::zeros(act_dim), critic: Mlp::zeros(&sizes(1)) }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn hidden(&self) -> Vec<usize> {
        let s = self.actor.sizes();
        s[1..s.len() - 1].to_vec()
    }

    /// Parameters belonging to the actor (weights and log-std) come first in
    /// the flat layout; this is their count.
    pub fn actor_len(&self) -> usize {
        self.actor.n_params() + self.log_std.len()
    }

    pub fn n_params(&self) -> usize {
        self.actor_len() + self.critic.n_params()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        self.actor.write_flat(&mut v);
        v.extend(self.log_std.iter());
        self.critic.write_flat(&mut v);
        v
    }

    pub fn set_flat(&mut self, src: &[f64]) -> Result<()> {
        check_dim("flat parameters", self.n_params(), src.len())?;
        let mut o = self.actor.read_flat(src);
        for v in self.log_std.iter_mut() {
            *v = src[o];
            o += 1;
        }
        self.critic.read_flat(&src[o..]);
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Result<PolicyOutput> {
        check_dim("policy input", self.obs_dim(), obs.len())?;
        let x = ArrayView2::from_shape((1, obs.len()), obs).map_err(|e| Error::Domain(e.to_string()))?;
        let mean = self.actor.forward(x).pop().expect("output layer").into_raw_vec_and_offset().0;
        let value = self.critic.forward(x).pop().expect("output layer")[[0, 0]];
        Ok(PolicyOutput { mean, log_std: self.log_std.to_vec(), value })
    }

    /// Value estimate alone.
    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        check_dim("critic input", self.obs_dim(), obs.len())?;
        let x = ArrayView2::from_shape((1, obs.len()), obs).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(self.critic.forward(x).pop().expect("output layer")[[0, 0]])
    }
}

pub const LOG_2PI: f64 = 1.8378770664093453;

/// Log-density of a diagonal Gaussian.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - 0.5 * LOG_2PI
        })
        .sum()
}

/// Entropy of a diagonal Gaussian.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (1.0 + LOG_2PI)).sum()
}
