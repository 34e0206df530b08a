//! Dense RBM parameter store and the elementary generative computations:
//! activation probabilities, Bernoulli sampling, the one-step
//! contrastive-divergence update, and reconstruction error.
//!
//! Weights are stored per hidden neuron: `weights[i]` is the length-`m`
//! incoming column of hidden neuron `i`. This makes growing the hidden
//! layer a single `push`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerically stable logistic function. Split into branches so that
/// `exp` is only ever called on a non-positive argument.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Seeded, platform-independent random stream (ChaCha8). Cloning yields an
/// independent generator at the same position, which the test oracles use
/// to replay a sampling sequence exactly.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn from_seed(seed: u64) -> Self {
        RngState {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gen_f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform draw in `[0, n)`; used by shuffles and splits.
    pub fn gen_index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.rng.gen_range(0..=i);
            items.swap(i, j);
        }
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn gen_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.gen_f64()
    }
}

/// An input sample: `m` reals in `[0,1]` (the ingestion layer enforces the
/// bound).
pub type SampleVector = [f64];

/// RBM parameters with a growable hidden layer.
///
/// `weights[i][j]` connects visible unit `j` to hidden unit `i`. The hidden
/// count `K` is `weights.len()` and starts at zero; it only ever changes by
/// `+1` through [`RbmParams::push_neuron`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmParams {
    visible_dim: usize,
    weights: Vec<Vec<f64>>,
    hidden_biases: Vec<f64>,
    visible_biases: Vec<f64>,
}

impl RbmParams {
    /// Empty network over `m` visible units (K = 0).
    pub fn new(m: usize) -> Self {
        RbmParams {
            visible_dim: m,
            weights: Vec::new(),
            hidden_biases: Vec::new(),
            visible_biases: vec![0.0; m],
        }
    }

    pub fn visible_dim(&self) -> usize {
        self.visible_dim
    }

    pub fn hidden_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn hidden_biases(&self) -> &[f64] {
        &self.hidden_biases
    }

    pub fn visible_biases(&self) -> &[f64] {
        &self.visible_biases
    }

    /// Append one hidden neuron with the given incoming column and zero bias.
    pub fn push_neuron(&mut self, incoming: Vec<f64>) -> Result<()> {
        if incoming.len() != self.visible_dim {
            return Err(Error::ShapeMismatch {
                context: "push_neuron",
                expected: self.visible_dim,
                actual: incoming.len(),
            });
        }
        self.weights.push(incoming);
        self.hidden_biases.push(0.0);
        Ok(())
    }

    fn check_visible(&self, len: usize, context: &'static str) -> Result<()> {
        if len != self.visible_dim {
            return Err(Error::ShapeMismatch {
                context,
                expected: self.visible_dim,
                actual: len,
            });
        }
        Ok(())
    }

    /// P(h_i = 1 | x) = sigma(b_i + sum_j w_ji x_j) for each hidden unit.
    /// K = 0 yields an empty vector.
    pub fn hidden_probs(&self, x: &SampleVector) -> Result<Vec<f64>> {
        self.check_visible(x.len(), "hidden_probs")?;
        Ok(self
            .weights
            .iter()
            .zip(&self.hidden_biases)
            .map(|(col, &b)| {
                let z: f64 = col.iter().zip(x).map(|(w, xj)| w * xj).sum();
                sigmoid(b + z)
            })
            .collect())
    }

    /// P(x_j = 1 | h) = sigma(c_j + sum_i w_ji h_i) for each visible unit.
    /// With K = 0 this is the bias-only reconstruction sigma(c_j).
    pub fn visible_probs(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.hidden_count() {
            return Err(Error::ShapeMismatch {
                context: "visible_probs",
                expected: self.hidden_count(),
                actual: h.len(),
            });
        }
        let mut out = self.visible_biases.clone();
        for (col, &hi) in self.weights.iter().zip(h) {
            for (oj, wj) in out.iter_mut().zip(col) {
                *oj += wj * hi;
            }
        }
        for v in &mut out {
            *v = sigmoid(*v);
        }
        Ok(out)
    }

    /// Hidden activation probabilities of the reconstruction (same map as
    /// [`RbmParams::hidden_probs`], applied to x-hat).
    pub fn hidden_reprobs(&self, x_hat: &[f64]) -> Result<Vec<f64>> {
        self.check_visible(x_hat.len(), "hidden_reprobs")?;
        self.hidden_probs(x_hat)
    }

    /// One contrastive-divergence step at learning rate `alpha`. Returns the
    /// reconstruction used for the update.
    ///
    /// Phases: h = P(h|x); h_s ~ Bernoulli(h); x_hat = P(x|h_s);
    /// h_hat = P(h|x_hat). The data-phase statistic in the weight increment is
    /// `h` by default, or `h_s` when `data_phase_sampled` is set.
    pub fn cd1_step(
        &mut self,
        x: &SampleVector,
        alpha: f64,
        data_phase_sampled: bool,
        rng: &mut RngState,
    ) -> Result<Vec<f64>> {
        if self.hidden_count() == 0 {
            return Err(Error::EmptyNetwork);
        }
        self.check_visible(x.len(), "cd1_step")?;

        let h = self.hidden_probs(x)?;
        let h_s = sample_bernoulli(&h, rng)?;
        let x_hat = self.visible_probs(&h_s)?;
        let h_hat = self.hidden_reprobs(&x_hat)?;

        let h_data: &[f64] = if data_phase_sampled { &h_s } else { &h };
        for (i, col) in self.weights.iter_mut().enumerate() {
            let (hi, hhi) = (h_data[i], h_hat[i]);
            for (j, w) in col.iter_mut().enumerate() {
                *w += alpha * (x[j] * hi - x_hat[j] * hhi);
            }
        }
        for (b, (hi, hhi)) in self.hidden_biases.iter_mut().zip(h_data.iter().zip(&h_hat)) {
            *b += alpha * (hi - hhi);
        }
        for (c, (xj, xhj)) in self.visible_biases.iter_mut().zip(x.iter().zip(&x_hat)) {
            *c += alpha * (xj - xhj);
        }
        Ok(x_hat)
    }
}

/// Independent Bernoulli draws, one per probability. Consumes exactly
/// `probs.len()` uniforms from the stream.
pub fn sample_bernoulli(probs: &[f64], rng: &mut RngState) -> Result<Vec<f64>> {
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BadProbability(p));
        }
    }
    Ok(probs
        .iter()
        .map(|&p| if rng.gen_f64() < p { 1.0 } else { 0.0 })
        .collect())
}

/// Mean squared reconstruction error, (1/m) sum_j (x_j - x_hat_j)^2.
/// Lies in [0,1] when both vectors do.
pub fn reconstruction_error(x: &SampleVector, x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::ShapeMismatch {
            context: "reconstruction_error",
            expected: x.len(),
            actual: x_hat.len(),
        });
    }
    let m = x.len() as f64;
    Ok(x.iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / m)
}
