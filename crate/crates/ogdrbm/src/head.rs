//! Supervised phase: a single sigmoid output layer over the frozen hidden
//! representation, trained per-sample by stochastic gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbm::{sigmoid, RbmParams, RngState, SampleVector};

/// Loss driving the SGD update. Cross-entropy is the default; squared error
/// is kept behind this switch for sensitivity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeadLoss {
    #[default]
    CrossEntropy,
    SquaredError,
}

/// Settings for the discriminative phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub loss: HeadLoss,
    /// Half-width of the seeded uniform init interval.
    #[serde(default = "default_init_range")]
    pub init_range: f64,
}

fn default_init_range() -> f64 {
    0.05
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            epochs: 10,
            learning_rate: 0.1,
            loss: HeadLoss::CrossEntropy,
            init_range: 0.05,
        }
    }
}

/// Output-layer parameters: `weights[k]` is the length-K row of output
/// neuron `k`, one output per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    hidden_dim: usize,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl HeadParams {
    /// Seeded uniform init in [-init_range, init_range].
    pub fn init(hidden_dim: usize, classes: usize, init_range: f64, rng: &mut RngState) -> Self {
        let weights = (0..classes)
            .map(|_| {
                (0..hidden_dim)
                    .map(|_| rng.gen_uniform(-init_range, init_range))
                    .collect()
            })
            .collect();
        let biases = (0..classes)
            .map(|_| rng.gen_uniform(-init_range, init_range))
            .collect();
        HeadParams {
            hidden_dim,
            weights,
            biases,
        }
    }

    /// Build a head from explicit parts (used by tests and snapshot loading).
    pub fn from_parts(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        let hidden_dim = weights.first().map_or(0, Vec::len);
        if weights.iter().any(|row| row.len() != hidden_dim) {
            return Err(Error::Config("ragged head weight rows".into()));
        }
        if biases.len() != weights.len() {
            return Err(Error::ShapeMismatch {
                context: "head biases",
                expected: weights.len(),
                actual: biases.len(),
            });
        }
        Ok(HeadParams {
            hidden_dim,
            weights,
            biases,
        })
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn set_weight(&mut self, output: usize, hidden: usize, value: f64) {
        self.weights[output][hidden] = value;
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// y-hat_k = sigma(bias_k + sum_i w_ki h_i).
    pub fn forward(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.hidden_dim {
            return Err(Error::ShapeMismatch {
                context: "head_forward",
                expected: self.hidden_dim,
                actual: h.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(row, &b)| {
                let z: f64 = row.iter().zip(h).map(|(w, hi)| w * hi).sum();
                sigmoid(b + z)
            })
            .collect())
    }

    /// One SGD step on a single (h, y) pair. For cross-entropy with sigmoid
    /// outputs the update is eta * (y_k - yhat_k) * h_i; squared error adds
    /// the sigmoid derivative factor.
    pub fn sgd_step(&mut self, h: &[f64], target: &OneHotTarget, eta: f64, loss: HeadLoss) -> Result<()> {
        let y_hat = self.forward(h)?;
        if target.values.len() != self.classes() {
            return Err(Error::ShapeMismatch {
                context: "sgd_step target",
                expected: self.classes(),
                actual: target.values.len(),
            });
        }
        for (k, row) in self.weights.iter_mut().enumerate() {
            let err = target.values[k] - y_hat[k];
            let delta = match loss {
                HeadLoss::CrossEntropy => eta * err,
                HeadLoss::SquaredError => eta * err * y_hat[k] * (1.0 - y_hat[k]),
            };
            for (w, hi) in row.iter_mut().zip(h) {
                *w += delta * hi;
            }
            self.biases[k] += delta;
        }
        Ok(())
    }
}

/// One-hot class encoding; exactly one entry is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotTarget {
    pub values: Vec<f64>,
}

/// Encode label `c` in 1..=s as a one-hot vector.
pub fn encode_one_hot(c: usize, s: usize) -> Result<OneHotTarget> {
    if c < 1 || c > s {
        return Err(Error::LabelOutOfRange { label: c, s });
    }
    let mut values = vec![0.0; s];
    values[c - 1] = 1.0;
    Ok(OneHotTarget { values })
}

/// Per-output binomial cross-entropy, -sum_k [y log yhat + (1-y) log(1-yhat)].
pub fn cross_entropy(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter()
        .zip(y_hat)
        .map(|(&yk, &pk)| {
            let p = pk.clamp(1e-12, 1.0 - 1e-12);
            -(yk * p.ln() + (1.0 - yk) * (1.0 - p).ln())
        })
        .sum()
}

/// Train the output layer for `config.epochs` passes of per-sample SGD with
/// a seeded shuffle each epoch. The generative model is read-only here:
/// features are its hidden probabilities, weights untouched.
pub fn train_discriminative(
    model: &RbmParams,
    data: &[(&SampleVector, usize)],
    classes: usize,
    config: &HeadConfig,
    seed: u64,
) -> Result<HeadParams> {
    if model.hidden_count() == 0 {
        return Err(Error::EmptyNetwork);
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("train_discriminative data"));
    }
    let mut rng = RngState::from_seed(seed);
    let mut head = HeadParams::init(model.hidden_count(), classes, config.init_range, &mut rng);

    let features: Vec<Vec<f64>> = data
        .iter()
        .map(|(x, _)| model.hidden_probs(x))
        .collect::<Result<_>>()?;
    let targets: Vec<OneHotTarget> = data
        .iter()
        .map(|&(_, c)| encode_one_hot(c, classes))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    for _epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for &idx in &order {
            head.sgd_step(&features[idx], &targets[idx], config.learning_rate, config.loss)?;
        }
    }
    Ok(head)
}

/// Mean training loss of a head over a dataset (diagnostic).
pub fn mean_loss(
    model: &RbmParams,
    head: &HeadParams,
    data: &[(&SampleVector, usize)],
    classes: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for &(x, c) in data {
        let h = model.hidden_probs(x)?;
        let y_hat = head.forward(&h)?;
        let y = encode_one_hot(c, classes)?;
        total += cross_entropy(&y.values, &y_hat);
    }
    Ok(total / data.len() as f64)
}

/// Argmax class in 1..=s; lowest index wins exact ties.
pub fn predict(model: &RbmParams, head: &HeadParams, x: &SampleVector) -> Result<usize> {
    let h = model.hidden_probs(x)?;
    let y_hat = head.forward(&h)?;
    Ok(argmax_class(&y_hat))
}

pub fn argmax_class(y_hat: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in y_hat.iter().enumerate() {
        if v > y_hat[best] {
            best = k;
        }
    }
    best + 1
}
