//! Online generative phase: per-sample reconstruction-error evaluation and
//! the add / adapt / ignore dispatch that grows the hidden layer in a single
//! pass over the stream.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbm::{reconstruction_error, sample_bernoulli, RbmParams, RngState, SampleVector};

/// Thresholds and step sizes for the generative phase.
///
/// The shipped defaults (E_n = 0.1, E_m = 0.02, alpha = 0.1) come from a
/// calibration sweep (`ogdrbm calibrate`), not from a published source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    /// Novelty threshold E_n: reconstruction error above this adds a neuron.
    pub novelty_threshold: f64,
    /// Marginal threshold E_m: error at or below this ignores the sample.
    pub marginal_threshold: f64,
    /// CD-1 learning rate alpha.
    pub learning_rate: f64,
    /// Scale of the new neuron's incoming weights (init_scale * x).
    pub init_scale: f64,
    /// Use the sampled hidden state (instead of probabilities) as the
    /// data-phase statistic in the CD-1 update.
    #[serde(default)]
    pub data_phase_sampled: bool,
    /// Optional hard cap on the hidden layer size.
    #[serde(default)]
    pub max_neurons: Option<usize>,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            novelty_threshold: 0.1,
            marginal_threshold: 0.02,
            learning_rate: 0.1,
            init_scale: 0.01,
            data_phase_sampled: false,
            max_neurons: None,
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.marginal_threshold < 0.0 || self.marginal_threshold >= self.novelty_threshold {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 <= E_m < E_n, got E_m={} E_n={}",
                self.marginal_threshold, self.novelty_threshold
            )));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.init_scale <= 0.0 {
            return Err(Error::Config(format!(
                "init_scale must be > 0, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// Outcome of the per-sample threshold comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthDecision {
    Add,
    Adapt,
    Ignore,
}

impl GrowthDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            GrowthDecision::Add => "add",
            GrowthDecision::Adapt => "adapt",
            GrowthDecision::Ignore => "ignore",
        }
    }
}

/// One row of the growth trace. `class_label` is carried for post-hoc
/// analysis only; no learning operation reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTraceRecord {
    pub sample_index: usize,
    pub reconstruction_error: f64,
    pub decision: GrowthDecision,
    pub neuron_count_after: usize,
    pub class_label: usize,
}

pub type GrowthTrace = Vec<GrowthTraceRecord>;

/// Compute E_cd for one sample and classify it against the thresholds.
///
/// At K = 0 the error is defined as the maximum 1.0 and the decision is Add,
/// so the first sample always seeds the network. Ties go to the cheaper
/// branch: E_cd = E_n adapts, E_cd = E_m ignores.
///
/// Consumes one Bernoulli draw of K values from the rng (none at K = 0).
pub fn evaluate_sample(
    params: &RbmParams,
    x: &SampleVector,
    config: &GrowthConfig,
    rng: &mut RngState,
) -> Result<(f64, GrowthDecision, Vec<f64>)> {
    config.validate()?;
    if params.hidden_count() == 0 {
        params.hidden_probs(x)?; // shape check only
        return Ok((1.0, GrowthDecision::Add, Vec::new()));
    }
    let h = params.hidden_probs(x)?;
    let h_s = sample_bernoulli(&h, rng)?;
    let x_hat = params.visible_probs(&h_s)?;
    let e_cd = reconstruction_error(x, &x_hat)?;
    let decision = if e_cd > config.novelty_threshold {
        GrowthDecision::Add
    } else if e_cd > config.marginal_threshold {
        GrowthDecision::Adapt
    } else {
        GrowthDecision::Ignore
    };
    Ok((e_cd, decision, x_hat))
}

/// Append a hidden neuron seeded from the sample (incoming weights
/// `init_scale * x`, zero bias), then run one CD-1 step over all neurons
/// including the new one.
pub fn add_neuron(
    params: &mut RbmParams,
    x: &SampleVector,
    config: &GrowthConfig,
    rng: &mut RngState,
) -> Result<()> {
    if let Some(cap) = config.max_neurons {
        if params.hidden_count() >= cap {
            return Err(Error::CapacityExceeded { cap });
        }
    }
    let incoming: Vec<f64> = x.iter().map(|v| config.init_scale * v).collect();
    params.push_neuron(incoming)?;
    params.cd1_step(x, config.learning_rate, config.data_phase_sampled, rng)?;
    Ok(())
}

/// Evaluate one sample and dispatch: Add grows the network, Adapt runs one
/// CD-1 step, Ignore leaves the parameters untouched.
pub fn process_sample(
    params: &mut RbmParams,
    x: &SampleVector,
    class_label: usize,
    sample_index: usize,
    config: &GrowthConfig,
    rng: &mut RngState,
) -> Result<GrowthTraceRecord> {
    let (e_cd, decision, _x_hat) = evaluate_sample(params, x, config, rng)?;
    match decision {
        GrowthDecision::Add => add_neuron(params, x, config, rng)?,
        GrowthDecision::Adapt => {
            params.cd1_step(x, config.learning_rate, config.data_phase_sampled, rng)?;
        }
        GrowthDecision::Ignore => {}
    }
    Ok(GrowthTraceRecord {
        sample_index,
        reconstruction_error: e_cd,
        decision,
        neuron_count_after: params.hidden_count(),
        class_label,
    })
}

/// Single unsupervised pass over the stream in the given order. Returns the
/// grown model and one trace record per sample.
pub fn train_generative<'a, I>(stream: I, m: usize, config: &GrowthConfig, seed: u64) -> Result<(RbmParams, GrowthTrace)>
where
    I: IntoIterator<Item = (&'a [f64], usize)>,
{
    config.validate()?;
    let mut params = RbmParams::new(m);
    let mut rng = RngState::from_seed(seed);
    let mut trace = Vec::new();
    for (t, (x, label)) in stream.into_iter().enumerate() {
        trace.push(process_sample(&mut params, x, label, t, config, &mut rng)?);
    }
    if trace.is_empty() {
        return Err(Error::EmptyInput("train_generative stream"));
    }
    Ok((params, trace))
}

/// Write a trace as CSV with header `sample_index,E_cd,decision,K,class_label`.
pub fn write_trace_csv<W: Write>(trace: &GrowthTrace, mut out: W) -> Result<()> {
    writeln!(out, "sample_index,E_cd,decision,K,class_label")?;
    for r in trace {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.sample_index,
            r.reconstruction_error,
            r.decision.as_str(),
            r.neuron_count_after,
            r.class_label
        )?;
    }
    Ok(())
}

pub fn save_trace_csv(trace: &GrowthTrace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trace_csv(trace, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> GrowthConfig {
        GrowthConfig {
            novelty_threshold: 0.1,
            marginal_threshold: 0.02,
            learning_rate: 0.1,
            init_scale: 0.01,
            data_phase_sampled: false,
            max_neurons: None,
        }
    }

    #[test]
    fn empty_network_forces_add() {
        let params = RbmParams::new(3);
        let mut rng = RngState::from_seed(0);
        let (e, d, _) = evaluate_sample(&params, &[0.1, 0.2, 0.3], &toy_config(), &mut rng).unwrap();
        assert_eq!(e, 1.0);
        assert_eq!(d, GrowthDecision::Add);
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let mut cfg = toy_config();
        cfg.marginal_threshold = 0.2; // >= E_n
        let params = RbmParams::new(1);
        let mut rng = RngState::from_seed(0);
        assert!(matches!(
            evaluate_sample(&params, &[0.5], &cfg, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn decision_rule_boundaries() {
        let cfg = toy_config();
        let classify = |e: f64| {
            if e > cfg.novelty_threshold {
                GrowthDecision::Add
            } else if e > cfg.marginal_threshold {
                GrowthDecision::Adapt
            } else {
                GrowthDecision::Ignore
            }
        };
        assert_eq!(classify(0.5), GrowthDecision::Add);
        assert_eq!(classify(0.01), GrowthDecision::Ignore);
        assert_eq!(classify(0.05), GrowthDecision::Adapt);
        // ties go to the cheaper branch
        assert_eq!(classify(cfg.novelty_threshold), GrowthDecision::Adapt);
        assert_eq!(classify(cfg.marginal_threshold), GrowthDecision::Ignore);
    }

    #[test]
    fn add_neuron_init_column() {
        // alpha -> 0 isolates the init; the CD step still requires alpha > 0,
        // so use one small enough that the increment is negligible only for
        // the exact-init check below we instead inspect before the step via
        // a zero-learning-rate trick: run push manually.
        let cfg = toy_config();
        let x = [1.0, 0.5];
        let mut params = RbmParams::new(2);
        let mut rng = RngState::from_seed(3);
        add_neuron(&mut params, &x, &cfg, &mut rng).unwrap();
        assert_eq!(params.hidden_count(), 1);
        // After the CD step the column moved off the init; replay to check
        // the init column that entered the step.
        let mut replay = RbmParams::new(2);
        replay.push_neuron(vec![0.01, 0.005]).unwrap();
        let mut rng2 = RngState::from_seed(3);
        replay
            .cd1_step(&x, cfg.learning_rate, cfg.data_phase_sampled, &mut rng2)
            .unwrap();
        assert_eq!(params, replay);
    }

    #[test]
    fn capacity_cap_is_loud() {
        let mut cfg = toy_config();
        cfg.max_neurons = Some(1);
        let x = [0.9, 0.9];
        let mut params = RbmParams::new(2);
        let mut rng = RngState::from_seed(5);
        add_neuron(&mut params, &x, &cfg, &mut rng).unwrap();
        assert!(matches!(
            add_neuron(&mut params, &x, &cfg, &mut rng),
            Err(Error::CapacityExceeded { cap: 1 })
        ));
    }

    #[test]
    fn ignore_is_bit_exact_noop() {
        // Shrink thresholds so a trained-enough model ignores; easiest is a
        // config whose marginal threshold is 1.0-epsilon after one add.
        let cfg = GrowthConfig {
            novelty_threshold: 0.999,
            marginal_threshold: 0.99,
            ..toy_config()
        };
        let x = [0.5, 0.5];
        let mut params = RbmParams::new(2);
        let mut rng = RngState::from_seed(1);
        // first sample adds
        let r = process_sample(&mut params, &x, 1, 0, &cfg, &mut rng).unwrap();
        assert_eq!(r.decision, GrowthDecision::Add);
        assert_eq!(r.neuron_count_after, 1);
        // second sample: error can't exceed 0.99 on [0,1] data here
        let before = params.clone();
        let r2 = process_sample(&mut params, &x, 1, 1, &cfg, &mut rng).unwrap();
        assert_eq!(r2.decision, GrowthDecision::Ignore);
        assert_eq!(params, before);
    }

    #[test]
    fn three_sample_stream_matches_hand_replay() {
        let cfg = toy_config();
        let samples: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let labels = [1usize, 2, 1];
        let seed = 77;

        let stream = samples.iter().map(|s| s.as_slice()).zip(labels);
        let (params, trace) = train_generative(stream, 2, &cfg, seed).unwrap();

        // Oracle: replay evaluate + dispatch step by step on the same stream.
        let mut p = RbmParams::new(2);
        let mut rng = RngState::from_seed(seed);
        let mut expected_trace = Vec::new();
        for (t, (x, label)) in samples.iter().zip(labels).enumerate() {
            let (e, d, _) = evaluate_sample(&p, x, &cfg, &mut rng).unwrap();
            match d {
                GrowthDecision::Add => add_neuron(&mut p, x, &cfg, &mut rng).unwrap(),
                GrowthDecision::Adapt => {
                    p.cd1_step(x, cfg.learning_rate, cfg.data_phase_sampled, &mut rng)
                        .unwrap();
                }
                GrowthDecision::Ignore => {}
            }
            expected_trace.push(GrowthTraceRecord {
                sample_index: t,
                reconstruction_error: e,
                decision: d,
                neuron_count_after: p.hidden_count(),
                class_label: label,
            });
        }
        assert_eq!(params, p);
        assert_eq!(trace, expected_trace);
    }

    #[test]
    fn constant_stream_settles_to_one_neuron_and_ignores() {
        let cfg = toy_config();
        let x = vec![0.8, 0.2, 0.6, 0.4];
        let stream = std::iter::repeat_n(x.as_slice(), 200).zip(std::iter::repeat(1));
        let (params, trace) = train_generative(stream, 4, &cfg, 11).unwrap();
        assert_eq!(params.hidden_count(), 1);
        assert_eq!(trace[0].decision, GrowthDecision::Add);
        // once converged, the tail of the trace is all Ignore
        let tail = &trace[trace.len() - 20..];
        assert!(tail.iter().all(|r| r.decision == GrowthDecision::Ignore));
    }

    #[test]
    fn trace_length_and_determinism() {
        let cfg = toy_config();
        let mut gen = RngState::from_seed(123);
        let samples: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..6).map(|_| gen.gen_f64()).collect())
            .collect();
        let run = || {
            let stream = samples.iter().map(|s| s.as_slice()).zip(std::iter::repeat(1));
            train_generative(stream, 6, &cfg, 9).unwrap()
        };
        let (p1, t1) = run();
        let (p2, t2) = run();
        assert_eq!(t1.len(), 50);
        assert_eq!(p1, p2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn empty_stream_is_an_error() {
        let cfg = toy_config();
        let stream: Vec<(&[f64], usize)> = Vec::new();
        assert!(matches!(
            train_generative(stream, 3, &cfg, 0),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn trace_csv_shape() {
        let trace = vec![GrowthTraceRecord {
            sample_index: 0,
            reconstruction_error: 1.0,
            decision: GrowthDecision::Add,
            neuron_count_after: 1,
            class_label: 3,
        }];
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next().unwrap(), "sample_index,E_cd,decision,K,class_label");
        assert_eq!(s.lines().count(), 2);
        assert!(s.lines().nth(1).unwrap().starts_with("0,1,add,1,3"));
    }
}
