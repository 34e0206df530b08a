//! Online generative-discriminative RBM.
//!
//! The hidden layer starts empty and grows as data streams in: each sample's
//! reconstruction error is compared against a novelty threshold (add a
//! neuron), a marginal threshold (adapt via one CD-1 step), or neither
//! (ignore). A sigmoid output layer is then trained on the frozen hidden
//! features for classification. The [`harness`] module reproduces the
//! benchmark protocol (permutation trials, calibration sweeps, figure and
//! table exports).

pub mod data;
pub mod error;
pub mod growth;
pub mod harness;
pub mod head;
pub mod metrics;
pub mod rbm;
pub mod snapshot;

pub use error::{Error, Result};
pub use growth::{GrowthConfig, GrowthDecision, GrowthTrace, GrowthTraceRecord};
pub use harness::{DatasetSpec, ExperimentConfig, RunReport, TrialsReport};
pub use head::{HeadConfig, HeadParams};
pub use metrics::{ConfusionMatrix, MetricsReport};
pub use rbm::{RbmParams, RngState};
pub use snapshot::ModelSnapshot;
