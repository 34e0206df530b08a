//! Experiment orchestration: end-to-end runs, the multi-seed permutation
//! study, neuron-class association, threshold calibration sweeps, and the
//! plot-ready CSV bundles.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    binary_labels_minority_positive, columns_with_missing, impute_age_grouped, load_csv,
    load_idx, normalize_minmax, permuted_stream, stratified_split_indices, table_to_matrix, Dataset,
};
use crate::error::{Error, Result};
use crate::growth::{train_generative, GrowthConfig, GrowthDecision, GrowthTrace};
use crate::head::{predict, train_discriminative, HeadConfig};
use crate::metrics::{confusion, imbalance_factor, MetricsReport};
use crate::rbm::RbmParams;
use crate::snapshot::ModelSnapshot;

/// Environment variable naming the directory dataset paths are resolved
/// against when they are relative.
pub const DATA_ROOT_ENV: &str = "OGDRBM_DATA_ROOT";

/// Where the input data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// IDX image/label pairs with a dedicated test set (MNIST layout).
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Desk-scale truncation of the training stream (None = full set).
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
    /// Binary-labeled CSV split by a seeded stratified partition. The
    /// minority label value becomes class 1 (positive).
    Csv {
        path: PathBuf,
        label_column: String,
        /// Enables age-grouped mean imputation for columns with missing
        /// cells (auto-detected unless `impute_columns` narrows them).
        #[serde(default)]
        age_column: Option<String>,
        #[serde(default)]
        impute_columns: Option<Vec<String>>,
        /// Columns excluded from the feature matrix (index columns etc).
        #[serde(default)]
        drop_columns: Vec<String>,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
        /// Stratified subsample applied before splitting (desk scale).
        #[serde(default)]
        sample_limit: Option<usize>,
    },
}

fn default_train_fraction() -> f64 {
    0.7
}

/// Full experiment description; echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub growth: GrowthConfig,
    #[serde(default)]
    pub head: HeadConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.growth.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let DatasetSpec::Csv { train_fraction, .. } = &self.dataset {
            if !(0.0..1.0).contains(train_fraction) || *train_fraction == 0.0 {
                return Err(Error::Config(format!(
                    "train_fraction must be in (0,1), got {train_fraction}"
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

fn resolve(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(root) => Path::new(&root).join(path),
        None => path.to_path_buf(),
    }
}

/// Load and preprocess the dataset into (train, test). For CSV specs the
/// stratified split is driven by `seed`, so distinct trials see distinct
/// splits.
pub fn load_dataset(spec: &DatasetSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    match spec {
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            train_limit,
            test_limit,
        } => {
            let mut train = load_idx(&resolve(train_images), &resolve(train_labels))?;
            let mut test = load_idx(&resolve(test_images), &resolve(test_labels))?;
            if let Some(n) = train_limit {
                train = train.take(*n);
            }
            if let Some(n) = test_limit {
                test = test.take(*n);
            }
            Ok((train, test))
        }
        DatasetSpec::Csv {
            path,
            label_column,
            age_column,
            impute_columns,
            drop_columns,
            train_fraction,
            sample_limit,
        } => {
            let mut table = load_csv(&resolve(path))?;
            for name in drop_columns {
                let idx = table.column_index(name)?;
                table.columns.remove(idx);
                for row in &mut table.rows {
                    row.remove(idx);
                }
            }
            if let Some(age) = age_column {
                let targets = match impute_columns {
                    Some(cols) => cols.clone(),
                    None => columns_with_missing(&table),
                };
                impute_age_grouped(&mut table, &targets, age)?;
            }
            let (features, raw_labels) = table_to_matrix(&table, label_column)?;
            let labels = binary_labels_minority_positive(&raw_labels)?;
            let (features, labels) = match sample_limit {
                Some(limit) if *limit < labels.len() => {
                    let frac = *limit as f64 / labels.len() as f64;
                    let (keep, _) = stratified_split_indices(&labels, 2, frac, seed ^ 0x5eed)?;
                    (
                        keep.iter().map(|&i| features[i].clone()).collect(),
                        keep.iter().map(|&i| labels[i]).collect(),
                    )
                }
                _ => (features, labels),
            };
            let (train_idx, test_idx) = stratified_split_indices(&labels, 2, *train_fraction, seed)?;
            let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
                (
                    idx.iter().map(|&i| features[i].clone()).collect(),
                    idx.iter().map(|&i| labels[i]).collect(),
                )
            };
            let (train_f, train_l) = pick(&train_idx);
            let (test_f, test_l) = pick(&test_idx);
            normalize_minmax(train_f, train_l, test_f, test_l, 2)
        }
    }
}

/// Result of one end-to-end run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub final_neurons: usize,
    /// Add decisions attributed to each class (index c-1), summing to K.
    pub neurons_per_class: Vec<usize>,
    pub train_metrics: MetricsReport,
    pub test_metrics: MetricsReport,
    pub train_imbalance_factor: f64,
    pub wall_clock_secs: f64,
    pub config: ExperimentConfig,
}

/// Per-class Add counts of a trace; sums to the final neuron count.
pub fn neuron_class_association(trace: &GrowthTrace, classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; classes];
    for r in trace {
        if r.decision == GrowthDecision::Add {
            counts[r.class_label - 1] += 1;
        }
    }
    counts
}

/// Everything a single run produces, beyond the summary report.
pub struct RunArtifacts {
    pub report: RunReport,
    pub trace: GrowthTrace,
    pub model: RbmParams,
    pub snapshot: ModelSnapshot,
}

/// One full pipeline: ingest, stream-order, generative pass, discriminative
/// head, train/test evaluation.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunArtifacts> {
    config.validate()?;
    let start = Instant::now();
    let (train, test) = load_dataset(&config.dataset, seed).map_err(|e| e.in_stage("ingest"))?;
    let order = permuted_stream(train.len(), seed);

    let stream = order
        .permutation
        .iter()
        .map(|&i| (train.features[i].as_slice(), train.labels[i]));
    let (model, trace) = train_generative(stream, train.feature_dim(), &config.growth, seed)
        .map_err(|e| e.in_stage("generative"))?;

    let labeled: Vec<(&[f64], usize)> = train
        .features
        .iter()
        .map(|f| f.as_slice())
        .zip(train.labels.iter().copied())
        .collect();
    let head = train_discriminative(&model, &labeled, train.classes, &config.head, seed)
        .map_err(|e| e.in_stage("discriminative"))?;

    let evaluate = |ds: &Dataset| -> Result<MetricsReport> {
        let preds: Vec<usize> = ds
            .features
            .iter()
            .map(|x| predict(&model, &head, x))
            .collect::<Result<_>>()?;
        MetricsReport::from_confusion(confusion(&preds, &ds.labels, ds.classes)?)
    };
    let train_metrics = evaluate(&train).map_err(|e| e.in_stage("evaluate-train"))?;
    let test_metrics = evaluate(&test).map_err(|e| e.in_stage("evaluate-test"))?;

    let report = RunReport {
        seed,
        final_neurons: model.hidden_count(),
        neurons_per_class: neuron_class_association(&trace, train.classes),
        train_metrics,
        test_metrics,
        train_imbalance_factor: imbalance_factor(&train.class_counts())
            .map_err(|e| e.in_stage("evaluate-train"))?,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        config: config.clone(),
    };
    let snapshot = ModelSnapshot::new(model.clone(), config.growth.clone(), Some(head));
    Ok(RunArtifacts {
        report,
        trace,
        model,
        snapshot,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregate over the permutation trials (population std, matching a
/// fixed set of seeds rather than a sample from one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialsReport {
    pub reports: Vec<RunReport>,
    pub test_accuracy_mean: f64,
    pub test_accuracy_std: f64,
    pub test_gmean_mean: Option<f64>,
    pub neurons_mean: f64,
    pub neurons_std: f64,
    pub neurons_per_class_mean: Vec<f64>,
    pub neurons_per_class_std: Vec<f64>,
}

impl TrialsReport {
    pub fn from_reports(reports: Vec<RunReport>) -> Result<Self> {
        if reports.len() < 2 {
            return Err(Error::Config("trials require at least 2 seeds".into()));
        }
        let acc: Vec<f64> = reports.iter().map(|r| r.test_metrics.eta_o).collect();
        let ks: Vec<f64> = reports.iter().map(|r| r.final_neurons as f64).collect();
        let (acc_mean, acc_std) = mean_std(&acc);
        let (k_mean, k_std) = mean_std(&ks);
        let gmeans: Vec<f64> = reports.iter().filter_map(|r| r.test_metrics.gmean).collect();
        let gmean_mean = if gmeans.len() == reports.len() {
            Some(gmeans.iter().sum::<f64>() / gmeans.len() as f64)
        } else {
            None
        };
        let classes = reports[0].neurons_per_class.len();
        let mut per_class_mean = Vec::with_capacity(classes);
        let mut per_class_std = Vec::with_capacity(classes);
        for c in 0..classes {
            let vals: Vec<f64> = reports.iter().map(|r| r.neurons_per_class[c] as f64).collect();
            let (m, s) = mean_std(&vals);
            per_class_mean.push(m);
            per_class_std.push(s);
        }
        Ok(TrialsReport {
            reports,
            test_accuracy_mean: acc_mean,
            test_accuracy_std: acc_std,
            test_gmean_mean: gmean_mean,
            neurons_mean: k_mean,
            neurons_std: k_std,
            neurons_per_class_mean: per_class_mean,
            neurons_per_class_std: per_class_std,
        })
    }
}

/// Run the config once per seed, in parallel, and aggregate. A failing
/// trial fails the whole aggregate.
pub fn run_permutation_trials(config: &ExperimentConfig) -> Result<(TrialsReport, Vec<GrowthTrace>)> {
    config.validate()?;
    let results: Vec<Result<RunArtifacts>> = config
        .seeds
        .par_iter()
        .map(|&seed| run_single(config, seed))
        .collect();
    let mut reports = Vec::new();
    let mut traces = Vec::new();
    for r in results {
        let art = r?;
        reports.push(art.report);
        traces.push(art.trace);
    }
    Ok((TrialsReport::from_reports(reports)?, traces))
}

/// One grid point of a calibration sweep with its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub novelty_threshold: f64,
    pub marginal_threshold: f64,
    pub learning_rate: f64,
    pub final_neurons: usize,
    pub test_accuracy: f64,
    pub test_gmean: Option<f64>,
}

/// Grid-sweep the growth thresholds on a fixed seed, ranked by distance to
/// the target neuron count, ties broken by test quality.
pub fn calibrate_thresholds(
    config: &ExperimentConfig,
    grid: &[(f64, f64, f64)],
    target_neurons: usize,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::Config("calibration grid is empty".into()));
    }
    let seed = config.seeds[0];
    let points: Vec<Result<SweepPoint>> = grid
        .par_iter()
        .map(|&(e_n, e_m, alpha)| {
            let mut cfg = config.clone();
            cfg.growth.novelty_threshold = e_n;
            cfg.growth.marginal_threshold = e_m;
            cfg.growth.learning_rate = alpha;
            cfg.growth.validate()?;
            let art = run_single(&cfg, seed)?;
            Ok(SweepPoint {
                novelty_threshold: e_n,
                marginal_threshold: e_m,
                learning_rate: alpha,
                final_neurons: art.report.final_neurons,
                test_accuracy: art.report.test_metrics.eta_o,
                test_gmean: art.report.test_metrics.gmean,
            })
        })
        .collect();
    let mut points = points.into_iter().collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| {
        let da = a.final_neurons.abs_diff(target_neurons);
        let db = b.final_neurons.abs_diff(target_neurons);
        da.cmp(&db).then(
            b.test_gmean
                .unwrap_or(b.test_accuracy / 100.0)
                .total_cmp(&a.test_gmean.unwrap_or(a.test_accuracy / 100.0)),
        )
    });
    Ok(points)
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut out: W) -> Result<()> {
    writeln!(out, "E_n,E_m,alpha,K,test_accuracy,test_gmean")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.novelty_threshold,
            p.marginal_threshold,
            p.learning_rate,
            p.final_neurons,
            p.test_accuracy,
            p.test_gmean.map_or(String::new(), |g| g.to_string())
        )?;
    }
    Ok(())
}

/// A published comparison row, embedded as a constant rather than
/// recomputed. `source` distinguishes rows we measured from reference rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineRow {
    pub dataset: &'static str,
    pub classifier: &'static str,
    pub neurons: Option<usize>,
    pub test_tpr: f64,
    pub test_tnr: f64,
    pub test_gmean: f64,
    pub source: &'static str,
}

/// Reference results for the credit benchmarks (reported comparison rows).
pub const BASELINE_ROWS: &[BaselineRow] = &[
    BaselineRow { dataset: "uci_german", classifier: "SVM", neurons: Some(534), test_tpr: 0.3255, test_tnr: 0.8878, test_gmean: 0.5376, source: "published" },
    BaselineRow { dataset: "uci_german", classifier: "NN", neurons: Some(60), test_tpr: 0.4574, test_tnr: 0.8446, test_gmean: 0.6216, source: "published" },
    BaselineRow { dataset: "uci_german", classifier: "ClassRBM", neurons: Some(80), test_tpr: 0.4418, test_tnr: 0.8271, test_gmean: 0.6045, source: "published" },
    BaselineRow { dataset: "uci_german", classifier: "ST", neurons: None, test_tpr: 0.67, test_tnr: 0.68, test_gmean: 0.68, source: "published" },
    BaselineRow { dataset: "uci_german", classifier: "OGD-RBM", neurons: Some(48), test_tpr: 0.60, test_tnr: 0.83, test_gmean: 0.71, source: "published" },
    BaselineRow { dataset: "uci_aus", classifier: "SVM", neurons: Some(192), test_tpr: 0.7946, test_tnr: 0.9263, test_gmean: 0.8579, source: "published" },
    BaselineRow { dataset: "uci_aus", classifier: "NN", neurons: Some(60), test_tpr: 0.7917, test_tnr: 0.8828, test_gmean: 0.836, source: "published" },
    BaselineRow { dataset: "uci_aus", classifier: "ClassRBM", neurons: Some(50), test_tpr: 0.8953, test_tnr: 0.8264, test_gmean: 0.8602, source: "published" },
    BaselineRow { dataset: "uci_aus", classifier: "ST", neurons: None, test_tpr: 0.828, test_tnr: 0.805, test_gmean: 0.816, source: "published" },
    BaselineRow { dataset: "uci_aus", classifier: "OGD-RBM", neurons: Some(38), test_tpr: 0.92, test_tnr: 0.86, test_gmean: 0.89, source: "published" },
    BaselineRow { dataset: "kaggle_gmsc", classifier: "SVM", neurons: Some(6340), test_tpr: 0.5771, test_tnr: 0.8982, test_gmean: 0.72, source: "published" },
    BaselineRow { dataset: "kaggle_gmsc", classifier: "NN", neurons: Some(60), test_tpr: 0.6165, test_tnr: 0.8792, test_gmean: 0.7363, source: "published" },
    BaselineRow { dataset: "kaggle_gmsc", classifier: "ClassRBM", neurons: Some(100), test_tpr: 0.6, test_tnr: 0.8975, test_gmean: 0.73384, source: "published" },
    BaselineRow { dataset: "kaggle_gmsc", classifier: "ST", neurons: None, test_tpr: 0.515, test_tnr: 0.622, test_gmean: 0.566, source: "published" },
    BaselineRow { dataset: "kaggle_gmsc", classifier: "OGD-RBM", neurons: Some(13), test_tpr: 0.63, test_tnr: 0.88, test_gmean: 0.74, source: "published" },
];

/// Write the plot-ready CSV bundle for one run plus the trial aggregate:
/// reconstruction-error trace, neuron growth curve, per-class association
/// (mean/std across trials), and the benchmark table with reference rows.
pub fn emit_figures_data(
    traces: &[GrowthTrace],
    trials: Option<&TrialsReport>,
    classes: usize,
    own_rows: &[(String, RunReport)],
    out_dir: &Path,
) -> Result<()> {
    let first = traces.first().ok_or(Error::EmptyInput("emit_figures_data traces"))?;
    std::fs::create_dir_all(out_dir)?;

    let mut f = std::fs::File::create(out_dir.join("error_trace.csv"))?;
    writeln!(f, "sample_index,E_cd")?;
    for r in first {
        writeln!(f, "{},{}", r.sample_index, r.reconstruction_error)?;
    }

    let mut f = std::fs::File::create(out_dir.join("neuron_growth.csv"))?;
    writeln!(f, "sample_index,K")?;
    for r in first {
        writeln!(f, "{},{}", r.sample_index, r.neuron_count_after)?;
    }

    let mut f = std::fs::File::create(out_dir.join("class_association.csv"))?;
    writeln!(f, "class,neurons_mean,neurons_std")?;
    let per_trace: Vec<Vec<usize>> = traces.iter().map(|t| neuron_class_association(t, classes)).collect();
    for c in 0..classes {
        let vals: Vec<f64> = per_trace.iter().map(|v| v[c] as f64).collect();
        let (mean, std) = mean_std(&vals);
        writeln!(f, "{},{},{}", c + 1, mean, std)?;
    }

    let mut f = std::fs::File::create(out_dir.join("benchmark_table.csv"))?;
    writeln!(f, "dataset,classifier,K,test_tpr,test_tnr,test_gmean,source")?;
    for row in BASELINE_ROWS {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            row.dataset,
            row.classifier,
            row.neurons.map_or(String::new(), |k| k.to_string()),
            row.test_tpr,
            row.test_tnr,
            row.test_gmean,
            row.source
        )?;
    }
    for (dataset, report) in own_rows {
        writeln!(
            f,
            "{},OGD-RBM (this run),{},{},{},{},measured",
            dataset,
            report.final_neurons,
            report.test_metrics.tpr.map_or(String::new(), |v| v.to_string()),
            report.test_metrics.tnr.map_or(String::new(), |v| v.to_string()),
            report.test_metrics.gmean.map_or(String::new(), |v| v.to_string()),
        )?;
    }

    if let Some(t) = trials {
        let mut f = std::fs::File::create(out_dir.join("trials_summary.csv"))?;
        writeln!(f, "metric,mean,std")?;
        writeln!(f, "test_accuracy,{},{}", t.test_accuracy_mean, t.test_accuracy_std)?;
        writeln!(f, "neurons,{},{}", t.neurons_mean, t.neurons_std)?;
    }
    Ok(())
}
