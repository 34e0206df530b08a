//! Command-line front end: end-to-end training runs, snapshot evaluation,
//! multi-seed permutation trials, threshold calibration, and figure-data
//! regeneration from stored run directories.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ogdrbm::data::Dataset;
use ogdrbm::error::{Error, Result};
use ogdrbm::growth::{save_trace_csv, GrowthDecision, GrowthTrace, GrowthTraceRecord};
use ogdrbm::harness::{
    self, calibrate_thresholds, emit_figures_data, load_dataset, run_permutation_trials, run_single,
    write_sweep_csv, ExperimentConfig,
};
use ogdrbm::head::predict;
use ogdrbm::metrics::{confusion, MetricsReport};
use ogdrbm::snapshot::ModelSnapshot;

#[derive(Parser)]
#[command(name = "ogdrbm", version, about = "Online generative-discriminative RBM")]
struct Cli {
    /// Experiment config (TOML). Dataset paths resolve against
    /// $OGDRBM_DATA_ROOT when relative.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the first seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: runs/<command>-<seed>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One end-to-end run: generative pass, head training, evaluation.
    Train,
    /// Evaluate a saved model snapshot on the config's test split.
    Eval {
        /// Path to a model.snapshot produced by `train`.
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Run the config once per seed and aggregate (permutation study).
    Trials,
    /// Grid-sweep growth thresholds against a target network size.
    Calibrate {
        /// Comma-separated novelty thresholds E_n.
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2")]
        novelty: Vec<f64>,
        /// Comma-separated marginal thresholds E_m.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.02")]
        marginal: Vec<f64>,
        /// Comma-separated learning rates alpha.
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        alpha: Vec<f64>,
        /// Target hidden-layer size.
        #[arg(long)]
        target_neurons: usize,
    },
    /// Regenerate the figure CSV bundle from a completed run directory.
    Report {
        /// Directory containing report.json and trace.csv.
        #[arg(long)]
        run_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seeds.insert(0, seed);
        cfg.seeds.dedup();
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, default_name: &str) -> PathBuf {
    cli.out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(default_name))
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train => {
            let cfg = load_config(&cli)?;
            let seed = cfg.seeds[0];
            let dir = out_dir(&cli, &format!("train-{seed}"));
            std::fs::create_dir_all(&dir)?;
            let art = run_single(&cfg, seed)?;
            std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&art.report)?)?;
            save_trace_csv(&art.trace, &dir.join("trace.csv"))?;
            art.snapshot.save(&dir.join("model.snapshot"))?;
            emit_figures_data(
                std::slice::from_ref(&art.trace),
                None,
                art.report.train_metrics.confusion.classes(),
                &[(dataset_name(&cfg), art.report.clone())],
                &dir,
            )?;
            println!(
                "seed {seed}: K={} train eta_O={:.2}% test eta_O={:.2}%{}",
                art.report.final_neurons,
                art.report.train_metrics.eta_o,
                art.report.test_metrics.eta_o,
                art.report
                    .test_metrics
                    .gmean
                    .map_or(String::new(), |g| format!(" test Gmean={g:.4}")),
            );
            println!("artifacts written to {}", dir.display());
            Ok(())
        }
        Command::Eval { snapshot } => {
            let cfg = load_config(&cli)?;
            let seed = cfg.seeds[0];
            let snap = ModelSnapshot::load(snapshot)?;
            let head = snap
                .head
                .as_ref()
                .ok_or_else(|| Error::Config("snapshot has no trained head".into()))?;
            let (_, test) = load_dataset(&cfg.dataset, seed)?;
            let report = evaluate(&snap, head, &test)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Trials => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cli, &format!("trials-{}x", cfg.seeds.len()));
            std::fs::create_dir_all(&dir)?;
            let (agg, traces) = run_permutation_trials(&cfg)?;
            std::fs::write(dir.join("trials.json"), serde_json::to_string_pretty(&agg)?)?;
            let classes = agg.reports[0].train_metrics.confusion.classes();
            emit_figures_data(&traces, Some(&agg), classes, &[], &dir)?;
            println!(
                "{} trials: test accuracy {:.2}% +/- {:.2}, K {:.1} +/- {:.1}",
                agg.reports.len(),
                agg.test_accuracy_mean,
                agg.test_accuracy_std,
                agg.neurons_mean,
                agg.neurons_std
            );
            println!("artifacts written to {}", dir.display());
            Ok(())
        }
        Command::Calibrate {
            novelty,
            marginal,
            alpha,
            target_neurons,
        } => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cli, "calibrate");
            std::fs::create_dir_all(&dir)?;
            let mut grid = Vec::new();
            for &e_n in novelty {
                for &e_m in marginal {
                    for &a in alpha {
                        if e_m < e_n {
                            grid.push((e_n, e_m, a));
                        }
                    }
                }
            }
            let points = calibrate_thresholds(&cfg, &grid, *target_neurons)?;
            let file = std::fs::File::create(dir.join("sweep.csv"))?;
            write_sweep_csv(&points, std::io::BufWriter::new(file))?;
            let best = &points[0];
            println!(
                "best: E_n={} E_m={} alpha={} -> K={} (target {}), test accuracy {:.2}%",
                best.novelty_threshold,
                best.marginal_threshold,
                best.learning_rate,
                best.final_neurons,
                target_neurons,
                best.test_accuracy
            );
            println!("sweep written to {}", dir.join("sweep.csv").display());
            Ok(())
        }
        Command::Report { run_dir } => {
            let report: harness::RunReport =
                serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json"))?)?;
            let trace = read_trace_csv(&run_dir.join("trace.csv"))?;
            let dir = cli.out.clone().unwrap_or_else(|| run_dir.clone());
            emit_figures_data(
                std::slice::from_ref(&trace),
                None,
                report.train_metrics.confusion.classes(),
                &[(dataset_name(&report.config), report.clone())],
                &dir,
            )?;
            println!("figure CSVs written to {}", dir.display());
            Ok(())
        }
    }
}

fn dataset_name(cfg: &ExperimentConfig) -> String {
    match &cfg.dataset {
        harness::DatasetSpec::Idx { train_images, .. } => train_images
            .file_stem()
            .map_or_else(|| "idx".to_string(), |s| s.to_string_lossy().into_owned()),
        harness::DatasetSpec::Csv { path, .. } => path
            .file_stem()
            .map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned()),
    }
}

fn evaluate(snap: &ModelSnapshot, head: &ogdrbm::HeadParams, ds: &Dataset) -> Result<MetricsReport> {
    let preds: Vec<usize> = ds
        .features
        .iter()
        .map(|x| predict(&snap.model, head, x))
        .collect::<Result<_>>()?;
    MetricsReport::from_confusion(confusion(&preds, &ds.labels, ds.classes)?)
}

fn read_trace_csv(path: &Path) -> Result<GrowthTrace> {
    let text = std::fs::read_to_string(path)?;
    let mut trace = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: expected 5 fields", i + 1),
            });
        }
        let bad = |what: &str| Error::Format {
            path: path.to_path_buf(),
            message: format!("line {}: bad {what}", i + 1),
        };
        trace.push(GrowthTraceRecord {
            sample_index: fields[0].parse().map_err(|_| bad("sample_index"))?,
            reconstruction_error: fields[1].parse().map_err(|_| bad("E_cd"))?,
            decision: match fields[2] {
                "add" => GrowthDecision::Add,
                "adapt" => GrowthDecision::Adapt,
                "ignore" => GrowthDecision::Ignore,
                _ => return Err(bad("decision")),
            },
            neuron_count_after: fields[3].parse().map_err(|_| bad("K"))?,
            class_label: fields[4].parse().map_err(|_| bad("class_label"))?,
        });
    }
    Ok(trace)
}
