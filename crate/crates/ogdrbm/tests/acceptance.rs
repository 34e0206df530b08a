//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! Criteria that need the external benchmark datasets (MNIST IDX files, the
//! credit CSVs) locate them under `$OGDRBM_DATA_ROOT` and print SKIP when
//! the files are absent, since the datasets cannot be redistributed with
//! the source. See the README for the expected layout.

use std::path::{Path, PathBuf};

use proptest::prelude::*;

use ogdrbm::data::{load_idx, stratified_split};
use ogdrbm::growth::{process_sample, train_generative, GrowthConfig, GrowthDecision};
use ogdrbm::harness::{
    calibrate_thresholds, load_dataset, run_permutation_trials, run_single, write_sweep_csv,
    DatasetSpec, ExperimentConfig, TrialsReport,
};
use ogdrbm::head::{cross_entropy, encode_one_hot, HeadParams};
use ogdrbm::metrics::{gmean, imbalance_factor};
use ogdrbm::rbm::{sample_bernoulli, RbmParams, RngState};
use ogdrbm::{HeadConfig, ModelSnapshot};

fn data_root() -> Option<PathBuf> {
    std::env::var_os("OGDRBM_DATA_ROOT").map(PathBuf::from)
}

fn require_files(paths: &[PathBuf], criterion: &str) -> bool {
    let missing: Vec<_> = paths.iter().filter(|p| !p.exists()).collect();
    if missing.is_empty() {
        true
    } else {
        println!("ACCEPTANCE {criterion} SKIP: dataset files not present ({missing:?}); set OGDRBM_DATA_ROOT");
        false
    }
}

// --- criterion 1: imbalance factor reproduces the published table ---------

#[test]
fn criterion_1_imbalance_factor_oracles() {
    // published per-dataset class counts
    assert!((imbalance_factor(&[307, 383]).unwrap() - 0.1101).abs() <= 0.0001);
    assert!((imbalance_factor(&[300, 700]).unwrap() - 0.4000).abs() < 1e-12);
    assert!((imbalance_factor(&[10_026, 139_974]).unwrap() - 0.86632).abs() <= 0.00001);

    // when the raw datasets are on disk, recompute the counts from the files
    if let Some(root) = data_root() {
        for (file, label, drop, expected, tol) in [
            ("credit/aus.csv", "class", vec![], 0.1101, 0.0001),
            ("credit/german.csv", "class", vec![], 0.4000, 1e-9),
            (
                "credit/cs-training.csv",
                "SeriousDlqin2yrs",
                vec![String::new()],
                0.86632,
                0.00001,
            ),
        ] {
            let path = root.join(file);
            if path.exists() {
                let age_column = file.contains("cs-training").then(|| "age".to_string());
                let spec = DatasetSpec::Csv {
                    path,
                    label_column: label.to_string(),
                    age_column,
                    impute_columns: None,
                    drop_columns: drop,
                    train_fraction: 0.5,
                    sample_limit: None,
                };
                let (train, test) = load_dataset(&spec, 1).unwrap();
                let counts: Vec<usize> = train
                    .class_counts()
                    .iter()
                    .zip(test.class_counts())
                    .map(|(a, b)| a + b)
                    .collect();
                let factor = imbalance_factor(&counts).unwrap();
                assert!((factor - expected).abs() <= tol, "{file}: {factor} vs {expected}");
            }
        }
    }
    println!("ACCEPTANCE 1 PASS: imbalance factors 0.1101 / 0.4000 / 0.86632 reproduced");
}

// --- criterion 2: gmean consistency ----------------------------------------

#[test]
fn criterion_2_gmean_consistency() {
    assert!((gmean(0.60, 0.83) - 0.71).abs() <= 0.005);
    // every emitted report satisfies gmean = sqrt(tpr*tnr) to 1e-9; checked
    // on a real end-to-end report
    let dir = tempfile::tempdir().unwrap();
    let cfg = binary_fixture_config(dir.path());
    let report = run_single(&cfg, 1).unwrap().report;
    for metrics in [&report.train_metrics, &report.test_metrics] {
        let g = metrics.gmean.unwrap();
        assert!((g - (metrics.tpr.unwrap() * metrics.tnr.unwrap()).sqrt()).abs() < 1e-9);
    }
    println!("ACCEPTANCE 2 PASS: sqrt(0.60*0.83) = 0.71 +/- 0.005; report gmean consistent to 1e-9");
}

// --- criterion 3: CD-1 equals the phase-replay oracle ----------------------

#[test]
fn criterion_3_cd1_oracle_equivalence() {
    // fixed fixture set of 2-visible/1-hidden instances:
    // (weights, hidden bias, visible bias, input, alpha, seed)
    type Cd1Fixture = (Vec<f64>, f64, f64, [f64; 2], f64, u64);
    let fixtures: Vec<Cd1Fixture> = vec![
        (vec![0.5, -0.5], 0.1, 0.0, [1.0, 0.0], 0.1, 1),
        (vec![2.0, 2.0], -1.0, 0.5, [0.9, 0.1], 0.05, 2),
        (vec![-3.0, 1.5], 0.7, -0.2, [0.0, 1.0], 0.5, 3),
        (vec![0.0, 0.0], 0.0, 0.0, [0.5, 0.5], 1.0, 4),
        (vec![0.01, 0.005], 0.0, 0.0, [1.0, 0.5], 0.1, 5),
        (vec![10.0, -10.0], 2.0, -2.0, [0.3, 0.8], 0.2, 6),
    ];
    for (weights, b, c, x, alpha, seed) in fixtures {
        let mut params = RbmParams::new(2);
        params.push_neuron(weights).unwrap();
        // fixture biases
        let mut params = {
            let snap = serde_json::to_value(&params).unwrap();
            let mut v = snap;
            v["hidden_biases"][0] = serde_json::json!(b);
            v["visible_biases"][0] = serde_json::json!(c);
            serde_json::from_value::<RbmParams>(v).unwrap()
        };

        // oracle: replay the four phases on a cloned rng stream
        let rng0 = RngState::from_seed(seed);
        let (expected, expected_xhat) = {
            let mut rng = rng0.clone();
            let h = params.hidden_probs(&x).unwrap();
            let h_s = sample_bernoulli(&h, &mut rng).unwrap();
            let x_hat = params.visible_probs(&h_s).unwrap();
            let h_hat = params.hidden_reprobs(&x_hat).unwrap();
            let mut v = serde_json::to_value(&params).unwrap();
            for j in 0..2 {
                let w = v["weights"][0][j].as_f64().unwrap();
                v["weights"][0][j] = serde_json::json!(w + alpha * (x[j] * h[0] - x_hat[j] * h_hat[0]));
                let cb = v["visible_biases"][j].as_f64().unwrap();
                v["visible_biases"][j] = serde_json::json!(cb + alpha * (x[j] - x_hat[j]));
            }
            let hb = v["hidden_biases"][0].as_f64().unwrap();
            v["hidden_biases"][0] = serde_json::json!(hb + alpha * (h[0] - h_hat[0]));
            (serde_json::from_value::<RbmParams>(v).unwrap(), x_hat)
        };

        let mut rng = rng0.clone();
        let x_hat = params.cd1_step(&x, alpha, false, &mut rng).unwrap();
        assert_eq!(params, expected, "fixture seed {seed}");
        assert_eq!(x_hat, expected_xhat);
    }
    println!("ACCEPTANCE 3 PASS: cd1_step equals the step-by-step replay oracle exactly");
}

// --- criterion 4: discriminative gradient check ----------------------------

#[test]
fn criterion_4_gradient_check() {
    let mut rng = RngState::from_seed(31_415);
    let mut instances = 0;
    while instances < 120 {
        let k = 1 + rng.gen_index(5);
        let s = 1 + rng.gen_index(3);
        let h: Vec<f64> = (0..k).map(|_| rng.gen_f64()).collect();
        let c = 1 + rng.gen_index(s);
        let y = encode_one_hot(c, s).unwrap();
        let mut head = HeadParams::init(k, s, 0.5, &mut rng);
        let y_hat = head.forward(&h).unwrap();

        // analytic gradient of the loss wrt the head weights, flattened
        let mut analytic = Vec::with_capacity(s * k);
        for (yv, yh) in y.values.iter().zip(&y_hat) {
            for hv in &h {
                analytic.push(-(yv - yh) * hv);
            }
        }
        // central finite differences
        let eps = 1e-5;
        let mut numeric = Vec::with_capacity(s * k);
        for out in 0..s {
            for inp in 0..k {
                let orig = head.weights()[out][inp];
                head.set_weight(out, inp, orig + eps);
                let lp = cross_entropy(&y.values, &head.forward(&h).unwrap());
                head.set_weight(out, inp, orig - eps);
                let lm = cross_entropy(&y.values, &head.forward(&h).unwrap());
                head.set_weight(out, inp, orig);
                numeric.push((lp - lm) / (2.0 * eps));
            }
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
        let rel = norm(&diff) / norm(&analytic).max(1e-12);
        assert!(rel <= 1e-6, "relative error {rel}");
        instances += 1;
    }
    println!("ACCEPTANCE 4 PASS: SGD direction matches finite differences (rel err <= 1e-6, {instances} instances)");
}

// --- criterion 5: growth-rule properties ------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn criterion_5_growth_rule_properties(
        m in 2usize..8,
        n in 5usize..30,
        seed in 0u64..1_000,
        e_n in 0.05f64..0.3,
        margin in 0.0f64..0.9,
        raw in prop::collection::vec(0.0f64..=1.0, 8 * 30),
    ) {
        let e_m = e_n * margin;
        let cfg = GrowthConfig {
            novelty_threshold: e_n,
            marginal_threshold: e_m,
            ..GrowthConfig::default()
        };
        let samples: Vec<Vec<f64>> = (0..n).map(|i| raw[i * m..(i + 1) * m].to_vec()).collect();

        // per-sample dispatch properties
        let mut params = RbmParams::new(m);
        let mut rng = RngState::from_seed(seed);
        let mut k_prev = 0;
        for (t, x) in samples.iter().enumerate() {
            let before = params.clone();
            let rec = process_sample(&mut params, x, 1, t, &cfg, &mut rng).unwrap();
            match rec.decision {
                GrowthDecision::Add => prop_assert_eq!(params.hidden_count(), k_prev + 1),
                GrowthDecision::Ignore => {
                    // bit-exact no-op, observed through serialization
                    prop_assert_eq!(
                        serde_json::to_vec(&params).unwrap(),
                        serde_json::to_vec(&before).unwrap()
                    );
                }
                GrowthDecision::Adapt => prop_assert_eq!(params.hidden_count(), k_prev),
            }
            prop_assert!(params.hidden_count() >= k_prev);
            k_prev = params.hidden_count();
        }

        // whole-stream properties: trace length and determinism
        let run = || {
            let stream = samples.iter().map(|s| s.as_slice()).zip(std::iter::repeat(1));
            train_generative(stream, m, &cfg, seed).unwrap()
        };
        let (p1, t1) = run();
        let (p2, t2) = run();
        prop_assert_eq!(t1.len(), n);
        prop_assert_eq!(&p1, &params);
        prop_assert_eq!(p1, p2);
        prop_assert_eq!(t1, t2);
    }
}

#[test]
fn criterion_5_marker() {
    println!("ACCEPTANCE 5 PASS: growth-rule properties hold on randomized streams");
}

// --- criteria 6 and 7: MNIST desk scale -------------------------------------

fn mnist_config(root: &Path, seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Idx {
            train_images: root.join("mnist/train-images-idx3-ubyte"),
            train_labels: root.join("mnist/train-labels-idx1-ubyte"),
            test_images: root.join("mnist/t10k-images-idx3-ubyte"),
            test_labels: root.join("mnist/t10k-labels-idx1-ubyte"),
            train_limit: Some(10_000),
            test_limit: Some(10_000),
        },
        growth: GrowthConfig::default(),
        head: HeadConfig::default(),
        seeds,
        output_dir: None,
    }
}

fn mnist_files(root: &Path) -> Vec<PathBuf> {
    [
        "mnist/train-images-idx3-ubyte",
        "mnist/train-labels-idx1-ubyte",
        "mnist/t10k-images-idx3-ubyte",
        "mnist/t10k-labels-idx1-ubyte",
    ]
    .iter()
    .map(|f| root.join(f))
    .collect()
}

#[test]
fn criterion_6_mnist_desk_scale() {
    let Some(root) = data_root() else {
        println!("ACCEPTANCE 6 SKIP: OGDRBM_DATA_ROOT not set");
        return;
    };
    if !require_files(&mnist_files(&root), "6") {
        return;
    }
    let cfg = mnist_config(&root, vec![1]);
    let art = run_single(&cfg, 1).unwrap();
    let r = &art.report;
    assert!(r.test_metrics.eta_o >= 90.0, "test accuracy {}", r.test_metrics.eta_o);
    assert!(r.final_neurons <= 600, "K = {}", r.final_neurons);
    let n = art.trace.len();
    let early_adds = art
        .trace
        .iter()
        .filter(|t| t.decision == GrowthDecision::Add && t.sample_index < n / 5)
        .count();
    assert!(early_adds as f64 >= 0.6 * r.final_neurons as f64);
    let decile = n / 10;
    let mean = |recs: &[ogdrbm::GrowthTraceRecord]| {
        recs.iter().map(|t| t.reconstruction_error).sum::<f64>() / recs.len() as f64
    };
    assert!(mean(&art.trace[n - decile..]) < mean(&art.trace[..decile]));
    println!(
        "ACCEPTANCE 6 PASS: MNIST 10k test accuracy {:.2}% (>=90), K={} (<=600), front-loaded growth, error trending down",
        r.test_metrics.eta_o, r.final_neurons
    );
}

#[test]
fn criterion_7_mnist_permutation_invariance() {
    let Some(root) = data_root() else {
        println!("ACCEPTANCE 7 SKIP: OGDRBM_DATA_ROOT not set");
        return;
    };
    if !require_files(&mnist_files(&root), "7") {
        return;
    }
    let cfg = mnist_config(&root, (1..=10).collect());
    let (agg, _) = run_permutation_trials(&cfg).unwrap();
    assert!(agg.test_accuracy_std <= 3.0, "std {}", agg.test_accuracy_std);
    assert!(agg.neurons_std / agg.neurons_mean <= 0.15);
    for r in &agg.reports {
        assert!(
            r.neurons_per_class.iter().all(|&c| c >= 1),
            "seed {}: {:?}",
            r.seed,
            r.neurons_per_class
        );
    }
    println!(
        "ACCEPTANCE 7 PASS: 10 seeds, accuracy {:.2}% +/- {:.2}, K {:.0} +/- {:.0}, per-class std {:?}",
        agg.test_accuracy_mean, agg.test_accuracy_std, agg.neurons_mean, agg.neurons_std,
        agg.neurons_per_class_std
    );
}

// --- criteria 8 and 9: credit benchmarks ------------------------------------

fn credit_config(root: &Path, which: &str, seeds: Vec<u64>) -> ExperimentConfig {
    let dataset = match which {
        "aus" => DatasetSpec::Csv {
            path: root.join("credit/aus.csv"),
            label_column: "class".to_string(),
            age_column: None,
            impute_columns: None,
            drop_columns: vec![],
            train_fraction: 0.7,
            sample_limit: None,
        },
        "german" => DatasetSpec::Csv {
            path: root.join("credit/german.csv"),
            label_column: "class".to_string(),
            age_column: None,
            impute_columns: None,
            drop_columns: vec![],
            train_fraction: 0.7,
            sample_limit: None,
        },
        "gmsc" => DatasetSpec::Csv {
            path: root.join("credit/cs-training.csv"),
            label_column: "SeriousDlqin2yrs".to_string(),
            age_column: Some("age".to_string()),
            impute_columns: None,
            drop_columns: vec![String::new()],
            train_fraction: 0.7,
            sample_limit: Some(25_000),
        },
        other => panic!("unknown credit dataset {other}"),
    };
    ExperimentConfig {
        dataset,
        growth: GrowthConfig::default(),
        head: HeadConfig::default(),
        seeds,
        output_dir: None,
    }
}

fn credit_band(root: &Path, which: &str, min_gmean: f64, max_k: f64) -> TrialsReport {
    let cfg = credit_config(root, which, vec![1, 2, 3, 4, 5]);
    let (agg, _) = run_permutation_trials(&cfg).unwrap();
    let mean_gmean = agg.test_gmean_mean.unwrap();
    if mean_gmean < min_gmean || agg.neurons_mean > max_k {
        // attach a sweep CSV so a miss is actionable
        let sweep_path = std::env::temp_dir().join(format!("ogdrbm-{which}-sweep.csv"));
        let grid: Vec<(f64, f64, f64)> = [0.05, 0.08, 0.1, 0.15]
            .iter()
            .flat_map(|&e_n| [(e_n, 0.01, 0.1), (e_n, 0.02, 0.1)])
            .collect();
        if let Ok(points) = calibrate_thresholds(&cfg, &grid, max_k as usize / 2) {
            if let Ok(file) = std::fs::File::create(&sweep_path) {
                let _ = write_sweep_csv(&points, std::io::BufWriter::new(file));
            }
        }
        panic!(
            "{which}: mean Gmean {mean_gmean:.4} (need >= {min_gmean}), mean K {:.1} (need <= {max_k}); sweep at {}",
            agg.neurons_mean,
            sweep_path.display()
        );
    }
    agg
}

#[test]
fn criterion_8_credit_benchmarks() {
    let Some(root) = data_root() else {
        println!("ACCEPTANCE 8 SKIP: OGDRBM_DATA_ROOT not set");
        return;
    };
    let mut ran = false;
    for (which, file, min_gmean, max_k) in [
        ("aus", "credit/aus.csv", 0.84, 60.0),
        ("german", "credit/german.csv", 0.65, 80.0),
        ("gmsc", "credit/cs-training.csv", 0.68, 30.0),
    ] {
        if !root.join(file).exists() {
            println!("ACCEPTANCE 8 SKIP ({which}): {file} not present");
            continue;
        }
        let agg = credit_band(&root, which, min_gmean, max_k);
        println!(
            "ACCEPTANCE 8 PASS ({which}): mean Gmean {:.4} >= {min_gmean}, mean K {:.1} <= {max_k}",
            agg.test_gmean_mean.unwrap(),
            agg.neurons_mean
        );
        ran = true;
    }
    if !ran {
        println!("ACCEPTANCE 8 SKIP: no credit datasets present under OGDRBM_DATA_ROOT");
    }
}

#[test]
fn criterion_9_minority_neuron_share() {
    let Some(root) = data_root() else {
        println!("ACCEPTANCE 9 SKIP: OGDRBM_DATA_ROOT not set");
        return;
    };
    let mut ran = false;
    for (which, file) in [("german", "credit/german.csv"), ("gmsc", "credit/cs-training.csv")] {
        if !root.join(file).exists() {
            println!("ACCEPTANCE 9 SKIP ({which}): {file} not present");
            continue;
        }
        let cfg = credit_config(&root, which, vec![1, 2, 3, 4, 5]);
        let (agg, traces) = run_permutation_trials(&cfg).unwrap();
        let mut hits = 0;
        for (r, trace) in agg.reports.iter().zip(&traces) {
            let assoc = ogdrbm::harness::neuron_class_association(trace, 2);
            let k: usize = assoc.iter().sum();
            let minority_neuron_share = assoc[0] as f64 / k as f64;
            let totals = &r.train_metrics.confusion.class_totals;
            let minority_sample_share = totals[0] as f64 / (totals[0] + totals[1]) as f64;
            if minority_neuron_share > minority_sample_share {
                hits += 1;
            }
        }
        assert!(hits >= 4, "{which}: minority over-representation in only {hits}/5 seeds");
        println!("ACCEPTANCE 9 PASS ({which}): minority neuron share exceeds sample share in {hits}/5 seeds");
        ran = true;
    }
    if !ran {
        println!("ACCEPTANCE 9 SKIP: no credit datasets present under OGDRBM_DATA_ROOT");
    }
}

// --- criterion 10: format round-trips ---------------------------------------

#[test]
fn criterion_10_format_round_trips() {
    // model snapshot round-trip is parameter-bit-exact (always runnable)
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let digits = load_idx(
        &fixtures.join("digits-images-idx3-ubyte"),
        &fixtures.join("digits-labels-idx1-ubyte"),
    )
    .unwrap();
    let (train, _) = stratified_split(&digits, 0.7, 1).unwrap();
    let cfg = GrowthConfig::default();
    let stream = train
        .features
        .iter()
        .take(300)
        .map(|f| f.as_slice())
        .zip(train.labels.iter().copied());
    let (model, _) = train_generative(stream, 64, &cfg, 1).unwrap();
    let snap = ModelSnapshot::new(model, cfg, None);
    let back = ModelSnapshot::from_json(&snap.to_json().unwrap()).unwrap();
    assert_eq!(back, snap);

    // official IDX shapes when the files are present
    if let Some(root) = data_root() {
        if require_files(&mnist_files(&root), "10") {
            let train = load_idx(
                &root.join("mnist/train-images-idx3-ubyte"),
                &root.join("mnist/train-labels-idx1-ubyte"),
            )
            .unwrap();
            assert_eq!(train.len(), 60_000);
            assert_eq!(train.feature_dim(), 784);
            assert_eq!(train.classes, 10);
            let test = load_idx(
                &root.join("mnist/t10k-images-idx3-ubyte"),
                &root.join("mnist/t10k-labels-idx1-ubyte"),
            )
            .unwrap();
            assert_eq!(test.len(), 10_000);
            println!("ACCEPTANCE 10 PASS: IDX shapes 60000x784/10 and 10000; snapshot round-trip bit-exact");
            return;
        }
    }
    println!("ACCEPTANCE 10 PASS (partial): snapshot round-trip bit-exact; IDX shape check skipped (no MNIST files)");
}

// --- shared fixture ----------------------------------------------------------

/// Imbalanced separable binary IDX fixture used by criterion 2.
fn binary_fixture_config(dir: &Path) -> ExperimentConfig {
    use ogdrbm::data::{write_idx, Dataset};
    let make = |n: usize, seed: u64| {
        let mut rng = RngState::from_seed(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = if i % 5 == 0 { 1 } else { 2 };
            let center = if class == 1 { 0.75 } else { 0.25 };
            features.push(
                (0..8)
                    .map(|_| (center + 0.2 * (rng.gen_f64() - 0.5)).clamp(0.0, 1.0))
                    .collect(),
            );
            labels.push(class);
        }
        Dataset::new(features, labels, 2, None).unwrap()
    };
    write_idx(&make(300, 1), &dir.join("train-img"), &dir.join("train-lab")).unwrap();
    write_idx(&make(100, 2), &dir.join("test-img"), &dir.join("test-lab")).unwrap();
    ExperimentConfig {
        dataset: DatasetSpec::Idx {
            train_images: dir.join("train-img"),
            train_labels: dir.join("train-lab"),
            test_images: dir.join("test-img"),
            test_labels: dir.join("test-lab"),
            train_limit: None,
            test_limit: None,
        },
        growth: GrowthConfig::default(),
        head: HeadConfig::default(),
        seeds: vec![1],
        output_dir: None,
    }
}
