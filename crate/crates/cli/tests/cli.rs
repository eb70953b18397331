use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use priceband_core::ctsgan::{train_phase1_autoencoder, CtsganModel, ModelDims, TrainingConfig, TrainingExample};
use priceband_core::data_ingest::{load_dataset, write_csv, Schema, CONDITION_DIM};
use priceband_core::synthetic::{generate, SyntheticConfig};
use priceband_core::weather_volatility::VolatilityThresholds;
use serde_json::Value;

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new(days: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let records = generate(&SyntheticConfig {
            days,
            seed: 5,
            ..SyntheticConfig::default()
        });
        let mut csv = Vec::new();
        write_csv(&mut csv, &records).unwrap();
        std::fs::write(root.join("data.csv"), csv).unwrap();
        let config = serde_json::json!({
            "dataset": "data.csv",
            "out_dir": "out",
            "split_date": "2021-04-20",
            "seed": 11,
            "model": { "hidden_dim": 4, "latent_dim": 3 },
            "training": { "iterations_per_phase": 15 },
            "prediction": { "scenarios": 40 },
            "metrics": { "runs": 3, "delta_prime": 0.5, "xi_prime": 0.5 }
        });
        std::fs::write(root.join("run.json"), serde_json::to_string_pretty(&config).unwrap()).unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_priceband"));
        cmd.arg(args[0]).arg("--config").arg(self.path("run.json")).args(&args[1..]);
        cmd.output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn full_pipeline(ws: &Workspace, out: &str) {
    let out = ws.path(out);
    let out = out.to_str().unwrap();
    ws.ok(&["calibrate", "--out", out]);
    ws.ok(&["train", "--out", out]);
    ws.ok(&["predict", "--out", out, "--date", "2021-04-25"]);
    ws.ok(&["evaluate", "--out", out, "--from", "2021-02-27", "--to", "2021-03-02"]);
    ws.ok(&["report", "--out", out]);
}

#[test]
fn calibrate_writes_three_cuts_per_factor_deterministically() {
    let ws = Workspace::new(130);
    let stdout = ws.ok(&["calibrate"]);
    assert!(stdout.contains("thresholds written"));
    let first = read(&ws.path("out/thresholds.json"));
    let parsed: Value = serde_json::from_str(&first).unwrap();
    for factor in ["temperature", "irradiance", "wind"] {
        let cuts = parsed[factor].as_object().unwrap();
        assert_eq!(cuts.len(), 3, "{factor}");
    }
    assert!(VolatilityThresholds::from_json(&first).is_ok());
    let report: Value = serde_json::from_str(&read(&ws.path("out/calibration_report.json"))).unwrap();
    assert_eq!(report["days"], 109);
    assert_eq!(report["factors"][0]["samples"], 109);

    ws.ok(&["calibrate"]);
    assert_eq!(first, read(&ws.path("out/thresholds.json")));
}

#[test]
fn calibrate_rejects_short_history() {
    let ws = Workspace::new(60);
    let out = ws.run(&["calibrate"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("insufficient data"), "{stderr}");
}

#[test]
fn pipeline_produces_every_artifact() {
    let ws = Workspace::new(130);
    ws.ok(&["calibrate"]);
    let train = ws.ok(&["train"]);
    for phase in ["autoencoder", "supervised", "joint"] {
        assert!(train.contains(&format!("phase {phase}: 15 iterations")), "{train}");
    }
    let model = CtsganModel::load(&ws.path("out/checkpoint.json")).unwrap();
    assert!(model.flags().joint);
    let log = read(&ws.path("out/train_log.jsonl"));
    assert_eq!(log.lines().count(), 45);
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["phase"], "autoencoder");

    let predict = ws.ok(&["predict", "--date", "2021-04-25", "--scenarios", "1000"]);
    assert!(predict.starts_with("sigma="), "{predict}");
    let dir = ws.path("out/predict/2021-04-25");
    let interval = read(&dir.join("interval.csv"));
    assert!(interval.starts_with("timestep,lower,upper,"));
    assert_eq!(interval.lines().count(), 49);
    let density: Value = serde_json::from_str(&read(&dir.join("density.json"))).unwrap();
    let mass = density["mass"].as_array().unwrap();
    assert_eq!(mass.len(), 48);
    for row in mass {
        let row = row.as_array().unwrap();
        assert_eq!(row.len(), 50);
        let total: f64 = row.iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    let scenarios = read(&dir.join("scenarios.csv"));
    assert!(scenarios.lines().count() > 1000);

    let evaluate = ws.ok(&["evaluate", "--from", "2021-02-27", "--to", "2021-03-02"]);
    assert!(evaluate.contains("summer 2020-21") && evaluate.contains("autumn 2021"), "{evaluate}");
    let report: Value = serde_json::from_str(&read(&ws.path("out/evaluate/report.json"))).unwrap();
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    assert_eq!(runs[2]["s"], 3);
    let curve = read(&ws.path("out/evaluate/phi_curve.csv"));
    let phis: Vec<f64> = curve
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(phis.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(read(&ws.path("out/evaluate/overlay.csv")).lines().count(), 1 + 4 * 48);

    ws.ok(&["report"]);
    let names = [
        "spike_histogram.csv",
        "density_heatmap.json",
        "interval_overlay.csv",
        "confidence_curve.csv",
    ];
    let mut listed: Vec<String> = std::fs::read_dir(ws.path("out/report"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    listed.sort();
    let mut expected: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    expected.sort();
    assert_eq!(listed, expected);

    // Synthetic spikes only happen in the afternoon.
    let histogram = read(&ws.path("out/report/spike_histogram.csv"));
    let mut total = 0;
    for line in histogram.lines().skip(1) {
        let mut cols = line.split(',');
        let step: usize = cols.next().unwrap().parse().unwrap();
        let count: u64 = cols.next().unwrap().parse().unwrap();
        if !(24..39).contains(&step) {
            assert_eq!(count, 0, "spike at step {step}");
        }
        total += count;
    }
    assert!(total > 0);
}

#[test]
fn worked_example_variances_give_sigma_2_667() {
    let ws = Workspace::new(130);
    ws.ok(&["train", "--iterations", "2"]);
    std::fs::write(ws.path("out/thresholds.json"), VolatilityThresholds::reference().to_json().unwrap()).unwrap();
    let stdout = ws.ok(&["predict", "--date", "2021-04-25", "--variances", "0.004,0.07,0.02"]);
    assert!(stdout.contains("sigma=2.667 reinforced=true"), "{stdout}");
    let calm = ws.ok(&["predict", "--date", "2021-04-25", "--variances", "0,0,0"]);
    assert!(calm.contains("sigma=1.000 reinforced=false"), "{calm}");
    let summary: Value = serde_json::from_str(&read(&ws.path("out/predict/2021-04-25/summary.json"))).unwrap();
    assert_eq!(summary["volatile_scenarios"], 0);
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let ws = Workspace::new(130);
    full_pipeline(&ws, "a");
    full_pipeline(&ws, "b");
    for rel in [
        "checkpoint.json",
        "train_log.jsonl",
        "predict/2021-04-25/interval.csv",
        "predict/2021-04-25/scenarios.csv",
        "evaluate/report.json",
        "report/density_heatmap.json",
    ] {
        assert_eq!(read(&ws.path(&format!("a/{rel}"))), read(&ws.path(&format!("b/{rel}"))), "{rel}");
    }
    let a = ws.path("a");
    let out = ws.run(&["predict", "--out", a.to_str().unwrap(), "--date", "2021-04-25", "--seed", "12"]);
    assert!(out.status.success());
    assert_ne!(
        read(&ws.path("a/predict/2021-04-25/scenarios.csv")),
        read(&ws.path("b/predict/2021-04-25/scenarios.csv"))
    );
}

#[test]
fn resume_skips_completed_phases() {
    let ws = Workspace::new(130);
    let ds = load_dataset(ws.path("data.csv"), &Schema::default()).unwrap();
    let (train, _) = ds.split_at(NaiveDate::from_ymd_opt(2021, 4, 20).unwrap()).unwrap();
    let examples: Vec<TrainingExample> = train.samples(18.0).unwrap().iter().map(TrainingExample::from).collect();
    let mut model = CtsganModel::new(ModelDims::with_sizes(CONDITION_DIM, 4, 3), 1).unwrap();
    let cfg = TrainingConfig {
        iterations_per_phase: 3,
        ..TrainingConfig::default()
    };
    train_phase1_autoencoder(&mut model, &examples, &cfg, &mut |_| {}).unwrap();
    model.save(&ws.path("out/checkpoint.json")).unwrap();
    let phase1 = model.network(priceband_core::ctsgan::Role::Embedder).weights().to_vec();

    let stdout = ws.ok(&["train", "--resume"]);
    assert!(stdout.contains("phase autoencoder: already complete, skipped"), "{stdout}");
    assert!(stdout.contains("phase supervised: 15 iterations"));
    let resumed = CtsganModel::load(&ws.path("out/checkpoint.json")).unwrap();
    assert!(resumed.flags().joint);
    assert_eq!(resumed.network(priceband_core::ctsgan::Role::Embedder).weights().to_vec(), phase1);
}

#[test]
fn corrupt_dataset_fails_without_checkpoint() {
    let ws = Workspace::new(10);
    std::fs::write(ws.path("data.csv"), "timestamp,price\nnot a date,abc\n").unwrap();
    let out = ws.run(&["train"]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!ws.path("out/checkpoint.json").exists());
}

#[test]
fn evaluate_names_the_missing_day() {
    let ws = Workspace::new(130);
    ws.ok(&["calibrate"]);
    ws.ok(&["train", "--iterations", "2"]);
    let out = ws.run(&["evaluate", "--from", "2021-05-09", "--to", "2021-05-12"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("2021-05-11"));
}

#[test]
fn report_on_empty_output_is_missing_artifact() {
    let ws = Workspace::new(10);
    let out = ws.run(&["report"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing artifact"));
}

#[test]
fn predict_without_checkpoint_fails() {
    let ws = Workspace::new(10);
    let out = ws.run(&["predict", "--date", "2021-01-05"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing artifact"));
}
