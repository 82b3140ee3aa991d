use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use aquaval::biology::simulate_removal_counts;
use aquaval::calibrate::euler_grid;
use aquaval::ingest::{
    extract_green_segments, select_mechanical_only_periods, write_lice, write_segments_csv, PeriodOptions,
    RemovalDistribution,
};
use aquaval::synthetic::{generate_corpus, CorpusConfig};
use aquaval::world::FarmModel;
use serde_json::Value;

fn aquaval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aquaval"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = aquaval(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

#[test]
fn simulate_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&["simulate", "--paths", "32", "--seed", "5", "--out", d.to_str().unwrap()]);
    }
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        if name != "manifest.json" {
            assert_eq!(bytes, &fb[name], "{name} differs between runs");
        }
    }
    let manifest = json(&a.join("manifest.json"));
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in ["paths.csv", "events.csv", "mean_curves.csv", "summary.json"] {
        assert!(outputs.contains(&name), "{name} missing from manifest");
    }
    for name in outputs {
        assert!(a.join(name).exists());
    }
    assert_eq!(manifest["config"]["global"]["seed"], 5);
    let paths = std::fs::read_to_string(a.join("paths.csv")).unwrap();
    assert_eq!(paths.lines().count(), 1 + 32 * 72);
}

#[test]
fn bad_inputs_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[global]\nhorizon = -1.0\n").unwrap();
    let out = aquaval(&["--config", cfg.to_str().unwrap(), "simulate", "--out", tmp.path().join("s").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));

    std::fs::write(&cfg, "[global]\nsed = 1\n").unwrap();
    assert!(!aquaval(&["--config", cfg.to_str().unwrap(), "simulate"]).status.success());

    let missing = tmp.path().join("nope.csv");
    let out = aquaval(&["calibrate", "lambda", "--segments", missing.to_str().unwrap()]);
    assert!(!out.status.success());

    let lice = tmp.path().join("lice.csv");
    std::fs::write(&lice, "locality_id;year;week;adult_female_lpf;region;colour\n1;2020;1;0,1;Trøndelag;red\n").unwrap();
    let out = aquaval(&["pipeline", "--data", lice.to_str().unwrap(), "--out", tmp.path().join("p").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    let manifest = json(&tmp.path().join("p/manifest.json"));
    assert_eq!(manifest["stages"][0]["name"], "ingest");
    assert_eq!(manifest["stages"][0]["ok"], false);
}

#[test]
fn calibrate_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let model = FarmModel::default();
    let grid = euler_grid(3.0, 72).unwrap();
    let cfg = CorpusConfig { n_valid: 30, n_excluded: 0, n_other_region: 0, noise: 0.0, ..Default::default() };
    let corpus = generate_corpus(&model.bio, &model.threshold, &grid, &cfg).unwrap();
    let periods = select_mechanical_only_periods(&corpus.records, &cfg.region, &PeriodOptions::default());
    let segs = tmp.path().join("segments.csv");
    write_segments_csv(&extract_green_segments(&periods), std::fs::File::create(&segs).unwrap()).unwrap();
    let out = tmp.path().join("lambda.json");
    ok(&["calibrate", "lambda", "--segments", segs.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let lambda = json(&out)["fit"]["lambda_rep"].as_f64().unwrap();
    assert!((lambda / 7.0143 - 1.0).abs() < 1e-3, "{lambda}");

    let counts = simulate_removal_counts(&model.bio, &model.threshold, grid.uniform_step().unwrap(), &[1.77], 400, 8)
        .unwrap()
        .remove(0);
    let target = tmp.path().join("target.json");
    std::fs::write(&target, serde_json::to_string(&RemovalDistribution::from_counts(1.77, counts).unwrap()).unwrap()).unwrap();
    let out = tmp.path().join("beta.json");
    ok(&[
        "--paths", "300", "calibrate", "beta", "--target", target.to_str().unwrap(), "--lambda", "7.0143", "--zeta", "2",
        "--out", out.to_str().unwrap(),
    ]);
    let fit = &json(&out)["fit"];
    assert_eq!(fit["n_paths"], 300);
    let (m, t) = (fit["model_mean"][0].as_f64().unwrap(), fit["target_mean"][0].as_f64().unwrap());
    assert!((m / t - 1.0).abs() < 0.1, "{m} vs {t}");
}

#[test]
fn solve_then_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n).to_str().unwrap().to_string();
    let common = ["--paths", "1024", "--eval-paths", "2048"];
    for mode in ["stoch", "determ"] {
        let out = p(&format!("{mode}.json"));
        let mut args = common.to_vec();
        args.extend(["solve", "--mode", mode, "--feeding", "determ", "--out", &out]);
        ok(&args);
        let rule = json(Path::new(&out));
        assert_eq!(rule["mode"]["mortality"], mode);
        assert!(rule["evaluation"]["v0"].as_f64().unwrap() > 0.0);
    }
    let (a, b, out) = (p("stoch.json"), p("determ.json"), p("cmp"));
    let mut args = common.to_vec();
    args.extend(["compare", "--rules", &a, &b, "--out", &out]);
    ok(&args);
    let report = json(&tmp.path().join("cmp/report.json"));
    let ri = report["ri"].as_f64().unwrap();
    assert!(ri > 0.95 && ri < 1.1, "{ri}");
    assert_eq!(report["n_eval_paths"], 2048);
    let rows = std::fs::read_to_string(tmp.path().join("cmp/stopping_times.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2049);

    // Rules trained for different feeding models cannot be compared.
    let c = p("stoch_feed.json");
    let mut args = common.to_vec();
    args.extend(["solve", "--mode", "determ", "--feeding", "stoch", "--out", &c]);
    ok(&args);
    assert!(!aquaval(&["compare", "--rules", &a, &c, "--out", &out]).status.success());
}

#[test]
fn synthetic_pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    ok(&["--paths", "2048", "--eval-paths", "8192", "pipeline", "--synthetic", "--out", out.to_str().unwrap()]);
    let report = json(&out.join("report.json"));
    let comparisons = report["comparisons"].as_array().unwrap();
    assert_eq!(comparisons.len(), 2);
    for c in comparisons {
        let ri = c["ri"].as_f64().unwrap();
        assert!((0.99..=1.05).contains(&ri), "{ri}");
    }
    assert_eq!(report["sensitivity"].as_array().unwrap().len(), 6);
    for name in [
        "lice_records.csv",
        "lice_trajectories.csv",
        "segments.csv",
        "ingest.json",
        "calibration.json",
        "sample_trajectories.csv",
        "removal_histogram_t1.09.csv",
        "removal_histogram_t1.77.csv",
        "rule_stoch_stoch.json",
        "rule_determ_determ.json",
        "stopping_times_stoch.csv",
        "report.json",
        "manifest.json",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let manifest = json(&out.join("manifest.json"));
    let stages: Vec<&str> = manifest["stages"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(stages, ["ingest", "calibrate", "simulate", "solve", "compare"]);
    let lambda = manifest["config"]["biology"]["lambda_rep"].as_f64().unwrap();
    assert_eq!(lambda, report["lambda"]["lambda_rep"].as_f64().unwrap());
}

#[test]
fn pipeline_reads_a_lice_file() {
    let tmp = tempfile::tempdir().unwrap();
    let model = FarmModel::default();
    let cfg = CorpusConfig { n_valid: 40, n_excluded: 5, n_other_region: 5, ..Default::default() };
    let corpus = generate_corpus(&model.bio, &model.threshold, &model.euler_grid().unwrap(), &cfg).unwrap();
    let lice = tmp.path().join("lice.csv");
    write_lice(&corpus.records, std::fs::File::create(&lice).unwrap()).unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        "[calibration.beta]\nn_paths = 300\nmax_iters = 60\n[compare]\nc_tr_sensitivity = []\nfeeding = [\"determ\"]\n",
    )
    .unwrap();
    let out = tmp.path().join("run");
    ok(&[
        "--config", config.to_str().unwrap(), "--paths", "512", "--eval-paths", "1024", "--region", "Trondelag",
        "pipeline", "--data", lice.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    let ingest = json(&out.join("ingest.json"));
    assert_eq!(ingest["n_periods"], 40);
    assert_eq!(ingest["n_records"], corpus.records.len());
    assert!(!out.join("lice_records.csv").exists());
    assert_eq!(json(&out.join("report.json"))["comparisons"].as_array().unwrap().len(), 1);
}
