use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_repsim");

fn repsim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Deterministic pseudo-random values in [-1, 1).
fn noise(seed: u64, len: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..len)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}

fn write_csv(path: &Path, rows: usize, cols: usize, v: &[f64]) {
    let mut text = String::new();
    for r in 0..rows {
        let line: Vec<String> = (0..cols).map(|c| format!("{:e}", v[r * cols + c])).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn write_manifest(dir: &Path, id: &str, layers: &[(&str, &str)]) -> PathBuf {
    let layers: Vec<Value> =
        layers.iter().map(|(name, file)| serde_json::json!({"name": name, "path": file})).collect();
    let path = dir.join(format!("{id}.json"));
    std::fs::write(&path, serde_json::json!({"model_id": id, "layers": layers}).to_string()).unwrap();
    path
}

/// Writes inputs (n×4) and a model whose single layer is `scale·inputs`.
fn proportional_model(dir: &Path, n: usize, scale: f64) -> (PathBuf, PathBuf) {
    let x = noise(1, n * 4);
    write_csv(&dir.join("x.csv"), n, 4, &x);
    let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
    write_csv(&dir.join("scaled.csv"), n, 4, &y);
    (dir.join("x.csv"), write_manifest(dir, "scaled", &[("only", "scaled.csv")]))
}

#[test]
fn help_for_every_subcommand() {
    assert!(repsim(&["--help"]).status.success());
    for sub in ["compare", "layerwise", "nulltest", "consistency", "oodcorr", "diagnose", "simnet", "scorecorr"] {
        let out = repsim(&[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help failed");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(repsim(&["compare", "--bogus"]).status.code(), Some(2));
    // stochastic subcommands refuse to run without a seed
    assert_eq!(repsim(&["nulltest", "--n", "20"]).status.code(), Some(2));
    assert_eq!(repsim(&["simnet", "--layers", "4,4"]).status.code(), Some(2));
    assert_eq!(repsim(&["simnet", "--layers", "4,4", "--seed", "1", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn simnet_dump_round_trips_through_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("dump");
    let out = repsim(&["simnet", "--layers", "8,16,8", "--n", "30", "--seed", "5", "--dump-dir", p(&d)]);
    let report = stdout_json(&out);
    assert_eq!(report["kind"], "simnet");
    assert_eq!(report["results"]["parameter_count"], 8 * 16 + 16 + 16 * 8 + 8);
    for f in ["inputs.npy", "layer1.npy", "layer2.npy", "manifest.json"] {
        assert!(d.join(f).is_file(), "{f} missing");
    }
    let m = d.join("manifest.json");
    let x = d.join("inputs.npy");
    let args = |metric: &str, lb: &str| {
        vec![
            "compare".to_string(),
            "--a".into(),
            p(&m).into(),
            "--layer-a".into(),
            "layer1".into(),
            "--b".into(),
            p(&m).into(),
            "--layer-b".into(),
            lb.into(),
            "--input".into(),
            p(&x).into(),
            "--metric".into(),
            metric.into(),
        ]
    };
    let run = |metric: &str, lb: &str| {
        let a = args(metric, lb);
        stdout_json(&repsim(&a.iter().map(String::as_str).collect::<Vec<_>>()))
    };
    for metric in ["cka", "dcka", "rdcka", "rsa", "drsa", "rdrsa"] {
        let s = run(metric, "layer1");
        assert_eq!(s["degenerate"], false, "{metric}");
        assert!((s["value"].as_f64().unwrap() - 1.0).abs() < 1e-9, "{metric}: {s}");
    }
    let s = run("cka", "layer2");
    let v = s["value"].as_f64().unwrap();
    assert!(v > 0.0 && v < 1.0);
    assert_eq!(run("rsa", "layer2")["metric"], "rsa_spearman");
    let mut a = args("rsa", "layer2");
    a.extend(["--rsa-variant".into(), "pearson".into()]);
    assert_eq!(stdout_json(&repsim(&a.iter().map(String::as_str).collect::<Vec<_>>()))["metric"], "rsa_pearson");
}

#[test]
fn compare_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let (x, m) = proportional_model(dir.path(), 12, 2.0);
    let base = |a: &str, layer: &str| {
        repsim(&[
            "compare", "--a", a, "--layer-a", layer, "--b", p(&m), "--layer-b", "only", "--input", p(&x), "--metric",
            "cka",
        ])
    };
    assert_eq!(base(p(&m), "missing").status.code(), Some(2));
    assert_eq!(base(p(&dir.path().join("absent.json")), "only").status.code(), Some(1));
    std::fs::write(dir.path().join("bad.json"), "{\"model_id\": 3}").unwrap();
    assert_eq!(base(p(&dir.path().join("bad.json")), "only").status.code(), Some(2));
}

#[test]
fn compare_flags_input_proportional_layer() {
    let dir = tempfile::tempdir().unwrap();
    let (x, m) = proportional_model(dir.path(), 12, 3.0);
    let out = repsim(&[
        "compare", "--a", p(&m), "--layer-a", "only", "--b", p(&m), "--layer-b", "only", "--input", p(&x), "--metric",
        "dcka",
    ]);
    let s = stdout_json(&out);
    assert_eq!(s["degenerate"], true);
    assert_eq!(s["value"], Value::Null);
    assert_eq!(s["reason"], "residual");
}

#[test]
fn diagnose_exact_linear_prefers_order_one() {
    let dir = tempfile::tempdir().unwrap();
    let (x, m) = proportional_model(dir.path(), 20, 1.5);
    let report = stdout_json(&repsim(&["diagnose", "--manifest", p(&m), "--input", p(&x), "--max-order", "4"]));
    let layer = &report["results"]["layers"][0];
    assert_eq!(layer["best_bic_order"], 1);
    assert_eq!(layer["fits"].as_array().unwrap().len(), 4);
    assert!((layer["alpha_hat"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn nulltest_alt_from_null_is_calibrated() {
    let mut total = 0.0;
    let mut count = 0;
    for seed in ["1", "2", "3", "4"] {
        let out = repsim(&[
            "nulltest",
            "--sizes",
            "8,12,8",
            "--n",
            "24",
            "--pairs",
            "40",
            "--alternatives",
            "40",
            "--alt-from-null",
            "--metrics",
            "cka,dcka",
            "--seed",
            seed,
        ]);
        let r = stdout_json(&out);
        for m in ["cka", "dcka"] {
            for l in r["results"]["metrics"][m]["layers"].as_array().unwrap() {
                total += l["proportion"].as_f64().unwrap();
                count += 1;
            }
        }
    }
    let rate = total / count as f64;
    assert!(rate <= 0.10, "false-positive rate {rate}");
}

#[test]
fn reports_are_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let args = |threads: &str, out: &Path| {
        vec![
            "--threads".to_string(),
            threads.into(),
            "consistency".into(),
            "--sizes".into(),
            "6,8,6".into(),
            "--n".into(),
            "16".into(),
            "--levels".into(),
            "3".into(),
            "--trials".into(),
            "3".into(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            p(out).into(),
        ]
    };
    let run = |threads: &str, name: &str| {
        let path = dir.path().join(name);
        let a = args(threads, &path);
        let out = repsim(&a.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("consistency mean identified"));
        std::fs::read(path).unwrap()
    };
    let a = run("1", "a.json");
    assert_eq!(a, run("1", "b.json"));
    assert_eq!(a, run("2", "c.json"));
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["kind"], "cross_domain");
    assert_eq!(v["params"]["domains"].as_array().unwrap().len(), 19);
}

#[test]
fn in_domain_mode_and_csv_output() {
    let out = repsim(&[
        "consistency", "--mode", "in", "--sizes", "6,8,6", "--n", "16", "--levels", "3", "--trials", "2", "--sets",
        "4", "--seed", "2", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.contains("kind,in_domain"));
}

#[test]
fn layerwise_grid_shape() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("net");
    assert!(repsim(&["simnet", "--layers", "6,10,8,4", "--n", "20", "--seed", "9", "--dump-dir", p(&d)]).status.success());
    let m = d.join("manifest.json");
    let r = stdout_json(&repsim(&[
        "layerwise",
        "--a",
        p(&m),
        "--b",
        p(&m),
        "--input",
        p(&d.join("inputs.npy")),
        "--metric",
        "dcka",
    ]));
    let grid = r["results"]["grid"].as_array().unwrap();
    assert_eq!(grid.len(), 3);
    for (i, row) in grid.iter().enumerate() {
        assert!((row[i].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
    let csv = repsim(&[
        "layerwise",
        "--a",
        p(&m),
        "--b",
        p(&m),
        "--input",
        p(&d.join("inputs.npy")),
        "--metric",
        "cka",
        "--format",
        "csv",
    ]);
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("layer,layer1,layer2,layer3\n"));
}

#[test]
fn scorecorr_and_oodcorr() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("x.csv"), "a,1\nb,2\nc,3\nd,4\n").unwrap();
    std::fs::write(d.join("y.csv"), "a,3\nb,5\nc,7\nd,9\n").unwrap();
    std::fs::write(d.join("z.csv"), "a,3\nb,5\nc,7\n").unwrap();
    let r = stdout_json(&repsim(&["scorecorr", "--x", p(&d.join("x.csv")), "--y", p(&d.join("y.csv"))]));
    assert_eq!(r["results"]["spearman_rho"].as_f64(), Some(1.0));
    assert_eq!(r["results"]["kendall_tau"].as_f64(), Some(1.0));
    let bad = repsim(&["scorecorr", "--x", p(&d.join("x.csv")), "--y", p(&d.join("z.csv"))]);
    assert_eq!(bad.status.code(), Some(2));

    // models drift away from the reference as their accuracy drops
    let n = 16;
    let x = noise(3, n * 5);
    write_csv(&d.join("in.csv"), n, 5, &x);
    let reference = write_manifest(d, "ref", &[("l1", "in.csv")]);
    let mut models = Vec::new();
    let mut acc = String::from("ref,0.9\n");
    for k in 1..=5 {
        let e = noise(100 + k, n * 5);
        let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + 0.3 * k as f64 * b).collect();
        let file = format!("m{k}.csv");
        write_csv(&d.join(&file), n, 5, &y);
        models.push(write_manifest(d, &format!("m{k}"), &[("l1", &file)]));
        acc.push_str(&format!("m{k},{}\n", 0.9 - 0.05 * k as f64));
    }
    std::fs::write(d.join("acc.csv"), acc).unwrap();
    let list = models.iter().map(|m| p(m).to_string()).collect::<Vec<_>>().join(",");
    let r = stdout_json(&repsim(&[
        "oodcorr",
        "--reference",
        p(&reference),
        "--models",
        &list,
        "--input",
        p(&d.join("in.csv")),
        "--accuracy",
        p(&d.join("acc.csv")),
        "--metric",
        "cka",
    ]));
    assert_eq!(r["kind"], "ood_correlation");
    assert!(r["results"]["layers"][0]["spearman_rho"].as_f64().unwrap() > 0.5);
}
