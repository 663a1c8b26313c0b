use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use glmshap::synthetic::{generate, SyntheticSpec};
use glmshap::{Family, ReportDocument};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glmshap"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn synthetic_csv(dir: &Path, family: Family, p: usize, seed: u64) -> PathBuf {
    let ds = generate(&SyntheticSpec {
        family,
        p,
        seed,
        n: 150,
        intercept: 0.0,
        ..Default::default()
    })
    .unwrap();
    let mut text = String::from("y");
    for name in ds.column_names() {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for i in 0..ds.n() {
        text.push_str(&ds.y()[i].to_string());
        for j in 0..ds.m() {
            text.push(',');
            text.push_str(&ds.design()[(i, j)].to_string());
        }
        text.push('\n');
    }
    let path = dir.join(format!("{family}-{p}-{seed}.csv"));
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_writes_report_and_table() {
    let dir = TempDir::new().unwrap();
    let data = synthetic_csv(dir.path(), Family::Poisson, 3, 1);
    let out = dir.path().join("report.json");
    let o = run(&[
        "analyze",
        "--data",
        s(&data),
        "--response",
        "y",
        "--family",
        "poisson",
        "--measure",
        "kl-r2,loglik",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("kl-r2")));
    let text = fs::read_to_string(&out).unwrap();
    let doc = ReportDocument::from_json(&text).unwrap();
    assert_eq!(doc.to_json().unwrap(), text);
    let part = &doc.parts[0];
    assert_eq!(part.players, ["x1", "x2", "x3"]);
    let kl = &part.tables[0];
    let sum: f64 = kl.rows.iter().map(|r| r.phi).sum();
    assert!((sum - kl.v_full).abs() <= 1e-10);
    assert!(kl.rows.windows(2).all(|w| w[0].phi >= w[1].phi));
    let ll = &part.tables[1];
    assert!(ll.is_pseudo);
    assert!((ll.v_full - part.constants.loglik_full).abs() == 0.0);
}

#[test]
fn same_config_same_bytes() {
    let dir = TempDir::new().unwrap();
    let data = synthetic_csv(dir.path(), Family::Logit, 4, 2);
    let report = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "analyze",
            "--data",
            s(&data),
            "--response",
            "y",
            "--family",
            "logit",
            "--mc-samples",
            "300",
            "--seed",
            "9",
            "--workers",
            workers,
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        v["elapsed_seconds"] = Value::Null;
        v["config"]["out"] = Value::Null;
        v["config"]["workers"] = Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    let a = report("a.json", "1");
    let b = report("b.json", "3");
    assert_eq!(a, b);
    assert!(a.contains("std_error"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let data = synthetic_csv(dir.path(), Family::Geometric, 2, 3);
    let out = dir.path().join("r.json");
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# geometric run\ndata = {}\nresponse = y\nfamily = poisson\nmeasure = mcfadden-r2\nout = {}\n",
            data.display(),
            out.display()
        ),
    )
    .unwrap();
    let o = run(&["analyze", "--config", s(&cfg), "--family", "geometric"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["parts"][0]["family"], "geometric");
    assert_eq!(doc["parts"][0]["tables"][0]["measure"], "mcfadden-r2");

    fs::write(&cfg, "response = y\ncolour = blue\n").unwrap();
    let o = run(&[
        "analyze",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--family",
        "poisson",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cache_export_has_one_record_per_subset() {
    let dir = TempDir::new().unwrap();
    let data = synthetic_csv(dir.path(), Family::Poisson, 2, 4);
    let cache = dir.path().join("cache.csv");
    let out = dir.path().join("r.json");
    let o = run(&[
        "analyze",
        "--data",
        s(&data),
        "--response",
        "y",
        "--family",
        "poisson",
        "--cache-out",
        s(&cache),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&cache).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "part,key,players,loglik,deviance,kl-r2");
    let doc = ReportDocument::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    let empty: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(empty[1], "0");
    assert_eq!(
        empty[3].parse::<f64>().unwrap(),
        doc.parts[0].constants.loglik_null
    );
}

#[test]
fn hurdle_run_reports_both_parts() {
    let dir = TempDir::new().unwrap();
    let data = synthetic_csv(dir.path(), Family::Poisson, 3, 5);
    let out = dir.path().join("r.json");
    let cache = dir.path().join("c.csv");
    let o = run(&[
        "analyze",
        "--data",
        s(&data),
        "--response",
        "y",
        "--hurdle",
        "--null",
        "plugin",
        "--out",
        s(&out),
        "--cache-out",
        s(&cache),
        "--count-players",
        "x1,x3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = ReportDocument::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    let binary = doc.part("binary").unwrap();
    let count = doc.part("count").unwrap();
    assert_eq!(binary.family, Family::Logit);
    assert_eq!(count.family, Family::ZtPoisson);
    assert_eq!(count.players, ["x1", "x3"]);
    assert_eq!(binary.null_convention, glmshap::NullConvention::Ml);
    assert_eq!(count.null_convention, glmshap::NullConvention::Plugin);
    let h = doc.hurdle.unwrap();
    assert_eq!(
        h.total_loglik,
        binary.constants.loglik_full + count.constants.loglik_full
    );
    assert_eq!(count.n, h.n_plus);
    let csv = fs::read_to_string(&cache).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("binary,")).count(), 8);
    assert_eq!(csv.lines().filter(|l| l.starts_with("count,")).count(), 4);
}

#[test]
fn rootogram_json() {
    let dir = TempDir::new().unwrap();
    let data = synthetic_csv(dir.path(), Family::Poisson, 2, 6);
    let o = run(&[
        "rootogram",
        "--data",
        s(&data),
        "--response",
        "y",
        "--family",
        "poisson",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let observed: f64 = v["observed"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .sum();
    let expected: f64 = v["expected"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .sum::<f64>()
        + v["expected_tail"].as_f64().unwrap();
    assert_eq!(observed, 150.0);
    assert!((expected - 150.0).abs() <= 1e-6 * 150.0);

    let out = dir.path().join("root.json");
    let o = run(&[
        "rootogram",
        "--data",
        s(&data),
        "--response",
        "y",
        "--hurdle",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["counts"][0], 0);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let data = synthetic_csv(dir.path(), Family::Poisson, 2, 7);
    for args in [
        vec![
            "analyze",
            "--data",
            s(&data),
            "--response",
            "y",
            "--family",
            "negbin",
        ],
        vec!["analyze", "--data", s(&data), "--response", "y"],
        vec![
            "analyze",
            "--data",
            s(&data),
            "--response",
            "y",
            "--hurdle",
            "--family",
            "geometric",
        ],
        vec![
            "analyze",
            "--data",
            s(&data),
            "--response",
            "y",
            "--family",
            "poisson",
            "--measure",
            "aic",
        ],
        vec![
            "analyze",
            "--data",
            s(&data),
            "--response",
            "y",
            "--family",
            "poisson",
            "--null",
            "plugin",
        ],
        vec![
            "analyze",
            "--data",
            s(&data),
            "--response",
            "y",
            "--family",
            "poisson",
            "--workers",
            "0",
        ],
        vec!["analyze", "--response", "y", "--family", "poisson"],
    ] {
        let o = run(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn data_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let data = synthetic_csv(dir.path(), Family::Poisson, 2, 8);
    let o = run(&[
        "analyze",
        "--data",
        s(&data),
        "--response",
        "y",
        "--players",
        "x1,x9",
        "--family",
        "poisson",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let missing = dir.path().join("missing.csv");
    fs::write(&missing, "y,a\n1,0.5\n2,NA\n0,1.5\n3,2.0\n").unwrap();
    let o = run(&[
        "analyze",
        "--data",
        s(&missing),
        "--response",
        "y",
        "--family",
        "poisson",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));
    let o = run(&[
        "analyze",
        "--data",
        s(&data),
        "--response",
        "y",
        "--family",
        "logit",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&[
        "analyze",
        "--data",
        "/nonexistent/file.csv",
        "--response",
        "y",
        "--family",
        "poisson",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn numerical_errors_exit_4_with_subset() {
    let dir = TempDir::new().unwrap();
    // b duplicates a, so any subset holding both players is rank deficient
    let path = dir.path().join("aliased.csv");
    let mut text = String::from("y,a,b,c\n");
    for i in 0..40 {
        let a = (i as f64 * 0.37).sin();
        text.push_str(&format!("{},{a},{a},{}\n", i % 4, (i as f64 * 0.11).cos()));
    }
    fs::write(&path, text).unwrap();
    let o = run(&[
        "analyze",
        "--data",
        s(&path),
        "--response",
        "y",
        "--family",
        "poisson",
    ]);
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("failing subset key 3"), "{err}");
    assert!(err.contains("aliased"), "{err}");
}

#[test]
fn doctor_visits_reproduction() {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/doctorvisits.csv");
    if !data.exists() {
        return;
    }
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&[
        "analyze",
        "--data",
        s(&data),
        "--response",
        "visits",
        "--players",
        "age,gender,health,illness,income,lchronic,nchronic,private,reduced",
        "--family",
        "poisson",
        "--measure",
        "kl-r2,mcfadden-r2",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let doc = ReportDocument::from_json(&fs::read_to_string(out).unwrap()).unwrap();
    let part = &doc.parts[0];
    let kl = part.table(glmshap::FitMeasure::KlR2).unwrap();
    assert!((kl.v_full - 0.2211).abs() <= 0.002);
    assert_eq!(kl.rows[0].player, "reduced");
    assert!((kl.rows[0].phi - 0.1250).abs() <= 0.002);
    let mcf = part.table(glmshap::FitMeasure::McfaddenR2).unwrap();
    assert!((mcf.v_full - 0.1564).abs() <= 0.002);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("0.1250"));
}
