use std::process::{Command, Output};

fn sqrtreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqrtreg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn scaled_down_example_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.jsonl");
    let o = sqrtreg(&[
        "solve", "--synthetic", "ex1", "--N", "200", "--g", "40", "--penalty", "sgl", "--w1", "0", "--lambda", "bun",
        "--solver", "ppdna", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o);
    assert_eq!(row.lines().count(), 1);
    assert!(row.contains("converged"));
    let rec: serde_json::Value = serde_json::from_str(std::fs::read_to_string(&out).unwrap().trim()).unwrap();
    assert_eq!(rec["nnz_structure"], 3);
    assert_eq!(rec["status"], "converged");
    assert_eq!(rec["criterion"], "kkt");

    let again = sqrtreg(&["render", out.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(stdout(&again).lines().count(), 2);
}

#[test]
fn invalid_penalty_is_a_usage_error() {
    let o = sqrtreg(&["solve", "--synthetic", "ex1", "--N", "50", "--g", "8", "--penalty", "ridge"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ridge") && err.contains("Usage"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_lambda_and_missing_source() {
    let o = sqrtreg(&["solve", "--synthetic", "ex1", "--lambda", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    let o = sqrtreg(&["solve", "--penalty", "sgl"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn time_cap_exits_with_two() {
    let o = sqrtreg(&[
        "solve", "--synthetic", "ex2", "--N", "300", "--g", "60", "--penalty", "fused", "--w1", "0.2", "--lambda", "0.5",
        "--solver", "padmm", "--tol", "1e-14", "--max-time", "0.001",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("time_limit"));
}

#[test]
fn cross_validated_lambda() {
    let o = sqrtreg(&[
        "solve", "--synthetic", "ex1", "--N", "80", "--g", "8", "--w1", "0", "--lambda", "cv", "--tol", "1e-5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o);
    let lam: f64 = row.split_whitespace().nth(2).unwrap().parse().unwrap();
    let grid: Vec<f64> = (0..=40).map(|k| 10f64.powf(-1.0 + 0.05 * k as f64)).collect();
    assert!(grid.iter().any(|g| (g - lam).abs() < 1e-4 * g), "{lam}");
}

#[test]
fn file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.svm");
    let mut text = String::new();
    for i in 0..30 {
        let a = (i as f64 * 0.37).sin();
        let b = (i as f64 * 1.3).cos();
        let c = ((i * i) % 7) as f64 - 3.0;
        text += &format!("{} 1:{a} 2:{b} 3:{c}\n", 2.0 * a - c + 0.1 * b);
    }
    std::fs::write(&path, text).unwrap();
    let beta = dir.path().join("beta.txt");
    let o = sqrtreg(&[
        "solve", "--input", path.to_str().unwrap(), "--g", "2", "--lambda", "0.3", "--beta-out", beta.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("libsvm:"));
    let b: Vec<f64> = std::fs::read_to_string(&beta).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(b.len(), 3);
}

#[test]
fn bench_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.jsonl");
    std::fs::write(
        &manifest,
        concat!(
            r#"{"problem":"ex1:200:40","solver":"ppdna","penalty":"sgl","w1":0.0,"lambda_rule":"bun","seed":1}"#,
            "\n",
            r#"{"problem":"ex1:200:40","solver":"dadmm","penalty":"sgl","w1":0.0,"lambda_rule":"bun","seed":1}"#,
            "\n",
            r#"{"problem":"ex2:120:12","solver":"padmm","penalty":"fused","w1":0.5,"lambda_rule":"stg","seed":2}"#,
            "\n",
            r#"{"problem":"nope","solver":"ppdna","penalty":"sgl","w1":0.0,"lambda_rule":"bun","seed":1}"#,
            "\n",
        ),
    )
    .unwrap();
    let results = dir.path().join("r.jsonl");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_sqrtreg"))
            .args(["bench", "--manifest", manifest.to_str().unwrap(), "--out", results.to_str().unwrap()])
            .env("SQRTREG_THREADS", threads)
            .output()
            .unwrap()
    };
    let o = run("2");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[1].contains("ppdna") && lines[1].contains("converged"));
    assert!(lines[4].contains("error"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));

    let strip = |text: String| -> Vec<serde_json::Value> {
        text.lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v["wall_seconds"] = serde_json::Value::Null;
                v
            })
            .collect()
    };
    let first = strip(std::fs::read_to_string(&results).unwrap());
    assert_eq!(run("1").status.code(), Some(0));
    assert_eq!(first, strip(std::fs::read_to_string(&results).unwrap()));
    assert_eq!(first[0]["nnz_structure"], 3);

    assert_eq!(run("zero").status.code(), Some(1));
}

#[test]
fn empty_manifest_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.jsonl");
    std::fs::write(&manifest, "").unwrap();
    let o = sqrtreg(&["bench", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn verify_is_deterministic() {
    let args = ["verify", "--family", "prox", "--family", "dro", "--trials", "20", "--seed", "3"];
    let a = sqrtreg(&args);
    let b = sqrtreg(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert!(text.contains("dro identity"));
    assert_eq!(sqrtreg(&["verify", "--family", "nothing"]).status.code(), Some(1));
}

#[test]
fn shipped_manifest_ppdna_cells_converge() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests/synthetic_fifth.jsonl");
    let text = std::fs::read_to_string(path).unwrap();
    let cells: String = text
        .lines()
        .filter(|l| l.contains("\"ppdna\"") && l.contains("\"w1\":0.0"))
        .map(|l| format!("{l}\n"))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.jsonl");
    std::fs::write(&manifest, &cells).unwrap();
    let o = sqrtreg(&["bench", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let table = stdout(&o);
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r.ends_with("converged")), "{table}");
}
