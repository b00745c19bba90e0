use std::path::Path;
use std::process::{Command, Output};

fn mpts(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpts"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_accepts_shipped_configs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for group in ["sinusoid", "reptile"] {
        for entry in std::fs::read_dir(root.join(group)).unwrap() {
            let path = entry.unwrap().path();
            let out = mpts(&["validate", path.to_str().unwrap()], &root);
            assert!(out.status.success(), "{}: {}", path.display(), stderr(&out));
        }
    }
}

#[test]
fn validate_names_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("batch_size = 0\n", "batch_size"),
        ("batch_size = 16\npool_size = 8\n", "pool_size"),
        ("gamma1 = -1.0\n", "gamma1"),
        ("sampler = \"nope\"\n", "sampler"),
        ("batchsize = 4\n", "batchsize"),
        ("alphas = [1.0]\n", "alphas"),
    ];
    for (i, (body, field)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.toml"));
        std::fs::write(&path, body).unwrap();
        let out = mpts(&["validate", path.to_str().unwrap()], dir.path());
        assert!(!out.status.success(), "{body:?} was accepted");
        assert!(stderr(&out).contains(field), "{body:?}: {}", stderr(&out));
    }
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpts(&["selftest"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().count() >= 5);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn unknown_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!mpts(&["run"], dir.path()).status.success());
    assert!(!mpts(&["frobnicate"], dir.path()).status.success());
    assert!(!mpts(&["run", "missing.toml"], dir.path()).status.success());
}

fn last_cell(csv_text: &str, column: &str) -> f64 {
    let body: String = csv_text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let idx = reader.headers().unwrap().iter().position(|h| h == column).unwrap();
    let last = reader.records().last().unwrap().unwrap();
    last[idx].parse().unwrap()
}

#[test]
fn compare_summarizes_run_tails() {
    let dir = tempfile::tempdir().unwrap();
    let configs = dir.path().join("configs");
    std::fs::create_dir(&configs).unwrap();
    let common = "iterations = 60\neval_every = 20\neval_size = 24\n";
    std::fs::write(configs.join("erm.toml"), format!("sampler = \"erm\"\n{common}")).unwrap();
    std::fs::write(configs.join("mpts.toml"), format!("sampler = \"mpts\"\n{common}")).unwrap();

    let out = mpts(&["--threads", "1", "compare", "configs", "--seeds", "0,1", "--out", "runs"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(table.lines().any(|l| l.starts_with("erm")));
    assert!(table.lines().any(|l| l.starts_with("mpts")));

    let summary = std::fs::read_to_string(dir.path().join("runs/summary.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(summary.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let label = &rec[col("method")];
        let tails: Vec<f64> = [0, 1]
            .iter()
            .map(|s| {
                let text = std::fs::read_to_string(dir.path().join(format!("runs/{label}/seed-{s}/metrics.csv"))).unwrap();
                last_cell(&text, "val_cvar_0.9")
            })
            .collect();
        let mean = (tails[0] + tails[1]) / 2.0;
        let reported: f64 = rec[col("cvar_0.9")].parse().unwrap();
        assert!((reported - mean).abs() <= 1e-9, "{label}: {reported} vs {mean}");
        let se = (tails[0] - tails[1]).abs() / 2.0;
        let reported_se: f64 = rec[col("cvar_0.9_se")].parse().unwrap();
        assert!((reported_se - se).abs() <= 1e-9);
    }

    // a second invocation reuses the finished runs
    let again = mpts(&["--threads", "1", "compare", "configs", "--seeds", "0,1", "--out", "runs"], dir.path());
    assert!(again.status.success());
    assert!(!stderr(&again).contains("running"));
}

#[test]
fn run_writes_hashed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "sampler = \"gdrm\"\niterations = 30\neval_every = 10\neval_size = 16\n").unwrap();
    let out = mpts(&["run", "c.toml", "--seed", "3", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let metrics = std::fs::read_to_string(dir.path().join("o/metrics.csv")).unwrap();
    let timing = std::fs::read_to_string(dir.path().join("o/timing.csv")).unwrap();
    let hash_line = |s: &str| s.lines().find(|l| l.starts_with("# config_sha256 ")).map(str::to_string);
    assert!(hash_line(&metrics).is_some());
    assert_eq!(hash_line(&metrics), hash_line(&timing));
    assert!(dir.path().join("o/checkpoint.json").exists());
    assert_eq!(last_cell(&metrics, "iteration"), 30.0);
}
