use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chanpred(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chanpred"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = chanpred(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn body(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[test]
fn sweep_writes_one_row_per_approach_and_snr() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        &["--preset", "desk", "--seed", "1", "--snr-db", "10,20", "sweep", "--approach", "jldt,persistence"],
        dir.path(),
    );
    assert!(stdout.contains("config_hash"));
    assert!(stdout.contains("seeds [1]"));
    let text = fs::read_to_string(dir.path().join("nmse.csv")).unwrap();
    assert!(text.starts_with("# chanpred sweep\n# config_hash "));
    assert!(text.contains("# [dataset]"));
    let csv = body(&dir.path().join("nmse.csv"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("jldt,10,"));
    assert!(rows[3].starts_with("persistence,20,"));
    assert!(dir.path().join("loss.csv").exists());
}

#[test]
fn correlate_has_shift_rows_per_domain() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--preset", "desk", "--seed", "2", "correlate"], dir.path());
    let csv = body(&dir.path().join("correlation.csv"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.iter().filter(|r| r.contains(",subcarrier,")).count(), 17);
    assert_eq!(rows.iter().filter(|r| r.contains(",antenna,")).count(), 17);
}

#[test]
fn subcommands_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        ok(&["--preset", "desk", "--seed", "7", "generate"], dir);
        let truth = dir.join("truth.trace");
        ok(&["--preset", "desk", "--seed", "7", "--snr-db", "5", "estimate", "--input", truth.to_str().unwrap()], dir);
        ok(&["--preset", "desk", "--seed", "7", "run", "--approach", "jldt"], dir);
    }
    for f in ["truth.trace", "estimate.trace", "nmse.csv", "loss.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let est = chanpred::trace::import_trace(a.path().join("estimate.trace")).unwrap();
    assert_eq!(est.provenance, chanpred::Provenance::Estimated);
}

#[test]
fn correlate_accepts_an_imported_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[correlation]\nn_avg = 2\nmax_shift = 1\n").unwrap();
    let sample = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/sample_trace.txt");
    ok(&["--config", cfg.to_str().unwrap(), "correlate", "--input", sample], dir.path());
    assert_eq!(body(&dir.path().join("correlation.csv")).lines().count(), 1 + 2 * 2);
}

#[test]
fn exit_codes_separate_config_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[dataset]\nn_gap = 900\nn_tr = 1000\n").unwrap();
    let o = chanpred(&["--config", bad.to_str().unwrap(), "generate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("N_tr < N_gap"));

    fs::write(&bad, "[train]\nepohcs = 3\n").unwrap();
    assert_eq!(chanpred(&["--config", bad.to_str().unwrap(), "generate"], dir.path()).status.code(), Some(2));
    assert_eq!(chanpred(&["--config", "/no/such/file.toml", "generate"], dir.path()).status.code(), Some(2));
    assert_eq!(chanpred(&["run", "--approach", "nope"], dir.path()).status.code(), Some(2));

    let o = chanpred(&["--preset", "desk", "estimate", "--input", "/no/such/trace"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn saved_predictors_reproduce_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    let m = models.to_str().unwrap();
    let base = ["--preset", "desk", "--seed", "4", "--snr-db", "10"];
    ok(&[&base[..], &["train", "--approach", "jldt", "--save", m]].concat(), dir.path());
    assert!(models.join("jldt-0.mlp").exists());
    let trained = body(&dir.path().join("nmse.csv"));
    ok(&[&base[..], &["run", "--approach", "jldt", "--load", m]].concat(), dir.path());
    assert_eq!(body(&dir.path().join("nmse.csv")), trained);

    let o = chanpred(&[&base[..], &["run", "--approach", "jl", "--load", m]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(1));
}
