mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use common::{stub_config, write_synthetic_dataset};
use pcaharmony::experiment::ExperimentTable;

const REPORTS: [&str; 9] = [
    "table2.csv",
    "table2.md",
    "table2_dice.csv",
    "table3.csv",
    "table3.md",
    "declines.csv",
    "scree_alpha.csv",
    "scree_beta.csv",
    "results.csv",
];

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcaharmony"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn check(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

struct Setup {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

fn datasets() -> Setup {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    write_synthetic_dataset(&root.join("src/alpha"), "a", 30, 1, 1.0);
    write_synthetic_dataset(&root.join("src/beta"), "b", 30, 2, 1.4);
    Setup { _tmp: tmp, root }
}

fn write_config(s: &Setup, work: &str) -> PathBuf {
    let cfg = stub_config(
        &s.root.join(work),
        &[("alpha", &s.root.join("src/alpha")), ("beta", &s.root.join("src/beta"))],
    );
    let path = s.root.join(format!("{work}.toml"));
    fs::write(&path, cfg).unwrap();
    path
}

fn reports(dir: &Path) -> Vec<(String, Vec<u8>)> {
    REPORTS
        .iter()
        .map(|f| (f.to_string(), fs::read(dir.join(f)).unwrap_or_else(|e| panic!("{f}: {e}"))))
        .collect()
}

#[test]
fn dry_run_with_stub_trainer() {
    let s = datasets();
    let cfg = write_config(&s, "work");
    let start = Instant::now();
    check(&cli(&["run", "--config", cfg.to_str().unwrap()]));
    assert!(start.elapsed() < Duration::from_secs(60));

    let work = s.root.join("work");
    let table = ExperimentTable::read_results(&work.join("reports/results.csv")).unwrap();
    assert_eq!(table.datasets(), ["alpha", "beta"]);
    let results = table.pair_results();
    assert_eq!(results.len(), 8);
    assert!(results.iter().all(|r| r.recall == 1.0 && r.dice == Some(1.0)));
    reports(&work.join("reports"));

    let manifests = fs::read_dir(work.join("manifests"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "toml"))
        .count();
    assert_eq!(manifests, 8);
    // 30 records split 21/3/6; the in-domain cell scores the 6 test images
    let diag = fs::read_to_string(work.join("evaluation/train-pca-alpha.csv")).unwrap();
    assert_eq!(diag.lines().count(), 1 + 6);
    let ext = fs::read_to_string(work.join("evaluation/predict-original-alpha-on-beta.csv")).unwrap();
    assert_eq!(ext.lines().count(), 1 + 30);
    // PCA arm images differ from the originals
    let a = fs::read(work.join("data/alpha/original/images/a000.png")).unwrap();
    let b = fs::read(work.join("data/alpha/pca/images/a000.png")).unwrap();
    assert_ne!(a, b);

    for (name, bytes) in reports(&work.join("reports")) {
        let text = String::from_utf8(bytes).unwrap();
        assert!(!text.contains(s.root.to_str().unwrap()), "{name} leaks a path");
    }

    // everything complete: a rerun does nothing and changes nothing
    let before = reports(&work.join("reports"));
    let out = cli(&["run", "--config", cfg.to_str().unwrap()]);
    check(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("stages run: none"));
    assert_eq!(before, reports(&work.join("reports")));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let s = datasets();
    let full = write_config(&s, "full");
    check(&cli(&["run", "--config", full.to_str().unwrap()]));

    let staged = write_config(&s, "staged");
    let c = staged.to_str().unwrap();
    check(&cli(&["run", "--config", c, "--stage", "ingest"]));
    check(&cli(&["run", "--config", c, "--stage", "pca"]));
    check(&cli(&["run", "--config", c]));

    // simulate a crash in the middle of the trainer stage
    let work = s.root.join("staged");
    for st in ["train", "evaluate", "report"] {
        fs::remove_file(work.join(format!("stages/{st}.done"))).unwrap();
    }
    fs::remove_file(work.join("manifests/predict-pca-beta-on-alpha.done")).unwrap();
    fs::remove_dir_all(work.join("runs/predictions/pca/beta/alpha")).unwrap();
    fs::remove_file(work.join("manifests/train-original-beta.done")).unwrap();
    fs::remove_dir_all(work.join("reports")).unwrap();
    fs::create_dir_all(work.join("reports")).unwrap();
    check(&cli(&["run", "--config", c]));

    assert_eq!(reports(&s.root.join("full/reports")), reports(&work.join("reports")));
}

#[test]
fn results_from_fixture() {
    let s = datasets();
    let cfg = write_config(&s, "fixture");
    let src = s.root.join("fixture_results");
    fs::create_dir_all(&src).unwrap();
    fs::copy(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/table2/results.csv"),
        src.join("results.csv"),
    )
    .unwrap();
    let out_dir = s.root.join("fixture_reports");
    check(&cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--results-from",
        src.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let t3 = fs::read_to_string(out_dir.join("table3.csv")).unwrap();
    assert!(t3.contains("Worst 10,recall,10,"), "{t3}");
    assert!(t3.contains("Other 20,recall,20,"), "{t3}");
    let t2 = fs::read_to_string(out_dir.join("table2.csv")).unwrap();
    assert!(t2.lines().last().unwrap().starts_with("Mean,0.7450,0.7383,-0.0067"));
    assert!(!out_dir.join("table2_dice.csv").exists());
    assert!(!s.root.join("fixture").join("data").exists());
}

#[test]
fn failing_trainer_stops_the_run() {
    let s = datasets();
    let cfg = write_config(&s, "broken");
    let text = fs::read_to_string(&cfg).unwrap();
    let bin = env!("CARGO_BIN_EXE_pcaharmony");
    fs::write(&cfg, text.replace(&format!("[{bin:?}, \"stub-trainer\"]"), "[\"false\"]")).unwrap();
    let out = cli(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("trainer failed"), "{err}");
    let work = s.root.join("broken");
    assert!(work.join("stages/pca.done").is_file());
    assert!(!work.join("stages/train.done").exists());
}

#[test]
fn stage_requires_predecessors() {
    let s = datasets();
    let cfg = write_config(&s, "fresh");
    let out = cli(&["run", "--config", cfg.to_str().unwrap(), "--stage", "report"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("needs completed stages"));
}
