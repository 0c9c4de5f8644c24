mod common;

use std::fs;
use std::process::{Command, Output};

use common::write_synthetic_dataset;
use pcaharmony::ingest::DataMatrix;

fn cli(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_pcaharmony"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    out
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn ingest_fit_reconstruct_scree() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    write_synthetic_dataset(&src, "x", 12, 5, 1.0);
    let p = |s: &str| tmp.path().join(s).to_str().unwrap().to_owned();

    let stdout = ok(&[
        "ingest", "--dir", src.to_str().unwrap(), "--pattern", "images/*.png",
        "--masks", "masks/{stem}_mask.png", "--out", &p("out/ds"), "--resize", "16x16",
    ]);
    assert!(stdout.contains("12 records, 8 train / 1 val / 3 test"), "{stdout}");
    let images = DataMatrix::read_umx(&tmp.path().join("out/ds.images.umx")).unwrap();
    assert_eq!((images.rows(), images.cols()), (12, 256));
    assert!(images.data().iter().all(|v| (0.0..=1.0).contains(v)));
    let masks = DataMatrix::read_umx(&tmp.path().join("out/ds.masks.umx")).unwrap();
    assert!(masks.data().iter().all(|&v| v == 0.0 || v == 1.0));
    assert_eq!(fs::read_to_string(p("out/ds.split.csv")).unwrap().lines().count(), 13);

    let stdout = ok(&["pca", "fit", "--in", &p("out/ds.images.umx"), "--out", &p("model.upm")]);
    assert!(stdout.contains("n = 12, d = 256, k_max = 11"), "{stdout}");

    ok(&["pca", "reconstruct", "--model", &p("model.upm"), "--k", "11", "--out", &p("full.umx")]);
    let full = DataMatrix::read_umx(&tmp.path().join("full.umx")).unwrap();
    assert_eq!(full.row_ids(), images.row_ids());
    // stored as f32, so compare at single precision
    for (a, b) in full.data().iter().zip(images.data()) {
        assert!((a - b).abs() < 1e-5);
    }

    ok(&[
        "pca", "reconstruct", "--model", &p("model.upm"), "--k", "auto",
        "--out", &p("pngs"), "--shape", "16x16",
    ]);
    assert_eq!(fs::read_dir(p("pngs")).unwrap().count(), 12);
    assert!(tmp.path().join("pngs/x000.png").is_file());
    assert!(!cli(&["pca", "reconstruct", "--model", &p("model.upm"), "--out", &p("nopng")]).status.success());

    ok(&["pca", "scree", "--model", &p("model.upm"), "--out", &p("scree.csv")]);
    let scree = fs::read_to_string(p("scree.csv")).unwrap();
    assert!(scree.starts_with("component,eigenvalue,cumulative_variance\n"));
    assert_eq!(scree.lines().count(), 12);
    assert!(scree.lines().last().unwrap().ends_with(",1.000000000000"));
}

#[test]
fn evaluate_and_ttest() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    write_synthetic_dataset(&src, "y", 4, 8, 1.0);
    let gt = tmp.path().join("gt");
    fs::create_dir_all(&gt).unwrap();
    for e in fs::read_dir(src.join("masks")).unwrap() {
        let path = e.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().replace("_mask", "");
        fs::copy(&path, gt.join(name)).unwrap();
    }
    let out = tmp.path().join("scores.csv");
    let stdout = ok(&[
        "evaluate", "--pred", gt.to_str().unwrap(), "--gt", gt.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("recall 1.0000"), "{stdout}");
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("id,recall,precision,dice,degenerate\n"));
    assert_eq!(csv.lines().count(), 5);

    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    fs::write(&a, "recall\n0.55\n0.61\n0.48\n0.70\n0.66\n").unwrap();
    fs::write(&b, "recall\n0.62\n0.70\n0.55\n0.74\n0.69\n").unwrap();
    let paired = ok(&["ttest", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap(), "--paired"]);
    assert!(paired.contains("df = 4.000000"), "{paired}");
    let welch = ok(&["ttest", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]);
    assert!(welch.contains("t = ") && welch.contains("p = "), "{welch}");
    assert!(!cli(&["ttest", "--a", a.to_str().unwrap(), "--b", a.to_str().unwrap(), "--paired"]).status.success());
}
