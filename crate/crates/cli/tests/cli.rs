use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rowcrop::raster::load_mask;
use rowcrop_cli::manifest::{sha256_file, RunManifest};
use tempfile::TempDir;

fn rowcrop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rowcrop")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = rowcrop(args);
    assert!(
        out.status.success(),
        "rowcrop {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &TempDir, rel: &str) -> String {
    dir.path().join(rel).to_string_lossy().into_owned()
}

/// A small field shared by the tests that need imagery.
fn field(dir: &TempDir) -> String {
    ok(&[
        "synth", "--output-dir", &path(dir, "field"), "--width-m", "4", "--height-m", "3", "--gsd-m", "0.01", "--seed", "3",
    ]);
    path(dir, "field/field.png")
}

fn manifest(p: impl AsRef<Path>) -> RunManifest {
    RunManifest::read(p.as_ref()).unwrap()
}

#[test]
fn flags_override_config_file_which_overrides_defaults() {
    let dir = TempDir::new().unwrap();
    let input = field(&dir);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[segment]\nthreshold = 0.2\n[sprayer]\nspeed_km_h = 7.2\n").unwrap();
    let cfg = cfg.to_string_lossy().into_owned();

    ok(&["--config", &cfg, "segment", "--input", &input, "--output", &path(&dir, "a.png")]);
    let m = manifest(path(&dir, "a.png.manifest.json"));
    assert_eq!(m.config["threshold"], 0.2);
    assert_eq!(m.config["sprayer"]["speed_m_s"], 2.0);
    assert_eq!(m.config["alpha"], 0.05);

    ok(&["--config", &cfg, "segment", "--input", &input, "--output", &path(&dir, "b.png"), "--threshold", "0.3"]);
    assert_eq!(manifest(path(&dir, "b.png.manifest.json")).config["threshold"], 0.3);
}

#[test]
fn raising_the_threshold_never_adds_vegetation() {
    let dir = TempDir::new().unwrap();
    let input = field(&dir);
    let mut prev: Option<rowcrop::BinaryMask> = None;
    for (i, t) in ["-0.5", "0.0", "0.08", "0.3", "1.0"].iter().enumerate() {
        let out = path(&dir, &format!("m{i}.png"));
        ok(&["segment", "--input", &input, "--output", &out, &format!("--threshold={t}")]);
        let mask = load_mask(Path::new(&out)).unwrap();
        if let Some(p) = &prev {
            assert!(mask.and_not(p).unwrap().is_empty(), "threshold {t} grew the mask");
        }
        prev = Some(mask);
    }
}

#[test]
fn evaluate_rows_from_counts() {
    let dir = TempDir::new().unwrap();
    let counts = dir.path().join("counts.txt");
    std::fs::write(&counts, "tp=2313\nfp=12\nfn=8\n").unwrap();
    let report = path(&dir, "eval.txt");
    ok(&["evaluate-rows", "--counts", &counts.to_string_lossy(), "--report", &report]);
    let text = std::fs::read_to_string(&report).unwrap();
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}=")))
            .unwrap_or_else(|| panic!("no {key} in {text}"))
            .parse()
            .unwrap()
    };
    assert!((value("recall") - 0.9966).abs() < 1e-4);
    assert!((value("precision") - 0.99484).abs() < 1e-5);
}

#[test]
fn evaluate_rows_against_synthetic_truth() {
    let dir = TempDir::new().unwrap();
    let input = field(&dir);
    let mask = path(&dir, "mask.png");
    let rows = path(&dir, "rows.csv");
    ok(&["segment", "--input", &input, "--output", &mask]);
    ok(&["detect-rows", "--mask", &mask, "--output", &rows]);
    let report = path(&dir, "eval.txt");
    ok(&[
        "evaluate-rows", "--detected", &rows, "--truth", &path(&dir, "field/truth_rows.csv"), "--mask", &mask, "--report", &report,
    ]);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("fn=0\n") && text.contains("recall=1.000000\n"), "{text}");
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = TempDir::new().unwrap();
    let missing = rowcrop(&["segment", "--input", &path(&dir, "nope.png"), "--output", &path(&dir, "m.png")]);
    assert_eq!(missing.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&missing.stderr);
    assert!(stderr.contains("\"class\":\"input\""), "{stderr}");

    let input = field(&dir);
    let bad = rowcrop(&["segment", "--input", &input, "--output", &path(&dir, "m.png"), "--threshold", "NaN"]);
    assert_eq!(bad.status.code(), Some(2));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[segment]\nthreshhold = 0.1\n").unwrap();
    let unknown = rowcrop(&["--config", &cfg.to_string_lossy(), "segment", "--input", &input, "--output", &path(&dir, "m.png")]);
    assert_eq!(unknown.status.code(), Some(2));

    let cfg = dir.path().join("units.toml");
    std::fs::write(&cfg, "[sprayer]\nspeed_m_s = 2.0\nspeed_km_h = 7.2\n").unwrap();
    let conflict = rowcrop(&["--config", &cfg.to_string_lossy(), "segment", "--input", &input, "--output", &path(&dir, "m.png")]);
    assert_eq!(conflict.status.code(), Some(2));

    let obs = dir.path().join("obs.csv");
    std::fs::write(&obs, "plot_id,treatment,weed_area_m2\n1,SSWC,1.0\n1,no-SSWC,2.0\n2,SSWC,1.0\n").unwrap();
    let unpaired = rowcrop(&["stats", "--observations", &obs.to_string_lossy()]);
    assert_eq!(unpaired.status.code(), Some(4), "{}", String::from_utf8_lossy(&unpaired.stderr));
}

#[test]
fn failed_runs_leave_no_partial_outputs() {
    let dir = TempDir::new().unwrap();
    let input = field(&dir);
    let mask = path(&dir, "mask.png");
    let rows = path(&dir, "rows.csv");
    ok(&["segment", "--input", &input, "--output", &mask]);
    ok(&["detect-rows", "--mask", &mask, "--output", &rows]);
    let weeds = dir.path().join("weeds.png");
    let out = rowcrop(&[
        "weed-map", "--mask", &mask, "--rows", &rows, "--output", &weeds.to_string_lossy(), "--regions",
        &path(&dir, "missing/dir/regions.csv"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!weeds.exists());
    assert!(!dir.path().join("weeds.pgw").exists());
    assert!(!dir.path().join("weeds.png.manifest.json").exists());
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let dir = TempDir::new().unwrap();
    let input = field(&dir);
    let run = |name: &str, threads: &str| -> PathBuf {
        ok(&["--threads", threads, "pipeline", "--input", &input, "--output-dir", &path(&dir, name), "--simulate"]);
        dir.path().join(name)
    };
    let (a, b) = (run("a", "1"), run("b", "4"));
    for f in ["mask.png", "rows.csv", "weeds.png", "regions.csv", "prescription.geojson", "as_applied.geojson", "report.txt"] {
        assert_eq!(sha256_file(&a.join(f)).unwrap().0, sha256_file(&b.join(f)).unwrap().0, "{f} differs");
    }
    let (ma, mb) = (manifest(a.join("manifest.json")), manifest(b.join("manifest.json")));
    for (x, y) in ma.outputs.iter().zip(&mb.outputs) {
        assert_eq!((&x.role, &x.sha256), (&y.role, &y.sha256));
    }
}

#[test]
fn stats_on_observations() {
    let dir = TempDir::new().unwrap();
    let obs = dir.path().join("obs.csv");
    let mut text = String::from("plot_id,treatment,weed_area_m2\n");
    for (i, d) in [1.0, 2.0, 3.0, 4.0, 5.0].iter().enumerate() {
        text.push_str(&format!("p{i},no-SSWC,{}\np{i},SSWC,10\n", 10.0 + d));
    }
    std::fs::write(&obs, text).unwrap();
    let out = ok(&["stats", "--observations", &obs.to_string_lossy()]);
    let report = String::from_utf8(out.stdout).unwrap();
    let t: f64 = report.lines().find_map(|l| l.strip_prefix("t=")).unwrap().parse().unwrap();
    assert!((t.abs() - 4.2426).abs() < 1e-4, "{report}");
    assert!(report.contains("significant=true"));
}

#[test]
fn overlay_matches_golden_digest() {
    let dir = TempDir::new().unwrap();
    let input = field(&dir);
    let pipe = path(&dir, "pipe");
    ok(&["pipeline", "--input", &input, "--output-dir", &pipe]);
    let out = path(&dir, "overlay.png");
    ok(&[
        "overlay", "--raster", &input, "--output", &out, "--rows", &path(&dir, "pipe/rows.csv"), "--weeds",
        &path(&dir, "pipe/weeds.png"), "--prescription", &path(&dir, "pipe/prescription.geojson"),
    ]);
    assert_eq!(sha256_file(Path::new(&out)).unwrap().0, GOLDEN_OVERLAY);
}

const GOLDEN_OVERLAY: &str = "41adae5ded132865ca617ef16647e68084b296ace41c2f56a458cda38e3cd3a4";
