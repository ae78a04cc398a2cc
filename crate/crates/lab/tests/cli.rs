use std::path::{Path, PathBuf};
use std::process::Command;

use cofra::config::{ExperimentConfig, BUDGET_ENV};
use cofra::report::DENSITY_COLUMNS;
use cofra::runner::{Results, RunReport};
use cofra::{run_experiment, ExperimentKind};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cofra() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cofra"))
}

#[test]
fn rep_check_passes_and_exits_zero() {
    let out = tempfile::tempdir().unwrap();
    let status = cofra()
        .args(["rep-check", "--config"])
        .arg(configs().join("rep_check.toml"))
        .arg("--out")
        .arg(out.path())
        .args(["--seed", "7", "--threads", "2"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(out.path().join("report.json")).unwrap();
    let report: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.config.seed, 7);
    let Results::RepCheck(r) = &report.results else { panic!("wrong kind") };
    assert!(r.orthogonality.as_ref().unwrap().max_deviation < 1e-10);
    assert!(out.path().join("coefficients.csv").exists());
    assert!(out.path().join("timing.json").exists());
}

fn kind_for(name: &str) -> ExperimentKind {
    match name.split('_').next().unwrap() {
        "geometry" => ExperimentKind::Geometry,
        "rep" => ExperimentKind::RepCheck,
        "frame" => ExperimentKind::Frame,
        "density" => ExperimentKind::Density,
        "hole" => ExperimentKind::Hole,
        other => panic!("unknown config prefix {other}"),
    }
}

#[test]
fn json_reports_round_trip_for_every_config() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_stem().unwrap().to_str().unwrap().to_owned();
        let cfg = ExperimentConfig::load(&path).unwrap();
        let out = run_experiment(kind_for(&name), &cfg, &configs()).unwrap();
        let text = serde_json::to_string_pretty(&out.report).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text, "{name}");
        seen += 1;
    }
    assert_eq!(seen, 8);
}

#[test]
fn hole_report_is_equal_after_round_trip() {
    let cfg = ExperimentConfig::load(&configs().join("hole.toml")).unwrap();
    let out = run_experiment(ExperimentKind::Hole, &cfg, &configs()).unwrap();
    let text = serde_json::to_string(&out.report).unwrap();
    assert_eq!(serde_json::from_str::<RunReport>(&text).unwrap(), out.report);
}

#[test]
fn density_csv_has_the_declared_columns() {
    let out = tempfile::tempdir().unwrap();
    let status = cofra()
        .arg("density")
        .arg("--config")
        .arg(configs().join("density_riesz.toml"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(status.status.success());
    let text = std::fs::read_to_string(out.path().join("density.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# {"));
    serde_json::from_str::<serde_json::Value>(&header[2..]).unwrap();
    assert_eq!(lines.next().unwrap(), DENSITY_COLUMNS.join(","));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    assert!(rows[0].starts_with("1,6.00000000000e0,"));
}

#[test]
fn invalid_step_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[geometry]\nfolner_r0 = 3.0\nstep = 2.0\n").unwrap();
    let out = cofra()
        .arg("geometry")
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`step`"), "{err}");
}

#[test]
fn budget_override_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = cofra()
        .arg("geometry")
        .arg("--config")
        .arg(configs().join("geometry_h3.toml"))
        .arg("--out")
        .arg(dir.path())
        .env(BUDGET_ENV, "50")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("growth fit") && err.contains("budget"), "{err}");
}

#[test]
fn failing_checks_give_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z2.toml");
    // Z^2 grows quadratically, so this range must fail
    std::fs::write(&path, "[geometry]\ngrowth_range = [2.5, 3.0]\n").unwrap();
    let out = cofra()
        .arg("geometry")
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL growth_exponent_in_range"));
}

#[test]
fn critical_lattice_runs_as_diagnostic() {
    let mut cfg = ExperimentConfig::load(&configs().join("density_riesz.toml")).unwrap();
    cfg.density.lattice = [1.0, 1.0];
    cfg.density.radii = vec![6.0];
    cfg.density.section_radius = 8.0;
    match run_experiment(ExperimentKind::Density, &cfg, &configs()) {
        Ok(out) => {
            let Results::Density(d) = &out.report.results else { panic!() };
            assert!(d.counting.checks.iter().all(|c| c.diagnostic));
        }
        // the critical Gram matrix can be numerically singular
        Err(e) => assert!(format!("{e:#}").contains("Riesz"), "{e:#}"),
    }
}

#[test]
fn frame_run_dumps_matrix_and_reads_window_file() {
    let dir = tempfile::tempdir().unwrap();
    let window: String = (0..6).map(|i| format!("{i},{},0.5\n", 1.0 / (1 + i) as f64)).collect();
    std::fs::write(dir.path().join("w.csv"), format!("index,real,imag\n{window}")).unwrap();
    let toml = "seed = 4\n[rep]\nmodel = \"finite_weyl_heisenberg\"\nn = 6\nsubspace_dims = [0, 1, 6]\n[rep.window]\nfile = \"w.csv\"\n\
                [frame]\npoint_set = \"full\"\nsubset_sizes = [36]\ndump_matrix = true\n";
    let path = dir.path().join("frame.toml");
    std::fs::write(&path, toml).unwrap();
    let out = cofra()
        .arg("frame")
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = std::fs::read_to_string(dir.path().join("out/matrix.csv")).unwrap();
    assert_eq!(m.lines().count(), 1 + 36);
    let report: RunReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    let Results::Frame(f) = &report.results else { panic!() };
    // the full orbit is tight with bound N |g|^2
    let b = &f.instances[0].bounds;
    assert!((b.a - b.b).abs() < 1e-10 * b.b);
}
