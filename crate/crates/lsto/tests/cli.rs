use std::path::Path;
use std::process::{Command, Output};

use lsto::output::HISTORY_HEADER;
use lsto::presets::{preset, PresetName};
use lsto::RunConfig;

fn lsto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsto"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, mode: &str, d_max: usize) -> String {
    format!(
        r#"
preset = "ex1-{mode}"

[grid]
nx = 12
ny = 8
h = 3.0

[schedules]
d_st = 2
d_c = 8
d_max = {d_max}

[output]
directory = "{}"
stride = 2
"#,
        dir.display()
    )
}

#[test]
fn version_prints_crate_version() {
    let out = lsto(&["version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.trim(), format!("lsto {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(lsto(&[]).status.code(), Some(2));
    assert_eq!(lsto(&["preset", "ex9"]).status.code(), Some(2));
    assert_eq!(lsto(&["preset", "ex1-tfc", "--scale", "0"]).status.code(), Some(2));
}

#[test]
fn missing_config_is_reported() {
    let out = lsto(&["run", "/nonexistent/lsto.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("/nonexistent/lsto.toml"), "{err}");
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[material]\nbeta = 0.5\n").unwrap();
    let out = lsto(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("beta"));
}

#[test]
fn print_config_round_trips() {
    let out = lsto(&["preset", "beam2d-tfc", "--scale", "4", "--print-config"]);
    assert!(out.status.success());
    let cfg = RunConfig::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, preset(PresetName::Beam2dTfc, 4));
}

#[test]
fn gradcheck_on_ten_by_ten_sfc() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/gradcheck-sfc.toml");
    let out = lsto(&["gradcheck", config]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    let worst: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("max relative error "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn zero_iteration_run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, small_config(&out_dir, "tfc", 0)).unwrap();
    let out = lsto(&["run", cfg_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let history = std::fs::read_to_string(out_dir.join("history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], HISTORY_HEADER.join(","));
    assert!(lines[1].starts_with("0,"));

    let vtk = std::fs::read_to_string(out_dir.join("fields_00000.vtk")).unwrap();
    assert!(vtk.contains("DIMENSIONS 13 9 1"));
    assert!(vtk.contains("POINT_DATA 117"));
    for name in ["phi", "rho", "rho_tilde", "tau", "u_norm"] {
        assert!(vtk.contains(&format!("SCALARS {name} double 1")), "{name}");
    }
    assert!(out_dir.join("fields_final.vtk").exists());
    let interface = std::fs::read_to_string(out_dir.join("final_interface.csv")).unwrap();
    assert_eq!(interface.lines().next(), Some("element,x0,y0,x1,y1"));

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["iterations"], 0);
    assert_eq!(meta["config"]["grid"]["nx"], 12);
}

#[test]
fn history_rows_reproduce_the_objective() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse(&small_config(dir.path(), "tfc", 6)).unwrap();
    lsto::run(&cfg).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("history.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let mut rows = 0;
    for record in reader.records() {
        let r = record.unwrap();
        let v = |name: &str| r[col(name)].parse::<f64>().unwrap();
        let z = v("w1") * v("F") + v("w2") * v("P_Per") + v("w3") * v("P_Reg") + v("w4") * v("P_coupling");
        assert!((z - v("z")).abs() <= 1e-9 * v("z").abs().max(1.0), "{z} vs {}", v("z"));
        assert!(r[col("g_stress")].is_empty());
        rows += 1;
    }
    assert_eq!(rows, 7);
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = RunConfig::parse(&small_config(d.path(), "sfc", 5)).unwrap();
        lsto::run(&cfg).unwrap();
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("history.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}
