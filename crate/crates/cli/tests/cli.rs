use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use zermelo_cli::bundled::SCENARIOS;
use zermelo_cli::config::RunConfig;
use zermelo_core::dynamics::{diagnostics, read_pmp_csv};
use zermelo_core::solvers::bundled;
use zermelo_core::Vec2;

fn zermelo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zermelo")).args(args).output().expect("binary runs")
}

fn scenario_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

/// Writes a bundled scenario with its solver list and brute-force grid replaced.
fn variant(dir: &Path, name: &str, solvers: &[&str]) -> PathBuf {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(scenario_file(name)).unwrap()).unwrap();
    v["solvers"] = solvers.iter().map(|s| Value::from(*s)).collect();
    v["brute_force"] = serde_json::json!({"nx": 101, "ny": 101, "n_controls": 32, "dt": 0.01});
    let path = dir.join(format!("{name}-variant.json"));
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn run_into(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    zermelo(&args)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn missing_set_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(&fs::read_to_string(scenario_file("no_current_disk")).unwrap()).unwrap();
    v["scenario"].as_object_mut().unwrap().remove("set");
    let cfg = dir.path().join("broken.json");
    fs::write(&cfg, v.to_string()).unwrap();
    let out = run_into(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario.set"), "{out:?}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unreadable_and_non_json_configs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_into(&dir.path().join("absent.json"), dir.path(), &[]).status.code(), Some(3));
    let junk = dir.path().join("junk.json");
    fs::write(&junk, "{ not json").unwrap();
    assert_eq!(run_into(&junk, dir.path(), &[]).status.code(), Some(3));
}

#[test]
fn solver_failure_exits_2_and_keeps_other_reports() {
    let dir = tempfile::tempdir().unwrap();
    // the constant-current route does not apply to an affine current
    let cfg = variant(dir.path(), "upstream_ellipse", &["shoot", "constant"]);
    let out_dir = dir.path().join("out");
    let out = run_into(&cfg, &out_dir, &["--no-plot"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    assert!(out_dir.join("shoot.json").exists());
    assert!(!out_dir.join("constant.json").exists());
    assert!(!out_dir.join("plot.svg").exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "no_current_disk", &["shoot", "constant", "brute_force"]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_into(&cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run_into(&cfg, &b, &[]).status.code(), Some(0));
    for file in ["shoot.json", "constant.json", "brute_force.json", "shoot.csv", "constant.csv", "plot.svg"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }
}

#[test]
fn csv_reingest_recomputes_the_reported_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = variant(dir.path(), "upstream_ellipse", &["shoot", "analytic_example"]);
    let out_dir = dir.path().join("out");
    assert_eq!(run_into(&cfg_path, &out_dir, &["--no-plot"]).status.code(), Some(0));
    let scenario = RunConfig::load(&cfg_path).unwrap().to_scenario();
    for solver in ["shoot", "analytic_example"] {
        let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join(format!("{solver}.json"))).unwrap()).unwrap();
        let samples = read_pmp_csv(fs::File::open(out_dir.join(format!("{solver}.csv"))).unwrap()).unwrap();
        let again = serde_json::to_value(diagnostics(&samples, &scenario.set, &scenario.field)).unwrap();
        for key in ["max_hamiltonian_residual", "max_orthogonality_residual", "max_boundary_residual", "max_zne_residual"] {
            let (was, now) = (report["diagnostics"][key].as_f64().unwrap(), again[key].as_f64().unwrap());
            assert!((was - now).abs() <= 1e-12, "{solver} {key}: {was} vs {now}");
        }
        assert_eq!(report["diagnostics"]["normality"], again["normality"]);
    }
}

#[test]
fn compare_agreement_disagreement_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let up = dir.path().join("up");
    let cfg = variant(dir.path(), "upstream_ellipse", &["shoot", "analytic_example", "brute_force"]);
    assert_eq!(run_into(&cfg, &up, &["--no-plot"]).status.code(), Some(0));
    let (shoot, analytic, brute) = (up.join("shoot.json"), up.join("analytic_example.json"), up.join("brute_force.json"));

    let out = zermelo(&["compare", s(&shoot), s(&analytic)]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let table = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(table.contains("shoot") && table.contains("analytic_example") && table.contains("normal"));
    assert_eq!(zermelo(&["compare", s(&shoot), s(&brute)]).status.code(), Some(0));

    let mut tampered: Value = serde_json::from_str(&fs::read_to_string(&analytic).unwrap()).unwrap();
    tampered["t_f"] = Value::from(tampered["t_f"].as_f64().unwrap() + 1e-4);
    let fake = dir.path().join("tampered.json");
    fs::write(&fake, tampered.to_string()).unwrap();
    let out = zermelo(&["compare", s(&shoot), s(&fake)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("disagreement"));

    let down = dir.path().join("down");
    let cfg = variant(dir.path(), "downstream_ellipse", &["analytic_example"]);
    assert_eq!(run_into(&cfg, &down, &["--no-plot"]).status.code(), Some(0));
    let out = zermelo(&["compare", s(&shoot), s(&down.join("analytic_example.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario hash"));

    assert_eq!(zermelo(&["compare", s(&shoot)]).status.code(), Some(3));
}

#[test]
fn plot_contains_the_construction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "upstream_ellipse", &["shoot", "analytic_example"]);
    let out_dir = dir.path().join("out");
    assert_eq!(run_into(&cfg, &out_dir, &[]).status.code(), Some(0));
    let svg = fs::read_to_string(out_dir.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains(r#"stroke="black""#), "optimal arc");
    assert!(svg.contains(r#"stroke="green""#), "constant-control route");
    assert!(svg.contains(">x*</text>"));
    assert_eq!(svg.matches("<line x1=").count() - svg.matches(r#"<line x1="10""#).count(), 144, "12 × 12 arrows");
}

#[test]
fn examples_lists_and_writes_every_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = zermelo(&["examples", "--write", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let listing = String::from_utf8_lossy(&out.stdout).to_string();
    for b in SCENARIOS {
        assert!(listing.contains(b.name));
        let written = dir.path().join(format!("{}.json", b.name));
        assert_eq!(fs::read_to_string(&written).unwrap(), fs::read_to_string(scenario_file(b.name)).unwrap());
    }
}

#[test]
fn bundled_files_match_the_library_scenarios() {
    let library = bundled::all();
    assert_eq!(library.len(), SCENARIOS.len());
    for sc in library {
        let b = SCENARIOS.iter().find(|b| b.name == sc.name).unwrap_or_else(|| panic!("{} not shipped", sc.name));
        let cfg = RunConfig::parse(b.json, "unused").unwrap();
        assert_eq!(cfg.name, sc.name);
        let parsed = cfg.to_scenario();
        assert_eq!(parsed.start, sc.start, "{}", sc.name);
        assert_eq!(parsed.target, sc.target, "{}", sc.name);
        assert_eq!(parsed.horizon, sc.horizon, "{}", sc.name);
        for k in 0..16 {
            let p = Vec2::from_angle(k as f64 * 0.4) * 1.7;
            assert_eq!(parsed.set.support(p), sc.set.support(p), "{} set", sc.name);
            let x = Vec2::new(k as f64 * 0.3 - 2.0, 1.0 - k as f64 * 0.2);
            assert_eq!(parsed.field.eval(x), sc.field.eval(x), "{} current", sc.name);
            assert_eq!(parsed.field.jacobian(x), sc.field.jacobian(x), "{} jacobian", sc.name);
        }
    }
}
