use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use zcl_cli::{run, EXIT_IO, EXIT_OK, EXIT_RESIDUAL, EXIT_VALIDATION};
use zcl_core::{Grid, StreamFunction, VectorField};

/// Value of `mc_extended` for the default config at `s = 1.5`, recorded from the
/// first run after the oracle cross-checks passed.
const REFERENCE_MC_EXTENDED: f64 = -2.7414852473306819e1;

fn zcl(dir: &Path, args: &[&str]) -> (i32, String) {
    zcl_env(dir, args, &[])
}

fn zcl_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> (i32, String) {
    let out = dir.join("out.txt");
    let _ = fs::remove_file(&out);
    let mut argv = vec!["zcl".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.extend(["--out".to_string(), out.to_string_lossy().into_owned()]);
    let env: Vec<(String, String)> = env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let code = run(argv, env);
    (code, fs::read_to_string(&out).unwrap_or_default())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn surface_export() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = zcl(dir.path(), &["surface", "--set", "surface.s=1", "--resolution", "33x8"]);
    assert_eq!(code, EXIT_OK);
    let d: f64 = text.lines().find_map(|l| l.strip_prefix("# d=")).unwrap().parse().unwrap();
    assert!((d - FRAC_PI_2).abs() < 1e-12);
    assert_eq!(data_rows(&text)[0], "r,c1,c2,c1_dot,c2_dot");

    let (code, text) = zcl(dir.path(), &["surface", "--set", "surface.s=1.5", "--resolution", "65x8"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(data_rows(&text).len(), 1 + 65);
    assert!(text.contains("# config surface.s=1.5"));
}

#[test]
fn missing_or_bad_config_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(zcl(dir.path(), &["surface"]).0, EXIT_VALIDATION);
    assert_eq!(zcl(dir.path(), &["surface", "--set", "surface.s=0.5"]).0, EXIT_VALIDATION);
    assert_eq!(zcl(dir.path(), &["surface", "--set", "nope=1"]).0, EXIT_VALIDATION);
    assert_eq!(zcl(dir.path(), &["frobnicate"]).0, EXIT_VALIDATION);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "surface.s = 1.5\nsurface.colour = red\n").unwrap();
    assert_eq!(zcl(dir.path(), &["surface", "--config", cfg.to_str().unwrap()]).0, EXIT_VALIDATION);
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.cfg");
    assert_eq!(zcl(dir.path(), &["surface", "--config", missing.to_str().unwrap()]).0, EXIT_IO);
    let argv = ["zcl", "surface", "--set", "surface.s=1", "--out", "/nonexistent-dir/x.csv"];
    assert_eq!(run(argv, Vec::new()), EXIT_IO);
    let (code, _) = zcl(dir.path(), &["verify", "--set", "surface.s=1", "--set", "perturbation.source=/nonexistent/psi.csv"]);
    assert_eq!(code, EXIT_IO);
}

#[test]
fn precedence_defaults_file_env_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# reference\nsurface.s = 1.5\ngrid.n_r = 33\ngrid.n_theta = 8\n").unwrap();
    let c = cfg.to_str().unwrap();
    let rows = |args: &[&str], env: &[(&str, &str)]| data_rows(&zcl_env(dir.path(), args, env).1).len() - 1;
    assert_eq!(rows(&["surface", "--config", c], &[]), 33);
    assert_eq!(rows(&["surface", "--config", c], &[("ZCL_GRID_N_R", "41")]), 41);
    assert_eq!(rows(&["surface", "--config", c, "--resolution", "49x8"], &[("ZCL_GRID_N_R", "41")]), 49);
}

#[test]
fn verify_reference_and_zero_fields_pass() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = zcl(dir.path(), &["verify", "--set", "surface.s=1.5"]);
    assert_eq!(code, EXIT_OK, "{text}");
    let report = json(&text);
    assert_eq!(report["passed"], true);
    for (name, value) in report["residuals"].as_object().unwrap() {
        assert!(value.as_f64().unwrap() < 1e-6, "{name} = {value}");
    }
    assert_eq!(report["config"]["surface.s"], "1.5");

    let zero = ["verify", "--set", "surface.s=1.5", "--set", "flow.amplitude=0", "--set", "perturbation.amplitude=0"];
    let (code, text) = zcl(dir.path(), &zero);
    assert_eq!(code, EXIT_OK);
    for value in json(&text)["residuals"].as_object().unwrap().values() {
        assert_eq!(value.as_f64().unwrap(), 0.0);
    }
}

fn noise(seed: u64) -> impl FnMut() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move || rng.random_range(-1e-3..1e-3)
}

#[test]
fn verify_rejects_corrupted_perturbations() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(1.5, 65, 32).unwrap();
    let res = ["--resolution", "65x32", "--set", "surface.s=1.5"];

    // noisy ψ: still divergence-free, but no longer supported in the band
    let mut n = noise(1);
    let mut psi = StreamFunction::from_fn(grid.clone(), |r, t| (-4.0 * r * r).exp() * (2.0 * t).cos());
    psi.psi.mapv_inplace(|v| v + n());
    let path = dir.path().join("psi.csv");
    psi.write_csv(fs::File::create(&path).unwrap()).unwrap();
    let source = format!("perturbation.source={}", path.display());
    let (code, text) = zcl(dir.path(), &[&["verify", "--set", &source], &res[..]].concat());
    assert_eq!(code, EXIT_RESIDUAL);
    assert!(json(&text)["failures"].as_array().unwrap().contains(&Value::from("support")));

    // noise injected into a band-supported velocity field breaks divergence
    let mut n = noise(2);
    let b = zcl_core::RadialBump { center: 0.0, half_width: 0.7 * grid.d() };
    let mut u = VectorField::from_fn(grid.clone(), |r, t| (0.0, b.eval(r) * (1.0 + (2.0 * t).sin())));
    let g = grid.r_nodes().mapv(|r| b.eval(r));
    for ((i, _), v) in u.comp_r.indexed_iter_mut() {
        *v += g[i] * n();
    }
    let path = dir.path().join("field.csv");
    u.write_csv(fs::File::create(&path).unwrap()).unwrap();
    let source = format!("perturbation.source={}", path.display());
    let (code, text) = zcl(dir.path(), &[&["verify", "--set", &source], &res[..]].concat());
    assert_eq!(code, EXIT_RESIDUAL);
    assert!(json(&text)["failures"].as_array().unwrap().contains(&Value::from("divergence")));
}

#[test]
fn mc_report_shape_and_regression() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = zcl(dir.path(), &["mc", "--set", "surface.s=1.5"]);
    assert_eq!(code, EXIT_OK);
    let r = json(&text);
    for key in ["mc_base", "mc_extended", "omega_xy", "omega_bracket", "gap", "residuals", "grid", "params", "config"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    let mc = r["mc_extended"].as_f64().unwrap();
    assert!((mc - REFERENCE_MC_EXTENDED).abs() < 1e-9 * REFERENCE_MC_EXTENDED.abs(), "{mc}");
}

#[test]
fn mc_at_zero_a_reproduces_base() {
    let dir = tempfile::tempdir().unwrap();
    let (_, text) = zcl(dir.path(), &["mc", "--set", "surface.s=1.5", "--set", "coriolis.a=0"]);
    let r = json(&text);
    let (base, ext) = (r["mc_base"].as_f64().unwrap(), r["mc_extended"].as_f64().unwrap());
    assert!((ext - base).abs() <= 1e-12 * base.abs());
}

#[test]
fn second_slot_scalar_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let (_, plain) = zcl(dir.path(), &["mc", "--set", "surface.s=1.5"]);
    let (code, with_b) = zcl(dir.path(), &["mc", "--set", "surface.s=1.5", "--set", "coriolis.b=3"]);
    assert_eq!(code, EXIT_OK);
    let (plain, with_b) = (json(&plain), json(&with_b));
    assert_eq!(plain["mc_extended"], with_b["mc_extended"]);
    assert_eq!(with_b["config"]["coriolis.b"], "3");
}

#[test]
fn search_with_zero_budget() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["search", "--set", "surface.s=1.5", "--resolution", "65x32", "--set", "search.budget=0"];
    let (code, text) = zcl(dir.path(), &args);
    assert_eq!(code, EXIT_OK);
    let r = json(&text);
    assert_eq!(r["converged"], false);
    assert_eq!(r["evaluations"], 0);
    assert_eq!(r["seed"], 42);
}

#[test]
fn search_is_reproducible_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["search", "--set", "surface.s=1.5", "--resolution", "65x32", "--set", "search.budget=120", "--seed", "9"];
    let (_, a) = zcl(dir.path(), &args);
    let (_, b) = zcl(dir.path(), &args);
    assert_eq!(a, b);
    assert_eq!(json(&a)["seed"], 9);
}

#[test]
fn scan_table() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "scan", "--set", "surface.s=1.5", "--resolution", "65x32",
        "--set", "scan.s=0.5,1.5", "--set", "scan.a=0,1", "--set", "scan.F=bump", "--set", "scan.m=2",
    ];
    let (code, text) = zcl(dir.path(), &args);
    assert_eq!(code, EXIT_OK);
    let rows = data_rows(&text);
    assert_eq!(rows[0], zcl_core::search::SCAN_HEADER);
    // the s = 0.5 rows fail and are skipped
    assert_eq!(rows.len(), 3);
    let col = |row: &str, k: usize| row.split(',').nth(k).unwrap().parse::<f64>().unwrap();
    assert_eq!(col(rows[1], 1), 0.0);
    // a = 0 and a = 1 differ by the gap column of the a = 1 row
    let (ext0, ext1, gap1) = (col(rows[1], 5), col(rows[2], 5), col(rows[2], 6));
    assert!((ext1 - ext0 - gap1).abs() < 1e-12 * ext0.abs());
}
