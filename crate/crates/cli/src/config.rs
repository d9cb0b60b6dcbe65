//! Run configuration.
//!
//! Grammar of a config file, one entry per line:
//!
//! ```text
//! # comment
//! key = value
//! ```
//!
//! Keys are dotted names from [`DEFAULTS`]; whitespace around keys and values
//! is trimmed, blank lines and `#` lines are skipped. Unknown or repeated keys
//! are errors. Lists are comma-separated.
//!
//! Sources override each other in the order defaults, file, environment
//! (`ZCL_` + key upper-cased with `.` replaced by `_`, e.g. `ZCL_GRID_N_R`),
//! command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::warn;
use zcl_core::curvature::residual;
use zcl_core::search::{BandWindow, FlowTemplate};

use crate::CliError;

/// Every accepted key with its default (`None` when required).
pub const DEFAULTS: &[(&str, Option<&str>)] = &[
    ("surface.s", None),
    ("grid.n_r", Some("129")),
    ("grid.n_theta", Some("128")),
    // fraction of d
    ("support.delta", Some("0.1")),
    // bump, cos_window, or a CSV path with columns r,F
    ("flow.F", Some("bump")),
    ("flow.amplitude", Some("-1")),
    // centre and half-width as fractions of L = d - delta
    ("flow.center", Some("0.1")),
    ("flow.width", Some("0.8")),
    ("coriolis.a", Some("1")),
    // mode, or a CSV path with columns r,theta,psi or r,theta,comp_r,comp_theta
    ("perturbation.source", Some("mode")),
    ("perturbation.m", Some("2")),
    ("perturbation.amplitude", Some("1")),
    ("perturbation.center", Some("-0.05")),
    ("perturbation.width", Some("0.8")),
    ("perturbation.m_list", Some("1,2,3,4,5,6")),
    ("perturbation.radial_basis", Some("4")),
    ("search.budget", Some("2000")),
    ("search.restarts", Some("8")),
    ("scan.s", Some("1,1.5,2")),
    ("scan.a", Some("0,1")),
    ("scan.F", Some("bump,cos_window")),
    ("scan.m", Some("1,2,3")),
    ("tolerance.omega_zonal", Some("1e-9")),
    ("tolerance.omega_closed_form", Some("1e-8")),
    ("tolerance.gap_closed_form", Some("1e-8")),
    ("tolerance.mc_nabla_vs_base", Some("1e-6")),
    ("tolerance.mc_extended_consistency", Some("1e-12")),
    ("tolerance.jacobi", Some("1e-7")),
    ("tolerance.stationarity", Some("1e-8")),
    ("tolerance.divergence", Some("1e-8")),
    ("tolerance.support", Some("1e-6")),
    ("seed", Some("42")),
    // empty means stdout
    ("output.path", Some("")),
];

/// Accepted so configs written for the extension's second slot still load.
const IGNORED: &[&str] = &["coriolis.b"];

pub const RESIDUAL_NAMES: &[&str] = &[
    residual::OMEGA_ZONAL,
    residual::OMEGA_CLOSED_FORM,
    residual::GAP_CLOSED_FORM,
    residual::MC_NABLA_VS_BASE,
    residual::MC_EXTENDED_CONSISTENCY,
    residual::JACOBI,
    residual::STATIONARITY,
    residual::DIVERGENCE,
    residual::SUPPORT,
];

fn known(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key) || IGNORED.contains(&key)
}

pub fn env_name(key: &str) -> String {
    format!("ZCL_{}", key.to_ascii_uppercase().replace('.', "_"))
}

/// Parses the key=value text of a config file.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !known(k) {
            return Err(CliError::Config(format!("line {}: unknown key {k}", n + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(CliError::Config(format!("line {}: key {k} repeated", n + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Raw string values after all overrides.
#[derive(Debug, Clone, Default)]
pub struct Layers {
    values: BTreeMap<String, String>,
}

impl Layers {
    pub fn defaults() -> Self {
        let values = DEFAULTS.iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v.to_string()))).collect();
        Self { values }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !known(key) {
            return Err(CliError::Config(format!("unknown key {key}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        for (k, v) in parse_entries(&text)? {
            self.values.insert(k, v);
        }
        Ok(())
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) {
        let names: BTreeMap<String, &str> = DEFAULTS
            .iter()
            .map(|(k, _)| *k)
            .chain(IGNORED.iter().copied())
            .map(|k| (env_name(k), k))
            .collect();
        for (name, value) in vars {
            if !name.starts_with("ZCL_") {
                continue;
            }
            match names.get(&name) {
                Some(key) => {
                    self.values.insert(key.to_string(), value);
                }
                None => warn!("environment variable {name} does not name a config key; ignored"),
            }
        }
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        RunConfig::from_values(self.values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowSource {
    Template(FlowTemplate),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationSource {
    Mode,
    Csv(PathBuf),
}

/// Validated configuration. `values` keeps the resolved strings for embedding
/// in reports.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub s: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub delta: f64,
    pub flow: FlowSource,
    pub flow_amplitude: f64,
    pub flow_window: BandWindow,
    pub a: f64,
    pub perturbation: PerturbationSource,
    pub perturbation_m: u32,
    pub perturbation_amplitude: f64,
    pub perturbation_window: BandWindow,
    pub m_list: Vec<u32>,
    pub radial_basis: usize,
    pub budget: usize,
    pub restarts: usize,
    pub scan_s: Vec<f64>,
    pub scan_a: Vec<f64>,
    pub scan_flows: Vec<FlowTemplate>,
    pub scan_m: Vec<u32>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub values: BTreeMap<String, String>,
}

fn parse<T: std::str::FromStr>(values: &BTreeMap<String, String>, key: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    let raw = values.get(key).ok_or_else(|| CliError::Config(format!("missing required key {key}")))?;
    raw.parse::<T>().map_err(|e| CliError::Config(format!("{key} = {raw:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(values: &BTreeMap<String, String>, key: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let raw = values.get(key).ok_or_else(|| CliError::Config(format!("missing required key {key}")))?;
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| CliError::Config(format!("{key}: {s:?}: {e}"))))
        .collect()
}

fn finite(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{key} must be finite")))
    }
}

impl RunConfig {
    fn from_values(values: BTreeMap<String, String>) -> Result<Self, CliError> {
        let v = &values;
        let s = finite("surface.s", parse(v, "surface.s")?)?;
        if s < 1.0 {
            return Err(CliError::Config(format!("surface.s = {s} must be at least 1")));
        }
        let n_r: usize = parse(v, "grid.n_r")?;
        let n_theta: usize = parse(v, "grid.n_theta")?;
        if n_r < 8 || n_theta < 4 || n_theta % 2 != 0 {
            return Err(CliError::Config(format!("resolution {n_r}x{n_theta}: need n_r >= 8 and even n_theta >= 4")));
        }
        let delta = finite("support.delta", parse(v, "support.delta")?)?;
        if !(0.0..1.0).contains(&delta) {
            return Err(CliError::Config(format!("support.delta = {delta} must lie in [0, 1)")));
        }
        let flow_raw = &v["flow.F"];
        let flow = match FlowTemplate::parse(flow_raw) {
            Some(t) => FlowSource::Template(t),
            None if flow_raw.ends_with(".csv") => FlowSource::Csv(PathBuf::from(flow_raw)),
            None => {
                return Err(CliError::Config(format!("flow.F = {flow_raw:?}: expected bump, cos_window or a .csv path")))
            }
        };
        let flow_amplitude = finite("flow.amplitude", parse(v, "flow.amplitude")?)?;
        if flow_amplitude > 0.0 {
            return Err(CliError::Config(format!("flow.amplitude = {flow_amplitude} must be <= 0 (west-facing)")));
        }
        let flow_window = window(v, "flow")?;
        let a = finite("coriolis.a", parse(v, "coriolis.a")?)?;
        let source = &v["perturbation.source"];
        let perturbation = if source == "mode" {
            PerturbationSource::Mode
        } else if source.ends_with(".csv") {
            PerturbationSource::Csv(PathBuf::from(source))
        } else {
            return Err(CliError::Config(format!("perturbation.source = {source:?}: expected mode or a .csv path")));
        };
        let perturbation_m = parse(v, "perturbation.m")?;
        let perturbation_amplitude = finite("perturbation.amplitude", parse(v, "perturbation.amplitude")?)?;
        let perturbation_window = window(v, "perturbation")?;
        let m_list: Vec<u32> = parse_list(v, "perturbation.m_list")?;
        if m_list.is_empty() {
            return Err(CliError::Config("perturbation.m_list is empty".into()));
        }
        let radial_basis: usize = parse(v, "perturbation.radial_basis")?;
        if radial_basis == 0 {
            return Err(CliError::Config("perturbation.radial_basis must be positive".into()));
        }
        let restarts: usize = parse(v, "search.restarts")?;
        if restarts == 0 {
            return Err(CliError::Config("search.restarts must be positive".into()));
        }
        let scan_s: Vec<f64> = parse_list(v, "scan.s")?;
        let scan_flows = parse_list::<String>(v, "scan.F")?
            .iter()
            .map(|id| FlowTemplate::parse(id).ok_or_else(|| CliError::Config(format!("scan.F: unknown template {id:?}"))))
            .collect::<Result<_, _>>()?;
        let mut tolerances = BTreeMap::new();
        for name in RESIDUAL_NAMES {
            let key = format!("tolerance.{name}");
            let t = finite(&key, parse(v, &key)?)?;
            if t < 0.0 {
                return Err(CliError::Config(format!("{key} must be non-negative")));
            }
            tolerances.insert(name.to_string(), t);
        }
        let output = Some(&v["output.path"]).filter(|p| !p.is_empty()).map(PathBuf::from);
        if v.contains_key("coriolis.b") {
            warn!("coriolis.b is ignored: the perturbation's extension component does not enter the curvature");
        }
        Ok(Self {
            s,
            n_r,
            n_theta,
            delta,
            flow,
            flow_amplitude,
            flow_window,
            a,
            perturbation,
            perturbation_m,
            perturbation_amplitude,
            perturbation_window,
            m_list,
            radial_basis,
            budget: parse(v, "search.budget")?,
            restarts,
            scan_s,
            scan_a: parse_list(v, "scan.a")?,
            scan_flows,
            scan_m: parse_list(v, "scan.m")?,
            tolerances,
            seed: parse(v, "seed")?,
            output,
            values,
        })
    }
}

fn window(v: &BTreeMap<String, String>, prefix: &str) -> Result<BandWindow, CliError> {
    let center = finite(&format!("{prefix}.center"), parse(v, &format!("{prefix}.center"))?)?;
    let width = finite(&format!("{prefix}.width"), parse(v, &format!("{prefix}.width"))?)?;
    if !(width > 0.0) || center.abs() + width > 1.0 + 1e-12 {
        return Err(CliError::Config(format!(
            "{prefix} window centre {center}, half-width {width} leaves the band (fractions of d - delta)"
        )));
    }
    Ok(BandWindow { center, width })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Layers {
        let mut l = Layers::defaults();
        l.set("surface.s", "1.5").unwrap();
        l
    }

    #[test]
    fn file_grammar() {
        let e = parse_entries("# c\n\n surface.s = 2 \ngrid.n_r=65\n").unwrap();
        assert_eq!(e, vec![("surface.s".into(), "2".into()), ("grid.n_r".into(), "65".into())]);
        assert!(parse_entries("surface.s 2").is_err());
        assert!(parse_entries("surface.t = 2").is_err());
        assert!(parse_entries("seed=1\nseed=2").is_err());
    }

    #[test]
    fn surface_s_is_required() {
        let err = Layers::defaults().resolve().unwrap_err();
        assert!(err.to_string().contains("surface.s"));
    }

    #[test]
    fn env_overrides_defaults() {
        let mut l = base();
        l.apply_env([("ZCL_GRID_N_R".to_string(), "65".to_string()), ("HOME".into(), "/".into())]);
        let c = l.resolve().unwrap();
        assert_eq!(c.n_r, 65);
        assert_eq!(env_name("tolerance.omega_zonal"), "ZCL_TOLERANCE_OMEGA_ZONAL");
    }

    #[test]
    fn validation() {
        for (k, v) in [
            ("surface.s", "0.5"),
            ("flow.amplitude", "0.2"),
            ("grid.n_theta", "127"),
            ("flow.F", "sawtooth"),
            ("flow.width", "0.95"),
            ("support.delta", "1"),
            ("search.restarts", "0"),
            ("seed", "-1"),
        ] {
            let mut l = base();
            l.set(k, v).unwrap();
            assert!(l.resolve().is_err(), "{k} = {v} accepted");
        }
    }

    #[test]
    fn defaults_resolve() {
        let c = base().resolve().unwrap();
        assert_eq!((c.n_r, c.n_theta), (129, 128));
        assert_eq!(c.flow, FlowSource::Template(FlowTemplate::Bump));
        assert_eq!(c.m_list, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(c.tolerances.len(), RESIDUAL_NAMES.len());
        assert_eq!(c.output, None);
        assert_eq!(c.values["surface.s"], "1.5");
    }
}
