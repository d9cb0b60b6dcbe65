use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use zcl_core::curvature::{mc_extended, verify_all_identities, ExtendedVector, MCReport};
use zcl_core::fields::{from_stream, zonal};
use zcl_core::io::to_json_string;
use zcl_core::search::{
    find_positive_mc_with_restarts, scan, scan_points, FlowSpec, ModeSpec, PerturbationFamily, ScanSettings,
    SearchResult,
};
use zcl_core::surface::build_profile;
use zcl_core::{Grid, StreamFunction, VectorField, ZonalSpec};

use crate::config::{FlowSource, PerturbationSource, RunConfig};
use crate::{CliError, Command, EXIT_OK, EXIT_RESIDUAL};

/// Text to write and the exit code to return after writing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, code: EXIT_OK }
    }
}

pub fn execute(command: Command, config: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        Command::Surface => cmd_surface(config),
        Command::Verify => cmd_verify(config),
        Command::Mc => cmd_mc(config),
        Command::Search => cmd_search(config),
        Command::Scan => cmd_scan(config),
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = to_json_string(value).map_err(|e| CliError::Validation(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn config_comments(config: &RunConfig) -> String {
    config.values.iter().map(|(k, v)| format!("# config {k}={v}\n")).collect()
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

struct Setup {
    grid: Arc<Grid>,
    flow: ZonalSpec,
    margin: f64,
}

fn setup(config: &RunConfig) -> Result<Setup, CliError> {
    let grid = Grid::new(config.s, config.n_r, config.n_theta)?;
    let margin = config.delta * grid.d();
    let flow = match &config.flow {
        FlowSource::Template(template) => {
            FlowSpec { template: *template, amplitude: config.flow_amplitude, window: config.flow_window }
                .build(grid.clone(), margin)?
        }
        FlowSource::Csv(path) => ZonalSpec::read_csv(grid.clone(), open(path)?, margin, true)?,
    };
    Ok(Setup { grid, flow, margin })
}

fn perturbation(config: &RunConfig, setup: &Setup) -> Result<VectorField, CliError> {
    match &config.perturbation {
        PerturbationSource::Mode => Ok(ModeSpec {
            m: config.perturbation_m,
            amplitude: config.perturbation_amplitude,
            window: config.perturbation_window,
        }
        .build(setup.grid.clone(), setup.margin)),
        PerturbationSource::Csv(path) => {
            let header = BufReader::new(open(path)?)
                .lines()
                .map(|l| l.map_err(|e| CliError::Io(format!("{}: {e}", path.display()))))
                .find(|l| l.as_ref().map_or(true, |l| !l.trim_start().starts_with('#')))
                .transpose()?
                .unwrap_or_default();
            let grid = setup.grid.clone();
            if header.replace(' ', "") == "r,theta,psi" {
                Ok(from_stream(&StreamFunction::read_csv(grid, open(path)?)?))
            } else {
                Ok(VectorField::read_csv(grid, open(path)?)?)
            }
        }
    }
}

/// Profile CSV with `#` metadata (including the resolved config) above the header.
pub fn cmd_surface(config: &RunConfig) -> Result<Outcome, CliError> {
    let profile = build_profile(config.s, config.n_r)?;
    let mut buf = config_comments(config).into_bytes();
    profile.write_csv(&mut buf)?;
    Ok(Outcome::ok(String::from_utf8(buf).expect("CSV output is UTF-8")))
}

#[derive(Debug, Serialize)]
struct VerifyReport<'a> {
    passed: bool,
    failures: Vec<String>,
    residuals: &'a BTreeMap<String, f64>,
    tolerances: &'a BTreeMap<String, f64>,
    config: &'a BTreeMap<String, String>,
}

/// Residual report; exit code 2 when any residual exceeds its tolerance.
pub fn cmd_verify(config: &RunConfig) -> Result<Outcome, CliError> {
    let setup = setup(config)?;
    let y = perturbation(config, &setup)?;
    let residuals = verify_all_identities(&setup.flow, config.a, &y)?;
    let failures = residuals.failures(|name| config.tolerances.get(name).copied().unwrap_or(0.0));
    let report = VerifyReport {
        passed: failures.is_empty(),
        failures,
        residuals: &residuals.residuals,
        tolerances: &config.tolerances,
        config: &config.values,
    };
    let code = if report.passed { EXIT_OK } else { EXIT_RESIDUAL };
    Ok(Outcome { text: json(&report)?, code })
}

#[derive(Debug, Serialize)]
struct WithConfig<'a, T: Serialize> {
    #[serde(flatten)]
    body: &'a T,
    config: &'a BTreeMap<String, String>,
}

pub fn mc_report(config: &RunConfig) -> Result<MCReport, CliError> {
    let setup = setup(config)?;
    let y = perturbation(config, &setup)?;
    let x = ExtendedVector::new(zonal(&setup.flow)?, config.a);
    Ok(mc_extended(&x, &ExtendedVector::new(y, 0.0))?)
}

/// `MCReport` of `((Z, a), (Y, 0))` as JSON.
pub fn cmd_mc(config: &RunConfig) -> Result<Outcome, CliError> {
    let report = mc_report(config)?;
    Ok(Outcome::ok(json(&WithConfig { body: &report, config: &config.values })?))
}

pub fn search_result(config: &RunConfig) -> Result<SearchResult, CliError> {
    let setup = setup(config)?;
    let basis = PerturbationFamily::default_basis(&setup.grid, setup.margin, config.radial_basis);
    let family = PerturbationFamily::new(config.m_list.clone(), basis);
    Ok(find_positive_mc_with_restarts(&setup.flow, config.a, &family, config.budget, config.seed, config.restarts)?)
}

/// `SearchResult` as JSON.
pub fn cmd_search(config: &RunConfig) -> Result<Outcome, CliError> {
    let result = search_result(config)?;
    Ok(Outcome::ok(json(&WithConfig { body: &result, config: &config.values })?))
}

/// Scan table as CSV; failed rows are logged and left out.
pub fn cmd_scan(config: &RunConfig) -> Result<Outcome, CliError> {
    let settings = ScanSettings {
        n_r: config.n_r,
        n_theta: config.n_theta,
        delta: config.delta,
        flow_amplitude: config.flow_amplitude,
        flow_window: config.flow_window,
        perturbation_amplitude: config.perturbation_amplitude,
        perturbation_window: config.perturbation_window,
        seed: config.seed,
    };
    let points = scan_points(&config.scan_s, &config.scan_a, &config.scan_flows, &config.scan_m);
    let table = scan(&settings, &points);
    let mut buf = config_comments(config).into_bytes();
    table.write_csv(&mut buf)?;
    Ok(Outcome::ok(String::from_utf8(buf).expect("CSV output is UTF-8")))
}
