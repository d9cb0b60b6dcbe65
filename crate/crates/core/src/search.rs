//! Search for perturbations with positive extended curvature, and parameter
//! scans over `(s, a, F, m)`.
//!
//! Perturbations are stream functions
//! `ψ = Σ_{k,m} [α_{k,m} cos mθ + β_{k,m} sin mθ] g_k(r)` with band-supported
//! windows `g_k`. The objective is `mc_extended` at `‖Y‖ = 1`, maximised by
//! Nelder–Mead from seeded random starts.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use log::warn;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{self, mc_extended_value, ExtendedVector, MCReport};
use crate::error::{Error, Result};
use crate::fields::{from_stream, zonal, RadialBump, StreamFunction, VectorField, ZonalSpec};
use crate::io::fmt17;
use crate::surface::Grid;

pub const DEFAULT_RESTARTS: usize = 8;
/// Number of windows in the default radial basis.
pub const DEFAULT_RADIAL_BASIS: usize = 4;

/// Radial templates for the zonal flow `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowTemplate {
    Bump,
    CosWindow,
}

impl FlowTemplate {
    pub fn id(&self) -> &'static str {
        match self {
            FlowTemplate::Bump => "bump",
            FlowTemplate::CosWindow => "cos_window",
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        match id {
            "bump" => Some(FlowTemplate::Bump),
            "cos_window" => Some(FlowTemplate::CosWindow),
            _ => None,
        }
    }
}

/// Placement of a window inside the band `|r| < L`, `L = d − δ`, with `center`
/// and `width` (half-width) given as fractions of `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandWindow {
    pub center: f64,
    pub width: f64,
}

impl BandWindow {
    pub fn on(&self, grid: &Grid, margin: f64) -> RadialBump {
        let half = grid.d() - margin;
        RadialBump { center: self.center * half, half_width: self.width * half }
    }
}

/// A zonal flow built from a template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub template: FlowTemplate,
    pub amplitude: f64,
    pub window: BandWindow,
}

impl FlowSpec {
    pub fn build(&self, grid: Arc<Grid>, margin: f64) -> Result<ZonalSpec> {
        let w = self.window.on(&grid, margin);
        match self.template {
            FlowTemplate::Bump => ZonalSpec::bump(grid, self.amplitude, w, margin),
            FlowTemplate::CosWindow => ZonalSpec::cos_window(grid, self.amplitude, w, margin),
        }
    }
}

/// A single-mode perturbation `ψ = A·g(r)·cos mθ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub m: u32,
    pub amplitude: f64,
    pub window: BandWindow,
}

impl ModeSpec {
    pub fn build(&self, grid: Arc<Grid>, margin: f64) -> VectorField {
        let w = self.window.on(&grid, margin);
        from_stream(&StreamFunction::mode(grid, self.m, w, self.amplitude))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFamily {
    pub m_list: Vec<u32>,
    pub radial_basis: Vec<RadialBump>,
    /// Layout: for each radial window `k`, for each `m`, the pair `[α, β]`.
    pub coefficients: Vec<f64>,
}

impl PerturbationFamily {
    pub fn new(m_list: Vec<u32>, radial_basis: Vec<RadialBump>) -> Self {
        let n = 2 * m_list.len() * radial_basis.len();
        Self { m_list, radial_basis, coefficients: vec![0.0; n] }
    }

    /// `n` overlapping windows spanning the band of half-width `L = d − margin`:
    /// centres evenly spaced in `[−0.3L, 0.3L]`, half-width `0.7L` each.
    pub fn default_basis(grid: &Grid, margin: f64, n: usize) -> Vec<RadialBump> {
        let half = grid.d() - margin;
        (0..n)
            .map(|k| {
                let t = if n == 1 { 0.0 } else { -0.3 + 0.6 * k as f64 / (n - 1) as f64 };
                RadialBump { center: t * half, half_width: 0.7 * half }
            })
            .collect()
    }

    pub fn with_default_basis(grid: &Grid, margin: f64, m_list: Vec<u32>) -> Self {
        Self::new(m_list, Self::default_basis(grid, margin, DEFAULT_RADIAL_BASIS))
    }

    pub fn dim(&self) -> usize {
        2 * self.m_list.len() * self.radial_basis.len()
    }

    pub fn stream(&self, grid: &Arc<Grid>, coefficients: &[f64]) -> Result<StreamFunction> {
        if coefficients.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                self.dim(),
                coefficients.len()
            )));
        }
        let (n_r, n_t) = grid.shape();
        let theta = grid.theta_nodes();
        let mut psi = Array2::<f64>::zeros((n_r, n_t));
        let n_m = self.m_list.len();
        for (k, window) in self.radial_basis.iter().enumerate() {
            let g = grid.r_nodes().mapv(|r| window.eval(r));
            let mut angular = Array1::<f64>::zeros(n_t);
            for (mi, &m) in self.m_list.iter().enumerate() {
                let alpha = coefficients[2 * (k * n_m + mi)];
                let beta = coefficients[2 * (k * n_m + mi) + 1];
                for (j, t) in theta.iter().enumerate() {
                    let mt = m as f64 * t;
                    angular[j] += alpha * mt.cos() + beta * mt.sin();
                }
            }
            for i in 0..n_r {
                if g[i] != 0.0 {
                    for j in 0..n_t {
                        psi[[i, j]] += g[i] * angular[j];
                    }
                }
            }
        }
        StreamFunction::new(grid.clone(), psi)
    }

    pub fn field(&self, grid: &Arc<Grid>, coefficients: &[f64]) -> Result<VectorField> {
        Ok(from_stream(&self.stream(grid, coefficients)?))
    }

    /// Rescales `coefficients` so the generated field has unit norm. `None` for
    /// coefficient vectors that generate the zero field.
    pub fn normalize(&self, grid: &Arc<Grid>, coefficients: &[f64]) -> Result<Option<Vec<f64>>> {
        let norm = self.field(grid, coefficients)?.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Ok(None);
        }
        Ok(Some(coefficients.iter().map(|c| c / norm).collect()))
    }

    /// Draw `index` of a seeded stream: standard-normal coefficients rescaled to
    /// `‖Y‖ = 1`.
    pub fn sample(&self, grid: &Arc<Grid>, seed: u64, index: u64) -> Result<Vec<f64>> {
        let raw = normal_draw(seed, index, self.dim());
        self.normalize(grid, &raw)?
            .ok_or_else(|| Error::InvalidParameter("family generates only the zero field".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Normalised so that the generated field has `‖Y‖ = 1`.
    pub best_coefficients: Vec<f64>,
    pub best_mc_extended: f64,
    pub best_mc_base: f64,
    pub evaluations: usize,
    pub seed: u64,
    pub restarts: usize,
    pub best_restart: Option<usize>,
    pub converged: bool,
}

struct Objective<'a> {
    grid: &'a Arc<Grid>,
    z: &'a VectorField,
    a: f64,
    family: &'a PerturbationFamily,
    /// Search variables are coefficients in units of `1/‖Y_i‖`, where `Y_i` is
    /// the field of the `i`-th unit coefficient, so every basis element enters
    /// with comparable weight.
    scales: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Sample {
    coefficients: Vec<f64>,
    mc_extended: f64,
    mc_base: f64,
}

impl Objective<'_> {
    /// `None` for the zero field, which has no direction to normalise.
    fn eval(&self, u: &[f64]) -> Result<Option<Sample>> {
        let coefficients: Vec<f64> = u.iter().zip(&self.scales).map(|(u, s)| u * s).collect();
        let Some(unit) = self.family.normalize(self.grid, &coefficients)? else {
            return Ok(None);
        };
        let y = self.family.field(self.grid, &unit)?;
        let parts = mc_extended_value(self.z, &y, self.a)?;
        Ok(Some(Sample { coefficients: unit, mc_extended: parts.mc_extended, mc_base: parts.mc_base }))
    }

    fn cost(&self, sample: &Option<Sample>) -> f64 {
        match sample {
            Some(s) if s.mc_extended.is_finite() => -s.mc_extended,
            _ => f64::INFINITY,
        }
    }
}

struct RestartOutcome {
    best: Option<Sample>,
    evaluations: usize,
}

/// Initial simplex edge as a fraction of the start vector's length (of 1 for a
/// zero start).
const INITIAL_STEP: f64 = 1.0;

/// Dimension-adapted coefficients (Gao & Han); the classical 1, 2, ½, ½ at `n = 2`.
struct Coefficients {
    reflect: f64,
    expand: f64,
    contract: f64,
    shrink: f64,
}

impl Coefficients {
    fn for_dim(n: usize) -> Self {
        let n = n.max(2) as f64;
        Self { reflect: 1.0, expand: 1.0 + 2.0 / n, contract: 0.75 - 0.5 / n, shrink: 1.0 - 1.0 / n }
    }
}

/// Nelder–Mead minimisation of `cost` from `start`, stopping after `budget`
/// evaluations or when the simplex values agree to round-off. Returns the
/// number of evaluations used.
fn nelder_mead(mut cost: impl FnMut(&[f64]) -> Result<f64>, start: Vec<f64>, budget: usize) -> Result<usize> {
    let n = start.len();
    let k = Coefficients::for_dim(n);
    let mut used = 0usize;
    let mut eval = |x: &[f64], used: &mut usize| -> Result<f64> {
        *used += 1;
        cost(x)
    };

    let length = start.iter().map(|v| v * v).sum::<f64>().sqrt();
    let step = INITIAL_STEP * if length > 0.0 { length } else { 1.0 };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if used >= budget {
            return Ok(used);
        }
        let mut x = start.clone();
        if i > 0 {
            x[i - 1] += step;
        }
        let f = eval(&x, &mut used)?;
        simplex.push((x, f));
    }

    while used < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (f_best, f_worst) = (simplex[0].1, simplex[n].1);
        if f_worst.is_finite() && (f_worst - f_best).abs() <= 1e-14 * f_best.abs().max(1e-300) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = along(k.reflect);
        let fr = eval(&xr, &mut used)?;
        if fr < simplex[0].1 {
            if used >= budget {
                break;
            }
            let xe = along(k.expand);
            let fe = eval(&xe, &mut used)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        if used >= budget {
            break;
        }
        let t = if fr < simplex[n].1 { k.contract * k.reflect } else { -k.contract };
        let xc = along(t);
        let fc = eval(&xc, &mut used)?;
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if used >= budget {
                break;
            }
            let x: Vec<f64> = anchor.iter().zip(&vertex.0).map(|(a, v)| a + k.shrink * (v - a)).collect();
            let f = eval(&x, &mut used)?;
            *vertex = (x, f);
        }
    }
    Ok(used)
}

/// One restart over the coordinates `block` of the search vector (the rest
/// held at zero); tracks the best sample seen, whichever vertex it came from.
fn run_restart(obj: &Objective<'_>, block: &[usize], start: Vec<f64>, budget: usize) -> Result<RestartOutcome> {
    let mut best: Option<Sample> = None;
    let mut u = vec![0.0; obj.scales.len()];
    let evaluations = nelder_mead(
        |x| {
            for (&i, &v) in block.iter().zip(x) {
                u[i] = v;
            }
            let sample = obj.eval(&u)?;
            let cost = obj.cost(&sample);
            if let Some(s) = sample {
                if best.as_ref().is_none_or(|b| s.mc_extended > b.mc_extended) {
                    best = Some(s);
                }
            }
            Ok(cost)
        },
        start,
        budget,
    )?;
    Ok(RestartOutcome { best, evaluations })
}

/// Start vector for restart `index`: standard normal draws from an independent
/// ChaCha stream, so restarts do not depend on scheduling order.
fn normal_draw(seed: u64, index: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Maximises `mc_extended` of `(Z, a)` against unit-norm members of `family`
/// with [`DEFAULT_RESTARTS`] restarts.
///
/// `Z` is axisymmetric, so the objective is a quadratic form in `Y` with no
/// coupling between different wavenumbers: on a mix of modes it is the
/// norm-weighted average of the per-mode values, and its maximum over the family
/// is attained inside a single mode block. Restart `i` therefore searches the
/// block of `m_list[i mod len]` (all radial windows, both phases), which keeps
/// each simplex small.
pub fn find_positive_mc(
    z: &ZonalSpec,
    a: f64,
    family: &PerturbationFamily,
    budget: usize,
    seed: u64,
) -> Result<SearchResult> {
    find_positive_mc_with_restarts(z, a, family, budget, seed, DEFAULT_RESTARTS)
}

/// As [`find_positive_mc`]; the budget is split evenly over `restarts`, the
/// first `budget % restarts` restarts taking one extra evaluation. Modes past
/// index `restarts − 1` in `m_list` are only searched if `restarts` covers them.
pub fn find_positive_mc_with_restarts(
    z: &ZonalSpec,
    a: f64,
    family: &PerturbationFamily,
    budget: usize,
    seed: u64,
    restarts: usize,
) -> Result<SearchResult> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is required".into()));
    }
    if family.dim() == 0 {
        return Err(Error::InvalidParameter("perturbation family is empty".into()));
    }
    for w in &family.radial_basis {
        let (lo, hi) = w.support();
        let edge = z.grid.d() - z.margin;
        if !(w.half_width > 0.0) || lo < -edge - 1e-12 || hi > edge + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "radial window [{lo}, {hi}] leaves the band [{}, {edge}]",
                -edge
            )));
        }
    }
    let grid = z.grid.clone();
    let zf = zonal(z)?;
    let mut scales = Vec::with_capacity(family.dim());
    let mut e = vec![0.0; family.dim()];
    for i in 0..family.dim() {
        e[i] = 1.0;
        let norm = family.field(&grid, &e)?.norm();
        e[i] = 0.0;
        scales.push(if norm > 0.0 { 1.0 / norm } else { 1.0 });
    }
    let obj = Objective { grid: &grid, z: &zf, a, family, scales };
    let n_m = family.m_list.len();
    let blocks: Vec<Vec<usize>> = (0..n_m)
        .map(|mi| {
            (0..family.radial_basis.len())
                .flat_map(|k| [2 * (k * n_m + mi), 2 * (k * n_m + mi) + 1])
                .collect()
        })
        .collect();

    let outcomes: Vec<Result<RestartOutcome>> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let share = budget / restarts + usize::from(i < budget % restarts);
            if share == 0 {
                return Ok(RestartOutcome { best: None, evaluations: 0 });
            }
            let block = &blocks[i % n_m];
            run_restart(&obj, block, normal_draw(seed, i as u64, block.len()), share)
        })
        .collect();

    let mut evaluations = 0;
    let mut best: Option<(usize, Sample)> = None;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        evaluations += outcome.evaluations;
        if let Some(s) = outcome.best {
            if best.as_ref().is_none_or(|(_, b)| s.mc_extended > b.mc_extended) {
                best = Some((i, s));
            }
        }
    }

    Ok(match best {
        Some((i, s)) => SearchResult {
            converged: s.mc_extended > 0.0,
            best_coefficients: s.coefficients,
            best_mc_extended: s.mc_extended,
            best_mc_base: s.mc_base,
            evaluations,
            seed,
            restarts,
            best_restart: Some(i),
        },
        None => SearchResult {
            best_coefficients: vec![0.0; family.dim()],
            best_mc_extended: 0.0,
            best_mc_base: 0.0,
            evaluations,
            seed,
            restarts,
            best_restart: None,
            converged: false,
        },
    })
}

/// Shared settings for every row of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub n_r: usize,
    pub n_theta: usize,
    /// Support margin `δ` as a fraction of `d`.
    pub delta: f64,
    pub flow_amplitude: f64,
    pub flow_window: BandWindow,
    pub perturbation_amplitude: f64,
    pub perturbation_window: BandWindow,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub s: f64,
    pub a: f64,
    pub flow: FlowTemplate,
    pub m: u32,
}

/// Cartesian product in the order `s`, `a`, `F`, `m` (last varies fastest).
pub fn scan_points(s: &[f64], a: &[f64], flows: &[FlowTemplate], m: &[u32]) -> Vec<ScanPoint> {
    let mut out = Vec::with_capacity(s.len() * a.len() * flows.len() * m.len());
    for &s in s {
        for &a in a {
            for &flow in flows {
                for &m in m {
                    out.push(ScanPoint { s, a, flow, m });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub point: ScanPoint,
    pub report: MCReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub point: ScanPoint,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub failures: Vec<ScanFailure>,
    pub seed: u64,
}

pub const SCAN_HEADER: &str = "s,a,m,F_id,mc_base,mc_extended,gap,omega_xy,converged,seed";

impl ScanTable {
    /// `converged` is `mc_extended > 0` for the row's fixed perturbation.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SCAN_HEADER}")?;
        for row in &self.rows {
            let r = &row.report;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt17(row.point.s),
                fmt17(row.point.a),
                row.point.m,
                row.point.flow.id(),
                fmt17(r.mc_base),
                fmt17(r.mc_extended),
                fmt17(r.gap),
                fmt17(r.omega_xy),
                r.mc_extended > 0.0,
                self.seed
            )?;
        }
        Ok(())
    }
}

fn scan_row(grid: &Arc<Grid>, settings: &ScanSettings, point: &ScanPoint) -> Result<MCReport> {
    let margin = settings.delta * grid.d();
    let flow = FlowSpec { template: point.flow, amplitude: settings.flow_amplitude, window: settings.flow_window };
    let z = zonal(&flow.build(grid.clone(), margin)?)?;
    let mode = ModeSpec { m: point.m, amplitude: settings.perturbation_amplitude, window: settings.perturbation_window };
    let y = mode.build(grid.clone(), margin);
    curvature::mc_extended(&ExtendedVector::new(z, point.a), &ExtendedVector::new(y, 0.0))
}

/// Evaluates every point independently. A failing row is logged and recorded
/// in `failures`; the others still run.
pub fn scan(settings: &ScanSettings, points: &[ScanPoint]) -> ScanTable {
    let mut grids: BTreeMap<u64, Result<Arc<Grid>>> = BTreeMap::new();
    for p in points {
        grids
            .entry(p.s.to_bits())
            .or_insert_with(|| Grid::new(p.s, settings.n_r, settings.n_theta));
    }
    let results: Vec<Result<MCReport>> = points
        .par_iter()
        .map(|p| match &grids[&p.s.to_bits()] {
            Ok(g) => scan_row(g, settings, p),
            Err(e) => Err(Error::InvalidParameter(e.to_string())),
        })
        .collect();

    let mut table = ScanTable { seed: settings.seed, ..Default::default() };
    for (point, result) in points.iter().zip(results) {
        match result {
            Ok(report) => table.rows.push(ScanRow { point: *point, report }),
            Err(e) => {
                warn!("scan row s={} a={} F={} m={} skipped: {e}", point.s, point.a, point.flow.id(), point.m);
                table.failures.push(ScanFailure { point: *point, error: e.to_string() });
            }
        }
    }
    table
}
