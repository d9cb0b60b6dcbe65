//! Tangent vector fields on `M_s` in the coordinate frame `(∂_r, ∂_θ)` and the
//! differential operators acting on them.
//!
//! A field `X = X₁∂_r + X₂∂_θ` stores `X₁` and `X₂` (not the physical
//! `θ`-velocity, which is `c₁X₂`). Fields used as Lie algebra elements are
//! divergence-free and, for the built-in constructors, vanish identically
//! outside the band `[−d + δ, d − δ]`.

use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, LU};
use ndarray::{Array1, Array2, Axis, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::surface::{integrate_scalar, Grid, ScalarField};

/// Default support margin as a fraction of `d`.
pub const DEFAULT_MARGIN_FRACTION: f64 = 0.1;
/// Divergence tolerance at the reference resolution, relative to field size.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;

/// Sharpness of the radial window. The classical `exp(1 − 1/(1 − x²))` is
/// flat for too long near the edge to be resolved by collocation at moderate
/// `n_r`; squeezing the core keeps the Legendre tail below round-off.
pub const WINDOW_SHARPNESS: f64 = 16.0;

/// Smooth window `exp(−a x²/(1 − x²))` on `|x| < 1`, zero elsewhere; peak 1 at 0.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let x2 = x * x;
        (-WINDOW_SHARPNESS * x2 / (1.0 - x2)).exp()
    }
}

/// A bump in `r` centred at `center` with half-width `half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialBump {
    pub center: f64,
    pub half_width: f64,
}

impl RadialBump {
    pub fn eval(&self, r: f64) -> f64 {
        bump((r - self.center) / self.half_width)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    fn check_inside(&self, grid: &Grid, margin: f64) -> Result<()> {
        let edge = grid.d() - margin;
        let (lo, hi) = self.support();
        if !(self.half_width > 0.0) || lo < -edge - 1e-12 || hi > edge + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "bump support [{lo}, {hi}] leaves the band [{}, {edge}]",
                -edge
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<Grid>,
    /// `X₁`, the `∂_r` component.
    pub comp_r: Array2<f64>,
    /// `X₂`, the `∂_θ` component.
    pub comp_theta: Array2<f64>,
}

pub(crate) fn check_same(a: &Grid, b: &Grid) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{}x{} grid at s = {} vs {}x{} grid at s = {}",
            a.n_r(),
            a.n_theta(),
            a.s(),
            b.n_r(),
            b.n_theta(),
            b.s()
        )))
    }
}

impl VectorField {
    pub fn new(grid: Arc<Grid>, comp_r: Array2<f64>, comp_theta: Array2<f64>) -> Result<Self> {
        if comp_r.dim() != grid.shape() || comp_theta.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!(
                "components {:?}/{:?} on a {:?} grid",
                comp_r.dim(),
                comp_theta.dim(),
                grid.shape()
            )));
        }
        Ok(Self { grid, comp_r, comp_theta })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let shape = grid.shape();
        Self { grid, comp_r: Array2::zeros(shape), comp_theta: Array2::zeros(shape) }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let comp_r = grid.sample(|r, t| f(r, t).0);
        let comp_theta = grid.sample(|r, t| f(r, t).1);
        Self { grid, comp_r, comp_theta }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            comp_r: &self.comp_r * k,
            comp_theta: &self.comp_theta * k,
        }
    }

    /// `self + k·other`
    pub fn add_scaled(&self, k: f64, other: &VectorField) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            comp_r: &self.comp_r + &(&other.comp_r * k),
            comp_theta: &self.comp_theta + &(&other.comp_theta * k),
        })
    }

    pub fn norm(&self) -> f64 {
        inner(self, self).expect("same grid").max(0.0).sqrt()
    }

    /// Largest pointwise metric length `√(X₁² + c₁²X₂²)`.
    pub fn max_length(&self) -> f64 {
        let c1 = &self.grid.profile().c1;
        let mut m: f64 = 0.0;
        for (((i, _), &a), &b) in self.comp_r.indexed_iter().zip(self.comp_theta.iter()) {
            m = m.max((a * a + c1[i] * c1[i] * b * b).sqrt());
        }
        m
    }

    /// Largest component magnitude at nodes outside `[−d + δ, d − δ]`.
    pub fn support_violation(&self, margin: f64) -> f64 {
        let edge = self.grid.d() - margin;
        let r = self.grid.r_nodes();
        let mut worst: f64 = 0.0;
        for i in (0..r.len()).filter(|&i| r[i].abs() > edge) {
            for j in 0..self.grid.n_theta() {
                worst = worst.max(self.comp_r[[i, j]].abs()).max(self.comp_theta[[i, j]].abs());
            }
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "theta", "comp_r", "comp_theta"])?;
        let (r, t) = (self.grid.r_nodes(), self.grid.theta_nodes());
        for ((i, j), v) in self.comp_r.indexed_iter() {
            w.write_record([fmt17(r[i]), fmt17(t[j]), fmt17(*v), fmt17(self.comp_theta[[i, j]])])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(grid: Arc<Grid>, input: R) -> Result<Self> {
        let cols = read_grid_csv(&grid, input, &["r", "theta", "comp_r", "comp_theta"])?;
        let mut it = cols.into_iter();
        let comp_r = it.next().expect("two columns");
        let comp_theta = it.next().expect("two columns");
        Self::new(grid, comp_r, comp_theta)
    }
}

/// Reads `r,theta,<values...>` rows laid out on `grid` (r-major), checking the
/// node coordinates against the grid.
fn read_grid_csv<R: Read>(grid: &Grid, input: R, header: &[&str]) -> Result<Vec<Array2<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::Parse(format!("expected header {}, found {}", header.join(","), found.join(","))));
    }
    let (n_r, n_t) = grid.shape();
    let n_values = header.len() - 2;
    let mut out = vec![Array2::zeros((n_r, n_t)); n_values];
    let mut count = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        if count >= n_r * n_t {
            return Err(Error::GridMismatch(format!("more than {} rows", n_r * n_t)));
        }
        let (i, j) = (count / n_t, count % n_t);
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::Parse(format!("row {count}: missing column {k}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {count}: {e}")))
        };
        let (r, t) = (parse(0)?, parse(1)?);
        if (r - grid.r_nodes()[i]).abs() > 1e-9 || (t - grid.theta_nodes()[j]).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!(
                "row {count} is at (r, θ) = ({r}, {t}), expected node ({}, {})",
                grid.r_nodes()[i],
                grid.theta_nodes()[j]
            )));
        }
        for (k, arr) in out.iter_mut().enumerate() {
            arr[[i, j]] = parse(k + 2)?;
        }
        count += 1;
    }
    if count != n_r * n_t {
        return Err(Error::GridMismatch(format!("found {count} rows, grid has {}", n_r * n_t)));
    }
    Ok(out)
}

/// Scalar `ψ` whose skew gradient is a divergence-free field.
#[derive(Debug, Clone)]
pub struct StreamFunction {
    pub grid: Arc<Grid>,
    pub psi: Array2<f64>,
}

impl StreamFunction {
    pub fn new(grid: Arc<Grid>, psi: Array2<f64>) -> Result<Self> {
        if psi.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!("ψ has shape {:?}, grid is {:?}", psi.dim(), grid.shape())));
        }
        Ok(Self { grid, psi })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let psi = grid.sample(f);
        Self { grid, psi }
    }

    /// `ψ = amplitude · bump(r) · cos(mθ)`.
    pub fn mode(grid: Arc<Grid>, m: u32, bump: RadialBump, amplitude: f64) -> Self {
        Self::from_fn(grid, |r, t| amplitude * bump.eval(r) * (m as f64 * t).cos())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "theta", "psi"])?;
        let (r, t) = (self.grid.r_nodes(), self.grid.theta_nodes());
        for ((i, j), v) in self.psi.indexed_iter() {
            w.write_record([fmt17(r[i]), fmt17(t[j]), fmt17(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(grid: Arc<Grid>, input: R) -> Result<Self> {
        let mut cols = read_grid_csv(&grid, input, &["r", "theta", "psi"])?;
        Self::new(grid, cols.remove(0))
    }
}

/// Coefficient profile of a zonal flow `Z = F(r)∂_θ`.
#[derive(Debug, Clone)]
pub struct ZonalSpec {
    pub grid: Arc<Grid>,
    /// `F` at the radial nodes.
    pub f: Array1<f64>,
    /// Support margin `δ`: `F` vanishes outside `[−d + δ, d − δ]`.
    pub margin: f64,
    pub west_facing: bool,
}

impl ZonalSpec {
    pub fn new(grid: Arc<Grid>, f: Array1<f64>, margin: f64, west_facing: bool) -> Result<Self> {
        if f.len() != grid.n_r() {
            return Err(Error::GridMismatch(format!("F has {} samples, grid has {} radial nodes", f.len(), grid.n_r())));
        }
        if !(margin >= 0.0 && margin < grid.d()) {
            return Err(Error::InvalidParameter(format!("support margin {margin} outside [0, d)")));
        }
        let edge = grid.d() - margin;
        for (i, (&r, &v)) in grid.r_nodes().iter().zip(f.iter()).enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("F is not finite at node {i}")));
            }
            if west_facing && v > 0.0 {
                return Err(Error::NotWestFacing { r, value: v });
            }
            if r.abs() > edge && v != 0.0 {
                return Err(Error::InvalidParameter(format!("F = {v} at r = {r}, outside the support band")));
            }
        }
        Ok(Self { grid, f, margin, west_facing })
    }

    /// `F = amplitude · bump((r − center)/half_width)`; west-facing iff amplitude ≤ 0.
    pub fn bump(grid: Arc<Grid>, amplitude: f64, bump: RadialBump, margin: f64) -> Result<Self> {
        bump.check_inside(&grid, margin)?;
        let f = grid.r_nodes().mapv(|r| amplitude * bump.eval(r));
        Self::new(grid, f, margin, amplitude <= 0.0)
    }

    /// `F = amplitude · cos⁸(π(r − center)/(2·half_width))` on the window.
    pub fn cos_window(grid: Arc<Grid>, amplitude: f64, window: RadialBump, margin: f64) -> Result<Self> {
        window.check_inside(&grid, margin)?;
        let f = grid.r_nodes().mapv(|r| {
            let x = (r - window.center) / window.half_width;
            if x.abs() >= 1.0 {
                0.0
            } else {
                amplitude * (std::f64::consts::FRAC_PI_2 * x).cos().powi(8)
            }
        });
        Self::new(grid, f, margin, amplitude <= 0.0)
    }

    /// Reads `r,F` rows, one per radial node.
    pub fn read_csv<R: Read>(grid: Arc<Grid>, input: R, margin: f64, west_facing: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != ["r", "F"] {
            return Err(Error::Parse(format!("expected header r,F, found {}", header.join(","))));
        }
        let mut f = Vec::with_capacity(grid.n_r());
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let val = |c: usize| -> Result<f64> {
                rec.get(c)
                    .ok_or_else(|| Error::Parse(format!("row {k}: missing column")))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {k}: {e}")))
            };
            let r = val(0)?;
            if k >= grid.n_r() || (r - grid.r_nodes()[k]).abs() > 1e-9 {
                return Err(Error::GridMismatch(format!("row {k} at r = {r} does not match the radial nodes")));
            }
            f.push(val(1)?);
        }
        Self::new(grid, Array1::from(f), margin, west_facing)
    }

    pub fn max_abs(&self) -> f64 {
        self.f.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A field with its first derivatives, reused across brackets.
pub(crate) struct Jet<'a> {
    pub field: &'a VectorField,
    pub r_dr: Array2<f64>,
    pub r_dt: Array2<f64>,
    pub t_dr: Array2<f64>,
    pub t_dt: Array2<f64>,
}

impl<'a> Jet<'a> {
    pub fn new(field: &'a VectorField) -> Self {
        let g = &field.grid;
        Self {
            r_dr: g.d_r(&field.comp_r),
            r_dt: g.d_theta(&field.comp_r),
            t_dr: g.d_r(&field.comp_theta),
            t_dt: g.d_theta(&field.comp_theta),
            field,
        }
    }

    /// Directional derivative `X(Y^i)` of both components of this jet's field.
    fn along(&self, x: &VectorField) -> (Array2<f64>, Array2<f64>) {
        let mut a = Array2::zeros(x.grid.shape());
        Zip::from(&mut a)
            .and(&x.comp_r)
            .and(&x.comp_theta)
            .and(&self.r_dr)
            .and(&self.r_dt)
            .for_each(|o, &x1, &x2, &dr, &dt| *o = x1 * dr + x2 * dt);
        let mut b = Array2::zeros(x.grid.shape());
        Zip::from(&mut b)
            .and(&x.comp_r)
            .and(&x.comp_theta)
            .and(&self.t_dr)
            .and(&self.t_dt)
            .for_each(|o, &x1, &x2, &dr, &dt| *o = x1 * dr + x2 * dt);
        (a, b)
    }
}

pub(crate) fn bracket_of_jets(x: &Jet<'_>, y: &Jet<'_>) -> VectorField {
    let (xy_r, xy_t) = y.along(x.field);
    let (yx_r, yx_t) = x.along(y.field);
    VectorField {
        grid: x.field.grid.clone(),
        comp_r: xy_r - yx_r,
        comp_theta: xy_t - yx_t,
    }
}

pub(crate) fn covariant_of_jet(x: &VectorField, y: &Jet<'_>) -> VectorField {
    let grid = &x.grid;
    let ch = grid.christoffel();
    let (mut a, mut b) = y.along(x);
    let yf = y.field;
    Zip::indexed(&mut a).and(&x.comp_theta).and(&yf.comp_theta).for_each(|(i, _), o, &x2, &y2| {
        *o += ch.gamma_r_tt[i] * x2 * y2;
    });
    Zip::indexed(&mut b)
        .and(&x.comp_r)
        .and(&x.comp_theta)
        .and(&yf.comp_r)
        .and(&yf.comp_theta)
        .for_each(|(i, _), o, &x1, &x2, &y1, &y2| {
            *o += ch.gamma_t_rt[i] * (x1 * y2 + x2 * y1);
        });
    VectorField { grid: grid.clone(), comp_r: a, comp_theta: b }
}

/// `u₁ = ∂_θψ / c₁`, `u₂ = −∂_rψ / c₁`.
pub fn from_stream(psi: &StreamFunction) -> VectorField {
    let g = &psi.grid;
    let inv_c1 = g.profile().c1.mapv(f64::recip);
    let comp_r = Grid::scale_rows(&g.d_theta(&psi.psi), &inv_c1);
    let comp_theta = Grid::scale_rows(&g.d_r(&psi.psi), &inv_c1.mapv(|v| -v));
    VectorField { grid: g.clone(), comp_r, comp_theta }
}

/// `div u = (∂_r(c₁u₁) + ∂_θ(c₁u₂)) / c₁`, which is `(∂_r + ċ₁/c₁) u₁ + ∂_θ u₂`.
///
/// The flux form makes `div ∘ from_stream` vanish to round-off, since the two
/// one-dimensional derivatives commute exactly on the grid.
pub fn divergence(u: &VectorField) -> ScalarField {
    let g = &u.grid;
    let c1 = &g.profile().c1;
    let flux = g.d_r(&Grid::scale_rows(&u.comp_r, c1)) + g.d_theta(&Grid::scale_rows(&u.comp_theta, c1));
    let values = Grid::scale_rows(&flux, &c1.mapv(f64::recip));
    ScalarField { grid: g.clone(), values }
}

/// Coordinate bracket `[X, Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    check_same(&x.grid, &y.grid)?;
    Ok(bracket_of_jets(&Jet::new(x), &Jet::new(y)))
}

/// `⟨X, Y⟩ = ∫∫ (X₁Y₁ + c₁² X₂Y₂) c₁ dθ dr`.
pub fn inner(x: &VectorField, y: &VectorField) -> Result<f64> {
    check_same(&x.grid, &y.grid)?;
    let g = &x.grid;
    let c1 = &g.profile().c1;
    let mut integrand = Array2::zeros(g.shape());
    Zip::indexed(&mut integrand)
        .and(&x.comp_r)
        .and(&x.comp_theta)
        .and(&y.comp_r)
        .and(&y.comp_theta)
        .for_each(|(i, _), o, &x1, &x2, &y1, &y2| {
            let c = c1[i];
            *o = (x1 * y1 + c * c * x2 * y2) * c;
        });
    Ok(g.integrate_coordinate(integrand.view()))
}

/// Hodge star on vectors: `★∂_r = −∂_θ/c₁`, `★∂_θ = c₁∂_r`.
pub fn hodge_star(u: &VectorField) -> VectorField {
    let g = &u.grid;
    let c1 = &g.profile().c1;
    VectorField {
        grid: g.clone(),
        comp_r: Grid::scale_rows(&u.comp_theta, c1),
        comp_theta: Grid::scale_rows(&u.comp_r, &c1.mapv(|c| -1.0 / c)),
    }
}

/// Levi-Civita derivative `∇_X Y`.
pub fn covariant_derivative(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    check_same(&x.grid, &y.grid)?;
    Ok(covariant_of_jet(x, &Jet::new(y)))
}

/// `grad f = ∂_r f ∂_r + c₁⁻² ∂_θ f ∂_θ`.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = &f.grid;
    let inv_c1_sq = g.profile().c1.mapv(|c| 1.0 / (c * c));
    VectorField {
        grid: g.clone(),
        comp_r: g.d_r(&f.values),
        comp_theta: Grid::scale_rows(&g.d_theta(&f.values), &inv_c1_sq),
    }
}

pub(crate) type ModeSolver = LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

fn mode_solver(grid: &Grid, m: usize) -> Option<ModeSolver> {
    // Row-scaled Laplace–Beltrami operator for Fourier mode m:
    //   c₁ ∂_r(c₁ ∂_r φ) − m² φ = c₁² g.
    // Collocating at the interior Gauss nodes selects the solution that is
    // regular at both poles.
    let n = grid.n_r();
    let c1 = &grid.profile().c1;
    let d = grid.diff_r_matrix();
    let mut c1d = d.clone();
    for i in 0..n {
        for j in 0..n {
            c1d[[i, j]] *= c1[i];
        }
    }
    let op = c1d.dot(&c1d);
    let mut mat = DMatrix::from_fn(n, n, |i, j| op[[i, j]]);
    let m2 = (m * m) as f64;
    for i in 0..n {
        mat[(i, i)] -= m2;
    }
    let lu = mat.lu();
    if lu.is_invertible() {
        Some(lu)
    } else {
        None
    }
}

/// L²-orthogonal projection onto divergence-free fields.
///
/// Each `θ`-Fourier mode of the potential `φ` in `W = P(W) + grad φ` is found
/// from a 1-D collocation solve in `r`; mode 0 is closed-form (`∂_rφ` equals the
/// `θ`-mean of `W₁`).
pub fn project(w: &VectorField) -> Result<VectorField> {
    let grid = &w.grid;
    let (n_r, n_t) = grid.shape();
    let fourier = grid.fourier();
    let c1 = &grid.profile().c1;
    let rhs = fourier.forward(&divergence(w).values);
    let w1_hat = fourier.forward(&w.comp_r);
    let solvers = grid
        .projection_solvers
        .get_or_init(|| (0..=n_t / 2).map(|_| OnceLock::new()).collect());

    let scale = rhs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let mut grad_r = Array2::<Complex64>::zeros((n_r, n_t));
    let mut grad_t = Array2::<Complex64>::zeros((n_r, n_t));
    let diff = grid.diff_r_matrix();

    for j in 0..n_t {
        let k = fourier.wavenumber(j);
        let m = match k {
            Some(k) => k.unsigned_abs() as usize,
            None => n_t / 2,
        };
        if m == 0 {
            for i in 0..n_r {
                grad_r[[i, j]] = w1_hat[[i, j]];
            }
            continue;
        }
        let column = rhs.index_axis(Axis(1), j);
        if column.iter().all(|c| c.norm() <= 1e-15 * scale) {
            continue;
        }
        let solver = solvers[m]
            .get_or_init(|| mode_solver(grid, m))
            .as_ref()
            .ok_or(Error::ProjectionSolve { mode: m })?;
        let b_re = DVector::from_fn(n_r, |i, _| c1[i] * c1[i] * column[i].re);
        let b_im = DVector::from_fn(n_r, |i, _| c1[i] * c1[i] * column[i].im);
        let phi_re = solver.solve(&b_re).ok_or(Error::ProjectionSolve { mode: m })?;
        let phi_im = solver.solve(&b_im).ok_or(Error::ProjectionSolve { mode: m })?;
        if phi_re.iter().chain(phi_im.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ProjectionSolve { mode: m });
        }
        let phi_re = Array1::from_iter(phi_re.iter().copied());
        let phi_im = Array1::from_iter(phi_im.iter().copied());
        let dphi_re = diff.dot(&phi_re);
        let dphi_im = diff.dot(&phi_im);
        for i in 0..n_r {
            let phi = Complex64::new(phi_re[i], phi_im[i]);
            grad_r[[i, j]] = Complex64::new(dphi_re[i], dphi_im[i]);
            grad_t[[i, j]] = match k {
                Some(k) => phi * Complex64::new(0.0, k as f64),
                None => Complex64::new(0.0, 0.0),
            };
        }
    }

    let grad_r = fourier.inverse_real(grad_r);
    let grad_t = Grid::scale_rows(&fourier.inverse_real(grad_t), &c1.mapv(|c| 1.0 / (c * c)));
    Ok(VectorField {
        grid: grid.clone(),
        comp_r: &w.comp_r - &grad_r,
        comp_theta: &w.comp_theta - &grad_t,
    })
}

/// `Z = F(r)∂_θ`.
pub fn zonal(spec: &ZonalSpec) -> Result<VectorField> {
    if spec.west_facing {
        if let Some((i, &v)) = spec.f.iter().enumerate().find(|(_, &v)| v > 0.0) {
            return Err(Error::NotWestFacing { r: spec.grid.r_nodes()[i], value: v });
        }
    }
    let grid = spec.grid.clone();
    let comp_theta = grid.radial(&spec.f);
    Ok(VectorField { comp_r: Array2::zeros(grid.shape()), comp_theta, grid })
}

/// `d·‖div u‖ / ‖u‖` in L². Pointwise values at the pole-most nodes carry
/// round-off amplified by `1/c₁`, which the area weight suppresses.
pub fn relative_divergence(u: &VectorField) -> f64 {
    let g = &u.grid;
    let div = divergence(u);
    let sq = ScalarField { grid: g.clone(), values: div.values.mapv(|v| v * v) };
    let l2 = integrate_scalar(g, &sq).map(f64::sqrt).unwrap_or(f64::INFINITY);
    let size = u.norm();
    if size == 0.0 {
        l2 * g.d()
    } else {
        l2 * g.d() / size
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::integrate_scalar;
    use approx::assert_abs_diff_eq;

    fn grid(s: f64) -> Arc<Grid> {
        Grid::new(s, 129, 32).unwrap()
    }

    fn band_bump(g: &Grid) -> RadialBump {
        RadialBump { center: 0.05 * g.d(), half_width: 0.8 * g.d() }
    }

    fn sample_stream(g: &Arc<Grid>) -> StreamFunction {
        let b = band_bump(g);
        StreamFunction::from_fn(g.clone(), |r, t| {
            b.eval(r) * ((2.0 * t).cos() + 0.3 * (3.0 * t + 0.4).sin() + 0.2 * r)
        })
    }

    #[test]
    fn constant_stream_gives_zero_field() {
        let g = grid(1.5);
        let u = from_stream(&StreamFunction::from_fn(g.clone(), |_, _| 3.0));
        // ∂_r of a constant is round-off, amplified by 1/c₁ near the poles
        let c1 = g.radial(&g.profile().c1);
        assert!(u.comp_r.iter().all(|v| *v == 0.0));
        assert!((&u.comp_theta * &c1).iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn radial_stream_gives_zonal_field() {
        let g = grid(1.0);
        let b = band_bump(&g);
        let u = from_stream(&StreamFunction::from_fn(g.clone(), |r, _| b.eval(r)));
        assert!(u.comp_r.iter().all(|v| v.abs() < 1e-13));
        for row in u.comp_theta.axis_iter(Axis(0)) {
            assert!(row.iter().all(|v| (v - row[0]).abs() < 1e-13));
        }
    }

    #[test]
    fn stream_fields_are_divergence_free() {
        for s in [1.0, 1.5] {
            let g = grid(s);
            let u = from_stream(&sample_stream(&g));
            assert!(relative_divergence(&u) < 1e-8, "s = {s}: {}", relative_divergence(&u));
        }
        let g = grid(1.5);
        let b = band_bump(&g);
        let v = VectorField::from_fn(g.clone(), |r, t| (b.eval(r) * t.cos(), 0.0));
        assert!(relative_divergence(&v) > 1e-2);
        assert_eq!(relative_divergence(&VectorField::zeros(g)), 0.0);
    }

    #[test]
    fn zonal_rejects_east_facing_under_west_flag() {
        let g = grid(1.0);
        let mut f = g.r_nodes().mapv(|r| -bump(r));
        f[30] = 0.5;
        assert!(matches!(ZonalSpec::new(g.clone(), f.clone(), 0.1, true), Err(Error::NotWestFacing { .. })));
        let spec = ZonalSpec::new(g, f, 0.1, false).unwrap();
        assert!(zonal(&spec).is_ok());
    }

    #[test]
    fn zonal_of_zero_profile_is_zero_and_divergence_free() {
        let g = grid(2.0);
        let z = zonal(&ZonalSpec::new(g.clone(), Array1::zeros(g.n_r()), 0.2, true).unwrap()).unwrap();
        assert_eq!(z.norm(), 0.0);
        let zb = zonal(&ZonalSpec::bump(g.clone(), -1.0, band_bump(&g), 0.1 * g.d()).unwrap()).unwrap();
        assert!(divergence(&zb).values.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn brackets_of_zonal_fields_vanish() {
        let g = grid(1.5);
        let b = band_bump(&g);
        let z1 = zonal(&ZonalSpec::bump(g.clone(), -1.0, b, 0.1).unwrap()).unwrap();
        let z2 = zonal(&ZonalSpec::cos_window(g.clone(), 0.7, b, 0.1).unwrap()).unwrap();
        let w = lie_bracket(&z1, &z2).unwrap();
        assert!(w.comp_r.iter().chain(w.comp_theta.iter()).all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn bracket_with_zonal_matches_closed_form() {
        // [Y, Z] = −F ∂_θY₁ ∂_r + (Y₁ ∂_rF − F ∂_θY₂) ∂_θ
        let g = grid(1.5);
        let spec = ZonalSpec::bump(g.clone(), -0.8, band_bump(&g), 0.1).unwrap();
        let z = zonal(&spec).unwrap();
        let y = from_stream(&sample_stream(&g));
        let w = lie_bracket(&y, &z).unwrap();
        let f = g.radial(&spec.f);
        let df = g.d_r(&f);
        let expect_r = -(&f * &g.d_theta(&y.comp_r));
        let expect_t = &y.comp_r * &df - &f * &g.d_theta(&y.comp_theta);
        for (a, b) in w.comp_r.iter().zip(expect_r.iter()).chain(w.comp_theta.iter().zip(expect_t.iter())) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn hodge_star_squares_to_minus_one_and_is_isometric() {
        let g = grid(1.5);
        let u = from_stream(&sample_stream(&g));
        let v = VectorField::from_fn(g.clone(), |r, t| (bump(r / 1.5) * t.cos(), bump(r / 1.4) * t.sin()));
        let uu = hodge_star(&hodge_star(&u));
        for (a, b) in uu.comp_r.iter().zip(u.comp_r.iter()) {
            assert_abs_diff_eq!(*a, -*b, epsilon = 1e-14);
        }
        let lhs = inner(&hodge_star(&u), &hodge_star(&v)).unwrap();
        let rhs = inner(&u, &v).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13 * u.norm() * v.norm());
        let dr = VectorField::from_fn(g.clone(), |_, _| (1.0, 0.0));
        assert!(hodge_star(&dr).comp_r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zonal_inner_is_orthogonal_to_radial_bump() {
        let g = grid(1.0);
        let z = zonal(&ZonalSpec::bump(g.clone(), -1.0, band_bump(&g), 0.1).unwrap()).unwrap();
        let x = VectorField::from_fn(g.clone(), |r, _| (bump(r), 0.0));
        assert_eq!(inner(&x, &z).unwrap(), 0.0);
        assert!(inner(&x, &x).unwrap() > 0.0);
    }

    #[test]
    fn torsion_free() {
        let g = grid(1.5);
        let x = from_stream(&sample_stream(&g));
        let b = band_bump(&g);
        let y = from_stream(&StreamFunction::mode(g.clone(), 1, b, 0.5));
        let lhs = covariant_derivative(&x, &y).unwrap().add_scaled(-1.0, &covariant_derivative(&y, &x).unwrap()).unwrap();
        let w = lie_bracket(&x, &y).unwrap();
        let res = lhs.add_scaled(-1.0, &w).unwrap();
        assert!(res.norm() < 1e-13 * (1.0 + w.norm()));
    }

    #[test]
    fn self_derivative_of_zonal_flow_is_radial() {
        // ∇_Z Z = Γ^r_θθ F² ∂_r = −F² c₁ ċ₁ ∂_r
        let g = grid(1.5);
        let spec = ZonalSpec::bump(g.clone(), -1.3, band_bump(&g), 0.1).unwrap();
        let z = zonal(&spec).unwrap();
        let nzz = covariant_derivative(&z, &z).unwrap();
        let p = g.profile();
        for ((i, _), v) in nzz.comp_r.indexed_iter() {
            assert_abs_diff_eq!(*v, -spec.f[i].powi(2) * p.c1[i] * p.c1_dot[i], epsilon = 1e-14);
        }
        assert!(nzz.comp_theta.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = grid(1.2);
        let f = ScalarField::from_fn(g.clone(), |_, _| 2.5);
        let u = gradient(&f);
        assert!(u.comp_r.iter().chain(u.comp_theta.iter()).all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn gradients_are_orthogonal_to_divergence_free_fields() {
        let g = grid(1.5);
        let b = band_bump(&g);
        let f = ScalarField::from_fn(g.clone(), |r, t| b.eval(r) * (1.0 + (2.0 * t).sin()));
        let y = from_stream(&sample_stream(&g));
        let gf = gradient(&f);
        assert!(inner(&gf, &y).unwrap().abs() < 1e-9 * gf.norm() * y.norm());
    }

    #[test]
    fn projection_fixes_divergence_free_and_kills_gradients() {
        let g = grid(1.5);
        let b = band_bump(&g);
        let u = from_stream(&sample_stream(&g));
        let pu = project(&u).unwrap();
        assert!(pu.add_scaled(-1.0, &u).unwrap().norm() < 1e-9 * u.norm());
        let f = ScalarField::from_fn(g.clone(), |r, t| b.eval(r) * ((3.0 * t).cos() + 0.5));
        let gf = gradient(&f);
        assert!(project(&gf).unwrap().norm() < 1e-9 * gf.norm());
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal() {
        let g = grid(1.5);
        let b = band_bump(&g);
        let w = VectorField::from_fn(g.clone(), |r, t| {
            (b.eval(r) * (t.cos() + 0.2 * (2.0 * t).sin()), b.eval(r) * r * (1.0 + (3.0 * t).cos()))
        });
        let pw = project(&w).unwrap();
        let ppw = project(&pw).unwrap();
        assert!(relative_divergence(&pw) < 1e-8, "{:e}", relative_divergence(&pw));
        assert!(ppw.add_scaled(-1.0, &pw).unwrap().norm() < 1e-9 * w.norm());
        let q = w.add_scaled(-1.0, &pw).unwrap();
        assert!(inner(&q, &pw).unwrap().abs() < 1e-9 * w.norm() * w.norm());
    }

    #[test]
    fn sphere_area_and_odd_moment() {
        let g = Grid::new(1.0, 32, 8).unwrap();
        let one = ScalarField::from_fn(g.clone(), |_, _| 1.0);
        assert_abs_diff_eq!(integrate_scalar(&g, &one).unwrap(), 4.0 * std::f64::consts::PI, epsilon = 1e-13);
        let z = ScalarField::new(g.clone(), g.radial(&g.profile().c2)).unwrap();
        assert_abs_diff_eq!(integrate_scalar(&g, &z).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn csv_round_trip_and_mismatch() {
        let g = grid(1.5);
        let u = from_stream(&sample_stream(&g));
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = VectorField::read_csv(g.clone(), buf.as_slice()).unwrap();
        assert_eq!(back.comp_r, u.comp_r);
        assert_eq!(back.comp_theta, u.comp_theta);
        let other = Grid::new(1.5, 33, 32).unwrap();
        assert!(matches!(VectorField::read_csv(other, buf.as_slice()), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn operations_reject_grid_mismatch() {
        let a = grid(1.0);
        let b = grid(1.5);
        let x = VectorField::zeros(a);
        let y = VectorField::zeros(b);
        assert!(matches!(inner(&x, &y), Err(Error::GridMismatch(_))));
        assert!(matches!(lie_bracket(&x, &y), Err(Error::GridMismatch(_))));
        assert!(matches!(covariant_derivative(&x, &y), Err(Error::GridMismatch(_))));
    }
}
