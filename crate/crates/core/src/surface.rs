//! Profile curves, metric data and quadrature for the surfaces
//! `M_s = { x² + y² = s²(1 − z²) }`, `s ≥ 1`.
//!
//! Points are addressed by signed arc length `r ∈ (−d, d)` along a meridian
//! (measured from the equator) and longitude `θ ∈ [−π, π)`. The embedding is
//! `(c₁(r) cos θ, c₁(r) sin θ, c₂(r))`, so the metric is `dr² + c₁² dθ²` and the
//! area form is `c₁ dθ ∧ dr`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::sync::{Arc, OnceLock};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::spectral::{self, FourierAxis};

/// Absolute tolerance on the profile identities.
pub const PROFILE_TOLERANCE: f64 = 1e-10;
const NEWTON_TOLERANCE: f64 = 1e-14;
const ARC_LENGTH_ORDER: usize = 64;
const INVERSION_TABLE: usize = 64;

#[derive(Debug, Clone)]
pub struct SurfaceProfile {
    pub s: f64,
    /// Half the meridian length; the poles sit at `r = ±d`.
    pub d: f64,
    pub r_nodes: Array1<f64>,
    pub c1: Array1<f64>,
    pub c2: Array1<f64>,
    pub c1_dot: Array1<f64>,
    pub c2_dot: Array1<f64>,
    /// Plain 1-D Gauss–Legendre weights on (−d, d); the `c₁` area factor is
    /// applied by the integration routines.
    pub quad_weights_r: Array1<f64>,
}

impl SurfaceProfile {
    pub fn n_r(&self) -> usize {
        self.r_nodes.len()
    }

    /// Largest violation of `ċ₁² + ċ₂² = 1` and `c₁² = s²(1 − c₂²)` over the nodes.
    pub fn identity_defect(&self) -> f64 {
        let s2 = self.s * self.s;
        (0..self.n_r())
            .map(|i| {
                let unit = (self.c1_dot[i].powi(2) + self.c2_dot[i].powi(2) - 1.0).abs();
                let shape = (self.c1[i].powi(2) - s2 * (1.0 - self.c2[i].powi(2))).abs() / s2;
                unit.max(shape)
            })
            .fold(0.0, f64::max)
    }

    /// CSV export: header `r,c1,c2,c1_dot,c2_dot`, one row per node, preceded by
    /// `#` metadata lines carrying `s`, `d` and `n_r`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# s={}", fmt17(self.s))?;
        writeln!(out, "# d={}", fmt17(self.d))?;
        writeln!(out, "# n_r={}", self.n_r())?;
        writeln!(out, "r,c1,c2,c1_dot,c2_dot")?;
        for i in 0..self.n_r() {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(self.r_nodes[i]),
                fmt17(self.c1[i]),
                fmt17(self.c2[i]),
                fmt17(self.c1_dot[i]),
                fmt17(self.c2_dot[i])
            )?;
        }
        Ok(())
    }
}

/// Speed of the latitude parameterization: `dr/dφ`.
fn meridian_speed(s: f64, phi: f64) -> f64 {
    (phi.cos().powi(2) + s * s * phi.sin().powi(2)).sqrt()
}

struct ArcLength {
    s: f64,
    nodes: Array1<f64>,
    weights: Array1<f64>,
}

impl ArcLength {
    fn new(s: f64) -> Self {
        let (nodes, weights) = spectral::gauss_legendre(ARC_LENGTH_ORDER);
        Self { s, nodes, weights }
    }

    /// `r(φ) = ∫₀^φ √(cos²ξ + s² sin²ξ) dξ`; the integrand is entire, so a
    /// fixed high-order rule is exact to round-off.
    fn at(&self, phi: f64) -> f64 {
        let half = 0.5 * phi;
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(x, w)| w * meridian_speed(self.s, half * (x + 1.0)))
            .sum::<f64>()
            * half
    }
}

/// Monotone cubic Hermite interpolant of `φ(r)` through tabulated points
/// (Fritsch–Carlson limited slopes).
struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    fn new(x: Vec<f64>, y: Vec<f64>, slopes: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = slopes;
        for k in 0..n - 1 {
            let delta = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
            let a = m[k] / delta;
            let b = m[k + 1] / delta;
            let norm = a * a + b * b;
            if norm > 9.0 {
                let t = 3.0 / norm.sqrt();
                m[k] = t * a * delta;
                m[k + 1] = t * b * delta;
            }
        }
        Self { x, y, m }
    }

    fn eval(&self, t: f64) -> f64 {
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= self.x.len() => self.x.len() - 2,
            p => p - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let u = (t - self.x[k]) / h;
        let (u2, u3) = (u * u, u * u * u);
        (2.0 * u3 - 3.0 * u2 + 1.0) * self.y[k]
            + (u3 - 2.0 * u2 + u) * h * self.m[k]
            + (-2.0 * u3 + 3.0 * u2) * self.y[k + 1]
            + (u3 - u2) * h * self.m[k + 1]
    }
}

/// Build the arc-length profile of `M_s` on `n_r` Gauss–Legendre nodes.
pub fn build_profile(s: f64, n_r: usize) -> Result<SurfaceProfile> {
    if !(s >= 1.0) || !s.is_finite() {
        return Err(Error::UnsupportedShape(s));
    }
    if n_r < 16 {
        return Err(Error::InvalidResolution(format!(
            "n_r = {n_r}, at least 16 radial nodes required"
        )));
    }
    let (x, w) = spectral::gauss_legendre(n_r);

    if s == 1.0 {
        let d = FRAC_PI_2;
        let r = x.mapv(|t| t * d);
        return Ok(SurfaceProfile {
            s,
            d,
            c1: r.mapv(f64::cos),
            c2: r.mapv(f64::sin),
            c1_dot: r.mapv(|t| -t.sin()),
            c2_dot: r.mapv(f64::cos),
            quad_weights_r: w.mapv(|v| v * d),
            r_nodes: r,
        });
    }

    let arc = ArcLength::new(s);
    let d = arc.at(FRAC_PI_2);

    let table_phi: Vec<f64> = (0..=INVERSION_TABLE)
        .map(|k| -FRAC_PI_2 + PI * k as f64 / INVERSION_TABLE as f64)
        .collect();
    let table_r: Vec<f64> = table_phi.iter().map(|&p| arc.at(p)).collect();
    if table_r.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::ProfileInversion(
            "arc-length table is not strictly increasing".into(),
        ));
    }
    let slopes = table_phi.iter().map(|&p| 1.0 / meridian_speed(s, p)).collect();
    let guess = MonotoneCubic::new(table_r, table_phi, slopes);

    let r_nodes = x.mapv(|t| t * d);
    let mut phi = Array1::zeros(n_r);
    for (i, &r) in r_nodes.iter().enumerate() {
        let mut p = guess.eval(r);
        let mut converged = false;
        for _ in 0..50 {
            let step = (arc.at(p) - r) / meridian_speed(s, p);
            p -= step;
            if step.abs() < NEWTON_TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged || !p.is_finite() {
            return Err(Error::ProfileInversion(format!(
                "Newton refinement did not converge at r = {r}"
            )));
        }
        phi[i] = p;
    }
    if phi.windows(2).into_iter().any(|p| p[1] <= p[0]) {
        return Err(Error::ProfileInversion(
            "latitude is not monotone in arc length".into(),
        ));
    }

    let speed = phi.mapv(|p| meridian_speed(s, p));
    Ok(SurfaceProfile {
        s,
        d,
        c1: phi.mapv(|p| s * p.cos()),
        c2: phi.mapv(f64::sin),
        c1_dot: Array1::from_iter(phi.iter().zip(speed.iter()).map(|(p, j)| -s * p.sin() / j)),
        c2_dot: Array1::from_iter(phi.iter().zip(speed.iter()).map(|(p, j)| p.cos() / j)),
        quad_weights_r: w.mapv(|v| v * d),
        r_nodes,
    })
}

/// Nonzero Levi-Civita symbols of `dr² + c₁² dθ²`; every other symbol vanishes.
#[derive(Debug, Clone)]
pub struct ChristoffelTable {
    /// `Γ^r_{θθ} = −c₁ċ₁`
    pub gamma_r_tt: Array1<f64>,
    /// `Γ^θ_{rθ} = Γ^θ_{θr} = ċ₁/c₁`
    pub gamma_t_rt: Array1<f64>,
}

pub fn christoffel(p: &SurfaceProfile) -> ChristoffelTable {
    ChristoffelTable {
        gamma_r_tt: Array1::from_iter(p.c1.iter().zip(p.c1_dot.iter()).map(|(c, cd)| -c * cd)),
        gamma_t_rt: Array1::from_iter(p.c1.iter().zip(p.c1_dot.iter()).map(|(c, cd)| cd / c)),
    }
}

/// Tensor-product collocation grid: Gauss–Legendre in `r`, uniform in `θ`.
///
/// Grid functions are `(n_r, n_theta)` arrays, row `i` at `r_nodes[i]`,
/// column `j` at `θ_j = −π + 2πj/n_theta`.
#[derive(Debug)]
pub struct Grid {
    profile: SurfaceProfile,
    christoffel: ChristoffelTable,
    theta: Array1<f64>,
    diff_r: Array2<f64>,
    fourier: FourierAxis,
    pub(crate) projection_solvers: OnceLock<Vec<OnceLock<Option<crate::fields::ModeSolver>>>>,
}

impl Grid {
    pub fn new(s: f64, n_r: usize, n_theta: usize) -> Result<Arc<Self>> {
        if n_theta < 8 || n_theta % 2 != 0 {
            return Err(Error::InvalidResolution(format!(
                "n_theta = {n_theta}, must be even and at least 8"
            )));
        }
        let profile = build_profile(s, n_r)?;
        let (x, w) = spectral::gauss_legendre(n_r);
        let bary = spectral::gauss_legendre_barycentric(&x, &w);
        let diff_r = spectral::differentiation_matrix(&x, &bary) / profile.d;
        let theta = Array1::from_iter(
            (0..n_theta).map(|j| -PI + 2.0 * PI * j as f64 / n_theta as f64),
        );
        Ok(Arc::new(Self {
            christoffel: christoffel(&profile),
            profile,
            theta,
            diff_r,
            fourier: FourierAxis::new(n_theta),
            projection_solvers: OnceLock::new(),
        }))
    }

    pub fn profile(&self) -> &SurfaceProfile {
        &self.profile
    }

    pub fn christoffel(&self) -> &ChristoffelTable {
        &self.christoffel
    }

    pub fn s(&self) -> f64 {
        self.profile.s
    }

    pub fn d(&self) -> f64 {
        self.profile.d
    }

    pub fn n_r(&self) -> usize {
        self.profile.n_r()
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_r(), self.n_theta())
    }

    pub fn r_nodes(&self) -> &Array1<f64> {
        &self.profile.r_nodes
    }

    pub fn theta_nodes(&self) -> &Array1<f64> {
        &self.theta
    }

    pub fn diff_r_matrix(&self) -> &Array2<f64> {
        &self.diff_r
    }

    pub(crate) fn fourier(&self) -> &FourierAxis {
        &self.fourier
    }

    /// Trapezoidal weight of a single `θ` node.
    pub fn theta_weight(&self) -> f64 {
        2.0 * PI / self.n_theta() as f64
    }

    /// Sample `f(r, θ)` on the grid.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
        let r = self.r_nodes();
        Array2::from_shape_fn(self.shape(), |(i, j)| f(r[i], self.theta[j]))
    }

    /// Broadcast a radial profile over `θ`.
    pub fn radial(&self, f: &Array1<f64>) -> Array2<f64> {
        Array2::from_shape_fn(self.shape(), |(i, _)| f[i])
    }

    /// Collocation derivative along `r`.
    pub fn d_r(&self, a: &Array2<f64>) -> Array2<f64> {
        self.diff_r.dot(a)
    }

    /// Fourier derivative along `θ`.
    pub fn d_theta(&self, a: &Array2<f64>) -> Array2<f64> {
        self.fourier.differentiate(a)
    }

    /// Multiply every row `i` of `a` by `w[i]`.
    pub(crate) fn scale_rows(a: &Array2<f64>, w: &Array1<f64>) -> Array2<f64> {
        a * &w.view().insert_axis(Axis(1))
    }

    /// `∫∫ f dθ dr` with no area factor.
    pub fn integrate_coordinate(&self, f: ArrayView2<'_, f64>) -> f64 {
        let tw = self.theta_weight();
        f.axis_iter(Axis(0))
            .zip(self.profile.quad_weights_r.iter())
            .map(|(row, w)| w * row.sum())
            .sum::<f64>()
            * tw
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other)
            || (self.shape() == other.shape() && self.s().to_bits() == other.s().to_bits())
    }
}

/// Scalar function sampled on a [`Grid`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Array2<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!(
                "scalar samples have shape {:?}, grid is {:?}",
                values.dim(),
                grid.shape()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.sample(f);
        Self { grid, values }
    }
}

/// `∫∫ f c₁ dθ dr`: trapezoidal in `θ`, Gauss–Legendre in `r`.
pub fn integrate_scalar(grid: &Grid, f: &ScalarField) -> Result<f64> {
    if !grid.same_as(&f.grid) {
        return Err(Error::GridMismatch("scalar field lives on another grid".into()));
    }
    let weighted = Grid::scale_rows(&f.values, &grid.profile.c1);
    Ok(grid.integrate_coordinate(weighted.view()))
}
