//! Brute-force reference evaluations for the curvature library's tests.
//!
//! Nothing here touches the main crate. The surface is rebuilt from an RK4
//! table of latitude against arc length. Fields are given as closures and
//! sampled once on a fine uniform lattice; derivatives are five-point centred
//! differences between lattice neighbours and integrals use the composite
//! midpoint rule on the same lattice. Simple rather than fast.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("shape parameter s = {0} must be at least 1")]
    Shape(f64),
    #[error("curvature must be positive, got {0}")]
    NonPositiveCurvature(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type OracleResult<T> = Result<T, OracleError>;

const TABLE_STEPS: usize = 20_000;
const SIMPSON_PANELS: usize = 20_000;

/// `exp(−k x²/(1 − x²))` for `|x| < 1`, else 0.
pub fn window(x: f64, sharpness: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let x2 = x * x;
    (-sharpness * x2 / (1.0 - x2)).exp()
}

/// `ψ = Σ_{k,m} [α_{k,m} cos mθ + β_{k,m} sin mθ] w((r − c_k)/h_k)` with the
/// coefficient pair for window `k` and wavenumber index `i` at `2(k·|m| + i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalStream {
    /// `(c_k, h_k)` per window.
    pub windows: Vec<(f64, f64)>,
    pub m_list: Vec<u32>,
    pub coefficients: Vec<f64>,
    pub sharpness: f64,
}

impl ModalStream {
    pub fn eval(&self, r: f64, t: f64) -> f64 {
        let n_m = self.m_list.len();
        let mut v = 0.0;
        for (k, &(c, h)) in self.windows.iter().enumerate() {
            let g = window((r - c) / h, self.sharpness);
            if g == 0.0 {
                continue;
            }
            for (i, &m) in self.m_list.iter().enumerate() {
                let (sin, cos) = (m as f64 * t).sin_cos();
                v += g * (self.coefficients[2 * (k * n_m + i)] * cos + self.coefficients[2 * (k * n_m + i) + 1] * sin);
            }
        }
        v
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Meridian of `x² + y² = s²(1 − z²)` by arc length `r` from the equator.
#[derive(Debug, Clone)]
pub struct OracleSurface {
    s: f64,
    d: f64,
    h: f64,
    /// Latitude `φ` at `r = i·h`, `i = 0..=TABLE_STEPS`.
    phi: Vec<f64>,
}

impl OracleSurface {
    pub fn new(s: f64) -> OracleResult<Self> {
        if !(s >= 1.0) || !s.is_finite() {
            return Err(OracleError::Shape(s));
        }
        let speed = move |phi: f64| (phi.cos().powi(2) + s * s * phi.sin().powi(2)).sqrt();
        let d = simpson(speed, 0.0, FRAC_PI_2, SIMPSON_PANELS);
        let h = d / TABLE_STEPS as f64;
        // dφ/dr = 1/J(φ)
        let rate = |phi: f64| 1.0 / speed(phi);
        let mut phi = Vec::with_capacity(TABLE_STEPS + 1);
        let mut p = 0.0;
        phi.push(p);
        for _ in 0..TABLE_STEPS {
            let k1 = rate(p);
            let k2 = rate(p + 0.5 * h * k1);
            let k3 = rate(p + 0.5 * h * k2);
            let k4 = rate(p + h * k3);
            p += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            phi.push(p);
        }
        Ok(Self { s, d, h, phi })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Half the meridian length.
    pub fn d(&self) -> f64 {
        self.d
    }

    fn speed(&self, phi: f64) -> f64 {
        (phi.cos().powi(2) + self.s * self.s * phi.sin().powi(2)).sqrt()
    }

    /// Latitude at arc length `r`, by cubic Hermite interpolation of the table
    /// (slopes `1/J(φ)`); odd in `r`, clamped to `±π/2` beyond the poles.
    pub fn phi(&self, r: f64) -> f64 {
        let sign = r.signum();
        let x = r.abs();
        if x >= self.d {
            return sign * FRAC_PI_2;
        }
        let t = x / self.h;
        let i = (t.floor() as usize).min(TABLE_STEPS - 1);
        let u = t - i as f64;
        let (p0, p1) = (self.phi[i], self.phi[i + 1]);
        let (m0, m1) = (self.h / self.speed(p0), self.h / self.speed(p1));
        let u2 = u * u;
        let u3 = u2 * u;
        let v = (2.0 * u3 - 3.0 * u2 + 1.0) * p0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * p1
            + (u3 - u2) * m1;
        sign * v
    }

    pub fn c1(&self, r: f64) -> f64 {
        self.s * self.phi(r).cos()
    }

    pub fn c2(&self, r: f64) -> f64 {
        self.phi(r).sin()
    }

    pub fn c1_dot(&self, r: f64) -> f64 {
        let p = self.phi(r);
        -self.s * p.sin() / self.speed(p)
    }

    pub fn c2_dot(&self, r: f64) -> f64 {
        let p = self.phi(r);
        p.cos() / self.speed(p)
    }
}

/// Uniform midpoint lattice on `(−d, d) × [−π, π)`, stored row-major in `r`.
/// Derivatives are five-point differences between lattice neighbours, with
/// zeros beyond the poles, so fields must vanish near `r = ±d`.
#[derive(Debug, Clone)]
pub struct OracleGrid {
    pub surface: Arc<OracleSurface>,
    pub n_r: usize,
    pub n_theta: usize,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub dr: f64,
    pub dtheta: f64,
    c1: Vec<f64>,
    c2: Vec<f64>,
    c2_dot: Vec<f64>,
}

/// Vector field sampled on an [`OracleGrid`], components in the `(∂_r, ∂_θ)` frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleField {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl OracleGrid {
    pub fn new(surface: Arc<OracleSurface>, n_r: usize, n_theta: usize) -> OracleResult<Self> {
        if n_r < 5 || n_theta < 5 {
            return Err(OracleError::Parameter(format!("grid {n_r}x{n_theta} too small")));
        }
        let d = surface.d();
        let dr = 2.0 * d / n_r as f64;
        let dtheta = 2.0 * PI / n_theta as f64;
        let r: Vec<f64> = (0..n_r).map(|i| -d + (i as f64 + 0.5) * dr).collect();
        let theta = (0..n_theta).map(|j| -PI + (j as f64 + 0.5) * dtheta).collect();
        let c1 = r.iter().map(|&x| surface.c1(x)).collect();
        let c2 = r.iter().map(|&x| surface.c2(x)).collect();
        let c2_dot = r.iter().map(|&x| surface.c2_dot(x)).collect();
        Ok(Self { surface, n_r, n_theta, r, theta, dr, dtheta, c1, c2, c2_dot })
    }

    /// `factor` times the main grid's resolution in each direction; `factor ≥ 2`.
    pub fn refined(surface: Arc<OracleSurface>, n_r: usize, n_theta: usize, factor: usize) -> OracleResult<Self> {
        if factor < 2 {
            return Err(OracleError::Parameter(format!("resolution factor {factor} below 2")));
        }
        Self::new(surface, factor * n_r, factor * n_theta)
    }

    fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn c1(&self) -> &[f64] {
        &self.c1
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &r in &self.r {
            for &t in &self.theta {
                out.push(f(r, t));
            }
        }
        out
    }

    pub fn sample_field(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> OracleField {
        let mut u1 = Vec::with_capacity(self.len());
        let mut u2 = Vec::with_capacity(self.len());
        for &r in &self.r {
            for &t in &self.theta {
                let (a, b) = f(r, t);
                u1.push(a);
                u2.push(b);
            }
        }
        OracleField { u1, u2 }
    }

    /// `u₁ = ∂_θψ/c₁`, `u₂ = −∂_rψ/c₁`.
    pub fn stream_field(&self, psi: impl Fn(f64, f64) -> f64) -> OracleField {
        let p = self.sample(psi);
        let mut u1 = self.d_theta(&p);
        let mut u2 = self.d_r(&p);
        for i in 0..self.n_r {
            for j in 0..self.n_theta {
                let k = i * self.n_theta + j;
                u1[k] /= self.c1[i];
                u2[k] /= -self.c1[i];
            }
        }
        OracleField { u1, u2 }
    }

    /// `F(r)∂_θ`.
    pub fn zonal_field(&self, f: impl Fn(f64) -> f64) -> OracleField {
        self.sample_field(|r, _| (0.0, f(r)))
    }

    pub fn d_r(&self, v: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n_r as isize, self.n_theta);
        let at = |i: isize, j: usize| if i < 0 || i >= n { 0.0 } else { v[i as usize * m + j] };
        let mut out = vec![0.0; self.len()];
        for i in 0..n {
            for j in 0..m {
                out[i as usize * m + j] = (8.0 * (at(i + 1, j) - at(i - 1, j)) - (at(i + 2, j) - at(i - 2, j))) / (12.0 * self.dr);
            }
        }
        out
    }

    pub fn d_theta(&self, v: &[f64]) -> Vec<f64> {
        let m = self.n_theta;
        let mut out = vec![0.0; self.len()];
        for i in 0..self.n_r {
            let row = &v[i * m..(i + 1) * m];
            for j in 0..m {
                let at = |k: isize| row[(j as isize + k).rem_euclid(m as isize) as usize];
                out[i * m + j] = (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12.0 * self.dtheta);
            }
        }
        out
    }

    /// `∫∫ g dθ dr` over lattice values `g`.
    pub fn sum_coordinate(&self, g: &[f64]) -> f64 {
        g.iter().sum::<f64>() * self.dr * self.dtheta
    }

    /// `∫ f μ`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n_r {
            let row: f64 = f[i * self.n_theta..(i + 1) * self.n_theta].iter().sum();
            total += row * self.c1[i];
        }
        total * self.dr * self.dtheta
    }

    pub fn area(&self) -> f64 {
        self.integrate(&vec![1.0; self.len()])
    }

    fn weighted(&self, g: impl Fn(usize, usize) -> f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n_r {
            let mut row = 0.0;
            for j in 0..self.n_theta {
                row += g(i, i * self.n_theta + j);
            }
            total += row;
        }
        total * self.dr * self.dtheta
    }
}

/// `[X, Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i`.
pub fn oracle_lie_bracket(g: &OracleGrid, x: &OracleField, y: &OracleField) -> OracleField {
    let (xr1, xt1, xr2, xt2) = (g.d_r(&x.u1), g.d_theta(&x.u1), g.d_r(&x.u2), g.d_theta(&x.u2));
    let (yr1, yt1, yr2, yt2) = (g.d_r(&y.u1), g.d_theta(&y.u1), g.d_r(&y.u2), g.d_theta(&y.u2));
    let n = x.u1.len();
    let mut u1 = Vec::with_capacity(n);
    let mut u2 = Vec::with_capacity(n);
    for k in 0..n {
        let (a1, a2, b1, b2) = (x.u1[k], x.u2[k], y.u1[k], y.u2[k]);
        u1.push(a1 * yr1[k] + a2 * yt1[k] - b1 * xr1[k] - b2 * xt1[k]);
        u2.push(a1 * yr2[k] + a2 * yt2[k] - b1 * xr2[k] - b2 * xt2[k]);
    }
    OracleField { u1, u2 }
}

/// `⟨X, Y⟩ = ∫∫ (X₁Y₁ + c₁²X₂Y₂) c₁ dθ dr`.
pub fn oracle_inner(g: &OracleGrid, x: &OracleField, y: &OracleField) -> f64 {
    g.weighted(|i, k| {
        let c = g.c1[i];
        (x.u1[k] * y.u1[k] + c * c * x.u2[k] * y.u2[k]) * c
    })
}

/// `−‖[X,Y]‖² − ⟨X, [[X,Y],Y]⟩`.
pub fn oracle_mc_base(g: &OracleGrid, x: &OracleField, y: &OracleField) -> f64 {
    let w = oracle_lie_bracket(g, x, y);
    let wy = oracle_lie_bracket(g, &w, y);
    -oracle_inner(g, &w, &w) - oracle_inner(g, x, &wy)
}

/// `∫∫ c₂c₁²(X₂Y₁ − X₁Y₂) dθ dr`.
pub fn oracle_omega(g: &OracleGrid, x: &OracleField, y: &OracleField) -> f64 {
    g.weighted(|i, k| g.c2[i] * g.c1[i] * g.c1[i] * (x.u2[k] * y.u1[k] - x.u1[k] * y.u2[k]))
}

/// `∫∫ c₁²Y₁²F ċ₂ dr dθ`.
pub fn oracle_omega_closed_form(g: &OracleGrid, f: impl Fn(f64) -> f64, y: &OracleField) -> f64 {
    let fr: Vec<f64> = g.r.iter().map(|&r| f(r)).collect();
    g.weighted(|i, k| g.c1[i] * g.c1[i] * y.u1[k] * y.u1[k] * fr[i] * g.c2_dot[i])
}

/// `(∂_r(c₁X₁) + ∂_θ(c₁X₂)) / c₁`.
pub fn oracle_divergence(g: &OracleGrid, x: &OracleField) -> Vec<f64> {
    let m = g.n_theta;
    let scale = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().map(|(k, a)| a * g.c1[k / m]).collect() };
    let fr = g.d_r(&scale(&x.u1));
    let ft = g.d_theta(&scale(&x.u2));
    fr.iter().zip(&ft).enumerate().map(|(k, (a, b))| (a + b) / g.c1[k / m]).collect()
}

/// Laplace–Beltrami `c₁⁻¹∂_r(c₁∂_r f) + c₁⁻²∂²_θ f`.
pub fn oracle_laplacian(g: &OracleGrid, f: &[f64]) -> Vec<f64> {
    let m = g.n_theta;
    let fr: Vec<f64> = g.d_r(f).iter().enumerate().map(|(k, a)| a * g.c1[k / m]).collect();
    let radial = g.d_r(&fr);
    let angular = g.d_theta(&g.d_theta(f));
    (0..f.len())
        .map(|k| {
            let c = g.c1[k / m];
            radial[k] / c + angular[k] / (c * c)
        })
        .collect()
}

/// `∫₀^{t_s} (ḟ²‖Y‖² − f²·MC) dt` with `f = sin(t√(MC/s̃)/‖Y‖)`, `t_s = π‖Y‖√(s̃/MC)`,
/// by composite Simpson.
pub fn oracle_second_variation(mc: f64, y_norm: f64, s_tilde: f64) -> OracleResult<f64> {
    if !(mc > 0.0) {
        return Err(OracleError::NonPositiveCurvature(mc));
    }
    if !(y_norm > 0.0) || !(s_tilde > 0.0) {
        return Err(OracleError::Parameter(format!("‖Y‖ = {y_norm}, s̃ = {s_tilde}")));
    }
    let omega = (mc / s_tilde).sqrt() / y_norm;
    let t_s = PI * y_norm * (s_tilde / mc).sqrt();
    let integrand = |t: f64| {
        let f = (omega * t).sin();
        let fd = omega * (omega * t).cos();
        fd * fd * y_norm * y_norm - f * f * mc
    };
    Ok(simpson(integrand, 0.0, t_s, SIMPSON_PANELS))
}
