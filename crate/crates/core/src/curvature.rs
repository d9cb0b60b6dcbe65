//! Misiołek curvature on `SDiff(M_s)` and on its central extension by the
//! Coriolis cocycle `Ω(X, Y) = ⟨B★X, Y⟩`, `B = c₂`.
//!
//! With `W = [X, Y]` the base curvature is `MC = −‖W‖² − ⟨X, [W, Y]⟩` and the
//! extended one, for `(X, a)` and `(Y, b)`, is `MC − Ω(X, Y)² − a Ω(W, Y)`.
//! The `ℝ`-component `b` of the second argument never enters.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    self, bracket_of_jets, check_same, covariant_of_jet, hodge_star, inner, lie_bracket, project, zonal,
    Jet, VectorField, ZonalSpec,
};
use crate::surface::Grid;

/// Default bound on the relative stationarity residual `‖P(∇_X X)‖ / ‖∇_X X‖`.
pub const STATIONARITY_TOLERANCE: f64 = 1e-8;
/// Agreement required between the direct gap and `−a` times the closed form.
pub const GAP_TOLERANCE: f64 = 1e-8;
/// Below this fraction of its scale the closed-form integral counts as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;

/// An element `(X, a)` of `g ⊕ ℝ`.
#[derive(Debug, Clone)]
pub struct ExtendedVector {
    pub field: VectorField,
    pub scalar: f64,
}

impl ExtendedVector {
    pub fn new(field: VectorField, scalar: f64) -> Self {
        Self { field, scalar }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub s: f64,
    pub d: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl GridInfo {
    pub fn of(grid: &Grid) -> Self {
        Self { s: grid.s(), d: grid.d(), n_r: grid.n_r(), n_theta: grid.n_theta() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub mc_base: f64,
    pub mc_extended: f64,
    pub omega_xy: f64,
    /// `Ω([X, Y], Y)`.
    pub omega_bracket: f64,
    /// `mc_extended − mc_base`.
    pub gap: f64,
    pub mc_nabla_crosscheck: f64,
    pub residuals: BTreeMap<String, f64>,
    pub grid: GridInfo,
    pub params: ReportParams,
}

/// The pieces of the extended curvature, from one shared evaluation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureParts {
    pub mc_base: f64,
    pub omega_xy: f64,
    pub omega_bracket: f64,
    pub mc_extended: f64,
}

impl CurvatureParts {
    /// Re-evaluates `mc_base − omega_xy² − a·omega_bracket`.
    pub fn recombine(&self, a: f64) -> f64 {
        self.mc_base - self.omega_xy * self.omega_xy - a * self.omega_bracket
    }
}

fn ratio(value: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        value / scale
    } else {
        value
    }
}

/// `MC_{X,Y} = −‖[X,Y]‖² − ⟨X, [[X,Y],Y]⟩`.
pub fn mc_base(x: &VectorField, y: &VectorField) -> Result<f64> {
    check_same(&x.grid, &y.grid)?;
    let yj = Jet::new(y);
    let w = bracket_of_jets(&Jet::new(x), &yj);
    let wy = bracket_of_jets(&Jet::new(&w), &yj);
    Ok(-inner(&w, &w)? - inner(x, &wy)?)
}

/// `⟨B★X, Y⟩ = ∫∫ c₂ c₁² (X₂Y₁ − X₁Y₂) dθ dr`.
///
/// The projection in `⟨P(B★X), Y⟩` drops out because `P` is self-adjoint and
/// fixes the divergence-free `Y`.
pub fn cocycle_omega(x: &VectorField, y: &VectorField) -> Result<f64> {
    check_same(&x.grid, &y.grid)?;
    let g = &x.grid;
    let p = g.profile();
    let mut integrand = Array2::zeros(g.shape());
    Zip::indexed(&mut integrand)
        .and(&x.comp_r)
        .and(&x.comp_theta)
        .and(&y.comp_r)
        .and(&y.comp_theta)
        .for_each(|(i, _), o, &x1, &x2, &y1, &y2| {
            *o = p.c2[i] * p.c1[i] * p.c1[i] * (x2 * y1 - x1 * y2);
        });
    Ok(g.integrate_coordinate(integrand.view()))
}

/// `⟨P(B★X), Y⟩` with the projection carried out; a cross-check on [`cocycle_omega`].
pub fn cocycle_omega_projected(x: &VectorField, y: &VectorField) -> Result<f64> {
    check_same(&x.grid, &y.grid)?;
    let g = &x.grid;
    let star = hodge_star(x);
    let c2 = g.radial(&g.profile().c2);
    let bx = VectorField::new(g.clone(), &star.comp_r * &c2, &star.comp_theta * &c2)?;
    inner(&project(&bx)?, y)
}

/// `∫∫ c₁² Y₁² F ċ₂ dr dθ`, which equals `Ω(Y, [Y, Z])` for `Z = F∂_θ`.
pub fn omega_zonal_closed_form(z: &ZonalSpec, y: &VectorField) -> Result<f64> {
    check_same(&z.grid, &y.grid)?;
    let g = &y.grid;
    let p = g.profile();
    let mut integrand = Array2::zeros(g.shape());
    Zip::indexed(&mut integrand).and(&y.comp_r).for_each(|(i, _), o, &y1| {
        *o = p.c1[i] * p.c1[i] * y1 * y1 * z.f[i] * p.c2_dot[i];
    });
    Ok(g.integrate_coordinate(integrand.view()))
}

/// All terms of the extended curvature from a single evaluation; the search
/// objective and [`mc_extended`] both go through here.
pub fn mc_extended_value(x: &VectorField, y: &VectorField, a: f64) -> Result<CurvatureParts> {
    check_same(&x.grid, &y.grid)?;
    let yj = Jet::new(y);
    let w = bracket_of_jets(&Jet::new(x), &yj);
    let wy = bracket_of_jets(&Jet::new(&w), &yj);
    let mc_base = -inner(&w, &w)? - inner(x, &wy)?;
    let omega_xy = cocycle_omega(x, y)?;
    let omega_bracket = cocycle_omega(&w, y)?;
    let parts = CurvatureParts { mc_base, omega_xy, omega_bracket, mc_extended: 0.0 };
    Ok(CurvatureParts { mc_extended: parts.recombine(a), ..parts })
}

/// `‖P(∇_X X)‖ / ‖∇_X X‖`; zero for stationary `X`.
pub fn stationarity_residual(x: &VectorField) -> Result<f64> {
    let nxx = fields::covariant_derivative(x, x)?;
    let size = nxx.norm();
    if size == 0.0 {
        return Ok(0.0);
    }
    Ok(project(&nxx)?.norm() / size)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NablaCurvature {
    pub value: f64,
    pub stationarity: f64,
    /// False when `X` fails the stationarity test, in which case `value` need
    /// not equal [`mc_base`].
    pub reliable: bool,
}

/// `⟨∇_X [X,Y] + ∇_{[X,Y]} X, Y⟩`, valid as a curvature for stationary `X`.
pub fn mc_nabla(x: &VectorField, y: &VectorField) -> Result<NablaCurvature> {
    check_same(&x.grid, &y.grid)?;
    let xj = Jet::new(x);
    let w = bracket_of_jets(&xj, &Jet::new(y));
    let sum = covariant_of_jet(x, &Jet::new(&w)).add_scaled(1.0, &covariant_of_jet(&w, &xj))?;
    let value = inner(&sum, y)?;
    let stationarity = stationarity_residual(x)?;
    Ok(NablaCurvature { value, stationarity, reliable: stationarity <= STATIONARITY_TOLERANCE })
}

/// Size against which `mc_base` and `mc_nabla` are compared.
fn mc_scale(x: &VectorField, y: &VectorField) -> Result<f64> {
    let w = lie_bracket(x, y)?;
    Ok(w.norm().powi(2) + x.norm() * lie_bracket(&w, y)?.norm())
}

/// Extended curvature of `(X, a)` against `(Y, b)`; `a = x.scalar`.
pub fn mc_extended(x: &ExtendedVector, y: &ExtendedVector) -> Result<MCReport> {
    let a = x.scalar;
    let (xf, yf) = (&x.field, &y.field);
    let parts = mc_extended_value(xf, yf, a)?;
    let nabla = mc_nabla(xf, yf)?;

    let mut residuals = BTreeMap::new();
    let size = parts.mc_base.abs() + parts.omega_xy.powi(2) + (a * parts.omega_bracket).abs();
    residuals.insert(
        "mc_extended_consistency".to_string(),
        ratio((parts.mc_extended - parts.recombine(a)).abs(), size),
    );
    residuals.insert(
        "mc_nabla_vs_base".to_string(),
        ratio((nabla.value - parts.mc_base).abs(), mc_scale(xf, yf)?),
    );
    residuals.insert("stationarity".to_string(), nabla.stationarity);

    Ok(MCReport {
        mc_base: parts.mc_base,
        mc_extended: parts.mc_extended,
        omega_xy: parts.omega_xy,
        omega_bracket: parts.omega_bracket,
        gap: parts.mc_extended - parts.mc_base,
        mc_nabla_crosscheck: nabla.value,
        residuals,
        grid: GridInfo::of(&xf.grid),
        params: ReportParams { a },
    })
}

/// Natural size of the gap integrand: `max(c₁|F|)·‖Y‖²` bounds `∫∫ c₁²Y₁²|F|ċ₂`.
pub fn gap_scale(z: &ZonalSpec, y: &VectorField) -> f64 {
    let c1 = &z.grid.profile().c1;
    let peak = z.f.iter().zip(c1.iter()).fold(0.0f64, |m, (f, c)| m.max((f * c).abs()));
    peak * y.norm().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `mc_extended − mc_base` from the full evaluation.
    pub direct: f64,
    /// `−a ∫∫ c₁²Y₁²F ċ₂`.
    pub closed_form: f64,
    pub integral: f64,
    /// [`gap_scale`], without the factor `a`.
    pub scale: f64,
    /// The integrand vanishes to tolerance, so the inequality degenerates to equality.
    pub degenerate: bool,
}

/// Gap between extended and base curvature for a west-facing zonal flow.
///
/// Both the direct difference and the closed form are returned; disagreement
/// beyond [`GAP_TOLERANCE`] relative to `a·scale` is an error.
pub fn theorem_main_gap(z: &ZonalSpec, a: f64, y: &VectorField) -> Result<GapReport> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("Coriolis parameter a = {a} must be positive")));
    }
    if let Some((i, &v)) = z.f.iter().enumerate().find(|(_, &v)| v > 0.0) {
        return Err(Error::NotWestFacing { r: z.grid.r_nodes()[i], value: v });
    }
    let zf = zonal(z)?;
    let parts = mc_extended_value(&zf, y, a)?;
    let direct = parts.mc_extended - parts.mc_base;
    let integral = omega_zonal_closed_form(z, y)?;
    let closed_form = -a * integral;
    let scale = gap_scale(z, y);
    if (direct - closed_form).abs() > GAP_TOLERANCE * a * scale {
        return Err(Error::GapMismatch { direct, closed_form });
    }
    let degenerate = integral.abs() <= DEGENERACY_THRESHOLD * scale;
    Ok(GapReport { direct, closed_form, integral, scale, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiResidual {
    pub residual: f64,
    /// `max|c₂|·(‖[X,Y]‖‖Z‖ + ‖[Z,X]‖‖Y‖ + ‖[Y,Z]‖‖X‖)`.
    pub scale: f64,
}

impl JacobiResidual {
    pub fn relative(&self) -> f64 {
        ratio(self.residual.abs(), self.scale)
    }
}

/// `Ω([X,Y],Z) + Ω([Z,X],Y) + Ω([Y,Z],X)`.
pub fn jacobi_residual_omega(x: &VectorField, y: &VectorField, z: &VectorField) -> Result<JacobiResidual> {
    let xy = lie_bracket(x, y)?;
    let zx = lie_bracket(z, x)?;
    let yz = lie_bracket(y, z)?;
    let residual = cocycle_omega(&xy, z)? + cocycle_omega(&zx, y)? + cocycle_omega(&yz, x)?;
    let b_max = x.grid.profile().c2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = b_max * (xy.norm() * z.norm() + zx.norm() * y.norm() + yz.norm() * x.norm());
    Ok(JacobiResidual { residual, scale })
}

/// `(π/2)(1 − s̃)‖Y‖√(MC/s̃)`.
pub fn second_variation_closed_form(mc: f64, y_norm: f64, s_tilde: f64) -> Result<f64> {
    if !(mc > 0.0) {
        return Err(Error::NonPositiveCurvature(mc));
    }
    if !(y_norm > 0.0) || !(s_tilde > 0.0) || !y_norm.is_finite() || !s_tilde.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need ‖Y‖ > 0 and s̃ > 0, got {y_norm} and {s_tilde}"
        )));
    }
    Ok(FRAC_PI_2 * (1.0 - s_tilde) * y_norm * (mc / s_tilde).sqrt())
}

/// Named relative residuals of every identity for `(Z, a)` against `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub residuals: BTreeMap<String, f64>,
}

impl IdentityResiduals {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals.get(name).copied()
    }

    /// Names whose residual exceeds `tol`, or is not a number.
    pub fn failures(&self, tol: impl Fn(&str) -> f64) -> Vec<String> {
        self.residuals
            .iter()
            .filter(|(k, v)| !(v.abs() <= tol(k)))
            .map(|(k, _)| k.clone())
            .collect()
    }
}

/// Residual names reported by [`verify_all_identities`].
pub mod residual {
    pub const OMEGA_ZONAL: &str = "omega_zonal";
    pub const OMEGA_CLOSED_FORM: &str = "omega_closed_form";
    pub const GAP_CLOSED_FORM: &str = "gap_closed_form";
    pub const MC_NABLA_VS_BASE: &str = "mc_nabla_vs_base";
    pub const MC_EXTENDED_CONSISTENCY: &str = "mc_extended_consistency";
    pub const JACOBI: &str = "jacobi";
    pub const STATIONARITY: &str = "stationarity";
    pub const DIVERGENCE: &str = "divergence";
    pub const SUPPORT: &str = "support";
}

/// Runs every identity on `(Z, a)` and `Y`. Thresholds are left to the caller.
///
/// The Jacobi check uses the triple `(Z, Y, [Z, Y])`; `support` is the largest
/// field length outside the band of half-width `d − margin`, relative to the
/// largest overall.
pub fn verify_all_identities(z: &ZonalSpec, a: f64, y: &VectorField) -> Result<IdentityResiduals> {
    use residual::*;
    check_same(&z.grid, &y.grid)?;
    let zf = zonal(z)?;
    let parts = mc_extended_value(&zf, y, a)?;
    let zy = lie_bracket(&zf, y)?;
    let y_norm = y.norm();
    let scale = gap_scale(z, y);
    let integral = omega_zonal_closed_form(z, y)?;
    let nabla = mc_nabla(&zf, y)?;

    let mut r = BTreeMap::new();
    r.insert(OMEGA_ZONAL.to_string(), ratio(parts.omega_xy.abs(), zf.norm() * y_norm));
    let yz = zy.scaled(-1.0);
    r.insert(OMEGA_CLOSED_FORM.to_string(), ratio((cocycle_omega(y, &yz)? - integral).abs(), scale));
    let direct = parts.mc_extended - parts.mc_base;
    r.insert(GAP_CLOSED_FORM.to_string(), ratio((direct + a * integral).abs(), a.abs() * scale));
    r.insert(
        MC_NABLA_VS_BASE.to_string(),
        ratio((nabla.value - parts.mc_base).abs(), mc_scale(&zf, y)?),
    );
    let size = parts.mc_base.abs() + parts.omega_xy.powi(2) + (a * parts.omega_bracket).abs();
    r.insert(
        MC_EXTENDED_CONSISTENCY.to_string(),
        ratio((parts.mc_extended - parts.recombine(a)).abs(), size),
    );
    r.insert(JACOBI.to_string(), jacobi_residual_omega(&zf, y, &zy)?.relative());
    r.insert(STATIONARITY.to_string(), nabla.stationarity);
    r.insert(DIVERGENCE.to_string(), fields::relative_divergence(y));
    r.insert(SUPPORT.to_string(), ratio(y.support_violation(z.margin), y.max_length()));
    Ok(IdentityResiduals { residuals: r })
}
