#![allow(dead_code)]

use std::sync::Arc;

use zcl_core::fields::WINDOW_SHARPNESS;
use zcl_core::search::PerturbationFamily;
use zcl_core::{Grid, RadialBump, VectorField};
use zcl_oracle::{ModalStream, OracleGrid, OracleSurface};

pub const ORACLE_FACTOR: usize = 4;

pub fn margin(grid: &Grid) -> f64 {
    0.1 * grid.d()
}

pub fn family(grid: &Grid) -> PerturbationFamily {
    PerturbationFamily::with_default_basis(grid, margin(grid), vec![1, 2, 3, 4])
}

/// Unit-norm draw `index` from the default family, plus the same ψ for the oracle.
pub fn random_y(grid: &Arc<Grid>, seed: u64, index: u64) -> (VectorField, ModalStream) {
    let fam = family(grid);
    let c = fam.sample(grid, seed, index).unwrap();
    let y = fam.field(grid, &c).unwrap();
    (y, modal(&fam, c))
}

pub fn modal(fam: &PerturbationFamily, coefficients: Vec<f64>) -> ModalStream {
    ModalStream {
        windows: fam.radial_basis.iter().map(|b| (b.center, b.half_width)).collect(),
        m_list: fam.m_list.clone(),
        coefficients,
        sharpness: WINDOW_SHARPNESS,
    }
}

pub fn oracle_grid(grid: &Grid) -> OracleGrid {
    let surface = Arc::new(OracleSurface::new(grid.s()).unwrap());
    OracleGrid::refined(surface, grid.n_r(), grid.n_theta(), ORACLE_FACTOR).unwrap()
}

pub fn oracle_profile(b: RadialBump, amplitude: f64) -> impl Fn(f64) -> f64 {
    move |r| amplitude * zcl_oracle::window((r - b.center) / b.half_width, WINDOW_SHARPNESS)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}
