mod common;

use std::sync::{Arc, OnceLock};

use common::*;
use proptest::prelude::*;
use zcl_core::curvature::{cocycle_omega, jacobi_residual_omega, mc_extended_value, theorem_main_gap};
use zcl_core::fields::lie_bracket;
use zcl_core::{Grid, RadialBump, VectorField, ZonalSpec};

fn grid() -> Arc<Grid> {
    static GRID: OnceLock<Arc<Grid>> = OnceLock::new();
    GRID.get_or_init(|| Grid::new(1.5, 129, 64).unwrap()).clone()
}

fn field(c: &[f64]) -> VectorField {
    let g = grid();
    family(&g).field(&g, c).unwrap()
}

fn coefficients() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 32)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bracket_is_antisymmetric(a in coefficients(), b in coefficients()) {
        let (x, y) = (field(&a), field(&b));
        let xy = lie_bracket(&x, &y).unwrap();
        let yx = lie_bracket(&y, &x).unwrap();
        let sum = xy.add_scaled(1.0, &yx).unwrap();
        prop_assert!(sum.max_length() <= 1e-14 * xy.max_length().max(1.0));
    }

    #[test]
    fn omega_is_bilinear_and_antisymmetric(a in coefficients(), b in coefficients(), c in coefficients(), k in -3.0..3.0f64) {
        let (x, y, z) = (field(&a), field(&b), field(&c));
        let scale = (x.norm() + k.abs() * z.norm()) * y.norm();
        let xy = cocycle_omega(&x, &y).unwrap();
        prop_assert!((xy + cocycle_omega(&y, &x).unwrap()).abs() <= 1e-14 * scale);
        let combined = cocycle_omega(&x.add_scaled(k, &z).unwrap(), &y).unwrap();
        let split = xy + k * cocycle_omega(&z, &y).unwrap();
        prop_assert!((combined - split).abs() <= 1e-13 * scale);
    }

    #[test]
    fn extended_curvature_is_affine_in_a(a in coefficients(), b in coefficients(), t in 0.1..3.0f64) {
        let (x, y) = (field(&a), field(&b));
        let m0 = mc_extended_value(&x, &y, 0.0).unwrap();
        let m1 = mc_extended_value(&x, &y, t).unwrap();
        let m2 = mc_extended_value(&x, &y, 2.0 * t).unwrap();
        let scale = m0.mc_extended.abs() + t * m0.omega_bracket.abs() + 1e-300;
        prop_assert!((m2.mc_extended - 2.0 * m1.mc_extended + m0.mc_extended).abs() <= 1e-12 * scale);
        prop_assert!((m1.mc_extended - m0.mc_extended + t * m0.omega_bracket).abs() <= 1e-12 * scale);
    }

    #[test]
    fn cocycle_satisfies_jacobi(a in coefficients(), b in coefficients(), c in coefficients()) {
        let j = jacobi_residual_omega(&field(&a), &field(&b), &field(&c)).unwrap();
        prop_assert!(j.residual.abs() < 1e-7 * j.scale, "{} vs {}", j.residual, j.scale);
    }

    #[test]
    fn west_facing_gap_is_nonnegative(b in coefficients(), amp in 0.1..2.0f64, center in -0.2..0.2f64, t in 0.1..3.0f64) {
        let g = grid();
        let bump = RadialBump { center: center * g.d(), half_width: 0.65 * g.d() };
        let z = ZonalSpec::bump(g.clone(), -amp, bump, margin(&g)).unwrap();
        let report = theorem_main_gap(&z, t, &field(&b)).unwrap();
        prop_assert!(report.direct >= -1e-9 * report.scale);
        if !report.degenerate {
            prop_assert!(report.direct > 0.0);
        }
    }
}
