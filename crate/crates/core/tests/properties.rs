use std::f64::consts::PI;

use dispersia_core::harness::error_x;
use dispersia_core::model::DispersiveModel;
use dispersia_core::spectral::{free_propagate, twist, Grid, SpectralField};
use num_complex::Complex64;
use proptest::prelude::*;

/// Sum of a few Gaussian bumps, well inside `(−L, L)`.
fn bumps(grid: Grid, params: &[(f64, f64, f64, f64)]) -> SpectralField {
    SpectralField::from_fn(grid, |x| {
        params
            .iter()
            .map(|&(c, w, re, im)| Complex64::new(re, im) * (-(x - c) * (x - c) / w).exp())
            .sum()
    })
}

fn bump_params() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, 0.5..2.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..4)
}

fn model_strategy() -> impl Strategy<Value = DispersiveModel> {
    (2u32..=5, prop::collection::vec(-3.0..3.0f64, 2), 0.0..2.0f64, 1..=10i32).prop_map(
        |(kappa, tail, alpha, e)| {
            let mut coeffs = vec![1.0];
            coeffs.extend(tail.iter().take(DispersiveModel::coeff_count(kappa) - 1));
            DispersiveModel::new(kappa, coeffs, alpha, 2f64.powi(-e)).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(params in bump_params()) {
        let f = bumps(Grid::new(8.0, 256).unwrap(), &params);
        let physical = f.l2_norm().powi(2);
        let spectral = f.to_frequency().energy();
        prop_assert!((physical - spectral).abs() <= 1e-10 * physical.max(1e-300));
    }

    #[test]
    fn x_norm_is_scale_invariant(params in bump_params(), lambda in 0.25..4.0f64) {
        let g = Grid::new(8.0, 256).unwrap();
        let f = bumps(g, &params);
        let scaled_grid = Grid::new(8.0 / lambda, 256).unwrap();
        // same node values: φ(λ·) on the shrunken grid
        let scaled = SpectralField::from_values(scaled_grid, f.values().to_vec()).unwrap();
        let (a, b) = (f.x_norm(0), scaled.x_norm(0));
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn sup_norm_embedding(params in bump_params()) {
        let f = bumps(Grid::new(8.0, 256).unwrap(), &params);
        prop_assert!(f.max_abs() <= f.x_norm(0) / (2.0 * PI) + 1e-12);
    }

    #[test]
    fn free_flow_is_an_isometry(params in bump_params(), model in model_strategy(), z in -2.0..2.0f64) {
        let f = bumps(Grid::new(8.0, 128).unwrap(), &params);
        let g = free_propagate(&f, &model, z);
        prop_assert!((g.x_norm(0) - f.x_norm(0)).abs() <= 1e-12 * f.x_norm(0).max(1.0));
        let back = twist(&g, &model, z);
        prop_assert!(error_x(&back, &f, 0).unwrap() <= 1e-12 * f.x_norm(0).max(1.0));
    }

    #[test]
    fn error_x_triangle_inequality(
        a in bump_params(), b in bump_params(), c in bump_params(), j in 0u32..3
    ) {
        let g = Grid::new(8.0, 128).unwrap();
        let (fa, fb, fc) = (bumps(g, &a), bumps(g, &b), bumps(g, &c));
        let ab = error_x(&fa, &fb, j).unwrap();
        let bc = error_x(&fb, &fc, j).unwrap();
        let ac = error_x(&fa, &fc, j).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12 * (ab + bc).max(1.0));
        prop_assert_eq!(error_x(&fa, &fa, j).unwrap(), 0.0);
    }

    #[test]
    fn phase_factorization(model in model_strategy(), xi1 in -40.0..40.0f64, xi2 in -40.0..40.0f64) {
        let eps = model.epsilon();
        let direct = model.eval_phase(xi1, xi2);
        let factored = model.eval_phase_factored(xi1, xi2);
        let scale = model.dispersion_strength()
            * (model.eval_p_abs(xi1 / eps + xi2) + model.eval_p_abs(xi2));
        prop_assert!((direct - factored).abs() <= 1e-10 * scale);
        prop_assert_eq!(model.eval_phase(0.0, xi2), 0.0);
        prop_assert_eq!(model.eval_phase_factored(0.0, xi2), 0.0);
    }

    #[test]
    fn even_phase_vanishes_on_reflection(alpha in 0.0..2.0f64, e in 1..=8i32, xi2 in -10.0..10.0f64) {
        let eps = 2f64.powi(-e);
        let m = DispersiveModel::new(4, vec![1.0, -2.0], alpha, eps).unwrap();
        // η = ξ₁ + 2εξ₂ = 0
        prop_assert_eq!(m.eval_phase_factored(-2.0 * eps * xi2, xi2), 0.0);
    }
}

/// `g(y) = Σ_j ε^{2j} d̃_{κ−2j} (κ−2j) y^{κ−2j}` with `d̃_r = d_r / 2^{r−1}`.
fn g(m: &DispersiveModel, y: f64) -> f64 {
    let eps = m.epsilon();
    m.coeffs()
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let r = m.power(j);
            eps.powi(2 * j as i32) * d / 2f64.powi(r as i32 - 1) * r as f64 * y.powi(r as i32)
        })
        .sum()
}

#[test]
fn g_increment_dominated_by_leading_power() {
    let eps = 2f64.powi(-6);
    let c0 = 16.0;
    for (kappa, coeffs) in [
        (2, vec![1.0]),
        (3, vec![1.0, -3.0]),
        (4, vec![1.0, -3.0]),
        (5, vec![1.0, 3.0, -3.0]),
    ] {
        let m = DispersiveModel::new(kappa, coeffs, 1.0, eps).unwrap();
        let lo = c0 * eps;
        let nodes: Vec<f64> = (0..120).map(|i| lo * (1.05f64).powi(i)).collect();
        let mut min_ratio = f64::INFINITY;
        for (i, &x) in nodes.iter().enumerate() {
            for &y in &nodes[i + 1..] {
                let ratio = (g(&m, y) - g(&m, x)) / (y.powi(kappa as i32) - x.powi(kappa as i32));
                min_ratio = min_ratio.min(ratio);
            }
        }
        // leading term alone gives κ / 2^{κ−1}
        let lead = kappa as f64 / 2f64.powi(kappa as i32 - 1);
        assert!(min_ratio > 0.5 * lead, "kappa {kappa}: {min_ratio}");
    }
}
