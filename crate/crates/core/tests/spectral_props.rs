use std::f64::consts::PI;

use incoh_core::liouvillian::{assemble, trace, Model, ModelParams};
use incoh_core::single_particle::{build_momentum_block, lambda_inc, momentum_grid};
use incoh_core::spectral::{
    compute_metrics, conjugation_defect, diagonalize, diagonalize_dense, multiset_distance, DiagOptions,
};
use incoh_core::C64;
use proptest::prelude::*;

fn small_model() -> impl Strategy<Value = ModelParams> {
    let hard = (3usize..7, 0.0..0.6f64, 0.1..2.0f64)
        .prop_flat_map(|(l, j, g)| (Just(l), 1..=l.min(3), Just(j), Just(g)))
        .prop_map(|(l, n, j, g)| ModelParams::hardcore(l, n, j, g));
    let soft = (3usize..5, 1usize..3, 0.0..0.6f64, 0.1..2.0f64, -2.0..2.0f64)
        .prop_map(|(l, n, j, g, u)| ModelParams::bose_hubbard(l, n, j, g, u));
    prop_oneof![hard, soft]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn general_spectral_properties(p in small_model()) {
        let (b, m) = assemble(&p).unwrap();
        let modes = diagonalize(&m, &b, &DiagOptions::default()).unwrap();
        prop_assert!(modes.residuals_ok());
        let r = modes.verify_appendix_a().unwrap();
        prop_assert!(r.max_re <= 1e-9, "{r:?}");
        prop_assert!(r.conjugation_defect <= 1e-8, "{r:?}");
        prop_assert!(r.max_nonzero_trace <= 1e-8, "{r:?}");
        prop_assert!(conjugation_defect(modes.eigenvalues()) <= 1e-8);
        // each nonzero mode is traceless in its own right
        for a in 0..modes.len() {
            if modes.eigenvalues()[a].norm() > 1e-8 {
                prop_assert!(trace(&modes.mode_matrix(a)).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn steady_mode_is_fully_bound(p in small_model()) {
        // Σ_l n_l² = N only without double occupancy
        prop_assume!(p.j > 0.05 && p.model == Model::Hardcore);
        let (b, m) = assemble(&p).unwrap();
        let modes = diagonalize(&m, &b, &DiagOptions::default()).unwrap();
        let metrics = compute_metrics(&modes, &b);
        let steady = modes.steady_indices();
        prop_assert_eq!(steady.len(), 1);
        prop_assert!((metrics[steady[0]].n_b - p.n as f64).abs() <= 1e-10);
    }

    #[test]
    fn momentum_blocks_reproduce_the_dense_spectrum(p in small_model()) {
        let (b, m) = assemble(&p).unwrap();
        let blocked = diagonalize(&m, &b, &DiagOptions::default()).unwrap();
        let dense = diagonalize_dense(&m, &DiagOptions::default()).unwrap();
        prop_assert!(multiset_distance(blocked.eigenvalues(), dense.eigenvalues()) <= 1e-8);
    }
}

#[test]
fn blocks_match_dense_at_twelve_sites() {
    let (b, m) = assemble(&ModelParams::hardcore(12, 1, 0.23, 1.0)).unwrap();
    let blocked = diagonalize(&m, &b, &DiagOptions::default()).unwrap();
    let dense = diagonalize_dense(&m, &DiagOptions::default()).unwrap();
    assert!(multiset_distance(blocked.eigenvalues(), dense.eigenvalues()) <= 1e-8);
}

#[test]
fn relative_coordinate_blocks_cover_the_one_particle_spectrum() {
    for (l, j) in [(10, 0.15), (11, 0.3)] {
        let (b, m) = assemble(&ModelParams::hardcore(l, 1, j, 1.0)).unwrap();
        let full = diagonalize(&m, &b, &DiagOptions::default()).unwrap();
        let mut union = Vec::new();
        for k in momentum_grid(l) {
            union.extend(build_momentum_block(k, j, 1.0, l).unwrap().matrix.eigenvalues().unwrap());
        }
        assert!(multiset_distance(&union, full.eigenvalues()) <= 1e-8, "L={l}");
    }
}

#[test]
fn zero_hopping_degeneracies() {
    // hard-core L=6, N=2: D=15, levels −n with C(2,n)·… counted directly
    let (_, m) = assemble(&ModelParams::hardcore(6, 2, 0.0, 1.0)).unwrap();
    let modes = diagonalize_dense(&m, &DiagOptions::default()).unwrap();
    let count = |x: f64| modes.eigenvalues().iter().filter(|z| (**z - C64::new(x, 0.0)).norm() < 1e-9).count();
    // pairs of configurations sharing n occupied sites: D·C(N,n)·C(L−N, N−n)
    assert_eq!([count(0.0), count(-1.0), count(-2.0)], [15, 120, 90]);
    let (_, m) = assemble(&ModelParams::bose_hubbard(4, 2, 0.0, 1.0, 1.0)).unwrap();
    let modes = diagonalize_dense(&m, &DiagOptions::default()).unwrap();
    let zero = modes.eigenvalues().iter().filter(|z| z.norm() < 1e-9).count();
    let minus = modes.eigenvalues().iter().filter(|z| (**z + 1.0).norm() < 1e-9).count();
    assert_eq!((zero, minus), (10, 4 * 3 * 2));
}

#[test]
fn zone_boundary_mode_turns_complex_at_the_critical_hopping() {
    // large-L block; the bound state is the eigenvalue nearest λ_inc(π)
    let l = 200;
    for (j, complex) in [(0.2, false), (0.24, false), (0.26, true), (0.3, true)] {
        let ev = build_momentum_block(PI, j, 1.0, l).unwrap().matrix.eigenvalues().unwrap();
        let target = lambda_inc(PI, j, 1.0);
        let z = ev.iter().min_by(|a, b| (**a - target).norm().total_cmp(&(**b - target).norm())).unwrap();
        // above J_c the mode joins the Re λ = −γ band, spaced ~4πJ/L
        let tol = if complex { 2e-2 } else { 1e-3 };
        assert!((z - target).norm() < tol, "J={j}: {z} vs {target}");
        assert_eq!(z.im.abs() > 1e-6, complex, "J={j}: {z}");
    }
}
