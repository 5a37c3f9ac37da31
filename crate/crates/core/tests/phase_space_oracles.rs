use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;
use thermolim::fock::{cat_norm_factor, cat_state, choose_cutoff, coherent_state, FieldState};
use thermolim::propagator::evolve_cat_leading;
use thermolim::wigner::{
    branch_amplitudes, branch_wigner_closed, cat_wigner_closed, center, default_grid,
    fringe_offset, fringe_phase, fringe_visibility, fringe_wavevector, time_average,
    time_average_values, w_int_closed, wigner_numeric, wigner_numeric_batch, GridSpec, WignerGrid,
    PHASE_COEFFICIENT,
};
use thermolim::ModelParams;

fn params(n: usize, g: f64) -> ModelParams {
    ModelParams::new(1.0, 0.0, g, n).unwrap()
}

#[test]
fn evolved_cat_integrates_to_one() {
    let p = params(4, 0.25);
    let (alpha, phi) = (2.0, FRAC_PI_2);
    let ncut = choose_cutoff(&p, PI, alpha, 0);
    for t in [0.0, 0.7, PI] {
        let (g1, g2) = branch_amplitudes(&p, alpha, phi, t);
        let grid = GridSpec::covering(&[center(g1), center(g2)], 6.0, 0.1).unwrap();
        let w =
            wigner_numeric(&evolve_cat_leading(&p, alpha, phi, t, ncut).unwrap(), &grid).unwrap();
        let mass = w.riemann_sum();
        assert!((0.98..=1.02).contains(&mass));
        assert!((mass - 1.0).abs() < 1e-3, "t = {t}: {mass}");
    }
}

#[test]
fn numeric_grid_matches_closed_form() {
    let p = params(2, 0.3);
    let (alpha, phi, t) = (1.5, 1.1, 2.2);
    let ncut = choose_cutoff(&p, t, alpha, 0);
    let grid = default_grid(&p, alpha, phi, t, 5.0, 0.2).unwrap();
    let numeric =
        wigner_numeric(&evolve_cat_leading(&p, alpha, phi, t, ncut).unwrap(), &grid).unwrap();
    let closed = cat_wigner_closed(&p, alpha, phi, t, &grid).unwrap();
    assert!(numeric.max_abs_diff(&closed).unwrap() < 1e-6);
}

#[test]
fn vacuum_peak_value() {
    let grid = GridSpec::new(-1.0, 1.0, -1.0, 1.0, 9, 9).unwrap();
    let w = wigner_numeric(&FieldState::vacuum(20), &grid).unwrap();
    assert!((w.get(4, 4) - 1.0 / PI).abs() < 1e-12);
    assert!((w.get(8, 4) - (-1.0f64).exp() / PI).abs() < 1e-12);
}

#[test]
fn fringe_offset_doubles_with_n() {
    // at ωt = π and φ = π/2 the fringe offset is 8α(Ng/ω)
    let (alpha, phi, g) = (1.0, FRAC_PI_2, 0.03);
    let offset = |n: usize| {
        let p = params(n, g);
        let (g1, g2) = branch_amplitudes(&p, alpha, phi, PI);
        let grid = GridSpec::covering(&[center((g1 + g2) / 2.0)], 3.5, 0.05).unwrap();
        let w = w_int_closed(&p, alpha, phi, PI, &grid).unwrap();
        fringe_phase(&w, fringe_wavevector(alpha, phi, PI))
    };
    let (o4, o8) = (offset(4), offset(8));
    assert!((o4 - 8.0 * alpha * 4.0 * g).abs() < 1e-6, "{o4}");
    assert!((o8 / o4 - 2.0).abs() < 1e-6, "{o8} vs {o4}");
}

#[test]
fn fringe_zero_crossings_grow_with_time_dependent_phase() {
    let (alpha, phi, g) = (2.0, FRAC_PI_2, 0.25);
    let count = |n: usize| {
        let p = params(n, g);
        let samples = 4096;
        let values: Vec<f64> = (0..=samples)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / samples as f64;
                let off = fringe_offset(&p, alpha, phi, t, PHASE_COEFFICIENT);
                off.cos()
            })
            .collect();
        values
            .windows(2)
            .filter(|w| w[0].signum() != w[1].signum())
            .count()
    };
    let counts: Vec<usize> = [2usize, 4, 8, 16].iter().map(|&n| count(n)).collect();
    assert!(counts.windows(2).all(|w| w[1] > w[0]), "{counts:?}");
    let slope = (counts[3] as f64 / counts[1] as f64).ln() / 4f64.ln();
    assert!((slope - 1.0).abs() < 0.1, "{counts:?}");
}

#[test]
fn static_cat_visibility() {
    let (alpha, phi) = (2.0, FRAC_PI_2);
    let p = params(2, 0.25);
    let n2 = cat_norm_factor(alpha, phi).powi(2);
    let grid = GridSpec::covering(
        &[(0.0, 2.0 * 2f64.sqrt()), (0.0, -2.0 * 2f64.sqrt())],
        6.0,
        0.1,
    )
    .unwrap();
    let full = wigner_numeric(&cat_state(alpha, phi, 60).unwrap().0, &grid).unwrap();
    let branches = branch_wigner_closed(&p, alpha, phi, 0.0, &grid).unwrap();
    let branches = branches.combine(n2, &branches, 0.0).unwrap();
    let v = fringe_visibility(&full, &branches).unwrap();
    // fringe envelope 2/π against branch peaks 1/π, both weighted by 𝒩²
    assert!((v - 2.0).abs() < 1e-2, "visibility {v}");
}

#[test]
fn identical_grids_have_zero_visibility() {
    let grid = GridSpec::new(-3.0, 3.0, -3.0, 3.0, 31, 31).unwrap();
    let w = wigner_numeric(
        &coherent_state(Complex64::new(0.5, 0.2), 30).unwrap(),
        &grid,
    )
    .unwrap();
    assert_eq!(fringe_visibility(&w, &w).unwrap(), 0.0);
    let zero = WignerGrid::from_values(grid, vec![0.0; grid.len()]).unwrap();
    assert!(fringe_visibility(&w, &zero).is_err());
}

#[test]
fn time_averaged_visibility_drops_with_n() {
    let (alpha, phi, g) = (2.0, FRAC_PI_2, 0.25);
    let n2 = cat_norm_factor(alpha, phi).powi(2);
    let visibility = |n: usize| {
        let p = params(n, g);
        let grid = default_grid(&p, alpha, phi, 2.0 * PI, 6.0, 0.1).unwrap();
        let full = time_average(
            |t| cat_wigner_closed(&p, alpha, phi, t, &grid),
            0.0,
            2.0 * PI,
            64,
        )
        .unwrap();
        let branches = time_average(
            |t| branch_wigner_closed(&p, alpha, phi, t, &grid),
            0.0,
            2.0 * PI,
            64,
        )
        .unwrap();
        assert!(full.converged && branches.converged);
        fringe_visibility(
            &full.value,
            &branches.value.combine(n2, &branches.value, 0.0).unwrap(),
        )
        .unwrap()
    };
    let (v2, v16) = (visibility(2), visibility(16));
    assert!(v16 < v2, "N=2: {v2}, N=16: {v16}");
}

#[test]
fn average_of_cosine_over_period_vanishes() {
    let k = 3.0;
    let avg = time_average_values(|t| Ok(vec![(k * t).cos()]), 0.0, 2.0 * PI / k, 64).unwrap();
    assert!(avg.value[0].abs() < 1e-12);
    assert!(avg.converged);
}

fn small_state() -> impl Strategy<Value = FieldState> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..=10).prop_filter_map(
        "zero vector",
        |v| {
            let mut amps: Vec<Complex64> =
                v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            amps.resize(24, Complex64::new(0.0, 0.0));
            FieldState::from_amplitudes(amps).ok()?.normalize().ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wigner_is_bounded_by_parity(state in small_state()) {
        let grid = GridSpec::new(-4.0, 4.0, -4.0, 4.0, 33, 33).unwrap();
        let w = wigner_numeric_batch(&[&state], &grid).unwrap();
        prop_assert!(w[0].sup_norm() <= 2.0 / PI + 1e-6);
    }
}
