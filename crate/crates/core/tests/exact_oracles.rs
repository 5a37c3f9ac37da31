mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use thermolim::error::Error;
use thermolim::exact::{
    build_hamiltonian, build_hamiltonian_with_limit, convergence_gap, evolve_exact,
    evolve_exact_with, evolve_rk4, fidelity, lowest_eigenvalue, project_chi, JointState,
    KrylovOptions,
};
use thermolim::fock::{cat_state, choose_cutoff, coherent_state, FieldState};
use thermolim::propagator::evolve_fock_leading;
use thermolim::spin::{chi_prime_state, chi_state, CollectiveState, SpinBasis};
use thermolim::ModelParams;

fn spread_spin(n: usize) -> CollectiveState {
    let amps = (0..=n)
        .map(|m| Complex64::new(1.0 + 0.3 * m as f64, 0.2 * (m as f64 - 1.0)))
        .collect::<Vec<_>>();
    let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    CollectiveState::new(amps.iter().map(|c| c / norm).collect(), SpinBasis::X).unwrap()
}

/// Dicke-basis joint amplitudes mapped onto the 2^N product basis.
fn to_product(state: &JointState) -> Vec<Complex64> {
    let n = state.n_atoms();
    let d = state.ncut() + 1;
    let mut out = vec![Complex64::new(0.0, 0.0); (1 << n) * d];
    for m in 0..=n {
        let dicke = common::dicke_x_state(n, m);
        for (s, w) in dicke.iter().enumerate() {
            for (k, c) in state.sector(m).iter().enumerate() {
                out[s * d + k] += c * w;
            }
        }
    }
    out
}

#[test]
fn two_atom_ground_energy_matches_symmetric_projection() {
    let p = ModelParams::new(1.0, 0.7, 0.4, 2).unwrap();
    let ncut = 30;
    let spec = build_hamiltonian(&p, ncut).unwrap();
    // oracle: P† H P with P the Dicke vectors in the product basis
    let (h, dim) = common::product_hamiltonian(1.0, 0.7, 0.4, 2, ncut);
    let d = ncut + 1;
    let basis: Vec<Vec<f64>> = (0..=2)
        .flat_map(|m| {
            let dicke = common::dicke_x_state(2, m);
            (0..d).map(move |k| {
                let mut v = vec![0.0; dim];
                for (s, w) in dicke.iter().enumerate() {
                    v[s * d + k] = *w;
                }
                v
            })
        })
        .collect();
    let r = basis.len();
    let mut reduced = vec![0.0; r * r];
    for (i, bi) in basis.iter().enumerate() {
        let hb: Vec<f64> = (0..dim)
            .map(|row| (0..dim).map(|c| h[row * dim + c] * bi[c]).sum())
            .collect();
        for (j, bj) in basis.iter().enumerate() {
            reduced[j * r + i] = bj.iter().zip(&hb).map(|(a, b)| a * b).sum();
        }
    }
    let oracle = common::dense_eigenvalues(&reduced, r)[0];
    let dense = common::dense_eigenvalues(&spec.to_dense(), spec.dim())[0];
    let lanczos = lowest_eigenvalue(&spec, 7).unwrap();
    assert!((dense - oracle).abs() < 1e-10, "{dense} vs {oracle}");
    assert!((lanczos - oracle).abs() < 1e-10, "{lanczos} vs {oracle}");
}

#[test]
fn single_atom_matrix_in_sigma_x_basis() {
    let (omega, delta, g, ncut) = (1.3, 0.8, 0.45, 6);
    let p = ModelParams::new(omega, delta, g, 1).unwrap();
    let h = build_hamiltonian(&p, ncut).unwrap().to_dense();
    let d = ncut + 1;
    let dim = 2 * d;
    for m in 0..2 {
        let sx = if m == 0 { 1.0 } else { -1.0 };
        for n in 0..d {
            for k in 0..d {
                let want = if n == k {
                    omega * n as f64
                } else if n + 1 == k || k + 1 == n {
                    g * sx * (n.max(k) as f64).sqrt()
                } else {
                    0.0
                };
                assert_eq!(h[(m * d + n) * dim + m * d + k], want);
            }
        }
    }
    // σz swaps the σx eigenstates with weight Δ/2
    for n in 0..d {
        for k in 0..d {
            let want = if n == k { delta / 2.0 } else { 0.0 };
            assert_eq!(h[n * dim + d + k], want);
            assert_eq!(h[(d + n) * dim + k], want);
        }
    }
}

#[test]
fn hamiltonian_is_symmetric() {
    let spec = build_hamiltonian(&ModelParams::new(1.0, 0.3, 0.2, 5).unwrap(), 12).unwrap();
    let h = spec.to_dense();
    let dim = spec.dim();
    for i in 0..dim {
        for j in 0..dim {
            assert_eq!(h[i * dim + j], h[j * dim + i]);
        }
    }
}

#[test]
fn free_spectrum_is_ladder() {
    let spec = build_hamiltonian(&ModelParams::new(1.0, 0.0, 0.0, 2).unwrap(), 8).unwrap();
    let ev = common::dense_eigenvalues(&spec.to_dense(), spec.dim());
    for (i, e) in ev.iter().enumerate() {
        assert!((e - (i / 3) as f64).abs() < 1e-12);
    }
}

#[test]
fn capacity_limit_is_enforced() {
    let p = ModelParams::new(1.0, 0.1, 0.2, 9).unwrap();
    match build_hamiltonian_with_limit(&p, 99, 999) {
        Err(Error::Capacity { requested, .. }) => assert_eq!(requested, 1000),
        other => panic!("expected a capacity error, got {other:?}"),
    }
    assert!(build_hamiltonian_with_limit(&p, 99, 1000).is_ok());
    assert!(build_hamiltonian(&p, 3).is_err());
}

#[test]
fn evolution_matches_dense_exponential() {
    let p = ModelParams::new(1.0, 0.4, 0.3, 2).unwrap();
    let ncut = choose_cutoff(&p, 3.0, 0.86, 0);
    let spec = build_hamiltonian(&p, ncut).unwrap();
    let field = coherent_state(Complex64::new(0.8, 0.3), ncut).unwrap();
    let s0 = JointState::product(&p, &field, &spread_spin(2)).unwrap();
    let t = 3.0;
    let got = evolve_exact(&s0, t, &spec).unwrap();
    let want = common::dense_propagate(&spec.to_dense(), spec.dim(), s0.amplitudes(), t);
    let err: f64 = got
        .amplitudes()
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    assert!(err < 1e-9, "{err:e}");
    assert_eq!(got.t(), t);
}

#[test]
fn krylov_agrees_with_rk4() {
    let p = ModelParams::new(1.0, 0.5, 0.3, 3).unwrap();
    let ncut = choose_cutoff(&p, 2.0, 0.0, 0);
    let spec = build_hamiltonian(&p, ncut).unwrap();
    let s0 = JointState::product(&p, &FieldState::vacuum(ncut), &chi_state(3).unwrap()).unwrap();
    let a = evolve_exact(&s0, 2.0, &spec).unwrap();
    let b = evolve_rk4(&s0, 2.0, &spec, 20_000).unwrap();
    assert!(a.distance(&b).unwrap() < 1e-8);
}

#[test]
fn identity_at_zero_time() {
    let p = ModelParams::new(1.0, 0.5, 0.3, 3).unwrap();
    let spec = build_hamiltonian(&p, 10).unwrap();
    let s0 = JointState::product(&p, &FieldState::vacuum(10), &spread_spin(3)).unwrap();
    assert_eq!(evolve_exact(&s0, 0.0, &spec).unwrap(), s0);
}

#[test]
fn energy_and_norm_are_conserved() {
    let p = ModelParams::new(1.0, 0.6, 0.25, 6).unwrap();
    let ncut = choose_cutoff(&p, 2.0 * PI, 1.0, 0);
    let spec = build_hamiltonian(&p, ncut).unwrap();
    let (cat, _) = cat_state(1.0, FRAC_PI_2, ncut).unwrap();
    let s0 = JointState::product(&p, &cat, &spread_spin(6)).unwrap();
    let e0 = spec.energy(&s0);
    let (s, stats) = evolve_exact_with(&s0, 2.0 * PI, &spec, &KrylovOptions::default()).unwrap();
    assert!(((spec.energy(&s) - e0) / e0.abs()).abs() <= 1e-8);
    assert!(stats.norm_drift <= 1e-9);
    assert!((s.norm_sqr() - 1.0).abs() <= 1e-9);
}

#[test]
fn sectors_are_conserved_without_splitting() {
    let p = ModelParams::new(1.0, 0.0, 0.3, 5).unwrap();
    let ncut = choose_cutoff(&p, 4.0, 0.5, 0);
    let spec = build_hamiltonian(&p, ncut).unwrap();
    let field = coherent_state(Complex64::new(0.5, 0.0), ncut).unwrap();
    let s0 = JointState::product(&p, &field, &spread_spin(5)).unwrap();
    let before = s0.sector_probabilities();
    for t in [0.5, 2.0, 4.0] {
        let after = evolve_exact(&s0, t, &spec).unwrap().sector_probabilities();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn symmetric_sector_is_closed() {
    for n in 1..=3usize {
        let p = ModelParams::new(1.0, 0.7, 0.35, n).unwrap();
        let ncut = choose_cutoff(&p, 1.7, 0.45, 0);
        let spec = build_hamiltonian(&p, ncut).unwrap();
        let field = coherent_state(Complex64::new(0.4, -0.2), ncut).unwrap();
        let s0 = JointState::product(&p, &field, &spread_spin(n)).unwrap();
        let t = 1.7;
        let got = to_product(&evolve_exact(&s0, t, &spec).unwrap());
        let (h, dim) = common::product_hamiltonian(1.0, 0.7, 0.35, n, ncut);
        let want = common::dense_propagate(&h, dim, &to_product(&s0), t);
        let err = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "N = {n}: {err:e}");
    }
}

#[test]
fn krylov_convergence_gap_is_small() {
    let p = ModelParams::new(1.0, 0.05, 0.25, 4).unwrap();
    let ncut = choose_cutoff(&p, PI, 0.0, 0);
    let spec = build_hamiltonian(&p, ncut).unwrap();
    let s0 = JointState::product(&p, &FieldState::vacuum(ncut), &chi_state(4).unwrap()).unwrap();
    assert!(convergence_gap(&s0, PI, &spec).unwrap() <= 1e-8);
}

#[test]
fn projections_at_zero_time() {
    let p = ModelParams::new(1.0, 0.2, 0.2, 4).unwrap();
    let (cat, _) = cat_state(1.0, 0.5, 30).unwrap();
    let s0 = JointState::product(&p, &cat, &chi_state(4).unwrap()).unwrap();
    let f = project_chi(&s0, &chi_state(4).unwrap()).unwrap();
    for (a, b) in f.amplitudes().iter().zip(cat.amplitudes()) {
        assert!((a - b).norm() < 1e-15);
    }
    assert_eq!(
        project_chi(&s0, &chi_prime_state(4).unwrap())
            .unwrap()
            .norm(),
        0.0
    );
}

#[test]
fn fidelity_examples() {
    let s = coherent_state(Complex64::new(0.3, 0.1), 30).unwrap();
    assert!((fidelity(&s, &s).unwrap() - 1.0).abs() < 1e-15);
    let n0 = FieldState::number(0, 5).unwrap();
    let n1 = FieldState::number(1, 5).unwrap();
    assert_eq!(fidelity(&n0, &n1).unwrap(), 0.0);
    let a = coherent_state(Complex64::new(1.0, 0.0), 60).unwrap();
    let b = coherent_state(Complex64::new(2.0, 0.0), 60).unwrap();
    assert!((fidelity(&a, &b).unwrap() - (-1f64).exp()).abs() < 1e-12);
    let phased = s.clone().scaled(Complex64::from_polar(1.0, 0.9));
    assert!((fidelity(&s, &phased).unwrap() - 1.0).abs() < 1e-15);
    let zero = FieldState::from_amplitudes(vec![Complex64::new(0.0, 0.0); 31]).unwrap();
    assert!(fidelity(&s, &zero).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let p = ModelParams::new(1.0, 0.2, 0.2, 3).unwrap();
    let ncut = choose_cutoff(&p, 0.6, 0.0, 0);
    let s0 = JointState::product(&p, &FieldState::vacuum(ncut), &spread_spin(3)).unwrap();
    let s = evolve_exact(&s0, 0.6, &build_hamiltonian(&p, ncut).unwrap()).unwrap();
    let mut buf = Vec::new();
    s.write_checkpoint(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"JNTS");
    assert_eq!(buf.len(), 48 + 16 * (ncut + 1) * 4);
    assert_eq!(JointState::read_checkpoint(&buf[..]).unwrap(), s);
    assert!(JointState::read_checkpoint(&buf[..40]).is_err());
}

#[test]
fn fock_superposition_leading_order_without_splitting() {
    let p = ModelParams::new(1.0, 0.0, 0.25, 8).unwrap();
    let (k, t) = (3usize, 2.4);
    let ncut = choose_cutoff(&p, t, 0.0, k);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![Complex64::new(0.0, 0.0); ncut + 1];
    amps[0] = Complex64::new(s2, 0.0);
    amps[k] = Complex64::new(s2, 0.0);
    let field = FieldState::from_amplitudes(amps).unwrap();
    let chi = chi_state(8).unwrap();
    let spec = build_hamiltonian(&p, ncut).unwrap();
    let s = evolve_exact(&JointState::product(&p, &field, &chi).unwrap(), t, &spec).unwrap();
    let exact = project_chi(&s, &chi).unwrap();
    let lead = evolve_fock_leading(&p, k, t, ncut).unwrap();
    assert!(1.0 - fidelity(&exact, &lead).unwrap() <= 1e-8);
}

#[test]
fn leading_order_improves_with_n() {
    let t = PI;
    let mut infidelities = Vec::new();
    for n in [2usize, 4, 8, 16] {
        let p = ModelParams::new(1.0, 0.05, 0.25, n).unwrap();
        let ncut = choose_cutoff(&p, t, 0.0, 0);
        let spec = build_hamiltonian(&p, ncut).unwrap();
        let chi = chi_state(n).unwrap();
        let vac = FieldState::vacuum(ncut);
        let s = evolve_exact(&JointState::product(&p, &vac, &chi).unwrap(), t, &spec).unwrap();
        let exact = project_chi(&s, &chi).unwrap();
        let lead = thermolim::propagator::apply_uf_sector(&vac, n as i64, &p, t).unwrap();
        infidelities.push((n, 1.0 - fidelity(&exact, &lead).unwrap()));
    }
    assert!(
        infidelities.windows(2).all(|w| w[1].1 < w[0].1),
        "χ-sector infidelity vs N: {infidelities:?}"
    );
}
