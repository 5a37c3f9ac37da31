//! Leading-order strong-coupling propagator.
//!
//! With Σx frozen to its eigenvalue m, the field Hamiltonian
//! ω a†a + g m (a + a†) is solved by
//! U_F = e^{iξ_m} e^{−iωa†at} D[β_m],
//! ξ_m = (m g/ω)² (ωt − sin ωt), β_m = (m g/ω)(1 − e^{iωt}).

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::fock::{
    cat_norm_factor, coherent_raw, displacement_element_polar, DisplacementMatrix, FieldState,
    TAIL_TOLERANCE,
};
use crate::params::ModelParams;

/// Closed-form quantities of the evolved cat at time t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticFrame {
    pub t: f64,
    pub xi: f64,
    pub beta: Complex64,
    pub beta_prime: Complex64,
    pub phi1: f64,
    pub phi2: f64,
    pub params: ModelParams,
    pub alpha: f64,
    pub phi: f64,
}

/// Phase of D[β]D[γ] = e^{i Im(βγ*)} D[β + γ].
pub fn composition_phase(beta: Complex64, gamma: Complex64) -> f64 {
    (beta * gamma.conj()).im
}

/// The branch phases written as −i(α/2)[β e^{∓iφ} − β* e^{±iφ}].
pub fn printed_branch_phases(beta: Complex64, alpha: f64, phi: f64) -> (f64, f64) {
    let i = Complex64::i();
    let e = Complex64::from_polar(1.0, phi);
    let p1 = -i * (alpha / 2.0) * (beta * e.conj() - beta.conj() * e);
    let p2 = -i * (alpha / 2.0) * (beta * e - beta.conj() * e.conj());
    (p1.re, p2.re)
}

fn sector_quantities(m: f64, params: &ModelParams, t: f64) -> (f64, Complex64) {
    let r = m * params.g / params.omega;
    let wt = params.omega * t;
    let xi = r * r * (wt - wt.sin());
    let beta = r * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, wt));
    (xi, beta)
}

pub fn frame(params: &ModelParams, alpha: f64, phi: f64, t: f64) -> AnalyticFrame {
    debug_assert!(t >= 0.0, "t must be non-negative");
    let (xi, beta) = sector_quantities(params.n(), params, t);
    let beta_prime = beta * Complex64::from_polar(1.0, -params.omega * t);
    let phi1 = composition_phase(beta, Complex64::from_polar(alpha, phi));
    let phi2 = composition_phase(beta, Complex64::from_polar(alpha, -phi));
    let (p1, p2) = printed_branch_phases(beta, alpha, phi);
    debug_assert!(
        (p1 - phi1).abs() <= 1e-10 * (1.0 + phi1.abs()),
        "φ₁ disagrees: {p1} vs {phi1}"
    );
    debug_assert!(
        (p2 - phi2).abs() <= 1e-10 * (1.0 + phi2.abs()),
        "φ₂ disagrees: {p2} vs {phi2}"
    );
    AnalyticFrame {
        t,
        xi,
        beta,
        beta_prime,
        phi1,
        phi2,
        params: *params,
        alpha,
        phi,
    }
}

fn check_sector(m: i64, n_atoms: usize) -> Result<()> {
    let n = n_atoms as i64;
    if m.abs() > n || (n - m) % 2 != 0 {
        return Err(domain(format!(
            "Σx eigenvalue {m} is not in {{-{n}, -{n}+2, …, {n}}}"
        )));
    }
    Ok(())
}

/// (ξ_m, β_m) for the Σx eigenvalue m.
pub fn sector_frame(m: i64, params: &ModelParams, t: f64) -> Result<(f64, Complex64)> {
    check_sector(m, params.n_atoms)?;
    Ok(sector_quantities(m as f64, params, t))
}

fn rotate(amplitudes: &mut [Complex64], omega_t: f64) {
    for (n, c) in amplitudes.iter_mut().enumerate() {
        *c *= Complex64::from_polar(1.0, -(n as f64) * omega_t);
    }
}

/// U_F restricted to the Σx = m sector, applied to a field state. The output
/// keeps the input cutoff; it is not renormalized.
pub fn apply_uf_sector(
    state: &FieldState,
    m: i64,
    params: &ModelParams,
    t: f64,
) -> Result<FieldState> {
    let (xi, beta) = sector_frame(m, params, t)?;
    let mut out = if beta.norm_sqr() == 0.0 {
        state.amplitudes().to_vec()
    } else {
        DisplacementMatrix::new(beta, state.dim()).apply(state.amplitudes())
    };
    rotate(&mut out, params.omega * t);
    let phase = Complex64::from_polar(1.0, xi);
    for c in &mut out {
        *c *= phase;
    }
    let out = FieldState::from_amplitudes(out)?;
    check_relative_tail(&out)?;
    Ok(out)
}

fn check_relative_tail(state: &FieldState) -> Result<()> {
    let rel = state.tail_mass() / state.norm_sqr();
    if rel > TAIL_TOLERANCE {
        return Err(Error::Cutoff {
            ncut: state.ncut(),
            from: state.tail_start(),
            tail_mass: rel,
        });
    }
    Ok(())
}

/// The evolved cat before renormalization: closed-form branches truncated at
/// `ncut`, weighted with the closed-form 𝒩.
pub fn evolve_cat_leading_unnormalized(
    params: &ModelParams,
    alpha: f64,
    phi: f64,
    t: f64,
    ncut: usize,
) -> Result<FieldState> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(domain(format!(
            "cat amplitude must be finite and >= 0, got {alpha}"
        )));
    }
    let f = frame(params, alpha, phi, t);
    let rot = Complex64::from_polar(1.0, -params.omega * t);
    let g1 = f.beta_prime + Complex64::from_polar(alpha, phi) * rot;
    let g2 = f.beta_prime + Complex64::from_polar(alpha, -phi) * rot;
    let norm = cat_norm_factor(alpha, phi);
    let w1 = Complex64::from_polar(norm, f.xi + f.phi1);
    let w2 = Complex64::from_polar(norm, f.xi + f.phi2);
    let b1 = coherent_raw(g1, ncut);
    let b2 = coherent_raw(g2, ncut);
    let amps = b1.iter().zip(&b2).map(|(a, b)| w1 * a + w2 * b).collect();
    let state = FieldState::from_amplitudes(amps)?;
    check_relative_tail(&state)?;
    Ok(state)
}

/// Field factor of U_F(t)(cat ⊗ χ), renormalized after truncation. The global
/// phase e^{iξ} is kept.
pub fn evolve_cat_leading(
    params: &ModelParams,
    alpha: f64,
    phi: f64,
    t: f64,
    ncut: usize,
) -> Result<FieldState> {
    evolve_cat_leading_unnormalized(params, alpha, phi, t, ncut)?.normalize()
}

/// Field factor of U_F(t)((|0⟩ + |k⟩)/√2 ⊗ χ):
/// e^{iξ}(|β′⟩ + e^{−ikωt}|k, β′⟩)/√2, renormalized after truncation.
pub fn evolve_fock_leading(
    params: &ModelParams,
    k: usize,
    t: f64,
    ncut: usize,
) -> Result<FieldState> {
    if k > ncut {
        return Err(domain(format!("k = {k} exceeds ncut = {ncut}")));
    }
    let f = frame(params, 0.0, 0.0, t);
    let d = DisplacementMatrix::new(f.beta_prime, ncut + 1);
    let w0 = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, f.xi);
    let wk = Complex64::from_polar(
        std::f64::consts::FRAC_1_SQRT_2,
        f.xi - k as f64 * params.omega * t,
    );
    let amps = (0..=ncut)
        .map(|n| w0 * d.get(n, 0) + wk * d.get(n, k))
        .collect();
    let state = FieldState::from_amplitudes(amps)?;
    check_relative_tail(&state)?;
    state.normalize()
}

/// Outcome of [`asymptotic_branch_ratio`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchRatio {
    Value(Complex64),
    /// The reference amplitude ⟨n|β′⟩ vanished or the quotient is not finite.
    Indeterminate,
}

impl BranchRatio {
    pub fn value(self) -> Option<Complex64> {
        match self {
            BranchRatio::Value(v) => Some(v),
            BranchRatio::Indeterminate => None,
        }
    }
}

/// ⟨n|k, β′⟩ / (c_k ⟨n|β′⟩) with c_k = (−β′*)^k/√k!. Both sides come from
/// the displacement kernel in log-polar form, so large |β′| does not
/// underflow.
pub fn asymptotic_branch_ratio(k: usize, n: usize, beta_prime: Complex64) -> Result<BranchRatio> {
    if !(beta_prime.norm() > 0.0 && beta_prime.norm().is_finite()) {
        return Err(domain(format!(
            "branch ratio needs 0 < |β′| < inf, got {beta_prime}"
        )));
    }
    let (ln_num, ph_num) = displacement_element_polar(n, k, beta_prime);
    let (ln_coh, ph_coh) = displacement_element_polar(n, 0, beta_prime);
    let ck = -beta_prime.conj();
    let ln_ck = k as f64 * ck.norm().ln() - 0.5 * crate::fock::ln_factorial(k);
    let ph_ck = k as f64 * ck.arg();
    let ln_den = ln_coh + ln_ck;
    if ln_den == f64::NEG_INFINITY || !ln_den.is_finite() {
        return Ok(BranchRatio::Indeterminate);
    }
    if ln_num == f64::NEG_INFINITY {
        return Ok(BranchRatio::Value(Complex64::new(0.0, 0.0)));
    }
    let r = Complex64::from_polar((ln_num - ln_den).exp(), ph_num - ph_coh - ph_ck);
    if !(r.re.is_finite() && r.im.is_finite()) {
        return Ok(BranchRatio::Indeterminate);
    }
    Ok(BranchRatio::Value(r))
}
