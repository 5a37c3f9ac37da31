//! First- and second-order terms of the Dyson series around U_F.
//!
//! With α(t) = 2β(t)/N and θ(t) = 4(N−1)(g/ω)²(ωt − sin ωt):
//!
//! ⟨χ′|U⁽¹⁾|χ⟩ = −i √N (Δ/2) U_F^{(N−2)}(t) ∫₀ᵗ e^{iθ(t′)} D[α(t′)] dt′
//! ⟨χ|U⁽²⁾|χ⟩ = −(NΔ²/4) U_F^{(N)}(t) ∫₀ᵗ dt′ e^{−iθ(t′)} D[−α(t′)]
//!               ∫₀^{t′} dt″ e^{iθ(t″)} D[α(t″)]
//!
//! where U_F^{(m)} is the sector propagator with Σx = m.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::fock::{DisplacementMatrix, FieldState, TAIL_TOLERANCE};
use crate::params::ModelParams;
use crate::propagator::apply_uf_sector;
use crate::quadrature::{
    integrate_panels, pairwise_sum, panel_nodes, refine_until, DysonPhase, QuadratureReport,
    GL_ORDER,
};

/// Relative accuracy requested from every quadrature.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// Spin state the correction is projected on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Chi,
    ChiPrime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionRecord {
    pub order: u8,
    pub target: Target,
    pub t: f64,
    pub params: ModelParams,
    pub amplitude_norm: f64,
    #[serde(skip)]
    pub field_correction: FieldState,
    pub quadrature: QuadratureReport,
}

impl CorrectionRecord {
    pub fn converged(&self) -> bool {
        self.quadrature.converged && self.quadrature.error_estimate <= QUADRATURE_TOL
    }
}

/// ∫₀ᵗ e^{iθ(t′)} dt′
pub fn oscillatory_integral(params: &ModelParams, t: f64) -> Result<(Complex64, QuadratureReport)> {
    params.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(domain(format!("t must be finite and >= 0, got {t}")));
    }
    let ph = DysonPhase::new(params);
    if t == 0.0 {
        return Ok((
            Complex64::new(0.0, 0.0),
            QuadratureReport {
                converged: true,
                ..Default::default()
            },
        ));
    }
    let f = |s: f64| vec![Complex64::from_polar(1.0, ph.theta(s))];
    let base = ph.panel_edges(0.0, t);
    let (v, rep) = refine_until(&base, QUADRATURE_TOL, |e| {
        Ok((integrate_panels(&f, e, 1), (e.len() - 1) * GL_ORDER))
    })?;
    Ok((v[0], rep))
}

fn alpha_of(params: &ModelParams, t: f64) -> Complex64 {
    let r = 2.0 * params.g / params.omega;
    r * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, params.omega * t))
}

/// Fock dimension used inside the time integrals. The integrands only carry
/// displacements of size ≤ 8g/ω, so they live on a much smaller space than
/// the outer propagator needs.
fn inner_dim(params: &ModelParams, field: &FieldState) -> usize {
    let support = field
        .amplitudes()
        .iter()
        .rposition(|c| c.norm_sqr() > 1e-30)
        .unwrap_or(0);
    let r = 8.0 * params.g / params.omega + (field.mean_photon_number().max(0.0)).sqrt();
    let need = (r * r + 6.0 * r + 16.0).ceil() as usize + support;
    need.min(field.dim())
}

fn displace(amps: &[Complex64], alpha: Complex64, dim: usize) -> Vec<Complex64> {
    DisplacementMatrix::new(alpha, dim).apply(amps)
}

fn relative_tail_ok(v: &[Complex64]) -> bool {
    let total: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return true;
    }
    let probe = FieldState::vacuum(v.len() - 1);
    let tail: f64 = v[probe.tail_start()..].iter().map(|c| c.norm_sqr()).sum();
    tail / total <= TAIL_TOLERANCE
}

fn pad(mut v: Vec<Complex64>, dim: usize) -> Vec<Complex64> {
    v.resize(dim, Complex64::new(0.0, 0.0));
    v
}

fn first_order_integral(
    params: &ModelParams,
    t: f64,
    field: &FieldState,
    dim: usize,
) -> Result<(Vec<Complex64>, QuadratureReport)> {
    let ph = DysonPhase::new(params);
    let psi0: Vec<Complex64> = field.amplitudes()[..dim].to_vec();
    let f = |s: f64| {
        let mut v = displace(&psi0, alpha_of(params, s), dim);
        let w = Complex64::from_polar(1.0, ph.theta(s));
        v.iter_mut().for_each(|c| *c *= w);
        v
    };
    let base = ph.panel_edges(0.0, t);
    refine_until(&base, QUADRATURE_TOL, |e| {
        Ok((integrate_panels(&f, e, dim), (e.len() - 1) * GL_ORDER))
    })
}

fn zero_record(
    order: u8,
    target: Target,
    params: &ModelParams,
    t: f64,
    field: &FieldState,
) -> Result<CorrectionRecord> {
    Ok(CorrectionRecord {
        order,
        target,
        t,
        params: *params,
        amplitude_norm: 0.0,
        field_correction: FieldState::from_amplitudes(vec![Complex64::new(0.0, 0.0); field.dim()])?,
        quadrature: QuadratureReport {
            converged: true,
            ..Default::default()
        },
    })
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(domain(format!("t must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Runs `body` on the reduced Fock space and falls back to the full cutoff if
/// the reduced result leaks into its tail.
fn with_inner_dim<F>(
    params: &ModelParams,
    field: &FieldState,
    body: F,
) -> Result<(Vec<Complex64>, QuadratureReport)>
where
    F: Fn(usize) -> Result<(Vec<Complex64>, QuadratureReport)>,
{
    let small = inner_dim(params, field);
    let (v, rep) = body(small)?;
    if small == field.dim() || relative_tail_ok(&v) {
        return Ok((pad(v, field.dim()), rep));
    }
    body(field.dim())
}

/// ⟨χ′|U⁽¹⁾(t)|χ⟩ applied to `initial_field`.
pub fn first_order_correction(
    params: &ModelParams,
    t: f64,
    initial_field: &FieldState,
) -> Result<CorrectionRecord> {
    params.validate()?;
    check_time(t)?;
    if params.delta == 0.0 || t == 0.0 {
        return zero_record(1, Target::ChiPrime, params, t, initial_field);
    }
    let (integral, rep) = with_inner_dim(params, initial_field, |d| {
        first_order_integral(params, t, initial_field, d)
    })?;
    let scale = Complex64::new(0.0, -params.n().sqrt() * params.delta / 2.0);
    let inner = FieldState::from_amplitudes(integral)?.scaled(scale);
    let n = params.n_atoms as i64;
    let out = apply_uf_sector(&inner, n - 2, params, t)?;
    Ok(CorrectionRecord {
        order: 1,
        target: Target::ChiPrime,
        t,
        params: *params,
        amplitude_norm: out.norm(),
        field_correction: out,
        quadrature: rep,
    })
}

/// Region of the (t′, t″) square used by the nested integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NestedDomain {
    /// t″ ≤ t′, the time-ordered triangle.
    Lower,
    /// t″ ≥ t′
    Upper,
    Square,
}

/// ∫ dt′ e^{−iθ(t′)} D[−α(t′)] ∫ dt″ e^{iθ(t″)} D[α(t″)] ψ₀ over `domain`.
///
/// For an outer node t′ in panel j the lower inner integral is the sum of the
/// full panels before j plus a 16-point rule on [edge_j, t′].
pub fn nested_integral(
    params: &ModelParams,
    t: f64,
    field: &FieldState,
    dim: usize,
    domain_kind: NestedDomain,
) -> Result<(Vec<Complex64>, QuadratureReport)> {
    let ph = DysonPhase::new(params);
    let psi0: Vec<Complex64> = field.amplitudes()[..dim].to_vec();
    let inner_f = |s: f64| {
        let mut v = displace(&psi0, alpha_of(params, s), dim);
        let w = Complex64::from_polar(1.0, ph.theta(s));
        v.iter_mut().for_each(|c| *c *= w);
        v
    };
    let base = ph.panel_edges(0.0, t);
    refine_until(&base, QUADRATURE_TOL, |edges| {
        let panels: Vec<Vec<Complex64>> = edges
            .windows(2)
            .map(|w| integrate_panels(&inner_f, w, dim))
            .collect();
        let mut prefix = Vec::with_capacity(panels.len() + 1);
        prefix.push(vec![Complex64::new(0.0, 0.0); dim]);
        for p in &panels {
            let last: &Vec<Complex64> = prefix.last().expect("seeded");
            prefix.push(last.iter().zip(p).map(|(a, b)| a + b).collect());
        }
        let total = prefix.last().expect("seeded").clone();
        let outer: Vec<(usize, f64, f64)> = edges
            .windows(2)
            .enumerate()
            .flat_map(|(j, w)| panel_nodes(w[0], w[1]).map(move |(s, wt)| (j, s, wt)))
            .collect();
        let terms: Vec<Vec<Complex64>> = outer
            .par_iter()
            .map(|&(j, s, wt)| {
                let inner: Vec<Complex64> = if domain_kind == NestedDomain::Square {
                    total.clone()
                } else {
                    let partial = integrate_panels(&inner_f, &[edges[j], s], dim);
                    let lower = prefix[j].iter().zip(&partial).map(|(a, b)| a + b);
                    match domain_kind {
                        NestedDomain::Lower => lower.collect(),
                        _ => total.iter().zip(lower).map(|(a, b)| a - b).collect(),
                    }
                };
                let mut v = displace(&inner, -alpha_of(params, s), dim);
                let phase = Complex64::from_polar(wt, -ph.theta(s));
                v.iter_mut().for_each(|c| *c *= phase);
                v
            })
            .collect();
        let partial_nodes = if domain_kind == NestedDomain::Square {
            0
        } else {
            outer.len() * GL_ORDER
        };
        let count = (edges.len() - 1) * GL_ORDER + outer.len() + partial_nodes;
        Ok((pairwise_sum(terms, dim), count))
    })
}

/// ⟨χ|U⁽²⁾(t)|χ⟩ applied to `initial_field`.
pub fn second_order_correction(
    params: &ModelParams,
    t: f64,
    initial_field: &FieldState,
) -> Result<CorrectionRecord> {
    params.validate()?;
    check_time(t)?;
    if params.delta == 0.0 || t == 0.0 {
        return zero_record(2, Target::Chi, params, t, initial_field);
    }
    let (integral, rep) = with_inner_dim(params, initial_field, |d| {
        nested_integral(params, t, initial_field, d, NestedDomain::Lower)
    })?;
    let scale = Complex64::new(-params.n() * params.delta * params.delta / 4.0, 0.0);
    let inner = FieldState::from_amplitudes(integral)?.scaled(scale);
    let out = apply_uf_sector(&inner, params.n_atoms as i64, params, t)?;
    Ok(CorrectionRecord {
        order: 2,
        target: Target::Chi,
        t,
        params: *params,
        amplitude_norm: out.norm(),
        field_correction: out,
        quadrature: rep,
    })
}

/// Least-squares power law through (N, amplitude).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    /// Standard error of the exponent.
    pub exponent_stderr: f64,
}

/// Fits amplitude = c·N^p on log–log axes.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 4 {
        return Err(domain(format!(
            "scaling fit needs >= 4 points, got {}",
            points.len()
        )));
    }
    for &(n, a) in points {
        if !(a > 0.0 && a.is_finite()) {
            return Err(domain(format!(
                "amplitude at N = {n} must be positive, got {a}"
            )));
        }
        if !(n > 0.0 && n.is_finite()) {
            return Err(domain(format!("N must be positive, got {n}")));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(domain("scaling fit needs at least two distinct N"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(ScalingFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
        exponent_stderr: (ss_res / (k - 2.0) / sxx).sqrt(),
    })
}
