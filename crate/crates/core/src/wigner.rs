//! Wigner functions on rectangular (x, p) grids.
//!
//! Convention: z = (x + ip)/√2, so |α⟩ is a unit-variance Gaussian
//! (1/π)exp[−(x − √2 Re α)² − (p − √2 Im α)²]. Numerically
//! W(x, p) = (1/π)⟨ψ|D(2z)Π|ψ⟩ with Π the parity, which equals the
//! displaced-parity sum (1/π)Σₙ(−1)ⁿ|⟨n|D†(z)|ψ⟩|² without truncating the
//! displaced state.

use std::f64::consts::{PI, SQRT_2};
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::fock::{cat_norm_factor, DisplacementMatrix, FieldState, TAIL_TOLERANCE};
use crate::params::ModelParams;
use crate::propagator::frame;

/// Largest grid spacing accepted in either quadrature.
pub const MAX_SPACING: f64 = 0.25;
/// Coefficient of the N-dependent fringe phase α(Ng/ω)sinφ(1 − cos ωt)
/// obtained from the evolved state.
pub const PHASE_COEFFICIENT: f64 = 4.0;
/// The same coefficient as it appears in the printed interference term.
pub const PRINTED_PHASE_COEFFICIENT: f64 = 8.0;
/// Binary grid format version.
pub const WGRD_VERSION: u16 = 1;

/// Grid geometry; x varies along rows, p along columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl GridSpec {
    pub fn new(
        x_min: f64,
        x_max: f64,
        p_min: f64,
        p_max: f64,
        nx: usize,
        np: usize,
    ) -> Result<Self> {
        let g = Self {
            x_min,
            x_max,
            p_min,
            p_max,
            nx,
            np,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.np < 2 {
            return Err(domain(format!(
                "grid needs at least 2×2 points, got {}×{}",
                self.nx, self.np
            )));
        }
        if !(self.x_max > self.x_min && self.p_max > self.p_min) {
            return Err(domain("grid bounds must be increasing"));
        }
        if self.dx() > MAX_SPACING + 1e-12 || self.dp() > MAX_SPACING + 1e-12 {
            return Err(domain(format!(
                "grid spacing ({:.4}, {:.4}) exceeds {MAX_SPACING}",
                self.dx(),
                self.dp()
            )));
        }
        Ok(())
    }

    /// Square grid with the given spacing covering `margin` around every center.
    pub fn covering(centers: &[(f64, f64)], margin: f64, spacing: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(domain("covering grid needs at least one center"));
        }
        let lo = |f: fn(&(f64, f64)) -> f64| {
            centers.iter().map(f).fold(f64::INFINITY, f64::min) - margin
        };
        let hi = |f: fn(&(f64, f64)) -> f64| {
            centers.iter().map(f).fold(f64::NEG_INFINITY, f64::max) + margin
        };
        let (x0, x1) = (lo(|c| c.0), hi(|c| c.0));
        let (p0, p1) = (lo(|c| c.1), hi(|c| c.1));
        let nx = ((x1 - x0) / spacing).ceil() as usize + 1;
        let np = ((p1 - p0) / spacing).ceil() as usize + 1;
        Self::new(
            x0,
            x0 + (nx - 1) as f64 * spacing,
            p0,
            p0 + (np - 1) as f64 * spacing,
            nx,
            np,
        )
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }

    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn point(&self, k: usize) -> (f64, f64) {
        (self.x(k / self.np), self.p(k % self.np))
    }

    /// Evaluates `f(x, p)` at every point, in parallel, in storage order.
    pub fn map<F>(&self, f: F) -> WignerGrid
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let values = (0..self.len())
            .into_par_iter()
            .map(|k| {
                let (x, p) = self.point(k);
                f(x, p)
            })
            .collect();
        WignerGrid {
            spec: *self,
            values,
        }
    }
}

/// Real values on a [`GridSpec`], row-major with index `ix * np + ip`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(domain(format!(
                "grid needs {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn get(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.spec.np + ip]
    }

    /// Σ W ΔxΔp
    pub fn riemann_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.dx() * self.spec.dp()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_same(&self, other: &WignerGrid) -> Result<()> {
        if self.spec != other.spec {
            return Err(domain("grids differ in geometry"));
        }
        Ok(())
    }

    /// a·self + b·other
    pub fn combine(&self, a: f64, other: &WignerGrid, b: f64) -> Result<WignerGrid> {
        self.check_same(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(WignerGrid {
            spec: self.spec,
            values,
        })
    }

    pub fn max_abs_diff(&self, other: &WignerGrid) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Rows `x,p,W` with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,p,W")?;
        for ix in 0..self.spec.nx {
            for ip in 0..self.spec.np {
                writeln!(
                    out,
                    "{},{},{}",
                    self.spec.x(ix),
                    self.spec.p(ip),
                    self.get(ix, ip)
                )?;
            }
        }
        Ok(())
    }

    /// 32-byte header ("WGRD", u32 nx, u32 np, f32 x_min, x_max, p_min,
    /// p_max, u16 version, u16 reserved) then nx·np little-endian f64 values
    /// in row-major order.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"WGRD")?;
        out.write_all(&(self.spec.nx as u32).to_le_bytes())?;
        out.write_all(&(self.spec.np as u32).to_le_bytes())?;
        for b in [
            self.spec.x_min,
            self.spec.x_max,
            self.spec.p_min,
            self.spec.p_max,
        ] {
            out.write_all(&(b as f32).to_le_bytes())?;
        }
        out.write_all(&WGRD_VERSION.to_le_bytes())?;
        out.write_all(&0u16.to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`write_binary`](Self::write_binary); bounds come back at
    /// f32 precision.
    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            format: "WGRD",
            reason: reason.to_string(),
        };
        let mut head = [0u8; 32];
        input
            .read_exact(&mut head)
            .map_err(|_| bad("truncated header"))?;
        if &head[..4] != b"WGRD" {
            return Err(bad("bad magic"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap()) as usize;
        let f32_at = |i: usize| f32::from_le_bytes(head[i..i + 4].try_into().unwrap()) as f64;
        let version = u16::from_le_bytes([head[28], head[29]]);
        if version != WGRD_VERSION {
            return Err(bad("unsupported version"));
        }
        let (nx, np) = (u32_at(4), u32_at(8));
        let spec = GridSpec {
            x_min: f32_at(12),
            x_max: f32_at(16),
            p_min: f32_at(20),
            p_max: f32_at(24),
            nx,
            np,
        };
        let mut buf = vec![0u8; nx * np * 8];
        input
            .read_exact(&mut buf)
            .map_err(|_| bad("truncated value block"))?;
        let values = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Self { spec, values })
    }
}

fn parity(amps: &[Complex64]) -> Vec<Complex64> {
    amps.iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == 0 { *c } else { -c })
        .collect()
}

/// (1/π)⟨a|D(2z)Π|b⟩, the cross Wigner function of two kets at one point.
pub fn cross_wigner_point(a: &[Complex64], b: &[Complex64], x: f64, p: f64) -> Complex64 {
    let dim = a.len().max(b.len());
    let z2 = Complex64::new(SQRT_2 * x, SQRT_2 * p);
    let d = DisplacementMatrix::new(z2, dim);
    let pb = parity(b);
    let v = d.apply(&pb);
    a.iter()
        .zip(&v)
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        / PI
}

fn check_state(state: &FieldState) -> Result<()> {
    if (state.norm_sqr() - 1.0).abs() > 1e-8 {
        return Err(domain(format!(
            "Wigner evaluation needs a normalized state, norm² = {}",
            state.norm_sqr()
        )));
    }
    let tail = state.tail_mass();
    if tail > TAIL_TOLERANCE {
        return Err(Error::Cutoff {
            ncut: state.ncut(),
            from: state.tail_start(),
            tail_mass: tail,
        });
    }
    Ok(())
}

pub fn wigner_numeric(state: &FieldState, spec: &GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    check_state(state)?;
    let a = state.amplitudes();
    Ok(spec.map(|x, p| cross_wigner_point(a, a, x, p).re))
}

/// Wigner grids of several states sharing one set of displacement matrices.
pub fn wigner_numeric_batch(states: &[&FieldState], spec: &GridSpec) -> Result<Vec<WignerGrid>> {
    spec.validate()?;
    for s in states {
        check_state(s)?;
    }
    let dim = states.iter().map(|s| s.dim()).max().unwrap_or(1);
    let parities: Vec<Vec<Complex64>> = states.iter().map(|s| parity(s.amplitudes())).collect();
    let per_point: Vec<Vec<f64>> = (0..spec.len())
        .into_par_iter()
        .map(|k| {
            let (x, p) = spec.point(k);
            let d = DisplacementMatrix::new(Complex64::new(SQRT_2 * x, SQRT_2 * p), dim);
            states
                .iter()
                .zip(&parities)
                .map(|(s, pb)| {
                    let v = d.apply(pb);
                    s.amplitudes()
                        .iter()
                        .zip(&v)
                        .map(|(x, y)| x.conj() * y)
                        .sum::<Complex64>()
                        .re
                        / PI
                })
                .collect()
        })
        .collect();
    Ok((0..states.len())
        .map(|i| WignerGrid {
            spec: *spec,
            values: per_point.iter().map(|v| v[i]).collect(),
        })
        .collect())
}

/// Phase-space center (√2 Re γ, √2 Im γ) of |γ⟩.
pub fn center(gamma: Complex64) -> (f64, f64) {
    (SQRT_2 * gamma.re, SQRT_2 * gamma.im)
}

/// Branch amplitudes β′ + αe^{±iφ−iωt} of the leading-order evolved cat.
pub fn branch_amplitudes(
    params: &ModelParams,
    alpha: f64,
    phi: f64,
    t: f64,
) -> (Complex64, Complex64) {
    let f = frame(params, alpha, phi, t);
    let rot = Complex64::from_polar(1.0, -params.omega * t);
    (
        f.beta_prime + Complex64::from_polar(alpha, phi) * rot,
        f.beta_prime + Complex64::from_polar(alpha, -phi) * rot,
    )
}

/// Fringe wavevector (k_x, k_p) of the interference term:
/// 2√2 α sinφ (−cos ωt, sin ωt).
pub fn fringe_wavevector(alpha: f64, phi: f64, omega_t: f64) -> (f64, f64) {
    let k = 2.0 * SQRT_2 * alpha * phi.sin();
    (-k * omega_t.cos(), k * omega_t.sin())
}

/// Position-independent part of the interference phase,
/// α² sin 2φ + c·α(Ng/ω) sinφ (1 − cos ωt).
pub fn fringe_offset(params: &ModelParams, alpha: f64, phi: f64, t: f64, coefficient: f64) -> f64 {
    let wt = params.omega * t;
    alpha * alpha * (2.0 * phi).sin()
        + coefficient * alpha * params.n() * params.g / params.omega * phi.sin() * (1.0 - wt.cos())
}

/// The interference term with an explicit coefficient on the N-dependent
/// phase; no 𝒩² factor.
pub fn w_int_closed_with_coefficient(
    params: &ModelParams,
    alpha: f64,
    phi: f64,
    t: f64,
    spec: &GridSpec,
    coefficient: f64,
) -> Result<WignerGrid> {
    spec.validate()?;
    let wt = params.omega * t;
    let a = SQRT_2 * params.n() * params.g / params.omega;
    let b = SQRT_2 * alpha * phi.cos();
    let (kx, kp) = fringe_wavevector(alpha, phi, wt);
    let offset = fringe_offset(params, alpha, phi, t, coefficient);
    let (c, s) = (wt.cos(), wt.sin());
    Ok(spec.map(|x, p| {
        let ex = x + a * (1.0 - c) - b * c;
        let ep = p + a * s + b * s;
        (2.0 / PI) * (-ex * ex - ep * ep).exp() * (kx * x + kp * p + offset).cos()
    }))
}

/// Interference term of the leading-order evolved cat, without 𝒩².
pub fn w_int_closed(
    params: &ModelParams,
    alpha: f64,
    phi: f64,
    t: f64,
    spec: &GridSpec,
) -> Result<WignerGrid> {
    w_int_closed_with_coefficient(params, alpha, phi, t, spec, PHASE_COEFFICIENT)
}

/// Sum of the two branch Gaussians, without 𝒩².
pub fn branch_wigner_closed(
    params: &ModelParams,
    alpha: f64,
    phi: f64,
    t: f64,
    spec: &GridSpec,
) -> Result<WignerGrid> {
    spec.validate()?;
    let (g1, g2) = branch_amplitudes(params, alpha, phi, t);
    let (c1, c2) = (center(g1), center(g2));
    Ok(spec.map(|x, p| {
        let e1 = (-(x - c1.0).powi(2) - (p - c1.1).powi(2)).exp();
        let e2 = (-(x - c2.0).powi(2) - (p - c2.1).powi(2)).exp();
        (e1 + e2) / PI
    }))
}

/// Full Wigner function of the leading-order evolved cat in closed form.
pub fn cat_wigner_closed(
    params: &ModelParams,
    alpha: f64,
    phi: f64,
    t: f64,
    spec: &GridSpec,
) -> Result<WignerGrid> {
    let n2 = cat_norm_factor(alpha, phi).powi(2);
    let b = branch_wigner_closed(params, alpha, phi, t, spec)?;
    let i = w_int_closed(params, alpha, phi, t, spec)?;
    b.combine(n2, &i, n2)
}

/// Grid covering `margin` around both branch centers and the interference
/// envelope for every t in [0, t_max].
pub fn default_grid(
    params: &ModelParams,
    alpha: f64,
    phi: f64,
    t_max: f64,
    margin: f64,
    spacing: f64,
) -> Result<GridSpec> {
    let samples = 64;
    let mut centers = Vec::with_capacity(3 * (samples + 1));
    for j in 0..=samples {
        let t = t_max * j as f64 / samples as f64;
        let (g1, g2) = branch_amplitudes(params, alpha, phi, t);
        centers.push(center(g1));
        centers.push(center(g2));
        centers.push(center((g1 + g2) / 2.0));
    }
    GridSpec::covering(&centers, margin, spacing)
}

/// Outcome of a time average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeAverage<T> {
    pub value: T,
    pub samples: usize,
    pub max_change: f64,
    pub converged: bool,
}

/// Minimum sample count for [`time_average`].
pub const MIN_SAMPLES: usize = 64;
/// Refinements tried before the average is flagged.
pub const MAX_DOUBLINGS: usize = 4;
/// Convergence threshold on the largest pointwise change.
pub const AVERAGE_TOL: f64 = 1e-4;

fn pairwise_vec_sum(mut terms: Vec<Vec<f64>>) -> Vec<f64> {
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut it = terms.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        terms = next;
    }
    terms.pop().unwrap_or_default()
}

/// Uniform left-endpoint average of a vector-valued signal over [t0, t1),
/// doubling the sample count until successive means agree within 1e−4.
pub fn time_average_values<F>(
    evaluator: F,
    t0: f64,
    t1: f64,
    n_samples: usize,
) -> Result<TimeAverage<Vec<f64>>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    if !(t1 > t0) {
        return Err(domain(format!("time window [{t0}, {t1}] is empty")));
    }
    if n_samples < MIN_SAMPLES {
        return Err(domain(format!(
            "time average needs >= {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let width = t1 - t0;
    let sample = |times: Vec<f64>| -> Result<Vec<f64>> {
        let grids: Vec<Vec<f64>> = times
            .par_iter()
            .map(|&t| evaluator(t))
            .collect::<Result<_>>()?;
        Ok(pairwise_vec_sum(grids))
    };
    let mut n = n_samples;
    let mut sum = sample((0..n).map(|j| t0 + width * j as f64 / n as f64).collect())?;
    let mut mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut change = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        let mids = sample(
            (0..n)
                .map(|j| t0 + width * (j as f64 + 0.5) / n as f64)
                .collect(),
        )?;
        for (s, m) in sum.iter_mut().zip(&mids) {
            *s += m;
        }
        n *= 2;
        let next: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        change = next
            .iter()
            .zip(&mean)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        mean = next;
        if change < AVERAGE_TOL {
            return Ok(TimeAverage {
                value: mean,
                samples: n,
                max_change: change,
                converged: true,
            });
        }
    }
    Ok(TimeAverage {
        value: mean,
        samples: n,
        max_change: change,
        converged: false,
    })
}

/// [`time_average_values`] for grid-valued evaluators.
pub fn time_average<F>(
    evaluator: F,
    t0: f64,
    t1: f64,
    n_samples: usize,
) -> Result<TimeAverage<WignerGrid>>
where
    F: Fn(f64) -> Result<WignerGrid> + Sync,
{
    let spec = evaluator(t0)?.spec;
    let avg = time_average_values(
        |t| {
            let g = evaluator(t)?;
            if g.spec != spec {
                return Err(domain("time-average evaluator changed grid geometry"));
            }
            Ok(g.values)
        },
        t0,
        t1,
        n_samples,
    )?;
    Ok(TimeAverage {
        value: WignerGrid {
            spec,
            values: avg.value,
        },
        samples: avg.samples,
        max_change: avg.max_change,
        converged: avg.converged,
    })
}

/// sup|w_full − w_branches| / sup|w_branches|, clipped to [0, 2].
pub fn fringe_visibility(w_full: &WignerGrid, w_branches: &WignerGrid) -> Result<f64> {
    let denom = w_branches.sup_norm();
    if denom == 0.0 {
        return Err(domain("branch grid is identically zero"));
    }
    Ok((w_full.max_abs_diff(w_branches)? / denom).clamp(0.0, 2.0))
}

/// Offset Φ₀ of a fringe pattern E(x, p)cos(k·r + Φ₀) with known k, by
/// demodulation: arg Σ W e^{−ik·r}. Valid when the envelope's spectrum at 2k
/// is negligible.
pub fn fringe_phase(grid: &WignerGrid, k: (f64, f64)) -> f64 {
    let spec = grid.spec;
    let mut acc = Complex64::new(0.0, 0.0);
    for ix in 0..spec.nx {
        for ip in 0..spec.np {
            let arg = k.0 * spec.x(ix) + k.1 * spec.p(ip);
            acc += Complex64::from_polar(grid.get(ix, ip), -arg);
        }
    }
    acc.arg()
}
