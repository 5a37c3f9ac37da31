//! Exact evolution of H = ω a†a + g Σx (a + a†) + (Δ/2) Σz on the truncated
//! Fock space times the symmetric spin sector.
//!
//! Storage is sector-major in the collective X basis: amplitude (m, n) sits at
//! `m * (ncut + 1) + n`, where m counts flipped spins (Σx eigenvalue N − 2m).
//! In that basis Σx is diagonal and Σz only couples neighbouring sectors.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::fock::{FieldState, TAIL_TOLERANCE};
use crate::params::ModelParams;
use crate::spin::{sigma_z_ladder, CollectiveState, SpinBasis};

/// Default cap on (ncut + 1)(N + 1).
pub const DEFAULT_CAPACITY: usize = 2_000_000;

const PARALLEL_MATVEC_MIN: usize = 1 << 16;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Structured sparse form of the full Hamiltonian.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    params: ModelParams,
    ncut: usize,
    sqrt_n: Vec<f64>,
    sector_coupling: Vec<f64>,
    ladder: Vec<f64>,
}

pub fn build_hamiltonian(params: &ModelParams, ncut: usize) -> Result<HamiltonianSpec> {
    build_hamiltonian_with_limit(params, ncut, DEFAULT_CAPACITY)
}

pub fn build_hamiltonian_with_limit(
    params: &ModelParams,
    ncut: usize,
    limit: usize,
) -> Result<HamiltonianSpec> {
    params.validate()?;
    if ncut < 4 {
        return Err(domain(format!(
            "exact evolution needs ncut >= 4, got {ncut}"
        )));
    }
    let n = params.n_atoms;
    let requested = (ncut + 1).saturating_mul(n + 1);
    if requested > limit {
        return Err(Error::Capacity {
            what: "joint state amplitudes",
            requested,
            limit,
        });
    }
    Ok(HamiltonianSpec {
        params: *params,
        ncut,
        sqrt_n: (0..=ncut).map(|k| (k as f64).sqrt()).collect(),
        sector_coupling: (0..=n)
            .map(|m| params.g * (n as f64 - 2.0 * m as f64))
            .collect(),
        ladder: sigma_z_ladder(n)
            .into_iter()
            .map(|w| 0.5 * params.delta * w)
            .collect(),
    })
}

impl HamiltonianSpec {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn ncut(&self) -> usize {
        self.ncut
    }

    pub fn n_atoms(&self) -> usize {
        self.params.n_atoms
    }

    pub fn dim(&self) -> usize {
        (self.ncut + 1) * (self.params.n_atoms + 1)
    }

    fn apply_sector(&self, m: usize, psi: &[Complex64], out: &mut [Complex64]) {
        let d = self.ncut + 1;
        let w = self.params.omega;
        let c = self.sector_coupling[m];
        let own = &psi[m * d..(m + 1) * d];
        for n in 0..d {
            let mut acc = own[n] * (w * n as f64);
            if n > 0 {
                acc += own[n - 1] * (c * self.sqrt_n[n]);
            }
            if n + 1 < d {
                acc += own[n + 1] * (c * self.sqrt_n[n + 1]);
            }
            out[n] = acc;
        }
        if m > 0 {
            let h = self.ladder[m - 1];
            for (o, p) in out.iter_mut().zip(&psi[(m - 1) * d..m * d]) {
                *o += p * h;
            }
        }
        if m < self.params.n_atoms {
            let h = self.ladder[m];
            for (o, p) in out.iter_mut().zip(&psi[(m + 1) * d..(m + 2) * d]) {
                *o += p * h;
            }
        }
    }

    /// out = H psi.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(psi.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        let d = self.ncut + 1;
        if self.dim() >= PARALLEL_MATVEC_MIN {
            out.par_chunks_mut(d)
                .enumerate()
                .for_each(|(m, o)| self.apply_sector(m, psi, o));
        } else {
            for (m, o) in out.chunks_mut(d).enumerate() {
                self.apply_sector(m, psi, o);
            }
        }
    }

    /// Dense real symmetric matrix, row-major, in the storage ordering.
    pub fn to_dense(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut h = vec![0.0; dim * dim];
        let mut e = vec![ZERO; dim];
        let mut col = vec![ZERO; dim];
        for j in 0..dim {
            e[j] = Complex64::new(1.0, 0.0);
            self.apply(&e, &mut col);
            for i in 0..dim {
                h[i * dim + j] = col[i].re;
            }
            e[j] = ZERO;
        }
        h
    }

    /// ⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩
    pub fn energy(&self, state: &JointState) -> f64 {
        let mut h = vec![ZERO; self.dim()];
        self.apply(&state.amplitudes, &mut h);
        dot(&state.amplitudes, &h).re / state.norm_sqr()
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Field ⊗ symmetric-spin state.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    params: ModelParams,
    ncut: usize,
    t: f64,
    amplitudes: Vec<Complex64>,
}

impl JointState {
    /// Sector-major amplitudes in the X basis.
    pub fn from_amplitudes(
        params: &ModelParams,
        ncut: usize,
        t: f64,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        let expected = (ncut + 1) * (params.n_atoms + 1);
        if amplitudes.len() != expected {
            return Err(domain(format!(
                "joint state needs {expected} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        Ok(Self {
            params: *params,
            ncut,
            t,
            amplitudes,
        })
    }

    /// field ⊗ spin at t = 0.
    pub fn product(
        params: &ModelParams,
        field: &FieldState,
        spin: &CollectiveState,
    ) -> Result<Self> {
        if spin.n_atoms() != params.n_atoms {
            return Err(domain(format!(
                "spin state has N = {}, model has N = {}",
                spin.n_atoms(),
                params.n_atoms
            )));
        }
        let spin = spin.to_basis(SpinBasis::X)?;
        let f = field.amplitudes();
        let amplitudes = spin
            .amplitudes()
            .iter()
            .flat_map(|s| f.iter().map(move |c| s * c))
            .collect();
        Self::from_amplitudes(params, field.ncut(), 0.0, amplitudes)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn ncut(&self) -> usize {
        self.ncut
    }

    pub fn n_atoms(&self) -> usize {
        self.params.n_atoms
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Spin factor storage basis; always the Σx eigenbasis.
    pub fn basis(&self) -> SpinBasis {
        SpinBasis::X
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Field amplitudes in sector m (Σx eigenvalue N − 2m).
    pub fn sector(&self, m: usize) -> &[Complex64] {
        let d = self.ncut + 1;
        &self.amplitudes[m * d..(m + 1) * d]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn sector_probabilities(&self) -> Vec<f64> {
        (0..=self.n_atoms())
            .map(|m| self.sector(m).iter().map(|c| c.norm_sqr()).sum())
            .collect()
    }

    /// Fock tail mass summed over sectors, margin as for [`FieldState`].
    pub fn tail_mass(&self) -> f64 {
        let start = FieldState::vacuum(self.ncut).tail_start();
        (0..=self.n_atoms())
            .map(|m| {
                self.sector(m)[start..]
                    .iter()
                    .map(|c| c.norm_sqr())
                    .sum::<f64>()
            })
            .sum()
    }

    /// ⟨a|b⟩ over the joint space.
    pub fn inner(&self, other: &JointState) -> Result<Complex64> {
        if self.amplitudes.len() != other.amplitudes.len() || self.ncut != other.ncut {
            return Err(domain("joint states have different shapes"));
        }
        Ok(dot(&self.amplitudes, &other.amplitudes))
    }

    /// ‖a − b‖
    pub fn distance(&self, other: &JointState) -> Result<f64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(domain("joint states have different shapes"));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Binary checkpoint: "JNTS", u32 version, u32 ncut, u32 N, f64 t, f64 ω,
    /// f64 Δ, f64 g, then (re, im) f64 pairs in storage order; little endian.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"JNTS")?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&(self.ncut as u32).to_le_bytes())?;
        out.write_all(&(self.n_atoms() as u32).to_le_bytes())?;
        for v in [self.t, self.params.omega, self.params.delta, self.params.g] {
            out.write_all(&v.to_le_bytes())?;
        }
        for c in &self.amplitudes {
            out.write_all(&c.re.to_le_bytes())?;
            out.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            format: "JNTS",
            reason: reason.to_string(),
        };
        let mut head = [0u8; 48];
        input
            .read_exact(&mut head)
            .map_err(|_| bad("truncated header"))?;
        if &head[0..4] != b"JNTS" {
            return Err(bad("bad magic"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
        let f64_at = |i: usize| f64::from_le_bytes(head[i..i + 8].try_into().unwrap());
        if u32_at(4) != CHECKPOINT_VERSION {
            return Err(bad("unsupported version"));
        }
        let ncut = u32_at(8) as usize;
        let n_atoms = u32_at(12) as usize;
        let t = f64_at(16);
        let params = ModelParams::new(f64_at(24), f64_at(32), f64_at(40), n_atoms)?;
        let count = (ncut + 1) * (n_atoms + 1);
        let mut buf = vec![0u8; count * 16];
        input
            .read_exact(&mut buf)
            .map_err(|_| bad("truncated amplitude block"))?;
        let amplitudes = buf
            .chunks_exact(16)
            .map(|b| {
                Complex64::new(
                    f64::from_le_bytes(b[0..8].try_into().unwrap()),
                    f64::from_le_bytes(b[8..16].try_into().unwrap()),
                )
            })
            .collect();
        Self::from_amplitudes(&params, ncut, t, amplitudes)
    }
}

const CHECKPOINT_VERSION: u32 = 1;

/// Contracts the spin index with ⟨target|, giving the conditional field
/// amplitudes; the squared norm is the occupation of `target`.
pub fn project_chi(state: &JointState, target: &CollectiveState) -> Result<FieldState> {
    if target.n_atoms() != state.n_atoms() {
        return Err(domain(format!(
            "target has N = {}, state has N = {}",
            target.n_atoms(),
            state.n_atoms()
        )));
    }
    let target = target.to_basis(SpinBasis::X)?;
    let mut out = vec![ZERO; state.ncut + 1];
    for (m, w) in target.amplitudes().iter().enumerate() {
        if w.norm_sqr() == 0.0 {
            continue;
        }
        axpy(&mut out, w.conj(), state.sector(m));
    }
    FieldState::from_amplitudes(out)
}

/// |⟨a|b⟩|² / (‖a‖²‖b‖²); shorter vectors are zero-padded.
pub fn fidelity(a: &FieldState, b: &FieldState) -> Result<f64> {
    let na = a.norm_sqr();
    let nb = b.norm_sqr();
    if na == 0.0 || nb == 0.0 {
        return Err(domain("fidelity of a zero-norm state"));
    }
    Ok((a.inner(b).norm_sqr() / (na * nb)).min(1.0))
}

/// Krylov stepping controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KrylovOptions {
    /// Lanczos basis size per step.
    pub krylov_dim: usize,
    /// Allowed local error per unit time.
    pub tol: f64,
    pub max_steps: usize,
    pub norm_drift_limit: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 30,
            tol: 1e-12,
            max_steps: 1_000_000,
            norm_drift_limit: 1e-9,
        }
    }
}

/// Diagnostics of one evolution run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EvolveStats {
    pub steps: usize,
    pub matvecs: usize,
    pub norm_drift: f64,
    /// Sum of accepted local error estimates.
    pub error_estimate: f64,
}

struct LanczosBasis {
    vectors: Vec<Vec<Complex64>>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    /// Residual coupling past the last vector; zero on breakdown.
    tail: f64,
}

fn lanczos(
    spec: &HamiltonianSpec,
    start: &[Complex64],
    m_max: usize,
    stats: &mut EvolveStats,
) -> LanczosBasis {
    let dim = start.len();
    let b0 = norm(start);
    let mut vectors: Vec<Vec<Complex64>> = vec![start.iter().map(|c| c / b0).collect()];
    let mut alphas: Vec<f64> = Vec::with_capacity(m_max);
    let mut betas: Vec<f64> = Vec::with_capacity(m_max);
    let mut w = vec![ZERO; dim];
    let m_max = m_max.min(dim);
    let mut tail = 0.0;
    for j in 0..m_max {
        spec.apply(&vectors[j], &mut w);
        stats.matvecs += 1;
        let a = dot(&vectors[j], &w).re;
        axpy(&mut w, Complex64::new(-a, 0.0), &vectors[j]);
        if j > 0 {
            axpy(&mut w, Complex64::new(-betas[j - 1], 0.0), &vectors[j - 1]);
        }
        for _ in 0..2 {
            for v in &vectors {
                let c = dot(v, &w);
                axpy(&mut w, -c, v);
            }
        }
        alphas.push(a);
        let b = norm(&w);
        let scale = alphas.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        if b <= 1e-12 * scale {
            tail = 0.0;
            break;
        }
        if j + 1 == m_max {
            tail = b;
            break;
        }
        betas.push(b);
        vectors.push(w.iter().map(|c| c / b).collect());
    }
    vectors.truncate(alphas.len());
    LanczosBasis {
        vectors,
        alphas,
        betas,
        tail,
    }
}

fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// exp(−iT dt) e₁ from the eigen-decomposition of T.
fn small_propagator(values: &[f64], vectors: &DMatrix<f64>, dt: f64) -> Vec<Complex64> {
    let k = values.len();
    let weights: Vec<Complex64> = (0..k)
        .map(|j| Complex64::from_polar(vectors[(0, j)], -values[j] * dt))
        .collect();
    (0..k)
        .map(|i| (0..k).map(|j| weights[j] * vectors[(i, j)]).sum())
        .collect()
}

/// Propagates by e^{−iHt}, returning the state and diagnostics.
pub fn evolve_exact_with(
    state: &JointState,
    t: f64,
    spec: &HamiltonianSpec,
    opts: &KrylovOptions,
) -> Result<(JointState, EvolveStats)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(domain(format!(
            "evolution time must be finite and >= 0, got {t}"
        )));
    }
    if state.ncut != spec.ncut || state.n_atoms() != spec.n_atoms() {
        return Err(domain("state and Hamiltonian shapes differ"));
    }
    let mut stats = EvolveStats::default();
    let mut psi = state.amplitudes.clone();
    let n0 = norm(&psi);
    if n0 == 0.0 {
        return Err(domain("cannot evolve the zero state"));
    }
    let mut elapsed = 0.0;
    let mut dt_try = t;
    while elapsed < t {
        if stats.steps >= opts.max_steps {
            return Err(Error::Integration(format!(
                "step budget {} exhausted at t = {elapsed} of {t} ({} matvecs)",
                opts.max_steps, stats.matvecs
            )));
        }
        let remaining = t - elapsed;
        let basis = lanczos(spec, &psi, opts.krylov_dim, &mut stats);
        let (values, vectors) = tridiagonal_eigen(&basis.alphas, &basis.betas);
        let k = basis.alphas.len();
        let mut dt = dt_try.min(remaining);
        let (coeffs, err) = loop {
            let c = small_propagator(&values, &vectors, dt);
            let err = n0 * basis.tail * c[k - 1].norm();
            if err <= opts.tol * dt || basis.tail == 0.0 {
                break (c, err);
            }
            let shrink = (0.9 * (opts.tol * dt / err).powf(1.0 / k as f64)).clamp(0.1, 0.9);
            dt *= shrink;
            if dt < t * 1e-14 {
                return Err(Error::Integration(format!(
                    "step size underflow at t = {elapsed}: local error {err:.3e}"
                )));
            }
        };
        let mut next = vec![ZERO; psi.len()];
        for (c, v) in coeffs.iter().zip(&basis.vectors) {
            axpy(&mut next, c * n0, v);
        }
        psi = next;
        elapsed = if dt >= remaining { t } else { elapsed + dt };
        stats.steps += 1;
        stats.error_estimate += err;
        dt_try = dt * 2.0;
        let drift = (norm(&psi) - n0).abs() / n0;
        stats.norm_drift = stats.norm_drift.max(drift);
        if drift > opts.norm_drift_limit {
            return Err(Error::Integration(format!(
                "norm drift {drift:.3e} exceeds {:.1e} at t = {elapsed} after {} steps",
                opts.norm_drift_limit, stats.steps
            )));
        }
    }
    let out = JointState {
        params: state.params,
        ncut: state.ncut,
        t: state.t + t,
        amplitudes: psi,
    };
    let tail = out.tail_mass() / out.norm_sqr();
    if tail > TAIL_TOLERANCE {
        return Err(Error::Cutoff {
            ncut: out.ncut,
            from: FieldState::vacuum(out.ncut).tail_start(),
            tail_mass: tail,
        });
    }
    Ok((out, stats))
}

pub fn evolve_exact(state: &JointState, t: f64, spec: &HamiltonianSpec) -> Result<JointState> {
    Ok(evolve_exact_with(state, t, spec, &KrylovOptions::default())?.0)
}

/// ‖ψ_default − ψ_tight‖ where the tight run doubles the Krylov dimension and
/// tightens the tolerance a hundredfold.
pub fn convergence_gap(state: &JointState, t: f64, spec: &HamiltonianSpec) -> Result<f64> {
    convergence_gap_with(state, t, spec, &KrylovOptions::default())
}

/// [`convergence_gap`] measured from `opts` instead of the defaults.
pub fn convergence_gap_with(
    state: &JointState,
    t: f64,
    spec: &HamiltonianSpec,
    opts: &KrylovOptions,
) -> Result<f64> {
    let tight = KrylovOptions {
        krylov_dim: opts.krylov_dim * 2,
        tol: opts.tol * 1e-2,
        ..*opts
    };
    let a = evolve_exact_with(state, t, spec, opts)?.0;
    let b = evolve_exact_with(state, t, spec, &tight)?.0;
    a.distance(&b)
}

/// Fixed-step classical Runge–Kutta reference.
pub fn evolve_rk4(
    state: &JointState,
    t: f64,
    spec: &HamiltonianSpec,
    steps: usize,
) -> Result<JointState> {
    if steps == 0 {
        return Err(domain("RK4 needs at least one step"));
    }
    let dim = spec.dim();
    if state.amplitudes.len() != dim {
        return Err(domain("state and Hamiltonian shapes differ"));
    }
    let h = t / steps as f64;
    let mi = Complex64::new(0.0, -1.0);
    let f = |v: &[Complex64], out: &mut [Complex64]| {
        spec.apply(v, out);
        for o in out.iter_mut() {
            *o *= mi;
        }
    };
    let mut psi = state.amplitudes.clone();
    let mut k1 = vec![ZERO; dim];
    let mut k2 = vec![ZERO; dim];
    let mut k3 = vec![ZERO; dim];
    let mut k4 = vec![ZERO; dim];
    let mut tmp = vec![ZERO; dim];
    for _ in 0..steps {
        f(&psi, &mut k1);
        for i in 0..dim {
            tmp[i] = psi[i] + k1[i] * (h / 2.0);
        }
        f(&tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = psi[i] + k2[i] * (h / 2.0);
        }
        f(&tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = psi[i] + k3[i] * h;
        }
        f(&tmp, &mut k4);
        for i in 0..dim {
            psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    JointState::from_amplitudes(&state.params, state.ncut, state.t + t, psi)
}

/// Lowest eigenvalue of H by Lanczos with full reorthogonalization, started
/// from a seeded random vector.
pub fn lowest_eigenvalue(spec: &HamiltonianSpec, seed: u64) -> Result<f64> {
    let dim = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), 0.0))
        .collect();
    let mut stats = EvolveStats::default();
    let mut m = 40.min(dim);
    let mut last = f64::INFINITY;
    loop {
        let basis = lanczos(spec, &start, m, &mut stats);
        let (values, vectors) = tridiagonal_eigen(&basis.alphas, &basis.betas);
        let (j, &lowest) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty basis");
        let residual = basis.tail * vectors[(values.len() - 1, j)].abs();
        let scale = lowest.abs().max(1.0);
        if residual <= 1e-13 * scale
            || basis.tail == 0.0
            || m >= dim
            || (lowest - last).abs() <= 1e-15 * scale
        {
            return Ok(lowest);
        }
        if m >= 2000 {
            return Err(Error::Integration(format!(
                "lowest eigenvalue unconverged: residual {residual:.3e}"
            )));
        }
        last = lowest;
        m = (m * 2).min(dim);
    }
}
