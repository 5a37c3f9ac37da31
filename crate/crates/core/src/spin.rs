//! Ensembles of N two-level atoms: product-state moments under the free
//! Hamiltonian (Δ/2)Σσ_z, a 2^N brute-force referee, Ehrenfest residuals,
//! and the permutation-symmetric (Dicke) sector used by the field dynamics.
//!
//! Conventions: σ_z|↑⟩ = |↑⟩, |±1⟩ = (|↑⟩ ± |↓⟩)/√2 are the σ_x eigenstates
//! (|+1⟩ = (|↓⟩ + |↑⟩)/√2). A collective basis index m counts flipped sites,
//! so the collective eigenvalue is N − 2m.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest N accepted by [`sigma_moments_bruteforce`].
pub const BRUTEFORCE_MAX_ATOMS: usize = 14;
/// Largest N for which the X↔Z collective transform is built exactly.
pub const TRANSFORM_MAX_ATOMS: usize = 100;

/// Per-site amplitudes (a_i, b_i) of ∏(a_i|↓⟩ + b_i|↑⟩).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSpinSpec {
    pairs: Vec<(Complex64, Complex64)>,
}

impl ProductSpinSpec {
    pub fn new(pairs: Vec<(Complex64, Complex64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(domain("product spin state needs at least one site"));
        }
        for (i, (a, b)) in pairs.iter().enumerate() {
            let norm = a.norm_sqr() + b.norm_sqr();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(domain(format!(
                    "site {i}: |a|² + |b|² = {norm}, expected 1"
                )));
            }
        }
        Ok(Self { pairs })
    }

    /// N copies of the same site state.
    pub fn uniform(n_atoms: usize, a: Complex64, b: Complex64) -> Result<Self> {
        Self::new(vec![(a, b); n_atoms])
    }

    /// Every atom in |+1⟩, the σ_x eigenstate with eigenvalue +1.
    pub fn ferromagnetic(n_atoms: usize) -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::uniform(n_atoms, h, h).expect("|+1⟩ is normalized")
    }

    /// Seeded random site states, uniform on the Bloch sphere.
    pub fn random(n_atoms: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = (0..n_atoms)
            .map(|_| {
                let cos_theta: f64 = rng.random_range(-1.0..=1.0);
                let theta = cos_theta.acos();
                let pa: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let pb: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                (
                    Complex64::from_polar((theta / 2.0).cos(), pa),
                    Complex64::from_polar((theta / 2.0).sin(), pb),
                )
            })
            .collect();
        Self { pairs }
    }

    pub fn n_atoms(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(Complex64, Complex64)] {
        &self.pairs
    }

    fn coherence_sum(&self) -> Complex64 {
        self.pairs.iter().map(|(a, b)| a.conj() * b).sum()
    }

    /// ξ_H = Σ(a*b + ab*)/N
    pub fn xi_h(&self) -> f64 {
        2.0 * self.coherence_sum().re / self.pairs.len() as f64
    }

    /// ξ′_H = iΣ(a*b − ab*)/N
    pub fn xi_h_prime(&self) -> f64 {
        -2.0 * self.coherence_sum().im / self.pairs.len() as f64
    }
}

/// First and second moments of Σ_x, Σ_y, Σ_z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_z: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub var_z: f64,
}

impl Moments {
    pub fn max_abs_diff(&self, other: &Moments) -> f64 {
        [
            self.mean_x - other.mean_x,
            self.mean_y - other.mean_y,
            self.mean_z - other.mean_z,
            self.var_x - other.var_x,
            self.var_y - other.var_y,
            self.var_z - other.var_z,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Closed-form moments of the evolved product state.
///
/// Sites stay uncorrelated under the free Hamiltonian, so each variance is
/// N minus the sum of squared single-site expectations.
pub fn sigma_moments_closed(spec: &ProductSpinSpec, delta: f64, t: f64) -> Moments {
    let n = spec.n_atoms() as f64;
    let (c, s) = ((delta * t).cos(), (delta * t).sin());
    let (xi, xi_p) = (spec.xi_h(), spec.xi_h_prime());
    let rot = Complex64::from_polar(1.0, -delta * t);

    let mean_x = n * (xi * c - xi_p * s);
    let mean_y = n * (xi_p * c + xi * s);
    let mut sq_x = 0.0;
    let mut sq_y = 0.0;
    let mut mean_z = 0.0;
    let mut sq_z = 0.0;
    for (a, b) in spec.pairs() {
        // a*(t) b(t) = a* b e^{−iΔt}
        let coh = a.conj() * b * rot;
        sq_x += (2.0 * coh.re).powi(2);
        sq_y += (2.0 * coh.im).powi(2);
        let z = b.norm_sqr() - a.norm_sqr();
        mean_z += z;
        sq_z += z * z;
    }
    Moments {
        mean_x,
        mean_y,
        mean_z,
        var_x: n - sq_x,
        var_y: n - sq_y,
        var_z: n - sq_z,
    }
}

/// Exact moments from the full 2^N state vector. Bit i set means site i is |↑⟩.
pub fn sigma_moments_bruteforce(spec: &ProductSpinSpec, delta: f64, t: f64) -> Result<Moments> {
    let n = spec.n_atoms();
    if n > BRUTEFORCE_MAX_ATOMS {
        return Err(Error::Capacity {
            what: "2^N brute-force spin state",
            requested: n,
            limit: BRUTEFORCE_MAX_ATOMS,
        });
    }
    let dim = 1usize << n;
    let psi: Vec<Complex64> = (0..dim)
        .map(|idx| {
            let mut amp = Complex64::new(1.0, 0.0);
            for (i, (a, b)) in spec.pairs().iter().enumerate() {
                amp *= if idx >> i & 1 == 1 { *b } else { *a };
            }
            let ups = idx.count_ones() as f64;
            let sz = 2.0 * ups - n as f64;
            amp * Complex64::from_polar(1.0, -0.5 * delta * t * sz)
        })
        .collect();

    let i = Complex64::new(0.0, 1.0);
    let mut sx = vec![Complex64::new(0.0, 0.0); dim];
    let mut sy = vec![Complex64::new(0.0, 0.0); dim];
    let mut sz = vec![Complex64::new(0.0, 0.0); dim];
    for (idx, amp) in psi.iter().enumerate() {
        for site in 0..n {
            let flipped = idx ^ (1 << site);
            sx[flipped] += amp;
            // σ_y|↑⟩ = i|↓⟩, σ_y|↓⟩ = −i|↑⟩
            if idx >> site & 1 == 1 {
                sy[flipped] += i * amp;
                sz[idx] += amp;
            } else {
                sy[flipped] -= i * amp;
                sz[idx] -= amp;
            }
        }
    }
    let moment = |v: &[Complex64]| -> (f64, f64) {
        let mean: f64 = psi.iter().zip(v).map(|(p, q)| (p.conj() * q).re).sum();
        let sq: f64 = v.iter().map(|q| q.norm_sqr()).sum();
        (mean, sq - mean * mean)
    };
    let (mean_x, var_x) = moment(&sx);
    let (mean_y, var_y) = moment(&sy);
    let (mean_z, var_z) = moment(&sz);
    Ok(Moments {
        mean_x,
        mean_y,
        mean_z,
        var_x,
        var_y,
        var_z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhrenfestResidual {
    pub r_x: f64,
    pub r_y: f64,
    pub r_z: f64,
}

/// Residuals of d⟨Σx⟩/dt = −Δ⟨Σy⟩, d⟨Σy⟩/dt = Δ⟨Σx⟩, d⟨Σz⟩/dt = 0 with
/// central differences of step `h`.
pub fn ehrenfest_residual(
    spec: &ProductSpinSpec,
    delta: f64,
    t: f64,
    h: f64,
) -> Result<EhrenfestResidual> {
    if !(h > 0.0) {
        return Err(domain(format!("difference step must be > 0, got {h}")));
    }
    let plus = sigma_moments_closed(spec, delta, t + h);
    let minus = sigma_moments_closed(spec, delta, t - h);
    let now = sigma_moments_closed(spec, delta, t);
    let d = |p: f64, m: f64| (p - m) / (2.0 * h);
    Ok(EhrenfestResidual {
        r_x: (d(plus.mean_x, minus.mean_x) + delta * now.mean_y).abs(),
        r_y: (d(plus.mean_y, minus.mean_y) - delta * now.mean_x).abs(),
        r_z: d(plus.mean_z, minus.mean_z).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinBasis {
    /// Σ_x eigenbasis
    X,
    /// Σ_z eigenbasis
    Z,
}

/// State in the (N+1)-dimensional symmetric sector. Index m has collective
/// eigenvalue N − 2m in the tagged basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveState {
    amplitudes: Vec<Complex64>,
    basis: SpinBasis,
}

impl CollectiveState {
    pub fn new(amplitudes: Vec<Complex64>, basis: SpinBasis) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(domain("collective state needs N + 1 >= 2 amplitudes"));
        }
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(domain(format!("collective state norm² {norm}, expected 1")));
        }
        Ok(Self { amplitudes, basis })
    }

    pub fn basis_state(n_atoms: usize, m: usize, basis: SpinBasis) -> Result<Self> {
        if m > n_atoms {
            return Err(domain(format!("basis index {m} exceeds N = {n_atoms}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_atoms + 1];
        amplitudes[m] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes, basis })
    }

    pub fn n_atoms(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn eigenvalue(&self, m: usize) -> i64 {
        self.n_atoms() as i64 - 2 * m as i64
    }

    pub fn inner(&self, other: &CollectiveState) -> Result<Complex64> {
        let other = other.to_basis(self.basis)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn to_basis(&self, basis: SpinBasis) -> Result<CollectiveState> {
        if basis == self.basis {
            return Ok(self.clone());
        }
        let n = self.n_atoms();
        let t = x_to_z_transform(n)?;
        let dim = n + 1;
        let amplitudes = (0..dim)
            .map(|row| {
                (0..dim)
                    .map(|col| {
                        // x_to_z is real orthogonal; its transpose maps Z to X
                        let w = match basis {
                            SpinBasis::Z => t[row * dim + col],
                            SpinBasis::X => t[col * dim + row],
                        };
                        self.amplitudes[col] * w
                    })
                    .sum()
            })
            .collect();
        Ok(CollectiveState { amplitudes, basis })
    }

    /// ⟨Σ_x⟩ and Var(Σ_x).
    pub fn sigma_x_moments(&self) -> Result<(f64, f64)> {
        let x = self.to_basis(SpinBasis::X)?;
        let mut mean = 0.0;
        let mut sq = 0.0;
        for (m, c) in x.amplitudes.iter().enumerate() {
            let ev = x.eigenvalue(m) as f64;
            mean += ev * c.norm_sqr();
            sq += ev * ev * c.norm_sqr();
        }
        Ok((mean, sq - mean * mean))
    }
}

/// |χ⟩ = ∏|+1⟩_i, the extremal Σ_x state with eigenvalue N.
pub fn chi_state(n_atoms: usize) -> Result<CollectiveState> {
    if n_atoms == 0 {
        return Err(domain("χ needs N >= 1"));
    }
    CollectiveState::basis_state(n_atoms, 0, SpinBasis::X)
}

/// |χ′⟩ = N^{-1/2} Σ_i |−1⟩_i ∏_{j≠i}|+1⟩_j, Σ_x eigenvalue N − 2.
pub fn chi_prime_state(n_atoms: usize) -> Result<CollectiveState> {
    if n_atoms == 0 {
        return Err(domain("χ′ needs N >= 1"));
    }
    CollectiveState::basis_state(n_atoms, 1, SpinBasis::X)
}

/// Σ_x eigenvalues N − 2m in the X basis.
pub fn sigma_x_diagonal(n_atoms: usize) -> Vec<f64> {
    (0..=n_atoms)
        .map(|m| n_atoms as f64 - 2.0 * m as f64)
        .collect()
}

/// Off-diagonal weights of Σ_z in the X basis: entry m couples m and m + 1
/// with √((m+1)(N−m)) = √(j(j+1) − m_x(m_x − 1)), m_x = N/2 − m.
pub fn sigma_z_ladder(n_atoms: usize) -> Vec<f64> {
    (0..n_atoms)
        .map(|m| (((m + 1) * (n_atoms - m)) as f64).sqrt())
        .collect()
}

fn binomials(n: usize) -> Vec<Vec<i128>> {
    let mut rows: Vec<Vec<i128>> = Vec::with_capacity(n + 1);
    for r in 0..=n {
        let mut row = vec![1i128; r + 1];
        for c in 1..r {
            row[c] = rows[r - 1][c - 1] + rows[r - 1][c];
        }
        rows.push(row);
    }
    rows
}

/// Real orthogonal matrix, row-major `[mz][mx]`, with entries
/// ⟨D^z_{mz}|D^x_{mx}⟩ = 2^{−N/2} K(mz, mx) √(C(N,mz)/C(N,mx)), where K is the
/// Krawtchouk sum Σ_i (−1)^i C(mz,i) C(N−mz, mx−i) evaluated in exact integers.
pub fn x_to_z_transform(n_atoms: usize) -> Result<Vec<f64>> {
    if n_atoms > TRANSFORM_MAX_ATOMS {
        return Err(Error::Capacity {
            what: "collective basis transform",
            requested: n_atoms,
            limit: TRANSFORM_MAX_ATOMS,
        });
    }
    let n = n_atoms;
    let binom = binomials(n);
    let c = |a: usize, b: usize| -> i128 {
        if b > a {
            0
        } else {
            binom[a][b]
        }
    };
    let ln_c = |b: usize| {
        crate::fock::ln_factorial(n)
            - crate::fock::ln_factorial(b)
            - crate::fock::ln_factorial(n - b)
    };
    let dim = n + 1;
    let mut out = vec![0.0; dim * dim];
    for mz in 0..dim {
        for mx in 0..dim {
            let mut k: i128 = 0;
            for i in 0..=mz.min(mx) {
                let term = c(mz, i) * c(n - mz, mx - i);
                if i % 2 == 0 {
                    k += term;
                } else {
                    k -= term;
                }
            }
            let scale =
                (0.5 * (ln_c(mz) - ln_c(mx)) - 0.5 * n as f64 * std::f64::consts::LN_2).exp();
            out[mz * dim + mx] = k as f64 * scale;
        }
    }
    Ok(out)
}
