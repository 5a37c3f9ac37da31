//! Independent oracles shared by the integration tests. Nothing here calls
//! the kernels it is meant to check.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

/// Exact Gaussian-integer vector, real and imaginary parts.
#[derive(Clone)]
struct GaussVec {
    re: Vec<BigInt>,
    im: Vec<BigInt>,
}

/// Column k of exp(G) for the generator G = αa† − α*a truncated to `dim`
/// Fock states, with α = (ar + i·ai)/q.
///
/// In the unnormalized basis |n) = √n!|n⟩ the generator has Gaussian-rational
/// entries, G|n) = α|n+1) − α* n|n−1), so the Taylor series is summed exactly
/// up to `terms` and rounded once at the end. Returns ⟨n|e^G|k⟩ for n < dim.
pub fn displacement_column_exact(
    ar: i64,
    ai: i64,
    q: i64,
    dim: usize,
    k: usize,
    terms: usize,
) -> Vec<Complex64> {
    let (ar, ai, q) = (BigInt::from(ar), BigInt::from(ai), BigInt::from(q));
    // v_j = q^j G^j e_k, Gaussian integers
    let mut v = GaussVec {
        re: vec![BigInt::zero(); dim],
        im: vec![BigInt::zero(); dim],
    };
    v.re[k] = BigInt::one();
    // sum = Σ_j v_j · w_j with w_j = (J! q^J)/(j! q^j), all over J! q^J
    let mut weights = vec![BigInt::one(); terms + 1];
    for j in (0..terms).rev() {
        weights[j] = &weights[j + 1] * BigInt::from((j + 1) as i64) * &q;
    }
    let denom = weights[0].clone();
    let mut sum_re: Vec<BigInt> = v.re.iter().map(|x| x * &weights[0]).collect();
    let mut sum_im: Vec<BigInt> = v.im.iter().map(|x| x * &weights[0]).collect();
    for j in 1..=terms {
        let mut re = vec![BigInt::zero(); dim];
        let mut im = vec![BigInt::zero(); dim];
        for n in 0..dim {
            // α v_{n−1}
            if n > 0 {
                let (xr, xi) = (&v.re[n - 1], &v.im[n - 1]);
                re[n] += &ar * xr - &ai * xi;
                im[n] += &ar * xi + &ai * xr;
            }
            // −α*(n+1) v_{n+1}
            if n + 1 < dim {
                let (xr, xi) = (&v.re[n + 1], &v.im[n + 1]);
                let f = BigInt::from((n + 1) as i64);
                re[n] -= (&ar * xr + &ai * xi) * &f;
                im[n] -= (&ar * xi - &ai * xr) * &f;
            }
        }
        v = GaussVec { re, im };
        for n in 0..dim {
            sum_re[n] += &v.re[n] * &weights[j];
            sum_im[n] += &v.im[n] * &weights[j];
        }
    }
    let ln_fact = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
    (0..dim)
        .map(|n| {
            let scale = (0.5 * (ln_fact(n) - ln_fact(k))).exp();
            let re = BigRational::new(sum_re[n].clone(), denom.clone())
                .to_f64()
                .unwrap();
            let im = BigRational::new(sum_im[n].clone(), denom.clone())
                .to_f64()
                .unwrap();
            Complex64::new(re, im) * scale
        })
        .collect()
}

/// Columns 0..=kmax of the exact truncated-generator exponential.
pub fn displacement_matrix_exact(
    ar: i64,
    ai: i64,
    q: i64,
    dim: usize,
    kmax: usize,
    terms: usize,
) -> Vec<Vec<Complex64>> {
    (0..=kmax)
        .into_par_iter()
        .map(|k| displacement_column_exact(ar, ai, q, dim, k, terms))
        .collect()
}

fn binom(n: i64, r: i64) -> BigInt {
    if r < 0 || r > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..r {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// L_n^{(k)}(x) from the finite series Σ_j (−1)^j C(n+k, n−j) x^j / j!,
/// exact in rationals.
pub fn laguerre_series(n: i64, k: i64, x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    let mut xpow = BigRational::one();
    let mut fact = BigInt::one();
    for j in 0..=n {
        if j > 0 {
            xpow = &xpow * x;
            fact *= BigInt::from(j);
        }
        let c = BigRational::from_integer(binom(n + k, n - j)) * &xpow
            / BigRational::from_integer(fact.clone());
        if j % 2 == 0 {
            acc += c;
        } else {
            acc -= c;
        }
    }
    acc
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// e^{−iHt}v for a dense real symmetric H (row-major) by full
/// diagonalization.
pub fn dense_propagate(h: &[f64], dim: usize, v: &[Complex64], t: f64) -> Vec<Complex64> {
    let m = DMatrix::from_row_slice(dim, dim, h);
    let eig = SymmetricEigen::new(m);
    let u = &eig.eigenvectors;
    let coeffs: Vec<Complex64> = (0..dim)
        .map(|j| {
            let proj: Complex64 = (0..dim).map(|i| v[i] * u[(i, j)]).sum();
            proj * Complex64::from_polar(1.0, -eig.eigenvalues[j] * t)
        })
        .collect();
    (0..dim)
        .map(|i| (0..dim).map(|j| coeffs[j] * u[(i, j)]).sum())
        .collect()
}

/// Sorted eigenvalues of a dense real symmetric matrix.
pub fn dense_eigenvalues(h: &[f64], dim: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(dim, dim, h);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Full 2^N spin ⊗ Fock Hamiltonian in the computational σ_z basis:
/// ω a†a + g Σσx_i (a + a†) + (Δ/2) Σσz_i. Index = s * (ncut+1) + n with bit
/// i of s set meaning site i is up.
pub fn product_hamiltonian(
    omega: f64,
    delta: f64,
    g: f64,
    n_atoms: usize,
    ncut: usize,
) -> (Vec<f64>, usize) {
    let d = ncut + 1;
    let s_dim = 1usize << n_atoms;
    let dim = s_dim * d;
    let mut h = vec![0.0; dim * dim];
    for s in 0..s_dim {
        let sz: f64 = (0..n_atoms)
            .map(|i| if s >> i & 1 == 1 { 1.0 } else { -1.0 })
            .sum();
        for n in 0..d {
            let r = s * d + n;
            h[r * dim + r] += omega * n as f64 + 0.5 * delta * sz;
            for i in 0..n_atoms {
                let s2 = s ^ (1 << i);
                if n + 1 < d {
                    let c = s2 * d + n + 1;
                    h[r * dim + c] += g * ((n + 1) as f64).sqrt();
                }
                if n > 0 {
                    let c = s2 * d + n - 1;
                    h[r * dim + c] += g * (n as f64).sqrt();
                }
            }
        }
    }
    (h, dim)
}

/// Product-basis vector of the symmetric state with m sites in |−1⟩ (σx
/// eigenvalue −1), where |±1⟩ = (|↑⟩ ± |↓⟩)/√2.
pub fn dicke_x_state(n_atoms: usize, m: usize) -> Vec<f64> {
    let s_dim = 1usize << n_atoms;
    let mut out = vec![0.0; s_dim];
    let mut count = 0usize;
    for flips in 0..s_dim as u32 {
        if flips.count_ones() as usize != m {
            continue;
        }
        count += 1;
        for (s, o) in out.iter_mut().enumerate() {
            // ∏_i ⟨s_i|±1⟩ with ⟨↑|±1⟩ = 1/√2, ⟨↓|±1⟩ = ±1/√2
            let mut amp = 1.0;
            for i in 0..n_atoms {
                let up = s >> i & 1 == 1;
                let minus = flips >> i & 1 == 1;
                amp *= std::f64::consts::FRAC_1_SQRT_2 * if !up && minus { -1.0 } else { 1.0 };
            }
            *o += amp;
        }
    }
    let norm = (count as f64).sqrt();
    out.iter().map(|x| x / norm).collect()
}

pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|c| c.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum();
    ip.norm_sqr() / (na * nb)
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
