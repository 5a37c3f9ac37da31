//! Truncated Fock-space states and the special-function kernels behind them.
//!
//! Every field state lives in the span of |0⟩ … |ncut⟩. Displacement matrix
//! elements ⟨n|D[α]|k⟩ are evaluated from the associated-Laguerre closed form
//! with factorial ratios carried in the log domain, so cutoffs in the
//! thousands stay finite.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::params::ModelParams;

/// Tail mass allowed beyond `ncut - margin`.
pub const TAIL_TOLERANCE: f64 = 1e-8;
/// Smallest cutoff handed out by [`choose_cutoff`].
pub const MIN_CUTOFF: usize = 16;

const LN_FACT_TABLE: usize = 8192;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        t.push(0.0);
        let mut acc = 0.0;
        for k in 1..LN_FACT_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// ln(n!)
pub fn ln_factorial(n: usize) -> f64 {
    if n < LN_FACT_TABLE {
        return ln_fact_table()[n];
    }
    // Stirling series; at n >= 8192 the truncation error is far below 1 ulp.
    let x = n as f64 + 1.0;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
}

/// Generalized Laguerre polynomial L_n^{(k)}(x) by upward recurrence in n.
///
/// Defined whenever n + k >= 0; negative `k` is allowed inside that range.
pub fn assoc_laguerre(n: usize, k: i64, x: f64) -> Result<f64> {
    if (n as i64) + k < 0 {
        return Err(domain(format!(
            "L_n^(k) needs n + k >= 0, got n={n}, k={k}"
        )));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(domain(format!("L_n^(k) needs finite x >= 0, got {x}")));
    }
    let kf = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 1.0 + kf - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * cur - (jf + kf) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Walks L_j^{(q)}(x) for j = 0, 1, … while keeping the mantissa bounded.
/// The true value is `value() * exp(ln_scale)`.
struct ScaledLaguerre {
    q: f64,
    x: f64,
    j: usize,
    prev: f64,
    cur: f64,
    ln_scale: f64,
}

impl ScaledLaguerre {
    fn new(q: usize, x: f64) -> Self {
        Self {
            q: q as f64,
            x,
            j: 0,
            prev: 0.0,
            cur: 1.0,
            ln_scale: 0.0,
        }
    }

    fn value(&self) -> f64 {
        self.cur
    }

    fn advance(&mut self) {
        let jf = self.j as f64;
        let next = if self.j == 0 {
            1.0 + self.q - self.x
        } else {
            ((2.0 * jf + 1.0 + self.q - self.x) * self.cur - (jf + self.q) * self.prev) / (jf + 1.0)
        };
        self.prev = self.cur;
        self.cur = next;
        self.j += 1;
        let m = self.cur.abs().max(self.prev.abs());
        if m > 1e150 {
            self.cur /= m;
            self.prev /= m;
            self.ln_scale += m.ln();
        }
    }
}

/// ⟨n|D[α]|k⟩ in polar log form: `(ln|value|, phase)`. A zero element gives
/// `ln|value| = -inf`.
pub fn displacement_element_polar(n: usize, k: usize, alpha: Complex64) -> (f64, f64) {
    let x = alpha.norm_sqr();
    if x == 0.0 {
        return if n == k {
            (0.0, 0.0)
        } else {
            (f64::NEG_INFINITY, 0.0)
        };
    }
    let (low, q, base) = if n >= k {
        (k, n - k, alpha)
    } else {
        (n, k - n, -alpha.conj())
    };
    let mut lag = ScaledLaguerre::new(q, x);
    for _ in 0..low {
        lag.advance();
    }
    let l = lag.value();
    if l == 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let ln_mag = 0.5 * (ln_factorial(low) - ln_factorial(low + q)) + q as f64 * base.norm().ln()
        - 0.5 * x
        + lag.ln_scale
        + l.abs().ln();
    let sign_phase = if l < 0.0 { PI } else { 0.0 };
    (ln_mag, q as f64 * base.arg() + sign_phase)
}

/// ⟨n|D[α]|k⟩ with D[α] = exp(α a† − α* a).
pub fn displacement_element(n: usize, k: usize, alpha: Complex64) -> Complex64 {
    let (ln_mag, phase) = displacement_element_polar(n, k, alpha);
    if ln_mag == f64::NEG_INFINITY {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::from_polar(ln_mag.exp(), phase)
}

/// Dense truncation of D[α] on |0⟩ … |dim-1⟩, row-major `(n, k)`.
///
/// These are the exact infinite-space matrix elements; the truncated matrix
/// is not itself unitary near the corner.
#[derive(Debug, Clone)]
pub struct DisplacementMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DisplacementMatrix {
    pub fn new(alpha: Complex64, dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        let x = alpha.norm_sqr();
        if x == 0.0 {
            for i in 0..dim {
                data[i * dim + i] = Complex64::new(1.0, 0.0);
            }
            return Self { dim, data };
        }
        let ln_a = 0.5 * x.ln();
        let theta = alpha.arg();
        for q in 0..dim {
            // below the diagonal: (j+q, j) carries α^q; above: (j, j+q) carries (−α*)^q
            let below = Complex64::from_polar(1.0, q as f64 * theta);
            let above =
                Complex64::from_polar(if q % 2 == 0 { 1.0 } else { -1.0 }, -(q as f64) * theta);
            let mut lag = ScaledLaguerre::new(q, x);
            // ln of √(j!/(j+q)!) |α|^q e^{−x/2} at j = 0
            let mut ln_pref = q as f64 * ln_a - 0.5 * x - 0.5 * ln_factorial(q);
            for j in 0..dim - q {
                if j > 0 {
                    lag.advance();
                    ln_pref += 0.5 * ((j as f64) / ((j + q) as f64)).ln();
                }
                let l = lag.value();
                let r = if l == 0.0 {
                    0.0
                } else {
                    l.signum() * (ln_pref + lag.ln_scale + l.abs().ln()).exp()
                };
                data[(j + q) * dim + j] = below * r;
                if q > 0 {
                    data[j * dim + j + q] = above * r;
                }
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, n: usize, k: usize) -> Complex64 {
        self.data[n * self.dim + k]
    }

    /// Column k, i.e. the amplitudes of the displaced number state D[α]|k⟩.
    pub fn column(&self, k: usize) -> Vec<Complex64> {
        (0..self.dim).map(|n| self.get(n, k)).collect()
    }

    /// Matrix-vector product; `v` is zero-padded or truncated to `dim`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim;
        let used = v.len().min(d);
        let last = v[..used]
            .iter()
            .rposition(|c| c.norm_sqr() != 0.0)
            .map_or(0, |i| i + 1);
        (0..d)
            .map(|n| {
                let row = &self.data[n * d..n * d + last];
                row.iter().zip(&v[..last]).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

/// Radiation-mode state in a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    amplitudes: Vec<Complex64>,
    normalized: bool,
}

impl FieldState {
    /// Wraps raw amplitudes; `amplitudes[n]` is the coefficient of |n⟩.
    /// The normalized flag is set when the norm is 1 within 1e-10.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(domain("field state needs at least one amplitude"));
        }
        let mut s = Self {
            amplitudes,
            normalized: false,
        };
        s.normalized = (s.norm_sqr() - 1.0).abs() <= 1e-10;
        Ok(s)
    }

    pub fn vacuum(ncut: usize) -> Self {
        Self::number(0, ncut).expect("0 <= ncut")
    }

    pub fn number(k: usize, ncut: usize) -> Result<Self> {
        if k > ncut {
            return Err(domain(format!("|{k}⟩ does not fit below ncut = {ncut}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); ncut + 1];
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            normalized: true,
        })
    }

    pub fn ncut(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// ⟨self|other⟩; the shorter vector is treated as zero-padded.
    pub fn inner(&self, other: &FieldState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Rescales to unit norm. Fails on the zero vector.
    pub fn normalize(mut self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(domain("cannot normalize a zero or non-finite field state"));
        }
        for c in &mut self.amplitudes {
            *c /= norm;
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        for c in &mut self.amplitudes {
            *c *= factor;
        }
        self.normalized = (self.norm_sqr() - 1.0).abs() <= 1e-10;
        self
    }

    /// Resizes to a new cutoff, dropping or zero-padding the top.
    pub fn resized(mut self, ncut: usize) -> Self {
        self.amplitudes.resize(ncut + 1, Complex64::new(0.0, 0.0));
        self.normalized = (self.norm_sqr() - 1.0).abs() <= 1e-10;
        self
    }

    pub fn mean_photon_number(&self) -> f64 {
        let num: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr())
            .sum();
        num / self.norm_sqr()
    }

    /// First Fock index counted as tail: `ncut - margin + 1` with
    /// `margin = max(8, ncut / 10)`, never below 1.
    pub fn tail_start(&self) -> usize {
        let ncut = self.ncut();
        let margin = (ncut / 10).max(8);
        (ncut + 1).saturating_sub(margin).max(1)
    }

    pub fn tail_mass(&self) -> f64 {
        self.amplitudes[self.tail_start().min(self.dim())..]
            .iter()
            .map(|c| c.norm_sqr())
            .sum()
    }

    pub fn check_tail(&self) -> Result<()> {
        let tail_mass = self.tail_mass();
        if tail_mass > TAIL_TOLERANCE {
            return Err(Error::Cutoff {
                ncut: self.ncut(),
                from: self.tail_start(),
                tail_mass,
            });
        }
        Ok(())
    }

    /// Writes `n,re,im` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,re,im")?;
        for (n, c) in self.amplitudes.iter().enumerate() {
            writeln!(out, "{n},{},{}", c.re, c.im)?;
        }
        Ok(())
    }
}

fn coherent_amplitudes(alpha: Complex64, ncut: usize) -> Vec<Complex64> {
    let x = alpha.norm_sqr();
    if x == 0.0 {
        let mut v = vec![Complex64::new(0.0, 0.0); ncut + 1];
        v[0] = Complex64::new(1.0, 0.0);
        return v;
    }
    let ln_a = alpha.norm().ln();
    let theta = alpha.arg();
    (0..=ncut)
        .map(|n| {
            let ln_mag = -0.5 * x + n as f64 * ln_a - 0.5 * ln_factorial(n);
            Complex64::from_polar(ln_mag.exp(), n as f64 * theta)
        })
        .collect()
}

/// |α⟩ truncated at `ncut` and renormalized.
pub fn coherent_state(alpha: Complex64, ncut: usize) -> Result<FieldState> {
    let state = FieldState::from_amplitudes(coherent_amplitudes(alpha, ncut))?;
    state.check_tail()?;
    state.normalize()
}

/// Unnormalized truncation of |α⟩ (exact amplitudes, no renormalization).
pub(crate) fn coherent_raw(alpha: Complex64, ncut: usize) -> Vec<Complex64> {
    coherent_amplitudes(alpha, ncut)
}

/// D[α]|k⟩ truncated at `ncut`.
pub fn displaced_number_state(k: usize, alpha: Complex64, ncut: usize) -> Result<FieldState> {
    if k > ncut {
        return Err(domain(format!("k = {k} exceeds ncut = {ncut}")));
    }
    let column = DisplacementMatrix::new(alpha, ncut + 1).column(k);
    let state = FieldState::from_amplitudes(column)?;
    state.check_tail()?;
    state.normalize()
}

/// Closed-form cat normalization 𝒩 for 𝒩(|αe^{iφ}⟩ + |αe^{−iφ}⟩).
pub fn cat_norm_factor(alpha: f64, phi: f64) -> f64 {
    let a2 = alpha * alpha;
    let overlap = (a2 * (2.0 * phi).sin()).cos() * (-2.0 * a2 * phi.sin().powi(2)).exp();
    1.0 / (2.0 + 2.0 * overlap).sqrt()
}

/// The even cat 𝒩(|αe^{iφ}⟩ + |αe^{−iφ}⟩) and its closed-form 𝒩.
///
/// The returned state is normalized from the truncated vector itself; the
/// closed-form factor is returned for cross-checks.
pub fn cat_state(alpha: f64, phi: f64, ncut: usize) -> Result<(FieldState, f64)> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(domain(format!(
            "cat amplitude must be finite and >= 0, got {alpha}"
        )));
    }
    let plus = coherent_raw(Complex64::from_polar(alpha, phi), ncut);
    let minus = coherent_raw(Complex64::from_polar(alpha, -phi), ncut);
    let sum = plus.iter().zip(&minus).map(|(a, b)| a + b).collect();
    let state = FieldState::from_amplitudes(sum)?;
    let norm_closed = cat_norm_factor(alpha, phi);
    let rel_tail = state.tail_mass() / state.norm_sqr();
    if rel_tail > TAIL_TOLERANCE {
        return Err(Error::Cutoff {
            ncut,
            from: state.tail_start(),
            tail_mass: rel_tail,
        });
    }
    Ok((state.normalize()?, norm_closed))
}

/// Fock cutoff large enough for every state the leading-order propagator
/// produces up to `t_max`. With s = 2Ng/ω + α and r = s + √k it returns at
/// least max(16, ⌈r² + 6r + 16⌉), raised so that the tail window starts
/// 8 standard deviations of a displaced |k⟩ (σ = s√(2k+1)) above r².
pub fn choose_cutoff(params: &ModelParams, t_max: f64, alpha: f64, k: usize) -> usize {
    debug_assert!(t_max >= 0.0, "t_max must be non-negative");
    let s = params.beta_max() + alpha.abs();
    let r = s + (k as f64).sqrt();
    let base = (r * r + 6.0 * r + 16.0).ceil();
    let tail_start = r * r + 8.0 * s * ((2 * k + 1) as f64).sqrt();
    let wide = (tail_start / 0.9).ceil().max(tail_start.ceil() + 8.0);
    (base.max(wide) as usize).max(MIN_CUTOFF)
}
