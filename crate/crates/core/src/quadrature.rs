//! Gauss–Legendre panel quadrature for integrands carrying the phase
//! θ(t) = 4(N−1)(g/ω)²(ωt − sin ωt).
//!
//! Panels are uniform in s(t) = θ(t)/(π/2) + ωt/0.25, so each panel spans at
//! most a quarter wave of the phase and a quarter radian of ωt. Errors are
//! estimated by comparing a panel set with its two-way refinement.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Nodes per panel.
pub const GL_ORDER: usize = 16;
/// Refinement levels tried before giving up.
pub const MAX_LEVEL: usize = 8;

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Nodes and weights of the 16-point rule mapped to [a, b].
pub fn panel_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (x, w) = gl16();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(w)
        .map(move |(xi, wi)| (mid + half * xi, half * wi))
}

/// The first-order Dyson phase and its panel metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DysonPhase {
    rate: f64,
    omega: f64,
}

impl DysonPhase {
    pub fn new(params: &ModelParams) -> Self {
        let r = params.g / params.omega;
        Self {
            rate: 4.0 * (params.n() - 1.0) * r * r,
            omega: params.omega,
        }
    }

    /// θ(t)
    pub fn theta(&self, t: f64) -> f64 {
        let wt = self.omega * t;
        self.rate * (wt - wt.sin())
    }

    /// dθ/dt = 4(N−1)(g²/ω)(1 − cos ωt)
    pub fn rate(&self, t: f64) -> f64 {
        self.rate * self.omega * (1.0 - (self.omega * t).cos())
    }

    fn metric(&self, t: f64) -> f64 {
        self.theta(t) / FRAC_PI_2 + self.omega * t / 0.25
    }

    /// Panel edges on [a, b], uniform in the metric s(t).
    pub fn panel_edges(&self, a: f64, b: f64) -> Vec<f64> {
        if b <= a {
            return vec![a, a];
        }
        let (sa, sb) = (self.metric(a), self.metric(b));
        let count = ((sb - sa).ceil() as usize).max(1);
        let mut edges = Vec::with_capacity(count + 1);
        edges.push(a);
        let mut lo = a;
        for i in 1..count {
            let target = sa + (sb - sa) * i as f64 / count as f64;
            let (mut l, mut h) = (lo, b);
            for _ in 0..200 {
                let mid = 0.5 * (l + h);
                if self.metric(mid) < target {
                    l = mid;
                } else {
                    h = mid;
                }
                if h - l <= 1e-15 * b.abs().max(1.0) {
                    break;
                }
            }
            lo = 0.5 * (l + h);
            edges.push(lo);
        }
        edges.push(b);
        edges
    }
}

/// Splits every panel into `2^level` equal parts.
pub fn refine(edges: &[f64], level: usize) -> Vec<f64> {
    let parts = 1usize << level;
    let mut out = Vec::with_capacity((edges.len() - 1) * parts + 1);
    for w in edges.windows(2) {
        for j in 0..parts {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / parts as f64);
        }
    }
    out.push(*edges.last().expect("at least one edge"));
    out
}

/// Convergence information attached to quadrature results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct QuadratureReport {
    pub panels: usize,
    pub nodes: usize,
    pub error_estimate: f64,
    pub converged: bool,
}

/// Adds vectors in a fixed binary tree so the result does not depend on how
/// the terms were scheduled.
pub fn pairwise_sum(mut terms: Vec<Vec<Complex64>>, dim: usize) -> Vec<Complex64> {
    if terms.is_empty() {
        return vec![Complex64::new(0.0, 0.0); dim];
    }
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
    terms.pop().expect("one term left")
}

pub(crate) fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn vec_diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// ∫ f over the panels; f returns a vector of length `dim`.
pub fn integrate_panels<F>(f: &F, edges: &[f64], dim: usize) -> Vec<Complex64>
where
    F: Fn(f64) -> Vec<Complex64> + Sync,
{
    let nodes: Vec<(f64, f64)> = edges
        .windows(2)
        .flat_map(|w| panel_nodes(w[0], w[1]))
        .collect();
    let terms: Vec<Vec<Complex64>> = nodes
        .par_iter()
        .map(|&(t, w)| f(t).into_iter().map(|c| c * w).collect())
        .collect();
    pairwise_sum(terms, dim)
}

/// Refines `base` until two successive levels agree within `rel_tol`.
/// `eval(edges)` returns the integral on a panel set and its node count.
pub fn refine_until<E>(
    base: &[f64],
    rel_tol: f64,
    mut eval: E,
) -> Result<(Vec<Complex64>, QuadratureReport)>
where
    E: FnMut(&[f64]) -> Result<(Vec<Complex64>, usize)>,
{
    let (mut prev, mut nodes) = eval(base)?;
    let mut last_err = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        let edges = refine(base, level);
        let (cur, n) = eval(&edges)?;
        nodes += n;
        let err = vec_diff_norm(&cur, &prev);
        let scale = vec_norm(&cur);
        last_err = err;
        if err <= rel_tol * scale || scale == 0.0 {
            return Ok((
                cur,
                QuadratureReport {
                    panels: edges.len() - 1,
                    nodes,
                    error_estimate: if scale > 0.0 { err / scale } else { 0.0 },
                    converged: true,
                },
            ));
        }
        prev = cur;
    }
    Err(Error::Quadrature {
        error: last_err,
        panels: (base.len() - 1) << MAX_LEVEL,
    })
}
