use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the field/ensemble model.
///
/// `omega` is the mode frequency, `delta` the atomic level splitting, `g` the
/// dipole coupling and `n_atoms` the ensemble size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub delta: f64,
    pub g: f64,
    pub n_atoms: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            omega: 1.0,
            delta: 0.0,
            g: 0.25,
            n_atoms: 4,
        }
    }
}

impl ModelParams {
    pub fn new(omega: f64, delta: f64, g: f64, n_atoms: usize) -> Result<Self> {
        let p = Self {
            omega,
            delta,
            g,
            n_atoms,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Error::Config {
            field: field.to_string(),
            reason: reason.to_string(),
        };
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(bad("model.omega", "must be finite and > 0"));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(bad("model.delta", "must be finite and >= 0"));
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(bad("model.g", "must be finite and >= 0"));
        }
        if self.n_atoms == 0 {
            return Err(bad("model.n_atoms", "must be >= 1"));
        }
        Ok(())
    }

    pub fn n(&self) -> f64 {
        self.n_atoms as f64
    }

    /// g/ω
    pub fn coupling_ratio(&self) -> f64 {
        self.g / self.omega
    }

    /// Δ/(gN). Small values mean the coupling term dominates the atomic
    /// splitting; infinite when g = 0.
    pub fn strong_coupling_ratio(&self) -> f64 {
        self.delta / (self.g * self.n())
    }

    /// Largest |β(t)| over all times, 2Ng/ω.
    pub fn beta_max(&self) -> f64 {
        2.0 * self.n() * self.g / self.omega
    }

    pub fn with_atoms(mut self, n_atoms: usize) -> Self {
        self.n_atoms = n_atoms;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }
}
