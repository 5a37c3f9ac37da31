//! Scenario configuration: a TOML file with flat tables, every default
//! resolved before a run starts.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::spin::ProductSpinSpec;
use crate::wigner::MAX_SPACING;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    SpinClassical,
    Cat,
    Fock,
    Wigner,
    DysonScaling,
    Convergence,
}

impl Study {
    pub const ALL: [Study; 6] = [
        Study::SpinClassical,
        Study::Cat,
        Study::Fock,
        Study::Wigner,
        Study::DysonScaling,
        Study::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::SpinClassical => "spin-classical",
            Study::Cat => "cat",
            Study::Fock => "fock",
            Study::Wigner => "wigner",
            Study::DysonScaling => "dyson-scaling",
            Study::Convergence => "convergence",
        }
    }

    pub fn parse(s: &str) -> Option<Study> {
        Study::ALL.into_iter().find(|st| st.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpinSource {
    Ferromagnetic,
    Random,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSource {
    Vacuum,
    Cat,
    Fock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridFormat {
    Csv,
    WignerBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_phi")]
    pub phi: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_field")]
    pub field: FieldSource,
    #[serde(default = "default_spin")]
    pub spin: SpinSource,
    /// Per-site (a, b) coefficients as [re a, im a, re b, im b].
    #[serde(default)]
    pub pairs: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_format")]
    pub format: GridFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default = "default_krylov_tol")]
    pub krylov_tol: f64,
    #[serde(default = "default_norm_drift")]
    pub norm_drift_limit: f64,
    /// Fock cutoff; 0 picks one from the parameters.
    #[serde(default)]
    pub ncut: usize,
    #[serde(default = "default_average_samples")]
    pub average_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    #[serde(default = "default_capacity")]
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub study: Option<Study>,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelParams,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub limits: Limits,
    /// Axis name to values; axes are iterated in name order.
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_alpha() -> f64 {
    2.0
}
fn default_phi() -> f64 {
    FRAC_PI_2
}
fn default_k() -> usize {
    2
}
fn default_field() -> FieldSource {
    FieldSource::Vacuum
}
fn default_spin() -> SpinSource {
    SpinSource::Ferromagnetic
}
fn default_t_max() -> f64 {
    2.0 * PI
}
fn default_n_steps() -> usize {
    16
}
fn default_margin() -> f64 {
    6.0
}
fn default_spacing() -> f64 {
    0.1
}
fn default_format() -> GridFormat {
    GridFormat::Csv
}
fn default_krylov_dim() -> usize {
    30
}
fn default_krylov_tol() -> f64 {
    1e-12
}
fn default_norm_drift() -> f64 {
    1e-9
}
fn default_average_samples() -> usize {
    64
}
fn default_max_points() -> usize {
    4096
}
fn default_capacity() -> usize {
    crate::exact::DEFAULT_CAPACITY
}

macro_rules! impl_default {
    ($ty:ident { $($field:ident: $val:expr),* $(,)? }) => {
        impl Default for $ty {
            fn default() -> Self {
                Self { $($field: $val),* }
            }
        }
    };
}

impl_default!(InitialConfig {
    alpha: default_alpha(),
    phi: default_phi(),
    k: default_k(),
    field: default_field(),
    spin: default_spin(),
    pairs: Vec::new(),
});
impl_default!(TimeConfig {
    t_max: default_t_max(),
    n_steps: default_n_steps(),
});
impl_default!(GridConfig {
    margin: default_margin(),
    spacing: default_spacing(),
    format: default_format(),
});
impl_default!(Tolerances {
    krylov_dim: default_krylov_dim(),
    krylov_tol: default_krylov_tol(),
    norm_drift_limit: default_norm_drift(),
    ncut: 0,
    average_samples: default_average_samples(),
});
impl_default!(Limits {
    max_points: default_max_points(),
    capacity: default_capacity(),
});

/// Names accepted as sweep axes.
pub const SWEEP_AXES: [&str; 7] = ["alpha", "delta", "g", "k", "n_atoms", "omega", "phi"];

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn whole(field: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(config_err(
            field,
            format!("expected a non-negative integer, got {v}"),
        ))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .and_then(|s| text.get(s))
                .map(|s| s.trim().to_string())
                .unwrap_or_else(|| "config".to_string());
            config_err(&field, e.message().to_string())
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn study(&self) -> Result<Study> {
        self.study.ok_or_else(|| config_err("study", "missing"))
    }

    /// Checks every field a run depends on.
    pub fn validate(&self) -> Result<()> {
        self.study()?;
        self.model.validate().map_err(|e| match e {
            Error::Config { .. } => e,
            other => config_err("model", other.to_string()),
        })?;
        let i = &self.initial;
        if !(i.alpha.is_finite() && i.alpha >= 0.0) {
            return Err(config_err(
                "initial.alpha",
                format!("must be finite and >= 0, got {}", i.alpha),
            ));
        }
        if !i.phi.is_finite() {
            return Err(config_err("initial.phi", "must be finite"));
        }
        if i.spin == SpinSource::Explicit && i.pairs.len() != self.model.n_atoms {
            return Err(config_err(
                "initial.pairs",
                format!(
                    "explicit spin source needs {} pairs, got {}",
                    self.model.n_atoms,
                    i.pairs.len()
                ),
            ));
        }
        if !(self.time.t_max.is_finite() && self.time.t_max > 0.0) {
            return Err(config_err(
                "time.t_max",
                format!("must be finite and > 0, got {}", self.time.t_max),
            ));
        }
        if self.time.n_steps == 0 {
            return Err(config_err("time.n_steps", "must be >= 1"));
        }
        if !(self.grid.margin.is_finite() && self.grid.margin > 0.0) {
            return Err(config_err("grid.margin", "must be finite and > 0"));
        }
        if !(self.grid.spacing > 0.0 && self.grid.spacing <= MAX_SPACING) {
            return Err(config_err(
                "grid.spacing",
                format!("must lie in (0, {MAX_SPACING}]"),
            ));
        }
        let tol = &self.tolerances;
        if tol.krylov_dim < 2 {
            return Err(config_err("tolerances.krylov_dim", "must be >= 2"));
        }
        if !(tol.krylov_tol > 0.0) {
            return Err(config_err("tolerances.krylov_tol", "must be > 0"));
        }
        if !(tol.norm_drift_limit > 0.0) {
            return Err(config_err("tolerances.norm_drift_limit", "must be > 0"));
        }
        if tol.average_samples < crate::wigner::MIN_SAMPLES {
            return Err(config_err(
                "tolerances.average_samples",
                format!("must be >= {}", crate::wigner::MIN_SAMPLES),
            ));
        }
        for (axis, values) in &self.sweep {
            let field = format!("sweep.{axis}");
            if !SWEEP_AXES.contains(&axis.as_str()) {
                return Err(config_err(
                    &field,
                    format!("unknown axis; expected one of {}", SWEEP_AXES.join(", ")),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(config_err(&field, "values must be finite"));
            }
        }
        let points = self
            .sweep
            .values()
            .map(|v| v.len().max(1))
            .product::<usize>();
        if points > self.limits.max_points {
            return Err(config_err(
                "sweep",
                format!(
                    "{points} points exceed limits.max_points = {}",
                    self.limits.max_points
                ),
            ));
        }
        Ok(())
    }

    /// Copy of the config with one axis value substituted.
    pub fn with_axis(&self, axis: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let field = format!("sweep.{axis}");
        match axis {
            "alpha" => c.initial.alpha = value,
            "delta" => c.model.delta = value,
            "g" => c.model.g = value,
            "k" => c.initial.k = whole(&field, value)?,
            "n_atoms" => c.model.n_atoms = whole(&field, value)?,
            "omega" => c.model.omega = value,
            "phi" => c.initial.phi = value,
            _ => return Err(config_err(&field, "unknown axis")),
        }
        Ok(c)
    }

    /// Copy with every sweep axis sorted ascending and deduplicated; empty
    /// axes are dropped.
    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        c.sweep = self
            .sweep
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| {
                let mut v = v.clone();
                v.sort_by(|a, b| a.total_cmp(b));
                v.dedup();
                (k.clone(), v)
            })
            .collect();
        c
    }

    /// Sweep points in canonical order: axes by name, values ascending, last
    /// axis fastest.
    pub fn sweep_points(&self) -> Vec<Vec<(String, f64)>> {
        let mut points = vec![Vec::new()];
        for (name, values) in &self.canonical().sweep {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((name.clone(), v));
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn spin_spec(&self) -> Result<ProductSpinSpec> {
        let n = self.model.n_atoms;
        match self.initial.spin {
            SpinSource::Ferromagnetic => Ok(ProductSpinSpec::ferromagnetic(n)),
            SpinSource::Random => Ok(ProductSpinSpec::random(n, self.seed)),
            SpinSource::Explicit => {
                if self.initial.pairs.len() != n {
                    return Err(config_err(
                        "initial.pairs",
                        format!("needs {n} pairs, got {}", self.initial.pairs.len()),
                    ));
                }
                let pairs = self
                    .initial
                    .pairs
                    .iter()
                    .map(|p| (Complex64::new(p[0], p[1]), Complex64::new(p[2], p[3])))
                    .collect();
                ProductSpinSpec::new(pairs).map_err(|e| config_err("initial.pairs", e.to_string()))
            }
        }
    }

    pub fn krylov_options(&self) -> crate::exact::KrylovOptions {
        crate::exact::KrylovOptions {
            krylov_dim: self.tolerances.krylov_dim,
            tol: self.tolerances.krylov_tol,
            norm_drift_limit: self.tolerances.norm_drift_limit,
            ..Default::default()
        }
    }

    /// Sample times t_i = i·t_max/n_steps, i = 0..=n_steps.
    pub fn times(&self) -> Vec<f64> {
        let n = self.time.n_steps;
        (0..=n)
            .map(|i| self.time.t_max * i as f64 / n as f64)
            .collect()
    }
}
