//! The six study pipelines. Each returns its metric table, scalar summary,
//! convergence flags and extra artifacts without touching the filesystem.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::dyson::{
    first_order_correction, second_order_correction, CorrectionRecord, QUADRATURE_TOL,
};
use crate::error::{Error, Result};
use crate::exact::{
    build_hamiltonian_with_limit, convergence_gap_with, evolve_exact_with, project_chi,
    EvolveStats, HamiltonianSpec, JointState,
};
use crate::fock::{
    cat_norm_factor, cat_state, choose_cutoff, coherent_state, displaced_number_state, FieldState,
    TAIL_TOLERANCE,
};
use crate::harness::config::{FieldSource, GridFormat, ScenarioConfig, Study};
use crate::params::ModelParams;
use crate::propagator::{
    apply_uf_sector, asymptotic_branch_ratio, evolve_cat_leading, evolve_fock_leading, frame,
};
use crate::spin::{
    chi_prime_state, chi_state, ehrenfest_residual, sigma_moments_bruteforce, sigma_moments_closed,
    BRUTEFORCE_MAX_ATOMS,
};
use crate::wigner::{
    branch_amplitudes, default_grid, fringe_offset, fringe_visibility, time_average, w_int_closed,
    wigner_numeric_batch, PHASE_COEFFICIENT,
};

/// Largest Krylov/Lanczos gap accepted by the convergence study.
pub const KRYLOV_GAP_LIMIT: f64 = 1e-8;
/// Largest pointwise Wigner decomposition error accepted.
pub const DECOMPOSITION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyOutput {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: BTreeMap<String, f64>,
    pub flags: Vec<String>,
    /// File name and contents.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl StudyOutput {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn flag(&mut self, flag: impl Into<String>) {
        let f = flag.into();
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
    }

    fn summarize(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }

    /// Final row value of a column.
    fn last(&self, column: &str) -> f64 {
        let j = self
            .columns
            .iter()
            .position(|c| c == column)
            .expect("known column");
        self.rows.last().map_or(f64::NAN, |r| r[j])
    }
}

/// Shortest round-trip decimal; non-finite values become empty cells.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn to_csv(columns: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn run_study(config: &ScenarioConfig) -> Result<StudyOutput> {
    config.validate()?;
    match config.study()? {
        Study::SpinClassical => spin_classical(config),
        Study::Cat => cat(config),
        Study::Fock => fock(config),
        Study::Wigner => wigner(config),
        Study::DysonScaling => dyson_scaling(config),
        Study::Convergence => convergence(config),
    }
}

fn cutoff(config: &ScenarioConfig, alpha: f64, k: usize) -> usize {
    match config.tolerances.ncut {
        0 => choose_cutoff(&config.model, config.time.t_max, alpha, k),
        n => n,
    }
}

fn fock_superposition(k: usize, ncut: usize) -> Result<FieldState> {
    let mut amps = vec![Complex64::new(0.0, 0.0); ncut + 1];
    amps[0] += FRAC_1_SQRT_2;
    amps[k] += FRAC_1_SQRT_2;
    FieldState::from_amplitudes(amps)?.normalize()
}

fn initial_field(config: &ScenarioConfig, ncut: usize) -> Result<FieldState> {
    let i = &config.initial;
    match i.field {
        FieldSource::Vacuum => Ok(FieldState::vacuum(ncut)),
        FieldSource::Cat => Ok(cat_state(i.alpha, i.phi, ncut)?.0),
        FieldSource::Fock => fock_superposition(i.k, ncut),
    }
}

fn field_cutoff(config: &ScenarioConfig) -> usize {
    let i = &config.initial;
    match i.field {
        FieldSource::Vacuum => cutoff(config, 0.0, 0),
        FieldSource::Cat => cutoff(config, i.alpha, 0),
        FieldSource::Fock => cutoff(config, 0.0, i.k),
    }
}

/// Steps a joint state through the configured sample times.
struct Stepper<'a> {
    spec: HamiltonianSpec,
    config: &'a ScenarioConfig,
    state: JointState,
    stats: EvolveStats,
}

impl<'a> Stepper<'a> {
    fn new(config: &'a ScenarioConfig, field: &FieldState) -> Result<Self> {
        let spec =
            build_hamiltonian_with_limit(&config.model, field.ncut(), config.limits.capacity)?;
        let state = JointState::product(&config.model, field, &chi_state(config.model.n_atoms)?)?;
        Ok(Self {
            spec,
            config,
            state,
            stats: EvolveStats::default(),
        })
    }

    fn advance_to(&mut self, t: f64) -> Result<()> {
        let dt = t - self.state.t();
        if dt > 0.0 {
            let (next, s) =
                evolve_exact_with(&self.state, dt, &self.spec, &self.config.krylov_options())?;
            self.state = next;
            self.stats.steps += s.steps;
            self.stats.matvecs += s.matvecs;
            self.stats.error_estimate += s.error_estimate;
            self.stats.norm_drift = self.stats.norm_drift.max(s.norm_drift);
        }
        Ok(())
    }
}

fn spin_classical(config: &ScenarioConfig) -> Result<StudyOutput> {
    let spec = config.spin_spec()?;
    let delta = config.model.delta;
    let mut out = StudyOutput::new(&[
        "t",
        "mean_x",
        "mean_y",
        "mean_z",
        "var_x",
        "var_y",
        "var_z",
        "fluctuation_ratio",
        "ehrenfest_residual",
        "bruteforce_deviation",
    ]);
    let brute = spec.n_atoms() <= BRUTEFORCE_MAX_ATOMS;
    let mut worst_brute = 0.0f64;
    let mut worst_ehrenfest = 0.0f64;
    for t in config.times() {
        let m = sigma_moments_closed(&spec, delta, t);
        let r = ehrenfest_residual(&spec, delta, t, 1e-5)?;
        let residual = r.r_x.max(r.r_y).max(r.r_z);
        let dev = if brute {
            m.max_abs_diff(&sigma_moments_bruteforce(&spec, delta, t)?)
        } else {
            f64::NAN
        };
        worst_brute = worst_brute.max(dev);
        worst_ehrenfest = worst_ehrenfest.max(residual);
        out.push(vec![
            t,
            m.mean_x,
            m.mean_y,
            m.mean_z,
            m.var_x,
            m.var_y,
            m.var_z,
            m.var_x.sqrt() / m.mean_x.abs(),
            residual,
            dev,
        ]);
    }
    if brute && worst_brute > 1e-10 {
        out.flag("closed_form_mismatch");
    }
    out.summarize("xi_h", spec.xi_h());
    out.summarize("xi_h_prime", spec.xi_h_prime());
    out.summarize("fluctuation_ratio", out.last("fluctuation_ratio"));
    out.summarize("max_ehrenfest_residual", worst_ehrenfest);
    out.summarize(
        "max_bruteforce_deviation",
        if brute { worst_brute } else { f64::NAN },
    );
    Ok(out)
}

fn cat(config: &ScenarioConfig) -> Result<StudyOutput> {
    let p = &config.model;
    let (alpha, phi) = (config.initial.alpha, config.initial.phi);
    let ncut = cutoff(config, alpha, 0);
    let mut stepper = Stepper::new(config, &cat_state(alpha, phi, ncut)?.0)?;
    let chi = chi_state(p.n_atoms)?;
    let mut out = StudyOutput::new(&[
        "t",
        "fidelity_vs_exact",
        "chi_weight",
        "mean_photon_number",
        "xi",
        "phi1",
        "phi2",
    ]);
    let mut worst = 1.0f64;
    for t in config.times() {
        stepper.advance_to(t)?;
        let field = project_chi(&stepper.state, &chi)?;
        let lead = evolve_cat_leading(p, alpha, phi, t, ncut)?;
        let f = crate::exact::fidelity(&field, &lead)?;
        worst = worst.min(f);
        let fr = frame(p, alpha, phi, t);
        out.push(vec![
            t,
            f,
            field.norm_sqr(),
            lead.mean_photon_number(),
            fr.xi,
            fr.phi1,
            fr.phi2,
        ]);
    }
    out.summarize("ncut", ncut as f64);
    out.summarize("min_fidelity", worst);
    out.summarize("chi_weight", out.last("chi_weight"));
    out.summarize("norm_drift", stepper.stats.norm_drift);
    out.summarize("matvecs", stepper.stats.matvecs as f64);
    Ok(out)
}

fn fock(config: &ScenarioConfig) -> Result<StudyOutput> {
    let p = &config.model;
    let k = config.initial.k;
    let ncut = cutoff(config, 0.0, k);
    let mut stepper = Stepper::new(config, &fock_superposition(k, ncut)?)?;
    let chi = chi_state(p.n_atoms)?;
    let mut out = StudyOutput::new(&[
        "t",
        "fidelity_vs_exact",
        "chi_weight",
        "beta_prime_abs",
        "coherent_overlap",
        "branch_ratio_error",
    ]);
    let mut worst = 1.0f64;
    for t in config.times() {
        stepper.advance_to(t)?;
        let field = project_chi(&stepper.state, &chi)?;
        let lead = evolve_fock_leading(p, k, t, ncut)?;
        let f = crate::exact::fidelity(&field, &lead)?;
        worst = worst.min(f);
        let beta = frame(p, 0.0, 0.0, t).beta_prime;
        let overlap = if k == 0 {
            f64::NAN
        } else {
            coherent_state(beta, ncut)?
                .inner(&displaced_number_state(k, beta, ncut)?)
                .norm()
        };
        let mut ratio_err = if beta.norm() > 0.0 { 0.0f64 } else { f64::NAN };
        if beta.norm() > 0.0 {
            for n in 0..=5 {
                if let Some(r) = asymptotic_branch_ratio(k, n, beta)?.value() {
                    ratio_err = ratio_err.max((r - 1.0).norm());
                }
            }
        }
        out.push(vec![
            t,
            f,
            field.norm_sqr(),
            beta.norm(),
            overlap,
            ratio_err,
        ]);
    }
    out.summarize("ncut", ncut as f64);
    out.summarize("min_fidelity", worst);
    out.summarize("chi_weight", out.last("chi_weight"));
    out.summarize("norm_drift", stepper.stats.norm_drift);
    Ok(out)
}

fn wigner(config: &ScenarioConfig) -> Result<StudyOutput> {
    let p = &config.model;
    let (alpha, phi) = (config.initial.alpha, config.initial.phi);
    let ncut = cutoff(config, alpha, 0);
    let grid = default_grid(
        p,
        alpha,
        phi,
        config.time.t_max,
        config.grid.margin,
        config.grid.spacing,
    )?;
    let n2 = cat_norm_factor(alpha, phi).powi(2);
    let mut out = StudyOutput::new(&[
        "t",
        "visibility",
        "w_int_sup_numeric",
        "w_int_sup_closed",
        "decomposition_error",
        "fringe_offset",
        "integral",
    ]);
    let mut worst = 0.0f64;
    for (i, t) in config.times().into_iter().enumerate() {
        let full = evolve_cat_leading(p, alpha, phi, t, ncut)?;
        let (g1, g2) = branch_amplitudes(p, alpha, phi, t);
        let b1 = coherent_state(g1, ncut)?;
        let b2 = coherent_state(g2, ncut)?;
        let w = wigner_numeric_batch(&[&full, &b1, &b2], &grid)?;
        let branches = w[1].combine(n2, &w[2], n2)?;
        let interference = w[0].combine(1.0, &branches, -1.0)?;
        let closed = w_int_closed(p, alpha, phi, t, &grid)?;
        let err = interference.max_abs_diff(&closed.combine(n2, &closed, 0.0)?)?;
        worst = worst.max(err);
        out.push(vec![
            t,
            fringe_visibility(&w[0], &branches)?,
            interference.sup_norm(),
            n2 * closed.sup_norm(),
            err,
            fringe_offset(p, alpha, phi, t, PHASE_COEFFICIENT),
            w[0].riemann_sum(),
        ]);
        let mut bytes = Vec::new();
        let name = match config.grid.format {
            GridFormat::Csv => {
                w[0].write_csv(&mut bytes)?;
                format!("wigner_{i:04}.csv")
            }
            GridFormat::WignerBin => {
                w[0].write_binary(&mut bytes)?;
                format!("wigner_{i:04}.wgrd")
            }
        };
        out.artifacts.push((name, bytes));
    }
    if worst > DECOMPOSITION_LIMIT {
        out.flag("wigner_decomposition");
    }
    let period = 2.0 * std::f64::consts::PI / p.omega;
    let avg = time_average(
        |t| w_int_closed(p, alpha, phi, t, &grid),
        0.0,
        period,
        config.tolerances.average_samples,
    )?;
    if !avg.converged {
        out.flag("time_average_unconverged");
    }
    out.summarize("ncut", ncut as f64);
    out.summarize("averaged_w_int_sup", avg.value.sup_norm());
    out.summarize("average_samples", avg.samples as f64);
    out.summarize("max_decomposition_error", worst);
    out.summarize("visibility", out.last("visibility"));
    Ok(out)
}

fn correction_or_flag(
    out: &mut StudyOutput,
    name: &str,
    r: Result<CorrectionRecord>,
) -> Result<(f64, f64)> {
    match r {
        Ok(rec) => {
            if !rec.converged() {
                out.flag(format!("{name}_quadrature"));
            }
            Ok((rec.amplitude_norm, rec.quadrature.error_estimate))
        }
        Err(Error::Quadrature { .. }) => {
            out.flag(format!("{name}_quadrature"));
            Ok((f64::NAN, f64::NAN))
        }
        Err(e) => Err(e),
    }
}

fn exact_fits(p: &ModelParams, ncut: usize, capacity: usize) -> bool {
    (ncut + 1).saturating_mul(p.n_atoms + 1) <= capacity
}

fn dyson_scaling(config: &ScenarioConfig) -> Result<StudyOutput> {
    let p = &config.model;
    let ncut = field_cutoff(config);
    let field = initial_field(config, ncut)?;
    let n = p.n_atoms;
    let mut stepper = if exact_fits(p, ncut, config.limits.capacity) {
        Some(Stepper::new(config, &field)?)
    } else {
        None
    };
    let (chi, chi_prime) = (chi_state(n)?, chi_prime_state(n)?);
    let mut out = StudyOutput::new(&[
        "t",
        "first_order_amplitude",
        "second_order_amplitude",
        "exact_chi_prime_amplitude",
        "leading_infidelity",
        "first_quadrature_error",
        "second_quadrature_error",
    ]);
    for t in config.times() {
        let (a1, e1) = correction_or_flag(
            &mut out,
            "first_order",
            first_order_correction(p, t, &field),
        )?;
        let (a2, e2) = correction_or_flag(
            &mut out,
            "second_order",
            second_order_correction(p, t, &field),
        )?;
        let (exact_amp, infid) = match stepper.as_mut() {
            Some(s) => {
                s.advance_to(t)?;
                let lead = apply_uf_sector(&field, n as i64, p, t)?.normalize()?;
                let proj = project_chi(&s.state, &chi)?;
                (
                    project_chi(&s.state, &chi_prime)?.norm(),
                    1.0 - lead.inner(&proj).norm_sqr(),
                )
            }
            None => (f64::NAN, f64::NAN),
        };
        out.push(vec![t, a1, a2, exact_amp, infid, e1, e2]);
    }
    let (first, second) = (
        out.last("first_order_amplitude"),
        out.last("second_order_amplitude"),
    );
    out.summarize("ncut", ncut as f64);
    out.summarize("first_order_amplitude", first);
    out.summarize("second_order_amplitude", second);
    out.summarize("second_to_first_ratio", second / first);
    out.summarize(
        "exact_chi_prime_amplitude",
        out.last("exact_chi_prime_amplitude"),
    );
    out.summarize("leading_infidelity", out.last("leading_infidelity"));
    out.summarize("quadrature_tolerance", QUADRATURE_TOL);
    Ok(out)
}

fn convergence(config: &ScenarioConfig) -> Result<StudyOutput> {
    let ncut = field_cutoff(config);
    let field = initial_field(config, ncut)?;
    let mut stepper = Stepper::new(config, &field)?;
    let e0 = stepper.spec.energy(&stepper.state);
    let mut out = StudyOutput::new(&[
        "t",
        "norm_drift",
        "krylov_gap",
        "tail_mass",
        "energy_drift",
        "matvecs",
    ]);
    let mut worst_gap = 0.0f64;
    let mut worst_tail = 0.0f64;
    for t in config.times() {
        let gap = if t > stepper.state.t() {
            convergence_gap_with(
                &stepper.state,
                t - stepper.state.t(),
                &stepper.spec,
                &config.krylov_options(),
            )?
        } else {
            0.0
        };
        stepper.advance_to(t)?;
        let s = &stepper.state;
        let tail = s.tail_mass() / s.norm_sqr();
        worst_gap = worst_gap.max(gap);
        worst_tail = worst_tail.max(tail);
        out.push(vec![
            t,
            (s.norm_sqr().sqrt() - 1.0).abs(),
            gap,
            tail,
            (stepper.spec.energy(s) - e0).abs(),
            stepper.stats.matvecs as f64,
        ]);
    }
    if worst_gap > KRYLOV_GAP_LIMIT {
        out.flag("krylov_gap");
    }
    if worst_tail > TAIL_TOLERANCE {
        out.flag("cutoff_tail");
    }
    if stepper.stats.norm_drift > config.tolerances.norm_drift_limit {
        out.flag("norm_drift");
    }
    out.summarize("ncut", ncut as f64);
    out.summarize("max_krylov_gap", worst_gap);
    out.summarize("max_tail_mass", worst_tail);
    out.summarize("norm_drift", stepper.stats.norm_drift);
    out.summarize("energy_drift", out.last("energy_drift"));
    Ok(out)
}
