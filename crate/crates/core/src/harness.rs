//! Error metrics, refinement studies and the perturbation-stability study.
//!
//! E_inf is the maximum absolute nodal error over all retained time levels.
//! Convergence rates follow the log-ratio formula
//! s = ln(e2/e1) / ln(n1/n2) between consecutive refinement levels.

use std::time::Instant;

use crate::error::{Error, TerminalReason};
use crate::mms::{self, MmsCase, SpaceTimeFn};
use crate::model::ModelParams;
use crate::polybasis::TrialBasis;
use crate::stepper::{BootstrapMode, RunOptions, SpectralScheme, TimeGrid, Trajectory};
use crate::Result;

/// Which discretization axis a study refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Time,
    Space,
}

/// Errors below this floor carry no rate information (roundoff-dominated);
/// rates touching them are reported as absent.
pub const RATE_FLOOR: f64 = 1e-11;

/// E_inf per refinement level with the rates between consecutive levels.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub axis: Axis,
    pub case: String,
    /// (M or N, E_inf) per successful level, in study order.
    pub levels: Vec<(usize, f64)>,
    /// Exactly levels.len() - 1 entries; None where a neighbor sits at the
    /// roundoff floor.
    pub rates: Vec<Option<f64>>,
    pub wall_ms: Vec<f64>,
    /// Levels that failed with a terminal condition, kept out of `levels`.
    pub failures: Vec<(usize, TerminalReason)>,
    /// Self-convergence only: levels whose error is within 10x of the
    /// reference's own estimated error.
    pub contaminated: Vec<bool>,
}

impl ErrorReport {
    fn finish(mut self) -> Self {
        self.rates = rates_between(&self.levels);
        if self.contaminated.is_empty() {
            self.contaminated = vec![false; self.levels.len()];
        }
        self
    }
}

fn rates_between(levels: &[(usize, f64)]) -> Vec<Option<f64>> {
    levels
        .windows(2)
        .map(|pair| {
            let (n1, e1) = pair[0];
            let (n2, e2) = pair[1];
            if e1 <= RATE_FLOOR || e2 <= RATE_FLOOR {
                None
            } else {
                convergence_rate(e1, e2, n1, n2).ok()
            }
        })
        .collect()
}

/// Perturbed-minus-base solution maxima per perturbation size.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub eps_levels: Vec<f64>,
    pub diffs: Vec<f64>,
    pub ratios: Vec<f64>,
    pub wall_ms: Vec<f64>,
}

/// Reference to measure a trajectory against.
pub enum Reference<'a> {
    /// A closed-form exact solution p(rho, t).
    Exact(&'a SpaceTimeFn),
    /// A finer (or equal) resolved trajectory; its time grid must contain
    /// every retained time of the measured one.
    Trajectory(&'a Trajectory),
}

/// Maximum absolute error over the trajectory's nodes and retained times.
pub fn e_infinity(traj: &Trajectory, reference: &Reference<'_>) -> Result<f64> {
    let basis = TrialBasis::new(traj.n_max);
    let tables = basis.tabulate(&traj.nodes);
    let n_nodes = traj.nodes.len();
    let mut worst = 0.0_f64;
    match reference {
        Reference::Exact(exact) => {
            for (level, coeffs) in traj.coeffs.iter().enumerate() {
                let t = traj.times[level];
                let vals = tables.expansion_at_points(coeffs, n_nodes);
                for (j, &x) in traj.nodes.iter().enumerate() {
                    worst = worst.max((vals[j] - exact(x, t)).abs());
                }
            }
        }
        Reference::Trajectory(reference) => {
            if reference.times.is_empty() {
                return Err(Error::IncommensurateGrids("empty reference".into()));
            }
            let ref_h = if reference.steps.len() > 1 {
                reference.times[1] - reference.times[0]
            } else {
                reference.times[0].max(1.0)
            };
            let ref_basis = TrialBasis::new(reference.n_max);
            let same_nodes = reference.nodes == traj.nodes;
            let ref_tables = if same_nodes {
                Some(ref_basis.tabulate(&traj.nodes))
            } else {
                None
            };
            for (level, coeffs) in traj.coeffs.iter().enumerate() {
                let t = traj.times[level];
                let idx = (t / ref_h).round() as usize;
                let matching = reference
                    .times
                    .get(idx)
                    .filter(|tt| (**tt - t).abs() <= 1e-9 * (1.0 + t));
                let Some(_) = matching else {
                    return Err(Error::IncommensurateGrids(format!(
                        "no reference level at t = {t}"
                    )));
                };
                let vals = tables.expansion_at_points(coeffs, n_nodes);
                if let Some(rt) = &ref_tables {
                    let ref_vals = rt.expansion_at_points(&reference.coeffs[idx], n_nodes);
                    for j in 0..n_nodes {
                        worst = worst.max((vals[j] - ref_vals[j]).abs());
                    }
                } else {
                    for (j, &x) in traj.nodes.iter().enumerate() {
                        let rv = ref_basis.eval_expansion(&reference.coeffs[idx], x);
                        worst = worst.max((vals[j] - rv).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Observed convergence order s = ln(e2/e1) / ln(n1/n2).
pub fn convergence_rate(e1: f64, e2: f64, n1: usize, n2: usize) -> Result<f64> {
    if !(e1 > 0.0 && e2 > 0.0) {
        return Err(Error::InvalidRateInput(format!(
            "errors must be positive (got {e1}, {e2})"
        )));
    }
    if n1 == n2 {
        return Err(Error::InvalidRateInput("levels must differ".into()));
    }
    Ok((e2 / e1).ln() / (n1 as f64 / n2 as f64).ln())
}

fn mms_run(
    case: &MmsCase,
    n_max: usize,
    m: usize,
    t_final: f64,
    exact_bootstrap: bool,
) -> Result<(Trajectory, Option<TerminalReason>)> {
    let grid = TimeGrid::new(t_final, m)?;
    let scheme = SpectralScheme::new(case.params, grid, n_max)?;
    let profile = case.initial_profile();
    let bootstrap = if exact_bootstrap {
        BootstrapMode::Exact(case)
    } else {
        BootstrapMode::BackwardEuler
    };
    let (traj, report) = scheme.run(RunOptions {
        initial: &profile,
        sources: Some(case.solver_sources()),
        bootstrap,
        stride: 1,
    })?;
    Ok((traj, report.terminal))
}

/// Refine M at fixed N and measure against the exact solution.
pub fn time_refinement_study(
    case: &MmsCase,
    n_max: usize,
    m_list: &[usize],
    t_final: f64,
) -> Result<ErrorReport> {
    let mut report = ErrorReport {
        axis: Axis::Time,
        case: case.name.clone(),
        levels: Vec::new(),
        rates: Vec::new(),
        wall_ms: Vec::new(),
        failures: Vec::new(),
        contaminated: Vec::new(),
    };
    for &m in m_list {
        let started = Instant::now();
        match mms_run(case, n_max, m, t_final, true)? {
            (traj, None) => {
                let err = e_infinity(&traj, &Reference::Exact(&*case.exact_p))?;
                report.levels.push((m, err));
                report.wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
            }
            (_, Some(reason)) => report.failures.push((m, reason)),
        }
    }
    Ok(report.finish())
}

/// Refine N at fixed M; the reference is the run at N_ref.
pub fn space_refinement_study(
    case: &MmsCase,
    m: usize,
    n_list: &[usize],
    n_ref: usize,
    t_final: f64,
) -> Result<ErrorReport> {
    if n_list.iter().any(|&n| n >= n_ref) {
        return Err(Error::InvalidDiscretization(format!(
            "reference N_ref = {n_ref} must exceed every study level"
        )));
    }
    let (reference, terminal) = mms_run(case, n_ref, m, t_final, true)?;
    if let Some(reason) = terminal {
        return Err(Error::Terminal(reason));
    }
    let mut report = ErrorReport {
        axis: Axis::Space,
        case: case.name.clone(),
        levels: Vec::new(),
        rates: Vec::new(),
        wall_ms: Vec::new(),
        failures: Vec::new(),
        contaminated: Vec::new(),
    };
    for &n in n_list {
        let started = Instant::now();
        match mms_run(case, n, m, t_final, true)? {
            (traj, None) => {
                let err = e_infinity(&traj, &Reference::Trajectory(&reference))?;
                report.levels.push((n, err));
                report.wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
            }
            (_, Some(reason)) => report.failures.push((n, reason)),
        }
    }
    Ok(report.finish())
}

/// What the stability study perturbs: a manufactured case (sources get the
/// constants added) or the base model (constants become the only sources).
pub enum StudySubject<'a> {
    Mms(&'a MmsCase),
    Base(&'a ModelParams),
}

/// Solve base and perturbed systems per epsilon and record the E_inf of
/// their difference. Perturbations are the constants eps1 = eps2 = eps.
pub fn stability_study(
    subject: &StudySubject<'_>,
    eps_list: &[f64],
    m: usize,
    n_max: usize,
    t_final: f64,
) -> Result<StabilityReport> {
    if eps_list.iter().any(|&e| e < 0.0) {
        return Err(Error::InvalidRateInput(
            "perturbation sizes must be nonnegative".into(),
        ));
    }
    let mut report = StabilityReport {
        eps_levels: eps_list.to_vec(),
        diffs: Vec::new(),
        ratios: Vec::new(),
        wall_ms: Vec::new(),
    };
    match subject {
        StudySubject::Mms(case) => {
            let (base, terminal) = mms_run(case, n_max, m, t_final, true)?;
            if let Some(reason) = terminal {
                return Err(Error::Terminal(reason));
            }
            for &eps in eps_list {
                let started = Instant::now();
                let perturbed_case = mms::with_constant_perturbation(case, eps, eps);
                let (perturbed, terminal) = mms_run(&perturbed_case, n_max, m, t_final, true)?;
                if let Some(reason) = terminal {
                    return Err(Error::Terminal(reason));
                }
                let diff = e_infinity(&perturbed, &Reference::Trajectory(&base))?;
                report.diffs.push(diff);
                report.ratios.push(if eps > 0.0 { diff / eps } else { 0.0 });
                report.wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
            }
        }
        StudySubject::Base(params) => {
            let grid = TimeGrid::new(t_final, m)?;
            let scheme = SpectralScheme::new(**params, grid, n_max)?;
            let run_with = |eps: f64| -> Result<Trajectory> {
                let src_p = move |_: f64, _: f64| eps;
                let src_v = move |_: f64, _: f64| eps;
                let (traj, rep) = scheme.run(RunOptions {
                    initial: &crate::model::default_initial_profile,
                    sources: Some(crate::stepper::Sources {
                        parabolic: &src_p,
                        velocity: &src_v,
                    }),
                    bootstrap: BootstrapMode::BackwardEuler,
                    stride: 1,
                })?;
                match rep.terminal {
                    Some(reason) => Err(Error::Terminal(reason)),
                    None => Ok(traj),
                }
            };
            let base = run_with(0.0)?;
            for &eps in eps_list {
                let started = Instant::now();
                let perturbed = run_with(eps)?;
                let diff = e_infinity(&perturbed, &Reference::Trajectory(&base))?;
                report.diffs.push(diff);
                report.ratios.push(if eps > 0.0 { diff / eps } else { 0.0 });
                report.wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
            }
        }
    }
    Ok(report)
}

/// Time refinement of the base model measured against a fine-mesh run of
/// the same scheme (no exact solution exists).
pub fn self_convergence_study(
    params: &ModelParams,
    initial: &(dyn Fn(f64) -> f64 + Sync),
    n_max: usize,
    m_list: &[usize],
    m_ref: usize,
    t_final: f64,
) -> Result<ErrorReport> {
    for &m in m_list {
        if m >= m_ref {
            return Err(Error::InvalidDiscretization(format!(
                "reference M_ref = {m_ref} must exceed every study level"
            )));
        }
        if !m_ref.is_multiple_of(m) {
            return Err(Error::IncommensurateGrids(format!(
                "M_ref = {m_ref} is not a multiple of M = {m}"
            )));
        }
    }
    let base_run = |m: usize| -> Result<Trajectory> {
        let grid = TimeGrid::new(t_final, m)?;
        let scheme = SpectralScheme::new(*params, grid, n_max)?;
        let (traj, rep) = scheme.run(RunOptions {
            initial,
            sources: None,
            bootstrap: BootstrapMode::BackwardEuler,
            stride: 1,
        })?;
        match rep.terminal {
            Some(reason) => Err(Error::Terminal(reason)),
            None => Ok(traj),
        }
    };
    let reference = base_run(m_ref)?;
    let mut report = ErrorReport {
        axis: Axis::Time,
        case: "base-model".into(),
        levels: Vec::new(),
        rates: Vec::new(),
        wall_ms: Vec::new(),
        failures: Vec::new(),
        contaminated: Vec::new(),
    };
    for &m in m_list {
        let started = Instant::now();
        match base_run(m) {
            Ok(traj) => {
                let err = e_infinity(&traj, &Reference::Trajectory(&reference))?;
                report.levels.push((m, err));
                report.wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
            }
            Err(Error::Terminal(reason)) => report.failures.push((m, reason)),
            Err(other) => return Err(other),
        }
    }
    // estimate the reference's own error from the finest study level and
    // flag levels too close to it to be trusted
    if let Some(&(m_fine, e_fine)) = report.levels.last() {
        let ref_err = e_fine * (m_fine as f64 / m_ref as f64).powi(2);
        report.contaminated = report
            .levels
            .iter()
            .map(|&(_, e)| e < 10.0 * ref_err)
            .collect();
    }
    Ok(report.finish())
}
