//! Maps a resolved [`RunConfig`] onto solver and harness calls and emits
//! the reports.

use std::path::PathBuf;
use std::time::Instant;

use fbspec_core::error::Error as CoreError;
use fbspec_core::harness::{
    self, e_infinity, ErrorReport, Reference, StabilityReport, StudySubject,
};
use fbspec_core::mms::{self, MmsCase};
use fbspec_core::model;
use fbspec_core::stepper::{
    BootstrapMode, RunOptions, RunReport, SpectralScheme, TimeGrid, Trajectory,
};
use thiserror::Error;

use crate::config::{CaseName, Command, ConfigError, RunConfig};
use crate::emit::{self, Meta};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver terminal condition: {0}")]
    Terminal(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(CoreError),
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Terminal(reason) => RunError::Terminal(reason.to_string()),
            other => RunError::Core(other),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => crate::exit_code::CONFIG,
            RunError::Terminal(_) => crate::exit_code::SOLVER_TERMINAL,
            RunError::Io { .. } => crate::exit_code::IO,
            RunError::Core(_) => crate::exit_code::SOLVER_TERMINAL,
        }
    }
}

fn mms_case(config: &RunConfig) -> Result<Option<MmsCase>, RunError> {
    let params = config.effective_params()?;
    Ok(match config.case {
        CaseName::Example1 => Some(mms::example1(params, config.paper_literal)),
        CaseName::Example2 => Some(mms::example2(params)),
        CaseName::BaseModel => None,
    })
}

fn base_meta(config: &RunConfig) -> Result<Meta, RunError> {
    let mut meta = Meta::new();
    meta.push("command", config.command.name());
    meta.push("case", config.case.name());
    meta.push("N", config.n.to_string());
    meta.push("M", config.m.to_string());
    meta.push_f64("T", config.t_final);
    meta.push("stride", config.stride.to_string());
    meta.push("paper_literal", config.paper_literal.to_string());
    meta.push(
        "relax_admissibility",
        config.relax_admissibility.to_string(),
    );
    if !config.m_list.is_empty() {
        meta.push(
            "M_list",
            format!("[{}]", config.m_list.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")),
        );
    }
    if !config.n_list.is_empty() {
        meta.push(
            "N_list",
            format!("[{}]", config.n_list.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")),
        );
    }
    if let Some(n_ref) = config.n_ref {
        meta.push("N_ref", n_ref.to_string());
    }
    if let Some(m_ref) = config.m_ref {
        meta.push("M_ref", m_ref.to_string());
    }
    if !config.eps_list.is_empty() {
        meta.push(
            "eps_list",
            format!("[{}]", config.eps_list.iter().map(|v| emit::fmt_f64(*v)).collect::<Vec<_>>().join(",")),
        );
    }
    let p = config.effective_params()?;
    meta.push_f64("param.w1", p.w1);
    meta.push_f64("param.w2", p.w2);
    meta.push_f64("param.delta1", p.delta1);
    meta.push_f64("param.delta2", p.delta2);
    meta.push_f64("param.theta1", p.theta1);
    meta.push_f64("param.K", p.k);
    meta.push_f64("param.a_s", p.a_s);
    meta.push_f64("param.b", p.b);
    meta.push_f64("param.beta1", p.beta1);
    meta.push_f64("param.D_p", p.d_p);
    meta.push_f64("param.I", p.inhibitor);
    Ok(meta)
}

fn solve_run(config: &RunConfig, stride: usize) -> Result<(Trajectory, RunReport), RunError> {
    let params = config.effective_params()?;
    let grid = TimeGrid::new(config.t_final, config.m)?;
    let scheme = SpectralScheme::new(params, grid, config.n)?;
    let case = mms_case(config)?;
    let (traj, report) = match &case {
        Some(case) => {
            let profile = case.initial_profile();
            scheme.run(RunOptions {
                initial: &profile,
                sources: Some(case.solver_sources()),
                bootstrap: BootstrapMode::Exact(case),
                stride,
            })?
        }
        None => scheme.run(RunOptions {
            initial: &model::default_initial_profile,
            sources: None,
            bootstrap: BootstrapMode::BackwardEuler,
            stride,
        })?,
    };
    Ok((traj, report))
}

fn push_run_report(meta: &mut Meta, report: &RunReport) {
    meta.push_f64("projection_residual", report.projection_residual);
    meta.push_f64("max_condition_estimate", report.max_condition);
    meta.push(
        "velocity_fallbacks",
        report.velocity_fallbacks.to_string(),
    );
    if let Some(reason) = &report.terminal {
        meta.push("terminal", reason.to_string());
    }
}

fn push_study_meta(meta: &mut Meta, report: &ErrorReport) {
    for (i, ms) in report.wall_ms.iter().enumerate() {
        meta.push_f64(&format!("wall_ms_level_{i}"), *ms);
    }
    for (level, reason) in &report.failures {
        meta.push(&format!("failed_level_{level}"), reason.to_string());
    }
    for (i, flag) in report.contaminated.iter().enumerate() {
        if *flag {
            meta.push(&format!("contaminated_level_{i}"), "true");
        }
    }
}

fn emit_or_io(
    out: Option<&std::path::Path>,
    csv: &str,
    meta: &Meta,
) -> Result<(), RunError> {
    emit::write_outputs(out, csv, meta).map_err(|source| RunError::Io {
        path: out.map(PathBuf::from).unwrap_or_else(|| PathBuf::from("<stdout>")),
        source,
    })?;
    Ok(())
}

/// Execute the configured command. Returns the number of CSV data rows.
pub fn execute(config: &RunConfig) -> Result<usize, RunError> {
    // fail on an unwritable output path before spending solver time
    if let Some(path) = &config.out {
        let probe = || -> std::io::Result<()> {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map(|_| ())
        };
        probe().map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
    }
    let mut meta = base_meta(config)?;
    match config.command {
        Command::Solve => {
            let started = Instant::now();
            let (traj, report) = solve_run(config, config.stride)?;
            meta.push_f64("wall_ms_total", started.elapsed().as_secs_f64() * 1e3);
            push_run_report(&mut meta, &report);
            let csv = emit::trajectory_csv(&traj);
            emit_or_io(config.out.as_deref(), &csv, &meta)?;
            if let Some(reason) = report.terminal {
                return Err(RunError::Terminal(reason.to_string()));
            }
            Ok(traj.level_count())
        }
        Command::Mms => {
            let case = mms_case(config)?.expect("validated: mms needs an exact case");
            let residuals = mms::verify_case(&case, 1000);
            meta.push_f64("residual_parabolic", residuals.parabolic);
            meta.push_f64("residual_elliptic", residuals.elliptic);
            meta.push_f64("residual_radius_ode", residuals.radius_ode);
            meta.push_f64("residual_neumann", residuals.neumann);
            meta.push_f64("residual_velocity_bc", residuals.velocity_bc);
            let started = Instant::now();
            let (traj, report) = solve_run(config, 1)?;
            meta.push_f64("wall_ms_total", started.elapsed().as_secs_f64() * 1e3);
            push_run_report(&mut meta, &report);
            if let Some(reason) = report.terminal {
                return Err(RunError::Terminal(reason.to_string()));
            }
            let err = e_infinity(&traj, &Reference::Exact(&*case.exact_p))?;
            let report = ErrorReport {
                axis: harness::Axis::Time,
                case: case.name.clone(),
                levels: vec![(config.m, err)],
                rates: vec![],
                wall_ms: vec![],
                failures: vec![],
                contaminated: vec![false],
            };
            let csv = emit::study_csv(&report);
            emit_or_io(config.out.as_deref(), &csv, &meta)?;
            Ok(1)
        }
        Command::TimeStudy => {
            let case = mms_case(config)?.expect("validated: time-study needs an exact case");
            let report =
                harness::time_refinement_study(&case, config.n, &config.m_list, config.t_final)?;
            push_study_meta(&mut meta, &report);
            let csv = emit::study_csv(&report);
            emit_or_io(config.out.as_deref(), &csv, &meta)?;
            Ok(report.levels.len())
        }
        Command::SpaceStudy => {
            let case = mms_case(config)?.expect("validated: space-study needs an exact case");
            let n_ref = config.n_ref.expect("validated: space-study needs N_ref");
            let report = harness::space_refinement_study(
                &case,
                config.m,
                &config.n_list,
                n_ref,
                config.t_final,
            )?;
            push_study_meta(&mut meta, &report);
            let csv = emit::study_csv(&report);
            emit_or_io(config.out.as_deref(), &csv, &meta)?;
            Ok(report.levels.len())
        }
        Command::Stability => {
            let params = config.effective_params()?;
            let case = mms_case(config)?;
            let report: StabilityReport = match &case {
                Some(case) => harness::stability_study(
                    &StudySubject::Mms(case),
                    &config.eps_list,
                    config.m,
                    config.n,
                    config.t_final,
                )?,
                None => harness::stability_study(
                    &StudySubject::Base(&params),
                    &config.eps_list,
                    config.m,
                    config.n,
                    config.t_final,
                )?,
            };
            for (i, ms) in report.wall_ms.iter().enumerate() {
                meta.push_f64(&format!("wall_ms_level_{i}"), *ms);
            }
            let csv = emit::stability_csv(&report);
            emit_or_io(config.out.as_deref(), &csv, &meta)?;
            Ok(report.eps_levels.len())
        }
        Command::SelfConvergence => {
            let params = config.effective_params()?;
            let m_ref = config.m_ref.expect("validated: self-convergence needs M_ref");
            let report = harness::self_convergence_study(
                &params,
                &model::default_initial_profile,
                config.n,
                &config.m_list,
                m_ref,
                config.t_final,
            )?;
            push_study_meta(&mut meta, &report);
            let csv = emit::study_csv(&report);
            emit_or_io(config.out.as_deref(), &csv, &meta)?;
            Ok(report.levels.len())
        }
    }
}
