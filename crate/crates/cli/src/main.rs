use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fbspec_cli::config::{self, Command, ConfigError, Overrides};
use fbspec_cli::runner;

/// Front-fixed spectral solver for a free-boundary prostate tumor model.
#[derive(Parser, Debug)]
#[command(name = "fbspec", version, about, long_about = None)]
struct Cli {
    /// solve | mms | time-study | space-study | stability | self-convergence
    command: String,

    /// Flat key=value config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,

    /// Trial-basis cutoff (N+1 collocation nodes)
    #[arg(long = "N")]
    n: Option<usize>,

    /// Number of time steps
    #[arg(long = "M")]
    m: Option<usize>,

    /// Final time in days
    #[arg(long = "T")]
    t_final: Option<f64>,

    /// example1 | example2 | base-model
    #[arg(long)]
    case: Option<String>,

    /// Output CSV path (stdout when omitted); metadata goes next to it
    #[arg(long)]
    out: Option<PathBuf>,

    /// Keep every stride-th trajectory level
    #[arg(long)]
    stride: Option<usize>,

    /// Use the first case's exact fields exactly as published (their
    /// velocity violates v(-1,t)=0, which the scheme never evaluates)
    #[arg(long = "paper-literal")]
    paper_literal: bool,

    /// Accept parameter sets outside the admissibility inequalities
    #[arg(long = "relax-admissibility")]
    relax_admissibility: bool,

    /// Override one model parameter, e.g. --param w1=0.5 (repeatable)
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,

    /// Time-step list for time-study / self-convergence, e.g. 100,200,1000
    #[arg(long = "M-list", value_delimiter = ',')]
    m_list: Option<Vec<usize>>,

    /// Basis-cutoff list for space-study
    #[arg(long = "N-list", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,

    /// Reference basis cutoff for space-study
    #[arg(long = "N-ref")]
    n_ref: Option<usize>,

    /// Reference step count for self-convergence
    #[arg(long = "M-ref")]
    m_ref: Option<usize>,

    /// Perturbation sizes for stability, e.g. 1e-6,1e-8,1e-10
    #[arg(long = "eps-list", value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
}

fn parse_param_flags(values: &[String]) -> Result<Vec<(String, f64)>, ConfigError> {
    values
        .iter()
        .map(|raw| {
            let (key, value) = raw.split_once('=').ok_or_else(|| ConfigError::Other(
                format!("--param expects KEY=VALUE, got `{raw}`"),
            ))?;
            let parsed: f64 = value.trim().parse().map_err(|_| ConfigError::InvalidValue {
                key: format!("param.{key}"),
                reason: format!("`{value}` is not a number"),
            })?;
            Ok((key.trim().to_string(), parsed))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), runner::RunError> {
    let command = Command::parse(&cli.command)?;
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            Some(config::parse_config_text(&text)?)
        }
        None => None,
    };
    let flags = Overrides {
        case: cli.case,
        n: cli.n,
        m: cli.m,
        t_final: cli.t_final,
        m_list: cli.m_list,
        n_list: cli.n_list,
        n_ref: cli.n_ref,
        m_ref: cli.m_ref,
        eps_list: cli.eps_list,
        stride: cli.stride,
        out: cli.out,
        paper_literal: cli.paper_literal,
        relax_admissibility: cli.relax_admissibility,
        params: parse_param_flags(&cli.params)?,
    };
    let config = config::resolve(command, file, flags)?;
    runner::execute(&config)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(fbspec_cli::exit_code::OK as u8),
        Err(err) => {
            eprintln!("fbspec: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
