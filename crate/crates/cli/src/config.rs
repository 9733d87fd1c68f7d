//! Run configuration: flat key=value files, flag overrides, validation.
//!
//! The file format is one `key=value` per line with `[a,b,c]` list syntax
//! and `#` comments. Flags override file values. Unknown keys and each
//! violated constraint are rejected by name.

use std::collections::BTreeMap;
use std::path::PathBuf;

use fbspec_core::ModelParams;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("`{0}` list not increasing")]
    ListNotIncreasing(String),
    #[error("missing required key `{0}` for this command")]
    Missing(String),
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model parameters rejected: {0}")]
    Params(String),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Mms,
    TimeStudy,
    SpaceStudy,
    Stability,
    SelfConvergence,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "solve" => Ok(Command::Solve),
            "mms" => Ok(Command::Mms),
            "time-study" => Ok(Command::TimeStudy),
            "space-study" => Ok(Command::SpaceStudy),
            "stability" => Ok(Command::Stability),
            "self-convergence" => Ok(Command::SelfConvergence),
            other => Err(ConfigError::InvalidValue {
                key: "command".into(),
                reason: format!(
                    "`{other}` is not one of solve, mms, time-study, space-study, stability, self-convergence"
                ),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Mms => "mms",
            Command::TimeStudy => "time-study",
            Command::SpaceStudy => "space-study",
            Command::Stability => "stability",
            Command::SelfConvergence => "self-convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseName {
    Example1,
    Example2,
    BaseModel,
}

impl CaseName {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "example1" => Ok(CaseName::Example1),
            "example2" => Ok(CaseName::Example2),
            "base-model" => Ok(CaseName::BaseModel),
            other => Err(ConfigError::InvalidValue {
                key: "case".into(),
                reason: format!("`{other}` is not one of example1, example2, base-model"),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CaseName::Example1 => "example1",
            CaseName::Example2 => "example2",
            CaseName::BaseModel => "base-model",
        }
    }
}

/// Fully resolved configuration of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub case: CaseName,
    pub n: usize,
    pub m: usize,
    pub t_final: f64,
    pub m_list: Vec<usize>,
    pub n_list: Vec<usize>,
    pub n_ref: Option<usize>,
    pub m_ref: Option<usize>,
    pub eps_list: Vec<f64>,
    pub stride: usize,
    pub out: Option<PathBuf>,
    pub paper_literal: bool,
    pub relax_admissibility: bool,
    pub param_overrides: Vec<(String, f64)>,
}

/// Values gathered from flags (all optional; they override file values).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub case: Option<String>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub t_final: Option<f64>,
    pub m_list: Option<Vec<usize>>,
    pub n_list: Option<Vec<usize>>,
    pub n_ref: Option<usize>,
    pub m_ref: Option<usize>,
    pub eps_list: Option<Vec<f64>>,
    pub stride: Option<usize>,
    pub out: Option<PathBuf>,
    pub paper_literal: bool,
    pub relax_admissibility: bool,
    pub params: Vec<(String, f64)>,
}

const PARAM_NAMES: [&str; 11] = [
    "w1", "w2", "delta1", "delta2", "theta1", "K", "a_s", "b", "beta1", "D_p", "I",
];

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::InvalidValue {
        key: key.into(),
        reason: format!("`{v}` is not a positive integer"),
    })
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::InvalidValue {
        key: key.into(),
        reason: format!("`{v}` is not a number"),
    })
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(ConfigError::InvalidValue {
            key: key.into(),
            reason: format!("`{other}` is not a boolean"),
        }),
    }
}

fn strip_list(key: &str, v: &str) -> Result<Vec<String>, ConfigError> {
    let inner = v
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| ConfigError::InvalidValue {
            key: key.into(),
            reason: "lists use the syntax [a,b,c]".into(),
        })?;
    Ok(inner
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect())
}

pub fn parse_usize_list(key: &str, v: &str) -> Result<Vec<usize>, ConfigError> {
    strip_list(key, v)?
        .iter()
        .map(|s| parse_usize(key, s))
        .collect()
}

pub fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    strip_list(key, v)?
        .iter()
        .map(|s| parse_f64(key, s))
        .collect()
}

/// Key=value pairs of a config file, order preserved for params.
#[derive(Debug, Default)]
pub struct FileConfig {
    pub entries: BTreeMap<String, String>,
    pub params: Vec<(String, f64)>,
}

pub fn parse_config_text(text: &str) -> Result<FileConfig, ConfigError> {
    let mut file = FileConfig::default();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Other(
            format!("line `{line}` is not of the form key=value"),
        ))?;
        let key = key.trim();
        let value = value.trim();
        if let Some(name) = key.strip_prefix("param.") {
            if !PARAM_NAMES.contains(&name) {
                return Err(ConfigError::UnknownKey(key.into()));
            }
            file.params.push((name.into(), parse_f64(key, value)?));
            continue;
        }
        match key {
            "command" | "case" | "N" | "M" | "T" | "M_list" | "N_list" | "N_ref" | "M_ref"
            | "eps_list" | "stride" | "out" | "paper_literal" | "relax_admissibility" => {
                file.entries.insert(key.into(), value.into());
            }
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
    }
    Ok(file)
}

/// Merge command, file values and flag overrides into a validated config.
pub fn resolve(
    command: Command,
    file: Option<FileConfig>,
    flags: Overrides,
) -> Result<RunConfig, ConfigError> {
    let file = file.unwrap_or_default();
    let entry = |key: &str| file.entries.get(key).map(String::as_str);

    let case = match flags.case.as_deref().or(entry("case")) {
        Some(s) => CaseName::parse(s)?,
        None => CaseName::Example1,
    };
    let n = match flags.n {
        Some(v) => v,
        None => entry("N").map(|v| parse_usize("N", v)).transpose()?.unwrap_or(100),
    };
    let m = match flags.m {
        Some(v) => v,
        None => entry("M").map(|v| parse_usize("M", v)).transpose()?.unwrap_or(100),
    };
    let t_final = match flags.t_final {
        Some(v) => v,
        None => entry("T").map(|v| parse_f64("T", v)).transpose()?.unwrap_or(1.0),
    };
    let m_list = match flags.m_list {
        Some(v) => v,
        None => entry("M_list")
            .map(|v| parse_usize_list("M_list", v))
            .transpose()?
            .unwrap_or_default(),
    };
    let n_list = match flags.n_list {
        Some(v) => v,
        None => entry("N_list")
            .map(|v| parse_usize_list("N_list", v))
            .transpose()?
            .unwrap_or_default(),
    };
    let n_ref = match flags.n_ref {
        Some(v) => Some(v),
        None => entry("N_ref").map(|v| parse_usize("N_ref", v)).transpose()?,
    };
    let m_ref = match flags.m_ref {
        Some(v) => Some(v),
        None => entry("M_ref").map(|v| parse_usize("M_ref", v)).transpose()?,
    };
    let eps_list = match flags.eps_list {
        Some(v) => v,
        None => entry("eps_list")
            .map(|v| parse_f64_list("eps_list", v))
            .transpose()?
            .unwrap_or_default(),
    };
    let stride = match flags.stride {
        Some(v) => v,
        None => entry("stride")
            .map(|v| parse_usize("stride", v))
            .transpose()?
            .unwrap_or(1),
    };
    let out = flags
        .out
        .or_else(|| entry("out").map(PathBuf::from));
    let paper_literal = flags.paper_literal
        || entry("paper_literal")
            .map(|v| parse_bool("paper_literal", v))
            .transpose()?
            .unwrap_or(false);
    let relax_admissibility = flags.relax_admissibility
        || entry("relax_admissibility")
            .map(|v| parse_bool("relax_admissibility", v))
            .transpose()?
            .unwrap_or(false);

    let mut param_overrides = file.params;
    param_overrides.extend(flags.params);
    for (name, _) in &param_overrides {
        if !PARAM_NAMES.contains(&name.as_str()) {
            return Err(ConfigError::UnknownKey(format!("param.{name}")));
        }
    }

    let config = RunConfig {
        command,
        case,
        n,
        m,
        t_final,
        m_list,
        n_list,
        n_ref,
        m_ref,
        eps_list,
        stride,
        out,
        paper_literal,
        relax_admissibility,
        param_overrides,
    };
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::InvalidValue {
                key: "N".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.m < 2 {
            return Err(ConfigError::InvalidValue {
                key: "M".into(),
                reason: "must be at least 2".into(),
            });
        }
        if !self.t_final.is_finite() || self.t_final <= 0.0 {
            return Err(ConfigError::InvalidValue {
                key: "T".into(),
                reason: "must be positive".into(),
            });
        }
        if self.stride == 0 {
            return Err(ConfigError::InvalidValue {
                key: "stride".into(),
                reason: "must be at least 1".into(),
            });
        }
        for (name, list) in [("M_list", &self.m_list), ("N_list", &self.n_list)] {
            if list.contains(&0) {
                return Err(ConfigError::InvalidValue {
                    key: name.into(),
                    reason: "entries must be positive".into(),
                });
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ConfigError::ListNotIncreasing(name.into()));
            }
        }
        if self.eps_list.iter().any(|&e| e < 0.0) {
            return Err(ConfigError::InvalidValue {
                key: "eps_list".into(),
                reason: "entries must be nonnegative".into(),
            });
        }
        match self.command {
            Command::TimeStudy if self.m_list.is_empty() => {
                Err(ConfigError::Missing("M_list".into()))
            }
            Command::SpaceStudy if self.n_list.is_empty() => {
                Err(ConfigError::Missing("N_list".into()))
            }
            Command::SpaceStudy if self.n_ref.is_none() => {
                Err(ConfigError::Missing("N_ref".into()))
            }
            Command::Stability if self.eps_list.is_empty() => {
                Err(ConfigError::Missing("eps_list".into()))
            }
            Command::SelfConvergence if self.m_list.is_empty() => {
                Err(ConfigError::Missing("M_list".into()))
            }
            Command::SelfConvergence if self.m_ref.is_none() => {
                Err(ConfigError::Missing("M_ref".into()))
            }
            Command::Mms | Command::TimeStudy | Command::SpaceStudy
                if self.case == CaseName::BaseModel =>
            {
                Err(ConfigError::Other(format!(
                    "command `{}` needs a case with an exact solution (example1 or example2)",
                    self.command.name()
                )))
            }
            Command::SelfConvergence if self.case != CaseName::BaseModel => {
                Err(ConfigError::Other(
                    "self-convergence runs the base model (case=base-model)".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// The effective model parameters. The untouched built-in default set
    /// is accepted as shipped; explicit overrides are strictly validated
    /// unless `relax_admissibility` is set.
    pub fn effective_params(&self) -> Result<ModelParams, ConfigError> {
        let mut params = ModelParams::default();
        for (name, value) in &self.param_overrides {
            match name.as_str() {
                "w1" => params.w1 = *value,
                "w2" => params.w2 = *value,
                "delta1" => params.delta1 = *value,
                "delta2" => params.delta2 = *value,
                "theta1" => params.theta1 = *value,
                "K" => params.k = *value,
                "a_s" => params.a_s = *value,
                "b" => params.b = *value,
                "beta1" => params.beta1 = *value,
                "D_p" => params.d_p = *value,
                "I" => params.inhibitor = *value,
                other => return Err(ConfigError::UnknownKey(format!("param.{other}"))),
            }
        }
        let relaxed = self.relax_admissibility || self.param_overrides.is_empty();
        params
            .validate(relaxed)
            .map_err(|e| ConfigError::Params(e.to_string()))?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let file = parse_config_text("command=mms\ncase=example1\nN=100\nM=100\n").unwrap();
        let cfg = resolve(Command::Mms, Some(file), Overrides::default()).unwrap();
        assert_eq!(cfg.t_final, 1.0);
        assert_eq!(cfg.stride, 1);
        assert!(!cfg.paper_literal);
        assert_eq!(cfg.n, 100);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config_text("commannd=mms\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(k) if k == "commannd"));
        let err = parse_config_text("param.zeta=1.0\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(k) if k == "param.zeta"));
    }

    #[test]
    fn non_increasing_list_rejected() {
        let file = parse_config_text("M_list=[200,100]\n").unwrap();
        let err = resolve(Command::TimeStudy, Some(file), Overrides::default()).unwrap_err();
        assert!(matches!(err, ConfigError::ListNotIncreasing(k) if k == "M_list"));
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config_text("N=10\nM=20\ncase=example2\n").unwrap();
        let flags = Overrides {
            n: Some(64),
            case: Some("example1".into()),
            ..Overrides::default()
        };
        let cfg = resolve(Command::Solve, Some(file), flags).unwrap();
        assert_eq!(cfg.n, 64);
        assert_eq!(cfg.m, 20);
        assert_eq!(cfg.case, CaseName::Example1);
    }

    #[test]
    fn per_command_requirements() {
        let err = resolve(Command::TimeStudy, None, Overrides::default()).unwrap_err();
        assert!(matches!(err, ConfigError::Missing(k) if k == "M_list"));
        let err = resolve(
            Command::SpaceStudy,
            None,
            Overrides {
                n_list: Some(vec![10, 20]),
                ..Overrides::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Missing(k) if k == "N_ref"));
        let err = resolve(
            Command::Mms,
            None,
            Overrides {
                case: Some("base-model".into()),
                ..Overrides::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Other(_)));
    }

    #[test]
    fn default_params_accepted_overrides_strict() {
        let cfg = resolve(Command::Solve, None, Overrides::default()).unwrap();
        assert!(cfg.effective_params().is_ok());

        // an override turns on strict checking, and the shipped default set
        // itself violates w2 < 1 < w1
        let flags = Overrides {
            params: vec![("D_p".into(), 2.0)],
            ..Overrides::default()
        };
        let cfg = resolve(Command::Solve, None, flags).unwrap();
        assert!(matches!(cfg.effective_params(), Err(ConfigError::Params(_))));

        let flags = Overrides {
            params: vec![("D_p".into(), 2.0)],
            relax_admissibility: true,
            ..Overrides::default()
        };
        let cfg = resolve(Command::Solve, None, flags).unwrap();
        let p = cfg.effective_params().unwrap();
        assert_eq!(p.d_p, 2.0);
    }

    #[test]
    fn param_lines_parse() {
        let file = parse_config_text("param.w1=1.5\nparam.I=0.5\n").unwrap();
        let cfg = resolve(
            Command::Solve,
            Some(file),
            Overrides {
                relax_admissibility: true,
                ..Overrides::default()
            },
        )
        .unwrap();
        let p = cfg.effective_params().unwrap();
        assert_eq!(p.w1, 1.5);
        assert_eq!(p.inhibitor, 0.5);
    }
}
