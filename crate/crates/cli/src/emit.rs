//! Report emission: CSV tables plus a `.meta` companion file.
//!
//! Floats are serialized with 17 significant digits so every value
//! round-trips to the same f64. The CSV bytes are a pure function of the
//! config and results; wall times and the timestamp live only in `.meta`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fbspec_core::harness::{ErrorReport, StabilityReport};
use fbspec_core::polybasis::TrialBasis;
use fbspec_core::stepper::Trajectory;

/// 17-significant-digit, round-trip-safe float form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn study_csv(report: &ErrorReport) -> String {
    let mut out = String::from("level,e_inf,rate\n");
    for (i, (level, err)) in report.levels.iter().enumerate() {
        let rate = if i == 0 {
            String::new()
        } else {
            report.rates[i - 1].map(fmt_f64).unwrap_or_default()
        };
        let _ = writeln!(out, "{level},{},{rate}", fmt_f64(*err));
    }
    out
}

pub fn stability_csv(report: &StabilityReport) -> String {
    let mut out = String::from("eps,diff,ratio\n");
    for i in 0..report.eps_levels.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(report.eps_levels[i]),
            fmt_f64(report.diffs[i]),
            fmt_f64(report.ratios[i])
        );
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,R,v1");
    for i in 0..traj.nodes.len() {
        let _ = write!(out, ",p_node_{i}");
    }
    out.push('\n');
    let basis = TrialBasis::new(traj.n_max);
    let tables = basis.tabulate(&traj.nodes);
    for level in 0..traj.level_count() {
        let _ = write!(
            out,
            "{},{},{}",
            fmt_f64(traj.times[level]),
            fmt_f64(traj.radii[level]),
            fmt_f64(traj.v1[level])
        );
        let vals = tables.expansion_at_points(&traj.coeffs[level], traj.nodes.len());
        for v in vals {
            let _ = write!(out, ",{}", fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

/// Companion metadata: config echo, version, wall times, diagnostics.
pub struct Meta {
    lines: Vec<(String, String)>,
}

impl Meta {
    pub fn new() -> Self {
        let mut meta = Meta { lines: Vec::new() };
        meta.push("version", format!("fbspec-v{}", env!("CARGO_PKG_VERSION")));
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        meta.push("timestamp_unix", stamp.to_string());
        meta
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.lines.push((key.to_string(), value.into()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt_f64(value));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

impl Default for Meta {
    fn default() -> Self {
        Self::new()
    }
}

/// Write the CSV to `out` (or stdout when absent) and the metadata next to
/// it with the extension replaced by `meta`. Nothing but the CSV goes to
/// stdout, so piped output stays clean.
pub fn write_outputs(out: Option<&Path>, csv: &str, meta: &Meta) -> io::Result<Option<PathBuf>> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            fs::write(path, csv)?;
            let meta_path = path.with_extension("meta");
            fs::write(&meta_path, meta.render())?;
            Ok(Some(meta_path))
        }
        None => {
            print!("{csv}");
            Ok(None)
        }
    }
}
