//! Command-line front end. Failures print one line of the form
//! `error:<stage>:<code>: message` to stderr and exit with a code that
//! identifies the failing stage.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::check::{run_checks, CheckOptions, LossKind};
use crate::pipeline::{load_bundle, run_in, ErrorKind, PipelineError, PipelineStage};
use crate::projection::write_masks;
use crate::report::Report;
use crate::scenario::Scenario;
use crate::time_alloc::VelocityProfile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NO_PATH: i32 = 3;
pub const EXIT_NON_FINITE: i32 = 4;
pub const EXIT_RENDER: i32 = 5;
pub const EXIT_ORACLE: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "voxplan", version, about = "Voxel-grid pick-and-place planning and guidance masks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a scenario file from a template.
    Synth {
        /// sink, empty or random
        #[arg(long, default_value = "sink")]
        template: String,
        /// Seed for the random template.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline and write a bundle directory.
    Plan {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print loss, clearance and speed tables from a bundle.
    Report {
        bundle: PathBuf,
        /// Also write losses.csv, clearance.csv and speeds.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pipeline and write only the guidance masks.
    Masks {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare the implementation against brute-force oracles.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt one loss's analytic gradient (len, acc, curv, col).
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

/// Scenario overrides applied before validation.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub w_len: Option<f64>,
    #[arg(long)]
    pub w_acc: Option<f64>,
    #[arg(long)]
    pub w_curv: Option<f64>,
    #[arg(long)]
    pub w_col: Option<f64>,
    #[arg(long)]
    pub d_safe_m: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// sine or uniform
    #[arg(long)]
    pub profile: Option<VelocityProfile>,
}

impl Overrides {
    pub fn apply(&self, sc: &mut Scenario) {
        let p = &mut sc.planner;
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.w_len, self.w_len);
        set(&mut p.w_acc, self.w_acc);
        set(&mut p.w_curv, self.w_curv);
        set(&mut p.w_col, self.w_col);
        set(&mut p.d_safe_m, self.d_safe_m);
        if let Some(n) = self.iterations {
            p.iterations = n;
        }
        if let Some(n) = self.frames {
            sc.timing.total_frames = n;
        }
        if let Some(pr) = self.profile {
            sc.timing.profile = pr;
        }
    }
}

/// A failure ready to print.
#[derive(Debug)]
pub struct CliError {
    pub stage: String,
    pub code: &'static str,
    pub exit: i32,
    pub message: String,
}

impl CliError {
    fn new(stage: &str, code: &'static str, exit: i32, message: impl std::fmt::Display) -> Self {
        CliError {
            stage: stage.into(),
            code,
            exit,
            message: message.to_string(),
        }
    }

    pub fn line(&self) -> String {
        format!("error:{}:{}: {}", self.stage, self.code, self.message)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError {
            stage: e.stage.to_string(),
            code: e.kind.code(),
            exit: e.kind.exit_code(),
            message: e.message,
        }
    }
}

fn io_error(stage: &str, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(stage, "io", 1, format!("{}: {e}", path.display()))
}

fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Scenario, CliError> {
    let mut sc = Scenario::load(path).map_err(PipelineError::from)?;
    overrides.apply(&mut sc);
    sc.validate().map_err(PipelineError::from)?;
    Ok(sc)
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let first = e.to_string();
                let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
                let _ = writeln!(err, "error:cli:usage: {first}");
                return EXIT_PARSE;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{}", e.line());
            e.exit
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    let say = |out: &mut dyn Write, s: String| {
        let _ = writeln!(out, "{s}");
    };
    match command {
        Command::Synth { template, seed, out: path } => {
            let sc = Scenario::template(&template, seed).map_err(|e| CliError::new("synth", "template", EXIT_PARSE, e))?;
            sc.validate().map_err(PipelineError::from)?;
            let text = sc.to_toml_string().map_err(|e| CliError::new("synth", "serialize", 1, e))?;
            match path {
                Some(p) => {
                    fs::write(&p, text).map_err(|e| io_error("synth", &p, e))?;
                    say(out, format!("wrote {} scenario to {}", sc.name, p.display()));
                }
                None => {
                    let _ = write!(out, "{text}");
                }
            }
            Ok(EXIT_OK)
        }
        Command::Plan {
            scenario,
            out: dir,
            overrides,
        } => {
            let sc = load_scenario(&scenario, &overrides)?;
            let bundle = run_in(&sc, base_dir(&scenario))?;
            bundle.write(&dir)?;
            let m = bundle.metrics();
            say(out, format!("bundle: {}", dir.display()));
            say(out, format!("frames: {} (stages {:?})", m.timing.total_frames, m.timing.stage_frames));
            for c in &m.clearance {
                say(
                    out,
                    format!(
                        "{:<11} min clearance {:.4} -> {:.4} m (d_safe {:.4})",
                        c.stage.as_str(),
                        c.before.min_m,
                        c.after.min_m,
                        m.d_safe_m
                    ),
                );
            }
            say(out, format!("objective: {:.4} -> {:.4}", m.losses.before.total, m.losses.after.total));
            Ok(EXIT_OK)
        }
        Command::Report { bundle, out: dir } => {
            let loaded = load_bundle(&bundle).map_err(|e| CliError::new("report", "corrupt_bundle", EXIT_PARSE, e))?;
            let report = Report::from_bundle(&loaded);
            let _ = write!(out, "{}", report.to_text());
            if let Some(dir) = dir {
                fs::create_dir_all(&dir).map_err(|e| io_error("report", &dir, e))?;
                let csv_err = |e: csv::Error| CliError::new("report", "csv", 1, e);
                for (name, text) in [
                    ("losses.csv", report.losses_csv().map_err(csv_err)?),
                    ("clearance.csv", report.clearance_csv().map_err(csv_err)?),
                    ("speeds.csv", report.speeds_csv().map_err(csv_err)?),
                ] {
                    let p = dir.join(name);
                    fs::write(&p, text).map_err(|e| io_error("report", &p, e))?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Masks {
            scenario,
            out: dir,
            overrides,
        } => {
            let sc = load_scenario(&scenario, &overrides)?;
            let b = run_in(&sc, base_dir(&scenario))?;
            write_masks(&dir, &b.masks, &b.camera, &b.object, &b.gripper)
                .map_err(|e| PipelineError::new(PipelineStage::Render, ErrorKind::Render, e))?;
            say(out, format!("wrote {} masks to {}", b.masks.len(), dir.display()));
            Ok(EXIT_OK)
        }
        Command::Check { seed, inject_fault } => {
            let fault = inject_fault
                .map(|s| s.parse::<LossKind>())
                .transpose()
                .map_err(|e| CliError::new("check", "usage", EXIT_PARSE, e))?;
            let report = run_checks(&CheckOptions { seed, fault });
            for r in &report.results {
                say(out, r.to_string());
            }
            match report.results.iter().find(|r| !r.passed) {
                None => Ok(EXIT_OK),
                Some(first) => {
                    let failed: Vec<String> = report
                        .results
                        .iter()
                        .filter(|r| !r.passed)
                        .map(|r| format!("{} ({})", r.id, r.name))
                        .collect();
                    Err(CliError::new(
                        "check",
                        "oracle_mismatch",
                        EXIT_ORACLE,
                        format!("failed criteria {}; first: {}", failed.join(", "), first.detail),
                    ))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut full = vec!["voxplan"];
        full.extend_from_slice(args);
        let code = run_cli(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn synth_to_stdout_parses() {
        let (code, out, _) = call(&["synth", "--template", "empty"]);
        assert_eq!(code, 0);
        let sc = Scenario::from_toml_str(&out).unwrap();
        assert_eq!(sc.name, "empty");
    }

    #[test]
    fn unknown_template_is_a_parse_error() {
        let (code, _, err) = call(&["synth", "--template", "garage"]);
        assert_eq!(code, EXIT_PARSE);
        assert!(err.starts_with("error:synth:template:"), "{err}");
    }

    #[test]
    fn usage_errors_are_prefixed() {
        let (code, _, err) = call(&["plan"]);
        assert_eq!(code, EXIT_PARSE);
        assert!(err.starts_with("error:cli:usage:"), "{err}");
        let (code, _, err) = call(&["plan", "x.toml", "--out", "o", "--profile", "jerky"]);
        assert_eq!(code, EXIT_PARSE);
        assert!(err.starts_with("error:cli:usage:"), "{err}");
    }

    #[test]
    fn overrides_are_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        crate::scenario::sink().save(&path).unwrap();
        let p = path.to_str().unwrap();
        let o = dir.path().join("b");
        let (code, _, err) = call(&["plan", p, "--out", o.to_str().unwrap(), "--w-col=-1"]);
        assert_eq!(code, EXIT_PARSE);
        assert!(err.starts_with("error:scenario:invalid_input:"), "{err}");
        let (code, _, err) = call(&["plan", p, "--out", o.to_str().unwrap(), "--frames", "3"]);
        assert_eq!(code, EXIT_PARSE, "{err}");
    }

    #[test]
    fn missing_scenario_file() {
        let (code, _, err) = call(&["plan", "/nonexistent/s.toml", "--out", "/tmp/x"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error:scenario:io:"), "{err}");
    }

    #[test]
    fn report_on_missing_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, err) = call(&["report", dir.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_PARSE);
        assert!(err.starts_with("error:report:corrupt_bundle:"), "{err}");
    }

    #[test]
    fn bad_fault_name() {
        let (code, _, err) = call(&["check", "--inject-fault", "jerk"]);
        assert_eq!(code, EXIT_PARSE);
        assert!(err.starts_with("error:check:usage:"), "{err}");
    }
}
