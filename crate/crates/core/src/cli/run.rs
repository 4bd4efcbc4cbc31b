//! Subcommand dispatch. Reports go to stdout as JSON.

use std::fs;
use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{parse_config, RfisConfig};
use super::export::{export_surface, ExportFormat};
use crate::attractor::{attractor_convergence_check, StartSet};
use crate::dimension::theoretical_box_dimension;
use crate::empirical::{empirical_dimension, oscillation_profile, transfer_inequality_check};
use crate::example;
use crate::partition::{check_compatible, check_steady, compute_uniform_sums};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rfis", version, about = "Bilinear recurrent fractal interpolation surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Theory,
    Empirical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Start {
    Corners,
    Graph,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration and every structural hypothesis.
    Validate { config: PathBuf },
    /// Sample the surface on the level-n grid and export it.
    Sample {
        config: PathBuf,
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Output file; the surface goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Box-counting dimension of the graph.
    Dim {
        config: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Level range `a..b` (inclusive) for the empirical method.
        #[arg(long, value_parser = parse_levels, default_value = "5..10")]
        levels: RangeInclusive<u32>,
    },
    /// Iterate the set map and report distances to the graph voxels.
    AttractorCheck {
        config: PathBuf,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum, default_value = "corners")]
        start: Start,
    },
    /// The bundled N=4, K=2 configuration.
    ExamplePaper {
        #[arg(long, conflicts_with = "original")]
        corrected: bool,
        /// Use the factor matrix with non-uniform corner sums.
        #[arg(long)]
        original: bool,
        /// Print the configuration instead of analysing it.
        #[arg(long)]
        emit_config: bool,
    },
}

fn parse_levels(text: &str) -> Result<RangeInclusive<u32>, String> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| format!("expected a..b, got `{text}`"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: u32 = a.trim().parse().map_err(|e| format!("bad start level: {e}"))?;
    let b: u32 = b.trim().parse().map_err(|e| format!("bad end level: {e}"))?;
    if a > b {
        return Err(format!("empty level range {a}..{b}"));
    }
    Ok(a..=b)
}

/// Captured result of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl RunOutput {
    fn report(code: i32, value: &impl Serialize) -> Self {
        let mut stdout = serde_json::to_vec_pretty(value).expect("reports serialize");
        stdout.push(b'\n');
        Self {
            code,
            stdout,
            stderr: String::new(),
        }
    }

    fn failure(code: i32, message: impl Into<String>) -> Self {
        let mut stderr = message.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        Self {
            code,
            stdout: Vec::new(),
            stderr,
        }
    }

    pub fn stdout_str(&self) -> &str {
        std::str::from_utf8(&self.stdout).unwrap_or("")
    }
}

/// Runs one command line; `argv[0]` is the program name.
pub fn run_subcommand<I, T>(argv: I) -> RunOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                RunOutput {
                    code,
                    stdout: text.into_bytes(),
                    stderr: String::new(),
                }
            } else {
                RunOutput::failure(code, text)
            };
        }
    };
    match cli.command {
        Command::Validate { config } => with_config(&config, validate),
        Command::Sample {
            config,
            level,
            format,
            out,
        } => with_config(&config, |c| sample(c, level, format, out.as_ref())),
        Command::Dim { config, method, levels } => with_config(&config, |c| match method {
            Method::Theory => dim_theory(c),
            Method::Empirical => dim_empirical(c, levels.clone()),
        }),
        Command::AttractorCheck {
            config,
            level,
            steps,
            start,
        } => with_config(&config, |c| attractor(c, level, steps, start)),
        Command::ExamplePaper {
            original,
            emit_config,
            ..
        } => {
            let text = if original {
                example::ORIGINAL_JSON
            } else {
                example::CORRECTED_JSON
            };
            if emit_config {
                return RunOutput {
                    code: EXIT_OK,
                    stdout: text.as_bytes().to_vec(),
                    stderr: String::new(),
                };
            }
            let config = parse_config(text).expect("bundled configuration is valid");
            let checks = validation_report(&config);
            let dimension = theoretical_box_dimension(&config.rfis, &config.partition_or_whole());
            let code = if checks.valid && dimension.is_ok() {
                EXIT_OK
            } else {
                EXIT_INVALID
            };
            let dimension = match dimension {
                Ok(r) => json!(r),
                Err(e) => json!({ "error": e.to_string() }),
            };
            RunOutput::report(
                code,
                &json!({
                    "fixture": if original { "original" } else { "corrected" },
                    "validation": checks,
                    "dimension": dimension,
                }),
            )
        }
    }
}

fn with_config(path: &PathBuf, body: impl FnOnce(&RfisConfig) -> RunOutput) -> RunOutput {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return RunOutput::failure(EXIT_USAGE, format!("cannot read {}: {e}", path.display())),
    };
    match parse_config(&text) {
        Ok(config) => body(&config),
        Err(e) => RunOutput::failure(EXIT_INVALID, format!("{}: {e}", path.display())),
    }
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    valid: bool,
    n: usize,
    k: usize,
    homogeneity: crate::grid::HomogeneityCertificate,
    matchable: crate::bilinear::MatchableReport,
    compatibility: crate::partition::CompatibilityReport,
    non_steady_cells: Vec<crate::grid::Cell>,
    transfer_matrix: Option<crate::partition::TransferMatrix>,
    uniform_sums_error: Option<String>,
}

const MATCHABLE_SAMPLES: usize = 64;
const MATCHABLE_TOL: f64 = 1e-12;

fn validation_report(config: &RfisConfig) -> ValidationReport {
    let rfis = &config.rfis;
    let partition = config.partition_or_whole();
    let homogeneity = rfis.homogeneity();
    let matchable = rfis.check_matchable(MATCHABLE_SAMPLES);
    let compatibility = check_compatible(&partition, rfis.maps());
    let non_steady_cells = check_steady(rfis.factors());
    let (transfer_matrix, uniform_sums_error) = match compute_uniform_sums(rfis, &partition) {
        Ok(g) => (Some(g), None),
        Err(e) => (None, Some(e.to_string())),
    };
    ValidationReport {
        valid: homogeneity.passed()
            && matchable.passed(MATCHABLE_TOL)
            && compatibility.compatible()
            && non_steady_cells.is_empty()
            && transfer_matrix.is_some(),
        n: rfis.n(),
        k: config.document.k,
        homogeneity,
        matchable,
        compatibility,
        non_steady_cells,
        transfer_matrix,
        uniform_sums_error,
    }
}

fn validate(config: &RfisConfig) -> RunOutput {
    let report = validation_report(config);
    let code = if report.valid { EXIT_OK } else { EXIT_INVALID };
    RunOutput::report(code, &report)
}

fn sample(config: &RfisConfig, level: u32, format: ExportFormat, out: Option<&PathBuf>) -> RunOutput {
    let surface = match config.rfis.sample_surface(level) {
        Ok(s) => s,
        Err(e) => return RunOutput::failure(EXIT_INVALID, e.to_string()),
    };
    let mut bytes = Vec::new();
    export_surface(&surface, format, &mut bytes).expect("writing to memory");
    match out {
        None => RunOutput {
            code: EXIT_OK,
            stdout: bytes,
            stderr: String::new(),
        },
        Some(path) => {
            if let Err(e) = fs::write(path, &bytes) {
                return RunOutput::failure(EXIT_USAGE, format!("cannot write {}: {e}", path.display()));
            }
            let (min, max) = surface.min_max();
            RunOutput::report(
                EXIT_OK,
                &json!({
                    "level": level,
                    "side": surface.side(),
                    "nodes": (surface.side() + 1) * (surface.side() + 1),
                    "min": min,
                    "max": max,
                    "bytes": bytes.len(),
                    "out": path.display().to_string(),
                }),
            )
        }
    }
}

fn dim_theory(config: &RfisConfig) -> RunOutput {
    match theoretical_box_dimension(&config.rfis, &config.partition_or_whole()) {
        Ok(report) => RunOutput::report(EXIT_OK, &report),
        Err(e) => RunOutput::report(EXIT_INVALID, &json!({ "error": e.to_string() })),
    }
}

fn dim_empirical(config: &RfisConfig, levels: RangeInclusive<u32>) -> RunOutput {
    let partition = config.partition_or_whole();
    let profile = match oscillation_profile(&config.rfis, Some(&partition), levels) {
        Ok(p) => p,
        Err(e) => return RunOutput::failure(EXIT_INVALID, e.to_string()),
    };
    let estimate = match empirical_dimension(&profile) {
        Ok(e) => json!(e),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let theory: Value = match theoretical_box_dimension(&config.rfis, &partition) {
        Ok(r) => json!(r.dimension),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let residuals: Value = match compute_uniform_sums(&config.rfis, &partition) {
        Ok(g) => json!(transfer_inequality_check(&profile, &g)),
        Err(_) => Value::Null,
    };
    let code = if estimate.get("error").is_some() {
        EXIT_INVALID
    } else {
        EXIT_OK
    };
    RunOutput::report(
        code,
        &json!({
            "estimate": estimate,
            "theoretical_dimension": theory,
            "transfer_residuals": residuals,
            "profile": profile,
        }),
    )
}

fn attractor(config: &RfisConfig, level: u32, steps: usize, start: Start) -> RunOutput {
    let start = match start {
        Start::Corners => StartSet::CellCorners { z: 0.0 },
        Start::Graph => StartSet::Graph { level },
    };
    match attractor_convergence_check(&config.rfis, level, steps, start) {
        Ok(report) => RunOutput::report(
            EXIT_OK,
            &json!({
                "start": start,
                "final_distance_in_diagonals": report.distances.last().map(|d| d / report.voxel_diagonal),
                "report": report,
            }),
        ),
        Err(e) => RunOutput::failure(EXIT_INVALID, e.to_string()),
    }
}
