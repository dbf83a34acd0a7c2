//! Argument parsing and dispatch.

use std::io::Write;
use std::path::PathBuf;

use almiso::gallery;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{example_recipe, Config, CurvatureSpec, PlaneChoice, Problem, EXAMPLE_NAMES};
use crate::error::{CliError, CliResult};
use crate::report::VerificationReport;
use crate::suites::{self, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "almiso", version, about = "Numerical checks for almost isometries of Finsler metrics")]
pub struct Cli {
    /// TOML configuration with the metric, chart box, grids and seeds.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random or quasi-random sample (overrides the configuration).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Record per-check wall-clock times (reports are then no longer reproducible byte for byte).
    #[arg(long, global = true)]
    pub timings: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a gallery example (or the configured metric) through every suite.
    Verify {
        /// Example name; see `almiso examples`.
        example: Option<String>,
        /// Proportionality constant `d tau = c omega`.
        #[arg(long, allow_hyphen_values = true)]
        c: Option<f64>,
        #[arg(long)]
        sv_threshold: Option<f64>,
    },
    /// Betterment of the norm at a point, with the quadratic-fit verdict.
    Betterment {
        #[arg(long)]
        example: Option<String>,
        /// Comma-separated coordinates; defaults to the box center.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
    },
    /// Almost-Killing dimension with its singular-value spectrum.
    Dimension {
        #[arg(long)]
        example: Option<String>,
        #[arg(long)]
        sv_threshold: Option<f64>,
        /// Flow every basis field and check invariance of `T`.
        #[arg(long)]
        cross_validate: bool,
    },
    /// Distance between two points with its convergence record.
    Distance {
        #[arg(long)]
        example: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        to: Option<Vec<f64>>,
    },
    /// Sectional curvature over seeded random planes.
    Curvature {
        #[arg(long)]
        example: Option<String>,
        #[arg(long)]
        planes: Option<usize>,
        /// Sample `J`-invariant planes only.
        #[arg(long)]
        complex: bool,
    },
    /// Dimension of the 2-forms invariant under a matrix subalgebra.
    InvariantForms {
        /// `so(n)` for n >= 2, or `u(2)`.
        algebra: String,
    },
    /// Triangular function on triples, optionally against a configured flow.
    Triangle {
        #[arg(long)]
        example: Option<String>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// List the example names.
    Examples,
    /// Print the configuration that rebuilds an example.
    Export {
        example: String,
        #[arg(long, allow_hyphen_values = true)]
        c: Option<f64>,
    },
}

fn load_config(cli: &Cli) -> CliResult<Config> {
    match &cli.config {
        Some(path) => Config::load(path),
        None => Ok(Config::default()),
    }
}

fn resolve(example: Option<&str>, c: Option<f64>, config: &Config) -> CliResult<Problem> {
    match example {
        Some(name) => {
            if config.has_metric() {
                return Err(CliError::Usage("give an example name or a configured metric, not both".into()));
            }
            let entry = gallery::build(&example_recipe(name, c)?, None)?;
            Ok(Problem::from_entry(entry))
        }
        None if config.has_metric() => {
            if c.is_some() {
                return Err(CliError::Usage("--c applies to named examples only".into()));
            }
            config.problem()
        }
        None => Err(CliError::Usage("no metric: pass an example name or --config".into())),
    }
}

fn point_arg(arg: &Option<Vec<f64>>, fallback: Option<Vec<f64>>, what: &str, dim: usize) -> CliResult<Vec<f64>> {
    let p = arg.clone().or(fallback).ok_or_else(|| CliError::Usage(format!("missing --{what}")))?;
    if p.len() != dim {
        return Err(CliError::Usage(format!("--{what} needs {dim} coordinates")));
    }
    Ok(p)
}

fn emit(cli: &Cli, text: &[u8]) -> CliResult<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text)?,
    }
    Ok(())
}

fn emit_report(cli: &Cli, report: &VerificationReport) -> CliResult<()> {
    let bytes = match cli.format {
        Format::Json => report.to_json()?.into_bytes(),
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            buf
        }
    };
    emit(cli, &bytes)
}

/// Runs the command; `Ok(pass)` on completion.
pub fn run(cli: &Cli) -> CliResult<bool> {
    let mut config = load_config(cli)?;
    let opts = RunOptions {
        seed: cli.seed,
        timings: cli.timings,
    };
    let report = match &cli.command {
        Command::Verify { example, c, sv_threshold } => {
            let p = resolve(example.as_deref(), *c, &config)?;
            suites::verify(&p, &config, opts, *sv_threshold)?
        }
        Command::Betterment { example, point } => {
            let p = resolve(example.as_deref(), None, &config)?;
            if let Some(x) = point {
                config.betterment.get_or_insert_with(Default::default).point = Some(x.clone());
            }
            suites::betterment(&p, &config, opts)?
        }
        Command::Dimension {
            example,
            sv_threshold,
            cross_validate,
        } => {
            let p = resolve(example.as_deref(), None, &config)?;
            if *cross_validate {
                config.dimension.get_or_insert_with(Default::default).cross_validate = Some(true);
            }
            suites::dimension(&p, &config, opts, *sv_threshold)?
        }
        Command::Distance { example, from, to } => {
            let p = resolve(example.as_deref(), None, &config)?;
            let spec = config.distance.clone().unwrap_or_default();
            let a = point_arg(from, spec.from, "from", p.dim())?;
            let b = point_arg(to, spec.to, "to", p.dim())?;
            suites::distance(&p, &config, opts, &a, &b)?
        }
        Command::Curvature {
            example,
            planes,
            complex,
        } => {
            let p = resolve(example.as_deref(), None, &config)?;
            let spec = config.curvature.get_or_insert_with(CurvatureSpec::default);
            if planes.is_some() {
                spec.planes = *planes;
            }
            if *complex {
                spec.kind = Some(PlaneChoice::Complex);
            }
            suites::curvature(&p, &config, opts)?
        }
        Command::InvariantForms { algebra } => suites::invariant_forms(algebra, opts)?,
        Command::Triangle { example, count } => {
            let p = resolve(example.as_deref(), None, &config)?;
            if count.is_some() {
                config.triangle.get_or_insert_with(Default::default).count = *count;
            }
            suites::triangle(&p, &config, opts)?
        }
        Command::Examples => {
            emit(cli, format!("{}\n", EXAMPLE_NAMES.join("\n")).as_bytes())?;
            return Ok(true);
        }
        Command::Export { example, c } => {
            let entry = gallery::build(&example_recipe(example, *c)?, None)?;
            emit(cli, Config::for_entry(&entry).to_toml()?.as_bytes())?;
            return Ok(true);
        }
    };
    emit_report(cli, &report)?;
    Ok(report.pass)
}
