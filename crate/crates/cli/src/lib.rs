//! The `errcalc` command-line tool: model documents in, deterministic JSON
//! reports out.
//!
//! Exit codes: 0 on success, 1 for usage and validation errors, 2 for
//! numerical failures found while computing.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

pub mod commands;
pub mod document;
pub mod report;

pub use document::ModelDocument;
pub use report::Report;

use commands::ClusterFlags;
use document::DistributionSpec;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] errcalc::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_validation() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "errcalc", version, about = "Error calculus on model documents")]
pub struct Cli {
    /// Seed for every sampled quantity; overrides the document's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; the report does not depend on this.
    #[arg(long, global = true, env = "ERRCALC_THREADS")]
    pub threads: Option<usize>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Sharp,
    Cluster,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    /// Propagate value, bias and error matrix through the expressions.
    Propagate { document: PathBuf },
    /// Estimate the error matrix and bias from a cloud of model runs.
    Cluster {
        document: PathBuf,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, value_enum)]
        distribution: Option<DistributionSpec>,
        /// Cloud sizes for a convergence sweep.
        #[arg(long, value_delimiter = ',')]
        sweep_points: Vec<usize>,
        /// Scales for a convergence sweep.
        #[arg(long, value_delimiter = ',')]
        sweep_scales: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        replicates: usize,
    },
    /// Estimate the four bias operators of the document's scheme.
    Bias {
        document: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Closed-form process models.
    Process {
        #[command(subcommand)]
        model: ProcessCommand,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProcessCommand {
    /// Error matrix of the bridge built from an erroneous walk.
    Bridge {
        #[arg(long = "K", default_value_t = 1024)]
        #[serde(rename = "K")]
        k: usize,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = commands::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Sharp)]
        method: MethodArg,
    },
    /// Mean-square deflection of a string in thermal equilibrium.
    String {
        #[arg(long = "K", default_value_t = 1024)]
        #[serde(rename = "K")]
        k: usize,
        #[arg(long = "l")]
        l: f64,
        #[arg(long = "F")]
        #[serde(rename = "F")]
        tension: f64,
        #[arg(long = "T")]
        #[serde(rename = "T")]
        temperature: f64,
        #[arg(long)]
        x: f64,
    },
    /// Error matrix of the erroneous random walk.
    Donsker {
        #[arg(long = "K", default_value_t = 1024)]
        #[serde(rename = "K")]
        k: usize,
        #[arg(long = "t", value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0])]
        times: Vec<f64>,
        #[arg(long, default_value_t = commands::DEFAULT_SAMPLES)]
        samples: usize,
    },
}

/// Reads a document, returning it with the digest of its canonical form.
pub fn load_document(path: &Path) -> Result<(ModelDocument, String), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    let raw: Value = serde_json::from_str(&text)?;
    let digest = report::digest(&raw);
    let doc: ModelDocument = serde_json::from_value(raw)?;
    doc.validate()?;
    Ok((doc, digest))
}

/// Runs one command. Thread count and output path are the caller's
/// business.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let echo = serde_json::to_value(&cli.command)?;
    let (digest, seed, (results, table)) = match &cli.command {
        Command::Propagate { document } => {
            let (doc, digest) = load_document(document)?;
            let seed = cli.seed.unwrap_or(doc.seed);
            (digest, seed, commands::propagate_doc(&doc)?)
        }
        Command::Cluster {
            document,
            points,
            scale,
            distribution,
            sweep_points,
            sweep_scales,
            replicates,
        } => {
            let (doc, digest) = load_document(document)?;
            let seed = cli.seed.unwrap_or(doc.seed);
            let flags = ClusterFlags {
                points: *points,
                scale: *scale,
                distribution: *distribution,
                sweep_points: sweep_points.clone(),
                sweep_scales: sweep_scales.clone(),
                replicates: *replicates,
            };
            (digest, seed, commands::cluster_doc(&doc, &flags, seed)?)
        }
        Command::Bias { document, samples } => {
            let (doc, digest) = load_document(document)?;
            let seed = cli.seed.unwrap_or(doc.seed);
            (digest, seed, commands::bias_doc(&doc, *samples, seed)?)
        }
        Command::Process { model } => {
            let seed = cli.seed.unwrap_or(0);
            let out = match model {
                ProcessCommand::Bridge {
                    k,
                    s,
                    t,
                    samples,
                    method,
                } => commands::bridge(*k, *s, *t, *samples, *method, seed)?,
                ProcessCommand::String {
                    k,
                    l,
                    tension,
                    temperature,
                    x,
                } => commands::string(*k, *l, *tension, *temperature, *x)?,
                ProcessCommand::Donsker { k, times, samples } => {
                    commands::donsker(*k, times, *samples, seed)?
                }
            };
            (report::digest(&echo), seed, out)
        }
    };
    Ok(Report {
        command: echo,
        digest,
        seed,
        results,
        table,
    })
}
