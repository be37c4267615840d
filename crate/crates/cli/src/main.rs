//! `peps`: command-line experiments on PEPS, parent Hamiltonians and the
//! classical Gibbs bridge. Every run writes `<out>/<command>.json`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use peps_core::LatticeKind;
use serde::Serialize;
use serde_json::Value;

use config::{default_betas, FileConfig, Model, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "peps", version, about = "PEPS injectivity, parent Hamiltonians and gap checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    args: Args,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate a lattice graph.
    Lattice,
    /// Build the Ising PEPS of a lattice.
    IsingPeps,
    /// Rank test of one region.
    Inject,
    /// Greedy injective tiling.
    Tile,
    /// Assemble and export the parent Hamiltonian.
    Parent,
    /// Lowest eigenvalues of the parent Hamiltonian.
    Ed,
    /// Check that the PEPS is the unique ground state.
    Verify,
    /// Checks of the classical Ising PEPS.
    ClassicalChecks,
    /// Gap condition over a β grid.
    GapScan,
    /// Metropolis generator and its ordering against the parent Hamiltonian.
    Qmatrix,
    /// Site-independent form of a translation-invariant PEPS on a torus.
    TiConvert,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Lattice => "lattice",
            Command::IsingPeps => "ising-peps",
            Command::Inject => "inject",
            Command::Tile => "tile",
            Command::Parent => "parent",
            Command::Ed => "ed",
            Command::Verify => "verify",
            Command::ClassicalChecks => "classical-checks",
            Command::GapScan => "gap-scan",
            Command::Qmatrix => "qmatrix",
            Command::TiConvert => "ti-convert",
        }
    }
}

fn parse_kind(s: &str) -> Result<LatticeKind, String> {
    s.parse().map_err(|e: peps_core::Error| e.to_string())
}

#[derive(clap::Args, Debug, Default)]
struct Args {
    /// TOML file with default parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// square-torus, square-open, hexagonal-open, hexagonal-torus,
    /// square-with-defects or square-with-substructure.
    #[arg(long, global = true, value_parser = parse_kind)]
    lattice: Option<LatticeKind>,
    /// Lattice dimensions, e.g. `2,3`.
    #[arg(long, global = true, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Virtual bond dimension of random PEPS.
    #[arg(long, global = true)]
    bond_dim: Option<usize>,
    /// Physical dimension of random PEPS.
    #[arg(long, global = true)]
    phys_dim: Option<usize>,
    #[arg(long, global = true, value_enum)]
    model: Option<Model>,
    /// Inverse temperature of the Ising model.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// β grid of the gap scan, e.g. `0.1,0.2,0.3`.
    #[arg(long, global = true, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// Weights `α₀₀, α_o…` of the gap condition.
    #[arg(long, global = true, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Region members, e.g. `0,1,4`.
    #[arg(long, global = true, value_delimiter = ',')]
    region: Option<Vec<usize>>,
    /// Regroup a square torus into blocks of `rows,cols` sites.
    #[arg(long, global = true, value_delimiter = ',')]
    blocks: Option<Vec<usize>>,
    /// Largest region grown by the tiling search.
    #[arg(long, global = true)]
    max_region: Option<usize>,
    /// Number of eigenvalues computed.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// PEPS document used instead of a generated one.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output directory for reports and data files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative singular-value cutoff of rank decisions.
    #[arg(long, global = true)]
    rtol: Option<f64>,
    /// Largest state vector that may be built.
    #[arg(long, global = true)]
    cap: Option<u64>,
}

/// A failed run with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    /// Partial result recorded in the report.
    pub detail: Option<Value>,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into(), detail: None }
    }

    /// Exit code 3 with the offending result attached.
    pub fn invariant(message: impl Into<String>, detail: Value) -> Self {
        Failure { code: 3, message: message.into(), detail: Some(detail) }
    }
}

impl From<peps_core::Error> for Failure {
    fn from(e: peps_core::Error) -> Self {
        use peps_core::Error as E;
        let code = match &e {
            E::CapExceeded { .. } => 2,
            E::InvariantViolation(_) | E::NotConverged { .. } => 3,
            E::InvalidInput(_) | E::DimensionMismatch(_) | E::Serialization(_) => 1,
        };
        Failure { code, message: e.to_string(), detail: None }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::input(e.to_string())
    }
}

fn resolve(command: Command, a: Args) -> Result<RunConfig, Failure> {
    let file = match &a.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let model_default = match command {
        Command::Tile | Command::Parent | Command::Ed | Command::Verify => Model::Random,
        _ => Model::Ising,
    };
    Ok(RunConfig {
        command: command.name().to_string(),
        lattice: a.lattice.or(file.lattice).unwrap_or(LatticeKind::SquareTorus),
        dims: a.dims.or(file.dims).unwrap_or_else(|| vec![2, 2]),
        bond_dim: a.bond_dim.or(file.bond_dim).unwrap_or(2),
        phys_dim: a.phys_dim.or(file.phys_dim).unwrap_or(2),
        model: a.model.or(file.model).unwrap_or(model_default),
        beta: a.beta.or(file.beta).unwrap_or(0.3),
        betas: a.betas.or(file.betas).unwrap_or_else(default_betas),
        weights: a.weights.or(file.weights),
        region: a.region.or(file.region),
        blocks: a.blocks.or(file.blocks),
        max_region: a.max_region.or(file.max_region).unwrap_or(4),
        levels: a.levels.or(file.levels).unwrap_or(4),
        input: a.input.or(file.input),
        out: a.out.or(file.out).unwrap_or_else(|| PathBuf::from("peps-out")),
        seed: a.seed.or(file.seed).unwrap_or(0),
        rtol: a.rtol.or(file.rtol).unwrap_or(1e-10),
        cap: a.cap.or(file.cap).unwrap_or(1 << 20),
        eigen: file.eigen.unwrap_or_default(),
    })
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    seed: Option<u64>,
    status: &'static str,
    exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a RunConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

fn write_report(out: &std::path::Path, report: &Report) -> std::io::Result<()> {
    let path = out.join(format!("{}.json", report.command));
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let name = cli.command.name();
    let fallback_out = cli.args.out.clone().unwrap_or_else(|| PathBuf::from("peps-out"));
    let mut cfg = match resolve(cli.command, cli.args).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(f) => {
            eprintln!("error: {}", f.message);
            let _ = std::fs::create_dir_all(&fallback_out);
            let report = Report {
                command: name,
                seed: None,
                status: "error",
                exit_code: f.code,
                config: None,
                result: None,
                error: Some(&f.message),
            };
            let _ = write_report(&fallback_out, &report);
            return ExitCode::from(f.code);
        }
    };
    let outcome = cfg.resolve_paths().and_then(|_| commands::run(cli.command, &cfg));
    let (status, code, result, error) = match outcome {
        Ok((summary, value)) => {
            println!("{summary}");
            ("ok", 0, Some(value), None)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ("error", f.code, f.detail, Some(f.message))
        }
    };
    let report = Report {
        command: name,
        seed: Some(cfg.seed),
        status,
        exit_code: code,
        config: Some(&cfg),
        result,
        error: error.as_deref(),
    };
    let _ = std::fs::create_dir_all(&cfg.out);
    if let Err(e) = write_report(&cfg.out, &report) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
