use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("GRAPHCOLLIDE_GIT_DESCRIBE"), ")");

/// Collision particle systems on graphs, their dual chains and moments.
#[derive(Debug, Parser)]
#[command(name = "graphcollide", version = VERSION, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Write `<command>.<ext>` and `manifest.json` into this directory
    /// instead of printing to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads for Monte Carlo work.
    #[arg(long, global = true, env = "GRAPHCOLLIDE_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Moment tables: stationary (with --alpha) or at given times (with --t).
    Moments(MomentsArgs),
    /// Unbiased simulation estimate of one stationary moment.
    Estimate(EstimateArgs),
    /// Expected sample probabilities and Bayes factors between graphs.
    SelectGraph(SelectGraphArgs),
    /// Independent sets found by the collision particle algorithm.
    FindIs(FindIsArgs),
    /// Paths of the dual chain with killing increments.
    SimulateDual(SimulateDualArgs),
    /// Euler-Maruyama paths of the diffusion on the simplex.
    SimulateSde(SimulateSdeArgs),
    /// Trajectory of the discrete collision process.
    SimulateDiscrete(SimulateDiscreteArgs),
    /// Laplacian spectrum and eigenvalues of moment-matrix blocks.
    Spectrum(SpectrumArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Moments(_) => "moments",
            Command::Estimate(_) => "estimate",
            Command::SelectGraph(_) => "select-graph",
            Command::FindIs(_) => "find-is",
            Command::SimulateDual(_) => "simulate-dual",
            Command::SimulateSde(_) => "simulate-sde",
            Command::SimulateDiscrete(_) => "simulate-discrete",
            Command::Spectrum(_) => "spectrum",
        }
    }

    pub fn parameters(&self) -> serde_json::Value {
        let v = match self {
            Command::Moments(a) => serde_json::to_value(a),
            Command::Estimate(a) => serde_json::to_value(a),
            Command::SelectGraph(a) => serde_json::to_value(a),
            Command::FindIs(a) => serde_json::to_value(a),
            Command::SimulateDual(a) => serde_json::to_value(a),
            Command::SimulateSde(a) => serde_json::to_value(a),
            Command::SimulateDiscrete(a) => serde_json::to_value(a),
            Command::Spectrum(a) => serde_json::to_value(a),
        };
        v.expect("argument structs serialize")
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MomentsArgs {
    /// Built-in name (K4, C4, S3, P5, K3,2, Petersen) or a graph file.
    #[arg(long)]
    pub graph: String,
    #[arg(long)]
    pub order: u32,
    /// Drift strength for stationary moments; rationals like 1/4 are accepted.
    #[arg(long, conflicts_with = "t")]
    pub alpha: Option<String>,
    /// Exact rational arithmetic (stationary moments only).
    #[arg(long, requires = "alpha")]
    pub exact: bool,
    /// Comma-separated times for the undrifted moments.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub t: Option<Vec<f64>>,
    /// Starting point for --t; defaults to the barycentre.
    #[arg(long)]
    pub x0: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub graph: String,
    /// Multi-index, e.g. 1,0,1,0.
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Mc,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectGraphArgs {
    /// Comma-separated candidates; `K3,2` is read as one name.
    #[arg(long)]
    pub graphs: String,
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub alpha: String,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Samples per candidate in mc mode.
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct FindIsArgs {
    #[arg(long)]
    pub graph: String,
    /// Number of particles; defaults to twice the vertex count.
    #[arg(long)]
    pub particles: Option<u64>,
    /// Iterations without a collision before stopping; defaults to 50 N^2.
    #[arg(long)]
    pub threshold: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateDualArgs {
    #[arg(long)]
    pub graph: String,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Initial multi-index.
    #[arg(long)]
    pub start: String,
    /// Time horizon; without it paths run until absorption.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub paths: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    AbsorbAtZero,
    ReflectClip,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateSdeArgs {
    #[arg(long)]
    pub graph: String,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Starting point; defaults to the barycentre.
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = graphcollide::sde::DEFAULT_DT)]
    pub dt: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 1)]
    pub paths: u64,
    #[arg(long, default_value_t = 100)]
    pub record_every: u64,
    /// Defaults to absorb-at-zero without drift and reflect-clip with it.
    #[arg(long, value_enum)]
    pub boundary: Option<Boundary>,
    /// Report how often each support occurs at time t instead of paths.
    #[arg(long)]
    pub profile: bool,
    /// Coordinates at or below this count as outside the support.
    #[arg(long, default_value_t = graphcollide::sde::DEFAULT_SUPPORT_EPS)]
    pub eps: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateDiscreteArgs {
    #[arg(long)]
    pub graph: String,
    /// Initial particle counts per vertex.
    #[arg(long)]
    pub n0: String,
    #[arg(long)]
    pub steps: u64,
    #[arg(long, default_value_t = 1)]
    pub record_every: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub graph: String,
    /// Semicolon-separated multi-indices closed under collisions,
    /// e.g. "2,1,1;1,2,1;1,1,2".
    #[arg(long)]
    pub block: Option<String>,
}
