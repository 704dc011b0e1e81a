use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "geosyn", version, about = "Geodesic synergy analysis of serial-chain motions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a motion and write boundary, velocity and angle tables.
    Analyze(InputArgs),
    /// Rebuild a motion from its segment boundaries under one model.
    Reconstruct(ReconstructArgs),
    /// Transfer a motion onto another chain.
    Retarget(RetargetArgs),
    /// Run every reconstruction model and tabulate their errors.
    Compare(InputArgs),
    /// Write a seeded synthetic motion with its chains.
    Synthesize(SynthesizeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Chain model document (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Trajectory table (`t,q1,...,qn`, optional `dq1,...,dqn`).
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Angle threshold for a new synergy (rad).
    #[arg(long, default_value_t = 0.1)]
    pub delta_theta: f64,
    /// Velocity filter window (samples, odd). Unused when the table carries velocities.
    #[arg(long, default_value_t = 21)]
    pub sg_window: usize,
    /// RK4 steps per geodesic.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Endpoint tolerance of the logarithmic map (rad).
    #[arg(long, default_value_t = 1e-10)]
    pub log_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Riemannian,
    Euclidean,
    Ik,
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Riemannian)]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, Args)]
pub struct RetargetArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Model document of the chain receiving the motion.
    #[arg(long)]
    pub target_model: PathBuf,
    /// Segments with a shorter joint-space chord are merged (rad).
    #[arg(long, default_value_t = 0.05)]
    pub merge_threshold: f64,
    /// Key-pose position tolerance (m).
    #[arg(long, default_value_t = 1e-3)]
    pub position_tolerance: f64,
    /// Key-pose orientation tolerance (rad).
    #[arg(long, default_value_t = 1e-2)]
    pub orientation_tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SynthesizeArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of geodesic synergies.
    #[arg(long, default_value_t = 3)]
    pub synergies: usize,
    /// Use a random spatial chain with this many joints instead of the planar 2-link arm.
    #[arg(long)]
    pub random_dof: Option<usize>,
    /// Sample period (s).
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// RK4 steps per geodesic.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
}
