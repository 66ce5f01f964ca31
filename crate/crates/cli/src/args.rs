use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Multi-stage traffic-metadata inference against smart-home devices.
///
/// Every flag can also be set through an environment variable named
/// `HOMETRACE_<FLAG>` (for example `HOMETRACE_SEED`).
#[derive(Debug, Parser)]
#[command(name = "hometrace", version, about)]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "HOMETRACE_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled capture from a scenario.
    Simulate(SimulateArgs),
    /// Train stage models from a labeled capture.
    Train(TrainArgs),
    /// Run the attack cascade on a capture.
    Attack(AttackArgs),
    /// Measure attack degradation under spoofed-traffic injection.
    Defend(DefendArgs),
    /// Score predicted labels against truth.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario JSON file, or the name of a bundled scenario
    /// (benchmark, walking, defense).
    pub scenario: String,

    #[arg(long, env = "HOMETRACE_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Output capture directory.
    #[arg(long, env = "HOMETRACE_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageSel {
    All,
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
}

impl StageSel {
    pub fn includes(self, n: u8) -> bool {
        match self {
            StageSel::All => true,
            StageSel::One => n == 1,
            StageSel::Two => n == 2,
            StageSel::Three => n == 3,
            StageSel::Four => n == 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerKind {
    Knn,
    Rf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Labeled capture directory.
    pub capture: PathBuf,

    #[arg(long, value_enum, default_value = "all")]
    pub stage: StageSel,

    #[arg(long, env = "HOMETRACE_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Stage-1 window length in seconds.
    #[arg(long, env = "HOMETRACE_INTERVAL", default_value_t = 10.0)]
    pub interval: f64,

    /// Fixed stage-2 window in seconds; default is a quarter of each
    /// device's mean activity duration.
    #[arg(long, env = "HOMETRACE_WINDOW")]
    pub window: Option<f64>,

    /// Neighbours for kNN (stage 1, and stage 2 with `--learner knn`).
    #[arg(long, env = "HOMETRACE_K", default_value_t = 5)]
    pub k: usize,

    /// Trees per forest (stage 3, and stage 2 with `--learner rf`).
    #[arg(long, env = "HOMETRACE_TREES", default_value_t = 100)]
    pub trees: usize,

    /// HMM additive smoothing.
    #[arg(long, env = "HOMETRACE_ALPHA", default_value_t = 0.01)]
    pub alpha: f64,

    /// Stage-2 learner.
    #[arg(long, value_enum, default_value = "knn")]
    pub learner: LearnerKind,

    /// Snapshot grid step in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub grid: f64,

    /// Skip stage-3 feature selection.
    #[arg(long)]
    pub no_select: bool,

    /// Output model directory.
    #[arg(long, env = "HOMETRACE_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResumeFrom {
    #[value(name = "stage2")]
    Stage2,
    #[value(name = "stage3")]
    Stage3,
    #[value(name = "stage4")]
    Stage4,
}

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    /// Capture directory.
    pub capture: PathBuf,

    /// Directory written by `train`.
    #[arg(long)]
    pub models: PathBuf,

    /// Deployment map; defaults to `deployment.json` in the capture directory.
    #[arg(long)]
    pub deployment: Option<PathBuf>,

    /// Reuse the artifacts already in `--out` for the stages before this one.
    #[arg(long, value_enum)]
    pub resume_from: Option<ResumeFrom>,

    #[arg(long, env = "HOMETRACE_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DefendStage {
    Detection,
    Classification,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InjectWhere {
    Train,
    Test,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct DefendArgs {
    /// Scenario JSON file or bundled scenario name.
    pub scenario: String,

    /// Comma-separated injection rates, starting at 0.
    #[arg(long, env = "HOMETRACE_RATES", default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub rates: String,

    #[arg(long, env = "HOMETRACE_SEED", default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_enum, default_value = "both")]
    pub stage: DefendStage,

    /// Which split receives spoofed traffic.
    #[arg(long, value_enum, default_value = "both")]
    pub inject: InjectWhere,

    #[arg(long, env = "HOMETRACE_K", default_value_t = 5)]
    pub k: usize,

    #[arg(long, env = "HOMETRACE_TREES", default_value_t = 100)]
    pub trees: usize,

    #[arg(long, env = "HOMETRACE_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Predicted labels, one per line.
    #[arg(long)]
    pub predictions: PathBuf,

    /// True labels, one per line.
    #[arg(long)]
    pub truth: PathBuf,

    #[arg(long, env = "HOMETRACE_OUT")]
    pub out: PathBuf,
}
