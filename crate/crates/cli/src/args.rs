use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "sobotest", version, about = "Minimax regularity test in the Gaussian wavelet sequence model")]
pub struct Cli {
    /// Seed of every random stream; required by mc, verify and rate-curve.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for Monte-Carlo work; results do not depend on it.
    #[arg(long, global = true, env = "SOBOTEST_THREADS")]
    pub threads: Option<usize>,
    /// Omit the generation timestamp from CSV headers.
    #[arg(long, global = true)]
    pub no_meta: bool,
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Level and Sobolev norms of a coefficient file.
    Norms {
        file: PathBuf,
        /// Regularities at which to report Sobolev norms.
        #[arg(long = "r", value_delimiter = ',', default_value = "1")]
        r: Vec<f64>,
    },
    /// Projection onto the ℓ₂ Sobolev ball B_s(R).
    Project {
        file: PathBuf,
        #[arg(long)]
        s: f64,
        #[arg(long = "R")]
        radius: f64,
        #[arg(long, default_value_t = sobotest_core::DEFAULT_TOL)]
        tol: f64,
        /// Also write the projected coefficients to this file.
        #[arg(long)]
        projected: Option<PathBuf>,
    },
    /// Per-level constants and guarantee diagnostics.
    Schedule {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Runs the test on an observation file.
    RunTest {
        file: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Monte-Carlo rejection rate of a scenario.
    Mc {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 2000)]
        reps: u64,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Runs one of the lemma verification suites.
    Verify {
        #[arg(long, value_enum)]
        lemma: Lemma,
        /// Random profiles for the geometric suites.
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Replicates per scenario for the concentration suite.
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1")]
        deltas: Vec<f64>,
        /// Use the configuration flags for every trial instead of sampling
        /// random configurations.
        #[arg(long)]
        fixed_config: bool,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Lower-bound constants, prior and divergence checks.
    LowerBound {
        /// Sample size; defaults to max(N_eta, 10^4).
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = 2.0)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long = "R", default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
    },
    /// Minimal detectable amplitude over a grid of n and its log-log slope.
    RateCurve {
        #[arg(long, value_delimiter = ',', default_value = "4096,16384,65536,262144,1048576")]
        n_grid: Vec<u64>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0.1)]
        budget: f64,
        #[arg(long, default_value_t = 5000)]
        reps: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

/// Test configuration as flags, optionally layered over a JSON file.
#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Flat JSON with keys n, s, t, R, eta; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long = "R")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioArgs {
    #[arg(long, value_enum, required_unless_present = "scenario_file")]
    pub scenario: Option<ScenarioKind>,
    /// JSON scenario description, used instead of --scenario.
    #[arg(long, conflicts_with = "scenario")]
    pub scenario_file: Option<PathBuf>,
    /// Level of the boundary-null, two-level or prior signal.
    #[arg(long)]
    pub level: Option<u32>,
    /// Amplitude of the two-level profile.
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    /// Coefficient magnitude of the prior draw.
    #[arg(long)]
    pub v: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Zero,
    BoundaryNull,
    TwoLevel,
    Geometric,
    Prior,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma {
    Jpart2,
    Concentration,
    Transition,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}
