//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qsketch::measurement::MeasurementMode;
use qsketch::shadow::ShadowMode;
use qsketch::sketch::Flavor;

#[derive(Parser, Debug)]
#[command(name = "qsketch", version, about = "Sketch simulated quantum states and query them like a database")]
pub struct Cli {
    /// Root seed. The QDS_SEED environment variable overrides it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate Haar-random state files, optionally with a planted query.
    Gen(GenArgs),
    /// Add state files to a database, creating it if needed.
    Ingest(IngestArgs),
    /// Build the LSH index of a database.
    Index(IndexArgs),
    /// Sketch one state file.
    Sketch(SketchArgs),
    /// Build or query shadow seed matrices.
    #[command(subcommand)]
    Shadow(ShadowCommand),
    /// Approximate nearest-state search.
    Search(SearchArgs),
    /// Approximate join of two databases.
    Join(JoinArgs),
    /// Equality test by sketches, or by the swap-test baseline.
    Eqtest(EqtestArgs),
    /// Select records by the expectation of a local observable.
    Select(SelectArgs),
    /// Sort records by the expectation of a local observable.
    Sort(SortArgs),
    /// Seeded Monte Carlo benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Calibrate the ℓ1 constant c_tau.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub count: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `query.qds` at trace distance `--plant-distance` from this state.
    #[arg(long)]
    pub plant: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub plant_distance: f64,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub db: PathBuf,
    /// State files or directories of `.qds` files.
    #[arg(required = true)]
    pub states: Vec<PathBuf>,
    /// Metadata `key=value` attached to every ingested record.
    #[arg(long = "meta")]
    pub meta: Vec<String>,
    #[command(flatten)]
    pub create: CreateArgs,
}

/// Settings used only when the database is created.
#[derive(Args, Debug)]
pub struct CreateArgs {
    /// Engine configuration JSON; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub mode: Option<MeasurementMode>,
    #[arg(long)]
    pub flavor: Option<Flavor>,
    #[arg(long)]
    pub shadow_rows: Option<usize>,
    #[arg(long)]
    pub shadow_mode: Option<ShadowMode>,
    #[arg(long)]
    pub exact_sketches: bool,
    #[arg(long)]
    pub calibration_trials: Option<usize>,
    #[arg(long)]
    pub expected_records: Option<usize>,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub beta: f64,
    /// Number of hash tables L.
    #[arg(long = "tables", short = 'L')]
    pub tables: Option<usize>,
    /// Hash functions per table t.
    #[arg(long = "functions", short = 't')]
    pub functions: Option<usize>,
    /// Bucket width w.
    #[arg(long = "width", short = 'w')]
    pub width: Option<f64>,
    #[arg(long)]
    pub max_probes: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SketchArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sketch under this database's measurement.
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Outcome bins when no database is given.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value = "clifford")]
    pub mode: MeasurementMode,
    #[arg(long, default_value = "l2")]
    pub flavor: Flavor,
    /// Simulated copies; exact outcome probabilities when omitted.
    #[arg(long)]
    pub shots: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum ShadowCommand {
    /// Measure a state in random Pauli bases N times.
    Build {
        #[arg(long)]
        state: PathBuf,
        #[arg(long = "N", alias = "rows")]
        rows: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate an observable from a seed matrix.
    Estimate {
        /// Seed matrix file.
        #[arg(long = "shadow")]
        shadow: PathBuf,
        /// Observable text, or a file holding it.
        #[arg(long)]
        obs: String,
        #[arg(long, default_value = "cst")]
        mode: ShadowMode,
        /// Exact expectation on this state is reported alongside.
        #[arg(long)]
        state: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long, conflicts_with = "sketch", required_unless_present = "sketch")]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub sketch: Option<PathBuf>,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub beta: f64,
    /// Shadow-based reference search (n <= 8).
    #[arg(long, requires = "state")]
    pub via_selection: bool,
}

#[derive(Args, Debug)]
pub struct JoinArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub other: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub beta: f64,
}

#[derive(Args, Debug)]
pub struct EqtestArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, required_unless_present = "swap")]
    pub db: Option<PathBuf>,
    /// First record id.
    #[arg(long)]
    pub a: Option<u64>,
    /// Second record id.
    #[arg(long, conflicts_with = "state")]
    pub b: Option<u64>,
    /// Compare record `--a` against this state.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Swap-test baseline on two state files; consumes copies.
    #[arg(long, requires_all = ["state_a", "state_b"])]
    pub swap: bool,
    #[arg(long)]
    pub state_a: Option<PathBuf>,
    #[arg(long)]
    pub state_b: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[arg(long)]
    pub db: PathBuf,
    /// Observable text, or a file holding it.
    #[arg(long)]
    pub obs: String,
    #[arg(long, allow_negative_numbers = true)]
    pub eta: f64,
    #[arg(long)]
    pub eps: f64,
    /// Keep records with expectation near eta instead of above it.
    #[arg(long)]
    pub equality: bool,
}

#[derive(Args, Debug)]
pub struct SortArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub obs: String,
    #[arg(long)]
    pub eps: f64,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Calibrate for this database and store the result in it.
    #[arg(long, conflicts_with_all = ["n", "k"])]
    pub db: Option<PathBuf>,
    #[arg(long, required_unless_present = "db")]
    pub n: Option<usize>,
    #[arg(long, required_unless_present = "db")]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 300)]
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct BenchOutput {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the CSV here; stdout then carries the JSON summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum BenchCommand {
    /// 2-design moments of sampled Clifford columns.
    Moments {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[command(flatten)]
        output: BenchOutput,
    },
    /// Sketch-distance over trace-distance ratios.
    Distortion {
        #[arg(long, default_value_t = 1024)]
        d: usize,
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value = "l2")]
        flavor: Flavor,
        #[arg(long, default_value = "clifford")]
        mode: MeasurementMode,
        #[arg(long, default_value_t = 300)]
        calibration_trials: usize,
        #[command(flatten)]
        output: BenchOutput,
    },
    /// Sketch equality test on planted near and far pairs.
    Equality {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 4.0)]
        beta: f64,
        #[arg(long, default_value = "l2")]
        flavor: Flavor,
        #[command(flatten)]
        output: BenchOutput,
    },
    /// Planted-neighbor search.
    Search {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        queries: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 4.0)]
        beta: f64,
        #[command(flatten)]
        output: BenchOutput,
    },
    /// Paired-clone join.
    Join {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        matched: usize,
        #[arg(long, default_value_t = 900)]
        decoys: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 4.0)]
        beta: f64,
        #[command(flatten)]
        output: BenchOutput,
    },
    /// Shadow estimation accuracy.
    Shadow {
        #[arg(long, default_value = "cst")]
        mode: ShadowMode,
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Observable locality.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Seed rows; the sample bound is used when omitted.
        #[arg(long = "N")]
        rows: Option<usize>,
        #[command(flatten)]
        output: BenchOutput,
    },
    /// Selection and sorting audit for Z0 Z1.
    Selection {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        m: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eta: f64,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value = "cst")]
        mode: ShadowMode,
        #[command(flatten)]
        output: BenchOutput,
    },
    /// Swap-test acceptance frequencies.
    Swap {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[command(flatten)]
        output: BenchOutput,
    },
    /// Tabulated pair distances and the density identity.
    Table {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[command(flatten)]
        output: BenchOutput,
    },
}
