use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Transient population estimation from geolocated mobility events.
#[derive(Parser)]
#[command(name = "transient-dyn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write reports to an output directory
    Run(RunArgs),
    /// Generate a synthetic event file with ground truth and a census baseline
    Synth(SynthArgs),
    /// Brute-force reference summary for small inputs (<= 50 persons, <= 200 events each)
    Oracle(OracleArgs),
}

/// Input and model flags shared by `run` and `oracle`.
#[derive(Args, Clone, Debug)]
pub struct ModelArgs {
    /// Input event files
    #[arg(long, num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,

    /// Input format: jsonl or csv
    #[arg(long, default_value = "jsonl")]
    pub format: String,

    /// Global damping constant in (0, 1]
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,

    /// Ping-pong suppression window in minutes (0 disables)
    #[arg(long, default_value_t = 15.0)]
    pub pingpong_window: f64,

    /// Cap on a single dwell interval in hours, or `inf`
    #[arg(long, default_value = "12")]
    pub max_dwell_cap: String,

    /// Grid cell size in degrees, for coordinate-only records and census cells
    #[arg(long, default_value_t = 0.05)]
    pub cell_size: f64,

    /// Night hours used for base inference, HH:HH in UTC
    #[arg(long, default_value = "21:06")]
    pub night_window: String,

    /// CSV `user,base_location` pinning bases
    #[arg(long)]
    pub bases: Option<PathBuf>,

    /// Observation window start (RFC 3339 or epoch seconds); defaults to the earliest event
    #[arg(long)]
    pub window_start: Option<String>,

    /// Observation window end (RFC 3339 or epoch seconds); defaults to the latest event
    #[arg(long)]
    pub window_end: Option<String>,
}

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Minimum distinct visitors for a transient location
    #[arg(long, default_value_t = 3)]
    pub min_unique_visitors: u64,

    /// Census population at or below which a cell counts as missing
    #[arg(long, default_value_t = 0.0)]
    pub absent_threshold: f64,

    /// Census baseline CSV (`#cell_size=` header, then `row,col,population`)
    #[arg(long)]
    pub census: Option<PathBuf>,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,

    /// Recorded in the manifest; the run itself is deterministic
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Clone, Debug)]
pub struct SynthArgs {
    /// Output directory for events.jsonl, ground_truth.json and census.csv
    #[arg(long)]
    pub out: PathBuf,

    /// JSON generator config; flags below override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub persons: Option<usize>,

    #[arg(long)]
    pub days: Option<u32>,

    #[arg(long)]
    pub transient_fraction: Option<f64>,

    #[arg(long)]
    pub pingpong_rate: Option<f64>,

    #[arg(long)]
    pub noise: Option<f64>,

    #[arg(long)]
    pub cell_size: Option<f64>,
}

#[derive(Args, Clone, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Write the summary here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Exit 2 is reserved for empty input, so usage errors map to 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };

    if let Ok(n) = std::env::var("TRANSIENT_DYN_THREADS") {
        match n.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: TRANSIENT_DYN_THREADS must be a positive integer, got `{n}`");
                return ExitCode::from(1);
            }
        }
    }

    let outcome = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Synth(args) => commands::synth(&args),
        Command::Oracle(args) => commands::oracle(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
