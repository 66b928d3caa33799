//! `billiard`: experiments on polygonal billiard tables.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 precision exhausted.

mod commands;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::run::Run;

#[derive(Parser, Debug)]
#[command(name = "billiard", version, about = "Complexity experiments for polygonal billiards")]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct PolygonArg {
    /// Polygon JSON file.
    #[arg(long)]
    pub polygon: PathBuf,
    /// Reverse clockwise input instead of rejecting it.
    #[arg(long)]
    pub fix_orientation: bool,
}

#[derive(Args, Debug, Clone)]
pub struct StartArg {
    /// Side label of the starting point.
    #[arg(long)]
    pub side: String,
    /// Arc length along that side.
    #[arg(long)]
    pub s: f64,
    /// Angle to the side, in (0, pi).
    #[arg(long)]
    pub theta: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Iterate the billiard map from a phase point.
    Simulate {
        #[command(flatten)]
        polygon: PolygonArg,
        #[command(flatten)]
        start: StartArg,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw the unfolding of a word and a line realizing it.
    Unfold {
        #[command(flatten)]
        polygon: PolygonArg,
        /// Side labels, e.g. ACAB (comma separated for longer labels).
        #[arg(long)]
        word: String,
        #[arg(long)]
        svg: PathBuf,
    },
    /// Word and saddle connection counts per length.
    Count {
        #[command(flatten)]
        polygon: PolygonArg,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Saddle connections sorted by length.
    Spectrum {
        #[command(flatten)]
        polygon: PolygonArg,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inradius brackets of the n-cells of a phase point.
    Cells {
        #[command(flatten)]
        polygon: PolygonArg,
        #[command(flatten)]
        start: StartArg,
        #[arg(long)]
        nmax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Liouville-measure experiments.
    #[command(subcommand)]
    Metric(MetricCommand),
    /// Perturbation experiments.
    #[command(subcommand)]
    Perturb(PerturbCommand),
    /// Pin the convention under which words count as summed connections.
    Identity {
        #[command(flatten)]
        polygon: PolygonArg,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum MetricCommand {
    /// Measure of the clearance sets B_a against a.
    BaCurve {
        #[command(flatten)]
        polygon: PolygonArg,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025, 0.0125])]
        a: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Balls about clear points lie inside their n-cells.
    Prop9 {
        #[command(flatten)]
        polygon: PolygonArg,
        /// Qualifying points wanted per n.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0.2)]
        a: f64,
        #[arg(long, default_value_t = 6)]
        nmax: usize,
        #[arg(long, default_value_t = 1_000_000)]
        max_draws: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-horizon shrinking-ball evidence.
    ThmEvidence {
        #[command(flatten)]
        polygon: PolygonArg,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// log2, pow0.1 or constN.
        #[arg(long, default_value = "log2")]
        f: String,
        #[arg(long, default_value_t = 20)]
        nmax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy Hamming-ball covers of sampled words.
    Cover {
        #[command(flatten)]
        polygon: PolygonArg,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1, 0.2, 0.3])]
        eps: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum PerturbCommand {
    /// Connections of the table survive random small perturbations.
    Persist {
        #[command(flatten)]
        polygon: PolygonArg,
        #[arg(long, default_value_t = 1e-4)]
        delta: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// New connections along a one-parameter family and their parent chains.
    Scan {
        /// Family JSON: base polygon, per-vertex displacement, grid.
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 20)]
        bisection_steps: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Angular margin around saddle chains.
    Theta {
        #[command(flatten)]
        polygon: PolygonArg,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// One chain; all chains when absent.
        #[arg(long)]
        chain_id: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Growth exponents of the table and of perturbed companions.
    Fit {
        #[command(flatten)]
        polygon: PolygonArg,
        #[arg(long, default_value_t = 16)]
        depth: usize,
        /// Fit window lo,hi; defaults to [depth/2, depth].
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-3])]
        delta: Vec<f64>,
        #[arg(long)]
        companion_depth: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    let bits = run::precision_bits_from_env()?;
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let mut run = Run::new(argv, cli.seed, bits, threads);
    match cli.command {
        Command::Simulate { polygon, start, steps, out } => commands::simulate(&mut run, &polygon, &start, steps, &out),
        Command::Unfold { polygon, word, svg } => commands::unfold(&mut run, &polygon, &word, &svg),
        Command::Count { polygon, depth, out } => commands::count(&mut run, &polygon, depth, &out),
        Command::Spectrum { polygon, depth, out } => commands::spectrum(&mut run, &polygon, depth, &out),
        Command::Cells { polygon, start, nmax, out } => commands::cells(&mut run, &polygon, &start, nmax, &out),
        Command::Metric(m) => commands::metric(&mut run, m),
        Command::Perturb(p) => commands::perturb(&mut run, p),
        Command::Identity { polygon, depth, out } => commands::identity(&mut run, &polygon, depth, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
