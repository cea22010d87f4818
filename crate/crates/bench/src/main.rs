use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pf_bench::{
    cmd_analysis, cmd_build_time, cmd_fpr, cmd_load_sweep, cmd_pd_stats, write_report, write_rows,
    BenchError, Format, WorkloadSpec, DEFAULT_N, DEFAULT_ROUNDS,
};
use prefix_filter::SpareKind;

#[derive(Parser)]
#[command(name = "pfbench", version, about = "Prefix filter measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// False-positive rate, spare traffic and space at full load.
    Fpr {
        #[command(flatten)]
        filter: FilterArgs,
        /// Negative queries to issue [default: n]
        #[arg(long)]
        queries: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Throughput and spare traffic as the filter fills up.
    LoadSweep {
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long, default_value_t = DEFAULT_ROUNDS)]
        rounds: u32,
        /// Queries of each kind per round [default: n / rounds]
        #[arg(long)]
        queries: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Wall-clock time to build a full filter.
    BuildTime {
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long, default_value_t = 5)]
        trials: u32,
        /// Use seed + t for trial t and count spare overflows instead of failing.
        #[arg(long)]
        vary_seed: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Expected spare load over a range of bin capacities.
    Analysis {
        #[arg(long, default_value_t = 1 << 30)]
        n: u64,
        #[arg(long, default_value_t = 16)]
        k_min: u64,
        #[arg(long, default_value_t = 64)]
        k_max: u64,
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.95")]
        alphas: Vec<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Search-path statistics for full pocket dictionaries.
    PdStats {
        #[arg(long, default_value_t = 1 << 20)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long, default_value_t = DEFAULT_N)]
    n: u64,
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
    /// bbf or exact
    #[arg(long, default_value_t = SpareKind::BlockedBloom)]
    spare: SpareKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Spare capacity as a multiple of the expected forward count
    #[arg(long)]
    spare_headroom: Option<f64>,
}

#[derive(Args)]
struct OutArgs {
    /// Write here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long, default_value = "csv")]
    format: Format,
}

impl FilterArgs {
    fn spec(&self) -> WorkloadSpec {
        WorkloadSpec {
            n: self.n,
            alpha: self.alpha,
            spare_kind: self.spare,
            seed: self.seed,
            spare_headroom: self.spare_headroom,
            ..WorkloadSpec::default()
        }
    }
}

impl OutArgs {
    fn sink(&self) -> Result<Box<dyn Write>, BenchError> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn run(cmd: Command) -> Result<(), BenchError> {
    match cmd {
        Command::Fpr { filter, queries, out } => {
            let spec = filter.spec();
            let r = cmd_fpr(&spec, queries.unwrap_or(spec.n))?;
            write_report(out.sink()?, "fpr", &r, out.format)
        }
        Command::LoadSweep { filter, rounds, queries, out } => {
            let mut spec = filter.spec();
            spec.rounds = rounds;
            spec.queries_per_round = queries.unwrap_or(spec.n / rounds.max(1) as u64);
            let rows = cmd_load_sweep(&spec)?;
            write_rows(out.sink()?, "load-sweep", &rows, out.format)
        }
        Command::BuildTime { filter, trials, vary_seed, out } => {
            let r = cmd_build_time(&filter.spec(), trials, vary_seed)?;
            match out.format {
                Format::Json => write_report(out.sink()?, "build-time", &r, out.format),
                Format::Csv => write_rows(out.sink()?, "build-time", &r.runs, out.format),
            }
        }
        Command::Analysis { n, k_min, k_max, alphas, out } => {
            let rows = cmd_analysis(n, k_min, k_max, &alphas)?;
            write_rows(out.sink()?, "analysis", &rows, out.format)
        }
        Command::PdStats { trials, seed, out } => {
            let r = cmd_pd_stats(trials, seed)?;
            write_report(out.sink()?, "pd-stats", &r, out.format)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pfbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
