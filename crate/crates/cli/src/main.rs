use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use f3dc_bench::config::{DEFAULT_BENCH, DEFAULT_VERIFY};
use f3dc_bench::{csv_io, load_transform, BenchConfig, RunArgs};

#[derive(Parser)]
#[command(name = "f3dc", version, about = "Fast 3D transposed convolution: verification, models and benchmarks")]
struct Cli {
    /// Transform-set file; defaults to the built-in r=3, k=4, s=2 set.
    #[arg(long, global = true)]
    transform: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct SuiteArgs {
    /// TOML layer suite; defaults to the shipped one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides the config.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the report rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the fast path against both reference oracles.
    Verify(SuiteArgs),
    /// Multiplications per output for each method.
    Complexity {
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Analytical throughput of the multiplier array.
    Perf {
        /// Total DSP count, split evenly over the FPUs.
        #[arg(long)]
        dsp: Option<usize>,
        /// Clock in Hz.
        #[arg(long)]
        clock: Option<f64>,
        #[arg(long, default_value_t = 1700.0)]
        target_gops: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Median wall clock of the fast path and zero insertion.
    Bench {
        #[command(flatten)]
        suite: SuiteArgs,
        /// Overrides the config's repetition count.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Run one layer on tensors stored on disk.
    Run {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Use the zero-insertion reference instead of the fast path.
        #[arg(long)]
        oracle: bool,
    },
}

fn suite(args: &SuiteArgs, default: &str, ts: &f3dc_core::TransformSet) -> Result<(BenchConfig, usize)> {
    let mut cfg = match &args.config {
        Some(p) => BenchConfig::load(p, ts)?,
        None => BenchConfig::parse(default, ts)?,
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let threads = args.threads.unwrap_or(cfg.threads);
    Ok((cfg, threads))
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    let ts = load_transform(cli.transform.as_deref())?;
    match cli.cmd {
        Command::Verify(args) => {
            let (cfg, threads) = suite(&args, DEFAULT_VERIFY, &ts)?;
            let rep = f3dc_bench::cmd_verify(&cfg, &ts, threads)?;
            print!("{}", rep.render());
            if let Some(p) = args.csv {
                csv_io::write(p, &rep.rows)?;
            }
            Ok(rep.all_passed())
        }
        Command::Complexity { csv } => {
            let rep = f3dc_bench::cmd_complexity();
            print!("{}", rep.render());
            if let Some(p) = csv {
                csv_io::write(p, &rep.rows)?;
            }
            Ok(true)
        }
        Command::Perf { dsp, clock, target_gops, csv } => {
            let rep = f3dc_bench::cmd_perf(dsp, clock, target_gops)?;
            print!("{}", rep.render());
            if let Some(p) = csv {
                csv_io::write(p, &rep.rows)?;
            }
            Ok(true)
        }
        Command::Bench { suite: args, repetitions } => {
            let (mut cfg, threads) = suite(&args, DEFAULT_BENCH, &ts)?;
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            let rep = f3dc_bench::cmd_bench(&cfg, &ts, threads)?;
            print!("{}", rep.render());
            if let Some(p) = args.csv {
                csv_io::write(p, &rep.rows)?;
            }
            Ok(true)
        }
        Command::Run { input, weights, output, k, s, p, threads, oracle } => {
            let args = RunArgs { input, weights, output, k, s, p, oracle };
            print!("{}", f3dc_bench::cmd_run(&args, &ts, threads)?.render());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
