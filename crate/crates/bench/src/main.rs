use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use biqgemm_bench::config::{parse_size, BenchConfig, Method, DEFAULT_SEED};
use biqgemm_bench::harness::{run_benchmark_with, write_csv};
use biqgemm_bench::verify::{verify, VerifyConfig};
use clap::Parser;

/// Lookup-table GEMM benchmarks. List flags take comma-separated values and
/// the whole cartesian product is run; sizes accept a K suffix (x1024).
#[derive(Debug, Parser)]
#[command(name = "biqgemm-bench", version)]
struct Cli {
    /// Output rows.
    #[arg(long, default_value = "1K", value_delimiter = ',', value_parser = parse_size_arg)]
    m: Vec<usize>,
    /// Input features.
    #[arg(long, default_value = "1K", value_delimiter = ',', value_parser = parse_size_arg)]
    n: Vec<usize>,
    /// Batch size.
    #[arg(long, default_value = "32", value_delimiter = ',', value_parser = parse_size_arg)]
    b: Vec<usize>,
    /// Quantization bits (sign planes).
    #[arg(long, default_value = "1", value_delimiter = ',', value_parser = parse_size_arg)]
    beta: Vec<usize>,
    /// LUT-unit: bits per key.
    #[arg(long, default_value = "8", value_delimiter = ',', value_parser = parse_size_arg)]
    mu: Vec<usize>,
    /// Worker threads.
    #[arg(long, default_value = "1", value_delimiter = ',', value_parser = parse_size_arg)]
    threads: Vec<usize>,
    /// Methods to run: biqgemm, gemm_dense, gemm_unpack, bandwidth_probe.
    #[arg(long, value_delimiter = ',', default_value = "biqgemm,gemm_dense,gemm_unpack,bandwidth_probe")]
    method: Vec<String>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Table bytes per tile. Defaults to 32K, raised to one group's tables if needed.
    #[arg(long, value_parser = parse_size_arg)]
    budget_bytes: Option<usize>,
    /// Fixed reduction order when running with several threads.
    #[arg(long)]
    deterministic: bool,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run the self-checks with the --mu and --seed values instead of benchmarking.
    #[arg(long)]
    verify: bool,
    /// Random cases per self-check.
    #[arg(long, default_value_t = 20)]
    cases: usize,
}

fn parse_size_arg(s: &str) -> Result<usize, String> {
    parse_size(s).map_err(|e| e.to_string())
}

fn run_verify(cli: Cli) -> anyhow::Result<bool> {
    let config = VerifyConfig { seed: cli.seed, mus: cli.mu, cases: cli.cases, ..Default::default() };
    let report = verify(&config)?;
    for c in &report.checks {
        println!("{:<20} {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    Ok(report.passed())
}

fn run_bench(cli: Cli) -> anyhow::Result<bool> {
    let methods = cli.method.iter().map(|s| s.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
    let config = BenchConfig {
        m: cli.m,
        n: cli.n,
        b: cli.b,
        beta: cli.beta,
        mu: cli.mu,
        threads: cli.threads,
        methods,
        repeats: cli.repeats,
        warmup: cli.warmup,
        seed: cli.seed,
        budget_bytes: cli.budget_bytes,
        deterministic: cli.deterministic,
    };
    let records = run_benchmark_with(&config, |r| {
        log::info!(
            "{} m={} n={} b={} beta={} mu={} threads={}: {} ns",
            r.method,
            r.m,
            r.n,
            r.b,
            r.beta,
            r.mu,
            r.threads,
            r.median_ns
        );
    })?;
    match &cli.csv {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&records, BufWriter::new(file))?;
        }
        None => write_csv(&records, io::stdout().lock())?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = if cli.verify { run_verify(cli) } else { run_bench(cli) };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
