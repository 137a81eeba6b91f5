//! Timing harness: synthetic operands, warmup + median timing, CSV records.

use std::io::Write;
use std::time::{Duration, Instant};

use biqgemm::baselines::{gemm_bandwidth_probe, gemm_dense, gemm_unpack};
use biqgemm::kernel::{biqgemm, KernelConfig, OpCounters, PhaseTimes, TileShape};
use biqgemm::packing::pack_plane_words;
use biqgemm::parallel::with_workers;
use biqgemm::quantizer::{dequantize, quantize_greedy, PackedLinear, QuantizedLinear};
use biqgemm::DenseMatrix;
use serde::Serialize;

use crate::config::{BenchConfig, Method, Scenario};
use crate::data;
use crate::error::BenchError;

/// Runs `f` `warmup` times untimed, then `repeats` timed times.
/// Returns the sorted durations and the last result.
pub fn measure<R>(warmup: usize, repeats: usize, mut f: impl FnMut() -> R) -> (Vec<Duration>, R) {
    for _ in 0..warmup {
        std::hint::black_box(f());
    }
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        let r = std::hint::black_box(f());
        times.push(t.elapsed());
        last = Some(r);
    }
    times.sort_unstable();
    (times, last.unwrap())
}

pub fn median(sorted: &[Duration]) -> Duration {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2
    }
}

fn median_of(mut v: Vec<Duration>) -> Duration {
    v.sort_unstable();
    median(&v)
}

/// Operands for one scenario, generated from the seed.
pub struct Prepared {
    pub scenario: Scenario,
    pub weights: DenseMatrix<f32>,
    pub inputs: DenseMatrix<f32>,
    pub quantized: QuantizedLinear<f32>,
    pub packed: PackedLinear<f32>,
    pub plane_words: Vec<Vec<u32>>,
    pub dequantized: DenseMatrix<f32>,
}

impl Prepared {
    pub fn new(scenario: Scenario, seed: u64) -> Result<Self, BenchError> {
        let mut rng = data::rng(seed);
        let weights = data::uniform_weights(&mut rng, scenario.m, scenario.n);
        let inputs = data::normal_inputs(&mut rng, scenario.n, scenario.b);
        let quantized = quantize_greedy(&weights, scenario.beta)?;
        let packed = quantized.pack(scenario.mu)?;
        let plane_words = quantized.planes().iter().map(pack_plane_words).collect();
        let dequantized = dequantize(&quantized);
        Ok(Self { scenario, weights, inputs, quantized, packed, plane_words, dequantized })
    }
}

/// Timing and counters for one method on one scenario.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub method: Method,
    pub median: Duration,
    pub min: Duration,
    /// Per-phase medians (lookup kernel only).
    pub phases: Option<PhaseTimes>,
    pub counters: OpCounters,
    /// Sum of all output entries, for methods with meaningful output.
    pub checksum: Option<f64>,
    pub tile: Option<TileShape>,
}

fn checksum(y: &DenseMatrix<f32>) -> f64 {
    y.as_slice().iter().map(|&v| v as f64).sum()
}

/// Scales and sums per-plane outputs: `Σ_i α_i ∘ Y_i`.
fn combine_planes(alphas: &[Vec<f32>], outputs: &[DenseMatrix<f32>]) -> DenseMatrix<f32> {
    let (m, b) = outputs[0].shape();
    DenseMatrix::from_fn(m, b, |r, c| {
        let v: f64 = alphas.iter().zip(outputs).map(|(a, y)| a[r] as f64 * y.get(r, c) as f64).sum();
        v as f32
    })
}

impl Prepared {
    pub fn run(
        &self,
        method: Method,
        kernel: &KernelConfig,
        warmup: usize,
        repeats: usize,
    ) -> Result<Measurement, BenchError> {
        let s = self.scenario;
        let threads = kernel.workers;
        match method {
            Method::Biqgemm => {
                let mut phases = Vec::new();
                let mut error = None;
                let (times, out) = measure(warmup, repeats, || match biqgemm(&self.packed, &self.inputs, kernel) {
                    Ok(out) => {
                        phases.extend(out.phases);
                        Some(out)
                    }
                    Err(e) => {
                        error.get_or_insert(e);
                        None
                    }
                });
                if let Some(e) = error {
                    return Err(e.into());
                }
                let out = out.expect("kernel output");
                // Drop warmup samples.
                let phases = phases.split_off(phases.len().saturating_sub(repeats.max(1)));
                let phases = (phases.len() == times.len()).then(|| PhaseTimes {
                    build: median_of(phases.iter().map(|p| p.build).collect()),
                    query: median_of(phases.iter().map(|p| p.query).collect()),
                    replace: median_of(phases.iter().map(|p| p.replace).collect()),
                });
                Ok(Measurement {
                    method,
                    median: median(&times),
                    min: times[0],
                    phases,
                    counters: out.counters,
                    checksum: Some(checksum(&out.y)),
                    tile: Some(out.tile),
                })
            }
            Method::GemmDense => {
                let (times, out) =
                    measure(warmup, repeats, || with_workers(threads, || gemm_dense(&self.dequantized, &self.inputs)));
                let out = out?;
                Ok(Measurement {
                    method,
                    median: median(&times),
                    min: times[0],
                    phases: None,
                    counters: out.counters,
                    checksum: Some(checksum(&out.y)),
                    tile: None,
                })
            }
            Method::GemmUnpack | Method::BandwidthProbe => {
                let run_plane = |words: &[u32]| match method {
                    Method::GemmUnpack => gemm_unpack(words, s.m, s.n, &self.inputs),
                    _ => gemm_bandwidth_probe(words, s.m, s.n, &self.inputs),
                };
                let (times, out) = measure(warmup, repeats, || {
                    with_workers(threads, || -> biqgemm::Result<_> {
                        let mut counters = OpCounters::default();
                        let mut ys = Vec::with_capacity(s.beta);
                        for words in &self.plane_words {
                            let out = run_plane(words)?;
                            counters += out.counters;
                            ys.push(out.y);
                        }
                        Ok((combine_planes(self.quantized.alphas(), &ys), counters))
                    })
                });
                let (y, counters) = out?;
                Ok(Measurement {
                    method,
                    median: median(&times),
                    min: times[0],
                    phases: None,
                    counters,
                    checksum: method.is_correct().then(|| checksum(&y)),
                    tile: None,
                })
            }
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Record {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub b: usize,
    pub beta: usize,
    pub mu: usize,
    pub threads: usize,
    pub method: String,
    pub precision: &'static str,
    pub deterministic: bool,
    pub warmup: usize,
    pub repeats: usize,
    pub median_ns: u128,
    pub min_ns: u128,
    pub build_ns: Option<u128>,
    pub query_ns: Option<u128>,
    pub replace_ns: Option<u128>,
    pub query_share: Option<f64>,
    pub lut_build_ops: u64,
    pub lookups: u64,
    pub accumulate_ops: u64,
    pub fma_ops: u64,
    pub t_w: Option<usize>,
    pub t_h: Option<usize>,
    pub correct: bool,
    pub checksum: Option<f64>,
}

/// Kernel settings for one scenario.
pub fn kernel_config(config: &BenchConfig, scenario: &Scenario) -> Result<KernelConfig, BenchError> {
    Ok(KernelConfig::default()
        .with_budget(scenario.budget(config, 4)?)
        .with_workers(scenario.threads)
        .deterministic(config.deterministic))
}

/// Runs every scenario and method of the sweep, in order.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<Record>, BenchError> {
    run_benchmark_with(config, |_| {})
}

/// Like [`run_benchmark`], reporting each record as it completes.
pub fn run_benchmark_with(config: &BenchConfig, mut progress: impl FnMut(&Record)) -> Result<Vec<Record>, BenchError> {
    config.validate()?;
    let mut records = Vec::new();
    for scenario in config.scenarios() {
        let prepared = Prepared::new(scenario, config.seed)?;
        let kernel = kernel_config(config, &scenario)?;
        for &method in &config.methods {
            log::debug!("running {method} on {scenario:?}");
            let meas = prepared.run(method, &kernel, config.warmup, config.repeats)?;
            let record = Record {
                seed: config.seed,
                m: scenario.m,
                n: scenario.n,
                b: scenario.b,
                beta: scenario.beta,
                mu: scenario.mu,
                threads: scenario.threads,
                method: method.name().to_string(),
                precision: "f32",
                deterministic: config.deterministic,
                warmup: config.warmup,
                repeats: config.repeats,
                median_ns: meas.median.as_nanos(),
                min_ns: meas.min.as_nanos(),
                build_ns: meas.phases.map(|p| p.build.as_nanos()),
                query_ns: meas.phases.map(|p| p.query.as_nanos()),
                replace_ns: meas.phases.map(|p| p.replace.as_nanos()),
                query_share: meas.phases.map(|p| p.query_share()),
                lut_build_ops: meas.counters.lut_build_ops,
                lookups: meas.counters.lookups,
                accumulate_ops: meas.counters.accumulate_ops,
                fma_ops: meas.counters.fma_ops,
                t_w: meas.tile.map(|t| t.t_w),
                t_h: meas.tile.map(|t| t.t_h),
                correct: method.is_correct(),
                checksum: meas.checksum,
            };
            progress(&record);
            records.push(record);
        }
    }
    Ok(records)
}

/// Writes records as CSV with a header row.
pub fn write_csv<W: Write>(records: &[Record], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Column order of the CSV output.
pub const CSV_HEADER: &str = "seed,m,n,b,beta,mu,threads,method,precision,deterministic,warmup,repeats,\
median_ns,min_ns,build_ns,query_ns,replace_ns,query_share,lut_build_ops,lookups,accumulate_ops,fma_ops,\
t_w,t_h,correct,checksum";
