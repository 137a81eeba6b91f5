//! Self-checks run by `--verify`. Each check compares the library against an
//! independent reference on seeded random cases and names the failing case.

use biqgemm::baselines::gemm_unpack;
use biqgemm::kernel::{biqgemm, biqgemm_plane, KernelConfig, TileShape};
use biqgemm::lut::{build_lut_dp, build_lut_naive, LutLayout};
use biqgemm::model_io::{self, Footprint};
use biqgemm::packing::{pack_keys, pack_plane_words, BinaryPlane, KeyMatrix};
use biqgemm::quantizer::{dequantize, quantization_error, quantize_greedy, QuantizedLinear};
use biqgemm::{DenseMatrix, Real};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::DEFAULT_SEED;
use crate::data;
use crate::error::BenchError;

/// Largest LUT-unit the exhaustive checks accept.
pub const VERIFY_MAX_MU: usize = 8;

pub type KeyPacker = fn(&BinaryPlane, usize) -> biqgemm::Result<KeyMatrix>;

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub mus: Vec<usize>,
    /// Random cases per check.
    pub cases: usize,
    /// Packing routine under test; swapped out by the self-tests.
    pub key_packer: KeyPacker,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, mus: vec![1, 2, 4, 8], cases: 20, key_packer: pack_keys }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

type Check = fn(&VerifyConfig, &mut ChaCha8Rng) -> Result<String, String>;

const CHECKS: [(&str, Check); 10] = [
    ("codec_bijection", codec_bijection),
    ("lut_dp_vs_naive", lut_dp_vs_naive),
    ("oracle_equivalence", oracle_equivalence),
    ("counter_laws", counter_laws),
    ("complexity_ratio", complexity_ratio),
    ("tiling_determinism", tiling_determinism),
    ("quantizer_monotone", quantizer_monotone),
    ("model_round_trip", model_round_trip),
    ("footprint", footprint),
    ("unpack_cross_path", unpack_cross_path),
];

pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|(n, _)| *n)
}

/// Runs every check. Configuration errors are returned before any check runs;
/// check failures are reported, not returned.
pub fn verify(config: &VerifyConfig) -> Result<VerifyReport, BenchError> {
    if config.mus.is_empty() {
        return Err(BenchError::Config("verification needs at least one LUT-unit".into()));
    }
    if let Some(&mu) = config.mus.iter().find(|&&mu| mu == 0 || mu > VERIFY_MAX_MU) {
        return Err(BenchError::MuRange { mu, max: VERIFY_MAX_MU });
    }
    if config.cases == 0 {
        return Err(BenchError::Config("verification needs at least one case".into()));
    }
    let mut checks = Vec::with_capacity(CHECKS.len());
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        // Each check gets its own stream so failures reproduce in isolation.
        let mut rng = data::rng(config.seed.wrapping_add(i as u64));
        let (passed, detail) = match check(config, &mut rng) {
            Ok(d) => (true, d),
            Err(d) => (false, format!("{d} (seed {})", config.seed)),
        };
        log::info!("{name}: {} {detail}", if passed { "ok" } else { "FAILED" });
        checks.push(CheckResult { name, passed, detail });
    }
    Ok(VerifyReport { checks })
}

fn random_plane(rng: &mut impl Rng, m: usize, n: usize) -> BinaryPlane {
    BinaryPlane::from_fn(m, n, |_, _| rng.random_bool(0.5))
}

fn shape(rng: &mut impl Rng, max_m: usize, max_n: usize, max_b: usize) -> (usize, usize, usize) {
    (rng.random_range(1..=max_m), rng.random_range(1..=max_n), rng.random_range(1..=max_b))
}

/// Reference `Σ_i α_i ∘ (B_i · X)` from element reads, in f64.
fn reference_product<T: Real>(q: &QuantizedLinear<T>, x: &DenseMatrix<T>) -> DenseMatrix<f64> {
    let (m, n, b) = (q.m(), q.n(), x.cols());
    DenseMatrix::from_fn(m, b, |r, c| {
        let mut acc = 0.0;
        for (plane, alpha) in q.planes().iter().zip(q.alphas()) {
            let dot: f64 = (0..n).map(|k| plane.get(r, k) as f64 * x.get(k, c).as_f64()).sum();
            acc += alpha[r].as_f64() * dot;
        }
        acc
    })
}

fn rel_error(y: &DenseMatrix<f64>, reference: &DenseMatrix<f64>) -> f64 {
    let num: f64 = y.as_slice().iter().zip(reference.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = reference.as_slice().iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn codec_bijection(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut planes = 0;
    for &mu in &cfg.mus {
        for _ in 0..cfg.cases {
            let (m, n, _) = shape(rng, 16, 70, 1);
            let plane = random_plane(rng, m, n);
            let fail = |why: String| format!("m={m} n={n} mu={mu}: {why}");
            let keys = (cfg.key_packer)(&plane, mu).map_err(|e| fail(e.to_string()))?;
            let groups = n.div_ceil(mu);
            if (keys.m(), keys.n(), keys.mu(), keys.groups()) != (m, n, mu, groups) {
                return Err(fail("key matrix has the wrong shape".into()));
            }
            for r in 0..m {
                for g in 0..groups {
                    let expected: u32 =
                        (0..mu).filter(|&t| g * mu + t < n && plane.is_positive(r, g * mu + t)).map(|t| 1 << t).sum();
                    let got = keys.key(r, g) as u32;
                    if got != expected {
                        return Err(fail(format!("row {r} group {g}: key {got}, expected {expected}")));
                    }
                }
            }
            if keys.to_plane() != plane {
                return Err(fail("unpacking keys does not restore the plane".into()));
            }
            planes += 1;
        }
    }
    Ok(format!("{planes} planes"))
}

fn lut_dp_vs_naive(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<String, String> {
    for &mu in &cfg.mus {
        for case in 0..cfg.cases {
            let x: Vec<f64> = (0..mu).map(|_| rng.random_range(-4.0..4.0)).collect();
            let dp = build_lut_dp(&x).map_err(|e| e.to_string())?;
            let naive = build_lut_naive(&x).map_err(|e| e.to_string())?;
            // Direct evaluation, independent of both builders.
            for key in 0..1usize << mu {
                let direct: f64 = (0..mu).map(|t| if key >> t & 1 == 1 { x[t] } else { -x[t] }).sum();
                let scale = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
                for (name, v) in [("dp", dp[key]), ("naive", naive[key])] {
                    if (v - direct).abs() > 1e-12 * scale {
                        return Err(format!("mu={mu} case {case} key {key}: {name} {v} vs {direct}"));
                    }
                }
                let comp = (1 << mu) - 1 - key;
                if dp[comp].to_bits() != (-dp[key]).to_bits() {
                    return Err(format!("mu={mu} case {case}: entry {comp} is not the negation of entry {key}"));
                }
            }
        }
    }
    Ok(format!("{} vectors", cfg.mus.len() * cfg.cases))
}

fn oracle_equivalence(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst64 = 0.0f64;
    let mut worst32 = 0.0f64;
    for case in 0..cfg.cases {
        let (m, n, b) = shape(rng, 48, 64, 8);
        let mu = cfg.mus[case % cfg.mus.len()];
        let beta = rng.random_range(1..=3);
        let fail = |why: String| format!("m={m} n={n} b={b} beta={beta} mu={mu}: {why}");
        let w = data::uniform_weights::<f64>(rng, m, n);
        let x = data::normal_inputs::<f64>(rng, n, b);

        let q = quantize_greedy(&w, beta).map_err(|e| fail(e.to_string()))?;
        let packed = q.pack(mu).map_err(|e| fail(e.to_string()))?;
        let y = biqgemm(&packed, &x, &KernelConfig::default()).map_err(|e| fail(e.to_string()))?;
        let err = rel_error(&y.y, &reference_product(&q, &x));
        worst64 = worst64.max(err);
        if err > 1e-12 {
            return Err(fail(format!("f64 relative error {err:e}")));
        }

        let (w32, x32) = (w.convert::<f32>(), x.convert::<f32>());
        let q32 = quantize_greedy(&w32, beta).map_err(|e| fail(e.to_string()))?;
        let y32 = biqgemm(&q32.pack(mu).map_err(|e| fail(e.to_string()))?, &x32, &KernelConfig::default())
            .map_err(|e| fail(e.to_string()))?;
        let err = rel_error(&y32.y.convert(), &reference_product(&q32, &x32));
        worst32 = worst32.max(err);
        if err > 1e-4 {
            return Err(fail(format!("f32 relative error {err:e}")));
        }
    }
    Ok(format!("worst f64 {worst64:.1e}, f32 {worst32:.1e}"))
}

fn counter_laws(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<String, String> {
    for case in 0..cfg.cases {
        let (m, n, b) = shape(rng, 64, 96, 8);
        let mu = cfg.mus[case % cfg.mus.len()];
        let beta = rng.random_range(1..=3);
        let fail = |why: String| format!("m={m} n={n} b={b} beta={beta} mu={mu}: {why}");
        let w = data::uniform_weights::<f32>(rng, m, n);
        let x = data::normal_inputs::<f32>(rng, n, b);
        let packed = quantize_greedy(&w, beta).and_then(|q| q.pack(mu)).map_err(|e| fail(e.to_string()))?;
        let out = biqgemm(&packed, &x, &KernelConfig::default()).map_err(|e| fail(e.to_string()))?;
        let groups = n.div_ceil(mu) as u64;
        let (m, b, beta64) = (m as u64, b as u64, beta as u64);
        let lookups = m * groups * b * beta64;
        let builds = ((1u64 << mu) + mu as u64 - 1) * groups * b;
        let c = out.counters;
        if c.lookups != lookups {
            return Err(fail(format!("lookups {} expected {lookups}", c.lookups)));
        }
        if c.lut_build_ops != builds {
            return Err(fail(format!("table ops {} expected {builds}", c.lut_build_ops)));
        }
        if c.accumulate_ops != lookups + m * b * beta64 {
            return Err(fail(format!("accumulate ops {}", c.accumulate_ops)));
        }
        if c.fma_ops != 0 {
            return Err(fail(format!("kernel reported {} multiply-adds", c.fma_ops)));
        }
    }
    Ok(format!("{} shapes", cfg.cases))
}

fn complexity_ratio(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<String, String> {
    for &mu in &cfg.mus {
        let m = rng.random_range(1..=32);
        let n = mu * rng.random_range(1..=8);
        let b = rng.random_range(1..=4);
        let fail = |why: String| format!("m={m} n={n} b={b} mu={mu}: {why}");
        let plane = random_plane(rng, m, n);
        let x = data::normal_inputs::<f32>(rng, n, b);
        let words = pack_plane_words(&plane);
        let dense = gemm_unpack(&words, m, n, &x).map_err(|e| fail(e.to_string()))?;
        let keys = pack_keys(&plane, mu).map_err(|e| fail(e.to_string()))?;
        let lut = biqgemm_plane(&keys, &x, &KernelConfig::default()).map_err(|e| fail(e.to_string()))?;
        if dense.counters.fma_ops != mu as u64 * lut.counters.lookups {
            return Err(fail(format!("{} multiply-adds vs {} lookups", dense.counters.fma_ops, lut.counters.lookups)));
        }
    }
    Ok(format!("ratio = mu for mu in {:?}", cfg.mus))
}

fn tiling_determinism(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let cases = cfg.cases.min(10);
    for case in 0..cases {
        let (m, n, b) = (rng.random_range(8..=48), rng.random_range(16..=96), rng.random_range(1..=6));
        let mu = cfg.mus[case % cfg.mus.len()];
        let beta = rng.random_range(1..=2);
        let fail = |why: String| format!("m={m} n={n} b={b} beta={beta} mu={mu}: {why}");
        let w = data::uniform_weights::<f32>(rng, m, n);
        let x = data::normal_inputs::<f32>(rng, n, b);
        let packed = quantize_greedy(&w, beta).and_then(|q| q.pack(mu)).map_err(|e| fail(e.to_string()))?;
        let groups = packed.groups();
        let base = biqgemm(&packed, &x, &KernelConfig::default()).map_err(|e| fail(e.to_string()))?;
        let tiles = [(1, 1), (groups.div_ceil(2), m.div_ceil(3)), (2, 5), (groups, m)];
        for (t_w, t_h) in tiles {
            for workers in [1, 2, 4] {
                let tile = TileShape::new(t_w.max(1), t_h.max(1)).map_err(|e| fail(e.to_string()))?;
                let cfg = KernelConfig::default().with_tile(tile).with_workers(workers).with_budget(usize::MAX);
                let out = biqgemm(&packed, &x, &cfg).map_err(|e| fail(e.to_string()))?;
                if !out.y.bitwise_eq(&base.y) {
                    return Err(fail(format!("tile {t_w}x{t_h} with {workers} workers differs")));
                }
            }
        }
        for layout in [LutLayout::TableMajor, LutLayout::KeyMajor] {
            let out =
                biqgemm(&packed, &x, &KernelConfig::default().with_layout(layout)).map_err(|e| fail(e.to_string()))?;
            if !out.y.bitwise_eq(&base.y) {
                return Err(fail(format!("{layout:?} layout differs")));
            }
        }
    }
    Ok(format!("{cases} shapes, 4 tiles, workers 1/2/4"))
}

fn quantizer_monotone(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<String, String> {
    for _ in 0..cfg.cases {
        let (m, n, _) = shape(rng, 16, 48, 1);
        let fail = |why: String| format!("m={m} n={n}: {why}");
        let w = data::uniform_weights::<f64>(rng, m, n);
        let q = quantize_greedy(&w, 4).map_err(|e| fail(e.to_string()))?;
        let mut prev = w.frobenius_norm();
        for beta in 1..=4 {
            let err = q.truncate(beta).and_then(|t| quantization_error(&w, &t)).map_err(|e| fail(e.to_string()))?;
            if err > prev + 1e-12 * w.frobenius_norm() {
                return Err(fail(format!("error rose to {err} at beta={beta} from {prev}")));
            }
            prev = err;
        }
        let one = q.truncate(1).map_err(|e| fail(e.to_string()))?;
        for r in 0..m {
            let mean = w.row(r).iter().map(|v| v.abs()).sum::<f64>() / n as f64;
            if (one.alphas()[0][r] - mean).abs() > 1e-12 * mean.max(1.0) {
                return Err(fail(format!("row {r}: alpha {} vs mean |w| {mean}", one.alphas()[0][r])));
            }
        }
    }
    Ok(format!("{} matrices", cfg.cases))
}

fn model_round_trip(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<String, String> {
    for case in 0..cfg.cases {
        let (m, n, _) = shape(rng, 24, 80, 1);
        let mu = cfg.mus[case % cfg.mus.len()];
        let beta = rng.random_range(1..=4);
        let fail = |why: String| format!("m={m} n={n} beta={beta} mu={mu}: {why}");
        let w = data::uniform_weights::<f32>(rng, m, n);
        let packed = quantize_greedy(&w, beta).and_then(|q| q.pack(mu)).map_err(|e| fail(e.to_string()))?;
        let bytes = model_io::save_packed(&packed).map_err(|e| fail(e.to_string()))?;
        if bytes.len() != model_io::encoded_len(m, n, beta, mu) {
            return Err(fail(format!("{} bytes written", bytes.len())));
        }
        let back = model_io::load::<f32>(&bytes).map_err(|e| fail(e.to_string()))?;
        if back != packed {
            return Err(fail("loaded model differs".into()));
        }
        if model_io::load::<f32>(&bytes[..bytes.len() - 1]).is_ok() {
            return Err(fail("truncated file was accepted".into()));
        }
    }
    Ok(format!("{} models", cfg.cases))
}

fn footprint(_: &VerifyConfig, _: &mut ChaCha8Rng) -> Result<String, String> {
    let expected = [(32, 1.049), (8, 0.262), (6, 0.197), (4, 0.131), (3, 0.098), (2, 0.066)];
    for (bits, mb) in expected {
        let got = model_io::megabytes(model_io::footprint(512, 512, bits));
        if (got * 1000.0).round() / 1000.0 != mb {
            return Err(format!("512x512 at {bits} bits: {got:.4} MB, expected {mb}"));
        }
    }
    let f = Footprint::new(512, 512, 18, 32, 32, 32);
    let act = (model_io::megabytes(f.activations) * 1000.0).round() / 1000.0;
    if act != 0.037 {
        return Err(format!("activations {act} MB, expected 0.037"));
    }
    let total = (model_io::megabytes(f.total()) * 1000.0).round() / 1000.0;
    if total != 1.122 {
        return Err(format!("total {total} MB, expected 1.122"));
    }
    Ok("512x512 table matches".into())
}

fn unpack_cross_path(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<String, String> {
    for case in 0..cfg.cases {
        let (m, n, b) = shape(rng, 40, 100, 6);
        let mu = cfg.mus[case % cfg.mus.len()];
        let fail = |why: String| format!("m={m} n={n} b={b} mu={mu}: {why}");
        let plane = random_plane(rng, m, n);
        let x = data::normal_inputs::<f64>(rng, n, b);
        let words = pack_plane_words(&plane);
        let unpacked = gemm_unpack(&words, m, n, &x).map_err(|e| fail(e.to_string()))?;
        let keys = (cfg.key_packer)(&plane, mu).map_err(|e| fail(e.to_string()))?;
        let lut = biqgemm_plane(&keys, &x, &KernelConfig::default()).map_err(|e| fail(e.to_string()))?;
        let err = rel_error(&lut.y, &unpacked.y);
        if err > 1e-12 {
            return Err(fail(format!("lookup and unpack paths differ by {err:e}")));
        }
        let dense = dequantize(
            &QuantizedLinear::new(vec![plane.clone()], vec![vec![1.0f64; m]]).map_err(|e| fail(e.to_string()))?,
        );
        if dense != plane.to_dense() {
            return Err(fail("unit-scale dequantization differs from the plane".into()));
        }
    }
    Ok(format!("{} planes", cfg.cases))
}
