use std::fmt;
use std::str::FromStr;

use biqgemm::kernel::DEFAULT_BUDGET_BYTES;
use biqgemm::packing::{DEFAULT_MU, MAX_MU};

use crate::error::BenchError;

pub const DEFAULT_SEED: u64 = 0x5EED;

/// Multiply implementation measured by a benchmark record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Biqgemm,
    GemmDense,
    GemmUnpack,
    BandwidthProbe,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Biqgemm, Method::GemmDense, Method::GemmUnpack, Method::BandwidthProbe];

    pub fn name(self) -> &'static str {
        match self {
            Method::Biqgemm => "biqgemm",
            Method::GemmDense => "gemm_dense",
            Method::GemmUnpack => "gemm_unpack",
            Method::BandwidthProbe => "bandwidth_probe",
        }
    }

    /// Whether the method's output is numerically meaningful.
    pub fn is_correct(self) -> bool {
        self != Method::BandwidthProbe
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown method {s:?}")))
    }
}

/// Parses a size such as `512`, `1K` or `4k` (K = 1024).
pub fn parse_size(s: &str) -> Result<usize, BenchError> {
    let s = s.trim();
    let (digits, scale) = match s.strip_suffix(['k', 'K']) {
        Some(d) => (d, 1024),
        None => (s, 1),
    };
    digits.parse::<usize>().map(|v| v * scale).map_err(|_| BenchError::Config(format!("invalid size {s:?}")))
}

/// Parses a comma-separated list of sizes.
pub fn parse_list(s: &str) -> Result<Vec<usize>, BenchError> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_size).collect()
}

/// A sweep over the cartesian product of every list.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub b: Vec<usize>,
    pub beta: Vec<usize>,
    pub mu: Vec<usize>,
    pub threads: Vec<usize>,
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Table budget per tile; `None` uses the default, raised to one group's
    /// tables when a scenario needs more.
    pub budget_bytes: Option<usize>,
    pub deterministic: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            m: vec![1024],
            n: vec![1024],
            b: vec![32],
            beta: vec![1],
            mu: vec![DEFAULT_MU],
            threads: vec![1],
            methods: Method::ALL.to_vec(),
            repeats: 10,
            warmup: 3,
            seed: DEFAULT_SEED,
            budget_bytes: None,
            deterministic: false,
        }
    }
}

/// One point of the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub m: usize,
    pub n: usize,
    pub b: usize,
    pub beta: usize,
    pub mu: usize,
    pub threads: usize,
}

impl Scenario {
    /// Table budget for this scenario in bytes of `entry_bytes`-wide entries.
    pub fn budget(&self, config: &BenchConfig, entry_bytes: usize) -> Result<usize, BenchError> {
        let group_bytes = (self.b * entry_bytes) << self.mu;
        match config.budget_bytes {
            Some(budget) if budget < group_bytes => Err(BenchError::Config(format!(
                "budget of {budget} bytes cannot hold one group of tables ({group_bytes} bytes) at b={}, mu={}",
                self.b, self.mu
            ))),
            Some(budget) => Ok(budget),
            None => Ok(DEFAULT_BUDGET_BYTES.max(group_bytes)),
        }
    }
}

impl BenchConfig {
    /// Rejects empty sweeps, zero sizes and out-of-range LUT-units or budgets.
    pub fn validate(&self) -> Result<(), BenchError> {
        let lists = [
            ("m", &self.m),
            ("n", &self.n),
            ("b", &self.b),
            ("beta", &self.beta),
            ("mu", &self.mu),
            ("threads", &self.threads),
        ];
        for (name, list) in lists {
            if list.is_empty() {
                return Err(BenchError::Config(format!("--{name} needs at least one value")));
            }
            if list.contains(&0) {
                return Err(BenchError::Config(format!("--{name} values must be positive")));
            }
        }
        if let Some(&mu) = self.mu.iter().find(|&&mu| mu > MAX_MU) {
            return Err(BenchError::MuRange { mu, max: MAX_MU });
        }
        if self.beta.iter().any(|&b| b > u8::MAX as usize) {
            return Err(BenchError::Config("--beta must fit in 8 bits".into()));
        }
        if self.methods.is_empty() {
            return Err(BenchError::Config("no methods selected".into()));
        }
        if self.repeats == 0 {
            return Err(BenchError::Config("--repeats must be at least 1".into()));
        }
        for s in self.scenarios() {
            s.budget(self, 4)?;
        }
        Ok(())
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for &m in &self.m {
            for &n in &self.n {
                for &b in &self.b {
                    for &beta in &self.beta {
                        for &mu in &self.mu {
                            for &threads in &self.threads {
                                out.push(Scenario { m, n, b, beta, mu, threads });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}
