use std::ops::{Add, AddAssign};
use std::time::Duration;

/// Exact tallies of the scalar work performed by a multiply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpCounters {
    /// Scalar operations spent filling lookup tables.
    pub lut_build_ops: u64,
    /// Table lookups, one per `(row, group, column, plane)`.
    pub lookups: u64,
    /// Additions into accumulators, including the per-plane scaling step.
    pub accumulate_ops: u64,
    /// Multiply-adds; only the dense baselines use these.
    pub fma_ops: u64,
}

impl Add for OpCounters {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            lut_build_ops: self.lut_build_ops + rhs.lut_build_ops,
            lookups: self.lookups + rhs.lookups,
            accumulate_ops: self.accumulate_ops + rhs.accumulate_ops,
            fma_ops: self.fma_ops + rhs.fma_ops,
        }
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Wall time split by kernel phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    /// Filling lookup tables.
    pub build: Duration,
    /// Retrieving and accumulating table entries.
    pub query: Duration,
    /// Staging input tiles and writing results back.
    pub replace: Duration,
}

impl PhaseTimes {
    pub fn total(&self) -> Duration {
        self.build + self.query + self.replace
    }

    /// Fraction of the profiled time spent in the query phase.
    pub fn query_share(&self) -> f64 {
        let total = self.total().as_secs_f64();
        if total == 0.0 {
            0.0
        } else {
            self.query.as_secs_f64() / total
        }
    }
}

impl AddAssign for PhaseTimes {
    fn add_assign(&mut self, rhs: Self) {
        self.build += rhs.build;
        self.query += rhs.query;
        self.replace += rhs.replace;
    }
}
