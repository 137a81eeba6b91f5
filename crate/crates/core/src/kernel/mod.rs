//! The lookup-table multiply.
//!
//! `Y = Σ_i α_i ∘ (B_i · X)` is evaluated without multiplying by signs: for
//! each group of `mu` input rows the kernel builds `2^mu`-entry tables of
//! every signed sum of the sub-vector, then each key of `B_i` selects one
//! entry per batch column. Tables are built once per group tile and shared by
//! every plane and every row tile before being discarded.
//!
//! Accumulation is in `f64` per `(row, plane, column)` cell and always runs
//! in ascending group order, so in deterministic mode the output is bitwise
//! independent of the tile shape and worker count.

mod counters;
mod tiling;

use std::time::Instant;

pub use counters::{OpCounters, PhaseTimes};
pub use tiling::{plan_tiles, TilePlan, TileShape, Traversal, DEFAULT_BUDGET_BYTES, KEY_BYTES};

use crate::error::{shape_mismatch, Error, Result};
use crate::lut::{stage_subvectors, LutBlock, LutBuilder, LutLayout};
use crate::matrix::{DenseMatrix, Real};
use crate::packing::KeyMatrix;
use crate::parallel;
use crate::quantizer::PackedLinear;

/// Execution settings for [`biqgemm`] and [`biqgemm_plane`].
#[derive(Clone, Debug, PartialEq)]
pub struct KernelConfig {
    /// Explicit tile; `None` lets [`plan_tiles`] choose.
    pub tile: Option<TileShape>,
    /// Bytes of lookup tables a tile may hold.
    pub budget_bytes: usize,
    /// Worker threads; 1 runs inline.
    pub workers: usize,
    /// Row-partitioned execution with a fixed reduction order. When false and
    /// `workers > 1`, the group axis is split across workers and partial
    /// outputs are summed afterwards.
    pub deterministic: bool,
    pub builder: LutBuilder,
    /// Table layout; `None` picks [`LutLayout::default_for`] the batch size.
    pub layout: Option<LutLayout>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            tile: None,
            budget_bytes: DEFAULT_BUDGET_BYTES,
            workers: 1,
            deterministic: true,
            builder: LutBuilder::Dp,
            layout: None,
        }
    }
}

impl KernelConfig {
    pub fn with_tile(mut self, tile: TileShape) -> Self {
        self.tile = Some(tile);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_budget(mut self, bytes: usize) -> Self {
        self.budget_bytes = bytes;
        self
    }

    pub fn with_layout(mut self, layout: LutLayout) -> Self {
        self.layout = Some(layout);
        self
    }

    pub fn with_builder(mut self, builder: LutBuilder) -> Self {
        self.builder = builder;
        self
    }

    pub fn deterministic(mut self, on: bool) -> Self {
        self.deterministic = on;
        self
    }
}

/// Result of a kernel call.
#[derive(Clone, Debug)]
pub struct GemmOutput<T> {
    pub y: DenseMatrix<T>,
    pub counters: OpCounters,
    /// Per-phase wall time; absent when the group axis was split across workers.
    pub phases: Option<PhaseTimes>,
    /// The tile actually used, after clamping to the problem size.
    pub tile: TileShape,
}

/// `B · X` for a single sign plane, without scaling.
pub fn biqgemm_plane<T: Real>(keys: &KeyMatrix, x: &DenseMatrix<T>, cfg: &KernelConfig) -> Result<GemmOutput<T>> {
    run(&[keys], None, x, cfg)
}

/// `Σ_i α_i ∘ (B_i · X)` over all planes of `q`, sharing each tile's tables
/// across planes.
pub fn biqgemm<T: Real>(q: &PackedLinear<T>, x: &DenseMatrix<T>, cfg: &KernelConfig) -> Result<GemmOutput<T>> {
    let planes: Vec<&KeyMatrix> = q.keys().iter().collect();
    run(&planes, Some(q.alphas()), x, cfg)
}

struct Problem<'a, T> {
    planes: &'a [&'a KeyMatrix],
    x: &'a DenseMatrix<T>,
    m: usize,
    mu: usize,
    groups: usize,
    batch: usize,
    layout: LutLayout,
    builder: LutBuilder,
    tile: TileShape,
}

fn validate<T: Real>(planes: &[&KeyMatrix], alphas: Option<&[Vec<T>]>, x: &DenseMatrix<T>) -> Result<()> {
    let first = planes.first().ok_or(Error::InvalidBeta)?;
    for (i, k) in planes.iter().enumerate() {
        if (k.m(), k.n(), k.mu(), k.groups()) != (first.m(), first.n(), first.mu(), first.groups()) {
            return Err(Error::InconsistentPlanes(format!("plane {i} differs in shape or LUT-unit from plane 0")));
        }
    }
    if let Some(alphas) = alphas {
        if alphas.len() != planes.len() || alphas.iter().any(|a| a.len() != first.m()) {
            return Err(Error::InconsistentPlanes("scaling vectors do not match planes".into()));
        }
    }
    if first.m() == 0 || x.cols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let max_rows = first.groups() * first.mu();
    if x.rows() < first.n() || x.rows() > max_rows {
        return Err(shape_mismatch(
            format!("input with {}..={max_rows} rows", first.n()),
            format!("{} rows", x.rows()),
        ));
    }
    Ok(())
}

fn run<T: Real>(
    planes: &[&KeyMatrix],
    alphas: Option<&[Vec<T>]>,
    x: &DenseMatrix<T>,
    cfg: &KernelConfig,
) -> Result<GemmOutput<T>> {
    validate(planes, alphas, x)?;
    let (m, mu, groups, batch) = (planes[0].m(), planes[0].mu(), planes[0].groups(), x.cols());

    let tile = match cfg.tile {
        Some(t) => TileShape::new(t.t_w, t.t_h)?.clamp(m, groups),
        None => plan_tiles(m, groups, batch, mu, cfg.budget_bytes, T::BYTES)?.shape,
    };
    tile.check_budget(mu, batch, T::BYTES, cfg.budget_bytes)?;

    let problem = Problem {
        planes,
        x,
        m,
        mu,
        groups,
        batch,
        layout: cfg.layout.unwrap_or_else(|| LutLayout::default_for(batch)),
        builder: cfg.builder,
        tile,
    };

    let workers = cfg.workers.max(1);
    let split_groups = !cfg.deterministic && workers > 1 && parallel::PARALLEL_ENABLED;
    let (acc, mut counters, mut phases) = parallel::with_workers(workers, || {
        if split_groups {
            let (acc, counters) = accumulate_split(&problem, workers);
            (acc, counters, None)
        } else {
            let (acc, counters, phases) = accumulate_rows(&problem, workers > 1);
            (acc, counters, Some(phases))
        }
    });

    let started = Instant::now();
    let (y, extra) = finish(&problem, alphas, &acc);
    counters.accumulate_ops += extra;
    if let Some(p) = phases.as_mut() {
        p.replace += started.elapsed();
    }
    Ok(GemmOutput { y, counters, phases, tile })
}

/// Deterministic path: tables built once per group tile, row tiles processed
/// by whichever worker owns them.
fn accumulate_rows<T: Real>(p: &Problem<'_, T>, parallel: bool) -> (Vec<f64>, OpCounters, PhaseTimes) {
    let beta = p.planes.len();
    let cell = beta * p.batch;
    let mut acc = vec![0.0f64; p.m * cell];
    let mut lut = LutBlock::with_capacity(p.mu, p.tile.t_w, p.batch, p.layout);
    let mut staged = Vec::new();
    let mut counters = OpCounters::default();
    let mut phases = PhaseTimes::default();

    for g0 in (0..p.groups).step_by(p.tile.t_w) {
        let g1 = (g0 + p.tile.t_w).min(p.groups);

        let t = Instant::now();
        stage_subvectors(p.x, g0..g1, p.mu, &mut staged);
        let t_staged = Instant::now();
        counters.lut_build_ops += lut.rebuild(&staged, g1 - g0, p.builder, parallel);
        let t_built = Instant::now();

        let lut = &lut;
        parallel::for_each_chunk_mut(&mut acc, p.tile.t_h * cell, parallel, |ti, rows| {
            query_rows(p, lut, g0..g1, ti * p.tile.t_h, rows);
        });
        let t_queried = Instant::now();

        let trips = ((g1 - g0) * p.m * p.batch * beta) as u64;
        counters.lookups += trips;
        counters.accumulate_ops += trips;

        phases.replace += t_staged - t;
        phases.build += t_built - t_staged;
        phases.query += t_queried - t_built;
    }
    (acc, counters, phases)
}

/// Split path: each worker owns a contiguous range of group tiles and a full
/// partial accumulator; partials are summed in worker order.
fn accumulate_split<T: Real>(p: &Problem<'_, T>, workers: usize) -> (Vec<f64>, OpCounters) {
    let beta = p.planes.len();
    let cell = beta * p.batch;
    let tiles = p.groups.div_ceil(p.tile.t_w);
    let per_worker = tiles.div_ceil(workers);
    let ranges: Vec<(usize, usize)> = (0..workers)
        .map(|w| {
            let t0 = (w * per_worker).min(tiles);
            let t1 = ((w + 1) * per_worker).min(tiles);
            (t0, t1)
        })
        .filter(|(a, b)| a < b)
        .collect();

    let partials = parallel::map_collect(&ranges, |&(t0, t1)| {
        let mut acc = vec![0.0f64; p.m * cell];
        let mut lut = LutBlock::with_capacity(p.mu, p.tile.t_w, p.batch, p.layout);
        let mut staged = Vec::new();
        let mut counters = OpCounters::default();
        for ti in t0..t1 {
            let g0 = ti * p.tile.t_w;
            let g1 = (g0 + p.tile.t_w).min(p.groups);
            stage_subvectors(p.x, g0..g1, p.mu, &mut staged);
            counters.lut_build_ops += lut.rebuild(&staged, g1 - g0, p.builder, false);
            for (rt, rows) in acc.chunks_mut(p.tile.t_h * cell).enumerate() {
                query_rows(p, &lut, g0..g1, rt * p.tile.t_h, rows);
            }
            let trips = ((g1 - g0) * p.m * p.batch * beta) as u64;
            counters.lookups += trips;
            counters.accumulate_ops += trips;
        }
        (acc, counters)
    });

    let mut iter = partials.into_iter();
    let (mut acc, mut counters) = iter.next().unwrap_or_else(|| (vec![0.0; p.m * cell], OpCounters::default()));
    for (partial, c) in iter {
        for (a, v) in acc.iter_mut().zip(partial) {
            *a += v;
        }
        counters += c;
        counters.accumulate_ops += (p.m * cell) as u64;
    }
    (acc, counters)
}

/// Accumulates table entries for rows `row0..` over `groups` into `acc`,
/// laid out `[row][plane][col]`.
#[inline]
fn query_rows<T: Real>(
    p: &Problem<'_, T>,
    lut: &LutBlock<T>,
    groups: std::ops::Range<usize>,
    row0: usize,
    acc: &mut [f64],
) {
    let (b, mu) = (p.batch, p.mu);
    let beta = p.planes.len();
    let rows = acc.len() / (beta * b);
    for rl in 0..rows {
        let r = row0 + rl;
        for (i, plane) in p.planes.iter().enumerate() {
            let keys = &plane.row(r)[groups.clone()];
            let cell = &mut acc[(rl * beta + i) * b..(rl * beta + i + 1) * b];
            match (p.layout, b) {
                (_, 1) => {
                    let mut sum = cell[0];
                    for (gl, &key) in keys.iter().enumerate() {
                        sum += lut.group_block(gl)[key as usize].as_f64();
                    }
                    cell[0] = sum;
                }
                (LutLayout::KeyMajor, _) => {
                    for (gl, &key) in keys.iter().enumerate() {
                        let k = key as usize * b;
                        let entries = &lut.group_block(gl)[k..k + b];
                        for (a, e) in cell.iter_mut().zip(entries) {
                            *a += e.as_f64();
                        }
                    }
                }
                (LutLayout::TableMajor, _) => {
                    for (gl, &key) in keys.iter().enumerate() {
                        let block = lut.group_block(gl);
                        for (c, a) in cell.iter_mut().enumerate() {
                            *a += block[(c << mu) + key as usize].as_f64();
                        }
                    }
                }
            }
        }
    }
}

/// Applies the per-row scaling and rounds once to the output precision.
/// Returns the output and the number of scaling additions performed.
fn finish<T: Real>(p: &Problem<'_, T>, alphas: Option<&[Vec<T>]>, acc: &[f64]) -> (DenseMatrix<T>, u64) {
    let (m, b, beta) = (p.m, p.batch, p.planes.len());
    let mut y = Vec::with_capacity(m * b);
    match alphas {
        None => {
            for r in 0..m {
                y.extend(acc[r * beta * b..r * beta * b + b].iter().map(|&v| T::from_f64(v)));
            }
            (DenseMatrix::from_raw(m, b, y), 0)
        }
        Some(alphas) => {
            for r in 0..m {
                for c in 0..b {
                    let mut v = 0.0f64;
                    for (i, alpha) in alphas.iter().enumerate() {
                        v += alpha[r].as_f64() * acc[(r * beta + i) * b + c];
                    }
                    y.push(T::from_f64(v));
                }
            }
            (DenseMatrix::from_raw(m, b, y), (m * b * beta) as u64)
        }
    }
}
