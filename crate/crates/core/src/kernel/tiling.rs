use crate::error::{Error, Result};

/// Working-set budget per worker, sized for a typical 32 KiB L1 data cache.
pub const DEFAULT_BUDGET_BYTES: usize = 32 * 1024;

/// Bytes per stored key.
pub const KEY_BYTES: usize = std::mem::size_of::<u16>();

/// Tile extents: `t_w` groups of tables by `t_h` key-matrix rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TileShape {
    pub t_w: usize,
    pub t_h: usize,
}

impl TileShape {
    pub fn new(t_w: usize, t_h: usize) -> Result<Self> {
        if t_w == 0 || t_h == 0 {
            return Err(Error::InvalidTile { t_w, t_h });
        }
        Ok(Self { t_w, t_h })
    }

    /// Bytes of lookup tables held live for one tile.
    pub fn lut_bytes(&self, mu: usize, batch: usize, entry_bytes: usize) -> usize {
        (self.t_w * batch * entry_bytes) << mu
    }

    /// Fails when the tile's tables exceed `budget` bytes.
    pub fn check_budget(&self, mu: usize, batch: usize, entry_bytes: usize, budget: usize) -> Result<()> {
        let needed = self.lut_bytes(mu, batch, entry_bytes);
        if needed > budget {
            return Err(Error::TileExceedsBudget { t_w: self.t_w, t_h: self.t_h, needed, budget });
        }
        Ok(())
    }

    /// The shape with both extents clamped to the problem size.
    pub fn clamp(&self, rows: usize, groups: usize) -> Self {
        Self { t_w: self.t_w.min(groups).max(1), t_h: self.t_h.min(rows).max(1) }
    }
}

/// Loop nesting used by the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Traversal {
    /// Tables for a group range are built once, every row tile consumes them,
    /// then they are discarded.
    LutStationary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TilePlan {
    pub shape: TileShape,
    pub order: Traversal,
}

/// Picks the widest tile whose tables fit `budget`, and as many key rows as
/// fit a key tile of the same budget.
pub fn plan_tiles(
    m: usize,
    groups: usize,
    batch: usize,
    mu: usize,
    budget: usize,
    entry_bytes: usize,
) -> Result<TilePlan> {
    crate::packing::check_mu(mu)?;
    let group_bytes = (batch.max(1) * entry_bytes) << mu;
    if budget < group_bytes {
        return Err(Error::BudgetTooSmall { needed: group_bytes, budget });
    }
    let t_w = (budget / group_bytes).min(groups.max(1));
    let t_h = (budget / (t_w * KEY_BYTES)).clamp(1, m.max(1));
    Ok(TilePlan { shape: TileShape { t_w, t_h }, order: Traversal::LutStationary })
}
