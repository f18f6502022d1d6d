//! Grid partition of both images and block-pair matching by correspondence
//! counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CorrespondenceSet, ImageSize};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    /// Block pairs holding fewer correspondences are discarded.
    pub min_count: usize,
    /// Keep a pair only when the left block is also the best match of the
    /// right block.
    pub mutual_best: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rows: 5,
            cols: 5,
            min_count: 4,
            mutual_best: false,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config(format!("grid {}x{} is empty", self.rows, self.cols)));
        }
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn block_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Row-major id of the cell holding `p`. Cells have integer size
    /// `width / cols` by `height / rows`; the last row and column absorb the
    /// remainder.
    pub fn cell_of<T: Real>(&self, p: [T; 2], size: ImageSize) -> usize {
        let cell = |v: T, extent: u32, n: usize| -> usize {
            let step = (extent as usize / n).max(1);
            let v = v.to_f64_lossy().max(0.0);
            ((v / step as f64).floor() as usize).min(n - 1)
        };
        cell(p[1], size.height, self.rows) * self.cols + cell(p[0], size.width, self.cols)
    }
}

/// Block ids `(left, right)` of one correspondence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockIds {
    pub left: usize,
    pub right: usize,
}

/// A matched pair of blocks together with the correspondences located in it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPair {
    pub left_block: usize,
    pub right_block: usize,
    /// Positions into the correspondence set, ascending.
    pub members: Vec<usize>,
}

impl BlockPair {
    pub fn score(&self) -> usize {
        self.members.len()
    }
}

pub fn assign_blocks<T: Real>(set: &CorrespondenceSet<T>, cfg: &GridConfig) -> Vec<BlockIds> {
    set.items()
        .iter()
        .map(|c| BlockIds {
            left: cfg.cell_of(c.left.position, set.left_size()),
            right: cfg.cell_of(c.right.position, set.right_size()),
        })
        .collect()
}

/// Pairs every occupied left block with the right block holding most of its
/// correspondences (lowest id on ties), then drops pairs below `min_count`.
/// Output is ordered by left block id.
pub fn match_blocks(assignments: &[BlockIds], cfg: &GridConfig) -> Vec<BlockPair> {
    let mut cells: BTreeMap<BlockIds, Vec<usize>> = BTreeMap::new();
    for (pos, ids) in assignments.iter().enumerate() {
        cells.entry(*ids).or_default().push(pos);
    }

    // BTreeMap order is (left, right) ascending, so a strict `>` keeps the
    // lowest right id among equal counts.
    let mut best: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut best_left_of_right: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (ids, members) in &cells {
        let n = members.len();
        let e = best.entry(ids.left).or_insert((ids.right, n));
        if n > e.1 {
            *e = (ids.right, n);
        }
        let e = best_left_of_right.entry(ids.right).or_insert((ids.left, n));
        if n > e.1 {
            *e = (ids.left, n);
        }
    }

    best.into_iter()
        .filter(|&(_, (_, n))| n >= cfg.min_count)
        .filter(|&(left, (right, _))| !cfg.mutual_best || best_left_of_right[&right].0 == left)
        .map(|(left, (right, _))| BlockPair {
            left_block: left,
            right_block: right,
            members: cells.remove(&BlockIds { left, right }).unwrap_or_default(),
        })
        .collect()
}
