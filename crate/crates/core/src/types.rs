//! Dimension-checked partition, mask and observation types.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Binary observation indicator grid.
pub type Mask = Matrix<bool>;

/// One of the four blocks of the permuted layout, with observable rows and
/// columns first and the structurally missing block at the bottom right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockId {
    B11,
    B12,
    B21,
    B22,
}

impl BlockId {
    pub const ALL: [BlockId; 4] = [BlockId::B11, BlockId::B12, BlockId::B21, BlockId::B22];
}

/// Sizes `(p1, p2)` of the full matrix and `(m1, m2)` of the observable
/// rows and columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockPartition {
    p1: usize,
    p2: usize,
    m1: usize,
    m2: usize,
}

impl BlockPartition {
    pub fn new(p1: usize, p2: usize, m1: usize, m2: usize) -> Result<Self> {
        if m1 == 0 || m1 > p1 {
            return Err(Error::InvalidPartition(format!(
                "need 1 <= m1 <= p1, got m1={m1}, p1={p1}"
            )));
        }
        if m2 == 0 || m2 > p2 {
            return Err(Error::InvalidPartition(format!(
                "need 1 <= m2 <= p2, got m2={m2}, p2={p2}"
            )));
        }
        Ok(Self { p1, p2, m1, m2 })
    }

    pub fn p1(&self) -> usize {
        self.p1
    }
    pub fn p2(&self) -> usize {
        self.p2
    }
    pub fn m1(&self) -> usize {
        self.m1
    }
    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.p1, self.p2)
    }

    /// `m1 ∧ m2`, the largest rank the observable core can carry.
    pub fn max_rank(&self) -> usize {
        self.m1.min(self.m2)
    }

    pub fn has_structured_block(&self) -> bool {
        self.m1 < self.p1 && self.m2 < self.p2
    }

    pub fn ranges(&self, id: BlockId) -> (Range<usize>, Range<usize>) {
        let top = 0..self.m1;
        let bottom = self.m1..self.p1;
        let left = 0..self.m2;
        let right = self.m2..self.p2;
        match id {
            BlockId::B11 => (top, left),
            BlockId::B12 => (top, right),
            BlockId::B21 => (bottom, left),
            BlockId::B22 => (bottom, right),
        }
    }

    pub fn block_of(&self, i: usize, j: usize) -> BlockId {
        match (i < self.m1, j < self.m2) {
            (true, true) => BlockId::B11,
            (true, false) => BlockId::B12,
            (false, true) => BlockId::B21,
            (false, false) => BlockId::B22,
        }
    }

    /// True for entries in an observable row or an observable column.
    pub fn in_strips(&self, i: usize, j: usize) -> bool {
        i < self.m1 || j < self.m2
    }
}

/// Row/column reordering from the natural order into block layout.
/// `rows[k]` is the original index of layout row `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutMap {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl LayoutMap {
    pub fn identity(p1: usize, p2: usize) -> Self {
        Self {
            rows: (0..p1).collect(),
            cols: (0..p2).collect(),
        }
    }

    /// Moves the listed rows and columns to the end, preserving relative
    /// order on both sides, and returns the map with the derived partition.
    pub fn from_missing(
        p1: usize,
        p2: usize,
        missing_rows: &[usize],
        missing_cols: &[usize],
    ) -> Result<(Self, BlockPartition)> {
        let rows = split_order(p1, missing_rows, "row")?;
        let cols = split_order(p2, missing_cols, "column")?;
        let part = BlockPartition::new(p1, p2, p1 - missing_rows.len(), p2 - missing_cols.len())?;
        Ok((Self { rows, cols }, part))
    }

    /// Natural-order grid → block-layout grid.
    pub fn to_layout<T: Copy>(&self, m: &Matrix<T>) -> Matrix<T> {
        m.permuted(&self.rows, &self.cols)
    }

    /// Block-layout grid → natural-order grid.
    pub fn to_original<T: Copy>(&self, m: &Matrix<T>) -> Matrix<T> {
        let mut inv_r = vec![0; self.rows.len()];
        for (k, &r) in self.rows.iter().enumerate() {
            inv_r[r] = k;
        }
        let mut inv_c = vec![0; self.cols.len()];
        for (k, &c) in self.cols.iter().enumerate() {
            inv_c[c] = k;
        }
        m.permuted(&inv_r, &inv_c)
    }
}

fn split_order(n: usize, missing: &[usize], what: &str) -> Result<Vec<usize>> {
    let mut flag = vec![false; n];
    for &k in missing {
        if k >= n {
            return Err(Error::InvalidPartition(format!("{what} index {k} out of range 0..{n}")));
        }
        if flag[k] {
            return Err(Error::InvalidPartition(format!("{what} index {k} listed twice")));
        }
        flag[k] = true;
    }
    let mut order: Vec<usize> = (0..n).filter(|&k| !flag[k]).collect();
    order.extend((0..n).filter(|&k| flag[k]));
    Ok(order)
}

/// Observed values, observation mask and block partition, already in block
/// layout. Unobserved values are stored as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix<T> {
    values: Matrix<T>,
    mask: Mask,
    partition: BlockPartition,
    layout: Option<LayoutMap>,
}

impl<T: Scalar> MaskedMatrix<T> {
    pub fn new(values: Matrix<T>, mask: Mask, partition: BlockPartition) -> Result<Self> {
        if values.shape() != partition.shape() {
            return Err(Error::DimensionMismatch {
                context: "MaskedMatrix values",
                expected: partition.shape(),
                found: values.shape(),
            });
        }
        if mask.shape() != partition.shape() {
            return Err(Error::DimensionMismatch {
                context: "MaskedMatrix mask",
                expected: partition.shape(),
                found: mask.shape(),
            });
        }
        for (i, j, observed) in mask.indexed() {
            if !observed {
                continue;
            }
            if !partition.in_strips(i, j) {
                return Err(Error::StructuredBlockViolation { row: i, col: j });
            }
            if !values[(i, j)].is_finite() {
                return Err(Error::NonFiniteObservation { row: i, col: j });
            }
        }
        let values = values.zip_map(&mask, |v, m| if m { v } else { T::zero() })?;
        Ok(Self {
            values,
            mask,
            partition,
            layout: None,
        })
    }

    /// Attaches the map back to the natural ordering of the source data.
    pub fn with_layout(mut self, layout: LayoutMap) -> Result<Self> {
        if layout.rows.len() != self.partition.p1() || layout.cols.len() != self.partition.p2() {
            return Err(Error::DimensionMismatch {
                context: "MaskedMatrix layout",
                expected: self.partition.shape(),
                found: (layout.rows.len(), layout.cols.len()),
            });
        }
        self.layout = Some(layout);
        Ok(self)
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn partition(&self) -> BlockPartition {
        self.partition
    }

    pub fn layout(&self) -> Option<&LayoutMap> {
        self.layout.as_ref()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Mask as a 0/1 real grid.
    pub fn mask_weights(&self) -> Matrix<T> {
        self.mask.map(|m| if m { T::one() } else { T::zero() })
    }

    pub fn block_view(&self, id: BlockId) -> (Matrix<T>, Mask) {
        let (r, c) = self.partition.ranges(id);
        (
            self.values.submatrix(r.clone(), c.clone()),
            self.mask.submatrix(r, c),
        )
    }
}
