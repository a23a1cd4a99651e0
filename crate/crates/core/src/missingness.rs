//! Rank-one estimate of the sporadic observation probabilities and the
//! inverse-probability normalized, zero-filled observation matrix.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::types::{BlockPartition, MaskedMatrix};

/// Bounds applied to every estimated probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaClamp<T> {
    pub floor: T,
    pub cap: T,
}

impl<T: Scalar> Default for ThetaClamp<T> {
    fn default() -> Self {
        Self {
            floor: T::from_f64_lossy(1e-3),
            cap: T::one(),
        }
    }
}

impl<T: Scalar> ThetaClamp<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor > T::zero() && self.floor <= self.cap) {
            return Err(Error::InvalidParameter(format!(
                "theta clamp needs 0 < floor <= cap, got floor={}, cap={}",
                self.floor, self.cap
            )));
        }
        Ok(())
    }

    fn apply(&self, x: T) -> T {
        x.max(self.floor).min(self.cap)
    }
}

/// Estimated observation probabilities on the observable strips.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate<T> {
    /// `p1 × m2`, from the column strip.
    pub theta_col: Matrix<T>,
    /// `m1 × p2`, from the row strip.
    pub theta_row: Matrix<T>,
    /// `p1 × p2` combined estimate, zero on block 22.
    pub theta: Matrix<T>,
    /// Minimum of `theta` over the strips.
    pub theta0_hat: T,
}

impl<T: Scalar> ThetaEstimate<T> {
    /// Wraps a known probability matrix, bypassing estimation.
    pub fn from_known(theta: &Matrix<T>, partition: BlockPartition) -> Result<Self> {
        if theta.shape() != partition.shape() {
            return Err(Error::DimensionMismatch {
                context: "ThetaEstimate::from_known",
                expected: partition.shape(),
                found: theta.shape(),
            });
        }
        let (p1, p2, m1, m2) = (partition.p1(), partition.p2(), partition.m1(), partition.m2());
        let combined = Matrix::from_fn(p1, p2, |i, j| {
            if partition.in_strips(i, j) { theta[(i, j)] } else { T::zero() }
        });
        Ok(Self {
            theta_col: theta.submatrix(0..p1, 0..m2),
            theta_row: theta.submatrix(0..m1, 0..p2),
            theta0_hat: strip_min(&combined, partition),
            theta: combined,
        })
    }

    /// Every entry equal to `value` on the strips.
    pub fn constant(value: T, partition: BlockPartition) -> Result<Self> {
        Self::from_known(&Matrix::filled(partition.p1(), partition.p2(), value), partition)
    }
}

fn strip_min<T: Scalar>(theta: &Matrix<T>, partition: BlockPartition) -> T {
    theta
        .indexed()
        .filter(|&(i, j, _)| partition.in_strips(i, j))
        .fold(T::infinity(), |m, (_, _, x)| m.min(x))
}

/// Rank-one product-of-marginals estimate over one strip:
/// `row_sum(i) · col_sum(j) / total`.
fn strip_estimate<T: Scalar>(strip: &Matrix<T>, row_offset: usize, col_offset: usize) -> Result<Matrix<T>> {
    let (r, c) = strip.shape();
    let row_sums: Vec<T> = (0..r).map(|i| strip.row(i).iter().copied().sum()).collect();
    let mut col_sums = vec![T::zero(); c];
    for i in 0..r {
        for (s, &x) in col_sums.iter_mut().zip(strip.row(i)) {
            *s = *s + x;
        }
    }
    let total: T = row_sums.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::ZeroTotalMass);
    }
    if let Some(i) = row_sums.iter().position(|&s| !(s > T::zero())) {
        return Err(Error::EmptyRowOrColumn { axis: "row", index: i + row_offset });
    }
    if let Some(j) = col_sums.iter().position(|&s| !(s > T::zero())) {
        return Err(Error::EmptyRowOrColumn { axis: "column", index: j + col_offset });
    }
    Ok(Matrix::from_fn(r, c, |i, j| row_sums[i] * col_sums[j] / total))
}

/// Unclamped estimate. `weights` is the mask as a nonnegative grid
/// (fractional grids are accepted so the rank-one identity can be checked).
pub fn estimate_theta_raw<T: Scalar>(weights: &Matrix<T>, partition: BlockPartition) -> Result<ThetaEstimate<T>> {
    estimate_with(weights, partition, |x| x)
}

/// Estimate with every strip entry clamped to `[floor, cap]`.
pub fn estimate_theta<T: Scalar>(
    weights: &Matrix<T>,
    partition: BlockPartition,
    clamp: ThetaClamp<T>,
) -> Result<ThetaEstimate<T>> {
    clamp.validate()?;
    estimate_with(weights, partition, |x| clamp.apply(x))
}

fn estimate_with<T: Scalar>(
    weights: &Matrix<T>,
    partition: BlockPartition,
    clamp: impl Fn(T) -> T,
) -> Result<ThetaEstimate<T>> {
    if weights.shape() != partition.shape() {
        return Err(Error::DimensionMismatch {
            context: "estimate_theta",
            expected: partition.shape(),
            found: weights.shape(),
        });
    }
    if let Some(&bad) = weights.iter().find(|&&w| !(w >= T::zero()) || !w.is_finite()) {
        return Err(Error::InvalidParameter(format!("mask weights must be finite and nonnegative, found {bad}")));
    }
    let (p1, p2, m1, m2) = (partition.p1(), partition.p2(), partition.m1(), partition.m2());
    let theta_col = strip_estimate(&weights.submatrix(0..p1, 0..m2), 0, 0)?.map(&clamp);
    let theta_row = strip_estimate(&weights.submatrix(0..m1, 0..p2), 0, 0)?.map(&clamp);
    let half = T::from_f64_lossy(0.5);
    let theta = Matrix::from_fn(p1, p2, |i, j| match (i < m1, j < m2) {
        (true, true) => {
            let (c, r) = (theta_col[(i, j)], theta_row[(i, j)]);
            T::one() / (half / c + half / r)
        }
        (true, false) => theta_row[(i, j)],
        (false, true) => theta_col[(i, j)],
        (false, false) => T::zero(),
    });
    Ok(ThetaEstimate {
        theta0_hat: strip_min(&theta, partition),
        theta_col,
        theta_row,
        theta,
    })
}

/// `Ỹ_ij = Y_ij M_ij / θ̂_ij` on the strips, zero on block 22.
pub fn normalize<T: Scalar>(y: &MaskedMatrix<T>, theta: &ThetaEstimate<T>) -> Result<Matrix<T>> {
    let partition = y.partition();
    if theta.theta.shape() != partition.shape() {
        return Err(Error::DimensionMismatch {
            context: "normalize",
            expected: partition.shape(),
            found: theta.theta.shape(),
        });
    }
    let values = y.values();
    let mask = y.mask();
    Ok(Matrix::from_fn(partition.p1(), partition.p2(), |i, j| {
        if mask[(i, j)] && partition.in_strips(i, j) {
            values[(i, j)] / theta.theta[(i, j)]
        } else {
            T::zero()
        }
    }))
}
