//! Weighted stacking and rotation, rank selection through the Schur
//! criterion, starting-rank choice and block assembly of the estimate.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::missingness::{estimate_theta, normalize, ThetaClamp, ThetaEstimate};
use crate::numerics::{
    complete_orthonormal, gauss_jordan_inverse, invert_leading, is_numerically_singular, singular_values,
    spectral_norm, spectral_norm_bracket, svd,
};
use crate::scalar::Scalar;
use crate::types::{BlockId, BlockPartition, MaskedMatrix};

/// How the starting rank of the downward search is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R0Mode {
    /// A fixed value, clipped to `m1 ∧ m2`.
    Fixed(usize),
    /// `m1 ∧ m2`.
    MinDims,
    /// Number of strip singular values clearing the hard-threshold levels.
    HsvtHeuristic,
}

/// Weight applied to `Ỹ11` when it is stacked with the off-diagonal blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackWeightMode {
    /// `((p − 2m) ∧ 0) / p`, as written in the algorithm.
    Literal,
    /// Always zero.
    Zeroed,
}

impl StackWeightMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            StackWeightMode::Literal => "literal",
            StackWeightMode::Zeroed => "zeroed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionOptions<T> {
    pub r0_mode: R0Mode,
    /// Multiplier on the hard-threshold levels.
    pub eta_const: T,
    /// Leading blocks with `sigma_min / sigma_max` below this are singular.
    pub singularity_rel_tol: T,
    pub stack_weight_mode: StackWeightMode,
    pub theta_clamp: ThetaClamp<T>,
}

impl<T: Scalar> Default for CompletionOptions<T> {
    fn default() -> Self {
        Self {
            r0_mode: R0Mode::MinDims,
            eta_const: T::from_f64_lossy(2.0),
            singularity_rel_tol: T::from_f64_lossy(T::SINGULARITY_TOL),
            stack_weight_mode: StackWeightMode::Literal,
            theta_clamp: ThetaClamp::default(),
        }
    }
}

impl<T: Scalar> CompletionOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_const > T::zero()) {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {}", self.eta_const)));
        }
        if !(self.singularity_rel_tol > T::zero() && self.singularity_rel_tol < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "singularity tolerance must lie in (0, 1), got {}",
                self.singularity_rel_tol
            )));
        }
        self.theta_clamp.validate()
    }
}

/// Column stack `[w1·Ỹ11; Ỹ21]` and row stack `[w2·Ỹ11, Ỹ12]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stacks<T> {
    pub y_col: Matrix<T>,
    pub y_row: Matrix<T>,
    pub w1: T,
    pub w2: T,
}

fn stack_weight<T: Scalar>(p: usize, m: usize, mode: StackWeightMode) -> T {
    match mode {
        StackWeightMode::Zeroed => T::zero(),
        StackWeightMode::Literal => {
            let diff = (p as f64 - 2.0 * m as f64).min(0.0);
            T::from_f64_lossy(diff / p as f64)
        }
    }
}

pub fn build_stacks<T: Scalar>(y_tilde: &Matrix<T>, partition: BlockPartition, mode: StackWeightMode) -> Result<Stacks<T>> {
    check_shape(y_tilde, partition, "build_stacks")?;
    let w1 = stack_weight(partition.p1(), partition.m1(), mode);
    let w2 = stack_weight(partition.p2(), partition.m2(), mode);
    let block = |id| {
        let (r, c) = partition.ranges(id);
        y_tilde.submatrix(r, c)
    };
    let y11 = block(BlockId::B11);
    let y_col = Matrix::vstack(&y11.scale(w1), &block(BlockId::B21))?;
    let y_row = Matrix::hstack(&y11.scale(w2), &block(BlockId::B12))?;
    Ok(Stacks { y_col, y_row, w1, w2 })
}

fn check_shape<T: Copy>(m: &Matrix<T>, partition: BlockPartition, context: &'static str) -> Result<()> {
    if m.shape() != partition.shape() {
        return Err(Error::DimensionMismatch {
            context,
            expected: partition.shape(),
            found: m.shape(),
        });
    }
    Ok(())
}

/// Observable blocks expressed in the rotated bases.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedBlocks<T> {
    /// `u_rowᵀ · Ỹ11 · v_col`
    pub b11: Matrix<T>,
    /// `u_rowᵀ · Ỹ12`
    pub b12: Matrix<T>,
    /// `Ỹ21 · v_col`
    pub b21: Matrix<T>,
    /// `m1 × m1` left singular vectors of the row stack.
    pub u_row: Matrix<T>,
    /// `m2 × m2` right singular vectors of the column stack.
    pub v_col: Matrix<T>,
    pub partition: BlockPartition,
    pub w1: T,
    pub w2: T,
}

pub fn rotate<T: Scalar>(y_tilde: &Matrix<T>, partition: BlockPartition, mode: StackWeightMode) -> Result<RotatedBlocks<T>> {
    let stacks = build_stacks(y_tilde, partition, mode)?;
    let (m1, m2) = (partition.m1(), partition.m2());
    let v_col = complete_orthonormal(&svd(&stacks.y_col)?.v, m2);
    let u_row = complete_orthonormal(&svd(&stacks.y_row)?.u, m1);
    let block = |id| {
        let (r, c) = partition.ranges(id);
        y_tilde.submatrix(r, c)
    };
    let b11 = u_row.t_matmul(&block(BlockId::B11))?.matmul(&v_col)?;
    let b12 = u_row.t_matmul(&block(BlockId::B12))?;
    let b21 = block(BlockId::B21).matmul(&v_col)?;
    Ok(RotatedBlocks {
        b11,
        b12,
        b21,
        u_row,
        v_col,
        partition,
        w1: stacks.w1,
        w2: stacks.w2,
    })
}

/// Starting rank together with the plug-in quantities behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R0Choice<T> {
    pub r0: usize,
    /// Root mean square of the observed entries.
    pub tau_tilde: T,
    /// Threshold levels for the column strip and the row strip; only
    /// computed in the hard-threshold mode.
    pub thresholds: Option<(T, T)>,
}

/// `sqrt(Σ_{M=1} Y²) / sqrt(Σ M)`.
pub fn observed_rms<T: Scalar>(y: &MaskedMatrix<T>) -> T {
    let count = y.observed_count();
    if count == 0 {
        return T::zero();
    }
    let ss = y
        .values()
        .iter()
        .zip(y.mask().iter())
        .filter(|(_, &m)| m)
        .fold(T::zero(), |acc, (&v, _)| acc + v * v);
    (ss / T::from_usize(count).expect("count fits")).sqrt()
}

pub fn choose_r0<T: Scalar>(
    y_tilde: &Matrix<T>,
    y: &MaskedMatrix<T>,
    theta: &ThetaEstimate<T>,
    opts: &CompletionOptions<T>,
) -> Result<R0Choice<T>> {
    let partition = y.partition();
    check_shape(y_tilde, partition, "choose_r0")?;
    let cap = partition.max_rank();
    let tau_tilde = observed_rms(y);
    let (r0, thresholds) = match opts.r0_mode {
        R0Mode::Fixed(k) => (k.min(cap), None),
        R0Mode::MinDims => (cap, None),
        R0Mode::HsvtHeuristic => {
            let (p1, p2, m1, m2) = (partition.p1(), partition.p2(), partition.m1(), partition.m2());
            let log_p = T::from_usize(p1.max(p2)).expect("size fits").ln();
            let level = |p: usize| {
                let p = T::from_usize(p).expect("size fits");
                opts.eta_const * (p * tau_tilde * log_p / theta.theta0_hat).sqrt()
            };
            let (l1, l2) = (level(p1), level(p2));
            let s_col = singular_values(&y_tilde.submatrix(0..p1, 0..m2))?;
            let s_row = singular_values(&y_tilde.submatrix(0..m1, 0..p2))?;
            let count = s_col
                .iter()
                .zip(&s_row)
                .take_while(|(&a, &b)| a >= l1 && b >= l2 && a > T::zero() && b > T::zero())
                .count();
            (count.min(cap), Some((l1, l2)))
        }
    };
    Ok(R0Choice { r0, tau_tilde, thresholds })
}

/// Which of the two Schur-criterion bounds held at the accepted rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionSide {
    /// `‖B21 B11⁻¹‖ ≤ 2 sqrt(p1/m1)` only.
    RowBound,
    /// `‖B11⁻¹ B12‖ ≤ 2 sqrt(p2/m2)` only.
    ColBound,
    Both,
    /// No rank accepted.
    None,
}

impl CriterionSide {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriterionSide::RowBound => "row_bound",
            CriterionSide::ColBound => "col_bound",
            CriterionSide::Both => "both",
            CriterionSide::None => "none",
        }
    }
}

/// `2 sqrt(p/m)`.
pub fn schur_bound<T: Scalar>(p: usize, m: usize) -> T {
    T::from_f64_lossy(2.0 * (p as f64 / m as f64).sqrt())
}

/// `‖x‖₂ ≤ bound`, resolved from the cheap bracket when possible.
fn spectral_at_most<T: Scalar>(x: &Matrix<T>, bound: T) -> Result<bool> {
    if !x.is_finite() {
        return Ok(false);
    }
    let (lo, hi) = spectral_norm_bracket(x);
    if hi <= bound {
        return Ok(true);
    }
    if lo > bound {
        return Ok(false);
    }
    Ok(spectral_norm(x)? <= bound)
}

/// Schur factors `B21[:, :s] · B11[:s, :s]⁻¹` and `B11[:s, :s]⁻¹ · B12[:s, :]`.
pub fn schur_factors<T: Scalar>(blocks: &RotatedBlocks<T>, s: usize, inv: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let left = blocks.b21.submatrix(0..blocks.b21.rows(), 0..s).matmul(inv)?;
    let right = inv.matmul(&blocks.b12.submatrix(0..s, 0..blocks.b12.cols()))?;
    Ok((left, right))
}

/// Downward search from `r0` for the largest `s` whose leading block is
/// nonsingular and satisfies at least one Schur-criterion bound. Returns
/// `(0, None)` when no `s` qualifies.
pub fn select_rank<T: Scalar>(blocks: &RotatedBlocks<T>, r0: usize, opts: &CompletionOptions<T>) -> Result<(usize, CriterionSide)> {
    let partition = blocks.partition;
    let r0 = r0.min(partition.max_rank());
    let row_bound = schur_bound::<T>(partition.p1(), partition.m1());
    let col_bound = schur_bound::<T>(partition.p2(), partition.m2());
    for s in (1..=r0).rev() {
        let lead = blocks.b11.submatrix(0..s, 0..s);
        // The inverse and bound checks are cheaper than the singular value
        // test, so they run first; acceptance needs all of them anyway.
        let Ok(inv) = gauss_jordan_inverse(&lead) else {
            continue;
        };
        let (left, right) = schur_factors(blocks, s, &inv)?;
        let row_ok = spectral_at_most(&left, row_bound)?;
        let col_ok = spectral_at_most(&right, col_bound)?;
        if !(row_ok || col_ok) {
            continue;
        }
        if is_numerically_singular(&lead, opts.singularity_rel_tol)? {
            continue;
        }
        let side = match (row_ok, col_ok) {
            (true, true) => CriterionSide::Both,
            (true, false) => CriterionSide::RowBound,
            _ => CriterionSide::ColBound,
        };
        return Ok((s, side));
    }
    Ok((0, CriterionSide::None))
}

/// Block assembly of the rank-`r_hat` estimate in block layout.
pub fn assemble<T: Scalar>(blocks: &RotatedBlocks<T>, r_hat: usize, rel_tol: T) -> Result<Matrix<T>> {
    let partition = blocks.partition;
    let (p1, p2, m1, m2) = (partition.p1(), partition.p2(), partition.m1(), partition.m2());
    let mut out = Matrix::zeros(p1, p2);
    if r_hat == 0 {
        return Ok(out);
    }
    assert!(r_hat <= partition.max_rank());
    let s = r_hat;
    let u = blocks.u_row.submatrix(0..m1, 0..s);
    let v = blocks.v_col.submatrix(0..m2, 0..s);
    let core = blocks.b11.submatrix(0..s, 0..s);
    let inv = invert_leading(&blocks.b11, s, rel_tol)?;
    let b12 = blocks.b12.submatrix(0..s, 0..p2 - m2);
    let b21 = blocks.b21.submatrix(0..p1 - m1, 0..s);
    let vt = v.transpose();
    out.set_block(0, 0, &u.matmul(&core)?.matmul(&vt)?);
    out.set_block(0, m2, &u.matmul(&b12)?);
    out.set_block(m1, 0, &b21.matmul(&vt)?);
    out.set_block(m1, m2, &b21.matmul(&inv)?.matmul(&b12)?);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics<T> {
    pub theta0_hat: T,
    pub tau_tilde: T,
    pub w1: T,
    pub w2: T,
    pub stack_weight_mode: StackWeightMode,
    pub hsvt_thresholds: Option<(T, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult<T> {
    /// Estimate in block layout.
    pub a_hat: Matrix<T>,
    pub r_hat: usize,
    pub r0_used: usize,
    pub criterion_side: CriterionSide,
    pub diagnostics: Diagnostics<T>,
}

/// Full pipeline: estimate Θ, normalize, rotate, pick `r0`, select the rank
/// and assemble.
pub fn macomss<T: Scalar>(y: &MaskedMatrix<T>, opts: &CompletionOptions<T>) -> Result<CompletionResult<T>> {
    opts.validate()?;
    let theta = estimate_theta(&y.mask_weights(), y.partition(), opts.theta_clamp)?;
    complete_with_theta(y, &theta, opts)
}

/// Pipeline with a caller-supplied probability estimate.
pub fn complete_with_theta<T: Scalar>(
    y: &MaskedMatrix<T>,
    theta: &ThetaEstimate<T>,
    opts: &CompletionOptions<T>,
) -> Result<CompletionResult<T>> {
    opts.validate()?;
    let partition = y.partition();
    let y_tilde = normalize(y, theta)?;
    let blocks = rotate(&y_tilde, partition, opts.stack_weight_mode)?;
    let r0 = choose_r0(&y_tilde, y, theta, opts)?;
    let (r_hat, criterion_side) = select_rank(&blocks, r0.r0, opts)?;
    let a_hat = assemble(&blocks, r_hat, opts.singularity_rel_tol)?;
    Ok(CompletionResult {
        a_hat,
        r_hat,
        r0_used: r0.r0,
        criterion_side,
        diagnostics: Diagnostics {
            theta0_hat: theta.theta0_hat,
            tau_tilde: r0.tau_tilde,
            w1: blocks.w1,
            w2: blocks.w2,
            stack_weight_mode: opts.stack_weight_mode,
            hsvt_thresholds: r0.thresholds,
        },
    })
}
