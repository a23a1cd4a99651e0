//! Dense linear-algebra kernel: one-sided Jacobi SVD, norms and inversion
//! of leading principal blocks.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Cyclic sweep limit for the Jacobi iteration.
pub const MAX_SWEEPS: usize = 60;

/// Thin singular value decomposition `A = U · diag(s) · Vᵀ` with
/// `k = min(rows, cols)` singular triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult<T> {
    /// `rows × k`, orthonormal columns.
    pub u: Matrix<T>,
    /// Nonincreasing, nonnegative.
    pub s: Vec<T>,
    /// `cols × k`, orthonormal columns.
    pub v: Matrix<T>,
}

impl<T: Scalar> SvdResult<T> {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U · diag(s) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let us = Matrix::from_fn(self.u.rows(), self.s.len(), |i, j| self.u[(i, j)] * self.s[j]);
        us.matmul(&self.v.transpose()).expect("svd factors are conformable")
    }
}

/// Column-major working copy consumed by the Jacobi iteration.
struct Columns<T> {
    len: usize,
    data: Vec<T>,
}

impl<T: Scalar> Columns<T> {
    fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.len..(j + 1) * self.len]
    }

    fn pair_mut(&mut self, p: usize, q: usize) -> (&mut [T], &mut [T]) {
        debug_assert!(p < q);
        let (head, tail) = self.data.split_at_mut(q * self.len);
        (&mut head[p * self.len..(p + 1) * self.len], &mut tail[..self.len])
    }

    fn norm(&self, j: usize) -> T {
        dot(self.col(j), self.col(j)).sqrt()
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Orthogonalizes the columns of `w` in place (Hestenes one-sided Jacobi).
/// The accumulated right rotations are returned when `track` is set.
fn one_sided_jacobi<T: Scalar>(w: &mut Columns<T>, n: usize, track: bool) -> Result<Option<Columns<T>>> {
    let mut v = track.then(|| Columns {
        len: n,
        data: (0..n * n)
            .map(|k| if k / n == k % n { T::one() } else { T::zero() })
            .collect(),
    });
    let tol = T::jacobi_tol();
    let two = T::one() + T::one();
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(q), w.col(q));
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let gamma = dot(w.col(p), w.col(q));
                if gamma.abs() <= tol * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (two * gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + zeta.hypot(T::one()));
                let c = T::one() / t.hypot(T::one());
                let s = c * t;
                let (wp, wq) = w.pair_mut(p, q);
                rotate(wp, wq, c, s);
                if let Some(v) = v.as_mut() {
                    let (vp, vq) = v.pair_mut(p, q);
                    rotate(vp, vq, c, s);
                }
            }
        }
        if !rotated {
            return Ok(v);
        }
    }
    Err(Error::ConvergenceFailure { sweeps: MAX_SWEEPS })
}

/// Column-major copy of `a` (or of `aᵀ` when `transpose`).
fn to_columns<T: Scalar>(a: &Matrix<T>, transpose: bool) -> Columns<T> {
    if transpose {
        // columns of aᵀ are the rows of a
        Columns {
            len: a.cols(),
            data: a.as_slice().to_vec(),
        }
    } else {
        Columns {
            len: a.rows(),
            data: a.transpose().into_vec(),
        }
    }
}

/// Thin SVD. Deterministic; the first non-negligible component of every
/// left singular vector is made positive.
pub fn svd<T: Scalar>(a: &Matrix<T>) -> Result<SvdResult<T>> {
    let (p, q) = a.shape();
    let k = p.min(q);
    if k == 0 {
        return Ok(SvdResult {
            u: Matrix::zeros(p, 0),
            s: Vec::new(),
            v: Matrix::zeros(q, 0),
        });
    }
    // Work on the orientation with k columns.
    let flipped = p < q;
    let long = if flipped { q } else { p };
    let mut w = to_columns(a, flipped);
    let rot = one_sided_jacobi(&mut w, k, true)?.expect("rotations tracked");

    let norms: Vec<T> = (0..k).map(|j| w.norm(j)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(std::cmp::Ordering::Equal));
    let s: Vec<T> = order.iter().map(|&j| norms[j]).collect();

    let smax = s[0];
    let null_cut = smax * T::epsilon();
    let mut normalized: Vec<Option<Vec<T>>> = order
        .iter()
        .map(|&j| {
            if smax == T::zero() || norms[j] <= null_cut {
                None
            } else {
                Some(w.col(j).iter().map(|&x| x / norms[j]).collect())
            }
        })
        .collect();
    fill_null_columns(&mut normalized, long);
    let from_w: Vec<Vec<T>> = normalized.into_iter().map(|c| c.expect("filled")).collect();
    let from_rot: Vec<Vec<T>> = order.iter().map(|&j| rot.col(j).to_vec()).collect();

    let (mut ucols, mut vcols) = if flipped { (from_rot, from_w) } else { (from_w, from_rot) };
    let negligible = T::epsilon().sqrt();
    for (uc, vc) in ucols.iter_mut().zip(vcols.iter_mut()) {
        if let Some(&lead) = uc.iter().find(|x| x.abs() > negligible) {
            if lead < T::zero() {
                uc.iter_mut().for_each(|x| *x = -*x);
                vc.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    Ok(SvdResult {
        u: Matrix::from_fn(p, k, |i, j| ucols[j][i]),
        s,
        v: Matrix::from_fn(q, k, |i, j| vcols[j][i]),
    })
}

/// Replaces `None` columns with unit vectors orthogonal to every other
/// column, chosen greedily from the canonical basis.
fn fill_null_columns<T: Scalar>(cols: &mut [Option<Vec<T>>], dim: usize) {
    for idx in 0..cols.len() {
        if cols[idx].is_some() {
            continue;
        }
        let basis: Vec<Vec<T>> = cols.iter().flatten().cloned().collect();
        cols[idx] = Some(next_orthonormal(&basis, dim));
    }
}

/// Canonical vector with the largest residual against `basis`,
/// orthogonalized twice and normalized. Ties resolve to the lowest index.
fn next_orthonormal<T: Scalar>(basis: &[Vec<T>], dim: usize) -> Vec<T> {
    let project = |mut x: Vec<T>| {
        for _ in 0..2 {
            for b in basis {
                let c = dot(&x, b);
                x.iter_mut().zip(b).for_each(|(xi, &bi)| *xi = *xi - c * bi);
            }
        }
        x
    };
    let mut best: Option<(T, Vec<T>)> = None;
    for e in 0..dim {
        let mut x = vec![T::zero(); dim];
        x[e] = T::one();
        let r = project(x);
        let n = dot(&r, &r).sqrt();
        if best.as_ref().map_or(true, |(bn, _)| n > *bn + T::epsilon()) {
            best = Some((n, r));
        }
    }
    let (n, r) = best.expect("dim > basis.len()");
    r.into_iter().map(|x| x / n).collect()
}

/// Extends an orthonormal `dim × k` set of columns to `dim × total`.
pub fn complete_orthonormal<T: Scalar>(u: &Matrix<T>, total: usize) -> Matrix<T> {
    let dim = u.rows();
    assert!(total >= u.cols() && total <= dim);
    let mut cols: Vec<Vec<T>> = (0..u.cols()).map(|j| u.column(j)).collect();
    while cols.len() < total {
        let next = next_orthonormal(&cols, dim);
        cols.push(next);
    }
    Matrix::from_fn(dim, total, |i, j| cols[j][i])
}

/// Singular values only, nonincreasing.
pub fn singular_values<T: Scalar>(a: &Matrix<T>) -> Result<Vec<T>> {
    let (p, q) = a.shape();
    let k = p.min(q);
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut w = to_columns(a, p < q);
    one_sided_jacobi(&mut w, k, false)?;
    let mut s: Vec<T> = (0..k).map(|j| w.norm(j)).collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    Ok(s)
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    if let Some(r) = low_rank_factor(a) {
        return Ok(singular_values(&r)?.first().copied().unwrap_or_else(T::zero));
    }
    Ok(singular_values(a)?.first().copied().unwrap_or_else(T::zero))
}

/// Column-pivoted Gram–Schmidt `a ≈ Q R`, returning `R` when the numerical
/// rank is below a quarter of the short side. `R` has the singular values of
/// `a` up to a perturbation of order `eps·‖a‖_F`.
fn low_rank_factor<T: Scalar>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let (p, q) = a.shape();
    let limit = p.min(q) / 4;
    if limit < 8 {
        return None;
    }
    let total = frobenius_norm(a);
    if total == T::zero() {
        return None;
    }
    let drop = T::epsilon() * T::from_f64_lossy(8.0) * total;
    let mut res = to_columns(a, false);
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut r_rows: Vec<Vec<T>> = Vec::new();
    loop {
        let (best, norm) = (0..q)
            .map(|j| (j, res.norm(j)))
            .fold((0, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if norm <= drop {
            break;
        }
        if basis.len() == limit {
            return None;
        }
        let mut e = res.col(best).to_vec();
        for b in &basis {
            let c = dot(b, &e);
            e.iter_mut().zip(b).for_each(|(x, &y)| *x = *x - c * y);
        }
        let n = dot(&e, &e).sqrt();
        if n <= drop {
            break;
        }
        e.iter_mut().for_each(|x| *x = *x / n);
        let mut row = vec![T::zero(); q];
        for (j, rj) in row.iter_mut().enumerate() {
            let col = &mut res.data[j * p..(j + 1) * p];
            let c = dot(&e, col);
            col.iter_mut().zip(&e).for_each(|(x, &y)| *x = *x - c * y);
            *rj = c;
        }
        basis.push(e);
        r_rows.push(row);
    }
    let k = r_rows.len().max(1);
    Some(Matrix::from_fn(k, q, |i, j| r_rows.get(i).map_or(T::zero(), |r| r[j])))
}

pub fn frobenius_norm<T: Scalar>(a: &Matrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Cheap two-sided bracket on the spectral norm: the largest row or column
/// Euclidean norm below, the Frobenius norm above.
pub fn spectral_norm_bracket<T: Scalar>(a: &Matrix<T>) -> (T, T) {
    let (p, q) = a.shape();
    let mut col_sq = vec![T::zero(); q];
    let mut lo = T::zero();
    let mut total = T::zero();
    for i in 0..p {
        let row = a.row(i);
        let mut r = T::zero();
        for (c, &x) in col_sq.iter_mut().zip(row) {
            *c = *c + x * x;
            r = r + x * x;
        }
        lo = lo.max(r);
        total = total + r;
    }
    for c in col_sq {
        lo = lo.max(c);
    }
    (lo.sqrt(), total.sqrt())
}

/// `sigma_min / sigma_max < rel_tol`, with the zero matrix counted singular.
pub fn is_numerically_singular<T: Scalar>(a: &Matrix<T>, rel_tol: T) -> Result<bool> {
    let s = singular_values(a)?;
    let (Some(&max), Some(&min)) = (s.first(), s.last()) else {
        return Ok(false);
    };
    Ok(max == T::zero() || min / max < rel_tol)
}

/// Gauss-Jordan inverse with partial pivoting, no conditioning check beyond
/// exact zero pivots and non-finite output.
pub fn gauss_jordan_inverse<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "inverse of a non-square matrix");
    let mut m = a.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| {
                m[(x, col)]
                    .abs()
                    .partial_cmp(&m[(y, col)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty range");
        let pv = m[(pivot, col)];
        if pv == T::zero() || !pv.is_finite() {
            return Err(Error::SingularSubmatrix { size: n });
        }
        if pivot != col {
            for j in 0..n {
                let (x, y) = (m[(col, j)], m[(pivot, j)]);
                m[(col, j)] = y;
                m[(pivot, j)] = x;
                let (x, y) = (inv[(col, j)], inv[(pivot, j)]);
                inv[(col, j)] = y;
                inv[(pivot, j)] = x;
            }
        }
        for j in 0..n {
            m[(col, j)] = m[(col, j)] / pv;
            inv[(col, j)] = inv[(col, j)] / pv;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = m[(i, col)];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                m[(i, j)] = m[(i, j)] - f * m[(col, j)];
                inv[(i, j)] = inv[(i, j)] - f * inv[(col, j)];
            }
        }
    }
    if !inv.is_finite() {
        return Err(Error::SingularSubmatrix { size: n });
    }
    Ok(inv)
}

/// Inverse of the leading `s × s` principal block of `b`, rejected when
/// `sigma_min / sigma_max < rel_tol`.
pub fn invert_leading<T: Scalar>(b: &Matrix<T>, s: usize, rel_tol: T) -> Result<Matrix<T>> {
    assert!(s <= b.rows().min(b.cols()), "leading block larger than matrix");
    let lead = b.submatrix(0..s, 0..s);
    if s > 0 && is_numerically_singular(&lead, rel_tol)? {
        return Err(Error::SingularSubmatrix { size: s });
    }
    gauss_jordan_inverse(&lead)
}
