#![allow(dead_code)]

use macomss::rng::stream;
use macomss::synthgen::gen_lowrank;
use macomss::{BlockPartition, Mask, Masked, Matrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn to_na(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix<f64> {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Singular values from the eigenvalues of the symmetric embedding
/// `[[0, A], [Aᵀ, 0]]`, whose spectrum is `±σ_i` and zeros.
pub fn oracle_singular_values(a: &Matrix<f64>) -> Vec<f64> {
    let (p, q) = a.shape();
    let n = p + q;
    let mut h = DMatrix::zeros(n, n);
    for i in 0..p {
        for j in 0..q {
            h[(i, p + j)] = a[(i, j)];
            h[(p + j, i)] = a[(i, j)];
        }
    }
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev.truncate(p.min(q));
    ev.into_iter().map(|x| x.max(0.0)).collect()
}

pub fn oracle_spectral_norm(a: &Matrix<f64>) -> f64 {
    oracle_singular_values(a).first().copied().unwrap_or(0.0)
}

/// `A⁺ = (AᵀA)⁺ Aᵀ` from the symmetric eigendecomposition of the Gram
/// matrix, dropping eigenvalues below `1e-12·λ_max`.
pub fn oracle_pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = (a.transpose() * a).symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let inv = eig.eigenvalues.map(|l| if l > 1e-12 * top { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose() * a.transpose()
}

pub fn full_mask(p1: usize, p2: usize, part: BlockPartition) -> Mask {
    Matrix::from_fn(p1, p2, |i, j| part.in_strips(i, j))
}

/// Noiseless, fully observed rank-`r` instance in block layout.
pub fn noiseless(p1: usize, p2: usize, r: usize, m1: usize, m2: usize, seed: u64) -> (Matrix<f64>, Masked) {
    let a = gen_lowrank(p1, p2, r, &mut stream(seed, 1));
    let part = BlockPartition::new(p1, p2, m1, m2).unwrap();
    let y = Masked::new(a.clone(), full_mask(p1, p2, part), part).unwrap();
    (a, y)
}

pub fn rel_frob(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    macomss::frobenius_norm(&a.sub(b).unwrap()) / macomss::frobenius_norm(b)
}
