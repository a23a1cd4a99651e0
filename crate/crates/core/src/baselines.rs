//! Comparison imputers: column mean, random sampling from observed values,
//! and K-nearest-neighbor rows.

use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::StreamRng;
use crate::scalar::Scalar;
use crate::types::MaskedMatrix;

/// Default neighbor count.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputeMethod {
    Mean,
    RandomSampling { seed: u64 },
    Knn { k: usize },
}

/// Completed matrix. Observed entries are copied bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedMatrix<T> {
    pub values: Matrix<T>,
    pub method: ImputeMethod,
}

fn observed_column<T: Scalar>(y: &MaskedMatrix<T>, j: usize) -> Vec<T> {
    let (vals, mask) = (y.values(), y.mask());
    (0..vals.rows()).filter(|&i| mask[(i, j)]).map(|i| vals[(i, j)]).collect()
}

fn column_means<T: Scalar>(y: &MaskedMatrix<T>) -> Result<Vec<T>> {
    (0..y.values().cols())
        .map(|j| {
            let obs = observed_column(y, j);
            if obs.is_empty() {
                return Err(Error::EmptyColumn { col: j });
            }
            Ok(obs.iter().copied().sum::<T>() / T::from_usize(obs.len()).expect("count fits"))
        })
        .collect()
}

fn fill_missing<T: Scalar>(y: &MaskedMatrix<T>, mut fill: impl FnMut(usize, usize) -> Result<T>) -> Result<Matrix<T>> {
    let mut out = y.values().clone();
    for (i, j, observed) in y.mask().indexed() {
        if !observed {
            out[(i, j)] = fill(i, j)?;
        }
    }
    Ok(out)
}

pub fn mean_impute<T: Scalar>(y: &MaskedMatrix<T>) -> Result<ImputedMatrix<T>> {
    let means = column_means(y)?;
    Ok(ImputedMatrix {
        values: fill_missing(y, |_, j| Ok(means[j]))?,
        method: ImputeMethod::Mean,
    })
}

/// Fills each missing cell with a uniform draw from the observed values of
/// its column.
pub fn rs_impute<T: Scalar>(y: &MaskedMatrix<T>, seed: u64) -> Result<ImputedMatrix<T>> {
    let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Impute as u64);
    rs_impute_with(y, &mut rng).map(|values| ImputedMatrix {
        values,
        method: ImputeMethod::RandomSampling { seed },
    })
}

/// [`rs_impute`] drawing from a caller-owned stream.
pub fn rs_impute_with<T: Scalar>(y: &MaskedMatrix<T>, rng: &mut StreamRng) -> Result<Matrix<T>> {
    let pools: Vec<Vec<T>> = (0..y.values().cols()).map(|j| observed_column(y, j)).collect();
    if let Some(j) = pools.iter().position(Vec::is_empty) {
        return Err(Error::EmptyColumn { col: j });
    }
    // column-major fill order keeps each column's draws contiguous in the stream
    let mut out = y.values().clone();
    for (j, pool) in pools.iter().enumerate() {
        for i in 0..out.rows() {
            if !y.mask()[(i, j)] {
                out[(i, j)] = pool[rng.random_range(0..pool.len())];
            }
        }
    }
    Ok(out)
}

/// Root-mean-square difference over jointly observed columns, `None` when
/// the rows share no observed column.
pub fn row_distance<T: Scalar>(y: &MaskedMatrix<T>, a: usize, b: usize) -> Option<T> {
    let (vals, mask) = (y.values(), y.mask());
    let mut ss = T::zero();
    let mut count = 0usize;
    for j in 0..vals.cols() {
        if mask[(a, j)] && mask[(b, j)] {
            let d = vals[(a, j)] - vals[(b, j)];
            ss = ss + d * d;
            count += 1;
        }
    }
    (count > 0).then(|| (ss / T::from_usize(count).expect("count fits")).sqrt())
}

/// Mean of the `k` nearest rows that observe the target column; ties go to
/// the lower row index. Cells without any candidate take the column mean.
pub fn knn_impute<T: Scalar>(y: &MaskedMatrix<T>, k: usize) -> Result<ImputedMatrix<T>> {
    if k == 0 {
        return Err(Error::InvalidParameter("knn needs k >= 1".into()));
    }
    let (n, _) = y.values().shape();
    let mut dist: Vec<Option<T>> = vec![None; n * n];
    let needs_row: Vec<bool> = (0..n).map(|i| y.mask().row(i).iter().any(|&m| !m)).collect();
    for a in 0..n {
        if !needs_row[a] {
            continue;
        }
        for b in 0..n {
            if b != a {
                dist[a * n + b] = row_distance(y, a, b);
            }
        }
    }
    let means = column_means(y);
    let (vals, mask) = (y.values(), y.mask());
    let values = fill_missing(y, |i, j| {
        let mut cands: Vec<(T, usize)> = (0..n)
            .filter(|&b| b != i && mask[(b, j)])
            .filter_map(|b| dist[i * n + b].map(|d| (d, b)))
            .collect();
        if cands.is_empty() {
            return match &means {
                Ok(m) => Ok(m[j]),
                Err(e) => Err(e.clone()),
            };
        }
        cands.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal).then(x.1.cmp(&y.1)));
        let take = k.min(cands.len());
        let total: T = cands[..take].iter().map(|&(_, b)| vals[(b, j)]).sum();
        Ok(total / T::from_usize(take).expect("count fits"))
    })?;
    Ok(ImputedMatrix {
        values,
        method: ImputeMethod::Knn { k },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BlockPartition;

    fn masked(vals: &[&[f64]], mask: &[&[bool]]) -> MaskedMatrix<f64> {
        let v = Matrix::from_rows(vals).unwrap();
        let m = Matrix::from_rows(mask).unwrap();
        let part = BlockPartition::new(v.rows(), v.cols(), v.rows(), v.cols()).unwrap();
        MaskedMatrix::new(v, m, part).unwrap()
    }

    #[test]
    fn mean_fills_column_average() {
        let y = masked(&[&[1.0], &[9.0], &[3.0]], &[&[true], &[false], &[true]]);
        assert_eq!(mean_impute(&y).unwrap().values.column(0), vec![1.0, 2.0, 3.0]);
        let c = masked(&[&[4.0], &[0.0], &[4.0]], &[&[true], &[false], &[true]]);
        assert_eq!(mean_impute(&c).unwrap().values.column(0), vec![4.0; 3]);
        let empty = masked(&[&[1.0, 0.0], &[2.0, 0.0]], &[&[true, false], &[true, false]]);
        assert_eq!(mean_impute(&empty).unwrap_err(), Error::EmptyColumn { col: 1 });
        assert_eq!(rs_impute(&empty, 1).unwrap_err(), Error::EmptyColumn { col: 1 });
    }

    #[test]
    fn identity_on_complete_input() {
        let y = masked(&[&[1.0, 2.0], &[3.0, 4.0]], &[&[true, true], &[true, true]]);
        assert_eq!(&mean_impute(&y).unwrap().values, y.values());
        assert_eq!(&rs_impute(&y, 3).unwrap().values, y.values());
        assert_eq!(&knn_impute(&y, 2).unwrap().values, y.values());
    }

    #[test]
    fn rs_draws_from_observed_pool() {
        let y = masked(&[&[5.0, 1.0], &[0.0, 2.0], &[0.0, 0.0]], &[&[true, true], &[false, true], &[false, false]]);
        let out = rs_impute(&y, 9).unwrap().values;
        assert_eq!(out.column(0), vec![5.0; 3]);
        assert!([1.0, 2.0].contains(&out[(2, 1)]));
    }

    #[test]
    fn knn_twin_and_saturation() {
        let y = masked(
            &[&[1.0, 2.0, 3.0], &[1.0, 2.0, 7.0], &[9.0, 9.0, 9.0]],
            &[&[true, true, false], &[true, true, true], &[true, true, true]],
        );
        assert_eq!(knn_impute(&y, 1).unwrap().values[(0, 2)], 7.0);
        assert_eq!(knn_impute(&y, 10).unwrap().values[(0, 2)], 8.0);
    }

    #[test]
    fn knn_falls_back_to_column_mean() {
        // row 0 shares no observed column with anyone observing column 1
        let y = masked(
            &[&[1.0, 0.0], &[0.0, 4.0], &[0.0, 6.0]],
            &[&[true, false], &[false, true], &[false, true]],
        );
        assert_eq!(knn_impute(&y, 3).unwrap().values[(0, 1)], 5.0);
        assert!(knn_impute(&y, 0).is_err());
    }
}
