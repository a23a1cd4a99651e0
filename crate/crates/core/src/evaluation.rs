//! Recovery metrics, a ridge logistic classifier with cross-validation,
//! AUC, and theory-condition diagnostics.

use std::cmp::Ordering;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numerics::{frobenius_norm, spectral_norm, svd};
use crate::rng::StreamRng;
use crate::scalar::Scalar;
use crate::synthgen::sigmoid;
use crate::types::{BlockPartition, Mask};

/// `‖X̂ − X‖² / ‖X‖²` over the entries where `target` is set.
pub fn nmse<T: Scalar>(estimate: &Matrix<T>, truth: &Matrix<T>, target: &Mask) -> Result<T> {
    estimate.check_same_shape(truth.shape(), "nmse truth")?;
    estimate.check_same_shape(target.shape(), "nmse target")?;
    let (mut num, mut den) = (T::zero(), T::zero());
    for (i, j, t) in target.indexed() {
        if t {
            let d = estimate[(i, j)] - truth[(i, j)];
            num = num + d * d;
            den = den + truth[(i, j)] * truth[(i, j)];
        }
    }
    if !(den > T::zero()) {
        return Err(Error::ZeroTruthNorm);
    }
    Ok(num / den)
}

/// `(‖Â − A‖_F, ‖Â − A‖₂)`.
pub fn recovery_losses<T: Scalar>(a_hat: &Matrix<T>, a: &Matrix<T>) -> Result<(T, T)> {
    let diff = a_hat.sub(a)?;
    Ok((frobenius_norm(&diff), spectral_norm(&diff)?))
}

/// Mann–Whitney estimate of `P(score⁺ > score⁻) + ½ P(tie)` from mid-ranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "auc",
            expected: (labels.len(), 1),
            found: (scores.len(), 1),
        });
    }
    let n_pos = labels.iter().filter(|&&z| z).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (1-based start+1..=end) share their mean
        let mid = (start + 1 + end) as f64 / 2.0;
        pos_rank_sum += mid * order[start..end].iter().filter(|&&k| labels[k]).count() as f64;
        start = end;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Ridge logistic regression fit; the intercept is not penalized.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub beta0: f64,
    pub beta1: Vec<f64>,
    pub ridge_lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Penalized log-likelihood after each accepted Newton step, starting
    /// from the initial point.
    pub objective_path: Vec<f64>,
}

impl LogisticFit {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.beta0 + row.iter().zip(&self.beta1).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &Matrix<f64>) -> Vec<f64> {
        (0..x.rows()).map(|i| sigmoid(self.linear_predictor(x.row(i)))).collect()
    }
}

pub const LOGISTIC_GRAD_TOL: f64 = 1e-6;
pub const LOGISTIC_MAX_ITER: usize = 100;

fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `Σ z_i η_i − log(1 + e^{η_i}) − (λ/2)‖β₁‖²`.
pub fn penalized_loglik(x: &Matrix<f64>, z: &[bool], beta0: f64, beta1: &[f64], lambda: f64) -> f64 {
    let mut ll = 0.0;
    for i in 0..x.rows() {
        let eta = beta0 + x.row(i).iter().zip(beta1).map(|(a, b)| a * b).sum::<f64>();
        ll += if z[i] { eta } else { 0.0 } - log1p_exp(eta);
    }
    ll - 0.5 * lambda * beta1.iter().map(|b| b * b).sum::<f64>()
}

/// Solves `h · x = g` for symmetric positive semidefinite `h`, adding a
/// growing diagonal shift until the Cholesky factorization succeeds.
fn solve_spd(h: &[f64], g: &[f64], d: usize) -> Vec<f64> {
    let scale = (0..d).map(|i| h[i * d + i]).fold(0.0f64, f64::max).max(1.0);
    let mut shift = 0.0;
    loop {
        if let Some(l) = cholesky(h, d, shift) {
            let mut y = vec![0.0; d];
            for i in 0..d {
                let s: f64 = (0..i).map(|k| l[i * d + k] * y[k]).sum();
                y[i] = (g[i] - s) / l[i * d + i];
            }
            let mut x = vec![0.0; d];
            for i in (0..d).rev() {
                let s: f64 = (i + 1..d).map(|k| l[k * d + i] * x[k]).sum();
                x[i] = (y[i] - s) / l[i * d + i];
            }
            return x;
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
    }
}

fn cholesky(h: &[f64], d: usize, shift: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = h[i * d + j] + if i == j { shift } else { 0.0 };
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Damped Newton (IRLS) maximization of the ridge-penalized log-likelihood.
/// Stops when the gradient norm is at most `1e-6` or after 100 iterations.
pub fn fit_logistic(x: &Matrix<f64>, z: &[bool], ridge_lambda: f64) -> Result<LogisticFit> {
    let (n, p) = x.shape();
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            context: "fit_logistic",
            expected: (n, 1),
            found: (z.len(), 1),
        });
    }
    if n < 2 {
        return Err(Error::InvalidParameter("logistic fit needs at least two samples".into()));
    }
    if !(ridge_lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge lambda must be >= 0, got {ridge_lambda}")));
    }
    let n_pos = z.iter().filter(|&&b| b).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClass);
    }
    let d = p + 1;
    let mut beta = vec![0.0; d];
    let objective = |b: &[f64]| penalized_loglik(x, z, b[0], &b[1..], ridge_lambda);
    let mut current = objective(&beta);
    let mut path = vec![current];
    let mut converged = false;
    let mut iterations = 0;
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    let mut xi = vec![0.0; d];
    xi[0] = 1.0;
    while iterations < LOGISTIC_MAX_ITER {
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        for i in 0..n {
            xi[1..].copy_from_slice(x.row(i));
            let eta: f64 = xi.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = sigmoid(eta);
            let resid = if z[i] { 1.0 } else { 0.0 } - mu;
            let w = mu * (1.0 - mu);
            for a in 0..d {
                grad[a] += resid * xi[a];
                let wa = w * xi[a];
                if wa == 0.0 {
                    continue;
                }
                for b in 0..=a {
                    hess[a * d + b] += wa * xi[b];
                }
            }
        }
        for a in 1..d {
            grad[a] -= ridge_lambda * beta[a];
            hess[a * d + a] += ridge_lambda;
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= LOGISTIC_GRAD_TOL {
            converged = true;
            break;
        }
        for a in 0..d {
            for b in 0..a {
                hess[b * d + a] = hess[a * d + b];
            }
        }
        let step = solve_spd(&hess, &grad, d);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let val = objective(&trial);
            if val >= current {
                beta = trial;
                current = val;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
        path.push(current);
    }
    Ok(LogisticFit {
        beta0: beta[0],
        beta1: beta[1..].to_vec(),
        ridge_lambda,
        converged,
        iterations,
        objective_path: path,
    })
}

/// Ridge penalties searched by cross-validation.
pub const RIDGE_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2];

/// Stratified fold labels in `0..k`: each class is shuffled and dealt round
/// robin.
pub fn stratified_folds(labels: &[bool], k: usize, rng: &mut StreamRng) -> Vec<usize> {
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        for i in idx {
            folds[i] = next % k;
            next += 1;
        }
    }
    folds
}

fn select_rows(x: &Matrix<f64>, rows: &[usize]) -> Matrix<f64> {
    Matrix::from_fn(rows.len(), x.cols(), |i, j| x[(rows[i], j)])
}

/// Out-of-fold predicted probabilities for a fixed penalty.
pub fn out_of_fold_scores(x: &Matrix<f64>, z: &[bool], lambda: f64, folds: &[usize]) -> Result<Vec<f64>> {
    let k = folds.iter().copied().max().map_or(0, |m| m + 1);
    let mut scores = vec![0.0; z.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..z.len()).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..z.len()).filter(|&i| folds[i] == f).collect();
        let zt: Vec<bool> = train.iter().map(|&i| z[i]).collect();
        let fit = fit_logistic(&select_rows(x, &train), &zt, lambda)?;
        for &i in &test {
            scores[i] = sigmoid(fit.linear_predictor(x.row(i)));
        }
    }
    Ok(scores)
}

fn held_out_loglik(scores: &[f64], z: &[bool]) -> f64 {
    scores
        .iter()
        .zip(z)
        .map(|(&s, &y)| {
            let s = s.clamp(1e-12, 1.0 - 1e-12);
            if y { s.ln() } else { (1.0 - s).ln() }
        })
        .sum()
}

/// Cross-validated classifier evaluation: the penalty maximizing held-out
/// log-likelihood over `grid`, and the AUC of its out-of-fold scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CvAuc {
    pub auc: f64,
    pub lambda: f64,
}

pub fn cross_validated_auc(x: &Matrix<f64>, z: &[bool], grid: &[f64], folds: &[usize]) -> Result<CvAuc> {
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &lambda in grid {
        let scores = out_of_fold_scores(x, z, lambda, folds)?;
        let ll = held_out_loglik(&scores, z);
        if best.as_ref().map_or(true, |(b, _, _)| ll > *b) {
            best = Some((ll, lambda, scores));
        }
    }
    let (_, lambda, scores) = best.ok_or_else(|| Error::InvalidParameter("empty ridge grid".into()))?;
    Ok(CvAuc { auc: auc(&scores, z)?, lambda })
}

/// Theory-condition diagnostics for a truth matrix and probability matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    /// Minimum probability over the observable strips.
    pub theta0: f64,
    /// Incoherence: max over both factors of `(p/r) · max leverage`.
    pub rho: f64,
    pub sigma_r: f64,
    /// `sigma_r` divided by `C · sqrt(p1 p2 log(p1 ∨ p2) / (theta0 (m1 ∧ m2)))`.
    pub gap_ratio: f64,
}

pub fn condition_report<T: Scalar>(
    a: &Matrix<T>,
    r: usize,
    theta: &Matrix<T>,
    partition: BlockPartition,
    gap_const: f64,
) -> Result<ConditionReport> {
    if r == 0 || r > a.rows().min(a.cols()) {
        return Err(Error::InvalidParameter(format!("condition report rank {r} out of range")));
    }
    let dec = svd(a)?;
    let leverage = |f: &Matrix<T>| -> f64 {
        let p = f.rows();
        let max = (0..p)
            .map(|i| (0..r).map(|k| f[(i, k)].as_f64().powi(2)).sum::<f64>())
            .fold(0.0, f64::max);
        p as f64 / r as f64 * max
    };
    let rho = leverage(&dec.u).max(leverage(&dec.v));
    let theta0 = theta
        .indexed()
        .filter(|&(i, j, _)| partition.in_strips(i, j))
        .map(|(_, _, x)| x.as_f64())
        .fold(f64::INFINITY, f64::min);
    let sigma_r = dec.s[r - 1].as_f64();
    let (p1, p2) = (partition.p1() as f64, partition.p2() as f64);
    let level = gap_const * (p1 * p2 * p1.max(p2).ln() / (theta0 * partition.max_rank() as f64)).sqrt();
    Ok(ConditionReport {
        theta0,
        rho,
        sigma_r,
        gap_ratio: sigma_r / level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn nmse_reference_points() {
        let x = Matrix::from_rows(&[[1.0, -2.0], [3.0, 0.5]]).unwrap();
        let all = Matrix::filled(2, 2, true);
        assert_eq!(nmse(&x, &x, &all).unwrap(), 0.0);
        assert_eq!(nmse(&Matrix::zeros(2, 2), &x, &all).unwrap(), 1.0);
        assert_eq!(nmse(&x.scale(2.0), &x, &all).unwrap(), 1.0);
        let none = Matrix::filled(2, 2, false);
        assert_eq!(nmse(&x, &x, &none).unwrap_err(), Error::ZeroTruthNorm);
    }

    #[test]
    fn rank_one_recovery_losses() {
        let a = Matrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let (u, v) = ([1.0, 2.0, 2.0], [3.0, 4.0]);
        let diff = Matrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        let (f, s) = recovery_losses(&a.add(&diff).unwrap(), &a).unwrap();
        assert!((f - 15.0).abs() < 1e-12 && (s - 15.0).abs() < 1e-12);
        assert_eq!(recovery_losses(&a, &a).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn auc_reference_points() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
        assert_eq!(auc(&[0.1, 0.4], &[true, true]).unwrap_err(), Error::SingleClass);
    }

    #[test]
    fn intercept_only_fit_recovers_base_rate() {
        let x = Matrix::<f64>::zeros(100, 2);
        let z: Vec<bool> = (0..100).map(|i| i < 30).collect();
        let fit = fit_logistic(&x, &z, 0.0).unwrap();
        assert!(fit.converged);
        assert!((sigmoid(fit.beta0) - 0.3).abs() < 1e-6);
        assert!(fit.beta1.iter().all(|b| b.abs() < 1e-9));
    }

    #[test]
    fn heavy_penalty_kills_slopes() {
        let x = Matrix::from_fn(50, 1, |i, _| i as f64 / 10.0 - 2.5);
        let z: Vec<bool> = (0..50).map(|i| (i * 7) % 10 < 4 || i > 40).collect();
        let rate = z.iter().filter(|&&b| b).count() as f64 / 50.0;
        let fit = fit_logistic(&x, &z, 1e9).unwrap();
        assert!(fit.beta1[0].abs() < 1e-6);
        assert!((fit.beta0 - (rate / (1.0 - rate)).ln()).abs() < 1e-4);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::<f64>::zeros(4, 1);
        assert_eq!(fit_logistic(&x, &[true; 4], 1.0).unwrap_err(), Error::SingleClass);
    }

    #[test]
    fn folds_are_stratified() {
        let z: Vec<bool> = (0..103).map(|i| i % 3 == 0).collect();
        let folds = stratified_folds(&z, 5, &mut stream(1, 8));
        for f in 0..5 {
            let pos = (0..103).filter(|&i| folds[i] == f && z[i]).count();
            assert!((6..=7).contains(&pos));
        }
    }

    #[test]
    fn coherent_factor_gives_maximal_rho() {
        let a = Matrix::from_fn(6, 5, |i, j| if i == j && i < 2 { (2 - i) as f64 } else { 0.0 });
        let part = BlockPartition::new(6, 5, 3, 3).unwrap();
        let rep = condition_report(&a, 2, &Matrix::filled(6, 5, 1.0), part, 1.0).unwrap();
        assert!((rep.rho - 3.0).abs() < 1e-12);
        assert_eq!(rep.theta0, 1.0);
        assert!((rep.sigma_r - 1.0).abs() < 1e-12);
    }
}
