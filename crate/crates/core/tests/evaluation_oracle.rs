mod common;

use macomss::evaluation::{
    auc, condition_report, cross_validated_auc, fit_logistic, nmse, penalized_loglik, stratified_folds, RIDGE_GRID,
};
use macomss::rng::stream;
use macomss::synthgen::sigmoid;
use macomss::{BlockPartition, Matrix};
use proptest::prelude::*;
use rand::Rng;

/// Twice the concordance count over all positive/negative pairs.
fn pair_count_twice(scores: &[f64], labels: &[bool]) -> (u64, u64) {
    let mut count2 = 0;
    let (mut np, mut nn) = (0u64, 0u64);
    for (i, &zi) in labels.iter().enumerate() {
        if zi {
            np += 1;
        } else {
            nn += 1;
            continue;
        }
        for (j, &zj) in labels.iter().enumerate() {
            if zj {
                continue;
            }
            count2 += match scores[i].partial_cmp(&scores[j]).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    (count2, 2 * np * nn)
}

#[test]
fn auc_equals_all_pairs_count() {
    let mut rng = stream(11, 0);
    for case in 0..100 {
        let n = rng.random_range(2..60);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        labels[0] = true;
        labels[1] = false;
        // coarse grid forces ties
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 * 0.25).collect();
        let (num, den) = pair_count_twice(&scores, &labels);
        assert_eq!(auc(&scores, &labels).unwrap(), num as f64 / den as f64, "case {case}");
    }
}

proptest! {
    #[test]
    fn auc_invariant_under_monotone_maps(
        raw in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 4..40),
    ) {
        let scores: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let mut labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
        labels[0] = true;
        labels[1] = false;
        let base = auc(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|&s| (s / 3.0).exp() + 7.0).collect();
        prop_assert_eq!(auc(&mapped, &labels).unwrap(), base);
        let flipped: Vec<f64> = scores.iter().map(|&s| -s).collect();
        prop_assert!((auc(&flipped, &labels).unwrap() - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn nmse_is_scale_free(c in 0.01f64..100.0, seed in 0u64..1000) {
        let mut rng = stream(seed, 0);
        let truth = Matrix::from_fn(6, 5, |_, _| rng.random::<f64>() - 0.5);
        let est = Matrix::from_fn(6, 5, |_, _| rng.random::<f64>() - 0.5);
        let target = Matrix::from_fn(6, 5, |i, j| (i + j) % 2 == 0);
        let a = nmse(&est, &truth, &target).unwrap();
        let b = nmse(&est.scale(c), &truth.scale(c), &target).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

fn one_dim_design(rng: &mut macomss::rng::StreamRng, n: usize, beta: f64) -> (Matrix<f64>, Vec<bool>) {
    let x = Matrix::from_fn(n, 1, |_, _| rng.random::<f64>() * 4.0 - 2.0);
    let z = (0..n).map(|i| rng.random::<f64>() < sigmoid(0.3 + beta * x[(i, 0)])).collect();
    (x, z)
}

#[test]
fn one_dim_fit_matches_grid_search() {
    let mut rng = stream(12, 0);
    let (x, z) = one_dim_design(&mut rng, 80, 1.5);
    let fit = fit_logistic(&x, &z, 1.0).unwrap();
    assert!(fit.converged);
    // coarse grid followed by two refinements of width 1e-3 and 1e-5
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    let mut center = (0.0, 0.0);
    for (half, step) in [(5.0, 0.05), (0.05, 1e-3), (1e-3, 1e-5)] {
        let k = (half / step) as i64;
        for a in -k..=k {
            for b in -k..=k {
                let (b0, b1) = (center.0 + a as f64 * step, center.1 + b as f64 * step);
                let ll = penalized_loglik(&x, &z, b0, &[b1], 1.0);
                if ll > best.2 {
                    best = (b0, b1, ll);
                }
            }
        }
        center = (best.0, best.1);
    }
    assert!((fit.beta0 - best.0).abs() < 1e-3, "{} vs {}", fit.beta0, best.0);
    assert!((fit.beta1[0] - best.1).abs() < 1e-3, "{} vs {}", fit.beta1[0], best.1);
}

#[test]
fn huge_penalty_gives_base_rate_intercept() {
    let mut rng = stream(13, 0);
    let (x, z) = one_dim_design(&mut rng, 120, 2.0);
    let fit = fit_logistic(&x, &z, 1e8).unwrap();
    let rate = z.iter().filter(|&&b| b).count() as f64 / z.len() as f64;
    assert!(fit.beta1[0].abs() < 1e-5);
    assert!((sigmoid(fit.beta0) - rate).abs() < 1e-5);
}

#[test]
fn newton_converges_and_ascends() {
    let mut rng = stream(14, 0);
    for case in 0..200 {
        let n = rng.random_range(20..80);
        let d = rng.random_range(1..6);
        let x = Matrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let mut z: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        z[0] = true;
        z[1] = false;
        let lambda = RIDGE_GRID[case % RIDGE_GRID.len()];
        let fit = fit_logistic(&x, &z, lambda).unwrap();
        assert!(fit.converged, "case {case}");
        for w in fit.objective_path.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "case {case}: {:?}", fit.objective_path);
        }
    }
}

#[test]
fn cross_validation_picks_from_the_grid() {
    let mut rng = stream(15, 0);
    let (x, z) = one_dim_design(&mut rng, 100, 3.0);
    let folds = stratified_folds(&z, 5, &mut stream(15, 1));
    let cv = cross_validated_auc(&x, &z, &RIDGE_GRID, &folds).unwrap();
    assert!(RIDGE_GRID.contains(&cv.lambda));
    assert!(cv.auc > 0.75, "{}", cv.auc);
}

#[test]
fn condition_report_on_incoherent_rank_one() {
    // flat singular vectors have leverage exactly one
    let a = Matrix::filled(8, 6, 2.0);
    let theta = Matrix::filled(8, 6, 0.5);
    let part = BlockPartition::new(8, 6, 4, 3).unwrap();
    let rep = condition_report(&a, 1, &theta, part, 1.0).unwrap();
    assert!((rep.rho - 1.0).abs() < 1e-10);
    assert!((rep.sigma_r - 2.0 * 48f64.sqrt()).abs() < 1e-10);
    assert_eq!(rep.theta0, 0.5);
    let level = (48.0 * 8f64.ln() / (0.5 * 3.0)).sqrt();
    assert!((rep.gap_ratio - rep.sigma_r / level).abs() < 1e-10);
    assert!(condition_report(&a, 0, &theta, part, 1.0).is_err());
}
