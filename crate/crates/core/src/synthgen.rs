//! Seeded synthetic truths, missingness patterns and noise for the
//! simulation studies.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{stream, Purpose};
use crate::types::{BlockPartition, LayoutMap, Mask};

/// Truth-matrix family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenKind {
    /// `U Vᵀ` with Haar-distributed orthonormal factors.
    LowrankOrthogonal,
    /// `U D Vᵀ`, `r` unit singular values followed by `j^(-alpha)`.
    ApproxLowrank { alpha: f64 },
    /// `U Vᵀ` with entries `|N(0, 1/p)|`, observed through Poisson counts.
    Poisson { lambda0: f64 },
    /// Standardized `U D Vᵀ` used as a logistic design.
    LogisticDesign,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub kind: GenKind,
    pub p1: usize,
    pub p2: usize,
    pub r: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.r > self.p1.min(self.p2) {
            return Err(Error::InvalidParameter(format!(
                "rank {} exceeds min({}, {})",
                self.r, self.p1, self.p2
            )));
        }
        match self.kind {
            GenKind::ApproxLowrank { alpha } if !(alpha >= 0.0) => {
                Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")))
            }
            GenKind::Poisson { lambda0 } if !(lambda0 > 0.0) => {
                Err(Error::InvalidParameter(format!("lambda0 must be > 0, got {lambda0}")))
            }
            _ => Ok(()),
        }
    }

    /// Draws the truth matrix from the `Purpose::Truth` stream of `seed`.
    /// For `LogisticDesign` this is the standardized design `X`.
    pub fn generate(&self) -> Result<Matrix<f64>> {
        self.validate()?;
        let mut rng = stream(self.seed, Purpose::Truth as u64);
        Ok(match self.kind {
            GenKind::LowrankOrthogonal => gen_lowrank(self.p1, self.p2, self.r, &mut rng),
            GenKind::ApproxLowrank { alpha } => gen_approx_lowrank(self.p1, self.p2, self.r, alpha, &mut rng),
            GenKind::Poisson { .. } => gen_poisson_factors(self.p1, self.p2, self.r, &mut rng),
            GenKind::LogisticDesign => gen_logistic_design(self.p1, self.p2, self.r, &mut rng),
        })
    }
}

/// Rank-one missingness family. Both draw `alpha_i, beta_j ~ 1 - x·Unif[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaKind {
    UniformScaled { c: f64 },
    Band { eta: f64 },
}

impl ThetaKind {
    fn width(&self) -> f64 {
        match *self {
            ThetaKind::UniformScaled { c } => c,
            ThetaKind::Band { eta } => eta,
        }
    }
}

/// Structured-block presets of the downstream simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Final half of the rows × last 45 columns.
    One,
    /// Final 45 rows × last half of the columns.
    Two,
}

/// Fixed side of the scenario rectangles.
pub const SCENARIO_FIXED_EXTENT: usize = 45;

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Orthonormalizes the columns of a standard Gaussian `rows × k` matrix.
/// With the QR sign fixed so `diag(R) > 0`, the result is Haar distributed.
pub fn haar_orthonormal<R: Rng + ?Sized>(rows: usize, k: usize, rng: &mut R) -> Matrix<f64> {
    assert!(k <= rows);
    let g = gaussian_matrix(rows, k, rng);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut x = g.column(j);
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &cols {
                let c: f64 = x.iter().zip(q).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        x.iter_mut().for_each(|a| *a /= n);
        cols.push(x);
    }
    Matrix::from_fn(rows, k, |i, j| cols[j][i])
}

fn scale_columns(u: &Matrix<f64>, d: &[f64]) -> Matrix<f64> {
    Matrix::from_fn(u.rows(), u.cols(), |i, j| u[(i, j)] * d[j])
}

pub fn gen_lowrank<R: Rng + ?Sized>(p1: usize, p2: usize, r: usize, rng: &mut R) -> Matrix<f64> {
    let u = haar_orthonormal(p1, r, rng);
    let v = haar_orthonormal(p2, r, rng);
    u.matmul(&v.transpose()).expect("conformable")
}

/// Singular value profile: `r` ones, then `j^(-alpha)` for `j = 1..=k-r`.
pub fn decay_profile(k: usize, r: usize, alpha: f64) -> Vec<f64> {
    (0..k)
        .map(|i| if i < r { 1.0 } else { ((i - r + 1) as f64).powf(-alpha) })
        .collect()
}

pub fn gen_approx_lowrank<R: Rng + ?Sized>(
    p1: usize,
    p2: usize,
    r: usize,
    alpha: f64,
    rng: &mut R,
) -> Matrix<f64> {
    let k = p1.min(p2);
    let u = haar_orthonormal(p1, k, rng);
    let v = haar_orthonormal(p2, k, rng);
    scale_columns(&u, &decay_profile(k, r, alpha))
        .matmul(&v.transpose())
        .expect("conformable")
}

/// Nonnegative rank-`r` intensity `U Vᵀ`, `U_ik ~ |N(0, 1/p1)|`, `V_jk ~ |N(0, 1/p2)|`.
pub fn gen_poisson_factors<R: Rng + ?Sized>(p1: usize, p2: usize, r: usize, rng: &mut R) -> Matrix<f64> {
    let su = 1.0 / (p1 as f64).sqrt();
    let sv = 1.0 / (p2 as f64).sqrt();
    let u = gaussian_matrix(p1, r, rng).map(|x| (x * su).abs());
    let v = gaussian_matrix(p2, r, rng).map(|x| (x * sv).abs());
    u.matmul(&v.transpose()).expect("conformable")
}

/// `lambda0 · p1 p2 / Σ A`, so that the grand mean of the counts is `lambda0`.
/// Zero when `A` sums to zero.
pub fn poisson_intensity(a: &Matrix<f64>, lambda0: f64) -> f64 {
    let total = a.sum();
    if total == 0.0 {
        0.0
    } else {
        lambda0 * (a.rows() * a.cols()) as f64 / total
    }
}

/// Counts `Y_ij ~ Poisson(lambda · A_ij)`.
pub fn gen_poisson<R: Rng + ?Sized>(a: &Matrix<f64>, lambda0: f64, rng: &mut R) -> Result<Matrix<u64>> {
    if !(lambda0 > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda0 must be > 0, got {lambda0}")));
    }
    if let Some(&neg) = a.iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::NegativeIntensity(neg));
    }
    let lambda = poisson_intensity(a, lambda0);
    let mut out = Matrix::filled(a.rows(), a.cols(), 0u64);
    for (i, j, x) in a.indexed() {
        let rate = lambda * x;
        if rate > 0.0 {
            let d = Poisson::new(rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            out[(i, j)] = d.sample(rng) as u64;
        }
    }
    Ok(out)
}

/// Rank-one `Θ = α βᵀ`.
pub fn gen_theta<R: Rng + ?Sized>(p1: usize, p2: usize, kind: ThetaKind, rng: &mut R) -> Result<Matrix<f64>> {
    let w = kind.width();
    if !(0.0..1.0).contains(&w) {
        return Err(Error::InvalidParameter(format!("theta width must lie in [0, 1), got {w}")));
    }
    let alpha: Vec<f64> = (0..p1).map(|_| 1.0 - w * rng.random::<f64>()).collect();
    let beta: Vec<f64> = (0..p2).map(|_| 1.0 - w * rng.random::<f64>()).collect();
    Ok(Matrix::from_fn(p1, p2, |i, j| alpha[i] * beta[j]))
}

/// Independent Bernoulli(Θ_ij) indicators on the observable strips; block 22
/// stays unobserved.
pub fn sample_mask<R: Rng + ?Sized>(theta: &Matrix<f64>, partition: BlockPartition, rng: &mut R) -> Result<Mask> {
    if theta.shape() != partition.shape() {
        return Err(Error::DimensionMismatch {
            context: "sample_mask",
            expected: partition.shape(),
            found: theta.shape(),
        });
    }
    // one uniform per cell regardless of block keeps streams aligned across partitions
    Ok(Matrix::from_fn(theta.rows(), theta.cols(), |i, j| {
        let u: f64 = rng.random();
        partition.in_strips(i, j) && u < theta[(i, j)]
    }))
}

/// Rectangle `(rows, cols)` of missing entries (bottom-right) for a scenario.
pub fn scenario_extent(scenario: Scenario, n: usize, p: usize) -> Result<(usize, usize)> {
    let (rows, cols) = match scenario {
        Scenario::One => (n.div_ceil(2), SCENARIO_FIXED_EXTENT),
        Scenario::Two => (SCENARIO_FIXED_EXTENT, p.div_ceil(2)),
    };
    if rows >= n {
        return Err(Error::BlockTooLarge { requested: rows, available: n });
    }
    if cols >= p {
        return Err(Error::BlockTooLarge { requested: cols, available: p });
    }
    Ok((rows, cols))
}

/// Zeroes the scenario rectangle in the bottom-right corner of `mask`, which
/// is already the block layout, and returns the matching partition.
pub fn apply_scenario_block(mask: &Mask, scenario: Scenario) -> Result<(Mask, BlockPartition)> {
    let (n, p) = mask.shape();
    let (rows, cols) = scenario_extent(scenario, n, p)?;
    let partition = BlockPartition::new(n, p, n - rows, p - cols)?;
    let out = Matrix::from_fn(n, p, |i, j| mask[(i, j)] && partition.in_strips(i, j));
    Ok((out, partition))
}

pub fn add_gaussian_noise<R: Rng + ?Sized>(a: &Matrix<f64>, sigma: f64, rng: &mut R) -> Result<Matrix<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(a.clone());
    }
    let d = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(a.map(|x| x + d.sample(rng)))
}

/// Uniformly random choice of `m1` observable rows and `m2` observable
/// columns, as a map into block layout.
pub fn random_layout<R: Rng + ?Sized>(p1: usize, p2: usize, m1: usize, m2: usize, rng: &mut R) -> Result<(LayoutMap, BlockPartition)> {
    let rows = rand::seq::index::sample(rng, p1, p1 - m1.min(p1)).into_vec();
    let cols = rand::seq::index::sample(rng, p2, p2 - m2.min(p2)).into_vec();
    LayoutMap::from_missing(p1, p2, &rows, &cols)
}

/// Nonzero slopes in the logistic truth.
pub const LOGISTIC_NONZERO: usize = 15;

/// Logistic simulation truth: design, coefficients and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticTruth {
    pub x: Matrix<f64>,
    pub beta0: f64,
    pub beta1: Vec<f64>,
    pub labels: Vec<bool>,
}

/// Standardizes every column to sample mean 0 and sample sd 1 (n − 1 denominator).
pub fn standardize_columns(a: &Matrix<f64>) -> Matrix<f64> {
    let n = a.rows();
    let mut out = a.clone();
    for j in 0..a.cols() {
        let col = a.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let sd = var.sqrt();
        for i in 0..n {
            out[(i, j)] = if sd > 0.0 { (col[i] - mean) / sd } else { 0.0 };
        }
    }
    out
}

/// `U D Vᵀ` with Gaussian factors and `D_kk ~ Gamma(shape 2, rate 2)`, then
/// column-standardized.
pub fn gen_logistic_design<R: Rng + ?Sized>(n: usize, p: usize, r: usize, rng: &mut R) -> Matrix<f64> {
    let u = gaussian_matrix(n, r, rng);
    let v = gaussian_matrix(p, r, rng);
    let gamma = Gamma::new(2.0, 0.5).expect("valid gamma");
    let d: Vec<f64> = (0..r).map(|_| gamma.sample(rng)).collect();
    standardize_columns(&scale_columns(&u, &d).matmul(&v.transpose()).expect("conformable"))
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `Z_i ~ Bernoulli(sigmoid(beta0 + x_iᵀ beta1))`.
pub fn draw_labels<R: Rng + ?Sized>(x: &Matrix<f64>, beta0: f64, beta1: &[f64], rng: &mut R) -> Vec<bool> {
    (0..x.rows())
        .map(|i| {
            let eta = beta0 + x.row(i).iter().zip(beta1).map(|(a, b)| a * b).sum::<f64>();
            rng.random::<f64>() < sigmoid(eta)
        })
        .collect()
}

/// Full logistic truth for `n` samples and `p ≥ 15` features. The design
/// comes from the `Truth` stream and coefficients/labels from `Labels`.
pub fn gen_logistic(n: usize, p: usize, r: usize, seed: u64) -> Result<LogisticTruth> {
    if p < LOGISTIC_NONZERO {
        return Err(Error::InvalidParameter(format!(
            "logistic design needs p >= {LOGISTIC_NONZERO}, got {p}"
        )));
    }
    let x = gen_logistic_design(n, p, r, &mut stream(seed, Purpose::Truth as u64));
    let mut rng = stream(seed, Purpose::Labels as u64);
    let (beta0, beta1) = draw_logistic_coefficients(p, &mut rng);
    let labels = draw_labels(&x, beta0, &beta1, &mut rng);
    Ok(LogisticTruth { x, beta0, beta1, labels })
}

/// Gaussian intercept and 15 Gaussian slopes at random positions.
pub fn draw_logistic_coefficients<R: Rng + ?Sized>(p: usize, rng: &mut R) -> (f64, Vec<f64>) {
    let beta0: f64 = StandardNormal.sample(rng);
    let mut beta1 = vec![0.0; p];
    for k in rand::seq::index::sample(rng, p, LOGISTIC_NONZERO.min(p)).into_iter() {
        let mut b: f64 = StandardNormal.sample(rng);
        while b == 0.0 {
            b = StandardNormal.sample(rng);
        }
        beta1[k] = b;
    }
    (beta0, beta1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::singular_values;
    use crate::rng::stream;

    #[test]
    fn lowrank_has_unit_singular_values_and_is_deterministic() {
        let spec = GenSpec { kind: GenKind::LowrankOrthogonal, p1: 40, p2: 30, r: 3, seed: 11 };
        let a = spec.generate().unwrap();
        assert_eq!(a, spec.generate().unwrap());
        let s = singular_values(&a).unwrap();
        for &x in &s[..3] {
            assert!((x - 1.0).abs() < 1e-10);
        }
        assert!(s[3] <= 1e-10 * s[0]);
    }

    #[test]
    fn approx_lowrank_profile() {
        assert!(decay_profile(10, 3, 0.0).iter().all(|&x| x == 1.0));
        let spec = GenSpec { kind: GenKind::ApproxLowrank { alpha: 1.5 }, p1: 30, p2: 25, r: 3, seed: 2 };
        let s = singular_values(&spec.generate().unwrap()).unwrap();
        let want = decay_profile(25, 3, 1.5);
        for (a, b) in s.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        // tail mass bound: Σ_{j>r} σ_j² ≤ Σ_j j^{-2α} = ζ(2α)
        let alpha = 4.0;
        let tail: f64 = decay_profile(300, 3, alpha)[3..].iter().map(|x| x * x).sum();
        let zeta8 = std::f64::consts::PI.powi(8) / 9450.0;
        assert!(tail <= zeta8);
    }

    #[test]
    fn theta_is_rank_one() {
        let th = gen_theta(6, 5, ThetaKind::Band { eta: 0.25 }, &mut stream(1, 0)).unwrap();
        for i in 0..5 {
            for j in 0..4 {
                let minor = th[(i, j)] * th[(i + 1, j + 1)] - th[(i, j + 1)] * th[(i + 1, j)];
                assert!(minor.abs() <= 1e-12);
            }
        }
        let ones = gen_theta(3, 3, ThetaKind::Band { eta: 0.0 }, &mut stream(1, 0)).unwrap();
        assert!(ones.iter().all(|&x| x == 1.0));
        assert!(gen_theta(3, 3, ThetaKind::UniformScaled { c: 1.0 }, &mut stream(1, 0)).is_err());
    }

    #[test]
    fn theta_mean_matches_product_of_means() {
        // E[(1 - 0.05 U)(1 - 0.05 U')] = 0.975² = 0.950625
        let th = gen_theta(400, 400, ThetaKind::UniformScaled { c: 0.05 }, &mut stream(5, 0)).unwrap();
        let mean = th.sum() / th.as_slice().len() as f64;
        assert!((mean - 0.950625).abs() < 2e-3, "{mean}");
        assert!(th.iter().all(|&x| (0.95 * 0.95..=1.0).contains(&x)));
    }

    #[test]
    fn mask_sampling() {
        let part = BlockPartition::new(100, 100, 100, 100).unwrap();
        let half = Matrix::filled(100, 100, 0.5);
        let m = sample_mask(&half, part, &mut stream(3, 0)).unwrap();
        let frac = m.iter().filter(|&&b| b).count() as f64 / 1e4;
        assert!((frac - 0.5).abs() <= 3.0 * (0.25f64 / 1e4).sqrt());

        let part = BlockPartition::new(10, 8, 6, 5).unwrap();
        let m = sample_mask(&Matrix::filled(10, 8, 1.0), part, &mut stream(3, 0)).unwrap();
        for (i, j, b) in m.indexed() {
            assert_eq!(b, part.in_strips(i, j));
        }
    }

    #[test]
    fn scenario_blocks() {
        let full = Matrix::filled(100, 70, true);
        let (m, part) = apply_scenario_block(&full, Scenario::One).unwrap();
        assert_eq!((part.p1() - part.m1(), part.p2() - part.m2()), (50, 45));
        assert_eq!(m.iter().filter(|&&b| !b).count(), 50 * 45);
        assert!(!m[(99, 69)] && m[(49, 69)] && m[(99, 24)]);

        let full = Matrix::filled(70, 100, true);
        let (m, part) = apply_scenario_block(&full, Scenario::Two).unwrap();
        assert_eq!((part.p1() - part.m1(), part.p2() - part.m2()), (45, 50));
        assert_eq!(m.iter().filter(|&&b| !b).count(), 45 * 50);

        // zeros outside the rectangle stay, ones are never added
        let sparse = Matrix::from_fn(100, 70, |i, j| (i + j) % 2 == 0);
        let (m, part) = apply_scenario_block(&sparse, Scenario::One).unwrap();
        for (i, j, b) in m.indexed() {
            assert_eq!(b, sparse[(i, j)] && part.in_strips(i, j));
        }
        assert!(matches!(
            apply_scenario_block(&Matrix::filled(60, 40, true), Scenario::One),
            Err(Error::BlockTooLarge { .. })
        ));
    }

    #[test]
    fn gaussian_noise_scale() {
        let a = Matrix::<f64>::zeros(100, 1000);
        assert_eq!(add_gaussian_noise(&a, 0.0, &mut stream(1, 1)).unwrap(), a);
        let noisy = add_gaussian_noise(&a, 0.7, &mut stream(1, 1)).unwrap();
        assert_eq!(noisy, add_gaussian_noise(&a, 0.7, &mut stream(1, 1)).unwrap());
        let n = 1e5;
        let mean = noisy.sum() / n;
        let sd = (noisy.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd / 0.7 - 1.0).abs() < 0.02, "{sd}");
        assert!(add_gaussian_noise(&a, -1.0, &mut stream(1, 1)).is_err());
    }

    #[test]
    fn poisson_counts() {
        let zero = Matrix::<f64>::zeros(4, 4);
        assert!(gen_poisson(&zero, 10.0, &mut stream(1, 2)).unwrap().iter().all(|&c| c == 0));
        let neg = Matrix::from_rows(&[[1.0, -0.5]]).unwrap();
        assert_eq!(gen_poisson(&neg, 1.0, &mut stream(1, 2)).unwrap_err(), Error::NegativeIntensity(-0.5));

        let spec = GenSpec { kind: GenKind::Poisson { lambda0: 10.0 }, p1: 300, p2: 300, r: 3, seed: 9 };
        let a = spec.generate().unwrap();
        assert!(a.iter().all(|&x| x >= 0.0));
        let y = gen_poisson(&a, 10.0, &mut stream(9, 2)).unwrap();
        let mean = y.iter().map(|&c| c as f64).sum::<f64>() / 9e4;
        assert!((mean / 10.0 - 1.0).abs() < 0.05, "{mean}");

        // constant intensity: variance ≈ mean
        let flat = Matrix::filled(200, 200, 1.0);
        let y = gen_poisson(&flat, 4.0, &mut stream(9, 3)).unwrap();
        let vals: Vec<f64> = y.iter().map(|&c| c as f64).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (vals.len() as f64 - 1.0);
        assert!((v / m - 1.0).abs() < 0.05, "mean {m} var {v}");
    }

    #[test]
    fn logistic_truth_invariants() {
        let t = gen_logistic(200, 30, 5, 4).unwrap();
        for j in 0..30 {
            let c = t.x.column(j);
            let mean = c.iter().sum::<f64>() / 200.0;
            let sd = (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 199.0).sqrt();
            assert!(mean.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10);
        }
        assert_eq!(t.beta1.iter().filter(|&&b| b != 0.0).count(), 15);
        assert_eq!(t.labels.len(), 200);
        assert!(gen_logistic(10, 14, 5, 4).is_err());
    }

    #[test]
    fn zero_slope_labels_follow_base_rate() {
        let x = Matrix::<f64>::zeros(10_000, 3);
        let beta0 = 0.4;
        let z = draw_labels(&x, beta0, &[0.0; 3], &mut stream(2, 6));
        let freq = z.iter().filter(|&&b| b).count() as f64 / 1e4;
        let p = sigmoid(beta0);
        assert!((freq - p).abs() <= 3.0 * (p * (1.0 - p) / 1e4).sqrt());
    }

    #[test]
    fn random_layout_is_a_permutation() {
        let (map, part) = random_layout(20, 15, 8, 5, &mut stream(1, 4)).unwrap();
        assert_eq!((part.m1(), part.m2()), (8, 5));
        let mut rows = map.rows.clone();
        rows.sort_unstable();
        assert_eq!(rows, (0..20).collect::<Vec<_>>());
    }
}
