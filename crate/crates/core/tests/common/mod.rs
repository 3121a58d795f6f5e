//! Oracles and fixtures shared by the integration and acceptance tests.
//!
//! Everything here is deliberately independent of the library's own QR and
//! special-function code: least squares goes through nalgebra's SVD, F
//! probabilities through numerical quadrature or statrs.

#![allow(dead_code)]

use flcboot_core::DesignMatrices;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal_matrix(r: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}

pub fn normal_vector(r: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.sample(StandardNormal))
}

/// Random full-rank design: intercept plus `p − 1` normal covariates, `z_cols`
/// normal random-effect columns, and `n` observations. Sizes are drawn from
/// the seed so property tests only shrink over one integer.
pub fn random_design(seed: u64) -> DesignMatrices {
    let mut r = rng(seed);
    let p = r.random_range(1..=3);
    let z_cols = r.random_range(2..=6);
    let r0 = r.random_range(0..z_cols);
    let n = r.random_range((p + z_cols + 3)..=40);
    let mut x = normal_matrix(&mut r, n, p);
    x.column_mut(0).fill(1.0);
    let z = normal_matrix(&mut r, n, z_cols);
    let y = normal_vector(&mut r, n);
    DesignMatrices::new(y, x, z, r0).unwrap()
}

/// Block-diagonal clustered design in the shape of the simulation settings:
/// `n` clusters of size `m`, random covariates `[1, w…]` per cluster, stored
/// effect-major.
pub fn clustered_design(seed: u64, n: usize, m: usize, p: usize, q: usize, r0_effects: usize) -> DesignMatrices {
    let mut r = rng(seed);
    let big_n = n * m;
    let mut x = normal_matrix(&mut r, big_n, p);
    x.column_mut(0).fill(1.0);
    let mut z = DMatrix::zeros(big_n, q * n);
    for i in 0..n {
        for row in i * m..(i + 1) * m {
            z[(row, i)] = 1.0;
            for e in 1..q {
                z[(row, e * n + i)] = r.sample(StandardNormal);
            }
        }
    }
    let y = normal_vector(&mut r, big_n);
    DesignMatrices::new(y, x, z, r0_effects * n).unwrap()
}

pub fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Numerical rank from singular values, with the usual `max(N, k)·ε·σ_max` cut.
pub fn svd_rank(a: &DMatrix<f64>) -> usize {
    if a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Minimum-norm least-squares fitted values via the SVD pseudo-inverse.
pub fn svd_fitted(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(y.len());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    let coef = svd.solve(y, tol).unwrap();
    a * coef
}

pub fn svd_rss(a: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    (y - svd_fitted(a, y)).norm_squared()
}

/// Normal-equations fit (Cholesky of `AᵀA`); only for full-column-rank `A`.
pub fn normal_equations_fitted(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let ata = a.transpose() * a;
    let aty = a.transpose() * y;
    let beta = ata.cholesky().expect("full column rank").solve(&aty);
    a * beta
}

/// Textbook nested-model F from two separate least-squares regressions.
pub fn nested_ols_f(design: &DesignMatrices) -> (f64, usize, usize) {
    let null = design.null_design();
    let full = design.full_design();
    let y = design.y();
    let rss0 = svd_rss(&null, y);
    let rss1 = svd_rss(&full, y);
    let k0 = svd_rank(&null);
    let k1 = svd_rank(&full);
    let d1 = k1 - k0;
    let d2 = y.len() - k1;
    (((rss0 - rss1) / d1 as f64) / (rss1 / d2 as f64), d1, d2)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Kolmogorov–Smirnov distance of a sample from a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn ks_uniform(p: &[f64]) -> f64 {
    ks_distance(p, |x| x.clamp(0.0, 1.0))
}

/// Sample mean, variance (1/n), skewness and kurtosis (not excess).
pub fn moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    (mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2))
}

/// Standardized t₃ CDF: `T/√3` with `T ~ t₃`.
pub fn std_t3_cdf(x: f64) -> f64 {
    let t = x * 3f64.sqrt();
    let s3 = 3f64.sqrt();
    0.5 + (t / (s3 * (1.0 + t * t / 3.0)) + (t / s3).atan()) / std::f64::consts::PI
}

/// Adaptive Simpson quadrature.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// F(d1, d2) density, normalizing constant by quadrature-free Γ ratio.
pub fn f_density(x: f64, d1: f64, d2: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    if x <= 0.0 {
        return 0.0;
    }
    let lb = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
    let ln = 0.5 * d1 * (d1 / d2).ln() + (0.5 * d1 - 1.0) * x.ln()
        - 0.5 * (d1 + d2) * (1.0 + d1 * x / d2).ln()
        - lb;
    ln.exp()
}
