//! Error, random-effect and Wishart variate generation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixing weight of the wide component in the contamination model.
pub const CONTAMINATION_PROB: f64 = 0.2;
/// Variance ratio of the wide component to the core component.
pub const CONTAMINATION_VAR_RATIO: f64 = 9.0;

/// Core-component variance giving the mixture unit variance: `1 / (0.8 + 0.2·9)`.
pub fn contamination_core_variance() -> f64 {
    1.0 / ((1.0 - CONTAMINATION_PROB) + CONTAMINATION_PROB * CONTAMINATION_VAR_RATIO)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorKind {
    #[serde(rename = "normal")]
    Normal,
    /// Student's t with 3 df, standardized.
    #[serde(rename = "student")]
    StudentT3,
    /// χ²₃ shifted and scaled to mean 0, variance 1.
    #[serde(rename = "chisq")]
    Chisq3Centered,
    /// 80/20 two-component normal mixture with a 9× variance contaminant.
    #[serde(rename = "2CMM")]
    TwoCompMixture,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 4] = [
        ErrorKind::Normal,
        ErrorKind::StudentT3,
        ErrorKind::Chisq3Centered,
        ErrorKind::TwoCompMixture,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ErrorKind::Normal => "normal",
            ErrorKind::StudentT3 => "student",
            ErrorKind::Chisq3Centered => "chisq",
            ErrorKind::TwoCompMixture => "2CMM",
        }
    }

    /// One variate with mean 0 and variance 1.
    pub fn draw_standard<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            ErrorKind::Normal => rng.sample(StandardNormal),
            ErrorKind::StudentT3 => {
                let z: f64 = rng.sample(StandardNormal);
                let chi = sum_sq_normals(rng, 3);
                // t₃ has variance 3.
                z / (chi / 3.0).sqrt() / 3f64.sqrt()
            }
            ErrorKind::Chisq3Centered => (sum_sq_normals(rng, 3) - 3.0) / 6f64.sqrt(),
            ErrorKind::TwoCompMixture => {
                let core_sd = contamination_core_variance().sqrt();
                let contaminated = rng.random::<f64>() < CONTAMINATION_PROB;
                let z: f64 = rng.sample(StandardNormal);
                if contaminated {
                    z * core_sd * CONTAMINATION_VAR_RATIO.sqrt()
                } else {
                    z * core_sd
                }
            }
        }
    }
}

fn sum_sq_normals<R: Rng + ?Sized>(rng: &mut R, k: usize) -> f64 {
    (0..k)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * z
        })
        .sum()
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ErrorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ErrorKind::ALL
            .into_iter()
            .find(|k| k.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::ConfigError(format!("unknown error distribution `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub kind: ErrorKind,
    /// Error standard deviation; `cov(ε) = σ²I`.
    pub sigma: f64,
}

impl ErrorDistribution {
    pub fn new(kind: ErrorKind, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::DomainError(format!("error scale sigma = {sigma}")));
        }
        Ok(Self { kind, sigma })
    }

    pub fn standard(kind: ErrorKind) -> Self {
        Self { kind, sigma: 1.0 }
    }
}

pub fn draw_error_vector<R: Rng + ?Sized>(
    dist: &ErrorDistribution,
    n: usize,
    rng: &mut R,
) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| dist.sigma * dist.kind.draw_standard(rng)))
}

/// Square root `M` with `M Mᵀ = D` for symmetric PSD `D`, from a diagonally
/// pivoted Cholesky factorization. Trailing pivots within tolerance of zero
/// are clamped, so singular `D` yields a rank-deficient `M` (`k × rank`).
pub fn psd_sqrt(d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = d.nrows();
    if d.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}×{}",
            d.nrows(),
            d.ncols()
        )));
    }
    if !d.iter().all(|v| v.is_finite()) {
        return Err(Error::DomainError("non-finite covariance entry".into()));
    }
    for i in 0..k {
        for j in 0..i {
            let (a, b) = (d[(i, j)], d[(j, i)]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::DomainError("covariance is not symmetric".into()));
            }
        }
    }
    let max_diag = (0..k).fold(0.0_f64, |m, i| m.max(d[(i, i)].abs()));
    let tol = 16.0 * k as f64 * f64::EPSILON * max_diag.max(f64::MIN_POSITIVE);

    let mut a = d.clone();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut l = DMatrix::<f64>::zeros(k, k);
    let mut rank = 0;
    for j in 0..k {
        let (piv, piv_val) = (j..k)
            .map(|i| (i, a[(i, i)]))
            .fold((j, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        if piv_val <= tol {
            // Remaining Schur complement must vanish for PSD input.
            for r in j..k {
                for c in j..k {
                    let v = a[(r, c)];
                    if (r == c && v < -tol) || (r != c && v.abs() > tol) {
                        return Err(Error::NotPsd { step: j, pivot: v });
                    }
                }
            }
            break;
        }
        if piv != j {
            a.swap_rows(j, piv);
            a.swap_columns(j, piv);
            l.swap_rows(j, piv);
            perm.swap(j, piv);
        }
        let s = piv_val.sqrt();
        l[(j, j)] = s;
        for i in j + 1..k {
            l[(i, j)] = a[(i, j)] / s;
        }
        for c in j + 1..k {
            for r in c..k {
                let v = a[(r, c)] - l[(r, j)] * l[(c, j)];
                a[(r, c)] = v;
                a[(c, r)] = v;
            }
        }
        rank += 1;
    }
    // Undo the symmetric permutation on rows: D = (P L)(P L)ᵀ.
    let mut m = DMatrix::zeros(k, rank);
    for (row, &orig) in perm.iter().enumerate() {
        for c in 0..rank {
            m[(orig, c)] = l[(row, c)];
        }
    }
    Ok(m)
}

/// `count` iid rows from `N(0, D)`.
pub fn draw_mvnormal<R: Rng + ?Sized>(
    d: &DMatrix<f64>,
    count: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let root = psd_sqrt(d)?;
    Ok(draw_with_root(&root, count, rng))
}

pub(crate) fn draw_with_root<R: Rng + ?Sized>(
    root: &DMatrix<f64>,
    count: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let (k, rank) = root.shape();
    let mut out = DMatrix::zeros(count, k);
    let mut z = DVector::zeros(rank);
    for row in 0..count {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let x = root * &z;
        out.row_mut(row).copy_from(&x.transpose());
    }
    out
}

/// One Wishart(`df`, `scale`) draw by the Bartlett decomposition.
pub fn draw_wishart<R: Rng + ?Sized>(
    df: usize,
    scale: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let k = scale.nrows();
    if df < k {
        return Err(Error::DomainError(format!(
            "Wishart df = {df} smaller than dimension {k}"
        )));
    }
    let root = psd_sqrt(scale)?;
    if root.ncols() != k {
        return Err(Error::DomainError(
            "Wishart scale matrix is not positive definite".into(),
        ));
    }
    let mut a = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        let chi = ChiSquared::new((df - i) as f64)
            .map_err(|e| Error::DomainError(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let m = root * a;
    let mut w = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let v = m.row(i).dot(&m.row(j));
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}
