//! Data-generating processes for the three clustered simulation settings.
//!
//! Each cluster `i` has `m` observations and `bᵢ ~ N(0, D)`. Under the default
//! [`CovariateDesign::Time`] the fixed design is `[1, t, N(0,1)…]` and each
//! cluster's random design is `[1, t, N(0,1)…]`, with `t = 1, …, m` the
//! within-cluster index: a random intercept and random time slope, plus
//! further iid normal random covariates where the setting has them.
//! [`CovariateDesign::Gaussian`] replaces `t` by iid `N(0, 1)` draws.
//!
//! `Z` is stored effect-major: column `e·n + i` holds random covariate `e` of
//! cluster `i`. Up to that column permutation it is the usual block-diagonal
//! matrix, and the leading `r0·n` columns are exactly the untested effects.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrices;
use crate::distributions::{
    draw_error_vector, draw_wishart, draw_with_root, psd_sqrt, ErrorDistribution,
};
use crate::error::{Error, Result};

/// Redraws of the Wishart block allowed when assembling a Setting 3 covariance.
pub const S3_MAX_REDRAWS: usize = 100;
pub const S3_WISHART_DF: usize = 3;
pub const S3_WISHART_SCALE: f64 = 0.5;

/// How the non-intercept covariates are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CovariateDesign {
    /// Second fixed and second random covariate both equal the
    /// within-cluster index `t = 1, …, m`; the rest iid `N(0, 1)`.
    #[default]
    Time,
    /// Every non-intercept covariate iid `N(0, 1)`, drawn separately for the
    /// fixed and random designs.
    Gaussian,
}

impl CovariateDesign {
    pub fn tag(self) -> &'static str {
        match self {
            CovariateDesign::Time => "time",
            CovariateDesign::Gaussian => "gaussian",
        }
    }
}

impl FromStr for CovariateDesign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "time" => Ok(CovariateDesign::Time),
            "gaussian" => Ok(CovariateDesign::Gaussian),
            _ => Err(Error::ConfigError(format!("unknown covariate design `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    S1,
    S2,
    S3,
}

impl Setting {
    /// Fixed-effect columns, intercept included.
    pub fn fixed_covariates(self) -> usize {
        match self {
            Setting::S1 | Setting::S2 => 2,
            Setting::S3 => 8,
        }
    }

    /// Random effects per cluster.
    pub fn random_covariates(self) -> usize {
        match self {
            Setting::S1 => 2,
            Setting::S2 => 3,
            Setting::S3 => 4,
        }
    }

    /// Untested leading random effects under the default hypothesis.
    pub fn default_r0(self) -> usize {
        match self {
            Setting::S1 => 0,
            Setting::S2 => 1,
            Setting::S3 => 2,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Setting::S1 => "S1",
            Setting::S2 => "S2",
            Setting::S3 => "S3",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" | "1" => Ok(Setting::S1),
            "S2" | "2" => Ok(Setting::S2),
            "S3" | "3" => Ok(Setting::S3),
            _ => Err(Error::ConfigError(format!("unknown setting `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub setting: Setting,
    pub n_clusters: usize,
    pub cluster_size: usize,
    /// Random-effect covariance. For S3 this is the τ-part only (top-left block
    /// zero); the Wishart block is drawn per dataset.
    pub d: DMatrix<f64>,
    pub tau: f64,
    pub error: ErrorDistribution,
    pub beta: Vec<f64>,
    pub covariates: CovariateDesign,
    /// Replaces the setting's default `r0` (S3 with `r0 = 3` tests R4 alone).
    pub r0_override: Option<usize>,
    pub label: Option<String>,
}

impl ScenarioSpec {
    fn base(setting: Setting, n: usize, m: usize, d: DMatrix<f64>, tau: f64, error: ErrorDistribution) -> Self {
        Self {
            setting,
            n_clusters: n,
            cluster_size: m,
            d,
            tau,
            error,
            beta: vec![1.0; setting.fixed_covariates()],
            covariates: CovariateDesign::default(),
            r0_override: None,
            label: None,
        }
    }

    /// Setting 1 with a 2×2 `D` given row-major.
    pub fn setting1(n: usize, m: usize, d: [f64; 4], error: ErrorDistribution) -> Self {
        Self::base(Setting::S1, n, m, DMatrix::from_row_slice(2, 2, &d), 0.0, error)
    }

    /// Setting 2: `D₁₁ = 1`, no coupling to the tested pair, and the tested
    /// 2×2 block `[D]₂` given row-major.
    pub fn setting2(n: usize, m: usize, block: [f64; 4], error: ErrorDistribution) -> Self {
        let mut d = DMatrix::zeros(3, 3);
        d[(0, 0)] = 1.0;
        d[(1, 1)] = block[0];
        d[(1, 2)] = block[1];
        d[(2, 1)] = block[2];
        d[(2, 2)] = block[3];
        Self::base(Setting::S2, n, m, d, 0.0, error)
    }

    pub fn setting3(n: usize, m: usize, tau: f64, error: ErrorDistribution) -> Self {
        Self::base(Setting::S3, n, m, s3_tau_part(tau), tau, error)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_covariates(mut self, covariates: CovariateDesign) -> Self {
        self.covariates = covariates;
        self
    }

    pub fn with_r0(mut self, r0: usize) -> Self {
        self.r0_override = Some(r0);
        self
    }

    pub fn n_obs(&self) -> usize {
        self.n_clusters * self.cluster_size
    }

    /// Untested random effects per cluster.
    pub fn r0(&self) -> usize {
        self.r0_override.unwrap_or(self.setting.default_r0())
    }

    /// Label of the covariance used as a table key.
    pub fn d_label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.setting {
            Setting::S3 => format!("tau={}", self.tau),
            _ => {
                let q = self.setting.random_covariates();
                let lo = q - 2;
                let e: Vec<String> = (lo..q)
                    .flat_map(|i| (lo..q).map(move |j| (i, j)))
                    .map(|(i, j)| format!("{}", self.d[(i, j)]))
                    .collect();
                format!("D({})", e.join(";"))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.setting.random_covariates();
        let p = self.setting.fixed_covariates();
        if self.n_clusters == 0 || self.cluster_size == 0 {
            return Err(Error::DomainError("n and m must be ≥ 1".into()));
        }
        if self.d.shape() != (q, q) {
            return Err(Error::DomainError(format!(
                "{} needs a {q}×{q} D, got {}×{}",
                self.setting,
                self.d.nrows(),
                self.d.ncols()
            )));
        }
        if self.beta.len() != p {
            return Err(Error::DomainError(format!(
                "{} needs {p} fixed coefficients, got {}",
                self.setting,
                self.beta.len()
            )));
        }
        if !self.d.iter().chain(self.beta.iter()).all(|v| v.is_finite()) {
            return Err(Error::DomainError("non-finite D or beta".into()));
        }
        let r0 = self.r0();
        if r0 >= q {
            return Err(Error::DomainError(format!("r0 = {r0} leaves nothing to test")));
        }
        match self.setting {
            Setting::S2 => {
                if self.d[(0, 0)] != 1.0
                    || self.d[(0, 1)] != 0.0
                    || self.d[(0, 2)] != 0.0
                    || self.d[(1, 0)] != 0.0
                    || self.d[(2, 0)] != 0.0
                {
                    return Err(Error::DomainError(
                        "S2 requires D11 = 1 and zero coupling to the tested block".into(),
                    ));
                }
            }
            Setting::S3 => {
                if !(self.tau >= 0.0) {
                    return Err(Error::DomainError(format!("tau = {}", self.tau)));
                }
            }
            Setting::S1 => {}
        }
        if self.setting != Setting::S3 {
            psd_sqrt(&self.d)?;
        }
        Ok(())
    }
}

/// τ-part of the Setting 3 covariance: bottom-right block `[[τ, τ/2], [τ/2, τ]]`,
/// all cross entries `τ/2`, top-left block zero.
fn s3_tau_part(tau: f64) -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |i, j| {
        if i < 2 && j < 2 {
            0.0
        } else if i == j {
            tau
        } else {
            tau / 2.0
        }
    })
}

/// `(r0, tested block is zero)`.
pub fn tested_split(spec: &ScenarioSpec) -> (usize, bool) {
    let r0 = spec.r0();
    let zero = match spec.setting {
        Setting::S3 => spec.tau == 0.0,
        _ => tested_block_zero(&spec.d, r0),
    };
    (r0, zero)
}

/// Whether every entry of `D` touching effects `r0..` is zero.
fn tested_block_zero(d: &DMatrix<f64>, r0: usize) -> bool {
    let q = d.nrows();
    (0..q).all(|i| (0..q).all(|j| (i < r0 && j < r0) || d[(i, j)] == 0.0))
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub design: DesignMatrices,
    pub truth: ScenarioSpec,
    /// Covariance the random effects were actually drawn from.
    pub d: DMatrix<f64>,
    /// Random effects, effect-major like the columns of `Z`.
    pub b: DVector<f64>,
    pub null_is_true: bool,
}

fn s3_covariance<R: Rng + ?Sized>(tau: f64, rng: &mut R) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let scale = DMatrix::identity(2, 2) * S3_WISHART_SCALE;
    let mut last = Error::NotPsd { step: 0, pivot: f64::NAN };
    for _ in 0..S3_MAX_REDRAWS {
        let w = draw_wishart(S3_WISHART_DF, &scale, rng)?;
        let mut d = s3_tau_part(tau);
        d.view_mut((0, 0), (2, 2)).copy_from(&w);
        match psd_sqrt(&d) {
            Ok(root) => return Ok((d, root)),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Simulate one dataset from `spec`.
pub fn generate<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<GeneratedDataset> {
    spec.validate()?;
    let (n, m) = (spec.n_clusters, spec.cluster_size);
    let big_n = n * m;
    let p = spec.setting.fixed_covariates();
    let q = spec.setting.random_covariates();

    let time = spec.covariates == CovariateDesign::Time;
    let mut covariate = |row: usize, j: usize| match j {
        0 => 1.0,
        1 if time => (row % m + 1) as f64,
        _ => rng.sample(StandardNormal),
    };
    let x = DMatrix::from_fn(big_n, p, &mut covariate);
    // Random covariates per observation, intercept first.
    let w = DMatrix::from_fn(big_n, q, &mut covariate);
    let (d, root) = match spec.setting {
        Setting::S3 => s3_covariance(spec.tau, rng)?,
        _ => (spec.d.clone(), psd_sqrt(&spec.d)?),
    };
    let b_rows = draw_with_root(&root, n, rng);
    let eps = draw_error_vector(&spec.error, big_n, rng);

    let mut z = DMatrix::zeros(big_n, q * n);
    let mut b = DVector::zeros(q * n);
    for i in 0..n {
        for e in 0..q {
            b[e * n + i] = b_rows[(i, e)];
        }
    }
    let beta = DVector::from_column_slice(&spec.beta);
    let mut y = &x * beta + eps;
    for row in 0..big_n {
        let i = row / m;
        for e in 0..q {
            z[(row, e * n + i)] = w[(row, e)];
            y[row] += w[(row, e)] * b_rows[(i, e)];
        }
    }

    let r0 = spec.r0();
    let null_is_true = tested_block_zero(&d, r0);
    let design = DesignMatrices::new(y, x, z, r0 * n)?;
    Ok(GeneratedDataset {
        design,
        truth: spec.clone(),
        d,
        b,
        null_is_true,
    })
}
