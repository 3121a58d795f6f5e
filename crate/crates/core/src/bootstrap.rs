//! Residual bootstrap counterparts of the FLC test.
//!
//! All procedures resample residuals around the null fitted values
//! `P_{X,Z₀}y` and recompute the F statistic on `(y*, X, Z)` against the
//! factorizations of the original design, since `X` and `Z` do not change.
//!
//! Resample `k` of a call draws from its own stream derived from
//! `(plan.seed, k)`, so sequential and parallel evaluation agree bit for bit.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::design::DesignMatrices;
use crate::error::{Error, Result};
use crate::flctest::{statistic_for, Method, TestResult};
use crate::projection::{build_projection_pair, ProjectionPair};
use crate::rng::{stream, StreamRng};

/// What the resampling procedures need from a fitted design.
///
/// Implemented by [`ProjectionPair`]; wrappers (for instance a call counter)
/// can be slotted in front of the real kernels.
pub trait ResampleModel: Sync {
    fn n_obs(&self) -> usize;
    fn df(&self) -> (usize, usize);
    /// F statistic of response `y`.
    fn statistic(&self, y: &[f64]) -> Result<f64>;
    /// `P_{X,Z₀}y`.
    fn null_fitted(&self, y: &[f64]) -> Result<Vec<f64>>;
    /// `P_{X,Z}y`.
    fn full_fitted(&self, y: &[f64]) -> Result<Vec<f64>>;
}

impl ResampleModel for ProjectionPair {
    fn n_obs(&self) -> usize {
        ProjectionPair::n_obs(self)
    }

    fn df(&self) -> (usize, usize) {
        (self.df_num, self.df_den)
    }

    fn statistic(&self, y: &[f64]) -> Result<f64> {
        statistic_for(self, y)
    }

    fn null_fitted(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.project_null(y)
    }

    fn full_fitted(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.project_full(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    NullResidual,
    NonNullResidual,
    MOutOfN,
    Double,
    FastDouble,
}

impl Variant {
    pub fn method(self) -> Method {
        match self {
            Variant::NullResidual => Method::Bt,
            Variant::NonNullResidual => Method::BtNonNull,
            Variant::MOutOfN => Method::BtMn,
            Variant::Double => Method::Db,
            Variant::FastDouble => Method::Fdb,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapPlan {
    pub variant: Variant,
    /// First-level resamples (`B`, or `B₁` for the double bootstrap).
    pub b: usize,
    /// Second-level resamples per first-level sample; double bootstrap only.
    pub b2: usize,
    /// Effective resample size; m-out-of-n only.
    pub m: usize,
    pub seed: u64,
    /// Evaluate resamples on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl BootstrapPlan {
    pub fn new(variant: Variant, b: usize, seed: u64) -> Self {
        Self {
            variant,
            b,
            b2: 0,
            m: 0,
            seed,
            parallel: false,
        }
    }

    pub fn null_residual(b: usize, seed: u64) -> Self {
        Self::new(Variant::NullResidual, b, seed)
    }

    pub fn nonnull_residual(b: usize, seed: u64) -> Self {
        Self::new(Variant::NonNullResidual, b, seed)
    }

    pub fn m_out_of_n(b: usize, m: usize, seed: u64) -> Self {
        Self {
            m,
            ..Self::new(Variant::MOutOfN, b, seed)
        }
    }

    pub fn fast_double(b: usize, seed: u64) -> Self {
        Self::new(Variant::FastDouble, b, seed)
    }

    pub fn double(b1: usize, b2: usize, seed: u64) -> Self {
        Self {
            b2,
            ..Self::new(Variant::Double, b1, seed)
        }
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n_obs: usize) -> Result<()> {
        if self.b == 0 {
            return Err(Error::DomainError("bootstrap size B must be ≥ 1".into()));
        }
        match self.variant {
            Variant::Double if self.b2 == 0 => Err(Error::DomainError(
                "second-level size B2 must be ≥ 1".into(),
            )),
            Variant::MOutOfN if self.m == 0 || self.m > n_obs => Err(Error::DomainError(
                format!("m = {} outside [1, {n_obs}]", self.m),
            )),
            _ => Ok(()),
        }
    }

    /// Statistics computed by a run of this plan, the observed one included.
    pub fn evaluations(&self) -> u64 {
        let b = self.b as u64;
        match self.variant {
            Variant::NullResidual | Variant::NonNullResidual | Variant::MOutOfN => 1 + b,
            Variant::FastDouble => 1 + 2 * b,
            Variant::Double => 1 + b + b * self.b2 as u64,
        }
    }
}

/// Residual pool and centre for one resampling scheme applied to one response.
#[derive(Debug, Clone)]
pub struct ResampleSource {
    /// Null fitted values the resampled errors are added to.
    pub center: Vec<f64>,
    /// Residuals drawn from with replacement.
    pub residuals: Vec<f64>,
    /// Multiplier applied to each drawn residual.
    pub scale: f64,
}

impl ResampleSource {
    /// Null-imposed scheme: residuals of the null fit.
    pub fn null<M: ResampleModel + ?Sized>(model: &M, y: &[f64]) -> Result<Self> {
        let center = model.null_fitted(y)?;
        let residuals = y.iter().zip(&center).map(|(a, b)| a - b).collect();
        Ok(Self {
            center,
            residuals,
            scale: 1.0,
        })
    }

    /// Residuals of the full fit, centred on the null fitted values.
    pub fn nonnull<M: ResampleModel + ?Sized>(model: &M, y: &[f64]) -> Result<Self> {
        let center = model.null_fitted(y)?;
        let full = model.full_fitted(y)?;
        let residuals = y.iter().zip(&full).map(|(a, b)| a - b).collect();
        Ok(Self {
            center,
            residuals,
            scale: 1.0,
        })
    }

    /// Null residuals inflated by `√(N/m)`.
    pub fn m_out_of_n<M: ResampleModel + ?Sized>(model: &M, y: &[f64], m: usize) -> Result<Self> {
        let n = y.len();
        if m == 0 || m > n {
            return Err(Error::DomainError(format!("m = {m} outside [1, {n}]")));
        }
        let mut src = Self::null(model, y)?;
        src.scale = (n as f64 / m as f64).sqrt();
        Ok(src)
    }

    fn for_variant<M: ResampleModel + ?Sized>(
        model: &M,
        y: &[f64],
        plan: &BootstrapPlan,
    ) -> Result<Self> {
        match plan.variant {
            Variant::NonNullResidual => Self::nonnull(model, y),
            Variant::MOutOfN => Self::m_out_of_n(model, y, plan.m),
            _ => Self::null(model, y),
        }
    }

    /// Residual entries drawn iid uniformly with replacement, before scaling.
    pub fn draw_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.residuals.len();
        (0..n)
            .map(|_| self.residuals[rng.random_range(0..n)])
            .collect()
    }

    /// One resampled response `center + scale · ε*`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.residuals.len();
        let s = self.scale;
        self.center
            .iter()
            .map(|c| c + s * self.residuals[rng.random_range(0..n)])
            .collect()
    }
}

pub fn resample_null<R: Rng + ?Sized>(
    design: &DesignMatrices,
    pair: &ProjectionPair,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let src = ResampleSource::null(pair, design.y().as_slice())?;
    Ok(DVector::from_vec(src.draw(rng)))
}

pub fn resample_nonnull<R: Rng + ?Sized>(
    design: &DesignMatrices,
    pair: &ProjectionPair,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let src = ResampleSource::nonnull(pair, design.y().as_slice())?;
    Ok(DVector::from_vec(src.draw(rng)))
}

pub fn resample_m_out_of_n<R: Rng + ?Sized>(
    design: &DesignMatrices,
    pair: &ProjectionPair,
    m: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let src = ResampleSource::m_out_of_n(pair, design.y().as_slice(), m)?;
    Ok(DVector::from_vec(src.draw(rng)))
}

fn pop_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Heuristic `m` with `m/N = σ²_alt/σ²₀`: the variance ratio of full-fit to
/// null-fit residuals, rounded and clamped to `[1, N]`.
pub fn m_from_variance_ratio<M: ResampleModel + ?Sized>(model: &M, y: &[f64]) -> Result<usize> {
    let null = ResampleSource::null(model, y)?;
    let alt = ResampleSource::nonnull(model, y)?;
    let n = y.len();
    let v0 = pop_variance(&null.residuals);
    if !(v0 > 0.0) {
        return Ok(n);
    }
    let ratio = pop_variance(&alt.residuals) / v0;
    Ok(((ratio * n as f64).round() as usize).clamp(1, n))
}

// ---------------------------------------------------------------------------
// p-value combinators
// ---------------------------------------------------------------------------

/// `#{k : F*_k > F_obs}`, ties counted as non-exceeding.
pub fn exceed_count(threshold: f64, stats: &[f64]) -> usize {
    stats.iter().filter(|&&f| f > threshold).count()
}

/// First-level bootstrap p-value `#(F* > F_obs)/B`.
pub fn exceedance_p(f_obs: f64, f_star: &[f64]) -> f64 {
    exceed_count(f_obs, f_star) as f64 / f_star.len() as f64
}

/// `Q̂**_B`: the order statistic `F**_(⌈(1 − p̂*)B⌉)` of the ascending second-level
/// statistics, index clamped to `[1, B]`. `first_exceed` is `B·p̂*`.
pub fn fdb_quantile(first_exceed: usize, f_star_star: &[f64]) -> f64 {
    let b = f_star_star.len();
    assert!(b > 0, "empty second-level sample");
    let mut sorted = f_star_star.to_vec();
    sorted.sort_by(f64::total_cmp);
    // ⌈(1 − c/B)·B⌉ = B − c exactly.
    let idx = b.saturating_sub(first_exceed).clamp(1, b);
    sorted[idx - 1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdbPValues {
    pub p_first: f64,
    pub q_hat: f64,
    pub p_fdb: f64,
}

/// Fast double bootstrap p-value from first- and second-level statistics.
pub fn fdb_p_values(f_obs: f64, f_star: &[f64], f_star_star: &[f64]) -> FdbPValues {
    assert_eq!(f_star.len(), f_star_star.len());
    let c = exceed_count(f_obs, f_star);
    let b = f_star.len() as f64;
    let q_hat = fdb_quantile(c, f_star_star);
    FdbPValues {
        p_first: c as f64 / b,
        q_hat,
        p_fdb: exceed_count(q_hat, f_star) as f64 / b,
    }
}

/// Double bootstrap p-values `(p̂*, p̂**)`.
///
/// `f_star_star[k]` holds the `B₂` second-level statistics of first-level sample `k`.
pub fn double_p_values(f_obs: f64, f_star: &[f64], f_star_star: &[Vec<f64>]) -> (f64, f64) {
    assert_eq!(f_star.len(), f_star_star.len());
    let b1 = f_star.len();
    let c = exceed_count(f_obs, f_star);
    // p̂**_k < p̂*  ⇔  c_k / B₂ < c / B₁, compared exactly in integers.
    let below = f_star
        .iter()
        .zip(f_star_star)
        .filter(|(&fk, inner)| {
            let ck = exceed_count(fk, inner) as u128;
            ck * (b1 as u128) < (c as u128) * (inner.len() as u128)
        })
        .count();
    (c as f64 / b1 as f64, below as f64 / b1 as f64)
}

// ---------------------------------------------------------------------------
// Procedures
// ---------------------------------------------------------------------------

fn map_indices<T, F>(count: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..count).into_par_iter().map(f).collect()
    } else {
        (0..count).map(f).collect()
    }
}

fn first_level_rng(plan: &BootstrapPlan, k: usize) -> StreamRng {
    stream(plan.seed, &[k as u64])
}

fn result(model: &impl ResampleModel, plan: &BootstrapPlan, f_obs: f64, p: f64) -> TestResult {
    let (df_num, df_den) = model.df();
    TestResult {
        statistic: f_obs,
        df_num,
        df_den,
        p_value: p,
        method: plan.variant.method(),
        evaluations: plan.evaluations(),
    }
}

/// Single-level bootstrap (null, non-null or m-out-of-n residuals) on a prepared model.
pub fn bootstrap_p_with<M: ResampleModel>(
    model: &M,
    y: &[f64],
    plan: &BootstrapPlan,
) -> Result<TestResult> {
    let f_star = first_level_statistics(model, y, plan)?;
    let f_obs = f_star.0;
    Ok(result(model, plan, f_obs, exceedance_p(f_obs, &f_star.1)))
}

/// `(F_obs, [F*_k])` for a single-level variant.
pub fn first_level_statistics<M: ResampleModel>(
    model: &M,
    y: &[f64],
    plan: &BootstrapPlan,
) -> Result<(f64, Vec<f64>)> {
    plan.validate(model.n_obs())?;
    if !matches!(
        plan.variant,
        Variant::NullResidual | Variant::NonNullResidual | Variant::MOutOfN
    ) {
        return Err(Error::DomainError(format!(
            "{:?} is not a single-level bootstrap",
            plan.variant
        )));
    }
    let f_obs = model.statistic(y)?;
    let src = ResampleSource::for_variant(model, y, plan)?;
    let f_star = map_indices(plan.b, plan.parallel, |k| {
        let ys = src.draw(&mut first_level_rng(plan, k));
        model.statistic(&ys)
    })?;
    Ok((f_obs, f_star))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdbOutcome {
    pub result: TestResult,
    /// First-level p̂* from the same resamples.
    pub p_first: f64,
    /// `Q̂**_B`.
    pub q_hat: f64,
}

/// Fast double bootstrap on a prepared model.
pub fn fast_double_bootstrap_with<M: ResampleModel>(
    model: &M,
    y: &[f64],
    plan: &BootstrapPlan,
) -> Result<FdbOutcome> {
    plan.validate(model.n_obs())?;
    if plan.variant != Variant::FastDouble {
        return Err(Error::DomainError("plan is not a fast double bootstrap".into()));
    }
    let f_obs = model.statistic(y)?;
    let src = ResampleSource::null(model, y)?;
    let pairs = map_indices(plan.b, plan.parallel, |k| {
        let mut rng = first_level_rng(plan, k);
        let ys = src.draw(&mut rng);
        let f1 = model.statistic(&ys)?;
        // One second-level sample from this sample's own null fit.
        let inner = ResampleSource::null(model, &ys)?;
        let yss = inner.draw(&mut rng);
        let f2 = model.statistic(&yss)?;
        Ok((f1, f2))
    })?;
    let (f_star, f_star_star): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let p = fdb_p_values(f_obs, &f_star, &f_star_star);
    Ok(FdbOutcome {
        result: result(model, plan, f_obs, p.p_fdb),
        p_first: p.p_first,
        q_hat: p.q_hat,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleOutcome {
    pub result: TestResult,
    pub p_first: f64,
}

/// Full double bootstrap on a prepared model.
pub fn double_bootstrap_with<M: ResampleModel>(
    model: &M,
    y: &[f64],
    plan: &BootstrapPlan,
) -> Result<DoubleOutcome> {
    plan.validate(model.n_obs())?;
    if plan.variant != Variant::Double {
        return Err(Error::DomainError("plan is not a double bootstrap".into()));
    }
    let f_obs = model.statistic(y)?;
    let src = ResampleSource::null(model, y)?;
    let levels = map_indices(plan.b, plan.parallel, |k| {
        let ys = src.draw(&mut first_level_rng(plan, k));
        let f1 = model.statistic(&ys)?;
        let inner = ResampleSource::null(model, &ys)?;
        let second = (0..plan.b2)
            .map(|l| {
                let mut rng = stream(plan.seed, &[k as u64, l as u64]);
                model.statistic(&inner.draw(&mut rng))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((f1, second))
    })?;
    let (f_star, f_star_star): (Vec<f64>, Vec<Vec<f64>>) = levels.into_iter().unzip();
    let (p_first, p_db) = double_p_values(f_obs, &f_star, &f_star_star);
    Ok(DoubleOutcome {
        result: result(model, plan, f_obs, p_db),
        p_first,
    })
}

/// Run any bootstrap variant on a prepared model.
pub fn run_plan_with<M: ResampleModel>(
    model: &M,
    y: &[f64],
    plan: &BootstrapPlan,
) -> Result<TestResult> {
    match plan.variant {
        Variant::FastDouble => Ok(fast_double_bootstrap_with(model, y, plan)?.result),
        Variant::Double => Ok(double_bootstrap_with(model, y, plan)?.result),
        _ => bootstrap_p_with(model, y, plan),
    }
}

/// Single-level bootstrap FLC test.
pub fn bootstrap_p(design: &DesignMatrices, plan: &BootstrapPlan) -> Result<TestResult> {
    let pair = build_projection_pair(design, None)?;
    bootstrap_p_with(&pair, design.y().as_slice(), plan)
}

/// Fast double bootstrap FLC test.
pub fn fast_double_bootstrap(design: &DesignMatrices, plan: &BootstrapPlan) -> Result<TestResult> {
    let pair = build_projection_pair(design, None)?;
    Ok(fast_double_bootstrap_with(&pair, design.y().as_slice(), plan)?.result)
}

/// Double bootstrap FLC test.
pub fn double_bootstrap(design: &DesignMatrices, plan: &BootstrapPlan) -> Result<TestResult> {
    let pair = build_projection_pair(design, None)?;
    Ok(double_bootstrap_with(&pair, design.y().as_slice(), plan)?.result)
}
