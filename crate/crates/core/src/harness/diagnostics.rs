//! Monte Carlo variability of the fast double bootstrap on a single dataset.

use crate::bootstrap::{double_bootstrap_with, fast_double_bootstrap_with, BootstrapPlan, Variant};
use crate::design::DesignMatrices;
use crate::error::{Error, Result};
use crate::flctest::{flc_p_value, flc_statistic_with};
use crate::projection::build_projection_pair;
use crate::rng::derive_key;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdbRun {
    pub f_obs: f64,
    /// `Q̂**_B − F_obs`.
    pub q_minus_f: f64,
    /// First-level (residual bootstrap) p-value from the same resamples.
    pub p_bt: f64,
    pub p_fdb: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdbDiagnostics {
    pub p_flc: f64,
    pub runs: Vec<FdbRun>,
    pub p_db: Option<f64>,
}

impl FdbDiagnostics {
    pub fn mean_p_fdb(&self) -> f64 {
        self.runs.iter().map(|r| r.p_fdb).sum::<f64>() / self.runs.len() as f64
    }
}

/// Repeat the fast double bootstrap `mc_reps` times on one dataset with
/// independent streams `(plan.seed, rep)`. With `double = Some((B₁, B₂))`, one
/// full double bootstrap is run as well for comparison.
pub fn fdb_diagnostics(
    design: &DesignMatrices,
    plan: &BootstrapPlan,
    mc_reps: usize,
    double: Option<(usize, usize)>,
) -> Result<FdbDiagnostics> {
    if mc_reps == 0 {
        return Err(Error::DomainError("mc_reps must be ≥ 1".into()));
    }
    if plan.variant != Variant::FastDouble {
        return Err(Error::DomainError("diagnostics need a fast double bootstrap plan".into()));
    }
    let pair = build_projection_pair(design, None)?;
    let y = design.y().as_slice();
    let p_flc = flc_p_value(&flc_statistic_with(design, &pair)?)?;
    let runs = (0..mc_reps)
        .map(|rep| {
            let p = plan.clone().with_seed(derive_key(plan.seed, &[rep as u64]));
            let out = fast_double_bootstrap_with(&pair, y, &p)?;
            Ok(FdbRun {
                f_obs: out.result.statistic,
                q_minus_f: out.q_hat - out.result.statistic,
                p_bt: out.p_first,
                p_fdb: out.result.p_value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let p_db = match double {
        None => None,
        Some((b1, b2)) => {
            let p = BootstrapPlan::double(b1, b2, derive_key(plan.seed, &[u64::MAX]))
                .with_parallel(plan.parallel);
            Some(double_bootstrap_with(&pair, y, &p)?.result.p_value)
        }
    };
    Ok(FdbDiagnostics { p_flc, runs, p_db })
}
