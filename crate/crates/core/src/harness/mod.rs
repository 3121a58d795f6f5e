//! Monte Carlo experiment runner.
//!
//! A run is a grid of scenarios × replicates × methods. Replicate `r` of
//! scenario `s` simulates its dataset from stream `(seed, 0, s, r)` and runs
//! method `k` with bootstrap seed `(seed, 1, s, r, k)`, so every numeric cell
//! of the table is independent of the worker count.

mod config;
mod csv;
mod diagnostics;

use std::time::Instant;

use rayon::prelude::*;

use crate::bootstrap::{m_from_variance_ratio, run_plan_with, BootstrapPlan, Variant};
use crate::error::{Error, Result};
use crate::flctest::{flc_test, Method};
use crate::projection::build_projection_pair;
use crate::rng::{derive_key, stream};
use crate::scenarios::{generate, GeneratedDataset, ScenarioSpec};

pub use self::config::{parse_config, read_config, CONFIG_SCHEMA, SCHEMA_VERSION};
pub use self::csv::{emit_csv, read_csv, render_csv, CsvRow, CSV_HEADER};
pub use self::diagnostics::{fdb_diagnostics, FdbDiagnostics, FdbRun};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_B: usize = 199;

/// One method in an experiment, with its resampling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    pub b: usize,
    pub b2: usize,
    /// m for m-out-of-n; `None` picks it per dataset from the residual variance ratio.
    pub m: Option<usize>,
}

impl MethodSpec {
    pub fn flc() -> Self {
        Self::new(Method::Flc, 0)
    }

    pub fn new(method: Method, b: usize) -> Self {
        Self {
            method,
            b,
            b2: 0,
            m: None,
        }
    }

    pub fn double(b1: usize, b2: usize) -> Self {
        Self {
            b2,
            ..Self::new(Method::Db, b1)
        }
    }

    fn variant(&self) -> Option<Variant> {
        match self.method {
            Method::Flc => None,
            Method::Bt => Some(Variant::NullResidual),
            Method::BtNonNull => Some(Variant::NonNullResidual),
            Method::BtMn => Some(Variant::MOutOfN),
            Method::Fdb => Some(Variant::FastDouble),
            Method::Db => Some(Variant::Double),
        }
    }

    /// Bootstrap plan for this method; `None` for the exact test.
    pub fn plan(&self, seed: u64, m: usize) -> Option<BootstrapPlan> {
        self.variant().map(|variant| BootstrapPlan {
            variant,
            b: self.b,
            b2: self.b2,
            m,
            seed,
            parallel: false,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.method == Method::Flc {
            return Ok(());
        }
        if self.b == 0 {
            return Err(Error::ConfigError(format!("{}: b must be ≥ 1", self.method)));
        }
        if self.method == Method::Db && self.b2 == 0 {
            return Err(Error::ConfigError("DB: b2 must be ≥ 1".into()));
        }
        if self.m == Some(0) {
            return Err(Error::ConfigError("BT_MN: m must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenarios: Vec<ScenarioSpec>,
    pub methods: Vec<MethodSpec>,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub workers: usize,
    pub output_path: Option<String>,
}

impl ExperimentConfig {
    pub fn new(scenarios: Vec<ScenarioSpec>, methods: Vec<MethodSpec>, replicates: usize, seed: u64) -> Self {
        Self {
            scenarios,
            methods,
            replicates,
            alpha: DEFAULT_ALPHA,
            seed,
            workers: 1,
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::ConfigError("replicates must be ≥ 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::ConfigError(format!("alpha = {} not in (0, 1)", self.alpha)));
        }
        if self.workers == 0 {
            return Err(Error::ConfigError("workers must be ≥ 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::ConfigError("no methods".into()));
        }
        for m in &self.methods {
            m.validate()?;
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::ConfigError(format!("scenario {i}: {e}")))?;
            for m in &self.methods {
                if let Some(mm) = m.m {
                    if mm > s.n_obs() {
                        return Err(Error::ConfigError(format!(
                            "scenario {i}: BT_MN m = {mm} exceeds N = {}",
                            s.n_obs()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Aggregated results of one (scenario, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionRow {
    pub setting: String,
    pub d_label: String,
    pub n: usize,
    pub m: usize,
    pub error: String,
    pub method: Method,
    pub reject_pct: f64,
    pub mc_halfwidth_pct: f64,
    pub mean_time_s: f64,
    pub replicates_used: usize,
    pub failures: usize,
    /// p-values of successful replicates, in replicate order.
    pub p_values: Vec<f64>,
    /// Wall time of each successful replicate, in seconds.
    pub times_s: Vec<f64>,
    pub first_failure: Option<String>,
}

impl RejectionRow {
    pub fn key(&self) -> (&str, &str, usize, usize, &str, &str) {
        (
            &self.setting,
            &self.d_label,
            self.n,
            self.m,
            &self.error,
            self.method.tag(),
        )
    }

    /// Rejections `p < alpha` among the stored p-values.
    pub fn rejections_at(&self, alpha: f64) -> usize {
        self.p_values.iter().filter(|&&p| p < alpha).count()
    }
}

/// `196·√(p̂(1 − p̂)/n)`, the 95% normal-approximation half-width in percent.
pub fn mc_halfwidth_pct(rejections: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = rejections as f64 / n as f64;
    196.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RejectionTable {
    pub alpha: f64,
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    pub fn find(&self, setting: &str, d_label: &str, n: usize, m: usize, method: Method) -> Option<&RejectionRow> {
        self.rows.iter().find(|r| {
            r.setting == setting && r.d_label == d_label && r.n == n && r.m == m && r.method == method
        })
    }

    /// Rows for a scenario/method pair in insertion order of the config.
    pub fn row(&self, scenario: &ScenarioSpec, method: Method) -> Option<&RejectionRow> {
        self.rows.iter().find(|r| {
            r.setting == scenario.setting.tag()
                && r.d_label == scenario.d_label()
                && r.n == scenario.n_clusters
                && r.m == scenario.cluster_size
                && r.error == scenario.error.kind.tag()
                && r.method == method
        })
    }

    /// Same table with every rejection count recomputed at `alpha`.
    pub fn retally(&self, alpha: f64) -> RejectionTable {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let k = r.rejections_at(alpha);
                let used = r.replicates_used;
                RejectionRow {
                    reject_pct: pct(k, used),
                    mc_halfwidth_pct: mc_halfwidth_pct(k, used),
                    ..r.clone()
                }
            })
            .collect();
        RejectionTable { alpha, rows }
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.key().cmp(&b.key()));
    }
}

fn pct(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

type Outcome = std::result::Result<(f64, f64), String>;

/// Run one method on one dataset, returning `(p-value, seconds)`.
pub fn run_method(data: &GeneratedDataset, spec: &MethodSpec, seed: u64) -> Result<(f64, f64)> {
    let design = &data.design;
    let start = Instant::now();
    let p = match spec.method {
        Method::Flc => flc_test(design)?.p_value,
        _ => {
            let pair = build_projection_pair(design, None)?;
            let y = design.y().as_slice();
            let m = match (spec.method, spec.m) {
                (Method::BtMn, Some(m)) => m,
                (Method::BtMn, None) => m_from_variance_ratio(&pair, y)?,
                _ => 0,
            };
            let plan = spec.plan(seed, m).expect("bootstrap method");
            run_plan_with(&pair, y, &plan)?.p_value
        }
    };
    Ok((p, start.elapsed().as_secs_f64()))
}

fn run_replicate(config: &ExperimentConfig, s: usize, r: usize) -> Vec<Outcome> {
    let spec = &config.scenarios[s];
    let mut rng = stream(config.seed, &[0, s as u64, r as u64]);
    match generate(spec, &mut rng) {
        Err(e) => vec![Err(e.to_string()); config.methods.len()],
        Ok(data) => config
            .methods
            .iter()
            .enumerate()
            .map(|(k, ms)| {
                let seed = derive_key(config.seed, &[1, s as u64, r as u64, k as u64]);
                run_method(&data, ms, seed).map_err(|e| e.to_string())
            })
            .collect(),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RejectionTable> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::ConfigError(format!("thread pool: {e}")))?;
    let jobs: Vec<(usize, usize)> = (0..config.scenarios.len())
        .flat_map(|s| (0..config.replicates).map(move |r| (s, r)))
        .collect();
    let outcomes: Vec<Vec<Outcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, r)| run_replicate(config, s, r))
            .collect()
    });

    let mut rows = Vec::new();
    for (s, spec) in config.scenarios.iter().enumerate() {
        let block = &outcomes[s * config.replicates..(s + 1) * config.replicates];
        for (k, ms) in config.methods.iter().enumerate() {
            let mut p_values = Vec::new();
            let mut times_s = Vec::new();
            let mut failures = 0;
            let mut first_failure = None;
            for rep in block {
                match &rep[k] {
                    Ok((p, t)) => {
                        p_values.push(*p);
                        times_s.push(*t);
                    }
                    Err(msg) => {
                        failures += 1;
                        first_failure.get_or_insert_with(|| msg.clone());
                    }
                }
            }
            let used = p_values.len();
            let rejections = p_values.iter().filter(|&&p| p < config.alpha).count();
            let mean_time_s = if used == 0 {
                0.0
            } else {
                times_s.iter().sum::<f64>() / used as f64
            };
            rows.push(RejectionRow {
                setting: spec.setting.tag().to_string(),
                d_label: spec.d_label(),
                n: spec.n_clusters,
                m: spec.cluster_size,
                error: spec.error.kind.tag().to_string(),
                method: ms.method,
                reject_pct: pct(rejections, used),
                mc_halfwidth_pct: mc_halfwidth_pct(rejections, used),
                mean_time_s,
                replicates_used: used,
                failures,
                p_values,
                times_s,
                first_failure,
            });
        }
    }
    let mut table = RejectionTable {
        alpha: config.alpha,
        rows,
    };
    table.sort();
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{ErrorDistribution, ErrorKind};

    fn s1_null(kind: ErrorKind) -> ScenarioSpec {
        ScenarioSpec::setting1(10, 3, [0.0; 4], ErrorDistribution::standard(kind))
    }

    #[test]
    fn config_validation() {
        let base = ExperimentConfig::new(vec![s1_null(ErrorKind::Normal)], vec![MethodSpec::flc()], 1, 0);
        assert!(base.validate().is_ok());
        let mut c = base.clone();
        c.replicates = 0;
        assert!(matches!(c.validate(), Err(Error::ConfigError(_))));
        let mut c = base.clone();
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.methods = vec![MethodSpec::new(Method::Bt, 0)];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.methods = vec![MethodSpec::double(5, 0)];
        assert!(c.validate().is_err());
        let mut c = base;
        c.methods = vec![MethodSpec {
            m: Some(31),
            ..MethodSpec::new(Method::BtMn, 5)
        }];
        assert!(c.validate().is_err());
    }

    #[test]
    fn halfwidth_formula() {
        assert_eq!(mc_halfwidth_pct(0, 100), 0.0);
        let h = mc_halfwidth_pct(50, 1000);
        assert!((h - 196.0 * (0.05f64 * 0.95 / 1000.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_replicate_with_strong_signal_rejects() {
        // Large random-effect variance makes p ≪ 0.05 on this seed.
        let spec = ScenarioSpec::setting1(
            10,
            5,
            [4.0, 0.0, 0.0, 4.0],
            ErrorDistribution::standard(ErrorKind::Normal),
        );
        let cfg = ExperimentConfig::new(vec![spec], vec![MethodSpec::flc()], 1, 3);
        let t = run_experiment(&cfg).unwrap();
        assert!(t.rows[0].p_values[0] < 0.05);
        assert_eq!(t.rows[0].reject_pct, 100.0);
    }

    #[test]
    fn all_methods_run_and_respect_row_invariants() {
        let methods = vec![
            MethodSpec::flc(),
            MethodSpec::new(Method::Bt, 19),
            MethodSpec::new(Method::BtNonNull, 19),
            MethodSpec::new(Method::BtMn, 19),
            MethodSpec::new(Method::Fdb, 19),
            MethodSpec::double(9, 5),
        ];
        let cfg = ExperimentConfig::new(vec![s1_null(ErrorKind::StudentT3)], methods, 6, 11);
        let t = run_experiment(&cfg).unwrap();
        assert_eq!(t.rows.len(), 6);
        for r in &t.rows {
            assert_eq!(r.failures, 0);
            assert_eq!(r.replicates_used, 6);
            let k = r.rejections_at(0.05);
            assert_eq!(r.reject_pct, 100.0 * k as f64 / 6.0);
            assert!(r.mean_time_s >= 0.0);
        }
        // Sorted by key.
        let keys: Vec<_> = t.rows.iter().map(|r| r.key()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn retally_is_monotone_in_alpha() {
        let cfg = ExperimentConfig::new(
            vec![s1_null(ErrorKind::Chisq3Centered)],
            vec![MethodSpec::flc(), MethodSpec::new(Method::Bt, 19)],
            40,
            5,
        );
        let t = run_experiment(&cfg).unwrap();
        for r in &t.rows {
            let mut last = 0;
            for a in [0.01, 0.05, 0.1, 0.2, 0.5] {
                let k = r.rejections_at(a);
                assert!(k >= last);
                last = k;
            }
        }
        assert_eq!(t.retally(0.05), t);
    }

    #[test]
    fn failures_are_counted_not_dropped() {
        // n·m = 2 observations cannot support an intercept, a covariate and random effects.
        let spec = ScenarioSpec::setting1(1, 2, [0.0; 4], ErrorDistribution::standard(ErrorKind::Normal));
        let cfg = ExperimentConfig::new(vec![spec], vec![MethodSpec::flc()], 3, 0);
        let t = run_experiment(&cfg).unwrap();
        assert_eq!(t.rows[0].failures, 3);
        assert_eq!(t.rows[0].replicates_used, 0);
        assert!(t.rows[0].first_failure.is_some());
    }
}
