//! Exact FLC F-test for subsets of random effects in linear mixed models,
//! residual bootstrap counterparts (single, m-out-of-n, double and fast
//! double), and a Monte Carlo harness for type I error and power studies.
//!
//! ```
//! use flcboot_core::{flc_test, generate, stream, ErrorDistribution, ErrorKind, ScenarioSpec};
//!
//! let spec = ScenarioSpec::setting1(10, 3, [0.0; 4], ErrorDistribution::standard(ErrorKind::Normal));
//! let data = generate(&spec, &mut stream(1, &[])).unwrap();
//! let r = flc_test(&data.design).unwrap();
//! assert!((0.0..=1.0).contains(&r.p_value));
//! ```

pub mod bootstrap;
pub mod design;
pub mod distributions;
pub mod error;
pub mod flctest;
pub mod harness;
pub mod projection;
mod qr;
pub mod rng;
pub mod scenarios;
pub mod special;

pub use bootstrap::{
    bootstrap_p, double_bootstrap, fast_double_bootstrap, resample_m_out_of_n, resample_nonnull,
    resample_null, BootstrapPlan, ResampleModel, ResampleSource, Variant,
};
pub use design::DesignMatrices;
pub use distributions::{
    draw_error_vector, draw_mvnormal, draw_wishart, ErrorDistribution, ErrorKind,
};
pub use error::{Error, Result};
pub use flctest::{flc_statistic, flc_test, FlcStatistic, Method, TestResult};
pub use harness::{
    emit_csv, fdb_diagnostics, run_experiment, ExperimentConfig, MethodSpec, RejectionRow,
    RejectionTable,
};
pub use projection::{build_projection_pair, ProjectionPair};
pub use rng::{stream, StreamRng};
pub use scenarios::{
    generate, tested_split, CovariateDesign, GeneratedDataset, ScenarioSpec, Setting,
};
pub use special::f_cdf;
