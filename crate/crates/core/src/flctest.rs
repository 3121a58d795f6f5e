//! The FLC F statistic and its exact F reference distribution.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::DesignMatrices;
use crate::error::{Error, Result};
use crate::projection::{build_projection_pair, ProjectionPair};
use crate::special::f_sf;

/// Relative residual norm below which the full design is taken to reproduce
/// the response exactly.
pub const SATURATION_REL_NORM: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "FLC")]
    Flc,
    #[serde(rename = "BT")]
    Bt,
    #[serde(rename = "BT_NONNULL")]
    BtNonNull,
    #[serde(rename = "BT_MN")]
    BtMn,
    #[serde(rename = "FDB")]
    Fdb,
    #[serde(rename = "DB")]
    Db,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Flc,
        Method::Bt,
        Method::BtNonNull,
        Method::BtMn,
        Method::Fdb,
        Method::Db,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Flc => "FLC",
            Method::Bt => "BT",
            Method::BtNonNull => "BT_NONNULL",
            Method::BtMn => "BT_MN",
            Method::Fdb => "FDB",
            Method::Db => "DB",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::ConfigError(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p_value: f64,
    pub method: Method,
    /// Number of F statistics computed to produce this result.
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlcStatistic {
    pub value: f64,
    pub df_num: usize,
    pub df_den: usize,
}

/// `[ss_between/df_num] / [rss_full/df_den]` with `ss_between = rss_null − rss_full`.
///
/// `scale_sq` is `‖y‖²`, used to decide whether `rss_full` is numerically zero.
pub fn f_ratio(
    ss_between: f64,
    rss_full: f64,
    df_num: usize,
    df_den: usize,
    scale_sq: f64,
) -> Result<f64> {
    let floor = SATURATION_REL_NORM * SATURATION_REL_NORM * scale_sq;
    if !(rss_full > floor) {
        return Err(Error::SaturatedFit);
    }
    let num = ss_between.max(0.0) / df_num as f64;
    let den = rss_full / df_den as f64;
    Ok(num / den)
}

/// Evaluate the statistic for an arbitrary response against prebuilt factorizations.
pub fn statistic_for(pair: &ProjectionPair, y: &[f64]) -> Result<f64> {
    let (between, rss_full) = pair.decompose(y)?;
    let scale_sq: f64 = y.iter().map(|v| v * v).sum();
    f_ratio(between, rss_full, pair.df_num, pair.df_den, scale_sq)
}

pub fn flc_statistic(design: &DesignMatrices) -> Result<FlcStatistic> {
    let pair = build_projection_pair(design, None)?;
    flc_statistic_with(design, &pair)
}

pub fn flc_statistic_with(design: &DesignMatrices, pair: &ProjectionPair) -> Result<FlcStatistic> {
    let value = statistic_for(pair, design.y().as_slice())?;
    Ok(FlcStatistic {
        value,
        df_num: pair.df_num,
        df_den: pair.df_den,
    })
}

/// p-value of an observed statistic under `F(df_num, df_den)`.
pub fn flc_p_value(stat: &FlcStatistic) -> Result<f64> {
    f_sf(stat.value, stat.df_num, stat.df_den)
}

/// The exact FLC test.
pub fn flc_test(design: &DesignMatrices) -> Result<TestResult> {
    let stat = flc_statistic(design)?;
    Ok(TestResult {
        statistic: stat.value,
        df_num: stat.df_num,
        df_den: stat.df_den,
        p_value: flc_p_value(&stat)?,
        method: Method::Flc,
        evaluations: 1,
    })
}
