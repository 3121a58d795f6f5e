//! Experiment config files.
//!
//! TOML restricted to top-level keys plus repeated `[[scenario]]` and
//! `[[method]]` tables. The grammar is in [`CONFIG_SCHEMA`].

use std::path::Path;

use serde::Deserialize;

use super::{ExperimentConfig, MethodSpec, DEFAULT_ALPHA, DEFAULT_B};
use crate::distributions::{ErrorDistribution, ErrorKind};
use crate::error::{Error, Result};
use crate::flctest::Method;
use crate::scenarios::{CovariateDesign, ScenarioSpec, Setting};

pub const SCHEMA_VERSION: u32 = 1;

pub const CONFIG_SCHEMA: &str = r#"# flcboot experiment config, schema 1
#
# Top-level keys (one per line, `key = value`):
#   schema     = 1                 required; must equal 1
#   replicates = <int ≥ 1>         required; datasets per scenario
#   seed       = <int ≥ 0>         required; master seed
#   alpha      = <float in (0,1)>  optional; default 0.05, reject iff p < alpha
#   workers    = <int ≥ 1>         optional; default 1
#   output     = "<path>"          optional; CSV destination
#
# Each [[scenario]] section expands to the cartesian product of its list values:
#   setting = "S1" | "S2" | "S3"                      required
#   n       = <int> | [<int>, ...]                    required; number of clusters
#   m       = <int> | [<int>, ...]                    required; cluster size
#   error   = "<tag>" | ["<tag>", ...]                required; normal | student | chisq | 2CMM
#   sigma   = <float > 0>                             optional; default 1
#   d       = [d11, d12, d21, d22]                    S1: the 2×2 D; S2: the tested block [D]2
#   tau     = <float ≥ 0> | [<float>, ...]            S3 only
#   r0      = <int>                                   optional; untested effects per cluster
#   beta    = [<float>, ...]                          optional; default all ones (p = 2, 2, 8)
#   covariates = "time" | "gaussian"                  optional; default "time"
#   label   = "<text>"                                optional; D label in the output table
#
# Each [[method]] section:
#   name = "FLC" | "BT" | "BT_NONNULL" | "BT_MN" | "FDB" | "DB"   required
#   b    = <int ≥ 1>     optional; default 199 (first-level resamples)
#   b2   = <int ≥ 1>     DB only; second-level resamples
#   m    = <int ≥ 1>     BT_MN only; default chosen per dataset from the residual variance ratio
#
# Example:
#   schema = 1
#   replicates = 1000
#   seed = 20240101
#
#   [[scenario]]
#   setting = "S1"
#   n = [10, 15]
#   m = [3, 5]
#   error = "student"
#   d = [0.05, 0.02, 0.02, 0.05]
#
#   [[method]]
#   name = "FLC"
#
#   [[method]]
#   name = "FDB"
#   b = 199
"#;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: u32,
    replicates: usize,
    seed: u64,
    alpha: Option<f64>,
    workers: Option<usize>,
    output: Option<String>,
    #[serde(default)]
    scenario: Vec<RawScenario>,
    #[serde(default)]
    method: Vec<RawMethod>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    setting: String,
    n: OneOrMany<usize>,
    m: OneOrMany<usize>,
    error: OneOrMany<String>,
    sigma: Option<f64>,
    d: Option<Vec<f64>>,
    tau: Option<OneOrMany<f64>>,
    r0: Option<usize>,
    beta: Option<Vec<f64>>,
    covariates: Option<String>,
    label: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    name: String,
    b: Option<usize>,
    b2: Option<usize>,
    m: Option<usize>,
}

fn expand(i: usize, raw: &RawScenario) -> Result<Vec<ScenarioSpec>> {
    let err = |msg: String| Error::ConfigError(format!("scenario {i}: {msg}"));
    let setting: Setting = raw.setting.parse()?;
    let sigma = raw.sigma.unwrap_or(1.0);
    let covariates: CovariateDesign = match &raw.covariates {
        Some(c) => c.parse()?,
        None => CovariateDesign::default(),
    };
    let d4 = |name: &str| -> Result<[f64; 4]> {
        let d = raw
            .d
            .as_ref()
            .ok_or_else(|| err(format!("{name} requires `d` with 4 entries")))?;
        <[f64; 4]>::try_from(d.as_slice())
            .map_err(|_| err(format!("`d` must have 4 entries, got {}", d.len())))
    };
    let taus = match (setting, &raw.tau) {
        (Setting::S3, Some(t)) => t.values(),
        (Setting::S3, None) => return Err(err("S3 requires `tau`".into())),
        (_, Some(_)) => return Err(err("`tau` applies to S3 only".into())),
        (_, None) => vec![0.0],
    };
    if setting == Setting::S3 && raw.d.is_some() {
        return Err(err("S3 is parameterised by `tau`, not `d`".into()));
    }

    let mut out = Vec::new();
    for kind in raw.error.values() {
        let kind: ErrorKind = kind.parse()?;
        let error = ErrorDistribution::new(kind, sigma).map_err(|e| err(e.to_string()))?;
        for n in raw.n.values() {
            for m in raw.m.values() {
                for &tau in &taus {
                    let mut spec = match setting {
                        Setting::S1 => ScenarioSpec::setting1(n, m, d4("S1")?, error),
                        Setting::S2 => ScenarioSpec::setting2(n, m, d4("S2")?, error),
                        Setting::S3 => ScenarioSpec::setting3(n, m, tau, error),
                    };
                    if let Some(beta) = &raw.beta {
                        spec.beta = beta.clone();
                    }
                    spec.covariates = covariates;
                    spec.r0_override = raw.r0;
                    spec.label = raw.label.clone();
                    out.push(spec);
                }
            }
        }
    }
    Ok(out)
}

/// Parse config text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::ConfigError(e.message().trim().to_string()))?;
    if raw.schema != SCHEMA_VERSION {
        return Err(Error::ConfigError(format!(
            "unsupported schema {} (expected {SCHEMA_VERSION})",
            raw.schema
        )));
    }
    let mut scenarios = Vec::new();
    for (i, s) in raw.scenario.iter().enumerate() {
        scenarios.extend(expand(i, s)?);
    }
    if scenarios.is_empty() {
        return Err(Error::ConfigError("no [[scenario]] sections".into()));
    }
    let methods = raw
        .method
        .iter()
        .map(|m| {
            let method: Method = m.name.parse()?;
            if m.b2.is_some() && method != Method::Db {
                return Err(Error::ConfigError(format!("{method}: `b2` applies to DB only")));
            }
            if m.m.is_some() && method != Method::BtMn {
                return Err(Error::ConfigError(format!("{method}: `m` applies to BT_MN only")));
            }
            Ok(MethodSpec {
                method,
                b: m.b.unwrap_or(if method == Method::Flc { 0 } else { DEFAULT_B }),
                b2: m.b2.unwrap_or(0),
                m: m.m,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let config = ExperimentConfig {
        scenarios,
        methods,
        replicates: raw.replicates,
        alpha: raw.alpha.unwrap_or(DEFAULT_ALPHA),
        seed: raw.seed,
        workers: raw.workers.unwrap_or(1),
        output_path: raw.output,
    };
    config.validate()?;
    Ok(config)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::IoError(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
schema = 1
replicates = 20
seed = 7
alpha = 0.1
workers = 2
output = "out.csv"

[[scenario]]
setting = "S1"
n = [10, 15]
m = 3
error = ["student", "normal"]
d = [0.05, 0.02, 0.02, 0.05]

[[scenario]]
setting = "S3"
n = 10
m = 10
error = "2CMM"
tau = [0.0, 0.1]
covariates = "gaussian"

[[method]]
name = "FLC"

[[method]]
name = "DB"
b = 9
b2 = 4

[[method]]
name = "BT_MN"
m = 7
"#;

    #[test]
    fn parses_and_expands() {
        let c = parse_config(GOOD).unwrap();
        assert_eq!(c.scenarios.len(), 4 + 2);
        assert_eq!(c.alpha, 0.1);
        assert_eq!(c.workers, 2);
        assert_eq!(c.output_path.as_deref(), Some("out.csv"));
        assert_eq!(c.methods[0], MethodSpec::flc());
        assert_eq!(c.methods[1], MethodSpec::double(9, 4));
        assert_eq!(c.methods[2].m, Some(7));
        assert_eq!(c.methods[2].b, DEFAULT_B);
        assert_eq!(c.scenarios[5].tau, 0.1);
        assert_eq!(c.scenarios[0].error.kind, ErrorKind::StudentT3);
        assert_eq!(c.scenarios[0].covariates, CovariateDesign::Time);
        assert_eq!(c.scenarios[5].covariates, CovariateDesign::Gaussian);
    }

    #[test]
    fn schema_version_enforced() {
        let text = GOOD.replace("schema = 1", "schema = 2");
        let e = parse_config(&text).unwrap_err();
        assert!(matches!(e, Error::ConfigError(m) if m.contains("schema")));
        let text = GOOD.replace("schema = 1\n", "");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        for (from, to) in [
            ("name = \"FLC\"", "name = \"LRT\""),
            ("error = \"2CMM\"", "error = \"cauchy\""),
            ("setting = \"S1\"", "setting = \"S9\""),
            ("d = [0.05, 0.02, 0.02, 0.05]", "d = [0.05, 0.02]"),
            ("tau = [0.0, 0.1]", "d = [0.0, 0.0, 0.0, 0.0]"),
            ("replicates = 20", "replicates = 0"),
            ("alpha = 0.1", "alpha = 1.5"),
            ("workers = 2", "workers = 0"),
            ("workers = 2", "wrokers = 2"),
            ("b2 = 4", "b2 = 0"),
            ("covariates = \"gaussian\"", "covariates = \"uniform\""),
        ] {
            assert!(
                matches!(parse_config(&GOOD.replace(from, to)), Err(Error::ConfigError(_))),
                "{to}"
            );
        }
    }

    #[test]
    fn schema_text_example_parses() {
        let example: String = CONFIG_SCHEMA
            .split("# Example:\n")
            .nth(1)
            .unwrap()
            .lines()
            .map(|l| l.trim_start_matches('#').trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let c = parse_config(&example).unwrap();
        assert_eq!(c.scenarios.len(), 4);
        assert_eq!(c.methods.len(), 2);
    }
}
