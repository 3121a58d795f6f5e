mod common;

use flcboot_core::{
    generate, stream, tested_split, CovariateDesign, Error, ErrorDistribution, ErrorKind,
    ScenarioSpec, Setting,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn normal() -> ErrorDistribution {
    ErrorDistribution::standard(ErrorKind::Normal)
}

#[test]
fn shapes_per_setting() {
    let cases = [
        (ScenarioSpec::setting1(10, 3, [0.1, 0.0, 0.0, 0.1], normal()), 2, 2, 0),
        (ScenarioSpec::setting2(7, 10, [0.2, 0.1, 0.1, 0.2], normal()), 2, 3, 1),
        (ScenarioSpec::setting3(10, 10, 0.5, normal()), 8, 4, 2),
    ];
    for (spec, p, q, r0) in cases {
        let g = generate(&spec, &mut stream(1, &[])).unwrap();
        let n = spec.n_clusters;
        let big_n = n * spec.cluster_size;
        assert_eq!(g.design.n_obs(), big_n);
        assert_eq!(g.design.x().shape(), (big_n, p));
        assert_eq!(g.design.z().shape(), (big_n, q * n));
        assert_eq!(g.design.r0(), r0 * n);
        assert_eq!(g.b.len(), q * n);
        assert_eq!(g.d.shape(), (q, q));
        assert_eq!(tested_split(&spec).0, r0);
        // Each Z row touches only its own cluster, once per effect.
        for row in 0..big_n {
            let i = row / spec.cluster_size;
            for col in 0..q * n {
                if col % n != i {
                    assert_eq!(g.design.z()[(row, col)], 0.0);
                }
            }
            assert_eq!(g.design.z()[(row, i)], 1.0);
        }
    }
}

#[test]
fn response_decomposes_into_its_parts() {
    let spec = ScenarioSpec::setting2(8, 5, [0.4, 0.1, 0.1, 0.3], normal());
    let g = generate(&spec, &mut stream(2, &[])).unwrap();
    let xb = g.design.x() * DVector::from_column_slice(&spec.beta);
    let eps = g.design.y() - xb - g.design.z() * &g.b;
    // What remains is a plausible N(0, 1) error vector.
    let (_, var, _, _) = common::moments(eps.as_slice());
    assert!(var > 0.3 && var < 3.0);
}

#[test]
fn time_covariate_layout() {
    let spec = ScenarioSpec::setting1(4, 5, [0.0; 4], normal());
    assert_eq!(spec.covariates, CovariateDesign::Time);
    let g = generate(&spec, &mut stream(3, &[])).unwrap();
    for row in 0..20 {
        let t = (row % 5 + 1) as f64;
        assert_eq!(g.design.x()[(row, 1)], t);
        assert_eq!(g.design.z()[(row, 4 + row / 5)], t);
    }
    let g = generate(&spec.with_covariates(CovariateDesign::Gaussian), &mut stream(3, &[])).unwrap();
    let col: Vec<f64> = g.design.x().column(1).iter().copied().collect();
    assert!(col.iter().any(|v| v.fract() != 0.0));
}

#[test]
fn s2_block_covariance() {
    // 10⁵ clusters spread over datasets of modest size.
    let block = [0.2, 0.1, 0.1, 0.2];
    let spec = ScenarioSpec::setting2(200, 2, block, normal());
    let mut rows = Vec::with_capacity(100_000);
    for s in 0..500 {
        let g = generate(&spec, &mut stream(4, &[s])).unwrap();
        let n = spec.n_clusters;
        for i in 0..n {
            rows.push([g.b[i], g.b[n + i], g.b[2 * n + i]]);
        }
    }
    assert_eq!(rows.len(), 100_000);
    let m = rows.len() as f64;
    let cov = DMatrix::from_fn(3, 3, |a, b| rows.iter().map(|r| r[a] * r[b]).sum::<f64>() / m);
    let target = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.2, 0.1, 0.0, 0.1, 0.2]);
    let err = (cov - target).abs();
    assert!(err.view((1, 1), (2, 2)).max() < 0.01, "{err}");
    assert!(err.max() < 0.02, "{err}");
}

#[test]
fn response_variance_under_zero_covariance() {
    let dist = ErrorDistribution::new(ErrorKind::Normal, 2.0).unwrap();
    let spec = ScenarioSpec::setting1(500, 4, [0.0; 4], dist);
    let mut vals = Vec::new();
    for s in 0..50 {
        let g = generate(&spec, &mut stream(5, &[s])).unwrap();
        assert!(g.null_is_true);
        let r = g.design.y() - g.design.x() * DVector::from_column_slice(&spec.beta);
        vals.extend(r.iter().copied());
    }
    let (mean, var, _, _) = common::moments(&vals);
    assert!(mean.abs() < 0.03);
    assert!((var / 4.0 - 1.0).abs() < 0.02);
    // Independence within a cluster: lag-one correlation vanishes.
    let lag: f64 = vals.chunks(4).map(|c| c[0] * c[1] + c[1] * c[2] + c[2] * c[3]).sum::<f64>()
        / (3.0 * vals.len() as f64 / 4.0);
    assert!((lag / 4.0).abs() < 0.02);
}

#[test]
fn s3_wishart_block_and_null_flag() {
    let null = ScenarioSpec::setting3(10, 10, 0.0, normal());
    let alt = ScenarioSpec::setting3(10, 10, 0.5, normal());
    assert_eq!(tested_split(&null), (2, true));
    assert_eq!(tested_split(&alt), (2, false));
    let g = generate(&null, &mut stream(6, &[])).unwrap();
    assert!(g.null_is_true);
    let w = g.d.view((0, 0), (2, 2)).clone_owned();
    assert_eq!(w[(0, 1)], w[(1, 0)]);
    assert!(w.symmetric_eigenvalues().min() >= 0.0);
    assert!(g.d.view((2, 0), (2, 4)).iter().all(|&v| v == 0.0));
    let g = generate(&alt, &mut stream(6, &[])).unwrap();
    assert!(!g.null_is_true);
    assert_eq!(g.d[(2, 2)], 0.5);
    assert_eq!(g.d[(2, 3)], 0.25);
    assert_eq!(g.d[(0, 3)], 0.25);
    // Testing R4 alone moves r0 to 3.
    let spec = alt.with_r0(3);
    let g = generate(&spec, &mut stream(6, &[])).unwrap();
    assert_eq!(g.design.r0(), 30);
}

#[test]
fn invalid_specs_are_rejected() {
    let bad = [
        ScenarioSpec::setting1(0, 3, [0.0; 4], normal()),
        ScenarioSpec::setting1(10, 3, [1.0, 2.0, 2.0, 1.0], normal()),
        ScenarioSpec::setting1(10, 3, [0.0; 4], normal()).with_r0(2),
        ScenarioSpec::setting3(10, 10, -0.1, normal()),
    ];
    for spec in bad {
        assert!(generate(&spec, &mut stream(0, &[])).is_err(), "{spec:?}");
    }
    let mut s2 = ScenarioSpec::setting2(7, 10, [0.2, 0.1, 0.1, 0.2], normal());
    s2.d[(0, 1)] = 0.1;
    s2.d[(1, 0)] = 0.1;
    assert!(matches!(s2.validate(), Err(Error::DomainError(_))));
    let mut s1 = ScenarioSpec::setting1(10, 3, [0.0; 4], normal());
    s1.beta.push(1.0);
    assert!(s1.validate().is_err());
    assert_eq!(Setting::S3.fixed_covariates(), 8);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), which in 0usize..3, n in 2usize..8, m in 2usize..6) {
        let spec = match which {
            0 => ScenarioSpec::setting1(n, m, [0.3, 0.1, 0.1, 0.2], normal()),
            1 => ScenarioSpec::setting2(n, m, [0.2, 0.0, 0.0, 0.1], normal()),
            _ => ScenarioSpec::setting3(n + 6, m + 4, 0.2, normal()),
        };
        let a = generate(&spec, &mut stream(seed, &[])).unwrap();
        let b = generate(&spec, &mut stream(seed, &[])).unwrap();
        prop_assert_eq!(a.design.y(), b.design.y());
        prop_assert_eq!(&a.b, &b.b);
        prop_assert_eq!(a.null_is_true, tested_split(&spec).1);
    }
}
