use minlab_core::distributions::{affine_image, FamilySpec};
use minlab_core::experiments::{verify_smp, CertifierChoice, ExperimentConfig, SmpConfig};
use minlab_core::geometry::SetStrategy;
use minlab_core::report::ExperimentReport;

fn smp(spec: FamilySpec, points: Vec<Vec<f64>>) -> SmpConfig {
    let mut cfg = SmpConfig::new(spec, 2.0, SetStrategy::Explicit { points }, 20_000);
    cfg.n_calib = 5_000;
    cfg.certifier = CertifierChoice::Empirical;
    cfg.bootstrap_resamples = 20;
    cfg
}

fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

#[test]
fn signed_permutation_images_are_exactly_invariant() {
    // U is orthogonal, so ⟨U t, U X⟩ = ⟨t, X⟩; with one nonzero per row and
    // per point every product and sum is exact.
    let u = vec![
        vec![0.0, -1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, -1.0, 0.0],
    ];
    let base = FamilySpec::exponential_product(4);
    let image = affine_image(&base, u.clone()).unwrap();
    let t: Vec<Vec<f64>> = (0..8)
        .map(|i| {
            let mut e = vec![0.0; 4];
            e[i % 4] = if i < 4 { 0.75 } else { -1.5 };
            e
        })
        .collect();
    let ut: Vec<Vec<f64>> = t.iter().map(|x| mat_vec(&u, x)).collect();
    let a = verify_smp(&smp(base, t)).unwrap();
    let b = verify_smp(&smp(image, ut)).unwrap();
    assert_eq!(a.certified_a, b.certified_a);
    assert_eq!(a.sup_diff.unwrap().value, b.sup_diff.unwrap().value);
    assert_eq!(a.kappa_hat, b.kappa_hat);
}

#[test]
fn general_linear_images_are_invariant_up_to_rounding() {
    let u = vec![vec![2.0, 0.5, 0.0], vec![-1.0, 1.0, 0.25], vec![0.0, 0.3, 1.5]];
    let ut = nalgebra::Matrix3::from_row_slice(&u.concat()).transpose();
    let ut_inv = ut.try_inverse().unwrap();
    let base = FamilySpec::uniform_cube(3);
    let image = affine_image(&base, u).unwrap();
    let t = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 1.0],
        vec![-1.0, 2.0, 0.5],
        vec![0.5, -0.5, -1.0],
        vec![0.0, 0.0, 2.0],
        vec![1.5, 1.0, 0.0],
        vec![-0.5, -1.5, 0.5],
        vec![2.0, -1.0, 1.0],
    ];
    // ⟨s, U X⟩ = ⟨t, X⟩ for s = U^{-T} t.
    let s: Vec<Vec<f64>> = t
        .iter()
        .map(|x| {
            let v = ut_inv * nalgebra::Vector3::from_row_slice(x);
            v.iter().copied().collect()
        })
        .collect();
    let (mut ca, mut cb) = (smp(base, t), smp(image, s));
    ca.a_target = 0.5;
    cb.a_target = 0.5;
    let a = verify_smp(&ca).unwrap();
    let b = verify_smp(&cb).unwrap();
    let close = |x: f64, y: f64| (x / y - 1.0).abs() < 1e-10;
    assert!(close(a.certified_a.unwrap(), b.certified_a.unwrap()));
    assert!(close(a.sup_diff.unwrap().value, b.sup_diff.unwrap().value));
}

const CONFIGS: &[&str] = &[
    r#"{"experiment": "verify_smp", "spec": {"kind": "gaussian", "dim": 4}, "p": 1.5,
        "strategy": {"strategy": "signed_basis"}, "n_eval": 20000, "bootstrap_resamples": 20}"#,
    r#"{"experiment": "uncorrelated_case", "spec": {"kind": "uniform_cube", "dim": 4}, "p": 1.0,
        "strategy": {"strategy": "scaled_basis"}, "n_eval": 20000, "n_calib": 5000, "bootstrap_resamples": 20}"#,
    r#"{"experiment": "double_exponent", "spec": {"kind": "exponential_product", "dim": 8}, "p": 1.0,
        "strategy": {"strategy": "sphere_random", "seed": 5}, "n_eval": 20000, "n_calib": 5000, "bootstrap_resamples": 20}"#,
    r#"{"experiment": "unconditional_psquare", "spec": {"kind": "rademacher", "dim": 8}, "p": 1.5,
        "strategy": {"strategy": "cube_vertices", "seed": 3}, "n_eval": 20000, "n_calib": 5000, "bootstrap_resamples": 20}"#,
    r#"{"experiment": "logd_unconditional", "spec": {"kind": "uniform_cube", "dim": 4}, "p": 1.0,
        "strategy": {"strategy": "scaled_basis"}, "n_eval": 10000, "n_calib": 5000, "bootstrap_resamples": 20, "dims": [4, 8]}"#,
    r#"{"experiment": "weak_strong_linf", "spec": {"kind": "uniform_ball", "r_exponent": 1.0, "dim": 6}, "p": 3.0,
        "n": 20000, "bootstrap_resamples": 20}"#,
    r#"{"experiment": "radial_moment_ratio", "spec": {"kind": "uniform_ball", "r_exponent": 2.0, "dim": 5},
        "n": 20000, "bootstrap_resamples": 20}"#,
    r#"{"experiment": "supcoord", "spec": {"kind": "gaussian", "dim": 8}, "p": 2.0,
        "n_eval": 20000, "n_calib": 5000, "bootstrap_resamples": 20}"#,
    r#"{"experiment": "band_conformance", "spec": {"kind": "rademacher", "dim": 6}, "n": 20000, "bootstrap_resamples": 20}"#,
    r#"{"experiment": "moment_growth", "families": [{"kind": "gaussian", "dim": 3}, {"kind": "uniform_cube", "dim": 3}],
        "p_grid": [1, 2, 4], "n": 20000, "bootstrap_resamples": 20}"#,
    r#"{"experiment": "weak_strong_chained", "spec_x": {"kind": "gaussian", "dim": 2}, "norm": {"norm": "l2"}, "p": 2.0,
        "n_eval": 20000, "n_calib": 5000, "bootstrap_resamples": 20}"#,
];

#[test]
fn every_pipeline_runs_from_json_and_replays_bitwise() {
    for text in CONFIGS {
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap_or_else(|e| panic!("{text}: {e}"));
        let first = cfg.run().unwrap_or_else(|e| panic!("{}: {e}", cfg.name()));
        let json = first.to_json();
        assert_eq!(json, cfg.run().unwrap().to_json(), "{} is not replayable", cfg.name());
        assert!(!first.flags.is_empty(), "{} reports no pass flags", cfg.name());

        // The echoed config reruns to the same report.
        let echoed: ExperimentConfig = {
            let mut v = first.config.clone();
            v["experiment"] = serde_json::json!(cfg.name());
            serde_json::from_value(v).unwrap()
        };
        assert_eq!(echoed.run().unwrap().to_json(), json, "{} echo differs", cfg.name());

        let parsed: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.flags, first.flags);
        assert_eq!(parsed.status, first.status);
    }
}

#[test]
fn seed_overrides_change_results() {
    let mut cfg: ExperimentConfig = serde_json::from_str(CONFIGS[0]).unwrap();
    let a = cfg.run().unwrap();
    cfg.set_root_seed(99);
    let b = cfg.run().unwrap();
    assert_ne!(a.kappa_hat, b.kappa_hat);
    cfg.set_n(5000);
    assert_eq!(cfg.run().unwrap().sup_diff.unwrap().n, 5000);
}
