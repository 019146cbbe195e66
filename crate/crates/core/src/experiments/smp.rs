//! Sudakov-minoration checks: build a separated `T`, certify its separation
//! on calibration data, and measure `κ̂ = Ê sup_{t,s}⟨t − s, X⟩ / A`.

use serde::{Deserialize, Serialize};

use super::{default_resamples, CardinalityPolicy, CertifierChoice, RunSeeds, DESK};
use crate::distributions::{sample_batch, FamilyKind, FamilySpec};
use crate::empirical::{empirical_sup_diff, IndexSet};
use crate::error::{Error, Result};
use crate::geometry::{build_separated_set, SeparatedSet, SetStrategy};
use crate::report::{Cell, ExperimentReport, Status, Table};

/// Relative slack when comparing a certified separation to its target;
/// rescaling to the target is exact only up to rounding.
const TARGET_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmpConfig {
    pub spec: FamilySpec,
    pub p: f64,
    pub strategy: SetStrategy,
    #[serde(default = "one")]
    pub a_target: f64,
    pub n_eval: usize,
    #[serde(default = "default_n_calib")]
    pub n_calib: usize,
    #[serde(default)]
    pub seeds: RunSeeds,
    #[serde(default)]
    pub policy: CardinalityPolicy,
    #[serde(default)]
    pub certifier: CertifierChoice,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    /// Optional acceptance band `[lo, hi]` for `κ̂`.
    #[serde(default)]
    pub kappa_band: Option<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

fn default_n_calib() -> usize {
    20_000
}

impl SmpConfig {
    pub fn new(spec: FamilySpec, p: f64, strategy: SetStrategy, n_eval: usize) -> Self {
        SmpConfig {
            spec,
            p,
            strategy,
            a_target: 1.0,
            n_eval,
            n_calib: default_n_calib(),
            seeds: RunSeeds::default(),
            policy: CardinalityPolicy::default(),
            certifier: CertifierChoice::default(),
            bootstrap_resamples: default_resamples(),
            kappa_band: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.seeds.validate()?;
        DESK.check_dim(self.spec.dim)?;
        DESK.check_p(self.p)?;
        DESK.check_n(self.n_eval)?;
        DESK.check_n(self.n_calib)?;
        if self.n_eval == 0 {
            return Err(Error::validation("n_eval must be positive"));
        }
        if !(self.a_target > 0.0 && self.a_target.is_finite()) {
            return Err(Error::validation(format!("a_target must be positive, got {}", self.a_target)));
        }
        Ok(())
    }
}

/// `√2 / max{p, 2}` for symmetric laws, `√2 / max{4p, 8}` otherwise.
pub fn fallback_kappa(p: f64, symmetric: bool) -> f64 {
    if symmetric {
        std::f64::consts::SQRT_2 / p.max(2.0)
    } else {
        std::f64::consts::SQRT_2 / (4.0 * p).max(8.0)
    }
}

fn separated_set(cfg: &SmpConfig) -> Result<(SeparatedSet, usize)> {
    cfg.validate()?;
    let required = cfg.policy.requirement(cfg.p)?;
    let certifier = cfg.certifier.resolve(&cfg.spec, cfg.n_calib, cfg.seeds.calib());
    let sep = build_separated_set(&cfg.strategy, &cfg.spec, cfg.p, cfg.a_target, &certifier, required)?;
    DESK.check_set(sep.set.len())?;
    if sep.set.len() < required {
        return Err(Error::validation(format!(
            "the {} policy at p = {} requires |T| >= {required}, the strategy produced {}",
            cfg.policy.label(),
            cfg.p,
            sep.set.len()
        )));
    }
    Ok((sep, required))
}

fn evaluate(cfg: &SmpConfig, sep: &SeparatedSet, required: usize, report: &mut ExperimentReport) -> Result<()> {
    report.metric("set_size", sep.set.len() as f64);
    report.metric("required_set_size", required as f64);
    report.metric("scale", sep.scale);
    report.certified_a = Some(sep.certified_a);
    report.note(format!("separation certified as {:?}", sep.certification));
    if sep.certified_a < cfg.a_target * (1.0 - TARGET_SLACK) {
        report.status = Status::Infeasible;
        report.note(format!(
            "certified separation {} is below the target {}; no kappa reported",
            sep.certified_a, cfg.a_target
        ));
        return Ok(());
    }
    let batch = sample_batch(&cfg.spec, cfg.n_eval, cfg.seeds.eval())?;
    let est = cfg.seeds.estimator(cfg.bootstrap_resamples);
    let sup = empirical_sup_diff(&batch, &sep.set, &est)?;
    let kappa = sup.value / sep.certified_a;
    let kappa_se = sup.stderr / sep.certified_a;
    report.sup_diff = Some(sup);
    report.kappa_hat = Some(kappa);
    report.kappa_stderr = Some(kappa_se);
    let symmetric = cfg.spec.is_symmetric();
    let fallback = fallback_kappa(cfg.p, symmetric);
    report.metric("kappa_fallback", fallback);
    report.metric("kappa_over_fallback", kappa / fallback);
    report.check("kappa_above_fallback", kappa + 3.0 * kappa_se >= fallback);
    if let Some([lo, hi]) = cfg.kappa_band {
        report.check("kappa_in_band", (lo..=hi).contains(&kappa));
    }
    Ok(())
}

/// Builds `T`, certifies its separation on calibration data and reports
/// `κ̂` against the small-`p` fallback constant.
pub fn verify_smp(cfg: &SmpConfig) -> Result<ExperimentReport> {
    let (sep, required) = separated_set(cfg)?;
    let mut report = ExperimentReport::new("verify_smp", cfg);
    evaluate(cfg, &sep, required, &mut report)?;
    Ok(report)
}

/// Largest `|corr(⟨t,X⟩, ⟨s,X⟩)|` with the offending pairs above `limit`,
/// from the sample covariance of `X`.
pub fn max_correlation(set: &IndexSet, batch: &crate::distributions::SampleBatch, limit: f64) -> (f64, Vec<(usize, usize, f64)>) {
    let d = batch.dim();
    let (mean, _) = batch.column_moments();
    let mut cov = vec![0.0; d * d];
    for row in batch.rows() {
        for i in 0..d {
            let ci = row[i] - mean[i];
            for j in 0..=i {
                cov[i * d + j] += ci * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            cov[i * d + j] /= (batch.n as f64 - 1.0).max(1.0);
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let w: Vec<Vec<f64>> = set
        .points()
        .iter()
        .map(|t| (0..d).map(|i| (0..d).map(|j| cov[i * d + j] * t[j]).sum()).collect())
        .collect();
    let var: Vec<f64> = set.points().iter().zip(&w).map(|(t, wt)| crate::empirical::dot(t, wt)).collect();
    let mut worst = 0.0f64;
    let mut offending = Vec::new();
    for i in 0..set.len() {
        for j in 0..i {
            let c = crate::empirical::dot(set.point(j), &w[i]) / (var[i] * var[j]).sqrt();
            worst = worst.max(c.abs());
            if c.abs() > limit {
                offending.push((j, i, c));
            }
        }
    }
    (worst, offending)
}

/// `verify_smp` restricted to sets whose functionals are empirically
/// uncorrelated (all pairwise correlations at most 0.05 on calibration data).
pub fn uncorrelated_case_check(cfg: &SmpConfig) -> Result<ExperimentReport> {
    const LIMIT: f64 = 0.05;
    let (sep, required) = separated_set(cfg)?;
    let calib = sample_batch(&cfg.spec, cfg.n_calib, cfg.seeds.calib())?;
    let (worst, offending) = max_correlation(&sep.set, &calib, LIMIT);
    if !offending.is_empty() {
        let shown: Vec<String> = offending
            .iter()
            .take(10)
            .map(|(i, j, c)| format!("({}, {}): {c:.4}", sep.set.labels()[*i], sep.set.labels()[*j]))
            .collect();
        return Err(Error::Precondition(format!(
            "{} pairs have |correlation| > {LIMIT}: {}{}",
            offending.len(),
            shown.join(", "),
            if offending.len() > 10 { ", ..." } else { "" }
        )));
    }
    let mut report = ExperimentReport::new("uncorrelated_case", cfg);
    report.metric("max_abs_correlation", worst);
    evaluate(cfg, &sep, required, &mut report)?;
    Ok(report)
}

/// `verify_smp` under the `⌈e^{e^p}⌉` policy, for `p ∈ [1, 2]`.
pub fn double_exponent_case(cfg: &SmpConfig) -> Result<ExperimentReport> {
    let required = CardinalityPolicy::ExpExpP.requirement(cfg.p)?;
    if !(1.0..=2.0).contains(&cfg.p) {
        return Err(Error::validation(format!("double-exponent case needs p in [1, 2], got {}", cfg.p)));
    }
    let cfg = SmpConfig { policy: CardinalityPolicy::ExpExpP, ..cfg.clone() };
    let (sep, _) = separated_set(&cfg)?;
    let mut report = ExperimentReport::new("double_exponent", &cfg);
    evaluate(&cfg, &sep, required, &mut report)?;
    Ok(report)
}

/// `verify_smp` under the `⌈e^{p²}⌉` policy for unconditional laws.
pub fn unconditional_psquare_case(cfg: &SmpConfig) -> Result<ExperimentReport> {
    let required = CardinalityPolicy::ExpP2.requirement(cfg.p)?;
    if !cfg.spec.is_unconditional() {
        return Err(Error::validation(format!("{} is not unconditional", cfg.spec.label())));
    }
    let cfg = SmpConfig { policy: CardinalityPolicy::ExpP2, ..cfg.clone() };
    let (sep, _) = separated_set(&cfg)?;
    let mut report = ExperimentReport::new("unconditional_psquare", &cfg);
    evaluate(&cfg, &sep, required, &mut report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogdConfig {
    /// Template run; its family dimension is replaced by each entry of `dims`.
    #[serde(flatten)]
    pub base: SmpConfig,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_dims() -> Vec<usize> {
    vec![4, 16, 64]
}

fn default_floor() -> f64 {
    0.1
}

fn with_dim(spec: &FamilySpec, d: usize) -> Result<FamilySpec> {
    match spec.kind {
        FamilyKind::AffineImage { .. } | FamilyKind::Symmetrized { .. } => Err(Error::validation(
            "dimension sweeps need a base family (not an affine image or symmetrization)",
        )),
        _ => Ok(FamilySpec { kind: spec.kind.clone(), dim: d }),
    }
}

/// `κ̂ · log(d + 1)` across dimensions for an unconditional family, with the
/// same sets evaluated under the exponential product law for comparison.
pub fn logd_unconditional_check(cfg: &LogdConfig) -> Result<ExperimentReport> {
    if !cfg.base.spec.is_unconditional() {
        return Err(Error::validation(format!("{} is not unconditional", cfg.base.spec.label())));
    }
    if cfg.dims.is_empty() {
        return Err(Error::validation("dims must be nonempty"));
    }
    let mut report = ExperimentReport::new("logd_unconditional", cfg);
    let mut table = Table::new(&[
        "d",
        "set_size",
        "certified_a",
        "sup_diff",
        "sup_diff_stderr",
        "kappa_hat",
        "kappa_log_d",
        "exponential_sup_diff",
    ]);
    let mut worst = f64::INFINITY;
    for &d in &cfg.dims {
        let sub = SmpConfig { spec: with_dim(&cfg.base.spec, d)?, ..cfg.base.clone() };
        let (sep, required) = separated_set(&sub)?;
        let mut inner = ExperimentReport::new("verify_smp", &sub);
        evaluate(&sub, &sep, required, &mut inner)?;
        let Some(kappa) = inner.kappa_hat else {
            report.status = Status::Infeasible;
            report.note(format!("d = {d}: separation below target"));
            continue;
        };
        let sup = inner.sup_diff.expect("set with kappa");
        let exp_batch = sample_batch(&FamilySpec::exponential_product(d), sub.n_eval, sub.seeds.eval())?;
        let exp_sup = empirical_sup_diff(&exp_batch, &sep.set, &sub.seeds.estimator(sub.bootstrap_resamples))?;
        let scaled = kappa * (d as f64 + 1.0).ln();
        worst = worst.min(scaled);
        table.push(vec![
            Cell::from(d),
            sep.set.len().into(),
            sep.certified_a.into(),
            sup.value.into(),
            sup.stderr.into(),
            kappa.into(),
            scaled.into(),
            exp_sup.value.into(),
        ]);
    }
    report.metric("min_kappa_log_d", worst);
    report.table = Some(table);
    if report.status != Status::Infeasible {
        report.check("kappa_log_d_above_floor", worst >= cfg.floor);
    }
    Ok(report)
}
