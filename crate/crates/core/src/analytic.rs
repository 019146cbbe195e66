//! Closed-form moments and constant-free two-sided moment equivalents.
//!
//! Formulas with unspecified universal constants are exposed as their
//! constant-free cores ([`MomentKind::TwoSidedEquivalent`]); acceptance bands
//! around the cores are configuration values elsewhere, never hardcoded here.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::distributions::{FamilyKind, FamilySpec, SampleBatch};
use crate::empirical::lp_norm_of;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    Exact,
    TwoSidedEquivalent,
    Empirical,
}

/// `‖Y‖_p = (E|Y|^p)^{1/p}` or a formula equivalent to it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub value: f64,
    pub kind: MomentKind,
    pub p: f64,
    /// Set when the input vector was zero.
    #[serde(default)]
    pub degenerate: bool,
}

impl MomentValue {
    fn exact(value: f64, p: f64) -> Self {
        MomentValue { value, kind: MomentKind::Exact, p, degenerate: false }
    }

    fn core(value: f64, p: f64, degenerate: bool) -> Self {
        MomentValue { value, kind: MomentKind::TwoSidedEquivalent, p, degenerate }
    }
}

/// `γ_p = ‖N(0,1)‖_p = (2^{p/2} Γ((p+1)/2) / √π)^{1/p}`.
pub fn gaussian_gamma_p(p: f64) -> MomentValue {
    let ln = 0.5 * p * std::f64::consts::LN_2 + ln_gamma(0.5 * (p + 1.0))
        - 0.5 * std::f64::consts::PI.ln();
    MomentValue::exact((ln / p).exp(), p)
}

/// `Γ(p+1)^{1/p} / √2`: the `L_p` norm of a variance-one symmetric exponential.
pub fn exponential_coordinate_moment(p: f64) -> MomentValue {
    MomentValue::exact((ln_gamma(p + 1.0) / p).exp() * std::f64::consts::FRAC_1_SQRT_2, p)
}

/// Rademacher-sum core `Σ_{i≤⌊p⌋} t*_i + √p (Σ_{i>⌊p⌋} t*_i²)^{1/2}` where `t*` is
/// the nonincreasing rearrangement of `|t_i|`.
pub fn hitczenko_rademacher(t: &[f64], p: f64) -> MomentValue {
    let mut sorted: Vec<f64> = t.iter().map(|x| x.abs()).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let head = (p.floor() as usize).min(sorted.len());
    let head_sum: f64 = sorted[..head].iter().sum();
    let tail_sq: f64 = sorted[head..].iter().map(|x| x * x).sum();
    let degenerate = sorted.first().is_none_or(|&m| m == 0.0);
    MomentValue::core(head_sum + p.sqrt() * tail_sq.sqrt(), p, degenerate)
}

/// Exponential-sum core `p‖t‖_∞ + √p‖t‖_2`.
pub fn gluskin_kwapien_exponential(t: &[f64], p: f64) -> MomentValue {
    let linf = t.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let l2 = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    MomentValue::core(p * linf + p.sqrt() * l2, p, linf == 0.0)
}

/// `Γ(p+1)^{1/p} / Γ(q+1)^{1/q}`, the sharp upper bound for `‖Y‖_p / ‖Y‖_q`
/// over symmetric log-concave `Y`, `0 < q ≤ p`.
pub fn moment_growth_bound(p: f64, q: f64) -> f64 {
    assert!(q > 0.0 && q <= p, "moment_growth_bound needs 0 < q <= p (got p={p}, q={q})");
    (ln_gamma(p + 1.0) / p - ln_gamma(q + 1.0) / q).exp()
}

/// The simplified growth bound `p / q`, valid for `p ≥ q ≥ 2`.
pub fn moment_growth_bound_simple(p: f64, q: f64) -> Option<f64> {
    (q >= 2.0 && p >= q).then(|| p / q)
}

/// Constant-free cores of the two-sided comparison for isotropic
/// unconditional log-concave vectors: Rademacher below, exponential above.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBand {
    pub lower: f64,
    pub upper: f64,
    pub p: f64,
    pub kind: MomentKind,
    pub degenerate: bool,
}

pub fn bobkov_nazarov_band(t: &[f64], p: f64) -> MomentBand {
    let lo = hitczenko_rademacher(t, p);
    let hi = gluskin_kwapien_exponential(t, p);
    MomentBand {
        lower: std::f64::consts::FRAC_1_SQRT_2 * lo.value,
        upper: 2.0 * 6f64.sqrt() * hi.value,
        p,
        kind: MomentKind::TwoSidedEquivalent,
        degenerate: lo.degenerate,
    }
}

#[derive(Clone, Copy, Debug)]
pub enum MetricMode<'a> {
    Analytic,
    Empirical(&'a SampleBatch),
}

/// `d_{X,p}(s, t) = ‖⟨s − t, X⟩‖_p`.
///
/// Analytic mode is exact for the gaussian family and returns the
/// constant-free cores for rademacher and exponential_product.
pub fn metric_dxp(spec: &FamilySpec, s: &[f64], t: &[f64], p: f64, mode: MetricMode<'_>) -> Result<MomentValue> {
    if s.len() != spec.dim || t.len() != spec.dim {
        return Err(Error::validation(format!(
            "points have dims {} and {}, family dim is {}",
            s.len(),
            t.len(),
            spec.dim
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::validation(format!("p must be >= 1, got {p}")));
    }
    let diff: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
    match mode {
        MetricMode::Analytic => analytic_linear_moment(spec, &diff, p),
        MetricMode::Empirical(batch) => {
            if batch.dim() != spec.dim {
                return Err(Error::validation("batch dim differs from family dim"));
            }
            let vals: Vec<f64> = batch
                .rows()
                .map(|x| x.iter().zip(&diff).map(|(a, b)| a * b).sum())
                .collect();
            Ok(MomentValue { value: lp_norm_of(&vals, p), kind: MomentKind::Empirical, p, degenerate: false })
        }
    }
}

/// `‖⟨t, X⟩‖_p` from a closed form (gaussian) or a formula core.
pub fn analytic_linear_moment(spec: &FamilySpec, t: &[f64], p: f64) -> Result<MomentValue> {
    match spec.kind {
        FamilyKind::Gaussian => {
            let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
            Ok(MomentValue::exact(gaussian_gamma_p(p).value * norm, p))
        }
        FamilyKind::Rademacher => Ok(hitczenko_rademacher(t, p)),
        FamilyKind::ExponentialProduct => Ok(gluskin_kwapien_exponential(t, p)),
        _ => Err(Error::Capability {
            family: spec.label(),
            fallback: "the empirical mode with a calibration batch".into(),
        }),
    }
}

/// Whether [`analytic_linear_moment`] gives the true moment (not a core).
pub fn has_exact_linear_moments(spec: &FamilySpec) -> bool {
    matches!(spec.kind, FamilyKind::Gaussian)
}
