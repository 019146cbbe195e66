//! End-to-end experiment pipelines at desk scale.
//!
//! Each pipeline takes a serialisable config, draws every random number from
//! seeds recorded in that config, and returns an [`ExperimentReport`]. The
//! acceptance bands used as pass criteria are configuration defaults, not
//! constants of the underlying inequalities.

mod chained;
mod moments;
mod smp;

use serde::{Deserialize, Serialize};

use crate::empirical::{BootstrapConfig, EstimatorConfig};
use crate::error::{Error, Result};
use crate::geometry::Certifier;
use crate::report::ExperimentReport;
use crate::rng::Seed;

pub use chained::{weak_strong_chained, NetChoice, WeakStrongChainedConfig};
pub use moments::{
    band_conformance_suite, default_t_grid, moment_growth_suite, radial_moment_ratio, supcoord_check,
    weak_strong_linf, BandsConfig, GrowthConfig, RadialRatioConfig, SupcoordConfig, WeakStrongLinfConfig,
};
pub use smp::{
    double_exponent_case, logd_unconditional_check, uncorrelated_case_check, unconditional_psquare_case,
    verify_smp, LogdConfig, SmpConfig,
};

/// Desk-scale limits. Exceeding one is an explicit refusal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeskCaps {
    pub max_dim: usize,
    pub max_set: usize,
    pub max_n: usize,
    pub max_p: f64,
}

pub const DESK: DeskCaps = DeskCaps { max_dim: 128, max_set: 10_000, max_n: 10_000_000, max_p: 32.0 };

impl DeskCaps {
    pub fn check_dim(&self, d: usize) -> Result<()> {
        cap("dimension d", d as f64, self.max_dim as f64)
    }

    pub fn check_set(&self, m: usize) -> Result<()> {
        cap("index set size |T|", m as f64, self.max_set as f64)
    }

    pub fn check_n(&self, n: usize) -> Result<()> {
        cap("sample count n", n as f64, self.max_n as f64)
    }

    pub fn check_p(&self, p: f64) -> Result<()> {
        if !(p >= 1.0) {
            return Err(Error::validation(format!("p must be >= 1, got {p}")));
        }
        cap("moment order p", p, self.max_p)
    }
}

fn cap(what: &str, required: f64, limit: f64) -> Result<()> {
    if required > limit {
        Err(Error::DeskCap { what: what.into(), required, cap: limit })
    } else {
        Ok(())
    }
}

/// Required cardinality of `T` as a function of `p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CardinalityPolicy {
    /// `⌈e^p⌉`.
    #[default]
    CeilExpP,
    /// `⌈e^{p²}⌉`.
    ExpP2,
    /// `⌈e^{e^p}⌉`.
    ExpExpP,
}

impl CardinalityPolicy {
    /// The threshold as a real number (possibly astronomically large).
    pub fn threshold(self, p: f64) -> f64 {
        match self {
            CardinalityPolicy::CeilExpP => p.exp().ceil(),
            CardinalityPolicy::ExpP2 => (p * p).exp().ceil(),
            CardinalityPolicy::ExpExpP => p.exp().exp().ceil(),
        }
    }

    /// The threshold, refused when above the desk cap on `|T|`.
    pub fn requirement(self, p: f64) -> Result<usize> {
        let t = self.threshold(p);
        if t > DESK.max_set as f64 {
            return Err(Error::DeskCap {
                what: format!("|T| required by the {} policy at p = {p}", self.label()),
                required: t,
                cap: DESK.max_set as f64,
            });
        }
        Ok(t as usize)
    }

    pub fn label(self) -> &'static str {
        match self {
            CardinalityPolicy::CeilExpP => "ceil_exp_p",
            CardinalityPolicy::ExpP2 => "exp_p2",
            CardinalityPolicy::ExpExpP => "exp_exp_p",
        }
    }
}

/// How the separation of `T` is certified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertifierChoice {
    /// Exact closed forms when the family has them, otherwise calibration data.
    #[default]
    Auto,
    Analytic,
    Empirical,
}

impl CertifierChoice {
    pub fn resolve(self, spec: &crate::distributions::FamilySpec, n_calib: usize, calib: Seed) -> Certifier {
        match self {
            CertifierChoice::Analytic => Certifier::Analytic,
            CertifierChoice::Auto if crate::analytic::has_exact_linear_moments(spec) => Certifier::Analytic,
            _ => Certifier::Empirical { n: n_calib, seed: calib },
        }
    }
}

/// Seeds of one run: evaluation and calibration use distinct streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub root: u64,
    #[serde(default = "default_eval_stream")]
    pub eval_stream: u64,
    #[serde(default = "default_calib_stream")]
    pub calib_stream: u64,
}

fn default_eval_stream() -> u64 {
    1
}
fn default_calib_stream() -> u64 {
    2
}

impl Default for RunSeeds {
    fn default() -> Self {
        RunSeeds { root: 0, eval_stream: 1, calib_stream: 2 }
    }
}

impl RunSeeds {
    pub fn validate(&self) -> Result<()> {
        if self.eval_stream == self.calib_stream {
            return Err(Error::validation("evaluation and calibration streams must differ"));
        }
        Ok(())
    }

    pub fn eval(&self) -> Seed {
        Seed::new(self.root, self.eval_stream)
    }

    pub fn calib(&self) -> Seed {
        Seed::new(self.root, self.calib_stream)
    }

    pub fn estimator(&self, resamples: usize) -> EstimatorConfig {
        EstimatorConfig {
            p_max: DESK.max_p,
            bootstrap: BootstrapConfig { resamples, seed: self.eval().derive(0xB007) },
        }
    }
}

pub(crate) fn default_resamples() -> usize {
    200
}

/// Any pipeline, tagged by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    VerifySmp(SmpConfig),
    UncorrelatedCase(SmpConfig),
    DoubleExponent(SmpConfig),
    UnconditionalPsquare(SmpConfig),
    LogdUnconditional(LogdConfig),
    WeakStrongLinf(WeakStrongLinfConfig),
    RadialMomentRatio(RadialRatioConfig),
    Supcoord(SupcoordConfig),
    BandConformance(BandsConfig),
    MomentGrowth(GrowthConfig),
    WeakStrongChained(WeakStrongChainedConfig),
}

impl ExperimentConfig {
    pub fn run(&self) -> Result<ExperimentReport> {
        match self {
            ExperimentConfig::VerifySmp(c) => verify_smp(c),
            ExperimentConfig::UncorrelatedCase(c) => uncorrelated_case_check(c),
            ExperimentConfig::DoubleExponent(c) => double_exponent_case(c),
            ExperimentConfig::UnconditionalPsquare(c) => unconditional_psquare_case(c),
            ExperimentConfig::LogdUnconditional(c) => logd_unconditional_check(c),
            ExperimentConfig::WeakStrongLinf(c) => weak_strong_linf(c),
            ExperimentConfig::RadialMomentRatio(c) => radial_moment_ratio(c),
            ExperimentConfig::Supcoord(c) => supcoord_check(c),
            ExperimentConfig::BandConformance(c) => band_conformance_suite(c),
            ExperimentConfig::MomentGrowth(c) => moment_growth_suite(c),
            ExperimentConfig::WeakStrongChained(c) => weak_strong_chained(c),
        }
    }

    fn seeds_mut(&mut self) -> &mut RunSeeds {
        match self {
            ExperimentConfig::VerifySmp(c)
            | ExperimentConfig::UncorrelatedCase(c)
            | ExperimentConfig::DoubleExponent(c)
            | ExperimentConfig::UnconditionalPsquare(c) => &mut c.seeds,
            ExperimentConfig::LogdUnconditional(c) => &mut c.base.seeds,
            ExperimentConfig::WeakStrongLinf(c) => &mut c.seeds,
            ExperimentConfig::RadialMomentRatio(c) => &mut c.seeds,
            ExperimentConfig::Supcoord(c) => &mut c.seeds,
            ExperimentConfig::BandConformance(c) => &mut c.seeds,
            ExperimentConfig::MomentGrowth(c) => &mut c.seeds,
            ExperimentConfig::WeakStrongChained(c) => &mut c.seeds,
        }
    }

    pub fn set_root_seed(&mut self, root: u64) {
        self.seeds_mut().root = root;
    }

    pub fn set_eval_stream(&mut self, stream: u64) {
        self.seeds_mut().eval_stream = stream;
    }

    /// Overrides the evaluation sample count where the pipeline has one.
    pub fn set_n(&mut self, n: usize) {
        match self {
            ExperimentConfig::VerifySmp(c)
            | ExperimentConfig::UncorrelatedCase(c)
            | ExperimentConfig::DoubleExponent(c)
            | ExperimentConfig::UnconditionalPsquare(c) => c.n_eval = n,
            ExperimentConfig::LogdUnconditional(c) => c.base.n_eval = n,
            ExperimentConfig::WeakStrongLinf(c) => c.n = n,
            ExperimentConfig::RadialMomentRatio(c) => c.n = n,
            ExperimentConfig::Supcoord(c) => c.n_eval = n,
            ExperimentConfig::BandConformance(c) => c.n = n,
            ExperimentConfig::MomentGrowth(c) => c.n = n,
            ExperimentConfig::WeakStrongChained(c) => c.n_eval = n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::VerifySmp(_) => "verify_smp",
            ExperimentConfig::UncorrelatedCase(_) => "uncorrelated_case",
            ExperimentConfig::DoubleExponent(_) => "double_exponent",
            ExperimentConfig::UnconditionalPsquare(_) => "unconditional_psquare",
            ExperimentConfig::LogdUnconditional(_) => "logd_unconditional",
            ExperimentConfig::WeakStrongLinf(_) => "weak_strong_linf",
            ExperimentConfig::RadialMomentRatio(_) => "radial_moment_ratio",
            ExperimentConfig::Supcoord(_) => "supcoord",
            ExperimentConfig::BandConformance(_) => "band_conformance",
            ExperimentConfig::MomentGrowth(_) => "moment_growth",
            ExperimentConfig::WeakStrongChained(_) => "weak_strong_chained",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert_eq!(CardinalityPolicy::ExpExpP.requirement(1.0).unwrap(), 16);
        assert_eq!(CardinalityPolicy::ExpExpP.requirement(2.0).unwrap(), 1619);
        let err = CardinalityPolicy::ExpExpP.requirement(3.0).unwrap_err();
        match err {
            Error::DeskCap { required, .. } => assert!((required / 5.3e8 - 1.0).abs() < 0.01),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(CardinalityPolicy::ExpP2.requirement(2.0).unwrap(), 55);
        assert_eq!(CardinalityPolicy::ExpP2.requirement(3.0).unwrap(), 8104);
        assert!(matches!(CardinalityPolicy::ExpP2.requirement(4.0), Err(Error::DeskCap { .. })));
        assert_eq!(CardinalityPolicy::CeilExpP.requirement(2.0).unwrap(), 8);
    }

    #[test]
    fn caps() {
        assert!(DESK.check_dim(128).is_ok());
        assert!(matches!(DESK.check_dim(129), Err(Error::DeskCap { .. })));
        assert!(matches!(DESK.check_p(33.0), Err(Error::DeskCap { .. })));
        assert!(matches!(DESK.check_p(0.5), Err(Error::Validation(_))));
    }
}
