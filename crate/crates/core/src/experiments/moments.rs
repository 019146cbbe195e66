//! Moment comparisons: weak versus strong moments of coordinate maxima, the
//! radial moment/median ratio, coordinate-max minoration, two-sided moment
//! bands for unconditional laws and moment growth.

use serde::{Deserialize, Serialize};

use super::{default_resamples, RunSeeds, DESK};
use crate::analytic::{
    bobkov_nazarov_band, exponential_coordinate_moment, gaussian_gamma_p, moment_growth_bound,
};
use crate::distributions::{isotropize, sample_batch, FamilyKind, FamilySpec, PhiSpec, SampleBatch};
use crate::empirical::{
    bootstrap, dot, empirical_lp_profile, euclidean, lp_norm_of, lp_profile, mean_estimate, mean_profile, per_row,
    NormSpec,
};
use crate::error::{Error, Result};
use crate::report::{Cell, ExperimentReport, Status, Table};

fn stderr_of(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn powf_fn(p: f64) -> impl Fn(f64) -> f64 + Sync {
    let int = p == p.trunc() && p <= 64.0;
    move |x: f64| if int { x.powi(p as i32) } else { x.powf(p) }
}

/// Draws `n` isotropic rows: directly for known-isotropic families, through
/// a whitening fitted on an extra calibration split otherwise.
fn isotropic_batch(spec: &FamilySpec, n: usize, seeds: &RunSeeds, calibration_fraction: f64) -> Result<(SampleBatch, bool)> {
    if spec.is_isotropic() {
        return Ok((sample_batch(spec, n, seeds.eval())?, false));
    }
    let total = (n as f64 / (1.0 - calibration_fraction)).ceil() as usize + 1;
    let raw = sample_batch(spec, total, seeds.eval())?;
    let (_, held) = isotropize(&raw, calibration_fraction)?;
    Ok((held, true))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakStrongLinfConfig {
    pub spec: FamilySpec,
    /// Coordinate weights; all ones when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub p: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seeds: RunSeeds,
    #[serde(default = "band_three")]
    pub band: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_fraction")]
    pub calibration_fraction: f64,
}

fn default_n() -> usize {
    200_000
}
fn band_three() -> f64 {
    3.0
}
fn default_fraction() -> f64 {
    0.2
}

fn weights_for(weights: &Option<Vec<f64>>, d: usize) -> Result<Vec<f64>> {
    let w = weights.clone().unwrap_or_else(|| vec![1.0; d]);
    if w.len() != d || w.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(format!("need {d} finite weights, got {}", w.len())));
    }
    Ok(w)
}

/// `R = ‖max_i |a_i X_i|‖_p / (E max_i |a_i X_i| + max_i ‖a_i X_i‖_p)`.
pub fn weak_strong_linf(cfg: &WeakStrongLinfConfig) -> Result<ExperimentReport> {
    cfg.spec.validate()?;
    cfg.seeds.validate()?;
    DESK.check_dim(cfg.spec.dim)?;
    DESK.check_p(cfg.p)?;
    DESK.check_n(cfg.n)?;
    let d = cfg.spec.dim;
    let a = weights_for(&cfg.weights, d)?;
    let est = cfg.seeds.estimator(cfg.bootstrap_resamples);
    let (batch, whitened) = isotropic_batch(&cfg.spec, cfg.n, &cfg.seeds, cfg.calibration_fraction)?;
    let n = batch.n;

    let maxes = per_row(&batch, |x| x.iter().zip(&a).fold(0.0, |m, (v, w)| m.max((v * w).abs())));
    let coord_moments: Vec<f64> = (0..d)
        .map(|i| {
            let col: Vec<f64> = batch.rows().map(|x| a[i] * x[i]).collect();
            lp_norm_of(&col, cfg.p)
        })
        .collect();
    let (i_star, &weak) = coord_moments
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
        .expect("d >= 1");
    let strong_profile = lp_profile(&maxes, &[1.0, cfg.p], &est)?;
    let mean_max = strong_profile.estimates[0].value;
    let strong = strong_profile.estimates[1].value;
    let ratio = strong / (mean_max + weak);

    // Joint bootstrap of the three terms; the weak term is resampled on its
    // maximising coordinate only.
    let pw = powf_fn(cfg.p);
    let sm = maxes.iter().fold(0.0f64, |m, v| m.max(*v)).max(f64::MIN_POSITIVE);
    let star: Vec<f64> = batch.rows().map(|x| (a[i_star] * x[i_star]).abs()).collect();
    let sc = star.iter().fold(0.0f64, |m, v| m.max(*v)).max(f64::MIN_POSITIVE);
    let cols: Vec<[f64; 3]> = maxes.iter().zip(&star).map(|(m, s)| [pw(m / sm), *m, pw(s / sc)]).collect();
    let reps: Vec<f64> = bootstrap(n, &est.bootstrap, |idx| {
        let mut acc = [0.0; 3];
        for &i in idx {
            let c = &cols[i as usize];
            acc.iter_mut().zip(c).for_each(|(x, y)| *x += y);
        }
        let nn = n as f64;
        let s = sm * (acc[0] / nn).powf(1.0 / cfg.p);
        let e = acc[1] / nn;
        let w = sc * (acc[2] / nn).powf(1.0 / cfg.p);
        vec![s / (e + w)]
    })
    .into_iter()
    .map(|r| r[0])
    .collect();
    let ratio_se = stderr_of(&reps);

    let mut report = ExperimentReport::new("weak_strong_linf", cfg);
    report.metric("strong_moment", strong);
    report.metric("mean_max", mean_max);
    report.metric("max_weak_moment", weak);
    report.metric("ratio", ratio);
    report.metric("ratio_stderr", ratio_se);
    report.metric("n", n as f64);
    if whitened {
        report.note("family whitened on a calibration split before measuring");
    }
    report.check("ratio_within_band", ratio <= cfg.band);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialRatioConfig {
    pub spec: FamilySpec,
    #[serde(default = "default_norm")]
    pub norm: NormSpec,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seeds: RunSeeds,
    #[serde(default = "band_five")]
    pub band: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn default_norm() -> NormSpec {
    NormSpec::L2
}
fn band_five() -> f64 {
    5.0
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let (lo, &mut hi, _) = v.select_nth_unstable_by(n / 2, |a, b| a.total_cmp(b));
    if n % 2 == 1 {
        hi
    } else {
        0.5 * (lo.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) + hi)
    }
}

/// `(Ê‖X‖^d)^{1/d} / Med̂ ‖X‖` with a joint bootstrap standard error.
pub fn radial_moment_ratio(cfg: &RadialRatioConfig) -> Result<ExperimentReport> {
    cfg.spec.validate()?;
    cfg.seeds.validate()?;
    match &cfg.spec.kind {
        FamilyKind::Radial { .. } | FamilyKind::UniformBall { .. } => {}
        _ => return Err(Error::validation(format!("{} is not a radial family", cfg.spec.label()))),
    }
    let d = cfg.spec.dim;
    if d > 32 {
        return Err(Error::DeskCap {
            what: "dimension for the d-th moment of the norm (estimator variance grows with d)".into(),
            required: d as f64,
            cap: 32.0,
        });
    }
    DESK.check_n(cfg.n)?;
    if cfg.n < 100 {
        return Err(Error::validation(format!("median needs n >= 100, got {}", cfg.n)));
    }
    cfg.norm.validate(d)?;
    let batch = sample_batch(&cfg.spec, cfg.n, cfg.seeds.eval())?;
    let est = cfg.seeds.estimator(cfg.bootstrap_resamples);
    let vals = per_row(&batch, |x| cfg.norm.eval(x));
    let p = d as f64;
    let moment = lp_norm_of(&vals, p);
    let median = median_in_place(&mut vals.clone());
    let ratio = moment / median;

    let scale = vals.iter().fold(0.0f64, |m, v| m.max(*v)).max(f64::MIN_POSITIVE);
    let pw = powf_fn(p);
    let powers: Vec<f64> = vals.iter().map(|v| pw(v / scale)).collect();
    let n = vals.len();
    let reps: Vec<f64> = bootstrap(n, &est.bootstrap, |idx| {
        let mut s = 0.0;
        let mut sample = Vec::with_capacity(n);
        for &i in idx {
            s += powers[i as usize];
            sample.push(vals[i as usize]);
        }
        let m = scale * (s / n as f64).powf(1.0 / p);
        vec![m / median_in_place(&mut sample)]
    })
    .into_iter()
    .map(|r| r[0])
    .collect();
    let se = stderr_of(&reps);
    let half_width = 1.96 * se / ratio;

    let mut report = ExperimentReport::new("radial_moment_ratio", cfg);
    report.metric("moment_d", moment);
    report.metric("median", median);
    report.metric("ratio", ratio);
    report.metric("ratio_stderr", se);
    report.metric("ci_half_width_relative", half_width);
    if let (FamilyKind::UniformBall { r_exponent }, NormSpec::Lp { r }) = (&cfg.spec.kind, &cfg.norm) {
        if r == r_exponent {
            // The radius has CDF s^d on [0, 1]: (E s^d)^{1/d} = 2^{-1/d} = median.
            report.metric("exact_ratio", 1.0);
        }
    }
    if let (FamilyKind::UniformBall { r_exponent }, NormSpec::L2) = (&cfg.spec.kind, &cfg.norm) {
        if *r_exponent == 2.0 {
            report.metric("exact_ratio", 1.0);
        }
    }
    if let (FamilyKind::Radial { r_exponent, phi: PhiSpec::HardWall }, NormSpec::L2) = (&cfg.spec.kind, &cfg.norm) {
        if *r_exponent == 2.0 {
            report.metric("exact_ratio", 1.0);
        }
    }
    report.check("ratio_within_band", ratio <= cfg.band);
    report.check("estimate_stable", half_width <= 0.2);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupcoordConfig {
    pub spec: FamilySpec,
    /// Coordinate weights; by default `1/‖X_i‖_p` for families with an exact
    /// coordinate moment, all ones otherwise.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub p: f64,
    #[serde(default = "one")]
    pub v: f64,
    #[serde(default = "default_n")]
    pub n_eval: usize,
    #[serde(default = "default_calib")]
    pub n_calib: usize,
    #[serde(default)]
    pub seeds: RunSeeds,
    #[serde(default = "two")]
    pub c1_max: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_calib() -> usize {
    20_000
}

fn exact_coordinate_moment(spec: &FamilySpec, p: f64) -> Option<f64> {
    match spec.kind {
        FamilyKind::Gaussian => Some(gaussian_gamma_p(p).value),
        FamilyKind::ExponentialProduct => Some(exponential_coordinate_moment(p).value),
        FamilyKind::Rademacher => Some(1.0),
        _ => None,
    }
}

/// `Ĉ₁ = V / Ê max_i |a_i X_i|` for an isotropic law with
/// `min_i ‖a_i X_i‖_p ≥ V` and `d ≥ e^p − 1`.
pub fn supcoord_check(cfg: &SupcoordConfig) -> Result<ExperimentReport> {
    cfg.spec.validate()?;
    cfg.seeds.validate()?;
    DESK.check_dim(cfg.spec.dim)?;
    DESK.check_p(cfg.p)?;
    DESK.check_n(cfg.n_eval)?;
    DESK.check_n(cfg.n_calib)?;
    if !cfg.spec.is_isotropic() {
        return Err(Error::validation(format!(
            "{} is not known to be isotropic; whiten it with an affine image first",
            cfg.spec.label()
        )));
    }
    let d = cfg.spec.dim;
    let exact = exact_coordinate_moment(&cfg.spec, cfg.p);
    let a = match (&cfg.weights, exact) {
        (Some(_), _) => weights_for(&cfg.weights, d)?,
        (None, Some(m)) => vec![cfg.v / m; d],
        (None, None) => vec![1.0; d],
    };
    let mut report = ExperimentReport::new("supcoord", cfg);
    let threshold = cfg.p.exp().ceil() - 1.0;
    report.metric("dimension_threshold", threshold);
    if (d as f64) < threshold {
        report.status = Status::Infeasible;
        report.note(format!("d = {d} is below ceil(e^p) - 1 = {threshold}"));
        return Ok(report);
    }
    let est = cfg.seeds.estimator(cfg.bootstrap_resamples);

    // Certify min_i ‖a_i X_i‖_p ≥ V.
    let certified_min = match exact {
        Some(m) => {
            report.note("coordinate moments certified by closed form");
            a.iter().fold(f64::INFINITY, |acc, w| acc.min(w.abs() * m))
        }
        None => {
            report.note("coordinate moments certified on calibration data within 3 standard errors");
            let calib = sample_batch(&cfg.spec, cfg.n_calib, cfg.seeds.calib())?;
            let mut worst = f64::INFINITY;
            for i in 0..d {
                let col: Vec<f64> = calib.rows().map(|x| a[i] * x[i]).collect();
                let e = lp_profile(&col, &[cfg.p], &est)?.estimates[0];
                worst = worst.min(e.value + 3.0 * e.stderr);
            }
            worst
        }
    };
    report.metric("certified_min_coordinate_moment", certified_min);
    if certified_min < cfg.v * (1.0 - 1e-12) {
        report.status = Status::Infeasible;
        report.note(format!("min coordinate moment {certified_min} is below V = {}", cfg.v));
        return Ok(report);
    }
    let batch = sample_batch(&cfg.spec, cfg.n_eval, cfg.seeds.eval())?;
    let maxes = per_row(&batch, |x| x.iter().zip(&a).fold(0.0, |m, (v, w)| m.max((v * w).abs())));
    let mean = mean_estimate(&maxes, &est.bootstrap)?;
    let c1 = cfg.v / mean.value;
    let c1_se = cfg.v * mean.stderr / (mean.value * mean.value);
    report.metric("mean_max", mean.value);
    report.metric("mean_max_stderr", mean.stderr);
    report.metric("c1_hat", c1);
    report.metric("c1_stderr", c1_se);
    report.check("c1_within_band", c1 <= cfg.c1_max);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandsConfig {
    pub spec: FamilySpec,
    /// Directions `t`; a default grid when absent.
    #[serde(default)]
    pub t_grid: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_pgrid")]
    pub p_grid: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seeds: RunSeeds,
    #[serde(default = "band_six")]
    pub factor: f64,
    #[serde(default = "three")]
    pub truncation_slack: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn default_pgrid() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}
fn band_six() -> f64 {
    6.0
}
fn three() -> f64 {
    3.0
}

/// `e_1`, `e_1 − e_2`, the normalised all-ones vector and a normalised
/// geometric decay, with labels.
pub fn default_t_grid(d: usize) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    out.push(("e1".to_string(), e1));
    if d >= 2 {
        let mut t = vec![0.0; d];
        t[0] = 1.0;
        t[1] = -1.0;
        out.push(("e1-e2".to_string(), t));
        let s = 1.0 / (d as f64).sqrt();
        out.push(("ones/sqrt(d)".to_string(), vec![s; d]));
        let g: Vec<f64> = (0..d).map(|i| 0.5f64.powi(i as i32)).collect();
        let n = euclidean(&g);
        out.push(("geometric".to_string(), g.iter().map(|x| x / n).collect()));
    }
    out
}

fn closed_form(spec: &FamilySpec, t: &[f64], p: f64) -> Option<f64> {
    let nz: Vec<usize> = (0..t.len()).filter(|&i| t[i] != 0.0).collect();
    match spec.kind {
        FamilyKind::Gaussian => Some(gaussian_gamma_p(p).value * euclidean(t)),
        FamilyKind::ExponentialProduct if nz.len() == 1 => Some(t[nz[0]].abs() * exponential_coordinate_moment(p).value),
        FamilyKind::Rademacher if nz.len() == 1 => Some(t[nz[0]].abs()),
        // X_i − X_j for independent uniforms on [−1, 1] is triangular on [−2, 2].
        FamilyKind::UniformCube if nz.len() == 2 && p == 1.0 && t[nz[0]].abs() == 1.0 && t[nz[1]] == -t[nz[0]] => {
            Some(2.0 / 3.0)
        }
        FamilyKind::UniformCube if nz.len() == 1 => Some(t[nz[0]].abs() / (p + 1.0).powf(1.0 / p)),
        _ => None,
    }
}

/// Empirical `‖⟨t, X⟩‖_p` on the isotropic scale against the two-sided band
/// `[H/√2, 2√6·GK]` widened by `factor`, plus the truncated-moment bound
/// `E(|Y| ∧ V)^p ≥ (V/12)^p` at `V = ‖Y‖_p`.
pub fn band_conformance_suite(cfg: &BandsConfig) -> Result<ExperimentReport> {
    cfg.spec.validate()?;
    cfg.seeds.validate()?;
    if !cfg.spec.is_unconditional() {
        return Err(Error::validation(format!("{} is not unconditional", cfg.spec.label())));
    }
    let d = cfg.spec.dim;
    DESK.check_dim(d)?;
    DESK.check_n(cfg.n)?;
    for &p in &cfg.p_grid {
        DESK.check_p(p)?;
    }
    let grid: Vec<(String, Vec<f64>)> = match &cfg.t_grid {
        Some(ts) => {
            for t in ts {
                if t.len() != d {
                    return Err(Error::validation(format!("direction has dim {}, family dim {d}", t.len())));
                }
            }
            ts.iter().enumerate().map(|(i, t)| (format!("t{i}"), t.clone())).collect()
        }
        None => default_t_grid(d),
    };
    let est = cfg.seeds.estimator(cfg.bootstrap_resamples);
    let batch = sample_batch(&cfg.spec, cfg.n, cfg.seeds.eval())?;
    let (sigma, pooled) = match cfg.spec.coordinate_variance() {
        Some(v) => (v.sqrt(), false),
        None => {
            let (_, var) = batch.column_moments();
            ((var.iter().sum::<f64>() / d as f64).sqrt(), true)
        }
    };
    let mut report = ExperimentReport::new("band_conformance", cfg);
    report.metric("coordinate_sd", sigma);
    if pooled {
        report.note("coordinate scale estimated by the pooled sample variance");
    }
    let mut table = Table::new(&[
        "family",
        "t",
        "p",
        "raw",
        "iso",
        "stderr_raw",
        "closed_form",
        "band_lower",
        "band_upper",
        "lower_ratio",
        "upper_ratio",
        "in_band",
        "trunc_ratio",
        "trunc_stderr",
        "trunc_ok",
    ]);
    let (mut worst_lower, mut worst_upper, mut worst_trunc) = (f64::INFINITY, 0.0f64, f64::INFINITY);
    let (mut all_band, mut all_trunc) = (true, true);
    let label = cfg.spec.label();
    for (name, t) in &grid {
        let vals = per_row(&batch, |x| dot(t, x));
        let profile = lp_profile(&vals, &cfg.p_grid, &est)?;
        for (j, &p) in cfg.p_grid.iter().enumerate() {
            let e = profile.estimates[j];
            let iso = e.value / sigma;
            let band = bobkov_nazarov_band(t, p);
            let lower_ratio = iso / band.lower;
            let upper_ratio = iso / band.upper;
            let in_band = iso >= band.lower / cfg.factor && iso <= band.upper * cfg.factor;
            worst_lower = worst_lower.min(lower_ratio);
            worst_upper = worst_upper.max(upper_ratio);
            all_band &= in_band;

            let v = e.value;
            let pw = powf_fn(p);
            let trunc: Vec<f64> = vals.iter().map(|y| pw((y.abs() / v).min(1.0))).collect();
            let m = mean_profile(&trunc, 1, &est.bootstrap)?.estimates[0];
            let factor = 12f64.powf(p);
            let (tr, tr_se) = (m.value * factor, m.stderr * factor);
            let ok = tr + cfg.truncation_slack * tr_se >= 1.0;
            worst_trunc = worst_trunc.min(tr);
            all_trunc &= ok;
            table.push(vec![
                Cell::from(label.clone()),
                name.clone().into(),
                p.into(),
                e.value.into(),
                iso.into(),
                e.stderr.into(),
                closed_form(&cfg.spec, t, p).map_or(Cell::Text(String::new()), Cell::Num),
                band.lower.into(),
                band.upper.into(),
                lower_ratio.into(),
                upper_ratio.into(),
                in_band.into(),
                tr.into(),
                tr_se.into(),
                ok.into(),
            ]);
        }
    }
    report.metric("worst_lower_ratio", worst_lower);
    report.metric("worst_upper_ratio", worst_upper);
    report.metric("worst_truncation_ratio", worst_trunc);
    report.metric("cells", table.rows.len() as f64);
    report.table = Some(table);
    report.check("band_conformance", all_band);
    report.check("truncated_moment", all_trunc);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    pub families: Vec<FamilySpec>,
    /// Unit directions per family; a default grid when absent.
    #[serde(default)]
    pub t_grid: Option<Vec<Vec<f64>>>,
    #[serde(default = "growth_pgrid")]
    pub p_grid: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seeds: RunSeeds,
    #[serde(default = "five")]
    pub slack: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn growth_pgrid() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0]
}
fn five() -> f64 {
    5.0
}

/// `‖⟨t,X⟩‖_p / ‖⟨t,X⟩‖_q ≤ Γ(p+1)^{1/p} / Γ(q+1)^{1/q} · (1 + slack·se)` for
/// every family, unit direction and `q < p` in the grid, where `se` is the
/// relative bootstrap standard error of the ratio.
pub fn moment_growth_suite(cfg: &GrowthConfig) -> Result<ExperimentReport> {
    cfg.seeds.validate()?;
    DESK.check_n(cfg.n)?;
    for &p in &cfg.p_grid {
        DESK.check_p(p)?;
    }
    let est = cfg.seeds.estimator(cfg.bootstrap_resamples);
    let mut report = ExperimentReport::new("moment_growth", cfg);
    let mut table = Table::new(&["family", "t", "p", "q", "ratio", "ratio_stderr", "bound", "ok"]);
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    for (fi, spec) in cfg.families.iter().enumerate() {
        spec.validate()?;
        DESK.check_dim(spec.dim)?;
        let grid: Vec<(String, Vec<f64>)> = match &cfg.t_grid {
            Some(ts) => ts
                .iter()
                .filter(|t| t.len() == spec.dim)
                .enumerate()
                .map(|(i, t)| {
                    let n = euclidean(t);
                    (format!("t{i}"), t.iter().map(|x| x / n).collect())
                })
                .collect(),
            None => {
                let mut g = default_t_grid(spec.dim);
                g.retain(|(name, _)| name != "e1-e2");
                let mut rng = cfg.seeds.eval().derive(fi as u64).rng();
                let r: Vec<f64> = (0..spec.dim).map(|_| rand::Rng::sample(&mut rng, rand_distr::StandardNormal)).collect();
                let n = euclidean(&r);
                g.push(("random".into(), r.iter().map(|x| x / n).collect()));
                g
            }
        };
        let batch = sample_batch(spec, cfg.n, cfg.seeds.eval().derive(1000 + fi as u64))?;
        for (name, t) in &grid {
            let profile = empirical_lp_profile(&batch, t, &cfg.p_grid, &est)?;
            for (i, &p) in cfg.p_grid.iter().enumerate() {
                for (j, &q) in cfg.p_grid.iter().enumerate() {
                    if q >= p {
                        continue;
                    }
                    let r = profile.ratio(i, j);
                    let bound = moment_growth_bound(p, q);
                    let rel = if r.value > 0.0 { r.stderr / r.value } else { 0.0 };
                    let ok = r.value <= bound * (1.0 + cfg.slack * rel);
                    worst = worst.max(r.value / bound);
                    violations += usize::from(!ok);
                    table.push(vec![
                        Cell::from(spec.label()),
                        name.clone().into(),
                        p.into(),
                        q.into(),
                        r.value.into(),
                        r.stderr.into(),
                        bound.into(),
                        ok.into(),
                    ]);
                }
            }
        }
    }
    report.metric("cells", table.rows.len() as f64);
    report.metric("violations", violations as f64);
    report.metric("worst_ratio_over_bound", worst);
    report.table = Some(table);
    report.check("no_violations", violations == 0);
    Ok(report)
}
