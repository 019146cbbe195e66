//! Monte Carlo estimators over a [`SampleBatch`].
//!
//! All estimators are plug-in; their standard errors come from a seeded
//! nonparametric bootstrap (200 resamples by default). Parallel work is split
//! into fixed row chunks and reduced in a fixed order, so every number is
//! independent of the thread count.

use std::collections::HashSet;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::SampleBatch;
use crate::error::{Error, Result};
use crate::rng::{index_below, Seed};

const ROW_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: Seed,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { resamples: 200, seed: Seed::new(0x0b00_7575, 0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Largest moment order accepted; the plug-in estimator's relative
    /// variance grows quickly with p.
    pub p_max: f64,
    pub bootstrap: BootstrapConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { p_max: 32.0, bootstrap: BootstrapConfig::default() }
    }
}

impl EstimatorConfig {
    fn check_p(&self, p: f64) -> Result<()> {
        if !(p >= 1.0) {
            return Err(Error::validation(format!("moment order must be >= 1, got {p}")));
        }
        if p > self.p_max {
            return Err(Error::DeskCap {
                what: format!(
                    "moment order p = {p} (plug-in L_p estimates are dominated by rare extreme draws above p_max)"
                ),
                required: p,
                cap: self.p_max,
            });
        }
        Ok(())
    }
}

/// A Monte Carlo value with its bootstrap standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<f64>,
}

impl MomentEstimate {
    pub fn relative_stderr(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.stderr / self.value.abs()
        }
    }
}

/// A finite set `T ⊂ R^d` of distinct labelled points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIndexSet")]
pub struct IndexSet {
    points: Vec<Vec<f64>>,
    labels: Vec<String>,
    dim: usize,
}

#[derive(Deserialize)]
struct RawIndexSet {
    points: Vec<Vec<f64>>,
    #[serde(default)]
    labels: Vec<String>,
    dim: Option<usize>,
}

impl TryFrom<RawIndexSet> for IndexSet {
    type Error = Error;

    fn try_from(raw: RawIndexSet) -> Result<Self> {
        let set = if raw.labels.is_empty() {
            IndexSet::from_points(raw.points)?
        } else {
            IndexSet::new(raw.points, raw.labels)?
        };
        if let Some(d) = raw.dim {
            if d != set.dim {
                return Err(Error::validation(format!("declared dim {d} but points have dim {}", set.dim)));
            }
        }
        Ok(set)
    }
}

fn point_key(p: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 compare equal, so they must hash equal.
    p.iter().map(|&x| if x == 0.0 { 0 } else { x.to_bits() }).collect()
}

impl IndexSet {
    /// Rejects empty sets, ragged or non-finite points, and duplicates.
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::validation("index set is empty"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::validation("points must have dimension >= 1"));
        }
        if labels.len() != points.len() {
            return Err(Error::validation(format!(
                "{} labels for {} points",
                labels.len(),
                points.len()
            )));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::validation(format!("point {i} has dim {}, expected {dim}", p.len())));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(format!("point {i} has a non-finite coordinate")));
            }
            if !seen.insert(point_key(p)) {
                return Err(Error::validation(format!("duplicate point at index {i} ({})", labels[i])));
            }
        }
        Ok(IndexSet { points, labels, dim })
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..points.len()).map(|i| format!("t{i}")).collect();
        IndexSet::new(points, labels)
    }

    /// Keeps the first occurrence of every point.
    pub fn dedup_from(points: Vec<Vec<f64>>) -> Result<Self> {
        let mut seen = HashSet::new();
        let kept: Vec<Vec<f64>> = points.into_iter().filter(|p| seen.insert(point_key(p))).collect();
        IndexSet::from_points(kept)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> IndexSet {
        IndexSet {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            dim: self.dim,
        }
    }

    /// `{λ t : t ∈ T}` with the same labels.
    pub fn scaled(&self, lambda: f64) -> Result<IndexSet> {
        IndexSet::new(
            self.points.iter().map(|p| p.iter().map(|x| lambda * x).collect()).collect(),
            self.labels.clone(),
        )
    }

    /// Appends a point (which must be new).
    pub fn with_point(&self, point: Vec<f64>, label: &str) -> Result<IndexSet> {
        let mut points = self.points.clone();
        let mut labels = self.labels.clone();
        points.push(point);
        labels.push(label.to_string());
        IndexSet::new(points, labels)
    }

    pub fn max_euclidean_norm(&self) -> f64 {
        self.points.iter().map(|p| euclidean(p)).fold(0.0, f64::max)
    }

    /// `β(T)`: largest singular value of the matrix with rows `T`.
    pub fn beta(&self) -> f64 {
        beta_functional(&self.points)
    }
}

pub(crate) fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A norm on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "norm", rename_all = "snake_case")]
pub enum NormSpec {
    /// `max_i |a_i x_i|`.
    WeightedLinf { weights: Vec<f64> },
    L2,
    /// `ℓ_r`, `r ≥ 1`.
    Lp { r: f64 },
}

impl NormSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            NormSpec::WeightedLinf { weights } => {
                if weights.len() != dim {
                    return Err(Error::validation(format!("{} weights for dim {dim}", weights.len())));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::validation("weights must be finite"));
                }
                Ok(())
            }
            NormSpec::L2 => Ok(()),
            NormSpec::Lp { r } => {
                if r.is_finite() && *r >= 1.0 {
                    Ok(())
                } else {
                    Err(Error::validation(format!("lp norm exponent must be finite and >= 1, got {r}")))
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            NormSpec::WeightedLinf { weights } => {
                x.iter().zip(weights).fold(0.0, |m, (v, w)| m.max((v * w).abs()))
            }
            NormSpec::L2 => euclidean(x),
            NormSpec::Lp { r } => {
                if *r == 1.0 {
                    x.iter().map(|v| v.abs()).sum()
                } else {
                    x.iter().map(|v| v.abs().powf(*r)).sum::<f64>().powf(1.0 / r)
                }
            }
        }
    }

    /// The dual norm `‖t‖_* = sup_{‖x‖ ≤ 1} ⟨t, x⟩`.
    pub fn dual(&self, t: &[f64]) -> f64 {
        match self {
            NormSpec::WeightedLinf { weights } => t
                .iter()
                .zip(weights)
                .map(|(v, w)| if *v == 0.0 { 0.0 } else { v.abs() / w.abs() })
                .sum(),
            NormSpec::L2 => euclidean(t),
            NormSpec::Lp { r } => {
                if *r == 1.0 {
                    t.iter().fold(0.0, |m, v| m.max(v.abs()))
                } else {
                    NormSpec::Lp { r: *r / (*r - 1.0) }.eval(t)
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            NormSpec::WeightedLinf { .. } => "weighted_linf".into(),
            NormSpec::L2 => "l2".into(),
            NormSpec::Lp { r } => format!("l{r}"),
        }
    }
}

fn power_fn(p: f64) -> impl Fn(f64) -> f64 + Sync + Send {
    let int = p == p.trunc() && p <= 64.0;
    let k = p as i32;
    move |x: f64| if int { x.powi(k) } else { x.powf(p) }
}

/// Plain `(mean |v|^p)^{1/p}` with scale-normalised accumulation.
pub fn lp_norm_of(values: &[f64], p: f64) -> f64 {
    let m = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || values.is_empty() {
        return 0.0;
    }
    let pw = power_fn(p);
    let s: f64 = values.iter().map(|v| pw(v.abs() / m)).sum();
    m * (s / values.len() as f64).powf(1.0 / p)
}

fn stderr_of(replicates: &[f64]) -> f64 {
    let b = replicates.len();
    if b < 2 {
        return 0.0;
    }
    let mean = replicates.iter().sum::<f64>() / b as f64;
    let ss: f64 = replicates.iter().map(|r| (r - mean) * (r - mean)).sum();
    (ss / (b - 1) as f64).sqrt()
}

/// Bootstrap replicates of a `k`-valued statistic. `stat` receives the
/// resampled row indices.
pub(crate) fn bootstrap<F>(n: usize, cfg: &BootstrapConfig, stat: F) -> Vec<Vec<f64>>
where
    F: Fn(&[u32]) -> Vec<f64> + Sync,
{
    (0..cfg.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = cfg.seed.rng_at(b as u64);
            let idx: Vec<u32> = (0..n).map(|_| index_below(&mut rng, n) as u32).collect();
            stat(&idx)
        })
        .collect()
}

/// Moments of several orders estimated jointly on the same draws, with
/// joint bootstrap replicates so that ratios get honest standard errors.
#[derive(Clone, Debug)]
pub struct LpProfile {
    pub ps: Vec<f64>,
    pub estimates: Vec<MomentEstimate>,
    replicates: Vec<Vec<f64>>,
}

impl LpProfile {
    pub fn get(&self, p: f64) -> Option<&MomentEstimate> {
        self.ps.iter().position(|&q| q == p).map(|i| &self.estimates[i])
    }

    /// `‖Y‖_{p_i} / ‖Y‖_{p_j}` with a bootstrap standard error.
    pub fn ratio(&self, i: usize, j: usize) -> MomentEstimate {
        let value = self.estimates[i].value / self.estimates[j].value;
        let reps: Vec<f64> = self.replicates.iter().map(|r| r[i] / r[j]).collect();
        MomentEstimate { value, stderr: stderr_of(&reps), n: self.estimates[i].n, p: None }
    }
}

/// `‖Y‖_p` for each `p` in `ps`, where `values` are i.i.d. draws of `Y`.
pub fn lp_profile(values: &[f64], ps: &[f64], cfg: &EstimatorConfig) -> Result<LpProfile> {
    for &p in ps {
        cfg.check_p(p)?;
    }
    let n = values.len();
    if n == 0 {
        return Err(Error::validation("no draws"));
    }
    let k = ps.len();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        let zero = MomentEstimate { value: 0.0, stderr: 0.0, n, p: None };
        return Ok(LpProfile {
            ps: ps.to_vec(),
            estimates: ps.iter().map(|&p| MomentEstimate { p: Some(p), ..zero }).collect(),
            replicates: vec![vec![0.0; k]; cfg.bootstrap.resamples],
        });
    }
    let pows: Vec<_> = ps.iter().map(|&p| power_fn(p)).collect();
    // interleaved: powers[i * k + j] = (|v_i| / scale)^{p_j}
    let mut powers = vec![0.0; n * k];
    powers
        .par_chunks_mut(ROW_CHUNK * k)
        .zip(values.par_chunks(ROW_CHUNK))
        .for_each(|(out, vs)| {
            for (o, v) in out.chunks_exact_mut(k).zip(vs) {
                let a = v.abs() / scale;
                for (x, f) in o.iter_mut().zip(&pows) {
                    *x = f(a);
                }
            }
        });
    let finish = |sums: &[f64]| -> Vec<f64> {
        sums.iter()
            .zip(ps)
            .map(|(s, p)| scale * (s / n as f64).powf(1.0 / p))
            .collect()
    };
    let partials: Vec<Vec<f64>> = powers
        .par_chunks(ROW_CHUNK * k)
        .map(|c| {
            let mut acc = vec![0.0; k];
            for row in c.chunks_exact(k) {
                acc.iter_mut().zip(row).for_each(|(a, x)| *a += x);
            }
            acc
        })
        .collect();
    let mut sums = vec![0.0; k];
    for part in &partials {
        sums.iter_mut().zip(part).for_each(|(s, x)| *s += x);
    }
    let point = finish(&sums);
    let replicates = bootstrap(n, &cfg.bootstrap, |idx| {
        let mut acc = vec![0.0; k];
        for &i in idx {
            let row = &powers[i as usize * k..(i as usize + 1) * k];
            acc.iter_mut().zip(row).for_each(|(a, x)| *a += x);
        }
        finish(&acc)
    });
    let estimates = (0..k)
        .map(|j| {
            let reps: Vec<f64> = replicates.iter().map(|r| r[j]).collect();
            MomentEstimate { value: point[j], stderr: stderr_of(&reps), n, p: Some(ps[j]) }
        })
        .collect();
    Ok(LpProfile { ps: ps.to_vec(), estimates, replicates })
}

/// Joint means of several per-draw quantities with bootstrap replicates.
#[derive(Clone, Debug)]
pub struct MeanProfile {
    pub estimates: Vec<MomentEstimate>,
    replicates: Vec<Vec<f64>>,
}

impl MeanProfile {
    /// Bootstrap replicates of an arbitrary smooth function of the means.
    pub fn derived(&self, f: impl Fn(&[f64]) -> f64) -> MomentEstimate {
        let point: Vec<f64> = self.estimates.iter().map(|e| e.value).collect();
        let reps: Vec<f64> = self.replicates.iter().map(|r| f(r)).collect();
        MomentEstimate { value: f(&point), stderr: stderr_of(&reps), n: self.estimates[0].n, p: None }
    }
}

/// Means of the columns of a row-major `n × k` array.
pub fn mean_profile(columns: &[f64], k: usize, cfg: &BootstrapConfig) -> Result<MeanProfile> {
    if k == 0 || columns.is_empty() || columns.len() % k != 0 {
        return Err(Error::validation("mean_profile needs a nonempty n × k array"));
    }
    let n = columns.len() / k;
    let mean_of = |idx: Option<&[u32]>| -> Vec<f64> {
        let mut acc = vec![0.0; k];
        match idx {
            None => {
                for row in columns.chunks_exact(k) {
                    acc.iter_mut().zip(row).for_each(|(a, x)| *a += x);
                }
            }
            Some(idx) => {
                for &i in idx {
                    let row = &columns[i as usize * k..(i as usize + 1) * k];
                    acc.iter_mut().zip(row).for_each(|(a, x)| *a += x);
                }
            }
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
        acc
    };
    let point = mean_of(None);
    let replicates = bootstrap(n, cfg, |idx| mean_of(Some(idx)));
    let estimates = (0..k)
        .map(|j| {
            let reps: Vec<f64> = replicates.iter().map(|r| r[j]).collect();
            MomentEstimate { value: point[j], stderr: stderr_of(&reps), n, p: None }
        })
        .collect();
    Ok(MeanProfile { estimates, replicates })
}

/// Mean of i.i.d. draws with a bootstrap standard error.
pub fn mean_estimate(values: &[f64], cfg: &BootstrapConfig) -> Result<MomentEstimate> {
    Ok(mean_profile(values, 1, cfg)?.estimates[0])
}

/// Evaluates `f(row)` for every row, in parallel and in row order.
pub fn per_row<F>(batch: &SampleBatch, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = batch.dim();
    let mut out = vec![0.0; batch.n];
    out.par_chunks_mut(ROW_CHUNK)
        .zip(batch.data.par_chunks(ROW_CHUNK * d))
        .for_each(|(o, rows)| {
            for (v, row) in o.iter_mut().zip(rows.chunks_exact(d)) {
                *v = f(row);
            }
        });
    out
}

/// Row-major `n × |T|` matrix of `⟨t, X_i⟩`.
#[derive(Clone, Debug)]
pub struct Projections {
    pub n: usize,
    pub m: usize,
    /// Column-major: functional `j` occupies `values[j*n .. (j+1)*n]`.
    values: Vec<f64>,
}

impl Projections {
    pub fn new(batch: &SampleBatch, set: &IndexSet) -> Result<Self> {
        check_dims(batch, set)?;
        let (n, m, d) = (batch.n, set.len(), batch.dim());
        let mut values = vec![0.0; n * m];
        values.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
            let t = set.point(j);
            for (v, row) in col.iter_mut().zip(batch.data.chunks_exact(d)) {
                *v = dot(t, row);
            }
        });
        Ok(Projections { n, m, values })
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    /// `(mean |⟨t_i − t_j, X⟩|^p)^{1/p}` on the stored draws.
    pub fn lp_distance(&self, i: usize, j: usize, p: f64) -> f64 {
        let (a, b) = (self.column(i), self.column(j));
        let m = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        if m == 0.0 {
            return 0.0;
        }
        let pw = power_fn(p);
        let s: f64 = a.iter().zip(b).map(|(x, y)| pw((x - y).abs() / m)).sum();
        m * (s / self.n as f64).powf(1.0 / p)
    }

    /// Point estimate and delta-method standard error of the distance.
    pub fn lp_distance_with_stderr(&self, i: usize, j: usize, p: f64) -> (f64, f64) {
        let (a, b) = (self.column(i), self.column(j));
        let m = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        if m == 0.0 {
            return (0.0, 0.0);
        }
        let pw = power_fn(p);
        let n = self.n as f64;
        let (mut s, mut s2) = (0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            let v = pw((x - y).abs() / m);
            s += v;
            s2 += v * v;
        }
        let mean = s / n;
        let var = ((s2 / n - mean * mean) * n / (n - 1.0).max(1.0)).max(0.0);
        let value = m * mean.powf(1.0 / p);
        // d = (mean)^{1/p}: dd/dmean = d / (p mean)
        let se = value * (var / n).sqrt() / (p * mean);
        (value, se)
    }

    /// `‖⟨t_i, X⟩‖_p` on the stored draws.
    pub fn lp_norm(&self, i: usize, p: f64) -> f64 {
        lp_norm_of(self.column(i), p)
    }
}

fn check_dims(batch: &SampleBatch, set: &IndexSet) -> Result<()> {
    if batch.dim() != set.dim() {
        return Err(Error::validation(format!(
            "index set dim {} differs from batch dim {}",
            set.dim(),
            batch.dim()
        )));
    }
    Ok(())
}

/// `‖⟨t, X⟩‖_p` with a bootstrap standard error.
pub fn empirical_lp(batch: &SampleBatch, t: &[f64], p: f64, cfg: &EstimatorConfig) -> Result<MomentEstimate> {
    if t.len() != batch.dim() {
        return Err(Error::validation(format!("t has dim {}, batch has {}", t.len(), batch.dim())));
    }
    cfg.check_p(p)?;
    let vals = per_row(batch, |x| dot(t, x));
    Ok(lp_profile(&vals, &[p], cfg)?.estimates[0])
}

/// Joint `‖⟨t, X⟩‖_p` over a grid of orders.
pub fn empirical_lp_profile(batch: &SampleBatch, t: &[f64], ps: &[f64], cfg: &EstimatorConfig) -> Result<LpProfile> {
    if t.len() != batch.dim() {
        return Err(Error::validation(format!("t has dim {}, batch has {}", t.len(), batch.dim())));
    }
    let vals = per_row(batch, |x| dot(t, x));
    lp_profile(&vals, ps, cfg)
}

/// Per-draw `max_t ⟨t,x⟩ − min_s ⟨s,x⟩`.
pub fn sup_diff_values(batch: &SampleBatch, set: &IndexSet) -> Result<Vec<f64>> {
    check_dims(batch, set)?;
    if set.len() < 2 {
        return Err(Error::validation("supremum of differences needs at least two distinct points"));
    }
    Ok(per_row(batch, |x| {
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in set.points() {
            let v = dot(t, x);
            hi = hi.max(v);
            lo = lo.min(v);
        }
        hi - lo
    }))
}

/// Per-draw `max_t |⟨t,x⟩|`.
pub fn sup_abs_values(batch: &SampleBatch, set: &IndexSet) -> Result<Vec<f64>> {
    check_dims(batch, set)?;
    Ok(per_row(batch, |x| set.points().iter().fold(0.0, |m, t| m.max(dot(t, x).abs()))))
}

/// `E sup_{t,s ∈ T} ⟨t − s, X⟩`.
pub fn empirical_sup_diff(batch: &SampleBatch, set: &IndexSet, cfg: &EstimatorConfig) -> Result<MomentEstimate> {
    mean_estimate(&sup_diff_values(batch, set)?, &cfg.bootstrap)
}

/// `E max_{t ∈ T} |⟨t, X⟩|`.
pub fn empirical_sup_abs(batch: &SampleBatch, set: &IndexSet, cfg: &EstimatorConfig) -> Result<MomentEstimate> {
    mean_estimate(&sup_abs_values(batch, set)?, &cfg.bootstrap)
}

/// `(E ‖X‖^p)^{1/p}`.
pub fn empirical_norm_moment(batch: &SampleBatch, norm: &NormSpec, p: f64, cfg: &EstimatorConfig) -> Result<MomentEstimate> {
    norm.validate(batch.dim())?;
    cfg.check_p(p)?;
    let vals = per_row(batch, |x| norm.eval(x));
    Ok(lp_profile(&vals, &[p], cfg)?.estimates[0])
}

fn median_of(values: &mut [f64]) -> f64 {
    let n = values.len();
    let (lo, &mut hi_mid, _) = values.select_nth_unstable_by(n / 2, |a, b| a.total_cmp(b));
    if n % 2 == 1 {
        hi_mid
    } else {
        let lo_mid = lo.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        0.5 * (lo_mid + hi_mid)
    }
}

/// Sample median of `‖X‖` with a bootstrap standard error.
pub fn empirical_median(batch: &SampleBatch, norm: &NormSpec, cfg: &EstimatorConfig) -> Result<MomentEstimate> {
    norm.validate(batch.dim())?;
    if batch.n < 100 {
        return Err(Error::validation(format!("median needs n >= 100, got {}", batch.n)));
    }
    let vals = per_row(batch, |x| norm.eval(x));
    median_estimate(&vals, &cfg.bootstrap)
}

pub fn median_estimate(values: &[f64], cfg: &BootstrapConfig) -> Result<MomentEstimate> {
    if values.is_empty() {
        return Err(Error::validation("no draws"));
    }
    let mut buf = values.to_vec();
    let value = median_of(&mut buf);
    let reps: Vec<f64> = bootstrap(values.len(), cfg, |idx| {
        let mut v: Vec<f64> = idx.iter().map(|&i| values[i as usize]).collect();
        vec![median_of(&mut v)]
    })
    .into_iter()
    .map(|r| r[0])
    .collect();
    Ok(MomentEstimate { value, stderr: stderr_of(&reps), n: values.len(), p: None })
}

/// `sup_{|x|=1} (Σ_t ⟨t,x⟩²)^{1/2}`: the spectral norm of the matrix whose
/// rows are `points`. Repeated rows count with multiplicity.
pub fn beta_functional(points: &[Vec<f64>]) -> f64 {
    let m = points.len();
    if m == 0 {
        return 0.0;
    }
    let d = points[0].len();
    let gram = if m <= d {
        DMatrix::from_fn(m, m, |i, j| dot(&points[i], &points[j]))
    } else {
        let mut g = DMatrix::<f64>::zeros(d, d);
        for p in points {
            for i in 0..d {
                for j in 0..=i {
                    g[(i, j)] += p[i] * p[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                g[(j, i)] = g[(i, j)];
            }
        }
        g
    };
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.max().max(0.0).sqrt()
}
