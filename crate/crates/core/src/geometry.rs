//! Finite metric geometry over index sets: pluggable `d_{X,p}` metrics,
//! greedy packings and coverings, the orthogonal decomposition of a large
//! set in a Euclidean ball, and constructions of separated sets.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{analytic_linear_moment, has_exact_linear_moments};
use crate::distributions::{sample_batch, FamilySpec};
use crate::empirical::{dot, euclidean, IndexSet, Projections};
use crate::error::{Error, Result};
use crate::rng::Seed;

const DENSE_LIMIT: usize = 2048;

/// One-sided 99% normal quantile.
pub const Z_99: f64 = 2.326_347_874_040_841;

#[derive(Clone, Debug)]
pub enum MetricBacking {
    /// `‖⟨s − t, X⟩‖_p` from closed forms (or formula cores).
    Analytic { spec: FamilySpec, p: f64 },
    /// `‖⟨s − t, X⟩‖_p` on a stored batch.
    Empirical { projections: Arc<Projections>, p: f64 },
    Euclidean,
    /// Explicit symmetric distance matrix, row-major.
    Custom { matrix: Arc<Vec<f64>> },
}

/// A metric on the points of one index set, addressed by point index.
/// Distances are memoised; the cache is shared between readers.
#[derive(Debug)]
pub struct MetricOracle {
    points: Arc<Vec<Vec<f64>>>,
    backing: MetricBacking,
    dense: OnceLock<Vec<f64>>,
    cache: RwLock<HashMap<(u32, u32), f64>>,
}

impl Clone for MetricOracle {
    fn clone(&self) -> Self {
        MetricOracle {
            points: self.points.clone(),
            backing: self.backing.clone(),
            dense: self.dense.clone(),
            cache: RwLock::new(self.cache.read().unwrap().clone()),
        }
    }
}

impl MetricOracle {
    fn with_backing(set: &IndexSet, backing: MetricBacking) -> Self {
        MetricOracle {
            points: Arc::new(set.points().to_vec()),
            backing,
            dense: OnceLock::new(),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn euclidean(set: &IndexSet) -> Self {
        Self::with_backing(set, MetricBacking::Euclidean)
    }

    /// Fails with a capability error when the family has no formula.
    pub fn analytic(set: &IndexSet, spec: &FamilySpec, p: f64) -> Result<Self> {
        if set.dim() != spec.dim {
            return Err(Error::validation(format!("set dim {} differs from family dim {}", set.dim(), spec.dim)));
        }
        analytic_linear_moment(spec, set.point(0), p)?;
        Ok(Self::with_backing(set, MetricBacking::Analytic { spec: spec.clone(), p }))
    }

    pub fn empirical(set: &IndexSet, batch: &crate::distributions::SampleBatch, p: f64) -> Result<Self> {
        let projections = Arc::new(Projections::new(batch, set)?);
        Ok(Self::from_projections(set, projections, p))
    }

    pub fn from_projections(set: &IndexSet, projections: Arc<Projections>, p: f64) -> Self {
        assert_eq!(projections.m, set.len(), "projections were computed for a different set");
        Self::with_backing(set, MetricBacking::Empirical { projections, p })
    }

    /// Checks symmetry, a zero diagonal and nonnegativity.
    pub fn custom(set: &IndexSet, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let m = set.len();
        if matrix.len() != m || matrix.iter().any(|r| r.len() != m) {
            return Err(Error::validation(format!("distance matrix must be {m} x {m}")));
        }
        for i in 0..m {
            if matrix[i][i] != 0.0 {
                return Err(Error::validation(format!("distance matrix has nonzero diagonal at {i}")));
            }
            for j in 0..m {
                let v = matrix[i][j];
                if !(v >= 0.0 && v.is_finite()) || v != matrix[j][i] {
                    return Err(Error::validation(format!("distance matrix entry ({i}, {j}) is not a symmetric finite nonnegative value")));
                }
            }
        }
        let flat = matrix.into_iter().flatten().collect();
        Ok(Self::with_backing(set, MetricBacking::Custom { matrix: Arc::new(flat) }))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn backing(&self) -> &MetricBacking {
        &self.backing
    }

    fn compute(&self, i: usize, j: usize) -> f64 {
        let (s, t) = (&self.points[i], &self.points[j]);
        match &self.backing {
            MetricBacking::Analytic { spec, p } => {
                let diff: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
                analytic_linear_moment(spec, &diff, *p).map(|v| v.value).unwrap_or(f64::NAN)
            }
            MetricBacking::Empirical { projections, p } => projections.lp_distance(i, j, *p),
            MetricBacking::Euclidean => s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            MetricBacking::Custom { matrix } => matrix[i * self.len() + j],
        }
    }

    fn dense(&self) -> &[f64] {
        self.dense.get_or_init(|| {
            let m = self.len();
            let mut out = vec![0.0; m * m];
            out.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate().take(i) {
                    *v = self.compute(j, i);
                }
            });
            for i in 0..m {
                for j in i + 1..m {
                    out[i * m + j] = out[j * m + i];
                }
            }
            out
        })
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let m = self.len();
        if m <= DENSE_LIMIT {
            return self.dense()[i * m + j];
        }
        let key = (i.min(j) as u32, i.max(j) as u32);
        if let Some(&v) = self.cache.read().unwrap().get(&key) {
            return v;
        }
        let v = self.compute(key.0 as usize, key.1 as usize);
        self.cache.write().unwrap().insert(key, v);
        v
    }

    /// Distance and its delta-method standard error (zero for exact backings).
    pub fn distance_with_stderr(&self, i: usize, j: usize) -> (f64, f64) {
        match &self.backing {
            MetricBacking::Empirical { projections, p } if i != j => projections.lp_distance_with_stderr(i, j, *p),
            _ => (self.distance(i, j), 0.0),
        }
    }

    /// `‖⟨t_i, X⟩‖_p` (or `|t_i|` for the euclidean backing); `None` for a
    /// custom matrix.
    pub fn norm_of(&self, i: usize) -> Option<f64> {
        let t = &self.points[i];
        match &self.backing {
            MetricBacking::Analytic { spec, p } => analytic_linear_moment(spec, t, *p).ok().map(|v| v.value),
            MetricBacking::Empirical { projections, p } => Some(projections.lp_norm(i, *p)),
            MetricBacking::Euclidean => Some(euclidean(t)),
            MetricBacking::Custom { .. } => None,
        }
    }

    /// Sorted distinct positive pairwise distances.
    pub fn distinct_distances(&self) -> Vec<f64> {
        let m = self.len();
        let mut v: Vec<f64> = (0..m).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| self.distance(i, j)).collect();
        v.retain(|x| *x > 0.0);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn diameter(&self) -> f64 {
        let m = self.len();
        (0..m).flat_map(|i| (0..i).map(move |j| (i, j))).fold(0.0, |acc, (i, j)| acc.max(self.distance(i, j)))
    }
}

/// Greedy maximal `A`-separated subset, scanned in index order. Returns the
/// indices of the kept points; every dropped point lies within `A` of one.
pub fn greedy_packing(metric: &MetricOracle, a: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..metric.len() {
        if kept.iter().all(|&k| metric.distance(i, k) > a) {
            kept.push(i);
        }
    }
    kept
}

/// Whether all pairwise distances within `indices` exceed `a`.
pub fn is_separated(metric: &MetricOracle, indices: &[usize], a: f64) -> bool {
    indices.iter().enumerate().all(|(x, &i)| indices[..x].iter().all(|&j| metric.distance(i, j) > a))
}

/// Whether every point lies within `a` (closed) of some center.
pub fn is_covering(metric: &MetricOracle, centers: &[usize], a: f64) -> bool {
    (0..metric.len()).all(|i| centers.iter().any(|&c| metric.distance(i, c) <= a))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveringBounds {
    pub lower: usize,
    pub upper: usize,
    /// Centers of the certified cover realising `upper`.
    pub centers: Vec<usize>,
}

/// Bounds on the covering number `N(T, d, ε)` by closed `ε`-balls centred at
/// points of `T`. The upper bound is a greedy set cover; the lower bound is
/// the size of a greedy `2ε`-separated subset, no two of whose points fit in
/// one ball.
pub fn covering_bounds(metric: &MetricOracle, eps: f64) -> CoveringBounds {
    let m = metric.len();
    let mut covered = vec![false; m];
    let mut remaining = m;
    let mut centers = Vec::new();
    while remaining > 0 {
        let mut best = (0usize, 0usize);
        for c in 0..m {
            let gain = (0..m).filter(|&i| !covered[i] && metric.distance(i, c) <= eps).count();
            if gain > best.1 {
                best = (c, gain);
            }
        }
        let c = best.0;
        centers.push(c);
        for i in 0..m {
            if !covered[i] && metric.distance(i, c) <= eps {
                covered[i] = true;
                remaining -= 1;
            }
        }
    }
    let lower = greedy_packing(metric, 2.0 * eps).len();
    CoveringBounds { lower, upper: centers.len(), centers }
}

/// Pairs `(t_k, s_k)` with `t_k − s_k = u_k + v_k`, the `u_k` mutually
/// orthogonal and `|v_k| ≤ εr`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Point indices `(t_k, s_k)`.
    pub pairs: Vec<(usize, usize)>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub r: f64,
    pub eps: f64,
    pub n_requested: usize,
    pub n_achieved: usize,
    /// False when the cardinality precondition was overridden.
    pub guaranteed: bool,
}

impl Decomposition {
    pub fn is_complete(&self) -> bool {
        self.n_achieved == self.n_requested
    }

    pub fn check_invariants(&self, set: &IndexSet) -> Result<()> {
        let fail = |m: String| Err(Error::Precondition(m));
        for (k, &(ti, si)) in self.pairs.iter().enumerate() {
            if ti == si || set.point(ti) == set.point(si) {
                return fail(format!("pair {k} is degenerate"));
            }
            let (t, s) = (set.point(ti), set.point(si));
            let scale = euclidean(t).max(euclidean(s)).max(f64::MIN_POSITIVE);
            for c in 0..set.dim() {
                let diff = t[c] - s[c];
                if (diff - (self.u[k][c] + self.v[k][c])).abs() > 1e-12 * scale {
                    return fail(format!("pair {k}: t - s != u + v in coordinate {c}"));
                }
            }
            if euclidean(&self.v[k]) > self.eps * self.r * (1.0 + 1e-12) {
                return fail(format!("pair {k}: |v| = {} exceeds eps*r = {}", euclidean(&self.v[k]), self.eps * self.r));
            }
            for j in 0..k {
                let bound = 1e-9 * euclidean(&self.u[j]) * euclidean(&self.u[k]);
                if dot(&self.u[j], &self.u[k]).abs() > bound {
                    return fail(format!("u_{j} and u_{k} are not orthogonal"));
                }
            }
        }
        Ok(())
    }

    /// `max |QᵀQ − I|` for the normalised nonzero `u_k`.
    pub fn orthonormality_defect(&self) -> f64 {
        let q: Vec<Vec<f64>> = self
            .u
            .iter()
            .filter(|u| euclidean(u) > 0.0)
            .map(|u| {
                let n = euclidean(u);
                u.iter().map(|x| x / n).collect()
            })
            .collect();
        let mut worst = 0.0f64;
        for i in 0..q.len() {
            for j in 0..q.len() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&q[i], &q[j]) - target).abs());
            }
        }
        worst
    }
}

/// `P_E w` for an orthonormal basis of `E`, by modified Gram–Schmidt applied
/// twice.
fn project(basis: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut rest = w.to_vec();
    let mut proj = vec![0.0; w.len()];
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &rest);
            for ((r, p), qi) in rest.iter_mut().zip(proj.iter_mut()).zip(q) {
                *r -= c * qi;
                *p += c * qi;
            }
        }
    }
    proj
}

/// Smallest `|T|` for which the decomposition is guaranteed:
/// `(2/ε + 1)^n`, except that one pair only needs two points.
pub fn decomposition_requirement(eps: f64, n: usize) -> f64 {
    if n <= 1 {
        2.0
    } else if eps == 0.0 {
        f64::INFINITY
    } else {
        (2.0 / eps + 1.0).powi(n as i32)
    }
}

/// Builds `n` pairs step by step: each step projects every difference onto
/// the span of the previous `u`'s and, among pairs whose projection has norm
/// at most `εr`, takes the one with the largest orthogonal part.
///
/// With `force` the cardinality precondition is skipped; if the greedy run
/// stalls, runs from other starting pairs (by decreasing `|t − s|`) are tried
/// and the longest is returned.
pub fn orthogonal_decompose(set: &IndexSet, r: f64, eps: f64, n: usize, force: bool) -> Result<Decomposition> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::validation(format!("radius must be positive, got {r}")));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::validation(format!("eps must lie in [0, 1), got {eps}")));
    }
    if n == 0 {
        return Err(Error::validation("n must be positive"));
    }
    if set.len() < 2 {
        return Err(Error::validation("decomposition needs at least two points"));
    }
    for (i, t) in set.points().iter().enumerate() {
        if euclidean(t) > r * (1.0 + 1e-12) {
            return Err(Error::validation(format!("point {i} has norm {} > r = {r}", euclidean(t))));
        }
    }
    let required = decomposition_requirement(eps, n);
    let guaranteed = (set.len() as f64) >= required;
    if !guaranteed && !force {
        return Err(Error::Precondition(format!(
            "orthogonal decomposition with n = {n}, eps = {eps} needs |T| >= (2/eps + 1)^n = {required:.6e}, have {}; pass force for a best-effort run",
            set.len()
        )));
    }

    let m = set.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let diffs: Vec<Vec<f64>> =
        pairs.iter().map(|&(i, j)| set.point(i).iter().zip(set.point(j)).map(|(a, b)| a - b).collect()).collect();
    let limit = eps * r;

    let run = |start: usize| -> Decomposition {
        let mut out = Decomposition {
            pairs: vec![pairs[start]],
            u: vec![diffs[start].clone()],
            v: vec![vec![0.0; set.dim()]],
            r,
            eps,
            n_requested: n,
            n_achieved: 1,
            guaranteed,
        };
        let n0 = euclidean(&diffs[start]);
        let mut basis = vec![diffs[start].iter().map(|x| x / n0).collect::<Vec<f64>>()];
        while out.n_achieved < n {
            let mut best: Option<(usize, f64, Vec<f64>)> = None;
            for (k, w) in diffs.iter().enumerate() {
                let v = project(&basis, w);
                if euclidean(&v) > limit {
                    continue;
                }
                let u_norm = euclidean(&w.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<f64>>());
                if best.as_ref().map_or(true, |b| u_norm > b.1) {
                    best = Some((k, u_norm, v));
                }
            }
            let Some((k, u_norm, v)) = best else { break };
            let u: Vec<f64> = diffs[k].iter().zip(&v).map(|(a, b)| a - b).collect();
            if u_norm > 0.0 {
                // Store the normalised basis vector re-orthogonalised against the rest.
                let mut q: Vec<f64> = u.clone();
                let back = project(&basis, &q);
                q.iter_mut().zip(&back).for_each(|(a, b)| *a -= b);
                let qn = euclidean(&q);
                if qn > 0.0 {
                    basis.push(q.iter().map(|x| x / qn).collect());
                }
            }
            out.pairs.push(pairs[k]);
            out.u.push(u);
            out.v.push(v);
            out.n_achieved += 1;
        }
        out
    };

    // Starting pair: the largest difference, lowest index on ties.
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let norms: Vec<f64> = diffs.iter().map(|d| euclidean(d)).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let first = run(order[0]);
    if first.is_complete() || !force {
        return Ok(first);
    }
    let mut best = first;
    for &start in order.iter().skip(1).take(255) {
        let candidate = run(start);
        if candidate.n_achieved > best.n_achieved {
            best = candidate;
            if best.is_complete() {
                break;
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SetStrategy {
    /// `{a e_i}`.
    ScaledBasis {
        #[serde(default)]
        a: Option<f64>,
    },
    /// `{±a e_i}`.
    SignedBasis {
        #[serde(default)]
        a: Option<f64>,
    },
    /// `m` uniform points on the radius-`a` sphere.
    SphereRandom {
        #[serde(default)]
        m: Option<usize>,
        #[serde(default)]
        a: Option<f64>,
        seed: u64,
    },
    /// `m` distinct random sign vectors times `a`.
    CubeVertices {
        #[serde(default)]
        m: Option<usize>,
        #[serde(default)]
        a: Option<f64>,
        seed: u64,
    },
    Explicit { points: Vec<Vec<f64>> },
}

impl SetStrategy {
    /// The scale, when fixed by the strategy; otherwise the set is scaled so
    /// the certified separation equals the target.
    pub fn scale(&self) -> Option<f64> {
        match self {
            SetStrategy::ScaledBasis { a }
            | SetStrategy::SignedBasis { a }
            | SetStrategy::SphereRandom { a, .. }
            | SetStrategy::CubeVertices { a, .. } => *a,
            SetStrategy::Explicit { .. } => Some(1.0),
        }
    }

    /// The set at scale `a`; `default_m` fills an unspecified size.
    pub fn build(&self, dim: usize, a: f64, default_m: usize) -> Result<IndexSet> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::validation(format!("scale must be positive, got {a}")));
        }
        let basis = |i: usize, v: f64| -> Vec<f64> {
            let mut e = vec![0.0; dim];
            e[i] = v;
            e
        };
        match self {
            SetStrategy::ScaledBasis { .. } => IndexSet::new(
                (0..dim).map(|i| basis(i, a)).collect(),
                (0..dim).map(|i| format!("e{i}")).collect(),
            ),
            SetStrategy::SignedBasis { .. } => {
                let mut pts = Vec::with_capacity(2 * dim);
                let mut labels = Vec::with_capacity(2 * dim);
                for i in 0..dim {
                    pts.push(basis(i, a));
                    labels.push(format!("+e{i}"));
                    pts.push(basis(i, -a));
                    labels.push(format!("-e{i}"));
                }
                IndexSet::new(pts, labels)
            }
            SetStrategy::SphereRandom { m, seed, .. } => {
                let m = m.unwrap_or(default_m);
                if m == 0 {
                    return Err(Error::validation("sphere_random needs m >= 1"));
                }
                let mut rng = Seed::new(*seed, 0).rng();
                let pts = (0..m)
                    .map(|_| loop {
                        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                        let n = euclidean(&g);
                        if n > 0.0 {
                            break g.iter().map(|x| a * x / n).collect();
                        }
                    })
                    .collect();
                IndexSet::from_points(pts)
            }
            SetStrategy::CubeVertices { m, seed, .. } => {
                let m = m.unwrap_or(default_m);
                if dim < 64 && (m as u128) > (1u128 << dim) {
                    return Err(Error::validation(format!("cube_vertices: m = {m} exceeds the 2^{dim} vertices")));
                }
                let mut rng = Seed::new(*seed, 0).rng();
                let mut seen = std::collections::HashSet::new();
                let mut pts = Vec::with_capacity(m);
                while pts.len() < m {
                    let signs: Vec<bool> = (0..dim).map(|_| rng.random::<bool>()).collect();
                    if seen.insert(signs.clone()) {
                        pts.push(signs.iter().map(|&s| if s { a } else { -a }).collect());
                    }
                }
                IndexSet::from_points(pts)
            }
            SetStrategy::Explicit { points } => {
                let set = IndexSet::from_points(points.clone())?;
                if set.dim() != dim {
                    return Err(Error::validation(format!("explicit points have dim {}, family dim is {dim}", set.dim())));
                }
                set.scaled(a)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "certifier", rename_all = "snake_case")]
pub enum Certifier {
    /// Closed-form distances; exact for the gaussian family.
    Analytic,
    /// 99% lower confidence bound on a dedicated calibration batch.
    Empirical { n: usize, seed: Seed },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificationKind {
    Exact,
    /// A two-sided-equivalent formula core, not the distance itself.
    FormulaCore,
    LowerConfidence99,
}

/// A finite set with a certified minimal pairwise `d_{X,p}` distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatedSet {
    pub set: IndexSet,
    pub certified_a: f64,
    pub certification: CertificationKind,
    pub strategy: SetStrategy,
    pub spec: FamilySpec,
    pub p: f64,
    pub scale: f64,
    pub certifier: Certifier,
    /// Pair realising the certified minimum.
    pub closest_pair: (usize, usize),
}

/// Minimal pairwise distance of `set` under the certifier, with the pair.
pub fn certify_separation(set: &IndexSet, spec: &FamilySpec, p: f64, certifier: &Certifier) -> Result<(f64, (usize, usize), CertificationKind)> {
    if set.len() < 2 {
        return Err(Error::validation("separation needs at least two points"));
    }
    let m = set.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let (lb, kind): (Vec<f64>, CertificationKind) = match certifier {
        Certifier::Analytic => {
            let oracle = MetricOracle::analytic(set, spec, p)?;
            let kind = if has_exact_linear_moments(spec) { CertificationKind::Exact } else { CertificationKind::FormulaCore };
            (pairs.par_iter().map(|&(i, j)| oracle.compute(i, j)).collect(), kind)
        }
        Certifier::Empirical { n, seed } => {
            let batch = sample_batch(spec, *n, *seed)?;
            let proj = Projections::new(&batch, set)?;
            let lb = pairs
                .par_iter()
                .map(|&(i, j)| {
                    let (v, se) = proj.lp_distance_with_stderr(i, j, p);
                    (v - Z_99 * se).max(0.0)
                })
                .collect();
            (lb, CertificationKind::LowerConfidence99)
        }
    };
    let (k, &min) = lb
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("at least one pair");
    Ok((min, pairs[k], kind))
}

/// Builds `T` by `strategy` and certifies its separation. With no fixed
/// scale the set is rescaled so that the certified separation is
/// `a_target`. `default_m` fills unspecified random-set sizes.
pub fn build_separated_set(
    strategy: &SetStrategy,
    spec: &FamilySpec,
    p: f64,
    a_target: f64,
    certifier: &Certifier,
    default_m: usize,
) -> Result<SeparatedSet> {
    if !(p >= 1.0) {
        return Err(Error::validation(format!("p must be >= 1, got {p}")));
    }
    if !(a_target > 0.0 && a_target.is_finite()) {
        return Err(Error::validation(format!("A_target must be positive, got {a_target}")));
    }
    let scale = match strategy.scale() {
        Some(a) => a,
        None => {
            let unit = strategy.build(spec.dim, 1.0, default_m)?;
            let (a1, _, _) = certify_separation(&unit, spec, p, certifier)?;
            if !(a1 > 0.0) {
                return Err(Error::Model("unit-scale set has zero certified separation; cannot rescale".into()));
            }
            a_target / a1
        }
    };
    let set = strategy.build(spec.dim, scale, default_m)?;
    let (certified_a, closest_pair, certification) = certify_separation(&set, spec, p, certifier)?;
    Ok(SeparatedSet {
        set,
        certified_a,
        certification,
        strategy: strategy.clone(),
        spec: spec.clone(),
        p,
        scale,
        certifier: *certifier,
        closest_pair,
    })
}
