//! Admissible sequences and chaining bounds for `‖sup_t |⟨t, X⟩|‖_p`.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::distributions::{FamilySpec, SampleBatch};
use crate::empirical::{IndexSet, Projections};
use crate::error::{Error, Result};
use crate::geometry::{covering_bounds, greedy_packing, MetricOracle};

/// `3e³`, the chaining constant.
pub const CHAIN_CONSTANT: f64 = 3.0 * 20.085_536_923_187_668;

/// `⌊e^{2^{k+1}}⌋`, saturating.
pub fn level_cap(k: u32) -> usize {
    if k >= 4 {
        return usize::MAX;
    }
    (2f64.powi(k as i32 + 1)).exp().floor() as usize
}

/// Smallest `k ≥ 1` with `2^k ≥ p`.
pub fn k0_for(p: f64) -> u32 {
    let mut k = 1;
    while 2f64.powi(k as i32) < p {
        k += 1;
    }
    k
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub k: u32,
    /// Indices into `T`, increasing.
    pub members: Vec<usize>,
    /// `π_k(t)` for every `t`, as an index into `T`.
    pub pi: Vec<usize>,
    /// `max_t d_{2^{k+1}}(t, π_k(t))`.
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSequence {
    pub size: usize,
    pub levels: Vec<Level>,
}

impl AdmissibleSequence {
    pub fn k1(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn level(&self, k: u32) -> &Level {
        &self.levels[k as usize]
    }

    /// The single-level sequence `T_0 = T`; only admissible for `|T| ≤ 7`.
    pub fn trivial(size: usize) -> Self {
        AdmissibleSequence {
            size,
            levels: vec![Level { k: 0, members: (0..size).collect(), pi: (0..size).collect(), radius: 0.0 }],
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Precondition(m));
        let Some(top) = self.levels.last() else {
            return fail("sequence has no levels".into());
        };
        if top.members != (0..self.size).collect::<Vec<_>>() || top.pi != top.members {
            return fail("top level must be T with the identity map".into());
        }
        for (k, level) in self.levels.iter().enumerate() {
            if level.k as usize != k {
                return fail(format!("level {k} is labelled {}", level.k));
            }
            if level.members.len() > level_cap(k as u32) {
                return fail(format!("|T_{k}| = {} exceeds {}", level.members.len(), level_cap(k as u32)));
            }
            if level.pi.len() != self.size {
                return fail(format!("pi_{k} has {} entries for |T| = {}", level.pi.len(), self.size));
            }
            if level.pi.iter().any(|i| level.members.binary_search(i).is_err()) {
                return fail(format!("pi_{k} leaves T_{k}"));
            }
        }
        Ok(())
    }
}

/// Metrics `d_q` on one index set, created on demand per order `q`.
#[derive(Debug)]
pub struct MetricFamily {
    set: IndexSet,
    source: MetricSource,
    cache: RwLock<BTreeMap<u64, Arc<MetricOracle>>>,
}

#[derive(Clone, Debug)]
enum MetricSource {
    Analytic(FamilySpec),
    Empirical(Arc<Projections>),
    Euclidean,
}

impl MetricFamily {
    pub fn analytic(set: &IndexSet, spec: &FamilySpec) -> Result<Self> {
        MetricOracle::analytic(set, spec, 1.0)?;
        Ok(Self::new(set, MetricSource::Analytic(spec.clone())))
    }

    pub fn empirical(set: &IndexSet, batch: &SampleBatch) -> Result<Self> {
        Ok(Self::new(set, MetricSource::Empirical(Arc::new(Projections::new(batch, set)?))))
    }

    pub fn euclidean(set: &IndexSet) -> Self {
        Self::new(set, MetricSource::Euclidean)
    }

    fn new(set: &IndexSet, source: MetricSource) -> Self {
        MetricFamily { set: set.clone(), source, cache: RwLock::new(BTreeMap::new()) }
    }

    pub fn set(&self) -> &IndexSet {
        &self.set
    }

    /// `d_q(s, t) = ‖⟨s − t, X⟩‖_q`.
    pub fn at(&self, q: f64) -> Arc<MetricOracle> {
        let key = q.to_bits();
        if let Some(m) = self.cache.read().unwrap().get(&key) {
            return m.clone();
        }
        let oracle = Arc::new(match &self.source {
            MetricSource::Analytic(spec) => MetricOracle::analytic(&self.set, spec, q).expect("checked at construction"),
            MetricSource::Empirical(proj) => MetricOracle::from_projections(&self.set, proj.clone(), q),
            MetricSource::Euclidean => MetricOracle::euclidean(&self.set),
        });
        self.cache.write().unwrap().entry(key).or_insert(oracle).clone()
    }
}

/// Greedy admissible sequence: `T_k` is a greedy packing of `T` under
/// `d_{2^{k+1}}` at the smallest pairwise-distance radius whose packing fits
/// the level cap; `π_k` sends each point to its nearest member (lowest index
/// on ties). The top level is the first whose cap holds all of `T`.
pub fn build_admissible_greedy(metrics: &MetricFamily) -> AdmissibleSequence {
    let size = metrics.set().len();
    let mut k1 = 0u32;
    while level_cap(k1) < size {
        k1 += 1;
    }
    let mut levels = Vec::with_capacity(k1 as usize + 1);
    for k in 0..k1 {
        let metric = metrics.at(2f64.powi(k as i32 + 1));
        let cap = level_cap(k);
        let mut radii = metric.distinct_distances();
        if radii.is_empty() {
            radii.push(0.0);
        }
        // Invariant: packing at radii[hi] fits; the largest radius leaves one point.
        let (mut lo, mut hi) = (0usize, radii.len() - 1);
        if greedy_packing(&metric, radii[0]).len() <= cap {
            hi = 0;
        }
        while hi > lo + 1 {
            let mid = (lo + hi) / 2;
            if greedy_packing(&metric, radii[mid]).len() <= cap {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let members = greedy_packing(&metric, radii[hi]);
        let mut radius = 0.0f64;
        let pi: Vec<usize> = (0..size)
            .map(|t| {
                let mut best = (members[0], metric.distance(t, members[0]));
                for &c in &members[1..] {
                    let d = metric.distance(t, c);
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                radius = radius.max(best.1);
                best.0
            })
            .collect();
        levels.push(Level { k, members, pi, radius });
    }
    levels.push(Level { k: k1, members: (0..size).collect(), pi: (0..size).collect(), radius: 0.0 });
    AdmissibleSequence { size, levels }
}

/// `m(l) = sup_t Σ_{k=l+1}^{k₁} d_{2^k}(π_k t, π_{k−1} t)`.
pub fn chain_sum(seq: &AdmissibleSequence, metrics: &MetricFamily, l: u32) -> f64 {
    let k1 = seq.k1();
    // Summed from the top level down, so that m(l) is exactly nonincreasing.
    let per_level: Vec<(Arc<MetricOracle>, &Level, &Level)> = (l + 1..=k1)
        .rev()
        .map(|k| (metrics.at(2f64.powi(k as i32)), seq.level(k), seq.level(k - 1)))
        .collect();
    (0..seq.size)
        .map(|t| per_level.iter().map(|(m, cur, prev)| m.distance(cur.pi[t], prev.pi[t])).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainBound {
    pub value: f64,
    pub k0: u32,
    pub k1: u32,
    pub chain_sum: f64,
    pub tail: f64,
    /// True when the small-set bound was used because `k₀ ≥ k₁`.
    pub small_set: bool,
}

/// `3e³ (m(k₀) + sup_{t ∈ T_{k₀}} ‖X_t‖_p)`, an upper bound for
/// `‖sup_{t∈T} |X_t|‖_p`. `tail_norms[i]` is `‖X_t‖_p` for the `i`-th member
/// of `T_{k₀}`.
pub fn chaining_moment_bound(p: f64, seq: &AdmissibleSequence, metrics: &MetricFamily, tail_norms: &[f64]) -> Result<ChainBound> {
    if !(p >= 1.0) {
        return Err(Error::validation(format!("p must be >= 1, got {p}")));
    }
    let k0 = k0_for(p);
    let k1 = seq.k1();
    if k0 >= k1 {
        return Err(Error::Precondition(format!(
            "chaining needs k0 < k1 but k0 = {k0}, k1 = {k1}; use the small-set bound"
        )));
    }
    let members = &seq.level(k0).members;
    if tail_norms.len() != members.len() {
        return Err(Error::validation(format!("{} tail norms for |T_k0| = {}", tail_norms.len(), members.len())));
    }
    let chain = chain_sum(seq, metrics, k0);
    let tail = tail_norms.iter().copied().fold(0.0, f64::max);
    Ok(ChainBound { value: CHAIN_CONSTANT * (chain + tail), k0, k1, chain_sum: chain, tail, small_set: false })
}

/// `min(|T|^{1/p}, e⁴) · sup_t ‖X_t‖_p`.
pub fn small_set_bound(p: f64, size: usize, sup_norm: f64) -> f64 {
    (size as f64).powf(1.0 / p).min(4f64.exp()) * sup_norm
}

/// The chaining bound when `k₀ < k₁`, otherwise the small-set bound.
/// `norm_of(i)` returns `‖X_{t_i}‖_p`.
pub fn moment_bound(p: f64, seq: &AdmissibleSequence, metrics: &MetricFamily, norm_of: impl Fn(usize) -> f64) -> Result<ChainBound> {
    let k0 = k0_for(p);
    let k1 = seq.k1();
    if k0 < k1 {
        let tails: Vec<f64> = seq.level(k0).members.iter().map(|&i| norm_of(i)).collect();
        chaining_moment_bound(p, seq, metrics, &tails)
    } else {
        let sup = (0..seq.size).map(norm_of).fold(0.0, f64::max);
        Ok(ChainBound { value: small_set_bound(p, seq.size, sup), k0, k1, chain_sum: 0.0, tail: sup, small_set: true })
    }
}

/// `max_{p ∈ grid} min{(A/p) log N⁻(p), A}`, where `N⁻(p)` is the packing
/// lower bound for the covering number of `T` at radius `A` under `d_p`. The
/// universal prefactor is deliberately not applied.
pub fn sudakov_lower_functional(metrics: &MetricFamily, a: f64, p_grid: &[f64]) -> f64 {
    p_grid
        .iter()
        .map(|&p| {
            let lower = covering_bounds(&metrics.at(p), a).lower;
            sudakov_term(a, p, lower)
        })
        .fold(0.0, f64::max)
}

/// `min{(A/p) log N, A}`.
pub fn sudakov_term(a: f64, p: f64, covering: usize) -> f64 {
    (a / p * (covering as f64).ln()).min(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SetStrategy;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn caps_and_k0() {
        assert_eq!(level_cap(0), 7);
        assert_eq!(level_cap(1), 54);
        assert_eq!(level_cap(2), 2980);
        assert_eq!(k0_for(1.0), 1);
        assert_eq!(k0_for(2.0), 1);
        assert_eq!(k0_for(2.5), 2);
        assert_eq!(k0_for(4.0), 2);
        assert_eq!(k0_for(8.0), 3);
    }

    #[test]
    fn small_sets_collapse() {
        let set = SetStrategy::SignedBasis { a: Some(1.0) }.build(3, 1.0, 0).unwrap();
        let seq = build_admissible_greedy(&MetricFamily::euclidean(&set));
        assert_eq!(seq.levels.len(), 1);
        seq.check_invariants().unwrap();
    }

    #[test]
    fn small_set_formula() {
        assert_eq!(small_set_bound(3.0, 1, 2.5), 2.5);
        assert_relative_eq!(small_set_bound(2.0, 2, 1.0), 2f64.sqrt(), max_relative = 1e-15);
        let p = 1.5f64;
        let big = (4.0 * p).exp().ceil() as usize + 10;
        assert_relative_eq!(small_set_bound(p, big, 1.0), 4f64.exp(), max_relative = 1e-15);
    }

    #[test]
    fn identity_chain_is_tail_only() {
        // Two-level sequence with every π_k the identity has zero increments.
        let set = SetStrategy::ScaledBasis { a: Some(1.0) }.build(4, 1.0, 0).unwrap();
        let metrics = MetricFamily::euclidean(&set);
        let id = Level { k: 0, members: (0..4).collect(), pi: (0..4).collect(), radius: 0.0 };
        let seq = AdmissibleSequence {
            size: 4,
            levels: vec![id.clone(), Level { k: 1, ..id.clone() }, Level { k: 2, ..id }],
        };
        let b = chaining_moment_bound(2.0, &seq, &metrics, &[1.0, 3.0, 2.0, 0.5]).unwrap();
        assert_eq!(b.chain_sum, 0.0);
        assert_relative_eq!(b.value, CHAIN_CONSTANT * 3.0, max_relative = 1e-15);
    }

    #[test]
    fn single_increment() {
        // Three points on a line; level 1 (k₀ for p = 2) maps everything to
        // point 0, level 2 is the identity: m(1) = max distance to point 0.
        let set = IndexSet::from_points(vec![vec![0.0], vec![0.5], vec![0.25]]).unwrap();
        let metrics = MetricFamily::euclidean(&set);
        let seq = AdmissibleSequence {
            size: 3,
            levels: vec![
                Level { k: 0, members: vec![0], pi: vec![0, 0, 0], radius: 0.5 },
                Level { k: 1, members: vec![0], pi: vec![0, 0, 0], radius: 0.5 },
                Level { k: 2, members: vec![0, 1, 2], pi: vec![0, 1, 2], radius: 0.0 },
            ],
        };
        seq.check_invariants().unwrap();
        let b = chaining_moment_bound(2.0, &seq, &metrics, &[0.1]).unwrap();
        assert_eq!(b.chain_sum, 0.5);
        assert_relative_eq!(b.value, CHAIN_CONSTANT * 0.6, max_relative = 1e-15);
        assert!(matches!(chaining_moment_bound(4.0, &seq, &metrics, &[0.1]), Err(Error::Precondition(_))));
    }

    #[test]
    fn gaussian_signed_basis_sequence() {
        let spec = FamilySpec::gaussian(8);
        let set = SetStrategy::SignedBasis { a: Some(1.0) }.build(8, 1.0, 0).unwrap();
        let metrics = MetricFamily::analytic(&set, &spec).unwrap();
        let seq = build_admissible_greedy(&metrics);
        seq.check_invariants().unwrap();
        assert_eq!(seq.k1(), 1);
        for level in &seq.levels[..seq.levels.len() - 1] {
            let m = metrics.at(2f64.powi(level.k as i32 + 1));
            for t in 0..seq.size {
                assert!(m.distance(t, level.pi[t]) <= level.radius);
            }
        }
        assert_eq!(seq, build_admissible_greedy(&metrics));
    }

    #[test]
    fn sudakov_examples() {
        let one = IndexSet::from_points(vec![vec![1.0]]).unwrap();
        assert_eq!(sudakov_lower_functional(&MetricFamily::euclidean(&one), 1.0, &[1.0, 2.0]), 0.0);
        // 8 points at mutual distance ~ 2 > 2A: covering lower bound 8 ≥ e² at p = 2.
        let set = SetStrategy::SignedBasis { a: Some(1.0) }.build(4, 1.0, 0).unwrap();
        let f = sudakov_lower_functional(&MetricFamily::euclidean(&set), 0.6, &[2.0]);
        assert_eq!(f, 0.6);
        assert!(sudakov_term(2.0, 3.0, 5) <= 2.0 * sudakov_term(1.0, 3.0, 5));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn greedy_sequences_are_admissible(seed in 0u64..500, m in 1usize..120) {
            let set = SetStrategy::SphereRandom { m: Some(m), a: Some(1.0), seed }.build(5, 1.0, 0).unwrap();
            let metrics = MetricFamily::analytic(&set, &FamilySpec::gaussian(5)).unwrap();
            let seq = build_admissible_greedy(&metrics);
            prop_assert!(seq.check_invariants().is_ok());
            let k1 = seq.k1();
            let sums: Vec<f64> = (0..=k1).map(|l| chain_sum(&seq, &metrics, l)).collect();
            for w in sums.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
