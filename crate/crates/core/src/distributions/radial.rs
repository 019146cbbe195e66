//! Inverse-CDF tables for the radius of radial laws.
//!
//! The radius `s = ‖X‖_r` of a law with density `exp(−φ(‖x‖_r))` has density
//! proportional to `exp(−φ(s)) s^{d−1}` on `[0, ∞)`. The table covers
//! `[0, s_max]` where the unnormalized density has dropped below `1e−30` of
//! its peak, and intervals are bisected until linear interpolation of the CDF
//! is accurate to `1e−8` at every interval midpoint.

use super::family::PhiSpec;
use crate::error::{Error, Result};

const TAIL_DROP: f64 = 69.077_552_789_821_37; // ln(1e30)
const CDF_TOL: f64 = 1e-8;
const INITIAL_INTERVALS: usize = 64;
const MAX_NODES: usize = 1 << 20;
const SEARCH_LIMIT: f64 = 1e12;

// 16-point Gauss–Legendre nodes and weights on [-1, 1] (positive half).
const GL_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_54,
    0.149_595_988_816_576_73,
    0.124_628_971_255_533_87,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_095,
];

#[derive(Clone, Debug)]
pub struct RadialTable {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl RadialTable {
    pub fn build(phi: &PhiSpec, dim: usize) -> Result<Self> {
        let d = dim as f64;
        let log_density = |s: f64| -> f64 {
            if s <= 0.0 {
                return if dim == 1 { -phi.eval(0.0) } else { f64::NEG_INFINITY };
            }
            -phi.eval(s) + (d - 1.0) * s.ln()
        };

        let (s_peak, h_peak, s_max) = match phi.support_end() {
            Some(end) => {
                // Concave log-density on a bounded support: the peak sits at
                // the right end whenever it is increasing there.
                let inner = end * (1.0 - 1e-15);
                let (sp, hp) = golden_max(&log_density, 0.0, inner);
                (sp, hp, end)
            }
            None => {
                let mut b = 1.0;
                while log_density(2.0 * b) >= log_density(b) {
                    b *= 2.0;
                    if b > SEARCH_LIMIT {
                        return Err(non_integrable(dim));
                    }
                }
                let (sp, hp) = golden_max(&log_density, 0.0, 2.0 * b);
                let threshold = hp - TAIL_DROP;
                let mut hi = sp.max(1e-300) * 2.0 + 1.0;
                while log_density(hi) >= threshold {
                    hi *= 2.0;
                    if hi > SEARCH_LIMIT {
                        return Err(non_integrable(dim));
                    }
                }
                let mut lo = sp;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if log_density(mid) >= threshold {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (sp, hp, hi)
            }
        };
        if !h_peak.is_finite() {
            return Err(Error::Model(format!("radial density has no finite peak (at s = {s_peak})")));
        }

        let density = |s: f64| (log_density(s) - h_peak).exp();
        let mass = |a: f64, b: f64| gauss_legendre(&density, a, b);

        let initial: Vec<f64> = (0..=INITIAL_INTERVALS)
            .map(|i| s_max * i as f64 / INITIAL_INTERVALS as f64)
            .collect();
        let coarse_total: f64 = initial.windows(2).map(|w| mass(w[0], w[1])).sum();
        if !(coarse_total.is_finite() && coarse_total > 0.0) {
            return Err(Error::Model("radial density integrates to zero or infinity".into()));
        }
        let tol = CDF_TOL * coarse_total;

        let mut nodes = vec![0.0];
        let mut masses = Vec::new();
        let mut stack = Vec::new();
        for w in initial.windows(2).rev() {
            stack.push((w[0], w[1]));
        }
        while let Some((a, b)) = stack.pop() {
            let mid = 0.5 * (a + b);
            let left = mass(a, mid);
            let right = mass(mid, b);
            // Linear interpolation of the CDF misses the midpoint by |left - right| / 2.
            let refine = 0.5 * (left - right).abs() > tol
                && b - a > s_max * 1e-14
                && nodes.len() + stack.len() < MAX_NODES;
            if refine {
                stack.push((mid, b));
                stack.push((a, mid));
            } else {
                nodes.push(b);
                masses.push(left + right);
            }
        }
        let mut cdf = Vec::with_capacity(nodes.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cdf.push(acc);
        }
        let total = acc;
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Ok(RadialTable { nodes, cdf })
    }

    /// Radius at CDF level `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let j = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let (a, b) = (self.nodes[j - 1], self.nodes[j]);
        if c1 <= c0 {
            return a;
        }
        a + (b - a) * ((u - c0) / (c1 - c0)).clamp(0.0, 1.0)
    }

    /// Interpolated CDF of the radius.
    pub fn cdf(&self, s: f64) -> f64 {
        if s <= self.nodes[0] {
            return 0.0;
        }
        let last = self.nodes.len() - 1;
        if s >= self.nodes[last] {
            return 1.0;
        }
        let j = self.nodes.partition_point(|&x| x <= s);
        let (a, b) = (self.nodes[j - 1], self.nodes[j]);
        self.cdf[j - 1] + (self.cdf[j] - self.cdf[j - 1]) * (s - a) / (b - a)
    }

    pub fn upper_end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn non_integrable(dim: usize) -> Error {
    Error::Model(format!(
        "radial density exp(-phi(s)) s^{} is not integrable: phi grows too slowly",
        dim - 1
    ))
}

fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..300 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
    }
    let mut best = (x1, f1);
    for x in [lo, hi, x2] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_X.iter().zip(GL_W.iter()) {
        acc += w * (f(c - h * x) + f(c + h * x));
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_wall_is_power_law() {
        for d in [1usize, 2, 5, 16] {
            let t = RadialTable::build(&PhiSpec::HardWall, d).unwrap();
            assert_eq!(t.upper_end(), 1.0);
            for i in 1..20 {
                let s = i as f64 / 20.0;
                assert!((t.cdf(s) - s.powi(d as i32)).abs() < 1e-7, "d={d} s={s}");
                let u = i as f64 / 20.0;
                assert!((t.quantile(u) - u.powf(1.0 / d as f64)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn power_one_is_gamma() {
        // density ∝ e^{-s} s^{d-1}: Gamma(d, 1); for d = 2 the CDF is 1 - (1+s)e^{-s}.
        let t = RadialTable::build(&PhiSpec::Power { p: 1.0 }, 2).unwrap();
        for s in [0.1f64, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let exact = 1.0 - (1.0 + s) * (-s).exp();
            assert!((t.cdf(s) - exact).abs() < 2e-8, "s={s}");
        }
    }

    #[test]
    fn flat_phi_rejected() {
        let flat = PhiSpec::Piecewise { knots: vec![(0.0, 0.0), (1.0, 0.0)] };
        let err = RadialTable::build(&flat, 3).unwrap_err();
        assert!(matches!(err, Error::Model(_)));
    }

    #[test]
    fn quantile_inverts_cdf() {
        let phi = PhiSpec::Piecewise { knots: vec![(0.0, 0.0), (1.0, 0.5), (2.0, 3.0)] };
        let t = RadialTable::build(&phi, 4).unwrap();
        for i in 1..50 {
            let u = i as f64 / 50.0;
            assert!((t.cdf(t.quantile(u)) - u).abs() < 1e-12);
        }
    }
}
