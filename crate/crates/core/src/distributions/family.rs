use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nondecreasing convex profile `φ: [0, ∞) → (−∞, ∞]` for radial laws
/// with density proportional to `exp(−φ(‖x‖_r))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum PhiSpec {
    /// `φ(s) = s^p`, `p ≥ 1`.
    Power { p: f64 },
    /// `φ = 0` on `[0, 1)` and `+∞` beyond: the uniform law on the unit ball.
    HardWall,
    /// Linear interpolation through `(knot, value)` pairs, extended linearly
    /// on both sides with the first and last slopes.
    Piecewise { knots: Vec<(f64, f64)> },
}

impl PhiSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PhiSpec::Power { p } => {
                if !(p.is_finite() && *p >= 1.0) {
                    return Err(Error::validation(format!(
                        "non-convex phi: power exponent must be finite and >= 1, got {p}"
                    )));
                }
            }
            PhiSpec::HardWall => {}
            PhiSpec::Piecewise { knots } => {
                if knots.len() < 2 {
                    return Err(Error::validation("phi needs at least two knots"));
                }
                for w in knots.windows(2) {
                    if !(w[0].0 >= 0.0 && w[0].0.is_finite() && w[1].0.is_finite()) {
                        return Err(Error::validation("phi knots must be finite and >= 0"));
                    }
                    if w[1].0 <= w[0].0 {
                        return Err(Error::validation("phi knots must be strictly increasing"));
                    }
                }
                if knots.iter().any(|k| !k.1.is_finite()) {
                    return Err(Error::validation("phi values must be finite"));
                }
                let slopes = piecewise_slopes(knots);
                if slopes[0] < 0.0 {
                    return Err(Error::validation(
                        "phi must be nondecreasing (first slope is negative)",
                    ));
                }
                for w in slopes.windows(2) {
                    let scale = w[0].abs().max(w[1].abs()).max(1.0);
                    if w[1] < w[0] - 1e-12 * scale {
                        return Err(Error::validation(
                            "non-convex phi: slopes between knots must be nondecreasing",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluates `φ(s)` for `s ≥ 0`; `+∞` outside the support.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            PhiSpec::Power { p } => s.powf(*p),
            PhiSpec::HardWall => {
                if s < 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PhiSpec::Piecewise { knots } => {
                let slopes = piecewise_slopes(knots);
                let last = knots.len() - 1;
                if s <= knots[0].0 {
                    return knots[0].1 + slopes[0] * (s - knots[0].0);
                }
                if s >= knots[last].0 {
                    return knots[last].1 + slopes[last - 1] * (s - knots[last].0);
                }
                let j = knots.partition_point(|k| k.0 <= s) - 1;
                knots[j].1 + slopes[j] * (s - knots[j].0)
            }
        }
    }

    /// Right end of the support of `exp(−φ)`, if bounded.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            PhiSpec::HardWall => Some(1.0),
            _ => None,
        }
    }
}

fn piecewise_slopes(knots: &[(f64, f64)]) -> Vec<f64> {
    knots
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect()
}

/// Declarative description of a log-concave law on `R^dim`.
///
/// Only closed families are representable, so every valid spec denotes a
/// log-concave (hence symmetric, here) distribution. The ℓ∞ ball is not a
/// separate kind: it is `uniform_cube`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(flatten)]
    pub kind: FamilyKind,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    /// Standard normal coordinates.
    Gaussian,
    /// Independent uniform signs.
    Rademacher,
    /// Uniform on `[−1, 1]^d`.
    UniformCube,
    /// Independent symmetric exponential coordinates with variance 1,
    /// density `exp(−√2|x|)/√2`.
    ExponentialProduct,
    /// Uniform on the unit ball of `ℓ_r`.
    UniformBall { r_exponent: f64 },
    /// Density proportional to `exp(−φ(‖x‖_r))`.
    Radial { r_exponent: f64, phi: PhiSpec },
    /// `U X` for a `dim × base.dim` matrix `U` (row-major).
    AffineImage {
        base: Box<FamilySpec>,
        matrix: Vec<Vec<f64>>,
    },
    /// `X − X'` for independent copies of the base law.
    Symmetrized { base: Box<FamilySpec> },
}

impl FamilySpec {
    pub fn gaussian(dim: usize) -> Self {
        FamilySpec { kind: FamilyKind::Gaussian, dim }
    }

    pub fn rademacher(dim: usize) -> Self {
        FamilySpec { kind: FamilyKind::Rademacher, dim }
    }

    pub fn uniform_cube(dim: usize) -> Self {
        FamilySpec { kind: FamilyKind::UniformCube, dim }
    }

    pub fn exponential_product(dim: usize) -> Self {
        FamilySpec { kind: FamilyKind::ExponentialProduct, dim }
    }

    pub fn uniform_ball(dim: usize, r_exponent: f64) -> Self {
        FamilySpec { kind: FamilyKind::UniformBall { r_exponent }, dim }
    }

    pub fn radial(dim: usize, r_exponent: f64, phi: PhiSpec) -> Self {
        FamilySpec { kind: FamilyKind::Radial { r_exponent, phi }, dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::validation("dimension must be at least 1"));
        }
        match &self.kind {
            FamilyKind::Gaussian
            | FamilyKind::Rademacher
            | FamilyKind::UniformCube
            | FamilyKind::ExponentialProduct => Ok(()),
            FamilyKind::UniformBall { r_exponent } => check_exponent(*r_exponent),
            FamilyKind::Radial { r_exponent, phi } => {
                check_exponent(*r_exponent)?;
                phi.validate()
            }
            FamilyKind::AffineImage { base, matrix } => {
                base.validate()?;
                if matrix.len() != self.dim {
                    return Err(Error::validation(format!(
                        "affine matrix has {} rows but dim is {}",
                        matrix.len(),
                        self.dim
                    )));
                }
                if let Some(row) = matrix.iter().find(|r| r.len() != base.dim) {
                    return Err(Error::validation(format!(
                        "affine matrix has a row of length {} but base dim is {}",
                        row.len(),
                        base.dim
                    )));
                }
                if matrix.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::validation("affine matrix entries must be finite"));
                }
                Ok(())
            }
            FamilyKind::Symmetrized { base } => {
                base.validate()?;
                if base.dim != self.dim {
                    return Err(Error::validation("symmetrized dim must equal base dim"));
                }
                Ok(())
            }
        }
    }

    /// Short tag used in tables and CSV output.
    pub fn label(&self) -> String {
        match &self.kind {
            FamilyKind::Gaussian => format!("gaussian[{}]", self.dim),
            FamilyKind::Rademacher => format!("rademacher[{}]", self.dim),
            FamilyKind::UniformCube => format!("uniform_cube[{}]", self.dim),
            FamilyKind::ExponentialProduct => format!("exponential_product[{}]", self.dim),
            FamilyKind::UniformBall { r_exponent } => {
                format!("uniform_ball_l{r_exponent}[{}]", self.dim)
            }
            FamilyKind::Radial { r_exponent, .. } => format!("radial_l{r_exponent}[{}]", self.dim),
            FamilyKind::AffineImage { base, .. } => format!("affine({})[{}]", base.label(), self.dim),
            FamilyKind::Symmetrized { base } => format!("sym({})", base.label()),
        }
    }

    /// Invariance under every coordinate sign flip.
    pub fn is_unconditional(&self) -> bool {
        match &self.kind {
            FamilyKind::Gaussian
            | FamilyKind::Rademacher
            | FamilyKind::UniformCube
            | FamilyKind::ExponentialProduct
            | FamilyKind::UniformBall { .. }
            | FamilyKind::Radial { .. } => true,
            FamilyKind::Symmetrized { base } => base.is_unconditional(),
            // A monomial matrix (one nonzero per row and column) maps an
            // unconditional law to an unconditional one.
            FamilyKind::AffineImage { base, matrix } => {
                base.is_unconditional() && is_monomial(matrix, base.dim)
            }
        }
    }

    /// Every representable law is symmetric: the base families are, and both
    /// transforms preserve symmetry.
    pub fn is_symmetric(&self) -> bool {
        true
    }

    /// Known isotropy (identity covariance) without sampling.
    pub fn is_isotropic(&self) -> bool {
        matches!(
            self.kind,
            FamilyKind::Gaussian | FamilyKind::Rademacher | FamilyKind::ExponentialProduct
        )
    }

    /// Closed-form variance of every coordinate, when the family is
    /// exchangeable with a known formula.
    pub fn coordinate_variance(&self) -> Option<f64> {
        match &self.kind {
            FamilyKind::Gaussian | FamilyKind::Rademacher | FamilyKind::ExponentialProduct => {
                Some(1.0)
            }
            FamilyKind::UniformCube => Some(1.0 / 3.0),
            FamilyKind::UniformBall { r_exponent } => {
                // X_1^r / (sum + W) is Beta(1/r, (d-1)/r + 1); take its 2/r moment.
                let r = *r_exponent;
                let d = self.dim as f64;
                let ln = statrs::function::gamma::ln_gamma;
                Some((ln(3.0 / r) + ln(d / r + 1.0) - ln(1.0 / r) - ln((d + 2.0) / r + 1.0)).exp())
            }
            FamilyKind::Symmetrized { base } => base.coordinate_variance().map(|v| 2.0 * v),
            _ => None,
        }
    }
}

fn check_exponent(r: f64) -> Result<()> {
    if r.is_finite() && r >= 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "r_exponent must be finite and >= 1, got {r} (use uniform_cube for the l-infinity ball)"
        )))
    }
}

fn is_monomial(matrix: &[Vec<f64>], cols: usize) -> bool {
    if matrix.len() != cols {
        return false;
    }
    let mut used = vec![false; cols];
    for row in matrix {
        let nz: Vec<usize> = (0..cols).filter(|&j| row[j] != 0.0).collect();
        if nz.len() != 1 || used[nz[0]] {
            return false;
        }
        used[nz[0]] = true;
    }
    true
}

/// Law of `X − X'` for independent copies `X, X'` of `spec`.
pub fn symmetrize(spec: &FamilySpec) -> FamilySpec {
    FamilySpec {
        dim: spec.dim,
        kind: FamilyKind::Symmetrized { base: Box::new(spec.clone()) },
    }
}

/// Law of `U X` for `X ~ spec`. `matrix` is row-major with `spec.dim` columns.
pub fn affine_image(spec: &FamilySpec, matrix: Vec<Vec<f64>>) -> Result<FamilySpec> {
    let out = FamilySpec {
        dim: matrix.len(),
        kind: FamilyKind::AffineImage { base: Box::new(spec.clone()), matrix },
    };
    if out.dim == 0 {
        return Err(Error::validation("affine matrix has no rows"));
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let spec = FamilySpec::radial(3, 2.0, PhiSpec::Power { p: 1.0 });
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"kind":"radial","r_exponent":2.0,"phi":{"form":"power","p":1.0},"dim":3}"#);
        let back: FamilySpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let g: FamilySpec = serde_json::from_str(r#"{"kind":"gaussian","dim":4}"#).unwrap();
        assert_eq!(g, FamilySpec::gaussian(4));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(FamilySpec::gaussian(0).validate().is_err());
        assert!(FamilySpec::uniform_ball(3, 0.5).validate().is_err());
        assert!(FamilySpec::uniform_ball(3, f64::INFINITY).validate().is_err());
        let concave = PhiSpec::Piecewise { knots: vec![(0.0, 0.0), (1.0, 2.0), (2.0, 3.0)] };
        let err = FamilySpec::radial(2, 2.0, concave).validate().unwrap_err();
        assert!(err.to_string().contains("non-convex phi"));
        let decreasing = PhiSpec::Piecewise { knots: vec![(0.0, 1.0), (1.0, 0.0), (2.0, 0.0)] };
        assert!(FamilySpec::radial(2, 2.0, decreasing).validate().is_err());
        assert!(affine_image(&FamilySpec::gaussian(3), vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn piecewise_eval_extrapolates() {
        let phi = PhiSpec::Piecewise { knots: vec![(1.0, 0.0), (2.0, 1.0), (3.0, 3.0)] };
        phi.validate().unwrap();
        assert_eq!(phi.eval(0.0), -1.0);
        assert_eq!(phi.eval(1.5), 0.5);
        assert_eq!(phi.eval(2.5), 2.0);
        assert_eq!(phi.eval(5.0), 7.0);
    }

    #[test]
    fn unconditional_closure() {
        let g = FamilySpec::gaussian(2);
        assert!(symmetrize(&g).is_unconditional());
        let perm = affine_image(&g, vec![vec![0.0, 2.0], vec![-1.0, 0.0]]).unwrap();
        assert!(perm.is_unconditional());
        let rot = affine_image(&g, vec![vec![1.0, 1.0], vec![-1.0, 1.0]]).unwrap();
        assert!(!rot.is_unconditional());
    }
}
