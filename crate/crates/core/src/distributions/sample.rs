use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::{affine_image, FamilyKind, FamilySpec};
use super::radial::RadialTable;
use crate::error::{Error, Result};
use crate::rng::Seed;

/// Rows generated from one counter value. Fixed so that output never
/// depends on the thread count.
pub const ROWS_PER_CHUNK: usize = 1024;

/// Row-major `n × dim` matrix of i.i.d. draws, with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub data: Vec<f64>,
    pub n: usize,
    pub spec: FamilySpec,
    pub seed: Seed,
    /// Index of the first row within the `(spec, seed)` stream. Nonzero
    /// for held-out splits.
    pub first_row: usize,
}

impl SampleBatch {
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim())
    }

    /// Per-coordinate sample means and (unbiased) variances.
    pub fn column_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let n = self.n as f64;
        let mut mean = vec![0.0; d];
        for row in self.rows() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in self.rows() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= (n - 1.0).max(1.0));
        (mean, var)
    }

    /// Writes the matrix as flat little-endian f64 and a JSON sidecar next
    /// to it (same stem, `.json`). Returns the sidecar path.
    pub fn save(&self, path: &Path) -> Result<PathBuf> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        let header = BatchHeader {
            n: self.n,
            d: self.dim(),
            spec: self.spec.clone(),
            seed: self.seed,
            first_row: self.first_row,
        };
        let sidecar = path.with_extension("json");
        fs::write(&sidecar, serde_json::to_string_pretty(&header)?)?;
        Ok(sidecar)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let header: BatchHeader =
            serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?;
        header.spec.validate()?;
        if header.spec.dim != header.d {
            return Err(Error::validation("sidecar d disagrees with spec dim"));
        }
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() != header.n * header.d * 8 {
            return Err(Error::validation(format!(
                "batch file has {} bytes, header implies {}",
                bytes.len(),
                header.n * header.d * 8
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(SampleBatch {
            data,
            n: header.n,
            spec: header.spec,
            seed: header.seed,
            first_row: header.first_row,
        })
    }
}

/// JSON sidecar of a persisted batch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchHeader {
    pub n: usize,
    pub d: usize,
    pub spec: FamilySpec,
    pub seed: Seed,
    #[serde(default)]
    pub first_row: usize,
}

/// Draws `n` i.i.d. rows from `spec`. Identical `(spec, n, seed)` give
/// identical bytes regardless of the rayon pool size.
pub fn sample_batch(spec: &FamilySpec, n: usize, seed: Seed) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::validation("sample size must be at least 1"));
    }
    spec.validate()?;
    let sampler = Sampler::new(spec)?;
    let d = spec.dim;
    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(ROWS_PER_CHUNK * d)
        .enumerate()
        .for_each(|(chunk, out)| {
            let mut rng = seed.rng_at(chunk as u64);
            sampler.fill(&mut rng, out.len() / d, out);
        });
    Ok(SampleBatch { data, n, spec: spec.clone(), seed, first_row: 0 })
}

/// A spec compiled into a sampling tree (radial tables precomputed).
#[derive(Debug)]
pub struct Sampler {
    node: Node,
    dim: usize,
}

#[derive(Debug)]
enum Node {
    Gaussian,
    Rademacher,
    Cube,
    Exponential,
    Ball { r: f64, gamma: Gamma<f64> },
    Radial { r: f64, gamma: Gamma<f64>, table: RadialTable },
    Affine { base: Box<Sampler>, matrix: Vec<f64> },
    Symmetrized { base: Box<Sampler> },
}

impl Sampler {
    pub fn new(spec: &FamilySpec) -> Result<Self> {
        let node = match &spec.kind {
            FamilyKind::Gaussian => Node::Gaussian,
            FamilyKind::Rademacher => Node::Rademacher,
            FamilyKind::UniformCube => Node::Cube,
            FamilyKind::ExponentialProduct => Node::Exponential,
            FamilyKind::UniformBall { r_exponent } => Node::Ball {
                r: *r_exponent,
                gamma: gen_gamma(*r_exponent)?,
            },
            FamilyKind::Radial { r_exponent, phi } => Node::Radial {
                r: *r_exponent,
                gamma: gen_gamma(*r_exponent)?,
                table: RadialTable::build(phi, spec.dim)?,
            },
            FamilyKind::AffineImage { base, matrix } => Node::Affine {
                base: Box::new(Sampler::new(base)?),
                matrix: matrix.iter().flatten().copied().collect(),
            },
            FamilyKind::Symmetrized { base } => Node::Symmetrized { base: Box::new(Sampler::new(base)?) },
        };
        Ok(Sampler { node, dim: spec.dim })
    }

    /// Fills `rows × dim` values of `out` (row-major).
    pub fn fill(&self, rng: &mut ChaCha8Rng, rows: usize, out: &mut [f64]) {
        let d = self.dim;
        debug_assert_eq!(out.len(), rows * d);
        match &self.node {
            Node::Gaussian => out.iter_mut().for_each(|x| *x = StandardNormal.sample(rng)),
            Node::Rademacher => {
                for x in out.iter_mut() {
                    *x = if rng.next_u32() & 1 == 0 { 1.0 } else { -1.0 };
                }
            }
            Node::Cube => out.iter_mut().for_each(|x| *x = 2.0 * rng.random::<f64>() - 1.0),
            Node::Exponential => {
                for x in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    let sign = if rng.next_u32() & 1 == 0 { 1.0 } else { -1.0 };
                    *x = sign * e * std::f64::consts::FRAC_1_SQRT_2;
                }
            }
            Node::Ball { r, gamma } => {
                for row in out.chunks_exact_mut(d) {
                    let s = gen_gamma_row(rng, gamma, *r, row);
                    let w: f64 = Exp1.sample(rng);
                    let scale = (s + w).powf(-1.0 / r);
                    row.iter_mut().for_each(|x| *x *= scale);
                }
            }
            Node::Radial { r, gamma, table } => {
                for row in out.chunks_exact_mut(d) {
                    let s = gen_gamma_row(rng, gamma, *r, row);
                    let radius = table.quantile(rng.random::<f64>());
                    let scale = radius * s.powf(-1.0 / r);
                    row.iter_mut().for_each(|x| *x *= scale);
                }
            }
            Node::Affine { base, matrix } => {
                let bd = base.dim;
                let mut tmp = vec![0.0; rows * bd];
                base.fill(rng, rows, &mut tmp);
                for (row, src) in out.chunks_exact_mut(d).zip(tmp.chunks_exact(bd)) {
                    for (k, x) in row.iter_mut().enumerate() {
                        *x = matrix[k * bd..(k + 1) * bd].iter().zip(src).map(|(a, b)| a * b).sum();
                    }
                }
            }
            Node::Symmetrized { base } => {
                base.fill(rng, rows, out);
                let mut tmp = vec![0.0; rows * d];
                base.fill(rng, rows, &mut tmp);
                out.iter_mut().zip(&tmp).for_each(|(x, y)| *x -= y);
            }
        }
    }
}

fn gen_gamma(r: f64) -> Result<Gamma<f64>> {
    Gamma::new(1.0 / r, 1.0).map_err(|e| Error::validation(format!("gamma shape 1/{r}: {e}")))
}

/// Coordinates with density ∝ exp(−|y|^r); returns Σ|y_i|^r.
fn gen_gamma_row(rng: &mut ChaCha8Rng, gamma: &Gamma<f64>, r: f64, row: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for x in row.iter_mut() {
        let g = gamma.sample(rng);
        let mag = if r == 1.0 {
            g
        } else if r == 2.0 {
            g.sqrt()
        } else {
            g.powf(1.0 / r)
        };
        *x = if rng.next_u32() & 1 == 0 { mag } else { -mag };
        sum += g;
    }
    sum
}

/// Whitening fitted on a calibration split.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Whitening {
    /// Symmetric positive definite `W ≈ Σ^{−1/2}`, row-major.
    pub matrix: Vec<Vec<f64>>,
    pub calibration_rows: usize,
    pub ridge: f64,
}

/// Fits `W = (Σ̂ + εI)^{−1/2}` on the first `⌊fraction·n⌋` rows and applies it
/// to the remaining rows. The returned batch is described exactly by
/// `affine_image(spec, W)` on the held-out rows of the same stream.
pub fn isotropize(batch: &SampleBatch, calibration_fraction: f64) -> Result<(Whitening, SampleBatch)> {
    if !(calibration_fraction > 0.0 && calibration_fraction < 1.0) {
        return Err(Error::validation("calibration fraction must lie in (0, 1)"));
    }
    let d = batch.dim();
    let n_cal = (calibration_fraction * batch.n as f64).floor() as usize;
    if n_cal < 10 * d {
        return Err(Error::validation(format!(
            "calibration split has {n_cal} rows; at least {} (10·d) needed",
            10 * d
        )));
    }
    if n_cal >= batch.n {
        return Err(Error::validation("held-out split is empty"));
    }

    let mut mean = vec![0.0; d];
    for row in batch.rows().take(n_cal) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n_cal as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in batch.rows().take(n_cal) {
        for i in 0..d {
            let xi = row[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += xi * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / (n_cal as f64 - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let ridge = 1e-10 * cov.trace() / d as f64;
    let eig = SymmetricEigen::new(cov);
    let min_eig = eig.eigenvalues.min();
    if !(min_eig > ridge) {
        return Err(Error::Singular { min_eigenvalue: min_eig, ridge });
    }
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / (l + ridge).sqrt());
    let w = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let matrix: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| w[(i, j)]).collect()).collect();

    let n_hold = batch.n - n_cal;
    let mut data = vec![0.0; n_hold * d];
    data.par_chunks_mut(d)
        .zip(batch.data[n_cal * d..].par_chunks(d))
        .for_each(|(out, row)| {
            for (k, o) in out.iter_mut().enumerate() {
                *o = matrix[k].iter().zip(row).map(|(a, b)| a * b).sum();
            }
        });
    let spec = affine_image(&batch.spec, matrix.clone())?;
    Ok((
        Whitening { matrix, calibration_rows: n_cal, ridge },
        SampleBatch { data, n: n_hold, spec, seed: batch.seed, first_row: batch.first_row + n_cal },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::family::{symmetrize, PhiSpec};

    fn batch(spec: FamilySpec, n: usize) -> SampleBatch {
        sample_batch(&spec, n, Seed::new(11, 3)).unwrap()
    }

    #[test]
    fn shapes_and_supports() {
        let b = batch(FamilySpec::rademacher(3), 100);
        assert_eq!(b.data.len(), 300);
        assert!(b.data.iter().all(|&x| x == 1.0 || x == -1.0));
        let c = batch(FamilySpec::uniform_cube(3), 2000);
        assert!(c.data.iter().all(|&x| (-1.0..1.0).contains(&x)));
        for r in [1.0, 1.5, 2.0, 3.0] {
            let ball = batch(FamilySpec::uniform_ball(5, r), 2000);
            for row in ball.rows() {
                let norm: f64 = row.iter().map(|x| x.abs().powf(r)).sum::<f64>().powf(1.0 / r);
                assert!(norm <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn zero_n_rejected() {
        assert!(sample_batch(&FamilySpec::gaussian(2), 0, Seed::default()).is_err());
    }

    #[test]
    fn affine_matches_base_draws() {
        let base = FamilySpec::exponential_product(3);
        let u = vec![vec![1.0, 2.0, 0.0], vec![0.0, -1.0, 3.0]];
        let img = affine_image(&base, u.clone()).unwrap();
        let seed = Seed::new(5, 9);
        let xb = sample_batch(&base, 2500, seed).unwrap();
        let xi = sample_batch(&img, 2500, seed).unwrap();
        for (rb, ri) in xb.rows().zip(xi.rows()) {
            for k in 0..2 {
                let expect: f64 = u[k].iter().zip(rb).map(|(a, b)| a * b).sum();
                assert_eq!(ri[k], expect);
            }
        }
    }

    #[test]
    fn identity_image_is_base() {
        let base = FamilySpec::gaussian(3);
        let id = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let seed = Seed::new(1, 2);
        let a = sample_batch(&base, 3000, seed).unwrap();
        let b = sample_batch(&affine_image(&base, id).unwrap(), 3000, seed).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn thread_count_does_not_change_bytes() {
        let spec = symmetrize(&FamilySpec::radial(4, 1.5, PhiSpec::Power { p: 2.0 }));
        let seed = Seed::new(77, 1);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = one.install(|| sample_batch(&spec, 5000, seed).unwrap());
        let b = many.install(|| sample_batch(&spec, 5000, seed).unwrap());
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let b = batch(FamilySpec::uniform_ball(3, 1.0), 100);
        let path = dir.path().join("b.bin");
        b.save(&path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 100 * 3 * 8);
        let back = SampleBatch::load(&path).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn isotropize_preconditions() {
        let b = batch(FamilySpec::gaussian(4), 100);
        assert!(isotropize(&b, 0.3).is_err());
        let degenerate = affine_image(&FamilySpec::gaussian(1), vec![vec![1.0], vec![1.0]]).unwrap();
        let b = batch(degenerate, 1000);
        assert!(matches!(isotropize(&b, 0.5), Err(Error::Singular { .. })));
    }
}
