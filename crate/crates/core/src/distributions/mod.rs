//! Seeded samplers for the log-concave families, plus the symmetrization
//! and linear-image reductions.

mod family;
mod radial;
mod sample;

pub use family::{affine_image, symmetrize, FamilyKind, FamilySpec, PhiSpec};
pub use radial::RadialTable;
pub use sample::{isotropize, sample_batch, BatchHeader, SampleBatch, Sampler, Whitening, ROWS_PER_CHUNK};
