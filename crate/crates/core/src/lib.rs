//! Optimized random features on a periodic grid.
//!
//! The crate discretizes a translation-invariant kernel onto the lattice
//! `{0, .., G-1}^D`, computes the data-optimized feature distribution
//! exactly, simulates the quantum sampler that draws from it on a dense
//! statevector, and fits the sampled features by projected SGD.
//!
//! Layout:
//! - [`grid`]: domains, empirical distributions, targets and datasets.
//! - [`kernels`]: Fourier weights, the DFT operator and Gram matrices.
//! - [`oracle`]: exact classical ground truth for every sampled quantity.
//! - [`qsim`]: statevector circuits, block encodings and the sampler.
//! - [`learn`]: feature sampling plus SGD regression.
//! - [`experiment`]: config-driven runs behind the `optrf` binary.

pub mod error;
pub mod experiment;
pub mod grid;
pub mod kernels;
pub mod learn;
pub mod oracle;
pub mod qsim;
pub mod selftest;

pub use error::{Error, Result};

/// Complex scalar used by every operator and statevector.
pub type C64 = num_complex::Complex64;

/// Half the l1 distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "total variation of unequal lengths");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Deterministic generator for a given seed and purpose.
///
/// Distinct streams keep feature draws, SGD index draws and data synthesis
/// independent while sharing one user-facing seed.
pub fn seeded_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
