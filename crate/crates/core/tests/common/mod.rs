#![allow(dead_code)]

use chebyshev_core::measure::{DiscreteMeasure, Role};
use chebyshev_core::space::{Exponent, PNormSpace};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const EXPONENTS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];

pub fn exponent(p: f64) -> Exponent {
    Exponent::new(p).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn random_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Random measure with `dim ≤ max_dim`, `atoms ≤ max_atoms`, coordinates at a random scale.
pub fn random_measure(rng: &mut ChaCha8Rng, p: Exponent, max_dim: usize, max_atoms: usize) -> DiscreteMeasure {
    let dim = rng.random_range(1..=max_dim);
    random_measure_in(rng, PNormSpace::new(dim, p).unwrap(), max_atoms, Role::Primal)
}

pub fn random_measure_in(rng: &mut ChaCha8Rng, space: PNormSpace, max_atoms: usize, role: Role) -> DiscreteMeasure {
    let k = rng.random_range(1..=max_atoms);
    let scale = 10f64.powf(rng.random_range(-1.5..1.5));
    let atoms = (0..k).map(|_| gaussian_vector(rng, space.dim(), scale)).collect();
    DiscreteMeasure::new(space, role, atoms, random_weights(rng, k)).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng))
}

/// Prints `criterion NN [PASS|FAIL] name: detail`. Written to the stdout handle
/// directly so the line shows up without `--nocapture`.
pub fn criterion(id: u32, name: &str, pass: bool, detail: impl std::fmt::Display) {
    use std::io::Write;
    let line = format!(
        "criterion {id:>2} [{}] {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}
