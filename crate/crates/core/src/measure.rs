//! Discrete probability measures, samplers and the grid quantizer.
//!
//! A [`DiscreteMeasure`] is the computational form of a step function
//! `X = Σ xᵢ 1_{Aᵢ}`: atoms `xᵢ` carrying weights `P(Aᵢ)`. Measures live either
//! on the primal space `B` or on its dual `B*`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::space::{p_norm, Exponent, PNormSpace};

/// Tolerance on `|Σ weights − 1|`.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Primal,
    Dual,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Primal => "primal",
            Role::Dual => "dual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct DiscreteMeasure {
    space: PNormSpace,
    role: Role,
    atoms: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

/// Compensated summation; weight totals are validated against a tight tolerance.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl DiscreteMeasure {
    pub fn new(space: PNormSpace, role: Role, atoms: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("a measure needs at least one atom".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.len() != space.dim() {
                return Err(Error::InvalidMeasure(format!(
                    "atom {i} has dimension {}, space has dimension {}",
                    a.len(),
                    space.dim()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMeasure(format!("atom {i} has a non-finite coordinate")));
            }
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!(
                "weight {i} is {} (weights must be finite and nonnegative)",
                weights[i]
            )));
        }
        let total = neumaier_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1 within {WEIGHT_TOLERANCE:e}"
            )));
        }
        Ok(DiscreteMeasure {
            space,
            role,
            atoms,
            weights,
        })
    }

    pub fn from_rows(space: PNormSpace, role: Role, atoms: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        let atoms = atoms.iter().map(|a| DVector::from_column_slice(a)).collect();
        Self::new(space, role, atoms, weights.to_vec())
    }

    pub fn point_mass(space: PNormSpace, role: Role, x: DVector<f64>) -> Result<Self> {
        Self::new(space, role, vec![x], vec![1.0])
    }

    /// The atoms `±e₁, …, ±eₙ`, each with weight `1/(2n)`.
    pub fn signed_basis(space: PNormSpace) -> Self {
        let n = space.dim();
        let w = 1.0 / (2 * n) as f64;
        let mut atoms = Vec::with_capacity(2 * n);
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut e = DVector::zeros(n);
                e[i] = s;
                atoms.push(e);
            }
        }
        DiscreteMeasure {
            space,
            role: Role::Primal,
            atoms,
            weights: vec![w; 2 * n],
        }
    }

    pub fn space(&self) -> PNormSpace {
        self.space
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn atoms(&self) -> &[DVector<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DVector<f64>, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Same atoms and weights, relabelled.
    pub fn with_role(&self, role: Role) -> Self {
        DiscreteMeasure { role, ..self.clone() }
    }

    /// Norm of the space this measure lives on: `‖·‖` for primal, `‖·‖*` for dual.
    pub fn norm_exponent(&self) -> Exponent {
        match self.role {
            Role::Primal => self.space.p(),
            Role::Dual => self.space.q(),
        }
    }

    pub fn norm_of(&self, x: &[f64]) -> f64 {
        p_norm(x, self.norm_exponent())
    }

    /// `∫‖x‖² μ(dx)` in the norm of the space the measure lives on.
    pub fn second_moment(&self) -> f64 {
        self.iter()
            .map(|(x, w)| {
                let n = self.norm_of(x.as_slice());
                w * n * n
            })
            .sum()
    }

    /// `∫‖x‖₂² μ(dx)`, the trace of the second-moment matrix.
    pub fn euclidean_second_moment(&self) -> f64 {
        self.iter().map(|(x, w)| w * x.norm_squared()).sum()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.iter().fold(DVector::zeros(self.dim()), |acc, (x, w)| acc + x * w)
    }

    /// The law of `X − E(X)`.
    pub fn center(&self) -> Self {
        let m = self.mean();
        DiscreteMeasure {
            atoms: self.atoms.iter().map(|x| x - &m).collect(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure serialization is infallible")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureJson {
    dim: usize,
    p: Exponent,
    role: Role,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureJson> for DiscreteMeasure {
    type Error = Error;

    fn try_from(raw: MeasureJson) -> Result<Self> {
        let space = PNormSpace::new(raw.dim, raw.p)?;
        DiscreteMeasure::from_rows(space, raw.role, &raw.atoms, &raw.weights)
    }
}

impl From<DiscreteMeasure> for MeasureJson {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureJson {
            dim: m.space.dim(),
            p: m.space.p(),
            role: m.role,
            atoms: m.atoms.iter().map(|a| a.iter().copied().collect()).collect(),
            weights: m.weights,
        }
    }
}

/// Merge key for exact coordinate equality; `-0.0` and `0.0` coincide.
fn bits_key(x: &DVector<f64>) -> Vec<u64> {
    x.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect()
}

/// The image measure `μ ∘ T⁻¹`, merging atoms with identical images.
pub fn pushforward(mu: &DiscreteMeasure, t: &DMatrix<f64>, role: Role) -> Result<DiscreteMeasure> {
    if t.nrows() != t.ncols() {
        return Err(Error::Shape {
            expected: t.nrows(),
            found: t.ncols(),
        });
    }
    check_dim(mu.dim(), t.ncols())?;
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut atoms: Vec<DVector<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (x, w) in mu.iter() {
        let y = t * x;
        match index.get(&bits_key(&y)) {
            Some(&k) => weights[k] += w,
            None => {
                index.insert(bits_key(&y), atoms.len());
                atoms.push(y);
                weights.push(w);
            }
        }
    }
    DiscreteMeasure::new(mu.space(), role, atoms, weights)
}

/// Distribution families a [`Sampler`] can draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `mean + factor · z`, `z` standard normal with `factor.ncols()` coordinates.
    Gaussian { mean: Vec<f64>, factor: Vec<Vec<f64>> },
    /// Uniform on the `p`-norm ball of the given radius.
    UniformBall { radius: f64 },
    /// Uniform over `{±a}` for the listed atoms `a`.
    SymmetricAtoms { atoms: Vec<Vec<f64>> },
}

/// A sampleable random element with counter-based draws keyed by `(seed, index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    space: PNormSpace,
    family: Family,
    seed: u64,
    factor: Option<DMatrix<f64>>,
}

impl Sampler {
    pub fn new(space: PNormSpace, family: Family, seed: u64) -> Result<Self> {
        let dim = space.dim();
        let mut factor = None;
        match &family {
            Family::Gaussian { mean, factor: rows } => {
                check_dim(dim, mean.len())?;
                check_dim(dim, rows.len())?;
                let cols = rows.first().map_or(0, Vec::len);
                if cols == 0 || rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::Domain(
                        "gaussian factor must be a non-empty rectangular matrix".into(),
                    ));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                if flat.iter().chain(mean).any(|v| !v.is_finite()) {
                    return Err(Error::Domain("gaussian parameters must be finite".into()));
                }
                factor = Some(DMatrix::from_row_slice(dim, cols, &flat));
            }
            Family::UniformBall { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
                }
            }
            Family::SymmetricAtoms { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::Domain("symmetric-atoms sampler needs at least one atom".into()));
                }
                for a in atoms {
                    check_dim(dim, a.len())?;
                }
            }
        }
        Ok(Sampler {
            space,
            family,
            seed,
            factor,
        })
    }

    /// `N(0, scale² I)` on the given space.
    pub fn isotropic_gaussian(space: PNormSpace, scale: f64, seed: u64) -> Result<Self> {
        let n = space.dim();
        let factor = (0..n)
            .map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect();
        Self::new(
            space,
            Family::Gaussian {
                mean: vec![0.0; n],
                factor,
            },
            seed,
        )
    }

    pub fn space(&self) -> PNormSpace {
        self.space
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Sampler { seed, ..self.clone() }
    }

    /// The `index`-th draw. Independent of any other draw having been made.
    pub fn draw(&self, index: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let n = self.space.dim();
        match &self.family {
            Family::Gaussian { mean, .. } => {
                let factor = self.factor.as_ref().expect("validated gaussian factor");
                let z = DVector::from_fn(factor.ncols(), |_, _| StandardNormal.sample(&mut rng));
                DVector::from_column_slice(mean) + factor * z
            }
            Family::UniformBall { radius } => match self.space.p() {
                Exponent::Infinite => {
                    let u = Uniform::new_inclusive(-*radius, *radius).expect("positive radius");
                    DVector::from_fn(n, |_, _| u.sample(&mut rng))
                }
                Exponent::Finite(p) => {
                    // Generalized-Gaussian coordinates plus an exponential slack variable
                    // give a uniform point in the unit p-ball after normalization.
                    let gamma = Gamma::new(1.0 / p, 1.0).expect("valid gamma shape");
                    let y = DVector::from_fn(n, |_, _| {
                        let g: f64 = gamma.sample(&mut rng);
                        let s: f64 = StandardNormal.sample(&mut rng);
                        g.powf(1.0 / p).copysign(s)
                    });
                    let z: f64 = Exp1.sample(&mut rng);
                    let total: f64 = y.iter().map(|v| v.abs().powf(p)).sum::<f64>() + z;
                    y * (*radius / total.powf(1.0 / p))
                }
            },
            Family::SymmetricAtoms { atoms } => {
                let k = Uniform::new(0, 2 * atoms.len())
                    .expect("non-empty atoms")
                    .sample(&mut rng);
                let a = DVector::from_column_slice(&atoms[k / 2]);
                if k % 2 == 0 {
                    a
                } else {
                    -a
                }
            }
        }
    }

    pub fn draws(&self, n: usize) -> Vec<DVector<f64>> {
        (0..n as u64).map(|i| self.draw(i)).collect()
    }
}

/// Truncate one coordinate toward zero onto the grid `resolution · ℤ`.
///
/// The result `k·δ` satisfies `|k·δ| ≤ |x| < |(k ± 1)·δ|` in floating point.
fn truncate_coordinate(x: f64, resolution: f64) -> Result<(i64, f64)> {
    if x == 0.0 {
        return Ok((0, 0.0));
    }
    let ratio = (x / resolution).trunc();
    if !(ratio.abs() < 9.0e15) {
        return Err(Error::Domain(format!(
            "coordinate {x} is too large for a grid of spacing {resolution}"
        )));
    }
    let dir = x.signum();
    let mut k = ratio;
    while k != 0.0 && (k * resolution).abs() > x.abs() {
        k -= dir;
    }
    while ((k + dir) * resolution).abs() <= x.abs() {
        k += dir;
    }
    Ok((k as i64, k * resolution))
}

/// Grid cell index and grid point of `x`.
pub fn quantize_point(x: &[f64], resolution: f64) -> Result<(Vec<i64>, DVector<f64>)> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::Domain(format!("resolution must be positive, got {resolution}")));
    }
    let mut cell = Vec::with_capacity(x.len());
    let mut point = DVector::zeros(x.len());
    for (i, v) in x.iter().enumerate() {
        let (k, q) = truncate_coordinate(*v, resolution)?;
        cell.push(k);
        point[i] = q;
    }
    Ok((cell, point))
}

/// A sample set together with its grid truncation, kept draw-by-draw.
#[derive(Debug, Clone)]
pub struct Quantization {
    space: PNormSpace,
    resolution: f64,
    raw: Vec<DVector<f64>>,
    cells: Vec<Vec<i64>>,
    quantized: Vec<DVector<f64>>,
}

impl Quantization {
    pub fn of_points(space: PNormSpace, raw: Vec<DVector<f64>>, resolution: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Domain("quantization needs at least one sample".into()));
        }
        let mut cells = Vec::with_capacity(raw.len());
        let mut quantized = Vec::with_capacity(raw.len());
        for x in &raw {
            check_dim(space.dim(), x.len())?;
            let (c, q) = quantize_point(x.as_slice(), resolution)?;
            cells.push(c);
            quantized.push(q);
        }
        Ok(Quantization {
            space,
            resolution,
            raw,
            cells,
            quantized,
        })
    }

    pub fn draw(sampler: &Sampler, n_samples: usize, resolution: f64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::Domain("n_samples must be positive".into()));
        }
        Self::of_points(sampler.space(), sampler.draws(n_samples), resolution)
    }

    /// Re-truncate the same raw samples on another grid.
    pub fn refine(&self, resolution: f64) -> Result<Self> {
        Self::of_points(self.space, self.raw.clone(), resolution)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn raw(&self) -> &[DVector<f64>] {
        &self.raw
    }

    pub fn quantized(&self) -> &[DVector<f64>] {
        &self.quantized
    }

    /// Per-draw bound `δ · dim^(1/p)` on `‖X_quantized − X‖_p`.
    pub fn error_bound(&self) -> f64 {
        self.resolution * (self.space.dim() as f64).powf(self.space.p().recip())
    }

    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.raw
            .iter()
            .zip(&self.quantized)
            .map(|(x, q)| self.space.norm((q - x).as_slice()))
    }

    pub fn max_error(&self) -> f64 {
        self.errors().fold(0.0, f64::max)
    }

    /// Coordinatewise `|X_quantized| ≤ |X|` for every draw.
    pub fn shrinks(&self) -> bool {
        self.raw
            .iter()
            .zip(&self.quantized)
            .all(|(x, q)| x.iter().zip(q.iter()).all(|(a, b)| b.abs() <= a.abs()))
    }

    fn uniform_measure(&self, atoms: Vec<DVector<f64>>) -> DiscreteMeasure {
        let n = atoms.len();
        DiscreteMeasure::new(self.space, Role::Primal, atoms, vec![1.0 / n as f64; n])
            .expect("uniform weights over finite atoms form a valid measure")
    }

    /// Empirical measure of the raw samples.
    pub fn raw_measure(&self) -> DiscreteMeasure {
        self.uniform_measure(self.raw.clone())
    }

    /// One atom per draw, index-aligned with the raw samples.
    pub fn coupled_measure(&self) -> DiscreteMeasure {
        self.uniform_measure(self.quantized.clone())
    }

    /// One atom per occupied grid cell, weights `count / n_samples`.
    pub fn merged_measure(&self) -> DiscreteMeasure {
        let mut counts: BTreeMap<&[i64], (usize, usize)> = BTreeMap::new();
        for (i, c) in self.cells.iter().enumerate() {
            counts.entry(c.as_slice()).or_insert((i, 0)).1 += 1;
        }
        let total = self.cells.len() as f64;
        let (atoms, weights) = counts
            .values()
            .map(|&(first, count)| (self.quantized[first].clone(), count as f64 / total))
            .unzip();
        DiscreteMeasure::new(self.space, Role::Primal, atoms, weights).expect("cell frequencies form a valid measure")
    }
}

/// Draw `n_samples` points and merge their grid truncations into a step measure.
pub fn quantize(sampler: &Sampler, n_samples: usize, resolution: f64) -> Result<DiscreteMeasure> {
    Ok(Quantization::draw(sampler, n_samples, resolution)?.merged_measure())
}
