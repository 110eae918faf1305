//! Finite-dimensional `ℓ_p` spaces, their duals and induced operator norms.
//!
//! A space is `ℝⁿ` equipped with the `p`-norm. Its dual is realized on the
//! same coordinates under the conjugate `q`-norm, with the pairing `(x, f)`
//! given by the coordinatewise dot product.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};

/// A norm exponent in `[1, ∞]`. Infinity is a distinct variant, never a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub const ONE: Exponent = Exponent::Finite(1.0);
    pub const TWO: Exponent = Exponent::Finite(2.0);

    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinite)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::Domain(format!("norm exponent must lie in [1, inf], got {p}")))
        }
    }

    /// `1/p`, with `1/∞ = 0`.
    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinite => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    pub fn is_one(self) -> bool {
        self == Exponent::ONE
    }

    pub fn is_two(self) -> bool {
        self == Exponent::TWO
    }

    /// The Hölder conjugate `q` with `1/p + 1/q = 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinite => Exponent::ONE,
            Exponent::Finite(1.0) => Exponent::Infinite,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    /// `p` as a float, `f64::INFINITY` for the infinite exponent.
    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinite => f64::INFINITY,
        }
    }
}

/// Free-function form of [`Exponent::conjugate`] taking a raw float.
pub fn conjugate_exponent(p: f64) -> Result<Exponent> {
    Ok(Exponent::new(p)?.conjugate())
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinite),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::Domain(format!("cannot parse norm exponent {s:?}")))?;
                Exponent::new(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => serializer.serialize_f64(*p),
            Exponent::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(p) => Exponent::new(p),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `ℝⁿ` under the `p`-norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PNormSpace {
    dim: usize,
    p: Exponent,
}

impl PNormSpace {
    pub fn new(dim: usize, p: Exponent) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("space dimension must be at least 1".into()));
        }
        // Re-validate in case the variant was constructed directly.
        let p = Exponent::new(p.as_f64())?;
        Ok(PNormSpace { dim, p })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(dim, Exponent::TWO)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    /// Exponent of the dual norm `‖·‖*`.
    pub fn q(&self) -> Exponent {
        self.p.conjugate()
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        p_norm(x, self.p)
    }

    pub fn dual_norm(&self, f: &[f64]) -> f64 {
        dual_norm(f, self.p)
    }
}

/// `(Σ|xᵢ|^p)^(1/p)`, or `max|xᵢ|` for `p = ∞`.
pub fn p_norm(x: &[f64], p: Exponent) -> f64 {
    match p {
        Exponent::Infinite => x.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Exponent::Finite(1.0) => x.iter().map(|v| v.abs()).sum(),
        Exponent::Finite(2.0) => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Exponent::Finite(p) => {
            let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                return 0.0;
            }
            let s: f64 = x.iter().map(|v| (v.abs() / scale).powf(p)).sum();
            scale * s.powf(1.0 / p)
        }
    }
}

/// Dual norm of `f ∈ B*` when `B` carries the `p`-norm: the `q`-norm of `f`.
pub fn dual_norm(f: &[f64], p: Exponent) -> f64 {
    p_norm(f, p.conjugate())
}

/// The dual pairing `(x, f) = f(x)`.
pub fn pair(f: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(f.len(), x.len())?;
    Ok(dot(f, x))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// A unit-`p`-norm vector `x` attaining `f(x) = ‖f‖*`.
///
/// The zero functional is attained everywhere; the first basis vector is returned.
pub fn holder_extremizer(f: &[f64], p: Exponent) -> Vec<f64> {
    let n = f.len();
    let mut x = vec![0.0; n];
    let fnorm = dual_norm(f, p);
    if fnorm == 0.0 {
        if n > 0 {
            x[0] = 1.0;
        }
        return x;
    }
    let sign = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
    match p {
        Exponent::Finite(1.0) => {
            let (k, _) = f.iter().enumerate().fold(
                (0, -1.0),
                |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best },
            );
            x[k] = sign(f[k]);
        }
        Exponent::Infinite => {
            for (xi, fi) in x.iter_mut().zip(f) {
                *xi = if *fi == 0.0 { 0.0 } else { sign(*fi) };
            }
        }
        Exponent::Finite(_) => {
            let q = p.conjugate().as_f64();
            for (xi, fi) in x.iter_mut().zip(f) {
                *xi = sign(*fi) * (fi.abs() / fnorm).powf(q - 1.0);
            }
        }
    }
    x
}

/// A certified bracket `[lower, upper]` around an induced operator norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormInterval {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

impl NormInterval {
    pub fn exact(value: f64) -> Self {
        NormInterval {
            lower: value,
            upper: value,
            exact: true,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Settings for the multi-start ascent that produces the lower endpoint.
#[derive(Debug, Clone, Copy)]
pub struct AscentConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig {
            restarts: 16,
            iterations: 200,
            seed: 0,
        }
    }
}

/// Relative padding applied to inexact upper endpoints to absorb rounding.
const UPPER_PAD: f64 = 1e-12;

/// Bracket for `sup{‖Mv‖_to : ‖v‖_from ≤ 1}`.
pub fn operator_norm(m: &DMatrix<f64>, from: Exponent, to: Exponent) -> Result<NormInterval> {
    operator_norm_with(m, from, to, AscentConfig::default())
}

pub fn operator_norm_with(
    m: &DMatrix<f64>,
    from: Exponent,
    to: Exponent,
    config: AscentConfig,
) -> Result<NormInterval> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "operator norm of a matrix with non-finite entries".into(),
        ));
    }
    if m.is_empty() {
        return Ok(NormInterval::exact(0.0));
    }
    if from.is_one() {
        return Ok(NormInterval::exact(max_column_norm(m, to)));
    }
    if to.is_infinite() {
        return Ok(NormInterval::exact(max_row_norm(m, from.conjugate())));
    }
    if from.is_two() && to.is_two() {
        return Ok(NormInterval::exact(spectral_norm(m)));
    }

    let (rows, cols) = m.shape();
    let (n, r) = (cols as f64, rows as f64);
    let mut upper = spectral_norm(m) * n.powf((0.5 - from.recip()).max(0.0)) * r.powf((to.recip() - 0.5).max(0.0));
    upper = upper.min(max_column_norm(m, to) * n.powf(1.0 - from.recip()));
    upper = upper.min(max_row_norm(m, from.conjugate()) * r.powf(to.recip()));
    if from == to {
        // Schur-type interpolation between the 1→1 and ∞→∞ norms.
        let t = from.recip();
        let one = max_column_norm(m, Exponent::ONE);
        let inf = max_row_norm(m, Exponent::ONE);
        upper = upper.min(one.powf(t) * inf.powf(1.0 - t));
    }
    upper *= 1.0 + UPPER_PAD;

    let lower = ascent_lower_bound(m, from, to, config);
    Ok(NormInterval {
        lower,
        upper: upper.max(lower),
        exact: false,
    })
}

fn max_column_norm(m: &DMatrix<f64>, to: Exponent) -> f64 {
    m.column_iter().map(|c| p_norm(c.as_slice(), to)).fold(0.0, f64::max)
}

fn max_row_norm(m: &DMatrix<f64>, q: Exponent) -> f64 {
    m.row_iter()
        .map(|r| {
            let row: Vec<f64> = r.iter().copied().collect();
            p_norm(&row, q)
        })
        .fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

fn ratio(m: &DMatrix<f64>, v: &DVector<f64>, from: Exponent, to: Exponent) -> f64 {
    let den = p_norm(v.as_slice(), from);
    if den == 0.0 {
        return 0.0;
    }
    p_norm((m * v).as_slice(), to) / den
}

/// Subgradient of `‖w‖_r`.
fn norm_gradient(w: &[f64], r: Exponent) -> Vec<f64> {
    let sign = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    match r {
        Exponent::Infinite => {
            let mut g = vec![0.0; w.len()];
            if let Some((k, _)) = w.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())) {
                g[k] = sign(w[k]);
            }
            g
        }
        Exponent::Finite(1.0) => w.iter().map(|v| sign(*v)).collect(),
        Exponent::Finite(p) => {
            let norm = p_norm(w, r);
            if norm == 0.0 {
                return vec![0.0; w.len()];
            }
            w.iter().map(|v| sign(*v) * (v.abs() / norm).powf(p - 1.0)).collect()
        }
    }
}

fn normalize(v: DVector<f64>, p: Exponent) -> Option<DVector<f64>> {
    let n = p_norm(v.as_slice(), p);
    (n > 0.0 && n.is_finite()).then(|| v / n)
}

fn ascent_lower_bound(m: &DMatrix<f64>, from: Exponent, to: Exponent, config: AscentConfig) -> f64 {
    let n = m.ncols();
    let mut best = 0.0_f64;

    for i in 0..n {
        best = best.max(ratio(
            m,
            &DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 }),
            from,
            to,
        ));
    }
    // Sign-pattern vertices; patterns and their negations give the same ratio.
    if n <= 12 {
        for mask in 0u32..(1 << (n - 1)) {
            let v = DVector::from_fn(n, |j, _| if mask >> j & 1 == 1 { -1.0 } else { 1.0 });
            best = best.max(ratio(m, &v, from, to));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        let start = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let Some(mut v) = normalize(start, from) else { continue };
        let mut value = ratio(m, &v, from, to);
        let mut step = 0.5;
        for _ in 0..config.iterations {
            let w = m * &v;
            let wn = p_norm(w.as_slice(), to);
            if wn == 0.0 {
                break;
            }
            let gw = DVector::from_vec(norm_gradient(w.as_slice(), to));
            let gv = DVector::from_vec(norm_gradient(v.as_slice(), from));
            let grad = m.transpose() * gw / wn - gv / p_norm(v.as_slice(), from);
            let gnorm = grad.norm();
            if !(gnorm > 0.0 && gnorm.is_finite()) {
                break;
            }
            let candidate = normalize(&v + grad * (step * v.norm() / gnorm), from);
            match candidate {
                Some(c) if ratio(m, &c, from, to) > value => {
                    value = ratio(m, &c, from, to);
                    v = c;
                }
                _ => {
                    step *= 0.5;
                    if step < 1e-12 {
                        break;
                    }
                }
            }
        }
        best = best.max(value);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn e(p: f64) -> Exponent {
        Exponent::new(p).unwrap()
    }

    #[test]
    fn conjugates() {
        assert_eq!(conjugate_exponent(2.0).unwrap(), Exponent::TWO);
        assert_eq!(conjugate_exponent(1.0).unwrap(), Exponent::Infinite);
        assert_eq!(Exponent::Infinite.conjugate(), Exponent::ONE);
        // 1/4 + 1/q = 1  =>  q = 4/3
        assert_eq!(conjugate_exponent(4.0).unwrap(), Exponent::Finite(4.0 / 3.0));
        assert!(matches!(conjugate_exponent(0.5), Err(Error::Domain(_))));
        assert!(conjugate_exponent(f64::NAN).is_err());
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinite);
        assert_eq!("1.5".parse::<Exponent>().unwrap(), Exponent::Finite(1.5));
        assert!("0.9".parse::<Exponent>().is_err());
        let json = serde_json::to_string(&Exponent::Infinite).unwrap();
        assert_eq!(json, "\"inf\"");
        let back: Exponent = serde_json::from_str("3").unwrap();
        assert_eq!(back, Exponent::Finite(3.0));
    }

    #[test]
    fn norms() {
        assert_eq!(p_norm(&[3.0, 4.0], Exponent::TWO), 5.0);
        assert_eq!(p_norm(&[1.0, -2.0], Exponent::Infinite), 2.0);
        assert_relative_eq!(
            p_norm(&[1.0, 1.0, 1.0], e(3.0)),
            3f64.powf(1.0 / 3.0),
            max_relative = 1e-15
        );
        assert_eq!(p_norm(&[0.0, 0.0], e(1.5)), 0.0);
    }

    #[test]
    fn pairing() {
        assert_eq!(pair(&[1.0, 0.0], &[3.0, 7.0]).unwrap(), 3.0);
        assert_eq!(pair(&[0.0, 0.0], &[3.0, 7.0]).unwrap(), 0.0);
        assert_eq!(pair(&[1.0, 2.0], &[2.0, -1.0]).unwrap(), 0.0);
        assert_eq!(pair(&[1.0], &[1.0, 2.0]), Err(Error::Shape { expected: 1, found: 2 }));
    }

    #[test]
    fn dual_norms() {
        assert_eq!(dual_norm(&[1.0, -2.0], Exponent::ONE), 2.0);
        assert_eq!(dual_norm(&[3.0, 4.0], Exponent::TWO), 5.0);
        assert_relative_eq!(dual_norm(&[1.0, 1.0], e(4.0)), 2f64.powf(0.75), max_relative = 1e-14);
        assert_eq!(dual_norm(&[0.0, 0.0], e(3.0)), 0.0);
    }

    #[test]
    fn extremizer_attains_dual_norm() {
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let p = e(p);
            let f = [0.3, -1.2, 0.7];
            let x = holder_extremizer(&f, p);
            assert_relative_eq!(p_norm(&x, p), 1.0, max_relative = 1e-12);
            assert_relative_eq!(dot(&f, &x), dual_norm(&f, p), max_relative = 1e-12);
        }
        assert_eq!(holder_extremizer(&[0.0, 0.0], Exponent::TWO), vec![1.0, 0.0]);
    }

    #[test]
    fn exact_operator_norms() {
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let n = operator_norm(&d, Exponent::TWO, Exponent::TWO).unwrap();
        assert!(n.exact);
        assert_relative_eq!(n.lower, 3.0, max_relative = 1e-14);
        assert_eq!(n.lower, n.upper);

        let id = DMatrix::<f64>::identity(2, 2);
        assert_eq!(
            operator_norm(&id, Exponent::ONE, Exponent::ONE).unwrap(),
            NormInterval::exact(1.0)
        );
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -4.0, 2.0, 0.5]);
        // to = ∞: max row 1-norm when from = ∞
        assert_eq!(
            operator_norm(&m, Exponent::Infinite, Exponent::Infinite).unwrap(),
            NormInterval::exact(5.0)
        );
    }

    #[test]
    fn inexact_bracket_is_ordered() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let n = operator_norm(&m, e(4.0), e(3.0)).unwrap();
        assert!(!n.exact);
        assert!(n.lower <= n.upper);
        assert!(n.lower > 0.0);
    }

    #[test]
    fn non_finite_matrix_rejected() {
        let m = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(
            operator_norm(&m, Exponent::TWO, Exponent::TWO),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn space_validation() {
        assert!(PNormSpace::new(0, Exponent::TWO).is_err());
        assert!(PNormSpace::new(2, Exponent::Finite(0.5)).is_err());
        assert_eq!(PNormSpace::new(2, Exponent::ONE).unwrap().q(), Exponent::Infinite);
    }
}
