//! Hilbert-space reduction through the Riesz map.
//!
//! With inner product `(x, y)_H = xᵀ G y`, the Riesz map is `T x = G x`. The
//! second-moment operator `S: H* → H` composed with `T` recovers the Hilbert
//! covariance operator `S_H`, and pushing `μ` forward through `T` turns the
//! dual-space bound into the Hilbert-space one.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bounds::{banach_dual_bound, BoundReport, Inequality, PreparedBound};
use crate::covop::{transported_moment_matrix, CovarianceOperator};
use crate::error::{check_dim, Error, Result};
use crate::measure::{pushforward, DiscreteMeasure, Role};
use crate::space::{dot, PNormSpace};

/// Relative tolerance for the reduction identities.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RieszMap {
    gram: DMatrix<f64>,
    gram_inverse: DMatrix<f64>,
    identity: bool,
}

/// The Riesz map of `(ℝⁿ, (·,·)_G)`; `gram = None` selects the standard inner product.
pub fn riesz(space: PNormSpace, gram: Option<DMatrix<f64>>) -> Result<RieszMap> {
    if !space.p().is_two() {
        return Err(Error::Applicability(format!(
            "the Riesz map needs a Hilbert norm (p = 2), space has p = {}",
            space.p()
        )));
    }
    let n = space.dim();
    let Some(g) = gram else {
        return Ok(RieszMap {
            gram: DMatrix::identity(n, n),
            gram_inverse: DMatrix::identity(n, n),
            identity: true,
        });
    };
    if g.nrows() != g.ncols() {
        return Err(Error::Shape {
            expected: g.nrows(),
            found: g.ncols(),
        });
    }
    check_dim(n, g.nrows())?;
    if g.iter().any(|v| !v.is_finite()) || (&g - g.transpose()).amax() > 1e-12 * g.amax() {
        return Err(Error::Domain("gram matrix must be finite and symmetric".into()));
    }
    let eig = SymmetricEigen::new(g.clone());
    let smallest = eig.eigenvalues.min();
    if !(smallest > 1e-12 * eig.eigenvalues.max()) {
        return Err(Error::Domain(format!(
            "gram matrix is not positive definite (smallest eigenvalue {smallest:e})"
        )));
    }
    let inv =
        &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l)) * eig.eigenvectors.transpose();
    let identity = g == DMatrix::identity(n, n);
    Ok(RieszMap {
        gram: g,
        gram_inverse: inv,
        identity,
    })
}

impl RieszMap {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `T x`, the functional `y ↦ (y, x)_H`.
    pub fn apply(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(&self.gram * DVector::from_column_slice(x))
    }

    /// `(x, y)_H = xᵀ G y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(dot(x, self.apply(y)?.as_slice()))
    }

    /// `‖x‖_H = √(xᵀ G x)`.
    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        if self.identity {
            check_dim(self.dim(), x.len())?;
            return Ok(dot(x, x).sqrt());
        }
        Ok(self.inner(x, x)?.sqrt())
    }

    /// `‖f‖* = √(fᵀ G⁻¹ f)`, the dual of the `G`-norm.
    pub fn dual_norm(&self, f: &[f64]) -> Result<f64> {
        check_dim(self.dim(), f.len())?;
        if self.identity {
            return Ok(dot(f, f).sqrt());
        }
        let v = &self.gram_inverse * DVector::from_column_slice(f);
        Ok(dot(f, v.as_slice()).max(0.0).sqrt())
    }
}

/// `S_H = Σᵢ wᵢ xᵢ (G xᵢ)ᵀ`, built directly from `(S_H y, z)_H = ∫(x,y)_H (x,z)_H μ(dx)`.
pub fn hilbert_operator_matrix(mu: &DiscreteMeasure, t: &RieszMap) -> Result<DMatrix<f64>> {
    check_dim(t.dim(), mu.dim())?;
    Ok(transported_moment_matrix(mu, |x| &t.gram * x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorDeviation {
    /// `max_y |(STy,y)_H − (S_H y,y)_H| / (trace(S_H)·‖y‖²_H)` over probe vectors.
    pub quadratic: f64,
    /// `max|ST − S_H|` entrywise, relative to `max|S_H|`.
    pub entrywise: f64,
}

fn relative(diff: f64, scale: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Compare `S T` against `S_H` on the standard basis and 64 seeded probe vectors.
pub fn verify_st_equals_sh(mu: &DiscreteMeasure, t: &RieszMap) -> Result<OperatorDeviation> {
    if !mu.space().p().is_two() {
        return Err(Error::Applicability("the reduction needs a p = 2 measure".into()));
    }
    check_dim(t.dim(), mu.dim())?;
    let n = mu.dim();
    let s = CovarianceOperator::build(mu)?;
    let st = s.matrix() * &t.gram;
    let sh = hilbert_operator_matrix(mu, t)?;

    let entrywise = relative((&st - &sh).amax(), sh.amax());

    let trace = (s.matrix() * &t.gram).trace();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let probes = (0..n)
        .map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 }))
        .chain((0..64).map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))));
    let mut quadratic = 0.0_f64;
    for y in probes {
        let lhs = t.inner((&st * &y).as_slice(), y.as_slice())?;
        let rhs: f64 = mu
            .iter()
            .map(|(x, w)| {
                let v = t.inner(x.as_slice(), y.as_slice()).expect("dimensions checked");
                w * v * v
            })
            .sum();
        let scale = trace * t.inner(y.as_slice(), y.as_slice())?;
        quadratic = quadratic.max(relative((lhs - rhs).abs(), scale));
    }
    Ok(OperatorDeviation { quadratic, entrywise })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentTransport {
    /// `∫‖x‖²_H μ(dx)`.
    pub lhs: f64,
    /// `∫(‖f‖*)² P*(df)` with `P* = μ ∘ T⁻¹`.
    pub rhs: f64,
    pub equal: bool,
}

/// `∫‖x‖² μ(dx) = ∫(‖Tx‖*)² μ(dx) = ∫(‖f‖*)² P*(df)`.
pub fn isometry_pushforward_moment(mu: &DiscreteMeasure, t: &RieszMap) -> Result<MomentTransport> {
    if !mu.space().p().is_two() {
        return Err(Error::Applicability("the reduction needs a p = 2 measure".into()));
    }
    check_dim(t.dim(), mu.dim())?;
    let pstar = pushforward(mu, &t.gram, Role::Dual)?;
    let (lhs, rhs) = if t.identity {
        (mu.second_moment(), pstar.second_moment())
    } else {
        let lhs = mu
            .iter()
            .map(|(x, w)| w * t.norm(x.as_slice()).expect("dimensions checked").powi(2))
            .sum();
        let rhs = pstar
            .iter()
            .map(|(f, v)| v * t.dual_norm(f.as_slice()).expect("dimensions checked").powi(2))
            .sum();
        (lhs, rhs)
    };
    let equal = relative((lhs - rhs).abs(), lhs.abs().max(rhs.abs())) <= EQUIVALENCE_TOLERANCE;
    Ok(MomentTransport { lhs, rhs, equal })
}

/// Side-by-side dual-space and Hilbert-space reports at one ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equivalence {
    pub epsilon: f64,
    pub banach_forward: BoundReport,
    pub rao_forward: BoundReport,
    pub banach_inverse: BoundReport,
    pub rao_inverse: BoundReport,
    /// Some atom's statistic equals ε; only right sides are compared.
    pub boundary_sensitive: bool,
    pub forward_rhs_deviation: f64,
    pub inverse_rhs_deviation: f64,
    pub lhs_agree: bool,
}

impl Equivalence {
    pub fn holds(&self) -> bool {
        self.forward_rhs_deviation <= EQUIVALENCE_TOLERANCE
            && self.inverse_rhs_deviation <= EQUIVALENCE_TOLERANCE
            && (self.boundary_sensitive || self.lhs_agree)
    }
}

fn rel_dev(a: f64, b: f64) -> f64 {
    relative((a - b).abs(), a.abs().max(b.abs()))
}

/// Reduction of the dual-space bounds to the Hilbert-space ones under the
/// standard inner product, for a centered `p = 2` measure.
#[derive(Debug, Clone)]
pub struct Reduction {
    s: CovarianceOperator,
    pstar: DiscreteMeasure,
    rao_forward: PreparedBound,
    rao_inverse: PreparedBound,
    banach_inverse: PreparedBound,
}

impl Reduction {
    pub fn new(mu: &DiscreteMeasure) -> Result<Self> {
        if !mu.space().p().is_two() {
            return Err(Error::Applicability("the reduction needs a p = 2 measure".into()));
        }
        let t = riesz(mu.space(), None)?;
        Ok(Reduction {
            s: CovarianceOperator::build(mu)?,
            pstar: pushforward(mu, t.matrix(), Role::Dual)?,
            rao_forward: PreparedBound::new(Inequality::RaoForward, mu, None)?,
            rao_inverse: PreparedBound::new(Inequality::RaoInverse, mu, None)?,
            banach_inverse: PreparedBound::new(Inequality::BanachMahalanobis, mu, None)?,
        })
    }

    pub fn at(&self, epsilon: f64) -> Result<Equivalence> {
        let banach_forward = banach_dual_bound(&self.s, &self.pstar, epsilon)?;
        let rao_forward = self.rao_forward.evaluate(epsilon)?;
        let banach_inverse = self.banach_inverse.evaluate(epsilon)?;
        let rao_inverse = self.rao_inverse.evaluate(epsilon)?;
        let boundary_sensitive = self.rao_forward.on_boundary(epsilon) || self.rao_inverse.on_boundary(epsilon);
        let lhs_agree = rel_dev(banach_forward.lhs, rao_forward.lhs) <= EQUIVALENCE_TOLERANCE
            && rel_dev(banach_inverse.lhs, rao_inverse.lhs) <= EQUIVALENCE_TOLERANCE;
        Ok(Equivalence {
            epsilon,
            banach_forward,
            rao_forward,
            banach_inverse,
            rao_inverse,
            boundary_sensitive,
            forward_rhs_deviation: rel_dev(banach_forward.rhs, rao_forward.rhs),
            inverse_rhs_deviation: rel_dev(banach_inverse.rhs, rao_inverse.rhs),
            lhs_agree,
        })
    }
}

pub fn bound_equivalence(mu: &DiscreteMeasure, epsilon: f64) -> Result<Equivalence> {
    Reduction::new(mu)?.at(epsilon)
}

/// `‖S⁻¹‖` computed from the dual-space operator and `‖S_H⁻¹‖` from the
/// Hilbert-space construction.
pub fn inverse_norms(mu: &DiscreteMeasure) -> Result<(f64, f64)> {
    let t = riesz(mu.space(), None)?;
    let banach = CovarianceOperator::build(mu)?.invert()?.norm_interval().upper;
    let sh = hilbert_operator_matrix(mu, &t)?;
    let hilbert = CovarianceOperator::from_parts(sh, mu.space(), mu.second_moment())?
        .invert()?
        .norm_interval()
        .upper;
    Ok((banach, hilbert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Exponent;

    fn basis(n: usize) -> DiscreteMeasure {
        DiscreteMeasure::signed_basis(PNormSpace::euclidean(n).unwrap())
    }

    #[test]
    fn riesz_identity() {
        let space = PNormSpace::euclidean(2).unwrap();
        let t = riesz(space, None).unwrap();
        let tx = t.apply(&[1.0, 0.0]).unwrap();
        assert_eq!(tx, DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(t.dual_norm(tx.as_slice()).unwrap(), 1.0);
        assert_eq!(t.inner(&[2.0, 3.0], &[-1.0, 4.0]).unwrap(), 10.0);
    }

    #[test]
    fn riesz_weighted_isometry() {
        let space = PNormSpace::euclidean(2).unwrap();
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let t = riesz(space, Some(g)).unwrap();
        for x in [[1.0, 0.0], [0.3, -0.7], [2.0, 5.0]] {
            let tx = t.apply(&x).unwrap();
            let lhs = t.dual_norm(tx.as_slice()).unwrap();
            let rhs = t.norm(&x).unwrap();
            assert!((lhs - rhs).abs() <= 1e-14 * rhs);
        }
        // ‖(0,1)‖_G = 2
        assert_eq!(t.norm(&[0.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn riesz_errors() {
        let l1 = PNormSpace::new(2, Exponent::ONE).unwrap();
        assert!(matches!(riesz(l1, None), Err(Error::Applicability(_))));
        let space = PNormSpace::euclidean(2).unwrap();
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(riesz(space, Some(indefinite)), Err(Error::Domain(_))));
    }

    #[test]
    fn st_equals_sh_examples() {
        let t = riesz(PNormSpace::euclidean(2).unwrap(), None).unwrap();
        let d = verify_st_equals_sh(&basis(2), &t).unwrap();
        assert_eq!(d.entrywise, 0.0);
        assert!(d.quadratic <= 1e-15);

        let origin =
            DiscreteMeasure::point_mass(PNormSpace::euclidean(2).unwrap(), Role::Primal, DVector::zeros(2)).unwrap();
        let d = verify_st_equals_sh(&origin, &t).unwrap();
        assert_eq!(
            d,
            OperatorDeviation {
                quadratic: 0.0,
                entrywise: 0.0
            }
        );

        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let tg = riesz(PNormSpace::euclidean(2).unwrap(), Some(g)).unwrap();
        let mu = DiscreteMeasure::from_rows(
            PNormSpace::euclidean(2).unwrap(),
            Role::Primal,
            &[vec![1.0, 0.3], vec![-0.4, 2.0], vec![0.1, -1.1]],
            &[0.2, 0.5, 0.3],
        )
        .unwrap();
        let d = verify_st_equals_sh(&mu, &tg).unwrap();
        assert!(d.quadratic <= 1e-12 && d.entrywise <= 1e-12, "{d:?}");
    }

    #[test]
    fn moment_transport() {
        let t = riesz(PNormSpace::euclidean(2).unwrap(), None).unwrap();
        let m = isometry_pushforward_moment(&basis(2), &t).unwrap();
        assert_eq!((m.lhs, m.rhs, m.equal), (1.0, 1.0, true));
        let l1 = DiscreteMeasure::signed_basis(PNormSpace::new(2, Exponent::ONE).unwrap());
        assert!(isometry_pushforward_moment(&l1, &t).is_err());
    }

    #[test]
    fn equivalence_examples() {
        let e = bound_equivalence(&basis(2), 0.4).unwrap();
        assert_eq!(e.banach_forward.rhs, 2.5);
        assert_eq!(e.rao_forward.rhs, 2.5);
        assert_eq!((e.banach_forward.lhs, e.rao_forward.lhs), (1.0, 1.0));
        assert!(e.holds() && !e.boundary_sensitive);

        let e = bound_equivalence(&basis(2), 1.0).unwrap();
        assert!((e.banach_inverse.rhs - 4.0).abs() < 1e-13);
        assert!((e.rao_inverse.rhs - 4.0).abs() < 1e-13);
        assert_eq!((e.banach_inverse.lhs, e.rao_inverse.lhs), (1.0, 1.0));
        assert!(e.holds());

        // (SX,X) = 0.5 on every atom: ≥ counts it, > does not.
        let e = bound_equivalence(&basis(2), 0.5).unwrap();
        assert!(e.boundary_sensitive);
        assert_eq!((e.banach_forward.lhs, e.rao_forward.lhs), (1.0, 0.0));
        assert!(e.forward_rhs_deviation <= 1e-12);
        assert!(e.holds());
    }

    #[test]
    fn inverse_norm_paths_agree() {
        let (a, b) = inverse_norms(&basis(3)).unwrap();
        assert_eq!(a, b);
        assert!((a - 3.0).abs() < 1e-13);
    }
}
