//! The second-moment operator `S: B* → B` of a discrete measure.
//!
//! For a step measure with atoms `xᵢ` and weights `wᵢ`, the operator acts as
//! `Sf = Σᵢ wᵢ f(xᵢ) xᵢ`, so its matrix in standard coordinates is
//! `M = Σᵢ wᵢ xᵢ xᵢᵀ` and `(Sf, g) = fᵀ M g = Σᵢ wᵢ f(xᵢ) g(xᵢ)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::measure::{DiscreteMeasure, Role};
use crate::space::{dot, operator_norm, p_norm, Exponent, NormInterval, PNormSpace};

/// Positive-definiteness threshold relative to the trace.
pub const PD_RELATIVE_THRESHOLD: f64 = 1e-10;
/// Largest accepted `max|M M⁻¹ − I|`.
pub const INVERSE_RESIDUAL_LIMIT: f64 = 1e-8;
/// Relative slack on the boundedness and Cauchy comparisons.
const COMPARE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorJson", into = "OperatorJson")]
pub struct CovarianceOperator {
    matrix: DMatrix<f64>,
    space: PNormSpace,
    second_moment: f64,
}

/// Canonical atom order: lexicographic on coordinates, then weight.
fn canonical_order(mu: &DiscreteMeasure) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..mu.len()).collect();
    idx.sort_by(|&a, &b| {
        let (xa, xb) = (&mu.atoms()[a], &mu.atoms()[b]);
        xa.iter()
            .zip(xb.iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(mu.weights()[a].total_cmp(&mu.weights()[b]))
    });
    idx
}

/// Pairwise (tree) sum of `wᵢ xᵢ uᵢᵀ` over `order`, where `uᵢ = transform(xᵢ)`.
fn tree_sum<F>(mu: &DiscreteMeasure, order: &[usize], transform: &F) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    match order.len() {
        0 => DMatrix::zeros(mu.dim(), mu.dim()),
        1 => {
            let (x, w) = (&mu.atoms()[order[0]], mu.weights()[order[0]]);
            let u = transform(x);
            // w·(xᵢuⱼ) keeps the product exactly symmetric when u = x.
            DMatrix::from_fn(x.len(), x.len(), |i, j| w * (x[i] * u[j]))
        }
        n => {
            let (left, right) = order.split_at(n / 2);
            tree_sum(mu, left, transform) + tree_sum(mu, right, transform)
        }
    }
}

/// `Σᵢ wᵢ xᵢ transform(xᵢ)ᵀ` with canonical ordering and tree summation.
pub(crate) fn transported_moment_matrix<F>(mu: &DiscreteMeasure, transform: F) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    tree_sum(mu, &canonical_order(mu), &transform)
}

/// `M = Σᵢ wᵢ xᵢ xᵢᵀ`.
pub(crate) fn second_moment_matrix(mu: &DiscreteMeasure) -> DMatrix<f64> {
    transported_moment_matrix(mu, DVector::clone)
}

impl CovarianceOperator {
    /// Build `S` from a primal measure.
    pub fn build(mu: &DiscreteMeasure) -> Result<Self> {
        if mu.role() != Role::Primal {
            return Err(Error::Role {
                expected: "primal",
                found: mu.role().name(),
            });
        }
        Ok(CovarianceOperator {
            matrix: second_moment_matrix(mu),
            space: mu.space(),
            second_moment: mu.second_moment(),
        })
    }

    pub fn from_parts(matrix: DMatrix<f64>, space: PNormSpace, second_moment: f64) -> Result<Self> {
        OperatorJson {
            dim: space.dim(),
            p: space.p(),
            matrix: matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
            second_moment,
        }
        .try_into()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn space(&self) -> PNormSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `∫‖x‖² μ(dx)` of the generating measure, in the primal norm.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// `trace(M) = ∫‖x‖₂² μ(dx)`; differs from [`Self::second_moment`] unless `p = 2`.
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn apply(&self, f: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.dim(), f.len())?;
        Ok(&self.matrix * DVector::from_column_slice(f))
    }

    /// `(Sf, g) = fᵀ M g`.
    pub fn quad_form(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        let sf = self.apply(f)?;
        check_dim(self.dim(), g.len())?;
        Ok(dot(sf.as_slice(), g))
    }

    /// `‖S(a f₁ + b f₂) − a S f₁ − b S f₂‖_p`.
    pub fn linearity_check(&self, f1: &[f64], f2: &[f64], a: f64, b: f64) -> Result<f64> {
        check_dim(self.dim(), f1.len())?;
        check_dim(self.dim(), f2.len())?;
        let combo: Vec<f64> = f1.iter().zip(f2).map(|(u, v)| a * u + b * v).collect();
        let lhs = self.apply(&combo)?;
        let rhs = self.apply(f1)? * a + self.apply(f2)? * b;
        Ok(p_norm((lhs - rhs).as_slice(), self.space.p()))
    }

    /// `‖Sf‖ ≤ ‖f‖* ∫‖x‖² μ(dx)`.
    pub fn boundedness_check(&self, f: &[f64]) -> Result<Comparison> {
        let lhs = self.space.norm(self.apply(f)?.as_slice());
        let rhs = self.space.dual_norm(f) * self.second_moment;
        Ok(Comparison::new(lhs, rhs))
    }

    /// Eigendecomposition-based inverse; fails unless the smallest eigenvalue exceeds
    /// `1e-10 · trace(M)`.
    pub fn invert(&self) -> Result<InverseOperator> {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let smallest = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let threshold = PD_RELATIVE_THRESHOLD * self.trace();
        if !(smallest > threshold) {
            return Err(Error::NotPositiveDefinite { smallest, threshold });
        }
        let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
        let mut inverse = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
        // Symmetrize away rounding asymmetry.
        inverse = (&inverse + inverse.transpose()) * 0.5;

        let n = self.dim();
        let residual = (&self.matrix * &inverse - DMatrix::<f64>::identity(n, n)).amax();
        if residual > INVERSE_RESIDUAL_LIMIT {
            return Err(Error::IllConditioned { residual });
        }
        let norm_interval = operator_norm(&inverse, self.space.p(), self.space.q())?;
        Ok(InverseOperator {
            matrix: inverse,
            space: self.space,
            norm_interval,
            smallest_eigenvalue: smallest,
            residual,
        })
    }
}

/// `Sf = Σᵢ wᵢ f(xᵢ) xᵢ` evaluated atom by atom.
pub fn atom_apply(mu: &DiscreteMeasure, f: &[f64]) -> Result<DVector<f64>> {
    check_dim(mu.dim(), f.len())?;
    Ok(mu.iter().fold(DVector::zeros(mu.dim()), |acc, (x, w)| {
        acc + x * (w * dot(f, x.as_slice()))
    }))
}

/// `Σᵢ wᵢ f(xᵢ) g(xᵢ)` evaluated atom by atom.
pub fn atom_quad_form(mu: &DiscreteMeasure, f: &[f64], g: &[f64]) -> Result<f64> {
    check_dim(mu.dim(), f.len())?;
    check_dim(mu.dim(), g.len())?;
    Ok(mu
        .iter()
        .map(|(x, w)| w * dot(f, x.as_slice()) * dot(g, x.as_slice()))
        .sum())
}

/// Outcome of an inequality `lhs ≤ rhs` checked with a relative slack of `1e-10`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Comparison {
    fn new(lhs: f64, rhs: f64) -> Self {
        Comparison {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + COMPARE_SLACK),
        }
    }
}

/// The estimate `‖Sₙf − Sₘf‖ ≤ ‖f‖* Σᵢ wᵢ (‖xᵢⁿ‖ + ‖xᵢᵐ‖) ‖xᵢⁿ − xᵢᵐ‖`
/// for two step approximations of the same sample, coupled atom by atom.
pub fn cauchy_estimate(mu_n: &DiscreteMeasure, mu_m: &DiscreteMeasure, f: &[f64]) -> Result<Comparison> {
    if mu_n.len() != mu_m.len() {
        return Err(Error::Coupling(format!(
            "measures have {} and {} atoms",
            mu_n.len(),
            mu_m.len()
        )));
    }
    if mu_n.space() != mu_m.space() {
        return Err(Error::Coupling("measures live on different spaces".into()));
    }
    if mu_n.weights() != mu_m.weights() {
        return Err(Error::Coupling("atom weights differ".into()));
    }
    let space = mu_n.space();
    let sn = CovarianceOperator::build(mu_n)?;
    let sm = CovarianceOperator::build(mu_m)?;
    let lhs = space.norm((sn.apply(f)? - sm.apply(f)?).as_slice());
    let integral: f64 = mu_n
        .iter()
        .zip(mu_m.atoms())
        .map(|((xn, w), xm)| {
            w * (space.norm(xn.as_slice()) + space.norm(xm.as_slice())) * space.norm((xn - xm).as_slice())
        })
        .sum();
    Ok(Comparison::new(lhs, space.dual_norm(f) * integral))
}

/// `S⁻¹: B → B*` with a certified bracket for its `p → q` norm.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseOperator {
    matrix: DMatrix<f64>,
    space: PNormSpace,
    norm_interval: NormInterval,
    smallest_eigenvalue: f64,
    residual: f64,
}

impl InverseOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn space(&self) -> PNormSpace {
        self.space
    }

    /// Bracket for `‖S⁻¹‖` as an operator from `(ℝⁿ, ‖·‖_p)` to `(ℝⁿ, ‖·‖_q)`.
    pub fn norm_interval(&self) -> NormInterval {
        self.norm_interval
    }

    /// `max|M M⁻¹ − I|` at construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.smallest_eigenvalue
    }

    pub fn apply(&self, y: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.space.dim(), y.len())?;
        Ok(&self.matrix * DVector::from_column_slice(y))
    }

    /// `(S⁻¹y, y)`, clamped to zero when negative by no more than `1e-10·‖y‖₂²·‖M⁻¹‖₂`.
    pub fn mahalanobis(&self, y: &[f64]) -> Result<f64> {
        let v = dot(self.apply(y)?.as_slice(), y);
        let y2 = p_norm(y, Exponent::TWO).powi(2);
        let tol = 1e-10 * y2 / self.smallest_eigenvalue;
        Ok(if v < 0.0 && v >= -tol { 0.0 } else { v })
    }
}

/// `∫(x, S⁻¹y)² μ(dx)` evaluated atom by atom; equals `(S⁻¹y, y)` when `S` is built from `mu`.
pub fn atom_mahalanobis(mu: &DiscreteMeasure, inverse: &InverseOperator, y: &[f64]) -> Result<f64> {
    let f = inverse.apply(y)?;
    atom_quad_form(mu, f.as_slice(), f.as_slice())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorJson {
    dim: usize,
    p: Exponent,
    matrix: Vec<Vec<f64>>,
    second_moment: f64,
}

impl TryFrom<OperatorJson> for CovarianceOperator {
    type Error = Error;

    fn try_from(raw: OperatorJson) -> Result<Self> {
        let space = PNormSpace::new(raw.dim, raw.p)?;
        check_dim(raw.dim, raw.matrix.len())?;
        for row in &raw.matrix {
            check_dim(raw.dim, row.len())?;
        }
        let flat: Vec<f64> = raw.matrix.iter().flatten().copied().collect();
        if flat.iter().any(|v| !v.is_finite()) || !(raw.second_moment >= 0.0 && raw.second_moment.is_finite()) {
            return Err(Error::Domain(
                "operator entries and second moment must be finite".into(),
            ));
        }
        let matrix = DMatrix::from_row_slice(raw.dim, raw.dim, &flat);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::Domain(format!(
                "operator matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(CovarianceOperator {
            matrix,
            space,
            second_moment: raw.second_moment,
        })
    }
}

impl From<CovarianceOperator> for OperatorJson {
    fn from(s: CovarianceOperator) -> Self {
        OperatorJson {
            dim: s.space.dim(),
            p: s.space.p(),
            matrix: s.matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
            second_moment: s.second_moment,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn r(n: usize) -> PNormSpace {
        PNormSpace::euclidean(n).unwrap()
    }

    #[test]
    fn build_examples() {
        let s = CovarianceOperator::build(&DiscreteMeasure::signed_basis(r(2))).unwrap();
        assert_eq!(s.matrix(), &(DMatrix::identity(2, 2) * 0.5));

        let origin = DiscreteMeasure::point_mass(r(2), Role::Primal, DVector::zeros(2)).unwrap();
        assert_eq!(
            CovarianceOperator::build(&origin).unwrap().matrix(),
            &DMatrix::zeros(2, 2)
        );

        let single = DiscreteMeasure::from_rows(r(2), Role::Primal, &[vec![1.0, 2.0]], &[1.0]).unwrap();
        let s = CovarianceOperator::build(&single).unwrap();
        assert_eq!(s.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert_eq!(s.quad_form(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);

        let dual = DiscreteMeasure::signed_basis(r(2)).with_role(Role::Dual);
        assert!(matches!(CovarianceOperator::build(&dual), Err(Error::Role { .. })));
    }

    #[test]
    fn quad_form_examples() {
        let s = CovarianceOperator::build(&DiscreteMeasure::signed_basis(r(2))).unwrap();
        assert_eq!(s.quad_form(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(s.quad_form(&[0.0, 0.0], &[0.3, -2.0]).unwrap(), 0.0);
        assert!(matches!(s.quad_form(&[1.0], &[1.0, 0.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn linearity_trivial_cases() {
        let s = CovarianceOperator::build(&DiscreteMeasure::signed_basis(r(2))).unwrap();
        assert_eq!(s.linearity_check(&[1.0, 2.0], &[3.0, 4.0], 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(s.linearity_check(&[1.0, 2.0], &[3.0, 4.0], 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn boundedness_examples() {
        let s = CovarianceOperator::build(&DiscreteMeasure::signed_basis(r(2))).unwrap();
        let c = s.boundedness_check(&[1.0, 0.0]).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (0.5, 1.0, true));
        let c = s.boundedness_check(&[0.0, 0.0]).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (0.0, 0.0, true));
    }

    #[test]
    fn cauchy_identical_and_uncoupled() {
        let mu = DiscreteMeasure::signed_basis(r(2));
        let c = cauchy_estimate(&mu, &mu, &[0.3, 0.4]).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (0.0, 0.0, true));
        let other = DiscreteMeasure::signed_basis(r(3));
        assert!(matches!(
            cauchy_estimate(&mu, &other, &[1.0, 0.0]),
            Err(Error::Coupling(_))
        ));
        let reweighted = DiscreteMeasure::from_rows(
            r(2),
            Role::Primal,
            &[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            &[0.4, 0.1, 0.25, 0.25],
        )
        .unwrap();
        assert!(matches!(
            cauchy_estimate(&mu, &reweighted, &[1.0, 0.0]),
            Err(Error::Coupling(_))
        ));
    }

    #[test]
    fn invert_examples() {
        let s = CovarianceOperator::build(&DiscreteMeasure::signed_basis(r(2))).unwrap();
        let inv = s.invert().unwrap();
        assert_eq!(inv.matrix(), &(DMatrix::identity(2, 2) * 2.0));
        assert!(inv.norm_interval().exact);
        assert_relative_eq!(inv.norm_interval().upper, 2.0, max_relative = 1e-14);
        assert_eq!(inv.mahalanobis(&[1.0, 0.0]).unwrap(), 2.0);
        assert_eq!(inv.mahalanobis(&[0.0, 0.0]).unwrap(), 0.0);

        let id = CovarianceOperator::from_parts(DMatrix::identity(3, 3), r(3), 3.0).unwrap();
        let inv = id.invert().unwrap();
        assert_eq!(inv.matrix(), &DMatrix::identity(3, 3));
        assert_relative_eq!(inv.norm_interval().upper, 1.0, max_relative = 1e-14);

        let planar = DiscreteMeasure::from_rows(
            r(3),
            Role::Primal,
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]],
            &[0.25, 0.25, 0.5],
        )
        .unwrap();
        match CovarianceOperator::build(&planar).unwrap().invert() {
            Err(Error::NotPositiveDefinite { smallest, .. }) => assert!(smallest.abs() < 1e-12),
            other => panic!("expected PD error, got {other:?}"),
        }
    }

    #[test]
    fn mahalanobis_constant_on_signed_basis() {
        let mu = DiscreteMeasure::signed_basis(r(2));
        let inv = CovarianceOperator::build(&mu).unwrap().invert().unwrap();
        for x in mu.atoms() {
            assert_eq!(inv.mahalanobis(x.as_slice()).unwrap(), 2.0);
            assert_eq!(atom_mahalanobis(&mu, &inv, x.as_slice()).unwrap(), 2.0);
        }
    }

    #[test]
    fn p1_inverse_norm_is_max_entry() {
        let space = PNormSpace::new(2, Exponent::ONE).unwrap();
        let inv = CovarianceOperator::build(&DiscreteMeasure::signed_basis(space))
            .unwrap()
            .invert()
            .unwrap();
        assert_eq!(inv.norm_interval(), NormInterval::exact(2.0));
    }

    #[test]
    fn operator_json() {
        let s = CovarianceOperator::build(&DiscreteMeasure::signed_basis(r(2))).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(
            text,
            r#"{"dim":2,"p":2.0,"matrix":[[0.5,0.0],[0.0,0.5]],"second_moment":1.0}"#
        );
        let back: CovarianceOperator = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let asym = r#"{"dim":2,"p":2,"matrix":[[1,1],[0,1]],"second_moment":1}"#;
        assert!(serde_json::from_str::<CovarianceOperator>(asym).is_err());
    }
}
