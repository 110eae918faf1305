//! Evaluation of the Chebyshev-type tail inequalities.
//!
//! Every inequality has the shape `P{statistic ⋗ ε} ≤ c/ε^k`. The left side is
//! computed by exact enumeration over the atoms of a discrete measure (or by
//! Monte Carlo for a [`Sampler`]); the right side from the closed-form constant.
//! Event boundaries follow each inequality literally: `>` for the Hilbert-space
//! forms, `≥` everywhere else.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::covop::{CovarianceOperator, InverseOperator};
use crate::error::{check_dim, Error, Result};
use crate::measure::{DiscreteMeasure, Role, Sampler};
use crate::space::{dot, p_norm, NormInterval};

/// Absolute slack added to the right side when deciding `holds`.
pub const HOLDS_SLACK: f64 = 1e-12;
/// Confidence multiplier on the Monte Carlo standard error.
pub const CI_MULTIPLIER: f64 = 3.0;
/// Largest accepted ε-grid.
pub const MAX_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    Scalar,
    Euclidean,
    Grenander,
    Chen,
    RaoForward,
    RaoInverse,
    BanachDual,
    BanachMahalanobis,
}

impl Inequality {
    pub const ALL: [Inequality; 8] = [
        Inequality::Scalar,
        Inequality::Euclidean,
        Inequality::Grenander,
        Inequality::Chen,
        Inequality::RaoForward,
        Inequality::RaoInverse,
        Inequality::BanachDual,
        Inequality::BanachMahalanobis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Inequality::Scalar => "scalar",
            Inequality::Euclidean => "euclidean",
            Inequality::Grenander => "grenander",
            Inequality::Chen => "chen",
            Inequality::RaoForward => "rao_forward",
            Inequality::RaoInverse => "rao_inverse",
            Inequality::BanachDual => "banach_dual",
            Inequality::BanachMahalanobis => "banach_mahalanobis",
        }
    }

    /// Whether the tail event uses a strict inequality.
    pub fn strict(self) -> bool {
        matches!(self, Inequality::RaoForward | Inequality::RaoInverse)
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Inequality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Inequality::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown inequality {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "exact-enumeration")]
    ExactEnumeration,
    #[serde(rename = "monte-carlo")]
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ExactEnumeration => "exact-enumeration",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

/// A single `(inequality, ε)` evaluation request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    epsilon: f64,
    inequality: Inequality,
}

impl BoundQuery {
    pub fn new(inequality: Inequality, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(BoundQuery { epsilon, inequality })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn inequality(&self) -> Inequality {
        self.inequality
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inequality: Inequality,
    pub epsilon: f64,
    pub lhs: f64,
    pub ci_halfwidth: f64,
    pub rhs: f64,
    pub holds: bool,
    pub slack: f64,
    pub method: Method,
    /// Bracket of the operator norm that entered the right side, when one did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_interval: Option<NormInterval>,
}

impl BoundReport {
    pub fn new(inequality: Inequality, epsilon: f64, lhs: f64, ci_halfwidth: f64, rhs: f64, method: Method) -> Self {
        BoundReport {
            inequality,
            epsilon,
            lhs,
            ci_halfwidth,
            rhs,
            holds: lhs <= rhs + ci_halfwidth + HOLDS_SLACK,
            slack: rhs - lhs,
            method,
            norm_interval: None,
        }
    }
}

/// Right side `constant / ε^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RightSide {
    constant: f64,
    power: i32,
}

impl RightSide {
    fn at(&self, epsilon: f64) -> f64 {
        self.constant / epsilon.powi(self.power)
    }
}

fn require_euclidean(mu: &DiscreteMeasure, inequality: Inequality) -> Result<()> {
    if mu.space().p().is_two() {
        Ok(())
    } else {
        Err(Error::Applicability(format!(
            "{inequality} is stated for the Euclidean norm (p = 2), measure has p = {}",
            mu.space().p()
        )))
    }
}

fn require_primal(mu: &DiscreteMeasure) -> Result<()> {
    if mu.role() == Role::Primal {
        Ok(())
    } else {
        Err(Error::Role {
            expected: "primal",
            found: mu.role().name(),
        })
    }
}

/// Fails unless `‖E(X)‖₂ ≤ 1e-12 · max(1, √E‖X‖₂²)`.
pub fn require_centered(mu: &DiscreteMeasure) -> Result<()> {
    let mean_norm = mu.mean().norm();
    let scale = mu.euclidean_second_moment().sqrt().max(1.0);
    if mean_norm <= 1e-12 * scale {
        Ok(())
    } else {
        Err(Error::NotCentered { mean_norm })
    }
}

/// An inequality with its per-atom statistics precomputed, ready to be
/// evaluated at any ε.
#[derive(Debug, Clone)]
pub struct PreparedBound {
    inequality: Inequality,
    values: Vec<f64>,
    weights: Vec<f64>,
    rhs: RightSide,
    norm_interval: Option<NormInterval>,
}

impl PreparedBound {
    /// `pstar` is only consulted by [`Inequality::BanachDual`]; when absent the
    /// primal measure relabelled as a dual measure is used.
    pub fn new(inequality: Inequality, mu: &DiscreteMeasure, pstar: Option<&DiscreteMeasure>) -> Result<Self> {
        require_primal(mu)?;
        let weights = mu.weights().to_vec();
        let mut norm_interval = None;
        let (values, rhs): (Vec<f64>, RightSide) = match inequality {
            Inequality::Scalar => {
                check_dim(1, mu.dim())?;
                let m = mu.mean()[0];
                let dev: Vec<f64> = mu.atoms().iter().map(|x| (x[0] - m).abs()).collect();
                let var = mu.iter().map(|(x, w)| w * (x[0] - m) * (x[0] - m)).sum();
                (
                    dev,
                    RightSide {
                        constant: var,
                        power: 2,
                    },
                )
            }
            Inequality::Euclidean => {
                require_euclidean(mu, inequality)?;
                let m = mu.mean();
                let dev: Vec<f64> = mu.atoms().iter().map(|x| (x - &m).norm()).collect();
                let var = mu.iter().map(|(x, w)| w * (x - &m).norm_squared()).sum();
                (
                    dev,
                    RightSide {
                        constant: var,
                        power: 2,
                    },
                )
            }
            Inequality::Grenander => {
                require_euclidean(mu, inequality)?;
                let norms = mu.atoms().iter().map(|x| x.norm()).collect();
                (
                    norms,
                    RightSide {
                        constant: mu.second_moment(),
                        power: 2,
                    },
                )
            }
            Inequality::Chen => {
                require_euclidean(mu, inequality)?;
                require_centered(mu)?;
                let inv = CovarianceOperator::build(mu)?.invert()?;
                let stats = mahalanobis_values(mu, &inv)?;
                (
                    stats,
                    RightSide {
                        constant: mu.dim() as f64,
                        power: 1,
                    },
                )
            }
            Inequality::RaoForward => {
                require_euclidean(mu, inequality)?;
                require_centered(mu)?;
                let s = CovarianceOperator::build(mu)?;
                let stats = mu
                    .atoms()
                    .iter()
                    .map(|x| s.quad_form(x.as_slice(), x.as_slice()))
                    .collect::<Result<_>>()?;
                let m2 = mu.second_moment();
                (
                    stats,
                    RightSide {
                        constant: m2 * m2,
                        power: 1,
                    },
                )
            }
            Inequality::RaoInverse => {
                require_euclidean(mu, inequality)?;
                require_centered(mu)?;
                let inv = CovarianceOperator::build(mu)?.invert()?;
                let stats = mahalanobis_values(mu, &inv)?;
                let c = inv.norm_interval().upper * mu.second_moment();
                norm_interval = Some(inv.norm_interval());
                (
                    stats,
                    RightSide {
                        constant: c * c,
                        power: 1,
                    },
                )
            }
            Inequality::BanachDual => {
                let relabelled;
                let pstar = match pstar {
                    Some(p) => p,
                    None => {
                        relabelled = mu.with_role(Role::Dual);
                        &relabelled
                    }
                };
                if pstar.role() != Role::Dual {
                    return Err(Error::Role {
                        expected: "dual",
                        found: pstar.role().name(),
                    });
                }
                if pstar.space() != mu.space() {
                    check_dim(mu.dim(), pstar.dim())?;
                    return Err(Error::Domain(format!(
                        "dual measure is on the dual of p = {}, operator on p = {}",
                        pstar.space().p(),
                        mu.space().p()
                    )));
                }
                let s = CovarianceOperator::build(mu)?;
                let stats = pstar
                    .atoms()
                    .iter()
                    .map(|f| s.quad_form(f.as_slice(), f.as_slice()))
                    .collect::<Result<_>>()?;
                let rhs = RightSide {
                    constant: pstar.second_moment() * s.second_moment(),
                    power: 1,
                };
                return Ok(PreparedBound {
                    inequality,
                    values: stats,
                    weights: pstar.weights().to_vec(),
                    rhs,
                    norm_interval,
                });
            }
            Inequality::BanachMahalanobis => {
                let inv = CovarianceOperator::build(mu)?.invert()?;
                let stats = mahalanobis_values(mu, &inv)?;
                let upper = inv.norm_interval().upper;
                let m2 = mu.second_moment();
                norm_interval = Some(inv.norm_interval());
                (
                    stats,
                    RightSide {
                        constant: upper * upper * m2 * m2,
                        power: 1,
                    },
                )
            }
        };
        Ok(PreparedBound {
            inequality,
            values,
            weights,
            rhs,
            norm_interval,
        })
    }

    pub fn inequality(&self) -> Inequality {
        self.inequality
    }

    /// Per-atom statistic whose tail is bounded.
    pub fn statistics(&self) -> &[f64] {
        &self.values
    }

    /// Some atom's statistic equals ε exactly, so `>` and `≥` events differ.
    pub fn on_boundary(&self, epsilon: f64) -> bool {
        self.values.contains(&epsilon)
    }

    pub fn tail_probability(&self, epsilon: f64) -> f64 {
        let strict = self.inequality.strict();
        self.values
            .iter()
            .zip(&self.weights)
            .filter(|(v, _)| if strict { **v > epsilon } else { **v >= epsilon })
            .fold(0.0, |acc, (_, w)| acc + w)
    }

    pub fn rhs(&self, epsilon: f64) -> f64 {
        self.rhs.at(epsilon)
    }

    pub fn evaluate(&self, epsilon: f64) -> Result<BoundReport> {
        check_epsilon(epsilon)?;
        let mut report = BoundReport::new(
            self.inequality,
            epsilon,
            self.tail_probability(epsilon),
            0.0,
            self.rhs(epsilon),
            Method::ExactEnumeration,
        );
        report.norm_interval = self.norm_interval;
        Ok(report)
    }
}

fn mahalanobis_values(mu: &DiscreteMeasure, inv: &InverseOperator) -> Result<Vec<f64>> {
    mu.atoms().iter().map(|x| inv.mahalanobis(x.as_slice())).collect()
}

/// `P{|X − E X| ≥ ε} ≤ Var(X)/ε²` for a one-dimensional measure.
pub fn scalar_chebyshev(mu: &DiscreteMeasure, epsilon: f64) -> Result<BoundReport> {
    PreparedBound::new(Inequality::Scalar, mu, None)?.evaluate(epsilon)
}

/// `P{‖X − E X‖₂ ≥ ε} ≤ E‖X − E X‖₂²/ε²`.
pub fn euclidean_chebyshev(mu: &DiscreteMeasure, epsilon: f64) -> Result<BoundReport> {
    PreparedBound::new(Inequality::Euclidean, mu, None)?.evaluate(epsilon)
}

/// `P{‖X‖ ≥ ε} ≤ E‖X‖²/ε²` in a Hilbert space.
pub fn grenander(mu: &DiscreteMeasure, epsilon: f64) -> Result<BoundReport> {
    PreparedBound::new(Inequality::Grenander, mu, None)?.evaluate(epsilon)
}

/// `P{Xᵀ Σ⁻¹ X ≥ ε} ≤ n/ε` for a centered measure with positive definite covariance.
pub fn chen(mu: &DiscreteMeasure, epsilon: f64) -> Result<BoundReport> {
    PreparedBound::new(Inequality::Chen, mu, None)?.evaluate(epsilon)
}

/// Both Hilbert-space bounds for a centered measure:
/// `P{(SX,X) > ε} ≤ (E‖X‖²)²/ε` and `P{(S⁻¹X,X) > ε} ≤ (‖S⁻¹‖ E‖X‖²)²/ε`.
pub fn rao(mu: &DiscreteMeasure, epsilon: f64) -> Result<(BoundReport, BoundReport)> {
    let forward = PreparedBound::new(Inequality::RaoForward, mu, None)?.evaluate(epsilon)?;
    let inverse = PreparedBound::new(Inequality::RaoInverse, mu, None)?.evaluate(epsilon)?;
    Ok((forward, inverse))
}

/// `P*{f : (Sf,f) ≥ ε} ≤ (1/ε) ∫(‖f‖*)² P*(df) · ∫‖x‖² μ(dx)`.
pub fn banach_dual_bound(s: &CovarianceOperator, pstar: &DiscreteMeasure, epsilon: f64) -> Result<BoundReport> {
    check_epsilon(epsilon)?;
    if pstar.role() != Role::Dual {
        return Err(Error::Role {
            expected: "dual",
            found: pstar.role().name(),
        });
    }
    check_dim(s.dim(), pstar.dim())?;
    if pstar.space() != s.space() {
        return Err(Error::Domain(format!(
            "dual measure is on the dual of p = {}, operator on p = {}",
            pstar.space().p(),
            s.space().p()
        )));
    }
    let mut lhs = 0.0;
    for (f, v) in pstar.iter() {
        if s.quad_form(f.as_slice(), f.as_slice())? >= epsilon {
            lhs += v;
        }
    }
    let rhs = pstar.second_moment() * s.second_moment() / epsilon;
    Ok(BoundReport::new(
        Inequality::BanachDual,
        epsilon,
        lhs,
        0.0,
        rhs,
        Method::ExactEnumeration,
    ))
}

/// `P{(S⁻¹X,X) ≥ ε} ≤ (1/ε) ‖S⁻¹‖² (∫‖x‖² μ(dx))²`, using the upper end of the
/// certified bracket for `‖S⁻¹‖`.
pub fn banach_mahalanobis_bound(mu: &DiscreteMeasure, epsilon: f64) -> Result<BoundReport> {
    PreparedBound::new(Inequality::BanachMahalanobis, mu, None)?.evaluate(epsilon)
}

/// One report per ε of an ascending grid.
pub fn sweep(
    inequality: Inequality,
    mu: &DiscreteMeasure,
    pstar: Option<&DiscreteMeasure>,
    grid: &[f64],
) -> Result<Vec<BoundReport>> {
    validate_grid(grid)?;
    let prepared = PreparedBound::new(inequality, mu, pstar)?;
    grid.iter().map(|&e| prepared.evaluate(e)).collect()
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("epsilon grid is empty".into()));
    }
    if grid.len() > MAX_GRID_POINTS {
        return Err(Error::Domain(format!(
            "epsilon grid has {} points, at most {MAX_GRID_POINTS} allowed",
            grid.len()
        )));
    }
    for &e in grid {
        check_epsilon(e)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("epsilon grid must be strictly ascending".into()));
    }
    Ok(())
}

/// `points` values from `start` to `stop`, geometrically spaced.
pub fn log_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    grid(start, stop, points, true)
}

/// `points` values from `start` to `stop`, evenly spaced.
pub fn lin_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    grid(start, stop, points, false)
}

fn grid(start: f64, stop: f64, points: usize, log: bool) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::Domain("epsilon grid needs at least one point".into()));
    }
    check_epsilon(start)?;
    check_epsilon(stop)?;
    if points == 1 {
        return Ok(vec![start]);
    }
    if stop <= start {
        return Err(Error::Domain(format!("grid stop {stop} must exceed start {start}")));
    }
    let last = (points - 1) as f64;
    let g: Vec<f64> = (0..points)
        .map(|i| {
            let t = i as f64 / last;
            match (i, log) {
                (0, _) => start,
                (i, _) if i == points - 1 => stop,
                (_, true) => start * (stop / start).powf(t),
                (_, false) => start + (stop - start) * t,
            }
        })
        .collect();
    validate_grid(&g)?;
    Ok(g)
}

/// Parse `start:stop:points,log` or `start:stop:points,lin`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Domain(format!("grid spec {spec:?} is not start:stop:points,log|lin"));
    let (range, scale) = spec.split_once(',').ok_or_else(bad)?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match scale.trim() {
        "log" => log_grid(start, stop, points),
        "lin" => lin_grid(start, stop, points),
        _ => Err(bad()),
    }
}

/// Which statistic of a sampled element the Monte Carlo estimator tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatisticKind {
    Norm,
    QuadS,
    MahalanobisS,
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "norm" => Ok(StatisticKind::Norm),
            "quad_s" => Ok(StatisticKind::QuadS),
            "mahalanobis_s" => Ok(StatisticKind::MahalanobisS),
            _ => Err(Error::Domain(format!(
                "unknown statistic {s:?} (expected norm, quad_S or mahalanobis_S)"
            ))),
        }
    }
}

/// A statistic together with the operator it needs.
#[derive(Debug, Clone)]
pub enum Statistic {
    /// `‖X‖`; right side `Ê‖X‖²/ε²`.
    Norm,
    /// `(SX, X)` with the draws read as dual functionals; right side
    /// `(1/ε) Ê(‖X‖*)² · ∫‖x‖² μ(dx)`.
    QuadS(CovarianceOperator),
    /// `(S⁻¹X, X)`; right side `(1/ε) ‖S⁻¹‖² (Ê‖X‖²)²`.
    MahalanobisS(InverseOperator),
}

impl Statistic {
    pub fn kind(&self) -> StatisticKind {
        match self {
            Statistic::Norm => StatisticKind::Norm,
            Statistic::QuadS(_) => StatisticKind::QuadS,
            Statistic::MahalanobisS(_) => StatisticKind::MahalanobisS,
        }
    }
}

/// Monte Carlo tail estimate with a `3σ` normal confidence half-width.
///
/// Second moments on the right side are the empirical moments of the same draws.
pub fn mc_tail(
    sampler: &Sampler,
    statistic: &Statistic,
    epsilon: f64,
    n_draws: usize,
    seed: u64,
) -> Result<BoundReport> {
    check_epsilon(epsilon)?;
    if n_draws < 100 {
        return Err(Error::Domain(format!(
            "Monte Carlo needs at least 100 draws, got {n_draws}"
        )));
    }
    let space = sampler.space();
    match statistic {
        Statistic::Norm => {}
        Statistic::QuadS(s) => check_dim(space.dim(), s.dim())?,
        Statistic::MahalanobisS(inv) => check_dim(space.dim(), inv.space().dim())?,
    }
    let sampler = sampler.with_seed(seed);
    let norm_exponent = match statistic {
        Statistic::QuadS(_) => space.q(),
        _ => space.p(),
    };

    let mut hits = 0usize;
    let mut moment = 0.0;
    for i in 0..n_draws as u64 {
        let x = sampler.draw(i);
        let value = match statistic {
            Statistic::Norm => p_norm(x.as_slice(), space.p()),
            Statistic::QuadS(s) => s.quad_form(x.as_slice(), x.as_slice())?,
            Statistic::MahalanobisS(inv) => dot(inv.apply(x.as_slice())?.as_slice(), x.as_slice()),
        };
        if value >= epsilon {
            hits += 1;
        }
        moment += p_norm(x.as_slice(), norm_exponent).powi(2);
    }
    let n = n_draws as f64;
    let m2 = moment / n;
    let lhs = hits as f64 / n;
    let ci = CI_MULTIPLIER * (lhs * (1.0 - lhs) / n).sqrt();
    let (inequality, rhs, bracket) = match statistic {
        Statistic::Norm => (Inequality::Grenander, m2 / (epsilon * epsilon), None),
        Statistic::QuadS(s) => (Inequality::BanachDual, m2 * s.second_moment() / epsilon, None),
        Statistic::MahalanobisS(inv) => {
            let u = inv.norm_interval().upper;
            (
                Inequality::BanachMahalanobis,
                u * u * m2 * m2 / epsilon,
                Some(inv.norm_interval()),
            )
        }
    };
    let mut report = BoundReport::new(inequality, epsilon, lhs, ci, rhs, Method::MonteCarlo);
    report.norm_interval = bracket;
    Ok(report)
}
