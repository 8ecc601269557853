//! Projective vector bundle data: local trivialisations whose transitions
//! satisfy `Q_ab Q_bc = zeta(theta_abc) Q_ac` for a `Z_n` gerbe cocycle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::gerbe::{self, CombinatorialCover, GerbeCocycle, GerbeError};
use crate::linalg::{self, CMat};

/// A point of the ambient space of the base (the unit sphere or a plane).
pub type Point = [f64; 3];

pub type MatrixField = Arc<dyn Fn(&Point) -> CMat + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("weak cocycle violated on {simplex:?}: residual {residual:.3e} > {tolerance:.1e}")]
    WeakCocycleViolation { simplex: Vec<usize>, residual: f64, tolerance: f64 },
    #[error("twist mismatch between operands")]
    TwistMismatch,
    #[error("operands live on different covers")]
    CoverMismatch,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no transition for edge {0:?}")]
    MissingTransition((usize, usize)),
    #[error("transition on {edge:?} is not unitary (defect {defect:.3e})")]
    NotUnitary { edge: (usize, usize), defect: f64 },
    #[error("transition on {0:?} is singular")]
    Singular((usize, usize)),
    #[error("twist of order {order} does not divide {n}")]
    OrderDoesNotDivide { order: u64, n: u64 },
    #[error(transparent)]
    Gerbe(#[from] GerbeError),
}

/// A transition map on one overlap.
#[derive(Clone)]
pub enum Transition {
    Constant(CMat),
    /// Smooth map evaluated at points of the overlap.
    Field(MatrixField),
    /// Values at finitely many points of the overlap.
    Sampled(Vec<(Point, CMat)>),
}

impl fmt::Debug for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Constant(m) => write!(f, "Constant({}x{})", m.nrows(), m.ncols()),
            Transition::Field(_) => write!(f, "Field"),
            Transition::Sampled(s) => write!(f, "Sampled({} points)", s.len()),
        }
    }
}

const POINT_MATCH: f64 = 1e-9;

fn same_point(p: &Point, q: &Point) -> bool {
    (0..3).all(|i| (p[i] - q[i]).abs() <= POINT_MATCH)
}

impl Transition {
    pub fn is_constant(&self) -> bool {
        matches!(self, Transition::Constant(_))
    }

    /// Value at `p`; `None` when a sampled table has no entry there.
    pub fn eval(&self, p: &Point) -> Option<CMat> {
        match self {
            Transition::Constant(m) => Some(m.clone()),
            Transition::Field(f) => Some(f(p)),
            Transition::Sampled(s) => s.iter().find(|(q, _)| same_point(p, q)).map(|(_, m)| m.clone()),
        }
    }

    pub fn sample_points(&self) -> Vec<Point> {
        match self {
            Transition::Sampled(s) => s.iter().map(|(p, _)| *p).collect(),
            _ => Vec::new(),
        }
    }

    /// Pointwise map of the matrix values.
    pub fn map(&self, f: impl Fn(&CMat) -> CMat + Send + Sync + 'static) -> Transition {
        match self {
            Transition::Constant(m) => Transition::Constant(f(m)),
            Transition::Field(g) => {
                let g = g.clone();
                Transition::Field(Arc::new(move |p| f(&g(p))))
            }
            Transition::Sampled(s) => Transition::Sampled(s.iter().map(|(p, m)| (*p, f(m))).collect()),
        }
    }

    /// Pointwise combination of two transitions on the same overlap.
    pub fn zip(&self, other: &Transition, f: impl Fn(&CMat, &CMat) -> CMat + Send + Sync + 'static) -> Transition {
        match (self, other) {
            (Transition::Constant(a), Transition::Constant(b)) => Transition::Constant(f(a, b)),
            (Transition::Sampled(s), o) => {
                Transition::Sampled(s.iter().filter_map(|(p, a)| o.eval(p).map(|b| (*p, f(a, &b)))).collect())
            }
            (o, Transition::Sampled(s)) => {
                Transition::Sampled(s.iter().filter_map(|(p, b)| o.eval(p).map(|a| (*p, f(&a, b)))).collect())
            }
            (a, b) => {
                let (a, b) = (a.clone(), b.clone());
                Transition::Field(Arc::new(move |p| f(&a.eval(p).unwrap(), &b.eval(p).unwrap())))
            }
        }
    }

    pub fn inverse(&self) -> Transition {
        self.map(|m| linalg::inverse(m).expect("transition must be invertible"))
    }
}

/// Cocycle tolerances; constant data are held to the tighter bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BundleTolerances {
    pub cocycle_constant: f64,
    pub cocycle_sampled: f64,
    pub unitary: f64,
}

impl Default for BundleTolerances {
    fn default() -> Self {
        Self { cocycle_constant: 1e-8, cocycle_sampled: 1e-6, unitary: 1e-9 }
    }
}

/// Points at which non-constant data on each overlap is tested, keyed by
/// sorted simplex.
#[derive(Clone, Debug, Default)]
pub struct OverlapSamples {
    pub points: BTreeMap<Vec<usize>, Vec<Point>>,
}

impl OverlapSamples {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn get(&self, simplex: &[usize]) -> &[Point] {
        self.points.get(simplex).map_or(&[], Vec::as_slice)
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ValidationReport {
    pub max_residual: f64,
    pub worst_simplex: Option<Vec<usize>>,
    pub samples_checked: usize,
}

/// Local bundles of rank `rank` glued by twisted transitions.
#[derive(Clone, Debug)]
pub struct ProjectiveBundleData {
    pub cover: CombinatorialCover,
    pub rank: usize,
    pub twist: GerbeCocycle,
    /// One transition per sorted edge `a < b`; `Q_ba = Q_ab^{-1}`.
    pub transitions: BTreeMap<(usize, usize), Transition>,
    pub hermitian: bool,
}

impl ProjectiveBundleData {
    pub fn new(cover: CombinatorialCover, rank: usize, twist: GerbeCocycle) -> Self {
        Self { cover, rank, twist, transitions: BTreeMap::new(), hermitian: false }
    }

    /// Rank-`r` data with identity transitions and the given twist (valid only
    /// when the twist vanishes).
    pub fn trivial(cover: &CombinatorialCover, rank: usize, n: u64) -> Self {
        let mut e = Self::new(cover.clone(), rank, GerbeCocycle::zero(cover, n));
        for edge in cover.edges() {
            e.transitions.insert((edge[0], edge[1]), Transition::Constant(linalg::identity(rank)));
        }
        e.hermitian = true;
        e
    }

    pub fn with(mut self, a: usize, b: usize, q: Transition) -> Self {
        self.set(a, b, q);
        self
    }

    /// Sets `Q_ab`, storing the inverse when `a > b`.
    pub fn set(&mut self, a: usize, b: usize, q: Transition) {
        if a < b {
            self.transitions.insert((a, b), q);
        } else {
            self.transitions.insert((b, a), q.inverse());
        }
    }

    pub fn transition(&self, a: usize, b: usize) -> Result<Transition, BundleError> {
        if a == b {
            return Ok(Transition::Constant(linalg::identity(self.rank)));
        }
        let key = (a.min(b), a.max(b));
        let t = self.transitions.get(&key).ok_or(BundleError::MissingTransition((a, b)))?;
        Ok(if a < b { t.clone() } else { t.inverse() })
    }

    pub fn eval(&self, a: usize, b: usize, p: &Point) -> Option<CMat> {
        self.transition(a, b).ok()?.eval(p)
    }

    fn edge_points(&self, simplex: &[usize], samples: &OverlapSamples) -> (Vec<Point>, bool) {
        let mut constant = true;
        let mut pts: Vec<Point> = samples.get(simplex).to_vec();
        for i in 0..simplex.len() {
            for j in i + 1..simplex.len() {
                if let Some(t) = self.transitions.get(&(simplex[i], simplex[j])) {
                    if !t.is_constant() {
                        constant = false;
                    }
                    pts.extend(t.sample_points());
                }
            }
        }
        if constant {
            (vec![[0.0; 3]], true)
        } else {
            (pts, false)
        }
    }

    /// Worst weak-cocycle residual over all triple overlaps.
    pub fn validate(&self, samples: &OverlapSamples, tol: &BundleTolerances) -> Result<ValidationReport, BundleError> {
        self.twist.check_cocycle(&self.cover)?;
        for edge in self.cover.edges() {
            let t = self.transition(edge[0], edge[1])?;
            if let Transition::Constant(m) = &t {
                if m.shape() != (self.rank, self.rank) {
                    return Err(BundleError::ShapeMismatch(format!("transition {edge:?} has shape {:?}", m.shape())));
                }
                if self.hermitian {
                    let defect = linalg::unitarity_defect(m);
                    if defect > tol.unitary {
                        return Err(BundleError::NotUnitary { edge: (edge[0], edge[1]), defect });
                    }
                }
            }
        }
        let mut report = ValidationReport { max_residual: 0.0, worst_simplex: None, samples_checked: 0 };
        for tri in self.cover.triangles() {
            let (a, b, c) = (tri[0], tri[1], tri[2]);
            let zeta = self.twist.phase(&self.cover, [a, b, c]).expect("triangle in cover");
            let (pts, constant) = self.edge_points(tri, samples);
            let tolerance = if constant { tol.cocycle_constant } else { tol.cocycle_sampled };
            let (qab, qbc, qac) = (self.transition(a, b)?, self.transition(b, c)?, self.transition(a, c)?);
            for p in &pts {
                let (Some(x), Some(y), Some(z)) = (qab.eval(p), qbc.eval(p), qac.eval(p)) else {
                    continue;
                };
                let r = linalg::op_norm(&(x * y - z * zeta));
                report.samples_checked += 1;
                // strict comparison keeps the first simplex on ties
                if r > report.max_residual || report.worst_simplex.is_none() {
                    report.max_residual = r;
                    report.worst_simplex = Some(tri.clone());
                }
                if r > tolerance {
                    return Err(BundleError::WeakCocycleViolation { simplex: tri.clone(), residual: r, tolerance });
                }
            }
        }
        Ok(report)
    }

    fn same_base(&self, other: &Self) -> Result<(), BundleError> {
        if self.cover != other.cover {
            return Err(BundleError::CoverMismatch);
        }
        Ok(())
    }

    fn same_twist(&self, other: &Self) -> Result<(), BundleError> {
        self.same_base(other)?;
        if self.twist != other.twist {
            return Err(BundleError::TwistMismatch);
        }
        Ok(())
    }

    fn combine(&self, other: &Self, rank: usize, f: fn(&CMat, &CMat) -> CMat) -> Result<Self, BundleError> {
        let mut out = Self::new(self.cover.clone(), rank, self.twist.clone());
        out.hermitian = self.hermitian && other.hermitian;
        for edge in self.cover.edges() {
            let (a, b) = (edge[0], edge[1]);
            let t = self.transition(a, b)?.zip(&other.transition(a, b)?, f);
            out.transitions.insert((a, b), t);
        }
        Ok(out)
    }

    /// Block-diagonal sum of two bundles with the same twist.
    pub fn direct_sum(&self, other: &Self) -> Result<Self, BundleError> {
        self.same_twist(other)?;
        self.combine(other, self.rank + other.rank, linalg::block_diag)
    }

    /// Module action of an ordinary bundle: Kronecker-product transitions.
    pub fn tensor_ordinary(&self, w: &OrdinaryBundleData) -> Result<Self, BundleError> {
        self.same_base(&w.0)?;
        self.combine(&w.0, self.rank * w.0.rank, linalg::kron)
    }

    /// `E^{(x) n}` as ordinary data; the central factors cancel when the
    /// twist order divides `n`.
    pub fn tensor_power_descend(
        &self,
        n: u64,
        samples: &OverlapSamples,
        tol: &BundleTolerances,
    ) -> Result<OrdinaryBundleData, BundleError> {
        let order = self.twist_order();
        if n == 0 || n % order != 0 {
            return Err(BundleError::OrderDoesNotDivide { order, n });
        }
        self.validate(samples, tol)?;
        let mut out =
            Self::new(self.cover.clone(), self.rank.pow(n as u32), GerbeCocycle::zero(&self.cover, self.twist.n));
        out.hermitian = self.hermitian;
        for (&(a, b), t) in &self.transitions {
            out.transitions.insert(
                (a, b),
                t.map(move |m| {
                    let mut acc = m.clone();
                    for _ in 1..n {
                        acc = linalg::kron(&acc, m);
                    }
                    acc
                }),
            );
        }
        Ok(OrdinaryBundleData(out))
    }

    /// Order of the twist class representative as an element of `C^2(Z_n)`.
    pub fn twist_order(&self) -> u64 {
        let n = self.twist.n;
        (1..=n).find(|k| self.twist.values.iter().all(|v| (v * k) % n == 0)).unwrap_or(n)
    }

    /// `Q_ab -> zeta(mu_ab) Q_ab`, producing data twisted by `theta + delta mu`.
    pub fn rescale_central(&self, mu: &[u64]) -> Self {
        let n = self.twist.n;
        let mut out = self.clone();
        out.twist = gerbe::gauge_transform(&self.cover, &self.twist, mu);
        for (i, edge) in self.cover.edges().iter().enumerate() {
            let z = linalg::root_of_unity(mu[i] as i64, n);
            if let Some(t) = self.transitions.get(&(edge[0], edge[1])) {
                out.transitions.insert((edge[0], edge[1]), t.map(move |m| m * z));
            }
        }
        out
    }

    /// True iff `Q'_ab = T_a Q_ab T_b^{-1}` at every tested point.
    pub fn check_equivalence_witness(
        &self,
        other: &Self,
        witness: &[Transition],
        samples: &OverlapSamples,
        tol: &BundleTolerances,
    ) -> Result<bool, BundleError> {
        if self.cover != other.cover || self.twist != other.twist || self.rank != other.rank {
            return Err(BundleError::ShapeMismatch("bundles differ in cover, twist or rank".into()));
        }
        if witness.len() != self.cover.set_count() {
            return Err(BundleError::ShapeMismatch(format!(
                "{} witness maps for {} sets",
                witness.len(),
                self.cover.set_count()
            )));
        }
        for edge in self.cover.edges() {
            let (a, b) = (edge[0], edge[1]);
            let (q, q2) = (self.transition(a, b)?, other.transition(a, b)?);
            let all_constant =
                q.is_constant() && q2.is_constant() && witness[a].is_constant() && witness[b].is_constant();
            let tolerance = if all_constant { tol.cocycle_constant } else { tol.cocycle_sampled };
            let mut pts: Vec<Point> = samples.get(edge).to_vec();
            for t in [&q, &q2, &witness[a], &witness[b]] {
                pts.extend(t.sample_points());
            }
            if all_constant {
                pts = vec![[0.0; 3]];
            }
            for p in &pts {
                let (Some(x), Some(y), Some(ta), Some(tb)) =
                    (q.eval(p), q2.eval(p), witness[a].eval(p), witness[b].eval(p))
                else {
                    continue;
                };
                let tb_inv = linalg::inverse(&tb).ok_or(BundleError::Singular((b, b)))?;
                if ta.shape() != (self.rank, self.rank) || tb.shape() != (self.rank, self.rank) {
                    return Err(BundleError::ShapeMismatch("witness rank".into()));
                }
                if linalg::op_norm(&(ta * x * tb_inv - y)) > tolerance {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Edges carrying a transition.
    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.transitions.keys().copied().collect()
    }
}

/// Untwisted bundle data.
#[derive(Clone, Debug)]
pub struct OrdinaryBundleData(pub ProjectiveBundleData);

impl OrdinaryBundleData {
    pub fn new(data: ProjectiveBundleData) -> Result<Self, BundleError> {
        if !data.twist.is_zero() {
            return Err(BundleError::TwistMismatch);
        }
        Ok(Self(data))
    }

    pub fn trivial(cover: &CombinatorialCover, rank: usize) -> Self {
        Self(ProjectiveBundleData::trivial(cover, rank, 1))
    }

    pub fn validate(&self, samples: &OverlapSamples, tol: &BundleTolerances) -> Result<ValidationReport, BundleError> {
        self.0.validate(samples, tol)
    }
}

/// Formal difference `[plus] - [minus]` in twisted K-theory.
#[derive(Clone, Debug)]
pub struct KClassDifference {
    pub plus: ProjectiveBundleData,
    pub minus: ProjectiveBundleData,
}

impl KClassDifference {
    pub fn new(plus: ProjectiveBundleData, minus: ProjectiveBundleData) -> Result<Self, BundleError> {
        plus.same_twist(&minus)?;
        Ok(Self { plus, minus })
    }

    pub fn virtual_rank(&self) -> i64 {
        self.plus.rank as i64 - self.minus.rank as i64
    }

    /// Swaps the two sides.
    pub fn negate(&self) -> Self {
        Self { plus: self.minus.clone(), minus: self.plus.clone() }
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self, BundleError> {
        Self::new(self.plus.direct_sum(&other.plus)?, self.minus.direct_sum(&other.minus)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohomology::library;
    use crate::linalg::c;

    fn three_set() -> CombinatorialCover {
        CombinatorialCover::new(library::simplex(2))
    }

    fn signed_example() -> ProjectiveBundleData {
        let cover = three_set();
        let mut theta = GerbeCocycle::zero(&cover, 2);
        theta.values[0] = 1;
        let one = Transition::Constant(linalg::identity(2));
        ProjectiveBundleData::new(cover, 2, theta).with(0, 1, one.clone()).with(1, 2, one).with(
            2,
            0,
            Transition::Constant(linalg::scalar(2, c(-1.0, 0.0))),
        )
    }

    #[test]
    fn trivial_line_validates() {
        let e = ProjectiveBundleData::trivial(&three_set(), 1, 1);
        let r = e.validate(&OverlapSamples::none(), &BundleTolerances::default()).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn signed_example_has_zero_residual() {
        let r = signed_example().validate(&OverlapSamples::none(), &BundleTolerances::default()).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn perturbation_is_caught() {
        let mut e = signed_example();
        let mut m = linalg::identity(2);
        m[(0, 1)] = c(1e-3, 0.0);
        e.set(0, 1, Transition::Constant(m));
        let err = e.validate(&OverlapSamples::none(), &BundleTolerances::default()).unwrap_err();
        assert!(matches!(err, BundleError::WeakCocycleViolation { ref simplex, .. } if simplex == &vec![0, 1, 2]));
    }

    #[test]
    fn sums_and_products() {
        let e = signed_example();
        let zero = ProjectiveBundleData {
            rank: 0,
            transitions: e.transitions.keys().map(|&k| (k, Transition::Constant(CMat::zeros(0, 0)))).collect(),
            ..e.clone()
        };
        let s = e.direct_sum(&zero).unwrap();
        assert_eq!(s.rank, 2);
        s.validate(&OverlapSamples::none(), &BundleTolerances::default()).unwrap();
        let w = OrdinaryBundleData::trivial(&three_set(), 1);
        let t = e.tensor_ordinary(&w).unwrap();
        assert_eq!(t.twist, e.twist);
        t.validate(&OverlapSamples::none(), &BundleTolerances::default()).unwrap();
        let other = ProjectiveBundleData::trivial(&three_set(), 3, 2);
        assert_eq!(e.direct_sum(&other).unwrap_err(), BundleError::TwistMismatch);
    }

    #[test]
    fn square_descends() {
        let d =
            signed_example().tensor_power_descend(2, &OverlapSamples::none(), &BundleTolerances::default()).unwrap();
        assert!(d.0.twist.is_zero());
        assert_eq!(d.0.rank, 4);
        d.validate(&OverlapSamples::none(), &BundleTolerances::default()).unwrap();
    }

    #[test]
    fn central_rescaling_shifts_twist() {
        let e = signed_example();
        // mu on edge (0,2) cancels theta
        let g = e.rescale_central(&[0, 1, 0]);
        assert!(g.twist.is_zero());
        g.validate(&OverlapSamples::none(), &BundleTolerances::default()).unwrap();
    }

    #[test]
    fn identity_witness() {
        let e = signed_example();
        let id: Vec<Transition> = (0..3).map(|_| Transition::Constant(linalg::identity(2))).collect();
        assert!(e.check_equivalence_witness(&e, &id, &OverlapSamples::none(), &BundleTolerances::default()).unwrap());
    }
}
