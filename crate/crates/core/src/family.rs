//! Fourier-truncated families of elliptic operators on circle fibres.
//!
//! An operator family on patch `a` is a map `p -> P_a(p)` between fixed
//! ambient spaces, with an optional point-dependent orthonormal frame for
//! the target subspace. Kernels of the stabilised operators are
//! extracted by SVD and aligned to a per-patch reference frame.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::atlas::{ravel, unravel, Atlas, DIFF_STEP};
use crate::bundle::{BundleError, BundleTolerances, KClassDifference, Point, ProjectiveBundleData, Transition};
use crate::chern_weil::{ConnectionData, GridCache, PatchConnection, PotentialFn};
use crate::gerbe::{self, GerbeCocycle};
pub use crate::linalg::fixture_unitaries;
use crate::linalg::{self, c, CMat, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("stabilization failed: {reason}")]
    StabilizationFailed { reason: String },
    #[error("kernel dimension {found} at patch {patch} node {node}, expected {expected}")]
    NonConstantKernel { patch: usize, node: usize, found: usize, expected: usize },
    #[error("frame overlap degenerate at patch {patch} (smallest singular value {sigma:.3e})")]
    FrameDegeneracy { patch: usize, sigma: f64 },
    #[error("grid of patch {patch} is too coarse for central differences")]
    GridTooCoarse { patch: usize },
    #[error("family has {family} patches, atlas has {atlas}")]
    CoverMismatch { family: usize, atlas: usize },
    #[error("family `{0}` has no symbol")]
    MissingSymbol(String),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

/// Index set of Fourier modes on the circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FiberMode {
    /// Modes `-K..=K`.
    Full,
    /// Modes `0..=K`.
    Hardy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FiberModel {
    pub truncation: usize,
    pub coeff_dim: usize,
    pub mode: FiberMode,
}

impl FiberModel {
    pub fn modes(&self) -> Vec<i64> {
        let k = self.truncation as i64;
        match self.mode {
            FiberMode::Full => (-k..=k).collect(),
            FiberMode::Hardy => (0..=k).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coeff_dim * self.modes().len()
    }
}

pub type PointMatrix = Arc<dyn Fn(&Point) -> CMat + Send + Sync>;
/// `(p, theta, xi) -> sigma`, `xi` in `{+1, -1}`.
pub type SymbolFn = Arc<dyn Fn(&Point, f64, i8) -> CMat + Send + Sync>;

#[derive(Clone)]
pub struct PatchFamily {
    /// `target ambient x domain ambient`.
    pub operator: PointMatrix,
    /// Orthonormal columns spanning the target subspace; whole ambient when absent.
    pub target_frame: Option<PointMatrix>,
    /// Orthonormal columns spanning the domain subspace; whole ambient when absent.
    pub domain_frame: Option<PointMatrix>,
    pub symbol: Option<SymbolFn>,
    /// Candidate stabiliser columns in the target ambient, in order of preference.
    pub stabilizer_basis: PointMatrix,
}

/// Fibrewise twisting data of the circle Dirac preset.
#[derive(Clone)]
pub struct DiracTwist {
    pub winding: i64,
    /// Holonomy shift `a(p)` of the twisting connection `i (winding + a) d theta`.
    pub shift: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
}

#[derive(Clone)]
pub struct FamilySpec {
    pub name: String,
    pub fiber: FiberModel,
    pub domain_dim: usize,
    pub target_dim: usize,
    pub patches: Vec<PatchFamily>,
    /// Transitions of the ambient domain and target.
    pub plus: ProjectiveBundleData,
    pub minus: ProjectiveBundleData,
    pub dirac: Option<DiracTwist>,
    pub max_stabilizer: usize,
    /// Ambient indices carrying the symbol's coefficient space in domain and target.
    pub domain_slots: Vec<usize>,
    pub target_slots: Vec<usize>,
}

impl std::fmt::Debug for FamilySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FamilySpec")
            .field("name", &self.name)
            .field("fiber", &self.fiber)
            .field("domain_dim", &self.domain_dim)
            .field("target_dim", &self.target_dim)
            .field("patches", &self.patches.len())
            .finish()
    }
}

/// Default singular-value floor for surjectivity.
pub const SIGMA_MIN: f64 = 1e-6;
/// Relative cut separating kernel from non-kernel singular values.
pub const KERNEL_CUT: f64 = 1e-8;
pub const KAPPA_MAX: f64 = 1e8;
pub const THETA_SAMPLES: usize = 64;

fn standard_columns(ambient: usize, count: usize) -> CMat {
    let mut m = CMat::zeros(ambient, count);
    for j in 0..count.min(ambient) {
        m[(j, j)] = c(1.0, 0.0);
    }
    m
}

/// Multiplication by `sum_j g_j z^j` from Hardy modes `0..=K` into modes `0..=K + deg`.
fn toeplitz_matrix(coeffs: &[CMat], k: usize) -> CMat {
    let v = coeffs[0].nrows();
    let deg = coeffs.len() - 1;
    let mut m = CMat::zeros(v * (k + deg + 1), v * (k + 1));
    for j in 0..=k {
        for (s, g) in coeffs.iter().enumerate() {
            m.view_mut((v * (j + s), v * j), (v, v)).copy_from(g);
        }
    }
    m
}

impl FamilySpec {
    /// `P(b) = Pi M_g Pi` with `g_b(z) = z^m Pr(b) + (I - Pr(b))` on Hardy modes
    /// `0..=K` (`m >= 0`); the target is modes `0..=K` plus modes `K+1..=K+m`
    /// along `Pr(b)`. With `adjoint`, the adjoint family.
    pub fn toeplitz_clutching(atlas: &Atlas, truncation: usize, winding: usize, adjoint: bool) -> Self {
        let k = truncation;
        let m = winding;
        let fiber = FiberModel { truncation: k, coeff_dim: 2, mode: FiberMode::Hardy };
        let domain_dim = 2 * (k + 1);
        let target_dim = 2 * (k + m + 1);
        let operator: PointMatrix = Arc::new(move |p: &Point| {
            let pr = linalg::spin_projector(p);
            let mut coeffs = vec![CMat::zeros(2, 2); m + 1];
            coeffs[0] += linalg::identity(2) - &pr;
            coeffs[m] += &pr;
            toeplitz_matrix(&coeffs, k)
        });
        let target_frame: PointMatrix = Arc::new(move |p: &Point| {
            let mut t = CMat::zeros(target_dim, domain_dim + m);
            for j in 0..domain_dim {
                t[(j, j)] = c(1.0, 0.0);
            }
            let up = spin_up(p);
            for s in 0..m {
                let row = 2 * (k + 1 + s);
                t[(row, domain_dim + s)] = up[0];
                t[(row + 1, domain_dim + s)] = up[1];
            }
            t
        });
        let symbol: SymbolFn = Arc::new(move |p: &Point, theta: f64, xi: i8| {
            if xi < 0 {
                return linalg::identity(2);
            }
            let pr = linalg::spin_projector(p);
            pr * C64::from_polar(1.0, m as f64 * theta) + linalg::identity(2) - linalg::spin_projector(p)
        });
        let cover = atlas.cover();
        let plus = ProjectiveBundleData::trivial(&cover, domain_dim, 1);
        let minus = ProjectiveBundleData::trivial(&cover, target_dim, 1);
        let stabilizer_basis: PointMatrix = Arc::new(move |_| standard_columns(target_dim, target_dim));
        let patch = PatchFamily {
            operator,
            target_frame: Some(target_frame),
            domain_frame: None,
            symbol: Some(symbol),
            stabilizer_basis,
        };
        let spec = Self {
            name: format!("toeplitz-clutching(m={m})"),
            fiber,
            domain_dim,
            target_dim,
            patches: vec![patch; atlas.patches.len()],
            plus,
            minus,
            dirac: None,
            max_stabilizer: 8,
            domain_slots: vec![0, 1],
            target_slots: vec![0, 1],
        };
        if adjoint {
            spec.adjoint()
        } else {
            spec
        }
    }

    /// Scalar Toeplitz operator with symbol `z^m`, constant over the base.
    pub fn scalar_winding(atlas: &Atlas, truncation: usize, winding: usize) -> Self {
        let k = truncation;
        let m = winding;
        let domain_dim = k + 1;
        let target_dim = k + m + 1;
        let operator: PointMatrix = Arc::new(move |_| {
            let mut coeffs = vec![CMat::zeros(1, 1); m + 1];
            coeffs[m][(0, 0)] = c(1.0, 0.0);
            toeplitz_matrix(&coeffs, k)
        });
        let symbol: SymbolFn = Arc::new(move |_, theta, xi| {
            let z = if xi > 0 { C64::from_polar(1.0, m as f64 * theta) } else { c(1.0, 0.0) };
            CMat::from_element(1, 1, z)
        });
        Self::constant_family(
            atlas,
            format!("scalar-winding(m={m})"),
            k,
            1,
            domain_dim,
            target_dim,
            operator,
            Some(symbol),
        )
    }

    /// The identity on `v` coefficients.
    pub fn invertible(atlas: &Atlas, truncation: usize, coeff_dim: usize) -> Self {
        let dim = coeff_dim * (truncation + 1);
        let operator: PointMatrix = Arc::new(move |_| linalg::identity(dim));
        let symbol: SymbolFn = Arc::new(move |_, _, _| linalg::identity(coeff_dim));
        Self::constant_family(atlas, "invertible".into(), truncation, coeff_dim, dim, dim, operator, Some(symbol))
    }

    /// A fixed matrix on every fibre, with the scalar symbol `e^{i m theta}` at `xi = +1`.
    pub fn dense(atlas: &Atlas, matrix: CMat, symbol_winding: i64) -> Self {
        let (t, d) = matrix.shape();
        let operator: PointMatrix = Arc::new(move |_| matrix.clone());
        let symbol: SymbolFn = Arc::new(move |_, theta, xi| {
            let z = if xi > 0 { C64::from_polar(1.0, symbol_winding as f64 * theta) } else { c(1.0, 0.0) };
            CMat::from_element(1, 1, z)
        });
        Self::constant_family(atlas, "dense".into(), d.max(1) - 1, 1, d, t, operator, Some(symbol))
    }

    #[allow(clippy::too_many_arguments)]
    fn constant_family(
        atlas: &Atlas,
        name: String,
        truncation: usize,
        coeff_dim: usize,
        domain_dim: usize,
        target_dim: usize,
        operator: PointMatrix,
        symbol: Option<SymbolFn>,
    ) -> Self {
        let cover = atlas.cover();
        let patch = PatchFamily {
            operator,
            target_frame: None,
            domain_frame: None,
            symbol,
            stabilizer_basis: Arc::new(move |_| standard_columns(target_dim, target_dim)),
        };
        Self {
            name,
            fiber: FiberModel { truncation, coeff_dim, mode: FiberMode::Hardy },
            domain_dim,
            target_dim,
            patches: vec![patch; atlas.patches.len()],
            plus: ProjectiveBundleData::trivial(&cover, domain_dim, 1),
            minus: ProjectiveBundleData::trivial(&cover, target_dim, 1),
            dirac: None,
            max_stabilizer: 8,
            domain_slots: (0..coeff_dim).collect(),
            target_slots: (0..coeff_dim).collect(),
        }
    }

    /// `D = -i d/d theta + winding + a(p)` on modes `-K..=K`.
    pub fn dirac_twist(atlas: &Atlas, truncation: usize, twist: DiracTwist) -> Self {
        let k = truncation as i64;
        let dim = 2 * truncation + 1;
        let tw = twist.clone();
        let operator: PointMatrix = Arc::new(move |p: &Point| {
            let shift = tw.winding as f64 + (tw.shift)(p);
            CMat::from_diagonal(&nalgebra::DVector::from_iterator(dim, (-k..=k).map(|j| c(j as f64 + shift, 0.0))))
        });
        let symbol: SymbolFn = Arc::new(|_, _, xi| CMat::from_element(1, 1, c(xi as f64, 0.0)));
        let mut spec =
            Self::constant_family(atlas, "dirac-twist".into(), truncation, 1, dim, dim, operator, Some(symbol));
        spec.fiber.mode = FiberMode::Full;
        spec.domain_slots = vec![truncation];
        spec.target_slots = vec![truncation];
        // stabilise from the lowest modes first
        spec.patches.iter_mut().for_each(|p| {
            p.stabilizer_basis = Arc::new(move |_| {
                let mut m = CMat::zeros(dim, dim);
                for (col, row) in
                    (0..dim).map(|j| (j, (j as i64 + k) as usize % dim)).enumerate().map(|(a, (_, r))| (a, r))
                {
                    m[(row, col)] = c(1.0, 0.0);
                }
                m
            });
        });
        spec.dirac = Some(twist);
        spec
    }

    /// Adjoint family: operator `P^*` from the old target subspace to the old domain.
    pub fn adjoint(&self) -> Self {
        let patches = self
            .patches
            .iter()
            .map(|pf| {
                let op = pf.operator.clone();
                let sym = pf.symbol.clone();
                let n = self.domain_dim;
                PatchFamily {
                    operator: Arc::new(move |p| op(p).adjoint()),
                    target_frame: pf.domain_frame.clone(),
                    domain_frame: pf.target_frame.clone(),
                    symbol: sym.map(|s| Arc::new(move |p: &Point, t, xi| s(p, t, xi).adjoint()) as SymbolFn),
                    stabilizer_basis: Arc::new(move |_| standard_columns(n, n)),
                }
            })
            .collect();
        Self {
            name: format!("adjoint({})", self.name),
            fiber: self.fiber,
            domain_dim: self.target_dim,
            target_dim: self.domain_dim,
            patches,
            plus: self.minus.clone(),
            minus: self.plus.clone(),
            dirac: self.dirac.clone(),
            max_stabilizer: self.max_stabilizer,
            domain_slots: self.target_slots.clone(),
            target_slots: self.domain_slots.clone(),
        }
    }

    /// Block-diagonal sum of two families over the same atlas.
    pub fn direct_sum(&self, other: &Self) -> Result<Self, FamilyError> {
        let plus = self.plus.direct_sum(&other.plus)?;
        let minus = self.minus.direct_sum(&other.minus)?;
        let (d1, t1, d2, t2) = (self.domain_dim, self.target_dim, other.domain_dim, other.target_dim);
        let patches = self
            .patches
            .iter()
            .zip(&other.patches)
            .map(|(a, b)| {
                let (oa, ob) = (a.operator.clone(), b.operator.clone());
                let frame =
                    |fa: Option<PointMatrix>, fb: Option<PointMatrix>, na: usize, nb: usize| -> Option<PointMatrix> {
                        if fa.is_none() && fb.is_none() {
                            return None;
                        }
                        Some(Arc::new(move |p: &Point| {
                            let x = fa.as_ref().map_or_else(|| linalg::identity(na), |f| f(p));
                            let y = fb.as_ref().map_or_else(|| linalg::identity(nb), |f| f(p));
                            linalg::block_diag(&x, &y)
                        }))
                    };
                let (sa, sb) = (a.symbol.clone(), b.symbol.clone());
                let symbol: Option<SymbolFn> = match (sa, sb) {
                    (Some(x), Some(y)) => {
                        Some(Arc::new(move |p: &Point, t, xi| linalg::block_diag(&x(p, t, xi), &y(p, t, xi))))
                    }
                    _ => None,
                };
                let (ba, bb) = (a.stabilizer_basis.clone(), b.stabilizer_basis.clone());
                PatchFamily {
                    operator: Arc::new(move |p| linalg::block_diag(&oa(p), &ob(p))),
                    target_frame: frame(a.target_frame.clone(), b.target_frame.clone(), t1, t2),
                    domain_frame: frame(a.domain_frame.clone(), b.domain_frame.clone(), d1, d2),
                    symbol,
                    // interleave the two preference lists
                    stabilizer_basis: Arc::new(move |p| {
                        let (x, y) = (ba(p), bb(p));
                        let mut m = CMat::zeros(t1 + t2, x.ncols() + y.ncols());
                        let mut col = 0;
                        for j in 0..x.ncols().max(y.ncols()) {
                            if j < x.ncols() {
                                m.view_mut((0, col), (t1, 1)).copy_from(&x.column(j));
                                col += 1;
                            }
                            if j < y.ncols() {
                                m.view_mut((t1, col), (t2, 1)).copy_from(&y.column(j));
                                col += 1;
                            }
                        }
                        m
                    }),
                }
            })
            .collect();
        Ok(Self {
            name: format!("{} + {}", self.name, other.name),
            fiber: self.fiber,
            domain_dim: d1 + d2,
            target_dim: t1 + t2,
            patches,
            plus,
            minus,
            dirac: None,
            max_stabilizer: self.max_stabilizer + other.max_stabilizer,
            domain_slots: self.domain_slots.iter().copied().chain(other.domain_slots.iter().map(|i| i + d1)).collect(),
            target_slots: self.target_slots.iter().copied().chain(other.target_slots.iter().map(|i| i + t1)).collect(),
        })
    }

    /// Conjugates patch `a` by constant fibre unitaries `U_a` (acting on the
    /// coefficient index of every mode) and multiplies the ambient
    /// transitions by `zeta(mu_ab)`, giving data twisted by `theta + delta mu`.
    pub fn twisted(&self, n: u64, mu: &[u64], unitaries: &[CMat]) -> Self {
        let v = self.fiber.coeff_dim;
        let lift = |dim: usize, u: &CMat| linalg::kron(&linalg::identity(dim / v), u);
        let mut out = self.clone();
        out.name = format!("twisted({})", self.name);
        for (a, pf) in out.patches.iter_mut().enumerate() {
            let u = unitaries[a].clone();
            let u_inv = u.adjoint();
            let op = pf.operator.clone();
            let (u2, u_inv2) = (u.clone(), u_inv.clone());
            pf.operator =
                Arc::new(move |p| linalg::kron_identity_right(&linalg::kron_identity_left(&u2, &op(p)), &u_inv2));
            if let Some(f) = pf.target_frame.clone() {
                let u2 = u.clone();
                pf.target_frame = Some(Arc::new(move |p| linalg::kron_identity_left(&u2, &f(p))));
            }
            if let Some(f) = pf.domain_frame.clone() {
                let u2 = u.clone();
                pf.domain_frame = Some(Arc::new(move |p| linalg::kron_identity_left(&u2, &f(p))));
            }
            if let Some(s) = pf.symbol.clone() {
                let (u2, u_inv2) = (u.clone(), u_inv.clone());
                pf.symbol = Some(Arc::new(move |p, t, xi| &u2 * s(p, t, xi) * &u_inv2));
            }
            let basis = pf.stabilizer_basis.clone();
            pf.stabilizer_basis = Arc::new(move |p| linalg::kron_identity_left(&u, &basis(p)));
        }
        let conjugate = |data: &ProjectiveBundleData, dim: usize| -> ProjectiveBundleData {
            let mut d = data.clone();
            let cover = d.cover.clone();
            let zero = GerbeCocycle::zero(&cover, n);
            d.twist = if data.twist.n == n { data.twist.clone() } else { zero };
            for (&(a, b), t) in data.transitions.iter() {
                let (va, vb_inv) = (lift(dim, &unitaries[a]), lift(dim, &unitaries[b]).adjoint());
                d.transitions.insert((a, b), t.map(move |q| &va * q * &vb_inv));
            }
            d.rescale_central(mu)
        };
        out.plus = conjugate(&self.plus, self.domain_dim);
        out.minus = conjugate(&self.minus, self.target_dim);
        out
    }

    /// Bott-Toeplitz family conjugated patchwise by fixed unitaries and twisted by
    /// the coboundary of `mu`. Returns the family and the unitaries `U_a`.
    pub fn twisted_bott_toeplitz(atlas: &Atlas, truncation: usize, n: u64, mu: &[u64]) -> (Self, Vec<CMat>) {
        let unitaries = fixture_unitaries(atlas.patches.len());
        let spec = Self::toeplitz_clutching(atlas, truncation, 1, false).twisted(n, mu, &unitaries);
        (spec, unitaries)
    }

    /// Multiplies every ambient transition by `zeta(mu_ab)`; operators are untouched.
    pub fn rescale_central(&self, n: u64, mu: &[u64]) -> Self {
        self.twisted(n, mu, &vec![linalg::identity(self.fiber.coeff_dim); self.patches.len()])
    }

    pub fn twist(&self) -> &GerbeCocycle {
        &self.plus.twist
    }
}

/// Unit vector spanning the `+1` eigenline of `n . sigma`.
pub fn spin_up(n: &Point) -> CMat {
    let p = linalg::spin_projector(n);
    let c0 = p.column(0).into_owned();
    let c1 = p.column(1).into_owned();
    let v = if c0.norm() >= c1.norm() { c0 } else { c1 };
    let nv = v.norm();
    CMat::from_column_slice(2, 1, &[v[0] / nv, v[1] / nv])
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct EllipticReport {
    pub elliptic: bool,
    pub worst_condition: f64,
    /// `(patch, node, theta, xi)` of the worst sample.
    pub witness: Option<(usize, usize, f64, i8)>,
}

fn condition(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let (mx, mn) = (sv.max(), sv.min());
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

/// Invertibility of the symbol at every node, theta sample and `xi = +-1`.
pub fn check_elliptic(spec: &FamilySpec, atlas: &Atlas) -> Result<EllipticReport, FamilyError> {
    let mut report = EllipticReport { elliptic: true, worst_condition: 1.0, witness: None };
    for (a, patch) in atlas.patches.iter().enumerate() {
        let symbol = spec.patches[a].symbol.clone().ok_or_else(|| FamilyError::MissingSymbol(spec.name.clone()))?;
        let worst: Vec<(f64, usize, f64, i8)> = patch
            .points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut w = (1.0, i, 0.0, 1i8);
                for j in 0..THETA_SAMPLES {
                    let theta = 2.0 * std::f64::consts::PI * j as f64 / THETA_SAMPLES as f64;
                    for xi in [1i8, -1] {
                        let k = condition(&symbol(p, theta, xi));
                        if !(k <= w.0) {
                            w = (k, i, theta, xi);
                        }
                    }
                }
                w
            })
            .collect();
        for (k, i, theta, xi) in worst {
            if !(k <= report.worst_condition) {
                report.worst_condition = k;
                report.witness = Some((a, i, theta, xi));
            }
        }
    }
    report.elliptic = report.worst_condition <= KAPPA_MAX;
    Ok(report)
}

/// Largest `|| Q-_ab P_b (Q+_ab)^{-1} - P_a ||` over overlap sample points.
pub fn check_projective_compat(spec: &FamilySpec, atlas: &Atlas) -> Result<f64, FamilyError> {
    if spec.patches.len() != atlas.patches.len() {
        return Err(FamilyError::CoverMismatch { family: spec.patches.len(), atlas: atlas.patches.len() });
    }
    let samples = atlas.overlap_samples();
    let mut worst: f64 = 0.0;
    for edge in atlas.nerve.simplices(1) {
        let (a, b) = (edge[0], edge[1]);
        let (qp, qm) = (spec.plus.transition(a, b)?, spec.minus.transition(a, b)?);
        let r = samples
            .get(edge)
            .par_iter()
            .map(|p| {
                let qpi = linalg::inverse(&qp.eval(p).unwrap()).unwrap();
                let lhs = qm.eval(p).unwrap() * (spec.patches[b].operator)(p) * qpi;
                linalg::op_norm(&(lhs - (spec.patches[a].operator)(p)))
            })
            .reduce(|| 0.0, f64::max);
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Stabiliser choice: the first `rank` columns of each patch's basis.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Stabilization {
    pub rank: usize,
    pub min_singular: f64,
    /// Largest deficiency of `P` alone at the patch centres.
    pub max_cokernel: usize,
}

struct Effective {
    /// `[P D | f]` in the target ambient.
    aug: CMat,
    target: Option<CMat>,
    /// Maps kernel coordinates to the augmented ambient domain.
    embed: CMat,
    target_rank: usize,
}

impl Effective {
    /// `M = T^* [P D | f]`
    fn matrix(&self) -> CMat {
        match &self.target {
            Some(t) => t.adjoint() * &self.aug,
            None => self.aug.clone(),
        }
    }

    fn cols(&self) -> usize {
        self.aug.ncols()
    }

    fn apply(&self, v: &CMat) -> CMat {
        let y = &self.aug * v;
        match &self.target {
            Some(t) => t.adjoint() * y,
            None => y,
        }
    }

    fn apply_adjoint(&self, u: &CMat) -> CMat {
        match &self.target {
            Some(t) => self.aug.adjoint() * (t * u),
            None => self.aug.adjoint() * u,
        }
    }
}

fn effective(pf: &PatchFamily, p: &Point, n_stab: usize, domain_dim: usize) -> Effective {
    let op = (pf.operator)(p);
    let d = pf.domain_frame.as_ref().map(|f| f(p));
    let pd = match &d {
        Some(d) => &op * d,
        None => op.clone(),
    };
    let d = d.unwrap_or_else(|| linalg::identity(domain_dim));
    let f = (pf.stabilizer_basis)(p).columns(0, n_stab).into_owned();
    let mut aug = CMat::zeros(op.nrows(), pd.ncols() + n_stab);
    aug.view_mut((0, 0), (op.nrows(), pd.ncols())).copy_from(&pd);
    aug.view_mut((0, pd.ncols()), (op.nrows(), n_stab)).copy_from(&f);
    let target = pf.target_frame.as_ref().map(|t| t(p));
    let target_rank = target.as_ref().map_or(op.nrows(), |t| t.ncols());
    Effective { aug, target, embed: linalg::block_diag(&d, &linalg::identity(n_stab)), target_rank }
}

fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return vec![];
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Squared singular values of `M` (as eigenvalues of `M M^*`), padded with
/// zeros when `M` has more rows than columns.
fn gram_spectrum(e: &Effective) -> Vec<f64> {
    if e.target_rank == 0 || e.cols() == 0 {
        return vec![0.0; e.target_rank];
    }
    let m = e.matrix();
    let gram = &m * m.adjoint();
    gram.symmetric_eigenvalues().iter().map(|l| l.max(0.0)).collect()
}

/// Number of singular values below `SIGMA_MIN`; no stabiliser of smaller rank can reach the floor.
fn deficiency(e: &Effective) -> usize {
    gram_spectrum(e).iter().filter(|&&l| l.sqrt() < SIGMA_MIN).count()
}

/// Grid nodes plus the patch centres, where the kernel frames are anchored.
fn all_points(atlas: &Atlas) -> Vec<(usize, usize, Point)> {
    let mut pts: Vec<(usize, usize, Point)> = atlas
        .patches
        .iter()
        .enumerate()
        .map(|(a, p)| (a, p.points.len(), p.chart.to_point(&vec![0.0; p.chart.dim()])))
        .collect();
    pts.extend(
        atlas.patches.iter().enumerate().flat_map(|(a, p)| p.points.iter().enumerate().map(move |(i, x)| (a, i, *x))),
    );
    pts
}

fn smallest_singular(e: &Effective) -> f64 {
    if e.target_rank == 0 {
        return f64::INFINITY;
    }
    if e.target_rank > e.cols() {
        return 0.0;
    }
    gram_spectrum(e).iter().copied().fold(f64::INFINITY, f64::min).sqrt()
}

const STABILIZE_CHUNK: usize = 256;

/// Smallest `N` such that `P + f` is surjective with margin `SIGMA_MIN` at every node
/// and patch centre. Ranks are tried upward from zero, patch centres first,
/// and a rank is dropped at the first failing chunk of nodes.
pub fn stabilize(spec: &FamilySpec, atlas: &Atlas) -> Result<Stabilization, FamilyError> {
    let pts = all_points(atlas);
    let max_cokernel = pts[..atlas.patches.len()]
        .iter()
        .map(|(a, _, p)| deficiency(&effective(&spec.patches[*a], p, 0, spec.domain_dim)))
        .max()
        .unwrap_or(0);
    let mut last = 0.0;
    'rank: for n in 0..=spec.max_stabilizer {
        let mut smin = f64::INFINITY;
        for chunk in pts.chunks(STABILIZE_CHUNK) {
            let m = chunk
                .par_iter()
                .map(|(a, _, p)| smallest_singular(&effective(&spec.patches[*a], p, n, spec.domain_dim)))
                .reduce(|| f64::INFINITY, f64::min);
            smin = smin.min(m);
            if smin < SIGMA_MIN {
                last = smin;
                continue 'rank;
            }
        }
        return Ok(Stabilization { rank: n, min_singular: smin, max_cokernel });
    }
    Err(FamilyError::StabilizationFailed {
        reason: format!(
            "no N <= {} makes P + f surjective (cokernel up to {max_cokernel}, last smallest singular value {last:.3e})",
            spec.max_stabilizer
        ),
    })
}

/// Orthonormal kernel of the stabilised operator at `p`, in the augmented ambient domain.
fn kernel_at(spec: &FamilySpec, a: usize, p: &Point, n_stab: usize) -> CMat {
    let e = effective(&spec.patches[a], p, n_stab, spec.domain_dim);
    let (k, _) = linalg::null_space(&e.matrix(), KERNEL_CUT);
    &e.embed * k
}

pub type FrameFn = Arc<dyn Fn(&Point) -> CMat + Send + Sync>;

type Factor = nalgebra::Cholesky<C64, nalgebra::Dyn>;

fn gram_factor(e: &Effective) -> Option<Factor> {
    let m = e.matrix();
    (&m * m.adjoint()).cholesky()
}

/// Kernel of the surjective stabilised operator closest to `reference`:
/// `E Pi R (R^* Pi R)^{-1/2}` with `R = E^* reference` and `Pi` the kernel
/// projector. The Gram solve uses `factor` (of a nearby operator) with
/// iterative refinement. Also returns the smallest eigenvalue of `R^* Pi R`.
fn aligned_kernel_with(e: &Effective, reference: &CMat, factor: Option<&Factor>) -> (CMat, f64) {
    let r = e.embed.adjoint() * reference;
    let degenerate = || (CMat::zeros(e.embed.nrows(), reference.ncols()), 0.0);
    let pr = if e.target_rank == 0 {
        r.clone()
    } else {
        let Some(ch) = factor else { return degenerate() };
        let b = e.apply(&r);
        let scale = b.norm().max(f64::MIN_POSITIVE);
        let mut x = ch.solve(&b);
        for _ in 0..20 {
            let res = &b - e.apply(&e.apply_adjoint(&x));
            if res.norm() <= 1e-15 * scale {
                break;
            }
            x += ch.solve(&res);
        }
        &r - e.apply_adjoint(&x)
    };
    if r.ncols() == 0 {
        return (CMat::zeros(e.embed.nrows(), 0), f64::INFINITY);
    }
    let h = r.adjoint() * &pr;
    let h = (&h + h.adjoint()) * c(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lmin > 0.0) {
        return (degenerate().0, lmin.max(0.0));
    }
    let inv_sqrt = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| c(1.0 / l.sqrt(), 0.0)),
    ));
    let root = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    (&e.embed * pr * root, lmin)
}

fn aligned_kernel(spec: &FamilySpec, a: usize, p: &Point, n_stab: usize, reference: &CMat) -> (CMat, f64) {
    let e = effective(&spec.patches[a], p, n_stab, spec.domain_dim);
    let f = if e.target_rank == 0 { None } else { gram_factor(&e) };
    aligned_kernel_with(&e, reference, f.as_ref())
}

/// Frames at `points[0]` and at nearby points, sharing one factorisation,
/// each with the smallest eigenvalue of its overlap with the reference frame.
pub type FrameStencil = Arc<dyn Fn(&[Point]) -> Vec<(CMat, f64)> + Send + Sync>;

pub fn pointwise_stencil(f: FrameFn) -> FrameStencil {
    Arc::new(move |pts: &[Point]| pts.iter().map(|p| (f(p), f64::INFINITY)).collect())
}

fn kernel_stencil(spec: &FamilySpec, a: usize, n_stab: usize, reference: CMat) -> FrameStencil {
    let spec = spec.clone();
    Arc::new(move |pts: &[Point]| {
        let e0 = effective(&spec.patches[a], &pts[0], n_stab, spec.domain_dim);
        let f = if e0.target_rank == 0 { None } else { gram_factor(&e0) };
        let mut out = vec![aligned_kernel_with(&e0, &reference, f.as_ref())];
        for p in &pts[1..] {
            let e = effective(&spec.patches[a], p, n_stab, spec.domain_dim);
            out.push(aligned_kernel_with(&e, &reference, f.as_ref()));
        }
        out
    })
}

/// Kernel frames aligned to the frame at the patch centre, and the kernel rank.
fn frame_function(spec: &FamilySpec, atlas: &Atlas, a: usize, n_stab: usize) -> (FrameFn, FrameStencil, usize, usize) {
    let chart = &atlas.patches[a].chart;
    let centre = chart.to_point(&vec![0.0; chart.dim()]);
    let reference = kernel_at(spec, a, &centre, n_stab);
    let e = effective(&spec.patches[a], &centre, n_stab, spec.domain_dim);
    let expected = e.cols() - e.target_rank;
    let rank = reference.ncols();
    let stencil = kernel_stencil(spec, a, n_stab, reference.clone());
    let spec = spec.clone();
    (Arc::new(move |p: &Point| aligned_kernel(&spec, a, p, n_stab, &reference).0), stencil, rank, expected)
}

/// `[ker(P + f)] - [E^N]` with its frames.
#[derive(Clone)]
pub struct IndexBundle {
    pub class: KClassDifference,
    pub kernel_rank: usize,
    pub stabilizer: Stabilization,
    pub frames: Vec<FrameFn>,
    pub stencils: Vec<FrameStencil>,
    /// Berry connection, cached on the atlas grid.
    pub connection: ConnectionData,
    /// Stabiliser frames `f_a(p)` in the target ambient.
    pub stabilizer_frames: Vec<FrameFn>,
}

impl std::fmt::Debug for IndexBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IndexBundle")
            .field("kernel_rank", &self.kernel_rank)
            .field("stabilizer", &self.stabilizer)
            .finish()
    }
}

impl IndexBundle {
    pub fn virtual_rank(&self) -> i64 {
        self.kernel_rank as i64 - self.stabilizer.rank as i64
    }
}

const FRAME_OVERLAP_MIN: f64 = 1e-6;

/// Analytic index with the minimal stabiliser.
pub fn analytic_index(spec: &FamilySpec, atlas: &Atlas) -> Result<IndexBundle, FamilyError> {
    let stab = stabilize(spec, atlas)?;
    analytic_index_with(spec, atlas, stab)
}

/// Analytic index for a given stabiliser rank.
pub fn analytic_index_with(spec: &FamilySpec, atlas: &Atlas, stab: Stabilization) -> Result<IndexBundle, FamilyError> {
    if spec.patches.len() != atlas.patches.len() {
        return Err(FamilyError::CoverMismatch { family: spec.patches.len(), atlas: atlas.patches.len() });
    }
    let n = stab.rank;
    let mut frames = Vec::new();
    let mut stencils = Vec::new();
    let mut rank = None;
    for (a, patch) in atlas.patches.iter().enumerate() {
        let (f, st, r, from_shape) = frame_function(spec, atlas, a, n);
        stencils.push(st);
        let expected = *rank.get_or_insert(r);
        if r != expected || r != from_shape {
            return Err(FamilyError::NonConstantKernel { patch: a, node: patch.points.len(), found: r, expected });
        }
        frames.push(f);
    }
    let kernel_rank = rank.unwrap_or(0);
    let (connection, quality) = frame_connection(&stencils, atlas, kernel_rank);
    for (a, &q) in quality.iter().enumerate() {
        if q < FRAME_OVERLAP_MIN {
            return Err(FamilyError::FrameDegeneracy { patch: a, sigma: q });
        }
    }
    let stabilizer_frames: Vec<FrameFn> = spec
        .patches
        .iter()
        .map(|pf| {
            let basis = pf.stabilizer_basis.clone();
            Arc::new(move |p: &Point| basis(p).columns(0, n).into_owned()) as FrameFn
        })
        .collect();

    let cover = atlas.cover();
    let twist = spec.twist().clone();
    let mut minus = ProjectiveBundleData::new(cover.clone(), n, twist.clone());
    let mut plus = ProjectiveBundleData::new(cover.clone(), kernel_rank, twist);
    plus.hermitian = true;
    minus.hermitian = true;
    for edge in cover.edges() {
        let (a, b) = (edge[0], edge[1]);
        let qm = spec.minus.transition(a, b)?;
        let qp = spec.plus.transition(a, b)?;
        let (fa, fb) = (stabilizer_frames[a].clone(), stabilizer_frames[b].clone());
        let qm2 = qm.clone();
        let tau: Arc<dyn Fn(&Point) -> CMat + Send + Sync> =
            Arc::new(move |p: &Point| fa(p).adjoint() * qm2.eval(p).unwrap() * fb(p));
        let tau2 = tau.clone();
        minus.transitions.insert((a, b), Transition::Field(tau));
        let (wa, wb) = (frames[a].clone(), frames[b].clone());
        plus.transitions.insert(
            (a, b),
            Transition::Field(Arc::new(move |p: &Point| {
                let q = linalg::block_diag(&qp.eval(p).unwrap(), &tau2(p));
                wa(p).adjoint() * q * wb(p)
            })),
        );
    }
    // degenerate frame overlaps on the edges
    let samples = atlas.overlap_samples();
    for edge in cover.edges() {
        let t = plus.transition(edge[0], edge[1])?;
        for p in samples.get(edge).iter().step_by(17) {
            let q = t.eval(p).unwrap();
            let sigma = singular_values(&q).last().copied().unwrap_or(1.0);
            if sigma < FRAME_OVERLAP_MIN {
                return Err(FamilyError::FrameDegeneracy { patch: edge[0], sigma });
            }
        }
    }
    let class = KClassDifference::new(plus, minus)?;
    Ok(IndexBundle { class, kernel_rank, stabilizer: stab, frames, stencils, connection, stabilizer_frames })
}

/// A second stabiliser: the preferred columns mixed with the next ones,
/// `f' = (f_j + s f_{j+N}) / sqrt(1 + s^2)`.
pub fn mixed_stabilizer(spec: &FamilySpec, rank: usize, s: f64) -> FamilySpec {
    let mut out = spec.clone();
    for pf in &mut out.patches {
        let basis = pf.stabilizer_basis.clone();
        pf.stabilizer_basis = Arc::new(move |p| {
            let b = basis(p);
            let mut m = b.clone();
            for j in 0..rank.min(b.ncols()) {
                if j + rank < b.ncols() {
                    let col = (b.column(j) + b.column(j + rank) * c(s, 0.0)) * c(1.0 / (1.0 + s * s).sqrt(), 0.0);
                    m.set_column(j, &col);
                }
            }
            m
        });
    }
    out
}

/// `A = W^* dW` by central differences of step `DIFF_STEP`, with the worst frame quality.
fn stencil_potential(w: &FrameStencil, chart: &crate::atlas::Chart, x: &[f64]) -> (Vec<CMat>, f64) {
    let mut pts = vec![chart.to_point(x)];
    for k in 0..x.len() {
        for s in [1.0, -1.0] {
            let mut y = x.to_vec();
            y[k] += s * DIFF_STEP;
            pts.push(chart.to_point(&y));
        }
    }
    let ws = w(&pts);
    let quality = ws.iter().map(|(_, q)| *q).fold(f64::INFINITY, f64::min);
    let w0 = ws[0].0.adjoint();
    let a = (0..x.len()).map(|k| &w0 * (&ws[1 + 2 * k].0 - &ws[2 + 2 * k].0) * c(0.5 / DIFF_STEP, 0.0)).collect();
    (a, quality)
}

/// Compression of the trivial connection onto smoothly varying frames,
/// cached on the grid with one ghost layer. Also returns, per patch, the
/// smallest frame quality met while filling the cache.
pub fn frame_connection(frames: &[FrameStencil], atlas: &Atlas, rank: usize) -> (ConnectionData, Vec<f64>) {
    let d = atlas.dim();
    let mut quality = Vec::new();
    let patches = atlas
        .patches
        .iter()
        .enumerate()
        .map(|(a, patch)| {
            let chart = patch.chart.clone();
            let w = frames[a].clone();
            let (w2, chart2) = (w.clone(), chart.clone());
            let potential: PotentialFn = Arc::new(move |x: &[f64]| stencil_potential(&w2, &chart2, x).0);
            if d == 0 {
                let q = patch.points.iter().map(|p| w(&[*p])[0].1).fold(f64::INFINITY, f64::min);
                quality.push(q);
                return PatchConnection { potential, cache: None, curvature: None };
            }
            let ghost = 1;
            let shape: Vec<usize> = patch.shape.iter().map(|n| n + 2 * ghost).collect();
            let h = patch.spacing();
            let count: usize = shape.iter().product();
            let values: Vec<(Vec<CMat>, f64)> = (0..count)
                .into_par_iter()
                .map(|idx| {
                    let m = unravel(idx, &shape);
                    let x: Vec<f64> = (0..d).map(|k| patch.lo[k] + (m[k] as f64 - ghost as f64 + 0.5) * h[k]).collect();
                    stencil_potential(&w, &chart, &x)
                })
                .collect();
            quality.push(values.iter().map(|(_, q)| *q).fold(f64::INFINITY, f64::min));
            debug_assert_eq!(ravel(&vec![0; d], &shape), 0);
            let values = values.into_iter().map(|(v, _)| v).collect();
            PatchConnection { potential, cache: Some(GridCache { ghost, shape, values }), curvature: None }
        })
        .collect();
    (ConnectionData { rank, dim: d, patches }, quality)
}

/// Berry connection on the kernel bundle.
pub fn berry_connection(index: &IndexBundle, _atlas: &Atlas) -> ConnectionData {
    index.connection.clone()
}

/// Induced connection on the stabiliser bundle.
pub fn stabilizer_connection(index: &IndexBundle, atlas: &Atlas) -> ConnectionData {
    let st: Vec<FrameStencil> = index.stabilizer_frames.iter().cloned().map(pointwise_stencil).collect();
    frame_connection(&st, atlas, index.stabilizer.rank).0
}

/// Checks the twisted index against an untwisted one through the witness
/// `T_a = W_a^* V_a^{-1} W'_a`, after removing the central factors `mu`.
pub fn untwisting_witness(
    twisted: &IndexBundle,
    untwisted: &IndexBundle,
    spec_unitaries: &[CMat],
    domain_dim: usize,
    coeff_dim: usize,
) -> Vec<Transition> {
    twisted
        .frames
        .iter()
        .zip(&untwisted.frames)
        .zip(spec_unitaries)
        .map(|((wt, wu), u)| {
            let n_stab = twisted.stabilizer.rank;
            let v = linalg::block_diag(
                &linalg::kron(&linalg::identity(domain_dim / coeff_dim), u),
                &stabilizer_unitary(u, n_stab, coeff_dim),
            );
            let v_inv = v.adjoint();
            let (wt, wu) = (wt.clone(), wu.clone());
            Transition::Field(Arc::new(move |p: &Point| wu(p).adjoint() * &v_inv * wt(p)))
        })
        .collect()
}

/// The stabiliser trivialisation of a conjugated family is untouched by `U_a`.
fn stabilizer_unitary(_u: &CMat, n: usize, _coeff_dim: usize) -> CMat {
    linalg::identity(n)
}

/// Gauge parameters used to build twisted fixtures.
pub fn coboundary_twist(atlas: &Atlas, n: u64, mu: &[u64]) -> GerbeCocycle {
    let cover = atlas.cover();
    gerbe::gauge_transform(&cover, &GerbeCocycle::zero(&cover, n), mu)
}

pub fn default_tolerances() -> BundleTolerances {
    BundleTolerances::default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chern_weil::{chern_character_form, curvature, integrate_top};

    #[test]
    fn scalar_winding_on_a_point() {
        let atlas = Atlas::single_point();
        for m in 0..3 {
            let spec = FamilySpec::scalar_winding(&atlas, 10, m);
            let idx = analytic_index(&spec, &atlas).unwrap();
            assert_eq!(idx.stabilizer.rank, m);
            assert_eq!(idx.virtual_rank(), -(m as i64));
        }
    }

    #[test]
    fn invertible_family_has_zero_index() {
        let atlas = Atlas::sphere_two_patch(8);
        let spec = FamilySpec::invertible(&atlas, 8, 2);
        let idx = analytic_index(&spec, &atlas).unwrap();
        assert_eq!((idx.kernel_rank, idx.stabilizer.rank), (0, 0));
        assert!(check_elliptic(&spec, &atlas).unwrap().elliptic);
    }

    #[test]
    fn bott_toeplitz_kernel_is_a_line() {
        let atlas = Atlas::sphere_two_patch(16);
        let spec = FamilySpec::toeplitz_clutching(&atlas, 12, 1, false);
        assert_eq!(check_projective_compat(&spec, &atlas).unwrap(), 0.0);
        let idx = analytic_index(&spec, &atlas).unwrap();
        assert_eq!((idx.kernel_rank, idx.stabilizer.rank), (1, 2));
        idx.class.plus.validate(&atlas.overlap_samples(), &BundleTolerances::default()).unwrap();
        let adj = analytic_index(&FamilySpec::toeplitz_clutching(&atlas, 12, 1, true), &atlas).unwrap();
        assert_eq!((adj.kernel_rank, adj.stabilizer.rank), (1, 0));
    }

    #[test]
    fn bott_toeplitz_berry_degree() {
        let atlas = Atlas::sphere_two_patch(32);
        let spec = FamilySpec::toeplitz_clutching(&atlas, 12, 1, false);
        let idx = analytic_index(&spec, &atlas).unwrap();
        let conn = berry_connection(&idx, &atlas);
        let ch = integrate_top(&chern_character_form(&curvature(&conn, &atlas).unwrap()), &atlas).unwrap();
        assert!((ch - 1.0).abs() < 1e-2, "{ch}");
    }

    #[test]
    fn twisted_index_untwists_by_witness() {
        let atlas = Atlas::sphere_three_patch(12);
        let samples = atlas.overlap_samples();
        let tol = BundleTolerances::default();
        let mu = [1, 2, 0];
        let (tw, unitaries) = FamilySpec::twisted_bott_toeplitz(&atlas, 8, 3, &mu);
        assert!(!tw.twist().is_zero());
        tw.plus.validate(&samples, &tol).unwrap();
        tw.minus.validate(&samples, &tol).unwrap();
        assert!(check_projective_compat(&tw, &atlas).unwrap() < 1e-12);
        let untw = FamilySpec::toeplitz_clutching(&atlas, 8, 1, false).rescale_central(3, &[0, 0, 0]);
        let it = analytic_index(&tw, &atlas).unwrap();
        let iu = analytic_index(&untw, &atlas).unwrap();
        it.class.plus.validate(&samples, &tol).unwrap();
        let minus_mu: Vec<u64> = mu.iter().map(|m| (3 - m) % 3).collect();
        let rescaled = it.class.plus.rescale_central(&minus_mu);
        assert!(rescaled.twist.is_zero());
        let witness = untwisting_witness(&it, &iu, &unitaries, tw.domain_dim, 2);
        assert!(rescaled.check_equivalence_witness(&iu.class.plus, &witness, &samples, &tol).unwrap());
        let wrong = untwisting_witness(&it, &iu, &fixture_unitaries(4)[1..], tw.domain_dim, 2);
        assert!(!rescaled.check_equivalence_witness(&iu.class.plus, &wrong, &samples, &tol).unwrap());
    }

    #[test]
    fn vanishing_symbol_is_not_elliptic() {
        let atlas = Atlas::single_point();
        let mut spec = FamilySpec::invertible(&atlas, 4, 1);
        spec.patches[0].symbol = Some(Arc::new(|_, theta: f64, _| CMat::from_element(1, 1, c(theta.sin(), 0.0))));
        let r = check_elliptic(&spec, &atlas).unwrap();
        assert!(!r.elliptic && r.witness.is_some());
    }
}
