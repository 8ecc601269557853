//! Chern–Weil theory on a patch atlas.
//!
//! Connections are stored per patch as closures returning the coefficient
//! matrices `A_k` of `A = sum_k A_k dx^k` in chart coordinates, optionally
//! with a cache of values on the grid extended by ghost layers.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::atlas::{ravel, Atlas, DIFF_STEP};
use crate::bundle::{BundleError, Point, ProjectiveBundleData, Transition};
use crate::forms::{multi_indices, Form, MatrixForm, ScalarForm};
use crate::linalg::{self, c, CMat, C64, I};

pub use crate::thom::{thom_rr_check, ThomReport, ThomScenario};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChernWeilError {
    #[error("atlas and bundle are incompatible: {0}")]
    IncompatibleAtlas(String),
    #[error("grid of patch {patch} ({shape:?}) is too coarse for central differences")]
    GridTooCoarse { patch: usize, shape: Vec<usize> },
    #[error("form of dimension {form} integrated over atlas of dimension {atlas}")]
    DegreeMismatch { form: usize, atlas: usize },
    #[error("Thom form leaks {leak:.3e} of its mass past the disc boundary (tolerance {tolerance:.1e})")]
    SupportLeak { leak: f64, tolerance: f64 },
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

/// `x -> [A_0(x), ..., A_{d-1}(x)]` in chart coordinates.
pub type PotentialFn = Arc<dyn Fn(&[f64]) -> Vec<CMat> + Send + Sync>;
/// `x -> 2-form components` in lexicographic basis order.
pub type CurvatureFn = Arc<dyn Fn(&[f64]) -> Vec<CMat> + Send + Sync>;

/// Potentials sampled on a patch grid extended by `ghost` layers per side.
#[derive(Clone, Debug)]
pub struct GridCache {
    pub ghost: usize,
    pub shape: Vec<usize>,
    pub values: Vec<Vec<CMat>>,
}

#[derive(Clone)]
pub struct PatchConnection {
    pub potential: PotentialFn,
    pub cache: Option<GridCache>,
    pub curvature: Option<CurvatureFn>,
}

impl PatchConnection {
    pub fn analytic(potential: PotentialFn) -> Self {
        Self { potential, cache: None, curvature: None }
    }
}

#[derive(Clone)]
pub struct ConnectionData {
    pub rank: usize,
    pub dim: usize,
    pub patches: Vec<PatchConnection>,
}

impl std::fmt::Debug for ConnectionData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConnectionData")
            .field("rank", &self.rank)
            .field("patches", &self.patches.len())
            .field("analytic_curvature", &self.has_curvature_override())
            .finish()
    }
}

impl ConnectionData {
    pub fn has_curvature_override(&self) -> bool {
        self.patches.iter().all(|p| p.curvature.is_some())
    }

    /// Same potentials with any analytic curvature dropped.
    pub fn without_override(&self) -> Self {
        let mut out = self.clone();
        for p in &mut out.patches {
            p.curvature = None;
        }
        out
    }

    /// The zero connection.
    pub fn flat(rank: usize, atlas: &Atlas) -> Self {
        let d = atlas.dim();
        let patches = atlas
            .patches
            .iter()
            .map(|_| PatchConnection {
                potential: Arc::new(move |_: &[f64]| vec![CMat::zeros(rank, rank); d]),
                cache: None,
                curvature: Some(Arc::new(move |_: &[f64]| vec![CMat::zeros(rank, rank); d * d.saturating_sub(1) / 2])),
            })
            .collect();
        Self { rank, dim: d, patches }
    }

    /// Connection on the `n`-th tensor power: `sum_j 1 (x) .. A .. (x) 1`.
    pub fn tensor_power(&self, n: usize) -> Self {
        let patches = self
            .patches
            .iter()
            .map(|p| {
                let pot = p.potential.clone();
                let r = self.rank;
                let mut pc = PatchConnection::analytic(Arc::new(move |x: &[f64]| {
                    pot(x).iter().map(|a| kron_sum_power(a, r, n)).collect()
                }));
                if let Some(f) = p.curvature.clone() {
                    pc.curvature =
                        Some(Arc::new(move |x: &[f64]| f(x).iter().map(|g| kron_sum_power(g, r, n)).collect()));
                }
                pc
            })
            .collect();
        Self { rank: self.rank.pow(n as u32), dim: self.dim, patches }
    }

    /// Block-diagonal connection on a direct sum.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let patches = self
            .patches
            .iter()
            .zip(&other.patches)
            .map(|(p, q)| {
                let (a, b) = (p.potential.clone(), q.potential.clone());
                let mut pc = PatchConnection::analytic(Arc::new(move |x: &[f64]| {
                    a(x).iter().zip(b(x)).map(|(u, v)| linalg::block_diag(u, &v)).collect()
                }));
                if let (Some(f), Some(g)) = (p.curvature.clone(), q.curvature.clone()) {
                    pc.curvature = Some(Arc::new(move |x: &[f64]| {
                        f(x).iter().zip(g(x)).map(|(u, v)| linalg::block_diag(u, &v)).collect()
                    }));
                }
                pc
            })
            .collect();
        Self { rank: self.rank + other.rank, dim: self.dim, patches }
    }

    /// Connection on `E (x) W`: `A_E (x) 1 + 1 (x) A_W`.
    pub fn tensor(&self, other: &Self) -> Self {
        let (r, s) = (self.rank, other.rank);
        let patches = self
            .patches
            .iter()
            .zip(&other.patches)
            .map(|(p, q)| {
                let (a, b) = (p.potential.clone(), q.potential.clone());
                PatchConnection::analytic(Arc::new(move |x: &[f64]| {
                    a(x).iter()
                        .zip(b(x))
                        .map(|(u, v)| linalg::kron(u, &linalg::identity(s)) + linalg::kron(&linalg::identity(r), &v))
                        .collect()
                }))
            })
            .collect();
        Self { rank: r * s, dim: self.dim, patches }
    }
}

fn kron_sum_power(a: &CMat, r: usize, n: usize) -> CMat {
    let mut out = CMat::zeros(r.pow(n as u32), r.pow(n as u32));
    for j in 0..n {
        let left = linalg::identity(r.pow(j as u32));
        let right = linalg::identity(r.pow((n - j - 1) as u32));
        out += linalg::kron(&linalg::kron(&left, a), &right);
    }
    out
}

/// Per-patch, per-node form samples.
#[derive(Clone, Debug)]
pub struct FormField<T> {
    pub dim: usize,
    pub patches: Vec<Vec<Form<T>>>,
}

pub type MatrixFormField = FormField<CMat>;
pub type ScalarFormField = FormField<C64>;

impl<T: crate::forms::Coefficient> FormField<T> {
    pub fn map<U>(&self, f: impl Fn(&Form<T>) -> Form<U> + Sync) -> FormField<U>
    where
        T: Sync,
        U: Send,
    {
        FormField { dim: self.dim, patches: self.patches.iter().map(|p| p.par_iter().map(&f).collect()).collect() }
    }

    pub fn zip<U, V>(&self, other: &FormField<U>, f: impl Fn(&Form<T>, &Form<U>) -> Form<V> + Sync) -> FormField<V>
    where
        T: Sync,
        U: Sync,
        V: Send,
    {
        FormField {
            dim: self.dim,
            patches: self
                .patches
                .iter()
                .zip(&other.patches)
                .map(|(p, q)| p.par_iter().zip(q.par_iter()).map(|(x, y)| f(x, y)).collect())
                .collect(),
        }
    }
}

impl ScalarFormField {
    pub fn wedge(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.wedge(b))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn scaled(&self, s: C64) -> Self {
        self.map(|a| a.scaled(s))
    }

    pub fn part(&self, k: usize) -> Self {
        self.map(|a| a.part(k))
    }

    /// `n`-fold wedge power.
    pub fn power(&self, n: usize) -> Self {
        let mut acc = self.map(|a| ScalarForm::one(a.dim()));
        for _ in 0..n {
            acc = acc.wedge(self);
        }
        acc
    }
}

/// Potentials evaluated at points of the overlap and pulled back to patch `a`:
/// `Q_ab A_b Q_ab^{-1} - dQ_ab Q_ab^{-1}` gives the candidate in `a`'s frame.
fn transported_candidate(
    atlas_charts: &[crate::atlas::Chart],
    a: usize,
    b: usize,
    x: &[f64],
    q: &Transition,
    raw_b: &PotentialFn,
) -> Vec<CMat> {
    let ca = &atlas_charts[a];
    let cb = &atlas_charts[b];
    let p = ca.to_point(x);
    let xb = cb.from_point(&p).expect("point of overlap lies in chart b");
    let d = x.len();
    let ab = raw_b(&xb);
    let qv = q.eval(&p).expect("field transition");
    let qinv = linalg::inverse(&qv).expect("invertible transition");
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += DIFF_STEP;
        xm[k] -= DIFF_STEP;
        let yp = cb.from_point(&ca.to_point(&xp)).unwrap();
        let ym = cb.from_point(&ca.to_point(&xm)).unwrap();
        let mut pulled = CMat::zeros(qv.nrows(), qv.nrows());
        for i in 0..d {
            let jik = (yp[i] - ym[i]) / (2.0 * DIFF_STEP);
            pulled += &ab[i] * c(jik, 0.0);
        }
        let dq = (q.eval(&ca.to_point(&xp)).unwrap() - q.eval(&ca.to_point(&xm)).unwrap()) * c(0.5 / DIFF_STEP, 0.0);
        out.push(&qv * pulled * &qinv - dq * &qinv);
    }
    out
}

/// Patches the raw per-patch potentials into a connection compatible with
/// the transitions, using the partition of unity.
pub fn average_connection(
    e: &ProjectiveBundleData,
    raw: &[PotentialFn],
    atlas: &Atlas,
) -> Result<ConnectionData, ChernWeilError> {
    let np = atlas.patches.len();
    if raw.len() != np || e.cover.set_count() != np {
        return Err(ChernWeilError::IncompatibleAtlas(format!(
            "{} raw potentials, {} cover sets, {} patches",
            raw.len(),
            e.cover.set_count(),
            np
        )));
    }
    let charts: Arc<Vec<_>> = Arc::new(atlas.patches.iter().map(|p| p.chart.clone()).collect());
    let mut patches = Vec::with_capacity(np);
    for a in 0..np {
        let mut transitions = Vec::with_capacity(np);
        for b in 0..np {
            let t = if a == b {
                Transition::Constant(linalg::identity(e.rank))
            } else if e.cover.base.index_of(&[a.min(b), a.max(b)]).is_some() {
                e.transition(a, b)?
            } else {
                // disjoint supports never contribute
                Transition::Constant(linalg::identity(e.rank))
            };
            if matches!(t, Transition::Sampled(_)) {
                return Err(ChernWeilError::IncompatibleAtlas(format!(
                    "transition ({a}, {b}) is sampled; averaging needs transitions defined off the grid"
                )));
            }
            transitions.push(t);
        }
        let (charts, raw, pou, rank) = (charts.clone(), raw.to_vec(), atlas.pou.clone(), e.rank);
        let d = atlas.dim();
        let potential: PotentialFn = Arc::new(move |x: &[f64]| {
            let p = charts[a].to_point(x);
            let w = pou.weights(&p);
            let mut acc = vec![CMat::zeros(rank, rank); d];
            for b in 0..w.len() {
                if w[b] <= 0.0 {
                    continue;
                }
                let cand =
                    if a == b { raw[a](x) } else { transported_candidate(&charts, a, b, x, &transitions[b], &raw[b]) };
                for k in 0..d {
                    acc[k] += &cand[k] * c(w[b], 0.0);
                }
            }
            acc
        });
        patches.push(PatchConnection::analytic(potential));
    }
    Ok(ConnectionData { rank: e.rank, dim: atlas.dim(), patches })
}

/// Largest violation of `A_b = Q^{-1} A_a Q + Q^{-1} dQ` over the overlap
/// correspondences.
pub fn compatibility_residual(
    conn: &ConnectionData,
    e: &ProjectiveBundleData,
    atlas: &Atlas,
) -> Result<f64, ChernWeilError> {
    compatibility_residual_strided(conn, e, atlas, 1)
}

/// As [`compatibility_residual`], on every `stride`-th overlap correspondence.
pub fn compatibility_residual_strided(
    conn: &ConnectionData,
    e: &ProjectiveBundleData,
    atlas: &Atlas,
    stride: usize,
) -> Result<f64, ChernWeilError> {
    let mut worst: f64 = 0.0;
    for (&(a, b), entries) in &atlas.overlaps {
        if e.cover.base.index_of(&[a.min(b), a.max(b)]).is_none() {
            continue;
        }
        let q = e.transition(a, b)?;
        let ca = &atlas.patches[a].chart;
        let picked: Vec<_> = entries.iter().step_by(stride.max(1)).collect();
        let residuals: Vec<f64> = picked
            .par_iter()
            .map(|entry| {
                let x = &atlas.patches[a].nodes[entry.node];
                let p = atlas.patches[a].points[entry.node];
                let qv = q.eval(&p).expect("transition value");
                let qinv = linalg::inverse(&qv).expect("invertible");
                let aa = (conn.patches[a].potential)(x);
                let ab = (conn.patches[b].potential)(&entry.coords);
                let mut r: f64 = 0.0;
                for k in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += DIFF_STEP;
                    xm[k] -= DIFF_STEP;
                    let dq = (q.eval(&ca.to_point(&xp)).unwrap() - q.eval(&ca.to_point(&xm)).unwrap())
                        * c(0.5 / DIFF_STEP, 0.0);
                    let mut pulled = CMat::zeros(conn.rank, conn.rank);
                    for i in 0..x.len() {
                        pulled += &ab[i] * c(entry.jacobian[i][k], 0.0);
                    }
                    let expected = &qinv * &aa[k] * &qv + &qinv * dq;
                    r = r.max(linalg::max_abs(&(pulled - expected)));
                }
                r
            })
            .collect();
        worst = residuals.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

fn two_form_indices(d: usize) -> &'static [Vec<usize>] {
    multi_indices(d, 2)
}

/// `F = dA + A ^ A` at chart point `x` with central differences of step `h`.
pub fn pointwise_curvature(potential: &PotentialFn, x: &[f64], h: &[f64]) -> Vec<CMat> {
    let d = x.len();
    let a0 = potential(x);
    let mut deriv: Vec<Vec<CMat>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h[k];
        xm[k] -= h[k];
        let (ap, am) = (potential(&xp), potential(&xm));
        deriv.push(ap.iter().zip(&am).map(|(u, v)| (u - v) * c(0.5 / h[k], 0.0)).collect());
    }
    assemble_curvature(&a0, &deriv)
}

/// `deriv[k][l] = d_k A_l`.
fn assemble_curvature(a: &[CMat], deriv: &[Vec<CMat>]) -> Vec<CMat> {
    let d = a.len();
    two_form_indices(d)
        .iter()
        .map(|kl| {
            let (k, l) = (kl[0], kl[1]);
            &deriv[k][l] - &deriv[l][k] + &a[k] * &a[l] - &a[l] * &a[k]
        })
        .collect()
}

fn curvature_from_cache(cache: &GridCache, multi: &[usize], h: &[f64]) -> Vec<CMat> {
    let d = multi.len();
    let g = cache.ghost;
    let at = |offset: &[isize]| -> &Vec<CMat> {
        let m: Vec<usize> = multi.iter().zip(offset).map(|(&i, &o)| (i + g).wrapping_add_signed(o)).collect();
        &cache.values[ravel(&m, &cache.shape)]
    };
    let zero = vec![0isize; d];
    let a0 = at(&zero);
    let deriv: Vec<Vec<CMat>> = (0..d)
        .map(|k| {
            let mut up = zero.clone();
            let mut dn = zero.clone();
            up[k] = 1;
            dn[k] = -1;
            at(&up).iter().zip(at(&dn)).map(|(u, v)| (u - v) * c(0.5 / h[k], 0.0)).collect()
        })
        .collect();
    assemble_curvature(a0, &deriv)
}

fn curvature_form(d: usize, comps: Vec<CMat>, rank: usize) -> MatrixForm {
    if d < 2 {
        return Form::zero(d, CMat::zeros(rank, rank));
    }
    Form::homogeneous(d, 2, comps)
}

/// Curvature samples on every node of every patch.
pub fn curvature(conn: &ConnectionData, atlas: &Atlas) -> Result<MatrixFormField, ChernWeilError> {
    let d = atlas.dim();
    let mut out = Vec::with_capacity(atlas.patches.len());
    for (a, patch) in atlas.patches.iter().enumerate() {
        let pc = &conn.patches[a];
        if d > 0 && pc.curvature.is_none() {
            let coarse = patch.shape.iter().any(|&n| n < 3) || pc.cache.as_ref().is_some_and(|c| c.ghost < 1);
            if coarse {
                return Err(ChernWeilError::GridTooCoarse { patch: a, shape: patch.shape.clone() });
            }
        }
        let h = patch.spacing();
        let forms: Vec<MatrixForm> = (0..patch.node_count())
            .into_par_iter()
            .map(|i| {
                let x = &patch.nodes[i];
                if d < 2 {
                    return curvature_form(d, vec![], conn.rank);
                }
                let comps = if let Some(f) = &pc.curvature {
                    f(x)
                } else if let Some(cache) = &pc.cache {
                    curvature_from_cache(cache, &patch.multi_index(i), &h)
                } else {
                    pointwise_curvature(&pc.potential, x, &h)
                };
                curvature_form(d, comps, conn.rank)
            })
            .collect();
        out.push(forms);
    }
    Ok(FormField { dim: d, patches: out })
}

/// `X = i F / 2 pi`.
fn chern_root(f: &MatrixForm) -> MatrixForm {
    f.scaled(I / (2.0 * std::f64::consts::PI))
}

/// `tr exp(i F / 2 pi)`.
pub fn chern_character_form(f: &MatrixFormField) -> ScalarFormField {
    f.map(|form| {
        let rank = form.component(0, 0).nrows();
        chern_root(form).exp_nilpotent(linalg::identity(rank)).trace()
    })
}

/// `sum_j coeffs[j] tr(X^j)` for `X = i F / 2 pi`.
fn trace_series(form: &MatrixForm, coeffs: &[f64]) -> ScalarForm {
    let rank = form.component(0, 0).nrows();
    let x = chern_root(form);
    let mut pow = Form::constant(form.dim(), linalg::identity(rank));
    let mut acc = ScalarForm::scalar_zero(form.dim());
    for (j, &cj) in coeffs.iter().enumerate() {
        if j > 0 {
            pow = pow.wedge(&x);
        }
        if cj != 0.0 {
            acc.add_assign(&pow.trace().scaled(c(cj, 0.0)));
        }
    }
    acc
}

/// `log(x / (1 - e^{-x}))` through degree 6.
pub const LOG_TODD: [f64; 7] = [0.0, 0.5, -1.0 / 24.0, 0.0, 1.0 / 2880.0, 0.0, -1.0 / 90720.0];
/// `log((x/2) / sinh(x/2))` through degree 6.
pub const LOG_A_HAT: [f64; 7] = [0.0, 0.0, -1.0 / 24.0, 0.0, 1.0 / 2880.0, 0.0, -1.0 / 90720.0];

fn multiplicative(f: &MatrixFormField, log_series: &[f64], sign: f64) -> ScalarFormField {
    f.map(|form| trace_series(form, log_series).scaled(c(sign, 0.0)).exp())
}

pub fn todd_form(f: &MatrixFormField) -> ScalarFormField {
    multiplicative(f, &LOG_TODD, 1.0)
}

pub fn todd_inverse_form(f: &MatrixFormField) -> ScalarFormField {
    multiplicative(f, &LOG_TODD, -1.0)
}

pub fn a_hat_form(f: &MatrixFormField) -> ScalarFormField {
    multiplicative(f, &LOG_A_HAT, 1.0)
}

/// `c_1(det E) = (i / 2 pi) tr F`.
pub fn det_line_c1(f: &MatrixFormField) -> ScalarFormField {
    f.map(|form| chern_root(form).trace().part(2.min(form.dim())))
}

/// `sum_a sum_i phi_a w_i omega_top`, summed patch by patch in node order.
pub fn integrate(omega: &ScalarFormField, atlas: &Atlas) -> Result<C64, ChernWeilError> {
    if omega.dim != atlas.dim() {
        return Err(ChernWeilError::DegreeMismatch { form: omega.dim, atlas: atlas.dim() });
    }
    let mut total = c(0.0, 0.0);
    for (patch, forms) in atlas.patches.iter().zip(&omega.patches) {
        for i in 0..patch.node_count() {
            total += forms[i].top() * (patch.pou[i] * patch.weights[i]);
        }
    }
    Ok(total)
}

/// Integrals of each even degree part, `result[j]` for degree `2j`
/// (only the top degree is non-zero on a closed base).
pub fn integrate_top(omega: &ScalarFormField, atlas: &Atlas) -> Result<f64, ChernWeilError> {
    Ok(integrate(omega, atlas)?.re)
}

/// Largest disagreement of a globally defined scalar form across overlaps,
/// recomputed at the overlap points from the patch-`b` side.
pub fn overlap_disagreement(scalar_at: impl Fn(usize, &[f64]) -> ScalarForm + Sync, atlas: &Atlas) -> f64 {
    let mut worst: f64 = 0.0;
    for (&(a, b), entries) in &atlas.overlaps {
        let r = entries
            .par_iter()
            .map(|e| {
                let fa = scalar_at(a, &atlas.patches[a].nodes[e.node]);
                let fb = scalar_at(b, &e.coords).pullback(&e.jacobian);
                fa.add(&fb.scaled(c(-1.0, 0.0))).max_abs()
            })
            .reduce(|| 0.0, f64::max);
        worst = worst.max(r);
    }
    worst
}

/// Unit vector spanning the `+1` eigenline of `n . sigma`.
fn spin_up(n: &Point) -> CMat {
    let p = linalg::spin_projector(n);
    let c0 = p.column(0).into_owned();
    let c1 = p.column(1).into_owned();
    let v = if c0.norm() >= c1.norm() { c0 } else { c1 };
    let nv = v.norm();
    CMat::from_column_slice(2, 1, &[v[0] / nv, v[1] / nv])
}

/// Local frame of the spin line over `p` in the gauge of a chart centred at `centre`.
fn spin_frame(p: &Point, centre: &Point) -> CMat {
    let e = spin_up(centre);
    let v = linalg::spin_projector(p) * e;
    let nv = v.norm();
    v * c(1.0 / nv, 0.0)
}

/// Transition of the degree-`k` monopole line between charts centred at `ca`, `cb`.
pub fn monopole_transition(k: i64, ca: Point, cb: Point) -> Transition {
    Transition::Field(Arc::new(move |p: &Point| {
        let u = (spin_frame(p, &ca).adjoint() * spin_frame(p, &cb))[(0, 0)];
        let phase = (u / u.norm()).conj();
        CMat::from_element(1, 1, phase.powi(k as i32))
    }))
}

/// `A = -i k (x dy - y dx) / (1 + r^2)` in any stereographic chart.
pub fn monopole_potential(k: i64) -> PotentialFn {
    let k = k as f64;
    Arc::new(move |x: &[f64]| {
        let s = 1.0 + x[0] * x[0] + x[1] * x[1];
        vec![CMat::from_element(1, 1, I * (k * x[1] / s)), CMat::from_element(1, 1, -I * (k * x[0] / s))]
    })
}

pub fn monopole_curvature(k: i64) -> CurvatureFn {
    let k = k as f64;
    Arc::new(move |x: &[f64]| {
        let s = 1.0 + x[0] * x[0] + x[1] * x[1];
        vec![CMat::from_element(1, 1, -I * (2.0 * k / (s * s)))]
    })
}

/// Degree-`k` monopole line bundle with its rotation-invariant connection
/// on a sphere atlas; `integral c_1 = +k`.
pub fn monopole(k: i64, atlas: &Atlas, n: u64) -> (ProjectiveBundleData, ConnectionData) {
    let cover = atlas.cover();
    let centres: Vec<Point> = atlas.patches.iter().map(|p| p.chart.centre()).collect();
    let mut e = ProjectiveBundleData::new(cover.clone(), 1, crate::gerbe::GerbeCocycle::zero(&cover, n));
    e.hermitian = true;
    for edge in cover.edges() {
        let (a, b) = (edge[0], edge[1]);
        e.transitions.insert((a, b), monopole_transition(k, centres[a], centres[b]));
    }
    let patches = atlas
        .patches
        .iter()
        .map(|_| PatchConnection {
            potential: monopole_potential(k),
            cache: None,
            curvature: Some(monopole_curvature(k)),
        })
        .collect();
    (e, ConnectionData { rank: 1, dim: 2, patches })
}

/// Rank-2 projective bundle `U_a (L^k (x) C^2) U_b^{-1}` with transitions
/// rescaled by `zeta_n^{mu_ab}`, so its twist is `delta mu`; the connection is
/// the conjugated monopole connection.
pub fn twisted_monopole(k: i64, atlas: &Atlas, n: u64, mu: &[u64]) -> (ProjectiveBundleData, ConnectionData) {
    let (line, conn) = monopole(k, atlas, n);
    let u = linalg::fixture_unitaries(atlas.patches.len());
    let mut e = ProjectiveBundleData::new(line.cover.clone(), 2, line.twist.clone());
    e.hermitian = true;
    for (&(a, b), q) in &line.transitions {
        let (ua, ub_inv) = (u[a].clone(), u[b].adjoint());
        e.transitions.insert((a, b), q.map(move |m| &ua * linalg::kron(m, &linalg::identity(2)) * &ub_inv));
    }
    let patches = conn
        .patches
        .iter()
        .enumerate()
        .map(|(a, p)| {
            let (ua, pot) = (u[a].clone(), p.potential.clone());
            let conj = move |m: &CMat| &ua * linalg::kron(m, &linalg::identity(2)) * ua.adjoint();
            let conj2 = conj.clone();
            let curv = p.curvature.clone().expect("monopole carries its curvature");
            PatchConnection {
                potential: Arc::new(move |x: &[f64]| pot(x).iter().map(&conj).collect()),
                cache: None,
                curvature: Some(Arc::new(move |x: &[f64]| curv(x).iter().map(&conj2).collect())),
            }
        })
        .collect();
    (e.rescale_central(mu), ConnectionData { rank: 2, dim: 2, patches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{BundleTolerances, OverlapSamples};
    use crate::forms::power_series;

    #[test]
    fn monopole_is_valid_and_compatible() {
        for atlas in [Atlas::sphere_two_patch(24), Atlas::sphere_three_patch(24)] {
            for k in [-2, 1, 3] {
                let (e, conn) = monopole(k, &atlas, 1);
                e.validate(&atlas.overlap_samples(), &BundleTolerances::default()).unwrap();
                let r = compatibility_residual(&conn, &e, &atlas).unwrap();
                assert!(r < 1e-6, "k = {k}, {}: residual {r}", atlas.name);
            }
        }
    }

    #[test]
    fn monopole_degree_with_analytic_curvature() {
        let atlas = Atlas::sphere_two_patch(64);
        for k in [1, -1, 2] {
            let (_, conn) = monopole(k, &atlas, 1);
            let ch = chern_character_form(&curvature(&conn, &atlas).unwrap());
            let v = integrate_top(&ch, &atlas).unwrap();
            assert!((v - k as f64).abs() < 1e-6 * k.abs() as f64, "k = {k}: {v}");
        }
    }

    #[test]
    fn twisted_monopole_descends() {
        let atlas = Atlas::sphere_three_patch(32);
        let (e, conn) = twisted_monopole(1, &atlas, 2, &[1, 0, 0]);
        let (samples, tol) = (atlas.overlap_samples(), BundleTolerances::default());
        assert_eq!(e.twist_order(), 2);
        e.validate(&samples, &tol).unwrap();
        assert!(compatibility_residual(&conn, &e, &atlas).unwrap() < 1e-6);
        let d = e.tensor_power_descend(2, &samples, &tol).unwrap();
        d.validate(&samples, &tol).unwrap();
        let descended =
            integrate_top(&chern_character_form(&curvature(&conn.tensor_power(2), &atlas).unwrap()), &atlas).unwrap();
        let power = integrate_top(&chern_character_form(&curvature(&conn, &atlas).unwrap()).power(2), &atlas).unwrap();
        // Ch(L (x) C^2)^2 = 4 (1 + x)^2 integrates to 8
        assert!((power - 8.0).abs() < 2e-3, "{power}");
        assert!((descended - power).abs() < 1e-4, "{descended} vs {power}");
    }

    #[test]
    fn averaging_preserves_compatible_input() {
        let atlas = Atlas::sphere_two_patch(16);
        let (e, conn) = monopole(1, &atlas, 1);
        let raw: Vec<PotentialFn> = conn.patches.iter().map(|p| p.potential.clone()).collect();
        let avg = average_connection(&e, &raw, &atlas).unwrap();
        for (a, patch) in atlas.patches.iter().enumerate() {
            for x in patch.nodes.iter().step_by(7) {
                let u = (avg.patches[a].potential)(x);
                let v = (raw[a])(x);
                for k in 0..2 {
                    assert!(linalg::max_abs(&(&u[k] - &v[k])) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn flat_connection_has_zero_curvature() {
        let atlas = Atlas::sphere_two_patch(8);
        let e = ProjectiveBundleData::trivial(&atlas.cover(), 2, 1);
        let raw: Vec<PotentialFn> =
            (0..2).map(|_| Arc::new(|_: &[f64]| vec![CMat::zeros(2, 2); 2]) as PotentialFn).collect();
        let conn = average_connection(&e, &raw, &atlas).unwrap();
        let f = curvature(&conn, &atlas).unwrap();
        assert!(f.patches.iter().flatten().all(|x| x.max_entry() == 0.0));
        let ch = chern_character_form(&f);
        assert!(ch.patches.iter().flatten().all(|x| *x.component(0, 0) == c(2.0, 0.0)));
        let td = todd_form(&f);
        assert!(td.patches.iter().flatten().all(|x| (x.component(0, 0) - c(1.0, 0.0)).norm() < 1e-15));
        e.validate(&OverlapSamples::none(), &BundleTolerances::default()).unwrap();
    }

    #[test]
    fn todd_series_of_a_line() {
        // on a 4-dimensional point, a line curvature with X = x (2-form): Td = 1 + x/2 + x^2/12
        let d = 4;
        let mut x = ScalarForm::scalar_zero(d);
        *x.component_mut(2, 0) = c(1.0, 0.0);
        *x.component_mut(2, 5) = c(1.0, 0.0);
        // F = -2 pi i X so that i F / 2 pi = X
        let mut f = Form::zero(d, CMat::zeros(1, 1));
        for j in 0..6 {
            *f.component_mut(2, j) = CMat::from_element(1, 1, x.component(2, j) * (-2.0 * std::f64::consts::PI * I));
        }
        let field = FormField { dim: d, patches: vec![vec![f]] };
        let td = &todd_form(&field).patches[0][0];
        let expected = power_series(&x, &[1.0, 0.5, 1.0 / 12.0]);
        assert!(td.add(&expected.scaled(c(-1.0, 0.0))).max_abs() < 1e-14);
        let inv = &todd_inverse_form(&field).patches[0][0];
        let one = td.wedge(inv);
        assert!(one.add(&ScalarForm::one(d).scaled(c(-1.0, 0.0))).max_abs() < 1e-14);
    }

    #[test]
    fn degree_mismatch() {
        let f = FormField { dim: 0, patches: vec![vec![ScalarForm::one(0)]] };
        assert!(matches!(integrate(&f, &Atlas::unit_square(4)), Err(ChernWeilError::DegreeMismatch { .. })));
        let sq = Atlas::unit_square(4);
        let one = FormField { dim: 2, patches: vec![vec![ScalarForm::homogeneous(2, 2, vec![c(1.0, 0.0)]); 16]] };
        assert!((integrate(&one, &sq).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    }
}
