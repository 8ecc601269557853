//! Pointwise exterior algebra over `R^d` with scalar or matrix coefficients.
//!
//! Components of degree `k` are stored against the basis `dx^I`, `I` a
//! strictly increasing index tuple, in lexicographic order.

use std::sync::OnceLock;

use crate::linalg::{CMat, C64};

const MAX_DIM: usize = 6;

struct Basis {
    /// subsets[k] = all k-subsets of 0..d in lexicographic order
    subsets: Vec<Vec<Vec<usize>>>,
}

fn basis(d: usize) -> &'static Basis {
    static TABLES: OnceLock<Vec<Basis>> = OnceLock::new();
    assert!(d <= MAX_DIM, "form dimension {d} exceeds {MAX_DIM}");
    &TABLES.get_or_init(|| {
        (0..=MAX_DIM)
            .map(|d| {
                let mut subsets = vec![Vec::new(); d + 1];
                for mask in 0u32..(1 << d) {
                    let s: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
                    subsets[s.len()].push(s);
                }
                for list in &mut subsets {
                    list.sort();
                }
                Basis { subsets }
            })
            .collect()
    })[d]
}

/// Lexicographic k-subsets of `0..d`.
pub fn multi_indices(d: usize, k: usize) -> &'static [Vec<usize>] {
    basis(d).subsets.get(k).map_or(&[], Vec::as_slice)
}

pub fn component_index(d: usize, subset: &[usize]) -> usize {
    multi_indices(d, subset.len()).binary_search_by(|s| s.as_slice().cmp(subset)).expect("valid increasing multi-index")
}

/// Sign of `dx^I ^ dx^J` relative to `dx^{I u J}`, or `None` when they overlap.
pub fn merge_sign(a: &[usize], b: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut inversions = 0usize;
    for &x in a {
        for &y in b {
            if x == y {
                return None;
            }
            if x > y {
                inversions += 1;
            }
        }
    }
    let mut merged: Vec<usize> = a.iter().chain(b).copied().collect();
    merged.sort_unstable();
    Some((merged, if inversions % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Coefficient ring of a form.
pub trait Coefficient: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    fn add_assign(&mut self, other: &Self);
    fn product(&self, other: &Self) -> Self;
    fn scaled(&self, s: C64) -> Self;
}

impl Coefficient for C64 {
    fn zero_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn product(&self, other: &Self) -> Self {
        self * other
    }
    fn scaled(&self, s: C64) -> Self {
        self * s
    }
}

impl Coefficient for CMat {
    fn zero_like(&self) -> Self {
        CMat::zeros(self.nrows(), self.ncols())
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn product(&self, other: &Self) -> Self {
        self * other
    }
    fn scaled(&self, s: C64) -> Self {
        self * s
    }
}

/// Mixed-degree form at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Form<T> {
    dim: usize,
    comps: Vec<Vec<T>>,
}

pub type ScalarForm = Form<C64>;
pub type MatrixForm = Form<CMat>;

impl<T: Coefficient> Form<T> {
    pub fn zero(dim: usize, zero: T) -> Self {
        let comps = (0..=dim).map(|k| vec![zero.zero_like(); multi_indices(dim, k).len()]).collect();
        Self { dim, comps }
    }

    /// A pure degree-0 form.
    pub fn constant(dim: usize, value: T) -> Self {
        let mut f = Self::zero(dim, value.zero_like());
        f.comps[0][0] = value;
        f
    }

    /// Degree-`k` form from components in basis order.
    pub fn homogeneous(dim: usize, k: usize, components: Vec<T>) -> Self {
        assert_eq!(components.len(), multi_indices(dim, k).len(), "component count");
        let mut f = Self::zero(dim, components[0].zero_like());
        f.comps[k] = components;
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, k: usize, j: usize) -> &T {
        &self.comps[k][j]
    }

    pub fn component_mut(&mut self, k: usize, j: usize) -> &mut T {
        &mut self.comps[k][j]
    }

    pub fn degree(&self, k: usize) -> &[T] {
        &self.comps[k]
    }

    /// Only the degree-`k` part.
    pub fn part(&self, k: usize) -> Self {
        let mut f = Self::zero(self.dim, self.comps[0][0].zero_like());
        f.comps[k] = self.comps[k].clone();
        f
    }

    /// Top-degree coefficient (coefficient of `dx^0 ^ ... ^ dx^{d-1}`).
    pub fn top(&self) -> &T {
        &self.comps[self.dim][0]
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                x.add_assign(y);
            }
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { dim: self.dim, comps: self.comps.iter().map(|l| l.iter().map(|x| x.scaled(s)).collect()).collect() }
    }

    /// `self ^ other`, coefficients multiplied in order.
    pub fn wedge(&self, other: &Self) -> Self {
        let d = self.dim;
        let mut out = Self::zero(d, self.comps[0][0].zero_like());
        for p in 0..=d {
            for q in 0..=d - p {
                for (i, ia) in multi_indices(d, p).iter().enumerate() {
                    for (j, jb) in multi_indices(d, q).iter().enumerate() {
                        if let Some((m, sign)) = merge_sign(ia, jb) {
                            let prod = self.comps[p][i].product(&other.comps[q][j]);
                            let idx = component_index(d, &m);
                            out.comps[p + q][idx].add_assign(&prod.scaled(C64::new(sign, 0.0)));
                        }
                    }
                }
            }
        }
        out
    }

    /// Truncated exponential `sum_{j <= d/2} x^j / j!` of a form with no
    /// degree-0 part; exact for even-degree inputs.
    pub fn exp_nilpotent(&self, one: T) -> Self {
        let mut acc = Self::constant(self.dim, one.clone());
        let mut term = Self::constant(self.dim, one);
        for j in 1..=self.dim {
            term = term.wedge(self).scaled(C64::new(1.0 / j as f64, 0.0));
            acc.add_assign(&term);
        }
        acc
    }

    pub fn max_norm(&self, norm: impl Fn(&T) -> f64) -> f64 {
        self.comps.iter().flatten().map(norm).fold(0.0, f64::max)
    }
}

impl MatrixForm {
    pub fn trace(&self) -> ScalarForm {
        Form { dim: self.dim, comps: self.comps.iter().map(|l| l.iter().map(CMat::trace).collect()).collect() }
    }

    /// Conjugation `g^{-1} F g`, coefficientwise.
    pub fn conjugate(&self, g: &CMat, g_inv: &CMat) -> Self {
        Form { dim: self.dim, comps: self.comps.iter().map(|l| l.iter().map(|m| g_inv * m * g).collect()).collect() }
    }

    pub fn max_entry(&self) -> f64 {
        self.max_norm(crate::linalg::max_abs)
    }
}

impl ScalarForm {
    pub fn scalar_zero(dim: usize) -> Self {
        Self::zero(dim, C64::new(0.0, 0.0))
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, C64::new(1.0, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.max_norm(|z| z.norm())
    }

    /// `exp` of an even form via the truncated series around its degree-0 value.
    pub fn exp(&self) -> Self {
        let a0 = self.comps[0][0];
        let mut nil = self.clone();
        nil.comps[0][0] = C64::new(0.0, 0.0);
        nil.exp_nilpotent(C64::new(1.0, 0.0)).scaled(a0.exp())
    }

    /// Pullback under a linear change of coordinates: `j[i][k] = dx_i / dy_k`,
    /// with `self` expressed in `x` and the result in `y`.
    pub fn pullback(&self, j: &[Vec<f64>]) -> Self {
        pullback_generic(self, j)
    }
}

impl MatrixForm {
    pub fn pullback(&self, j: &[Vec<f64>]) -> Self {
        pullback_generic(self, j)
    }
}

fn pullback_generic<T: Coefficient>(f: &Form<T>, j: &[Vec<f64>]) -> Form<T> {
    // dx^I = sum_K det(J[I, K]) dy^K
    let d = f.dim;
    let mut out = Form::zero(d, f.comps[0][0].zero_like());
    out.comps[0] = f.comps[0].clone();
    for k in 1..=d {
        for (ii, iset) in multi_indices(d, k).iter().enumerate() {
            for (kk, kset) in multi_indices(d, k).iter().enumerate() {
                let minor: Vec<Vec<f64>> = iset.iter().map(|&r| kset.iter().map(|&c| j[r][c]).collect()).collect();
                let det = determinant(minor);
                if det != 0.0 {
                    let v = f.comps[k][ii].scaled(C64::new(det, 0.0));
                    out.comps[k][kk].add_assign(&v);
                }
            }
        }
    }
    out
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

/// Scalar power series `sum_j coeffs[j] x^j` of an even scalar form `x`
/// with vanishing degree-0 part.
pub fn power_series(x: &ScalarForm, coeffs: &[f64]) -> ScalarForm {
    let mut acc = ScalarForm::scalar_zero(x.dim);
    let mut pow = ScalarForm::one(x.dim);
    for (j, &cj) in coeffs.iter().enumerate() {
        if j > 0 {
            pow = pow.wedge(x);
        }
        acc.add_assign(&pow.scaled(C64::new(cj, 0.0)));
    }
    acc
}
