//! Topological side of the cohomological index formula for circle fibres,
//! and its comparison with the Chern character of the analytic index.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::{Atlas, DIFF_STEP};
use crate::chern_weil::{
    chern_character_form, compatibility_residual_strided, curvature, det_line_c1, integrate, ChernWeilError,
    ScalarFormField,
};
use crate::family::{
    analytic_index, berry_connection, check_elliptic, check_projective_compat, stabilizer_connection, FamilyError,
    FamilySpec, IndexBundle, SymbolFn, KAPPA_MAX, THETA_SAMPLES,
};
use crate::forms::{component_index, multi_indices, Form, ScalarForm};
use crate::linalg::{self, c, CMat};

#[derive(Debug, Error)]
pub enum IndexTheoremError {
    #[error("family `{family}` is not elliptic: symbol condition number {condition:.3e} exceeds {limit:.1e}")]
    NotElliptic { family: String, condition: f64, limit: f64 },
    #[error("symbol class of `{0}` is not certified")]
    NotCertified(String),
    #[error("family `{0}` is not a Dirac preset")]
    NotDiracPreset(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    ChernWeil(#[from] ChernWeilError),
}

/// Clutching data of a family symbol at `xi = +1` and `xi = -1`.
#[derive(Clone)]
pub struct SymbolClass {
    pub family: String,
    pub symbols: Vec<SymbolFn>,
    pub theta_samples: usize,
    pub worst_condition: f64,
    /// Largest `|| sigma_a - q-_ab sigma_b (q+_ab)^{-1} ||` over overlap samples.
    pub compat_residual: f64,
    pub certified: bool,
}

impl std::fmt::Debug for SymbolClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymbolClass")
            .field("family", &self.family)
            .field("worst_condition", &self.worst_condition)
            .field("compat_residual", &self.compat_residual)
            .field("certified", &self.certified)
            .finish()
    }
}

/// Symbol transitions are read from the ambient transitions at the coefficient slots.
fn slot_block(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub const SYMBOL_COMPAT_TOLERANCE: f64 = 1e-6;

pub fn symbol_class(spec: &FamilySpec, atlas: &Atlas) -> Result<SymbolClass, IndexTheoremError> {
    let report = check_elliptic(spec, atlas)?;
    if !report.elliptic {
        return Err(IndexTheoremError::NotElliptic {
            family: spec.name.clone(),
            condition: report.worst_condition,
            limit: KAPPA_MAX,
        });
    }
    let symbols: Vec<SymbolFn> = spec
        .patches
        .iter()
        .map(|p| p.symbol.clone().ok_or_else(|| FamilyError::MissingSymbol(spec.name.clone())))
        .collect::<Result<_, _>>()?;
    let samples = atlas.overlap_samples();
    let mut residual: f64 = 0.0;
    for edge in atlas.nerve.simplices(1) {
        let (a, b) = (edge[0], edge[1]);
        let qp = spec.plus.transition(a, b).map_err(FamilyError::from)?;
        let qm = spec.minus.transition(a, b).map_err(FamilyError::from)?;
        let r = samples
            .get(edge)
            .par_iter()
            .map(|p| {
                let qp = slot_block(&qp.eval(p).unwrap(), &spec.domain_slots, &spec.domain_slots);
                let qm = slot_block(&qm.eval(p).unwrap(), &spec.target_slots, &spec.target_slots);
                let qp_inv = linalg::inverse(&qp).unwrap_or_else(|| CMat::zeros(qp.nrows(), qp.ncols()));
                let mut worst: f64 = 0.0;
                for j in 0..8 {
                    let theta = 2.0 * PI * j as f64 / 8.0;
                    for xi in [1i8, -1] {
                        let lhs = &qm * symbols[b](p, theta, xi) * &qp_inv;
                        worst = worst.max(linalg::op_norm(&(lhs - symbols[a](p, theta, xi))));
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max);
        residual = residual.max(r);
    }
    Ok(SymbolClass {
        family: spec.name.clone(),
        symbols,
        theta_samples: THETA_SAMPLES,
        worst_condition: report.worst_condition,
        compat_residual: residual,
        certified: residual <= SYMBOL_COMPAT_TOLERANCE,
    })
}

/// `alpha_k = sigma^{-1} d_k sigma` in the coordinates `(x, theta)`, theta last.
fn maurer_cartan(sigma: &dyn Fn(&[f64], f64) -> CMat, x: &[f64], theta: f64) -> Vec<CMat> {
    let s0 = sigma(x, theta);
    let inv = linalg::inverse(&s0).expect("certified symbol is invertible");
    let scale = c(0.5 / DIFF_STEP, 0.0);
    let mut out = Vec::with_capacity(x.len() + 1);
    for k in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += DIFF_STEP;
        xm[k] -= DIFF_STEP;
        out.push(&inv * (sigma(&xp, theta) - sigma(&xm, theta)) * scale);
    }
    out.push(&inv * (sigma(x, theta + DIFF_STEP) - sigma(x, theta - DIFF_STEP)) * scale);
    out
}

/// Fibre integral over theta of the odd Chern form of one clutching section,
/// in degrees 0 and 2.
fn odd_chern_fibre_integral(sigma: &dyn Fn(&[f64], f64) -> CMat, x: &[f64], samples: usize) -> ScalarForm {
    let d = x.len();
    let mut form = ScalarForm::scalar_zero(d);
    let w = 2.0 * PI / samples as f64;
    // (1/2 pi i)^{k+1} k!/(2k+1)! for k = 0, 1
    let c0 = c(0.0, -1.0 / (2.0 * PI));
    let c1 = c(-1.0 / (4.0 * PI * PI) / 6.0, 0.0);
    for j in 0..samples {
        let theta = j as f64 * w;
        let alpha = maurer_cartan(sigma, x, theta);
        let at = &alpha[d];
        *form.component_mut(0, 0) += c0 * at.trace() * w;
        if d >= 2 {
            for (idx, pair) in multi_indices(d, 2).iter().enumerate() {
                let (ai, aj) = (&alpha[pair[0]], &alpha[pair[1]]);
                let t = (ai * aj * at).trace() - (ai * at * aj).trace();
                *form.component_mut(2, idx) += c1 * t * 3.0 * w;
            }
        }
    }
    form
}

/// `-(pi_* ch_odd(sigma(+1)) - pi_* ch_odd(sigma(-1)))` on every node, in
/// degrees 0 and 2 (higher degrees need a base of dimension at least 4).
pub fn topological_index_chern(s: &SymbolClass, atlas: &Atlas) -> Result<ScalarFormField, IndexTheoremError> {
    if !s.certified {
        return Err(IndexTheoremError::NotCertified(s.family.clone()));
    }
    let d = atlas.dim();
    let patches = atlas
        .patches
        .iter()
        .enumerate()
        .map(|(a, patch)| {
            let chart = patch.chart.clone();
            let sym = s.symbols[a].clone();
            patch
                .nodes
                .par_iter()
                .map(|x| {
                    let mut total = ScalarForm::scalar_zero(d);
                    for (xi, sign) in [(1i8, -1.0), (-1i8, 1.0)] {
                        let sigma = |y: &[f64], theta: f64| sym(&chart.to_point(y), theta, xi);
                        let part = odd_chern_fibre_integral(&sigma, x, s.theta_samples);
                        total.add_assign(&part.scaled(c(sign, 0.0)));
                    }
                    total
                })
                .collect()
        })
        .collect();
    Ok(ScalarFormField { dim: d, patches })
}

/// Weighted average of the degree-0 part over the base.
fn mean_degree_zero(omega: &ScalarFormField, atlas: &Atlas) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (patch, forms) in atlas.patches.iter().zip(&omega.patches) {
        for i in 0..patch.node_count() {
            let w = patch.pou[i] * patch.weights[i];
            num += forms[i].component(0, 0).re * w;
            den += w;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Integral of the degree-`k` part: the average for `k = 0`, the top-degree
/// integral for `k = dim`, and zero otherwise.
pub fn degree_integral(omega: &ScalarFormField, atlas: &Atlas, k: usize) -> Result<f64, IndexTheoremError> {
    if k == 0 {
        return Ok(mean_degree_zero(omega, atlas));
    }
    if k == atlas.dim() {
        return Ok(integrate(&omega.part(k), atlas)?.re);
    }
    Ok(0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DegreeComparison {
    pub degree: usize,
    pub analytic: f64,
    pub topological: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerificationReport {
    pub scenario: String,
    pub family: String,
    pub atlas: String,
    pub resolution: usize,
    pub truncation: usize,
    pub kernel_rank: usize,
    pub stabilizer_rank: usize,
    pub stabilizer_min_singular: f64,
    pub symbol_condition: f64,
    pub symbol_compat_residual: f64,
    pub family_compat_residual: f64,
    pub connection_compat_residual: f64,
    pub degrees: Vec<DegreeComparison>,
    pub det_line: DegreeComparison,
    pub tolerance: f64,
    pub passed: bool,
}

impl VerificationReport {
    pub fn max_residual(&self) -> f64 {
        self.degrees.iter().map(|d| d.residual).chain([self.det_line.residual]).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "scenario {}  family {}  atlas {} ({}x{})  K = {}\n",
            self.scenario, self.family, self.atlas, self.resolution, self.resolution, self.truncation
        ));
        out.push_str(&format!(
            "index bundle: kernel rank {}, stabiliser rank {}, virtual rank {}\n",
            self.kernel_rank,
            self.stabilizer_rank,
            self.kernel_rank as i64 - self.stabilizer_rank as i64
        ));
        out.push_str(&format!("{:<10} {:>18} {:>18} {:>12}\n", "degree", "analytic", "topological", "residual"));
        for d in &self.degrees {
            out.push_str(&format!(
                "{:<10} {:>18.10} {:>18.10} {:>12.3e}\n",
                d.degree, d.analytic, d.topological, d.residual
            ));
        }
        out.push_str(&format!(
            "{:<10} {:>18.10} {:>18.10} {:>12.3e}\n",
            "c1(det)", self.det_line.analytic, self.det_line.topological, self.det_line.residual
        ));
        out.push_str(&format!("tolerance {:.1e}: {}\n", self.tolerance, if self.passed { "PASS" } else { "FAIL" }));
        out
    }
}

/// Analytic side: Chern character of the kernel bundle minus that of the stabiliser bundle.
pub struct AnalyticSide {
    pub index: IndexBundle,
    pub chern: ScalarFormField,
    pub det_c1: ScalarFormField,
    pub connection_compat_residual: f64,
}

/// Overlap points per patch pair entering the reported connection residual.
pub const COMPAT_SAMPLES: usize = 256;

fn compat_stride(atlas: &Atlas) -> usize {
    let most = atlas.overlaps.values().map(|v| v.len()).max().unwrap_or(0);
    most.div_ceil(COMPAT_SAMPLES).max(1)
}

pub fn analytic_side(spec: &FamilySpec, atlas: &Atlas) -> Result<AnalyticSide, IndexTheoremError> {
    let index = analytic_index(spec, atlas)?;
    let kernel = berry_connection(&index, atlas);
    let stab = stabilizer_connection(&index, atlas);
    let fk = curvature(&kernel, atlas)?;
    let fs = curvature(&stab, atlas)?;
    let chern = chern_character_form(&fk).add(&chern_character_form(&fs).scaled(c(-1.0, 0.0)));
    let det_c1 = det_line_c1(&fk).add(&det_line_c1(&fs).scaled(c(-1.0, 0.0)));
    let mut residual: f64 = 0.0;
    if atlas.dim() > 0 {
        residual =
            residual.max(compatibility_residual_strided(&kernel, &index.class.plus, atlas, compat_stride(atlas))?);
        residual =
            residual.max(compatibility_residual_strided(&stab, &index.class.minus, atlas, compat_stride(atlas))?);
    }
    Ok(AnalyticSide { index, chern, det_c1, connection_compat_residual: residual })
}

/// Both pipelines on one family, compared degree by degree.
pub fn verify_index_theorem(
    scenario: &str,
    spec: &FamilySpec,
    atlas: &Atlas,
    tolerance: f64,
) -> Result<VerificationReport, IndexTheoremError> {
    let symbol = symbol_class(spec, atlas)?;
    let topo = topological_index_chern(&symbol, atlas)?;
    let family_compat = check_projective_compat(spec, atlas)?;
    let analytic = analytic_side(spec, atlas)?;
    let mut degrees = Vec::new();
    for k in (0..=atlas.dim()).step_by(2) {
        let an = degree_integral(&analytic.chern, atlas, k)?;
        let tp = degree_integral(&topo, atlas, k)?;
        degrees.push(DegreeComparison { degree: k, analytic: an, topological: tp, residual: (an - tp).abs() });
    }
    let det_line = det_line_comparison(&analytic, &topo, atlas)?;
    let mut report = VerificationReport {
        scenario: scenario.to_string(),
        family: spec.name.clone(),
        atlas: atlas.name.clone(),
        resolution: atlas.resolution(),
        truncation: spec.fiber.truncation,
        kernel_rank: analytic.index.kernel_rank,
        stabilizer_rank: analytic.index.stabilizer.rank,
        stabilizer_min_singular: analytic.index.stabilizer.min_singular,
        symbol_condition: symbol.worst_condition,
        symbol_compat_residual: symbol.compat_residual,
        family_compat_residual: family_compat,
        connection_compat_residual: analytic.connection_compat_residual,
        degrees,
        det_line,
        tolerance,
        passed: false,
    };
    report.passed = report.max_residual() <= tolerance;
    Ok(report)
}

fn det_line_comparison(
    analytic: &AnalyticSide,
    topo: &ScalarFormField,
    atlas: &Atlas,
) -> Result<DegreeComparison, IndexTheoremError> {
    let (an, tp) = if atlas.dim() >= 2 {
        (degree_integral(&analytic.det_c1, atlas, 2)?, degree_integral(topo, atlas, 2)?)
    } else {
        (0.0, 0.0)
    };
    Ok(DegreeComparison { degree: 2, analytic: an, topological: tp, residual: (an - tp).abs() })
}

/// `| integral c_1(det index) - integral (topological form)_[2] |`.
pub fn det_line_check(spec: &FamilySpec, atlas: &Atlas) -> Result<DegreeComparison, IndexTheoremError> {
    let symbol = symbol_class(spec, atlas)?;
    let topo = topological_index_chern(&symbol, atlas)?;
    let analytic = analytic_side(spec, atlas)?;
    det_line_comparison(&analytic, &topo, atlas)
}

/// Even part of the fibre integral of `A-hat Ch(L)` for the circle Dirac preset,
/// where `L` carries the connection `i (w + a(p)) d theta` and `A-hat = 1`.
pub fn dirac_index_chern(spec: &FamilySpec, atlas: &Atlas) -> Result<ScalarFormField, IndexTheoremError> {
    let twist = spec.dirac.clone().ok_or_else(|| IndexTheoremError::NotDiracPreset(spec.name.clone()))?;
    let d = atlas.dim();
    let patches = atlas
        .patches
        .iter()
        .map(|patch| {
            let chart = patch.chart.clone();
            let shift = twist.shift.clone();
            let w = twist.winding as f64;
            patch
                .nodes
                .par_iter()
                .map(|x| {
                    let a = |y: &[f64]| w + shift(&chart.to_point(y));
                    // F = i da ^ d theta on the total space, theta last
                    let mut f = Form::zero(d + 1, c(0.0, 0.0));
                    for k in 0..d {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[k] += DIFF_STEP;
                        xm[k] -= DIFF_STEP;
                        let dk = (a(&xp) - a(&xm)) / (2.0 * DIFF_STEP);
                        *f.component_mut(2, component_index(d + 1, &[k, d])) = c(0.0, dk);
                    }
                    let ch = f.scaled(c(0.0, 1.0 / (2.0 * PI))).exp();
                    fibre_integral(&ch, d, THETA_SAMPLES).even_part()
                })
                .collect()
        })
        .collect();
    Ok(ScalarFormField { dim: d, patches })
}

/// Integral over the last coordinate of a theta-independent form.
fn fibre_integral(omega: &ScalarForm, d: usize, samples: usize) -> ScalarForm {
    let mut out = ScalarForm::scalar_zero(d);
    let w = 2.0 * PI / samples as f64;
    for q in 0..d {
        for (j, base) in multi_indices(d, q).iter().enumerate() {
            let mut idx = base.clone();
            idx.push(d);
            let coeff = *omega.component(q + 1, component_index(d + 1, &idx));
            *out.component_mut(q, j) = (0..samples).map(|_| coeff * w).sum();
        }
    }
    out
}

trait EvenPart {
    fn even_part(&self) -> Self;
}

impl EvenPart for ScalarForm {
    fn even_part(&self) -> Self {
        let mut out = ScalarForm::scalar_zero(self.dim());
        for k in (0..=self.dim()).step_by(2) {
            out.add_assign(&self.part(k));
        }
        out
    }
}

/// Symbol of `spec` deformed by `sigma + eps * delta`, to probe homotopy invariance.
pub fn perturb_symbol(spec: &FamilySpec, eps: f64, delta: CMat) -> FamilySpec {
    let mut out = spec.clone();
    for p in &mut out.patches {
        if let Some(s) = p.symbol.clone() {
            let delta = delta.clone();
            p.symbol = Some(Arc::new(move |q, t, xi| s(q, t, xi) + &delta * c(eps * (t.cos() + 0.5), 0.0)));
        }
    }
    out
}

/// Largest absolute degree-`k` coefficient of a form field.
pub fn max_component(omega: &ScalarFormField, k: usize) -> f64 {
    omega
        .patches
        .iter()
        .flatten()
        .flat_map(|f| f.degree(k).iter().map(|z| z.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_winding_degree_zero() {
        let atlas = Atlas::single_point();
        for m in 0..4 {
            let spec = FamilySpec::scalar_winding(&atlas, 8, m);
            let topo = topological_index_chern(&symbol_class(&spec, &atlas).unwrap(), &atlas).unwrap();
            let v = topo.patches[0][0].component(0, 0);
            assert!((v.re + m as f64).abs() < 1e-8 && v.im.abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn identity_clutching_is_zero_in_positive_degree() {
        let atlas = Atlas::sphere_two_patch(8);
        let spec = FamilySpec::invertible(&atlas, 4, 2);
        let topo = topological_index_chern(&symbol_class(&spec, &atlas).unwrap(), &atlas).unwrap();
        assert_eq!(max_component(&topo, 2), 0.0);
        assert_eq!(max_component(&topo, 0), 0.0);
    }

    #[test]
    fn bott_toeplitz_topological_degree() {
        let atlas = Atlas::sphere_two_patch(32);
        let spec = FamilySpec::toeplitz_clutching(&atlas, 8, 1, false);
        let topo = topological_index_chern(&symbol_class(&spec, &atlas).unwrap(), &atlas).unwrap();
        let v = degree_integral(&topo, &atlas, 2).unwrap();
        assert!((v.abs() - 1.0).abs() < 1e-3, "{v}");
        assert!((degree_integral(&topo, &atlas, 0).unwrap() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn dirac_requires_preset() {
        let atlas = Atlas::single_point();
        let spec = FamilySpec::invertible(&atlas, 2, 1);
        assert!(matches!(dirac_index_chern(&spec, &atlas), Err(IndexTheoremError::NotDiracPreset(_))));
    }
}
