//! Riemann–Roch check for the Thom pushforward of a line bundle over a surface.
//!
//! The Thom representative is the Chern character of the Quillen
//! superconnection on the Koszul complex `pi^*(C + E^*)` over the total space
//! of `E`, with `E^*` odd and `V = [[0, v], [conj(v), 0]] / sigma` built from
//! the tautological section `v`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::atlas::Atlas;
use crate::chern_weil::{
    chern_character_form, curvature, integrate, monopole, todd_inverse_form, ChernWeilError, ConnectionData,
};
use nalgebra::Matrix2;

use crate::linalg::{c, C64, I};

/// Total-space coordinates `(x, y, Re v, Im v)`.
const TOTAL_DIM: usize = 4;

#[derive(Clone)]
pub struct ThomScenario {
    pub name: String,
    pub atlas: Atlas,
    /// Line bundle `E` whose total space carries the Thom form.
    pub e: ConnectionData,
    /// Test bundle `F`.
    pub f: ConnectionData,
    pub sigma: f64,
    /// Fibre disc radius, `4 sigma` by default.
    pub radius: f64,
    /// Midpoint nodes per side of the fibre square `[-R, R]^2`.
    pub fibre_nodes: usize,
    /// Angular samples on the fibre boundary circle.
    pub boundary_samples: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ThomReport {
    pub scenario: String,
    /// Fibre integral of the vertical part, averaged over the base.
    pub total_degree_zero: f64,
    pub total_top: f64,
    pub base_degree_zero: f64,
    pub base_top: f64,
    pub residual: f64,
    /// Largest form coefficient on the fibre boundary relative to the largest inside.
    pub support_leak: f64,
}

pub const LEAK_TOLERANCE: f64 = 1e-6;

impl ThomScenario {
    /// Monopole line bundles `E = L^k`, `F = L^l` on the two-patch sphere.
    pub fn monopoles(k: i64, l: i64, resolution: usize) -> Self {
        let atlas = Atlas::sphere_two_patch(resolution);
        let (_, e) = monopole(k, &atlas, 1);
        let (_, f) = monopole(l, &atlas, 1);
        let sigma = 0.25;
        Self {
            name: format!("thom-rr-line(k={k}, l={l})"),
            atlas,
            e,
            f,
            sigma,
            radius: 4.0 * sigma,
            fibre_nodes: 20,
            boundary_samples: 32,
        }
    }

    /// Closed form `rank F + integral (c_1(F) - c_1(E) / 2)` for the monopole fixtures.
    pub fn monopole_oracle(k: i64, l: i64) -> f64 {
        1.0 + l as f64 - k as f64 / 2.0
    }
}

/// Super form on the total space, indexed by the bitmask of its coordinate differentials.
type SuperForm = [Matrix2<C64>; 1 << TOTAL_DIM];

fn blank() -> SuperForm {
    [Matrix2::zeros(); 1 << TOTAL_DIM]
}

/// Sign of reordering `dx_I ^ dx_J` into increasing order.
fn merge_sign(left: usize, right: usize) -> f64 {
    let mut swaps = 0;
    for j in 0..TOTAL_DIM {
        if right & (1 << j) != 0 {
            swaps += (left >> (j + 1)).count_ones();
        }
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Product in `Omega ^ End(C^{1|1})`: `(a M)(b N) = (-1)^{|M| deg b} (a ^ b) M N`.
fn super_wedge(a: &SuperForm, b: &SuperForm) -> SuperForm {
    let zero = Matrix2::zeros();
    let mut out = blank();
    for (left, m) in a.iter().enumerate() {
        if *m == zero {
            continue;
        }
        let mut even = *m;
        even[(0, 1)] = c(0.0, 0.0);
        even[(1, 0)] = c(0.0, 0.0);
        let odd = m - even;
        for (right, n) in b.iter().enumerate() {
            if left & right != 0 || *n == zero {
                continue;
            }
            let sign_b = if right.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let prod = even * n + odd * n * c(sign_b, 0.0);
            out[left | right] += prod * c(merge_sign(left, right), 0.0);
        }
    }
    out
}

fn supertrace(m: &Matrix2<C64>) -> C64 {
    m[(0, 0)] - m[(1, 1)]
}

/// `(vertical 2-form coefficient, top coefficient)` of
/// `phi Str exp(-A^2)` at one total-space point, where `phi` scales degree
/// `2j` by `(2 pi i)^{-j}`.
fn thom_form(a_e: &[C64], f_e: C64, v: C64, sigma: f64) -> (C64, C64) {
    let z = c(0.0, 0.0);
    let mut n = blank();
    let vm = Matrix2::new(z, v, v.conj(), z) / c(sigma, 0.0);
    for (k, &ak) in a_e.iter().enumerate() {
        let mk = Matrix2::new(z, z, z, -ak);
        n[1 << k] = mk * vm - vm * mk;
    }
    let s = 1.0 / sigma;
    n[1 << 2] = Matrix2::new(z, c(s, 0.0), c(s, 0.0), z);
    n[1 << 3] = Matrix2::new(z, c(0.0, s), c(0.0, -s), z);
    n[0b0011] = Matrix2::new(z, z, z, -f_e);
    for m in n.iter_mut() {
        *m = -*m;
    }
    let mut acc = blank();
    acc[0] = Matrix2::identity();
    let mut pow = acc;
    for j in 1..=TOTAL_DIM {
        pow = super_wedge(&pow, &n);
        for m in pow.iter_mut() {
            *m /= c(j as f64, 0.0);
        }
        for (t, p) in acc.iter_mut().zip(&pow) {
            *t += p;
        }
    }
    let gauss = (-(v.norm_sqr()) / (sigma * sigma)).exp();
    let phi2 = 1.0 / (2.0 * PI * I);
    let vertical = supertrace(&acc[0b1100]) * gauss * phi2;
    let top = supertrace(&acc[0b1111]) * gauss * phi2 * phi2;
    (vertical, top)
}

/// `| integral_total Ch(i_! F) - integral_base Td(E)^{-1} Ch(F) |`, each side
/// summed over degree 0 (fibre normalisation against `rank F`) and top degree.
pub fn thom_rr_check(s: &ThomScenario) -> Result<ThomReport, ChernWeilError> {
    let atlas = &s.atlas;
    let fe = curvature(&s.e, atlas)?;
    let ff = curvature(&s.f, atlas)?;
    let ch_f = chern_character_form(&ff);

    let m = s.fibre_nodes;
    let h = 2.0 * s.radius / m as f64;
    let fibre: Vec<C64> = (0..m * m)
        .map(|i| c(-s.radius + (i / m) as f64 * h + 0.5 * h, -s.radius + (i % m) as f64 * h + 0.5 * h))
        .collect();
    let boundary: Vec<C64> = (0..s.boundary_samples)
        .map(|j| C64::from_polar(s.radius, 2.0 * PI * j as f64 / s.boundary_samples as f64))
        .collect();

    let (mut vert_num, mut weight_sum, mut top_total) = (0.0, 0.0, 0.0);
    let (mut inside_max, mut boundary_max): (f64, f64) = (0.0, 0.0);
    for (a, patch) in atlas.patches.iter().enumerate() {
        let per_node: Vec<(C64, C64, f64, f64)> = patch
            .nodes
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let a_e: Vec<C64> = (s.e.patches[a].potential)(x).iter().map(|m| m[(0, 0)]).collect();
                let f_e = fe.patches[a][i].component(2, 0)[(0, 0)];
                let rank_f = ch_f.patches[a][i].component(0, 0);
                let ch_f2 = *ch_f.patches[a][i].component(2, 0);
                let combine = |(vert, top): (C64, C64)| (vert * rank_f, top * rank_f + vert * ch_f2);
                let (mut vsum, mut tsum, mut imax) = (c(0.0, 0.0), c(0.0, 0.0), 0.0f64);
                for v in &fibre {
                    let (vert, top) = combine(thom_form(&a_e, f_e, *v, s.sigma));
                    vsum += vert * h * h;
                    tsum += top * h * h;
                    imax = imax.max(vert.norm()).max(top.norm());
                }
                let bmax = boundary
                    .iter()
                    .map(|v| {
                        let (vert, top) = combine(thom_form(&a_e, f_e, *v, s.sigma));
                        vert.norm().max(top.norm())
                    })
                    .fold(0.0, f64::max);
                (vsum, tsum, imax, bmax)
            })
            .collect();
        for (i, (vsum, tsum, imax, bmax)) in per_node.into_iter().enumerate() {
            let w = patch.pou[i] * patch.weights[i];
            vert_num += vsum.re * w;
            weight_sum += w;
            top_total += tsum.re * w;
            inside_max = inside_max.max(imax);
            boundary_max = boundary_max.max(bmax);
        }
    }
    let total_degree_zero = vert_num / weight_sum;

    let rhs = todd_inverse_form(&fe).wedge(&ch_f);
    let base_top = integrate(&rhs.part(2), atlas)?.re;
    let (mut num, mut den) = (0.0, 0.0);
    for (patch, forms) in atlas.patches.iter().zip(&rhs.patches) {
        for i in 0..patch.node_count() {
            let w = patch.pou[i] * patch.weights[i];
            num += forms[i].component(0, 0).re * w;
            den += w;
        }
    }
    let base_degree_zero = num / den;
    let support_leak = if inside_max > 0.0 { boundary_max / inside_max } else { 0.0 };
    if support_leak > LEAK_TOLERANCE {
        return Err(ChernWeilError::SupportLeak { leak: support_leak, tolerance: LEAK_TOLERANCE });
    }
    Ok(ThomReport {
        scenario: s.name.clone(),
        total_degree_zero,
        total_top: top_total,
        base_degree_zero,
        base_top,
        residual: ((total_degree_zero + top_total) - (base_degree_zero + base_top)).abs(),
        support_leak,
    })
}
