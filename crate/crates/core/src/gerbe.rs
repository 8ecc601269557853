//! Čech gerbe data on the nerve of a combinatorial good cover.
//!
//! The cover sets are the open vertex stars of a simplicial complex, so
//! `k`-fold overlaps are exactly the `(k-1)`-simplices and Čech cochains
//! are simplicial cochains.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohomology::{self, ClassCoordinates, CohomologyError, SimplicialComplex};
use crate::linalg::{self, CMat, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GerbeError {
    #[error("lift on edge {edge:?} is not special unitary (defect {defect:.3e})")]
    NotSpecialUnitary { edge: (usize, usize), defect: f64 },
    #[error("triple product on {simplex:?} is {distance:.3e} away from every n-th root of unity times identity")]
    NotScalar { simplex: Vec<usize>, distance: f64 },
    #[error("missing lift for edge {0:?}")]
    MissingEdge((usize, usize)),
    #[error("matrix size mismatch on edge {0:?}")]
    SizeMismatch((usize, usize)),
    #[error("theta is not a Z_{n} cocycle on 3-simplex {simplex:?}")]
    NotACocycle { simplex: Vec<usize>, n: u64 },
    #[error("cochain length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
}

/// Numerical tolerances for lift recognition.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GerbeTolerances {
    pub unitary: f64,
    pub scalar: f64,
}

impl Default for GerbeTolerances {
    fn default() -> Self {
        Self { unitary: 1e-9, scalar: 1e-9 }
    }
}

/// Cover by vertex stars of `base`; its nerve is `base` itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinatorialCover {
    pub base: SimplicialComplex,
}

impl CombinatorialCover {
    pub fn new(base: SimplicialComplex) -> Self {
        Self { base }
    }

    pub fn set_count(&self) -> usize {
        self.base.count(0)
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        self.base.simplices(1)
    }

    pub fn triangles(&self) -> &[Vec<usize>] {
        self.base.simplices(2)
    }
}

/// Special-unitary lifts `G_ab` of `PU(n)` transition data, one per
/// sorted edge `a < b`; `G_ba = G_ab^{-1}`.
#[derive(Clone, Debug)]
pub struct PULift {
    pub n: usize,
    pub lifts: BTreeMap<(usize, usize), CMat>,
}

impl PULift {
    pub fn new(n: usize) -> Self {
        Self { n, lifts: BTreeMap::new() }
    }

    pub fn trivial(cover: &CombinatorialCover, n: usize) -> Self {
        let mut l = Self::new(n);
        for e in cover.edges() {
            l.lifts.insert((e[0], e[1]), linalg::identity(n));
        }
        l
    }

    pub fn with(mut self, a: usize, b: usize, g: CMat) -> Self {
        self.set(a, b, g);
        self
    }

    /// Stores `G_ab`, inverting when `a > b`.
    pub fn set(&mut self, a: usize, b: usize, g: CMat) {
        if a < b {
            self.lifts.insert((a, b), g);
        } else {
            self.lifts.insert((b, a), linalg::inverse(&g).expect("invertible lift"));
        }
    }

    pub fn get(&self, a: usize, b: usize) -> Result<CMat, GerbeError> {
        let key = (a.min(b), a.max(b));
        let g = self.lifts.get(&key).ok_or(GerbeError::MissingEdge(key))?;
        if a < b {
            Ok(g.clone())
        } else {
            Ok(linalg::inverse(g).expect("invertible lift"))
        }
    }

    /// Checks `||G G^* - I||` and `|det G - 1|` on every edge.
    pub fn check(&self, tol: &GerbeTolerances) -> Result<(), GerbeError> {
        for (&edge, g) in &self.lifts {
            if g.nrows() != self.n || g.ncols() != self.n {
                return Err(GerbeError::SizeMismatch(edge));
            }
            let defect = linalg::unitarity_defect(g).max((g.determinant() - C64::new(1.0, 0.0)).norm());
            if defect > tol.unitary {
                return Err(GerbeError::NotSpecialUnitary { edge, defect });
            }
        }
        Ok(())
    }

    /// Multiplies each `G_ab` by `exp(2 pi i mu_ab / n)`; `mu` is indexed
    /// like the cover's edge list.
    pub fn rescale_central(&self, cover: &CombinatorialCover, mu: &[u64]) -> Self {
        let mut out = self.clone();
        for (e, &m) in cover.edges().iter().zip(mu) {
            if let Some(g) = out.lifts.get_mut(&(e[0], e[1])) {
                *g *= linalg::root_of_unity(m as i64, self.n as u64);
            }
        }
        out
    }
}

/// `Z_n`-valued 2-cocycle, one residue per sorted 2-simplex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GerbeCocycle {
    pub n: u64,
    pub values: Vec<u64>,
}

impl GerbeCocycle {
    pub fn zero(cover: &CombinatorialCover, n: u64) -> Self {
        Self { n, values: vec![0; cover.triangles().len()] }
    }

    /// Value on an arbitrarily ordered triple, using antisymmetry.
    pub fn oriented(&self, cover: &CombinatorialCover, abc: [usize; 3]) -> Option<u64> {
        let (idx, sign) = cover.base.oriented_index(&abc)?;
        let v = self.values[idx] % self.n;
        Some(if sign > 0 { v } else { (self.n - v) % self.n })
    }

    /// `exp(2 pi i theta_abc / n)` on an oriented triple.
    pub fn phase(&self, cover: &CombinatorialCover, abc: [usize; 3]) -> Option<C64> {
        self.oriented(cover, abc).map(|v| linalg::root_of_unity(v as i64, self.n))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v % self.n == 0)
    }

    pub fn check_cocycle(&self, cover: &CombinatorialCover) -> Result<(), GerbeError> {
        if self.values.len() != cover.triangles().len() {
            return Err(GerbeError::LengthMismatch { expected: cover.triangles().len(), got: self.values.len() });
        }
        let d = cohomology::coboundary_mod(&cover.base, 2, &self.values, self.n);
        if let Some(i) = d.iter().position(|&v| v != 0) {
            return Err(GerbeError::NotACocycle { simplex: cover.base.simplices(3)[i].clone(), n: self.n });
        }
        Ok(())
    }
}

/// Dixmier–Douady cocycle `theta_abc` from `G_ab G_bc G_ca`.
pub fn dd_cocycle(
    cover: &CombinatorialCover,
    lift: &PULift,
    tol: &GerbeTolerances,
) -> Result<GerbeCocycle, GerbeError> {
    lift.check(tol)?;
    let n = lift.n as u64;
    let mut values = Vec::with_capacity(cover.triangles().len());
    for t in cover.triangles() {
        let (a, b, c) = (t[0], t[1], t[2]);
        let p = lift.get(a, b)? * lift.get(b, c)? * lift.get(c, a)?;
        let zeta = p.trace() / C64::new(lift.n as f64, 0.0);
        let off_scalar = linalg::op_norm(&(&p - linalg::scalar(lift.n, zeta)));
        // nearest n-th root of unity
        let k = (zeta.arg() / (2.0 * std::f64::consts::PI) * n as f64).round() as i64;
        let root = linalg::root_of_unity(k, n);
        let distance = off_scalar + (zeta - root).norm();
        if distance > tol.scalar {
            return Err(GerbeError::NotScalar { simplex: t.clone(), distance });
        }
        values.push(k.rem_euclid(n as i64) as u64);
    }
    let theta = GerbeCocycle { n, values };
    theta.check_cocycle(cover)?;
    Ok(theta)
}

/// A classified element of `H^3(base; Z)`.
#[derive(Clone, Debug, Serialize)]
pub struct DDClass {
    pub group: String,
    pub coordinates: ClassCoordinates,
    pub order: Option<String>,
}

impl DDClass {
    pub fn is_zero(&self) -> bool {
        self.coordinates.is_zero()
    }

    pub fn summary(&self) -> String {
        if self.is_zero() {
            return format!("trivial class in H^3 = {}", self.group);
        }
        let tors: Vec<String> = self.coordinates.torsion.iter().map(|(r, m)| format!("{r} mod {m}")).collect();
        format!(
            "torsion class of order {} in H^3 = {} (coordinates: {})",
            self.order.clone().unwrap_or_else(|| "inf".into()),
            self.group,
            tors.join(", ")
        )
    }
}

/// Dixmier–Douady class via the Bockstein of `theta`.
pub fn dd_class(cover: &CombinatorialCover, theta: &GerbeCocycle) -> Result<DDClass, GerbeError> {
    theta.check_cocycle(cover)?;
    let b = cohomology::bockstein(&cover.base, &theta.values, theta.n)?;
    let group = if cover.base.count(3) == 0 {
        "0".to_string()
    } else {
        cohomology::cohomology_group(&cover.base, 3)?.describe()
    };
    let order = b.coordinates.order();
    if let Some(o) = &order {
        assert!(BigInt::from(theta.n) % o == BigInt::zero(), "class order must divide n");
    }
    Ok(DDClass { group, order: order.map(|o| o.to_string()), coordinates: b.coordinates })
}

/// `theta + delta mu (mod n)` for a `Z_n` 1-cochain `mu` on the edges.
pub fn gauge_transform(cover: &CombinatorialCover, theta: &GerbeCocycle, mu: &[u64]) -> GerbeCocycle {
    let d = cohomology::coboundary_mod(&cover.base, 1, mu, theta.n);
    GerbeCocycle { n: theta.n, values: theta.values.iter().zip(d).map(|(a, b)| (a + b) % theta.n).collect() }
}

/// Bundled gerbe fixtures.
pub mod fixtures {
    use super::*;
    use crate::cohomology::library;

    /// Nontrivial `Z_2` 2-cocycle on the suspended projective plane: the
    /// suspension of the generator of `H^1(RP^2; Z_2)`, supported on the
    /// cone over the first suspension point.
    pub fn suspended_rp2_theta() -> (CombinatorialCover, GerbeCocycle) {
        let rp2 = library::projective_plane();
        let alpha =
            cohomology::mod_p_cohomology_basis(&rp2, 1, 2).into_iter().next().expect("H^1(RP^2; Z_2) is nonzero");
        let x = rp2.suspension();
        let north = rp2.vertex_count();
        let mut values = vec![0u64; x.count(2)];
        for (ei, e) in rp2.simplices(1).iter().enumerate() {
            let idx = x.index_of(&[e[0], e[1], north]).expect("cone simplex");
            values[idx] = alpha[ei];
        }
        (CombinatorialCover::new(x), GerbeCocycle { n: 2, values })
    }

    /// Three sets with `G_ab = G_bc = I`, `G_ca = -I` in SU(2).
    pub fn three_set_lift() -> (CombinatorialCover, PULift) {
        let cover = CombinatorialCover::new(library::simplex(2));
        let lift = PULift::trivial(&cover, 2).with(2, 0, linalg::scalar(2, C64::new(-1.0, 0.0)));
        (cover, lift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_lift_gives_zero_cocycle() {
        let (cover, _) = fixtures::three_set_lift();
        let theta = dd_cocycle(&cover, &PULift::trivial(&cover, 3), &Default::default()).unwrap();
        assert!(theta.is_zero());
    }

    #[test]
    fn three_set_example() {
        let (cover, lift) = fixtures::three_set_lift();
        let theta = dd_cocycle(&cover, &lift, &Default::default()).unwrap();
        assert_eq!(theta.values, vec![1]);
        assert!(dd_class(&cover, &theta).unwrap().is_zero());
    }

    #[test]
    fn non_scalar_product_is_rejected() {
        let (cover, _) = fixtures::three_set_lift();
        let [_, _, sz] = linalg::pauli();
        let g = sz * C64::new(0.0, 1.0); // i sigma_z is in SU(2), not central
        let lift = PULift::trivial(&cover, 2).with(0, 1, g);
        assert!(matches!(dd_cocycle(&cover, &lift, &Default::default()), Err(GerbeError::NotScalar { .. })));
    }

    #[test]
    fn non_unitary_is_rejected() {
        let (cover, _) = fixtures::three_set_lift();
        let lift = PULift::trivial(&cover, 2).with(0, 1, linalg::scalar(2, C64::new(1.0 + 1e-6, 0.0)));
        assert!(matches!(dd_cocycle(&cover, &lift, &Default::default()), Err(GerbeError::NotSpecialUnitary { .. })));
    }

    #[test]
    fn gauge_transform_zero_mu_is_identity() {
        let (cover, theta) = fixtures::suspended_rp2_theta();
        let mu = vec![0; cover.edges().len()];
        assert_eq!(gauge_transform(&cover, &theta, &mu), theta);
    }

    #[test]
    fn oriented_values_are_antisymmetric() {
        let cover = CombinatorialCover::new(crate::cohomology::library::simplex(2));
        let theta = GerbeCocycle { n: 5, values: vec![2] };
        assert_eq!(theta.oriented(&cover, [0, 1, 2]), Some(2));
        assert_eq!(theta.oriented(&cover, [1, 0, 2]), Some(3));
        assert_eq!(theta.oriented(&cover, [2, 0, 1]), Some(2));
    }
}
