//! Exact integral simplicial cohomology with torsion, and the Bockstein
//! map from `Z_n`-valued 2-cocycles to integral 3-classes.

pub mod complex;
pub mod matrix;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

pub use complex::{library, Cochain, SimplicialComplex};
pub use matrix::{smith_normal_form, solve_integer, IntegerMatrix, SmithDecomposition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CohomologyError {
    #[error("invalid complex: {0}")]
    InvalidComplex(String),
    #[error("degree {degree} out of range (complex has dimension {dimension})")]
    DegreeOutOfRange { degree: usize, dimension: usize },
    #[error("not a cocycle: coboundary nonzero on {degree}-simplex {simplex:?}")]
    NotACocycle { degree: usize, simplex: Vec<usize> },
    #[error("cochain has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("modulus must be at least 1")]
    BadModulus,
}

/// `H^k(X; Z)` as free rank plus torsion, with explicit generating cocycles.
#[derive(Clone, Debug)]
pub struct CohomologyGroup {
    pub degree: usize,
    pub free_rank: usize,
    /// Invariant factors greater than one, in divisibility order.
    pub torsion: Vec<BigInt>,
    /// One cocycle per torsion factor (same order as `torsion`).
    pub torsion_generators: Vec<Cochain>,
    pub free_generators: Vec<Cochain>,
    // basis data for classification
    kernel_basis: IntegerMatrix,
    delta_rank: usize,
    delta_snf: SmithDecomposition,
    quotient_snf: SmithDecomposition,
    quotient_rank: usize,
    torsion_slots: Vec<usize>,
}

/// Coordinates of a class: integers on the free part, residues on torsion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassCoordinates {
    pub free: Vec<BigInt>,
    /// `(residue, modulus)` per torsion factor.
    pub torsion: Vec<(BigInt, BigInt)>,
}

impl ClassCoordinates {
    pub fn is_zero(&self) -> bool {
        self.free.iter().all(Zero::is_zero) && self.torsion.iter().all(|(r, _)| r.is_zero())
    }

    /// Order of the class; `None` if it has a nonzero free part.
    pub fn order(&self) -> Option<BigInt> {
        if !self.free.iter().all(Zero::is_zero) {
            return None;
        }
        Some(self.torsion.iter().fold(
            BigInt::one(),
            |acc, (r, m)| {
                if r.is_zero() {
                    acc
                } else {
                    acc.lcm(&(m / r.gcd(m)))
                }
            },
        ))
    }
}

impl CohomologyGroup {
    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    /// Human-readable group, e.g. `Z^2 + Z/2`.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        parts.extend(self.torsion.iter().map(|t| format!("Z/{t}")));
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }

    /// The integer combination of generators represented by `coords`.
    pub fn representative(&self, coords: &ClassCoordinates) -> Cochain {
        let n = self.kernel_basis.rows();
        let mut out = vec![BigInt::zero(); n];
        let pairs = self
            .free_generators
            .iter()
            .zip(&coords.free)
            .chain(self.torsion_generators.iter().zip(coords.torsion.iter().map(|(r, _)| r)));
        for (g, c) in pairs {
            for (o, x) in out.iter_mut().zip(g) {
                *o += c * x;
            }
        }
        out
    }
}

/// Computes `H^k(X; Z)` from Smith decompositions of the coboundaries.
pub fn cohomology_group(x: &SimplicialComplex, k: usize) -> Result<CohomologyGroup, CohomologyError> {
    let dim = x.dimension().unwrap_or(0);
    if k > dim || x.count(k) == 0 {
        return Err(CohomologyError::DegreeOutOfRange { degree: k, dimension: dim });
    }
    let n_k = x.count(k);
    let delta = x.coboundary_matrix(k); // C^k -> C^{k+1}
    let delta_snf = smith_normal_form(&delta);
    let r = delta_snf.rank();
    // columns r.. of v_inv span ker(delta)
    let kernel_basis = delta_snf.v_inv.select_cols(r..n_k);
    let z = n_k - r;

    // image of the previous coboundary in kernel coordinates
    let prev = if k == 0 { IntegerMatrix::zeros(n_k, 0) } else { x.coboundary_matrix(k - 1) };
    let coords = (&delta_snf.v * &prev).select_rows(r..n_k);
    let quotient_snf = smith_normal_form(&coords);
    let factors = quotient_snf.invariant_factors();
    let quotient_rank = factors.len();

    let mut torsion = Vec::new();
    let mut torsion_generators = Vec::new();
    let mut torsion_slots = Vec::new();
    for (i, f) in factors.iter().enumerate() {
        if !f.is_one() {
            torsion.push(f.clone());
            torsion_slots.push(i);
            torsion_generators.push(kernel_basis.mul_vec(&quotient_snf.u.column(i)));
        }
    }
    let free_generators = (quotient_rank..z).map(|i| kernel_basis.mul_vec(&quotient_snf.u.column(i))).collect();

    Ok(CohomologyGroup {
        degree: k,
        free_rank: z - quotient_rank,
        torsion,
        torsion_generators,
        free_generators,
        kernel_basis,
        delta_rank: r,
        delta_snf,
        quotient_snf,
        quotient_rank,
        torsion_slots,
    })
}

fn check_cocycle(x: &SimplicialComplex, k: usize, c: &[BigInt]) -> Result<(), CohomologyError> {
    if c.len() != x.count(k) {
        return Err(CohomologyError::LengthMismatch { expected: x.count(k), got: c.len() });
    }
    let dc = x.coboundary(k, c);
    if let Some(i) = dc.iter().position(|v| !v.is_zero()) {
        return Err(CohomologyError::NotACocycle { degree: k + 1, simplex: x.simplices(k + 1)[i].clone() });
    }
    Ok(())
}

/// Expresses the class of a cocycle against the generators of `group`.
///
/// The result is verified: `c` minus the indicated combination must solve
/// `delta m = c - combination` exactly over the integers.
pub fn classify_cocycle(
    x: &SimplicialComplex,
    group: &CohomologyGroup,
    c: &[BigInt],
) -> Result<ClassCoordinates, CohomologyError> {
    let k = group.degree;
    check_cocycle(x, k, c)?;
    let y_full = group.delta_snf.v.mul_vec(c);
    let y = &y_full[group.delta_rank..];
    let w = group.quotient_snf.u_inv.mul_vec(y);
    let free = w[group.quotient_rank..].to_vec();
    let torsion: Vec<(BigInt, BigInt)> =
        group.torsion_slots.iter().zip(&group.torsion).map(|(&i, m)| (w[i].mod_floor(m), m.clone())).collect();
    let coords = ClassCoordinates { free, torsion };

    // exact verification that the remainder is a coboundary
    let rep = group.representative(&coords);
    let rest: Vec<BigInt> = c.iter().zip(&rep).map(|(a, b)| a - b).collect();
    if rest.iter().any(|v| !v.is_zero()) {
        assert!(k > 0, "nonzero remainder in degree 0");
        let prev = x.coboundary_matrix(k - 1);
        assert!(solve_integer(&prev, &rest).is_some(), "classification remainder is not a coboundary");
    }
    Ok(coords)
}

/// Result of the Bockstein map.
#[derive(Clone, Debug)]
pub struct BocksteinClass {
    pub cocycle: Cochain,
    pub coordinates: ClassCoordinates,
}

/// Integral lift of a `Z_n` 2-cochain and its Bockstein image `(delta t)/n`.
pub fn bockstein(x: &SimplicialComplex, theta: &[u64], n: u64) -> Result<BocksteinClass, CohomologyError> {
    let lift: Vec<BigInt> = theta.iter().map(|&t| BigInt::from(t % n)).collect();
    bockstein_with_lift(x, &lift, n)
}

/// As [`bockstein`], with an arbitrary integral lift of the `Z_n` cochain.
pub fn bockstein_with_lift(x: &SimplicialComplex, lift: &[BigInt], n: u64) -> Result<BocksteinClass, CohomologyError> {
    if n == 0 {
        return Err(CohomologyError::BadModulus);
    }
    if lift.len() != x.count(2) {
        return Err(CohomologyError::LengthMismatch { expected: x.count(2), got: lift.len() });
    }
    let nb = BigInt::from(n);
    let dt = x.coboundary(2, lift);
    let mut cocycle = Vec::with_capacity(dt.len());
    for (i, v) in dt.iter().enumerate() {
        let (q, r) = v.div_rem(&nb);
        if !r.is_zero() {
            return Err(CohomologyError::NotACocycle { degree: 3, simplex: x.simplices(3)[i].clone() });
        }
        cocycle.push(q);
    }
    let coordinates = if x.count(3) == 0 {
        ClassCoordinates { free: vec![], torsion: vec![] }
    } else {
        let h3 = cohomology_group(x, 3)?;
        classify_cocycle(x, &h3, &cocycle)?
    };
    if let Some(order) = coordinates.order() {
        assert!(nb.is_multiple_of(&order), "Bockstein class order must divide n");
    } else {
        panic!("Bockstein image has a free component");
    }
    Ok(BocksteinClass { cocycle, coordinates })
}

/// Coboundary of a `Z_n` `k`-cochain, reduced mod `n`.
pub fn coboundary_mod(x: &SimplicialComplex, k: usize, c: &[u64], n: u64) -> Vec<u64> {
    let lift: Vec<BigInt> = c.iter().map(|&v| BigInt::from(v)).collect();
    x.coboundary(k, &lift).into_iter().map(|v| v.mod_floor(&BigInt::from(n)).to_u64().expect("residue fits")).collect()
}

/// Basis of `Z_p`-cocycles of degree `k` that are independent modulo
/// coboundaries, for prime `p` (row reduction over the prime field).
pub fn mod_p_cohomology_basis(x: &SimplicialComplex, k: usize, p: u64) -> Vec<Vec<u64>> {
    let n_k = x.count(k);
    let to_rows = |m: &IntegerMatrix| -> Vec<Vec<u64>> {
        let pb = BigInt::from(p);
        (0..m.rows()).map(|i| m.row(i).iter().map(|v| v.mod_floor(&pb).to_u64().unwrap()).collect()).collect()
    };
    let delta = to_rows(&x.coboundary_matrix(k));
    let cocycles = gf::null_space(&delta, n_k, p);
    let mut span: Vec<Vec<u64>> = if k == 0 { vec![] } else { to_rows(&x.coboundary_matrix(k - 1).transpose()) };
    let mut basis = Vec::new();
    let mut rank = gf::rank(&span, p);
    for z in cocycles {
        span.push(z.clone());
        let r = gf::rank(&span, p);
        if r > rank {
            rank = r;
            basis.push(z);
        } else {
            span.pop();
        }
    }
    basis
}

mod gf {
    fn inv(a: u64, p: u64) -> u64 {
        // Fermat
        let (mut b, mut e, mut r) = (a % p, p - 2, 1u64);
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % p;
            }
            b = b * b % p;
            e >>= 1;
        }
        r
    }

    fn echelon(rows: &mut [Vec<u64>], p: u64) -> Vec<usize> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            let Some(pr) = (r..rows.len()).find(|&i| rows[i][c] % p != 0) else { continue };
            rows.swap(r, pr);
            let iv = inv(rows[r][c], p);
            for v in rows[r].iter_mut() {
                *v = *v * iv % p;
            }
            for i in 0..rows.len() {
                if i != r && rows[i][c] != 0 {
                    let f = rows[i][c];
                    for j in 0..cols {
                        rows[i][j] = (rows[i][j] + p * p - f * rows[r][j] % p) % p;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(rows: &[Vec<u64>], p: u64) -> usize {
        echelon(&mut rows.to_vec(), p).len()
    }

    pub fn null_space(rows: &[Vec<u64>], cols: usize, p: u64) -> Vec<Vec<u64>> {
        let mut m = rows.to_vec();
        let pivots = echelon(&mut m, p);
        (0..cols)
            .filter(|c| !pivots.contains(c))
            .map(|free| {
                let mut v = vec![0u64; cols];
                v[free] = 1;
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = (p - m[r][free] % p) % p;
                }
                v
            })
            .collect()
    }
}
