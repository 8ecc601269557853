//! Finite simplicial complexes with sorted vertex tuples.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use super::matrix::IntegerMatrix;
use super::CohomologyError;

/// An integer cochain: one value per `k`-simplex, in the complex's order.
pub type Cochain = Vec<BigInt>;

/// Simplices stored per dimension as strictly increasing vertex tuples.
/// Orientation is the one induced by vertex order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ComplexFile", into = "ComplexFile")]
pub struct SimplicialComplex {
    vertex_count: usize,
    simplices: Vec<Vec<Vec<usize>>>,
    #[serde(skip)]
    lookup: Vec<HashMap<Vec<usize>, usize>>,
}

/// Interchange form: dimension-by-dimension simplex lists.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexFile {
    pub vertex_count: usize,
    pub simplices: Vec<Vec<Vec<usize>>>,
}

impl TryFrom<ComplexFile> for SimplicialComplex {
    type Error = CohomologyError;
    fn try_from(f: ComplexFile) -> Result<Self, Self::Error> {
        SimplicialComplex::new(f.vertex_count, f.simplices)
    }
}

impl From<SimplicialComplex> for ComplexFile {
    fn from(c: SimplicialComplex) -> Self {
        ComplexFile { vertex_count: c.vertex_count, simplices: c.simplices }
    }
}

impl SimplicialComplex {
    /// Builds a complex from explicit per-dimension lists and checks the
    /// closure, uniqueness and vertex-range invariants.
    pub fn new(vertex_count: usize, simplices: Vec<Vec<Vec<usize>>>) -> Result<Self, CohomologyError> {
        let mut lookup = Vec::with_capacity(simplices.len());
        for (k, list) in simplices.iter().enumerate() {
            let mut map = HashMap::with_capacity(list.len());
            for (idx, s) in list.iter().enumerate() {
                if s.len() != k + 1 {
                    return Err(CohomologyError::InvalidComplex(format!("simplex {s:?} listed in dimension {k}")));
                }
                if s.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(CohomologyError::InvalidComplex(format!("simplex {s:?} is not strictly increasing")));
                }
                if s.iter().any(|&v| v >= vertex_count) {
                    return Err(CohomologyError::InvalidComplex(format!(
                        "simplex {s:?} uses a vertex >= {vertex_count}"
                    )));
                }
                if map.insert(s.clone(), idx).is_some() {
                    return Err(CohomologyError::InvalidComplex(format!("duplicate simplex {s:?}")));
                }
            }
            lookup.push(map);
        }
        let c = Self { vertex_count, simplices, lookup };
        for k in 1..c.simplices.len() {
            for s in &c.simplices[k] {
                for i in 0..=k {
                    let face = face_of(s, i);
                    if c.index_of(&face).is_none() {
                        return Err(CohomologyError::InvalidComplex(format!("face {face:?} of {s:?} is missing")));
                    }
                }
            }
        }
        Ok(c)
    }

    /// Downward closure of a list of (unsorted) maximal simplices.
    pub fn from_maximal(vertex_count: usize, maximal: &[Vec<usize>]) -> Result<Self, CohomologyError> {
        let mut by_dim: Vec<BTreeSet<Vec<usize>>> = Vec::new();
        for s in maximal {
            let mut s = s.clone();
            s.sort_unstable();
            s.dedup();
            let n = s.len();
            for mask in 1u64..(1u64 << n) {
                let face: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect();
                let k = face.len() - 1;
                if by_dim.len() <= k {
                    by_dim.resize_with(k + 1, BTreeSet::new);
                }
                by_dim[k].insert(face);
            }
        }
        Self::new(vertex_count, by_dim.into_iter().map(|s| s.into_iter().collect()).collect())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Highest dimension with at least one simplex; `None` for the empty complex.
    pub fn dimension(&self) -> Option<usize> {
        self.simplices.iter().rposition(|l| !l.is_empty())
    }

    pub fn simplices(&self, k: usize) -> &[Vec<usize>] {
        self.simplices.get(k).map_or(&[], Vec::as_slice)
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices(k).len()
    }

    pub fn index_of(&self, simplex: &[usize]) -> Option<usize> {
        let k = simplex.len().checked_sub(1)?;
        self.lookup.get(k)?.get(simplex).copied()
    }

    /// Index and orientation sign of an arbitrarily ordered simplex.
    pub fn oriented_index(&self, vertices: &[usize]) -> Option<(usize, i32)> {
        let mut sorted = vertices.to_vec();
        let sign = sort_sign(&mut sorted)?;
        self.index_of(&sorted).map(|i| (i, sign))
    }

    /// Matrix of the coboundary `C^k -> C^{k+1}`:
    /// `(dc)(s) = sum_i (-1)^i c(s without vertex i)`.
    pub fn coboundary_matrix(&self, k: usize) -> IntegerMatrix {
        let mut m = IntegerMatrix::zeros(self.count(k + 1), self.count(k));
        for (row, s) in self.simplices(k + 1).iter().enumerate() {
            for i in 0..=k + 1 {
                let col = self.index_of(&face_of(s, i)).expect("closed complex");
                m[(row, col)] = BigInt::from(if i % 2 == 0 { 1 } else { -1 });
            }
        }
        m
    }

    pub fn coboundary(&self, k: usize, c: &[BigInt]) -> Cochain {
        assert_eq!(c.len(), self.count(k), "cochain length mismatch");
        self.simplices(k + 1)
            .iter()
            .map(|s| {
                (0..=k + 1).fold(BigInt::from(0), |acc, i| {
                    let v = &c[self.index_of(&face_of(s, i)).expect("closed complex")];
                    if i % 2 == 0 {
                        acc + v
                    } else {
                        acc - v
                    }
                })
            })
            .collect()
    }

    /// Number of connected components (union-find over edges).
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.vertex_count).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in self.simplices(1) {
            let (a, b) = (find(&mut parent, e[0]), find(&mut parent, e[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let used: BTreeSet<usize> = self.simplices(0).iter().map(|v| v[0]).collect();
        used.into_iter().map(|v| find(&mut parent, v)).collect::<BTreeSet<_>>().len()
    }

    /// Suspension: two cone points appended as the last two vertices.
    pub fn suspension(&self) -> Self {
        let north = self.vertex_count;
        let south = north + 1;
        let mut maximal = vec![vec![north], vec![south]];
        for list in &self.simplices {
            for s in list {
                maximal.push(s.clone());
                let mut n = s.clone();
                n.push(north);
                maximal.push(n);
                let mut sth = s.clone();
                sth.push(south);
                maximal.push(sth);
            }
        }
        Self::from_maximal(self.vertex_count + 2, &maximal).expect("suspension of a valid complex")
    }
}

pub(crate) fn face_of(s: &[usize], i: usize) -> Vec<usize> {
    s.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect()
}

/// Sorts in place, returning the permutation sign, or `None` on repeats.
pub(crate) fn sort_sign(v: &mut [usize]) -> Option<i32> {
    let mut sign = 1;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

/// Standard bundled complexes.
pub mod library {
    use super::SimplicialComplex;

    /// Boundary of the 3-simplex, a triangulated 2-sphere.
    pub fn sphere_s2() -> SimplicialComplex {
        SimplicialComplex::from_maximal(4, &[vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]).unwrap()
    }

    /// The minimal six-vertex real projective plane.
    pub fn projective_plane() -> SimplicialComplex {
        let faces = [
            [0, 1, 2],
            [0, 2, 3],
            [0, 3, 4],
            [0, 4, 5],
            [0, 1, 5],
            [1, 2, 4],
            [2, 3, 5],
            [1, 3, 4],
            [2, 4, 5],
            [1, 3, 5],
        ];
        let faces: Vec<Vec<usize>> = faces.iter().map(|f| f.to_vec()).collect();
        SimplicialComplex::from_maximal(6, &faces).unwrap()
    }

    /// Suspension of [`projective_plane`]; its third integral cohomology is Z/2.
    pub fn suspended_projective_plane() -> SimplicialComplex {
        projective_plane().suspension()
    }

    /// A single closed `n`-simplex.
    pub fn simplex(n: usize) -> SimplicialComplex {
        SimplicialComplex::from_maximal(n + 1, &[(0..=n).collect()]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_missing_face() {
        let err =
            SimplicialComplex::new(3, vec![vec![vec![0], vec![1], vec![2]], vec![vec![0, 1]], vec![vec![0, 1, 2]]]);
        assert!(matches!(err, Err(CohomologyError::InvalidComplex(_))));
    }

    #[test]
    fn rejects_duplicates_and_range() {
        assert!(SimplicialComplex::new(2, vec![vec![vec![0], vec![0]]]).is_err());
        assert!(SimplicialComplex::new(1, vec![vec![vec![0], vec![1]]]).is_err());
    }

    #[test]
    fn projective_plane_counts() {
        let p = library::projective_plane();
        assert_eq!((p.count(0), p.count(1), p.count(2)), (6, 15, 10));
        // every edge lies in exactly two triangles
        for e in p.simplices(1) {
            let n = p.simplices(2).iter().filter(|t| e.iter().all(|v| t.contains(v))).count();
            assert_eq!(n, 2, "edge {e:?}");
        }
    }

    #[test]
    fn coboundary_squares_to_zero() {
        let x = library::suspended_projective_plane();
        let d1 = x.coboundary_matrix(1);
        let d2 = x.coboundary_matrix(2);
        assert!((&d2 * &d1).is_zero());
    }

    #[test]
    fn oriented_index_sign() {
        let s = library::simplex(2);
        assert_eq!(s.oriented_index(&[1, 0]).unwrap().1, -1);
        assert_eq!(s.oriented_index(&[2, 0, 1]).unwrap().1, 1);
        assert!(s.oriented_index(&[1, 1]).is_none());
    }
}
