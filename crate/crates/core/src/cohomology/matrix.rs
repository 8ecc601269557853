//! Dense integer matrices with exact arithmetic and Smith normal form.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Dense row-major matrix of arbitrary-precision integers.
#[derive(Clone, PartialEq, Eq)]
pub struct IntegerMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntegerMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_i64(rows: usize, cols: usize, entries: &[i64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count mismatch");
        Self { rows, cols, data: entries.iter().map(|&e| BigInt::from(e)).collect() }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let flat: Vec<i64> = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self::from_i64(r, c, &flat)
    }

    pub fn column_vector(entries: &[BigInt]) -> Self {
        Self { rows: entries.len(), cols: 1, data: entries.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    /// Sub-matrix of the listed rows (all columns).
    pub fn select_rows(&self, rows: std::ops::Range<usize>) -> Self {
        let mut out = Self::zeros(rows.len(), self.cols);
        for (k, i) in rows.enumerate() {
            for j in 0..self.cols {
                out[(k, j)] = self[(i, j)].clone();
            }
        }
        out
    }

    /// Sub-matrix of the listed columns (all rows).
    pub fn select_cols(&self, cols: std::ops::Range<usize>) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, j) in cols.clone().enumerate() {
                out[(i, k)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).fold(BigInt::zero(), |acc, (a, b)| acc + a * b)).collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += k * row[src]
    fn add_row(&mut self, dst: usize, src: usize, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let v = &self.data[src * self.cols + j] * k;
            self.data[dst * self.cols + j] += v;
        }
    }

    /// col[dst] += k * col[src]
    fn add_col(&mut self, dst: usize, src: usize, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let v = &self.data[i * self.cols + src] * k;
            self.data[i * self.cols + dst] += v;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -std::mem::take(&mut self.data[i * self.cols + j]);
            self.data[i * self.cols + j] = v;
        }
    }
}

impl Index<(usize, usize)> for IntegerMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntegerMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &IntegerMatrix {
    type Output = IntegerMatrix;
    fn mul(self, rhs: &IntegerMatrix) -> IntegerMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = IntegerMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = &rhs[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }
}

impl fmt::Debug for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntegerMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(ToString::to_string).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// `M = U * D * V` with `U`, `V` unimodular and `D` diagonal, `d_1 | d_2 | ...`.
///
/// The inverses of both change-of-basis matrices are kept because every
/// consumer (kernel bases, cokernel coordinates, exact solves) needs them.
#[derive(Clone, Debug)]
pub struct SmithDecomposition {
    pub u: IntegerMatrix,
    pub d: IntegerMatrix,
    pub v: IntegerMatrix,
    pub u_inv: IntegerMatrix,
    pub v_inv: IntegerMatrix,
}

impl SmithDecomposition {
    /// Nonzero diagonal entries in order.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        (0..self.d.rows().min(self.d.cols())).map(|i| self.d[(i, i)].clone()).take_while(|x| !x.is_zero()).collect()
    }

    pub fn rank(&self) -> usize {
        self.invariant_factors().len()
    }
}

/// Smith normal form by alternating row/column gcd reduction.
pub fn smith_normal_form(m: &IntegerMatrix) -> SmithDecomposition {
    let (rows, cols) = (m.rows(), m.cols());
    let mut d = m.clone();
    // d = u_inv * m * v_inv at all times; u, v track the inverses.
    let mut u = IntegerMatrix::identity(rows);
    let mut u_inv = IntegerMatrix::identity(rows);
    let mut v = IntegerMatrix::identity(cols);
    let mut v_inv = IntegerMatrix::identity(cols);

    // Row op R: d <- R d, u_inv <- R u_inv, u <- u R^{-1}.
    // Column op C: d <- d C, v_inv <- v_inv C, v <- C^{-1} v.
    let row_swap = |d: &mut IntegerMatrix, u: &mut IntegerMatrix, ui: &mut IntegerMatrix, a, b| {
        d.swap_rows(a, b);
        ui.swap_rows(a, b);
        u.swap_cols(a, b);
    };
    let col_swap = |d: &mut IntegerMatrix, v: &mut IntegerMatrix, vi: &mut IntegerMatrix, a, b| {
        d.swap_cols(a, b);
        vi.swap_cols(a, b);
        v.swap_rows(a, b);
    };
    // row[dst] += k row[src]; inverse on u: col[src] -= k col[dst]
    let row_add = |d: &mut IntegerMatrix, u: &mut IntegerMatrix, ui: &mut IntegerMatrix, dst, src, k: &BigInt| {
        d.add_row(dst, src, k);
        ui.add_row(dst, src, k);
        u.add_col(src, dst, &-k);
    };
    // col[dst] += k col[src]; inverse on v: row[src] -= k row[dst]
    let col_add = |d: &mut IntegerMatrix, v: &mut IntegerMatrix, vi: &mut IntegerMatrix, dst, src, k: &BigInt| {
        d.add_col(dst, src, k);
        vi.add_col(dst, src, k);
        v.add_row(src, dst, &-k);
    };

    let diag = rows.min(cols);
    for t in 0..diag {
        // pivot: smallest nonzero absolute value in the trailing block
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                let x = &d[(i, j)];
                if !x.is_zero() && best.is_none_or(|(bi, bj)| x.abs() < d[(bi, bj)].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        row_swap(&mut d, &mut u, &mut u_inv, t, pi);
        col_swap(&mut d, &mut v, &mut v_inv, t, pj);

        loop {
            let mut dirty = false;
            // clear column t below the pivot
            for i in t + 1..rows {
                if d[(i, t)].is_zero() {
                    continue;
                }
                let q = d[(i, t)].div_floor(&d[(t, t)]);
                row_add(&mut d, &mut u, &mut u_inv, i, t, &-q);
                if !d[(i, t)].is_zero() {
                    row_swap(&mut d, &mut u, &mut u_inv, t, i);
                    dirty = true;
                }
            }
            // clear row t right of the pivot
            for j in t + 1..cols {
                if d[(t, j)].is_zero() {
                    continue;
                }
                let q = d[(t, j)].div_floor(&d[(t, t)]);
                col_add(&mut d, &mut v, &mut v_inv, j, t, &-q);
                if !d[(t, j)].is_zero() {
                    col_swap(&mut d, &mut v, &mut v_inv, t, j);
                    dirty = true;
                }
            }
            if dirty {
                continue;
            }
            // divisibility: pivot must divide the whole trailing block
            let offender = (t + 1..rows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !d[(i, j)].is_multiple_of(&d[(t, t)]));
            match offender {
                Some((i, _)) => row_add(&mut d, &mut u, &mut u_inv, t, i, &BigInt::one()),
                None => break,
            }
        }
        if d[(t, t)].is_negative() {
            d.negate_row(t);
            u_inv.negate_row(t);
            // u <- u * diag(.., -1, ..)
            for i in 0..rows {
                let x = -std::mem::take(&mut u[(i, t)]);
                u[(i, t)] = x;
            }
        }
    }

    SmithDecomposition { u, d, v, u_inv, v_inv }
}

/// Solves `a x = b` over the integers. Returns `None` when no integer
/// solution exists.
pub fn solve_integer(a: &IntegerMatrix, b: &[BigInt]) -> Option<Vec<BigInt>> {
    solve_with_snf(a, &smith_normal_form(a), b)
}

/// Same as [`solve_integer`] with a precomputed decomposition of `a`.
pub fn solve_with_snf(a: &IntegerMatrix, snf: &SmithDecomposition, b: &[BigInt]) -> Option<Vec<BigInt>> {
    assert_eq!(b.len(), a.rows(), "right-hand side length mismatch");
    // d y = u_inv b, x = v_inv y
    let c = snf.u_inv.mul_vec(b);
    let mut y = vec![BigInt::zero(); a.cols()];
    for (i, ci) in c.iter().enumerate() {
        let di = if i < a.cols() { &snf.d[(i, i)] } else { &BigInt::ZERO };
        if di.is_zero() {
            if !ci.is_zero() {
                return None;
            }
        } else {
            let (q, r) = ci.div_rem(di);
            if !r.is_zero() {
                return None;
            }
            y[i] = q;
        }
    }
    Some(snf.v_inv.mul_vec(&y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(m: &IntegerMatrix) -> SmithDecomposition {
        let s = smith_normal_form(m);
        assert_eq!(&(&s.u * &s.d) * &s.v, *m);
        assert_eq!(&s.u * &s.u_inv, IntegerMatrix::identity(m.rows()));
        assert_eq!(&s.v * &s.v_inv, IntegerMatrix::identity(m.cols()));
        let f = s.invariant_factors();
        for w in f.windows(2) {
            assert!(w[1].is_multiple_of(&w[0]));
        }
        s
    }

    #[test]
    fn identity_is_its_own_normal_form() {
        let s = check(&IntegerMatrix::identity(3));
        assert_eq!(s.d, IntegerMatrix::identity(3));
    }

    #[test]
    fn two_by_two_example() {
        // gcd of entries is 2, |det| = |16 - 24| = 8 so d2 = 4
        let s = check(&IntegerMatrix::from_rows(&[vec![2, 4], vec![6, 8]]));
        assert_eq!(s.d, IntegerMatrix::from_rows(&[vec![2, 0], vec![0, 4]]));
    }

    #[test]
    fn zero_matrix_keeps_identity_transforms() {
        let z = IntegerMatrix::zeros(3, 4);
        let s = check(&z);
        assert!(s.d.is_zero());
        assert_eq!(s.u, IntegerMatrix::identity(3));
        assert_eq!(s.v, IntegerMatrix::identity(4));
    }

    #[test]
    fn divisibility_fixup_needed() {
        // diag(2, 3) is diagonal but not Smith: expect diag(1, 6)
        let s = check(&IntegerMatrix::from_rows(&[vec![2, 0], vec![0, 3]]));
        assert_eq!(s.invariant_factors(), vec![BigInt::from(1), BigInt::from(6)]);
    }

    #[test]
    fn rectangular_and_rank_deficient() {
        let m = IntegerMatrix::from_rows(&[vec![1, 2, 3], vec![2, 4, 6], vec![0, 2, 4]]);
        let s = check(&m);
        assert_eq!(s.rank(), 2);
    }

    #[test]
    fn integer_solve() {
        let a = IntegerMatrix::from_rows(&[vec![2, 0], vec![0, 2]]);
        let ok = solve_integer(&a, &[BigInt::from(4), BigInt::from(-2)]).unwrap();
        assert_eq!(ok, vec![BigInt::from(2), BigInt::from(-1)]);
        assert!(solve_integer(&a, &[BigInt::from(1), BigInt::from(0)]).is_none());
    }
}
