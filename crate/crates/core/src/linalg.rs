//! Small dense complex linear algebra helpers.

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn scalar(n: usize, z: C64) -> CMat {
    CMat::from_diagonal_element(n, n, z)
}

/// `e^{2 pi i k / n}`
pub fn root_of_unity(k: i64, n: u64) -> C64 {
    let k = k.rem_euclid(n as i64) as u64;
    if (4 * k) % n == 0 {
        return [c(1.0, 0.0), I, c(-1.0, 0.0), -I][(4 * k / n) as usize];
    }
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `|| m m^* - I ||` in the operator norm.
pub fn unitarity_defect(m: &CMat) -> f64 {
    op_norm(&(m * m.adjoint() - identity(m.nrows())))
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    if m.is_empty() {
        return Some(m.clone());
    }
    m.clone().try_inverse()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows() + b.nrows();
    let m = a.ncols() + b.ncols();
    let mut out = CMat::zeros(n, m);
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

/// Unitary polar factor `W` of `m = W P` (square `m`).
pub fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Right-multiplies the frame `w` by the unitary minimising `|| w U - reference ||`.
pub fn procrustes_align(w: &CMat, reference: &CMat) -> CMat {
    if w.ncols() == 0 {
        return w.clone();
    }
    let overlap = w.adjoint() * reference;
    w * polar_unitary(&overlap)
}

/// Null space of `m` by SVD: singular values below `rel * sigma_max`
/// (or exactly zero) count as kernel. Columns are orthonormal.
pub fn null_space(m: &CMat, rel: f64) -> (CMat, Vec<f64>) {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return (CMat::zeros(0, 0), vec![]);
    }
    // pad to at least square so that V is complete
    let padded = if rows < cols {
        let mut p = CMat::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let vt = svd.v_t.unwrap();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cut = rel * smax;
    let mut cols_out = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if s <= cut || s == 0.0 {
            cols_out.push(vt.row(i).adjoint());
        }
    }
    // zero rows beyond the singular value count (only possible when padded is tall)
    let k = cols_out.len();
    let mut out = CMat::zeros(cols, k);
    for (j, col) in cols_out.into_iter().enumerate() {
        out.set_column(j, &col);
    }
    (out, sv)
}

pub fn max_pair_distance<'a>(pairs: impl Iterator<Item = (&'a CMat, &'a CMat)>) -> f64 {
    pairs.map(|(a, b)| op_norm(&(a - b))).fold(0.0, f64::max)
}

/// Pauli matrices.
pub fn pauli() -> [CMat; 3] {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    [
        CMat::from_row_slice(2, 2, &[z, o, o, z]),
        CMat::from_row_slice(2, 2, &[z, -I, I, z]),
        CMat::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// Rank-one spin projector `(I + b . sigma)/2` for a unit vector `b`.
pub fn spin_projector(b: &[f64; 3]) -> CMat {
    let [sx, sy, sz] = pauli();
    (identity(2) + sx * c(b[0], 0.0) + sy * c(b[1], 0.0) + sz * c(b[2], 0.0)) * c(0.5, 0.0)
}

/// `(I (x) u) m` without forming the Kronecker product.
pub fn kron_identity_left(u: &CMat, m: &CMat) -> CMat {
    let v = u.nrows();
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for b in 0..m.nrows() / v {
        out.rows_mut(b * v, v).copy_from(&(u * m.rows(b * v, v)));
    }
    out
}

/// `m (I (x) u)` without forming the Kronecker product.
pub fn kron_identity_right(m: &CMat, u: &CMat) -> CMat {
    let v = u.nrows();
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for b in 0..m.ncols() / v {
        out.columns_mut(b * v, v).copy_from(&(m.columns(b * v, v) * u));
    }
    out
}

/// `exp(i 0.7 a sigma_y) exp(i 0.3 (a + 1) sigma_z)` for patch `a`.
pub fn fixture_unitaries(count: usize) -> Vec<CMat> {
    (0..count)
        .map(|a| {
            let (phi, psi) = (0.7 * a as f64, 0.3 * (a + 1) as f64);
            let ry = CMat::from_row_slice(
                2,
                2,
                &[c(phi.cos(), 0.0), c(phi.sin(), 0.0), c(-phi.sin(), 0.0), c(phi.cos(), 0.0)],
            );
            let rz = CMat::from_row_slice(
                2,
                2,
                &[C64::from_polar(1.0, psi), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, -psi)],
            );
            ry * rz
        })
        .collect()
}
