//! Small dense complex linear algebra shared by the grid pipelines.
//!
//! Everything here works on `n ≤ 3` Hermitian matrices evaluated at a single
//! grid point, so closed forms are used where they exist.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn real_diag(d: &[f64]) -> CMatrix {
    let n = d.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(d[i], 0.0) } else { Complex64::new(0.0, 0.0) })
}

/// Largest entrywise deviation `|m_ij - conj(m_ji)|` and where it occurs.
pub fn hermitian_deviation(m: &CMatrix) -> (f64, usize, usize) {
    let mut worst = (0.0, 0, 0);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst.0 {
                worst = (d, i, j);
            }
        }
    }
    worst
}

pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Determinant, closed form for n ≤ 3.
pub fn det(m: &CMatrix) -> Complex64 {
    match m.nrows() {
        0 => Complex64::new(1.0, 0.0),
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => m.clone().determinant(),
    }
}

/// Classical adjugate, `adj(m) m = det(m) I`.
pub fn adjugate(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    match n {
        1 => identity(1),
        2 => CMatrix::from_row_slice(2, 2, &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]]),
        _ => {
            let mut adj = zeros(n);
            for i in 0..n {
                for j in 0..n {
                    let minor = m.clone().remove_row(j).remove_column(i);
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    adj[(i, j)] = det(&minor) * sign;
                }
            }
            adj
        }
    }
}

/// Eigenvalues of a Hermitian matrix, sorted descending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).last().copied().unwrap_or(f64::INFINITY)
}

/// Lower Cholesky factor `L` with `L Lᴴ = m`, or `None` if some pivot is
/// not strictly positive.
pub fn cholesky(m: &CMatrix) -> Option<CMatrix> {
    let n = m.nrows();
    let mut l = zeros(n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for p in 0..j {
            d -= l[(j, p)].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

pub fn is_positive_definite(m: &CMatrix) -> bool {
    cholesky(&symmetrize(m)).is_some()
}

/// Generalized Hermitian eigenvalues of the pencil `A v = λ B v`, sorted
/// descending. Returns `None` when `B` is not positive definite.
///
/// `B = L Lᴴ` is reduced away so the problem becomes the ordinary Hermitian
/// problem for `L⁻¹ A L⁻ᴴ`.
pub fn generalized_eigenvalues(a: &CMatrix, b: &CMatrix) -> Option<Vec<f64>> {
    Some(hermitian_eigenvalues(&whitened(a, b)?))
}

/// `L⁻¹ A L⁻ᴴ` for `B = L Lᴴ`, symmetrized; `None` unless `B` is positive
/// definite.
pub fn whitened(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    let l = cholesky(&symmetrize(b))?;
    let x = l.solve_lower_triangular(a)?;
    Some(symmetrize(&l.solve_lower_triangular(&x.adjoint())?))
}

/// Elementary symmetric polynomial `e_j` of the given values.
pub fn elementary_symmetric(values: &[f64], j: usize) -> f64 {
    let mut e = vec![0.0; j + 1];
    e[0] = 1.0;
    for &v in values {
        for i in (1..=j).rev() {
            e[i] += e[i - 1] * v;
        }
    }
    e[j]
}

/// All `k`-element subsets of `0..n` as sorted index lists, in lexicographic
/// bitmask order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1u32 << n))
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}
