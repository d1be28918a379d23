//! Periodic calculus on torus grids: scalar potentials, Hermitian form fields,
//! complex Hessians `∂²φ/∂z_j∂z̄_k`, the C² seminorm and the weighted potential
//! series.
//!
//! With `z_j = x_j + i y_j` and `∂/∂z = (∂x − i∂y)/2`,
//!
//! ```text
//! ∂²φ/∂z_j∂z̄_k = ¼ [φ_{x_j x_k} + φ_{y_j y_k} + i(φ_{x_j y_k} − φ_{y_j x_k})]
//! ```
//!
//! whose Fourier symbol is `−π² conj(ζ_j) ζ_k` for `ζ = m_x + i m_y`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ConstantHermitianClass, TorusModel};
use crate::linalg::{self, CMatrix};
use crate::spectral::Spectral;

pub const MEAN_ZERO_TOL: f64 = 1e-12;
/// Floor for the C² weights of the potential series.
pub const C2_FLOOR: f64 = 1e-12;

/// Real scalar field sampled on a torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    torus: TorusModel,
    values: Vec<f64>,
    mean_zero: bool,
}

impl PotentialField {
    pub fn new(torus: &TorusModel, values: Vec<f64>) -> Result<Self> {
        if values.len() != torus.len() {
            return Err(Error::Grid(format!(
                "field has {} samples, grid {} has {}",
                values.len(),
                torus.describe(),
                torus.len()
            )));
        }
        Ok(Self { torus: torus.clone(), values, mean_zero: false })
    }

    pub fn zeros(torus: &TorusModel) -> Self {
        Self { torus: torus.clone(), values: vec![0.0; torus.len()], mean_zero: true }
    }

    pub fn constant(torus: &TorusModel, c: f64) -> Self {
        Self { torus: torus.clone(), values: vec![c; torus.len()], mean_zero: c == 0.0 }
    }

    /// Samples `f` at the real coordinates `[x₁ … xₙ, y₁ … yₙ]` of each grid point.
    pub fn from_fn(torus: &TorusModel, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..torus.len()).map(|i| f(&torus.coords(i))).collect();
        Self { torus: torus.clone(), values, mean_zero: false }
    }

    pub fn torus(&self) -> &TorusModel {
        &self.torus
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.mean_zero = false;
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Subtracts the grid mean and marks the field as normalized.
    pub fn normalized(mut self) -> Self {
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
        // second pass removes the rounding residue of the first
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
        self.mean_zero = self.mean().abs() <= MEAN_ZERO_TOL;
        self
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.torus != other.torus {
            return Err(Error::Grid(format!("grids differ: {} vs {}", self.torus.describe(), other.torus.describe())));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { torus: self.torus.clone(), values, mean_zero: false })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { torus: self.torus.clone(), values, mean_zero: false })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            torus: self.torus.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            mean_zero: self.mean_zero,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }
}

/// Field of `n×n` Hermitian matrices, one per grid point, stored entrywise.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianFormField {
    torus: TorusModel,
    n: usize,
    /// `entries[j * n + k][point]`
    entries: Vec<Vec<Complex64>>,
}

impl HermitianFormField {
    pub fn zeros(torus: &TorusModel) -> Self {
        let n = torus.n();
        Self { torus: torus.clone(), n, entries: vec![vec![Complex64::new(0.0, 0.0); torus.len()]; n * n] }
    }

    pub fn constant(torus: &TorusModel, class: &ConstantHermitianClass) -> Result<Self> {
        let mut f = Self::zeros(torus);
        f.add_constant(class)?;
        Ok(f)
    }

    /// Builds the field pointwise; each matrix is symmetrized on entry.
    pub fn from_fn(torus: &TorusModel, f: impl Fn(usize) -> CMatrix) -> Result<Self> {
        let mut out = Self::zeros(torus);
        let n = out.n;
        for idx in 0..torus.len() {
            let m = f(idx);
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension(format!("matrix at point {idx} is {}x{}", m.nrows(), m.ncols())));
            }
            out.set(idx, &linalg::symmetrize(&m));
        }
        Ok(out)
    }

    pub fn torus(&self) -> &TorusModel {
        &self.torus
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.torus.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entry(&self, j: usize, k: usize) -> &[Complex64] {
        &self.entries[j * self.n + k]
    }

    pub fn at(&self, idx: usize) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |j, k| self.entries[j * self.n + k][idx])
    }

    pub fn set(&mut self, idx: usize, m: &CMatrix) {
        for j in 0..self.n {
            for k in 0..self.n {
                self.entries[j * self.n + k][idx] = m[(j, k)];
            }
        }
    }

    pub fn add_constant(&mut self, class: &ConstantHermitianClass) -> Result<()> {
        if class.dim() != self.n {
            return Err(Error::Dimension(format!("class of size {} added to n = {} field", class.dim(), self.n)));
        }
        for j in 0..self.n {
            for k in 0..self.n {
                let c = class.matrix()[(j, k)];
                for z in &mut self.entries[j * self.n + k] {
                    *z += c;
                }
            }
        }
        Ok(())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.torus != other.torus {
            return Err(Error::Grid(format!("grids differ: {} vs {}", self.torus.describe(), other.torus.describe())));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y * s).collect())
            .collect();
        Ok(Self { torus: self.torus.clone(), n: self.n, entries })
    }

    pub fn scale(&self, s: f64) -> Self {
        let entries = self.entries.iter().map(|e| e.iter().map(|z| z * s).collect()).collect();
        Self { torus: self.torus.clone(), n: self.n, entries }
    }

    /// Largest entrywise deviation from Hermitian symmetry over the grid.
    pub fn hermitian_deviation(&self) -> f64 {
        (0..self.len()).map(|i| linalg::hermitian_deviation(&self.at(i)).0).fold(0.0, f64::max)
    }

    /// Pointwise determinant (real part; the imaginary part is rounding).
    pub fn determinants(&self) -> Vec<f64> {
        (0..self.len()).into_par_iter().map(|i| linalg::det(&self.at(i)).re).collect()
    }

    /// Smallest pointwise eigenvalue and where it is attained.
    pub fn min_eigenvalue(&self) -> (f64, usize) {
        (0..self.len())
            .into_par_iter()
            .map(|i| (linalg::min_eigenvalue(&self.at(i)), i))
            .reduce(|| (f64::INFINITY, 0), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
    }

    /// First grid point where the form is not positive definite.
    pub fn first_non_positive(&self) -> Option<usize> {
        (0..self.len()).into_par_iter().find_first(|&i| !linalg::is_positive_definite(&self.at(i)))
    }
}

pub(crate) fn hessian_with(spec: &Spectral, values: &[f64]) -> HermitianFormField {
    let hat = spec.forward_real(values);
    hessian_from_spectrum(spec, &hat)
}

pub(crate) fn hessian_from_spectrum(spec: &Spectral, hat: &[Complex64]) -> HermitianFormField {
    let torus = spec.torus();
    let n = torus.n();
    let mut out = HermitianFormField::zeros(torus);
    for j in 0..n {
        for k in j..n {
            let mut buf: Vec<Complex64> =
                hat.iter().enumerate().map(|(idx, c)| c * spec.d_symbol(j, idx) * spec.dbar_symbol(k, idx)).collect();
            spec.inverse(&mut buf);
            if j == k {
                out.entries[j * n + j] = buf.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
            } else {
                out.entries[k * n + j] = buf.iter().map(|z| z.conj()).collect();
                out.entries[j * n + k] = buf;
            }
        }
    }
    out
}

/// Spectral complex Hessian `∂²φ/∂z_j∂z̄_k`; exactly Hermitian by construction.
pub fn complex_hessian(phi: &PotentialField) -> Result<HermitianFormField> {
    if let Some(point) = phi.first_non_finite() {
        return Err(Error::NonFinite { point });
    }
    let spec = Spectral::new(phi.torus());
    Ok(hessian_with(&spec, phi.values()))
}

/// Centered second-order finite-difference complex Hessian on the periodic
/// grid. Points whose stencil touches a non-finite sample get non-finite
/// entries; callers mask them.
pub fn complex_hessian_fd(torus: &TorusModel, values: &[f64]) -> Result<HermitianFormField> {
    if values.len() != torus.len() {
        return Err(Error::Grid(format!("field has {} samples, grid has {}", values.len(), torus.len())));
    }
    let n = torus.n();
    let shape = torus.shape();
    let h = torus.spacing();
    let second = |idx: usize, a: usize, b: usize| -> f64 {
        if shape[a] == 1 || shape[b] == 1 {
            return 0.0;
        }
        if a == b {
            let p = torus.neighbour(idx, a, 1);
            let m = torus.neighbour(idx, a, -1);
            (values[p] - 2.0 * values[idx] + values[m]) / (h * h)
        } else {
            let pp = torus.neighbour(torus.neighbour(idx, a, 1), b, 1);
            let pm = torus.neighbour(torus.neighbour(idx, a, 1), b, -1);
            let mp = torus.neighbour(torus.neighbour(idx, a, -1), b, 1);
            let mm = torus.neighbour(torus.neighbour(idx, a, -1), b, -1);
            (values[pp] - values[pm] - values[mp] + values[mm]) / (4.0 * h * h)
        }
    };
    let mut out = HermitianFormField::zeros(torus);
    for idx in 0..torus.len() {
        for j in 0..n {
            for k in j..n {
                let (xj, yj, xk, yk) = (j, n + j, k, n + k);
                let re = 0.25 * (second(idx, xj, xk) + second(idx, yj, yk));
                let im = if j == k { 0.0 } else { 0.25 * (second(idx, xj, yk) - second(idx, yj, xk)) };
                let z = Complex64::new(re, im);
                out.entries[j * n + k][idx] = z;
                out.entries[k * n + j][idx] = z.conj();
            }
        }
    }
    Ok(out)
}

/// `sup_x Σ_{j,k} |∂²φ/∂z_j∂z̄_k|` in the single global chart of the torus.
pub fn c2_norm(phi: &PotentialField) -> Result<f64> {
    let hess = complex_hessian(phi)?;
    Ok(c2_norm_of_hessian(&hess))
}

pub fn c2_norm_of_hessian(hess: &HermitianFormField) -> f64 {
    let n = hess.n();
    (0..hess.len())
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += hess.entry(j, k)[i].norm();
                }
            }
            s
        })
        .fold(0.0, f64::max)
}

/// `Σ_{i=1..terms} φ_i / (2ⁱ A_i)` with `A_i = max(‖φ_i‖_{C²}, C2_FLOOR)`, so
/// that the C²-norm of the tail after `terms` is at most `2^{-terms}`.
pub fn weighted_series_combine(phis: &[PotentialField], terms: usize) -> Result<PotentialField> {
    if terms > phis.len() {
        return Err(Error::Argument(format!("{terms} terms requested from {} fields", phis.len())));
    }
    let first = phis.first().ok_or_else(|| Error::Argument("empty potential list".into()))?;
    let mut acc = PotentialField::zeros(first.torus());
    acc.mean_zero = false;
    for (i, phi) in phis.iter().take(terms).enumerate() {
        first.same_grid(phi)?;
        let a = c2_norm(phi)?.max(C2_FLOOR);
        let w = 1.0 / (f64::powi(2.0, i as i32 + 1) * a);
        for (dst, v) in acc.values.iter_mut().zip(phi.values()) {
            *dst += w * v;
        }
    }
    Ok(acc)
}
