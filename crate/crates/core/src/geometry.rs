//! Flat-torus model: constant (1,1)-classes, their intersection numbers, the
//! volume ratio `D_k` and the integer shift `k` that makes it exceed one.
//!
//! The torus is `ℂⁿ / (ℤⁿ + iℤⁿ)` with real coordinates `x_j, y_j ∈ [0, 1)`.
//! A constant class `i Σ a_{jk̄} dz_j ∧ dz̄_k` is stored as its coefficient
//! matrix. Since `i dz ∧ dz̄ = 2 dx ∧ dy`, the top power of a class `A`
//! integrates to `n! · 2ⁿ · det A` over the unit torus.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub const HERMITIAN_TOL: f64 = 1e-12;

/// One real coordinate direction of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// Real part `x_j` of `z_j` (0-based `j`).
    X(usize),
    /// Imaginary part `y_j` of `z_j` (0-based `j`).
    Y(usize),
}

impl Axis {
    /// Position of the axis in grid storage order `[x₁ … xₙ, y₁ … yₙ]`.
    pub fn storage_index(self, n: usize) -> usize {
        match self {
            Axis::X(j) => j,
            Axis::Y(j) => n + j,
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        let s = s.trim();
        let (head, tail) = s.split_at(1.min(s.len()));
        let j: usize = tail.parse().ok()?;
        if j == 0 {
            return None;
        }
        match head {
            "x" | "X" => Some(Axis::X(j - 1)),
            "y" | "Y" => Some(Axis::Y(j - 1)),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X(j) => write!(f, "x{}", j + 1),
            Axis::Y(j) => write!(f, "y{}", j + 1),
        }
    }
}

/// Periodic sampling grid on the unit torus of complex dimension `n`.
///
/// Every real axis is either sampled at `grid_size` points or *collapsed* to a
/// single sample, in which case every field on the grid is invariant along
/// that direction. Collapsing is exact for data that does not depend on the
/// axis, and keeps `n ≥ 2` problems tractable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusModel {
    n: usize,
    grid_size: usize,
    active: Vec<bool>,
}

impl TorusModel {
    pub fn new(n: usize, grid_size: usize) -> Result<Self> {
        Self::with_mask(n, grid_size, vec![true; 2 * n])
    }

    /// Grid that samples only the listed axes; the remaining ones are collapsed.
    pub fn with_active_axes(n: usize, grid_size: usize, axes: &[Axis]) -> Result<Self> {
        let mut active = vec![false; 2 * n];
        for a in axes {
            let idx = a.storage_index(n);
            let j = match a {
                Axis::X(j) | Axis::Y(j) => *j,
            };
            if j >= n {
                return Err(Error::Grid(format!("axis {a} out of range for n = {n}")));
            }
            active[idx] = true;
        }
        Self::with_mask(n, grid_size, active)
    }

    pub fn with_mask(n: usize, grid_size: usize, active: Vec<bool>) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::Grid(format!("complex dimension {n} not in 1..=3")));
        }
        if grid_size < 8 || !grid_size.is_power_of_two() {
            return Err(Error::Grid(format!("grid size {grid_size} must be a power of two ≥ 8")));
        }
        if active.len() != 2 * n {
            return Err(Error::Grid(format!("axis mask has {} entries, expected {}", active.len(), 2 * n)));
        }
        Ok(Self { n, grid_size, active })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn active_axes(&self) -> Vec<Axis> {
        (0..2 * self.n)
            .filter(|&a| self.active[a])
            .map(|a| if a < self.n { Axis::X(a) } else { Axis::Y(a - self.n) })
            .collect()
    }

    /// Samples per storage axis (`grid_size` or 1).
    pub fn shape(&self) -> Vec<usize> {
        self.active.iter().map(|&on| if on { self.grid_size } else { 1 }).collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.grid_size as f64
    }

    /// Row-major strides, last axis fastest.
    pub fn strides(&self) -> Vec<usize> {
        let shape = self.shape();
        let mut strides = vec![1; shape.len()];
        for a in (0..shape.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        strides
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut mi = vec![0; shape.len()];
        for a in (0..shape.len()).rev() {
            mi[a] = idx % shape[a];
            idx /= shape[a];
        }
        mi
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        let shape = self.shape();
        mi.iter().zip(shape.iter()).fold(0, |acc, (&i, &s)| acc * s + (i % s))
    }

    /// Real coordinates `[x₁ … xₙ, y₁ … yₙ]` of a grid point; collapsed axes
    /// report coordinate 0.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(idx).into_iter().map(|i| i as f64 * h).collect()
    }

    /// Neighbour of `idx` shifted by `offset` cells along storage axis `axis`,
    /// with periodic wrap. Collapsed axes map a point to itself.
    pub fn neighbour(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let shape = self.shape();
        let len = shape[axis] as isize;
        if len == 1 {
            return idx;
        }
        let strides = self.strides();
        let mi = (idx / strides[axis]) % shape[axis];
        let shifted = (mi as isize + offset).rem_euclid(len) as usize;
        idx - mi * strides[axis] + shifted * strides[axis]
    }

    pub fn describe(&self) -> String {
        let shape: Vec<String> = self.shape().iter().map(|s| s.to_string()).collect();
        format!("n={} grid={} shape={}", self.n, self.grid_size, shape.join("x"))
    }
}

/// Harmonic representative of a (1,1)-class on the flat torus: a constant
/// Hermitian coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantHermitianClass {
    matrix: CMatrix,
}

impl ConstantHermitianClass {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Dimension(format!("class matrix is {}x{}", matrix.nrows(), matrix.ncols())));
        }
        if let Some(bad) = matrix.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Argument(format!("non-finite class entry at flat position {bad}")));
        }
        let (dev, row, col) = linalg::hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { row, col, deviation: dev });
        }
        Ok(Self { matrix: linalg::symmetrize(&matrix) })
    }

    pub fn diag(d: &[f64]) -> Self {
        Self { matrix: linalg::real_diag(d) }
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: linalg::identity(n) }
    }

    pub fn zero(n: usize) -> Self {
        Self { matrix: linalg::zeros(n) }
    }

    /// Row-major `(re, im)` pairs.
    pub fn from_pairs(n: usize, entries: &[(f64, f64)]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension(format!("expected {} entries, got {}", n * n, entries.len())));
        }
        let data: Vec<Complex64> = entries.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        Self::new(CMatrix::from_row_slice(n, n, &data))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { matrix: &self.matrix - &other.matrix }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { matrix: self.matrix.map(|z| z * s) }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    pub fn is_positive_definite(&self) -> bool {
        linalg::is_positive_definite(&self.matrix)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn to_pairs(&self) -> Vec<(f64, f64)> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                out.push((z.re, z.im));
            }
        }
        out
    }
}

/// A constant Kähler class: positive-definite coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KahlerClass(ConstantHermitianClass);

impl KahlerClass {
    pub fn new(class: ConstantHermitianClass) -> Result<Self> {
        if !class.is_positive_definite() {
            let min = class.eigenvalues().last().copied().unwrap_or(0.0);
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(Self(class))
    }

    pub fn identity(n: usize) -> Self {
        Self(ConstantHermitianClass::identity(n))
    }

    pub fn class(&self) -> &ConstantHermitianClass {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// `2ⁿ ×` (coefficient of `t₁⋯tₙ` in `det(t₁A₁ + … + tₙAₙ)`): the integral
/// of `A₁ ∧ … ∧ Aₙ` over the unit torus.
///
/// The multilinear coefficient is extracted by inclusion–exclusion over
/// subsets, `Σ_S (−1)^{n−|S|} det(Σ_{i∈S} A_i)`.
pub fn intersection_number(classes: &[&ConstantHermitianClass], n: usize) -> Result<f64> {
    if classes.len() != n {
        return Err(Error::Arity { expected: n, got: classes.len() });
    }
    if let Some(c) = classes.iter().find(|c| c.dim() != n) {
        return Err(Error::Dimension(format!("class of size {} on an n = {n} torus", c.dim())));
    }
    let mut coeff = Complex64::new(0.0, 0.0);
    for mask in 1u32..(1u32 << n) {
        let mut sum = linalg::zeros(n);
        for (i, c) in classes.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sum += c.matrix();
            }
        }
        let sign = if (n - mask.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        coeff += linalg::det(&sum) * sign;
    }
    Ok(coeff.re * f64::powi(2.0, n as i32))
}

fn power_pairing(a: &ConstantHermitianClass, a_count: usize, b: &ConstantHermitianClass, n: usize) -> Result<f64> {
    let mut args: Vec<&ConstantHermitianClass> = vec![a; a_count];
    args.extend(std::iter::repeat_n(b, n - a_count));
    intersection_number(&args, n)
}

fn check_pair(l: &ConstantHermitianClass, omega: &KahlerClass, k: f64) -> Result<usize> {
    if l.dim() != omega.dim() {
        return Err(Error::Dimension(format!("L is {}x{}, ω is {}x{}", l.dim(), l.dim(), omega.dim(), omega.dim())));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Argument(format!("shift k = {k} must be positive")));
    }
    Ok(l.dim())
}

/// `L` written in a frame where `ω` is the identity. Intersection numbers
/// scale by `det ω` under that change of frame, so ratios against powers of
/// `ω` are unchanged and better conditioned.
fn relative_to(l: &ConstantHermitianClass, omega: &KahlerClass) -> Result<ConstantHermitianClass> {
    let m = linalg::whitened(l.matrix(), omega.class().matrix()).ok_or_else(|| Error::NotPositiveDefinite {
        min_eigenvalue: omega.class().eigenvalues().last().copied().unwrap_or(0.0),
    })?;
    ConstantHermitianClass::new(m)
}

/// `((L + kω)ⁿ) / ((kω)ⁿ)`.
pub fn dk_constant(l: &ConstantHermitianClass, omega: &KahlerClass, k: f64) -> Result<f64> {
    let n = check_pair(l, omega, k)?;
    let m = relative_to(l, omega)?;
    let k_omega = ConstantHermitianClass::identity(n).scale(k);
    let shifted = m.add(&k_omega);
    let num = power_pairing(&shifted, n, &shifted, n)?;
    let den = power_pairing(&k_omega, n, &k_omega, n)?;
    Ok(num / den)
}

/// `D_k` through its binomial expansion,
/// `1 + Σ_{j<n} C(n,j) kʲ (Lⁿ⁻ʲ·ωʲ) / (kⁿ ωⁿ)`.
pub fn dk_expansion(l: &ConstantHermitianClass, omega: &KahlerClass, k: f64) -> Result<f64> {
    let n = check_pair(l, omega, k)?;
    let m = relative_to(l, omega)?;
    let w = ConstantHermitianClass::identity(n);
    let volume = power_pairing(&w, n, &w, n)?;
    let mut num = 0.0;
    for j in 0..n {
        num += binomial(n, j) * k.powi(j as i32) * power_pairing(&m, n - j, &w, n)?;
    }
    Ok(1.0 + num / (k.powi(n as i32) * volume))
}

/// `(L · ωⁿ⁻¹)`, the hypothesis quantity of the one-positivity theorem.
pub fn degree_against(l: &ConstantHermitianClass, omega: &KahlerClass) -> Result<f64> {
    let n = check_pair(l, omega, 1.0)?;
    power_pairing(l, 1, omega.class(), n)
}

fn binomial(n: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Smallest integer `k ≤ k_max` with `L + kω` positive definite and `D_k > 1`.
pub fn choose_k(l: &ConstantHermitianClass, omega: &KahlerClass, k_max: u32) -> Result<u32> {
    if k_max < 1 {
        return Err(Error::Argument("k_max must be at least 1".into()));
    }
    let degree = degree_against(l, omega)?;
    if !(degree > 0.0) {
        return Err(Error::Hypothesis(format!("(L·ω^(n-1)) = {degree} is not positive")));
    }
    for k in 1..=k_max {
        let shifted = l.add(&omega.class().scale(k as f64));
        if shifted.is_positive_definite() && dk_constant(l, omega, k as f64)? > 1.0 {
            return Ok(k);
        }
    }
    Err(Error::SearchExhausted { k_max })
}
