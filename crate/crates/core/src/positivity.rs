//! Eigenvalue fields of one form relative to another, q-positivity
//! certificates, and the end-to-end one-positivity and pseudoeffective
//! pipelines.
//!
//! A form is q-positive at a point when it has at least `n − q` positive
//! eigenvalues there, i.e. when its `(n−q)`-th largest eigenvalue is
//! positive. Certificates are grid evidence: the check runs at every sample
//! of the torus grid with an explicit strictness margin.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{HermitianFormField, PotentialField};
use crate::error::{Error, Result};
use crate::geometry::{choose_k, degree_against, ConstantHermitianClass, KahlerClass, TorusModel};
use crate::linalg;
use crate::ma_solver::{ma_for_dk, DkSolve, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Default strictness threshold for "positive" in a grid certificate.
pub const DEFAULT_MARGIN: f64 = 1e-8;

/// Per-point generalized eigenvalues, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueField {
    torus: TorusModel,
    n: usize,
    values: Vec<f64>,
}

impl EigenvalueField {
    pub fn torus(&self) -> &TorusModel {
        &self.torus
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.n..(idx + 1) * self.n]
    }

    /// The field of the `i`-th largest eigenvalue (0-based).
    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|p| self.at(p)[i]).collect()
    }

    /// Every eigenvalue shifted by `s`.
    pub fn shifted(&self, s: f64) -> Self {
        Self { torus: self.torus.clone(), n: self.n, values: self.values.iter().map(|v| v + s).collect() }
    }

    pub fn products(&self) -> Vec<f64> {
        (0..self.len()).map(|p| self.at(p).iter().product()).collect()
    }

    /// Largest change of any sorted eigenvalue between grid neighbours
    /// (reported as a continuity diagnostic, not asserted).
    pub fn max_neighbour_jump(&self) -> f64 {
        let shape = self.torus.shape();
        let mut worst: f64 = 0.0;
        for p in 0..self.len() {
            for (axis, &s) in shape.iter().enumerate() {
                if s == 1 {
                    continue;
                }
                let q = self.torus.neighbour(p, axis, 1);
                for i in 0..self.n {
                    worst = worst.max((self.at(p)[i] - self.at(q)[i]).abs());
                }
            }
        }
        worst
    }
}

/// Solves `A v = λ B v` at every grid point by Cholesky reduction of `B`.
pub fn eigenvalues_relative(a: &HermitianFormField, b: &HermitianFormField) -> Result<EigenvalueField> {
    if a.torus() != b.torus() {
        return Err(Error::Grid("eigenvalue pencil on different grids".into()));
    }
    let per_point: Vec<Option<Vec<f64>>> =
        (0..a.len()).into_par_iter().map(|i| linalg::generalized_eigenvalues(&a.at(i), &b.at(i))).collect();
    if per_point.iter().any(Option::is_none) {
        let (_, worst) = b.min_eigenvalue();
        return Err(Error::FieldNotPositiveDefinite { point: worst });
    }
    let n = a.n();
    let values = per_point.into_iter().flatten().flatten().collect();
    Ok(EigenvalueField { torus: a.torus().clone(), n, values })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CertificateMetadata {
    pub k: Option<u32>,
    pub dk: Option<f64>,
    pub residual: Option<f64>,
    pub resolution: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityCertificate {
    pub q: usize,
    pub n: usize,
    /// Strictness threshold the minimum had to exceed.
    pub threshold: f64,
    /// The `(n−q)`-th largest eigenvalue at every grid point.
    #[serde(skip)]
    pub margin_field: Vec<f64>,
    pub min_margin: f64,
    pub worst_point: usize,
    pub pass: bool,
    pub metadata: CertificateMetadata,
}

/// Certificate from precomputed sorted eigenvalues.
pub fn certificate_from_eigenvalues(eig: &EigenvalueField, q: usize, margin: f64) -> Result<PositivityCertificate> {
    let n = eig.n();
    if q >= n {
        return Err(Error::Argument(format!("q = {q} must lie in 0..={}", n - 1)));
    }
    let margin_field = eig.component(n - q - 1);
    let (min_margin, worst_point) =
        margin_field.iter().enumerate().fold((f64::INFINITY, 0), |acc, (i, &v)| if v < acc.0 { (v, i) } else { acc });
    Ok(PositivityCertificate {
        q,
        n,
        threshold: margin,
        margin_field,
        min_margin,
        worst_point,
        pass: min_margin > margin,
        metadata: CertificateMetadata { resolution: eig.torus().describe(), ..Default::default() },
    })
}

/// Passes iff the `(n−q)`-th largest eigenvalue of `curvature` relative to
/// `reference` exceeds `margin` at every grid point.
pub fn certify_q_positive(
    curvature: &HermitianFormField,
    reference: &HermitianFormField,
    q: usize,
    margin: f64,
) -> Result<PositivityCertificate> {
    let n = curvature.n();
    if q >= n {
        return Err(Error::Argument(format!("q = {q} must lie in 0..={}", n - 1)));
    }
    let eig = eigenvalues_relative(curvature, reference)?;
    certificate_from_eigenvalues(&eig, q, margin)
}

/// Smallest `q` whose certificate passes, or the failing `q = n−1` one.
pub fn best_certificate(eig: &EigenvalueField, margin: f64) -> Result<PositivityCertificate> {
    let n = eig.n();
    for q in 0..n {
        let cert = certificate_from_eigenvalues(eig, q, margin)?;
        if cert.pass {
            return Ok(cert);
        }
    }
    certificate_from_eigenvalues(eig, n - 1, margin)
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub margin: f64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, margin: DEFAULT_MARGIN }
    }
}

#[derive(Debug, Clone)]
pub struct OnePositiveOutcome {
    /// Certificate for the final curvature `L + ∂∂̄(ψ₀+φ)` relative to `kω`,
    /// at the smallest passing `q`.
    pub certificate: PositivityCertificate,
    pub k: u32,
    pub dk: f64,
    /// Eigenvalues of `ω̃ + ∂∂̄φ` relative to `kω`.
    pub eigenvalues: EigenvalueField,
    /// Eigenvalues of the final curvature relative to `kω` (`λ_i − 1`).
    pub final_eigenvalues: EigenvalueField,
    /// `max_x |Π λ_i(x) − D_k|`.
    pub product_error: f64,
    pub solve: DkSolve,
}

/// Pairing check, shift choice, Monge–Ampère solve and eigenvalue
/// accounting for a class with `(L·ωⁿ⁻¹) > 0`.
pub fn one_positive_pipeline(
    l: &ConstantHermitianClass,
    omega: &KahlerClass,
    psi0: &PotentialField,
    k_max: u32,
    settings: PipelineSettings,
) -> Result<OnePositiveOutcome> {
    let degree = degree_against(l, omega)?;
    if !(degree > 0.0) {
        return Err(Error::Hypothesis(format!("(L·ω^(n-1)) = {degree} is not positive")));
    }
    let k = choose_k(l, omega, k_max)?;
    let solve = ma_for_dk(l, omega, k, psi0, settings.tol, settings.max_iter)?;
    let torus = psi0.torus();
    let solved = solve.solved_form()?;
    let reference = HermitianFormField::constant(torus, &solve.reference)?;
    let eigenvalues = eigenvalues_relative(&solved, &reference)?;

    let dk = solve.dk;
    let product_error = eigenvalues.products().iter().map(|p| (p - dk).abs()).fold(0.0, f64::max);
    if product_error > 10.0 * settings.tol * dk.max(1.0) {
        return Err(Error::Consistency(format!("Π λ_i deviates from D_k = {dk} by {product_error:.3e}")));
    }
    let (lowest, at) = eigenvalues
        .component(torus.n() - 1)
        .into_iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |acc, (i, v)| if v < acc.0 { (v, i) } else { acc });
    if !(lowest > 0.0) {
        return Err(Error::Consistency(format!("λ_n = {lowest} is not positive at grid point {at}")));
    }

    // kω has all eigenvalues 1 relative to itself, so subtracting it shifts
    // every eigenvalue down by one.
    let final_eigenvalues = eigenvalues.shifted(-1.0);
    let mut certificate = best_certificate(&final_eigenvalues, settings.margin)?;
    certificate.metadata.k = Some(k);
    certificate.metadata.dk = Some(dk);
    certificate.metadata.residual = Some(solve.result.residual);
    Ok(OnePositiveOutcome { certificate, k, dk, eigenvalues, final_eigenvalues, product_error, solve })
}

/// Semidefinite nonzero class: witnesses `(L·ωⁿ⁻¹) > 0` and runs the
/// one-positivity pipeline with `ψ₀ = 0`.
pub fn pseff_pipeline(
    l: &ConstantHermitianClass,
    omega: &KahlerClass,
    torus: &TorusModel,
    k_max: u32,
    settings: PipelineSettings,
) -> Result<OnePositiveOutcome> {
    let scale = l.frobenius_norm();
    if scale == 0.0 {
        return Err(Error::Trivial);
    }
    let lowest = l.eigenvalues().last().copied().unwrap_or(0.0);
    if lowest < -1e-12 * scale {
        return Err(Error::Model(format!("class is not positive semidefinite (eigenvalue {lowest})")));
    }
    // For 0 ≤ L ≤ C·ω the pairing reduces to a trace against a positive
    // form, which is positive as soon as L ≠ 0.
    let degree = degree_against(l, omega)?;
    if !(degree > 0.0) {
        return Err(Error::Consistency(format!("nonzero semidefinite class pairs to {degree}")));
    }
    one_positive_pipeline(l, omega, &PotentialField::zeros(torus), k_max, settings)
}
