//! Complex Monge–Ampère solver on the flat torus.
//!
//! Solves `det(ω̃ + ∂∂̄φ) = F·e^c` for a mean-zero `φ`, where
//! `ω̃ = H₀ + ∂∂̄ψ₀` and `F` is a positive density in determinant units (the
//! `(n,n)`-form `ω̃ⁿ` has density `n!·2ⁿ·det ω̃` against `dx∧dy`; the common
//! factor is dropped on both sides).
//!
//! Damped inexact Newton on `log det g − log F`. The Newton correction `δ`
//! solves `tr(g⁻¹ ∂∂̄δ) = −(r − c)`; multiplied through by `det g` the operator
//! becomes `Σ_{jk} ∂_j(adj(g)_{kj} ∂̄_k δ)`, symmetric and negative
//! semidefinite on the grid, which is what lets conjugate gradients run with a
//! constant-coefficient spectral preconditioner.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::calculus::{hessian_from_spectrum, hessian_with, HermitianFormField, PotentialField};
use crate::error::{Error, Result};
use crate::geometry::{dk_constant, ConstantHermitianClass, KahlerClass, TorusModel};
use crate::linalg::{self, CMatrix};
use crate::spectral::Spectral;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Inner CG tolerance relative to the current outer residual.
pub const CG_FORCING: f64 = 1e-2;
const CG_MAX_ITER: usize = 1000;
const MIN_STEP: f64 = 1.0 / (1u64 << 30) as f64;

#[derive(Debug, Clone)]
pub struct MAProblem {
    /// Constant part `H₀` of the background form; must be positive definite.
    pub background: ConstantHermitianClass,
    /// Optional `ψ₀` with `ω̃ = H₀ + ∂∂̄ψ₀`.
    pub background_potential: Option<PotentialField>,
    /// Density `F > 0` compared against `det(ω̃ + ∂∂̄φ)`.
    pub target_density: PotentialField,
    pub tol: f64,
    pub max_iter: usize,
    pub initial_guess: Option<PotentialField>,
}

impl MAProblem {
    pub fn new(background: ConstantHermitianClass, target_density: PotentialField) -> Self {
        Self {
            background,
            background_potential: None,
            target_density,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            initial_guess: None,
        }
    }

    pub fn with_background_potential(mut self, psi0: PotentialField) -> Self {
        self.background_potential = Some(psi0);
        self
    }

    pub fn with_initial_guess(mut self, phi: PotentialField) -> Self {
        self.initial_guess = Some(phi);
        self
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Self {
        self.tol = tol;
        self.max_iter = max_iter;
        self
    }

    pub fn torus(&self) -> &TorusModel {
        self.target_density.torus()
    }

    /// `ω̃ = H₀ + ∂∂̄ψ₀` sampled on the grid.
    pub fn background_form(&self) -> Result<HermitianFormField> {
        let torus = self.torus();
        if self.background.dim() != torus.n() {
            return Err(Error::Dimension(format!(
                "background is {}x{} on an n = {} torus",
                self.background.dim(),
                self.background.dim(),
                torus.n()
            )));
        }
        let mut form = match &self.background_potential {
            Some(psi0) => {
                self.target_density.same_grid(psi0)?;
                crate::calculus::complex_hessian(psi0)?
            }
            None => HermitianFormField::zeros(torus),
        };
        form.add_constant(&self.background)?;
        Ok(form)
    }

    fn validate(&self) -> Result<HermitianFormField> {
        if !(self.tol > 0.0) {
            return Err(Error::Argument(format!("tolerance {} must be positive", self.tol)));
        }
        if let Some(point) = self.target_density.values().iter().position(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::Precondition(format!("target density is not positive at grid point {point}")));
        }
        let form = self.background_form()?;
        if let Some(point) = form.first_non_positive() {
            return Err(Error::Precondition(format!("background form is not positive definite at grid point {point}")));
        }
        Ok(form)
    }
}

/// Rescales `F` by `∫det ω̃ / ∫F` (grid quadrature) so the solvability
/// constraint holds; returns the rescaled problem and the factor.
pub fn compatibility_check(mut problem: MAProblem) -> Result<(MAProblem, f64)> {
    let form = problem.validate()?;
    let volume: f64 = form.determinants().iter().sum();
    let mass: f64 = problem.target_density.values().iter().sum();
    let factor = volume / mass;
    if factor != 1.0 {
        problem.target_density = problem.target_density.scale(factor);
    }
    Ok((problem, factor))
}

#[derive(Debug, Clone)]
pub struct MASolveResult {
    /// Mean-zero solution.
    pub phi: PotentialField,
    /// `sup |det(ω̃+∂∂̄φ) / (F e^c) − 1|` with `e^c = Σ det / Σ F`.
    pub residual: f64,
    pub iterations: usize,
    /// Smallest eigenvalue of `ω̃ + ∂∂̄φ` over the grid.
    pub positivity_margin: f64,
    /// Residual before each accepted step and after the last one.
    pub residual_history: Vec<f64>,
    /// The gauge constant `c`.
    pub gauge_constant: f64,
    pub cg_iterations: usize,
    /// Step lengths accepted by the damping.
    pub step_lengths: Vec<f64>,
}

struct State {
    hess: HermitianFormField,
    det: Vec<f64>,
    residual: f64,
    gauge: f64,
}

fn evaluate(omega_t: &HermitianFormField, hess: HermitianFormField, density: &[f64]) -> Option<State> {
    let g = omega_t.add(&hess).ok()?;
    let det: Option<Vec<f64>> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let m = g.at(i);
            linalg::is_positive_definite(&m).then(|| linalg::det(&m).re)
        })
        .collect();
    let det = det?;
    let sum_det: f64 = det.iter().sum();
    let sum_f: f64 = density.iter().sum();
    let ratio = sum_det / sum_f;
    let residual = det.iter().zip(density).map(|(d, f)| (d / (f * ratio) - 1.0).abs()).fold(0.0, f64::max);
    Some(State { hess, det, residual, gauge: ratio.ln() })
}

/// Divergence-form linearization `u ↦ −Re Σ ∂_j(B_{kj} ∂̄_k u)` with
/// `B = adj(ω̃ + ∂∂̄φ)`.
struct Linearized<'a> {
    spec: &'a Spectral,
    n: usize,
    /// `b[k * n + j][point] = B_{kj}`
    b: Vec<Vec<Complex64>>,
    precond_symbol: Vec<f64>,
}

impl<'a> Linearized<'a> {
    fn new(spec: &'a Spectral, g: &HermitianFormField) -> Self {
        let n = g.n();
        let len = g.len();
        let adj: Vec<CMatrix> = (0..len).into_par_iter().map(|i| linalg::adjugate(&g.at(i))).collect();
        let mut b = vec![vec![Complex64::new(0.0, 0.0); len]; n * n];
        let mut mean = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, a) in adj.iter().enumerate() {
            for k in 0..n {
                for j in 0..n {
                    b[k * n + j][i] = a[(k, j)];
                    mean[k * n + j] += a[(k, j)];
                }
            }
        }
        for m in &mut mean {
            *m /= len as f64;
        }
        let precond_symbol = (0..len)
            .map(|idx| {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    for k in 0..n {
                        s -= mean[k * n + j] * spec.d_symbol(j, idx) * spec.dbar_symbol(k, idx);
                    }
                }
                s.re
            })
            .collect();
        Self { spec, n, b, precond_symbol }
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let len = u.len();
        let hat = self.spec.forward_real(u);
        let mut grads = Vec::with_capacity(n);
        for k in 0..n {
            let mut w: Vec<Complex64> =
                hat.iter().enumerate().map(|(idx, c)| c * self.spec.dbar_symbol(k, idx)).collect();
            self.spec.inverse(&mut w);
            grads.push(w);
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        for j in 0..n {
            let mut s: Vec<Complex64> =
                (0..len).map(|i| (0..n).map(|k| self.b[k * n + j][i] * grads[k][i]).sum()).collect();
            self.spec.forward(&mut s);
            for (idx, (a, v)) in acc.iter_mut().zip(s).enumerate() {
                *a += v * self.spec.d_symbol(j, idx);
            }
        }
        self.spec.inverse(&mut acc);
        acc.iter().map(|z| -z.re).collect()
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let mut hat = self.spec.forward_real(r);
        for (h, &p) in hat.iter_mut().zip(&self.precond_symbol) {
            *h = if p > 0.0 { *h / p } else { Complex64::new(0.0, 0.0) };
        }
        self.spec.inverse(&mut hat);
        hat.iter().map(|z| z.re).collect()
    }

    /// Removes the modes that every derivative annihilates.
    fn project(&self, r: &[f64]) -> Vec<f64> {
        let mut hat = self.spec.forward_real(r);
        for (idx, h) in hat.iter_mut().enumerate() {
            if self.spec.is_null_mode(idx) {
                *h = Complex64::new(0.0, 0.0);
            }
        }
        self.spec.inverse(&mut hat);
        hat.iter().map(|z| z.re).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients; returns the iterate and iteration count.
fn pcg(op: &Linearized, rhs: &[f64], rel_tol: f64) -> (Vec<f64>, usize) {
    let b = op.project(rhs);
    let b_norm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; b.len()];
    if b_norm == 0.0 {
        return (x, 0);
    }
    let mut r = b;
    let mut z = op.precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=CG_MAX_ITER {
        let ap = op.apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return (x, it);
        }
        let alpha = rz / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * b_norm {
            return (x, it);
        }
        z = op.precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, CG_MAX_ITER)
}

pub fn solve_ma(problem: &MAProblem) -> Result<MASolveResult> {
    let omega_t = problem.validate()?;
    let torus = problem.torus().clone();
    let spec = Spectral::new(&torus);
    let density = problem.target_density.values();
    let log_f: Vec<f64> = density.iter().map(|f| f.ln()).collect();

    let mut phi = match &problem.initial_guess {
        Some(g) => {
            problem.target_density.same_grid(g)?;
            if let Some(point) = g.first_non_finite() {
                return Err(Error::NonFinite { point });
            }
            g.clone().normalized().into_values()
        }
        None => vec![0.0; torus.len()],
    };
    let mut state = evaluate(&omega_t, hessian_with(&spec, &phi), density)
        .ok_or_else(|| Error::Precondition("initial guess breaks positivity of ω̃ + ∂∂̄φ".into()))?;

    let mut history = vec![state.residual];
    let mut steps = Vec::new();
    let mut cg_total = 0;
    let mut iterations = 0;
    while state.residual > problem.tol {
        if iterations >= problem.max_iter {
            return Err(Error::NonConvergence { iterations, residual: state.residual });
        }
        let g = omega_t.add(&state.hess)?;
        let op = Linearized::new(&spec, &g);
        let r: Vec<f64> = state.det.iter().zip(&log_f).map(|(d, lf)| d.ln() - lf).collect();
        let weight: f64 = state.det.iter().sum();
        let c_w = state.det.iter().zip(&r).map(|(d, ri)| d * ri).sum::<f64>() / weight;
        let rhs: Vec<f64> = state.det.iter().zip(&r).map(|(d, ri)| d * (ri - c_w)).collect();
        let forcing = (CG_FORCING * state.residual).clamp(1e-14, 0.5);
        let (delta, cg_its) = pcg(&op, &rhs, forcing);
        cg_total += cg_its;
        let delta_hess = hessian_from_spectrum(&spec, &spec.forward_real(&delta));

        let mut t = 1.0;
        let accepted = loop {
            if t < MIN_STEP {
                break None;
            }
            if let Some(cand) = evaluate(&omega_t, state.hess.axpy(t, &delta_hess)?, density) {
                if cand.residual <= state.residual {
                    break Some(cand);
                }
            }
            t *= 0.5;
        };
        state = accepted.ok_or(Error::StepFailure { residual: state.residual })?;
        for (p, d) in phi.iter_mut().zip(&delta) {
            *p += t * d;
        }
        steps.push(t);
        iterations += 1;
        history.push(state.residual);
    }

    let phi = PotentialField::new(&torus, phi)?.normalized();
    let g = omega_t.add(&state.hess)?;
    let (positivity_margin, _) = g.min_eigenvalue();
    Ok(MASolveResult {
        phi,
        residual: state.residual,
        iterations,
        positivity_margin,
        residual_history: history,
        gauge_constant: state.gauge,
        cg_iterations: cg_total,
        step_lengths: steps,
    })
}

/// Solution of `(L + kω + ∂∂̄ψ₀ + ∂∂̄φ)ⁿ = D_k (kω)ⁿ`.
#[derive(Debug, Clone)]
pub struct DkSolve {
    pub result: MASolveResult,
    pub k: u32,
    pub dk: f64,
    /// `ω̃ = L + kω + ∂∂̄ψ₀`.
    pub omega_tilde: HermitianFormField,
    /// The constant reference form `kω`.
    pub reference: ConstantHermitianClass,
    /// Rescaling applied by the compatibility check (1 up to rounding).
    pub compatibility_factor: f64,
    psi0: PotentialField,
}

impl DkSolve {
    /// `ψ₀ + φ`, the full potential correction of the final metric.
    pub fn total_potential(&self) -> Result<PotentialField> {
        self.psi0.add(&self.result.phi)
    }

    /// `ω̃ + ∂∂̄φ`.
    pub fn solved_form(&self) -> Result<HermitianFormField> {
        let spec = Spectral::new(self.psi0.torus());
        self.omega_tilde.add(&hessian_with(&spec, self.result.phi.values()))
    }
}

pub fn ma_for_dk(
    l: &ConstantHermitianClass,
    omega: &KahlerClass,
    k: u32,
    psi0: &PotentialField,
    tol: f64,
    max_iter: usize,
) -> Result<DkSolve> {
    let torus = psi0.torus();
    if l.dim() != torus.n() || omega.dim() != torus.n() {
        return Err(Error::Dimension("class size does not match the torus dimension".into()));
    }
    let reference = omega.class().scale(k as f64);
    let background = l.add(&reference);
    let dk = dk_constant(l, omega, k as f64)?;
    let density_value = dk * linalg::det(reference.matrix()).re;
    let problem = MAProblem::new(background, PotentialField::constant(torus, density_value))
        .with_background_potential(psi0.clone())
        .with_tolerance(tol, max_iter);
    let omega_tilde = problem.background_form()?;
    if let Some(point) = omega_tilde.first_non_positive() {
        return Err(Error::Precondition(format!("L + kω + ∂∂̄ψ₀ is not positive definite at grid point {point}")));
    }
    let (problem, compatibility_factor) = compatibility_check(problem)?;
    let result = solve_ma(&problem)?;
    Ok(DkSolve { result, k, dk, omega_tilde, reference, compatibility_factor, psi0: psi0.clone() })
}
