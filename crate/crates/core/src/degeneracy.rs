//! Polynomial map models: Jacobians, pulled-back flat forms, σ_j by squared
//! minors, degeneracy-locus scans, fibre dimensions, and the local
//! potentials used to repair positivity along degeneracy strata.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::calculus::{complex_hessian, HermitianFormField, PotentialField};
use crate::error::{Error, Result};
use crate::geometry::TorusModel;
use crate::linalg::{self, CMatrix};

/// Base cutoff for "σ_j = 0"; scaled by `(1+σ₁)^j`.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-10;
/// Relative singular-value cutoff for numerical rank.
pub const RANK_TOL: f64 = 1e-8;
/// Smallest ε tried when combining stratum potentials.
pub const EPS_FLOOR: f64 = 1.0 / (1u64 << 40) as f64;
/// Allowed deviation of `Σ bumps` from 1.
pub const PARTITION_TOL: f64 = 1e-10;

const MAX_SCAN_SAMPLES: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: Complex64,
}

/// `m` complex polynomials in `z₁…zₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap {
    n: usize,
    components: Vec<Vec<Monomial>>,
}

impl PolyMap {
    pub fn new(n: usize, components: Vec<Vec<Monomial>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("source dimension must be at least 1".into()));
        }
        if components.is_empty() {
            return Err(Error::Argument("a map needs at least one component".into()));
        }
        for (a, terms) in components.iter().enumerate() {
            for t in terms {
                if t.exponents.len() != n {
                    return Err(Error::Argument(format!(
                        "component {a}: exponent tuple of length {} for n = {n}",
                        t.exponents.len()
                    )));
                }
            }
        }
        Ok(Self { n, components })
    }

    pub fn identity(n: usize) -> Self {
        let components = (0..n)
            .map(|a| {
                let mut e = vec![0; n];
                e[a] = 1;
                vec![Monomial { exponents: e, coeff: Complex64::new(1.0, 0.0) }]
            })
            .collect();
        Self { n, components }
    }

    pub fn constant(n: usize, values: &[Complex64]) -> Self {
        let components = values.iter().map(|&c| vec![Monomial { exponents: vec![0; n], coeff: c }]).collect();
        Self { n, components }
    }

    /// Parses the text format
    ///
    /// ```text
    /// map <n> <m>
    /// <component> <e1> … <en> <re> [<im>]
    /// ```
    ///
    /// with `#` comments and blank lines ignored. Repeated monomials add up.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut components: Vec<Vec<Monomial>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Input(format!("line {}: {msg}", lineno + 1));
            let words: Vec<&str> = line.split_whitespace().collect();
            let Some((n, m)) = header else {
                if words.len() != 3 || words[0] != "map" {
                    return Err(bad("expected header `map <n> <m>`"));
                }
                let n: usize = words[1].parse().map_err(|_| bad("bad source dimension"))?;
                let m: usize = words[2].parse().map_err(|_| bad("bad target dimension"))?;
                if n == 0 || m == 0 {
                    return Err(bad("dimensions must be positive"));
                }
                header = Some((n, m));
                components = vec![Vec::new(); m];
                continue;
            };
            if words.len() != n + 2 && words.len() != n + 3 {
                return Err(bad(&format!("expected {} or {} fields, found {}", n + 2, n + 3, words.len())));
            }
            let a: usize = words[0].parse().map_err(|_| bad("bad component index"))?;
            if a >= m {
                return Err(bad(&format!("component {a} out of range 0..{m}")));
            }
            let exponents = words[1..=n]
                .iter()
                .map(|w| w.parse::<u32>().map_err(|_| bad("bad exponent")))
                .collect::<Result<Vec<_>>>()?;
            let re: f64 = words[n + 1].parse().map_err(|_| bad("bad coefficient"))?;
            let im: f64 = match words.get(n + 2) {
                Some(w) => w.parse().map_err(|_| bad("bad coefficient"))?,
                None => 0.0,
            };
            if !re.is_finite() || !im.is_finite() {
                return Err(bad("non-finite coefficient"));
            }
            components[a].push(Monomial { exponents, coeff: Complex64::new(re, im) });
        }
        let Some((n, _)) = header else {
            return Err(Error::Input("empty map description".into()));
        };
        Self::new(n, components)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("map {} {}\n", self.n, self.m());
        for (a, terms) in self.components.iter().enumerate() {
            for t in terms {
                let e: Vec<String> = t.exponents.iter().map(u32::to_string).collect();
                let _ = writeln!(out, "{a} {} {} {}", e.join(" "), t.coeff.re, t.coeff.im);
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<Monomial>] {
        &self.components
    }

    pub fn eval(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.components.iter().map(|terms| terms.iter().map(|t| t.coeff * monomial(z, &t.exponents)).sum()).collect()
    }
}

fn monomial(z: &[Complex64], e: &[u32]) -> Complex64 {
    z.iter().zip(e).fold(Complex64::new(1.0, 0.0), |acc, (zi, &k)| acc * zi.powu(k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSample {
    pub point: Vec<Complex64>,
    /// `m × n`, entry `(α, b) = ∂f_α/∂z_b`.
    pub matrix: CMatrix,
}

/// Exact differentiation followed by evaluation at `z`.
pub fn jacobian(f: &PolyMap, z: &[Complex64]) -> JacobianSample {
    let mut matrix = CMatrix::zeros(f.m(), f.n());
    for (a, terms) in f.components.iter().enumerate() {
        for t in terms {
            for b in 0..f.n {
                let eb = t.exponents[b];
                if eb == 0 {
                    continue;
                }
                let mut e = t.exponents.clone();
                e[b] -= 1;
                matrix[(a, b)] += t.coeff * eb as f64 * monomial(z, &e);
            }
        }
    }
    JacobianSample { point: z.to_vec(), matrix }
}

/// `JᴴJ`, the coefficient matrix of the pulled-back flat form.
pub fn pullback_form(f: &PolyMap, z: &[Complex64]) -> CMatrix {
    let j = jacobian(f, z).matrix;
    j.adjoint() * j
}

/// `Σ |det J[I, K]|²` over all `j`-row and `j`-column subsets.
pub fn sigma_j_minors(j_matrix: &CMatrix, j: usize) -> Result<f64> {
    let (m, n) = j_matrix.shape();
    if j == 0 || j > n {
        return Err(Error::Argument(format!("σ_j needs 1 ≤ j ≤ {n}, got {j}")));
    }
    if j > m {
        return Ok(0.0);
    }
    let rows = linalg::subsets(m, j);
    let cols = linalg::subsets(n, j);
    let mut total = 0.0;
    for r in &rows {
        for c in &cols {
            let sub = CMatrix::from_fn(j, j, |i, k| j_matrix[(r[i], c[k])]);
            total += linalg::det(&sub).norm_sqr();
        }
    }
    Ok(total)
}

/// Whether `σ_j` is numerically zero for every `n−q ≤ j ≤ n`.
pub fn is_degenerate(j_matrix: &CMatrix, q: usize, threshold: f64) -> Result<bool> {
    let n = j_matrix.ncols();
    if q >= n {
        return Err(Error::Argument(format!("q = {q} must lie in 0..={}", n - 1)));
    }
    let s1 = sigma_j_minors(j_matrix, 1)?;
    for j in n - q..=n {
        if sigma_j_minors(j_matrix, j)? >= threshold * (1.0 + s1).powi(j as i32) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Cube `Π_b {z : |Re(z_b − c_b)| ≤ r, |Im(z_b − c_b)| ≤ r}` sampled with
/// `points` values per real axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub center: Vec<Complex64>,
    pub radius: f64,
    pub points: usize,
}

impl SampleBox {
    pub fn new(center: Vec<Complex64>, radius: f64, points: usize) -> Self {
        Self { center, radius, points }
    }

    pub fn spacing(&self) -> f64 {
        if self.points < 2 {
            0.0
        } else {
            2.0 * self.radius / (self.points - 1) as f64
        }
    }

    fn validate_shape(&self, n: usize) -> Result<()> {
        if self.center.len() != n {
            return Err(Error::Argument(format!("box center has {} coordinates, map has {n}", self.center.len())));
        }
        if self.points == 0 || !(self.radius >= 0.0) || !self.radius.is_finite() {
            return Err(Error::Argument("empty sampling region".into()));
        }
        Ok(())
    }

    fn validate(&self, n: usize) -> Result<usize> {
        self.validate_shape(n)?;
        let total = (self.points as f64).powi(2 * n as i32);
        if total > MAX_SCAN_SAMPLES as f64 {
            return Err(Error::Argument(format!("{total} samples exceed the limit {MAX_SCAN_SAMPLES}")));
        }
        Ok(total as usize)
    }

    /// Sample `idx` in row-major order over `(Re z₁, Im z₁, Re z₂, …)`.
    pub fn sample(&self, idx: usize) -> Vec<Complex64> {
        let n = self.center.len();
        let h = self.spacing();
        let mut rest = idx;
        let mut coords = vec![0.0; 2 * n];
        for slot in coords.iter_mut().rev() {
            let i = rest % self.points;
            rest /= self.points;
            *slot = -self.radius + h * i as f64;
        }
        (0..n).map(|b| self.center[b] + Complex64::new(coords[2 * b], coords[2 * b + 1])).collect()
    }

    fn uniform(&self, rng: &mut impl Rng) -> Vec<Complex64> {
        self.center
            .iter()
            .map(|c| {
                c + Complex64::new(rng.gen_range(-1.0..=1.0) * self.radius, rng.gen_range(-1.0..=1.0) * self.radius)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyScan {
    pub samples: usize,
    pub spacing: f64,
    pub flagged: Vec<Vec<Complex64>>,
}

/// Box samples where `σ_j < threshold·(1+σ₁)^j` for all `n−q ≤ j ≤ n`.
pub fn degeneracy_locus_scan(f: &PolyMap, q: usize, region: &SampleBox, threshold: f64) -> Result<DegeneracyScan> {
    let samples = region.validate(f.n())?;
    if q >= f.n() {
        return Err(Error::Argument(format!("q = {q} must lie in 0..={}", f.n() - 1)));
    }
    let flags: Vec<Option<Vec<Complex64>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let z = region.sample(i);
            let j = jacobian(f, &z).matrix;
            match is_degenerate(&j, q, threshold) {
                Ok(true) => Some(z),
                _ => None,
            }
        })
        .collect();
    Ok(DegeneracyScan { samples, spacing: region.spacing(), flagged: flags.into_iter().flatten().collect() })
}

/// Periodic stand-in for the coordinate `z_j` on the torus:
/// `s(w) = (sin 2πx + i sin 2πy)/2π`, which agrees with `w` to first order
/// at the half-periods and vanishes exactly there.
pub fn periodic_point(torus: &TorusModel, idx: usize) -> Vec<Complex64> {
    let n = torus.n();
    let c = torus.coords(idx);
    (0..n).map(|j| Complex64::new((2.0 * PI * c[j]).sin(), (2.0 * PI * c[n + j]).sin()) / (2.0 * PI)).collect()
}

/// Pullback form of `f` evaluated at the periodic coordinates.
pub fn periodic_pullback(f: &PolyMap, torus: &TorusModel) -> Result<HermitianFormField> {
    if f.n() != torus.n() {
        return Err(Error::Dimension(format!("map has n = {}, torus has n = {}", f.n(), torus.n())));
    }
    HermitianFormField::from_fn(torus, |i| pullback_form(f, &periodic_point(torus, i)))
}

/// Grid indices whose periodic coordinates fall in the degeneracy locus.
pub fn degeneracy_scan_torus(f: &PolyMap, torus: &TorusModel, q: usize, threshold: f64) -> Result<Vec<usize>> {
    if f.n() != torus.n() {
        return Err(Error::Dimension(format!("map has n = {}, torus has n = {}", f.n(), torus.n())));
    }
    if q >= f.n() {
        return Err(Error::Argument(format!("q = {q} must lie in 0..={}", f.n() - 1)));
    }
    let flags: Vec<bool> = (0..torus.len())
        .into_par_iter()
        .map(|i| is_degenerate(&jacobian(f, &periodic_point(torus, i)).matrix, q, threshold).unwrap_or(false))
        .collect();
    Ok(flags.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FibreEstimate {
    /// `n − max rank` over located fibre points, or −1 if none were found.
    pub dimension: i32,
    pub fibre_points: usize,
    pub max_rank: usize,
    pub note: String,
}

/// Gauss–Newton from seeded random starts towards `f(z) = y`, then the
/// dimension count `n − rank J` at the located points.
pub fn fibre_dimension_estimate(
    f: &PolyMap,
    y: &[Complex64],
    region: &SampleBox,
    samples: usize,
    seed: u64,
) -> Result<FibreEstimate> {
    if samples == 0 {
        return Err(Error::Argument("samples must be at least 1".into()));
    }
    if y.len() != f.m() {
        return Err(Error::Argument(format!("target point has {} coordinates, map has {}", y.len(), f.m())));
    }
    region.validate_shape(f.n())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<Vec<Complex64>> = (0..samples).map(|_| region.uniform(&mut rng)).collect();
    let scale = 1.0 + y.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let located: Vec<Option<usize>> = seeds
        .into_par_iter()
        .map(|z0| newton_to_fibre(f, y, z0, scale).map(|z| numerical_rank(&jacobian(f, &z).matrix)))
        .collect();
    let ranks: Vec<usize> = located.into_iter().flatten().collect();
    if ranks.is_empty() {
        return Ok(FibreEstimate {
            dimension: -1,
            fibre_points: 0,
            max_rank: 0,
            note: format!("no fibre points located from {samples} seeds; fibre reported empty"),
        });
    }
    let max_rank = *ranks.iter().max().unwrap_or(&0);
    let dimension = f.n() as i32 - max_rank as i32;
    Ok(FibreEstimate {
        dimension,
        fibre_points: ranks.len(),
        max_rank,
        note: format!("{} of {samples} seeds converged; rank cutoff {RANK_TOL:e} relative", ranks.len()),
    })
}

fn newton_to_fibre(f: &PolyMap, y: &[Complex64], mut z: Vec<Complex64>, scale: f64) -> Option<Vec<Complex64>> {
    let target = 1e-12 * scale;
    for _ in 0..100 {
        let r: Vec<Complex64> = f.eval(&z).iter().zip(y).map(|(a, b)| a - b).collect();
        let norm = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return None;
        }
        if norm <= target {
            return Some(z);
        }
        let j = jacobian(f, &z).matrix;
        let pinv = j.pseudo_inverse(1e-14).ok()?;
        let step = pinv * DVector::from_vec(r);
        if step.norm() == 0.0 {
            return None;
        }
        for (zi, s) in z.iter_mut().zip(step.iter()) {
            *zi -= s;
        }
    }
    None
}

fn numerical_rank(j: &CMatrix) -> usize {
    let sv = j.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cut = RANK_TOL * smax.max(1.0);
    sv.iter().filter(|&&s| s > cut).count()
}

/// `φ_U = Σ_j ρ_j Σ_i |f_{j,i}|²` from sampled generator fields and bump
/// weights on the grid.
pub fn local_potential_build(
    torus: &TorusModel,
    generators: &[Vec<Vec<Complex64>>],
    bumps: &[Vec<f64>],
) -> Result<PotentialField> {
    if generators.len() != bumps.len() {
        return Err(Error::Input(format!("{} generator charts but {} bumps", generators.len(), bumps.len())));
    }
    if generators.is_empty() {
        return Err(Error::Input("no charts".into()));
    }
    let len = torus.len();
    for (c, (gens, bump)) in generators.iter().zip(bumps).enumerate() {
        if gens.is_empty() {
            return Err(Error::Input(format!("chart {c} has no generators")));
        }
        if bump.len() != len || gens.iter().any(|g| g.len() != len) {
            return Err(Error::Grid(format!("chart {c} is not sampled on the {} grid", torus.describe())));
        }
    }
    for p in 0..len {
        let s: f64 = bumps.iter().map(|b| b[p]).sum();
        if (s - 1.0).abs() > PARTITION_TOL {
            return Err(Error::Input(format!("bumps sum to {s} at grid point {p}")));
        }
    }
    let values = (0..len)
        .map(|p| {
            generators.iter().zip(bumps).map(|(gens, b)| b[p] * gens.iter().map(|g| g[p].norm_sqr()).sum::<f64>()).sum()
        })
        .collect();
    PotentialField::new(torus, values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalPotentialCheck {
    /// Smallest Hessian eigenvalue over the zero-set samples.
    pub min_eigenvalue: f64,
    pub worst_point: usize,
    /// Fewest eigenvalues above `tol` among zero-set samples outside the
    /// excluded set.
    pub min_positive_count: usize,
    pub semidefinite: bool,
    pub count_ok: bool,
}

/// Checks `∂∂̄φ ⪰ −tol` on `zero_set` and at least `declared_positive`
/// eigenvalues above `tol` at the zero-set points not in `excluded`.
pub fn check_local_potential(
    phi: &PotentialField,
    zero_set: &[usize],
    excluded: &[usize],
    declared_positive: usize,
    tol: f64,
) -> Result<LocalPotentialCheck> {
    let hess = complex_hessian(phi)?;
    let mut min_eigenvalue = f64::INFINITY;
    let mut worst_point = zero_set.first().copied().unwrap_or(0);
    let mut min_positive_count = usize::MAX;
    for &p in zero_set {
        if p >= hess.len() {
            return Err(Error::Grid(format!("zero-set index {p} outside the grid")));
        }
        let ev = linalg::hermitian_eigenvalues(&hess.at(p));
        let low = *ev.last().unwrap_or(&0.0);
        if low < min_eigenvalue {
            min_eigenvalue = low;
            worst_point = p;
        }
        if !excluded.contains(&p) {
            min_positive_count = min_positive_count.min(ev.iter().filter(|&&v| v > tol).count());
        }
    }
    if min_positive_count == usize::MAX {
        min_positive_count = declared_positive;
    }
    Ok(LocalPotentialCheck {
        min_eigenvalue,
        worst_point,
        min_positive_count,
        semidefinite: min_eigenvalue >= -tol,
        count_ok: min_positive_count >= declared_positive,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedPotential {
    pub potential: PotentialField,
    /// Accepted ε per level `1..phis.len()`.
    pub epsilons: Vec<f64>,
    /// Smallest certified margin `λ_{n−q}` over all strata samples.
    pub min_margin: f64,
}

/// `φ̃₀ = φ₀`, `φ̃_ℓ = φ_ℓ + ε_ℓ φ̃_{ℓ−1}`, halving each `ε_ℓ` from 1 until
/// `base + ∂∂̄φ̃_ℓ` has its `(n−q)`-th eigenvalue above `margin` on the
/// union of `strata[0..=ℓ]`.
pub fn combine_normal_potentials(
    phis: &[PotentialField],
    base: &HermitianFormField,
    q: usize,
    strata: &[Vec<usize>],
    margin: f64,
) -> Result<CombinedPotential> {
    let Some(first) = phis.first() else {
        return Err(Error::Argument("no potentials to combine".into()));
    };
    if strata.len() != phis.len() {
        return Err(Error::Argument(format!("{} potentials but {} strata", phis.len(), strata.len())));
    }
    let n = base.n();
    if q >= n {
        return Err(Error::Argument(format!("q = {q} must lie in 0..={}", n - 1)));
    }
    let certify = |phi: &PotentialField, level: usize| -> Result<(f64, usize)> {
        let form = base.add(&complex_hessian(phi)?)?;
        let mut worst = (f64::INFINITY, 0);
        for &p in strata[..=level].iter().flatten() {
            if p >= form.len() {
                return Err(Error::Grid(format!("stratum index {p} outside the grid")));
            }
            let v = linalg::hermitian_eigenvalues(&form.at(p))[n - q - 1];
            if v < worst.0 {
                worst = (v, p);
            }
        }
        Ok(worst)
    };
    let mut combined = first.clone();
    let mut min_margin = certify(&combined, 0)?.0;
    let mut epsilons = Vec::new();
    for (level, phi) in phis.iter().enumerate().skip(1) {
        let mut eps = 1.0;
        loop {
            let candidate = phi.add(&combined.scale(eps))?;
            let (m, worst) = certify(&candidate, level)?;
            if m > margin {
                combined = candidate;
                epsilons.push(eps);
                min_margin = m;
                break;
            }
            eps *= 0.5;
            if eps < EPS_FLOOR {
                return Err(Error::CombinationFailure { level, worst_point: worst, margin: m });
            }
        }
    }
    Ok(CombinedPotential { potential: combined, epsilons, min_margin })
}
