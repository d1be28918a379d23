//! Picard-lattice model of a projective surface: exact cone membership,
//! cohomological 1-ampleness and the positive-pairing witness.
//!
//! All arithmetic is over `BigRational`, so decisions are exact and
//! independent of any grid.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::calculus::PotentialField;
use crate::error::{Error, Result};
use crate::geometry::{intersection_number, ConstantHermitianClass, KahlerClass, TorusModel};
use crate::positivity::{one_positive_pipeline, OnePositiveOutcome, PipelineSettings};

pub const MAX_RANK: usize = 4;

/// Agreement required between lattice pairings and analytic intersection
/// numbers.
pub const CONSISTENCY_TOL: f64 = 1e-9;

pub type Rational = BigRational;

fn rat(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DivisorClass {
    coeffs: Vec<Rational>,
}

impl DivisorClass {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        Self { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self { coeffs: coeffs.iter().map(|&c| rat(c)).collect() }
    }

    /// Parses entries such as `"3"`, `"-1/2"`.
    pub fn parse(entries: &[String]) -> Result<Self> {
        entries
            .iter()
            .map(|s| Rational::from_str(s.trim()).map_err(|_| Error::Input(format!("`{s}` is not a rational number"))))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn zero(rank: usize) -> Self {
        Self { coeffs: vec![Rational::zero(); rank] }
    }

    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn neg(&self) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: &Rational) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(ToString::to_string).collect()
    }
}

impl fmt::Display for DivisorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_strings().join(", "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceLattice {
    q: Vec<Vec<Rational>>,
    nef: Vec<DivisorClass>,
    effective: Vec<DivisorClass>,
    /// Inward normals of the facets of each cone.
    nef_facets: Vec<Vec<Rational>>,
    effective_facets: Vec<Vec<Rational>>,
}

impl SurfaceLattice {
    /// Validates symmetry, Hodge-index signature `(1, ρ−1)`, nonnegative
    /// nef·effective pairings and `ρ ≤ 4`.
    pub fn new(q: Vec<Vec<Rational>>, nef: Vec<DivisorClass>, effective: Vec<DivisorClass>) -> Result<Self> {
        let rho = q.len();
        if rho == 0 || rho > MAX_RANK {
            return Err(Error::Model(format!("rank {rho} outside 1..={MAX_RANK}")));
        }
        if q.iter().any(|row| row.len() != rho) {
            return Err(Error::Model("intersection matrix is not square".into()));
        }
        for i in 0..rho {
            for j in 0..i {
                if q[i][j] != q[j][i] {
                    return Err(Error::Model(format!("intersection matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        let (pos, neg) = signature(&q)?;
        if pos != 1 || neg != rho - 1 {
            return Err(Error::Model(format!("signature ({pos}, {neg}) is not (1, {})", rho - 1)));
        }
        for (name, gens) in [("nef", &nef), ("effective", &effective)] {
            if gens.is_empty() {
                return Err(Error::Model(format!("no {name} generators")));
            }
            for g in gens.iter() {
                if g.rank() != rho {
                    return Err(Error::Model(format!("{name} generator {g} has length {} ≠ {rho}", g.rank())));
                }
                if g.is_zero() {
                    return Err(Error::Model(format!("zero {name} generator")));
                }
            }
        }
        let mut lat = Self { q, nef, effective, nef_facets: Vec::new(), effective_facets: Vec::new() };
        for n in &lat.nef {
            for e in &lat.effective {
                if lat.pairing(n, e).is_negative() {
                    return Err(Error::Model(format!("nef generator {n} pairs negatively with effective {e}")));
                }
            }
        }
        if rank_of(&lat.nef.iter().map(|g| g.coeffs.clone()).collect::<Vec<_>>()) != rho {
            return Err(Error::Model("nef generators do not span the lattice".into()));
        }
        lat.nef_facets = facet_normals(&lat.nef, rho);
        lat.effective_facets = facet_normals(&lat.effective, rho);
        Ok(lat)
    }

    pub fn from_ints(q: &[Vec<i64>], nef: &[Vec<i64>], effective: &[Vec<i64>]) -> Result<Self> {
        Self::new(
            q.iter().map(|row| row.iter().map(|&v| rat(v)).collect()).collect(),
            nef.iter().map(|g| DivisorClass::from_ints(g)).collect(),
            effective.iter().map(|g| DivisorClass::from_ints(g)).collect(),
        )
    }

    /// `ℙ¹×ℙ¹`: two rulings, `Q = [[0,1],[1,0]]`, nef = effective = ⟨e₁, e₂⟩.
    pub fn p1_x_p1() -> Self {
        Self::from_ints(&[vec![0, 1], vec![1, 0]], &[vec![1, 0], vec![0, 1]], &[vec![1, 0], vec![0, 1]])
            .expect("valid built-in lattice")
    }

    /// Hirzebruch `F₁` in the basis (pullback of a line `h`, exceptional
    /// curve `e`): `Q = diag(1, −1)`, effective = ⟨e, h−e⟩, nef = ⟨h, h−e⟩.
    pub fn hirzebruch_f1() -> Self {
        Self::from_ints(&[vec![1, 0], vec![0, -1]], &[vec![1, 0], vec![1, -1]], &[vec![0, 1], vec![1, -1]])
            .expect("valid built-in lattice")
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    pub fn matrix(&self) -> &[Vec<Rational>] {
        &self.q
    }

    pub fn nef_generators(&self) -> &[DivisorClass] {
        &self.nef
    }

    pub fn effective_generators(&self) -> &[DivisorClass] {
        &self.effective
    }

    pub fn pairing(&self, a: &DivisorClass, b: &DivisorClass) -> Rational {
        let mut s = Rational::zero();
        for (i, ai) in a.coeffs.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            for (j, bj) in b.coeffs.iter().enumerate() {
                s += ai * &self.q[i][j] * bj;
            }
        }
        s
    }

    fn check(&self, d: &DivisorClass) -> Result<()> {
        if d.rank() != self.rank() {
            return Err(Error::Model(format!(
                "class {d} has length {} but the lattice has rank {}",
                d.rank(),
                self.rank()
            )));
        }
        Ok(())
    }

    /// Strictly inside the nef cone.
    pub fn is_nef_interior(&self, h: &DivisorClass) -> bool {
        interior(&self.nef, &self.nef_facets, h)
    }

    /// Strictly inside the effective cone. Only meaningful when the
    /// effective generators span the lattice; otherwise always false.
    pub fn is_effective_interior(&self, d: &DivisorClass) -> bool {
        let spans = rank_of(&self.effective.iter().map(|g| g.coeffs.clone()).collect::<Vec<_>>()) == self.rank();
        spans && interior(&self.effective, &self.effective_facets, d)
    }
}

fn interior(gens: &[DivisorClass], facets: &[Vec<Rational>], h: &DivisorClass) -> bool {
    if h.rank() == 1 {
        return (&h.coeffs[0] * &gens[0].coeffs[0]).is_positive();
    }
    facets.iter().all(|f| dot(f, &h.coeffs).is_positive())
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).fold(Rational::zero(), |s, t| s + t)
}

/// Counts of positive and negative pivots in an exact congruence
/// diagonalization. Degenerate forms are rejected.
fn signature(q: &[Vec<Rational>]) -> Result<(usize, usize)> {
    let n = q.len();
    let mut a: Vec<Vec<Rational>> = q.to_vec();
    let (mut pos, mut neg) = (0, 0);
    for i in 0..n {
        if a[i][i].is_zero() {
            if let Some(j) = (i + 1..n).find(|&j| !a[j][j].is_zero()) {
                a.swap(i, j);
                for row in a.iter_mut() {
                    row.swap(i, j);
                }
            } else if let Some(j) = (i + 1..n).find(|&j| !a[i][j].is_zero()) {
                // Both diagonals vanish: row/col i += row/col j gives 2a_ij.
                for c in 0..n {
                    let v = a[j][c].clone();
                    a[i][c] += v;
                }
                for r in 0..n {
                    let v = a[r][j].clone();
                    a[r][i] += v;
                }
            } else {
                return Err(Error::Model("intersection matrix is degenerate".into()));
            }
        }
        let p = a[i][i].clone();
        if p.is_positive() {
            pos += 1;
        } else {
            neg += 1;
        }
        for r in i + 1..n {
            let f = &a[r][i] / &p;
            if f.is_zero() {
                continue;
            }
            for c in 0..n {
                let v = &f * &a[i][c];
                a[r][c] -= v;
            }
            for rr in 0..n {
                let v = &f * &a[rr][i];
                a[rr][r] -= v;
            }
        }
    }
    Ok((pos, neg))
}

/// Row-reduces in place, returning the pivot columns.
fn row_reduce(m: &mut [Vec<Rational>]) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for v in m[r].iter_mut() {
            *v *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for k in 0..cols {
                    let v = &f * &m[r][k];
                    m[i][k] -= v;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    pivots
}

fn rank_of(vectors: &[Vec<Rational>]) -> usize {
    let mut m = vectors.to_vec();
    row_reduce(&mut m).len()
}

/// Exact solution of `Σ c_i g_i = d` for linearly independent `g_i`.
fn solve_exact(gens: &[&DivisorClass], d: &DivisorClass) -> Option<Vec<Rational>> {
    let rho = d.rank();
    let r = gens.len();
    let mut m: Vec<Vec<Rational>> =
        (0..rho).map(|i| gens.iter().map(|g| g.coeffs[i].clone()).chain([d.coeffs[i].clone()]).collect()).collect();
    let pivots = row_reduce(&mut m);
    if pivots.len() != r || pivots.contains(&r) {
        return None;
    }
    Some((0..r).map(|i| m[i][r].clone()).collect())
}

fn subsets_of(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..(1u32 << n))
        .filter(move |m| m.count_ones() as usize == k)
        .map(move |m| (0..n).filter(|i| m & (1 << i) != 0).collect())
}

/// Inward normals of the facets of a full-dimensional cone.
fn facet_normals(gens: &[DivisorClass], rho: usize) -> Vec<Vec<Rational>> {
    let mut out: Vec<Vec<Rational>> = Vec::new();
    if rho < 2 || gens.len() > 31 {
        return out;
    }
    for subset in subsets_of(gens.len(), rho - 1) {
        let rows: Vec<Vec<Rational>> = subset.iter().map(|&i| gens[i].coeffs.clone()).collect();
        if rank_of(&rows) != rho - 1 {
            continue;
        }
        // Generalized cross product: the signed maximal minors.
        let mut normal: Vec<Rational> = (0..rho)
            .map(|c| {
                let minor: Vec<Vec<Rational>> = rows
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, v)| v.clone()).collect())
                    .collect();
                let d = det_exact(minor);
                if c % 2 == 0 {
                    d
                } else {
                    -d
                }
            })
            .collect();
        let signs: Vec<Rational> = gens.iter().map(|g| dot(&normal, &g.coeffs)).collect();
        let has_pos = signs.iter().any(Signed::is_positive);
        let has_neg = signs.iter().any(Signed::is_negative);
        if has_pos && has_neg {
            continue;
        }
        if has_neg {
            normal = normal.into_iter().map(|v| -v).collect();
        }
        if !out.contains(&normal) {
            out.push(normal);
        }
    }
    out
}

fn det_exact(mut m: Vec<Vec<Rational>>) -> Rational {
    let n = m.len();
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else { return Rational::zero() };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= &m[c][c];
        for i in c + 1..n {
            let f = &m[i][c] / &m[c][c];
            for k in c..n {
                let v = &f * &m[c][k];
                m[i][k] -= v;
            }
        }
    }
    det
}

/// Membership in the closed cone spanned by the effective generators.
///
/// By Carathéodory a point of a finitely generated cone is a nonnegative
/// combination of linearly independent generators, so it suffices to solve
/// exactly on every independent subset.
pub fn is_pseudoeffective(d: &DivisorClass, lat: &SurfaceLattice) -> Result<bool> {
    lat.check(d)?;
    if d.is_zero() {
        return Ok(true);
    }
    let gens = lat.effective_generators();
    for size in 1..=lat.rank().min(gens.len()) {
        for subset in subsets_of(gens.len(), size) {
            let chosen: Vec<&DivisorClass> = subset.iter().map(|&i| &gens[i]).collect();
            if let Some(c) = solve_exact(&chosen, d) {
                if c.iter().all(|v| !v.is_negative()) {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

pub fn is_cohomologically_1ample(l: &DivisorClass, lat: &SurfaceLattice) -> Result<bool> {
    Ok(!is_pseudoeffective(&l.neg(), lat)?)
}

/// An `H` strictly inside the nef cone with `Q(L, H) > 0`, if any exists.
///
/// The pairing is linear, so its maximum over the generator simplex sits at
/// a generator `n*`. Starting from `Σ n_i` (every coefficient 1), `n*` is
/// added the fewest whole times that make the pairing positive.
pub fn positive_pairing_witness(l: &DivisorClass, lat: &SurfaceLattice) -> Option<DivisorClass> {
    if l.rank() != lat.rank() {
        return None;
    }
    let gens = lat.nef_generators();
    let pairings: Vec<Rational> = gens.iter().map(|g| lat.pairing(l, g)).collect();
    let (best, p_best) = pairings.iter().enumerate().max_by(|a, b| a.1.cmp(b.1))?;
    if !p_best.is_positive() {
        return None;
    }
    let base = gens.iter().skip(1).fold(gens[0].clone(), |acc, g| acc.add(g));
    let s: Rational = pairings.iter().fold(Rational::zero(), |acc, p| acc + p);
    let t = if s.is_positive() { Rational::zero() } else { (-s / p_best).floor() + Rational::one() };
    let h = base.add(&gens[best].scale(&t));
    debug_assert!(lat.pairing(l, &h).is_positive());
    Some(h)
}

/// Torus realization of a lattice class pair, used to attach an analytic
/// certificate.
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    pub l_form: ConstantHermitianClass,
    pub omega: KahlerClass,
    /// Lattice class representing ω.
    pub omega_class: DivisorClass,
    pub torus: TorusModel,
    pub k_max: u32,
    pub settings: PipelineSettings,
}

#[derive(Debug, Clone)]
pub struct SurfaceReport {
    pub one_ample: bool,
    /// `−L` lies on the boundary of the closed effective cone, where the
    /// "not 1-ample" answer is a convention of the closed-cone model.
    pub boundary: bool,
    pub witness: Option<DivisorClass>,
    pub witness_pairing: Option<Rational>,
    pub certificate: Option<OnePositiveOutcome>,
}

/// Lattice decision, witness and (optionally) the analytic certificate.
pub fn converse_ag_surface(
    l: &DivisorClass,
    lat: &SurfaceLattice,
    analytic: Option<&AnalyticModel>,
) -> Result<SurfaceReport> {
    if let Some(model) = analytic {
        check_consistency(l, lat, model)?;
    }
    let one_ample = is_cohomologically_1ample(l, lat)?;
    if !one_ample {
        let minus = l.neg();
        let boundary = !lat.is_effective_interior(&minus);
        return Ok(SurfaceReport { one_ample, boundary, witness: None, witness_pairing: None, certificate: None });
    }
    let witness = positive_pairing_witness(l, lat);
    let witness_pairing = witness.as_ref().map(|h| lat.pairing(l, h));
    let certificate = match analytic {
        Some(m) => {
            Some(one_positive_pipeline(&m.l_form, &m.omega, &PotentialField::zeros(&m.torus), m.k_max, m.settings)?)
        }
        None => None,
    };
    Ok(SurfaceReport { one_ample, boundary: false, witness, witness_pairing, certificate })
}

fn check_consistency(l: &DivisorClass, lat: &SurfaceLattice, m: &AnalyticModel) -> Result<()> {
    lat.check(l)?;
    lat.check(&m.omega_class)?;
    if m.l_form.dim() != 2 || m.omega.dim() != 2 {
        return Err(Error::Consistency("analytic model must be a complex surface (n = 2)".into()));
    }
    let w = m.omega.class();
    let pairs = [
        ("(L·ω)", lat.pairing(l, &m.omega_class), intersection_number(&[&m.l_form, w], 2)?),
        ("(L·L)", lat.pairing(l, l), intersection_number(&[&m.l_form, &m.l_form], 2)?),
        ("(ω·ω)", lat.pairing(&m.omega_class, &m.omega_class), intersection_number(&[w, w], 2)?),
    ];
    for (name, lattice, analytic) in pairs {
        let lattice = to_f64(&lattice);
        if (lattice - analytic).abs() > CONSISTENCY_TOL * analytic.abs().max(1.0) {
            return Err(Error::Consistency(format!("{name}: lattice {lattice} vs analytic {analytic}")));
        }
    }
    Ok(())
}
