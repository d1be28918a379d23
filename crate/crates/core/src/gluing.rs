//! Max-gluing of a singular potential with a smooth potential, log-sum-exp
//! smoothing, and the region-tagged certificate of the glued curvature.
//!
//! The pipeline uses centered finite-difference Hessians, so points next to
//! a pole or a kink can be masked individually. The smoothing deficit uses
//! spectral Hessians, whose error shrinks with resolution.

use serde::Serialize;

use crate::calculus::{complex_hessian, complex_hessian_fd, HermitianFormField, PotentialField};
use crate::error::{Error, Result};
use crate::geometry::{ConstantHermitianClass, TorusModel};
use crate::linalg;
use crate::positivity::{CertificateMetadata, PositivityCertificate, DEFAULT_MARGIN};

/// Dyadic exponent range of the threshold search, `C = 2^k`.
pub const THRESHOLD_EXPONENTS: std::ops::RangeInclusive<i32> = -20..=64;
/// Required clearance, in cells, between the pole mask and the edge of `U`.
pub const POLE_MARGIN_CELLS: usize = 2;

/// Grid subset, one flag per sample.
pub type Mask = Vec<bool>;

pub fn count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&b| b).count()
}

/// Square dilation by `r` cells along every active axis.
pub fn dilate(torus: &TorusModel, mask: &[bool], r: usize) -> Mask {
    let mut out = mask.to_vec();
    if r == 0 {
        return out;
    }
    for (axis, &s) in torus.shape().iter().enumerate() {
        if s == 1 {
            continue;
        }
        let src = out.clone();
        for idx in 0..torus.len() {
            if out[idx] {
                continue;
            }
            out[idx] =
                (1..=r as isize).any(|o| src[torus.neighbour(idx, axis, o)] || src[torus.neighbour(idx, axis, -o)]);
        }
    }
    out
}

/// A potential equal to `−∞` on a pole mask, with a declared lower bound
/// `H + ∂∂̄φ_s ≥ ω₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPotential {
    torus: TorusModel,
    values: Vec<f64>,
    pole_mask: Mask,
    lower_bound: ConstantHermitianClass,
}

impl SingularPotential {
    /// Values on the mask are replaced by `−∞`; values off it must be finite.
    pub fn new(
        torus: &TorusModel,
        mut values: Vec<f64>,
        pole_mask: Mask,
        lower_bound: ConstantHermitianClass,
    ) -> Result<Self> {
        if values.len() != torus.len() || pole_mask.len() != torus.len() {
            return Err(Error::Grid(format!("singular potential is not sampled on the {} grid", torus.describe())));
        }
        if lower_bound.dim() != torus.n() {
            return Err(Error::Dimension(format!(
                "lower bound has dimension {}, torus has n = {}",
                lower_bound.dim(),
                torus.n()
            )));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if pole_mask[i] {
                *v = f64::NEG_INFINITY;
            } else if !v.is_finite() {
                return Err(Error::NonFinite { point: i });
            }
        }
        Ok(Self { torus: torus.clone(), values, pole_mask, lower_bound })
    }

    pub fn torus(&self) -> &TorusModel {
        &self.torus
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pole_mask(&self) -> &[bool] {
        &self.pole_mask
    }

    pub fn lower_bound(&self) -> &ConstantHermitianClass {
        &self.lower_bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub c: f64,
    pub region_v: Mask,
}

/// `{φ_s < φ_B − C}`.
pub fn region_v(phi_b: &PotentialField, phi_s: &SingularPotential, c: f64) -> Mask {
    phi_b.values().iter().zip(phi_s.values()).map(|(b, s)| *s < b - c).collect()
}

/// Smallest dyadic `C` with `φ_B − C < φ_s` off `U`, and the region
/// `V = {φ_s < φ_B − C}`, which must lie in `U`.
pub fn select_threshold(phi_b: &PotentialField, phi_s: &SingularPotential, region_u: &[bool]) -> Result<Threshold> {
    let torus = phi_s.torus();
    if phi_b.torus() != torus || region_u.len() != torus.len() {
        return Err(Error::Grid("threshold inputs on different grids".into()));
    }
    let margin = dilate(torus, phi_s.pole_mask(), POLE_MARGIN_CELLS);
    if let Some(p) = (0..torus.len()).find(|&p| margin[p] && !region_u[p]) {
        return Err(Error::Precondition(format!(
            "U must contain the pole mask with a {POLE_MARGIN_CELLS}-cell margin (grid point {p} is missing)"
        )));
    }
    let outside: Vec<usize> = (0..torus.len()).filter(|&p| !region_u[p]).collect();
    let b = phi_b.values();
    let s = phi_s.values();
    let c = THRESHOLD_EXPONENTS.map(|k| 2f64.powi(k)).find(|&c| outside.iter().all(|&p| b[p] - c < s[p])).ok_or_else(
        || Error::Threshold(format!("φ_s does not dominate φ_B − C off U for any C ≤ 2^{}", THRESHOLD_EXPONENTS.end())),
    )?;
    let region_v = region_v(phi_b, phi_s, c);
    if let Some(p) = (0..torus.len()).find(|&p| region_v[p] && !region_u[p]) {
        return Err(Error::Containment(format!("V escapes U at grid point {p}")));
    }
    Ok(Threshold { c, region_v })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlueResult {
    pub psi: PotentialField,
    pub c: f64,
    pub region_u: Mask,
    pub region_v: Mask,
    pub smoothing_eps: f64,
}

/// `ψ_C = max(φ_B − C, φ_s)` with `max(a, −∞) = a`.
pub fn glue_max(phi_b: &PotentialField, c: f64, phi_s: &SingularPotential, region_u: Mask) -> Result<GlueResult> {
    let values = phi_b.values().iter().zip(phi_s.values()).map(|(b, s)| (b - c).max(*s)).collect();
    let psi = PotentialField::new(phi_s.torus(), values)?;
    let region_v = region_v(phi_b, phi_s, c);
    Ok(GlueResult { psi, c, region_u, region_v, smoothing_eps: 0.0 })
}

/// `M_ε(u, v) = ε log(e^{u/ε} + e^{v/ε})`, evaluated as
/// `max + ε log1p(e^{−|u−v|/ε})`. A `−∞` argument yields the other one.
pub fn regularized_max(u: &PotentialField, v: &PotentialField, eps: f64) -> Result<PotentialField> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Argument(format!("ε must be positive, got {eps}")));
    }
    u.same_grid(v)?;
    let values = u.values().iter().zip(v.values()).map(|(&a, &b)| smooth_max(a, b, eps)).collect();
    PotentialField::new(u.torus(), values)
}

fn smooth_max(a: f64, b: f64, eps: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + eps * (-(a - b).abs() / eps).exp().ln_1p()
}

/// Largest scalar `η` with `∂∂̄u ⪰ η` and `∂∂̄v ⪰ η` at every grid point
/// (spectral Hessians).
pub fn common_lower_bound(u: &PotentialField, v: &PotentialField) -> Result<f64> {
    Ok(complex_hessian(u)?.min_eigenvalue().0.min(complex_hessian(v)?.min_eigenvalue().0))
}

/// How far the spectral `∂∂̄M_ε(u, v) − η` dips below zero on the grid
/// (0 if it never does).
pub fn hessian_deficit(u: &PotentialField, v: &PotentialField, eps: f64, eta: &ConstantHermitianClass) -> Result<f64> {
    let m = regularized_max(u, v, eps)?;
    let mut form = complex_hessian(&m)?;
    form.add_constant(&eta.scale(-1.0))?;
    Ok((-form.min_eigenvalue().0).max(0.0))
}

#[derive(Debug, Clone, Copy)]
pub struct GlueSettings {
    /// `U = dilate(poleMask, u_radius)`.
    pub u_radius: usize,
    /// Cells around the pole mask excluded from the lower-bound check.
    pub pole_band: usize,
    pub margin: f64,
    /// Tolerance of the declared bound `H + ∂∂̄φ_s ≥ ω₀`.
    pub declaration_tol: f64,
    pub eps_start: f64,
    pub eps_min: f64,
}

impl Default for GlueSettings {
    fn default() -> Self {
        Self {
            u_radius: 4,
            pole_band: 1,
            margin: DEFAULT_MARGIN,
            declaration_tol: 1e-9,
            eps_start: 0.25,
            eps_min: 1.0 / 65536.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCertificate {
    pub region: String,
    pub q: usize,
    pub points: usize,
    pub min_margin: f64,
    pub worst_point: usize,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GlueReport {
    pub certificate: PositivityCertificate,
    pub regions: Vec<RegionCertificate>,
    pub glue: GlueResult,
    /// Smoothed potential that was certified.
    pub smoothed: PotentialField,
    /// Points excluded from the lower-bound check around the poles.
    pub pole_band_points: usize,
    /// Points excluded from the final certificate around the switching set.
    pub switching_band_points: usize,
    /// Smallest eigenvalue of `H + ∂∂̄φ_s − ω₀` where it was checked.
    pub declaration_margin: f64,
}

pub const REGION_OUTSIDE_U: &str = "outside U_C";
pub const REGION_V: &str = "V_C";
pub const REGION_U_MINUS_V: &str = "U_C minus V_C";
pub const REGION_NEIGHBOURHOOD: &str = "neighbourhood of the pole mask";

/// Checks both model declarations, glues at the selected threshold,
/// smooths with a decreasing ε sweep and certifies the result region by
/// region: all `n` eigenvalues positive off `U`, q-positivity on `V` and on
/// `U∖V`. Samples within one cell of the switching set are excluded and
/// counted.
pub fn zariski_fujita_pipeline(
    h: &ConstantHermitianClass,
    phi_s: &SingularPotential,
    phi_b: &PotentialField,
    q: usize,
    settings: GlueSettings,
) -> Result<GlueReport> {
    let torus = phi_s.torus();
    let n = torus.n();
    if q >= n {
        return Err(Error::Argument(format!("q = {q} must lie in 0..={}", n - 1)));
    }
    if h.dim() != n {
        return Err(Error::Dimension(format!("H has dimension {}, torus has n = {n}", h.dim())));
    }
    if phi_b.torus() != torus {
        return Err(Error::Grid("φ_B and φ_s on different grids".into()));
    }
    let len = torus.len();
    let poles = phi_s.pole_mask();
    let region_u = dilate(torus, poles, settings.u_radius);

    // Declaration (a), away from a band around the poles.
    let pole_band = dilate(torus, poles, settings.pole_band);
    let mut lower = curvature(h, torus, phi_s.values())?;
    lower.add_constant(&phi_s.lower_bound().scale(-1.0))?;
    let checked: Vec<usize> = (0..len).filter(|&p| !pole_band[p]).collect();
    let (declaration_margin, worst) = min_eigenvalue_over(&lower, &checked);
    if declaration_margin < -settings.declaration_tol {
        return Err(Error::PipelineFailure {
            region: REGION_OUTSIDE_U.into(),
            worst_point: worst,
            detail: format!("declared lower bound fails: H + ∂∂̄φ_s − ω₀ has eigenvalue {declaration_margin:.3e}"),
        });
    }

    // Declaration (b): q-positivity of the smooth branch near the poles.
    let smooth = curvature(h, torus, phi_b.values())?;
    let near: Vec<usize> = (0..len).filter(|&p| region_u[p]).collect();
    let (m, worst) = eigen_over(&smooth, &near, n - q - 1);
    if !near.is_empty() && !(m > settings.margin) {
        return Err(Error::PipelineFailure {
            region: REGION_NEIGHBOURHOOD.into(),
            worst_point: worst,
            detail: format!("H + ∂∂̄φ_B is not {q}-positive near the poles (margin {m:.3e})"),
        });
    }

    let threshold = select_threshold(phi_b, phi_s, &region_u)?;
    let glue = glue_max(phi_b, threshold.c, phi_s, region_u.clone())?;
    let shifted = PotentialField::new(torus, phi_b.values().iter().map(|b| b - threshold.c).collect())?;
    let singular = PotentialField::new(torus, phi_s.values().to_vec())?;

    let band = switching_band(torus, shifted.values(), singular.values());
    let switching_band_points = count(&band);
    let regions_of = |p: usize| -> Option<(usize, usize)> {
        if band[p] {
            None
        } else if !region_u[p] {
            Some((0, 0))
        } else if glue.region_v[p] {
            Some((1, q))
        } else {
            Some((2, q))
        }
    };
    let names = [REGION_OUTSIDE_U, REGION_V, REGION_U_MINUS_V];

    let mut eps = settings.eps_start;
    loop {
        let smoothed = regularized_max(&shifted, &singular, eps)?;
        let form = curvature(h, torus, smoothed.values())?;
        let eig: Vec<Vec<f64>> = (0..len).map(|p| linalg::hermitian_eigenvalues(&form.at(p))).collect();
        let mut regions: Vec<RegionCertificate> = names
            .iter()
            .enumerate()
            .map(|(r, name)| RegionCertificate {
                region: (*name).into(),
                q: if r == 0 { 0 } else { q },
                points: 0,
                min_margin: f64::INFINITY,
                worst_point: 0,
                pass: true,
            })
            .collect();
        for p in 0..len {
            let Some((r, rq)) = regions_of(p) else { continue };
            let v = eig[p][n - rq - 1];
            let cert = &mut regions[r];
            cert.points += 1;
            if !(v >= cert.min_margin) {
                cert.min_margin = v;
                cert.worst_point = p;
            }
        }
        for cert in regions.iter_mut() {
            cert.pass = cert.points == 0 || cert.min_margin > settings.margin;
        }
        let all_pass = regions.iter().all(|c| c.pass);
        if all_pass || eps / 2.0 < settings.eps_min {
            if !all_pass {
                let failed = regions.iter().find(|c| !c.pass).expect("some region failed");
                return Err(Error::PipelineFailure {
                    region: failed.region.clone(),
                    worst_point: failed.worst_point,
                    detail: format!("margin {:.3e} at ε = {eps:e}", failed.min_margin),
                });
            }
            let margin_field: Vec<f64> = eig.iter().map(|e| e[n - q - 1]).collect();
            let (min_margin, worst_point) = (0..len)
                .filter(|&p| !band[p])
                .map(|p| (margin_field[p], p))
                .fold((f64::INFINITY, 0), |acc, x| if x.0 < acc.0 { x } else { acc });
            let certificate = PositivityCertificate {
                q,
                n,
                threshold: settings.margin,
                margin_field,
                min_margin,
                worst_point,
                pass: true,
                metadata: CertificateMetadata { resolution: torus.describe(), ..Default::default() },
            };
            let glue = GlueResult { smoothing_eps: eps, ..glue };
            return Ok(GlueReport {
                certificate,
                regions,
                glue,
                smoothed,
                pole_band_points: count(&pole_band) - count(poles),
                switching_band_points,
                declaration_margin,
            });
        }
        eps /= 2.0;
    }
}

fn curvature(h: &ConstantHermitianClass, torus: &TorusModel, values: &[f64]) -> Result<HermitianFormField> {
    let mut form = complex_hessian_fd(torus, values)?;
    form.add_constant(h)?;
    Ok(form)
}

fn min_eigenvalue_over(form: &HermitianFormField, points: &[usize]) -> (f64, usize) {
    let n = form.n();
    eigen_over(form, points, n - 1)
}

/// Minimum over `points` of the `i`-th largest eigenvalue (NaN counts as
/// a failure at that point).
fn eigen_over(form: &HermitianFormField, points: &[usize], i: usize) -> (f64, usize) {
    let mut worst = (f64::INFINITY, points.first().copied().unwrap_or(0));
    for &p in points {
        let m = form.at(p);
        let v = if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            linalg::hermitian_eigenvalues(&m)[i]
        } else {
            f64::NEG_INFINITY
        };
        if v < worst.0 {
            worst = (v, p);
        }
    }
    worst
}

/// Samples whose 3×…×3 stencil neighbourhood sees both branches of the
/// maximum.
fn switching_band(torus: &TorusModel, a: &[f64], b: &[f64]) -> Mask {
    let upper: Mask = a.iter().zip(b).map(|(x, y)| x >= y).collect();
    let lower: Mask = upper.iter().map(|u| !u).collect();
    let du = dilate(torus, &upper, 1);
    let dl = dilate(torus, &lower, 1);
    du.iter().zip(&dl).map(|(x, y)| *x && *y).collect()
}
