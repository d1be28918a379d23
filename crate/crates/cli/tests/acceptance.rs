//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::process::Command as Process;
use std::time::{Duration, Instant};

use nalgebra::SymmetricEigen;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpos_core::calculus::{HermitianFormField, PotentialField};
use qpos_core::degeneracy::{
    degeneracy_locus_scan, fibre_dimension_estimate, jacobian, sigma_j_minors, Monomial, PolyMap, SampleBox,
    DEFAULT_ZERO_THRESHOLD,
};
use qpos_core::geometry::{dk_constant, dk_expansion, Axis, ConstantHermitianClass, KahlerClass, TorusModel};
use qpos_core::gluing::{
    common_lower_bound, hessian_deficit, regularized_max, zariski_fujita_pipeline, GlueSettings, SingularPotential,
};
use qpos_core::linalg::CMatrix;
use qpos_core::ma_solver::{solve_ma, MAProblem};
use qpos_core::positivity::{
    certificate_from_eigenvalues, eigenvalues_relative, one_positive_pipeline, PipelineSettings, DEFAULT_MARGIN,
};
use qpos_core::surface_cones::{is_cohomologically_1ample, positive_pairing_witness, DivisorClass, SurfaceLattice};

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || format!("runtime {:.2}s exceeds {limit_s}s", elapsed.as_secs_f64()))
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rational(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-20i32..=20) as f64 / rng.gen_range(1i32..=8) as f64
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(rational(rng), 0.0);
        for j in i + 1..n {
            let z = c(rational(rng), rational(rng));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn random_positive(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = random_hermitian(rng, n);
    &a * a.adjoint() + CMatrix::identity(n, n)
}

/// Eigenvalues of a Hermitian matrix in decreasing order, via nalgebra.
fn oracle_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Generalized eigenvalues of `(A, B)` through `B = LLᴴ` and `L⁻¹AL⁻ᴴ`.
fn oracle_pencil(a: &CMatrix, b: &CMatrix) -> Vec<f64> {
    let l = b.clone().cholesky().expect("positive definite").l();
    let li = l.try_inverse().expect("invertible");
    oracle_eigenvalues(&(&li * a * li.adjoint()))
}

fn elementary(values: &[f64], j: usize) -> f64 {
    let mut e = vec![0.0; j + 1];
    e[0] = 1.0;
    for &v in values {
        for k in (1..=j).rev() {
            e[k] += v * e[k - 1];
        }
    }
    e[j]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let n = 2 + trial % 2;
        let h = ConstantHermitianClass::new(random_hermitian(&mut rng, n)).map_err(|e| e.to_string())?;
        let g = KahlerClass::new(ConstantHermitianClass::new(random_positive(&mut rng, n)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let k = rng.gen_range(1..=10) as f64;
        let a = dk_constant(&h, &g, k).map_err(|e| e.to_string())?;
        let b = dk_expansion(&h, &g, k).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
    }
    check(worst <= 1e-12, || format!("relative mismatch {worst:.3e}"))?;
    let l = ConstantHermitianClass::diag(&[2.0, -1.0]);
    let d = dk_constant(&l, &KahlerClass::identity(2), 3.0).map_err(|e| e.to_string())?;
    // det(diag(5, 2)) / det(diag(3, 3)).
    check((d - 10.0 / 9.0).abs() < 1e-15, || format!("D_3 = {d}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("100 trials, worst relative mismatch {worst:.1e}, D_3 = {d:.15}"))
}

fn torus_x1y1(n: usize) -> TorusModel {
    TorusModel::with_active_axes(n, 64, &[Axis::X(0), Axis::Y(0)]).expect("torus")
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let torus = torus_x1y1(2);
    let l = ConstantHermitianClass::diag(&[2.0, -1.0]);
    let out = one_positive_pipeline(
        &l,
        &KahlerClass::identity(2),
        &PotentialField::zeros(&torus),
        64,
        PipelineSettings::default(),
    )
    .map_err(|e| e.to_string())?;
    check(out.k == 3, || format!("k = {}", out.k))?;
    let lam_err = (0..torus.len())
        .map(|i| {
            let v = out.eigenvalues.at(i);
            (v[0] - 5.0 / 3.0).abs().max((v[1] - 2.0 / 3.0).abs())
        })
        .fold(0.0, f64::max);
    check(lam_err < 1e-9, || format!("eigenvalue field deviates by {lam_err:.3e}"))?;
    let prod_err = out.eigenvalues.products().iter().map(|p| (p - 10.0 / 9.0).abs()).fold(0.0, f64::max);
    check(prod_err < 1e-9, || format!("product deviates by {prod_err:.3e}"))?;
    let cert = &out.certificate;
    check(cert.q == 1 && cert.pass, || format!("certificate q = {} pass = {}", cert.q, cert.pass))?;
    check((cert.min_margin - 2.0 / 3.0).abs() < 1e-9, || format!("min margin {}", cert.min_margin))?;
    within(start.elapsed(), 5.0)?;
    Ok(format!("k = 3, λ err {lam_err:.1e}, Πλ err {prod_err:.1e}, margin {:.12}", cert.min_margin))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let torus = torus_x1y1(2);
    let psi0 = PotentialField::from_fn(&torus, |x| 0.1 * (2.0 * PI * x[0]).cos());
    let l = ConstantHermitianClass::diag(&[2.0, -1.0]);
    let out = one_positive_pipeline(&l, &KahlerClass::identity(2), &psi0, 64, PipelineSettings::default())
        .map_err(|e| e.to_string())?;
    // The constant solution of the constant-density equation is the unique
    // one, so ψ₀ + φ must be flat.
    let total = out.solve.total_potential().map_err(|e| e.to_string())?;
    let mean = total.mean();
    let flat = total.values().iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    check(flat < 1e-6, || format!("ψ₀+φ varies by {flat:.3e}"))?;
    let prod_err = out.eigenvalues.products().iter().map(|p| (p - out.dk).abs()).fold(0.0, f64::max);
    check(prod_err < 1e-6, || format!("Πλ deviates from D_k by {prod_err:.3e}"))?;
    check(out.certificate.pass, || "final curvature not certified".into())?;
    within(start.elapsed(), 60.0)?;
    Ok(format!("sup|ψ₀+φ−c| = {flat:.1e}, Πλ err {prod_err:.1e}, {} Newton iterations", out.solve.result.iterations))
}

/// Manufactured density for `φ* = a sin(2πx₁) cos(2πy₂)` against the
/// identity background, from closed-form second derivatives.
fn manufactured(torus: &TorusModel, a: f64) -> (PotentialField, PotentialField) {
    let phi = PotentialField::from_fn(torus, |x| a * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[3]).cos());
    let density = PotentialField::from_fn(torus, |x| {
        let (s1, c1) = (2.0 * PI * x[0]).sin_cos();
        let (s2, c2) = (2.0 * PI * x[3]).sin_cos();
        let diag = 1.0 - PI * PI * a * s1 * c2;
        let off = PI * PI * a * c1 * s2;
        diag * diag - off * off
    });
    (phi, density)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let torus = TorusModel::with_active_axes(2, 64, &[Axis::X(0), Axis::Y(1)]).map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    let mut iterations = Vec::new();
    for a in [0.05, 0.025] {
        let (exact, density) = manufactured(&torus, a);
        let problem = MAProblem::new(ConstantHermitianClass::identity(2), density).with_tolerance(1e-12, 50);
        let res = solve_ma(&problem).map_err(|e| e.to_string())?;
        let err = res.phi.max_abs_diff(&exact).map_err(|e| e.to_string())?;
        errors.push(err);
        iterations.push(res.iterations);
    }
    check(errors[0] < 1e-6, || format!("recovery error {:.3e}", errors[0]))?;
    check(iterations[0] <= 15, || format!("{} Newton iterations", iterations[0]))?;
    // Both errors sit at the discretization floor; the halved amplitude must
    // not do worse than half the full-amplitude bound.
    let bound = 1e-6;
    check(errors[1] <= 0.5 * bound, || format!("half-amplitude error {:.3e} exceeds {:.1e}", errors[1], 0.5 * bound))?;
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "errors {:.1e} (a=0.05, {} it) and {:.1e} (a=0.025, {} it)",
        errors[0], iterations[0], errors[1], iterations[1]
    ))
}

fn random_map(rng: &mut ChaCha8Rng) -> PolyMap {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=3);
    let components = (0..m)
        .map(|_| {
            (0..rng.gen_range(1..=4))
                .map(|_| Monomial {
                    exponents: (0..n).map(|_| rng.gen_range(0..=3)).collect(),
                    coeff: c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                })
                .collect()
        })
        .collect();
    PolyMap::new(n, components).expect("valid map")
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let f = random_map(&mut rng);
        let z: Vec<Complex64> = (0..f.n()).map(|_| c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5))).collect();
        let j = jacobian(&f, &z).matrix;
        let eig = oracle_eigenvalues(&(j.adjoint() * &j));
        let scale = eig.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        for k in 1..=f.n() {
            let got = sigma_j_minors(&j, k).map_err(|e| e.to_string())?;
            let want = elementary(&eig, k);
            worst = worst.max((got - want).abs() / scale.powi(k as i32));
        }
    }
    check(worst <= 1e-10, || format!("relative error {worst:.3e}"))?;
    let f = PolyMap::parse("map 2 2\n0 1 0 1\n1 1 1 1\n").map_err(|e| e.to_string())?;
    let j = jacobian(&f, &[c(2.0, 0.0), c(3.0, 0.0)]).matrix;
    let s1 = sigma_j_minors(&j, 1).map_err(|e| e.to_string())?;
    let s2 = sigma_j_minors(&j, 2).map_err(|e| e.to_string())?;
    // J = [[1, 0], [3, 2]]: σ₁ = 1 + 9 + 4, σ₂ = |det J|² = 4.
    check(s1 == 14.0 && s2 == 4.0, || format!("σ₁ = {s1}, σ₂ = {s2}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("1000 maps, worst relative error {worst:.1e}, σ₁ = {s1}, σ₂ = {s2}"))
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn pair(lat: &SurfaceLattice, a: &DivisorClass, b: &DivisorClass) -> BigRational {
    let q = lat.matrix();
    let mut s = rat(0, 1);
    for i in 0..a.rank() {
        for j in 0..b.rank() {
            s += &a.coeffs()[i] * &q[i][j] * &b.coeffs()[j];
        }
    }
    s
}

/// The witness is interior to the nef cone (pairs strictly positively with
/// every effective generator) and pairs positively with `l`.
fn witness_ok(lat: &SurfaceLattice, l: &DivisorClass, h: &DivisorClass) -> bool {
    let zero = rat(0, 1);
    lat.effective_generators().iter().all(|e| pair(lat, h, e) > zero) && pair(lat, l, h) > zero
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let p = SurfaceLattice::p1_x_p1();
    let f1 = SurfaceLattice::hirzebruch_f1();
    let err = |e: qpos_core::Error| e.to_string();

    let l = DivisorClass::from_ints(&[1, -1]);
    check(is_cohomologically_1ample(&l, &p).map_err(err)?, || "e₁−e₂ not 1-ample".into())?;
    let w = positive_pairing_witness(&l, &p).ok_or("no witness for e₁−e₂")?;
    check(witness_ok(&p, &l, &w), || format!("witness {w} fails verification"))?;
    check(!is_cohomologically_1ample(&DivisorClass::from_ints(&[-1, 0]), &p).map_err(err)?, || {
        "−e₁ declared 1-ample".into()
    })?;
    check(!is_cohomologically_1ample(&DivisorClass::zero(2), &p).map_err(err)?, || "0 declared 1-ample".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..1000 {
        let (lat, name) = if trial % 2 == 0 { (&p, "P1xP1") } else { (&f1, "F1") };
        let a = rat(rng.gen_range(-12..=12), rng.gen_range(1..=6));
        let b = rat(rng.gen_range(-12..=12), rng.gen_range(1..=6));
        let d = DivisorClass::new(vec![a.clone(), b.clone()]);
        let ample = is_cohomologically_1ample(&d, lat).map_err(err)?;
        let witness = positive_pairing_witness(&d, lat);
        check(ample == witness.is_some(), || format!("{name}: duality broken for {d}"))?;
        if let Some(h) = &witness {
            check(witness_ok(lat, &d, h), || format!("{name}: witness {h} for {d} fails"))?;
        }
        // Closed-form cone tests: −L is pseudoeffective iff a, b ≤ 0 on
        // ℙ¹×ℙ¹ and iff a ≤ 0, a + b ≤ 0 on F₁ in the (h, e) basis.
        let zero = rat(0, 1);
        let expected = if name == "P1xP1" { a > zero || b > zero } else { a > zero || &a + &b > zero };
        check(ample == expected, || format!("{name}: {d} decided {ample}, expected {expected}"))?;
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("witness for e₁−e₂ = {w}, 1000 random classes consistent"))
}

fn random_field(rng: &mut ChaCha8Rng, torus: &TorusModel, positive: bool) -> HermitianFormField {
    let n = torus.n();
    let mats: Vec<CMatrix> =
        (0..torus.len()).map(|_| if positive { random_positive(rng, n) } else { random_hermitian(rng, n) }).collect();
    HermitianFormField::from_fn(torus, |i| mats[i].clone()).expect("field")
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut shift, mut brute) = (0.0f64, 0.0f64);
    for n in 1..=3 {
        let torus = TorusModel::with_active_axes(n, 8, &[Axis::X(0)]).map_err(|e| e.to_string())?;
        let a = random_field(&mut rng, &torus, false);
        let b = random_field(&mut rng, &torus, true);
        let e_ab = eigenvalues_relative(&a, &b).map_err(|e| e.to_string())?;
        let e_shift = eigenvalues_relative(&a.sub(&b).map_err(|e| e.to_string())?, &b).map_err(|e| e.to_string())?;
        for i in 0..torus.len() {
            let scale = e_ab.at(i).iter().map(|v| v.abs()).fold(1.0, f64::max);
            for (x, y) in e_shift.at(i).iter().zip(e_ab.at(i)) {
                shift = shift.max((x - (y - 1.0)).abs() / scale);
            }
            let want = oracle_pencil(&a.at(i), &b.at(i));
            for (x, y) in e_ab.at(i).iter().zip(&want) {
                brute = brute.max((x - y).abs() / scale);
            }
        }
        let mut passed = false;
        for q in 0..n {
            let cert = certificate_from_eigenvalues(&e_ab, q, DEFAULT_MARGIN).map_err(|e| e.to_string())?;
            check(!passed || cert.pass, || format!("n = {n}: passes at q−1 but fails at q = {q}"))?;
            if q > 0 {
                let prev = certificate_from_eigenvalues(&e_ab, q - 1, DEFAULT_MARGIN).map_err(|e| e.to_string())?;
                check(cert.min_margin >= prev.min_margin, || format!("n = {n}: margin decreases at q = {q}"))?;
            }
            passed |= cert.pass;
        }
    }
    check(shift <= 1e-12, || format!("shift identity error {shift:.3e}"))?;
    check(brute <= 1e-10, || format!("brute-force disagreement {brute:.3e}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("shift err {shift:.1e}, brute-force err {brute:.1e}, monotone in q"))
}

fn deficit_pairs() -> Vec<(&'static str, fn(&[f64]) -> f64, fn(&[f64]) -> f64)> {
    fn u1(x: &[f64]) -> f64 {
        0.1 * (2.0 * PI * x[0]).cos()
    }
    fn v1(x: &[f64]) -> f64 {
        0.1 * (2.0 * PI * x[1]).sin()
    }
    fn u2(x: &[f64]) -> f64 {
        0.2 * (2.0 * PI * (x[0] + x[1])).sin()
    }
    fn v2(x: &[f64]) -> f64 {
        -0.1 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos()
    }
    fn u3(x: &[f64]) -> f64 {
        0.05 * (4.0 * PI * x[0]).cos()
    }
    fn v3(x: &[f64]) -> f64 {
        0.1 * (2.0 * PI * x[1]).cos() - 0.02
    }
    vec![("cos/sin", u1, v1), ("diagonal wave", u2, v2), ("double frequency", u3, v3)]
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let eps = 0.005;
    // Sandwich max ≤ M_ε ≤ max + ε log 2 at every point.
    let mut sandwich = 0usize;
    let mut deficits = Vec::new();
    for (name, fu, fv) in deficit_pairs() {
        let mut row = Vec::new();
        for grid in [64, 128] {
            let torus = TorusModel::new(1, grid).map_err(|e| e.to_string())?;
            let u = PotentialField::from_fn(&torus, fu);
            let v = PotentialField::from_fn(&torus, fv);
            let m = regularized_max(&u, &v, eps).map_err(|e| e.to_string())?;
            for ((a, b), r) in u.values().iter().zip(v.values()).zip(m.values()) {
                let lo = a.max(*b);
                check(lo <= *r && *r <= lo + eps * 2f64.ln(), || format!("{name}: sandwich fails at N = {grid}"))?;
                sandwich += 1;
            }
            let eta = common_lower_bound(&u, &v).map_err(|e| e.to_string())?;
            row.push(hessian_deficit(&u, &v, eps, &ConstantHermitianClass::diag(&[eta])).map_err(|e| e.to_string())?);
        }
        check(row[1] < row[0], || format!("{name}: δ(64) = {:.3e}, δ(128) = {:.3e}", row[0], row[1]))?;
        deficits.push(format!("{:.2e}→{:.2e}", row[0], row[1]));
    }

    let torus = TorusModel::new(1, 64).map_err(|e| e.to_string())?;
    let values: Vec<f64> = (0..torus.len())
        .map(|i| {
            let x = torus.coords(i);
            ((PI * x[0]).sin().powi(2) + (PI * x[1]).sin().powi(2)).ln()
        })
        .collect();
    let mask: Vec<bool> = (0..torus.len())
        .map(|i| {
            let x = torus.coords(i);
            let d = |t: f64| t.min(1.0 - t);
            d(x[0]).hypot(d(x[1])) <= 6.0 / 64.0
        })
        .collect();
    let phi_s =
        SingularPotential::new(&torus, values, mask, ConstantHermitianClass::identity(1)).map_err(|e| e.to_string())?;
    let report = zariski_fujita_pipeline(
        &ConstantHermitianClass::diag(&[8.0]),
        &phi_s,
        &PotentialField::zeros(&torus),
        0,
        GlueSettings::default(),
    )
    .map_err(|e| e.to_string())?;
    check(report.certificate.pass, || "glued potential not certified".into())?;
    check(report.regions.len() >= 3 && report.regions.iter().all(|r| r.pass), || {
        format!("region certificates: {:?}", report.regions.iter().map(|r| (&r.region, r.pass)).collect::<Vec<_>>())
    })?;
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "{sandwich} sandwich points, δ: {}, glue C = {}, ε = {}",
        deficits.join(", "),
        report.glue.c,
        report.glue.smoothing_eps
    ))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let f = PolyMap::parse("map 2 2\n0 1 0 1\n1 1 1 1\n").map_err(|e| e.to_string())?;
    let region = SampleBox::new(vec![c(0.0, 0.0), c(0.0, 0.0)], 1.0, 11);
    let scan = degeneracy_locus_scan(&f, 0, &region, DEFAULT_ZERO_THRESHOLD).map_err(|e| e.to_string())?;
    let h = scan.spacing;
    check(!scan.flagged.is_empty(), || "nothing flagged".into())?;
    let far = scan.flagged.iter().filter(|z| z[0].re.abs() > h || z[0].im.abs() > h).count();
    check(far == 0, || format!("{far} flagged samples farther than one cell from z₁ = 0"))?;
    let on_locus = (0..scan.samples).map(|i| region.sample(i)).filter(|z| z[0].norm() == 0.0).count();
    let hit = scan.flagged.iter().filter(|z| z[0].norm() == 0.0).count();
    check(hit == on_locus, || format!("{hit} of {on_locus} samples on z₁ = 0 flagged"))?;

    let proj = PolyMap::parse("map 2 1\n0 1 0 1\n").map_err(|e| e.to_string())?;
    let fibre_box = SampleBox::new(vec![c(0.0, 0.0), c(0.0, 0.0)], 1.0, 3);
    let e1 = fibre_dimension_estimate(&proj, &[c(0.0, 0.0)], &fibre_box, 32, 9).map_err(|e| e.to_string())?;
    check(e1.dimension == 1, || format!("fibre of (z₁) has dimension {}", e1.dimension))?;
    let e0 = fibre_dimension_estimate(&PolyMap::identity(2), &[c(0.3, 0.1), c(-0.2, 0.4)], &fibre_box, 32, 9)
        .map_err(|e| e.to_string())?;
    check(e0.dimension == 0, || format!("fibre of the identity has dimension {}", e0.dimension))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("{} of {} samples flagged, all on z₁ = 0; fibre dims 1 and 0", scan.flagged.len(), scan.samples))
}

const CERTIFY_TOML: &str = r#"command = "certify"
[torus]
grid = 64
active_axes = ["x1", "y1"]
[classes]
L = [[2, 0], [0, -1]]
omega = [[1, 0], [0, 1]]
"#;

const SURFACE_TOML: &str = r#"command = "ag-surface"
[lattice]
model = "p1xp1"
L = [1, -1]
"#;

fn verdict_of(subcommand: &str, config: &std::path::Path) -> Result<(i32, String), String> {
    let out = Process::new(env!("CARGO_BIN_EXE_qpos"))
        .args([subcommand, "--config"])
        .arg(config)
        .output()
        .map_err(|e| e.to_string())?;
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| format!("bad report: {e}"))?;
    Ok((out.status.code().unwrap_or(-1), serde_json::to_string(&report["verdict"]).map_err(|e| e.to_string())?))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for (sub, text, expect_code) in [("certify", CERTIFY_TOML, 0), ("ag-surface", SURFACE_TOML, 0)] {
        let path = dir.path().join(format!("{sub}.toml"));
        std::fs::write(&path, text).map_err(|e| e.to_string())?;
        let runs = (0..3).map(|_| verdict_of(sub, &path)).collect::<Result<Vec<_>, _>>()?;
        check(runs.iter().all(|r| r.0 == expect_code), || {
            format!("{sub}: exit codes {:?}", runs.iter().map(|r| r.0).collect::<Vec<_>>())
        })?;
        check(runs.iter().all(|r| r.1 == runs[0].1), || format!("{sub}: verdicts differ"))?;
        lines.push(format!("{sub} {} bytes", runs[0].1.len()));
    }
    Ok(format!("3 runs each byte-identical ({})", lines.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("D_k identity", criterion_1),
        ("constant pipeline", criterion_2),
        ("nonconstant metric", criterion_3),
        ("MA manufactured solution", criterion_4),
        ("Cauchy-Binet oracle", criterion_5),
        ("surface cone decisions", criterion_6),
        ("eigenvalue machinery", criterion_7),
        ("gluing", criterion_8),
        ("degeneracy scan", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} ({name}) [{secs:.2}s]: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}) [{secs:.2}s]: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
