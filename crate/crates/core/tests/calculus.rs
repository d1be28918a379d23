use std::f64::consts::PI;

use proptest::prelude::*;

use qpos_core::calculus::{c2_norm, complex_hessian, complex_hessian_fd, weighted_series_combine, PotentialField};
use qpos_core::geometry::{Axis, TorusModel};

fn torus(grid: usize) -> TorusModel {
    TorusModel::with_active_axes(2, grid, &[Axis::X(0), Axis::Y(1)]).unwrap()
}

fn field(t: &TorusModel, a: f64, b: f64, p: usize) -> PotentialField {
    PotentialField::from_fn(t, |x| {
        a * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[3]).cos() + b * (2.0 * PI * (p as f64) * x[3]).cos()
    })
}

fn fd_error(grid: usize) -> (f64, f64) {
    let t = torus(grid);
    let phi = field(&t, 0.3, 0.2, 1);
    let spec = complex_hessian(&phi).unwrap();
    let fd = complex_hessian_fd(&t, phi.values()).unwrap();
    let err = (0..t.len()).map(|i| (spec.at(i) - fd.at(i)).norm()).fold(0.0, f64::max);
    let size = (0..t.len()).map(|i| spec.at(i).norm()).fold(0.0, f64::max);
    (err, size)
}

#[test]
fn spectral_matches_finite_differences() {
    let (err, size) = fd_error(64);
    // Centered second differences of a unit-frequency mode are off by
    // (2πh)²/12 relative, mixed differences by (2πh)²/6.
    let h = 2.0 * PI / 64.0;
    assert!(err / size < h * h / 2.0, "relative error {}", err / size);
    let (err2, _) = fd_error(128);
    assert!(err / err2 > 3.5 && err / err2 < 4.5, "ratio {}", err / err2);
}

#[test]
fn analytic_hessian_entries() {
    // φ = cos(2πx₁): ∂²φ/∂z₁∂z̄₁ = ¼ φ_xx = −π² cos(2πx₁).
    let t = torus(64);
    let phi = PotentialField::from_fn(&t, |x| (2.0 * PI * x[0]).cos());
    let h = complex_hessian(&phi).unwrap();
    for i in 0..t.len() {
        let want = -PI * PI * (2.0 * PI * t.coords(i)[0]).cos();
        assert!((h.entry(0, 0)[i].re - want).abs() < 1e-10);
        assert!(h.entry(1, 1)[i].norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn c2_is_a_seminorm(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0, s in -3.0f64..3.0) {
        let t = torus(16);
        let u = field(&t, a, b, 1);
        let v = field(&t, c, d, 3);
        let nu = c2_norm(&u).unwrap();
        let nv = c2_norm(&v).unwrap();
        prop_assert!((c2_norm(&u.scale(s)).unwrap() - s.abs() * nu).abs() <= 1e-9 * (1.0 + nu));
        prop_assert!(c2_norm(&u.add(&v).unwrap()).unwrap() <= nu + nv + 1e-9);
    }

    #[test]
    fn series_is_c2_bounded(amps in prop::collection::vec(-5.0f64..5.0, 1..6)) {
        let t = torus(16);
        let phis: Vec<PotentialField> = amps.iter().enumerate().map(|(i, &a)| field(&t, a, 0.5 * a, i + 1)).collect();
        let out = weighted_series_combine(&phis, phis.len()).unwrap();
        let bound: f64 = (1..=phis.len()).map(|i| 0.5f64.powi(i as i32)).sum();
        prop_assert!(c2_norm(&out).unwrap() <= bound + 1e-9);
    }
}
