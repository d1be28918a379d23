use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpos_core::calculus::{complex_hessian, PotentialField};
use qpos_core::geometry::{Axis, ConstantHermitianClass, TorusModel};
use qpos_core::ma_solver::{compatibility_check, solve_ma, MAProblem};

fn torus() -> TorusModel {
    TorusModel::with_active_axes(2, 32, &[Axis::X(0), Axis::Y(1)]).unwrap()
}

fn density(t: &TorusModel) -> PotentialField {
    PotentialField::from_fn(t, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[3]).sin())
}

fn problem() -> MAProblem {
    let background = ConstantHermitianClass::from_pairs(2, &[(2.0, 0.0), (0.3, 0.2), (0.3, -0.2), (1.0, 0.0)]).unwrap();
    compatibility_check(MAProblem::new(background, density(&torus())).with_tolerance(1e-10, 50)).unwrap().0
}

#[test]
fn solution_is_unique_across_initial_guesses() {
    let p = problem();
    let a = solve_ma(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = torus();
    let amps: Vec<f64> = (0..4).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
    let guess = PotentialField::from_fn(&t, |x| {
        amps[0] * (2.0 * PI * x[0]).cos()
            + amps[1] * (2.0 * PI * x[3]).sin()
            + amps[2] * (4.0 * PI * (x[0] + x[3])).cos()
            + amps[3]
    })
    .normalized();
    let b = solve_ma(&p.clone().with_initial_guess(guess)).unwrap();
    assert!(a.phi.max_abs_diff(&b.phi).unwrap() <= 10.0 * p.tol);
}

#[test]
fn residual_never_increases() {
    let r = solve_ma(&problem()).unwrap();
    assert!(r.residual_history.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.residual_history);
}

#[test]
fn equation_holds_pointwise() {
    let p = problem();
    let r = solve_ma(&p).unwrap();
    let hess = complex_hessian(&r.phi).unwrap();
    let g = p.background.matrix();
    let scale = r.gauge_constant.exp();
    for i in 0..hess.len() {
        let m: DMatrix<Complex64> = g + hess.at(i);
        let ratio = m.determinant().re / (p.target_density.values()[i] * scale);
        assert!((ratio - 1.0).abs() <= 1e-9, "point {i}: {ratio}");
    }
}

#[test]
fn gauge_is_mean_zero() {
    let r = solve_ma(&problem()).unwrap();
    assert!(r.phi.mean().abs() <= 1e-12);
}
