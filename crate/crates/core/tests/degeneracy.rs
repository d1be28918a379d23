use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use proptest::prelude::*;

use qpos_core::degeneracy::{jacobian, local_potential_build, sigma_j_minors, Monomial, PolyMap};
use qpos_core::geometry::{Axis, TorusModel};

fn map_strategy() -> impl Strategy<Value = (PolyMap, Vec<Complex64>)> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(n, m)| {
        let mono = (prop::collection::vec(0u32..=3, n), -2.0f64..2.0, -2.0f64..2.0)
            .prop_map(|(e, re, im)| Monomial { exponents: e, coeff: Complex64::new(re, im) });
        let comps = prop::collection::vec(prop::collection::vec(mono, 1..4), m);
        let point = prop::collection::vec((-1.5f64..1.5, -1.5f64..1.5).prop_map(|(a, b)| Complex64::new(a, b)), n);
        (comps, point).prop_map(move |(c, z)| (PolyMap::new(n, c).unwrap(), z))
    })
}

fn eigen_desc(j: &nalgebra::DMatrix<Complex64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(j.adjoint() * j).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cauchy_binet((f, z) in map_strategy()) {
        let j = jacobian(&f, &z).matrix;
        let eig = eigen_desc(&j);
        let scale = eig.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for k in 1..=f.n() {
            let s = sigma_j_minors(&j, k).unwrap();
            prop_assert!(s >= 0.0);
            prop_assert!((s - elementary(&eig, k)).abs() <= 1e-10 * scale.powi(k as i32));
        }
    }

    #[test]
    fn minors_vanish_above_rank(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        // f = (z₁ + z₂, a(z₁ + z₂), b) has rank-one Jacobian.
        let text = format!("map 2 3\n0 1 0 1\n0 0 1 1\n1 1 0 {a}\n1 0 1 {a}\n2 0 0 {b}\n");
        let f = PolyMap::parse(&text).unwrap();
        let j = jacobian(&f, &[Complex64::new(0.3, 0.1), Complex64::new(-0.7, 0.2)]).matrix;
        prop_assert!(sigma_j_minors(&j, 2).unwrap().abs() <= 1e-12);
        let sv = j.clone().svd(false, false).singular_values;
        let zero_eigs = eigen_desc(&j).iter().filter(|&&v| v.abs() <= 1e-10).count();
        let rank = sv.iter().filter(|&&s| s > 1e-8).count();
        prop_assert_eq!(zero_eigs, 2 - rank);
    }
}

#[test]
fn local_potential_is_nonnegative_and_vanishes_on_zeros() {
    let t = TorusModel::with_active_axes(1, 32, &[Axis::X(0), Axis::Y(0)]).unwrap();
    let g: Vec<Complex64> = (0..t.len())
        .map(|i| {
            let x = t.coords(i);
            Complex64::new((std::f64::consts::TAU * x[0]).sin(), (std::f64::consts::TAU * x[1]).sin())
        })
        .collect();
    let half: Vec<f64> = (0..t.len()).map(|i| 0.5 + 0.25 * (std::f64::consts::TAU * t.coords(i)[0]).cos()).collect();
    let other: Vec<f64> = half.iter().map(|h| 1.0 - h).collect();
    let ones = vec![Complex64::new(0.0, 0.0); t.len()];
    let phi = local_potential_build(&t, &[vec![g.clone()], vec![g.clone(), ones]], &[half, other]).unwrap();
    for (i, v) in phi.values().iter().enumerate() {
        assert!(*v >= 0.0);
        assert_eq!(*v == 0.0, g[i].norm() == 0.0, "point {i}");
    }
}
