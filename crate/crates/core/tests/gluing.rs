use std::f64::consts::PI;

use proptest::prelude::*;

use qpos_core::calculus::PotentialField;
use qpos_core::geometry::{ConstantHermitianClass, TorusModel};
use qpos_core::gluing::{dilate, glue_max, region_v, regularized_max, SingularPotential};

fn torus() -> TorusModel {
    TorusModel::new(1, 32).unwrap()
}

fn wave(t: &TorusModel, a: f64, b: f64, p: f64) -> PotentialField {
    PotentialField::from_fn(t, |x| a * (2.0 * PI * x[0]).cos() + b * (2.0 * PI * (x[1] + p)).sin())
}

fn singular(t: &TorusModel) -> SingularPotential {
    let values: Vec<f64> = (0..t.len())
        .map(|i| {
            let x = t.coords(i);
            ((PI * x[0]).sin().powi(2) + (PI * x[1]).sin().powi(2)).ln()
        })
        .collect();
    let mask: Vec<bool> = values.iter().map(|v| !v.is_finite()).collect();
    SingularPotential::new(t, values, mask, ConstantHermitianClass::identity(1)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sandwich(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0, eps in 1e-4f64..1.0) {
        let t = torus();
        let u = wave(&t, a, b, 0.0);
        let v = wave(&t, c, d, 0.3);
        let m = regularized_max(&u, &v, eps).unwrap();
        for ((x, y), r) in u.values().iter().zip(v.values()).zip(m.values()) {
            let lo = x.max(*y);
            prop_assert!(lo <= *r && *r <= lo + eps * 2f64.ln());
        }
    }

    #[test]
    fn threshold_is_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0, c1 in -3.0f64..6.0, dc in 0.0f64..4.0) {
        let t = torus();
        let phi_b = wave(&t, a, b, 0.1);
        let s = singular(&t);
        let small = region_v(&phi_b, &s, c1);
        let large = region_v(&phi_b, &s, c1 + dc);
        prop_assert!(large.iter().zip(&small).all(|(l, s)| !*l || *s));
    }

    #[test]
    fn branches_are_exact(a in -1.0f64..1.0, b in -1.0f64..1.0, k in 0i32..4) {
        let t = torus();
        let phi_b = wave(&t, a, b, 0.2);
        let s = singular(&t);
        let c = 2f64.powi(k);
        let u = dilate(&t, s.pole_mask(), 4);
        let g = glue_max(&phi_b, c, &s, u.clone()).unwrap();
        for p in 0..t.len() {
            let got = g.psi.values()[p];
            if g.region_v[p] {
                prop_assert_eq!(got.to_bits(), (phi_b.values()[p] - c).to_bits());
            } else if s.values()[p] > phi_b.values()[p] - c {
                prop_assert_eq!(got.to_bits(), s.values()[p].to_bits());
            }
        }
    }
}
