use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use qpos_core::surface_cones::{
    is_cohomologically_1ample, is_pseudoeffective, positive_pairing_witness, DivisorClass, SurfaceLattice,
};

fn class(a: (i64, i64), b: (i64, i64)) -> DivisorClass {
    DivisorClass::new(vec![
        BigRational::new(BigInt::from(a.0), BigInt::from(a.1)),
        BigRational::new(BigInt::from(b.0), BigInt::from(b.1)),
    ])
}

fn zero() -> BigRational {
    BigRational::from_integer(BigInt::from(0))
}

fn ratio() -> impl Strategy<Value = (i64, i64)> {
    (-30i64..=30, 1i64..=9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn duality_and_witness_validity(a in ratio(), b in ratio(), f1 in any::<bool>()) {
        let lat = if f1 { SurfaceLattice::hirzebruch_f1() } else { SurfaceLattice::p1_x_p1() };
        let l = class(a, b);
        let ample = is_cohomologically_1ample(&l, &lat).unwrap();
        let witness = positive_pairing_witness(&l, &lat);
        prop_assert_eq!(ample, witness.is_some());
        if let Some(h) = witness {
            prop_assert!(lat.pairing(&l, &h) > zero());
            prop_assert!(lat.is_nef_interior(&h));
            for e in lat.effective_generators() {
                prop_assert!(lat.pairing(&h, e) > zero());
            }
        }
        // Deterministic: a second call gives the same answer.
        prop_assert_eq!(ample, is_cohomologically_1ample(&l, &lat).unwrap());
    }

    #[test]
    fn pseff_matches_closed_form_on_p1xp1(a in ratio(), b in ratio()) {
        let l = class(a, b);
        let want = a.0 >= 0 && b.0 >= 0;
        prop_assert_eq!(is_pseudoeffective(&l, &SurfaceLattice::p1_x_p1()).unwrap(), want);
    }
}

#[test]
fn worked_classes() {
    let p = SurfaceLattice::p1_x_p1();
    let l = DivisorClass::from_ints(&[1, -1]);
    assert!(is_cohomologically_1ample(&l, &p).unwrap());
    assert_eq!(positive_pairing_witness(&l, &p).unwrap(), DivisorClass::from_ints(&[1, 2]));
    assert!(!is_cohomologically_1ample(&DivisorClass::from_ints(&[-1, 0]), &p).unwrap());
    assert!(!is_cohomologically_1ample(&DivisorClass::zero(2), &p).unwrap());
}
