use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use pcmod::isolator::{
    cascade, closed_form_power, cross_transmission_power, stage_closed_form_power,
};
use pcmod::{Direction, IsolatorSpec, TransferMatrix};
use proptest::prelude::*;

fn stage_strategy() -> impl Strategy<Value = TransferMatrix> {
    (0.0..1.0f64, 0.0..TAU, 0.0..TAU).prop_map(|(p, a, b)| {
        TransferMatrix::new(Complex64::from_polar(p.sqrt(), a), Complex64::from_polar((1.0 - p).sqrt(), b))
            .unwrap()
    })
}

fn real_stage_strategy() -> impl Strategy<Value = TransferMatrix> {
    (0.0..1.0f64, any::<bool>(), 0.0..TAU).prop_map(|(p, neg, b)| {
        let d = if neg { -p.sqrt() } else { p.sqrt() };
        TransferMatrix::new(Complex64::new(d, 0.0), Complex64::from_polar((1.0 - p).sqrt(), b)).unwrap()
    })
}

const DIRS: [Direction; 2] = [Direction::Forward, Direction::Backward];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matrix_matches_closed_form(stage in stage_strategy(), t1 in -PI..PI, t2 in -PI..PI, delta in -PI..PI) {
        let spec = IsolatorSpec::new(stage, t1, t2, delta).unwrap();
        for dir in DIRS {
            prop_assert!((cross_transmission_power(&spec, dir) - stage_closed_form_power(&spec, dir)).abs() <= 1e-12);
        }
    }

    #[test]
    fn real_stage_matches_textbook_form(stage in real_stage_strategy(), t1 in -PI..PI, t2 in -PI..PI, delta in -PI..PI) {
        let spec = IsolatorSpec::new(stage, t1, t2, delta).unwrap();
        for dir in DIRS {
            let lit = closed_form_power(stage.d().norm_sqr(), spec.delta_theta(), delta, dir);
            prop_assert!((cross_transmission_power(&spec, dir) - lit).abs() <= 1e-12);
        }
    }

    #[test]
    fn cascades_are_unitary(stage in stage_strategy(), t1 in -PI..PI, t2 in -PI..PI, delta in -PI..PI) {
        let spec = IsolatorSpec::new(stage, t1, t2, delta).unwrap();
        for dir in DIRS {
            let m = cascade(&spec, dir);
            let gram = m.adjoint() * m;
            prop_assert!((gram - nalgebra::Matrix2::identity()).iter().all(|z| z.norm() <= 1e-12));
            prop_assert!((m[(0, 0)].norm_sqr() + m[(0, 1)].norm_sqr() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn reciprocity_is_restored(stage in real_stage_strategy(), t in -PI..PI, k in 0usize..4, offset_line in any::<bool>()) {
        let special = [0.0, PI, TAU, -PI][k];
        let (dtheta, delta) = if offset_line { (t, special) } else { (special, t) };
        let spec = IsolatorSpec::new(stage, dtheta, 0.0, delta).unwrap();
        let f = cross_transmission_power(&spec, Direction::Forward);
        let b = cross_transmission_power(&spec, Direction::Backward);
        prop_assert!((f - b).abs() <= 1e-12);
    }

    #[test]
    fn offset_sign_swaps_directions(stage in stage_strategy(), t in -PI..PI, delta in -PI..PI) {
        let a = IsolatorSpec::new(stage, t, 0.0, delta).unwrap();
        let b = IsolatorSpec::new(stage, t, 0.0, -delta).unwrap();
        let fa = cross_transmission_power(&a, Direction::Forward);
        let bb = cross_transmission_power(&b, Direction::Backward);
        prop_assert!((fa - bb).abs() <= 1e-12);
    }
}
