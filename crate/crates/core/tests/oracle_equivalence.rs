use std::f64::consts::TAU;

use num_complex::Complex64;
use pcmod::dynamics::{protocol_propagator, segment_propagator};
use pcmod::oracle::{
    evolution_operator, generator, integrate, integrate_propagator, max_entry_difference,
    IntegrationConfig,
};
use pcmod::{CouplerParams, CouplingSegment, Error, ModeState, Protocol};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_protocol(rng: &mut ChaCha8Rng, omega: f64, quantum: Option<f64>) -> Protocol {
    let n = rng.random_range(1..=8);
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let t = match quantum {
                Some(q) => rng.random_range(4..=40) as f64 * q,
                None => rng.random_range(0.05..3.0) / omega,
            };
            (rng.random_range(0.0..TAU), t)
        })
        .collect();
    Protocol::from_pairs(&pairs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rk4_matches_closed_form(
        delta in -3.0..3.0f64,
        kappa in 0.1..2.0f64,
        pairs in prop::collection::vec((0.0..TAU, 0.01..1.2f64), 1..=8),
    ) {
        let p = CouplerParams::new(delta, kappa).unwrap();
        let omega = p.rabi_frequency();
        let pairs: Vec<_> = pairs.into_iter().map(|(phi, x)| (phi, x / omega)).collect();
        let proto = Protocol::from_pairs(&pairs).unwrap();
        let cfg = IntegrationConfig::default_for(&p);
        let rk = integrate_propagator(&p, &proto, &cfg).unwrap();
        let exact = protocol_propagator(&p, &proto).entries();
        prop_assert!(max_entry_difference(&rk, &exact) <= 1e-8);
    }
}

#[test]
fn series_exponential_matches_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let p = CouplerParams::new(rng.random_range(-5.0..5.0), rng.random_range(0.0..3.0) + 1e-3).unwrap();
        let phi = rng.random_range(0.0..TAU);
        let t = rng.random_range(0.0..20.0);
        let h = generator(&p, phi);
        assert_eq!(h[(0, 0)] + h[(1, 1)], Complex64::new(0.0, 0.0));
        assert_eq!(h[(0, 1)], h[(1, 0)].conj());
        let series = evolution_operator(&h, t);
        let exact = segment_propagator(&p, &CouplingSegment::new(phi, t).unwrap()).entries();
        assert!(max_entry_difference(&series, &exact) <= 1e-10);
    }
}

#[test]
fn fourth_order_convergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let p = CouplerParams::new(rng.random_range(-2.0..2.0), rng.random_range(0.2..2.0)).unwrap();
        let omega = p.rabi_frequency();
        let coarse = IntegrationConfig::new(0.05 / omega).unwrap();
        let proto = random_protocol(&mut rng, omega, Some(coarse.step()));
        let exact = protocol_propagator(&p, &proto).entries();
        let errors: Vec<f64> = [coarse, coarse.halved(), coarse.halved().halved()]
            .iter()
            .map(|c| max_entry_difference(&integrate_propagator(&p, &proto, c).unwrap(), &exact))
            .collect();
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((12.0..=20.0).contains(&ratio), "ratio {ratio} from {errors:?}");
        }
    }
}

#[test]
fn default_step_keeps_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let p = CouplerParams::new(rng.random_range(-2.0..2.0), rng.random_range(0.2..2.0)).unwrap();
        let omega = p.rabi_frequency();
        let proto = Protocol::from_pairs(&[(0.0, 4.0 * std::f64::consts::PI / omega), (2.0, std::f64::consts::PI / omega)]).unwrap();
        let end = integrate(&p, &proto, &ModeState::mode1(), &IntegrationConfig::default_for(&p)).unwrap();
        assert!((end.norm_sqr() - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn coarse_step_is_rejected() {
    let p = CouplerParams::from_ratio(1.0).unwrap();
    let cfg = IntegrationConfig::new(0.2 / p.rabi_frequency()).unwrap();
    let proto = Protocol::from_pairs(&[(0.0, 1.0)]).unwrap();
    assert!(matches!(
        integrate(&p, &proto, &ModeState::mode1(), &cfg),
        Err(Error::StepTooLarge(_))
    ));
}
