use std::f64::consts::PI;

use pcmod::bloch::{feasibility_boundary, two_step_feasible};
use pcmod::dynamics::{protocol_propagator, state_at};
use pcmod::oracle::{integrate_propagator, max_entry_difference, IntegrationConfig};
use pcmod::transfer::{
    max_two_step_transfer, pushpull_times, solve_fraction, solve_two_step, transfer_map,
};
use pcmod::{CouplerParams, ModeState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn in_band(ratio: f64, phi: f64) -> bool {
    (phi.cos() - (1.0 - 2.0 * ratio * ratio)).abs() < 0.01
}

#[test]
fn criterion_matches_brute_force_on_grid() {
    let n = 50;
    let (mut agree, mut counted) = (0, 0);
    for i in 0..n {
        let ratio = i as f64 / (n - 1) as f64;
        let p = CouplerParams::from_ratio(ratio).unwrap();
        for j in 0..n {
            let phi = PI * j as f64 / (n - 1) as f64;
            if in_band(ratio, phi) {
                continue;
            }
            counted += 1;
            let brute = max_two_step_transfer(&p, phi).achieved >= 1.0 - 1e-6;
            if brute == two_step_feasible(&p, phi) {
                agree += 1;
            }
        }
    }
    assert_eq!(agree, counted, "{agree} of {counted} cells agree");
}

#[test]
fn solver_agrees_with_criterion() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 500 {
        let ratio = rng.random_range(0.0..1.0);
        let phi = rng.random_range(0.0..PI);
        if in_band(ratio, phi) {
            continue;
        }
        checked += 1;
        let p = CouplerParams::from_ratio(ratio).unwrap();
        let out = solve_two_step(&p, phi).unwrap();
        assert_eq!(out.is_feasible(), two_step_feasible(&p, phi), "ratio {ratio} phi {phi}");
        if out.is_feasible() {
            let proto = out.solution().protocol().unwrap();
            assert!(protocol_propagator(&p, &proto).d().norm() <= 1e-9);
        }
    }
}

#[test]
fn boundary_phases_are_solved() {
    for k in 1..20 {
        let ratio = k as f64 / 20.0;
        let p = CouplerParams::from_ratio(ratio).unwrap();
        let phi = feasibility_boundary(ratio).unwrap();
        let out = solve_two_step(&p, phi).unwrap();
        assert!(out.is_feasible(), "ratio {ratio}: {out:?}");
    }
}

#[test]
fn pushpull_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..100 {
        let ratio = rng.random_range(0.0..0.99);
        let p = CouplerParams::from_ratio(ratio).unwrap();
        let proto = pushpull_times(&p).unwrap().protocol().unwrap();
        assert!(protocol_propagator(&p, &proto).d().norm() <= 1e-9, "ratio {ratio}");
    }
}

#[test]
fn pushpull_confirmed_by_integration() {
    let p = CouplerParams::from_ratio(0.5).unwrap();
    let proto = pushpull_times(&p).unwrap().protocol().unwrap();
    let rk = integrate_propagator(&p, &proto, &IntegrationConfig::default_for(&p)).unwrap();
    assert!(max_entry_difference(&rk, &protocol_propagator(&p, &proto).entries()) <= 1e-8);
    assert!(rk[(1, 0)].norm_sqr() >= 1.0 - 1e-8);
}

#[test]
fn map_agrees_with_solver() {
    for (ratio, phi) in [(0.3, 2.0), (0.5, PI), (0.8, 2.9)] {
        let p = CouplerParams::from_ratio(ratio).unwrap();
        let n = 129;
        let map = transfer_map(&p, phi, n).unwrap();
        let sol = *solve_two_step(&p, phi).unwrap().solution();
        let (x1, x2) = sol.scaled_times(&p);
        let (i, j) = ((x1 * (n - 1) as f64).round() as usize, (x2 * (n - 1) as f64).round() as usize);
        // half a cell in each direction around a maximum
        let h = PI / (n - 1) as f64;
        assert!((map.values[i][j] - sol.achieved).abs() <= h * h, "{ratio} {phi}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fraction_stops_at_first_crossing(ratio in 0.0..0.95f64, target in 0.01..0.999f64) {
        let p = CouplerParams::from_ratio(ratio).unwrap();
        let sched = solve_fraction(&p, PI, target).unwrap();
        prop_assert!((sched.achieved - target).abs() <= 1e-9);
        let full = pushpull_times(&p).unwrap().protocol().unwrap();
        for k in 0..500 {
            let t = sched.stop_time * k as f64 / 500.0;
            let v = state_at(&p, &full, &ModeState::mode1(), t).mode2_power();
            prop_assert!(v < target);
        }
    }
}
