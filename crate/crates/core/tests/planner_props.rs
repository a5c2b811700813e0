use std::f64::consts::PI;

use pcmod::bloch::to_bloch;
use pcmod::dynamics::propagate;
use pcmod::oracle::{integrate, IntegrationConfig};
use pcmod::planner::{
    greedy_staircase, min_switches_estimate, minimal_plan_search, recursive_intersection_ok,
    segment_lower_bound, SearchConfig,
};
use pcmod::transfer::pushpull_times;
use pcmod::{CouplerParams, ModeState, Protocol};
use proptest::prelude::*;

fn plan_checks(p: &CouplerParams, plan: &pcmod::StaircasePlan) -> Result<(), TestCaseError> {
    prop_assert!(recursive_intersection_ok(&plan.circles(p)));
    prop_assert!((0.0..=1.0 + 1e-12).contains(&plan.achieved));
    let end = integrate(p, &plan.protocol, &ModeState::mode1(), &IntegrationConfig::default_for(p)).unwrap();
    prop_assert!((end.mode2_power() - plan.achieved).abs() <= 1e-8);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn greedy_plans_are_sound(ratio in prop_oneof![0.05..1.0f64, 1.0..6.0f64, -6.0..-0.05f64]) {
        let p = CouplerParams::from_ratio(ratio).unwrap();
        let plan = greedy_staircase(&p, 64).unwrap();
        plan_checks(&p, &plan)?;
        prop_assert!(plan.achieved >= 1.0 - 1e-9);
        prop_assert_eq!(plan.segments(), segment_lower_bound(&p, 1.0).unwrap().max(2));
        prop_assert_eq!(plan.switch_points.len(), plan.switches);

        // running minimum of w drops on every segment
        let mut state = ModeState::mode1();
        let mut running = 1.0;
        for seg in plan.protocol.segments() {
            let one = Protocol::new(vec![*seg]).unwrap();
            let samples = propagate(&p, &one, &state, 400).unwrap();
            let lowest = samples
                .iter()
                .map(|(_, s)| to_bloch(s).unwrap().w)
                .fold(f64::INFINITY, f64::min);
            prop_assert!(lowest < running);
            running = lowest;
            state = samples.last().unwrap().1;
        }
    }

    #[test]
    fn truncated_greedy_plans_are_sound(ratio in 1.5..6.0f64, cap in 2usize..5) {
        let p = CouplerParams::from_ratio(ratio).unwrap();
        let plan = greedy_staircase(&p, cap).unwrap();
        prop_assert_eq!(plan.segments(), cap);
        plan_checks(&p, &plan)?;
    }
}

#[test]
fn search_in_two_step_region_uses_two_segments() {
    for ratio in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
        let p = CouplerParams::from_ratio(ratio).unwrap();
        let found = minimal_plan_search(&p, &SearchConfig::default()).unwrap();
        assert_eq!(found.plan.segments(), 2, "ratio {ratio}");
        if ratio < 1.0 {
            let pp = pushpull_times(&p).unwrap();
            assert!((found.plan.achieved - pp.achieved).abs() <= 1e-9, "ratio {ratio}");
        }
    }
}

#[test]
fn search_matches_lower_bound_and_is_monotone() {
    let mut last = 0;
    for k in 0..=10 {
        let ratio = 1.0 + 0.5 * k as f64;
        let p = CouplerParams::from_ratio(ratio).unwrap();
        let found = minimal_plan_search(&p, &SearchConfig::default()).unwrap();
        assert!(found.plan.achieved >= 0.99);
        assert_eq!(found.plan.segments(), segment_lower_bound(&p, 0.99).unwrap().max(2));
        assert!(found.plan.switches >= last);
        last = found.plan.switches;
        assert!(found.log.iter().all(|r| r.segments < found.plan.segments() || r.achieved >= 0.99));
    }
}

#[test]
fn search_is_deterministic() {
    let p = CouplerParams::from_ratio(2.5).unwrap();
    let cfg = SearchConfig { seed: 9, ..SearchConfig::default() };
    let a = minimal_plan_search(&p, &cfg).unwrap();
    let b = minimal_plan_search(&p, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn estimate_tracks_asymptote() {
    assert_eq!(min_switches_estimate(1.0).unwrap(), 1);
    for ratio in [4.0, 4.5, 5.0, 5.5, 6.0, 8.0, 10.0, 20.0] {
        let est = min_switches_estimate(ratio).unwrap() as f64;
        assert!((est - PI * ratio / 4.0).abs() <= 1.0, "ratio {ratio}");
    }
    // atan(1/r) < 1/r puts the exact quotient above pi r / 4 by at most pi / (12 r)
    for k in 0..20_000 {
        let ratio = 4.0 + 0.001 * k as f64;
        let gap = min_switches_estimate(ratio).unwrap() as f64 - PI * ratio / 4.0;
        assert!(gap >= 0.0 && gap < 1.0 + PI / (12.0 * ratio), "ratio {ratio}");
    }
}

#[test]
fn estimate_can_overshoot_asymptote_by_more_than_one() {
    let est = min_switches_estimate(14.0).unwrap();
    assert_eq!(est, 12);
    assert!(est as f64 - PI * 14.0 / 4.0 > 1.0);
}
