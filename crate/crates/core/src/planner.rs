//! Multi-segment "staircase" schedules for detuning beyond the two-step
//! limit, and the search for the fewest switches that still transfer.
//!
//! Counting convention: a plan with `k` segments has `k - 1` switches.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bloch::{
    bloch_of, circle_through, deepest_point, descent_rate, intersection_margin, rotation_axis,
    south_approach, BlochVector, SphericalCircle,
};
use crate::dynamics::{protocol_propagator, CouplerParams, ModeState, Protocol};
use crate::error::{invalid, Error, Result};
use crate::optim::{bisect, golden_section, nelder_mead, NelderMead};

/// Candidate switch states sampled per precession circle.
pub const CANDIDATES_PER_CIRCLE: usize = 256;

/// Angular distance from the south pole treated as passing through it.
pub const SOUTH_TOLERANCE: f64 = 1e-9;

/// Slack allowed in the circle triangle inequalities.
pub const INTERSECTION_TOLERANCE: f64 = 1e-8;

const REACH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StaircasePlan {
    pub protocol: Protocol,
    /// Bloch states at the end of every segment but the last.
    pub switch_points: Vec<BlochVector>,
    /// Final `|a2|^2` starting from mode 1.
    pub achieved: f64,
    /// Number of switching events, one less than the segment count.
    pub switches: usize,
}

impl StaircasePlan {
    pub fn from_protocol(params: &CouplerParams, protocol: Protocol) -> Self {
        let mut state = ModeState::mode1();
        let mut switch_points = Vec::with_capacity(protocol.len().saturating_sub(1));
        let segs = protocol.segments();
        for (i, seg) in segs.iter().enumerate() {
            state = crate::dynamics::segment_propagator(params, seg).apply(&state);
            if i + 1 < segs.len() {
                switch_points.push(bloch_of(&state));
            }
        }
        let achieved = protocol_propagator(params, &protocol).cross_power();
        Self {
            switches: protocol.len() - 1,
            protocol,
            switch_points,
            achieved,
        }
    }

    pub fn segments(&self) -> usize {
        self.protocol.len()
    }

    /// Precession circle of every segment, each through its starting state.
    pub fn circles(&self, params: &CouplerParams) -> Vec<SphericalCircle> {
        let starts = std::iter::once(BlochVector::NORTH).chain(self.switch_points.iter().copied());
        self.protocol
            .segments()
            .iter()
            .zip(starts)
            .map(|(seg, start)| circle_through(&rotation_axis(params, seg.phase()), &start))
            .collect()
    }
}

/// `ceil(pi / (4 atan(1 / ratio)))`, approaching `pi ratio / 4` for large ratios.
pub fn min_switches_estimate(ratio: f64) -> Result<usize> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(invalid(format!("ratio must be positive and finite, got {ratio}")));
    }
    let n = PI / (4.0 * (1.0 / ratio).atan());
    // absorb rounding right at integer values such as ratio = 1
    Ok((n - 1e-12).ceil().max(1.0) as usize)
}

/// Whether each adjacent pair of circles meets.
pub fn recursive_intersection_ok(circles: &[SphericalCircle]) -> bool {
    circles.windows(2).all(|pair| {
        let d = crate::bloch::angle_between(&pair[0].center(), &pair[1].center());
        intersection_margin(pair[0].radius(), pair[1].radius(), d) >= -INTERSECTION_TOLERANCE
    })
}

/// Best coupling phase for the segment starting at `p`: the one whose orbit
/// comes closest to the south pole. When several orbits pass through it the
/// one descending fastest at `p` wins.
fn best_next_phase(params: &CouplerParams, p: &BlochVector) -> (f64, f64) {
    let beta = rotation_axis(params, 0.0).polar_angle();
    let theta = p.polar_angle();
    let azimuth = p.v.atan2(p.u);
    let (sb, cb) = beta.sin_cos();
    let (st, ct) = theta.sin_cos();

    let approach = |phi: f64| south_approach(&circle_through(&rotation_axis(params, phi), p));
    if st < 1e-12 {
        let phi = azimuth + PI;
        return (phi.rem_euclid(TAU), approach(phi));
    }
    let c = -cb * (1.0 + ct) / (sb * st);
    let phi = if c < -1.0 {
        azimuth + PI
    } else if c > 1.0 {
        azimuth
    } else {
        let spread = c.acos();
        let rate = |phi: f64| descent_rate(&rotation_axis(params, phi), p);
        let (a, b) = (azimuth + spread, azimuth - spread);
        if rate(b) > rate(a) {
            b
        } else {
            a
        }
    };
    (phi.rem_euclid(TAU), approach(phi))
}

/// Builds a staircase one segment at a time.
///
/// The first segment uses phase 0. On each circle the switch point is the
/// earliest state from which some orbit passes through the south pole, or
/// failing that the state whose best next orbit gets closest to it. The
/// last segment stops at the point nearest the south pole. With no
/// detuning a single segment suffices.
pub fn greedy_staircase(params: &CouplerParams, max_segments: usize) -> Result<StaircasePlan> {
    if params.kappa0() <= 0.0 {
        return Err(invalid("no descent is possible without coupling (kappa0 = 0)"));
    }
    if max_segments < 2 {
        return Err(invalid(format!("max_segments must be >= 2, got {max_segments}")));
    }
    let omega = params.rabi_frequency();
    let period = PI / omega;
    let south = BlochVector::SOUTH;

    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut current = BlochVector::NORTH;
    let mut phase = 0.0;
    loop {
        let axis = rotation_axis(params, phase);
        let circle = circle_through(&axis, &current);
        if south_approach(&circle) <= SOUTH_TOLERANCE {
            pairs.push((phase, axis.time_between(&current, &south)));
            break;
        }
        if pairs.len() + 1 == max_segments {
            let deepest = BlochVector::from_vector(&deepest_point(&circle));
            pairs.push((phase, axis.time_between(&current, &deepest)));
            break;
        }

        let start = current;
        let at = |t: f64| crate::bloch::bloch_precess(&axis, &start, t);
        let score = |t: f64| best_next_phase(params, &at(t)).1;
        let h = period / CANDIDATES_PER_CIRCLE as f64;
        let scores: Vec<f64> = (1..CANDIDATES_PER_CIRCLE).map(|k| score(k as f64 * h)).collect();

        let switch_time = match scores.iter().position(|&s| s <= REACH_TOLERANCE) {
            Some(k) => {
                let hi = (k + 1) as f64 * h;
                bisect(|t| REACH_TOLERANCE - score(t), hi - h, hi, 1e-15 * period)
            }
            None => {
                let k = scores
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k + 1)
                    .expect("candidates are sampled");
                let (lo, hi) = ((k - 1) as f64 * h, (k + 1) as f64 * h);
                golden_section(score, lo, hi, 1e-13 * period).0
            }
        };

        pairs.push((phase, switch_time));
        current = at(switch_time);
        phase = best_next_phase(params, &current).0;
    }

    let protocol = Protocol::from_pairs(&pairs)?;
    Ok(StaircasePlan::from_protocol(params, protocol))
}

fn plan_from_vector(params: &CouplerParams, x: &[f64]) -> Option<StaircasePlan> {
    let k = x.len() / 2;
    let omega = params.rabi_frequency();
    let pairs: Vec<(f64, f64)> = (0..k).map(|i| (x[i], x[k + i].abs() / omega)).collect();
    Protocol::from_pairs(&pairs)
        .ok()
        .map(|p| StaircasePlan::from_protocol(params, p))
}

fn plan_vector(params: &CouplerParams, plan: &StaircasePlan) -> Vec<f64> {
    let segs = plan.protocol.segments();
    segs.iter()
        .map(|s| s.phase())
        .chain(segs.iter().map(|s| params.rabi_frequency() * s.duration()))
        .collect()
}

fn residual(params: &CouplerParams, x: &[f64]) -> f64 {
    let k = x.len() / 2;
    let omega = params.rabi_frequency();
    let mut m = crate::dynamics::TransferMatrix::identity();
    for i in 0..k {
        let seg = crate::dynamics::propagator_for(params, x[i], x[k + i].abs() / omega);
        m = seg.then_after(&m);
    }
    1.0 - m.cross_power()
}

fn refine_from(params: &CouplerParams, x0: &[f64], step: f64) -> Option<StaircasePlan> {
    let opts = NelderMead {
        f_tol: 1e-18,
        x_tol: 1e-12,
        ..NelderMead::default()
    };
    let m = nelder_mead(|x| residual(params, x), x0, &vec![step; x0.len()], &opts);
    plan_from_vector(params, &m.x)
}

/// Local derivative-free polish of all phases and durations, minimizing
/// `1 - |a2|^2`. The input plan is returned when nothing better is found.
pub fn refine_plan(params: &CouplerParams, plan: &StaircasePlan) -> StaircasePlan {
    if plan.achieved >= 1.0 - 1e-15 {
        return plan.clone();
    }
    let x0 = plan_vector(params, plan);
    match refine_from(params, &x0, 0.05) {
        Some(better) if better.achieved > plan.achieved => better,
        _ => plan.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Final `|a2|^2` counted as complete transfer.
    pub threshold: f64,
    pub seed: u64,
    /// Random starting plans tried per segment count (at least 8 are used).
    pub restarts: usize,
    /// Largest segment count tried; defaults to `4 * estimate + 4`.
    pub cap: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            threshold: 0.99,
            seed: 0,
            restarts: 8,
            cap: None,
        }
    }
}

/// Best transfer reached with a given number of segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountRecord {
    pub segments: usize,
    pub achieved: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSearch {
    pub plan: StaircasePlan,
    /// One record per segment count tried, in increasing order.
    pub log: Vec<CountRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchFailure {
    pub cap: usize,
    pub best: StaircasePlan,
    pub log: Vec<CountRecord>,
}

/// Transfer values closer than this are treated as equal when ranking plans.
const ACHIEVED_TIE: f64 = 1e-12;

fn better(a: &StaircasePlan, b: &StaircasePlan) -> bool {
    if (a.achieved - b.achieved).abs() > ACHIEVED_TIE {
        return a.achieved > b.achieved;
    }
    if a.segments() != b.segments() {
        return a.segments() < b.segments();
    }
    a.protocol.total_duration() < b.protocol.total_duration()
}

fn random_start(params: &CouplerParams, segments: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; 2 * segments];
    for v in x.iter_mut().take(segments).skip(1) {
        *v = rng.random_range(0.0..TAU);
    }
    for v in x.iter_mut().skip(segments) {
        *v = rng.random_range(0.05..PI);
    }
    let _ = params;
    x
}

fn mix_seed(seed: u64, segments: usize, restart: usize) -> u64 {
    seed ^ ((segments as u64) << 32) ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Best plan over the greedy construction and the random restarts for a
/// fixed segment count. The reduction is order-independent.
fn best_with_segments(
    params: &CouplerParams,
    segments: usize,
    config: &SearchConfig,
) -> Result<StaircasePlan> {
    let greedy = greedy_staircase(params, segments)?;
    let greedy = refine_plan(params, &greedy);
    let restarts = config.restarts.max(8);
    let candidates: Vec<StaircasePlan> = (0..restarts)
        .into_par_iter()
        .filter_map(|i| {
            let x0 = random_start(params, segments, mix_seed(config.seed, segments, i));
            refine_from(params, &x0, 0.5)
        })
        .collect();
    Ok(candidates
        .into_iter()
        .fold(greedy, |best, c| if better(&c, &best) { c } else { best }))
}

/// Finds the fewest segments reaching `config.threshold`, starting at two.
pub fn minimal_plan_search(params: &CouplerParams, config: &SearchConfig) -> Result<PlanSearch> {
    if params.kappa0() <= 0.0 {
        return Err(invalid("planning needs kappa0 > 0"));
    }
    if !(config.threshold > 0.0 && config.threshold <= 1.0) {
        return Err(invalid(format!("threshold must lie in (0, 1], got {}", config.threshold)));
    }
    let ratio = params.ratio().abs();
    let estimate = if ratio > 0.0 { min_switches_estimate(ratio)? } else { 1 };
    let cap = config.cap.unwrap_or(4 * estimate + 4).max(2);

    let mut log = Vec::new();
    let mut best: Option<StaircasePlan> = None;
    for segments in 2..=cap {
        let plan = best_with_segments(params, segments, config)?;
        log.push(CountRecord {
            segments,
            achieved: plan.achieved,
        });
        if plan.achieved >= config.threshold {
            return Ok(PlanSearch { plan, log });
        }
        if best.as_ref().is_none_or(|b| better(&plan, b)) {
            best = Some(plan);
        }
    }
    Err(Error::SearchExhausted(Box::new(SearchFailure {
        cap,
        best: best.expect("at least one count is tried"),
        log,
    })))
}

/// Rigorous lower bound on the segment count needed to reach `|a2|^2 >= threshold`:
/// a single segment can raise the polar angle by at most twice the axis tilt.
pub fn segment_lower_bound(params: &CouplerParams, threshold: f64) -> Result<usize> {
    if params.kappa0() <= 0.0 {
        return Err(invalid("bound needs kappa0 > 0"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(invalid(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let beta = rotation_axis(params, 0.0).polar_angle();
    let tilt = beta.min(PI - beta);
    // w = 1 - 2 |a2|^2 = cos(theta)
    let needed = (1.0 - 2.0 * threshold).clamp(-1.0, 1.0).acos();
    Ok(((needed / (2.0 * tilt)) - 1e-12).ceil().max(1.0) as usize)
}
