//! Two-segment switching schedules for complete or partial transfer, plus
//! the efficiency and feasibility maps over the schedule parameters.
//!
//! Both segments use the same coupling magnitude. The first segment has
//! phase 0 and the second phase `phi`; only the difference matters.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::bloch::{
    circle_intersection, circle_through, rotation_axis, two_step_feasible, BlochVector,
    CircleIntersection,
};
use crate::dynamics::{
    propagator_for, state_at, static_max_transfer, CouplerParams, CouplingSegment, ModeState,
    Protocol,
};
use crate::error::{invalid, Error, Result};
use crate::optim::{bisect, nelder_mead, NelderMead};

/// Largest `|D|` of the composite propagator accepted as complete transfer.
pub const COMPLETE_TOLERANCE: f64 = 1e-9;

/// Grid used to seed the search for the best partial transfer.
const SEED_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStepSolution {
    pub t1: f64,
    pub t2: f64,
    /// Relative phase of the second segment.
    pub phi: f64,
    /// Final `|a2|^2` starting from mode 1.
    pub achieved: f64,
}

impl TwoStepSolution {
    fn evaluate(params: &CouplerParams, t1: f64, t2: f64, phi: f64) -> Self {
        Self {
            t1,
            t2,
            phi,
            achieved: two_step_transfer(params, t1, t2, phi),
        }
    }

    pub fn protocol(&self) -> Result<Protocol> {
        Protocol::from_pairs(&[(0.0, self.t1), (self.phi, self.t2)])
    }

    /// Durations as `(W t1 / pi, W t2 / pi)`.
    pub fn scaled_times(&self, params: &CouplerParams) -> (f64, f64) {
        (params.scaled_time(self.t1), params.scaled_time(self.t2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TwoStepOutcome {
    /// Schedule reaching mode 2 with `|D| <= 1e-9`.
    Feasible(TwoStepSolution),
    /// Complete transfer is impossible; carries the best schedule found.
    Infeasible(TwoStepSolution),
}

impl TwoStepOutcome {
    pub fn solution(&self) -> &TwoStepSolution {
        match self {
            TwoStepOutcome::Feasible(s) | TwoStepOutcome::Infeasible(s) => s,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, TwoStepOutcome::Feasible(_))
    }
}

/// `|a2|^2` after two segments `(0, t1)` and `(phi, t2)` from mode 1.
pub fn two_step_transfer(params: &CouplerParams, t1: f64, t2: f64, phi: f64) -> f64 {
    let m1 = propagator_for(params, 0.0, t1);
    let m2 = propagator_for(params, phi, t2);
    m2.then_after(&m1).cross_power()
}

fn composite_d(params: &CouplerParams, t1: f64, t2: f64, phi: f64) -> f64 {
    let m1 = propagator_for(params, 0.0, t1);
    let m2 = propagator_for(params, phi, t2);
    m2.then_after(&m1).d().norm()
}

/// Closed-form push-pull schedule (`phi = pi`):
/// `W t1 = atan(W / sqrt(kappa0^2 - delta^2))` and `W t2 = pi - W t1`.
///
/// The first segment always ends on the equator, so the pair meets at
/// exactly half the power in each mode.
pub fn pushpull_times(params: &CouplerParams) -> Result<TwoStepSolution> {
    let (delta, kappa0) = (params.delta(), params.kappa0());
    if delta.abs() >= kappa0 {
        return Err(Error::Infeasible(format!(
            "push-pull needs |delta| < kappa0 (got delta/kappa0 = {}); use the multi-step planner",
            params.ratio()
        )));
    }
    let omega = params.rabi_frequency();
    let theta1 = (omega / (kappa0 * kappa0 - delta * delta).sqrt()).atan();
    let theta2 = PI - theta1;
    Ok(TwoStepSolution::evaluate(params, theta1 / omega, theta2 / omega, PI))
}

/// Switch point built from the intersection of the orbit through the north
/// pole (axis at phase 0) with the orbit through the south pole (axis at
/// phase `phi`). Among several intersections the one reached first wins,
/// ties going to the shorter second segment.
fn geometric_two_step(params: &CouplerParams, phi: f64) -> Option<TwoStepSolution> {
    let first = rotation_axis(params, 0.0);
    let second = rotation_axis(params, phi);
    let north = BlochVector::NORTH;
    let south = BlochVector::SOUTH;
    let c1 = circle_through(&first, &north);
    let c2 = circle_through(&second, &south);

    let switch_points = match circle_intersection(&c1, &c2) {
        CircleIntersection::None => return None,
        CircleIntersection::Coincident => vec![north.to_vector()],
        CircleIntersection::Tangent(p) => vec![p],
        CircleIntersection::Two(p, q) => vec![p, q],
    };

    switch_points
        .iter()
        .map(|p| {
            let p = BlochVector::from_vector(p);
            let t1 = first.time_between(&north, &p);
            let t2 = second.time_between(&p, &south);
            (t1, t2)
        })
        .min_by(|a, b| {
            if (a.0 - b.0).abs() <= 1e-12 {
                a.1.total_cmp(&b.1)
            } else {
                a.0.total_cmp(&b.0)
            }
        })
        .map(|(t1, t2)| TwoStepSolution::evaluate(params, t1, t2, phi))
}

/// Numeric fallback: drive `|D|` to zero from a starting schedule.
fn polish_root(params: &CouplerParams, start: &TwoStepSolution) -> TwoStepSolution {
    let omega = params.rabi_frequency();
    let f = |x: &[f64]| {
        let d = composite_d(params, x[0] / omega, x[1] / omega, start.phi);
        d * d
    };
    let x0 = [start.t1 * omega, start.t2 * omega];
    let opts = NelderMead {
        f_tol: 1e-30,
        x_tol: 1e-15,
        ..NelderMead::default()
    };
    let m = nelder_mead(f, &x0, &[0.05, 0.05], &opts);
    TwoStepSolution::evaluate(
        params,
        m.x[0].rem_euclid(PI) / omega,
        m.x[1].rem_euclid(PI) / omega,
        start.phi,
    )
}

/// Best two-segment transfer for a fixed relative phase, found by a grid
/// over `W t1, W t2` in `[0, pi)` refined with Nelder-Mead from the best cells.
pub fn max_two_step_transfer(params: &CouplerParams, phi: f64) -> TwoStepSolution {
    let omega = params.rabi_frequency();
    let n = SEED_GRID;
    let step = PI / n as f64;
    let mut cells: Vec<(f64, f64, f64)> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let (x1, x2) = (i as f64 * step, j as f64 * step);
            (two_step_transfer(params, x1 / omega, x2 / omega, phi), x1, x2)
        })
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));

    let f = |x: &[f64]| -two_step_transfer(params, x[0] / omega, x[1] / omega, phi);
    let opts = NelderMead {
        f_tol: 1e-15,
        x_tol: 1e-10,
        ..NelderMead::default()
    };
    cells
        .iter()
        .take(4)
        .map(|&(_, x1, x2)| nelder_mead(f, &[x1, x2], &[step / 2.0, step / 2.0], &opts))
        .map(|m| {
            TwoStepSolution::evaluate(
                params,
                m.x[0].rem_euclid(PI) / omega,
                m.x[1].rem_euclid(PI) / omega,
                phi,
            )
        })
        .max_by(|a, b| a.achieved.total_cmp(&b.achieved))
        .expect("seed list is non-empty")
}

/// Solves for a complete two-segment transfer at relative phase `phi`.
///
/// The switch point comes from the spherical construction; if the resulting
/// schedule misses the `1e-9` target (near tangency) it is polished
/// numerically. When the orbits do not meet, the best partial transfer is
/// returned as [`TwoStepOutcome::Infeasible`].
pub fn solve_two_step(params: &CouplerParams, phi: f64) -> Result<TwoStepOutcome> {
    if params.kappa0() <= 0.0 {
        return Err(invalid("two-step transfer needs kappa0 > 0"));
    }
    match geometric_two_step(params, phi) {
        Some(sol) if composite_d(params, sol.t1, sol.t2, phi) <= COMPLETE_TOLERANCE => {
            Ok(TwoStepOutcome::Feasible(sol))
        }
        Some(sol) => {
            let polished = polish_root(params, &sol);
            let best = if polished.achieved > sol.achieved { polished } else { sol };
            if composite_d(params, best.t1, best.t2, phi) <= COMPLETE_TOLERANCE {
                Ok(TwoStepOutcome::Feasible(best))
            } else {
                Ok(TwoStepOutcome::Infeasible(best))
            }
        }
        None => Ok(TwoStepOutcome::Infeasible(max_two_step_transfer(params, phi))),
    }
}

/// `|a2|^2` over a grid of the two segment durations.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMap {
    pub phi: f64,
    /// Grid axis in units of `W t / pi`, shared by both durations.
    pub axis: Vec<f64>,
    /// `values[i][j]` is the transfer for `t1 = axis[i]`, `t2 = axis[j]`.
    pub values: Vec<Vec<f64>>,
}

impl TransferMap {
    /// Largest grid value and its `(i, j)` cell.
    pub fn peak(&self) -> (f64, usize, usize) {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > best.0 {
                    best = (v, i, j);
                }
            }
        }
        best
    }

    /// Refines the grid peak with a local search; the grid alone cannot hit
    /// an isolated maximum exactly.
    pub fn refined_peak(&self, params: &CouplerParams) -> TwoStepSolution {
        let omega = params.rabi_frequency();
        let (_, i, j) = self.peak();
        let x0 = [self.axis[i] * PI, self.axis[j] * PI];
        let phi = self.phi;
        let f = |x: &[f64]| -two_step_transfer(params, x[0] / omega, x[1] / omega, phi);
        let spacing = PI / (self.axis.len() - 1) as f64;
        let opts = NelderMead {
            f_tol: 1e-15,
            x_tol: 1e-10,
            ..NelderMead::default()
        };
        let m = nelder_mead(f, &x0, &[spacing / 2.0, spacing / 2.0], &opts);
        TwoStepSolution::evaluate(
            params,
            m.x[0].rem_euclid(PI) / omega,
            m.x[1].rem_euclid(PI) / omega,
            phi,
        )
    }
}

/// Transfer efficiency over `W t1, W t2` in `[0, pi]` on an `n x n` grid.
pub fn transfer_map(params: &CouplerParams, phi: f64, n: usize) -> Result<TransferMap> {
    if n < 16 {
        return Err(invalid(format!("grid size must be >= 16, got {n}")));
    }
    let axis = linspace(0.0, 1.0, n);
    let omega = params.rabi_frequency();
    let values = axis
        .par_iter()
        .map(|&x1| {
            let m1 = propagator_for(params, 0.0, x1 * PI / omega);
            axis.iter()
                .map(|&x2| {
                    propagator_for(params, phi, x2 * PI / omega)
                        .then_after(&m1)
                        .cross_power()
                })
                .collect()
        })
        .collect();
    Ok(TransferMap { phi, axis, values })
}

/// Two-step feasibility over `delta/kappa0` in `[0, 1.2]` and `phi` in `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityMap {
    pub ratios: Vec<f64>,
    pub phases: Vec<f64>,
    /// `cells[i][j]` for `ratios[i]`, `phases[j]`.
    pub cells: Vec<Vec<bool>>,
}

pub fn feasibility_map(n: usize) -> Result<FeasibilityMap> {
    if n < 16 {
        return Err(invalid(format!("grid size must be >= 16, got {n}")));
    }
    let ratios = linspace(0.0, 1.2, n);
    let phases = linspace(0.0, PI, n);
    let cells = ratios
        .iter()
        .map(|&r| {
            let params = CouplerParams::from_ratio(r).expect("unit coupling is valid");
            phases.iter().map(|&phi| two_step_feasible(&params, phi)).collect()
        })
        .collect();
    Ok(FeasibilityMap {
        ratios,
        phases,
        cells,
    })
}

/// Boundary `phi_c(r) = arccos(1 - 2 r^2)` sampled on `n` ratios in `[0, 1]`.
pub fn boundary_curve(n: usize) -> Vec<(f64, f64)> {
    linspace(0.0, 1.0, n.max(2))
        .into_iter()
        .map(|r| {
            let phi = crate::bloch::feasibility_boundary(r).expect("ratio within [0, 1]");
            (r, phi)
        })
        .collect()
}

/// Schedule that stops a full-transfer trajectory as soon as the target
/// mode-2 power is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionSchedule {
    /// Truncated segments; zero-duration pieces are dropped.
    pub segments: Vec<CouplingSegment>,
    pub stop_time: f64,
    pub achieved: f64,
}

impl FractionSchedule {
    /// Fails when nothing is left of the schedule (target 0).
    pub fn protocol(&self) -> Result<Protocol> {
        Protocol::new(self.segments.clone())
    }
}

/// Truncates a full-transfer trajectory at its first time with `|a2|^2 = p`.
///
/// Targets at or below the static bound use a single segment; larger ones
/// need the two-segment schedule for `phi`, which must then be feasible.
pub fn solve_fraction(params: &CouplerParams, phi: f64, target: f64) -> Result<FractionSchedule> {
    if !(0.0..=1.0).contains(&target) {
        return Err(invalid(format!("target fraction must lie in [0, 1], got {target}")));
    }
    if params.kappa0() <= 0.0 {
        return Err(invalid("transfer needs kappa0 > 0"));
    }
    let omega = params.rabi_frequency();

    let full = match solve_two_step(params, phi)? {
        TwoStepOutcome::Feasible(sol) => sol.protocol()?,
        TwoStepOutcome::Infeasible(_) if target <= static_max_transfer(params) => {
            Protocol::from_pairs(&[(0.0, FRAC_PI_2 / omega)])?
        }
        TwoStepOutcome::Infeasible(_) => {
            return Err(Error::Infeasible(format!(
                "target {target} exceeds the static bound {} and phi = {phi} admits no complete two-step transfer",
                static_max_transfer(params)
            )))
        }
    };

    let total = full.total_duration();
    let init = ModeState::mode1();
    let power = |t: f64| state_at(params, &full, &init, t).mode2_power();

    let end_power = power(total);
    let stop = if target <= 0.0 {
        0.0
    } else if target >= end_power {
        total
    } else {
        // first crossing: scan finely enough to resolve every turning point
        let samples = 4096;
        let h = total / samples as f64;
        let mut stop = total;
        for k in 1..=samples {
            let t = k as f64 * h;
            if power(t) >= target {
                stop = bisect(|s| power(s) - target, t - h, t, 1e-13);
                break;
            }
        }
        stop
    };

    let mut segments = Vec::new();
    let mut left = stop;
    for seg in full.segments() {
        if left <= 0.0 {
            break;
        }
        let d = seg.duration().min(left);
        if d > 0.0 {
            segments.push(seg.with_duration(d)?);
        }
        left -= seg.duration();
    }
    Ok(FractionSchedule {
        segments,
        stop_time: stop,
        achieved: power(stop),
    })
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| {
            if k == n - 1 {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}
