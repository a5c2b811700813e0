//! Two modulated stages around a passive phase section. The modulation of
//! the last stage lags the first by `delta`, which makes the cross-mode
//! transmission depend on the direction of travel.
//!
//! Backward travel is modeled by reversing the order of the same three
//! matrices.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bloch::{bloch_of, BlochVector};
use crate::dynamics::{propagate, CouplerParams, ModeState, Protocol, TransferMatrix};
use crate::error::{invalid, Result};

/// Reporting limit for contrast when one direction's power underflows.
pub const CONTRAST_LIMIT_DB: f64 = 120.0;

const POWER_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsolatorSpec {
    stage: TransferMatrix,
    pub theta1: f64,
    pub theta2: f64,
    /// Modulation phase of the last stage relative to the first.
    pub delta: f64,
}

impl IsolatorSpec {
    pub fn new(stage: TransferMatrix, theta1: f64, theta2: f64, delta: f64) -> Result<Self> {
        let defect = stage.unitarity_defect();
        if defect.abs() > 1e-12 {
            return Err(crate::error::Error::NotUnitary(defect));
        }
        if ![theta1, theta2, delta].iter().all(|x| x.is_finite()) {
            return Err(invalid("isolator phases must be finite"));
        }
        Ok(Self {
            stage,
            theta1,
            theta2,
            delta,
        })
    }

    pub fn stage(&self) -> TransferMatrix {
        self.stage
    }

    /// Differential passive phase `theta1 - theta2`.
    pub fn delta_theta(&self) -> f64 {
        self.theta1 - self.theta2
    }
}

/// Stage driven with its modulation delayed by `delta`: `O -> O exp(-i delta)`.
pub fn stage_with_offset(stage: &TransferMatrix, delta: f64) -> TransferMatrix {
    let o = stage.o() * Complex64::from_polar(1.0, -delta);
    TransferMatrix::new(stage.d(), o).unwrap_or(*stage)
}

fn to_matrix(m: &TransferMatrix) -> Matrix2<Complex64> {
    let e = m.entries();
    Matrix2::new(e[0][0], e[0][1], e[1][0], e[1][1])
}

fn passive(spec: &IsolatorSpec) -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::from_polar(1.0, spec.theta1),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(1.0, spec.theta2),
    )
}

/// Full three-element product for one direction.
///
/// The passive section has unequal phases on its diagonal, so the result is
/// a general unitary rather than a [`TransferMatrix`].
pub fn cascade(spec: &IsolatorSpec, direction: Direction) -> Matrix2<Complex64> {
    let first = to_matrix(&spec.stage);
    let last = to_matrix(&stage_with_offset(&spec.stage, spec.delta));
    let mid = passive(spec);
    match direction {
        Direction::Forward => last * mid * first,
        Direction::Backward => first * mid * last,
    }
}

/// `|T12|^2` of the cascade.
pub fn cross_transmission_power(spec: &IsolatorSpec, direction: Direction) -> f64 {
    cascade(spec, direction)[(0, 1)].norm_sqr()
}

fn signed_offset(delta: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Forward => delta,
        Direction::Backward => -delta,
    }
}

/// `2 |D|^2 |O|^2 [1 + cos(dtheta +- delta)]`, exact when `D` is real.
pub fn closed_form_power(d_power: f64, delta_theta: f64, delta: f64, direction: Direction) -> f64 {
    let o_power = 1.0 - d_power;
    2.0 * d_power * o_power * (1.0 + (delta_theta + signed_offset(delta, direction)).cos())
}

/// Closed form for any stage: the phase of `D` enters as `dtheta + 2 arg D`.
pub fn stage_closed_form_power(spec: &IsolatorSpec, direction: Direction) -> f64 {
    let d = spec.stage.d();
    let effective = spec.delta_theta() + 2.0 * d.arg();
    2.0 * d.norm_sqr()
        * spec.stage.o().norm_sqr()
        * (1.0 + (effective + signed_offset(spec.delta, direction)).cos())
}

/// `(dtheta, delta) = (pi/2, pi/2)`: blocks forward cross transmission and
/// passes backward for a balanced stage with real `D`.
pub fn optimal_phases() -> (f64, f64) {
    (FRAC_PI_2, FRAC_PI_2)
}

/// Passive phase giving the same result as [`optimal_phases`] for a stage
/// with complex `D`.
pub fn optimal_delta_theta(stage: &TransferMatrix, delta: f64) -> f64 {
    PI - delta - 2.0 * stage.d().arg()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalResponse {
    pub forward12: Complex64,
    pub backward12: Complex64,
    pub forward_power: f64,
    pub backward_power: f64,
    /// `10 log10(forward / backward)`; positive favors forward, limited to +-120 dB.
    pub contrast_db: f64,
}

pub fn contrast_db(forward: f64, backward: f64) -> f64 {
    let db = 10.0 * (forward.max(POWER_FLOOR) / backward.max(POWER_FLOOR)).log10();
    db.clamp(-CONTRAST_LIMIT_DB, CONTRAST_LIMIT_DB)
}

pub fn directional_response(spec: &IsolatorSpec) -> DirectionalResponse {
    let forward12 = cascade(spec, Direction::Forward)[(0, 1)];
    let backward12 = cascade(spec, Direction::Backward)[(0, 1)];
    let (forward_power, backward_power) = (forward12.norm_sqr(), backward12.norm_sqr());
    DirectionalResponse {
        forward12,
        backward12,
        forward_power,
        backward_power,
        contrast_db: contrast_db(forward_power, backward_power),
    }
}

/// Responses over `(dtheta, delta)` on an `n x n` grid spanning `[0, 2 pi]`
/// with both ends included.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastGrid {
    pub axis: Vec<f64>,
    /// `cells[i][j]` for `dtheta = axis[i]`, `delta = axis[j]`.
    pub cells: Vec<Vec<DirectionalResponse>>,
}

pub fn contrast_sweep(stage: &TransferMatrix, n: usize) -> Result<ContrastGrid> {
    if n < 16 {
        return Err(invalid(format!("grid size must be >= 16, got {n}")));
    }
    let axis = crate::transfer::linspace(0.0, TAU, n);
    let cells = axis
        .par_iter()
        .map(|&dtheta| {
            axis.iter()
                .map(|&delta| {
                    // 2 pi folds onto 0 so the two grid edges agree exactly
                    let spec = IsolatorSpec::new(*stage, dtheta.rem_euclid(TAU), 0.0, delta.rem_euclid(TAU))
                        .expect("stage was unitary and phases are finite");
                    directional_response(&spec)
                })
                .collect()
        })
        .collect::<Vec<Vec<_>>>();
    Ok(ContrastGrid { axis, cells })
}

/// Bloch path of an input in mode `1` through the cascade built from a
/// stage `protocol`. The passive section is drawn as a uniform phase ramp.
pub fn bloch_trajectory(
    params: &CouplerParams,
    protocol: &Protocol,
    theta1: f64,
    theta2: f64,
    delta: f64,
    direction: Direction,
    samples_per_element: usize,
) -> Result<Vec<BlochVector>> {
    let n = samples_per_element.max(2);
    let offset = protocol.with_phase_offset(delta);
    let (first, last) = match direction {
        Direction::Forward => (protocol, &offset),
        Direction::Backward => (&offset, protocol),
    };

    let mut path = Vec::with_capacity(3 * n);
    let leg = propagate(params, first, &ModeState::mode1(), n)?;
    path.extend(leg.iter().map(|(_, s)| bloch_of(s)));
    let mut state = leg.last().expect("n >= 2").1;

    for k in 1..n {
        let s = k as f64 / (n - 1) as f64;
        let ramp = ModeState::new(
            state.a1 * Complex64::from_polar(1.0, theta1 * s),
            state.a2 * Complex64::from_polar(1.0, theta2 * s),
        );
        path.push(bloch_of(&ramp));
    }
    state = ModeState::new(
        state.a1 * Complex64::from_polar(1.0, theta1),
        state.a2 * Complex64::from_polar(1.0, theta2),
    );

    let leg = propagate(params, last, &state, n)?;
    path.extend(leg.iter().skip(1).map(|(_, s)| bloch_of(s)));
    Ok(path)
}
