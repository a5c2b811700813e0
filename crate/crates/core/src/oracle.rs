//! Brute-force integration of the coupled-mode equations, kept independent
//! of the closed-form propagators so it can check them.
//!
//! The equation of motion is `i d/dt (a1, a2) = H (a1, a2)` with the
//! traceless Hermitian generator
//!
//! ```text
//! H = [[ delta,                 kappa0 e^{i phi} ],
//!      [ kappa0 e^{-i phi},    -delta            ]]
//! ```
//!
//! Nothing in this module calls into [`crate::dynamics`] propagators.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::dynamics::{CouplerParams, ModeState, Protocol};
use crate::error::{invalid, Error, Result};

/// Largest `step * W` accepted by [`integrate`].
pub const MAX_STEP_RATIO: f64 = 0.1;

/// Fixed-step classical fourth-order Runge-Kutta settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    step: f64,
}

impl IntegrationConfig {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid(format!("integration step must be > 0, got {step}")));
        }
        Ok(Self { step })
    }

    /// `dt = 0.001 / W`.
    pub fn default_for(params: &CouplerParams) -> Self {
        Self {
            step: 1e-3 / params.rabi_frequency(),
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn halved(&self) -> Self {
        Self { step: self.step / 2.0 }
    }

    fn check(&self, params: &CouplerParams) -> Result<()> {
        let ratio = self.step * params.rabi_frequency();
        if ratio > MAX_STEP_RATIO {
            return Err(Error::StepTooLarge(ratio));
        }
        Ok(())
    }
}

/// The Hermitian generator `H` of a segment with coupling phase `phi`.
pub fn generator(params: &CouplerParams, phi: f64) -> Matrix2<Complex64> {
    let k = Complex64::from_polar(params.kappa0(), phi);
    let d = Complex64::new(params.delta(), 0.0);
    Matrix2::new(d, k, k.conj(), -d)
}

fn rk4_step<const C: usize>(
    gen: &Matrix2<Complex64>,
    y: &nalgebra::SMatrix<Complex64, 2, C>,
    h: f64,
) -> nalgebra::SMatrix<Complex64, 2, C> {
    // y' = -i H y
    let a = gen * Complex64::new(0.0, -1.0);
    let hc = Complex64::new(h, 0.0);
    let half = Complex64::new(h / 2.0, 0.0);
    let k1 = a * y;
    let k2 = a * (y + k1 * half);
    let k3 = a * (y + k2 * half);
    let k4 = a * (y + k3 * hc);
    let two = Complex64::new(2.0, 0.0);
    y + (k1 + k2 * two + k3 * two + k4) * (hc / 6.0)
}

/// Number of fixed steps used for a segment; the last step lands exactly on
/// the segment boundary.
fn steps_for(duration: f64, step: f64) -> usize {
    if duration <= 0.0 {
        0
    } else {
        ((duration / step) - 1e-9).ceil().max(1.0) as usize
    }
}

fn run<const C: usize>(
    params: &CouplerParams,
    protocol: &Protocol,
    start: nalgebra::SMatrix<Complex64, 2, C>,
    config: &IntegrationConfig,
    mut record: impl FnMut(f64, &nalgebra::SMatrix<Complex64, 2, C>),
) -> Result<nalgebra::SMatrix<Complex64, 2, C>> {
    config.check(params)?;
    let mut y = start;
    let mut clock = 0.0;
    record(clock, &y);
    for seg in protocol.segments() {
        let gen = generator(params, seg.phase());
        let n = steps_for(seg.duration(), config.step);
        if n == 0 {
            continue;
        }
        let h = seg.duration() / n as f64;
        for k in 0..n {
            y = rk4_step(&gen, &y, h);
            record(clock + h * (k + 1) as f64, &y);
        }
        clock += seg.duration();
    }
    Ok(y)
}

fn to_vector(s: &ModeState) -> Vector2<Complex64> {
    Vector2::new(s.a1, s.a2)
}

fn to_state(v: &Vector2<Complex64>) -> ModeState {
    ModeState::new(v[0], v[1])
}

/// Final state after integrating through every segment. No renormalization
/// is applied; norm drift is part of what the oracle reports.
pub fn integrate(
    params: &CouplerParams,
    protocol: &Protocol,
    initial: &ModeState,
    config: &IntegrationConfig,
) -> Result<ModeState> {
    let y = run(params, protocol, to_vector(initial), config, |_, _| {})?;
    Ok(to_state(&y))
}

/// Like [`integrate`] but also returns every intermediate step.
pub fn integrate_dense(
    params: &CouplerParams,
    protocol: &Protocol,
    initial: &ModeState,
    config: &IntegrationConfig,
) -> Result<Vec<(f64, ModeState)>> {
    let mut out = Vec::new();
    run(params, protocol, to_vector(initial), config, |t, y| {
        out.push((t, to_state(y)))
    })?;
    Ok(out)
}

/// Propagator of the whole protocol, integrated column by column.
pub fn integrate_propagator(
    params: &CouplerParams,
    protocol: &Protocol,
    config: &IntegrationConfig,
) -> Result<Matrix2<Complex64>> {
    run(params, protocol, Matrix2::identity(), config, |_, _| {})
}

/// `exp(-i H t)` by scaling and squaring with a Taylor series. A second,
/// integrator-free route to the segment propagator.
pub fn evolution_operator(gen: &Matrix2<Complex64>, t: f64) -> Matrix2<Complex64> {
    let a = gen * Complex64::new(0.0, -t);
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * 2.0;
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / Complex64::new(2f64.powi(squarings), 0.0);
    let mut term = Matrix2::identity();
    let mut sum = Matrix2::identity();
    for k in 1..=20 {
        term = term * scaled / Complex64::new(k as f64, 0.0);
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// Product of [`evolution_operator`] over the protocol's segments.
pub fn series_propagator(params: &CouplerParams, protocol: &Protocol) -> Matrix2<Complex64> {
    protocol.segments().iter().fold(Matrix2::identity(), |acc, seg| {
        evolution_operator(&generator(params, seg.phase()), seg.duration()) * acc
    })
}

/// Largest absolute entry difference between two 2x2 complex matrices.
pub fn max_entry_difference(a: &Matrix2<Complex64>, b: &[[Complex64; 2]; 2]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((a[(i, j)] - b[i][j]).norm());
        }
    }
    worst
}
