//! Exact propagation of the detuned two-mode system under piecewise-constant
//! complex coupling.
//!
//! In the frame rotating at the detuning, a segment with coupling
//! `kappa = kappa0 * exp(i phi)` held for a time `t` maps the amplitudes
//! through
//!
//! ```text
//! M(t) = [[ D,   O  ],      D = cos(W t) - i (delta / W) sin(W t)
//!         [ -O*, D* ]]      O = -i (kappa / W) sin(W t)
//! ```
//!
//! with the Rabi frequency `W = sqrt(delta^2 + kappa0^2)`. Every propagator
//! produced here keeps exactly this shape, so a [`TransferMatrix`] stores only
//! the pair `(D, O)`.
//!
//! Some printings of the composite matrix show the lower-left entry as `-O`;
//! a product of matrices of the form above always has `-O*` there, which is
//! what this module uses.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Detuning and coupling magnitude, both in rad per unit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplerParams {
    delta: f64,
    kappa0: f64,
}

impl CouplerParams {
    /// Rejects a negative or non-finite coupling and the inert `delta = kappa0 = 0` case.
    pub fn new(delta: f64, kappa0: f64) -> Result<Self> {
        if !delta.is_finite() || !kappa0.is_finite() {
            return Err(invalid("detuning and coupling must be finite"));
        }
        if kappa0 < 0.0 {
            return Err(invalid(format!("coupling magnitude must be >= 0, got {kappa0}")));
        }
        if delta == 0.0 && kappa0 == 0.0 {
            return Err(invalid("detuning and coupling cannot both be zero"));
        }
        Ok(Self { delta, kappa0 })
    }

    /// Unit coupling with the given detuning-to-coupling ratio.
    pub fn from_ratio(ratio: f64) -> Result<Self> {
        Self::new(ratio, 1.0)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    /// `delta / kappa0`; infinite when the coupling vanishes.
    pub fn ratio(&self) -> f64 {
        self.delta / self.kappa0
    }

    pub fn rabi_frequency(&self) -> f64 {
        self.delta.hypot(self.kappa0)
    }

    /// Converts a raw time into the dimensionless `W t / pi`.
    pub fn scaled_time(&self, t: f64) -> f64 {
        t * self.rabi_frequency() / std::f64::consts::PI
    }

    /// Inverse of [`scaled_time`](Self::scaled_time).
    pub fn time_from_scaled(&self, scaled: f64) -> f64 {
        scaled * std::f64::consts::PI / self.rabi_frequency()
    }
}

/// `sqrt(delta^2 + kappa0^2)`.
pub fn rabi_frequency(params: &CouplerParams) -> f64 {
    params.rabi_frequency()
}

/// One piecewise-constant interval of the coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSegment {
    phase: f64,
    duration: f64,
}

impl CouplingSegment {
    /// The phase is reduced to `[0, 2pi)`; the duration must be finite and non-negative.
    pub fn new(phase: f64, duration: f64) -> Result<Self> {
        if !phase.is_finite() {
            return Err(invalid("segment phase must be finite"));
        }
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(invalid(format!("segment duration must be >= 0, got {duration}")));
        }
        Ok(Self {
            phase: reduce_phase(phase),
            duration,
        })
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn with_duration(&self, duration: f64) -> Result<Self> {
        Self::new(self.phase, duration)
    }
}

/// Reduces an angle to `[0, 2pi)`.
pub fn reduce_phase(phase: f64) -> f64 {
    let r = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Complex amplitudes of the two modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub a1: Complex64,
    pub a2: Complex64,
}

impl ModeState {
    pub fn new(a1: Complex64, a2: Complex64) -> Self {
        Self { a1, a2 }
    }

    /// All power in mode 1 (the north pole of the Bloch sphere).
    pub fn mode1() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// All power in mode 2 (the south pole).
    pub fn mode2() -> Self {
        Self::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a1.norm_sqr() + self.a2.norm_sqr()
    }

    /// Fraction of the power in mode 2, `|a2|^2`.
    pub fn mode2_power(&self) -> f64 {
        self.a2.norm_sqr()
    }
}

/// Unitary `[[D, O], [-O*, D*]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    d: Complex64,
    o: Complex64,
}

impl TransferMatrix {
    /// Checks `|D|^2 + |O|^2 = 1` to within 1e-12.
    pub fn new(d: Complex64, o: Complex64) -> Result<Self> {
        let defect = d.norm_sqr() + o.norm_sqr() - 1.0;
        if !defect.is_finite() || defect.abs() > 1e-12 {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self { d, o })
    }

    pub(crate) fn from_parts(d: Complex64, o: Complex64) -> Self {
        Self { d, o }
    }

    pub fn identity() -> Self {
        Self::from_parts(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn d(&self) -> Complex64 {
        self.d
    }

    pub fn o(&self) -> Complex64 {
        self.o
    }

    /// Row-major entries.
    pub fn entries(&self) -> [[Complex64; 2]; 2] {
        [[self.d, self.o], [-self.o.conj(), self.d.conj()]]
    }

    /// `|D|^2 + |O|^2 - 1`.
    pub fn unitarity_defect(&self) -> f64 {
        self.d.norm_sqr() + self.o.norm_sqr() - 1.0
    }

    /// Cross-coupled power `|O|^2`, which is the mode-2 power reached from mode 1.
    pub fn cross_power(&self) -> f64 {
        self.o.norm_sqr()
    }

    pub fn apply(&self, state: &ModeState) -> ModeState {
        ModeState {
            a1: self.d * state.a1 + self.o * state.a2,
            a2: -self.o.conj() * state.a1 + self.d.conj() * state.a2,
        }
    }

    /// `self * earlier`, i.e. `earlier` acts first.
    pub fn then_after(&self, earlier: &TransferMatrix) -> TransferMatrix {
        compose(self, earlier)
    }

    /// Largest absolute difference over the four entries.
    pub fn max_entry_difference(&self, other: &TransferMatrix) -> f64 {
        let a = self.entries();
        let b = other.entries();
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((a[i][j] - b[i][j]).norm());
            }
        }
        worst
    }
}

/// Product `later * earlier`, expressed back in `(D, O)` form.
pub fn compose(later: &TransferMatrix, earlier: &TransferMatrix) -> TransferMatrix {
    let (d2, o2) = (later.d, later.o);
    let (d1, o1) = (earlier.d, earlier.o);
    TransferMatrix::from_parts(d2 * d1 - o2 * o1.conj(), d2 * o1 + o2 * d1.conj())
}

/// Closed-form propagator of a single segment.
pub fn segment_propagator(params: &CouplerParams, seg: &CouplingSegment) -> TransferMatrix {
    propagator_for(params, seg.phase, seg.duration)
}

pub(crate) fn propagator_for(params: &CouplerParams, phase: f64, t: f64) -> TransferMatrix {
    let omega = params.rabi_frequency();
    let (s, c) = (omega * t).sin_cos();
    let d = Complex64::new(c, -params.delta / omega * s);
    // -i * kappa0 e^{i phi} / W * sin(W t)
    let kappa = Complex64::from_polar(params.kappa0, phase);
    let o = Complex64::new(0.0, -1.0) * kappa * (s / omega);
    TransferMatrix::from_parts(d, o)
}

/// Ordered list of coupling segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    segments: Vec<CouplingSegment>,
}

impl Protocol {
    /// Fails on an empty list or zero total duration.
    pub fn new(segments: Vec<CouplingSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyProtocol);
        }
        let total: f64 = segments.iter().map(|s| s.duration).sum();
        if total <= 0.0 {
            return Err(Error::EmptyProtocol);
        }
        Ok(Self { segments })
    }

    /// Builds a protocol from `(phase, duration)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let segments = pairs
            .iter()
            .map(|&(phase, duration)| CouplingSegment::new(phase, duration))
            .collect::<Result<Vec<_>>>()?;
        Self::new(segments)
    }

    pub fn segments(&self) -> &[CouplingSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Same durations with every phase shifted by `-offset`, which rotates the
    /// off-diagonal element of the composite propagator by `exp(-i offset)`.
    pub fn with_phase_offset(&self, offset: f64) -> Protocol {
        let segments = self
            .segments
            .iter()
            .map(|s| CouplingSegment {
                phase: reduce_phase(s.phase - offset),
                duration: s.duration,
            })
            .collect();
        Protocol { segments }
    }
}

/// Ordered product of the segment propagators, last segment leftmost.
pub fn protocol_propagator(params: &CouplerParams, protocol: &Protocol) -> TransferMatrix {
    propagator_of(params, protocol.segments())
        .expect("a validated protocol is never empty")
}

/// Same as [`protocol_propagator`] for a bare slice; an empty slice is an error.
pub fn propagator_of(params: &CouplerParams, segments: &[CouplingSegment]) -> Result<TransferMatrix> {
    if segments.is_empty() {
        return Err(Error::EmptyProtocol);
    }
    Ok(segments.iter().fold(TransferMatrix::identity(), |acc, seg| {
        compose(&segment_propagator(params, seg), &acc)
    }))
}

/// State at time `t` (clamped to the protocol span), propagated exactly.
pub fn state_at(params: &CouplerParams, protocol: &Protocol, initial: &ModeState, t: f64) -> ModeState {
    let mut state = *initial;
    let mut remaining = t.max(0.0);
    for seg in protocol.segments() {
        if remaining <= 0.0 {
            break;
        }
        let dt = remaining.min(seg.duration);
        state = propagator_for(params, seg.phase, dt).apply(&state);
        remaining -= seg.duration;
    }
    state
}

/// Samples the exact trajectory at `sample_count` uniformly spaced times
/// spanning `[0, T]`. The first sample is `initial` and the last equals
/// [`protocol_propagator`] applied to it.
pub fn propagate(
    params: &CouplerParams,
    protocol: &Protocol,
    initial: &ModeState,
    sample_count: usize,
) -> Result<Vec<(f64, ModeState)>> {
    if sample_count < 2 {
        return Err(invalid(format!("sample_count must be >= 2, got {sample_count}")));
    }
    let total = protocol.total_duration();
    let segs = protocol.segments();

    // state at the start of each segment
    let mut starts = Vec::with_capacity(segs.len());
    let mut begin_time = Vec::with_capacity(segs.len());
    let mut state = *initial;
    let mut clock = 0.0;
    for seg in segs {
        starts.push(state);
        begin_time.push(clock);
        state = segment_propagator(params, seg).apply(&state);
        clock += seg.duration;
    }
    let final_state = protocol_propagator(params, protocol).apply(initial);

    let mut samples = Vec::with_capacity(sample_count);
    let mut idx = 0;
    for k in 0..sample_count {
        if k == sample_count - 1 {
            samples.push((total, final_state));
            break;
        }
        let t = total * k as f64 / (sample_count - 1) as f64;
        while idx + 1 < segs.len() && t >= begin_time[idx] + segs[idx].duration {
            idx += 1;
        }
        let local = (t - begin_time[idx]).clamp(0.0, segs[idx].duration);
        let s = propagator_for(params, segs[idx].phase, local).apply(&starts[idx]);
        samples.push((t, s));
    }
    Ok(samples)
}

/// Largest mode-2 power a single static segment reaches from mode 1,
/// `kappa0^2 / (delta^2 + kappa0^2)`.
pub fn static_max_transfer(params: &CouplerParams) -> f64 {
    let k2 = params.kappa0 * params.kappa0;
    k2 / (params.delta * params.delta + k2)
}
