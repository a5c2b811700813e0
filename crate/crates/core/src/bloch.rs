//! Bloch-sphere picture of the two-mode amplitudes and the spherical geometry
//! behind the transfer criteria.
//!
//! The state maps to `S = (u, v, w)` with `u = 2 Re(a1 a2*)`,
//! `v = 2 Im(a1 a2*)` and `w = |a1|^2 - |a2|^2`, so the north pole is all
//! power in mode 1 and the south pole all power in mode 2. A segment with
//! coupling phase `phi` precesses `S` about the fixed axis
//! `n = (kappa0 cos phi, kappa0 sin phi, delta) / W` at angular rate `2W`.
//!
//! With the propagator convention of [`crate::dynamics`] the precession is
//! clockwise when viewed from the tip of `n`, i.e. `dS/dt = -2W n x S`.
//! Precession angles below are always measured in that sense.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Rotation3, Unit, Vector3};

use crate::dynamics::{CouplerParams, ModeState};
use crate::error::{invalid, Error, Result};

/// Fixed angular tolerance for comparisons and tangency detection.
pub const ANGLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl BlochVector {
    pub const NORTH: BlochVector = BlochVector { u: 0.0, v: 0.0, w: 1.0 };
    pub const SOUTH: BlochVector = BlochVector { u: 0.0, v: 0.0, w: -1.0 };

    pub fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.w)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    /// Polar angle measured from the north pole.
    pub fn polar_angle(&self) -> f64 {
        angle_between(&self.to_vector(), &Vector3::z())
    }

    /// Mode-2 power encoded by this vector, `(1 - w) / 2`.
    pub fn mode2_power(&self) -> f64 {
        0.5 * (1.0 - self.w)
    }

    /// Great-circle distance to another point.
    pub fn angle_to(&self, other: &BlochVector) -> f64 {
        angle_between(&self.to_vector(), &other.to_vector())
    }
}

/// Maps a unit-norm state to its Bloch vector.
pub fn to_bloch(state: &ModeState) -> Result<BlochVector> {
    let norm = state.norm_sqr();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(norm));
    }
    Ok(bloch_of(state))
}

/// Same map as [`to_bloch`] without the normalization check.
pub fn bloch_of(state: &ModeState) -> BlochVector {
    let c = state.a1 * state.a2.conj();
    BlochVector::new(
        2.0 * c.re,
        2.0 * c.im,
        state.a1.norm_sqr() - state.a2.norm_sqr(),
    )
}

/// Unit precession axis together with the Rabi frequency `W`; the Bloch
/// vector turns about it at `2W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationAxis {
    direction: Vector3<f64>,
    rate: f64,
}

impl RotationAxis {
    pub fn direction(&self) -> Vector3<f64> {
        self.direction
    }

    /// Rabi frequency `W`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Polar angle of the axis measured from the north pole.
    pub fn polar_angle(&self) -> f64 {
        angle_between(&self.direction, &Vector3::z())
    }

    /// Rotation applied to a Bloch vector after time `t`.
    pub fn rotation(&self, t: f64) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Unit::new_unchecked(self.direction), -2.0 * self.rate * t)
    }

    /// Time needed to carry `from` onto `to` along the precession circle,
    /// in `[0, pi / W)`. Both points should lie on the same circle.
    pub fn time_between(&self, from: &BlochVector, to: &BlochVector) -> f64 {
        precession_angle(&self.direction, &from.to_vector(), &to.to_vector()) / (2.0 * self.rate)
    }
}

/// Axis `(kappa0 cos phi, kappa0 sin phi, delta) / W`.
pub fn rotation_axis(params: &CouplerParams, phase: f64) -> RotationAxis {
    let omega = params.rabi_frequency();
    let (s, c) = phase.sin_cos();
    let direction = Vector3::new(params.kappa0() * c, params.kappa0() * s, params.delta()) / omega;
    RotationAxis {
        direction,
        rate: omega,
    }
}

/// Rigid precession of `s` about the axis for a time `t`.
pub fn bloch_precess(axis: &RotationAxis, s: &BlochVector, t: f64) -> BlochVector {
    BlochVector::from_vector(&(axis.rotation(t) * s.to_vector()))
}

/// Signed elevation of the rotation axis above the equator, `atan(delta / kappa0)`.
pub fn elevation_angle(params: &CouplerParams) -> Result<f64> {
    if params.kappa0() <= 0.0 {
        return Err(invalid("elevation is undefined for a polar axis (kappa0 = 0)"));
    }
    Ok(params.delta().atan2(params.kappa0()))
}

/// Aperture `2 psi` of the cone around the south pole that a static
/// evolution from the north pole cannot enter; `w >= -cos(2 psi)` along it.
pub fn cone_aperture(params: &CouplerParams) -> Result<f64> {
    Ok(2.0 * elevation_angle(params)?)
}

/// Angle between the axes of two segments with phases `phi1`, `phi2`.
pub fn axis_angle(params: &CouplerParams, phi1: f64, phi2: f64) -> f64 {
    angle_between(
        &rotation_axis(params, phi1).direction,
        &rotation_axis(params, phi2).direction,
    )
}

/// Whether a two-segment schedule with relative coupling phase `phi` can move
/// all the power from mode 1 to mode 2: the axes must be at least `2 |psi|`
/// apart. Equality counts as feasible. Never true for `|delta| > kappa0`.
pub fn two_step_feasible(params: &CouplerParams, phi: f64) -> bool {
    let Ok(psi) = elevation_angle(params) else {
        return false;
    };
    axis_angle(params, 0.0, phi) >= 2.0 * psi.abs() - ANGLE_TOLERANCE
}

/// Smallest relative phase for which two-step transfer works,
/// `arccos(1 - 2 r^2)` with `r = |delta| / kappa0` in `[0, 1]`.
pub fn feasibility_boundary(ratio: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(invalid(format!(
            "feasibility boundary exists only for ratio in [0, 1], got {ratio}"
        )));
    }
    Ok((1.0 - 2.0 * ratio * ratio).clamp(-1.0, 1.0).acos())
}

/// Circle on the unit sphere given by a unit center and an angular radius in `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCircle {
    center: Vector3<f64>,
    radius: f64,
}

impl SphericalCircle {
    pub fn new(center: Vector3<f64>, radius: f64) -> Result<Self> {
        let norm = center.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("circle center must be a unit vector, |c| = {norm}")));
        }
        if !(0.0..=PI).contains(&radius) {
            return Err(invalid(format!("angular radius must lie in [0, pi], got {radius}")));
        }
        Ok(Self {
            center: center / norm,
            radius,
        })
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Angular offset of `p` from the circle (positive outside).
    pub fn offset(&self, p: &Vector3<f64>) -> f64 {
        angle_between(&self.center, p) - self.radius
    }
}

/// Precession orbit of `point` about `axis`.
pub fn circle_through(axis: &RotationAxis, point: &BlochVector) -> SphericalCircle {
    SphericalCircle {
        center: axis.direction,
        radius: angle_between(&axis.direction, &point.to_vector()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CircleIntersection {
    None,
    Tangent(Vector3<f64>),
    Two(Vector3<f64>, Vector3<f64>),
    /// Both circles are the same set of points.
    Coincident,
}

impl CircleIntersection {
    pub fn points(&self) -> Vec<Vector3<f64>> {
        match *self {
            CircleIntersection::None | CircleIntersection::Coincident => Vec::new(),
            CircleIntersection::Tangent(p) => vec![p],
            CircleIntersection::Two(p, q) => vec![p, q],
        }
    }
}

/// Smallest slack among the spherical triangle inequalities for two circles
/// whose centers are `d` apart; negative means no intersection.
pub(crate) fn intersection_margin(r1: f64, r2: f64, d: f64) -> f64 {
    (d - (r1 - r2).abs())
        .min(r1 + r2 - d)
        .min(TAU - r1 - r2 - d)
}

/// Exact intersection of two spherical circles.
pub fn circle_intersection(c1: &SphericalCircle, c2: &SphericalCircle) -> CircleIntersection {
    let (a, b) = (c1.center, c2.center);
    let (r1, r2) = (c1.radius, c2.radius);
    let d = angle_between(&a, &b);

    // (a, r) and (-a, pi - r) describe the same circle
    let same = (d <= ANGLE_TOLERANCE && (r1 - r2).abs() <= ANGLE_TOLERANCE)
        || (PI - d <= ANGLE_TOLERANCE && (r1 + r2 - PI).abs() <= ANGLE_TOLERANCE);
    if same {
        return CircleIntersection::Coincident;
    }
    if d <= ANGLE_TOLERANCE || PI - d <= ANGLE_TOLERANCE {
        return CircleIntersection::None;
    }

    let margin = intersection_margin(r1, r2, d);
    if margin < -ANGLE_TOLERANCE {
        return CircleIntersection::None;
    }

    // p = x a + y b + z (a x b) with a.p = cos r1 and b.p = cos r2
    let c = a.dot(&b);
    let axb = a.cross(&b);
    let s2 = axb.norm_squared();
    let (k1, k2) = (r1.cos(), r2.cos());
    let x = (k1 - c * k2) / s2;
    let y = (k2 - c * k1) / s2;
    let q = a * x + b * y;
    let z2 = (1.0 - q.norm_squared()) / s2;

    if margin <= ANGLE_TOLERANCE || z2 <= 0.0 {
        return CircleIntersection::Tangent(q.normalize());
    }
    let z = z2.sqrt();
    let p1 = (q + axb * z).normalize();
    let p2 = (q - axb * z).normalize();
    CircleIntersection::Two(p1, p2)
}

/// `atan2(|a x b|, a.b)`, accurate for nearly parallel and antiparallel vectors.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Clockwise turn about `axis` (as seen from its tip) carrying `from` to
/// `to`, in `[0, 2pi)`. Matches the sense of [`RotationAxis::rotation`].
pub fn precession_angle(axis: &Vector3<f64>, from: &Vector3<f64>, to: &Vector3<f64>) -> f64 {
    let a = from - axis * axis.dot(from);
    let b = to - axis * axis.dot(to);
    if a.norm() < 1e-15 || b.norm() < 1e-15 {
        return 0.0;
    }
    let ccw = axis.dot(&a.cross(&b)).atan2(a.dot(&b));
    let cw = (-ccw).rem_euclid(TAU);
    if cw >= TAU {
        0.0
    } else {
        cw
    }
}

/// Instantaneous rate `-dw/dt` of a Bloch vector `s` precessing about `axis`.
pub fn descent_rate(axis: &RotationAxis, s: &BlochVector) -> f64 {
    let n = axis.direction;
    2.0 * axis.rate * (n.x * s.v - n.y * s.u)
}

/// Point of the circle closest to the south pole.
pub fn deepest_point(circle: &SphericalCircle) -> Vector3<f64> {
    let n = circle.center;
    let down = -Vector3::z() + n * n.z;
    let e = if down.norm() < 1e-15 {
        // axis through the poles: every point on the circle is equally deep
        n.cross(&Vector3::x()).normalize()
    } else {
        down.normalize()
    };
    n * circle.radius.cos() + e * circle.radius.sin()
}

/// Closest angular approach of a circle to the south pole.
pub fn south_approach(circle: &SphericalCircle) -> f64 {
    let to_south = PI - angle_between(&circle.center, &Vector3::z());
    (to_south - circle.radius).abs()
}

/// `pi/2 - psi`: radius of the orbit through the north pole.
pub fn north_orbit_radius(params: &CouplerParams) -> Result<f64> {
    Ok(FRAC_PI_2 - elevation_angle(params)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{propagate, CouplingSegment, Protocol};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, FRAC_PI_4};

    fn params(delta: f64) -> CouplerParams {
        CouplerParams::new(delta, 1.0).unwrap()
    }

    fn assert_vec(a: &BlochVector, b: (f64, f64, f64), eps: f64) {
        assert_abs_diff_eq!(a.u, b.0, epsilon = eps);
        assert_abs_diff_eq!(a.v, b.1, epsilon = eps);
        assert_abs_diff_eq!(a.w, b.2, epsilon = eps);
    }

    #[test]
    fn poles_and_equator() {
        assert_vec(&to_bloch(&ModeState::mode1()).unwrap(), (0.0, 0.0, 1.0), 0.0);
        assert_vec(&to_bloch(&ModeState::mode2()).unwrap(), (0.0, 0.0, -1.0), 0.0);
        let sym = ModeState::new(Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(FRAC_1_SQRT_2, 0.0));
        assert_vec(&to_bloch(&sym).unwrap(), (1.0, 0.0, 0.0), 1e-15);
        let bad = ModeState::new(Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0));
        assert!(matches!(to_bloch(&bad), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn axis_examples() {
        let n = rotation_axis(&params(0.0), 0.0).direction();
        assert_abs_diff_eq!((n - Vector3::x()).norm(), 0.0, epsilon = 1e-15);
        let n = rotation_axis(&params(0.5), 0.0).direction();
        assert_abs_diff_eq!(n.x, 0.894427191, epsilon = 1e-9);
        assert_abs_diff_eq!(n.z, 0.4472135955, epsilon = 1e-9);
        let n = rotation_axis(&params(0.5), PI).direction();
        assert_abs_diff_eq!(n.x, -0.894427191, epsilon = 1e-9);
        assert_abs_diff_eq!(n.y, 0.0, epsilon = 1e-15);
        assert_eq!(rotation_axis(&params(0.5), 0.0).rate(), params(0.5).rabi_frequency());
    }

    #[test]
    fn precession_examples() {
        let axis = rotation_axis(&params(0.0), 0.0);
        let s = BlochVector::NORTH;
        assert_eq!(bloch_precess(&axis, &s, 0.0), s);
        // 2 W t = pi
        let flipped = bloch_precess(&axis, &s, FRAC_PI_2);
        assert_vec(&flipped, (0.0, 0.0, -1.0), 1e-15);
    }

    #[test]
    fn precession_matches_amplitude_evolution() {
        let p = CouplerParams::new(0.37, 0.81).unwrap();
        let phase = 2.2;
        let init = ModeState::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
        let proto = Protocol::new(vec![CouplingSegment::new(phase, 3.1).unwrap()]).unwrap();
        let axis = rotation_axis(&p, phase);
        let s0 = to_bloch(&init).unwrap();
        for (t, state) in propagate(&p, &proto, &init, 40).unwrap() {
            let a = to_bloch(&state).unwrap();
            let b = bloch_precess(&axis, &s0, t);
            assert_vec(&a, (b.u, b.v, b.w), 1e-12);
        }
    }

    #[test]
    fn elevation_and_cone() {
        assert_eq!(elevation_angle(&params(0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(elevation_angle(&params(1.0)).unwrap(), FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(elevation_angle(&params(2.0)).unwrap(), 1.1071487178, epsilon = 1e-9);
        assert!(elevation_angle(&CouplerParams::new(1.0, 0.0).unwrap()).is_err());
        assert_eq!(cone_aperture(&params(0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(cone_aperture(&params(0.5)).unwrap(), 0.927295218, epsilon = 1e-9);
        assert_abs_diff_eq!(cone_aperture(&params(1.0)).unwrap(), FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn axis_angle_examples() {
        assert_abs_diff_eq!(axis_angle(&params(0.5), 1.3, 1.3), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(axis_angle(&params(0.5), 0.0, FRAC_PI_2), 0.2f64.acos(), epsilon = 1e-14);
        assert_abs_diff_eq!(axis_angle(&params(0.0), 0.0, PI), PI, epsilon = 1e-15);
    }

    #[test]
    fn feasibility_examples() {
        assert!(two_step_feasible(&params(0.0), 0.1));
        assert!(two_step_feasible(&params(0.5), FRAC_PI_2));
        assert!(!two_step_feasible(&params(0.5), FRAC_PI_4));
        // boundary counts as feasible
        assert!(two_step_feasible(&params(0.5), FRAC_PI_3));
        assert!(two_step_feasible(&params(1.0), PI));
        assert!(!two_step_feasible(&params(1.2), PI));
        assert!(!two_step_feasible(&params(-1.2), PI));
        assert!(two_step_feasible(&params(-0.5), FRAC_PI_2));
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(feasibility_boundary(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(feasibility_boundary(0.5).unwrap(), FRAC_PI_3, epsilon = 1e-15);
        assert_abs_diff_eq!(feasibility_boundary(1.0).unwrap(), PI, epsilon = 1e-15);
        assert!(feasibility_boundary(1.01).is_err());
    }

    #[test]
    fn circle_through_examples() {
        let axis = rotation_axis(&params(0.5), 0.0);
        let c = circle_through(&axis, &BlochVector::NORTH);
        let psi = elevation_angle(&params(0.5)).unwrap();
        assert_abs_diff_eq!(c.radius(), FRAC_PI_2 - psi, epsilon = 1e-15);
        assert_abs_diff_eq!(c.radius(), 1.1071487178, epsilon = 1e-9);
        let c = circle_through(&axis, &BlochVector::SOUTH);
        assert_abs_diff_eq!(c.radius(), FRAC_PI_2 + psi, epsilon = 1e-15);
        // large detuning: axis close to the pole, tiny orbit through north
        let axis = rotation_axis(&params(1e6), 0.0);
        assert!(circle_through(&axis, &BlochVector::NORTH).radius() < 1e-5);
    }

    #[test]
    fn perpendicular_great_circles_meet_at_antipodes() {
        let c1 = SphericalCircle::new(Vector3::z(), FRAC_PI_2).unwrap();
        let c2 = SphericalCircle::new(Vector3::x(), FRAC_PI_2).unwrap();
        match circle_intersection(&c1, &c2) {
            CircleIntersection::Two(p, q) => {
                assert_abs_diff_eq!((p + q).norm(), 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(p.y.abs(), 1.0, epsilon = 1e-15);
            }
            other => panic!("expected two points, got {other:?}"),
        }
    }

    fn two_step_circles(ratio: f64, phi: f64) -> (SphericalCircle, SphericalCircle) {
        let p = params(ratio);
        let c1 = circle_through(&rotation_axis(&p, 0.0), &BlochVector::NORTH);
        let c2 = circle_through(&rotation_axis(&p, phi), &BlochVector::SOUTH);
        (c1, c2)
    }

    #[test]
    fn two_step_geometry_intersections() {
        let (c1, c2) = two_step_circles(0.5, PI);
        let hit = circle_intersection(&c1, &c2);
        let pts = hit.points();
        assert_eq!(pts.len(), 2);
        for p in pts {
            assert_abs_diff_eq!(c1.offset(&p), 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(c2.offset(&p), 0.0, epsilon = 1e-9);
        }
        let (c1, c2) = two_step_circles(1.5, PI);
        assert_eq!(circle_intersection(&c1, &c2), CircleIntersection::None);
    }

    #[test]
    fn coincident_and_antipodal_descriptions() {
        let c = SphericalCircle::new(Vector3::x(), 0.4).unwrap();
        assert_eq!(circle_intersection(&c, &c), CircleIntersection::Coincident);
        let anti = SphericalCircle::new(-Vector3::x(), PI - 0.4).unwrap();
        assert_eq!(circle_intersection(&c, &anti), CircleIntersection::Coincident);
        let concentric = SphericalCircle::new(Vector3::x(), 0.5).unwrap();
        assert_eq!(circle_intersection(&c, &concentric), CircleIntersection::None);
    }

    #[test]
    fn tangent_circles_give_one_point() {
        let c1 = SphericalCircle::new(Vector3::z(), 0.3).unwrap();
        let c2 = SphericalCircle::new(Vector3::x(), FRAC_PI_2 - 0.3).unwrap();
        match circle_intersection(&c1, &c2) {
            CircleIntersection::Tangent(p) => {
                assert_abs_diff_eq!(c1.offset(&p), 0.0, epsilon = 1e-9);
                assert_abs_diff_eq!(c2.offset(&p), 0.0, epsilon = 1e-9);
            }
            other => panic!("expected tangency, got {other:?}"),
        }
    }

    #[test]
    fn precession_angle_inverts_rotation() {
        let axis = rotation_axis(&params(0.3), 1.0);
        let s = BlochVector::new(0.0, 0.6, 0.8);
        for &t in &[0.1, 0.9, 2.0, 2.7] {
            let moved = bloch_precess(&axis, &s, t);
            let back = axis.time_between(&s, &moved);
            let period = PI / axis.rate();
            assert_abs_diff_eq!(back, t % period, epsilon = 1e-12);
        }
    }

    #[test]
    fn deepest_point_is_closest_to_south() {
        let axis = rotation_axis(&params(2.0), 0.7);
        let s = BlochVector::new(0.3, -0.2, (1.0f64 - 0.13).sqrt());
        let circle = circle_through(&axis, &s);
        let deep = deepest_point(&circle);
        assert_abs_diff_eq!(circle.offset(&deep), 0.0, epsilon = 1e-12);
        let brute = (0..4000)
            .map(|k| bloch_precess(&axis, &s, k as f64 * PI / axis.rate() / 4000.0).w)
            .fold(f64::INFINITY, f64::min);
        assert!(deep.z <= brute + 1e-12);
        assert_abs_diff_eq!(deep.z, brute, epsilon = 1e-6);
        assert_abs_diff_eq!(
            south_approach(&circle),
            PI - angle_between(&deep, &Vector3::z()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn descent_rate_matches_finite_difference() {
        let axis = rotation_axis(&params(0.8), 2.1);
        let s = BlochVector::new(0.5, 0.5, FRAC_1_SQRT_2);
        let h = 1e-6;
        let fd = -(bloch_precess(&axis, &s, h).w - bloch_precess(&axis, &s, -h).w) / (2.0 * h);
        assert_abs_diff_eq!(descent_rate(&axis, &s), fd, epsilon = 1e-8);
    }
}
