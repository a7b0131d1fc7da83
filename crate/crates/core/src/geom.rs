//! Planar vehicle states and constant-turn-rate kinematics.
//!
//! Coordinates are north-east: `x` points north, `y` points east, and the
//! heading `psi` is measured from +x toward +y. A heading of zero flies
//! due north.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Turn rates with magnitude below this are integrated as straight flight.
pub const TURN_RATE_EPS: f64 = 1e-9;

/// Wrap an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let r = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid may round up to exactly TAU
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// North position, meters.
    pub x: f64,
    /// East position, meters.
    pub y: f64,
    /// Heading in radians, wrapped to `[-π, π)`.
    pub psi: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn distance_to(&self, other: &VehicleState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_to_point(&self, point: (f64, f64)) -> f64 {
        (self.x - point.0).hypot(self.y - point.1)
    }

    /// Heading that points straight at `point` from this position.
    pub fn bearing_to_point(&self, point: (f64, f64)) -> f64 {
        (point.1 - self.y).atan2(point.0 - self.x)
    }
}

/// Constant speed and turn-rate limit of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// m/s
    pub speed: f64,
    /// rad/s; only meaningful for the controlled aircraft
    pub max_turn_rate: f64,
}

/// Advance a vehicle by `dt` seconds flying at constant `speed` and
/// constant `turn_rate`. The arc branch is the exact solution of the
/// unicycle model; below [`TURN_RATE_EPS`] the straight branch is used.
pub fn step_vehicle(state: VehicleState, speed: f64, turn_rate: f64, dt: f64) -> VehicleState {
    if turn_rate.abs() < TURN_RATE_EPS {
        let (s, c) = state.psi.sin_cos();
        return VehicleState {
            x: state.x + speed * c * dt,
            y: state.y + speed * s * dt,
            psi: state.psi,
        };
    }
    let psi_next = state.psi + turn_rate * dt;
    let (s0, c0) = state.psi.sin_cos();
    let (s1, c1) = psi_next.sin_cos();
    VehicleState {
        x: state.x + speed * (s1 - s0) / turn_rate,
        y: state.y - speed * (c1 - c0) / turn_rate,
        psi: wrap_angle(psi_next),
    }
}

/// Intruder update: the turn rate is the Gaussian disturbance `w`.
pub fn step_intruder(state: VehicleState, params: &VehicleParams, w: f64, dt: f64) -> VehicleState {
    step_vehicle(state, params.speed, w, dt)
}

/// Straight-line displacement covered in one step: `v·dt` when flying
/// straight, the chord `2(v/|ω|)·sin(|ω|dt/2)` on an arc.
pub fn chord_length(speed: f64, turn_rate: f64, dt: f64) -> f64 {
    if turn_rate.abs() < TURN_RATE_EPS {
        speed * dt
    } else {
        2.0 * speed / turn_rate.abs() * (turn_rate.abs() * dt / 2.0).sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler(state: VehicleState, v: f64, rate: f64, dt: f64, n: usize) -> (f64, f64, f64) {
        let h = dt / n as f64;
        let (mut x, mut y, mut psi) = (state.x, state.y, state.psi);
        for _ in 0..n {
            // midpoint heading keeps the reference second-order accurate
            let mid = psi + 0.5 * rate * h;
            x += v * mid.cos() * h;
            y += v * mid.sin() * h;
            psi += rate * h;
        }
        (x, y, psi)
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(3.0 * PI) + PI).abs() < 1e-12);
        assert!((wrap_angle(-PI - 0.1) - (PI - 0.1)).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), -PI);
        for k in -20..20 {
            let a = 0.37 + k as f64 * 0.9;
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w));
            let turns = (a - w) / TAU;
            assert!((turns - turns.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn straight_step() {
        let s = step_vehicle(VehicleState::new(0.0, 0.0, 0.0), 30.0, 0.0, 1.0);
        assert_eq!(s, VehicleState::new(30.0, 0.0, 0.0));
    }

    #[test]
    fn quarter_turn_matches_fine_integration() {
        let s0 = VehicleState::new(0.0, 0.0, 0.0);
        let s = step_vehicle(s0, 30.0, PI / 2.0, 1.0);
        let expected = 60.0 / PI;
        assert!((s.x - expected).abs() < 1e-9);
        assert!((s.y - expected).abs() < 1e-9);
        assert!((s.psi - PI / 2.0).abs() < 1e-12);
        let (ex, ey, _) = euler(s0, 30.0, PI / 2.0, 1.0, 1_000_000);
        assert!((s.x - ex).abs() < 1e-3);
        assert!((s.y - ey).abs() < 1e-3);
    }

    #[test]
    fn full_circle_returns_home() {
        let s0 = VehicleState::new(5.0, 7.0, 0.4);
        let s = step_vehicle(s0, 42.0, TAU / 3.0, 3.0);
        assert!((s.x - 5.0).abs() < 1e-9);
        assert!((s.y - 7.0).abs() < 1e-9);
        assert!((wrap_angle(s.psi - 0.4)).abs() < 1e-9);
    }

    #[test]
    fn intruder_turn_of_one_sigma() {
        let params = VehicleParams {
            speed: 60.0,
            max_turn_rate: 1.0,
        };
        let sigma = 10f64.to_radians();
        let s = step_intruder(VehicleState::new(0.0, 0.0, 0.0), &params, sigma, 1.0);
        assert!((s.psi - 0.174_532_925_199_432_95).abs() < 1e-12);
        let straight = step_intruder(VehicleState::new(0.0, 0.0, 0.3), &params, 0.0, 1.0);
        assert_eq!(straight, step_vehicle(VehicleState::new(0.0, 0.0, 0.3), 60.0, 0.0, 1.0));
    }

    #[test]
    fn chord_matches_numeric_integration() {
        for &rate in &[0.05, -0.2, 0.6, 1.3] {
            let s0 = VehicleState::new(10.0, -4.0, 1.1);
            let s = step_vehicle(s0, 60.0, rate, 1.0);
            let (ex, ey, _) = euler(s0, 60.0, rate, 1.0, 200_000);
            let numeric = (ex - s0.x).hypot(ey - s0.y);
            assert!((s0.distance_to(&s) - chord_length(60.0, rate, 1.0)).abs() < 1e-9);
            assert!((numeric - chord_length(60.0, rate, 1.0)).abs() < 1e-6);
            assert!(chord_length(60.0, rate, 1.0) <= 60.0);
        }
    }

    #[test]
    fn branch_threshold_continuity() {
        let s0 = VehicleState::new(1.0, 2.0, 0.7);
        let straight = step_vehicle(s0, 30.0, 0.0, 1.0);
        for eps in [1e-8, -1e-8] {
            let arc = step_vehicle(s0, 30.0, eps, 1.0);
            assert!((arc.x - straight.x).abs() < 1e-5);
            assert!((arc.y - straight.y).abs() < 1e-5);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rotate(s: VehicleState, a: f64) -> VehicleState {
            let (sa, ca) = a.sin_cos();
            VehicleState::new(ca * s.x - sa * s.y, sa * s.x + ca * s.y, s.psi + a)
        }

        proptest! {
            #[test]
            fn heading_stays_wrapped(x in -1e4..1e4f64, y in -1e4..1e4f64, psi in -10.0..10.0f64,
                                     rate in -2.0..2.0f64, dt in 0.01..5.0f64) {
                let s = step_vehicle(VehicleState::new(x, y, psi), 30.0, rate, dt);
                prop_assert!((-PI..PI).contains(&s.psi));
                prop_assert!(s.x.is_finite() && s.y.is_finite());
            }

            #[test]
            fn displacement_is_chord(psi in -PI..PI, rate in -1.0..1.0f64, v in 1.0..100.0f64) {
                let s0 = VehicleState::new(0.0, 0.0, psi);
                let s = step_vehicle(s0, v, rate, 1.0);
                let d = s0.distance_to(&s);
                prop_assert!((d - chord_length(v, rate, 1.0)).abs() < 1e-7);
                prop_assert!(d <= v + 1e-9);
            }

            #[test]
            fn rotation_equivariance(x in -1e3..1e3f64, y in -1e3..1e3f64, psi in -PI..PI,
                                     rate in -0.5..0.5f64, alpha in -PI..PI) {
                let s0 = VehicleState::new(x, y, psi);
                let a = step_vehicle(rotate(s0, alpha), 30.0, rate, 1.0);
                let b = rotate(step_vehicle(s0, 30.0, rate, 1.0), alpha);
                prop_assert!((a.x - b.x).abs() < 1e-8);
                prop_assert!((a.y - b.y).abs() < 1e-8);
                prop_assert!(wrap_angle(a.psi - b.psi).abs() < 1e-9);
            }
        }
    }
}
