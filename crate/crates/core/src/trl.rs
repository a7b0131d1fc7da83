//! Closest-approach geometry and the trusted resolution logic.
//!
//! The resolution logic evaluates a fan of straight candidate headings
//! around the current own heading, predicts the miss distance of each
//! against a straight-flying intruder, and returns the candidate closest
//! to the goal heading that keeps the predicted miss distance at or above
//! the requested separation `D`. When no candidate reaches `D` it returns
//! the goal-closest candidate among those with the largest miss distance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, VehicleParams, VehicleState};
use crate::mdp::{EncounterState, ScenarioConfig};

/// Relative speeds below this (squared, m²/s²) count as parallel tracks.
const REL_SPEED_SQ_EPS: f64 = 1e-9;
/// Slack used when collecting the candidates that attain the best miss distance.
const BEST_SEPARATION_SLACK: f64 = 1e-6;
/// Goal-offset ties within this many radians go to the lower candidate index.
const HEADING_TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrlConfig {
    /// `N`: candidates are spaced `π/N` apart, `2N + 1` in total.
    pub n_headings: u32,
}

impl Default for TrlConfig {
    fn default() -> Self {
        Self { n_headings: 18 }
    }
}

impl TrlConfig {
    pub fn candidate_count(&self) -> usize {
        2 * self.n_headings as usize + 1
    }
}

/// Candidate headings `ψ + nπ/N` for `n = -N..=N`, in index order.
pub fn candidate_headings(own_psi: f64, cfg: &TrlConfig) -> Vec<f64> {
    let n = cfg.n_headings as i64;
    (-n..=n)
        .map(|k| wrap_angle(own_psi + k as f64 * PI / n as f64))
        .collect()
}

/// Relative position (intruder minus own) and relative velocity when the
/// own aircraft flies `psi_cand` and the intruder holds its heading.
fn relative_motion(s: &EncounterState, psi_cand: f64, cfg: &ScenarioConfig) -> ([f64; 2], [f64; 2]) {
    let dp = [s.intruder.x - s.own.x, s.intruder.y - s.own.y];
    let (si, ci) = s.intruder.psi.sin_cos();
    let (so, co) = psi_cand.sin_cos();
    let dv = [
        cfg.intruder_speed * ci - cfg.own_speed * co,
        cfg.intruder_speed * si - cfg.own_speed * so,
    ];
    (dp, dv)
}

/// Separation `tau` seconds ahead with both aircraft flying straight.
pub fn pairwise_distance(s: &EncounterState, psi_cand: f64, tau: f64, cfg: &ScenarioConfig) -> f64 {
    let (dp, dv) = relative_motion(s, psi_cand, cfg);
    (dp[0] + tau * dv[0]).hypot(dp[1] + tau * dv[1])
}

/// Time of closest approach, clamped to the future.
pub fn tau_min(s: &EncounterState, psi_cand: f64, cfg: &ScenarioConfig) -> f64 {
    let (dp, dv) = relative_motion(s, psi_cand, cfg);
    let rel_speed_sq = dv[0] * dv[0] + dv[1] * dv[1];
    if rel_speed_sq < REL_SPEED_SQ_EPS {
        return 0.0;
    }
    (-(dp[0] * dv[0] + dp[1] * dv[1]) / rel_speed_sq).max(0.0)
}

/// Predicted miss distance for candidate heading `psi_cand`.
pub fn d_min(s: &EncounterState, psi_cand: f64, cfg: &ScenarioConfig) -> f64 {
    pairwise_distance(s, psi_cand, tau_min(s, psi_cand, cfg), cfg)
}

/// Outcome of one resolution-logic evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub heading: f64,
    /// Index into [`candidate_headings`], i.e. `n + N`.
    pub index: usize,
    /// Whether some candidate reached the requested separation.
    pub feasible: bool,
    /// Largest predicted miss distance over all candidates.
    pub best_separation: f64,
}

/// Run the resolution logic and report which branch was taken.
pub fn trl_resolve_detailed(s: &EncounterState, separation: f64, cfg: &ScenarioConfig) -> Resolution {
    let candidates = candidate_headings(s.own.psi, &cfg.trl);
    let misses: Vec<f64> = candidates.iter().map(|&c| d_min(s, c, cfg)).collect();
    let best = misses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let goal_heading = s.own.bearing_to_point(cfg.goal);
    let feasible = best >= separation;

    let mut chosen: Option<(usize, f64)> = None;
    for (i, (&cand, &miss)) in candidates.iter().zip(&misses).enumerate() {
        let admissible = if feasible {
            miss >= separation
        } else {
            miss >= best - BEST_SEPARATION_SLACK
        };
        if !admissible {
            continue;
        }
        let offset = wrap_angle(cand - goal_heading).abs();
        match chosen {
            Some((_, best_offset)) if offset >= best_offset - HEADING_TIE_EPS => {}
            _ => chosen = Some((i, offset)),
        }
    }
    // the admissible set always contains a maximizer of the miss distance
    let (index, _) = chosen.expect("resolution candidate set is never empty");
    Resolution {
        heading: candidates[index],
        index,
        feasible,
        best_separation: best,
    }
}

/// Resolution heading for requested separation `separation` (meters).
pub fn trl_resolve(s: &EncounterState, separation: f64, cfg: &ScenarioConfig) -> f64 {
    trl_resolve_detailed(s, separation, cfg).heading
}

/// Turn-rate command that captures `psi_resolution` within one step when
/// the turn-rate limit allows it, saturating otherwise.
pub fn track_controller(own: &VehicleState, psi_resolution: f64, params: &VehicleParams, dt: f64) -> f64 {
    let error = wrap_angle(psi_resolution - own.psi);
    (error / dt).clamp(-params.max_turn_rate, params.max_turn_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::VehicleState;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    fn state(own: (f64, f64, f64), intr: (f64, f64, f64)) -> EncounterState {
        EncounterState::new(
            VehicleState::new(own.0, own.1, own.2),
            VehicleState::new(intr.0, intr.1, intr.2),
        )
    }

    #[test]
    fn head_on_geometry() {
        let c = cfg();
        let s = state((0.0, 0.0, 0.0), (900.0, 0.0, PI));
        assert!((pairwise_distance(&s, 0.0, 0.0, &c) - 900.0).abs() < 1e-12);
        assert!(pairwise_distance(&s, 0.0, 10.0, &c).abs() < 1e-9);
        assert!((tau_min(&s, 0.0, &c) - 10.0).abs() < 1e-12);
        assert!(d_min(&s, 0.0, &c).abs() < 1e-9);
    }

    #[test]
    fn receding_intruder_clamps_to_now() {
        let mut c = cfg();
        c.intruder_speed = 20.0;
        let s = state((0.0, 0.0, 0.0), (-400.0, 0.0, 0.0));
        assert_eq!(tau_min(&s, 0.0, &c), 0.0);
        assert!((d_min(&s, 0.0, &c) - 400.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_equal_velocity_keeps_separation() {
        let mut c = cfg();
        c.intruder_speed = c.own_speed;
        let s = state((0.0, 0.0, 0.0), (0.0, 300.0, 0.0));
        assert_eq!(tau_min(&s, 0.0, &c), 0.0);
        assert!((d_min(&s, 0.0, &c) - 300.0).abs() < 1e-12);
    }

    #[test]
    fn origin_form_matches_relative_form() {
        let c = cfg();
        let (vo, vi) = (c.own_speed, c.intruder_speed);
        for k in 0..200 {
            let t = k as f64;
            let (xi, yi, psi_i) = (700.0 * (0.3 * t).cos(), 500.0 * (0.7 * t).sin(), 0.11 * t);
            let cand = 0.37 * t;
            let s = state((0.0, 0.0, 0.2), (xi, yi, psi_i));
            let psi_i = s.intruder.psi;
            let a = -vi * xi * psi_i.cos() - vi * yi * psi_i.sin();
            let b = vo * xi * cand.cos() + vo * yi * cand.sin();
            let cc = vo * vo + vi * vi * psi_i.cos().powi(2) + vi * vi * psi_i.sin().powi(2);
            let d = vo * vi * (psi_i.cos() * cand.cos() + psi_i.sin() * cand.sin());
            let printed = ((a + b) / (cc - 2.0 * d)).max(0.0);
            assert!((printed - tau_min(&s, cand, &c)).abs() < 1e-9 * printed.max(1.0));
        }
    }

    #[test]
    fn candidate_set_cardinality() {
        let trl = TrlConfig::default();
        assert_eq!(candidate_headings(0.3, &trl).len(), 37);
        assert_eq!(trl.candidate_count(), 37);
        assert_eq!(candidate_headings(0.3, &trl)[18], 0.3);
    }

    #[test]
    fn distant_intruder_keeps_goal_heading() {
        let c = cfg();
        let s = state((0.0, 0.0, 0.0), (-10_000.0, 0.0, PI));
        for d in [0.0, 152.4, 500.0, 1000.0] {
            let r = trl_resolve_detailed(&s, d, &c);
            assert!(r.feasible);
            assert_eq!(r.heading, 0.0);
            assert_eq!(r.index, 18);
        }
    }

    #[test]
    fn unreachable_separation_returns_a_maximizer() {
        let c = cfg();
        let s = state((0.0, 0.0, 0.0), (300.0, 20.0, PI));
        let r = trl_resolve_detailed(&s, 5_000.0, &c);
        assert!(!r.feasible);
        let brute = candidate_headings(s.own.psi, &c.trl)
            .iter()
            .map(|&h| d_min(&s, h, &c))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((d_min(&s, r.heading, &c) - brute).abs() <= 1e-6);
        assert_eq!(r.best_separation, brute);
    }

    #[test]
    fn head_on_conflict_forces_offset() {
        let c = cfg();
        let s = state((0.0, 0.0, 0.0), (900.0, 0.0, PI));
        let r = trl_resolve_detailed(&s, 152.4, &c);
        assert!(r.feasible);
        assert!(r.heading.abs() > 0.1);
        assert!(d_min(&s, r.heading, &c) >= 152.4);
        // mirrored candidates tie on goal offset; the lower index wins
        assert!(r.heading < 0.0);
    }

    #[test]
    fn controller_examples() {
        let params = VehicleParams {
            speed: 30.0,
            max_turn_rate: 18.7f64.to_radians(),
        };
        let own = VehicleState::new(0.0, 0.0, 0.5);
        assert_eq!(track_controller(&own, 0.5, &params, 1.0), 0.0);
        let five = track_controller(&own, 0.5 + 5f64.to_radians(), &params, 1.0);
        assert!((five - 5f64.to_radians()).abs() < 1e-12);
        let sat = track_controller(&own, 0.5 + PI / 2.0, &params, 1.0);
        assert_eq!(sat, 18.7f64.to_radians());
        let sat_neg = track_controller(&own, 0.5 - PI / 2.0, &params, 1.0);
        assert_eq!(sat_neg, -18.7f64.to_radians());
    }
}
