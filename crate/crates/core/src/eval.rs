//! Monte Carlo evaluation of control laws on replayable encounter scenarios.
//!
//! A scenario is an intruder initial state plus a seed for the intruder's
//! turn-rate noise. Every episode draws `max_steps` disturbances up front
//! from that seed, so any two policies replaying a scenario see the same
//! disturbance at every step.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adp::EncounterModel;
use crate::error::{Error, Result};
use crate::geom::{wrap_angle, VehicleState};
use crate::mdp::{is_event, is_nmac, own_command, reward, transition, EncounterState};
use crate::noise::{domain, keyed_rng, NoiseStream};
use crate::policy::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub intruder_initial: VehicleState,
    pub noise_seed: u64,
}

/// Intruder spawn law and scenario-set sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_unfiltered: usize,
    pub n_filtered: usize,
    pub seed: u64,
    pub spawn_center: (f64, f64),
    pub spawn_radius_min: f64,
    pub spawn_radius_max: f64,
    /// Largest heading offset from the bearing to the spawn center, rad.
    pub spawn_heading_spread: f64,
    /// Spawn positions closer than this to the own start are redrawn, m.
    pub spawn_min_separation: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_unfiltered: 10_000,
            n_filtered: 10_000,
            seed: 0,
            spawn_center: (500.0, 500.0),
            spawn_radius_min: 800.0,
            spawn_radius_max: 1500.0,
            spawn_heading_spread: 135f64.to_radians(),
            spawn_min_separation: 500.0,
        }
    }
}

impl EvalConfig {
    pub fn desk_scale() -> Self {
        Self {
            n_unfiltered: 2_000,
            n_filtered: 2_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_unfiltered == 0 {
            return Err(Error::invalid("n_unfiltered", "must be >= 1"));
        }
        if self.n_filtered == 0 {
            return Err(Error::invalid("n_filtered", "must be >= 1"));
        }
        if !(self.spawn_radius_min >= 0.0 && self.spawn_radius_max > self.spawn_radius_min) {
            return Err(Error::invalid("spawn_radius_min_m", "need 0 <= min < max"));
        }
        if !(self.spawn_min_separation >= 0.0 && self.spawn_min_separation < self.spawn_radius_max) {
            return Err(Error::invalid("spawn_min_separation_m", "must lie in [0, spawn_radius_max_m)"));
        }
        if !(self.spawn_heading_spread >= 0.0 && self.spawn_heading_spread <= PI) {
            return Err(Error::invalid("spawn_heading_spread_deg", "must lie in [0, 180]"));
        }
        Ok(())
    }
}

/// Radius uniform in distance, angle uniform on the circle, heading within
/// the spread of the bearing to the center. Positions too close to
/// `own_start` are redrawn from the same stream.
pub fn sample_scenario<R: Rng>(rng: &mut R, eval: &EvalConfig, own_start: (f64, f64)) -> Scenario {
    let (cx, cy) = eval.spawn_center;
    let (x, y) = loop {
        let r = rng.random_range(eval.spawn_radius_min..=eval.spawn_radius_max);
        let angle = rng.random_range(0.0..2.0 * PI);
        let p = (cx + r * angle.cos(), cy + r * angle.sin());
        if (p.0 - own_start.0).hypot(p.1 - own_start.1) >= eval.spawn_min_separation {
            break p;
        }
    };
    let to_center = (cy - y).atan2(cx - x);
    let offset = rng.random_range(-eval.spawn_heading_spread..=eval.spawn_heading_spread);
    Scenario {
        intruder_initial: VehicleState::new(x, y, wrap_angle(to_center + offset)),
        noise_seed: rng.random(),
    }
}

fn keyed_scenario(model: &EncounterModel, eval: &EvalConfig, tag: u64, index: u64) -> Scenario {
    let start = model.scenario.own_start;
    sample_scenario(&mut keyed_rng(&[eval.seed, tag, index]), eval, (start.x, start.y))
}

/// The `n_unfiltered` scenarios of the deviation-count set.
pub fn unfiltered_set(model: &EncounterModel, eval: &EvalConfig) -> Vec<Scenario> {
    (0..eval.n_unfiltered as u64)
        .into_par_iter()
        .map(|i| keyed_scenario(model, eval, domain::SCENARIO_UNFILTERED, i))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Goal,
    Nmac,
    Timeout,
}

/// One simulated step: the state, the turn rate flown, and the disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace {
    pub state: EncounterState,
    pub turn_rate: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub outcome: Outcome,
    pub total_reward: f64,
    pub deviated: bool,
    pub steps: u32,
    /// Draws taken from the scenario's noise stream.
    pub noise_drawn: u64,
    pub final_state: EncounterState,
    pub trace: Vec<StepTrace>,
}

pub fn simulate_episode(policy: &Policy, scenario: &Scenario, model: &EncounterModel) -> Result<EpisodeRecord> {
    run_episode(policy, scenario, model, false)
}

/// As [`simulate_episode`], also recording every step.
pub fn simulate_episode_traced(policy: &Policy, scenario: &Scenario, model: &EncounterModel) -> Result<EpisodeRecord> {
    run_episode(policy, scenario, model, true)
}

fn run_episode(policy: &Policy, scenario: &Scenario, model: &EncounterModel, traced: bool) -> Result<EpisodeRecord> {
    let cfg = &model.scenario;
    let mut stream = NoiseStream::for_episode(scenario.noise_seed, cfg.sigma_turn);
    let noise = stream.take(cfg.max_steps as usize);
    let mut s = EncounterState::new(cfg.own_start, scenario.intruder_initial);
    let mut total = 0.0;
    let mut trace = Vec::new();
    let mut outcome = None;
    let mut steps = cfg.max_steps;
    for (t, &w) in noise.iter().enumerate() {
        let action = policy.act(&s, model)?;
        total += reward(&s, action, cfg);
        if traced {
            trace.push(StepTrace {
                state: s,
                turn_rate: own_command(&s, action, cfg).turn_rate,
                noise: w,
            });
        }
        if is_event(&s, cfg) {
            outcome = Some(if is_nmac(&s, cfg) { Outcome::Nmac } else { Outcome::Goal });
            steps = t as u32;
        }
        s = transition(&s, action, w, cfg);
        if outcome.is_some() {
            break;
        }
    }
    // the state reached after the last step is classified but not charged
    let outcome = outcome.unwrap_or(if is_nmac(&s, cfg) {
        Outcome::Nmac
    } else if is_event(&s, cfg) {
        Outcome::Goal
    } else {
        Outcome::Timeout
    });
    Ok(EpisodeRecord {
        outcome,
        total_reward: total,
        deviated: s.dev,
        steps,
        noise_drawn: stream.drawn(),
        final_state: s,
        trace,
    })
}

/// Aggregate counts over one scenario set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_episodes: usize,
    pub n_deviations: usize,
    pub n_nmacs: usize,
    pub n_goals: usize,
    pub n_timeouts: usize,
    pub mean_total_reward: f64,
    pub mean_steps: f64,
}

impl EvalReport {
    /// NMAC fraction; on a nominal-NMAC set this is the risk ratio.
    pub fn nmac_fraction(&self) -> f64 {
        self.n_nmacs as f64 / self.n_episodes as f64
    }

    pub fn from_episodes(episodes: &[EpisodeRecord]) -> Self {
        let n = episodes.len();
        let count = |o: Outcome| episodes.iter().filter(|e| e.outcome == o).count();
        let denom = n.max(1) as f64;
        Self {
            n_episodes: n,
            n_deviations: episodes.iter().filter(|e| e.deviated).count(),
            n_nmacs: count(Outcome::Nmac),
            n_goals: count(Outcome::Goal),
            n_timeouts: count(Outcome::Timeout),
            mean_total_reward: episodes.iter().map(|e| e.total_reward).sum::<f64>() / denom,
            mean_steps: episodes.iter().map(|e| e.steps as f64).sum::<f64>() / denom,
        }
    }
}

/// Episodes in scenario order.
pub fn run_episodes(policy: &Policy, scenarios: &[Scenario], model: &EncounterModel) -> Result<Vec<EpisodeRecord>> {
    scenarios.par_iter().map(|sc| simulate_episode(policy, sc, model)).collect()
}

pub fn evaluate(policy: &Policy, scenarios: &[Scenario], model: &EncounterModel) -> Result<EvalReport> {
    Ok(EvalReport::from_episodes(&run_episodes(policy, scenarios, model)?))
}

const FILTER_CHUNK: u64 = 1024;
const FILTER_MAX_ATTEMPTS: u64 = 10_000_000;
const FILTER_MIN_RATE: f64 = 1e-3;

/// The first `n_filtered` candidate scenarios that end in an NMAC under
/// the nominal policy.
pub fn generate_nmac_filtered_set(model: &EncounterModel, eval: &EvalConfig) -> Result<Vec<Scenario>> {
    let n = eval.n_filtered;
    if n == 0 {
        return Err(Error::invalid("n_filtered", "must be >= 1"));
    }
    let mut kept = Vec::with_capacity(n);
    let mut attempts = 0u64;
    while kept.len() < n {
        if attempts >= FILTER_MAX_ATTEMPTS && (kept.len() as f64) < FILTER_MIN_RATE * attempts as f64 {
            return Err(Error::FilterStarved {
                accepted: kept.len(),
                attempts,
            });
        }
        let chunk: Vec<Option<Scenario>> = (attempts..attempts + FILTER_CHUNK)
            .into_par_iter()
            .map(|a| {
                let sc = keyed_scenario(model, eval, domain::SCENARIO_FILTERED, a);
                simulate_episode(&Policy::Nominal, &sc, model).map(|e| (e.outcome == Outcome::Nmac).then_some(sc))
            })
            .collect::<Result<_>>()?;
        attempts += FILTER_CHUNK;
        kept.extend(chunk.into_iter().flatten().take(n - kept.len()));
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureConfig;
    use crate::mdp::ScenarioConfig;

    fn model() -> EncounterModel {
        EncounterModel::new(ScenarioConfig::default(), &FeatureConfig::default()).unwrap()
    }

    fn small_eval() -> EvalConfig {
        EvalConfig {
            n_unfiltered: 300,
            n_filtered: 40,
            seed: 3,
            ..EvalConfig::default()
        }
    }

    #[test]
    fn nominal_reaches_goal_in_thirty_steps() {
        let m = model();
        let sc = Scenario {
            intruder_initial: VehicleState::new(-5000.0, 0.0, PI),
            noise_seed: 1,
        };
        let e = simulate_episode(&Policy::Nominal, &sc, &m).unwrap();
        assert_eq!(e.outcome, Outcome::Goal);
        assert_eq!(e.steps, 30);
        assert!(!e.deviated);
        // 30 steps of -1, then the goal stage: -1 + 100
        assert_eq!(e.total_reward, -31.0 + 100.0);
        assert_eq!(e.noise_drawn, m.scenario.max_steps as u64);
    }

    #[test]
    fn spawn_law_bounds() {
        let eval = EvalConfig::default();
        let mut rng = keyed_rng(&[42]);
        for _ in 0..5000 {
            let sc = sample_scenario(&mut rng, &eval, (0.0, 0.0));
            let p = sc.intruder_initial;
            assert!(p.distance_to_point((0.0, 0.0)) >= eval.spawn_min_separation);
            let r = p.distance_to_point(eval.spawn_center);
            assert!((800.0 - 1e-9..=1500.0 + 1e-9).contains(&r));
            let off = wrap_angle(p.psi - p.bearing_to_point(eval.spawn_center));
            assert!(off.abs() <= eval.spawn_heading_spread + 1e-9);
        }
    }

    #[test]
    fn scenario_sets_are_reproducible() {
        let e = small_eval();
        let m = model();
        assert_eq!(unfiltered_set(&m, &e), unfiltered_set(&m, &e));
    }

    #[test]
    fn filtered_set_replays_its_nmacs() {
        let m = model();
        let e = small_eval();
        let set = generate_nmac_filtered_set(&m, &e).unwrap();
        assert_eq!(set.len(), 40);
        let report = evaluate(&Policy::Nominal, &set, &m).unwrap();
        assert_eq!(report.n_nmacs, 40);
        assert_eq!(report.nmac_fraction(), 1.0);
        assert_eq!(set, generate_nmac_filtered_set(&m, &e).unwrap());
    }

    #[test]
    fn report_accounting() {
        let m = model();
        let set = unfiltered_set(&m, &small_eval());
        for p in [Policy::Nominal, Policy::StaticTrl(300.0)] {
            let r = evaluate(&p, &set, &m).unwrap();
            assert_eq!(r.n_nmacs + r.n_goals + r.n_timeouts, r.n_episodes);
            assert!(r.n_deviations <= r.n_episodes);
            assert_eq!(r, evaluate(&p, &set, &m).unwrap());
        }
        assert_eq!(evaluate(&Policy::Nominal, &set, &m).unwrap().n_deviations, 0);
    }

    #[test]
    fn deviation_implies_a_turn() {
        let m = model();
        for sc in unfiltered_set(&m, &small_eval()).iter().take(100) {
            let e = simulate_episode_traced(&Policy::StaticTrl(400.0), sc, &m).unwrap();
            if e.deviated {
                assert!(e.trace.iter().any(|t| t.turn_rate.abs() >= crate::geom::TURN_RATE_EPS));
            }
        }
    }

    #[test]
    fn larger_separation_deviates_more() {
        let m = model();
        let set = unfiltered_set(&m, &small_eval());
        let small = evaluate(&Policy::StaticTrl(200.0), &set, &m).unwrap();
        let huge = evaluate(&Policy::StaticTrl(5000.0), &set, &m).unwrap();
        assert!(huge.n_deviations > small.n_deviations);
        assert!(huge.n_deviations > 2 * small.n_deviations);
        assert!(huge.n_deviations as f64 > 0.6 * set.len() as f64);
    }
}
