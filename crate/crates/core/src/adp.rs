//! Offline solver: projected value iteration on sampled states, then a
//! least-squares fit of the post-decision value function.
//!
//! All randomness is drawn from keyed streams indexed by (seed, iteration,
//! sample), and per-sample work is collected in sample order before the
//! fit, so the weights are bitwise independent of the rayon thread count.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{value, Architecture, FeatureMap, FeatureConfig, WeightVector};
use crate::lstsq::fit_least_squares;
use crate::mdp::{complete_post_decision, reward_and_post_decision, Action, EncounterState, PostDecisionState, ScenarioConfig};
use crate::noise::{domain, keyed_rng, NoiseStream};

/// Scenario constants plus the feature map built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct EncounterModel {
    pub scenario: ScenarioConfig,
    pub features: FeatureMap,
}

impl EncounterModel {
    pub fn new(scenario: ScenarioConfig, features: &FeatureConfig) -> Result<Self> {
        scenario.validate()?;
        let features = FeatureMap::new(features, &scenario)?;
        Ok(Self { scenario, features })
    }
}

/// Discrete action set searched by the backup and by the online policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionSet {
    /// Separation parameters `D` in meters, handed to the resolution logic.
    Separation(Vec<f64>),
    /// Turn rates in rad/s, flown directly.
    TurnRate(Vec<f64>),
}

impl ActionSet {
    /// `{1, 1.5, 2, 3, 4} × D_NMAC`.
    pub fn default_separation(scenario: &ScenarioConfig) -> Self {
        Self::separation_multiples(scenario, &[1.0, 1.5, 2.0, 3.0, 4.0])
    }

    pub fn separation_multiples(scenario: &ScenarioConfig, multiples: &[f64]) -> Self {
        ActionSet::Separation(multiples.iter().map(|m| m * scenario.d_nmac).collect())
    }

    /// `{-1, -1/2, 0, 1/2, 1} × ψ̇_max`.
    pub fn default_turn_rate(scenario: &ScenarioConfig) -> Self {
        Self::turn_rate_fractions(scenario, &[-1.0, -0.5, 0.0, 0.5, 1.0])
    }

    pub fn turn_rate_fractions(scenario: &ScenarioConfig, fractions: &[f64]) -> Self {
        ActionSet::TurnRate(fractions.iter().map(|f| f * scenario.max_turn_rate).collect())
    }

    pub fn actions(&self) -> Vec<Action> {
        match self {
            ActionSet::Separation(ds) => ds.iter().map(|&d| Action::Separation(d)).collect(),
            ActionSet::TurnRate(rs) => rs.iter().map(|&r| Action::TurnRate(r)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ActionSet::Separation(v) | ActionSet::TurnRate(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Axis-aligned region the own aircraft is sampled from, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        Self {
            x_min: -200.0,
            x_max: 1200.0,
            y_min: -800.0,
            y_max: 800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_state: usize,
    pub n_ev: usize,
    pub n_vi: usize,
    pub n_q: usize,
    pub ridge: f64,
    /// Discount on the expected next-state value; 1 is the undiscounted sum.
    pub gamma: f64,
    pub seed: u64,
    pub sample_box: SampleBox,
    pub action_set: ActionSet,
    /// The returned weights are the mean of the last `average_last` rounds.
    pub average_last: usize,
}

impl SolverConfig {
    /// Full-size settings for the separation-parameter policy.
    pub fn paper_scale(scenario: &ScenarioConfig) -> Self {
        Self {
            n_state: 10_000,
            n_ev: 20,
            n_vi: 35,
            n_q: 50_000,
            ridge: 1e-6,
            gamma: 1.0,
            seed: 0,
            sample_box: SampleBox::default(),
            action_set: ActionSet::default_separation(scenario),
            average_last: 1,
        }
    }

    /// Reduced settings that finish in minutes on one core.
    pub fn desk_scale(scenario: &ScenarioConfig) -> Self {
        Self {
            n_state: 4_000,
            n_vi: 20,
            n_q: 10_000,
            average_last: 10,
            ..Self::paper_scale(scenario)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("n_state", self.n_state), ("n_ev", self.n_ev), ("n_vi", self.n_vi), ("n_q", self.n_q)] {
            if v == 0 {
                return Err(Error::invalid(key, "must be >= 1"));
            }
        }
        if self.average_last == 0 || self.average_last > self.n_vi {
            return Err(Error::invalid("average_last", "must lie in [1, n_vi]"));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::invalid("ridge", "must be finite and >= 0"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid("gamma", "must lie in (0, 1]"));
        }
        let b = &self.sample_box;
        if !(b.x_min < b.x_max && b.y_min < b.y_max) {
            return Err(Error::invalid("sample_x_min_m", "sample box must have positive extent"));
        }
        if self.action_set.is_empty() {
            return Err(Error::invalid("action_set", "at least one action required"));
        }
        Ok(())
    }
}

/// Draw one sample state from stream `(seed, tag, iteration, index)`.
///
/// The own position is uniform over the sample box and the latch is a fair
/// coin. A latched aircraft gets a uniform heading; an unlatched one is on
/// its nominal path and therefore points at the goal. The intruder sits on
/// a uniformly chosen intruder-grid node.
pub fn sample_state(model: &EncounterModel, solver: &SolverConfig, tag: u64, iteration: u64, index: u64) -> EncounterState {
    let mut rng = keyed_rng(&[solver.seed, tag, iteration, index]);
    let b = &solver.sample_box;
    let x = rng.random_range(b.x_min..b.x_max);
    let y = rng.random_range(b.y_min..b.y_max);
    let dev: bool = rng.random();
    let psi_uniform = rng.random_range(-PI..PI);
    let node = rng.random_range(0..model.features.intruder_grid.node_count());
    let mut own = crate::geom::VehicleState::new(x, y, 0.0);
    own.psi = if dev {
        psi_uniform
    } else {
        crate::geom::wrap_angle(own.bearing_to_point(model.scenario.goal))
    };
    EncounterState {
        own,
        intruder: model.features.intruder_at_node(&own, node),
        dev,
        terminal: false,
    }
}

/// The `n_state` training states of one value-iteration round.
pub fn sample_training_states(model: &EncounterModel, solver: &SolverConfig, iteration: u64) -> Vec<EncounterState> {
    (0..solver.n_state as u64)
        .into_par_iter()
        .map(|n| sample_state(model, solver, domain::TRAIN_STATE, iteration, n))
        .collect()
}

/// Result of one sampled Bellman backup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backup {
    pub value: f64,
    /// Index of the maximizing action (first one on ties).
    pub best_action: usize,
}

/// `max_a { R(s,a) + γ·mean_m V(F(s,a,w_m)) }`, reusing the same noise
/// draws for every action and evaluating each action's own-aircraft
/// update once.
pub fn backup_sample<A: Architecture + ?Sized>(
    s: &EncounterState,
    theta: &WeightVector,
    model: &EncounterModel,
    arch: &A,
    solver: &SolverConfig,
    noise: &[f64],
) -> Result<Backup> {
    if s.terminal {
        return Err(Error::TerminalState);
    }
    assert_eq!(noise.len(), solver.n_ev, "one noise draw per expectation sample");
    let cfg = &model.scenario;
    let mut best = Backup {
        value: f64::NEG_INFINITY,
        best_action: 0,
    };
    for (i, action) in solver.action_set.actions().into_iter().enumerate() {
        let (r, q) = reward_and_post_decision(s, action, cfg)?;
        let expected = expected_completion_value(&q, theta, arch, cfg, noise)?;
        let total = r + solver.gamma * expected;
        if total > best.value {
            best = Backup {
                value: total,
                best_action: i,
            };
        }
    }
    Ok(best)
}

fn expected_completion_value<A: Architecture + ?Sized>(
    q: &PostDecisionState,
    theta: &WeightVector,
    arch: &A,
    cfg: &ScenarioConfig,
    noise: &[f64],
) -> Result<f64> {
    if q.terminal {
        return Ok(0.0);
    }
    let (lo, hi) = return_bounds(cfg);
    let mut acc = 0.0;
    for &w in noise {
        acc += value(&complete_post_decision(q, w, cfg), theta, arch)?.clamp(lo, hi);
    }
    Ok(acc / noise.len() as f64)
}

/// Range of attainable episode returns. Estimates outside it are clamped
/// before entering a backup; left unclamped, the max over actions feeds
/// extrapolation errors of the linear fit back into the next round.
pub fn return_bounds(cfg: &ScenarioConfig) -> (f64, f64) {
    let hi = cfg.r_goal - cfg.c_step;
    let lo = -(cfg.c_step * f64::from(cfg.max_steps) + cfg.c_dev + cfg.lambda);
    (lo, hi.max(lo))
}

/// Per-round record emitted by the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub stage: String,
    pub iteration: usize,
    pub residual_rms: f64,
    pub theta_norm: f64,
    pub mean_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub theta: WeightVector,
    pub diagnostics: Vec<IterationDiagnostics>,
}

/// Approximate value iteration `θ_{k+1} = fit(backup(θ_k))` from `θ_0 = 0`.
/// Returns the mean of the last `average_last` iterates.
pub fn projected_value_iteration<A: Architecture + ?Sized>(
    model: &EncounterModel,
    arch: &A,
    solver: &SolverConfig,
    mut on_iteration: impl FnMut(&IterationDiagnostics),
) -> Result<SolveOutput> {
    solver.validate()?;
    let mut theta = WeightVector::zeros(arch.len());
    let mut diagnostics = Vec::with_capacity(solver.n_vi);
    let mut sum = WeightVector::zeros(arch.len());
    for k in 0..solver.n_vi {
        let states = sample_training_states(model, solver, k as u64);
        let targets: Vec<f64> = states
            .par_iter()
            .enumerate()
            .map(|(n, s)| {
                let noise = NoiseStream::new(&[solver.seed, domain::TRAIN_NOISE, k as u64, n as u64], model.scenario.sigma_turn)
                    .take(solver.n_ev);
                backup_sample(s, &theta, model, arch, solver, &noise).map(|b| b.value)
            })
            .collect::<Result<_>>()?;
        let rows: Vec<_> = states.par_iter().map(|s| arch.features(s)).collect();
        let fit = fit_least_squares(&rows, &targets, arch.len(), solver.ridge)?;
        theta = fit.theta;
        if k + solver.average_last >= solver.n_vi {
            for (acc, t) in sum.0.iter_mut().zip(&theta.0) {
                *acc += t;
            }
        }
        let d = IterationDiagnostics {
            stage: "value_iteration".into(),
            iteration: k,
            residual_rms: fit.residual_rms,
            theta_norm: theta.norm(),
            mean_target: targets.iter().sum::<f64>() / targets.len() as f64,
        };
        on_iteration(&d);
        diagnostics.push(d);
    }
    if solver.average_last > 1 {
        let n = solver.average_last as f64;
        theta = WeightVector(sum.0.iter().map(|t| t / n).collect());
    }
    Ok(SolveOutput { theta, diagnostics })
}

/// Fit `θ_q` so that `β(q)ᵀθ_q ≈ γ·E_w[β(h(q, w))ᵀθ]` over `n_q` sampled
/// post-decision states.
pub fn extract_post_decision_weights<A: Architecture + ?Sized>(
    theta: &WeightVector,
    model: &EncounterModel,
    arch: &A,
    solver: &SolverConfig,
) -> Result<SolveOutput> {
    solver.validate()?;
    if theta.len() != arch.len() {
        return Err(Error::LengthMismatch {
            expected: arch.len(),
            actual: theta.len(),
        });
    }
    let samples: Vec<PostDecisionState> = (0..solver.n_q as u64)
        .into_par_iter()
        .map(|n| {
            let s = sample_state(model, solver, domain::PD_STATE, 0, n);
            PostDecisionState {
                own_next: s.own,
                intruder_now: s.intruder,
                dev_next: s.dev,
                terminal: false,
            }
        })
        .collect();
    let targets: Vec<f64> = samples
        .par_iter()
        .enumerate()
        .map(|(n, q)| {
            let noise =
                NoiseStream::new(&[solver.seed, domain::PD_NOISE, n as u64], model.scenario.sigma_turn).take(solver.n_ev);
            expected_completion_value(q, theta, arch, &model.scenario, &noise).map(|v| solver.gamma * v)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<_> = samples.par_iter().map(|q| arch.features(&q.as_state())).collect();
    let fit = fit_least_squares(&rows, &targets, arch.len(), solver.ridge)?;
    let d = IterationDiagnostics {
        stage: "post_decision".into(),
        iteration: 0,
        residual_rms: fit.residual_rms,
        theta_norm: fit.theta.norm(),
        mean_target: targets.iter().sum::<f64>() / targets.len() as f64,
    };
    Ok(SolveOutput {
        theta: fit.theta,
        diagnostics: vec![d],
    })
}
