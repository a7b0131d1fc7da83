//! The encounter MDP: states, actions, reward, transition, and the
//! post-decision split of the transition into a deterministic own-aircraft
//! half (`post_decision`) and a stochastic intruder half
//! (`complete_post_decision`).
//!
//! A state whose own aircraft is inside the goal region, or whose aircraft
//! are within the NMAC radius, is an *event* state. Event states are still
//! ordinary (non-terminal) states: they collect their stage reward, and
//! every transition out of them lands in the absorbing terminal state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{step_intruder, step_vehicle, wrap_angle, VehicleParams, VehicleState, TURN_RATE_EPS};
use crate::trl::{track_controller, trl_resolve, TrlConfig};

/// Heading offsets from the direct-to-goal heading above this count as a deviation.
pub const DEVIATION_EPS: f64 = 1e-6;

/// 500 ft in meters.
pub const NMAC_RADIUS_M: f64 = 152.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncounterState {
    pub own: VehicleState,
    pub intruder: VehicleState,
    /// Latched once the own aircraft has left its nominal path.
    pub dev: bool,
    pub terminal: bool,
}

impl EncounterState {
    pub fn new(own: VehicleState, intruder: VehicleState) -> Self {
        Self {
            own,
            intruder,
            dev: false,
            terminal: false,
        }
    }

    pub fn with_dev(mut self, dev: bool) -> Self {
        self.dev = dev;
        self
    }
}

/// Own state and deviation latch one step ahead, paired with the current
/// intruder state. `terminal` marks the image of an event state, whose
/// completion is the terminal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostDecisionState {
    pub own_next: VehicleState,
    pub intruder_now: VehicleState,
    pub dev_next: bool,
    pub terminal: bool,
}

impl PostDecisionState {
    /// The same point viewed as a member of the state space.
    pub fn as_state(&self) -> EncounterState {
        EncounterState {
            own: self.own_next,
            intruder: self.intruder_now,
            dev: self.dev_next,
            terminal: self.terminal,
        }
    }
}

/// What the own aircraft's decision layer selects each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    /// Separation parameter `D` (meters) handed to the resolution logic.
    Separation(f64),
    /// Turn rate (rad/s) commanded directly, bypassing the resolution logic.
    TurnRate(f64),
}

impl Action {
    pub fn value(&self) -> f64 {
        match *self {
            Action::Separation(d) => d,
            Action::TurnRate(r) => r,
        }
    }
}

/// Physical constants and reward weights of one encounter model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// m/s
    pub own_speed: f64,
    /// m/s
    pub intruder_speed: f64,
    /// rad/s
    pub max_turn_rate: f64,
    /// Standard deviation of the intruder turn rate, rad/s.
    pub sigma_turn: f64,
    pub d_nmac: f64,
    pub d_goal: f64,
    pub goal: (f64, f64),
    pub own_start: VehicleState,
    pub dt: f64,
    pub max_steps: u32,
    pub c_step: f64,
    pub r_goal: f64,
    pub c_dev: f64,
    pub lambda: f64,
    pub trl: TrlConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            own_speed: 30.0,
            intruder_speed: 60.0,
            max_turn_rate: 18.7f64.to_radians(),
            sigma_turn: 10f64.to_radians(),
            d_nmac: NMAC_RADIUS_M,
            d_goal: 100.0,
            goal: (1000.0, 0.0),
            own_start: VehicleState::new(0.0, 0.0, 0.0),
            dt: 1.0,
            max_steps: 100,
            c_step: 1.0,
            r_goal: 100.0,
            c_dev: 100.0,
            lambda: 1000.0,
            trl: TrlConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn own_params(&self) -> VehicleParams {
        VehicleParams {
            speed: self.own_speed,
            max_turn_rate: self.max_turn_rate,
        }
    }

    pub fn intruder_params(&self) -> VehicleParams {
        VehicleParams {
            speed: self.intruder_speed,
            max_turn_rate: f64::INFINITY,
        }
    }

    /// Check every invariant, naming the offending key on failure.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("own_speed_mps", self.own_speed),
            ("intruder_speed_mps", self.intruder_speed),
            ("max_turn_rate_deg_s", self.max_turn_rate),
            ("d_nmac_m", self.d_nmac),
            ("d_goal_m", self.d_goal),
            ("dt_s", self.dt),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(key, format!("must be finite and > 0, got {v}")));
            }
        }
        let nonneg = [
            ("sigma_turn_deg_s", self.sigma_turn),
            ("c_step", self.c_step),
            ("r_goal", self.r_goal),
            ("c_dev", self.c_dev),
            ("lambda", self.lambda),
        ];
        for (key, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.goal.0.is_finite() && self.goal.1.is_finite()) {
            return Err(Error::invalid("goal_x_m", "goal must be finite"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", "must be >= 1"));
        }
        if self.trl.n_headings == 0 {
            return Err(Error::invalid("trl_n_headings", "must be >= 1"));
        }
        Ok(())
    }
}

pub fn is_nmac(s: &EncounterState, cfg: &ScenarioConfig) -> bool {
    s.own.distance_to(&s.intruder) <= cfg.d_nmac
}

pub fn in_goal(own: &VehicleState, cfg: &ScenarioConfig) -> bool {
    own.distance_to_point(cfg.goal) <= cfg.d_goal
}

/// Goal or NMAC: the stage reward is collected and the next state is terminal.
pub fn is_event(s: &EncounterState, cfg: &ScenarioConfig) -> bool {
    is_nmac(s, cfg) || in_goal(&s.own, cfg)
}

/// The own aircraft's response to an action at `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OwnCommand {
    pub turn_rate: f64,
    pub deviates: bool,
}

/// Turn rate the own aircraft flies under `action`, and whether taking it
/// leaves the nominal path for the first time.
pub fn own_command(s: &EncounterState, action: Action, cfg: &ScenarioConfig) -> OwnCommand {
    match action {
        Action::Separation(d) => {
            let heading = trl_resolve(s, d, cfg);
            let turn_rate = track_controller(&s.own, heading, &cfg.own_params(), cfg.dt);
            let off_nominal = wrap_angle(heading - s.own.bearing_to_point(cfg.goal)).abs() > DEVIATION_EPS;
            OwnCommand {
                turn_rate,
                deviates: !s.dev && off_nominal,
            }
        }
        Action::TurnRate(r) => {
            let turn_rate = r.clamp(-cfg.max_turn_rate, cfg.max_turn_rate);
            OwnCommand {
                turn_rate,
                deviates: !s.dev && turn_rate.abs() >= TURN_RATE_EPS,
            }
        }
    }
}

pub fn deviates(s: &EncounterState, action: Action, cfg: &ScenarioConfig) -> bool {
    own_command(s, action, cfg).deviates
}

fn stage_reward(s: &EncounterState, deviates: bool, cfg: &ScenarioConfig) -> f64 {
    if s.terminal {
        return 0.0;
    }
    let mut r = -cfg.c_step;
    if in_goal(&s.own, cfg) {
        r += cfg.r_goal;
    }
    if deviates {
        r -= cfg.c_dev;
    }
    if is_nmac(s, cfg) {
        r -= cfg.lambda;
    }
    r
}

pub fn reward(s: &EncounterState, action: Action, cfg: &ScenarioConfig) -> f64 {
    if s.terminal {
        return 0.0;
    }
    stage_reward(s, deviates(s, action, cfg), cfg)
}

/// Reward together with the post-decision state, sharing one
/// resolution-logic evaluation.
pub fn reward_and_post_decision(
    s: &EncounterState,
    action: Action,
    cfg: &ScenarioConfig,
) -> Result<(f64, PostDecisionState)> {
    if s.terminal {
        return Err(Error::TerminalState);
    }
    let cmd = own_command(s, action, cfg);
    Ok((stage_reward(s, cmd.deviates, cfg), post_decision_from_command(s, cmd, cfg)))
}

fn post_decision_from_command(s: &EncounterState, cmd: OwnCommand, cfg: &ScenarioConfig) -> PostDecisionState {
    let event = is_event(s, cfg);
    let own_next = if event {
        s.own
    } else {
        step_vehicle(s.own, cfg.own_speed, cmd.turn_rate, cfg.dt)
    };
    PostDecisionState {
        own_next,
        intruder_now: s.intruder,
        dev_next: s.dev || cmd.deviates,
        terminal: event,
    }
}

/// The deterministic half of the transition.
pub fn post_decision(s: &EncounterState, action: Action, cfg: &ScenarioConfig) -> Result<PostDecisionState> {
    if s.terminal {
        return Err(Error::TerminalState);
    }
    Ok(post_decision_from_command(s, own_command(s, action, cfg), cfg))
}

/// The stochastic half: advance the intruder with disturbance `w`.
pub fn complete_post_decision(q: &PostDecisionState, w: f64, cfg: &ScenarioConfig) -> EncounterState {
    if q.terminal {
        return q.as_state();
    }
    EncounterState {
        own: q.own_next,
        intruder: step_intruder(q.intruder_now, &cfg.intruder_params(), w, cfg.dt),
        dev: q.dev_next,
        terminal: false,
    }
}

/// Full transition `F(s, a, w)`.
pub fn transition(s: &EncounterState, action: Action, w: f64, cfg: &ScenarioConfig) -> EncounterState {
    if s.terminal {
        return *s;
    }
    let cmd = own_command(s, action, cfg);
    let dev = s.dev || cmd.deviates;
    if is_event(s, cfg) {
        return EncounterState {
            own: s.own,
            intruder: s.intruder,
            dev,
            terminal: true,
        };
    }
    EncounterState {
        own: step_vehicle(s.own, cfg.own_speed, cmd.turn_rate, cfg.dt),
        intruder: step_intruder(s.intruder, &cfg.intruder_params(), w, cfg.dt),
        dev,
        terminal: false,
    }
}
