//! Online control laws.
//!
//! The optimized laws pick the action maximizing the stage reward plus the
//! post-decision value of the state the action leads to. Only the
//! deviation charge in the stage reward depends on the action, so with
//! zero post-decision weights the least conservative action wins.

use serde::{Deserialize, Serialize};

use crate::adp::EncounterModel;
use crate::error::{Error, Result};
use crate::features::{value, WeightVector};
use crate::mdp::{reward_and_post_decision, Action, EncounterState};

/// Values closer than this are ties.
pub const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    /// Resolution logic with a fixed separation parameter, meters.
    StaticTrl(f64),
    /// Separation parameter chosen per step from `actions`, meters.
    OptimizedTrl { theta_q: WeightVector, actions: Vec<f64> },
    /// Turn rate chosen per step from `actions`, rad/s.
    DirectTurn { theta_q: WeightVector, actions: Vec<f64> },
    /// Holds the initial heading.
    Nominal,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::StaticTrl(_) => "static",
            Policy::OptimizedTrl { .. } => "optimized-trl",
            Policy::DirectTurn { .. } => "direct",
            Policy::Nominal => "nominal",
        }
    }

    pub fn act(&self, s: &EncounterState, model: &EncounterModel) -> Result<Action> {
        if s.terminal {
            return Err(Error::TerminalState);
        }
        match self {
            Policy::StaticTrl(d) => Ok(Action::Separation(*d)),
            Policy::Nominal => Ok(Action::TurnRate(0.0)),
            Policy::OptimizedTrl { theta_q, actions } => {
                let mut order: Vec<f64> = actions.clone();
                order.sort_by(f64::total_cmp);
                best_action(s, model, theta_q, order.into_iter().map(Action::Separation))
            }
            Policy::DirectTurn { theta_q, actions } => {
                let mut order: Vec<f64> = actions.clone();
                order.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
                best_action(s, model, theta_q, order.into_iter().map(Action::TurnRate))
            }
        }
    }
}

/// Score of `action` at `s`: stage reward plus post-decision value.
pub fn action_score(s: &EncounterState, action: Action, model: &EncounterModel, theta_q: &WeightVector) -> Result<f64> {
    let (r, q) = reward_and_post_decision(s, action, &model.scenario)?;
    Ok(r + value(&q.as_state(), theta_q, &model.features)?)
}

/// First action in `candidates` whose score is within `TIE_EPS` of the best.
fn best_action(
    s: &EncounterState,
    model: &EncounterModel,
    theta_q: &WeightVector,
    candidates: impl Iterator<Item = Action>,
) -> Result<Action> {
    let scored: Vec<(Action, f64)> = candidates
        .map(|a| action_score(s, a, model, theta_q).map(|v| (a, v)))
        .collect::<Result<_>>()?;
    let best = scored.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    scored
        .into_iter()
        .find(|&(_, v)| v >= best - TIE_EPS)
        .map(|(a, _)| a)
        .ok_or_else(|| Error::invalid("action_set", "at least one action required"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adp::ActionSet;
    use crate::features::{Architecture, FeatureConfig};
    use crate::geom::VehicleState;
    use crate::mdp::{post_decision, ScenarioConfig};

    fn model() -> EncounterModel {
        EncounterModel::new(ScenarioConfig::default(), &FeatureConfig::default()).unwrap()
    }

    fn separations(m: &EncounterModel) -> Vec<f64> {
        match ActionSet::default_separation(&m.scenario) {
            ActionSet::Separation(v) => v,
            _ => unreachable!(),
        }
    }

    fn conflict() -> EncounterState {
        EncounterState::new(VehicleState::new(0.0, 0.0, 0.0), VehicleState::new(900.0, 30.0, std::f64::consts::PI))
    }

    #[test]
    fn zero_weights_pick_smallest_separation() {
        let m = model();
        let mut actions = separations(&m);
        actions.reverse();
        let p = Policy::OptimizedTrl {
            theta_q: WeightVector::zeros(m.features.len()),
            actions,
        };
        assert_eq!(p.act(&conflict(), &m).unwrap(), Action::Separation(m.scenario.d_nmac));
    }

    #[test]
    fn zero_weights_pick_zero_turn() {
        let m = model();
        let p = Policy::DirectTurn {
            theta_q: WeightVector::zeros(m.features.len()),
            actions: vec![0.3, -0.3, 0.15, 0.0, -0.15],
        };
        assert_eq!(p.act(&conflict(), &m).unwrap(), Action::TurnRate(0.0));
    }

    #[test]
    fn equal_nonzero_turns_prefer_negative() {
        let m = model();
        let mut cfg = m.scenario.clone();
        cfg.c_dev = 0.0;
        let m = EncounterModel::new(cfg, &FeatureConfig::default()).unwrap();
        let p = Policy::DirectTurn {
            theta_q: WeightVector::zeros(m.features.len()),
            actions: vec![0.3, -0.3],
        };
        assert_eq!(p.act(&conflict(), &m).unwrap(), Action::TurnRate(-0.3));
    }

    #[test]
    fn dominant_action_is_chosen() {
        let m = model();
        let s = conflict();
        let r = m.scenario.max_turn_rate;
        let actions = vec![-r, 0.0, r];
        let weights: Vec<Vec<f64>> = actions
            .iter()
            .map(|&a| {
                let q = post_decision(&s, Action::TurnRate(a), &m.scenario).unwrap();
                let mut dense = vec![0.0; m.features.len()];
                for (i, w) in m.features.features(&q.as_state()) {
                    dense[i] = w;
                }
                dense
            })
            .collect();
        // the node where the full right turn carries the most weight relative to the others
        let (idx, margin) = (0..m.features.len())
            .map(|i| (i, weights[2][i] - weights[0][i].max(weights[1][i])))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(margin > 0.01);
        let mut theta = WeightVector::zeros(m.features.len());
        theta.0[idx] = 1e6;
        let p = Policy::DirectTurn { theta_q: theta, actions };
        assert_eq!(p.act(&s, &m).unwrap(), Action::TurnRate(r));
    }

    #[test]
    fn static_and_nominal_are_constant() {
        let m = model();
        assert_eq!(Policy::StaticTrl(300.0).act(&conflict(), &m).unwrap(), Action::Separation(300.0));
        assert_eq!(Policy::Nominal.act(&conflict(), &m).unwrap(), Action::TurnRate(0.0));
        let mut t = conflict();
        t.terminal = true;
        assert!(Policy::Nominal.act(&t, &m).is_err());
    }
}
