//! Flat key/value run configuration.
//!
//! One key per line, TOML syntax, no tables. Key names carry their unit;
//! angles are degrees in the file and radians in memory. Keys left out of
//! the file keep the defaults of the chosen scale.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::adp::{EncounterModel, SolverConfig};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::features::{FeatureConfig, FeatureMap};
use crate::mdp::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Reduced sample sizes that run in minutes on one core.
    Desk,
    /// Full sample sizes.
    Paper,
}

impl Scale {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "desk" => Some(Scale::Desk),
            "paper" => Some(Scale::Paper),
            _ => None,
        }
    }
}

/// Everything a command needs besides its own flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scale: Scale,
    pub scenario: ScenarioConfig,
    pub features: FeatureConfig,
    pub solver: SolverConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn defaults(scale: Scale) -> Self {
        let scenario = ScenarioConfig::default();
        let (solver, eval) = match scale {
            Scale::Desk => (SolverConfig::desk_scale(&scenario), EvalConfig::desk_scale()),
            Scale::Paper => (SolverConfig::paper_scale(&scenario), EvalConfig::default()),
        };
        Self {
            scale,
            scenario,
            features: FeatureConfig::default(),
            solver,
            eval,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        FeatureMap::new(&self.features, &self.scenario)?;
        self.solver.validate()?;
        self.eval.validate()
    }

    pub fn model(&self) -> Result<EncounterModel> {
        EncounterModel::new(self.scenario.clone(), &self.features)
    }

    /// Apply one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &Value) -> Result<()> {
        let setter = KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, f)| f)
            .ok_or_else(|| Error::UnknownKey {
                key: key.to_string(),
                valid: valid_keys().join(", "),
            })?;
        setter(self, key, value)
    }
}

type Setter = fn(&mut RunConfig, &str, &Value) -> Result<()>;

fn float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::invalid(key, "expected a number")),
    }
}

fn count(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::invalid(key, "expected a non-negative integer")),
    }
}

fn seed(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::invalid(key, "expected a non-negative integer")),
    }
}

fn put_float(dst: &mut f64, key: &str, v: &Value) -> Result<()> {
    *dst = float(key, v)?;
    Ok(())
}

fn put_degrees(dst: &mut f64, key: &str, v: &Value) -> Result<()> {
    *dst = float(key, v)?.to_radians();
    Ok(())
}

fn put_count(dst: &mut usize, key: &str, v: &Value) -> Result<()> {
    *dst = count(key, v)?;
    Ok(())
}

fn put_u32(dst: &mut u32, key: &str, v: &Value) -> Result<()> {
    *dst = u32::try_from(count(key, v)?).map_err(|_| Error::invalid(key, "too large"))?;
    Ok(())
}

fn put_seed(dst: &mut u64, key: &str, v: &Value) -> Result<()> {
    *dst = seed(key, v)?;
    Ok(())
}

const KEYS: &[(&str, Setter)] = &[
    ("own_speed_mps", |c, k, v| put_float(&mut c.scenario.own_speed, k, v)),
    ("intruder_speed_mps", |c, k, v| put_float(&mut c.scenario.intruder_speed, k, v)),
    ("max_turn_rate_deg_s", |c, k, v| put_degrees(&mut c.scenario.max_turn_rate, k, v)),
    ("sigma_turn_deg_s", |c, k, v| put_degrees(&mut c.scenario.sigma_turn, k, v)),
    ("d_nmac_m", |c, k, v| put_float(&mut c.scenario.d_nmac, k, v)),
    ("d_goal_m", |c, k, v| put_float(&mut c.scenario.d_goal, k, v)),
    ("goal_x_m", |c, k, v| put_float(&mut c.scenario.goal.0, k, v)),
    ("goal_y_m", |c, k, v| put_float(&mut c.scenario.goal.1, k, v)),
    ("dt_s", |c, k, v| put_float(&mut c.scenario.dt, k, v)),
    ("max_steps", |c, k, v| put_u32(&mut c.scenario.max_steps, k, v)),
    ("c_step", |c, k, v| put_float(&mut c.scenario.c_step, k, v)),
    ("r_goal", |c, k, v| put_float(&mut c.scenario.r_goal, k, v)),
    ("c_dev", |c, k, v| put_float(&mut c.scenario.c_dev, k, v)),
    ("lambda", |c, k, v| put_float(&mut c.scenario.lambda, k, v)),
    ("trl_n_headings", |c, k, v| put_u32(&mut c.scenario.trl.n_headings, k, v)),
    ("intruder_distance_nodes", |c, k, v| put_count(&mut c.features.intruder_distance_nodes, k, v)),
    ("intruder_distance_min_m", |c, k, v| put_float(&mut c.features.intruder_distance_min, k, v)),
    ("intruder_distance_max_m", |c, k, v| put_float(&mut c.features.intruder_distance_max, k, v)),
    ("intruder_distance_exponent", |c, k, v| put_float(&mut c.features.intruder_distance_exponent, k, v)),
    ("intruder_bearing_nodes", |c, k, v| put_count(&mut c.features.intruder_bearing_nodes, k, v)),
    ("intruder_heading_nodes", |c, k, v| put_count(&mut c.features.intruder_heading_nodes, k, v)),
    ("goal_distance_nodes", |c, k, v| put_count(&mut c.features.goal_distance_nodes, k, v)),
    ("goal_distance_max_m", |c, k, v| put_float(&mut c.features.goal_distance_max, k, v)),
    ("goal_bearing_nodes", |c, k, v| put_count(&mut c.features.goal_bearing_nodes, k, v)),
    ("n_state", |c, k, v| put_count(&mut c.solver.n_state, k, v)),
    ("n_ev", |c, k, v| put_count(&mut c.solver.n_ev, k, v)),
    ("n_vi", |c, k, v| put_count(&mut c.solver.n_vi, k, v)),
    ("n_q", |c, k, v| put_count(&mut c.solver.n_q, k, v)),
    ("average_last", |c, k, v| put_count(&mut c.solver.average_last, k, v)),
    ("ridge", |c, k, v| put_float(&mut c.solver.ridge, k, v)),
    ("gamma", |c, k, v| put_float(&mut c.solver.gamma, k, v)),
    ("seed", |c, k, v| put_seed(&mut c.solver.seed, k, v)),
    ("sample_x_min_m", |c, k, v| put_float(&mut c.solver.sample_box.x_min, k, v)),
    ("sample_x_max_m", |c, k, v| put_float(&mut c.solver.sample_box.x_max, k, v)),
    ("sample_y_min_m", |c, k, v| put_float(&mut c.solver.sample_box.y_min, k, v)),
    ("sample_y_max_m", |c, k, v| put_float(&mut c.solver.sample_box.y_max, k, v)),
    ("n_unfiltered", |c, k, v| put_count(&mut c.eval.n_unfiltered, k, v)),
    ("n_filtered", |c, k, v| put_count(&mut c.eval.n_filtered, k, v)),
    ("eval_seed", |c, k, v| put_seed(&mut c.eval.seed, k, v)),
    ("spawn_center_x_m", |c, k, v| put_float(&mut c.eval.spawn_center.0, k, v)),
    ("spawn_center_y_m", |c, k, v| put_float(&mut c.eval.spawn_center.1, k, v)),
    ("spawn_radius_min_m", |c, k, v| put_float(&mut c.eval.spawn_radius_min, k, v)),
    ("spawn_radius_max_m", |c, k, v| put_float(&mut c.eval.spawn_radius_max, k, v)),
    ("spawn_heading_spread_deg", |c, k, v| put_degrees(&mut c.eval.spawn_heading_spread, k, v)),
    ("spawn_min_separation_m", |c, k, v| put_float(&mut c.eval.spawn_min_separation, k, v)),
];

pub fn valid_keys() -> Vec<&'static str> {
    KEYS.iter().map(|(k, _)| *k).collect()
}

/// Parse a configuration document on top of the `scale` defaults.
pub fn parse_config(text: &str, scale: Scale) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
    let mut cfg = RunConfig::defaults(scale);
    for (key, value) in &table {
        if value.is_table() {
            return Err(Error::ConfigParse(format!("`{key}`: tables are not allowed, use flat keys")));
        }
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, scale: Scale) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, scale)
}
