//! Parameter sweeps tracing the deviation / risk-ratio trade-off.
//!
//! Every point of every family is evaluated on the same two scenario sets,
//! so differences between points are paired episode by episode.

use serde::{Deserialize, Serialize};

use crate::adp::{extract_post_decision_weights, projected_value_iteration, ActionSet, EncounterModel, IterationDiagnostics, SolverConfig};
use crate::error::{Error, Result};
use crate::eval::{run_episodes, Outcome, Scenario};
use crate::features::{FeatureConfig, WeightVector};
use crate::mdp::ScenarioConfig;
use crate::policy::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Static,
    OptimizedTrl,
    Direct,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Static => "static",
            Family::OptimizedTrl => "optimized-trl",
            Family::Direct => "direct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "static" => Some(Family::Static),
            "optimized-trl" => Some(Family::OptimizedTrl),
            "direct" => Some(Family::Direct),
            _ => None,
        }
    }

    /// Default sweep values: `D̄` in meters for the static family, `λ` otherwise.
    pub fn default_params(self) -> Vec<f64> {
        match self {
            Family::Static => vec![250.0, 300.0, 350.0, 400.0, 500.0],
            Family::OptimizedTrl => vec![100.0, 316.0, 1000.0, 3160.0, 1e4, 3.16e4],
            Family::Direct => vec![300.0, 500.0, 700.0, 1000.0, 1500.0],
        }
    }

    pub fn action_set(self, scenario: &ScenarioConfig) -> Option<ActionSet> {
        match self {
            Family::Static => None,
            Family::OptimizedTrl => Some(ActionSet::default_separation(scenario)),
            Family::Direct => Some(ActionSet::default_turn_rate(scenario)),
        }
    }
}

/// Output of the offline pipeline for one reward weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: EncounterModel,
    pub solver: SolverConfig,
    pub theta: WeightVector,
    pub theta_q: WeightVector,
    pub diagnostics: Vec<IterationDiagnostics>,
}

impl Trained {
    pub fn policy(&self) -> Policy {
        let theta_q = self.theta_q.clone();
        match &self.solver.action_set {
            ActionSet::Separation(ds) => Policy::OptimizedTrl {
                theta_q,
                actions: ds.clone(),
            },
            ActionSet::TurnRate(rs) => Policy::DirectTurn {
                theta_q,
                actions: rs.clone(),
            },
        }
    }
}

/// Value iteration followed by post-decision extraction for one `λ`.
pub fn train(
    family: Family,
    lambda: f64,
    scenario: &ScenarioConfig,
    features: &FeatureConfig,
    solver: &SolverConfig,
    mut on_iteration: impl FnMut(&IterationDiagnostics),
) -> Result<Trained> {
    let mut scenario = scenario.clone();
    scenario.lambda = lambda;
    let model = EncounterModel::new(scenario, features)?;
    let mut solver = solver.clone();
    solver.action_set = family
        .action_set(&model.scenario)
        .ok_or_else(|| Error::Incompatible("the static family has no weights to train".into()))?;
    let vi = projected_value_iteration(&model, &model.features, &solver, &mut on_iteration)?;
    let pd = extract_post_decision_weights(&vi.theta, &model, &model.features, &solver)?;
    pd.diagnostics.iter().for_each(&mut on_iteration);
    let mut diagnostics = vi.diagnostics;
    diagnostics.extend(pd.diagnostics);
    Ok(Trained {
        model,
        solver,
        theta: vi.theta,
        theta_q: pd.theta,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub family: Family,
    pub param: f64,
    pub deviations: usize,
    pub n_unfiltered: usize,
    pub nmacs: usize,
    pub n_filtered: usize,
    pub risk_ratio: f64,
    /// Set when the point could not be produced; counts are then zero.
    pub error: Option<String>,
    /// Per-episode deviation flags on the unfiltered set.
    #[serde(skip)]
    pub deviated: Vec<bool>,
}

impl ParetoPoint {
    fn failed(family: Family, param: f64, err: &Error) -> Self {
        Self {
            family,
            param,
            deviations: 0,
            n_unfiltered: 0,
            nmacs: 0,
            n_filtered: 0,
            risk_ratio: f64::NAN,
            error: Some(err.to_string()),
            deviated: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Binomial standard error of the risk ratio.
    pub fn risk_ratio_se(&self) -> f64 {
        let p = self.risk_ratio;
        (p * (1.0 - p) / self.n_filtered as f64).sqrt()
    }
}

/// Deviations on `unfiltered` and NMAC fraction on `filtered` for one policy.
pub fn evaluate_point(
    family: Family,
    param: f64,
    policy: &Policy,
    model: &EncounterModel,
    unfiltered: &[Scenario],
    filtered: &[Scenario],
) -> Result<ParetoPoint> {
    let un = run_episodes(policy, unfiltered, model)?;
    let fi = run_episodes(policy, filtered, model)?;
    let deviated: Vec<bool> = un.iter().map(|e| e.deviated).collect();
    let nmacs = fi.iter().filter(|e| e.outcome == Outcome::Nmac).count();
    Ok(ParetoPoint {
        family,
        param,
        deviations: deviated.iter().filter(|&&d| d).count(),
        n_unfiltered: un.len(),
        nmacs,
        n_filtered: fi.len(),
        risk_ratio: nmacs as f64 / fi.len() as f64,
        error: None,
        deviated,
    })
}

/// Shared inputs of a sweep.
pub struct SweepSetup<'a> {
    pub scenario: &'a ScenarioConfig,
    pub features: &'a FeatureConfig,
    pub solver: &'a SolverConfig,
    pub unfiltered: &'a [Scenario],
    pub filtered: &'a [Scenario],
}

/// One point per parameter. A failing point is recorded with its error and
/// the sweep carries on.
pub fn pareto_sweep(
    family: Family,
    params: &[f64],
    setup: &SweepSetup,
    mut on_point: impl FnMut(&ParetoPoint),
) -> Result<Vec<ParetoPoint>> {
    let base = EncounterModel::new(setup.scenario.clone(), setup.features)?;
    let mut points = Vec::with_capacity(params.len());
    for &param in params {
        let point = match family {
            Family::Static => evaluate_point(family, param, &Policy::StaticTrl(param), &base, setup.unfiltered, setup.filtered),
            _ => train(family, param, setup.scenario, setup.features, setup.solver, |_| {}).and_then(|t| {
                evaluate_point(family, param, &t.policy(), &t.model, setup.unfiltered, setup.filtered)
            }),
        }
        .unwrap_or_else(|e| ParetoPoint::failed(family, param, &e));
        on_point(&point);
        points.push(point);
    }
    Ok(points)
}

/// A frontier read off at one risk ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolated {
    pub deviations: f64,
    /// Per-episode deviation indicator blended with the same weights.
    pub per_episode: Vec<f64>,
    /// Parameters of the bracketing points.
    pub bracket: (f64, f64),
}

/// Linear interpolation in risk ratio between the first pair of adjacent
/// points (in sweep order) whose risk ratios bracket `target`.
pub fn interpolate_at_risk(points: &[ParetoPoint], target: f64) -> Option<Interpolated> {
    let ok: Vec<&ParetoPoint> = points.iter().filter(|p| p.is_ok()).collect();
    for pair in ok.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (lo, hi) = if a.risk_ratio <= b.risk_ratio { (a.risk_ratio, b.risk_ratio) } else { (b.risk_ratio, a.risk_ratio) };
        if !(lo <= target && target <= hi) {
            continue;
        }
        let t = if a.risk_ratio == b.risk_ratio {
            0.0
        } else {
            (target - a.risk_ratio) / (b.risk_ratio - a.risk_ratio)
        };
        let per_episode: Vec<f64> = a
            .deviated
            .iter()
            .zip(&b.deviated)
            .map(|(&da, &db)| (1.0 - t) * f64::from(u8::from(da)) + t * f64::from(u8::from(db)))
            .collect();
        return Some(Interpolated {
            deviations: (1.0 - t) * a.deviations as f64 + t * b.deviations as f64,
            per_episode,
            bracket: (a.param, b.param),
        });
    }
    None
}

/// Difference of deviation counts `a − b` and its standard error from the
/// paired per-episode differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    pub difference: f64,
    pub standard_error: f64,
}

pub fn paired_difference(a: &Interpolated, b: &Interpolated) -> PairedDifference {
    assert_eq!(a.per_episode.len(), b.per_episode.len(), "points must share one scenario set");
    let d: Vec<f64> = a.per_episode.iter().zip(&b.per_episode).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    PairedDifference {
        difference: d.iter().sum(),
        standard_error: (n * var).sqrt(),
    }
}
