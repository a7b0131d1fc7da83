//! Grid-interpolation features and the linear value architecture.
//!
//! The feature vector is laid out as
//!
//! ```text
//! [ nmac indicator | intruder grid weights | goal indicator | goal distance | goal grid weights | 1 ]
//! ```
//!
//! The intruder grid lives in the intruder-relative frame (distance,
//! bearing of the own aircraft seen from the intruder, relative heading);
//! both angular axes are periodic. The goal grid spans distance to the
//! goal and the absolute bearing to the goal from the own aircraft.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, VehicleState};
use crate::mdp::{EncounterState, ScenarioConfig};

/// Fractions this close to a node are treated as lying on it.
const NODE_SNAP_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    /// Strictly increasing node positions.
    pub nodes: Vec<f64>,
    /// Wrap-around period for angular axes; all nodes lie in
    /// `[nodes[0], nodes[0] + period)`.
    pub period: Option<f64>,
}

impl Axis {
    pub fn uniform(name: &str, lo: f64, hi: f64, count: usize) -> Self {
        Self::power(name, lo, hi, count, 1.0)
    }

    /// Nodes at `lo + (hi - lo)·(i/(count-1))^exponent`; exponents above 1
    /// crowd the nodes toward `lo`.
    pub fn power(name: &str, lo: f64, hi: f64, count: usize, exponent: f64) -> Self {
        let last = (count.max(2) - 1) as f64;
        Self {
            name: name.to_string(),
            nodes: (0..count)
                .map(|i| {
                    let u = i as f64 / last;
                    lo + (hi - lo) * if exponent == 1.0 { u } else { u.powf(exponent) }
                })
                .collect(),
            period: None,
        }
    }

    /// `count` nodes evenly spaced over one full turn starting at `-π`.
    pub fn periodic_angle(name: &str, count: usize) -> Self {
        let step = 2.0 * PI / count as f64;
        Self {
            name: name.to_string(),
            nodes: (0..count).map(|i| -PI + step * i as f64).collect(),
            period: Some(2.0 * PI),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.len() < 2 {
            return Err(Error::invalid(&self.name, "grid axis needs at least 2 nodes"));
        }
        if self.nodes.iter().any(|v| !v.is_finite()) || self.nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(&self.name, "grid axis nodes must be finite and strictly increasing"));
        }
        if let Some(p) = self.period {
            if !(p > 0.0) || self.nodes[self.nodes.len() - 1] >= self.nodes[0] + p {
                return Err(Error::invalid(&self.name, "periodic axis nodes must span less than one period"));
            }
        }
        Ok(())
    }

    /// The one or two nodes bracketing `x` with their linear weights.
    fn bracket(&self, x: f64) -> SmallVec<[(usize, f64); 2]> {
        let n = self.nodes.len();
        let (lo_idx, hi_idx, frac) = match self.period {
            None => {
                let x = x.clamp(self.nodes[0], self.nodes[n - 1]);
                let hi = self.nodes.partition_point(|&v| v <= x).clamp(1, n - 1);
                let lo = hi - 1;
                (lo, hi, (x - self.nodes[lo]) / (self.nodes[hi] - self.nodes[lo]))
            }
            Some(p) => {
                let start = self.nodes[0];
                let x = start + (x - start).rem_euclid(p);
                let x = if x >= start + p { start } else { x };
                let hi = self.nodes.partition_point(|&v| v <= x);
                if hi == n {
                    let span = start + p - self.nodes[n - 1];
                    (n - 1, 0, (x - self.nodes[n - 1]) / span)
                } else {
                    let lo = hi - 1;
                    (lo, hi, (x - self.nodes[lo]) / (self.nodes[hi] - self.nodes[lo]))
                }
            }
        };
        let mut out = SmallVec::new();
        if frac <= NODE_SNAP_EPS {
            out.push((lo_idx, 1.0));
        } else if frac >= 1.0 - NODE_SNAP_EPS {
            out.push((hi_idx, 1.0));
        } else {
            out.push((lo_idx, 1.0 - frac));
            out.push((hi_idx, frac));
        }
        out
    }

    fn nearest(&self, x: f64) -> usize {
        let b = self.bracket(x);
        if b.len() == 1 || b[0].1 >= b[1].1 {
            b[0].0
        } else {
            b[1].0
        }
    }
}

/// Tensor-product grid; node indices are row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<Axis>,
}

pub type GridWeights = SmallVec<[(usize, f64); 8]>;

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("grid", "at least one axis required"));
        }
        for a in &axes {
            a.validate()?;
        }
        Ok(Self { axes })
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut rem = flat;
        let mut out = vec![0.0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            out[k] = a.nodes[rem % a.len()];
            rem /= a.len();
        }
        out
    }

    /// Multilinear interpolation weights; out-of-range coordinates on
    /// non-periodic axes are clamped to the boundary.
    pub fn interp_weights(&self, point: &[f64]) -> GridWeights {
        debug_assert_eq!(point.len(), self.axes.len());
        let mut out: GridWeights = SmallVec::new();
        out.push((0, 1.0));
        for (axis, &x) in self.axes.iter().zip(point) {
            let b = axis.bracket(x);
            let mut next: GridWeights = SmallVec::new();
            for &(idx, w) in &out {
                for &(bi, bw) in &b {
                    next.push((idx * axis.len() + bi, w * bw));
                }
            }
            out = next;
        }
        out
    }

    /// Flat index of the node nearest to `point` along every axis.
    pub fn nearest_node(&self, point: &[f64]) -> usize {
        let idx: Vec<usize> = self.axes.iter().zip(point).map(|(a, &x)| a.nearest(x)).collect();
        self.flat_index(&idx)
    }
}

/// Sizes and extents of the two interpolation grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub intruder_distance_nodes: usize,
    pub intruder_distance_min: f64,
    pub intruder_distance_max: f64,
    /// Node spacing exponent of the intruder distance axis; 1 is uniform.
    pub intruder_distance_exponent: f64,
    pub intruder_bearing_nodes: usize,
    pub intruder_heading_nodes: usize,
    pub goal_distance_nodes: usize,
    pub goal_distance_max: f64,
    pub goal_bearing_nodes: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            intruder_distance_nodes: 12,
            intruder_distance_min: 0.0,
            intruder_distance_max: 600.0,
            intruder_distance_exponent: 1.0,
            intruder_bearing_nodes: 12,
            intruder_heading_nodes: 12,
            goal_distance_nodes: 9,
            goal_distance_max: 1500.0,
            goal_bearing_nodes: 9,
        }
    }
}

/// Feature count under the default factorization.
pub const DEFAULT_FEATURE_COUNT: usize = 1813;

/// Sparse feature vector: at most 16 nonzero entries.
pub type SparseFeatures = SmallVec<[(usize, f64); 16]>;

/// Anything that maps states to sparse features.
pub trait Architecture: Sync {
    fn len(&self) -> usize;
    fn features(&self, s: &EncounterState) -> SparseFeatures;
}

/// Intruder-relative coordinates: distance, bearing of the own aircraft
/// from the intruder's nose, own heading relative to the intruder heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeGeometry {
    pub distance: f64,
    pub bearing: f64,
    pub relative_heading: f64,
}

impl RelativeGeometry {
    pub fn of(own: &VehicleState, intruder: &VehicleState) -> Self {
        let dx = own.x - intruder.x;
        let dy = own.y - intruder.y;
        let distance = dx.hypot(dy);
        // coincident aircraft have no bearing; pin it to a grid node
        let bearing = if distance < 1e-9 {
            0.0
        } else {
            wrap_angle(dy.atan2(dx) - intruder.psi)
        };
        Self {
            distance,
            bearing,
            relative_heading: wrap_angle(own.psi - intruder.psi),
        }
    }

    /// Intruder state that realizes these coordinates around `own`.
    pub fn place_intruder(&self, own: &VehicleState) -> VehicleState {
        let psi_i = wrap_angle(own.psi - self.relative_heading);
        let dir = psi_i + self.bearing;
        VehicleState::new(
            own.x - self.distance * dir.cos(),
            own.y - self.distance * dir.sin(),
            psi_i,
        )
    }

    fn as_point(&self) -> [f64; 3] {
        [self.distance, self.bearing, self.relative_heading]
    }
}

/// The encounter feature map with its fixed layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub config: FeatureConfig,
    pub intruder_grid: Grid,
    pub goal_grid: Grid,
    d_nmac: f64,
    d_goal: f64,
    goal: (f64, f64),
}

impl FeatureMap {
    pub fn new(config: &FeatureConfig, scenario: &ScenarioConfig) -> Result<Self> {
        if !(config.intruder_distance_min >= 0.0 && config.intruder_distance_max > config.intruder_distance_min) {
            return Err(Error::invalid("intruder_distance_max_m", "must exceed intruder_distance_min_m >= 0"));
        }
        if !(config.intruder_distance_exponent.is_finite() && config.intruder_distance_exponent > 0.0) {
            return Err(Error::invalid("intruder_distance_exponent", "must be finite and > 0"));
        }
        if !(config.goal_distance_max > 0.0) {
            return Err(Error::invalid("goal_distance_max_m", "must be > 0"));
        }
        let intruder_grid = Grid::new(vec![
            Axis::power(
                "intruder_distance_nodes",
                config.intruder_distance_min,
                config.intruder_distance_max,
                config.intruder_distance_nodes,
                config.intruder_distance_exponent,
            ),
            Axis::periodic_angle("intruder_bearing_nodes", config.intruder_bearing_nodes),
            Axis::periodic_angle("intruder_heading_nodes", config.intruder_heading_nodes),
        ])?;
        let goal_grid = Grid::new(vec![
            Axis::uniform("goal_distance_nodes", 0.0, config.goal_distance_max, config.goal_distance_nodes),
            Axis::uniform("goal_bearing_nodes", 0.0, PI, config.goal_bearing_nodes),
        ])?;
        Ok(Self {
            config: config.clone(),
            intruder_grid,
            goal_grid,
            d_nmac: scenario.d_nmac,
            d_goal: scenario.d_goal,
            goal: scenario.goal,
        })
    }

    pub fn nmac_index(&self) -> usize {
        0
    }

    pub fn intruder_grid_offset(&self) -> usize {
        1
    }

    pub fn goal_indicator_index(&self) -> usize {
        1 + self.intruder_grid.node_count()
    }

    pub fn goal_distance_index(&self) -> usize {
        self.goal_indicator_index() + 1
    }

    pub fn goal_grid_offset(&self) -> usize {
        self.goal_indicator_index() + 2
    }

    pub fn constant_index(&self) -> usize {
        self.goal_grid_offset() + self.goal_grid.node_count()
    }

    /// NMAC indicator followed by the intruder-grid weights (indices local
    /// to the intruder group).
    pub fn beta_intruder(&self, own: &VehicleState, intruder: &VehicleState) -> SparseFeatures {
        let rel = RelativeGeometry::of(own, intruder);
        let mut out = SparseFeatures::new();
        if rel.distance <= self.d_nmac {
            out.push((0, 1.0));
        }
        out.extend(
            self.intruder_grid
                .interp_weights(&rel.as_point())
                .into_iter()
                .map(|(i, w)| (1 + i, w)),
        );
        out
    }

    /// Goal indicator, raw goal distance (m), then goal-grid weights
    /// (indices local to the goal group).
    pub fn beta_goal(&self, own: &VehicleState) -> SparseFeatures {
        let distance = own.distance_to_point(self.goal);
        let bearing = wrap_angle(own.bearing_to_point(self.goal) - own.psi).abs();
        let mut out = SparseFeatures::new();
        if distance <= self.d_goal {
            out.push((0, 1.0));
        }
        if distance != 0.0 {
            out.push((1, distance));
        }
        out.extend(
            self.goal_grid
                .interp_weights(&[distance, bearing])
                .into_iter()
                .map(|(i, w)| (2 + i, w)),
        );
        out
    }

    /// Dense feature vector.
    pub fn beta(&self, s: &EncounterState) -> FeatureVector {
        let mut v = vec![0.0; self.len()];
        for (i, w) in self.features(s) {
            v[i] += w;
        }
        FeatureVector(v)
    }

    /// Snap the intruder onto the nearest intruder-grid node, keeping the
    /// own aircraft and the deviation latch fixed.
    pub fn snap_to_grid(&self, s: &EncounterState) -> Result<EncounterState> {
        if s.terminal {
            return Err(Error::TerminalState);
        }
        let rel = RelativeGeometry::of(&s.own, &s.intruder);
        let node = self.intruder_grid.node(self.intruder_grid.nearest_node(&rel.as_point()));
        let snapped = RelativeGeometry {
            distance: node[0],
            bearing: node[1],
            relative_heading: node[2],
        };
        Ok(EncounterState {
            intruder: snapped.place_intruder(&s.own),
            ..*s
        })
    }

    /// Place an intruder on intruder-grid node `flat` relative to `own`.
    pub fn intruder_at_node(&self, own: &VehicleState, flat: usize) -> VehicleState {
        let node = self.intruder_grid.node(flat);
        RelativeGeometry {
            distance: node[0],
            bearing: node[1],
            relative_heading: node[2],
        }
        .place_intruder(own)
    }
}

impl Architecture for FeatureMap {
    fn len(&self) -> usize {
        self.constant_index() + 1
    }

    fn features(&self, s: &EncounterState) -> SparseFeatures {
        let mut out = SparseFeatures::new();
        if s.terminal {
            return out;
        }
        let intr_base = self.nmac_index();
        out.extend(self.beta_intruder(&s.own, &s.intruder).into_iter().map(|(i, w)| (intr_base + i, w)));
        let goal_base = self.goal_indicator_index();
        out.extend(self.beta_goal(&s.own).into_iter().map(|(i, w)| (goal_base + i, w)));
        out.push((self.constant_index(), 1.0));
        out
    }
}

/// Dense feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

/// Linear-architecture weights `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, features: &[(usize, f64)]) -> f64 {
        features.iter().map(|&(i, w)| w * self.0[i]).sum()
    }
}

/// `β(s)ᵀθ`.
pub fn value<A: Architecture + ?Sized>(s: &EncounterState, theta: &WeightVector, arch: &A) -> Result<f64> {
    if theta.len() != arch.len() {
        return Err(Error::LengthMismatch {
            expected: arch.len(),
            actual: theta.len(),
        });
    }
    Ok(theta.dot(&arch.features(s)))
}
