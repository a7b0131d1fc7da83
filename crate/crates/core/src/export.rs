//! CSV and JSON-lines writers.
//!
//! Floats are written with 17 significant digits, enough to read every
//! `f64` back exactly. Schemas:
//!
//! - value slice: `x_m,y_m,value`
//! - policy slice: `x_m,y_m,action` (meters for separation actions, rad/s for turn rates)
//! - scenarios: `intruder_x_m,intruder_y_m,intruder_psi_rad,noise_seed`
//! - pareto: `family,param,deviations,n_unfiltered,nmacs,n_filtered,risk_ratio,risk_ratio_se,error`
//! - diagnostics: one JSON object per line

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::adp::{EncounterModel, IterationDiagnostics, SampleBox};
use crate::error::{Error, Result};
use crate::eval::Scenario;
use crate::features::{value, WeightVector};
use crate::geom::VehicleState;
use crate::mdp::EncounterState;
use crate::pareto::ParetoPoint;
use crate::policy::Policy;

/// `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// The fixed part of a two-dimensional slice: the own heading and the
/// intruder, with the own position swept over a pixel grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSpec {
    pub own_heading: f64,
    pub intruder: VehicleState,
    pub region: SampleBox,
    /// Pixel spacing, m.
    pub pixel: f64,
}

impl Default for SliceSpec {
    /// Own aircraft pointing north, intruder at (700, −250) heading 135°,
    /// 20 m pixels over the own-position sampling box.
    fn default() -> Self {
        Self {
            own_heading: 0.0,
            intruder: VehicleState::new(700.0, -250.0, 135f64.to_radians()),
            region: SampleBox::default(),
            pixel: 20.0,
        }
    }
}

impl SliceSpec {
    /// Pixel centers, row by row (x outer, y inner).
    pub fn pixels(&self) -> Vec<(f64, f64)> {
        let steps = |lo: f64, hi: f64| ((hi - lo) / self.pixel + 1e-9).floor() as usize + 1;
        let b = &self.region;
        let (nx, ny) = (steps(b.x_min, b.x_max), steps(b.y_min, b.y_max));
        (0..nx)
            .flat_map(|i| (0..ny).map(move |j| (b.x_min + i as f64 * self.pixel, b.y_min + j as f64 * self.pixel)))
            .collect()
    }

    pub fn state_at(&self, x: f64, y: f64) -> EncounterState {
        EncounterState::new(VehicleState::new(x, y, self.own_heading), self.intruder)
    }
}

/// `(x, y, V(s))` for every pixel.
pub fn value_slice(theta: &WeightVector, model: &EncounterModel, spec: &SliceSpec) -> Result<Vec<(f64, f64, f64)>> {
    spec.pixels()
        .into_iter()
        .map(|(x, y)| Ok((x, y, value(&spec.state_at(x, y), theta, &model.features)?)))
        .collect()
}

/// `(x, y, chosen action)` for every pixel.
pub fn policy_slice(policy: &Policy, model: &EncounterModel, spec: &SliceSpec) -> Result<Vec<(f64, f64, f64)>> {
    spec.pixels()
        .into_iter()
        .map(|(x, y)| Ok((x, y, policy.act(&spec.state_at(x, y), model)?.value())))
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_slice_csv(path: &Path, third: &str, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x_m", "y_m", third])?;
    for &(x, y, v) in rows {
        w.write_record([fmt17(x), fmt17(y), fmt17(v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scenarios_csv(path: &Path, scenarios: &[Scenario]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["intruder_x_m", "intruder_y_m", "intruder_psi_rad", "noise_seed"])?;
    for s in scenarios {
        let i = &s.intruder_initial;
        w.write_record([fmt17(i.x), fmt17(i.y), fmt17(i.psi), s.noise_seed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scenarios_csv(path: &Path) -> Result<Vec<Scenario>> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            hint: "generate it with `filter-scenarios`".into(),
        });
    }
    let malformed = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path)?;
    let expected = ["intruder_x_m", "intruder_y_m", "intruder_psi_rad", "noise_seed"];
    if r.headers()?.iter().ne(expected) {
        return Err(malformed(format!("expected header {}", expected.join(","))));
    }
    r.records()
        .enumerate()
        .map(|(line, rec)| {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|e| malformed(format!("row {}: {}: {e}", line + 1, expected[i])))
            };
            Ok(Scenario {
                intruder_initial: VehicleState::new(f(0)?, f(1)?, f(2)?),
                noise_seed: rec[3]
                    .parse()
                    .map_err(|e| malformed(format!("row {}: noise_seed: {e}", line + 1)))?,
            })
        })
        .collect()
}

pub fn write_pareto_csv(path: &Path, points: &[ParetoPoint]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "family",
        "param",
        "deviations",
        "n_unfiltered",
        "nmacs",
        "n_filtered",
        "risk_ratio",
        "risk_ratio_se",
        "error",
    ])?;
    for p in points {
        w.write_record([
            p.family.name().to_string(),
            fmt17(p.param),
            p.deviations.to_string(),
            p.n_unfiltered.to_string(),
            p.nmacs.to_string(),
            p.n_filtered.to_string(),
            fmt17(p.risk_ratio),
            fmt17(p.risk_ratio_se()),
            p.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics_jsonl(path: &Path, diagnostics: &[IterationDiagnostics]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for d in diagnostics {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
