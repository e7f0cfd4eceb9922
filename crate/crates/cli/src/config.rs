//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shellnp::geometry::{shape_set, LayeredGeometry, ShapeFunction};
use shellnp::potentials::Trace;
use shellnp::resonance::{uniform_grid, DrudeModel};
use shellnp::scattering::IncidentField;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub r1: f64,
    pub r2: f64,
    #[serde(default = "one")]
    pub delta1: f64,
    #[serde(default = "one")]
    pub delta2: f64,
    #[serde(default)]
    pub eps1: f64,
    #[serde(default)]
    pub eps2: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Benchmark shape pair 1..=4; mutually exclusive with h1/h2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_set: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h1: Option<ShapeFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h2: Option<ShapeFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub omega_p: f64,
    /// Damping; spectra fall back to 0.02 omega_p when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "one")]
    pub eps_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    Delta1,
    Delta2,
    Eps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// 2^m for m from m_start to m_end inclusive, in that order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_start: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_end: Option<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_probe")]
    pub probe_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Highest harmonic n reported.
    #[serde(default = "default_harmonics")]
    pub harmonics: usize,
    #[serde(default = "default_trace")]
    pub trace: Trace,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { harmonics: default_harmonics(), trace: default_trace() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentConfig {
    #[serde(default = "default_direction")]
    pub direction: [f64; 2],
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl Default for IncidentConfig {
    fn default() -> Self {
        Self { direction: default_direction(), amplitude: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_dir(), prefix: default_prefix() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub incident: IncidentConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}
fn default_points() -> usize {
    600
}
fn default_probe() -> f64 {
    2.0
}
fn default_harmonics() -> usize {
    4
}
fn default_trace() -> Trace {
    Trace::PrincipalValue
}
fn default_direction() -> [f64; 2] {
    [1.0, 0.0]
}
fn default_dir() -> PathBuf {
    PathBuf::from(".")
}
fn default_prefix() -> String {
    "shellnp".into()
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Key-level checks that do not need geometry construction.
    fn check(&self) -> Result<(), CliError> {
        let g = &self.geometry;
        for (k, v) in [("geometry.r1", g.r1), ("geometry.r2", g.r2), ("geometry.delta1", g.delta1), ("geometry.delta2", g.delta2)] {
            positive(k, v)?;
        }
        for (k, v) in [("geometry.eps1", g.eps1), ("geometry.eps2", g.eps2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(k, format!("must be non-negative, got {v}")));
            }
        }
        if g.n < 16 || g.n % 2 != 0 {
            return Err(bad("geometry.N", format!("must be even and at least 16, got {}", g.n)));
        }
        if let Some(s) = g.shape_set {
            if shape_set(s).is_none() {
                return Err(bad("geometry.shape_set", format!("must be 1 to 4, got {s}")));
            }
            if g.h1.is_some() || g.h2.is_some() {
                return Err(bad("geometry.shape_set", "cannot be combined with geometry.h1 or geometry.h2"));
            }
        }
        positive("model.omega_p", self.model.omega_p)?;
        if let Some(gm) = self.model.gamma {
            if !(gm >= 0.0 && gm.is_finite()) {
                return Err(bad("model.gamma", format!("must be non-negative, got {gm}")));
            }
        }
        positive("model.eps_m", self.model.eps_m)?;
        if let Some(s) = &self.sweep {
            match (&s.values, s.m_start, s.m_end) {
                (Some(v), None, None) => {
                    if v.is_empty() {
                        return Err(bad("sweep.values", "must not be empty"));
                    }
                    for x in v {
                        positive("sweep.values", *x)?;
                    }
                }
                (None, Some(_), Some(_)) => {}
                _ => return Err(bad("sweep", "give either sweep.values or both sweep.m_start and sweep.m_end")),
            }
        }
        if let Some(sp) = &self.spectrum {
            positive("spectrum.omega_min", sp.omega_min)?;
            if !(sp.omega_max > sp.omega_min && sp.omega_max < self.model.omega_p) {
                return Err(bad(
                    "spectrum.omega_max",
                    format!("must lie in (omega_min, omega_p) = ({}, {})", sp.omega_min, self.model.omega_p),
                ));
            }
            if sp.points < 2 {
                return Err(bad("spectrum.points", format!("must be at least 2, got {}", sp.points)));
            }
            if !(sp.probe_factor > 1.0 && sp.probe_factor.is_finite()) {
                return Err(bad("spectrum.probe_factor", format!("must exceed 1, got {}", sp.probe_factor)));
            }
        }
        if self.solver.harmonics == 0 {
            return Err(bad("solver.harmonics", "must be at least 1"));
        }
        let d = self.incident.direction;
        if !(d[0].hypot(d[1]) > 0.0) || !self.incident.amplitude.is_finite() {
            return Err(bad("incident.direction", "must be a non-zero vector"));
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains('/') {
            return Err(bad("output.prefix", "must be a non-empty file name prefix"));
        }
        Ok(())
    }

    pub fn shapes(&self) -> (ShapeFunction, ShapeFunction) {
        let g = &self.geometry;
        match g.shape_set.and_then(shape_set) {
            Some(pair) => pair,
            None => (g.h1.clone().unwrap_or_default(), g.h2.clone().unwrap_or_default()),
        }
    }

    /// Geometry as configured, without validation.
    pub fn layered(&self) -> LayeredGeometry {
        let g = &self.geometry;
        let (h1, h2) = self.shapes();
        LayeredGeometry::disks(g.r1, g.r2, g.delta1, g.delta2, g.n).with_shapes(h1, g.eps1, h2, g.eps2)
    }

    pub fn model(&self) -> DrudeModel {
        DrudeModel { omega_p: self.model.omega_p, gamma: self.model.gamma.unwrap_or(0.0), eps_m: self.model.eps_m }
    }

    /// Lossy model for spectra: the configured gamma or 0.02 omega_p.
    pub fn spectrum_model(&self) -> DrudeModel {
        let mut m = self.model();
        m.gamma = self.model.gamma.unwrap_or(0.02 * self.model.omega_p);
        m
    }

    pub fn incident(&self) -> Result<IncidentField, CliError> {
        Ok(IncidentField::uniform(self.incident.direction, self.incident.amplitude)?)
    }

    pub fn sweep_values(&self) -> Option<Vec<f64>> {
        let s = self.sweep.as_ref()?;
        Some(match (&s.values, s.m_start, s.m_end) {
            (Some(v), _, _) => v.clone(),
            (None, Some(a), Some(b)) => {
                let ms: Vec<i32> = if a <= b { (a..=b).collect() } else { (b..=a).rev().collect() };
                ms.into_iter().map(|m| 2f64.powi(m)).collect()
            }
            _ => return None,
        })
    }

    /// Geometry with the sweep variable set to `value`.
    pub fn layered_at(&self, value: f64) -> LayeredGeometry {
        let mut g = self.layered();
        match self.sweep.as_ref().map(|s| s.variable) {
            Some(SweepVariable::Delta1) => g.delta1 = value,
            Some(SweepVariable::Delta2) => g.delta2 = value,
            Some(SweepVariable::Eps) => {
                g.eps1 = value;
                g.eps2 = value;
            }
            None => {}
        }
        g
    }

    pub fn omega_grid(&self) -> Option<Vec<f64>> {
        let s = self.spectrum.as_ref()?;
        Some(uniform_grid(s.omega_min, s.omega_max, s.points))
    }

    /// Frequency formulas in eigs and sweep assume a vacuum background.
    pub fn require_unit_background(&self) -> Result<(), CliError> {
        if self.model.eps_m != 1.0 {
            return Err(bad("model.eps_m", "resonance frequencies are tabulated for eps_m = 1 only"));
        }
        Ok(())
    }

    pub fn output_path(&self, out: Option<&Path>, suffix: &str) -> PathBuf {
        let dir = out.map(Path::to_path_buf).unwrap_or_else(|| self.output.directory.clone());
        dir.join(format!("{}_{suffix}", self.output.prefix))
    }
}
