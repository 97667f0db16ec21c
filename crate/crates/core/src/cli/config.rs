//! Run configuration. TOML or JSON; unknown keys are rejected and every
//! error carries the path of the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{CommutatorOptions, RungConstants};
use crate::flow::{ClassifyOptions, Tolerances};
use crate::geometry::{Cometric, CometricSpec, PhasePoint};
use crate::probe::Injection;
use crate::quantize::GridSpec;
use crate::symbols::{CutoffParams, Ladder};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub metric: CometricSpec,
    #[serde(default)]
    pub cutoff: CutoffBlock,
    #[serde(default)]
    pub grid: Option<GridBlock>,
    #[serde(default)]
    pub flow: FlowBlock,
    #[serde(default)]
    pub escape: EscapeBlock,
    #[serde(default)]
    pub commutator: CommutatorBlock,
    #[serde(default)]
    pub cascade: CascadeBlock,
    #[serde(default)]
    pub probe: ProbeBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffBlock {
    pub incoming: Option<CutoffParams>,
    pub outgoing: Option<CutoffParams>,
    pub ladder: Option<Ladder>,
}

/// One grid per entry of `h`, sharing the box and resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dimension: usize,
    pub half_width: f64,
    pub points: usize,
    pub h: Vec<f64>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_margin_factor")]
    pub margin_factor: f64,
}

fn default_margin() -> f64 {
    0.05
}

fn default_margin_factor() -> f64 {
    2.0
}

impl GridBlock {
    pub fn grids(&self) -> Result<Vec<GridSpec>> {
        self.h
            .iter()
            .map(|&h| {
                let g = GridSpec {
                    dim: self.dimension,
                    half_width: self.half_width,
                    points: self.points,
                    h,
                    margin: self.margin,
                    margin_factor: self.margin_factor,
                };
                g.validate()?;
                Ok(g)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowBlock {
    pub r_escape: f64,
    pub t_max: Option<f64>,
    pub null_tol: f64,
    pub dwell: f64,
    /// Number of sampled null initial data for `nontrap scan`.
    pub count: usize,
    /// Base points are drawn from `|x| <= sample_radius`.
    pub sample_radius: f64,
    /// Extra data tangent to the ring, used with ring_trap metrics.
    pub ring_points: usize,
    /// Escaped data whose backward asymptotic direction is measured.
    pub asymptotic: usize,
    /// Backward horizon for the asymptotic direction.
    pub asymptotic_horizon: f64,
    /// Allowed distance of the asymptotic limit from `-1`.
    pub asymptotic_tol: f64,
    /// Initial data for `flow trace`.
    pub initial: Vec<PhasePoint>,
    pub t_span: (f64, f64),
    /// `sigma_inf` used for the `tau` column of trajectory CSVs; taken from
    /// the incoming cutoff when absent.
    pub sigma_inf: Option<f64>,
    pub tolerances: Tolerances,
}

impl Default for FlowBlock {
    fn default() -> Self {
        let c = ClassifyOptions::default();
        FlowBlock {
            r_escape: c.r_escape,
            t_max: c.t_max,
            null_tol: c.null_tol,
            dwell: c.dwell,
            count: 200,
            sample_radius: 5.0,
            ring_points: 8,
            asymptotic: 0,
            asymptotic_horizon: 4096.0,
            asymptotic_tol: 1e-3,
            initial: Vec::new(),
            t_span: (-20.0, 20.0),
            sigma_inf: None,
            tolerances: Tolerances::default(),
        }
    }
}

impl FlowBlock {
    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            r_escape: self.r_escape,
            t_max: self.t_max,
            null_tol: self.null_tol,
            dwell: self.dwell,
            tolerances: self.tolerances,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EscapeBlock {
    /// Size of the support-covering grid, also used at every step of the
    /// radius searches.
    pub samples: usize,
    /// Sampled radii run up to `r_max_factor R`.
    pub r_max_factor: f64,
    /// Radius search gives up beyond this.
    pub r_cap: f64,
    /// Points of the outgoing support audit.
    pub audit: usize,
}

impl Default for EscapeBlock {
    fn default() -> Self {
        EscapeBlock {
            samples: 100_000,
            r_max_factor: 64.0,
            r_cap: 1e4,
            audit: 10_000,
        }
    }
}

fn default_z() -> Vec<(f64, f64)> {
    vec![(0.0, 1.0), (2.0, 0.5), (-1.0, 0.1)]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommutatorBlock {
    /// Rungs to check; all rungs with a successor when empty.
    pub rungs: Vec<usize>,
    pub options: CommutatorOptions,
    /// Also run the deliberate break and require it to fail.
    pub break_check: bool,
    /// Spectral parameters `(Re z, Im z)` of the energy inequality.
    pub z: Vec<(f64, f64)>,
    pub random_states: usize,
    pub coherent_states: usize,
}

impl Default for CommutatorBlock {
    fn default() -> Self {
        CommutatorBlock {
            rungs: Vec::new(),
            options: CommutatorOptions::default(),
            break_check: false,
            z: default_z(),
            random_states: 100,
            coherent_states: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// `||B_0 psi_h||` decays at least like `h^2`.
    Decay,
    /// `||B_0 psi_h||` matches `tau(center)^gamma` within 10% at the smallest `h`.
    Plateau,
    /// Norms are reported without a check.
    Report,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeCenter {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub expect: Expectation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CascadeBlock {
    pub centers: Vec<CascadeCenter>,
    /// Rung constants; read from the constants manifest when empty.
    pub constants: Vec<RungConstants>,
    /// Constants manifest to read rung constants from; defaults to
    /// `constants.json` in the output directory.
    pub manifest: Option<String>,
    pub options: CommutatorOptions,
}

impl Default for CascadeBlock {
    fn default() -> Self {
        CascadeBlock {
            centers: Vec::new(),
            constants: Vec::new(),
            manifest: None,
            options: CommutatorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeBlock {
    /// Grid at `h = 1` in the metric dimension.
    pub half_width: f64,
    pub points: usize,
    pub z: Vec<(f64, f64)>,
    pub injection: Injection,
    pub random_states: usize,
    /// Radii of the `[P, X_R]` decay check; skipped when empty.
    pub radii: Vec<f64>,
    pub slack: f64,
    /// Points per axis of the matrix-free grid used for the decay check.
    pub tail_points: usize,
    /// Window `(inner, outer)` of the tail state.
    pub tail_window: (f64, f64),
}

impl Default for ProbeBlock {
    fn default() -> Self {
        ProbeBlock {
            half_width: 20.0,
            points: 128,
            z: default_z(),
            injection: Injection::None,
            random_states: 20,
            radii: Vec::new(),
            slack: 0.25,
            tail_points: 128,
            tail_window: (17.0, 19.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: String,
    pub formats: Vec<Format>,
    /// Dump quantized reference matrices in the binary matrix format.
    pub matrices: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: "out".into(),
            formats: vec![Format::Json],
            matrices: false,
        }
    }
}

fn config_error(path: impl Into<String>, message: impl std::fmt::Display) -> Error {
    Error::Config {
        path: path.into(),
        message: message.to_string(),
    }
}

impl RunConfig {
    /// Parses TOML or JSON (chosen by extension, JSON when the text starts
    /// with `{`) and validates every block that is present.
    pub fn from_str_with_hint(text: &str, json: bool) -> Result<Self> {
        let value: serde_json::Value = if json {
            serde_json::from_str(text).map_err(|e| config_error("<root>", e))?
        } else {
            toml::from_str(text).map_err(|e| config_error("<root>", e.message()))?
        };
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            config_error(if path == "." { "<root>".to_string() } else { path }, e.inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(path.display().to_string(), e))?;
        let json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        Self::from_str_with_hint(&text, json)
    }

    pub fn cometric(&self) -> Result<Cometric> {
        Cometric::new(self.metric.clone()).map_err(|e| config_error("metric", e))
    }

    /// Semantic checks that do not need any computation.
    pub fn validate(&self) -> Result<()> {
        let g = self.cometric()?;
        let mu = g.mu();
        if let Some(p) = &self.cutoff.incoming {
            p.validate(mu).map_err(|e| config_error("cutoff.incoming", e))?;
        }
        if let Some(p) = &self.cutoff.outgoing {
            p.validate(mu).map_err(|e| config_error("cutoff.outgoing", e))?;
        }
        if let Some(l) = &self.cutoff.ladder {
            l.validate(mu).map_err(|e| config_error("cutoff.ladder", e))?;
        }
        if let Some(gr) = &self.grid {
            if gr.h.is_empty() {
                return Err(config_error("grid.h", "needs at least one value"));
            }
            gr.grids().map_err(|e| config_error("grid", e))?;
        }
        let f = &self.flow;
        if !(f.r_escape > 0.0) || !(f.null_tol > 0.0) || !(f.sample_radius >= 0.0) {
            return Err(config_error("flow", "r_escape and null_tol must be positive, sample_radius nonnegative"));
        }
        for (k, p) in f.initial.iter().enumerate() {
            if p.dim() != g.dim() || p.xi.len() != g.dim() {
                return Err(config_error(format!("flow.initial[{k}]"), format!("expected dimension {}", g.dim())));
            }
        }
        for (k, c) in self.cascade.centers.iter().enumerate() {
            if c.x.len() != g.dim() || c.xi.len() != g.dim() {
                return Err(config_error(format!("cascade.centers[{k}]"), format!("expected dimension {}", g.dim())));
            }
        }
        for (name, zs) in [("commutator.z", &self.commutator.z), ("probe.z", &self.probe.z)] {
            if zs.iter().any(|z| z.1 < 0.0) {
                return Err(config_error(name, "Im z must be nonnegative"));
            }
        }
        Ok(())
    }
}
