//! TOML scenarios: one file describes a reproducible run.
//!
//! ```toml
//! [model]
//! epsilon = 0.5
//! kappa = 1.0
//! c = 1.0
//!
//! [weights]
//! alpha = "optimal"   # or a number in (0, c/2)
//!
//! [grid]
//! half_length = [50.0]
//! points = [1024]
//! ```
//!
//! Every section except `[model]` has defaults; commands that need the
//! simulation sections (`grid`, `time`, `perturbation`) require them to be
//! present.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::ShootOptions;
use crate::model::ModelParams;
use crate::norms::{FitWindow, VerifyTargets};
use crate::sim::{Perturbation, RunConfig, Shape};
use crate::spectral::optimal_weight;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSection,
    #[serde(default)]
    pub weights: WeightsSection,
    pub grid: Option<GridSection>,
    pub time: Option<TimeSection>,
    pub perturbation: Option<PerturbationSection>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub front: FrontSection,
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Combustion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_kind")]
    pub kind: ModelKind,
    pub epsilon: f64,
    pub kappa: f64,
    pub c: f64,
    /// `false` drops the remainder and runs the linearization only.
    #[serde(default = "yes")]
    pub nonlinear: bool,
}

fn default_kind() -> ModelKind {
    ModelKind::Combustion
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedWeight {
    Optimal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightChoice {
    Value(f64),
    Named(NamedWeight),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub alpha: WeightChoice,
}

impl Default for WeightsSection {
    fn default() -> Self {
        WeightsSection {
            alpha: WeightChoice::Named(NamedWeight::Optimal),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub half_length: Vec<f64>,
    pub points: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Snapshot every this many records; `0` keeps only the final state.
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_record_every() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    #[serde(default = "default_shape")]
    pub shape: Shape,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Target `‖v⁰‖_E`; when absent the amplitude is used as given.
    pub eta: Option<f64>,
    pub center: Vec<f64>,
    pub widths: Vec<f64>,
    #[serde(default = "default_mask")]
    pub mask: Vec<bool>,
}

fn default_shape() -> Shape {
    Shape::Gaussian
}

fn one() -> f64 {
    1.0
}

fn default_mask() -> Vec<bool> {
    vec![true, true]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Bound on `sup ‖v‖_E`; defaults to `10 η`.
    pub delta: Option<f64>,
    pub rate_floor: f64,
    pub v1_factor: f64,
    pub skip_fraction: f64,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            delta: None,
            rate_floor: 0.8,
            v1_factor: 10.0,
            skip_fraction: 0.1,
            t_start: None,
            t_end: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub space_dim: usize,
    /// Samples per axis.
    pub samples: usize,
    /// Half-width of the `ξ` window; automatic when absent.
    pub extent: Option<f64>,
    pub envelope_t_max: f64,
    pub envelope_t_samples: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            space_dim: 1,
            samples: 401,
            extent: None,
            envelope_t_max: 20.0,
            envelope_t_samples: 81,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontMode {
    /// Shooting when `ε = 0`, orbit integration otherwise.
    Auto,
    Shoot,
    Orbit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontSection {
    pub mode: FrontMode,
    /// Speed bracket; scanned from `scan_speeds` when absent.
    pub c_bracket: Option<[f64; 2]>,
    pub scan_speeds: [f64; 2],
    pub scan_samples: usize,
    /// Accepted `|φ1(left) − 1/κ|`.
    pub tol: f64,
    pub ode_tol: f64,
    pub z_min: f64,
    pub max_bisections: usize,
    /// Orbit start `(φ1, φ2, φ3, φ4)`; drawn from the seed when absent.
    pub initial: Option<[f64; 4]>,
    pub z_span: [f64; 2],
    pub orbit_tol: f64,
}

impl Default for FrontSection {
    fn default() -> Self {
        let shoot = ShootOptions::default();
        FrontSection {
            mode: FrontMode::Auto,
            c_bracket: None,
            scan_speeds: [0.05, 5.0],
            scan_samples: 100,
            tol: 1e-6,
            ode_tol: shoot.ode_tol,
            z_min: shoot.z_min,
            max_bisections: shoot.max_bisections,
            initial: None,
            z_span: [0.0, 5.0],
            orbit_tol: 1e-10,
        }
    }
}

impl FrontSection {
    pub fn shoot_options(&self) -> ShootOptions {
        ShootOptions {
            ode_tol: self.ode_tol,
            z_min: self.z_min,
            max_bisections: self.max_bisections,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepCommand {
    Spectrum,
    Verify,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default = "default_sweep_command")]
    pub command: SweepCommand,
}

fn default_sweep_command() -> SweepCommand {
    SweepCommand::Verify
}

/// Names accepted by [`Scenario::with_parameter`].
pub const SWEEP_PARAMETERS: [&str; 6] = ["epsilon", "kappa", "c", "alpha", "eta", "rate_floor"];

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl Scenario {
    /// Parses and validates a scenario; errors carry the 1-based line number.
    pub fn parse(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        scenario.validate().map_err(|e| match e {
            Error::Config { .. } => e,
            other => {
                let section = match &other {
                    Error::InvalidParameter { name, .. } if ["alpha"].contains(name) => "[weights]",
                    _ => "[model]",
                };
                Error::Config {
                    line: text.find(section).map_or(1, |o| line_of(text, o)),
                    message: other.to_string(),
                }
            }
        })?;
        Ok(scenario)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        self.params()?;
        Ok(())
    }

    pub fn alpha(&self) -> Result<f64> {
        match self.weights.alpha {
            WeightChoice::Value(a) => Ok(a),
            WeightChoice::Named(NamedWeight::Optimal) => Ok(optimal_weight(self.model.c)?.0),
        }
    }

    /// Model parameters; `α = c/2` (the optimal weight) is admitted although
    /// it sits on the edge of the open band.
    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let alpha = self.alpha()?;
        let p = ModelParams {
            epsilon: m.epsilon,
            kappa: m.kappa,
            c: m.c,
            alpha,
        };
        p.validate_base()?;
        if !(alpha > 0.0 && alpha <= 0.5 * m.c) {
            return Err(Error::param("alpha", format!("need 0 < alpha <= c/2 = {}, got {alpha}", 0.5 * m.c)));
        }
        Ok(p)
    }

    fn missing(section: &str) -> Error {
        Error::Config {
            line: 0,
            message: format!("section [{section}] is required for this command"),
        }
    }

    pub fn grid_section(&self) -> Result<&GridSection> {
        self.grid.as_ref().ok_or_else(|| Self::missing("grid"))
    }

    pub fn time_section(&self) -> Result<&TimeSection> {
        self.time.as_ref().ok_or_else(|| Self::missing("time"))
    }

    pub fn perturbation_section(&self) -> Result<&PerturbationSection> {
        self.perturbation.as_ref().ok_or_else(|| Self::missing("perturbation"))
    }

    pub fn sweep_section(&self) -> Result<&SweepSection> {
        self.sweep.as_ref().ok_or_else(|| Self::missing("sweep"))
    }

    pub fn perturbation(&self) -> Result<Perturbation> {
        let p = self.perturbation_section()?;
        Ok(Perturbation {
            shape: p.shape,
            amplitude: p.amplitude,
            center: p.center.clone(),
            widths: p.widths.clone(),
            mask: p.mask.clone(),
            target_e_norm: p.eta,
        })
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let t = self.time_section()?;
        Ok(RunConfig {
            t_final: t.t_final,
            dt: t.dt,
            record_every: t.record_every,
            alpha: self.alpha()?,
            window_origin: self.perturbation_section()?.center.first().copied().unwrap_or(0.0),
            snapshot_every: t.snapshot_every,
        })
    }

    /// Verdict thresholds for a run whose initial `‖v⁰‖_E` is `eta`.
    pub fn targets(&self, eta: f64) -> Result<VerifyTargets> {
        let v = &self.verify;
        let params = self.params()?;
        Ok(VerifyTargets {
            delta: v.delta.unwrap_or(10.0 * eta),
            rate_floor: v.rate_floor,
            v1_factor: v.v1_factor,
            window: FitWindow {
                skip_fraction: v.skip_fraction,
                t_start: v.t_start,
                t_end: v.t_end,
            },
            ..VerifyTargets::for_params(&params, eta)
        })
    }

    /// Copy with one named parameter replaced.
    ///
    /// The copy is not validated, so a sweep can record bad values as failed rows.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Scenario> {
        let mut s = self.clone();
        match name {
            "epsilon" => s.model.epsilon = value,
            "kappa" => s.model.kappa = value,
            "c" => s.model.c = value,
            "alpha" => s.weights.alpha = WeightChoice::Value(value),
            "eta" => {
                let p = s.perturbation.as_mut().ok_or_else(|| Self::missing("perturbation"))?;
                p.eta = Some(value);
            }
            "rate_floor" => s.verify.rate_floor = value,
            other => {
                return Err(Error::Config {
                    line: 0,
                    message: format!("unknown sweep parameter `{other}`; expected one of {SWEEP_PARAMETERS:?}"),
                })
            }
        }
        Ok(s)
    }

    /// Every setting, defaults included, as dotted `key: value` pairs.
    pub fn resolved_entries(&self) -> Vec<(String, String)> {
        let value = serde_json::to_value(self).expect("scenario serializes");
        let mut out = Vec::new();
        flatten("config", &value, &mut out);
        out
    }
}

fn flatten(prefix: &str, value: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                flatten(&format!("{prefix}.{k}"), v, out);
            }
        }
        serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        serde_json::Value::Null => out.push((prefix.to_string(), "none".into())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
