//! Versioned JSON run configuration. Physical quantities carry their units in
//! the key name (`_ns`, `_us`, `_mhz`); conversion to SI and angular
//! frequency happens once, in the `resolve_*` functions.

use std::f64::consts::{FRAC_PI_2, TAU};

use holoqutrit::holonomic::{named_gate, HolonomicParams, GATE_NAMES};
use holoqutrit::model::{paper_device, ControlError, DeviceParameters, NoiseModel};
use holoqutrit::pulses::{DragSetting, Envelope};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default = "default_device")]
    pub device: String,
    #[serde(default)]
    pub gate: GateSpec,
    #[serde(default)]
    pub envelope: EnvelopeSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub control_error: ErrorSpec,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub qpt: QptSpec,
    #[serde(default)]
    pub rb: RbSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub cavity: CavitySpec,
    #[serde(default)]
    pub calibrate: Option<CalibrateSpec>,
}

fn default_device() -> String {
    "paper-device".into()
}

fn default_steps() -> usize {
    4096
}

impl Default for Config {
    fn default() -> Self {
        serde_json::from_str(r#"{"version": 1}"#).expect("defaults parse")
    }
}

/// A named gate or raw `(θ, γ, φ)` in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub name: Option<String>,
    pub theta: Option<f64>,
    pub gamma: Option<f64>,
    pub phi: Option<f64>,
}

impl Default for GateSpec {
    fn default() -> Self {
        Self { name: Some("X_pi".into()), theta: None, gamma: None, phi: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub sigma_ns: f64,
    pub total_ns: f64,
    #[serde(default)]
    pub drag: bool,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        Self { sigma_ns: 30.0, total_ns: 120.0, drag: false }
    }
}

/// `preset` is `"none"` or `"paper-device"`; otherwise all four times are required.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub preset: Option<String>,
    pub t1_ge_us: Option<f64>,
    pub t1_ef_us: Option<f64>,
    pub t2s_ge_us: Option<f64>,
    pub t2s_ef_us: Option<f64>,
    #[serde(default)]
    pub gamma_fg_per_us: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSpec {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub detuning_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QptSpec {
    #[serde(default)]
    pub psd_projection: bool,
    #[serde(default)]
    pub simulated_prerotations: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbSpec {
    pub lengths: Vec<usize>,
    pub randomizations: usize,
    #[serde(default)]
    pub interleaved: Option<String>,
    #[serde(default)]
    pub depolarizing: Option<f64>,
}

impl Default for RbSpec {
    fn default() -> Self {
        Self { lengths: (1..=20).collect(), randomizations: 100, interleaved: None, depolarizing: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// `holonomic` (uses `gate`), `dynamic_hadamard` or `dynamic_t`.
    pub family: String,
    pub epsilon: Range,
    pub detuning_mhz: Range,
    pub steps: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            family: "holonomic".into(),
            epsilon: Range { min: -0.1, max: 0.1, points: 21 },
            detuning_mhz: Range { min: -1.0, max: 1.0, points: 21 },
            steps: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavitySpec {
    /// `identity`, `X_pi`, `Y_pi`, `H1` or `H2`.
    pub gate: String,
    pub decoherence: bool,
    pub dt_ns: f64,
    #[serde(default)]
    pub decode_phase: Option<f64>,
}

impl Default for CavitySpec {
    fn default() -> Self {
        Self { gate: "X_pi".into(), decoherence: true, dt_ns: 1.0, decode_phase: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSpec {
    /// `rate` (files P_g, P_e, P_f), `ramsey`, `rabi` (one trace) or `chevron` (one point table).
    pub kind: String,
    /// Paths relative to the config file.
    pub files: Vec<String>,
    #[serde(default)]
    pub detrend: Option<usize>,
}

fn bad(path: &str, msg: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), msg: msg.into() }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            bad(if path.is_empty() { "." } else { &path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.version != SCHEMA_VERSION {
            return Err(bad(
                "version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version),
            ));
        }
        if self.device != "paper-device" {
            return Err(bad("device", format!("unknown parameter set {:?}", self.device)));
        }
        if self.steps < 10 {
            return Err(bad("steps", "at least 10 integration steps"));
        }
        if !(self.envelope.sigma_ns > 0.0 && self.envelope.total_ns > 0.0) {
            return Err(bad("envelope", "sigma_ns and total_ns must be positive"));
        }
        for (key, r) in [("sweep.epsilon", &self.sweep.epsilon), ("sweep.detuning_mhz", &self.sweep.detuning_mhz)] {
            if r.points == 0 || !r.min.is_finite() || !r.max.is_finite() {
                return Err(bad(key, "needs finite bounds and at least one point"));
            }
        }
        if !(self.cavity.dt_ns > 0.0) {
            return Err(bad("cavity.dt_ns", "must be positive"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON (defaults filled in).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn device(&self) -> DeviceParameters<f64> {
        paper_device()
    }

    pub fn gate(&self) -> Result<(String, HolonomicParams<f64>), CliError> {
        let g = &self.gate;
        match (&g.name, g.theta, g.gamma, g.phi) {
            (Some(name), None, None, None) => named_gate(name)
                .map(|p| (name.clone(), p))
                .ok_or_else(|| bad("gate.name", format!("unknown gate {name:?}; known: {}", GATE_NAMES.join(", ")))),
            (None, Some(t), Some(gm), Some(p)) => HolonomicParams::new(t, gm, p)
                .map(|q| (format!("U1({t},{gm},{p})"), q))
                .map_err(|e| bad("gate.theta", e.to_string())),
            _ => Err(bad("gate", "give either name or all of theta, gamma, phi")),
        }
    }

    pub fn envelope(&self) -> Result<Envelope<f64>, CliError> {
        Envelope::truncated_gaussian(self.envelope.sigma_ns * 1e-9, self.envelope.total_ns * 1e-9, 1.0)
            .map_err(|e| bad("envelope", e.to_string()))
    }

    pub fn drag(&self) -> Result<Option<DragSetting<f64>>, CliError> {
        if !self.envelope.drag {
            return Ok(None);
        }
        let dev = self.device();
        DragSetting::new(dev.drag_coefficient, dev.q1.anharmonicity())
            .map(Some)
            .map_err(|e| bad("envelope.drag", e.to_string()))
    }

    pub fn noise(&self) -> Result<NoiseModel<f64>, CliError> {
        let n = &self.noise;
        let times = [n.t1_ge_us, n.t1_ef_us, n.t2s_ge_us, n.t2s_ef_us];
        match (n.preset.as_deref(), times) {
            (None, [None, None, None, None]) | (Some("none"), [None, None, None, None]) => Ok(NoiseModel::none()),
            (Some("paper-device"), [None, None, None, None]) => Ok(self.device().noise_q1),
            (Some(other), [None, None, None, None]) => Err(bad("noise.preset", format!("unknown preset {other:?}"))),
            (None, [Some(a), Some(b), Some(c), Some(d)]) => {
                NoiseModel::from_coherence_times(a * 1e-6, b * 1e-6, c * 1e-6, d * 1e-6, n.gamma_fg_per_us * 1e6)
                    .map_err(|e| bad("noise", e.to_string()))
            }
            _ => Err(bad("noise", "give either preset or all of t1_ge_us, t1_ef_us, t2s_ge_us, t2s_ef_us")),
        }
    }

    pub fn control_error(&self) -> Result<ControlError<f64>, CliError> {
        ControlError::new(self.control_error.epsilon, TAU * self.control_error.detuning_mhz * 1e6)
            .map_err(|e| bad("control_error", e.to_string()))
    }

    /// Cavity gate as `(θ, φ, coupling rad/s)`; `None` for the identity pipeline.
    pub fn cavity_gate(&self) -> Result<Option<(f64, f64, f64)>, CliError> {
        let dev = self.device();
        let (model, phase) = match self.cavity.gate.as_str() {
            "identity" => return Ok(None),
            "X_pi" => (dev.cavity_x, 0.0),
            "Y_pi" => (dev.cavity_x, FRAC_PI_2),
            "H1" => (dev.cavity_h, 0.0),
            "H2" => (dev.cavity_h, FRAC_PI_2),
            other => return Err(bad("cavity.gate", format!("unknown cavity gate {other:?}"))),
        };
        Ok(Some((model.theta(), phase, model.coupling())))
    }
}
