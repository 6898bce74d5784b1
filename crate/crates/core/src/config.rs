//! Experiment configuration: a single TOML file with sections for the
//! model, gait, controller, contact, simulation and push schedule.
//! Unknown keys are hard errors so typos cannot silently change an
//! experiment.

use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector6};
use serde::{Deserialize, Serialize};

use crate::control::{ControlConfig, GaitSource, PdGains, PushEvent, RECOVERY_MARGIN_THRESHOLD};
use crate::dynamics::ContactModel;
use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyOptions, FuzzySystem};
use crate::gait::{load_gait_csv, GaitParams};
use crate::model::{build_model, BipedModel, LinkId, ModelConfig, Side};

/// Scalar applied to all six joints, or an explicit per-joint list.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum GainSpec {
    Uniform(f64),
    PerJoint([f64; 6]),
}

impl GainSpec {
    fn to_vector(self) -> Vector6<f64> {
        match self {
            GainSpec::Uniform(v) => Vector6::from_element(v),
            GainSpec::PerJoint(v) => Vector6::from_column_slice(&v),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GaitSection {
    pub period: f64,
    pub duty_factor: f64,
    pub step_length: f64,
    pub step_height: f64,
    pub hip_height: f64,
    /// Replay a recorded gait CSV instead of the generator.
    pub csv: Option<PathBuf>,
}

impl Default for GaitSection {
    fn default() -> Self {
        let p = GaitParams::default();
        Self {
            period: p.period,
            duty_factor: p.duty_factor,
            step_length: p.step_length,
            step_height: p.step_height,
            hip_height: p.hip_height,
            csv: None,
        }
    }
}

impl GaitSection {
    pub fn params(&self) -> GaitParams {
        GaitParams {
            period: self.period,
            duty_factor: self.duty_factor,
            step_length: self.step_length,
            step_height: self.step_height,
            hip_height: self.hip_height,
        }
    }
}

/// Per-joint-group belongingness weights.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BelongingnessSection {
    pub hip: f64,
    pub knee: f64,
    pub ankle: f64,
}

impl Default for BelongingnessSection {
    fn default() -> Self {
        Self {
            hip: 0.8,
            knee: 1.0,
            ankle: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub kp: GainSpec,
    pub kd: GainSpec,
    pub tau_max: GainSpec,
    pub hip_thresh: f64,
    pub hip_gain: f64,
    pub hip_cap: f64,
    pub margin_deadzone: f64,
    pub recovery_margin: f64,
    pub corrections: bool,
    pub belongingness: BelongingnessSection,
    /// Dominant hand; the opposite leg's joints weigh more in recovery.
    pub handedness: Handedness,
    /// Belongingness scale of the non-dominant-recovery leg.
    pub side_factor: f64,
    pub hesitation: f64,
    /// Body reference x trim; by default derived from the model so the
    /// standing centre of mass sits over the support centre.
    pub body_trim: Option<f64>,
    /// Replacement rule-base file (defaults to the built-in one).
    pub rule_base: Option<PathBuf>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let c = ControlConfig::default();
        Self {
            kp: GainSpec::PerJoint([60.0, 60.0, 30.0, 60.0, 60.0, 30.0]),
            kd: GainSpec::PerJoint([4.0, 4.0, 0.25, 4.0, 4.0, 0.25]),
            tau_max: GainSpec::Uniform(20.0),
            hip_thresh: c.hip_thresh,
            hip_gain: c.hip_gain,
            hip_cap: c.hip_cap,
            margin_deadzone: c.margin_deadzone,
            recovery_margin: RECOVERY_MARGIN_THRESHOLD,
            corrections: true,
            belongingness: BelongingnessSection::default(),
            handedness: Handedness::Right,
            side_factor: 0.7,
            hesitation: 0.1,
            body_trim: None,
            rule_base: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ContactSection {
    pub stiffness: f64,
    pub damping: f64,
    pub friction_mu: f64,
}

impl Default for ContactSection {
    fn default() -> Self {
        let c = ContactModel::default();
        Self {
            stiffness: c.stiffness,
            damping: c.damping,
            friction_mu: c.friction_mu,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt: f64,
    pub duration: f64,
    /// Recorded for provenance; the pipeline is fully deterministic.
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 10.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PushSection {
    pub t_start: f64,
    pub duration: f64,
    pub magnitude: f64,
    pub direction: f64,
    pub body: String,
    pub local_point: [f64; 2],
}

impl Default for PushSection {
    fn default() -> Self {
        Self {
            t_start: 2.0,
            duration: 0.1,
            magnitude: 0.0,
            direction: 0.0,
            body: "torso".into(),
            local_point: [0.0, 0.1],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

/// The full experiment file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub gait: GaitSection,
    pub controller: ControllerSection,
    pub contact: ContactSection,
    pub simulation: SimulationSection,
    pub pushes: Vec<PushSection>,
    pub output: OutputSection,
}

/// Everything a run needs, resolved and validated.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub model: BipedModel,
    pub gait: GaitSource,
    pub gait_params: GaitParams,
    pub fuzzy: FuzzySystem,
    pub control: ControlConfig,
    pub contact: ContactModel,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub pushes: Vec<PushEvent>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, file: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            file: file.into(),
            line: 0,
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Validate every section and resolve files into a runnable setup.
    /// Paths in the config are interpreted relative to `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<RunSetup> {
        if !self.simulation.dt.is_finite() || self.simulation.dt <= 0.0 {
            return Err(Error::validation(
                "simulation.dt",
                format!("must be positive, got {}", self.simulation.dt),
            ));
        }
        if !self.simulation.duration.is_finite() || self.simulation.duration <= 0.0 {
            return Err(Error::validation(
                "simulation.duration",
                format!("must be positive, got {}", self.simulation.duration),
            ));
        }

        let model = build_model(&self.model)?;

        let gait_params = self.gait.params();
        let gait = match &self.gait.csv {
            Some(path) => {
                let resolved = resolve(base_dir, path);
                GaitSource::Recorded(load_gait_csv(&resolved)?)
            }
            None => {
                gait_params.validate("gait")?;
                gait_params.check_reachable(&model, "gait")?;
                GaitSource::Generated(gait_params)
            }
        };

        let ctrl = &self.controller;
        for (name, v) in [
            ("controller.side_factor", ctrl.side_factor),
            ("controller.hip_gain", ctrl.hip_gain),
            ("controller.hip_cap", ctrl.hip_cap),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(name, format!("must be >= 0, got {v}")));
            }
        }
        let gains = PdGains {
            kp: ctrl.kp.to_vector(),
            kd: ctrl.kd.to_vector(),
            tau_max: ctrl.tau_max.to_vector(),
        };
        for (name, vec) in [("kp", &gains.kp), ("kd", &gains.kd), ("tau_max", &gains.tau_max)] {
            if vec.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::validation(
                    format!("controller.{name}"),
                    "gains must be non-negative",
                ));
            }
        }

        let fuzzy_options = FuzzyOptions {
            belongingness: belongingness_vector(
                &ctrl.belongingness,
                ctrl.handedness,
                ctrl.side_factor,
            )?,
            hesitation0: ctrl.hesitation,
            hip_threshold: ctrl.hip_thresh,
        };
        let fuzzy = match &ctrl.rule_base {
            Some(path) => {
                let resolved = resolve(base_dir, path);
                let text = std::fs::read_to_string(&resolved)
                    .map_err(|e| Error::io(resolved.display().to_string(), e))?;
                FuzzySystem::from_rule_text(&text, &resolved.display().to_string(), fuzzy_options)?
            }
            None => FuzzySystem::from_rule_text(
                crate::fuzzy::DEFAULT_RULES,
                "builtin",
                fuzzy_options,
            )?,
        };

        let contact = ContactModel {
            stiffness: self.contact.stiffness,
            damping: self.contact.damping,
            friction_mu: self.contact.friction_mu,
        };
        if !(contact.stiffness > 0.0) {
            return Err(Error::validation(
                "contact.stiffness",
                format!("must be positive, got {}", contact.stiffness),
            ));
        }
        if contact.damping < 0.0 || contact.friction_mu < 0.0 {
            return Err(Error::validation(
                "contact",
                "damping and friction_mu must be non-negative",
            ));
        }

        let mut pushes = Vec::with_capacity(self.pushes.len());
        for (i, p) in self.pushes.iter().enumerate() {
            let body = LinkId::parse(&p.body).ok_or_else(|| {
                Error::validation(
                    format!("pushes[{i}].body"),
                    format!("unknown link `{}`", p.body),
                )
            })?;
            if !(p.duration > 0.0) {
                return Err(Error::validation(
                    format!("pushes[{i}].duration"),
                    format!("must be positive, got {}", p.duration),
                ));
            }
            if p.magnitude < 0.0 {
                return Err(Error::validation(
                    format!("pushes[{i}].magnitude"),
                    format!("must be non-negative, got {}", p.magnitude),
                ));
            }
            pushes.push(PushEvent {
                t_start: p.t_start,
                duration: p.duration,
                magnitude: p.magnitude,
                direction: p.direction,
                body,
                local_point: Vector2::new(p.local_point[0], p.local_point[1]),
            });
        }

        let body_trim = match ctrl.body_trim {
            Some(v) => v,
            None => auto_body_trim(&model, &gait_params)?,
        };
        let control = ControlConfig {
            gains,
            hip_thresh: ctrl.hip_thresh,
            hip_gain: ctrl.hip_gain,
            hip_cap: ctrl.hip_cap,
            margin_deadzone: ctrl.margin_deadzone,
            recovery_margin: ctrl.recovery_margin,
            body_trim,
            corrections: ctrl.corrections,
        };

        Ok(RunSetup {
            model,
            gait,
            gait_params,
            fuzzy,
            control,
            contact,
            dt: self.simulation.dt,
            duration: self.simulation.duration,
            seed: self.simulation.seed,
            pushes,
            output: self
                .output
                .path
                .as_ref()
                .map(|p| resolve(base_dir, p)),
        })
    }
}

/// Offset between the hip reference and the resulting centre of mass at
/// the start-of-cycle pose; trimming the body by its negative centres the
/// CoM over the support.
fn auto_body_trim(model: &BipedModel, params: &GaitParams) -> Result<f64> {
    use crate::gait::{ik_from_targets, reference_targets};
    use crate::model::{model_com, BipedState};
    use nalgebra::{Vector2, Vector6};
    let targets = reference_targets(0.0, params, model);
    let q = ik_from_targets(&targets, model)?;
    let state = BipedState {
        base_pos: targets.hip_frame.translation,
        base_pitch: 0.0,
        q,
        base_vel: Vector2::zeros(),
        base_pitch_rate: 0.0,
        qdot: Vector6::zeros(),
    };
    let com = model_com(model, &state)?;
    Ok(targets.hip_frame.translation.x - com.x)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Expand per-group belongingness into a per-joint vector. The leg
/// opposite the dominant hand is the more active one; the other side is
/// scaled down by `side_factor`.
fn belongingness_vector(
    groups: &BelongingnessSection,
    handedness: Handedness,
    side_factor: f64,
) -> Result<[f64; 6]> {
    for (name, v) in [
        ("controller.belongingness.hip", groups.hip),
        ("controller.belongingness.knee", groups.knee),
        ("controller.belongingness.ankle", groups.ankle),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::validation(name, format!("must be in [0, 1], got {v}")));
        }
    }
    if !(0.0..=1.0).contains(&side_factor) {
        return Err(Error::validation(
            "controller.side_factor",
            format!("must be in [0, 1], got {side_factor}"),
        ));
    }
    let active = match handedness {
        Handedness::Right => Side::Left,
        Handedness::Left => Side::Right,
    };
    let scale = |side: Side| if side == active { 1.0 } else { side_factor };
    Ok([
        groups.hip * scale(Side::Left),
        groups.knee * scale(Side::Left),
        groups.ankle * scale(Side::Left),
        groups.hip * scale(Side::Right),
        groups.knee * scale(Side::Right),
        groups.ankle * scale(Side::Right),
    ])
}
