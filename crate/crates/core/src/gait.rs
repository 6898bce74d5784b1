//! Gait generation: phase machine, swing and body trajectories, per-tick
//! joint references, and recorded gait series as an alternative source.
//!
//! The cycle of period T keeps the left foot in stance on [0, duty*T) and
//! swinging on [duty*T, T); the right leg runs the same schedule shifted by
//! T/2. A duty factor above one half guarantees two double-support windows
//! per cycle. Swing feet travel from one step length behind the stance
//! ankle to one step length ahead of it along quintic profiles, so the hip
//! advances two step lengths per full cycle.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Vector2, Vector6};

use crate::error::{Error, Result};
use crate::kinematics::{leg_ik, FootPose, Transform2};
use crate::model::{BipedModel, Side};

/// Gait cycle parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitParams {
    /// Cycle period, s.
    pub period: f64,
    /// Stance fraction of the cycle per leg, in (0.5, 1).
    pub duty_factor: f64,
    /// Touch-down distance ahead of the stance ankle, m.
    pub step_length: f64,
    /// Peak sole height at mid-swing, m.
    pub step_height: f64,
    /// Constant hip height of the body trajectory, m.
    pub hip_height: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            period: 1.0,
            duty_factor: 0.6,
            step_length: 0.06,
            step_height: 0.02,
            hip_height: 0.38,
        }
    }
}

impl GaitParams {
    /// Validate ranges; `field` prefixes error paths (e.g. "gait").
    pub fn validate(&self, field: &str) -> Result<()> {
        let positive = [
            ("period", self.period),
            ("hip_height", self.hip_height),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::validation(
                    format!("{field}.{name}"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
        let non_negative = [
            ("step_length", self.step_length),
            ("step_height", self.step_height),
        ];
        for (name, v) in non_negative {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(
                    format!("{field}.{name}"),
                    format!("must be non-negative, got {v}"),
                ));
            }
        }
        if !(self.duty_factor > 0.5 && self.duty_factor < 1.0) {
            return Err(Error::validation(
                format!("{field}.duty_factor"),
                format!("must lie in (0.5, 1), got {}", self.duty_factor),
            ));
        }
        Ok(())
    }

    /// Check every reference target over one cycle stays inside the leg
    /// workspace with a small safety margin.
    pub fn check_reachable(&self, model: &BipedModel, field: &str) -> Result<()> {
        let (l1, l2) = model.leg_lengths();
        let reach = l1 + l2 - 1e-6;
        let samples = 512;
        for i in 0..samples {
            let t = self.period * i as f64 / samples as f64;
            let targets = reference_targets(t, self, model);
            for foot in [&targets.left, &targets.right] {
                let d = (foot.position - targets.hip_frame.translation).norm();
                if d > reach {
                    return Err(Error::validation(
                        field,
                        format!(
                            "unreachable gait target: hip-ankle distance {d:.4} m exceeds reach {:.4} m",
                            l1 + l2
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    fn swing_duration(&self) -> f64 {
        (1.0 - self.duty_factor) * self.period
    }
}

/// Stance/swing assignment of one leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Stance,
    Swing,
}

/// Phase of the whole gait at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    /// Time within the cycle, [0, period).
    pub cycle_time: f64,
    pub left: Phase,
    pub right: Phase,
    /// Progress of the swinging leg in [0, 1]; `None` in double support.
    pub swing_progress: Option<f64>,
}

impl PhaseState {
    pub fn swing_side(&self) -> Option<Side> {
        match (self.left, self.right) {
            (Phase::Swing, _) => Some(Side::Left),
            (_, Phase::Swing) => Some(Side::Right),
            _ => None,
        }
    }

    pub fn double_support(&self) -> bool {
        self.left == Phase::Stance && self.right == Phase::Stance
    }

    pub fn phase(&self, side: Side) -> Phase {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

/// Periodic stance/swing schedule.
pub fn gait_phase(t: f64, params: &GaitParams) -> PhaseState {
    let period = params.period;
    let stance_end = params.duty_factor * period;
    let tau = t.rem_euclid(period);
    let tau_right = (t - period / 2.0).rem_euclid(period);

    let leg = |tau: f64| -> (Phase, f64) {
        if tau < stance_end {
            (Phase::Stance, 0.0)
        } else {
            (Phase::Swing, (tau - stance_end) / params.swing_duration())
        }
    };
    let (left, pl) = leg(tau);
    let (right, pr) = leg(tau_right);
    let swing_progress = match (left, right) {
        (Phase::Swing, _) => Some(pl),
        (_, Phase::Swing) => Some(pr),
        _ => None,
    };
    PhaseState {
        cycle_time: tau,
        left,
        right,
        swing_progress,
    }
}

/// Smoothstep quintic: 0 -> 1 with zero velocity and acceleration at the
/// ends.
fn quintic(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    p * p * p * (10.0 + p * (-15.0 + 6.0 * p))
}

/// Symmetric vertical bump: zero value and slope at both ends, peak 1 at
/// p = 0.5 (the quintic boundary conditions degenerate to this quartic).
fn bump(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let w = 4.0 * p * (1.0 - p);
    w * w
}

/// Swing sole trajectory between explicit lift-off and touch-down points.
/// Returns the sole reference point (x at the ankle, z above ground) with a
/// flat sole throughout.
pub fn swing_between(progress: f64, liftoff_x: f64, touchdown_x: f64, step_height: f64) -> FootPose {
    let x = liftoff_x + (touchdown_x - liftoff_x) * quintic(progress);
    let z = step_height * bump(progress);
    FootPose {
        position: Vector2::new(x, z),
        sole_angle: 0.0,
    }
}

/// Swing target of the current swing leg, from one step length behind the
/// stance ankle to one step length ahead of it. The returned position is
/// the sole reference point (height above ground, zero at both ends).
pub fn swing_foot_target(
    phase: &PhaseState,
    params: &GaitParams,
    stance_ankle_x: f64,
) -> Result<FootPose> {
    let progress = match (phase.swing_side(), phase.swing_progress) {
        (Some(_), Some(p)) => p,
        _ => return Err(Error::NoSwingLeg),
    };
    Ok(swing_between(
        progress,
        stance_ankle_x - params.step_length,
        stance_ankle_x + params.step_length,
        params.step_height,
    ))
}

/// Body (hip) trajectory: constant height, zero pitch reference, and a
/// linear advance of one step length per half cycle. `stance_ankle_x` is
/// the ankle of the most recently landed foot.
pub fn body_target(
    phase: &PhaseState,
    params: &GaitParams,
    stance_ankle_x: f64,
) -> (f64, f64, f64) {
    let half = params.period / 2.0;
    let tau_half = phase.cycle_time.rem_euclid(half);
    let x = stance_ankle_x - params.step_length / 2.0
        + 2.0 * params.step_length * tau_half / params.period;
    (x, params.hip_height, 0.0)
}

/// World-frame reference targets of one control tick.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceTargets {
    pub phase: PhaseState,
    /// Hip frame of the reference body pose (rotation = pitch reference).
    pub hip_frame: Transform2,
    /// Ankle target of the left leg (world position of the ankle joint).
    pub left: FootPose,
    pub right: FootPose,
    /// Reference ankle x of the current stance anchoring foot.
    pub stance_ankle_x: f64,
}

/// Reference ankle x of one leg at absolute time `t` (shift = 0 for the
/// left schedule, period/2 for the right).
fn leg_reference_x(t: f64, shift: f64, side_offset: f64, params: &GaitParams) -> f64 {
    let period = params.period;
    let s = t - shift;
    let k = (s / period).floor();
    let tau = s - k * period;
    let base = 2.0 * k * params.step_length + side_offset;
    let stance_end = params.duty_factor * period;
    if tau < stance_end {
        base
    } else {
        let p = (tau - stance_end) / params.swing_duration();
        base + 2.0 * params.step_length * quintic(p)
    }
}

/// Vertical sole reference of one leg (0 when planted).
fn leg_reference_lift(t: f64, shift: f64, params: &GaitParams) -> f64 {
    if params.step_length == 0.0 {
        // Degenerate standing gait: feet never leave their pose.
        return 0.0;
    }
    let period = params.period;
    let tau = (t - shift).rem_euclid(period);
    let stance_end = params.duty_factor * period;
    if tau < stance_end {
        0.0
    } else {
        let p = (tau - stance_end) / params.swing_duration();
        params.step_height * bump(p)
    }
}

/// Assemble the full reference bundle at absolute time `t`.
pub fn reference_targets(t: f64, params: &GaitParams, model: &BipedModel) -> ReferenceTargets {
    let phase = gait_phase(t, params);
    let ankle_rest = model.ankle_rest_height();
    let l = params.step_length;
    let period = params.period;

    let left_x = leg_reference_x(t, 0.0, 0.0, params);
    let right_x = leg_reference_x(t, period / 2.0, l, params);
    let left = FootPose {
        position: Vector2::new(left_x, ankle_rest + leg_reference_lift(t, 0.0, params)),
        sole_angle: 0.0,
    };
    let right = FootPose {
        position: Vector2::new(
            right_x,
            ankle_rest + leg_reference_lift(t, period / 2.0, params),
        ),
        sole_angle: 0.0,
    };

    // Hip reference advances linearly: one step length per half cycle,
    // starting over the midpoint of the feet.
    let hip_x = -l / 2.0 + 2.0 * l * t / period;
    let hip_frame = Transform2::new(0.0, Vector2::new(hip_x, params.hip_height));

    // Anchor: the most recently landed foot.
    let tau = t.rem_euclid(period);
    let stance_ankle_x = if tau < period / 2.0 { left_x } else { right_x };
    ReferenceTargets {
        phase,
        hip_frame,
        left,
        right,
        stance_ankle_x,
    }
}

/// Solve both legs of a reference bundle; returns the six joint angles.
pub fn ik_from_targets(targets: &ReferenceTargets, model: &BipedModel) -> Result<Vector6<f64>> {
    let lengths = model.leg_lengths();
    let (lh, lk, la) = leg_ik(&targets.left, &targets.hip_frame, lengths)?;
    let (rh, rk, ra) = leg_ik(&targets.right, &targets.hip_frame, lengths)?;
    Ok(Vector6::new(lh, lk, la, rh, rk, ra))
}

/// Central-difference step for reference joint velocities.
const VELOCITY_FD_STEP: f64 = 1e-4;

/// Joint-space gait reference: IK of the swing and body targets, with
/// velocities by central differences.
pub fn joint_reference(
    t: f64,
    params: &GaitParams,
    model: &BipedModel,
) -> Result<(Vector6<f64>, Vector6<f64>)> {
    let q = ik_from_targets(&reference_targets(t, params, model), model)?;
    let h = VELOCITY_FD_STEP;
    let q_plus = ik_from_targets(&reference_targets(t + h, params, model), model)?;
    let q_minus = ik_from_targets(&reference_targets(t - h, params, model), model)?;
    let qdot = (q_plus - q_minus) / (2.0 * h);
    Ok((q, qdot))
}

/// A recorded joint-angle series (time plus six joint angles per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct GaitSeries {
    timestamps: Vec<f64>,
    samples: Vec<Vector6<f64>>,
}

/// Exact header of the gait CSV interchange format.
pub const GAIT_CSV_HEADER: &str = "t,hip_l,knee_l,ankle_l,hip_r,knee_r,ankle_r";

impl GaitSeries {
    pub fn new(timestamps: Vec<f64>, samples: Vec<Vector6<f64>>) -> Result<Self> {
        if timestamps.len() != samples.len() {
            return Err(Error::RuleBase(
                "gait series lengths do not match".into(),
            ));
        }
        if timestamps.len() < 2 {
            return Err(Error::validation(
                "gait series",
                "needs at least two samples",
            ));
        }
        for w in timestamps.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::validation(
                    "gait series",
                    "timestamps must be strictly increasing",
                ));
            }
        }
        Ok(Self {
            timestamps,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn first_time(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn last_time(&self) -> f64 {
        *self.timestamps.last().unwrap()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn samples(&self) -> &[Vector6<f64>] {
        &self.samples
    }

    /// Serialize to the gait CSV format (LF endings, full-precision decimal).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(GAIT_CSV_HEADER);
        out.push('\n');
        for (t, q) in self.timestamps.iter().zip(&self.samples) {
            let _ = write!(out, "{t}");
            for i in 0..6 {
                let _ = write!(out, ",{}", q[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Parse a gait CSV string; `file` names the source in errors.
pub fn parse_gait_csv(content: &str, file: &str) -> Result<GaitSeries> {
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == GAIT_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                file: file.into(),
                line: 1,
                reason: format!("bad header `{header}`, expected `{GAIT_CSV_HEADER}`"),
            })
        }
        None => {
            return Err(Error::Parse {
                file: file.into(),
                line: 1,
                reason: "empty file".into(),
            })
        }
    }
    let mut timestamps = Vec::new();
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                file: file.into(),
                line: line_no,
                reason: format!("expected 7 columns, found {}", fields.len()),
            });
        }
        let mut values = [0.0_f64; 7];
        for (i, f) in fields.iter().enumerate() {
            values[i] = f.trim().parse::<f64>().map_err(|_| Error::Parse {
                file: file.into(),
                line: line_no,
                reason: format!("bad number `{f}`"),
            })?;
            if !values[i].is_finite() {
                return Err(Error::Parse {
                    file: file.into(),
                    line: line_no,
                    reason: format!("non-finite value `{f}`"),
                });
            }
        }
        if let Some(&last) = timestamps.last() {
            if values[0] <= last {
                return Err(Error::Parse {
                    file: file.into(),
                    line: line_no,
                    reason: format!("timestamps must increase: {} after {last}", values[0]),
                });
            }
        }
        timestamps.push(values[0]);
        samples.push(Vector6::from_column_slice(&values[1..7]));
    }
    if timestamps.len() < 2 {
        return Err(Error::Parse {
            file: file.into(),
            line: content.lines().count(),
            reason: "need at least two samples".into(),
        });
    }
    GaitSeries::new(timestamps, samples)
}

/// Load a gait CSV file.
pub fn load_gait_csv(path: &Path) -> Result<GaitSeries> {
    let content =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_gait_csv(&content, &path.display().to_string())
}

/// Linear per-joint interpolation at time `t` within the recorded range.
pub fn resample(series: &GaitSeries, t: f64) -> Result<Vector6<f64>> {
    let ts = &series.timestamps;
    if t < ts[0] || t > *ts.last().unwrap() {
        return Err(Error::OutOfRange {
            t,
            first: ts[0],
            last: *ts.last().unwrap(),
        });
    }
    let idx = match ts.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
        Ok(i) => return Ok(series.samples[i]),
        Err(i) => i,
    };
    let (t0, t1) = (ts[idx - 1], ts[idx]);
    let w = (t - t0) / (t1 - t0);
    Ok(series.samples[idx - 1] * (1.0 - w) + series.samples[idx] * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelConfig};
    use approx::assert_relative_eq;

    fn model() -> BipedModel {
        build_model(&ModelConfig::default()).unwrap()
    }

    #[test]
    fn phase_schedule_examples() {
        let p = GaitParams::default();
        let ph = gait_phase(0.7, &p);
        assert_eq!(ph.left, Phase::Swing);
        assert_eq!(ph.right, Phase::Stance);
        assert_relative_eq!(ph.swing_progress.unwrap(), 0.25, epsilon = 1e-12);

        let ds = gait_phase(0.05, &p);
        assert!(ds.double_support());
        assert_eq!(ds.swing_progress, None);

        let wrapped = gait_phase(1.7, &p);
        assert_eq!(wrapped.left, ph.left);
        assert_eq!(wrapped.right, ph.right);
        assert_relative_eq!(
            wrapped.swing_progress.unwrap(),
            ph.swing_progress.unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn never_both_legs_airborne_and_one_touchdown_per_cycle() {
        let p = GaitParams::default();
        let mut left_liftoffs = 0;
        let mut left_touchdowns = 0;
        let mut prev = gait_phase(0.0, &p);
        let n = 10_000;
        for i in 1..=n {
            let t = 10.0 * i as f64 / n as f64;
            let ph = gait_phase(t, &p);
            assert!(
                ph.left == Phase::Stance || ph.right == Phase::Stance,
                "both airborne at t = {t}"
            );
            if t <= 1.0 + 1e-9 {
                if prev.left == Phase::Stance && ph.left == Phase::Swing {
                    left_liftoffs += 1;
                }
                if prev.left == Phase::Swing && ph.left == Phase::Stance {
                    left_touchdowns += 1;
                }
            }
            prev = ph;
        }
        assert_eq!(left_liftoffs, 1);
        assert_eq!(left_touchdowns, 1);
    }

    #[test]
    fn swing_target_boundaries() {
        let p = GaitParams::default();
        let mk = |progress: f64| PhaseState {
            cycle_time: 0.8,
            left: Phase::Swing,
            right: Phase::Stance,
            swing_progress: Some(progress),
        };
        let start = swing_foot_target(&mk(0.0), &p, 0.0).unwrap();
        assert_relative_eq!(start.position.x, -p.step_length);
        assert_eq!(start.position.y, 0.0);
        assert_eq!(start.sole_angle, 0.0);

        let mid = swing_foot_target(&mk(0.5), &p, 0.0).unwrap();
        assert_relative_eq!(mid.position.y, p.step_height);

        let end = swing_foot_target(&mk(1.0), &p, 0.0).unwrap();
        assert_relative_eq!(end.position.x, p.step_length);
        assert_eq!(end.position.y, 0.0);
        // Touchdown vertical velocity is zero: probe the profile slope.
        let h = 1e-6;
        let near = swing_foot_target(&mk(1.0 - h), &p, 0.0).unwrap();
        assert!((near.position.y - end.position.y).abs() / h < 1e-3);

        let ds = PhaseState {
            cycle_time: 0.0,
            left: Phase::Stance,
            right: Phase::Stance,
            swing_progress: None,
        };
        assert!(swing_foot_target(&ds, &p, 0.0).is_err());
    }

    #[test]
    fn body_target_midpoint_and_advance() {
        let p = GaitParams::default();
        let at = |tau: f64| PhaseState {
            cycle_time: tau,
            left: Phase::Stance,
            right: Phase::Stance,
            swing_progress: None,
        };
        // Start of cycle: over the midpoint of anchor and the foot one step
        // length behind it.
        let (x0, z0, pitch0) = body_target(&at(0.0), &p, 0.0);
        assert_relative_eq!(x0, -p.step_length / 2.0);
        assert_eq!(z0, p.hip_height);
        assert_eq!(pitch0, 0.0);
        // One step length per half cycle.
        let (x_half, _, _) = body_target(&at(p.period / 2.0 - 1e-12), &p, 0.0);
        assert_relative_eq!(x_half, p.step_length / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn hip_reference_is_monotone() {
        let p = GaitParams::default();
        let m = model();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..1000 {
            let t = 3.0 * i as f64 / 1000.0;
            let targets = reference_targets(t, &p, &m);
            assert!(targets.hip_frame.translation.x >= prev - 1e-12);
            prev = targets.hip_frame.translation.x;
        }
    }

    #[test]
    fn references_are_continuous_and_reachable() {
        let p = GaitParams::default();
        let m = model();
        p.check_reachable(&m, "gait").unwrap();
        let mut prev = joint_reference(0.0, &p, &m).unwrap().0;
        let n = 4000;
        for i in 1..=n {
            let t = 2.0 * i as f64 / n as f64;
            let (q, _) = joint_reference(t, &p, &m).unwrap();
            let jump = (q - prev).amax();
            assert!(jump < 2e-3, "reference jump {jump} at t = {t}");
            prev = q;
            for joint in m.joints() {
                let v = q[joint.id as usize];
                assert!(
                    v >= joint.min - 1e-9 && v <= joint.max + 1e-9,
                    "{} = {v} outside limits at t = {t}",
                    joint.id.name()
                );
            }
        }
    }

    #[test]
    fn reference_continuity_across_transitions() {
        let p = GaitParams::default();
        let m = model();
        // Left liftoff at duty*T, left touchdown at T, right liftoff at
        // duty*T - T/2, right touchdown at T/2.
        for boundary in [0.1, 0.5, 0.6, 1.0_f64] {
            let (q_before, _) = joint_reference(boundary - 1e-7, &p, &m).unwrap();
            let (q_after, _) = joint_reference(boundary + 1e-7, &p, &m).unwrap();
            assert!(
                (q_after - q_before).amax() < 1e-6,
                "discontinuity at {boundary}"
            );
        }
    }

    #[test]
    fn fk_reproduces_swing_target() {
        use crate::kinematics::forward_kinematics;
        use crate::model::BipedState;
        let p = GaitParams::default();
        let m = model();
        for t in [0.25, 0.65, 0.85, 1.3] {
            let targets = reference_targets(t, &p, &m);
            let q = ik_from_targets(&targets, &m).unwrap();
            let mut state = BipedState::standing(&m);
            state.base_pos = targets.hip_frame.translation;
            state.base_pitch = targets.hip_frame.rotation;
            state.q = q;
            let fk = forward_kinematics(&m, &state);
            let left_err = (fk.ankle(Side::Left) - targets.left.position).norm();
            let right_err = (fk.ankle(Side::Right) - targets.right.position).norm();
            assert!(left_err < 1e-9, "left ankle error {left_err}");
            assert!(right_err < 1e-9, "right ankle error {right_err}");
            assert!(fk.sole_angle(Side::Left).abs() < 1e-9);
            assert!(fk.sole_angle(Side::Right).abs() < 1e-9);
        }
    }

    #[test]
    fn standing_gait_is_constant() {
        let p = GaitParams {
            step_length: 0.0,
            ..GaitParams::default()
        };
        let m = model();
        let (q0, qd0) = joint_reference(0.0, &p, &m).unwrap();
        assert!(qd0.amax() < 1e-9);
        for t in [0.3, 0.7, 1.9] {
            let (q, qd) = joint_reference(t, &p, &m).unwrap();
            assert!((q - q0).amax() < 1e-12);
            assert!(qd.amax() < 1e-9);
        }
    }

    #[test]
    fn gait_csv_round_trip() {
        let series = GaitSeries::new(
            vec![0.0, 0.1, 0.25],
            vec![
                Vector6::new(0.1, 0.2, -0.3, 0.05, 0.9, -0.017),
                Vector6::new(0.11, 0.19, -0.28, 0.04, 0.93, -0.015),
                Vector6::new(0.12, 0.18, -0.26, 0.03, 0.96, -0.013),
            ],
        )
        .unwrap();
        let csv = series.to_csv();
        let parsed = parse_gait_csv(&csv, "mem").unwrap();
        assert_eq!(parsed, series);
    }

    #[test]
    fn gait_csv_errors_carry_line_numbers() {
        let bad_time = "t,hip_l,knee_l,ankle_l,hip_r,knee_r,ankle_r\n0,0,0,0,0,0,0\n-0.1,0,0,0,0,0,0\n";
        match parse_gait_csv(bad_time, "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_cols = "t,hip_l,knee_l,ankle_l,hip_r,knee_r,ankle_r\n0,0,0\n";
        match parse_gait_csv(bad_cols, "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_header = "time,hips\n";
        assert!(matches!(
            parse_gait_csv(bad_header, "mem"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn minimal_two_row_file() {
        let two = "t,hip_l,knee_l,ankle_l,hip_r,knee_r,ankle_r\n0,0.1,0.9,0,0.1,0.9,0\n1,0.1,0.9,0,0.1,0.9,0\n";
        let series = parse_gait_csv(two, "mem").unwrap();
        assert_eq!(series.len(), 2);
    }

    #[test]
    fn resample_nodes_midpoints_and_range() {
        let series = GaitSeries::new(
            vec![0.0, 1.0],
            vec![Vector6::zeros(), Vector6::from_element(1.0)],
        )
        .unwrap();
        assert_eq!(resample(&series, 0.0).unwrap(), Vector6::zeros());
        assert_eq!(resample(&series, 1.0).unwrap(), Vector6::from_element(1.0));
        let mid = resample(&series, 0.5).unwrap();
        assert_relative_eq!(mid[0], 0.5);
        assert!(matches!(
            resample(&series, 1.5),
            Err(Error::OutOfRange { .. })
        ));
    }
}
