//! Closed-loop control: PD tracking of the gait references, push
//! injection, the ankle/hip/step strategy ladder, fuzzy corrections and
//! fall/recovery bookkeeping.
//!
//! The per-tick controller is a function of its inputs plus a small
//! explicit [`ControlState`] (step retargeting and the accumulated
//! reference shift); a run owns both exclusively, so simulations can run
//! concurrently without shared state.

use nalgebra::{Vector2, Vector6};

use crate::balance::{
    capture_point, cop_from_contact, stability_margin, support_polygon, BalanceState, LipmParams,
};
use crate::dynamics::{ground_contact, ContactModel, ExternalForce, TorqueVector};
use crate::error::Result;
use crate::fuzzy::{hierarchical_infer, FuzzySystem, RecoveryCommand};
use crate::gait::{
    gait_phase, reference_targets, resample, swing_between, GaitParams, GaitSeries, Phase,
    ReferenceTargets,
};
use crate::kinematics::forward_kinematics;
use crate::model::{model_com, model_com_velocity, BipedModel, BipedState, JointId, Side};

/// Per-joint PD gains with a torque ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct PdGains {
    pub kp: Vector6<f64>,
    pub kd: Vector6<f64>,
    pub tau_max: Vector6<f64>,
}

impl Default for PdGains {
    // The ankle drives only the light foot (about 2.7e-5 kg m^2), so its
    // gains sit far below the hip/knee values to stay numerically stable
    // at the default integration step.
    fn default() -> Self {
        Self {
            kp: Vector6::new(60.0, 60.0, 30.0, 60.0, 60.0, 30.0),
            kd: Vector6::new(4.0, 4.0, 0.25, 4.0, 4.0, 0.25),
            tau_max: Vector6::from_element(20.0),
        }
    }
}

impl PdGains {
    pub fn uniform(kp: f64, kd: f64, tau_max: f64) -> Self {
        Self {
            kp: Vector6::from_element(kp),
            kd: Vector6::from_element(kd),
            tau_max: Vector6::from_element(tau_max),
        }
    }
}

/// A scheduled push: a force of fixed magnitude and sagittal direction
/// applied to a body point over a time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushEvent {
    pub t_start: f64,
    pub duration: f64,
    pub magnitude: f64,
    /// Direction in the sagittal plane, 0 = forward (+x), radians.
    pub direction: f64,
    pub body: crate::model::LinkId,
    pub local_point: Vector2<f64>,
}

impl PushEvent {
    pub fn new(t_start: f64, duration: f64, magnitude: f64, direction: f64) -> Self {
        Self {
            t_start,
            duration,
            magnitude,
            direction,
            body: crate::model::LinkId::Torso,
            // Default application point: the torso centre of mass.
            local_point: Vector2::new(0.0, 0.1),
        }
    }

    pub fn force(&self) -> Vector2<f64> {
        Vector2::new(
            self.magnitude * self.direction.cos(),
            self.magnitude * self.direction.sin(),
        )
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_start, self.t_start + self.duration)
    }

    pub fn to_external_force(&self) -> ExternalForce {
        ExternalForce {
            body: self.body,
            local_point: self.local_point,
            force: self.force(),
            window: self.window(),
        }
    }
}

/// Convert the events whose window contains `t` into external forces.
pub fn apply_push(schedule: &[PushEvent], t: f64) -> Vec<ExternalForce> {
    schedule
        .iter()
        .filter(|p| {
            let (start, end) = p.window();
            t >= start && t < end
        })
        .map(PushEvent::to_external_force)
        .collect()
}

/// Escalating balance responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Strategy {
    Ankle,
    Hip,
    Step,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ankle => "ankle",
            Strategy::Hip => "hip",
            Strategy::Step => "step",
        }
    }
}

/// The strategy ladder: ankle torque while the capture point is inside the
/// support, a hip (torso pitch) manoeuvre for small deficits, a step to the
/// capture point beyond `hip_thresh` (a negative margin).
pub fn strategy_select(margin: f64, hip_thresh: f64) -> Strategy {
    if margin >= 0.0 {
        Strategy::Ankle
    } else if margin >= hip_thresh {
        Strategy::Hip
    } else {
        Strategy::Step
    }
}

/// Joint-space PD law with a per-joint torque clamp.
pub fn pd_torque(
    q_ref: &Vector6<f64>,
    qdot_ref: &Vector6<f64>,
    state: &BipedState,
    gains: &PdGains,
) -> Vector6<f64> {
    let mut tau = Vector6::zeros();
    for i in 0..6 {
        let raw = gains.kp[i] * (q_ref[i] - state.q[i]) + gains.kd[i] * (qdot_ref[i] - state.qdot[i]);
        tau[i] = raw.clamp(-gains.tau_max[i], gains.tau_max[i]);
    }
    tau
}

/// Run outcome labels. `Fallen` is absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimStatus {
    Walking,
    Recovering,
    Recovered,
    Fallen,
}

impl SimStatus {
    pub fn name(self) -> &'static str {
        match self {
            SimStatus::Walking => "walking",
            SimStatus::Recovering => "recovering",
            SimStatus::Recovered => "recovered",
            SimStatus::Fallen => "fallen",
        }
    }
}

/// Instantaneous fall predicate: the torso has pitched past 60 degrees or
/// the centre of mass dropped below half its standing height.
pub fn is_fallen(state: &BipedState, model: &BipedModel) -> bool {
    if state.base_pitch.abs() > 1.05 {
        return true;
    }
    match model_com(model, state) {
        Ok(com) => com.y < 0.5 * model.standing_com_height(),
        Err(_) => false,
    }
}

/// Margin that counts as "back to nominal" for recovery detection. The
/// default walking cycle itself dips to about -0.035 m in late single
/// support (the capture point leaves the 4 cm foot while walking), so the
/// threshold sits just below the nominal envelope rather than at zero.
pub const RECOVERY_MARGIN_THRESHOLD: f64 = -0.045;

/// Status machine: walking until a push arrives, recovering until the
/// margin stays above the recovery threshold for one full gait cycle,
/// fallen permanently on the fall predicate.
#[derive(Debug, Clone)]
pub struct StatusTracker {
    status: SimStatus,
    fall_time: Option<f64>,
    margin_ok_since: Option<f64>,
    recovered_at: Option<f64>,
    cycle_period: f64,
    margin_threshold: f64,
}

impl StatusTracker {
    pub fn new(cycle_period: f64, margin_threshold: f64) -> Self {
        Self {
            status: SimStatus::Walking,
            fall_time: None,
            margin_ok_since: None,
            recovered_at: None,
            cycle_period,
            margin_threshold,
        }
    }

    pub fn status(&self) -> SimStatus {
        self.status
    }

    pub fn fall_time(&self) -> Option<f64> {
        self.fall_time
    }

    /// Time at which the qualifying margin window began (the settling
    /// point), once recovered.
    pub fn recovered_at(&self) -> Option<f64> {
        self.recovered_at
    }

    pub fn update(&mut self, t: f64, margin: Option<f64>, push_active: bool, fallen: bool) {
        if self.status == SimStatus::Fallen {
            return;
        }
        if fallen {
            self.status = SimStatus::Fallen;
            self.fall_time = Some(t);
            return;
        }
        if push_active {
            self.status = SimStatus::Recovering;
            self.margin_ok_since = None;
            self.recovered_at = None;
            return;
        }
        if self.status == SimStatus::Recovering {
            let ok = margin.map(|m| m > self.margin_threshold).unwrap_or(false);
            if ok {
                let since = *self.margin_ok_since.get_or_insert(t);
                if t - since >= self.cycle_period {
                    self.status = SimStatus::Recovered;
                    self.recovered_at = Some(since);
                }
            } else {
                self.margin_ok_since = None;
            }
        }
    }
}

/// Reference source: the built-in generator or a recorded series.
#[derive(Debug, Clone)]
pub enum GaitSource {
    Generated(GaitParams),
    Recorded(GaitSeries),
}

/// Controller tunables.
#[derive(Debug, Clone)]
pub struct ControlConfig {
    pub gains: PdGains,
    /// Margin below which the step strategy replaces the hip strategy.
    pub hip_thresh: f64,
    /// Torso-pitch offset per metre of margin deficit (hip strategy).
    pub hip_gain: f64,
    /// Cap on the torso-pitch offset, rad.
    pub hip_cap: f64,
    /// Deficit below the nominal walking envelope before the hip
    /// manoeuvre engages.
    pub margin_deadzone: f64,
    /// Margin that counts as recovered (see [`RECOVERY_MARGIN_THRESHOLD`]).
    pub recovery_margin: f64,
    /// Constant x offset added to the body (hip) reference so the centre
    /// of mass, which rides ahead of the hip in the knee-forward pose,
    /// tracks the support centre. Resolved from the model at setup.
    pub body_trim: f64,
    /// Master switch for the recovery layer (fuzzy corrections, hip
    /// manoeuvre, capture-point stepping). Off leaves pure PD tracking.
    pub corrections: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            gains: PdGains::default(),
            hip_thresh: -0.05,
            hip_gain: 4.0,
            hip_cap: 0.4,
            margin_deadzone: 0.04,
            recovery_margin: RECOVERY_MARGIN_THRESHOLD,
            body_trim: 0.0,
            corrections: true,
        }
    }
}

/// Mutable controller memory threaded through a run.
#[derive(Debug, Clone, Default)]
pub struct ControlState {
    /// Accumulated world-x shift of the reference frame after retargeted
    /// steps.
    pub ref_shift: f64,
    /// Active swing retarget: (side, commanded touch-down x, nominal
    /// touch-down x), cleared at touchdown.
    pub retarget: Option<(Side, f64, f64)>,
    prev_swing: Option<Side>,
}

/// Everything one control tick produces.
#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub tau: TorqueVector,
    pub command: RecoveryCommand,
    pub strategy: Strategy,
    pub balance: BalanceState,
    pub q_ref: Vector6<f64>,
    pub qdot_ref: Vector6<f64>,
    /// Net push force active this tick (world components).
    pub push: Vector2<f64>,
}

fn shifted_targets(
    t: f64,
    params: &GaitParams,
    model: &BipedModel,
    ctl: &ControlState,
    body_trim: f64,
) -> ReferenceTargets {
    let mut targets = reference_targets(t, params, model);
    targets.hip_frame.translation.x += ctl.ref_shift + body_trim;
    targets.left.position.x += ctl.ref_shift;
    targets.right.position.x += ctl.ref_shift;
    targets.stance_ankle_x += ctl.ref_shift;
    if let Some((side, retarget_x, _)) = ctl.retarget {
        if targets.phase.phase(side) == Phase::Swing {
            if let Some(p) = targets.phase.swing_progress {
                let liftoff = targets.stance_ankle_x - params.step_length;
                let pose = swing_between(p, liftoff, retarget_x, params.step_height);
                let foot = match side {
                    Side::Left => &mut targets.left,
                    Side::Right => &mut targets.right,
                };
                foot.position.x = pose.position.x;
                foot.position.y = model.ankle_rest_height() + pose.position.y;
            }
        }
    }
    targets
}

/// Trimmed and shift-aware joint reference used by the closed loop.
pub fn generated_reference(
    t: f64,
    params: &GaitParams,
    model: &BipedModel,
    ctl: &ControlState,
    body_trim: f64,
) -> Result<(Vector6<f64>, Vector6<f64>)> {
    let h = 1e-4;
    let q = crate::gait::ik_from_targets(&shifted_targets(t, params, model, ctl, body_trim), model)?;
    let qp =
        crate::gait::ik_from_targets(&shifted_targets(t + h, params, model, ctl, body_trim), model)?;
    let qm =
        crate::gait::ik_from_targets(&shifted_targets(t - h, params, model, ctl, body_trim), model)?;
    Ok((q, (qp - qm) / (2.0 * h)))
}

fn recorded_reference(
    t: f64,
    series: &GaitSeries,
    _model: &BipedModel,
) -> Result<(Vector6<f64>, Vector6<f64>)> {
    let clamp = |t: f64| t.clamp(series.first_time(), series.last_time());
    let q = resample(series, clamp(t))?;
    let h = 1e-4;
    let qp = resample(series, clamp(t + h))?;
    let qm = resample(series, clamp(t - h))?;
    Ok((q, (qp - qm) / (2.0 * h)))
}

/// Maximum commanded step reach as a fraction of the kinematic limit.
const STEP_REACH_FRACTION: f64 = 0.9;

/// One control tick: compute the balance state, select a strategy, obtain
/// the fuzzy recovery command, apply the hip manoeuvre and capture-point
/// step retargeting (when recovering and corrections are enabled), and
/// produce the commanded joint torques.
#[allow(clippy::too_many_arguments)]
pub fn step_controller(
    model: &BipedModel,
    state: &BipedState,
    t: f64,
    gait: &GaitSource,
    fuzzy: &FuzzySystem,
    pushes: &[PushEvent],
    contact: &ContactModel,
    config: &ControlConfig,
    ctl: &mut ControlState,
    status: SimStatus,
) -> Result<ControlOutput> {
    // Balance quantities from the current multibody state.
    let lipm = LipmParams::for_model(model);
    let com = model_com(model, state)?;
    let com_v = model_com_velocity(model, state);
    let contacts = ground_contact(model, state, contact);
    let cop_x = cop_from_contact(&contacts).ok();
    let support = support_polygon(state, model).ok();
    let capture_x = capture_point(com.x, com_v.x, &lipm);

    let fk = forward_kinematics(model, state);
    let pivot_x = match gait {
        GaitSource::Generated(params) => {
            let phase = gait_phase(t, params);
            match (phase.left, phase.right) {
                (Phase::Stance, Phase::Swing) => fk.ankle(Side::Left).x,
                (Phase::Swing, Phase::Stance) => fk.ankle(Side::Right).x,
                _ => 0.5 * (fk.ankle(Side::Left).x + fk.ankle(Side::Right).x),
            }
        }
        GaitSource::Recorded(_) => match support {
            Some((lo, hi)) => 0.5 * (lo + hi),
            None => com.x,
        },
    };

    // Margin against the support polygon; treat airborne as maximally
    // unstable for strategy purposes.
    let margin = support.map(|s| stability_margin(capture_x, s));
    let margin_eff = margin.unwrap_or(-0.1);
    let strategy = strategy_select(margin_eff, config.hip_thresh);

    let balance = BalanceState {
        pivot_x,
        com_x: com.x - pivot_x,
        com_v: com_v.x,
        cop_x,
        capture_x,
        support: support.unwrap_or((f64::NAN, f64::NAN)),
        margin: margin.unwrap_or(f64::NAN),
    };

    // Push sensing: the active schedule entries, summed.
    let active = apply_push(pushes, t);
    let push: Vector2<f64> = active.iter().map(|f| f.force).sum();
    let push_mag = push.norm();

    // Fuzzy corrections fire only for an actual push; severity carries a
    // dead-band so this is exactly neutral otherwise.
    let command = if config.corrections && push_mag > 0.0 {
        let direction = push.y.atan2(push.x);
        hierarchical_infer(fuzzy, push_mag, direction, margin_eff, state, model)?
    } else {
        RecoveryCommand::neutral(strategy)
    };

    // Nominal references.
    let (mut q_ref, mut qdot_ref) = match gait {
        GaitSource::Generated(params) => {
            // Recovery actions engage only while actually recovering; the
            // nominal cycle's own margin dips must not trigger them.
            let recovering = config.corrections && status == SimStatus::Recovering;
            if recovering {
                if let Some(s) = support {
                    maybe_retarget_step(
                        t, params, model, config, ctl, strategy, capture_x, s, margin_eff,
                    );
                }
            }
            track_touchdown(t, params, ctl);
            generated_reference(t, params, model, ctl, config.body_trim)?
        }
        GaitSource::Recorded(series) => recorded_reference(t, series, model)?,
    };

    // Fuzzy per-joint offsets.
    q_ref += command.delta_q;
    qdot_ref += command.delta_qdot;

    // Hip strategy: a torso-pitch offset proportional to the margin
    // deficit beyond the nominal envelope, realised through the stance hip.
    if config.corrections && status == SimStatus::Recovering && strategy >= Strategy::Hip {
        if let Some((lo, hi)) = support {
            let deficit = if capture_x > hi {
                capture_x - hi
            } else if capture_x < lo {
                capture_x - lo
            } else {
                0.0
            };
            let excess = deficit.signum() * (deficit.abs() - config.margin_deadzone).max(0.0);
            let pitch_offset = (config.hip_gain * excess).clamp(-config.hip_cap, config.hip_cap);
            if pitch_offset != 0.0 {
                let stance_sides: &[Side] = match gait {
                    GaitSource::Generated(params) => match gait_phase(t, params).swing_side() {
                        Some(Side::Left) => &[Side::Right],
                        Some(Side::Right) => &[Side::Left],
                        None => &[Side::Left, Side::Right],
                    },
                    GaitSource::Recorded(_) => &[Side::Left, Side::Right],
                };
                for side in stance_sides {
                    let hip = match side {
                        Side::Left => JointId::HipLeft,
                        Side::Right => JointId::HipRight,
                    };
                    q_ref[hip as usize] += pitch_offset;
                }
            }
        }
    }

    let tau = TorqueVector::from_joint_torques(&pd_torque(&q_ref, &qdot_ref, state, &config.gains));
    Ok(ControlOutput {
        tau,
        command,
        strategy,
        balance,
        q_ref,
        qdot_ref,
        push,
    })
}

/// While a step is demanded, aim the current swing touch-down at the
/// capture point (clamped to the reachable strip around the hip).
#[allow(clippy::too_many_arguments)]
fn maybe_retarget_step(
    t: f64,
    params: &GaitParams,
    model: &BipedModel,
    config: &ControlConfig,
    ctl: &mut ControlState,
    strategy: Strategy,
    capture_x: f64,
    _support: (f64, f64),
    _margin: f64,
) {
    if strategy != Strategy::Step {
        return;
    }
    let phase = gait_phase(t, params);
    let Some(side) = phase.swing_side() else {
        return;
    };
    let targets = shifted_targets(
        t,
        params,
        model,
        &ControlState {
            ref_shift: ctl.ref_shift,
            retarget: None,
            prev_swing: None,
        },
        config.body_trim,
    );
    let nominal_touchdown = targets.stance_ankle_x + params.step_length;
    let (l1, l2) = model.leg_lengths();
    let depth = params.hip_height - model.ankle_rest_height();
    let reach = ((l1 + l2) * (l1 + l2) - depth * depth).max(0.0).sqrt() * STEP_REACH_FRACTION;
    // The hip keeps advancing during the swing; bound the target by the
    // reach around the hip position at the projected touchdown.
    let hip_x = targets.hip_frame.translation.x;
    let target = capture_x.clamp(hip_x - reach, hip_x + reach);
    ctl.retarget = Some((side, target, nominal_touchdown));
}

/// Fold a finished retargeted swing into the reference shift.
fn track_touchdown(t: f64, params: &GaitParams, ctl: &mut ControlState) {
    let phase = gait_phase(t, params);
    let now = phase.swing_side();
    if let Some((side, retarget_x, nominal_x)) = ctl.retarget {
        let landed = match now {
            Some(s) => s != side,
            None => ctl.prev_swing == Some(side),
        };
        if landed {
            ctl.ref_shift += retarget_x - nominal_x;
            ctl.retarget = None;
        }
    }
    ctl.prev_swing = now;
}
