//! Simulation runner, CSV log schema and push sweeps.
//!
//! A run is fully deterministic: identical setups produce byte-identical
//! logs. Each run starts from a settled standing posture (a short
//! contact-settling phase under the t = 0 references, not logged), then
//! integrates the closed loop at fixed dt, logging one row per step. A run
//! ends early when the fall predicate fires; the fallen status is
//! absorbing, so continuing to integrate a collapsed model adds nothing.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Vector2, Vector6};

use crate::control::{
    apply_push, is_fallen, step_controller, ControlState, GaitSource, PushEvent, SimStatus,
    StatusTracker, Strategy,
};
use crate::config::RunSetup;
use crate::dynamics::{integrate_step, ExternalForce};
use crate::error::{Error, Result};
use crate::gait::{gait_phase, GaitSeries, Phase};
use crate::model::{BipedState, Side};

/// Exact header of the run log CSV.
pub const LOG_HEADER: &str = "t,hip_l,knee_l,ankle_l,hip_r,knee_r,ankle_r,\
dhip_l,dknee_l,dankle_l,dhip_r,dknee_r,dankle_r,\
base_x,base_z,pitch,com_x,com_z,cop_x,capture_x,margin,\
phase_l,phase_r,strategy,severity,\
corr_hip_l,corr_knee_l,corr_ankle_l,corr_hip_r,corr_knee_r,corr_ankle_r,\
push_fx,push_fz,status";

/// Number of columns in the log schema.
pub const LOG_COLUMNS: usize = 34;

/// One logged sample.
#[derive(Debug, Clone)]
pub struct LogRow {
    pub t: f64,
    pub q: Vector6<f64>,
    pub qdot: Vector6<f64>,
    pub base: (f64, f64, f64),
    pub com: (f64, f64),
    pub cop_x: f64,
    pub capture_x: f64,
    pub margin: f64,
    pub phase_left: Phase,
    pub phase_right: Phase,
    pub strategy: Strategy,
    pub severity: f64,
    pub corrections: Vector6<f64>,
    pub push: (f64, f64),
    pub status: SimStatus,
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Stance => "stance",
        Phase::Swing => "swing",
    }
}

/// Time-indexed record of one run.
#[derive(Debug, Clone, Default)]
pub struct SimLog {
    pub rows: Vec<LogRow>,
}

impl SimLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 200);
        out.push_str(LOG_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{}", r.t);
            for i in 0..6 {
                let _ = write!(out, ",{}", r.q[i]);
            }
            for i in 0..6 {
                let _ = write!(out, ",{}", r.qdot[i]);
            }
            let _ = write!(out, ",{},{},{}", r.base.0, r.base.1, r.base.2);
            let _ = write!(out, ",{},{}", r.com.0, r.com.1);
            let _ = write!(out, ",{},{},{}", r.cop_x, r.capture_x, r.margin);
            let _ = write!(
                out,
                ",{},{}",
                phase_name(r.phase_left),
                phase_name(r.phase_right)
            );
            let _ = write!(out, ",{},{}", r.strategy.name(), r.severity);
            for i in 0..6 {
                let _ = write!(out, ",{}", r.corrections[i]);
            }
            let _ = write!(out, ",{},{}", r.push.0, r.push.1);
            let _ = write!(out, ",{}", r.status.name());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Re-export the joint columns as a gait series (for self-replay).
    pub fn to_gait_series(&self) -> Result<GaitSeries> {
        GaitSeries::new(
            self.rows.iter().map(|r| r.t).collect(),
            self.rows.iter().map(|r| r.q).collect(),
        )
    }
}

/// Outcome of one scheduled push.
#[derive(Debug, Clone, PartialEq)]
pub struct PushOutcome {
    pub index: usize,
    pub t_start: f64,
    pub magnitude: f64,
    /// "recovered", "fallen", "not_recovered" or "n/a" (scheduled after
    /// the run ended).
    pub outcome: String,
    pub strategy_peak: Strategy,
    /// Time from push end to the start of the qualifying stable window.
    pub settling: Option<f64>,
}

/// Aggregate numbers of one run.
#[derive(Debug, Clone)]
pub struct RunStats {
    /// RMS of (q - q_ref) over all joints and samples.
    pub tracking_rms: f64,
    pub max_abs_pitch: f64,
    /// True if at every sample at least one foot point was at or below
    /// ground level.
    pub always_one_foot_down: bool,
    /// True if the integrator diverged (counted as a fall).
    pub diverged: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub log: SimLog,
    pub status: SimStatus,
    pub fall_time: Option<f64>,
    pub outcomes: Vec<PushOutcome>,
    pub stats: RunStats,
    pub final_state: BipedState,
    pub seed: u64,
}

impl RunResult {
    pub fn fell(&self) -> bool {
        self.status == SimStatus::Fallen
    }

    /// Plain-text summary, one line per fact.
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status: {}", self.status.name());
        if let Some(t) = self.fall_time {
            let _ = writeln!(s, "fall_time: {t:.3}");
        }
        let _ = writeln!(s, "rows: {}", self.log.rows.len());
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "tracking_rms: {:.6}", self.stats.tracking_rms);
        let _ = writeln!(s, "max_abs_pitch: {:.6}", self.stats.max_abs_pitch);
        for o in &self.outcomes {
            let settling = o
                .settling
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "n/a".into());
            let _ = writeln!(
                s,
                "push[{}] t={:.3} mag={:.3}: {} (strategy {}, settling {})",
                o.index, o.t_start, o.magnitude, o.outcome, o.strategy_peak.name(), settling
            );
        }
        s
    }

    /// JSON summary for scripting.
    pub fn summary_json(&self) -> String {
        let pushes: Vec<serde_json::Value> = self
            .outcomes
            .iter()
            .map(|o| {
                serde_json::json!({
                    "index": o.index,
                    "t_start": o.t_start,
                    "magnitude": o.magnitude,
                    "outcome": o.outcome,
                    "strategy": o.strategy_peak.name(),
                    "settling": o.settling,
                })
            })
            .collect();
        serde_json::json!({
            "status": self.status.name(),
            "fall_time": self.fall_time,
            "rows": self.log.rows.len(),
            "seed": self.seed,
            "tracking_rms": self.stats.tracking_rms,
            "max_abs_pitch": self.stats.max_abs_pitch,
            "diverged": self.stats.diverged,
            "pushes": pushes,
        })
        .to_string()
    }
}

/// Settling phase length before t = 0.
const SETTLE_DURATION: f64 = 3.0;

/// Upper bound on the internal integration substep. The control/log period
/// `dt` is divided into equal substeps no longer than this; the stiff
/// foot-contact modes require it.
pub const MAX_SUBSTEP: f64 = 5e-5;

/// Advance one control period by RK4 substeps with the torque held.
fn advance(
    model: &crate::model::BipedModel,
    state: &BipedState,
    tau: &crate::dynamics::TorqueVector,
    contact: &crate::dynamics::ContactModel,
    anchors: &mut crate::dynamics::ContactAnchors,
    pushes: &[ExternalForce],
    t: f64,
    dt: f64,
) -> Result<BipedState> {
    let n = (dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let mut s = state.clone();
    for i in 0..n {
        s = integrate_step(
            model,
            &s,
            tau,
            Some(contact),
            Some(&mut *anchors),
            pushes,
            t + i as f64 * h,
            h,
        )?;
    }
    Ok(s)
}

/// Build the initial state: pose and rates of the t = 0 reference, then a
/// settling simulation under frozen references so the contact springs and
/// gravity sag reach equilibrium before the gait clock starts.
fn initial_state(setup: &RunSetup) -> Result<BipedState> {
    let model = &setup.model;
    let (q0, qd0, base0, base_vel0) = match &setup.gait {
        GaitSource::Generated(params) => {
            let ctl0 = ControlState::default();
            let (q, qd) =
                crate::control::generated_reference(0.0, params, model, &ctl0, setup.control.body_trim)?;
            let hip_x0 = -params.step_length / 2.0 + setup.control.body_trim;
            let hip_vel = 2.0 * params.step_length / params.period;
            (
                q,
                qd,
                Vector2::new(hip_x0, params.hip_height),
                Vector2::new(hip_vel, 0.0),
            )
        }
        GaitSource::Recorded(series) => {
            let q = series.samples()[0];
            (
                q,
                Vector6::zeros(),
                Vector2::new(0.0, setup.gait_params.hip_height),
                Vector2::zeros(),
            )
        }
    };

    let mut state = BipedState {
        base_pos: base0,
        base_pitch: 0.0,
        q: q0,
        base_vel: Vector2::zeros(),
        base_pitch_rate: 0.0,
        qdot: Vector6::zeros(),
    };

    // Hold the initial pose until the contact transient dies out.
    let dt = setup.dt.min(1e-3);
    let steps = (SETTLE_DURATION / dt).round() as usize;
    let gains = &setup.control.gains;
    let mut anchors = crate::dynamics::ContactAnchors::default();
    for k in 0..steps {
        let tau = crate::dynamics::TorqueVector::from_joint_torques(&crate::control::pd_torque(
            &q0,
            &Vector6::zeros(),
            &state,
            gains,
        ));
        state = advance(
            model,
            &state,
            &tau,
            &setup.contact,
            &mut anchors,
            &[],
            k as f64 * dt,
            dt,
        )?;
    }

    // Launch the gait with the reference rates.
    state.base_vel = base_vel0;
    state.qdot = qd0;
    Ok(state)
}

/// Run the closed-loop simulation described by `setup`.
pub fn run(setup: &RunSetup) -> Result<RunResult> {
    let model = &setup.model;
    let dt = setup.dt;
    let steps = (setup.duration / dt).round() as usize;

    let mut state = initial_state(setup)?;
    let mut ctl = ControlState::default();
    let mut anchors = crate::dynamics::ContactAnchors::default();
    let mut tracker = StatusTracker::new(setup.gait_params.period, setup.control.recovery_margin);
    let mut log = SimLog::default();
    let ext_pushes: Vec<ExternalForce> =
        setup.pushes.iter().map(PushEvent::to_external_force).collect();

    let mut tracking_sq_sum = 0.0;
    let mut tracking_samples = 0usize;
    let mut max_abs_pitch: f64 = 0.0;
    let mut always_one_foot_down = true;
    let mut diverged = false;
    let mut strategy_peak = Strategy::Ankle;

    for k in 0..=steps {
        let t = k as f64 * dt;
        let out = step_controller(
            model,
            &state,
            t,
            &setup.gait,
            &setup.fuzzy,
            &setup.pushes,
            &setup.contact,
            &setup.control,
            &mut ctl,
            tracker.status(),
        )?;

        let fallen = is_fallen(&state, model);
        let push_active = !apply_push(&setup.pushes, t).is_empty();
        let margin = if out.balance.margin.is_nan() {
            None
        } else {
            Some(out.balance.margin)
        };
        tracker.update(t, margin, push_active, fallen);
        strategy_peak = strategy_peak.max(out.strategy);

        // Reference-relative phase labels (physical contact is tracked
        // separately below).
        let (phase_left, phase_right) = match &setup.gait {
            GaitSource::Generated(params) => {
                let ph = gait_phase(t, params);
                (ph.left, ph.right)
            }
            GaitSource::Recorded(_) => {
                let fk = crate::kinematics::forward_kinematics(model, &state);
                let touching = |side: Side| {
                    let frame = fk.frame(crate::model::LinkId::foot(side));
                    model.foot_points().iter().any(|p| frame.apply(*p).y <= 0.0)
                };
                (
                    if touching(Side::Left) { Phase::Stance } else { Phase::Swing },
                    if touching(Side::Right) { Phase::Stance } else { Phase::Swing },
                )
            }
        };

        let com = crate::model::model_com(model, &state)?;
        log.rows.push(LogRow {
            t,
            q: state.q,
            qdot: state.qdot,
            base: (state.base_pos.x, state.base_pos.y, state.base_pitch),
            com: (com.x, com.y),
            cop_x: out.balance.cop_x.unwrap_or(f64::NAN),
            capture_x: out.balance.capture_x,
            margin: out.balance.margin,
            phase_left,
            phase_right,
            strategy: out.strategy,
            severity: out.command.severity,
            corrections: out.command.delta_q,
            push: (out.push.x, out.push.y),
            status: tracker.status(),
        });

        tracking_sq_sum += (state.q - out.q_ref).norm_squared();
        tracking_samples += 6;
        max_abs_pitch = max_abs_pitch.max(state.base_pitch.abs());
        {
            let fk = crate::kinematics::forward_kinematics(model, &state);
            let down = Side::BOTH.iter().any(|&side| {
                let frame = fk.frame(crate::model::LinkId::foot(side));
                model.foot_points().iter().any(|p| frame.apply(*p).y <= 0.0)
            });
            if !down {
                always_one_foot_down = false;
            }
        }

        if tracker.status() == SimStatus::Fallen {
            break;
        }
        if k < steps {
            match advance(
                model,
                &state,
                &out.tau,
                &setup.contact,
                &mut anchors,
                &ext_pushes,
                t,
                dt,
            ) {
                Ok(next) => state = next,
                Err(Error::Diverged { t }) => {
                    // A numerically exploded post-impact state is a fall
                    // for outcome purposes; record it and stop.
                    diverged = true;
                    tracker.update(t, None, false, true);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }

    let outcomes = label_pushes(setup, &tracker, strategy_peak);
    Ok(RunResult {
        status: tracker.status(),
        fall_time: tracker.fall_time(),
        outcomes,
        stats: RunStats {
            tracking_rms: (tracking_sq_sum / tracking_samples.max(1) as f64).sqrt(),
            max_abs_pitch,
            always_one_foot_down,
            diverged,
        },
        final_state: state,
        seed: setup.seed,
        log,
    })
}

fn label_pushes(
    setup: &RunSetup,
    tracker: &StatusTracker,
    strategy_peak: Strategy,
) -> Vec<PushOutcome> {
    setup
        .pushes
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let (outcome, settling) = if p.t_start >= setup.duration {
                ("n/a".to_string(), None)
            } else {
                match tracker.status() {
                    SimStatus::Fallen => ("fallen".to_string(), None),
                    SimStatus::Recovered => {
                        let settle = tracker
                            .recovered_at()
                            .map(|t| (t - (p.t_start + p.duration)).max(0.0));
                        ("recovered".to_string(), settle)
                    }
                    _ => ("not_recovered".to_string(), None),
                }
            };
            PushOutcome {
                index,
                t_start: p.t_start,
                magnitude: p.magnitude,
                outcome,
                strategy_peak,
                settling,
            }
        })
        .collect()
}

/// One row of a push sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub magnitude: f64,
    pub corrections: bool,
    pub outcome: String,
    pub strategy_peak: Strategy,
    pub max_margin_excursion: f64,
    pub settling: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Largest recovered magnitude with corrections enabled.
    pub critical_on: Option<f64>,
    /// Largest recovered magnitude with corrections disabled (ablation
    /// runs only).
    pub critical_off: Option<f64>,
    /// Magnitudes where the outcome flips back from fallen to recovered
    /// as magnitude grows (flagged, not hidden).
    pub monotonicity_violations: Vec<f64>,
}

pub const SWEEP_HEADER: &str =
    "magnitude,corrections,outcome,strategy,max_margin_excursion,settling_time";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.magnitude,
                if r.corrections { "on" } else { "off" },
                r.outcome,
                r.strategy_peak.name(),
                r.max_margin_excursion,
                r.settling.map(|v| v.to_string()).unwrap_or_else(|| "nan".into()),
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let fmt = |v: Option<f64>| v.map(|m| format!("{m}")).unwrap_or_else(|| "none".into());
        let _ = writeln!(s, "critical_magnitude: {}", fmt(self.critical_on));
        if self.rows.iter().any(|r| !r.corrections) {
            let _ = writeln!(s, "critical_magnitude_ablated: {}", fmt(self.critical_off));
        }
        if !self.monotonicity_violations.is_empty() {
            let _ = writeln!(
                s,
                "monotonicity_violations: {:?}",
                self.monotonicity_violations
            );
        }
        s
    }

    pub fn summary_json(&self) -> String {
        serde_json::json!({
            "critical_magnitude": self.critical_on,
            "critical_magnitude_ablated": self.critical_off,
            "monotonicity_violations": self.monotonicity_violations,
        })
        .to_string()
    }
}

/// Run one independent simulation per push magnitude (and per corrections
/// arm when `ablate` is set), in deterministic magnitude order.
pub fn run_sweep(
    setup: &RunSetup,
    force_min: f64,
    force_max: f64,
    steps: usize,
    direction: f64,
    ablate: bool,
) -> Result<SweepResult> {
    assert!(steps >= 1, "sweep needs at least one step");
    assert!(force_min <= force_max, "sweep range must be ordered");

    // The first configured push is the template; otherwise a default
    // torso push at t = 2 s for 0.1 s.
    let template = setup
        .pushes
        .first()
        .copied()
        .unwrap_or_else(|| PushEvent::new(2.0, 0.1, 0.0, 0.0));

    let mut rows = Vec::new();
    let arms: &[bool] = if ablate { &[true, false] } else { &[true] };
    for i in 0..steps {
        let magnitude = if steps == 1 {
            force_min
        } else {
            force_min + (force_max - force_min) * i as f64 / (steps - 1) as f64
        };
        for &corrections in arms {
            let mut sub = setup.clone();
            sub.control.corrections = corrections;
            sub.pushes = vec![PushEvent {
                magnitude,
                direction,
                ..template
            }];
            let result = run(&sub)?;
            let excursion = result
                .log
                .rows
                .iter()
                .map(|r| r.margin.abs())
                .filter(|v| v.is_finite())
                .fold(0.0, f64::max);
            let outcome = result
                .outcomes
                .first()
                .map(|o| o.outcome.clone())
                .unwrap_or_else(|| "n/a".into());
            rows.push(SweepRow {
                magnitude,
                corrections,
                outcome,
                strategy_peak: result
                    .outcomes
                    .first()
                    .map(|o| o.strategy_peak)
                    .unwrap_or(Strategy::Ankle),
                max_margin_excursion: excursion,
                settling: result.outcomes.first().and_then(|o| o.settling),
            });
        }
    }

    let critical = |corr: bool| {
        rows.iter()
            .filter(|r| r.corrections == corr && r.outcome == "recovered")
            .map(|r| r.magnitude)
            .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))))
    };
    let mut violations = Vec::new();
    for corr in [true, false] {
        let arm: Vec<&SweepRow> = rows.iter().filter(|r| r.corrections == corr).collect();
        for w in arm.windows(2) {
            if w[0].outcome != "recovered" && w[1].outcome == "recovered" && w[0].magnitude > 0.0 {
                violations.push(w[1].magnitude);
            }
        }
    }

    Ok(SweepResult {
        critical_on: critical(true),
        critical_off: critical(false),
        monotonicity_violations: violations,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn quick_setup(duration: f64) -> RunSetup {
        let mut config = ExperimentConfig::default();
        config.simulation.duration = duration;
        config.build(Path::new(".")).unwrap()
    }

    #[test]
    fn log_header_has_expected_columns() {
        assert_eq!(LOG_HEADER.split(',').count(), LOG_COLUMNS);
    }

    #[test]
    fn short_run_logs_every_step() {
        let setup = quick_setup(0.05);
        let result = run(&setup).unwrap();
        assert_eq!(result.log.rows.len(), 51);
        let csv = result.log.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), LOG_HEADER);
        for line in lines {
            assert_eq!(line.split(',').count(), LOG_COLUMNS, "bad row: {line}");
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let setup = quick_setup(0.2);
        let a = run(&setup).unwrap().log.to_csv();
        let b = run(&setup).unwrap().log.to_csv();
        assert_eq!(a, b);
    }
}
