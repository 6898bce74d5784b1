use biped_core::config::ExperimentConfig;
use biped_core::control::pd_torque;
use biped_core::dynamics::{integrate_step, ContactAnchors, TorqueVector};
use biped_core::gait::joint_reference;
use biped_core::model::{model_com, BipedState};
use nalgebra::{Vector2, Vector6};
use std::path::Path;

fn main() {
    let config = ExperimentConfig::default();
    let setup = config.build(Path::new(".")).unwrap();
    let model = &setup.model;
    let params = match &setup.gait {
        biped_core::control::GaitSource::Generated(p) => *p,
        _ => unreachable!(),
    };
    let (q0, _) = joint_reference(0.0, &params, model).unwrap();
    let mut state = BipedState {
        base_pos: Vector2::new(-params.step_length / 2.0, params.hip_height),
        base_pitch: 0.0,
        q: q0,
        base_vel: Vector2::zeros(),
        base_pitch_rate: 0.0,
        qdot: Vector6::zeros(),
    };
    let mut anchors = ContactAnchors::default();
    let h = 1e-4;
    for k in 0..30000usize {
        let tau = TorqueVector::from_joint_torques(&pd_torque(&q0, &Vector6::zeros(), &state, &setup.control.gains));
        match integrate_step(model, &state, &tau, Some(&setup.contact), Some(&mut anchors), &[], k as f64 * h, h) {
            Ok(next) => state = next,
            Err(e) => { println!("DIVERGED at step {k}: {e}"); break; }
        }
        if k % 2000 == 0 || !state.is_finite() {
            let com = model_com(model, &state).unwrap();
            println!(
                "t={:.3} base=({:+.4},{:.4}) pitch={:+.4} pitchrate={:+.3} com=({:+.4},{:.4}) qerrmax={:.4} qdmax={:.3}",
                k as f64 * h, state.base_pos.x, state.base_pos.y, state.base_pitch, state.base_pitch_rate,
                com.x, com.y, (state.q - q0).amax(), state.qdot.amax()
            );
            if !state.is_finite() { break; }
        }
    }
}
