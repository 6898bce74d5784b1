//! Planar (sagittal-plane) biped simulation library.
//!
//! The crate builds a seven-link biped from physical parameters, tracks a
//! cyclic gait through analytic leg inverse kinematics and PD torque control,
//! simulates the full floating-base rigid-body dynamics with spring-damper
//! ground contact, and layers a linear-inverted-pendulum balance model plus a
//! hierarchical fuzzy inference module on top for push recovery.
//!
//! Module map:
//! - [`model`]: link/joint description, mass properties, centre of mass
//! - [`mechanism`]: generic planar kinematic tree used by the dynamics
//! - [`kinematics`]: D-H transforms, forward kinematics, leg IK, Jacobians
//! - [`dynamics`]: mass matrix, Coriolis, gravity, contact, RK4 stepping
//! - [`balance`]: LIPM closed forms, capture point, CoP, support interval
//! - [`gait`]: phase machine, swing/body trajectories, joint references
//! - [`fuzzy`]: intuitionistic Mamdani inference and the rule-base format
//! - [`control`]: PD tracking, push injection, strategy ladder, fall logic
//! - [`config`]: experiment configuration file schema
//! - [`sim`]: simulation runner, CSV log schema, push sweeps

pub mod balance;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod fuzzy;
pub mod gait;
pub mod kinematics;
pub mod mechanism;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
