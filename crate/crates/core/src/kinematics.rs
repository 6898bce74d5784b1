//! Planar kinematics: D-H rows, rigid transforms, forward kinematics,
//! analytic leg inverse kinematics and contact-point Jacobians.
//!
//! Conventions: the sagittal plane is spanned by x (forward) and z (up);
//! rotations are counter-clockwise in that plane. With all joint angles zero
//! the legs point straight down and the soles are flat on the ground.
//! Positive hip swings the leg forward, positive knee is flexion (the shank
//! swings backward) and positive ankle is plantarflexion (toes down).

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, Vector2};

use crate::error::{Error, Result};
use crate::model::{BipedModel, BipedState, LinkId, Side};

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Perpendicular of a planar vector: the derivative of a CCW rotation.
pub(crate) fn perp(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Unit vector at angle `a` in the x-z plane.
pub(crate) fn unit(a: f64) -> Vector2<f64> {
    Vector2::new(a.cos(), a.sin())
}

/// One Denavit-Hartenberg row of the planar reduction.
///
/// `alpha` is restricted to 0 or pi for a planar chain; `alpha = pi` flips
/// the joint axis so that the row's rotation enters with opposite sign
/// (used for the knee and ankle, whose positive directions oppose the hip).
/// `d` is carried for completeness and is always zero in the sagittal
/// projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DHRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

impl DHRow {
    pub fn new(a: f64, alpha: f64, d: f64, theta_offset: f64) -> Self {
        Self {
            a,
            alpha,
            d,
            theta_offset,
        }
    }

    /// Axis sign implied by the twist: +1 for alpha = 0, -1 for alpha = pi.
    pub fn axis_sign(&self) -> f64 {
        if (self.alpha - PI).abs() < (self.alpha).abs() {
            -1.0
        } else {
            1.0
        }
    }
}

/// A rigid planar transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform2 {
    pub rotation: f64,
    pub translation: Vector2<f64>,
}

impl Transform2 {
    pub fn identity() -> Self {
        Self {
            rotation: 0.0,
            translation: Vector2::zeros(),
        }
    }

    pub fn new(rotation: f64, translation: Vector2<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Compose with a child transform: `self` maps child coordinates into
    /// this frame's parent, so `self.compose(child)` chains outward.
    pub fn compose(&self, child: &Transform2) -> Transform2 {
        Transform2 {
            rotation: self.rotation + child.rotation,
            translation: self.translation + rotate(self.rotation, child.translation),
        }
    }

    /// Map a point from this frame into the parent frame.
    pub fn apply(&self, p: Vector2<f64>) -> Vector2<f64> {
        self.translation + rotate(self.rotation, p)
    }
}

fn rotate(angle: f64, v: Vector2<f64>) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Evaluate one D-H row at joint value `q`.
///
/// The resulting transform rotates by `q + theta_offset` (negated when
/// `alpha = pi`) and translates by `a` along the rotated x axis.
pub fn dh_transform(row: &DHRow, q: f64) -> Transform2 {
    let angle = row.axis_sign() * (q + row.theta_offset);
    Transform2 {
        rotation: angle,
        translation: row.a * unit(angle),
    }
}

/// Target pose for a foot.
///
/// Depending on context `position` is either the ankle point (IK input) or
/// the sole reference point beneath the ankle (gait targets); `sole_angle`
/// is the sole direction relative to the ground, zero meaning flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootPose {
    pub position: Vector2<f64>,
    pub sole_angle: f64,
}

impl FootPose {
    pub fn new(x: f64, z: f64, sole_angle: f64) -> Self {
        Self {
            position: Vector2::new(x, z),
            sole_angle,
        }
    }
}

/// Reach slack absorbing floating-point noise at the workspace boundary.
pub const REACH_TOL: f64 = 1e-9;

/// Analytic two-link leg IK with the foot orientation constraint.
///
/// `target.position` is the desired ankle point in world coordinates and
/// `hip_frame` the frame of the hip joint (its rotation is the torso pitch).
/// Returns `(hip, knee, ankle)` on the knee-forward branch; the knee angle is
/// always >= 0 and the ankle is chosen so the sole angle is met exactly.
pub fn leg_ik(
    target: &FootPose,
    hip_frame: &Transform2,
    leg_lengths: (f64, f64),
) -> Result<(f64, f64, f64)> {
    let (l1, l2) = leg_lengths;
    let delta = target.position - hip_frame.translation;
    let d = delta.norm();
    let reach = l1 + l2;
    if d > reach + REACH_TOL {
        return Err(Error::OutOfReach { distance: d, reach });
    }
    if d + REACH_TOL < (l1 - l2).abs() {
        return Err(Error::OutOfReach { distance: d, reach });
    }

    let knee = if d < 1e-12 {
        // Fully folded (only reachable for equal link lengths); the hip
        // direction is arbitrary, keep the straight-down convention.
        PI
    } else {
        let cos_inner = ((l1 * l1 + l2 * l2 - d * d) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
        PI - cos_inner.acos()
    };

    let (lambda, psi) = if d < 1e-12 {
        (-FRAC_PI_2, FRAC_PI_2)
    } else {
        let lambda = delta.y.atan2(delta.x);
        let cos_psi = ((l1 * l1 + d * d - l2 * l2) / (2.0 * l1 * d)).clamp(-1.0, 1.0);
        (lambda, cos_psi.acos())
    };

    // Knee-forward branch: the thigh is rotated from the hip-ankle chord
    // toward the walking direction.
    let thigh_world = lambda + psi;
    let pitch = hip_frame.rotation;
    let hip = wrap_angle(thigh_world + FRAC_PI_2 - pitch);
    // Sole angle composes as pitch + hip - knee - ankle.
    let ankle = wrap_angle(pitch + hip - knee - target.sole_angle);
    Ok((hip, knee, ankle))
}

/// World frames of every link at the given state.
#[derive(Debug, Clone)]
pub struct LinkFrames {
    frames: [Transform2; LinkId::COUNT],
}

impl LinkFrames {
    pub fn frame(&self, link: LinkId) -> &Transform2 {
        &self.frames[link as usize]
    }

    /// Ankle position of one leg (origin of the foot frame).
    pub fn ankle(&self, side: Side) -> Vector2<f64> {
        self.frame(LinkId::foot(side)).translation
    }

    /// Sole angle of one foot relative to the ground.
    pub fn sole_angle(&self, side: Side) -> f64 {
        wrap_angle(self.frame(LinkId::foot(side)).rotation)
    }
}

/// Forward kinematics: compose the base frame through both leg chains and
/// return one frame per link.
pub fn forward_kinematics(model: &BipedModel, state: &BipedState) -> LinkFrames {
    let g = state.generalized_position();
    let joint_frames = model.mechanism().frames(&g);
    let mut frames = [Transform2::identity(); LinkId::COUNT];
    for link in LinkId::ALL {
        frames[link as usize] = model.link_frame(&joint_frames, link);
    }
    LinkFrames { frames }
}

/// Jacobian of a body-fixed point with respect to the nine generalized
/// coordinates. Rows are (x, z, angle); columns follow the coordinate order
/// (base x, base z, pitch, hip/knee/ankle left, hip/knee/ankle right).
pub fn contact_jacobian(
    model: &BipedModel,
    state: &BipedState,
    body: LinkId,
    local_point: Vector2<f64>,
) -> DMatrix<f64> {
    let g = state.generalized_position();
    let mech = model.mechanism();
    let frames = mech.frames(&g);
    let (joint, local) = model.link_point_to_mechanism(body, local_point);
    let jv = mech.point_jacobian(&frames, joint, local);
    let jw = mech.angular_jacobian(joint);
    let mut j = DMatrix::zeros(3, mech.dof());
    j.view_mut((0, 0), (2, mech.dof())).copy_from(&jv);
    j.view_mut((2, 0), (1, mech.dof()))
        .copy_from(&jw.transpose());
    j
}
