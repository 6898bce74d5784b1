//! Generic planar kinematic tree backing the rigid-body dynamics.
//!
//! A [`Mechanism`] is an ordered list of single-coordinate joints (two world
//! prismatic directions and revolute joints with an optional axis flip) plus
//! rigid bodies attached to the joint frames. Everything the dynamics layer
//! needs - frames, point Jacobians, mass matrix, gravity terms, energies -
//! is derived from this one description, so the kinematics and dynamics can
//! never disagree about the geometry.
//!
//! The biped lowers to a nine-coordinate tree (base x, base z, pitch and six
//! leg joints); unit tests build one- and two-link pendulums from the same
//! parts.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};
use crate::kinematics::{perp, Transform2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JointKind {
    /// Translation along the parent frame x axis.
    PrismaticX,
    /// Translation along the parent frame z axis.
    PrismaticZ,
    /// Rotation about the sagittal normal; `sign` flips the axis and
    /// `offset` is a constant angle added to the coordinate.
    Revolute { sign: f64, offset: f64 },
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub parent: Option<usize>,
    /// Joint origin expressed in the parent frame.
    pub origin: Vector2<f64>,
    pub kind: JointKind,
}

#[derive(Debug, Clone)]
pub struct Body {
    /// Index of the joint frame the body is rigidly attached to.
    pub joint: usize,
    /// Centre of mass in that frame.
    pub com: Vector2<f64>,
    pub mass: f64,
    /// Rotational inertia about the centre of mass, axis normal to the plane.
    pub inertia: f64,
}

/// A concentrated force acting at a body-fixed point, world components.
#[derive(Debug, Clone, Copy)]
pub struct PointForce {
    pub joint: usize,
    pub local: Vector2<f64>,
    pub force: Vector2<f64>,
}

#[derive(Debug, Clone)]
pub struct Mechanism {
    joints: Vec<Joint>,
    bodies: Vec<Body>,
    gravity: f64,
    /// Ancestor coordinate indices per joint (self included), innermost
    /// last; precomputed for the hot Jacobian fills.
    ancestry: Vec<Vec<usize>>,
}

/// Capacity of the stack-allocated scratch buffers in the hot paths.
pub const MAX_DOF: usize = 16;

/// Finite-difference step for the Christoffel construction of the Coriolis
/// matrix.
const CORIOLIS_FD_STEP: f64 = 1e-7;

impl Mechanism {
    /// Build a mechanism; joints must be topologically ordered (parents
    /// before children).
    pub fn new(joints: Vec<Joint>, bodies: Vec<Body>, gravity: f64) -> Self {
        assert!(joints.len() <= MAX_DOF, "mechanism exceeds MAX_DOF joints");
        for (i, j) in joints.iter().enumerate() {
            if let Some(p) = j.parent {
                assert!(p < i, "joint {i} listed before its parent {p}");
            }
        }
        for b in &bodies {
            assert!(b.joint < joints.len(), "body attached to missing joint");
        }
        let ancestry = (0..joints.len())
            .map(|j| {
                let mut chain = Vec::new();
                let mut k = Some(j);
                while let Some(i) = k {
                    chain.push(i);
                    k = joints[i].parent;
                }
                chain
            })
            .collect();
        Self {
            joints,
            bodies,
            gravity,
            ancestry,
        }
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    /// World frame of every joint at configuration `q`.
    pub fn frames(&self, q: &DVector<f64>) -> Vec<Transform2> {
        assert_eq!(q.len(), self.dof());
        let buf = self.frames_buf(q.as_slice());
        buf[..self.dof()].to_vec()
    }

    fn frames_buf(&self, q: &[f64]) -> [Transform2; MAX_DOF] {
        let mut frames = [Transform2::identity(); MAX_DOF];
        for (i, joint) in self.joints.iter().enumerate() {
            let parent = match joint.parent {
                Some(p) => frames[p],
                None => Transform2::identity(),
            };
            frames[i] = match joint.kind {
                JointKind::PrismaticX => Transform2 {
                    rotation: parent.rotation,
                    translation: parent.apply(joint.origin + Vector2::new(q[i], 0.0)),
                },
                JointKind::PrismaticZ => Transform2 {
                    rotation: parent.rotation,
                    translation: parent.apply(joint.origin + Vector2::new(0.0, q[i])),
                },
                JointKind::Revolute { sign, offset } => Transform2 {
                    rotation: parent.rotation + sign * (q[i] + offset),
                    translation: parent.apply(joint.origin),
                },
            };
        }
        frames
    }

    /// Fill the translational Jacobian columns of a body-fixed point into
    /// a stack buffer; only the ancestry columns are touched, the caller
    /// restricts reads accordingly.
    #[inline]
    fn fill_point_jacobian(
        &self,
        frames: &[Transform2],
        joint: usize,
        local: Vector2<f64>,
        out: &mut [(f64, f64); MAX_DOF],
    ) {
        let p = frames[joint].apply(local);
        for &i in &self.ancestry[joint] {
            out[i] = match self.joints[i].kind {
                JointKind::PrismaticX => {
                    let (sin, cos) = frames[i].rotation.sin_cos();
                    (cos, sin)
                }
                JointKind::PrismaticZ => {
                    let (sin, cos) = frames[i].rotation.sin_cos();
                    (-sin, cos)
                }
                JointKind::Revolute { sign, .. } => {
                    let arm = perp(p - frames[i].translation) * sign;
                    (arm.x, arm.y)
                }
            };
        }
    }

    #[inline]
    fn point_velocity_fast(
        &self,
        frames: &[Transform2],
        joint: usize,
        local: Vector2<f64>,
        qdot: &[f64],
    ) -> Vector2<f64> {
        let mut jac = [(0.0, 0.0); MAX_DOF];
        self.fill_point_jacobian(frames, joint, local, &mut jac);
        let mut v = Vector2::zeros();
        for &i in &self.ancestry[joint] {
            v.x += jac[i].0 * qdot[i];
            v.y += jac[i].1 * qdot[i];
        }
        v
    }

    /// World position of a point fixed in a joint frame.
    pub fn point_world(
        &self,
        frames: &[Transform2],
        joint: usize,
        local: Vector2<f64>,
    ) -> Vector2<f64> {
        frames[joint].apply(local)
    }

    /// 2 x dof Jacobian of a body-fixed point.
    pub fn point_jacobian(
        &self,
        frames: &[Transform2],
        joint: usize,
        local: Vector2<f64>,
    ) -> DMatrix<f64> {
        let mut jac = [(0.0, 0.0); MAX_DOF];
        self.fill_point_jacobian(frames, joint, local, &mut jac);
        let mut j = DMatrix::zeros(2, self.dof());
        for &i in &self.ancestry[joint] {
            j[(0, i)] = jac[i].0;
            j[(1, i)] = jac[i].1;
        }
        j
    }

    /// Angular-rate Jacobian row of a joint frame (configuration
    /// independent for a planar tree).
    pub fn angular_jacobian(&self, joint: usize) -> DVector<f64> {
        let mut j = DVector::zeros(self.dof());
        let mut k = Some(joint);
        while let Some(i) = k {
            if let JointKind::Revolute { sign, .. } = self.joints[i].kind {
                j[i] = sign;
            }
            k = self.joints[i].parent;
        }
        j
    }

    /// World velocity of a body-fixed point.
    pub fn point_velocity(
        &self,
        frames: &[Transform2],
        joint: usize,
        local: Vector2<f64>,
        qdot: &DVector<f64>,
    ) -> Vector2<f64> {
        self.point_velocity_fast(frames, joint, local, qdot.as_slice())
    }

    /// Total mass and mass-weighted centre of mass.
    pub fn com(&self, frames: &[Transform2]) -> (f64, Vector2<f64>) {
        let mut total = 0.0;
        let mut weighted = Vector2::zeros();
        for b in &self.bodies {
            total += b.mass;
            weighted += b.mass * frames[b.joint].apply(b.com);
        }
        (total, weighted)
    }

    /// Centre of mass velocity.
    pub fn com_velocity(&self, frames: &[Transform2], qdot: &DVector<f64>) -> Vector2<f64> {
        let mut total = 0.0;
        let mut weighted = Vector2::zeros();
        for b in &self.bodies {
            if b.mass == 0.0 {
                continue;
            }
            total += b.mass;
            weighted += b.mass * self.point_velocity(frames, b.joint, b.com, qdot);
        }
        if total == 0.0 {
            Vector2::zeros()
        } else {
            weighted / total
        }
    }

    /// Joint-space mass matrix, assembled as
    /// sum_b m_b Jv_b' Jv_b + I_b Jw_b' Jw_b.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dof();
        let frames = self.frames_buf(q.as_slice());
        let mut m = DMatrix::zeros(n, n);
        let mut jac = [(0.0, 0.0); MAX_DOF];
        for b in &self.bodies {
            if b.mass == 0.0 && b.inertia == 0.0 {
                continue;
            }
            let chain = &self.ancestry[b.joint];
            if b.mass != 0.0 {
                self.fill_point_jacobian(&frames, b.joint, b.com, &mut jac);
                for &i in chain {
                    for &k in chain {
                        m[(i, k)] += b.mass * (jac[i].0 * jac[k].0 + jac[i].1 * jac[k].1);
                    }
                }
            }
            if b.inertia != 0.0 {
                for &i in chain {
                    let si = match self.joints[i].kind {
                        JointKind::Revolute { sign, .. } => sign,
                        _ => continue,
                    };
                    for &k in chain {
                        let sk = match self.joints[k].kind {
                            JointKind::Revolute { sign, .. } => sign,
                            _ => continue,
                        };
                        m[(i, k)] += b.inertia * si * sk;
                    }
                }
            }
        }
        // Symmetrize away the last bits of rounding.
        for i in 0..n {
            for k in (i + 1)..n {
                let avg = 0.5 * (m[(i, k)] + m[(k, i)]);
                m[(i, k)] = avg;
                m[(k, i)] = avg;
            }
        }
        m
    }

    /// Generalized gravity forces: the gradient of sum_b m_b g z_b.
    pub fn gravity_vector(&self, q: &DVector<f64>) -> DVector<f64> {
        let n = self.dof();
        let frames = self.frames_buf(q.as_slice());
        let mut g = DVector::zeros(n);
        let mut jac = [(0.0, 0.0); MAX_DOF];
        for b in &self.bodies {
            if b.mass == 0.0 {
                continue;
            }
            self.fill_point_jacobian(&frames, b.joint, b.com, &mut jac);
            for &i in &self.ancestry[b.joint] {
                g[i] += b.mass * self.gravity * jac[i].1;
            }
        }
        g
    }

    /// Generalized Coriolis/centrifugal forces C(q, qdot) qdot, evaluated
    /// directly as sum_b m_b Jv' (Jvdot qdot): the body accelerations at
    /// zero joint acceleration. Jvdot is taken by a central difference
    /// along qdot; the planar angular Jacobians are constant and drop out.
    pub fn coriolis_force(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> DVector<f64> {
        let n = self.dof();
        let h = CORIOLIS_FD_STEP;
        let qd = qdot.as_slice();
        let mut q_plus = [0.0; MAX_DOF];
        let mut q_minus = [0.0; MAX_DOF];
        for i in 0..n {
            q_plus[i] = q[i] + h * qd[i];
            q_minus[i] = q[i] - h * qd[i];
        }
        let frames = self.frames_buf(q.as_slice());
        let frames_plus = self.frames_buf(&q_plus[..n]);
        let frames_minus = self.frames_buf(&q_minus[..n]);
        let mut tau = DVector::zeros(n);
        let mut jac = [(0.0, 0.0); MAX_DOF];
        for b in &self.bodies {
            if b.mass == 0.0 {
                continue;
            }
            let v_plus = self.point_velocity_fast(&frames_plus, b.joint, b.com, qd);
            let v_minus = self.point_velocity_fast(&frames_minus, b.joint, b.com, qd);
            let accel = (v_plus - v_minus) / (2.0 * h);
            self.fill_point_jacobian(&frames, b.joint, b.com, &mut jac);
            for &i in &self.ancestry[b.joint] {
                tau[i] += b.mass * (jac[i].0 * accel.x + jac[i].1 * accel.y);
            }
        }
        tau
    }

    /// Coriolis matrix from Christoffel symbols of the first kind, using
    /// central finite differences of the mass matrix. Satisfies the
    /// skew-symmetry of (Mdot - 2C) by construction.
    pub fn coriolis_matrix(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dof();
        let h = CORIOLIS_FD_STEP;
        let mut dm = Vec::with_capacity(n);
        let mut qp = q.clone();
        for k in 0..n {
            qp[k] = q[k] + h;
            let m_plus = self.mass_matrix(&qp);
            qp[k] = q[k] - h;
            let m_minus = self.mass_matrix(&qp);
            qp[k] = q[k];
            dm.push((m_plus - m_minus) / (2.0 * h));
        }
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += 0.5
                        * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)])
                        * qdot[k];
                }
                c[(i, j)] = acc;
            }
        }
        c
    }

    /// Map point forces to generalized forces: sum of J' F.
    pub fn generalized_forces(&self, q: &DVector<f64>, ext: &[PointForce]) -> DVector<f64> {
        let n = self.dof();
        let mut tau = DVector::zeros(n);
        if ext.is_empty() {
            return tau;
        }
        let frames = self.frames_buf(q.as_slice());
        let mut jac = [(0.0, 0.0); MAX_DOF];
        for f in ext {
            self.fill_point_jacobian(&frames, f.joint, f.local, &mut jac);
            for &i in &self.ancestry[f.joint] {
                tau[i] += jac[i].0 * f.force.x + jac[i].1 * f.force.y;
            }
        }
        tau
    }

    /// Inverse dynamics: tau = M qddot + C qdot + G - J' F.
    pub fn inverse_dynamics(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        qddot: &DVector<f64>,
        ext: &[PointForce],
    ) -> DVector<f64> {
        let m = self.mass_matrix(q);
        let g = self.gravity_vector(q);
        m * qddot + self.coriolis_force(q, qdot) + g - self.generalized_forces(q, ext)
    }

    /// Forward dynamics: qddot = M^-1 (tau + J' F - C qdot - G).
    pub fn forward_dynamics(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        tau: &DVector<f64>,
        ext: &[PointForce],
    ) -> Result<DVector<f64>> {
        let m = self.mass_matrix(q);
        let g = self.gravity_vector(q);
        let rhs = tau + self.generalized_forces(q, ext) - self.coriolis_force(q, qdot) - g;
        let chol = m.clone().cholesky().ok_or_else(|| Error::Conditioning {
            detail: format!("q = {:?}", q.as_slice()),
        })?;
        Ok(chol.solve(&rhs))
    }

    /// Kinetic energy at (q, qdot).
    pub fn kinetic_energy(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
        let frames = self.frames(q);
        let mut t = 0.0;
        for b in &self.bodies {
            if b.mass != 0.0 {
                let v = self.point_velocity(&frames, b.joint, b.com, qdot);
                t += 0.5 * b.mass * v.norm_squared();
            }
            if b.inertia != 0.0 {
                let w = self.angular_jacobian(b.joint).dot(qdot);
                t += 0.5 * b.inertia * w * w;
            }
        }
        t
    }

    /// Gravitational potential energy at q.
    pub fn potential_energy(&self, q: &DVector<f64>) -> f64 {
        let frames = self.frames(q);
        let mut v = 0.0;
        for b in &self.bodies {
            if b.mass == 0.0 {
                continue;
            }
            v += b.mass * self.gravity * frames[b.joint].apply(b.com).y;
        }
        v
    }

    /// One classical RK4 step of the forced dynamics from time `t`.
    /// `forces` receives (stage time, q, qdot) and returns the generalized
    /// actuation plus any point forces for that stage, so time-windowed
    /// forces and contact are evaluated inside every stage.
    pub fn rk4_step<F>(
        &self,
        t: f64,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        dt: f64,
        mut forces: F,
    ) -> Result<(DVector<f64>, DVector<f64>)>
    where
        F: FnMut(f64, &DVector<f64>, &DVector<f64>) -> (DVector<f64>, Vec<PointForce>),
    {
        let deriv = |ts: f64,
                     q: &DVector<f64>,
                     qd: &DVector<f64>,
                     forces: &mut F|
         -> Result<DVector<f64>> {
            let (tau, ext) = forces(ts, q, qd);
            self.forward_dynamics(q, qd, &tau, &ext)
        };

        let half = t + dt / 2.0;
        let k1v = deriv(t, q, qdot, &mut forces)?;
        let q2 = q + qdot * (dt / 2.0);
        let v2 = qdot + &k1v * (dt / 2.0);
        let k2v = deriv(half, &q2, &v2, &mut forces)?;
        let q3 = q + &v2 * (dt / 2.0);
        let v3 = qdot + &k2v * (dt / 2.0);
        let k3v = deriv(half, &q3, &v3, &mut forces)?;
        let q4 = q + &v3 * dt;
        let v4 = qdot + &k3v * dt;
        let k4v = deriv(t + dt, &q4, &v4, &mut forces)?;

        let q_next = q + (qdot + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
        let v_next = qdot + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
        Ok((q_next, v_next))
    }
}

/// A single rod pivoting about one end: the canonical test mechanism.
/// The rod hangs straight down at q = 0 and swings forward for q > 0.
pub fn pendulum(mass: f64, length: f64, gravity: f64) -> Mechanism {
    Mechanism::new(
        vec![Joint {
            parent: None,
            origin: Vector2::zeros(),
            kind: JointKind::Revolute {
                sign: 1.0,
                offset: -std::f64::consts::FRAC_PI_2,
            },
        }],
        vec![Body {
            joint: 0,
            com: Vector2::new(length / 2.0, 0.0),
            mass,
            inertia: mass * length * length / 12.0,
        }],
        gravity,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pendulum_mass_matrix_is_parallel_axis_inertia() {
        // Rod pivoted at its end: I = m L^2 / 3.
        let mech = pendulum(0.735, 0.2, 9.81);
        let m = mech.mass_matrix(&DVector::from_element(1, 0.3));
        assert_relative_eq!(m[(0, 0)], 0.735 * 0.04 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn pendulum_gravity_torque() {
        let mech = pendulum(0.735, 0.2, 9.81);
        // Hanging straight down: zero torque.
        let g0 = mech.gravity_vector(&DVector::from_element(1, 0.0));
        assert_relative_eq!(g0[0], 0.0, epsilon = 1e-15);
        // Horizontal rod: m g L / 2.
        let g1 = mech.gravity_vector(&DVector::from_element(1, std::f64::consts::FRAC_PI_2));
        assert_relative_eq!(g1[0], 0.735 * 9.81 * 0.1, epsilon = 1e-12);
    }

    #[test]
    fn pendulum_coriolis_vanishes() {
        // Configuration-independent inertia means C = 0.
        let mech = pendulum(1.0, 0.3, 9.81);
        let c = mech.coriolis_matrix(
            &DVector::from_element(1, 0.7),
            &DVector::from_element(1, 2.0),
        );
        assert!(c[(0, 0)].abs() < 1e-9);
    }

    #[test]
    fn pendulum_small_angle_acceleration() {
        // Linearized: qddot = -(3 g / 2 L) q.
        let mech = pendulum(0.5, 0.2, 9.81);
        let q = DVector::from_element(1, 1e-4);
        let qd = DVector::zeros(1);
        let tau = DVector::zeros(1);
        let qdd = mech.forward_dynamics(&q, &qd, &tau, &[]).unwrap();
        let expected = -(3.0 * 9.81 / (2.0 * 0.2)) * 1e-4;
        assert_relative_eq!(qdd[0], expected, max_relative = 1e-6);
    }

    #[test]
    fn zero_gravity_rest_is_fixed_point() {
        let mech = pendulum(1.0, 0.3, 0.0);
        let q = DVector::from_element(1, 0.4);
        let qd = DVector::zeros(1);
        let (q2, v2) = mech
            .rk4_step(0.0, &q, &qd, 1e-3, |_, _, _| (DVector::zeros(1), Vec::new()))
            .unwrap();
        assert_eq!(q2[0], 0.4);
        assert_eq!(v2[0], 0.0);
    }

    #[test]
    fn base_point_jacobian_identity_columns() {
        // A floating block: prismatic x, prismatic z, revolute pitch.
        let mech = Mechanism::new(
            vec![
                Joint {
                    parent: None,
                    origin: Vector2::zeros(),
                    kind: JointKind::PrismaticX,
                },
                Joint {
                    parent: Some(0),
                    origin: Vector2::zeros(),
                    kind: JointKind::PrismaticZ,
                },
                Joint {
                    parent: Some(1),
                    origin: Vector2::zeros(),
                    kind: JointKind::Revolute {
                        sign: 1.0,
                        offset: 0.0,
                    },
                },
            ],
            vec![Body {
                joint: 2,
                com: Vector2::zeros(),
                mass: 2.0,
                inertia: 0.1,
            }],
            9.81,
        );
        let q = DVector::from_vec(vec![0.3, 1.2, 0.0]);
        let frames = mech.frames(&q);
        let j = mech.point_jacobian(&frames, 2, Vector2::zeros());
        assert_relative_eq!(j[(0, 0)], 1.0);
        assert_relative_eq!(j[(1, 1)], 1.0);
        assert_relative_eq!(j[(1, 0)], 0.0);
        assert_relative_eq!(j[(0, 1)], 0.0);
        // Point at the frame origin: zero lever arm for the pitch column.
        assert_relative_eq!(j[(0, 2)], 0.0);
        assert_relative_eq!(j[(1, 2)], 0.0);
    }

    #[test]
    fn revolute_point_column_magnitude_is_radius() {
        let mech = pendulum(1.0, 0.3, 9.81);
        let q = DVector::from_element(1, 0.4);
        let frames = mech.frames(&q);
        let r = 0.27;
        let j = mech.point_jacobian(&frames, 0, Vector2::new(r, 0.0));
        let col = Vector2::new(j[(0, 0)], j[(1, 0)]);
        assert_relative_eq!(col.norm(), r, epsilon = 1e-12);
    }
}
