//! Linear inverted pendulum balance layer.
//!
//! The multibody robot is abstracted as a point mass at constant height z_c,
//! giving the linear sagittal dynamics xddot = (g / z_c) x about the stance
//! pivot. On top of that sit the orbital energy, the capture point, the
//! centre of pressure and the support interval with its signed stability
//! margin, which drive strategy selection and the run logs.

use crate::dynamics::ContactForce;
use crate::error::{Error, Result};
use crate::kinematics::forward_kinematics;
use crate::model::{BipedModel, BipedState, Side};

/// Pendulum abstraction parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipmParams {
    /// Constant CoM height above the pivot, m.
    pub z_c: f64,
    pub gravity: f64,
}

impl LipmParams {
    pub fn new(z_c: f64, gravity: f64) -> Self {
        assert!(z_c > 0.0 && gravity > 0.0, "LIPM needs positive z_c and g");
        Self { z_c, gravity }
    }

    /// For a model: the standing CoM height of the multibody chain.
    pub fn for_model(model: &BipedModel) -> Self {
        Self::new(model.standing_com_height(), model.gravity())
    }

    /// Pendulum time constant sqrt(z_c / g).
    pub fn time_constant(&self) -> f64 {
        (self.z_c / self.gravity).sqrt()
    }
}

/// Balance snapshot of one control tick.
///
/// `com_x` and `com_v` are relative to the stance pivot; `cop_x`,
/// `capture_x` and the support interval are world coordinates.
#[derive(Debug, Clone, Copy)]
pub struct BalanceState {
    pub pivot_x: f64,
    pub com_x: f64,
    pub com_v: f64,
    pub cop_x: Option<f64>,
    pub capture_x: f64,
    pub support: (f64, f64),
    pub margin: f64,
}

/// LIPM acceleration xddot = (g / z_c) x.
pub fn lipm_accel(x: f64, params: &LipmParams) -> f64 {
    params.gravity / params.z_c * x
}

/// Closed-form LIPM solution
/// x(t) = x0 cosh(t/Tc) + v0 Tc sinh(t/Tc) and its derivative.
pub fn lipm_closed_form(x0: f64, v0: f64, t: f64, params: &LipmParams) -> (f64, f64) {
    let tc = params.time_constant();
    let s = t / tc;
    let (sh, ch) = (s.sinh(), s.cosh());
    (x0 * ch + v0 * tc * sh, x0 / tc * sh + v0 * ch)
}

/// Orbital energy E = v^2/2 - (g / 2 z_c) x^2, conserved along LIPM
/// trajectories. Zero means asymptotic convergence to rest over the pivot.
pub fn orbital_energy(x: f64, v: f64, params: &LipmParams) -> f64 {
    0.5 * v * v - params.gravity / (2.0 * params.z_c) * x * x
}

/// Capture point x + v sqrt(z_c / g): the spot to step to for a stop.
pub fn capture_point(x: f64, v: f64, params: &LipmParams) -> f64 {
    x + v * params.time_constant()
}

/// Normal-force weighted mean of the contact x positions.
pub fn cop_from_contact(forces: &[ContactForce]) -> Result<f64> {
    let total: f64 = forces.iter().map(|f| f.force.y).sum();
    if total <= 0.0 {
        return Err(Error::NoContact {
            context: "centre of pressure needs positive normal force",
        });
    }
    Ok(forces
        .iter()
        .map(|f| f.world_point.x * f.force.y)
        .sum::<f64>()
        / total)
}

/// Sagittal support interval spanned by the feet in contact (heel to toe of
/// every contacting foot; double support spans both feet).
pub fn support_polygon(state: &BipedState, model: &BipedModel) -> Result<(f64, f64)> {
    let frames = forward_kinematics(model, state);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for side in Side::BOTH {
        let foot = frames.frame(crate::model::LinkId::foot(side));
        let points = model.foot_points();
        let in_contact = points.iter().any(|p| foot.apply(*p).y <= 0.0);
        if in_contact {
            for p in points {
                let x = foot.apply(p).x;
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
    }
    if lo.is_finite() && hi.is_finite() {
        Ok((lo, hi))
    } else {
        Err(Error::NoContact {
            context: "support polygon undefined while airborne",
        })
    }
}

/// Signed distance of the capture point inside the support interval:
/// positive inside, negative outside, zero on an edge.
pub fn stability_margin(capture_x: f64, support: (f64, f64)) -> f64 {
    (capture_x - support.0).min(support.1 - capture_x)
}
