//! Kinematic 7-joint arm with double-integrator joints.

use super::{check_input, Control, DynamicsModel, Linearization, State};
use nalgebra::{DMatrix, DVector, Matrix3, Unit, Vector3};
use std::ops::Range;

const N_JOINTS: usize = 7;

/// 7-DoF arm: state = 7 joint angles, 7 joint velocities, and the 3D
/// end-effector position appended (recomputed by forward kinematics each
/// step), so `x ∈ R^17`; controls are joint accelerations, `u ∈ R^7`.
///
/// The chain alternates z/y joint axes with each link extending along the
/// local x axis. Keeping the end-effector position in the state lets
/// workspace obstacle constraints act on state entries directly.
#[derive(Debug, Clone)]
pub struct SevenDofArm {
    dt: f64,
    link_lengths: [f64; N_JOINTS],
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl SevenDofArm {
    pub fn new(dt: f64) -> Self {
        assert!(dt > 0.0);
        Self {
            dt,
            link_lengths: [0.3; N_JOINTS],
            lower: DVector::from_element(N_JOINTS, -10.0),
            upper: DVector::from_element(N_JOINTS, 10.0),
        }
    }

    fn joint_axis(i: usize) -> Vector3<f64> {
        if i % 2 == 0 {
            Vector3::z()
        } else {
            Vector3::y()
        }
    }

    /// Forward kinematics: end-effector position plus the joint origins and
    /// world-frame joint axes needed for the geometric Jacobian.
    fn chain(&self, q: &[f64]) -> (Vector3<f64>, [Vector3<f64>; N_JOINTS], [Vector3<f64>; N_JOINTS]) {
        let mut rot = Matrix3::identity();
        let mut pos = Vector3::zeros();
        let mut origins = [Vector3::zeros(); N_JOINTS];
        let mut axes = [Vector3::zeros(); N_JOINTS];
        for i in 0..N_JOINTS {
            let axis = Self::joint_axis(i);
            origins[i] = pos;
            axes[i] = rot * axis;
            rot *= nalgebra::Rotation3::from_axis_angle(&Unit::new_unchecked(axis), q[i])
                .into_inner();
            pos += rot * Vector3::new(self.link_lengths[i], 0.0, 0.0);
        }
        (pos, origins, axes)
    }

    /// End-effector position for joint angles `q`.
    pub fn end_effector(&self, q: &[f64]) -> Vector3<f64> {
        self.chain(q).0
    }

    /// Geometric Jacobian ∂p_ee/∂q: column i is aᵢ × (p_ee − oᵢ).
    fn ee_jacobian(&self, q: &[f64]) -> DMatrix<f64> {
        let (p_ee, origins, axes) = self.chain(q);
        let mut jac = DMatrix::zeros(3, N_JOINTS);
        for i in 0..N_JOINTS {
            let col = axes[i].cross(&(p_ee - origins[i]));
            for r in 0..3 {
                jac[(r, i)] = col[r];
            }
        }
        jac
    }

    /// Builds a consistent state (end-effector entries filled in from FK).
    pub fn state_from(&self, q: &[f64; N_JOINTS], qd: &[f64; N_JOINTS]) -> State {
        let mut x = DVector::zeros(17);
        for i in 0..N_JOINTS {
            x[i] = q[i];
            x[N_JOINTS + i] = qd[i];
        }
        let p = self.end_effector(q);
        for r in 0..3 {
            x[2 * N_JOINTS + r] = p[r];
        }
        x
    }
}

impl Default for SevenDofArm {
    fn default() -> Self {
        Self::new(0.02)
    }
}

impl DynamicsModel for SevenDofArm {
    fn state_dim(&self) -> usize {
        17
    }

    fn control_dim(&self) -> usize {
        N_JOINTS
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn control_bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lower, &self.upper)
    }

    fn step(&self, x: &State, u: &Control) -> State {
        check_input(self, x, u);
        let mut next = DVector::zeros(17);
        let mut q_next = [0.0; N_JOINTS];
        for i in 0..N_JOINTS {
            q_next[i] = x[i] + self.dt * x[N_JOINTS + i];
            next[i] = q_next[i];
            next[N_JOINTS + i] = x[N_JOINTS + i] + self.dt * u[i];
        }
        let p = self.end_effector(&q_next);
        for r in 0..3 {
            next[2 * N_JOINTS + r] = p[r];
        }
        next
    }

    fn linearize(&self, x: &State, u: &Control) -> Linearization {
        check_input(self, x, u);
        let mut q_next = [0.0; N_JOINTS];
        for i in 0..N_JOINTS {
            q_next[i] = x[i] + self.dt * x[N_JOINTS + i];
        }
        let jac = self.ee_jacobian(&q_next);

        let mut f_x = DMatrix::zeros(17, 17);
        for i in 0..N_JOINTS {
            f_x[(i, i)] = 1.0;
            f_x[(i, N_JOINTS + i)] = self.dt;
            f_x[(N_JOINTS + i, N_JOINTS + i)] = 1.0;
        }
        // End-effector rows: p' = fk(q + dt·q̇) has no dependence on the old
        // p entries, so that block stays zero.
        for r in 0..3 {
            for i in 0..N_JOINTS {
                f_x[(2 * N_JOINTS + r, i)] = jac[(r, i)];
                f_x[(2 * N_JOINTS + r, N_JOINTS + i)] = self.dt * jac[(r, i)];
            }
        }

        let mut f_u = DMatrix::zeros(17, N_JOINTS);
        for i in 0..N_JOINTS {
            f_u[(N_JOINTS + i, i)] = self.dt;
        }
        Linearization { f_x, f_u }
    }

    fn position_range(&self) -> Range<usize> {
        14..17
    }

    fn name(&self) -> &'static str {
        "arm7"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn straight_arm_reaches_sum_of_links() {
        let arm = SevenDofArm::default();
        let p = arm.end_effector(&[0.0; 7]);
        assert_relative_eq!(p[0], 2.1, epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn state_from_is_consistent_with_step() {
        let arm = SevenDofArm::default();
        let x = arm.state_from(&[0.2, -0.1, 0.3, 0.4, -0.2, 0.1, 0.0], &[0.0; 7]);
        let next = arm.step(&x, &DVector::zeros(7));
        // Zero velocity and zero accel: state is a fixed point, including FK.
        assert_relative_eq!((next - &x).amax(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn base_yaw_rotates_end_effector_in_plane() {
        let arm = SevenDofArm::default();
        let q = [std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let p = arm.end_effector(&q);
        assert_relative_eq!(p[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p[1], 2.1, epsilon = 1e-12);
    }
}
