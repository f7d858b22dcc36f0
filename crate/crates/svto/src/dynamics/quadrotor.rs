//! Rigid-body quadrotor with Euler-angle attitude.

use super::{check_input, Control, DynamicsModel, Linearization, State};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use std::ops::Range;

/// Quadrotor: state `(p, Θ, v, ω) ∈ R^12` with Euler angles Θ = (roll, pitch,
/// yaw) in ZYX convention and body rates ω; control = four rotor forces.
///
/// Rotor layout is a plus configuration: rotor 0 at +x, 1 at +y, 2 at −x,
/// 3 at −y, each at arm length `arm` from the center. Thrust acts along the
/// body z axis; yaw torque comes from alternating rotor drag.
#[derive(Debug, Clone)]
pub struct Quadrotor {
    dt: f64,
    mass: f64,
    arm: f64,
    gravity: f64,
    /// Diagonal body inertia (kg·m²).
    inertia: Vector3<f64>,
    /// Rotor drag-to-thrust coefficient for yaw torque.
    yaw_coeff: f64,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Quadrotor {
    pub fn new(dt: f64) -> Self {
        let mass = 1.0;
        let gravity = 9.81;
        // Upper force bound is twice the per-rotor hover force.
        let f_max = 2.0 * mass * gravity / 4.0 * 2.0;
        Self {
            dt,
            mass,
            arm: 0.2,
            gravity,
            inertia: Vector3::new(0.01, 0.01, 0.02),
            yaw_coeff: 0.05,
            lower: DVector::zeros(4),
            upper: DVector::from_element(4, f_max),
        }
    }

    pub fn hover_force_per_rotor(&self) -> f64 {
        self.mass * self.gravity / 4.0
    }

    /// Maps rotor forces to (total thrust, body torque).
    fn wrench(&self, u: &Control) -> (f64, Vector3<f64>) {
        let thrust = u[0] + u[1] + u[2] + u[3];
        let torque = Vector3::new(
            self.arm * (u[1] - u[3]),
            self.arm * (u[2] - u[0]),
            self.yaw_coeff * (u[0] - u[1] + u[2] - u[3]),
        );
        (thrust, torque)
    }

    /// Body z axis in world frame: R(φ,θ,ψ)·e₃ for ZYX Euler angles.
    fn thrust_axis(phi: f64, theta: f64, psi: f64) -> Vector3<f64> {
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let (sy, cy) = psi.sin_cos();
        Vector3::new(cy * st * cp + sy * sp, sy * st * cp - cy * sp, ct * cp)
    }

    /// Euler-angle rate matrix: Θ̇ = W(φ,θ)·ω.
    fn rate_matrix(phi: f64, theta: f64) -> Matrix3<f64> {
        let (sp, cp) = phi.sin_cos();
        let tt = theta.tan();
        let ct = theta.cos();
        Matrix3::new(
            1.0,
            sp * tt,
            cp * tt,
            0.0,
            cp,
            -sp,
            0.0,
            sp / ct,
            cp / ct,
        )
    }

    fn deriv(&self, x: &State, u: &Control) -> DVector<f64> {
        let (phi, theta, psi) = (x[3], x[4], x[5]);
        let v = Vector3::new(x[6], x[7], x[8]);
        let omega = Vector3::new(x[9], x[10], x[11]);
        let (thrust, torque) = self.wrench(u);

        let dp = v;
        let dth = Self::rate_matrix(phi, theta) * omega;
        let dv = Self::thrust_axis(phi, theta, psi) * (thrust / self.mass)
            - Vector3::new(0.0, 0.0, self.gravity);
        let j = self.inertia;
        let j_omega = Vector3::new(j.x * omega.x, j.y * omega.y, j.z * omega.z);
        let gyro = omega.cross(&j_omega);
        let dw = Vector3::new(
            (torque.x - gyro.x) / j.x,
            (torque.y - gyro.y) / j.y,
            (torque.z - gyro.z) / j.z,
        );

        let mut out = DVector::zeros(12);
        out.fixed_rows_mut::<3>(0).copy_from(&dp);
        out.fixed_rows_mut::<3>(3).copy_from(&dth);
        out.fixed_rows_mut::<3>(6).copy_from(&dv);
        out.fixed_rows_mut::<3>(9).copy_from(&dw);
        out
    }
}

impl Default for Quadrotor {
    fn default() -> Self {
        Self::new(0.01)
    }
}

fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

impl DynamicsModel for Quadrotor {
    fn state_dim(&self) -> usize {
        12
    }

    fn control_dim(&self) -> usize {
        4
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn control_bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lower, &self.upper)
    }

    fn step(&self, x: &State, u: &Control) -> State {
        check_input(self, x, u);
        x + self.deriv(x, u) * self.dt
    }

    fn linearize(&self, x: &State, u: &Control) -> Linearization {
        check_input(self, x, u);
        let (phi, theta, psi) = (x[3], x[4], x[5]);
        let omega = Vector3::new(x[9], x[10], x[11]);
        let (thrust, _) = self.wrench(u);
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let (sy, cy) = psi.sin_cos();
        let tt = st / ct;
        let sec2 = 1.0 / (ct * ct);

        // Continuous-time Jacobian, filled blockwise.
        let mut jx = DMatrix::zeros(12, 12);
        let mut ju = DMatrix::zeros(12, 4);

        // dp/dv
        for i in 0..3 {
            jx[(i, 6 + i)] = 1.0;
        }

        // dΘ = W(φ,θ)ω: derivatives w.r.t. φ, θ, and ω.
        let w = Self::rate_matrix(phi, theta);
        let w_phi = Matrix3::new(
            0.0,
            cp * tt,
            -sp * tt,
            0.0,
            -sp,
            -cp,
            0.0,
            cp / ct,
            -sp / ct,
        );
        let w_theta = Matrix3::new(
            0.0,
            sp * sec2,
            cp * sec2,
            0.0,
            0.0,
            0.0,
            0.0,
            sp * tt / ct,
            cp * tt / ct,
        );
        let dth_dphi = w_phi * omega;
        let dth_dtheta = w_theta * omega;
        for i in 0..3 {
            jx[(3 + i, 3)] = dth_dphi[i];
            jx[(3 + i, 4)] = dth_dtheta[i];
            for k in 0..3 {
                jx[(3 + i, 9 + k)] = w[(i, k)];
            }
        }

        // dv = (F/m)·r₃(φ,θ,ψ) − g e₃
        let r3_phi = Vector3::new(-cy * st * sp + sy * cp, -sy * st * sp - cy * cp, -ct * sp);
        let r3_theta = Vector3::new(cy * ct * cp, sy * ct * cp, -st * cp);
        let r3_psi = Vector3::new(-sy * st * cp + cy * sp, cy * st * cp + sy * sp, 0.0);
        let scale = thrust / self.mass;
        for i in 0..3 {
            jx[(6 + i, 3)] = scale * r3_phi[i];
            jx[(6 + i, 4)] = scale * r3_theta[i];
            jx[(6 + i, 5)] = scale * r3_psi[i];
        }
        let r3 = Self::thrust_axis(phi, theta, psi);
        for col in 0..4 {
            for i in 0..3 {
                ju[(6 + i, col)] = r3[i] / self.mass;
            }
        }

        // dω = J⁻¹(τ − ω×Jω): d/dω = J⁻¹(skew(Jω) − skew(ω)J), d/du = J⁻¹ Mτ.
        let j = self.inertia;
        let jmat = Matrix3::from_diagonal(&j);
        let j_omega = Vector3::new(j.x * omega.x, j.y * omega.y, j.z * omega.z);
        let dgyro = skew(&j_omega) - skew(&omega) * jmat;
        for i in 0..3 {
            for k in 0..3 {
                jx[(9 + i, 9 + k)] = dgyro[(i, k)] / j[i];
            }
        }
        let l = self.arm;
        let c = self.yaw_coeff;
        let torque_mix = [
            [0.0, l, 0.0, -l],
            [-l, 0.0, l, 0.0],
            [c, -c, c, -c],
        ];
        for i in 0..3 {
            for col in 0..4 {
                ju[(9 + i, col)] = torque_mix[i][col] / j[i];
            }
        }

        Linearization {
            f_x: DMatrix::identity(12, 12) + jx * self.dt,
            f_u: ju * self.dt,
        }
    }

    fn position_range(&self) -> Range<usize> {
        0..3
    }

    fn neutral_control(&self) -> Control {
        DVector::from_element(4, self.hover_force_per_rotor())
    }

    fn name(&self) -> &'static str {
        "quadrotor"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hover_is_equilibrium() {
        let quad = Quadrotor::default();
        let x = DVector::zeros(12);
        let u = DVector::from_element(4, quad.hover_force_per_rotor());
        let next = quad.step(&x, &u);
        // Velocities and angular rates stay zero at hover thrust.
        assert!(next.amax() < 1e-14, "hover drift: {next}");
    }

    #[test]
    fn gravity_pulls_down_without_thrust() {
        let quad = Quadrotor::default();
        let x = DVector::zeros(12);
        let u = DVector::zeros(4);
        let next = quad.step(&x, &u);
        assert!(next[8] < 0.0); // vertical velocity decreases
    }
}
