//! Planar car with unicycle kinematics.

use super::{check_input, Control, DynamicsModel, Linearization, State};
use nalgebra::{DMatrix, DVector};
use std::ops::Range;

/// 2D car: state `(x, y, θ)`, control `(v, ω)`.
///
/// Kinematics `ẋ = v cosθ, ẏ = v sinθ, θ̇ = ω`, integrated with explicit
/// Euler. Control bounds are velocity/turn-rate limits handled by barriers.
#[derive(Debug, Clone)]
pub struct Car2d {
    dt: f64,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Car2d {
    pub fn new(dt: f64, v_limit: f64, omega_limit: f64) -> Self {
        assert!(dt > 0.0 && v_limit > 0.0 && omega_limit > 0.0);
        Self {
            dt,
            lower: DVector::from_vec(vec![-v_limit, -omega_limit]),
            upper: DVector::from_vec(vec![v_limit, omega_limit]),
        }
    }
}

impl Default for Car2d {
    fn default() -> Self {
        Self::new(0.02, 3.0, 6.0)
    }
}

impl DynamicsModel for Car2d {
    fn state_dim(&self) -> usize {
        3
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn control_bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lower, &self.upper)
    }

    fn step(&self, x: &State, u: &Control) -> State {
        check_input(self, x, u);
        let (theta, v, omega) = (x[2], u[0], u[1]);
        DVector::from_vec(vec![
            x[0] + self.dt * v * theta.cos(),
            x[1] + self.dt * v * theta.sin(),
            x[2] + self.dt * omega,
        ])
    }

    fn linearize(&self, x: &State, u: &Control) -> Linearization {
        check_input(self, x, u);
        let (theta, v) = (x[2], u[0]);
        let mut f_x = DMatrix::identity(3, 3);
        f_x[(0, 2)] = -self.dt * v * theta.sin();
        f_x[(1, 2)] = self.dt * v * theta.cos();
        let mut f_u = DMatrix::zeros(3, 2);
        f_u[(0, 0)] = self.dt * theta.cos();
        f_u[(1, 0)] = self.dt * theta.sin();
        f_u[(2, 1)] = self.dt;
        Linearization { f_x, f_u }
    }

    fn position_range(&self) -> Range<usize> {
        0..2
    }

    fn name(&self) -> &'static str {
        "car2d"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_velocity_is_fixed_point() {
        let car = Car2d::default();
        let x = DVector::zeros(3);
        let u = DVector::zeros(2);
        assert_eq!(car.step(&x, &u), x);
    }

    #[test]
    fn unit_velocity_advances_along_heading() {
        let car = Car2d::default();
        let x = DVector::zeros(3);
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let next = car.step(&x, &u);
        assert_relative_eq!(next[0], 0.02, epsilon = 1e-15);
        assert_eq!(next[1], 0.0);
        assert_eq!(next[2], 0.0);
    }

    #[test]
    fn position_sensitivity_to_speed_is_dt() {
        // d(next x)/dv at θ = 0 is dt·cosθ = dt.
        let car = Car2d::default();
        let lin = car.linearize(&DVector::zeros(3), &DVector::zeros(2));
        assert_relative_eq!(lin.f_u[(0, 0)], 0.02, epsilon = 1e-15);
    }
}
