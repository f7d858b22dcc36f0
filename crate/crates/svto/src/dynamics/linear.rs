//! Linear time-invariant system, used by the LQ benchmark problems.

use super::{check_input, Control, DynamicsModel, Linearization, State};
use nalgebra::{DMatrix, DVector};
use std::ops::Range;

/// `x_{t+1} = A x_t + B u_t`. The Jacobians are exact, which makes this the
/// reference system for checking DDP against a discrete Riccati recursion.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        assert_eq!(a.nrows(), b.nrows());
        let n_u = b.ncols();
        Self {
            a,
            b,
            lower: DVector::from_element(n_u, -1e12),
            upper: DVector::from_element(n_u, 1e12),
        }
    }
}

impl DynamicsModel for LinearSystem {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn dt(&self) -> f64 {
        1.0
    }

    fn control_bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lower, &self.upper)
    }

    fn step(&self, x: &State, u: &Control) -> State {
        check_input(self, x, u);
        &self.a * x + &self.b * u
    }

    fn linearize(&self, x: &State, u: &Control) -> Linearization {
        check_input(self, x, u);
        Linearization {
            f_x: self.a.clone(),
            f_u: self.b.clone(),
        }
    }

    fn position_range(&self) -> Range<usize> {
        0..self.state_dim().min(2)
    }

    fn name(&self) -> &'static str {
        "linear"
    }
}
