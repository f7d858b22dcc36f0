//! Central finite differences, used to cross-check analytic derivatives.

use crate::dynamics::{Control, DynamicsModel, State};
use nalgebra::{DMatrix, DVector};

/// Central-difference gradient of a scalar function.
pub fn gradient_central<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    y: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let mut grad = DVector::zeros(y.len());
    let mut yp = y.clone();
    for i in 0..y.len() {
        yp[i] = y[i] + h;
        let fp = f(&yp);
        yp[i] = y[i] - h;
        let fm = f(&yp);
        yp[i] = y[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Central-difference Jacobian of a vector function.
pub fn jacobian_central<F: Fn(&DVector<f64>) -> DVector<f64>>(
    f: F,
    y: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let rows = f(y).len();
    let mut jac = DMatrix::zeros(rows, y.len());
    let mut yp = y.clone();
    for i in 0..y.len() {
        yp[i] = y[i] + h;
        let fp = f(&yp);
        yp[i] = y[i] - h;
        let fm = f(&yp);
        yp[i] = y[i];
        jac.set_column(i, &((fp - fm) / (2.0 * h)));
    }
    jac
}

/// Finite-difference Jacobians `(f_x, f_u)` of a model's discrete step.
pub fn step_jacobians(
    model: &dyn DynamicsModel,
    x: &State,
    u: &Control,
    h: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let f_x = jacobian_central(|xp| model.step(xp, u), x, h);
    let f_u = jacobian_central(|up| model.step(x, up), u, h);
    (f_x, f_u)
}
