use nalgebra::{DMatrix, DVector};

use crate::linalg::sym_eigen;

/// A smooth objective with an open domain; `eval` returns `None` outside it.
pub(crate) trait Objective {
    fn eval(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)>;
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        self.eval(x).map(|(v, _, _)| v)
    }
    /// `f(x + step dx) - f(x)`, `None` outside the domain. Override when
    /// the value is large compared with the changes the line search must
    /// resolve.
    fn delta(&self, x: &DVector<f64>, dx: &DVector<f64>, step: f64) -> Option<f64> {
        Some(self.value(&(x + dx * step))? - self.value(x)?)
    }
    /// Invertible `T` such that the step is computed for `y` with `x = T y`.
    fn precondition(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
    /// Decrement tolerance accepted once `SLOW_START` iterations have passed.
    /// Barriers near a singular point stall on a round-off floor well above
    /// the requested tolerance.
    fn relaxed_tol(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Newton direction with the Hessian's spectrum floored at
/// `max(|lambda|, 1e-12 (1 + max |lambda|))`, which keeps the step a descent
/// direction on nonconvex objectives.
pub(crate) fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    if let Some(chol) = h.clone().cholesky() {
        return -chol.solve(g);
    }
    let (vals, vecs) = sym_eigen(h);
    let top = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let floor = 1e-12 * (1.0 + top);
    let coeffs = vecs.transpose() * g;
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(vals.iter()).map(|(c, l)| -c / l.abs().max(floor)),
    );
    vecs * scaled
}

const SLOW_START: usize = 20;
/// `relaxed_tol` of the barrier objectives.
pub(crate) const BARRIER_RELAXED_TOL: f64 = 1e-9;

/// Damped Newton with backtracking. Stops when the Newton decrement
/// `-g^T dx / 2` falls below `tol (1 + |f|)` or when `stop` says so.
pub(crate) fn minimize(
    f: &impl Objective,
    x0: DVector<f64>,
    tol: f64,
    max_iter: usize,
    stop: impl Fn(&DVector<f64>) -> bool,
) -> NewtonOutcome {
    let mut x = x0;
    let mut iterations = 0;
    let Some(mut current) = f.eval(&x) else {
        return NewtonOutcome { x, iterations, converged: false };
    };
    while iterations < max_iter {
        let (value, g, h) = current;
        if stop(&x) {
            return NewtonOutcome { x, iterations, converged: true };
        }
        let dx = match f.precondition(&x) {
            Some(t) => {
                let tt = t.transpose();
                let hy = &tt * &h * &t;
                &t * newton_direction(&(&tt * &g), &((&hy + hy.transpose()) * 0.5))
            }
            None => newton_direction(&g, &h),
        };
        let slope = g.dot(&dx);
        // decrement relative to the objective scale: barrier values grow with
        // tau and their round-off floor grows with them
        let scale = 1.0 + value.abs();
        // a healthy Newton run converges quadratically long before SLOW_START
        // iterations; past it the iterate is on the noise floor set by how
        // precisely `x` represents a near-singular point
        let tol_now = if iterations >= SLOW_START { tol.max(f.relaxed_tol()) } else { tol };
        if -slope / 2.0 <= tol_now * scale {
            return NewtonOutcome { x, iterations, converged: true };
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            if f.delta(&x, &dx, step).is_some_and(|dv| dv <= 1e-4 * step * slope) {
                let trial = &x + &dx * step;
                if let Some(e) = f.eval(&trial) {
                    accepted = Some((trial, e));
                    break;
                }
            }
            step *= 0.5;
        }
        iterations += 1;
        // no acceptable step: converged to working precision when the
        // decrement is already tiny
        let floor = -slope / 2.0 <= 1e-10 * scale;
        match accepted {
            Some((next, e)) => {
                x = next;
                current = e;
            }
            None => return NewtonOutcome { x, iterations, converged: floor },
        }
    }
    NewtonOutcome { x, iterations, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosen;
    impl Objective for Rosen {
        fn eval(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ]);
            let h = DMatrix::from_row_slice(2, 2, &[
                2.0 - 400.0 * b + 1200.0 * a * a,
                -400.0 * a,
                -400.0 * a,
                200.0,
            ]);
            Some((v, g, h))
        }
    }

    #[test]
    fn solves_nonconvex_test_function() {
        let out = minimize(&Rosen, DVector::from_vec(vec![-1.2, 1.0]), 1e-20, 500, |_| false);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
    }
}
