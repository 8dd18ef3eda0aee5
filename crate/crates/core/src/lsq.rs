//! Damped Gauss–Newton for small dense least-squares problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, IterationRecord, Result};

pub(crate) const MAX_ITERATIONS: usize = 100;
const STEP_REL_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 60;
const RANK_TOL: f64 = 1e-12;
const POLISH_STEPS: usize = 6;
const HESSIAN_REL_STEP: f64 = 1e-6;
const POLISH_MAX_STEP: f64 = 1e-6;

pub(crate) struct Solution {
    pub params: Vec<f64>,
    pub residuals: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
}

pub(crate) trait Problem {
    fn residuals(&self, x: &[f64]) -> DVector<f64>;
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;
    fn feasible(&self, x: &[f64]) -> bool;
}

fn cost(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

/// Minimizes `|r(x)|^2` from `x0`.
///
/// `scales` are typical magnitudes of each parameter; they set the column
/// scaling of the Jacobian and the absolute floor of the step test.
pub(crate) fn solve(problem: &impl Problem, x0: Vec<f64>, scales: &[f64]) -> Result<Solution> {
    let mut x = x0;
    let mut r = problem.residuals(&x);
    let mut c = cost(&r);
    if !c.is_finite() {
        return Err(Error::Estimation("initial guess gives non-finite residuals".into()));
    }
    let mut trace = vec![IterationRecord { iteration: 0, cost: c, params: x.clone() }];

    for iteration in 1..=MAX_ITERATIONS {
        let jac = problem.jacobian(&x);
        if c == 0.0 {
            return Ok(Solution { params: x, residuals: r, jacobian: jac, iterations: iteration - 1 });
        }
        let step = gauss_newton_step(&jac, &r, scales)?;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, di)| xi + alpha * di).collect();
            if problem.feasible(&trial) {
                let rt = problem.residuals(&trial);
                let ct = cost(&rt);
                if ct <= c {
                    accepted = Some((trial, rt, ct));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, rt, ct)) = accepted else {
            // No decrease along the Gauss–Newton direction: the cost is flat to
            // rounding, so only the step sizes can refine further.
            let (x, r) = polish(problem, x, r, scales);
            let jacobian = problem.jacobian(&x);
            return Ok(Solution { params: x, residuals: r, jacobian, iterations: iteration });
        };

        let small = step.iter().zip(&x).zip(scales).all(|((d, xi), s)| {
            (alpha * d).abs() <= STEP_REL_TOL * xi.abs().max(s.abs())
        });
        x = trial;
        r = rt;
        c = ct;
        trace.push(IterationRecord { iteration, cost: c, params: x.clone() });
        if small {
            let (x, r) = polish(problem, x, r, scales);
            let jacobian = problem.jacobian(&x);
            return Ok(Solution { params: x, residuals: r, jacobian, iterations: iteration });
        }
    }
    Err(Error::NonConvergence { trace })
}

fn scaled_norm(step: &[f64], scales: &[f64]) -> f64 {
    step.iter().zip(scales).map(|(d, s)| (d / s).powi(2)).sum::<f64>().sqrt()
}

fn gradient(problem: &impl Problem, x: &[f64]) -> DVector<f64> {
    problem.jacobian(x).transpose() * problem.residuals(x)
}

/// Newton refinement on the stationarity condition `J^T r = 0`.
///
/// Near the optimum the cost is flat to rounding and cannot rank iterates,
/// while the gradient is still resolved. The Hessian is a central difference
/// of the gradient. Steps are taken while each is at most half the previous, starting
/// from a scaled size of `POLISH_MAX_STEP`.
fn polish(
    problem: &impl Problem,
    mut x: Vec<f64>,
    mut r: DVector<f64>,
    scales: &[f64],
) -> (Vec<f64>, DVector<f64>) {
    let n = x.len();
    let mut last = 2.0 * POLISH_MAX_STEP;
    for _ in 0..POLISH_STEPS {
        let mut hess = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = HESSIAN_REL_STEP * x[j].abs().max(scales[j].abs());
            let mut up = x.clone();
            let mut down = x.clone();
            up[j] += h;
            down[j] -= h;
            if !(problem.feasible(&up) && problem.feasible(&down)) {
                return (x, r);
            }
            let column = (gradient(problem, &up) - gradient(problem, &down)) / (2.0 * h);
            hess.set_column(j, &column);
        }
        let hess = 0.5 * (&hess + hess.transpose());
        let Some(chol) = hess.cholesky() else { break };
        let step = -chol.solve(&gradient(problem, &x));
        let step = step.as_slice();
        let size = scaled_norm(step, scales);
        if size.is_nan() || size > 0.5 * last || size == 0.0 {
            break;
        }
        let trial: Vec<f64> = x.iter().zip(step).map(|(xi, di)| xi + di).collect();
        if !problem.feasible(&trial) {
            break;
        }
        r = problem.residuals(&trial);
        x = trial;
        last = size;
    }
    (x, r)
}

fn gauss_newton_step(jac: &DMatrix<f64>, r: &DVector<f64>, scales: &[f64]) -> Result<Vec<f64>> {
    let mut scaled = jac.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let svd = scaled.svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if max_sv.is_nan() || max_sv <= 0.0 || min_sv <= RANK_TOL * max_sv || svd.singular_values.len() < scales.len() {
        return Err(Error::Indeterminate(format!(
            "normal equations are singular (singular values {:?})",
            svd.singular_values.as_slice()
        )));
    }
    let d = svd
        .solve(&(-r), 0.0)
        .map_err(|e| Error::Indeterminate(format!("least-squares solve failed: {e}")))?;
    Ok(d.iter().zip(scales).map(|(di, s)| di * s).collect())
}

/// `(J^T J)^-1` via the SVD of the column-equilibrated `J`.
pub(crate) fn inverse_normal_matrix(jac: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let norms: Vec<f64> = jac.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|n| n.is_nan() || *n <= 0.0) {
        return None;
    }
    let mut scaled = jac.clone();
    for (j, n) in norms.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*n);
    }
    let svd = scaled.svd(false, true);
    let v_t = svd.v_t?;
    let max_sv = svd.singular_values.max();
    if svd.singular_values.len() < jac.ncols() || svd.singular_values.min() <= RANK_TOL * max_sv {
        return None;
    }
    let inv_sq = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s)));
    let inner = v_t.transpose() * inv_sq * v_t;
    Some(DMatrix::from_fn(inner.nrows(), inner.ncols(), |i, j| inner[(i, j)] / (norms[i] * norms[j])))
}
