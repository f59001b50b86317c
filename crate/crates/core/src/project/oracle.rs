//! Dense reference solver for small projections, used to cross-check the
//! specialized projections.

use nalgebra::{DMatrix, DVector};

use crate::structures::{ConstraintSystem, RowKind};
use crate::{Error, Result};

/// Largest dimension the oracle accepts.
pub const MAX_ORACLE_DIM: usize = 50;

/// Certified bound on the KKT residual of an oracle solution.
pub const KKT_TOL: f64 = 1e-9;

const MAX_ITERS: usize = 500;

struct Problem {
    dim: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
    v: DVector<f64>,
    boxed: Vec<bool>,
}

impl Problem {
    fn unclamped(&self, lambda: &DVector<f64>) -> DVector<f64> {
        &self.v - self.a.transpose() * lambda
    }

    fn primal(&self, lambda: &DVector<f64>) -> DVector<f64> {
        let raw = self.unclamped(lambda);
        DVector::from_iterator(
            self.dim,
            raw.iter()
                .zip(&self.boxed)
                .map(|(&x, &boxed)| if boxed { x.clamp(0.0, 1.0) } else { x }),
        )
    }

    /// Concave dual `min_{x ∈ box} ½‖x − v‖² + λᵀ(Ax − b)`.
    fn dual(&self, lambda: &DVector<f64>) -> f64 {
        let x = self.primal(lambda);
        0.5 * (&x - &self.v).norm_squared() + lambda.dot(&(&self.a * &x - &self.b))
    }

    fn free(&self, lambda: &DVector<f64>) -> Vec<bool> {
        self.unclamped(lambda)
            .iter()
            .zip(&self.boxed)
            .map(|(&x, &boxed)| !boxed || (x > 0.0 && x < 1.0))
            .collect()
    }

    fn masked(&self, free: &[bool]) -> DMatrix<f64> {
        let mut masked = self.a.clone();
        for (i, &f) in free.iter().enumerate() {
            if !f {
                masked.column_mut(i).fill(0.0);
            }
        }
        masked
    }

    /// Solves the equality-constrained problem with the bound status of
    /// every coordinate fixed as in `x`. When the multipliers are not
    /// unique, the ones closest to `lambda` are returned: on a flat part of
    /// the dual the current iterate may be optimal while the minimum-norm
    /// choice is not.
    fn polish(
        &self,
        x: &DVector<f64>,
        lambda: &DVector<f64>,
        free: &[bool],
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let fixed = DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|i| if free[i] { 0.0 } else { x[i] }),
        );
        let v_free = DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|i| if free[i] { self.v[i] } else { 0.0 }),
        );
        let masked = self.masked(free);
        let rhs = &masked * &v_free - (&self.b - &self.a * &fixed);
        let gram = &masked * masked.transpose();
        let lambda = if self.a.nrows() == 0 {
            DVector::zeros(0)
        } else {
            let residual = &rhs - &gram * lambda;
            lambda + gram.svd(true, true).solve(&residual, 1e-12).ok()?
        };
        let x_free = v_free - masked.transpose() * &lambda;
        Some((x_free + fixed, lambda))
    }

    fn kkt_residual(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
        let mut worst = if self.a.nrows() == 0 {
            0.0
        } else {
            (&self.a * x - &self.b).amax()
        };
        let grad = x - &self.v + self.a.transpose() * lambda;
        for i in 0..self.dim {
            let g = grad[i];
            let r = if !self.boxed[i] {
                g.abs()
            } else if x[i] < 0.0 || x[i] > 1.0 {
                (-x[i]).max(x[i] - 1.0)
            } else if x[i] == 0.0 {
                // lower bound active: its multiplier g must be nonnegative
                (-g).max(0.0)
            } else if x[i] == 1.0 {
                g.max(0.0)
            } else {
                g.abs()
            };
            worst = worst.max(r);
        }
        worst
    }
}

/// Exact Euclidean projection of `v` onto the polytope described by `cs`.
///
/// Runs a regularized semismooth Newton method on the dual and, after every
/// step, solves the equality-constrained problem on the current active set
/// exactly. A candidate is returned only once its KKT residual is at most
/// [`KKT_TOL`]; otherwise the call reports nonconvergence. Supports equality
/// rows with the optional unit box.
pub fn generic_qp_oracle(v: &[f64], cs: &ConstraintSystem) -> Result<Vec<f64>> {
    let dim = cs.dim + cs.auxiliary_count;
    crate::error::check_len(dim, v.len())?;
    if dim > MAX_ORACLE_DIM {
        return Err(Error::TooLarge {
            n: dim,
            limit: MAX_ORACLE_DIM,
        });
    }
    if cs.rows.iter().any(|r| r.kind == RowKind::Le) {
        return Err(Error::Unsupported(
            "the oracle handles equality rows only".into(),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("cannot project non-finite values"));
    }
    let rows = cs.rows.len();
    let mut a = DMatrix::zeros(rows, dim);
    for (r, row) in cs.rows.iter().enumerate() {
        for &(k, coeff) in &row.coeffs {
            a[(r, k)] += coeff;
        }
    }
    let problem = Problem {
        dim,
        a,
        b: DVector::from_iterator(rows, cs.rows.iter().map(|r| r.rhs)),
        v: DVector::from_column_slice(v),
        boxed: (0..dim).map(|i| cs.unit_box && i < cs.dim).collect(),
    };

    let mut lambda = DVector::zeros(rows);
    let mut best = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let x = problem.primal(&lambda);
        let free = problem.free(&lambda);
        if let Some((candidate, multipliers)) = problem.polish(&x, &lambda, &free) {
            let residual = problem.kkt_residual(&candidate, &multipliers);
            best = best.min(residual);
            if residual <= KKT_TOL {
                return Ok(candidate.iter().copied().collect());
            }
        }
        if rows == 0 {
            break;
        }

        let grad = &problem.a * &x - &problem.b;
        let masked = problem.masked(&free);
        // regularizing with the gradient norm keeps steps bounded when a
        // row has no free coordinates
        let damping = grad.norm().min(1.0) + 1e-14;
        let hessian = &masked * masked.transpose() + DMatrix::identity(rows, rows) * damping;
        let direction = match hessian.cholesky() {
            Some(c) => c.solve(&grad),
            None => grad.clone(),
        };
        let slope = grad.dot(&direction);
        let start = problem.dual(&lambda);
        let mut step = 1.0;
        loop {
            let trial = &lambda + &direction * step;
            if problem.dual(&trial) >= start + 1e-4 * step * slope || step < 1e-12 {
                lambda = trial;
                break;
            }
            step *= 0.5;
        }
    }
    Err(Error::NoConvergence(format!(
        "projection oracle stalled with KKT residual {best:.3e}"
    )))
}
