//! Damped Newton iteration with a finite-difference Jacobian.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Maximum number of step halvings per iteration.
    pub max_halvings: usize,
    /// Converged when the residual norm drops below this.
    pub tol: f64,
    /// Accepted (with a final polish) when the residual is below this.
    pub accept_tol: f64,
    pub fd_rel_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            max_halvings: 20,
            tol: 1e-14,
            accept_tol: 1e-10,
            fd_rel_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Forward-difference Jacobian of `f` at `x`; `fx = f(x)`.
pub fn fd_jacobian<F>(f: &F, x: &[f64], fx: &[f64], rel: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let m = fx.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = rel * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fx[i]) / h;
        }
    }
    Ok(jac)
}

/// Solve `f(x) = 0` (square system) from `x0`.
///
/// A full Newton step is halved up to `max_halvings` times while it fails to
/// reduce the residual norm. Failure to reach `accept_tol` within `max_iter`
/// iterations returns [`Error::ImplicitSolve`] carrying the last iterate.
pub fn solve<F>(f: F, x0: &[f64], opts: &NewtonOptions) -> Result<NewtonResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    let mut r = norm(&fx);
    let fail = |msg: String, x: &[f64]| Error::ImplicitSolve {
        msg,
        last: x.to_vec(),
    };
    for it in 0..opts.max_iter {
        if r <= opts.tol {
            return Ok(NewtonResult {
                x,
                residual: r,
                iterations: it,
            });
        }
        let jac = fd_jacobian(&f, &x, &fx, opts.fd_rel_step)?;
        let rhs = DVector::from_vec(fx.iter().map(|v| -v).collect());
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                let inv_cond = crate::linalg::inverse_condition(&jac);
                return Err(Error::Singular {
                    msg: format!("Newton Jacobian at {x:?}"),
                    inv_cond,
                });
            }
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if let Ok(ft) = f(&trial) {
                let rt = norm(&ft);
                if rt.is_finite() && rt < r {
                    x = trial;
                    fx = ft;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // No decrease possible: either converged to roundoff or stuck.
            if r <= opts.accept_tol {
                return Ok(NewtonResult {
                    x,
                    residual: r,
                    iterations: it,
                });
            }
            return Err(fail(format!("no descent, residual {r:e}"), &x));
        }
    }
    if r <= opts.accept_tol {
        Ok(NewtonResult {
            x,
            residual: r,
            iterations: opts.max_iter,
        })
    } else {
        Err(fail(
            format!("no convergence in {} iterations, residual {r:e}", opts.max_iter),
            &x,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_system_one_step() {
        let f = |x: &[f64]| Ok(vec![2.0 * x[0] + x[1] - 3.0, x[0] - x[1]]);
        let r = solve(f, &[10.0, -4.0], &NewtonOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-10 && (r.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn damped_arctan() {
        // plain Newton diverges on atan from x0 = 3; damping rescues it
        let f = |x: &[f64]| Ok(vec![x[0].atan()]);
        let r = solve(f, &[3.0], &NewtonOptions::default()).unwrap();
        assert!(r.x[0].abs() < 1e-12);
    }

    #[test]
    fn no_root_reports_last_iterate() {
        let f = |x: &[f64]| Ok(vec![x[0] * x[0] + 1.0]);
        match solve(f, &[0.5], &NewtonOptions::default()) {
            Err(Error::ImplicitSolve { last, .. }) => assert_eq!(last.len(), 1),
            Err(Error::Singular { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
