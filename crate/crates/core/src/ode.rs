//! Classic fourth-order Runge–Kutta.

use crate::error::{Error, Result};

/// One RK4 step of `y' = f(t, y)`.
pub fn rk4_step<F>(f: &F, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> { a.iter().zip(k).map(|(a, k)| a + s * k).collect() };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, &k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &axpy(y, &k2, 0.5 * h))?;
    let k4 = f(t + h, &axpy(y, &k3, h))?;
    let out: Vec<f64> = (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!("RK4 produced a non-finite state at t = {}", t + h)));
    }
    Ok(out)
}

/// Integrate from `t0` to `t1` in `steps` equal steps, returning every node
/// (`steps + 1` states, the first being `y0`). On failure the nodes computed
/// so far are returned together with the error.
pub fn rk4_path<F>(f: &F, t0: f64, t1: f64, y0: &[f64], steps: usize) -> (Vec<Vec<f64>>, Option<Error>)
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let steps = steps.max(1);
    let h = (t1 - t0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y0.to_vec());
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        match rk4_step(f, t, &out[s], h) {
            Ok(y) => out.push(y),
            Err(e) => return (out, Some(e)),
        }
    }
    (out, None)
}

/// Endpoint of [`rk4_path`].
pub fn rk4<F>(f: &F, t0: f64, t1: f64, y0: &[f64], steps: usize) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let (mut path, err) = rk4_path(f, t0, t1, y0, steps);
    match err {
        Some(e) => Err(e),
        None => Ok(path.pop().expect("non-empty path")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_fourth_order() {
        let f = |_t: f64, y: &[f64]| Ok(vec![y[0]]);
        let e1 = (rk4(&f, 0.0, 1.0, &[1.0], 10).unwrap()[0] - 1f64.exp()).abs();
        let e2 = (rk4(&f, 0.0, 1.0, &[1.0], 20).unwrap()[0] - 1f64.exp()).abs();
        let ratio = e1 / e2;
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn path_reports_partial_on_failure() {
        let f = |t: f64, y: &[f64]| {
            if t > 0.45 {
                Err(Error::Evaluation("stop".into()))
            } else {
                Ok(vec![y[0]])
            }
        };
        let (path, err) = rk4_path(&f, 0.0, 1.0, &[1.0], 10);
        assert!(err.is_some());
        assert!(path.len() > 1 && path.len() < 11);
    }
}
