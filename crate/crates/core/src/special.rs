//! Jacobi elliptic functions by the arithmetic–geometric mean with
//! descending Landen transformations.

use crate::quad;

const AGM_TOL: f64 = 1e-15;
const AGM_MAX: usize = 40;

/// (sn, cn, dn)(u, k) for modulus k ∈ [0, 1].
pub fn jacobi(u: f64, k: f64) -> (f64, f64, f64) {
    assert!((0.0..=1.0).contains(&k), "modulus {k} outside [0, 1]");
    if k == 0.0 {
        return (u.sin(), u.cos(), 1.0);
    }
    if k == 1.0 {
        let s = 1.0 / u.cosh();
        return (u.tanh(), s, s);
    }
    let mut a = [0.0; AGM_MAX + 1];
    let mut c = [0.0; AGM_MAX + 1];
    a[0] = 1.0;
    let mut b = (1.0 - k * k).sqrt();
    c[0] = k;
    let mut n = 0;
    while n < AGM_MAX && (a[n] - b).abs() > AGM_TOL * a[n] {
        let an = a[n];
        a[n + 1] = 0.5 * (an + b);
        c[n + 1] = 0.5 * (an - b);
        b = (an * b).sqrt();
        n += 1;
    }
    let mut phi = (2f64).powi(n as i32) * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    let sn = phi.sin();
    let cn = phi.cos();
    let dn = (1.0 - k * k * sn * sn).sqrt();
    (sn, cn, dn)
}

pub fn jacobi_cn(u: f64, k: f64) -> f64 {
    jacobi(u, k).1
}

pub fn jacobi_sn(u: f64, k: f64) -> f64 {
    jacobi(u, k).0
}

pub fn jacobi_dn(u: f64, k: f64) -> f64 {
    jacobi(u, k).2
}

pub fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Independent oracle: invert F(φ, k) = u by bisection, with the incomplete
/// integral evaluated by adaptive quadrature; returns cos φ. Valid for
/// k ∈ [0, 1).
pub fn cn_by_quadrature(u: f64, k: f64) -> f64 {
    let f = |phi: f64| quad::simpson(|t: f64| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt(), 0.0, phi, 1e-15);
    let s = u.signum();
    let target = u.abs();
    let (mut lo, mut hi) = (target * (1.0 - k * k).sqrt(), target);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 * (1.0 + hi) {
            break;
        }
    }
    (s * 0.5 * (lo + hi)).cos()
}
