//! Free functions of one or two variables, supplied with exact derivatives.
//!
//! Configuration files describe them with [`FuncSpec`]: a plain number, one of
//! the named built-ins, or an expression string.

use crate::error::{Error, Result};
use crate::expr::Expr;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// JSON description of a free function.
///
/// * `1.5` — constant
/// * `{"poly": [c0, c1, ...]}` — c0 + c1 r + c2 r² + …
/// * `{"sin": [amp, freq, phase]}` — amp·sin(freq·r + phase)
/// * `{"exp": [amp, rate]}` — amp·exp(rate·r)
/// * `{"sech": [amp, rate]}` — amp·sech(rate·r)
/// * `{"expr": "..."}` — expression in the function's variable names
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FuncSpec {
    Number(f64),
    Poly { poly: Vec<f64> },
    Sin { sin: [f64; 3] },
    Exp { exp: [f64; 2] },
    Sech { sech: [f64; 2] },
    Expr { expr: String },
}

impl FuncSpec {
    pub fn poly(c: &[f64]) -> Self {
        FuncSpec::Poly { poly: c.to_vec() }
    }

    pub fn expr(s: &str) -> Self {
        FuncSpec::Expr { expr: s.to_string() }
    }

    /// Expression source in terms of the first variable `v`.
    fn source(&self, v: &str) -> String {
        let num = |x: f64| format!("({x:e})");
        match self {
            FuncSpec::Number(x) => num(*x),
            FuncSpec::Poly { poly } => {
                if poly.is_empty() {
                    return "0".into();
                }
                poly.iter()
                    .enumerate()
                    .map(|(k, ck)| match k {
                        0 => num(*ck),
                        1 => format!("{}*{v}", num(*ck)),
                        _ => format!("{}*{v}^{k}", num(*ck)),
                    })
                    .collect::<Vec<_>>()
                    .join("+")
            }
            FuncSpec::Sin { sin: [a, w, ph] } => {
                format!("{}*sin({}*{v}+{})", num(*a), num(*w), num(*ph))
            }
            FuncSpec::Exp { exp: [a, k] } => format!("{}*exp({}*{v})", num(*a), num(*k)),
            FuncSpec::Sech { sech: [a, k] } => format!("{}*sech({}*{v})", num(*a), num(*k)),
            FuncSpec::Expr { expr } => expr.clone(),
        }
    }

    fn parse(&self, vars: &[&str]) -> Result<Expr> {
        let src = self.source(vars[0]);
        Expr::parse(&src, vars).map_err(|e| match e {
            Error::Parse { pos, msg } => Error::Config(format!("in `{src}` at {pos}: {msg}")),
            other => other,
        })
    }
}

/// Real function of one variable with its derivative.
#[derive(Debug, Clone)]
pub struct Func1 {
    f: Expr,
    df: Expr,
}

impl Func1 {
    pub fn new(spec: &FuncSpec, var: &str) -> Result<Self> {
        let f = spec.parse(&[var])?;
        let df = f.diff(0);
        Ok(Self { f, df })
    }

    /// Shorthand for an expression in `r`; panics on a malformed literal.
    pub fn expr(src: &str) -> Self {
        Self::new(&FuncSpec::expr(src), "r").expect("valid expression literal")
    }

    pub fn constant(v: f64) -> Self {
        Self::new(&FuncSpec::Number(v), "r").expect("constant")
    }

    pub fn value(&self, r: f64) -> f64 {
        self.f.eval_re(&[r])
    }

    pub fn deriv(&self, r: f64) -> f64 {
        self.df.eval_re(&[r])
    }

    pub fn derivative(&self) -> Func1 {
        Func1 {
            f: self.df.clone(),
            df: self.df.diff(0),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.f.is_constant()
    }
}

/// Real function of (r0, r1) with both partial derivatives.
#[derive(Debug, Clone)]
pub struct Func2 {
    f: Expr,
    d0: Expr,
    d1: Expr,
}

impl Func2 {
    pub fn new(spec: &FuncSpec) -> Result<Self> {
        // built-ins act on r0; use an expression to involve r1
        let f = spec.parse(&["r0", "r1"])?;
        Ok(Self {
            d0: f.diff(0),
            d1: f.diff(1),
            f,
        })
    }

    pub fn expr(src: &str) -> Self {
        Self::new(&FuncSpec::expr(src)).expect("valid expression literal")
    }

    pub fn value(&self, r0: f64, r1: f64) -> f64 {
        self.f.eval_re(&[r0, r1])
    }

    pub fn d_r0(&self, r0: f64, r1: f64) -> f64 {
        self.d0.eval_re(&[r0, r1])
    }

    pub fn d_r1(&self, r0: f64, r1: f64) -> f64 {
        self.d1.eval_re(&[r0, r1])
    }
}

/// Complex analytic function of one complex variable `r` with derivative.
#[derive(Debug, Clone)]
pub struct CFunc1 {
    f: Expr,
    df: Expr,
}

impl CFunc1 {
    pub fn new(src: &str) -> Result<Self> {
        let f = Expr::parse(src, &["r"]).map_err(|e| Error::Config(format!("f(r) = `{src}`: {e}")))?;
        Ok(Self { df: f.diff(0), f })
    }

    pub fn value(&self, r: Complex64) -> Complex64 {
        self.f.eval(&[r])
    }

    pub fn deriv(&self, r: Complex64) -> Complex64 {
        self.df.eval(&[r])
    }
}

/// Function H(r, rb) of a complex invariant and its conjugate, treated as
/// independent variables, with both partials.
#[derive(Debug, Clone)]
pub struct CFunc2 {
    f: Expr,
    dr: Expr,
    drb: Expr,
}

impl CFunc2 {
    pub fn new(src: &str) -> Result<Self> {
        let f = Expr::parse(src, &["r", "rb"])
            .map_err(|e| Error::Config(format!("H(r, rb) = `{src}`: {e}")))?;
        Ok(Self {
            dr: f.diff(0),
            drb: f.diff(1),
            f,
        })
    }

    pub fn value(&self, r: Complex64, rb: Complex64) -> Complex64 {
        self.f.eval(&[r, rb])
    }

    pub fn d_r(&self, r: Complex64, rb: Complex64) -> Complex64 {
        self.dr.eval(&[r, rb])
    }

    pub fn d_rb(&self, r: Complex64, rb: Complex64) -> Complex64 {
        self.drb.eval(&[r, rb])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins() {
        let p = Func1::new(&FuncSpec::poly(&[2.0, 1.0, 0.5]), "r").unwrap();
        assert!((p.value(2.0) - 6.0).abs() < 1e-14);
        assert!((p.deriv(2.0) - 3.0).abs() < 1e-14);
        let s = Func1::new(&FuncSpec::Sin { sin: [2.0, 3.0, 0.1] }, "r").unwrap();
        assert!((s.deriv(0.4) - 6.0 * (1.3f64).cos()).abs() < 1e-13);
        let e = Func1::new(&FuncSpec::Exp { exp: [0.5, -2.0] }, "r").unwrap();
        assert!((e.value(1.0) - 0.5 * (-2.0f64).exp()).abs() < 1e-15);
        let h = Func1::new(&FuncSpec::Sech { sech: [1.0, 1.0] }, "r").unwrap();
        assert!((h.deriv(1.0) + (1.0 / 1f64.cosh()) * 1f64.tanh()).abs() < 1e-14);
        assert!(Func1::constant(3.0).is_constant());
    }

    #[test]
    fn json_forms() {
        let specs: Vec<FuncSpec> =
            serde_json::from_str(r#"[1.5, {"poly":[0,1]}, {"sin":[1,2,0]}, {"expr":"r^2"}]"#).unwrap();
        assert_eq!(specs[0], FuncSpec::Number(1.5));
        assert_eq!(specs[1], FuncSpec::poly(&[0.0, 1.0]));
        let f = Func1::new(&specs[3], "r").unwrap();
        assert_eq!(f.deriv(3.0), 6.0);
    }

    #[test]
    fn two_variable() {
        let f = Func2::expr("0.5*r1+0.2*r0*r1");
        assert!((f.d_r0(1.0, 2.0) - 0.4).abs() < 1e-15);
        assert!((f.d_r1(1.0, 2.0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn complex_functions() {
        let f = CFunc1::new("r^2+1").unwrap();
        let z = Complex64::new(1.0, 1.0);
        assert!((f.deriv(z) - 2.0 * z).norm() < 1e-15);
        let h = CFunc2::new("r*rb").unwrap();
        assert!((h.d_r(z, z.conj()) - z.conj()).norm() < 1e-15);
    }

    #[test]
    fn bad_expression_is_config_error() {
        assert!(matches!(
            Func1::new(&FuncSpec::expr("r +* 2"), "r"),
            Err(Error::Config(_))
        ));
    }
}
