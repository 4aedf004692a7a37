//! Three worked systems with printed solution families: a constant-coefficient
//! 3×3 system in (t, x, y, z) with bump, cnoidal and multisoliton sources; a
//! curl-type system with exponential source; and the planar Loewner system.

use crate::chardata::{Block, DecompositionData, Rotation, Variant};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::family::ClosedFormFamily;
use crate::funcs::{CFunc1, CFunc2, Func1, FuncSpec};
use crate::pde::{CandidateSolution, Sampler, SystemSpec, WaveVector};
use crate::quad;
use crate::special::{jacobi, sech};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Residual tolerance for the constant-coefficient examples.
pub const EXAMPLE_TOL: f64 = 1e-6;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

// ---------------------------------------------------------------------------
// Example 1

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ex1Variant {
    Sech,
    Cnoidal,
    Multisoliton,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example1Config {
    pub a: [f64; 3],
    pub variant: Ex1Variant,
    /// Phase shifts c_i(r₁) (sech and multisoliton variants).
    pub c: [FuncSpec; 3],
    /// Moduli (cnoidal and multisoliton variants).
    pub k: [f64; 3],
    /// b₁, b₂, b₃ as expressions in u, v, w (custom variant).
    pub source: Option<[String; 3]>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
}

impl Default for Example1Config {
    fn default() -> Self {
        Self {
            a: [1.0, 1.0, 1.0],
            variant: Ex1Variant::Sech,
            c: [FuncSpec::Number(0.0), FuncSpec::Number(0.0), FuncSpec::Number(0.0)],
            k: [0.3, 0.5, 0.7],
            source: None,
            lo: None,
            hi: None,
        }
    }
}

impl Example1Config {
    pub fn m(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum()
    }

    pub fn xi(&self, x: &[f64]) -> f64 {
        x[0] + self.m() * self.adot(x)
    }

    pub fn r1(&self, x: &[f64]) -> f64 {
        -self.m() * x[0] + self.adot(x)
    }

    fn adot(&self, x: &[f64]) -> f64 {
        self.a[0] * x[1] + self.a[1] * x[2] + self.a[2] * x[3]
    }

    fn validate_system(&self) -> Result<()> {
        if self.a.iter().any(|v| !v.is_finite()) || self.m() == 0.0 {
            return Err(Error::Config("example 1 needs a finite nonzero vector a".into()));
        }
        if matches!(self.variant, Ex1Variant::Cnoidal | Ex1Variant::Multisoliton)
            && self.k.iter().any(|k| !(*k > 0.0 && *k < 1.0))
        {
            return Err(Error::Config(format!("moduli must lie strictly inside (0, 1), got {:?}", self.k)));
        }
        if self.variant == Ex1Variant::Custom && self.source.is_none() {
            return Err(Error::Config("custom variant needs `source`".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_system()?;
        if self.variant == Ex1Variant::Sech && self.a.contains(&0.0) {
            return Err(Error::Config("sech variant needs every a_i ≠ 0".into()));
        }
        Ok(())
    }

    /// The configured box, or one on which s = ξ/(1+M²) stays in about
    /// [0.28, 1.02] for every x.
    pub fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        if let (Some(lo), Some(hi)) = (&self.lo, &self.hi) {
            return (lo.clone(), hi.clone());
        }
        let m = self.m();
        let l1: f64 = self.a.iter().map(|v| v.abs()).sum();
        let w = 0.2 / (1.0 + m * l1);
        let s = 1.0 + m * m;
        (vec![0.3 * s, -w, -w, -w], vec![s, w, w, w])
    }
}

/// 𝒜¹, 𝒜², 𝒜³; Σ a_i 𝒜^i = M·I.
pub fn example1_matrices(a: &[f64; 3]) -> [DMatrix<f64>; 3] {
    let [a1, a2, a3] = *a;
    [
        DMatrix::from_row_slice(3, 3, &[a1, -a2, -a3, a2, a1, 0.0, a3, 0.0, a1]),
        DMatrix::from_row_slice(3, 3, &[a2, a1, 0.0, -a1, a2, -a3, 0.0, a3, a2]),
        DMatrix::from_row_slice(3, 3, &[a3, 0.0, a1, 0.0, a3, a2, -a1, -a2, a3]),
    ]
}

/// b_i(u_i) of the three closed-form variants.
fn ex1_component_source(variant: Ex1Variant, a: f64, k: f64, u: f64) -> f64 {
    match variant {
        Ex1Variant::Sech => {
            if a == 0.0 {
                0.0
            } else {
                -(u / a.abs()) * (a * a - u * u).sqrt()
            }
        }
        Ex1Variant::Cnoidal => -(1.0 - k * k * (1.0 - u * u)).sqrt() * (1.0 - u * u).sqrt(),
        Ex1Variant::Multisoliton => -(u * u - 1.0).sqrt() * (u * u - k * k).sqrt(),
        Ex1Variant::Custom => unreachable!(),
    }
}

fn ex1_component_admissible(variant: Ex1Variant, a: f64, k: f64, u: f64) -> bool {
    match variant {
        Ex1Variant::Sech => u.abs() <= a.abs(),
        Ex1Variant::Cnoidal => u.abs() <= 1.0 && 1.0 - k * k * (1.0 - u * u) >= 0.0,
        Ex1Variant::Multisoliton => u.abs() >= 1.0,
        Ex1Variant::Custom => true,
    }
}

pub fn example1_system(cfg: &Example1Config) -> Result<SystemSpec> {
    cfg.validate_system()?;
    let mats = example1_matrices(&cfg.a);
    let coeffs = move |_: &[f64]| {
        let mut v = vec![DMatrix::identity(3, 3)];
        v.extend(mats.iter().cloned());
        v
    };
    let name = format!("example1-{}", serde_json::to_value(cfg.variant).unwrap().as_str().unwrap());
    if cfg.variant == Ex1Variant::Custom {
        let src = cfg.source.as_ref().unwrap();
        let exprs = src
            .iter()
            .map(|s| Expr::parse(s, &["u", "v", "w"]))
            .collect::<Result<Vec<_>>>()?;
        return SystemSpec::new(
            name,
            4,
            3,
            3,
            coeffs,
            move |u| DVector::from_iterator(3, exprs.iter().map(|e| e.eval_re(u))),
            |_| true,
        );
    }
    let (variant, a, k) = (cfg.variant, cfg.a, cfg.k);
    SystemSpec::new(
        name,
        4,
        3,
        3,
        coeffs,
        move |u| DVector::from_fn(3, |i, _| ex1_component_source(variant, a[i], k[i], u[i])),
        move |u| (0..3).all(|i| ex1_component_admissible(variant, a[i], k[i], u[i])),
    )
}

/// The profile u_i(s) at shifted argument s, with its domain enforced.
pub fn example1_profile(variant: Ex1Variant, a: f64, k: f64, s: f64) -> Result<f64> {
    match variant {
        Ex1Variant::Sech => {
            if s > 0.0 {
                Ok(a * sech(s))
            } else {
                Err(Error::Domain(format!("bump argument {s} ≤ 0 (rising flank)")))
            }
        }
        Ex1Variant::Cnoidal => {
            let (sn, cn, _) = jacobi(s, k);
            if sn > 0.0 {
                Ok(cn)
            } else {
                Err(Error::Domain(format!("sn({s}, {k}) ≤ 0")))
            }
        }
        Ex1Variant::Multisoliton => {
            let (sn, cn, _) = jacobi(s, k);
            let d = 1.0 - cn * cn;
            if d <= 0.0 {
                return Err(Error::Domain(format!("cn²({s}, {k}) = 1: singular point")));
            }
            if !(sn > 0.0 && cn > 0.0) {
                return Err(Error::Domain(format!("sn or cn ≤ 0 at ({s}, {k})")));
            }
            Ok(1.0 / d.sqrt())
        }
        Ex1Variant::Custom => Err(Error::Input("custom source has no closed-form profile".into())),
    }
}

/// Wave vectors of example 1: η = (−M, a) carrying r₁ and (1, M a) carrying ξ.
pub fn example1_waves(a: &[f64; 3]) -> Vec<WaveVector> {
    let m: f64 = a.iter().map(|v| v * v).sum();
    vec![
        WaveVector::real(&[-m, a[0], a[1], a[2]]),
        WaveVector::real(&[1.0, m * a[0], m * a[1], m * a[2]]),
    ]
}

pub fn example1_family(cfg: &Example1Config) -> Result<ClosedFormFamily> {
    cfg.validate()?;
    if cfg.variant == Ex1Variant::Custom {
        return Err(Error::Input("custom source has no closed-form family".into()));
    }
    let sys = example1_system(cfg)?;
    let cs = cfg
        .c
        .iter()
        .map(|s| Func1::new(s, "r"))
        .collect::<Result<Vec<_>>>()?;
    let g = cfg.clone();
    let sol = CandidateSolution::new(4, 3, move |x| {
        let s = g.xi(x) / (1.0 + g.m() * g.m());
        let r1 = g.r1(x);
        let mut u = DVector::zeros(3);
        for i in 0..3 {
            let shift = if g.variant == Ex1Variant::Cnoidal { 0.0 } else { cs[i].value(r1) };
            u[i] = example1_profile(g.variant, g.a[i], g.k[i], s + shift)?;
        }
        Ok(u)
    });
    let (lo, hi) = cfg.domain();
    let waves = example1_waves(&cfg.a);
    let id = sys.name.clone();
    Ok(ClosedFormFamily::new(id, sys, sol, &lo, &hi, EXAMPLE_TOL, move |_| Ok(waves.clone()))
        .with_note("profiles use ξ/(1+M²) and square-root sources on a monotone flank"))
}

/// How θ in the second rotation is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaReading {
    /// Formula that satisfies the rotation condition (real part by atan2,
    /// square root in the denominator of the arccosh argument).
    Corrected,
    /// As printed, with the sign ε = ±1 of the arccosh argument.
    Printed { eps: f64 },
}

/// θ = x + iy for the source b = (b₁, b₂, b₃).
pub fn example1_theta(b: &[f64], reading: ThetaReading) -> Result<Complex64> {
    let (b1, b2, b3) = (b[0], b[1], b[2]);
    if b1 == 0.0 || b3 == 0.0 {
        return Err(Error::Domain(format!("θ needs b₁ ≠ 0 and b₃ ≠ 0 (b = {b:?})")));
    }
    match reading {
        ThetaReading::Corrected => {
            let sg = b1.signum();
            let x = (-b2 * (b1 + b3) / b3 * sg).atan2((b2 * b2 - b1 * b3) / b3 * sg);
            let arg = b1.abs() * (b1 * b1 + b2 * b2).sqrt() / (b3.abs() * (b2 * b2 + b3 * b3).sqrt());
            if arg < 1.0 {
                return Err(Error::Domain(format!("arccosh argument {arg} < 1: no real-imaginary-part θ")));
            }
            Ok(Complex64::new(x, arg.acosh()))
        }
        ThetaReading::Printed { eps } => {
            let x = (b2 * (b1 + b3) / (b1 * b3 - b2 * b2)).atan();
            let z = c(-eps * b1 * (b1 * b1 + b2 * b2).sqrt() / (b3 * (b2 * b2 + b3 * b3)));
            Ok(c(x) + I * z.acosh())
        }
    }
}

/// L₂(θ) ∈ SO(3, ℂ).
pub fn example1_l2(theta: Complex64) -> DMatrix<Complex64> {
    let (s, co) = (theta.sin(), theta.cos());
    let z = c(0.0);
    DMatrix::from_row_slice(3, 3, &[z, -s, -co, z, co, -s, c(1.0), z, z])
}

/// Ω₂ = (1 − iM) b₃ / (2 b₁ (M² + 1)).
pub fn example1_omega2(m: f64, b: &[f64]) -> Complex64 {
    (c(1.0) - I * m) * b[2] / (2.0 * b[0] * (m * m + 1.0))
}

/// Mixed (one real wave, one complex mode) decomposition at state u with
/// the free real vector T in τ₂ = (M + i)T.
pub fn example1_decomposition(cfg: &Example1Config, u: &[f64], t: &[f64; 3], reading: ThetaReading) -> Result<DecompositionData> {
    let sys = example1_system(cfg)?;
    let b = sys.source(u)?;
    let m = cfg.m();
    let theta = example1_theta(b.as_slice(), reading)?;
    let [a1, a2, a3] = cfg.a;
    let eta = Block {
        wave: WaveVector::real(&[-m, a1, a2, a3]),
        rotation: Rotation::Determined { omega: c(0.0), l: DMatrix::identity(3, 3) },
        tau: DVector::zeros(3),
    };
    let lam = Block {
        wave: WaveVector::complex(&[c(1.0), I * a1, I * a2, I * a3]),
        rotation: Rotation::Determined { omega: example1_omega2(m, b.as_slice()), l: example1_l2(theta) },
        tau: DVector::from_iterator(3, t.iter().map(|v| (c(m) + I) * *v)),
    };
    Ok(DecompositionData { variant: Variant::Mixed, blocks: vec![eta, lam] })
}

/// Largest |Im θ| of an admissible decomposition state. L₂ has entries of
/// size cosh(Im θ), so LᵀL = I cannot be resolved to 1e-10 in double
/// precision much beyond this.
pub const THETA_IM_MAX: f64 = 5.0;

/// States u of the configured system at which the corrected θ exists with
/// |Im θ| ≤ [`THETA_IM_MAX`].
pub fn example1_decomposition_states(cfg: &Example1Config, n: usize, seed: u64) -> Result<Vec<[f64; 3]>> {
    let sys = example1_system(cfg)?;
    let bound = |i: usize| match cfg.variant {
        Ex1Variant::Sech => cfg.a[i].abs(),
        Ex1Variant::Cnoidal => 1.0,
        Ex1Variant::Multisoliton | Ex1Variant::Custom => 3.0,
    };
    let lo: Vec<f64> = (0..3).map(|i| -bound(i)).collect();
    let hi: Vec<f64> = (0..3).map(bound).collect();
    let sampler = Sampler::new(&lo, &hi, seed);
    let mut out = Vec::with_capacity(n);
    for idx in 0..(200 * n as u64).max(1000) {
        if out.len() == n {
            break;
        }
        let u = sampler.point(idx);
        let Ok(b) = sys.source(&u) else { continue };
        if example1_theta(b.as_slice(), ThetaReading::Corrected).is_ok_and(|t| t.im.abs() <= THETA_IM_MAX) {
            out.push([u[0], u[1], u[2]]);
        }
    }
    if out.len() < n {
        return Err(Error::Sampling(format!("only {} of {n} admissible decomposition states", out.len())));
    }
    Ok(out)
}

/// The printed right-hand side of the reduced equation for ∂U/∂r₂, with the
/// sign ε of its square root.
pub fn example1_printed_rhs_r2(m: f64, b: &[f64], eps: f64) -> DVector<Complex64> {
    let (b1, b2, b3) = (b[0], b[1], b[2]);
    let root = c(b1 * b1 * (b1 * b1 + b2 * b2) - b3 * b3 * (b2 * b2 + b3 * b3)).sqrt();
    let pre = root * eps / ((1.0 + m * m) * (b1 * b1 + b2 * b2).sqrt());
    let k = I / (2.0 * (1.0 + m * m));
    let one = c(1.0) + I * m;
    DVector::from_vec(vec![one * (pre * (b2 / b1) + k * b1), one * (pre + k * b2), one * (k * b3)])
}

/// Distance of the printed ∂U/∂r₂ from Ω₂L₂b + (M+i)T, minimised over the
/// free real T and the printed sign ε.
pub fn example1_printed_rhs_defect(cfg: &Example1Config, u: &[f64]) -> Result<f64> {
    let b = example1_system(cfg)?.source(u)?;
    let m = cfg.m();
    let theta = example1_theta(b.as_slice(), ThetaReading::Corrected)?;
    let rb = crate::linalg::to_complex_vec(&b);
    let v = example1_l2(theta) * rb * example1_omega2(m, b.as_slice());
    let mi = c(m) + I;
    let d = [1.0, -1.0]
        .iter()
        .map(|eps| {
            let diff = &v - example1_printed_rhs_r2(m, b.as_slice(), *eps);
            diff.iter().map(|z| (z / mi).im.abs() * mi.norm()).fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(d)
}

// ---------------------------------------------------------------------------
// Example 2

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example2Config {
    pub a: [f64; 3],
    pub kappa: f64,
    pub mu: f64,
    pub c0: f64,
    pub c1: f64,
    /// H(r, rb) as an expression in `r`, `rb`.
    pub h: String,
    pub f1: FuncSpec,
    pub f2: FuncSpec,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for Example2Config {
    fn default() -> Self {
        Self {
            a: [0.5, 0.7, 1.3],
            kappa: 0.8,
            mu: 2.0,
            c0: 1.0,
            c1: -5.0,
            h: "r*rb".into(),
            f1: FuncSpec::Number(0.0),
            f2: FuncSpec::Number(0.0),
            lo: vec![-0.5; 4],
            hi: vec![0.5; 4],
        }
    }
}

/// Points at which the reality condition on H is sampled.
const REALITY_SAMPLES: u64 = 32;
const REALITY_TOL: f64 = 1e-10;

impl Example2Config {
    fn validate(&self) -> Result<()> {
        if self.a[2] == 0.0 {
            return Err(Error::Config("example 2 needs a₃ ≠ 0".into()));
        }
        if self.mu == 0.0 {
            return Err(Error::Config("example 2 needs μ ≠ 0".into()));
        }
        if self.lo.len() != 4 || self.hi.len() != 4 {
            return Err(Error::Config("example 2 box must have 4 coordinates".into()));
        }
        Ok(())
    }

    pub fn r1(&self, x: &[f64]) -> f64 {
        x[0] + x[3] / self.a[2]
    }

    pub fn r2(&self, x: &[f64]) -> Complex64 {
        Complex64::new(x[1], self.mu * x[2])
    }
}

/// 𝒜¹, 𝒜², 𝒜³ of the curl system.
pub fn example2_matrices(a: &[f64; 3]) -> [DMatrix<f64>; 3] {
    let [a1, a2, a3] = *a;
    [
        DMatrix::from_row_slice(3, 3, &[0.0, a2, a3, 0.0, -a1, 0.0, 0.0, 0.0, -a1]),
        DMatrix::from_row_slice(3, 3, &[-a2, 0.0, 0.0, a1, 0.0, a3, 0.0, 0.0, -a2]),
        DMatrix::from_row_slice(3, 3, &[-a3, 0.0, 0.0, 0.0, -a3, 0.0, a1, a2, 0.0]),
    ]
}

pub fn example2_system(cfg: &Example2Config) -> Result<SystemSpec> {
    let mats = example2_matrices(&cfg.a);
    let (k, a) = (cfg.kappa, cfg.a);
    SystemSpec::new(
        "example2",
        4,
        3,
        3,
        move |_| {
            let mut v = vec![DMatrix::identity(3, 3)];
            v.extend(mats.iter().cloned());
            v
        },
        move |u| DVector::from_vec(vec![k * a[1], -k * a[0], u[2].exp()]),
        |_| true,
    )
}

/// Evaluator of the example 2 solution, keeping the imaginary parts that the
/// reality condition should cancel.
#[derive(Clone)]
pub struct Example2Solution {
    cfg: Example2Config,
    h: Arc<CFunc2>,
    f1: Arc<Func1>,
    f2: Arc<Func1>,
}

impl Example2Solution {
    pub fn new(cfg: &Example2Config) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            h: Arc::new(CFunc2::new(&cfg.h)?),
            f1: Arc::new(Func1::new(&cfg.f1, "r")?),
            f2: Arc::new(Func1::new(&cfg.f2, "r")?),
        })
    }

    fn phi(&self, r1: f64) -> f64 {
        let [a1, a2, a3] = self.cfg.a;
        (a1 * self.f1.value(r1) / self.cfg.mu + a2 * self.f2.value(r1)) / a3
    }

    /// I(r₁) = ∫₀^{r₁} exp(−φ(s)) ds.
    pub fn integral(&self, r1: f64) -> f64 {
        if self.f1.is_constant() && self.f2.is_constant() {
            return (-self.phi(0.0)).exp() * r1;
        }
        quad::simpson(|s| (-self.phi(s)).exp(), 0.0, r1, 1e-13)
    }

    /// max |H_r − conj(H_rb)| at `x`.
    pub fn reality_defect(&self, x: &[f64]) -> f64 {
        let r = self.cfg.r2(x);
        (self.h.d_r(r, r.conj()) - self.h.d_rb(r, r.conj()).conj()).norm()
    }

    /// Complex (u, v, w) at x before taking real parts.
    pub fn eval_complex(&self, x: &[f64]) -> Result<[Complex64; 3]> {
        let g = &self.cfg;
        let r1 = g.r1(x);
        let r = g.r2(x);
        let (hr, hrb) = (self.h.d_r(r, r.conj()), self.h.d_rb(r, r.conj()));
        let u = (hr + hrb) * (g.c0 / (2.0 * g.mu)) + self.f1.value(r1) / g.mu - g.kappa * x[2] / 2.0;
        let v = I * (g.c0 / 2.0) * (hr - hrb) + self.f2.value(r1) + g.kappa * x[1] / 2.0;
        let arg = -g.c1 - self.integral(r1);
        if !(arg > 0.0) {
            return Err(Error::Domain(format!("logarithm argument {arg} ≤ 0 at r₁ = {r1}")));
        }
        let w = -self.phi(r1) - arg.ln();
        Ok([u, v, c(w)])
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        let z = self.eval_complex(x)?;
        Ok(DVector::from_iterator(3, z.iter().map(|v| v.re)))
    }

    /// Reality condition at deterministic sample points of the box.
    pub fn check_reality(&self) -> Result<f64> {
        let s = Sampler::new(&self.cfg.lo, &self.cfg.hi, 0);
        let worst = (0..REALITY_SAMPLES).map(|i| self.reality_defect(&s.point(i))).fold(0.0, f64::max);
        if !(worst <= REALITY_TOL) {
            return Err(Error::Constraint(format!(
                "H violates the reality condition ∂H/∂r = conj(∂H/∂r̄): defect {worst:.3e}"
            )));
        }
        Ok(worst)
    }
}

pub fn example2_family(cfg: &Example2Config) -> Result<ClosedFormFamily> {
    let ev = Example2Solution::new(cfg)?;
    ev.check_reality()?;
    let sys = example2_system(cfg)?;
    let sol = CandidateSolution::new(4, 3, move |x| ev.eval(x));
    let (a3, mu) = (cfg.a[2], cfg.mu);
    let waves = vec![
        WaveVector::real(&[1.0, 0.0, 0.0, 1.0 / a3]),
        WaveVector::complex(&[c(0.0), c(1.0), I * mu, c(0.0)]),
    ];
    Ok(ClosedFormFamily::new("example2", sys, sol, &cfg.lo, &cfg.hi, EXAMPLE_TOL, move |_| Ok(waves.clone()))
        .with_note("ξ, η read as r₂, r̄₂; f₂ inside w read as f₂(r₁); v without 1/μ factors"))
}

// ---------------------------------------------------------------------------
// Example 3

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ex3Denominator {
    /// |f|²
    Sq,
    /// |f|⁴
    Quartic,
}

impl Ex3Denominator {
    pub const ALL: [Ex3Denominator; 2] = [Ex3Denominator::Sq, Ex3Denominator::Quartic];

    pub fn power(self) -> i32 {
        match self {
            Ex3Denominator::Sq => 2,
            Ex3Denominator::Quartic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example3Config {
    pub kappa: f64,
    /// f(r) as an expression in `r`.
    pub f: String,
    pub denominator: Ex3Denominator,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for Example3Config {
    fn default() -> Self {
        Self { kappa: 1.0, f: "r".into(), denominator: Ex3Denominator::Quartic, lo: vec![0.5, 0.5], hi: vec![1.5, 1.5] }
    }
}

impl Example3Config {
    fn validate(&self) -> Result<()> {
        if self.kappa == 0.0 || !self.kappa.is_finite() {
            return Err(Error::Config("example 3 needs κ ≠ 0".into()));
        }
        if self.lo.len() != 2 || self.hi.len() != 2 {
            return Err(Error::Config("example 3 box must have 2 coordinates".into()));
        }
        Ok(())
    }
}

/// (transformed system in (u, v, q = ln ρ), original Loewner system in
/// (u, v, ρ)).
pub fn example3_systems(cfg: &Example3Config) -> Result<(SystemSpec, SystemSpec)> {
    cfg.validate()?;
    let k = cfg.kappa;
    let transformed = SystemSpec::new(
        "example3",
        2,
        3,
        2,
        |u| {
            vec![
                DMatrix::from_row_slice(2, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, u[0]]),
                DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, u[1]]),
            ]
        },
        move |u| DVector::from_vec(vec![k * u[2] * (u[0] * u[0] + u[1] * u[1]), 0.0]),
        |_| true,
    )?;
    let original = SystemSpec::new(
        "example3-original",
        2,
        3,
        2,
        |u| {
            vec![
                DMatrix::from_row_slice(2, 3, &[0.0, -1.0, 0.0, u[2], 0.0, u[0]]),
                DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, u[2], u[1]]),
            ]
        },
        move |u| DVector::from_vec(vec![k * u[2].ln() * (u[0] * u[0] + u[1] * u[1]), 0.0]),
        |u| u[2] > 0.0,
    )?;
    Ok((transformed, original))
}

/// (u, v, q) of the simple mode solution at (x, y).
pub fn example3_eval(f: &CFunc1, kappa: f64, d: Ex3Denominator, x: &[f64]) -> Result<[f64; 3]> {
    let r = Complex64::new(x[0], x[1]);
    let fv = f.value(r);
    let fp = f.deriv(r);
    let m = fv.norm();
    if !(m > 1e-300) || !m.is_finite() {
        return Err(Error::Domain(format!("f vanishes at {x:?}")));
    }
    let den = kappa * m.powi(d.power());
    let u = (I * (fp.conj() - fp) / den).re;
    let v = ((fp.conj() + fp) / den).re;
    Ok([u, v, m * m])
}

fn ex3_family(cfg: &Example3Config, original: bool) -> Result<ClosedFormFamily> {
    let (tr, orig) = example3_systems(cfg)?;
    let f = Arc::new(CFunc1::new(&cfg.f)?);
    let (k, d) = (cfg.kappa, cfg.denominator);
    let sol = CandidateSolution::new(2, 3, move |x| {
        let [u, v, q] = example3_eval(&f, k, d, x)?;
        Ok(DVector::from_vec(vec![u, v, if original { q.exp() } else { q }]))
    });
    let tag = match d {
        Ex3Denominator::Sq => "sq",
        Ex3Denominator::Quartic => "quartic",
    };
    let (id, sys) = if original { (format!("example3-original-{tag}"), orig) } else { (format!("example3-{tag}"), tr) };
    let waves = vec![WaveVector::complex(&[c(1.0), I])];
    Ok(ClosedFormFamily::new(id, sys, sol, &cfg.lo, &cfg.hi, EXAMPLE_TOL, move |_| Ok(waves.clone())))
}

/// Simple mode solution on the transformed system, unknowns (u, v, q).
pub fn example3_family(cfg: &Example3Config) -> Result<ClosedFormFamily> {
    ex3_family(cfg, false)
}

/// The same solution as (u, v, ρ = e^q) on the original Loewner form.
pub fn example3_original_family(cfg: &Example3Config) -> Result<ClosedFormFamily> {
    ex3_family(cfg, true)
}

/// Outcome of checking both printed denominators against the residual oracle.
#[derive(Debug, Clone, Serialize)]
pub struct Ex3Resolution {
    pub residuals: Vec<(Ex3Denominator, f64)>,
    /// The variant that verifies, if any.
    pub chosen: Option<Ex3Denominator>,
}

pub fn example3_resolve(cfg: &Example3Config, n: usize, seed: u64, h: f64) -> Result<Ex3Resolution> {
    let mut residuals = Vec::new();
    let mut chosen = None;
    for d in Ex3Denominator::ALL {
        let fam = example3_family(&Example3Config { denominator: d, ..cfg.clone() })?;
        let rep = fam.verify(n, seed, h)?;
        if rep.pass && chosen.is_none() {
            chosen = Some(d);
        }
        residuals.push((d, rep.max_abs));
    }
    Ok(Ex3Resolution { residuals, chosen })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chardata::{self, check_wave_relation, IntegralElement};
    use crate::pde::{self, FD_STEP};

    fn ex1(variant: Ex1Variant) -> Example1Config {
        Example1Config { variant, ..Default::default() }
    }

    #[test]
    fn example1_transcription() {
        let a = [1.0, 2.0, 3.0];
        let m = example1_matrices(&a);
        let a2 = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, -1.0, 2.0, -3.0, 0.0, 3.0, 2.0]);
        assert_eq!(m[1], a2);
        let sum = &m[0] * a[0] + &m[1] * a[1] + &m[2] * a[2];
        assert_eq!(sum, DMatrix::identity(3, 3) * 14.0);
        let m1 = example1_matrices(&[1.0, 0.0, 0.0]);
        let anti = (&m1[0] - m1[0].transpose()) * 0.5;
        assert_eq!(anti, DMatrix::zeros(3, 3));
    }

    #[test]
    fn example1_zero_state_has_zero_source() {
        let cfg = Example1Config { a: [1.0, 0.0, 0.0], ..Default::default() };
        let sys = example1_system(&cfg).unwrap();
        assert_eq!(sys.source(&[0.0, 0.0, 0.0]).unwrap().norm(), 0.0);
        let zero = CandidateSolution::new(4, 3, |_| Ok(DVector::zeros(3)));
        assert_eq!(pde::residual(&sys, &zero, &[0.3, 0.1, 0.2, 0.4], FD_STEP).unwrap().norm(), 0.0);
        assert!(example1_family(&cfg).is_err());
    }

    #[test]
    fn example1_dispersion_is_state_independent() {
        let sys = example1_system(&ex1(Ex1Variant::Cnoidal)).unwrap();
        let n = 3f64.sqrt();
        let s = [1.0 / n, 1.0 / n, 1.0 / n];
        let r1 = chardata::dispersion_roots(&sys, &[0.1, 0.2, -0.3], &s).unwrap();
        let r2 = chardata::dispersion_roots(&sys, &[0.9, -0.5, 0.4], &s).unwrap();
        assert_eq!(r1.len(), r2.len());
        for (x, y) in r1.iter().zip(&r2) {
            assert!((x.value - y.value).abs() < 1e-12);
        }
    }

    #[test]
    fn sech_reference_point() {
        let fam = example1_family(&ex1(Ex1Variant::Sech)).unwrap();
        let u = fam.solution.eval(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        for v in u.iter() {
            assert!((v - sech(0.1)).abs() < 1e-15);
        }
        assert!((sech(0.1) - 0.99502).abs() < 1e-5);
        let r = pde::residual(&fam.system, &fam.solution, &[1.0, 0.0, 0.0, 0.0], FD_STEP).unwrap();
        assert!(r.amax() < 1e-6, "{r}");
    }

    #[test]
    fn example1_families_verify_and_fail_negated() {
        for v in [Ex1Variant::Sech, Ex1Variant::Cnoidal, Ex1Variant::Multisoliton] {
            let mut cfg = ex1(v);
            if v != Ex1Variant::Cnoidal {
                cfg.c = [FuncSpec::poly(&[0.05, 0.01]), FuncSpec::Number(0.1), FuncSpec::expr("0.02*sin(r)")];
            }
            let fam = example1_family(&cfg).unwrap();
            let rep = fam.verify(200, 7, FD_STEP).unwrap();
            assert!(rep.pass, "{v:?}: {}", rep.max_abs);
            let neg = fam.negated().verify(200, 7, FD_STEP).unwrap();
            assert!(neg.max_abs >= 1e-2, "{v:?}");
            let x = fam.sampler(1).point(0);
            assert!(fam.span_residual(&x, FD_STEP).unwrap() < 1e-6);
        }
    }

    #[test]
    fn cnoidal_degenerates_to_cosine() {
        let cfg = Example1Config { k: [1e-9; 3], ..ex1(Ex1Variant::Cnoidal) };
        let fam = example1_family(&cfg).unwrap();
        let sys = example1_system(&cfg).unwrap();
        let s = fam.sampler(3);
        for i in 0..20 {
            let x = s.point(i);
            let arg = cfg.xi(&x) / (1.0 + cfg.m() * cfg.m());
            let u = fam.solution.eval(&x).unwrap();
            assert!((u[0] - arg.cos()).abs() < 1e-12);
            let b = sys.source(u.as_slice()).unwrap();
            assert!((b[0] + (1.0 - u[0] * u[0]).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn multisoliton_singular_point_is_domain_error() {
        assert!(matches!(example1_profile(Ex1Variant::Multisoliton, 1.0, 0.5, 0.0), Err(Error::Domain(_))));
        let cfg = ex1(Ex1Variant::Multisoliton);
        let fam = example1_family(&cfg).unwrap();
        // ξ = 0 ⇒ s = 0 ⇒ cn = 1
        assert!(matches!(fam.solution.eval(&[0.0; 4]), Err(Error::Domain(_))));
    }

    #[test]
    fn example1_reduced_ode_along_xi() {
        for v in [Ex1Variant::Sech, Ex1Variant::Cnoidal, Ex1Variant::Multisoliton] {
            let cfg = ex1(v);
            let fam = example1_family(&cfg).unwrap();
            let m = cfg.m();
            // direction with dr₁ = 0 and dξ = 1: t-step 1/(1+M²), spatial a/(1+M²)·(1/1)
            let dir: Vec<f64> = {
                let s = 1.0 + m * m;
                vec![1.0 / s, cfg.a[0] / s, cfg.a[1] / s, cfg.a[2] / s]
            };
            let s = fam.sampler(2);
            for i in 0..10 {
                let x = s.point(i);
                let h = 1e-5;
                let xp: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
                let xm: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
                let du = (fam.solution.eval(&xp).unwrap() - fam.solution.eval(&xm).unwrap()) / (2.0 * h);
                let b = fam.system.source(fam.solution.eval(&x).unwrap().as_slice()).unwrap();
                assert!((du - b / (1.0 + m * m)).amax() < 1e-6, "{v:?}");
            }
        }
    }

    #[test]
    fn example1_depends_on_two_invariants_only() {
        let cfg = Example1Config { c: [FuncSpec::poly(&[0.1, 0.02]), FuncSpec::Number(0.2), FuncSpec::Number(0.0)], ..ex1(Ex1Variant::Sech) };
        let fam = example1_family(&cfg).unwrap();
        let a = cfg.a;
        // both directions annihilate η and the ξ-vector
        let dirs = [[0.0, a[1], -a[0], 0.0], [0.0, a[2], 0.0, -a[0]]];
        let s = fam.sampler(4);
        for i in 0..10 {
            let x = s.point(i);
            for d in &dirs {
                let h = 1e-5;
                let xp: Vec<f64> = x.iter().zip(d).map(|(a, d)| a + h * d).collect();
                let xm: Vec<f64> = x.iter().zip(d).map(|(a, d)| a - h * d).collect();
                let du = (fam.solution.eval(&xp).unwrap() - fam.solution.eval(&xm).unwrap()) / (2.0 * h);
                assert!(du.amax() < 1e-8);
            }
        }
    }

    #[test]
    fn decomposition_with_corrected_theta() {
        let cfg = Example1Config { a: [0.7, -0.4, 1.1], ..ex1(Ex1Variant::Sech) };
        let sys = example1_system(&cfg).unwrap();
        for u in example1_decomposition_states(&cfg, 30, 11).unwrap() {
            let d = example1_decomposition(&cfg, &u, &[0.3, -1.2, 0.5], ThetaReading::Corrected).unwrap();
            assert!(chardata::check_rotation_condition(&sys, &u, &d).unwrap() < 1e-8);
            let (o, det) = d.rotation_errors();
            assert!(o < 1e-10 && det < 1e-10);
            let els: Vec<IntegralElement> = d
                .blocks
                .iter()
                .map(|b| IntegralElement { lambda: b.wave.clone(), gamma: b.tau.clone(), kind: chardata::ElementKind::Homogeneous, label: String::new() })
                .collect();
            assert!(check_wave_relation(&sys, &u, &els).unwrap() < 1e-10);
            let img = chardata::assembled_image(&sys, &u, &d).unwrap();
            assert!((img - sys.source(&u).unwrap()).amax() < 1e-8);
        }
    }

    #[test]
    fn printed_theta_and_rhs_do_not_satisfy_the_conditions() {
        let cfg = Example1Config { a: [0.7, -0.4, 1.1], ..ex1(Ex1Variant::Sech) };
        let sys = example1_system(&cfg).unwrap();
        let states = example1_decomposition_states(&cfg, 10, 5).unwrap();
        let worst = states
            .iter()
            .map(|u| {
                [1.0, -1.0]
                    .iter()
                    .map(|e| {
                        let d = example1_decomposition(&cfg, u, &[0.0; 3], ThetaReading::Printed { eps: *e }).unwrap();
                        chardata::check_rotation_condition(&sys, u, &d).unwrap()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e-3);
        let rhs = states.iter().map(|u| example1_printed_rhs_defect(&cfg, u).unwrap()).fold(0.0, f64::max);
        assert!(rhs > 1e-3);
    }

    #[test]
    fn theta_inadmissible_states() {
        assert!(matches!(example1_theta(&[0.0, 1.0, 1.0], ThetaReading::Corrected), Err(Error::Domain(_))));
        // |b₁|√(b₁²+b₂²) < |b₃|√(b₂²+b₃²)
        assert!(matches!(example1_theta(&[0.1, 0.1, 1.0], ThetaReading::Corrected), Err(Error::Domain(_))));
    }

    #[test]
    fn example2_product_h_verifies() {
        let fam = example2_family(&Example2Config::default()).unwrap();
        let rep = fam.verify(200, 3, FD_STEP).unwrap();
        assert!(rep.pass, "{}", rep.max_abs);
        assert!(fam.negated().verify(200, 3, FD_STEP).unwrap().max_abs >= 1e-2);
        // H = r r̄, f ≡ 0, c₀ = 1: u = x/μ·... = (r + r̄)/(2μ) − κy/2
        let cfg = Example2Config::default();
        let x = [0.1, 0.3, -0.2, 0.4];
        let u = fam.solution.eval(&x).unwrap();
        assert!((u[0] - (x[1] / cfg.mu - cfg.kappa * x[2] / 2.0)).abs() < 1e-14);
        assert!(fam.span_residual(&x, FD_STEP).unwrap() < 1e-6);
    }

    #[test]
    fn example2_nonlinear_h_and_free_functions() {
        let cfg = Example2Config {
            h: "r^3 + rb^3 + r*rb".into(),
            f1: FuncSpec::poly(&[0.0, 0.3]),
            f2: FuncSpec::expr("sin(r)"),
            c0: 1.3,
            ..Default::default()
        };
        let ev = Example2Solution::new(&cfg).unwrap();
        let s = Sampler::new(&cfg.lo, &cfg.hi, 9);
        for i in 0..50 {
            let z = ev.eval_complex(&s.point(i)).unwrap();
            assert!(z.iter().all(|v| v.im.abs() <= 1e-12));
        }
        let fam = example2_family(&cfg).unwrap();
        assert!(fam.verify(200, 4, FD_STEP).unwrap().pass);
        // ∂w/∂r₁ = −φ' + e^{−φ}/(−c₁ − I)
        let r1 = 0.37;
        let h = 1e-5;
        let w = |r: f64| ev.eval(&[r, 0.0, 0.0, 0.0]).unwrap()[2];
        let fd = (w(r1 + h) - w(r1 - h)) / (2.0 * h);
        let dphi = (ev.phi(r1 + h) - ev.phi(r1 - h)) / (2.0 * h);
        let exact = -dphi + (-ev.phi(r1)).exp() / (-cfg.c1 - ev.integral(r1));
        assert!((fd - exact).abs() < 1e-7);
    }

    #[test]
    fn example2_reality_and_log_domain() {
        let cfg = Example2Config { h: "r^2".into(), ..Default::default() };
        assert!(matches!(example2_family(&cfg), Err(Error::Constraint(_))));
        let cfg = Example2Config { c1: 0.1, ..Default::default() };
        let ev = Example2Solution::new(&cfg).unwrap();
        assert!(matches!(ev.eval(&[0.4, 0.0, 0.0, 0.0]), Err(Error::Domain(_))));
        assert!(example2_family(&Example2Config { a: [1.0, 1.0, 0.0], ..Default::default() }).is_err());
    }

    #[test]
    fn example3_reference_values() {
        let f = CFunc1::new("r").unwrap();
        for d in Ex3Denominator::ALL {
            let [u, v, q] = example3_eval(&f, 1.0, d, &[1.0, 1.0]).unwrap();
            assert_eq!(u, 0.0);
            assert!((v - 2.0 / 2f64.sqrt().powi(d.power())).abs() < 1e-15);
            assert!((q.exp() - 1f64.exp().powi(2)).abs() < 1e-12);
        }
        assert!(matches!(example3_eval(&f, 1.0, Ex3Denominator::Sq, &[0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn example3_constant_f_and_rank() {
        let cfg = Example3Config { f: "2 + 0.5*0".into(), ..Default::default() };
        let fam = example3_family(&cfg).unwrap();
        assert!(fam.verify(50, 1, FD_STEP).unwrap().max_abs == 0.0);
        for d in Ex3Denominator::ALL {
            let fam = example3_family(&Example3Config { denominator: d, f: "r^2 + 1".into(), ..Default::default() }).unwrap();
            let j = pde::jacobian_fd(&fam.solution, &[1.0, 0.7], FD_STEP).unwrap();
            assert_eq!(pde::fd_rank(&j, 1e-6), 2);
        }
    }

    #[test]
    fn example3_printed_denominators() {
        // Neither printed denominator verifies; the resolution reports it.
        let res = example3_resolve(&Example3Config::default(), 200, 0, FD_STEP).unwrap();
        assert_eq!(res.residuals.len(), 2);
        assert!(res.chosen.is_none(), "{res:?}");
        for d in Ex3Denominator::ALL {
            let cfg = Example3Config { denominator: d, ..Default::default() };
            let rep = example3_original_family(&cfg).unwrap().verify(100, 0, FD_STEP).unwrap();
            assert!(!rep.pass);
        }
    }
}
