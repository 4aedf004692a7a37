//! Ideal compressible fluid with gravity and Coriolis force in 3+1
//! dimensions, its simple integral elements and the superposition families
//! of a simple wave with a simple state.
//!
//! Unknowns u = (ρ, p, v₁, v₂, v₃), independent variables x = (t, x₁, x₂, x₃).
//! Equations, in order: momentum (3), continuity, entropy
//!
//! ```text
//! ρ(v_t + (v·∇)v) + ∇p = ρ(v × Ω + g)
//! ρ_t + v·∇ρ + ρ ∇·v = 0
//! ρ(p_t + v·∇p) − κp(ρ_t + v·∇ρ) = 0
//! ```

use crate::chardata::{ElementKind, IntegralElement};
use crate::error::{Error, Result};
use crate::family::{ClosedFormFamily, Invariants};
use crate::funcs::{Func1, Func2, FuncSpec};
use crate::pde::SystemSpec;
use crate::quad::{self, QUAD_TOL};
use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

type V3 = Vector3<f64>;

fn v3(a: [f64; 3]) -> V3 {
    V3::new(a[0], a[1], a[2])
}

fn xs(x: &[f64]) -> V3 {
    V3::new(x[1], x[2], x[3])
}

fn require(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Constraint(what()))
    }
}

/// Tolerance of the geometric preconditions (unit vectors, orthogonality).
const GEOM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub kappa: f64,
    pub g: [f64; 3],
    pub omega: [f64; 3],
}

impl FluidParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Input(format!("κ must be positive, got {}", self.kappa)));
        }
        if self.g.iter().chain(&self.omega).any(|v| !v.is_finite()) {
            return Err(Error::Input("g and Ω must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidState {
    pub rho: f64,
    pub p: f64,
    pub v: [f64; 3],
}

impl FluidState {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.rho, self.p, self.v[0], self.v[1], self.v[2]]
    }

    pub fn from_slice(u: &[f64]) -> Self {
        Self {
            rho: u[0],
            p: u[1],
            v: [u[2], u[3], u[4]],
        }
    }

    /// √(κp/ρ).
    pub fn sound_speed(&self, kappa: f64) -> f64 {
        (kappa * self.p / self.rho).sqrt()
    }
}

pub fn fluid_system(params: &FluidParams) -> Result<SystemSpec> {
    params.validate()?;
    let kappa = params.kappa;
    let g = v3(params.g);
    let om = v3(params.omega);
    SystemSpec::new(
        "fluid",
        4,
        5,
        5,
        move |u| {
            let (rho, p) = (u[0], u[1]);
            let v = [u[2], u[3], u[4]];
            let mut a0 = DMatrix::zeros(5, 5);
            for j in 0..3 {
                a0[(j, 2 + j)] = rho;
            }
            a0[(3, 0)] = 1.0;
            a0[(4, 1)] = rho;
            a0[(4, 0)] = -kappa * p;
            let mut out = vec![a0];
            for k in 0..3 {
                let mut a = DMatrix::zeros(5, 5);
                for j in 0..3 {
                    a[(j, 2 + j)] = rho * v[k];
                }
                a[(k, 1)] = 1.0;
                a[(3, 0)] = v[k];
                a[(3, 2 + k)] = rho;
                a[(4, 1)] = rho * v[k];
                a[(4, 0)] = -kappa * p * v[k];
                out.push(a);
            }
            out
        },
        move |u| {
            let v = V3::new(u[2], u[3], u[4]);
            let f = (v.cross(&om) + g) * u[0];
            DVector::from_vec(vec![f[0], f[1], f[2], 0.0, 0.0])
        },
        |u| u[0] > 0.0 && u[1] > 0.0,
    )
}

/// δ|λ⃗| = λ₀ + v⃗·λ⃗, the propagation speed relative to the fluid (times |λ⃗|).
pub fn delta_speed(state: &FluidState, lambda: &[f64]) -> f64 {
    lambda[0] + state.v[0] * lambda[1] + state.v[1] * lambda[2] + state.v[2] * lambda[3]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluidElementKind {
    /// entropic simple element
    E,
    /// acoustic simple element
    A,
    /// entropic inhomogeneous element
    E0,
    /// acoustic inhomogeneous element
    A0,
    /// hydrodynamic inhomogeneous element
    H0,
}

impl FluidElementKind {
    pub const ALL: [FluidElementKind; 5] = [Self::E, Self::A, Self::E0, Self::A0, Self::H0];

    pub fn is_homogeneous(self) -> bool {
        matches!(self, Self::E | Self::A)
    }
}

impl FromStr for FluidElementKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E" => Ok(Self::E),
            "A" => Ok(Self::A),
            "E0" => Ok(Self::E0),
            "A0" => Ok(Self::A0),
            "H0" => Ok(Self::H0),
            _ => Err(Error::Input(format!("unknown element kind `{s}` (E, A, E0, A0, H0)"))),
        }
    }
}

/// Free data of the element constructors; each kind reads what it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElementOptions {
    /// λ⃗ (E, A, A0, H0).
    pub lambda: [f64; 3],
    pub gamma_rho: f64,
    /// γ⃗ of the entropic element, orthogonal to λ⃗.
    pub gamma_v: [f64; 3],
    /// ε = ±1 selects the acoustic branch (A, A0).
    pub eps: f64,
    /// α⃗ of the entropic inhomogeneous element.
    pub alpha: [f64; 3],
    /// δ of the hydrodynamic element, per unit |λ⃗|.
    pub delta: f64,
}

impl Default for ElementOptions {
    fn default() -> Self {
        Self {
            lambda: [1.0, 0.0, 0.0],
            gamma_rho: 1.0,
            gamma_v: [0.0, 1.0, 0.0],
            eps: 1.0,
            alpha: [0.0; 3],
            delta: 0.5,
        }
    }
}

const H0_MARGIN: f64 = 1e-6;

pub fn fluid_element(kind: FluidElementKind, state: &FluidState, params: &FluidParams, opts: &ElementOptions) -> Result<IntegralElement> {
    params.validate()?;
    if !(state.rho > 0.0 && state.p > 0.0) {
        return Err(Error::State(format!("ρ = {}, p = {} must be positive", state.rho, state.p)));
    }
    let (rho, p, kappa) = (state.rho, state.p, params.kappa);
    let v = v3(state.v);
    let c = state.sound_speed(kappa);
    let gg = v3(params.g) - v3(params.omega).cross(&v);
    let lam = v3(opts.lambda);
    let lnorm = lam.norm();
    let eps_ok = |e: f64| require(e == 1.0 || e == -1.0, || format!("ε must be ±1, got {e}"));
    let nonzero_lambda = || {
        if lnorm == 0.0 {
            Err(Error::Degeneracy("λ⃗ = 0".into()))
        } else {
            Ok(())
        }
    };
    let pack = |l0: f64, l: V3, g: [f64; 5], kind: ElementKind, label: &str| {
        IntegralElement::real(&[l0, l[0], l[1], l[2]], &g, kind, label)
    };
    match kind {
        FluidElementKind::E => {
            nonzero_lambda()?;
            let gv = v3(opts.gamma_v);
            require(gv.dot(&lam).abs() <= GEOM_TOL * (1.0 + gv.norm() * lnorm), || {
                format!("entropic element needs γ⃗·λ⃗ = 0, got {:e}", gv.dot(&lam))
            })?;
            Ok(pack(-v.dot(&lam), lam, [opts.gamma_rho, 0.0, gv[0], gv[1], gv[2]], ElementKind::Homogeneous, "E"))
        }
        FluidElementKind::A => {
            nonzero_lambda()?;
            eps_ok(opts.eps)?;
            let e = opts.eps;
            let gv = -lam / lnorm * (e * c * opts.gamma_rho / rho);
            Ok(pack(
                e * c * lnorm - v.dot(&lam),
                lam,
                [opts.gamma_rho, c * c * opts.gamma_rho, gv[0], gv[1], gv[2]],
                ElementKind::Homogeneous,
                "A",
            ))
        }
        FluidElementKind::E0 => {
            if gg.norm() == 0.0 {
                return Err(Error::Degeneracy("g⃗ − Ω⃗×v⃗ = 0: the entropic state has no wave vector".into()));
            }
            let gv = v3(opts.alpha).cross(&gg);
            Ok(pack(-v.dot(&gg), gg, [opts.gamma_rho, rho, gv[0], gv[1], gv[2]], ElementKind::Inhomogeneous, "E0"))
        }
        FluidElementKind::A0 => {
            nonzero_lambda()?;
            eps_ok(opts.eps)?;
            require(lam.dot(&gg).abs() <= GEOM_TOL * (1.0 + lnorm * gg.norm()), || {
                format!("acoustic state needs λ⃗·(g⃗ − Ω⃗×v⃗) = 0, got {:e}", lam.dot(&gg))
            })?;
            let d = opts.eps * c * lnorm;
            // the momentum rows force the 1/ρ: ρDγ⃗ + c²γ_ρλ⃗ = ρG
            let gv = (gg * rho - lam * (c * c * opts.gamma_rho)) / (rho * d);
            Ok(pack(
                d - v.dot(&lam),
                lam,
                [opts.gamma_rho, c * c * opts.gamma_rho, gv[0], gv[1], gv[2]],
                ElementKind::Inhomogeneous,
                "A0",
            ))
        }
        FluidElementKind::H0 => {
            nonzero_lambda()?;
            let dl = opts.delta * lnorm;
            require(opts.delta.abs() > H0_MARGIN && (opts.delta.abs() - c).abs() > H0_MARGIN, || {
                format!("hydrodynamic element needs δ ∉ {{0, ±{c}}} (margin {H0_MARGIN:e}), got {}", opts.delta)
            })?;
            let den = dl * dl - c * c * lnorm * lnorm;
            let s = gg.dot(&lam) / den;
            let gv = (gg * rho + lam * (kappa * p * s)) / (rho * dl);
            Ok(pack(dl - v.dot(&lam), lam, [-rho * s, -kappa * p * s, gv[0], gv[1], gv[2]], ElementKind::Inhomogeneous, "H0"))
        }
    }
}

/// ∫₀^{r} e^{−φ(s)} ds, exact when φ is constant.
#[derive(Debug, Clone)]
struct PhiIntegral {
    phi: Func1,
    constant: Option<f64>,
}

impl PhiIntegral {
    fn new(phi: Func1) -> Self {
        let constant = phi.is_constant().then(|| phi.value(0.0));
        Self { phi, constant }
    }

    fn value(&self, r: f64) -> f64 {
        match self.constant {
            Some(c) => (-c).exp() * r,
            None => quad::simpson(|s| (-self.phi.value(s)).exp(), 0.0, r, QUAD_TOL),
        }
    }
}

fn finite_all(v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    for x in &v {
        crate::error::finite(*x, what)?;
    }
    Ok(v)
}

fn f1(spec: &FuncSpec, name: &str) -> Result<Func1> {
    Func1::new(spec, "r").map_err(|e| Error::Config(format!("{name}: {e}")))
}

fn unit(v: V3, name: &str) -> Result<()> {
    require((v.norm() - 1.0).abs() <= GEOM_TOL, || format!("|{name}| = 1 required, got {}", v.norm()))
}

fn sign(e: f64, name: &str) -> Result<()> {
    require(e == 1.0 || e == -1.0, || format!("{name} must be ±1, got {e}"))
}

fn default_lo() -> Vec<f64> {
    vec![-0.3; 4]
}

fn default_hi() -> Vec<f64> {
    vec![0.3; 4]
}

/// Entropic wave on an entropic state, first printed variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ee0aParams {
    pub kappa: f64,
    pub g: [f64; 3],
    pub omega: [f64; 3],
    /// Correlated choice of the ± signs.
    pub sign: f64,
    pub c1: f64,
    pub p: FuncSpec,
    pub v2: FuncSpec,
    /// χ(r, r¹), an expression in `r0` (integration variable) and `r1`.
    pub chi: FuncSpec,
    pub a1: FuncSpec,
    pub a3: FuncSpec,
    pub psi: FuncSpec,
    pub guess: [f64; 2],
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for Ee0aParams {
    fn default() -> Self {
        Self {
            kappa: 1.4,
            g: [0.0, 0.0, 1.0],
            omega: [1.0, 0.0, 0.0],
            sign: 1.0,
            c1: 0.0,
            p: FuncSpec::poly(&[2.0, 1.0]),
            v2: FuncSpec::poly(&[0.0, 1.0]),
            chi: FuncSpec::Number(0.0),
            a1: FuncSpec::Number(1.0),
            a3: FuncSpec::Number(0.0),
            psi: FuncSpec::poly(&[0.0, 1.0]),
            guess: [0.0, 0.0],
            lo: default_lo(),
            hi: default_hi(),
        }
    }
}

/// Entropic wave on an entropic state, second printed variant (g⃗·Ω⃗ ≠ 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ee0bParams {
    pub kappa: f64,
    pub g: [f64; 3],
    pub omega: [f64; 3],
    pub c: f64,
    pub p: FuncSpec,
    pub v1: FuncSpec,
    pub v3: FuncSpec,
    pub phi: FuncSpec,
    pub guess: [f64; 2],
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for Ee0bParams {
    fn default() -> Self {
        Self {
            kappa: 1.4,
            g: [0.0, 0.0, 1.0],
            omega: [0.6, 0.0, 0.8],
            c: 0.7,
            p: FuncSpec::expr("exp(0.3*r)+2"),
            v1: FuncSpec::poly(&[0.5, 0.3]),
            v3: FuncSpec::Sin { sin: [0.2, 1.0, 0.0] },
            phi: FuncSpec::poly(&[0.0, 0.4, 0.1]),
            guess: [0.0, -2.0],
            lo: default_lo(),
            hi: default_hi(),
        }
    }
}

/// Entropic wave on an acoustic state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ea0Params {
    pub kappa: f64,
    pub g: [f64; 3],
    pub omega: [f64; 3],
    pub rho0: f64,
    pub p0: f64,
    pub eps: f64,
    pub eps1: f64,
    pub b0: f64,
    pub c1: f64,
    pub b1: FuncSpec,
    pub b2: FuncSpec,
    pub phi: FuncSpec,
    pub psi: FuncSpec,
    pub guess: [f64; 2],
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for Ea0Params {
    fn default() -> Self {
        Self {
            kappa: 1.4,
            g: [0.0, 0.0, 1.0],
            omega: [0.6, 0.8, 0.0],
            rho0: 1.0,
            p0: 1.0,
            eps: 1.0,
            eps1: 1.0,
            b0: 0.0,
            c1: 0.2,
            b1: FuncSpec::Number(0.0),
            b2: FuncSpec::poly(&[1.0, 1.0]),
            phi: FuncSpec::Number(0.0),
            psi: FuncSpec::poly(&[0.0, 1.0]),
            guess: [0.0, 0.0],
            lo: default_lo(),
            hi: default_hi(),
        }
    }
}

/// Entropic wave on a hydrodynamic state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Eh0Params {
    pub kappa: f64,
    pub g: [f64; 3],
    pub omega: [f64; 3],
    /// Unit vector orthogonal to Ω⃗ (direction of λ⃗⁰).
    pub c: [f64; 3],
    pub p0: f64,
    pub rho: FuncSpec,
    pub phi: FuncSpec,
    pub b: FuncSpec,
    pub a: FuncSpec,
    pub a1: FuncSpec,
    pub a2: FuncSpec,
    pub a3: FuncSpec,
    pub psi: FuncSpec,
    pub guess: [f64; 2],
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for Eh0Params {
    fn default() -> Self {
        Self {
            kappa: 1.4,
            g: [0.5, 0.2, 1.0],
            omega: [0.0, 0.0, 1.0],
            c: [0.6, 0.8, 0.0],
            p0: 1.0,
            rho: FuncSpec::expr("1.5+0.3*tanh(r)"),
            phi: FuncSpec::poly(&[0.0, 0.2]),
            b: FuncSpec::Number(0.4),
            a: FuncSpec::poly(&[0.5, 0.1]),
            a1: FuncSpec::poly(&[0.0, 0.2]),
            a2: FuncSpec::poly(&[0.3, 0.1]),
            a3: FuncSpec::poly(&[0.1, 0.0, 0.05]),
            psi: FuncSpec::poly(&[0.0, 2.0]),
            guess: [0.0, 0.0],
            lo: default_lo(),
            hi: default_hi(),
        }
    }
}

/// Acoustic wave on a hydrodynamic state (κ = 3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ah0Params {
    pub kappa: f64,
    pub g: [f64; 3],
    pub omega: [f64; 3],
    pub c: [f64; 3],
    pub a: f64,
    pub s1: f64,
    pub t1: f64,
    pub b1: f64,
    pub c1: f64,
    pub eps: f64,
    pub s: FuncSpec,
    pub phi: FuncSpec,
    pub psi: FuncSpec,
    /// The root of the quadratic for α closest to this value at r = 0 is
    /// used throughout; `None` takes the larger root.
    pub alpha_seed: Option<f64>,
    pub guess: [f64; 2],
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for Ah0Params {
    fn default() -> Self {
        Self {
            kappa: 3.0,
            g: [0.4, 0.3, 0.0],
            omega: [0.0, 0.0, 1.0],
            c: [0.6, 0.8, 0.0],
            a: 1.0,
            s1: -5.0,
            t1: 0.2,
            b1: 0.3,
            c1: 0.1,
            eps: 1.0,
            s: FuncSpec::poly(&[1.0, 0.3]),
            phi: FuncSpec::poly(&[0.0, 0.2]),
            psi: FuncSpec::poly(&[0.0, 0.5]),
            alpha_seed: None,
            guess: [0.1, 0.1],
            lo: vec![-0.2; 4],
            hi: vec![0.2; 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum FluidFamily {
    EE0a(Ee0aParams),
    EE0b(Ee0bParams),
    EA0(Ea0Params),
    EH0(Eh0Params),
    AH0(Ah0Params),
}

impl FluidFamily {
    pub const IDS: [&'static str; 5] = ["EE0a", "EE0b", "EA0", "EH0", "AH0"];

    /// The family with its documented test parameters.
    pub fn default_for(id: &str) -> Result<Self> {
        Ok(match id {
            "EE0a" => Self::EE0a(Ee0aParams::default()),
            "EE0b" => Self::EE0b(Ee0bParams::default()),
            "EA0" => Self::EA0(Ea0Params::default()),
            "EH0" => Self::EH0(Eh0Params::default()),
            "AH0" => Self::AH0(Ah0Params::default()),
            _ => return Err(Error::Config(format!("unknown fluid family `{id}` (EE0a, EE0b, EA0, EH0, AH0)"))),
        })
    }

    /// Parameters of family `id` from a JSON object (missing fields take
    /// their defaults).
    pub fn from_json(id: &str, params: &serde_json::Value) -> Result<Self> {
        Self::default_for(id)?;
        let mut obj = match params {
            serde_json::Value::Object(m) => m.clone(),
            serde_json::Value::Null => serde_json::Map::new(),
            _ => return Err(Error::Config("family parameters must be a JSON object".into())),
        };
        obj.insert("family".into(), serde_json::Value::String(id.into()));
        serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| Error::Config(format!("{id} parameters: {e}")))
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::EE0a(_) => "EE0a",
            Self::EE0b(_) => "EE0b",
            Self::EA0(_) => "EA0",
            Self::EH0(_) => "EH0",
            Self::AH0(_) => "AH0",
        }
    }
}

pub const FLUID_TOL: f64 = 1e-5;

pub fn fluid_family(fam: &FluidFamily) -> Result<ClosedFormFamily> {
    match fam {
        FluidFamily::EE0a(p) => ee0a(p),
        FluidFamily::EE0b(p) => ee0b(p),
        FluidFamily::EA0(p) => ea0(p),
        FluidFamily::EH0(p) => eh0(p),
        FluidFamily::AH0(p) => ah0(p),
    }
}

/// Solve the family's implicit invariant relations at x from `guess`.
pub fn solve_invariants(fam: &ClosedFormFamily, x: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
    let inv = fam
        .invariants
        .as_ref()
        .ok_or_else(|| Error::Input(format!("{} has no implicit invariants", fam.id)))?;
    inv.solve(x, guess)
}

fn anchor(lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    if lo.len() != 4 || hi.len() != 4 || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(Error::Config("sampling box must have 4 coordinates with lo < hi".into()));
    }
    Ok(lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect())
}

fn ee0a(pr: &Ee0aParams) -> Result<ClosedFormFamily> {
    let params = FluidParams {
        kappa: pr.kappa,
        g: pr.g,
        omega: pr.omega,
    };
    let sys = fluid_system(&params)?;
    let g = v3(pr.g);
    let om = v3(pr.omega);
    let gm = g.norm();
    require(gm > 0.0, || "g⃗ ≠ 0 required".into())?;
    unit(om, "Ω⃗")?;
    require(g.dot(&om).abs() <= GEOM_TOL * gm, || "g⃗·Ω⃗ = 0 required".into())?;
    sign(pr.sign, "sign")?;
    let s = pr.sign;
    let c0 = gm / (1.0 + gm.powi(4));
    let ephi0 = 1.0 / c0;
    let sq = (gm * gm - c0 * c0).sqrt();
    let gxo = g.cross(&om);
    let p = f1(&pr.p, "p")?;
    let v2 = f1(&pr.v2, "v2")?;
    let a1 = f1(&pr.a1, "a1")?;
    let a3 = f1(&pr.a3, "a3")?;
    let psi = f1(&pr.psi, "psi")?;
    let chi = Func2::new(&pr.chi).map_err(|e| Error::Config(format!("chi: {e}")))?;
    let chi_zero = matches!(pr.chi, FuncSpec::Number(v) if v == 0.0);
    let c1 = pr.c1;
    let (a1r, a3r, psir) = (a1.clone(), a3.clone(), psi);
    let relations = move |r: &[f64], x: &[f64]| {
        let (t, y) = (x[0], xs(x));
        let (r0, r1) = (r[0], r[1]);
        let f1 = c0 * t + s * sq / (gm * gm) * g.dot(&y) - c0 / (gm * gm) * gxo.dot(&y) + c1 - r0 / ephi0;
        let int = if chi_zero {
            0.0
        } else {
            quad::simpson(|q| chi.value(q, r1), 0.0, r0, QUAD_TOL)
        };
        let (a1v, a3v) = (a1r.value(r1), a3r.value(r1));
        let f2 = int / ephi0 + (ephi0 * (s * sq * a3v + c0 * a1v) - a3v * gm * gm) * t + a1v * g.dot(&y) + a3v * gxo.dot(&y)
            - psir.value(r1);
        finite_all(vec![f1, f2], "EE0a relation")
    };
    let (ps, v2s) = (p.clone(), v2.clone());
    let state = move |r: &[f64]| {
        let v = -g * (ephi0 / (gm * gm) * c0) + om * v2s.value(r[1]) + gxo * (-s * ephi0 / (gm * gm) * sq + 1.0);
        finite_all(vec![ps.deriv(r[0]), ps.value(r[0]), v[0], v[1], v[2]], "EE0a state")
    };
    let check = move |r: &[f64]| {
        require(p.deriv(r[0]) > 0.0, || format!("ṗ > 0 violated at r⁰ = {}", r[0]))?;
        require(p.value(r[0]) > 0.0, || format!("p > 0 violated at r⁰ = {}", r[0]))?;
        require(v2.deriv(r[1]) != 0.0, || format!("∂v₂/∂r¹ ≠ 0 violated at r¹ = {}", r[1]))?;
        require((s * sq * a3.value(r[1]) + c0 * a1.value(r[1])).abs() > 1e-12, || {
            format!("±(|g|²−c₀²)^½ a₃ ≠ −c₀a₁ violated at r¹ = {}", r[1])
        })
    };
    let inv = Invariants::new(relations, state, check, &anchor(&pr.lo, &pr.hi)?, &pr.guess)?;
    Ok(ClosedFormFamily::implicit("EE0a", sys, inv, &pr.lo, &pr.hi, FLUID_TOL)?
        .with_note("v₂ is taken as a function of r¹ only"))
}

fn ee0b(pr: &Ee0bParams) -> Result<ClosedFormFamily> {
    let params = FluidParams {
        kappa: pr.kappa,
        g: pr.g,
        omega: pr.omega,
    };
    let sys = fluid_system(&params)?;
    let g = v3(pr.g);
    let om = v3(pr.omega);
    unit(om, "Ω⃗")?;
    let go = g.dot(&om);
    let g2 = g.norm_squared();
    let gxo = g.cross(&om);
    require(go.abs() > GEOM_TOL, || "g⃗·Ω⃗ ≠ 0 required".into())?;
    require(gxo.norm() > GEOM_TOL, || "g⃗×Ω⃗ ≠ 0 required (otherwise r¹ is undetermined)".into())?;
    let p = f1(&pr.p, "p")?;
    let v1 = f1(&pr.v1, "v1")?;
    let v3f = f1(&pr.v3, "v3")?;
    let phi = f1(&pr.phi, "phi")?;
    let c = pr.c;
    let integrals = {
        let (v1, v3f) = (v1.clone(), v3f.clone());
        move |r1: f64| {
            let i1 = quad::simpson(
                |r| v1.deriv(r) * (1.0 - v3f.value(r)) + v3f.deriv(r) * v1.value(r),
                0.0,
                r1,
                QUAD_TOL,
            );
            let i2 = quad::simpson(|r| v1.deriv(r) * v3f.value(r) - v1.value(r) * v3f.deriv(r), 0.0, r1, QUAD_TOL);
            (i1, i2)
        }
    };
    let (v1r, v3r, ir) = (v1.clone(), v3f.clone(), integrals.clone());
    let relations = move |r: &[f64], x: &[f64]| {
        let (t, y) = (x[0], xs(x));
        let (r0, r1) = (r[0], r[1]);
        let (i1, i2) = ir(r1);
        let (a, b, da, db) = (v1r.value(r1), v3r.value(r1), v1r.deriv(r1), v3r.deriv(r1));
        let f1 = (-a * g2 + g2 * i1 + go * go * i2 - c * go) * t + (g * (1.0 - b) + om * (b * go) + gxo * a).dot(&y)
            - phi.value(r1)
            - r0;
        let f2 = (go * go - g2) * (da * b - a * db) * t + (-g * db + om * (db * go) + gxo * da).dot(&y) - phi.deriv(r1);
        finite_all(vec![f1, f2], "EE0b relation")
    };
    let (ps, v1s, v3s) = (p.clone(), v1.clone(), v3f.clone());
    let state = move |r: &[f64]| {
        let (i1, i2) = integrals(r[1]);
        let v = g * v1s.value(r[1]) + om * (-g2 / go * i1 - go * i2 + c) + gxo * v3s.value(r[1]);
        finite_all(vec![ps.deriv(r[0]), ps.value(r[0]), v[0], v[1], v[2]], "EE0b state")
    };
    let check = move |r: &[f64]| {
        require(p.deriv(r[0]) > 0.0, || format!("ṗ > 0 violated at r⁰ = {}", r[0]))?;
        require(p.value(r[0]) > 0.0, || format!("p > 0 violated at r⁰ = {}", r[0]))?;
        require(v1.deriv(r[1]) != 0.0 || v3f.deriv(r[1]) != 0.0, || {
            format!("v̇₁ ≠ 0 or v̇₃ ≠ 0 violated at r¹ = {}", r[1])
        })
    };
    let inv = Invariants::new(relations, state, check, &anchor(&pr.lo, &pr.hi)?, &pr.guess)?;
    Ok(ClosedFormFamily::implicit("EE0b", sys, inv, &pr.lo, &pr.hi, FLUID_TOL)?
        .with_note("general g⃗, Ω⃗ with g⃗·Ω⃗ ≠ 0 and g⃗×Ω⃗ ≠ 0 (the printed axis-aligned choice is degenerate)"))
}

fn ea0(pr: &Ea0Params) -> Result<ClosedFormFamily> {
    let params = FluidParams {
        kappa: pr.kappa,
        g: pr.g,
        omega: pr.omega,
    };
    let sys = fluid_system(&params)?;
    let g = v3(pr.g);
    let om = v3(pr.omega);
    unit(om, "Ω⃗")?;
    require(g.dot(&om).abs() <= GEOM_TOL * (1.0 + g.norm()), || "g⃗·Ω⃗ = 0 required".into())?;
    sign(pr.eps, "eps")?;
    sign(pr.eps1, "eps1")?;
    require(pr.rho0 > 0.0 && pr.p0 > 0.0, || "ρ₀ > 0 and p₀ > 0 required".into())?;
    let (eps, eps1, b0, c1) = (pr.eps, pr.eps1, pr.b0, pr.c1);
    let cs = (pr.kappa * pr.p0 / pr.rho0).sqrt();
    let gxo = g.cross(&om);
    let b1 = f1(&pr.b1, "b1")?;
    let b2 = f1(&pr.b2, "b2")?;
    let psi = f1(&pr.psi, "psi")?;
    let big_phi = PhiIntegral::new(f1(&pr.phi, "phi")?);
    let bp = big_phi.clone();
    let relations = move |r: &[f64], x: &[f64]| {
        let (t, y) = (x[0], xs(x));
        let f1 = (eps * cs - eps1 * b0) * t + eps1 * om.dot(&y) + c1 - bp.value(r[0]);
        let f2 = b0 * t - om.dot(&y) - psi.value(r[1]);
        finite_all(vec![f1, f2], "EA0 relation")
    };
    let (rho0, p0) = (pr.rho0, pr.p0);
    let b2s = b2.clone();
    let state = move |r: &[f64]| {
        let arg = eps / cs * big_phi.value(r[0]) + b1.value(r[1]);
        let amp = b2s.value(r[1]);
        let v = g * (amp * arg.cos()) + om * b0 + gxo * (amp * arg.sin() + 1.0);
        finite_all(vec![rho0, p0, v[0], v[1], v[2]], "EA0 state")
    };
    let check = move |r: &[f64]| {
        require(b2.value(r[1]) != 0.0, || format!("b₂ ≠ 0 violated at r¹ = {}", r[1]))?;
        require(b2.deriv(r[1]) != 0.0, || format!("ḃ₂ ≠ 0 violated at r¹ = {}", r[1]))
    };
    let inv = Invariants::new(relations, state, check, &anchor(&pr.lo, &pr.hi)?, &pr.guess)?;
    ClosedFormFamily::implicit("EA0", sys, inv, &pr.lo, &pr.hi, FLUID_TOL)
}

fn eh0(pr: &Eh0Params) -> Result<ClosedFormFamily> {
    let params = FluidParams {
        kappa: pr.kappa,
        g: pr.g,
        omega: pr.omega,
    };
    let sys = fluid_system(&params)?;
    let g = v3(pr.g);
    let om = v3(pr.omega);
    let c = v3(pr.c);
    unit(om, "Ω⃗")?;
    unit(c, "c⃗")?;
    require(c.dot(&om).abs() <= GEOM_TOL, || "c⃗·Ω⃗ = 0 required".into())?;
    let go = g.dot(&om);
    let cxo = c.cross(&om);
    let gg = g.dot(&cxo);
    let gc = g.dot(&c);
    require(go.abs() > GEOM_TOL, || "g⃗·Ω⃗ ≠ 0 required".into())?;
    require(gg.abs() > GEOM_TOL, || "g⃗·(c⃗×Ω⃗) ≠ 0 required".into())?;
    require(pr.p0 > 0.0, || "p₀ > 0 required".into())?;
    let rho = f1(&pr.rho, "rho")?;
    let b = f1(&pr.b, "b")?;
    let a = f1(&pr.a, "a")?;
    let a1 = f1(&pr.a1, "a1")?;
    let a2 = f1(&pr.a2, "a2")?;
    let a3 = f1(&pr.a3, "a3")?;
    let psi = f1(&pr.psi, "psi")?;
    let big_phi = PhiIntegral::new(f1(&pr.phi, "phi")?);
    let (bp, br, a2r) = (big_phi.clone(), b.clone(), a2.clone());
    let relations = move |r: &[f64], x: &[f64]| {
        let (t, y) = (x[0], xs(x));
        let r1 = r[1];
        let s = c.dot(&y) / gg;
        let (av, a1v, a2v, a3v) = (a.value(r1), a1.value(r1), a2r.value(r1), a3.value(r1));
        let f1 = bp.value(r[0]) - c.dot(&y);
        let f2 = s * (av - gg * a1v + br.value(r1) * a2v + gc * a3v) - 0.5 * go * a2v * s * s
            + av * t
            + (c * a1v + om * a2v + cxo * a3v).dot(&y)
            - psi.value(r1);
        finite_all(vec![f1, f2], "EH0 relation")
    };
    let (rs, bs) = (rho.clone(), b.clone());
    let p0 = pr.p0;
    let state = move |r: &[f64]| {
        let v = -c * gg + om * (-go / gg * big_phi.value(r[0]) + bs.value(r[1])) + cxo * gc;
        finite_all(vec![rs.value(r[1]), p0, v[0], v[1], v[2]], "EH0 state")
    };
    let check = move |r: &[f64]| {
        let r1 = r[1];
        require((b.deriv(r1) * a2.value(r1)).abs() <= 1e-12, || format!("ḃa₂ = 0 violated at r¹ = {r1}"))?;
        require(rho.value(r1) > 0.0, || format!("ρ > 0 violated at r¹ = {r1}"))?;
        require(rho.deriv(r1) != 0.0, || format!("ρ̇ ≠ 0 violated at r¹ = {r1}"))
    };
    let inv = Invariants::new(relations, state, check, &anchor(&pr.lo, &pr.hi)?, &pr.guess)?;
    Ok(ClosedFormFamily::implicit("EH0", sys, inv, &pr.lo, &pr.hi, FLUID_TOL)?
        .with_note("general g⃗ with g⃗·(c⃗×Ω⃗) ≠ 0 and unit c⃗ (the printed g⃗ = (0,0,g) makes g⃗·(c⃗×Ω⃗) vanish)"))
}

/// Quadratic for α at P = ∫₀^{r⁰}e^{−φ}, for root branch `root` = ±1.
#[derive(Debug, Clone)]
struct Ah0Alpha {
    a: f64,
    s1: f64,
    t1: f64,
    gc: f64,
    gg: f64,
    eps: f64,
    root: f64,
    s: Func1,
}

impl Ah0Alpha {
    /// α + g⃗·(c⃗×Ω⃗).
    fn shifted(&self, pv: f64, r1: f64) -> Result<f64> {
        let sv = self.s.value(r1);
        let k = self.eps * (3.0 * self.a).sqrt() * sv + self.s1 - (self.gc - self.t1) * pv + 0.5 * pv * pv;
        let disc = k * k - 3.0 * self.a * sv * sv;
        if !(disc >= 0.0) {
            return Err(Error::ImplicitSolve {
                msg: format!("no real α: discriminant {disc:e} < 0"),
                last: vec![pv, r1],
            });
        }
        let y = -k + self.root * disc.sqrt();
        if !(y > 0.0) {
            return Err(Error::ImplicitSolve {
                msg: format!("no real α on this branch: (α+G)² = {y:e}"),
                last: vec![pv, r1],
            });
        }
        Ok(sv.signum() * y.sqrt())
    }

    fn alpha(&self, pv: f64, r1: f64) -> Result<f64> {
        Ok(self.shifted(pv, r1)? - self.gg)
    }

    /// ∂α/∂r¹ by implicit differentiation of the quadratic.
    fn d_r1(&self, pv: f64, r1: f64) -> Result<f64> {
        let big_a = self.shifted(pv, r1)?;
        let (sv, ds) = (self.s.value(r1), self.s.deriv(r1));
        let fa = big_a - 3.0 * self.a * sv * sv / big_a.powi(3);
        let fr = 3.0 * self.a * sv * ds / (big_a * big_a) + self.eps * (3.0 * self.a).sqrt() * ds;
        Ok(-fr / fa)
    }
}

/// α(P, r¹) of the acoustic/hydrodynamic family on the given root branch
/// (±1); a negative discriminant is an implicit-solve error.
pub fn ah0_alpha(pr: &Ah0Params, pv: f64, r1: f64, root: f64) -> Result<f64> {
    let (g, c, om) = (v3(pr.g), v3(pr.c), v3(pr.omega));
    Ah0Alpha {
        a: pr.a,
        s1: pr.s1,
        t1: pr.t1,
        gc: g.dot(&c),
        gg: g.dot(&c.cross(&om)),
        eps: pr.eps,
        root,
        s: f1(&pr.s, "S")?,
    }
    .alpha(pv, r1)
}

fn ah0(pr: &Ah0Params) -> Result<ClosedFormFamily> {
    let params = FluidParams {
        kappa: pr.kappa,
        g: pr.g,
        omega: pr.omega,
    };
    let sys = fluid_system(&params)?;
    require(pr.kappa == 3.0, || format!("κ = 3 required, got {}", pr.kappa))?;
    let g = v3(pr.g);
    let om = v3(pr.omega);
    let c = v3(pr.c);
    unit(om, "Ω⃗")?;
    unit(c, "c⃗")?;
    require(c.dot(&om).abs() <= GEOM_TOL, || "c⃗·Ω⃗ = 0 required".into())?;
    require(g.dot(&om).abs() <= GEOM_TOL * (1.0 + g.norm()), || "g⃗·Ω⃗ = 0 required".into())?;
    require(pr.a > 0.0, || "a > 0 required".into())?;
    sign(pr.eps, "eps")?;
    let cxo = c.cross(&om);
    let gg = g.dot(&cxo);
    let mut al = Ah0Alpha {
        a: pr.a,
        s1: pr.s1,
        t1: pr.t1,
        gc: g.dot(&c),
        gg,
        eps: pr.eps,
        root: 1.0,
        s: f1(&pr.s, "S")?,
    };
    // fix the branch once, at r = 0
    if let Some(seed) = pr.alpha_seed {
        let mut best: Option<(f64, f64)> = None;
        for root in [1.0, -1.0] {
            al.root = root;
            if let Ok(v) = al.alpha(0.0, 0.0) {
                let d = (v - seed).abs();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, root));
                }
            }
        }
        al.root = best.map(|b| b.1).ok_or_else(|| Error::ImplicitSolve {
            msg: "no real α at r = 0".into(),
            last: vec![0.0, 0.0],
        })?;
    }
    let psi = f1(&pr.psi, "psi")?;
    let big_phi = PhiIntegral::new(f1(&pr.phi, "phi")?);
    let (eps, a, c1) = (pr.eps, pr.a, pr.c1);
    let (alr, bp) = (al.clone(), big_phi.clone());
    let relations = move |r: &[f64], x: &[f64]| {
        let (t, y) = (x[0], xs(x));
        let (r0, r1) = (r[0], r[1]);
        let pv = bp.value(r0);
        let f1 = pv - (gg * t + c.dot(&y) + c1);
        // ∫₀^{r⁰} e^{−φ} α_{r¹} dr = ∫₀^{P} α_{r¹}(P′, r¹) dP′
        alr.shifted(pv, r1)?;
        alr.shifted(0.0, r1)?;
        let bad = std::cell::RefCell::new(None);
        let int = quad::simpson(
            |q| match alr.d_r1(q, r1) {
                Ok(v) => v,
                Err(e) => {
                    bad.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            pv,
            QUAD_TOL,
        );
        if !int.is_finite() {
            return Err(bad.into_inner().unwrap_or(Error::ImplicitSolve {
                msg: "∂α/∂r¹ integral is not finite".into(),
                last: r.to_vec(),
            }));
        }
        let f2 = t + eps / ((3.0 * a).sqrt() * alr.s.deriv(r1)) * int - psi.value(r1);
        finite_all(vec![f1, f2], "AH0 relation")
    };
    let (als, bps) = (al.clone(), big_phi);
    let (b1, t1) = (pr.b1, pr.t1);
    let state = move |r: &[f64]| {
        let pv = bps.value(r[0]);
        let alpha = als.alpha(pv, r[1])?;
        let rho = als.s.value(r[1]) / (alpha + gg);
        let v = c * alpha + om * b1 + cxo * (pv + t1);
        finite_all(vec![rho, a * rho.powi(3), v[0], v[1], v[2]], "AH0 state")
    };
    let alc = al.clone();
    let check = move |r: &[f64]| {
        let r1 = r[1];
        require(alc.s.value(r1) != 0.0, || format!("S ≠ 0 violated at r¹ = {r1}"))?;
        require(alc.s.deriv(r1) != 0.0, || format!("Ṡ ≠ 0 violated at r¹ = {r1}"))
    };
    let inv = Invariants::new(relations, state, check, &anchor(&pr.lo, &pr.hi)?, &pr.guess)?;
    Ok(ClosedFormFamily::implicit("AH0", sys, inv, &pr.lo, &pr.hi, FLUID_TOL)?
        .with_note("the root of the quadratic for α is fixed once at r = 0"))
}
