//! JSON run configuration: system and family selection, custom systems
//! given by expressions, and decomposition specs for the reduced systems.
//!
//! Expressions use the grammar of [`crate::expr`] (`+ - * / ^`, `sqrt`,
//! `exp`, `log`, trig and hyperbolic functions, constants `pi`, `e`, `i`).

use crate::chardata::{Block, DecompositionData, Rotation, Variant};
use crate::error::{Error, Result};
use crate::examples::{self, Ex1Variant, Example1Config, Example2Config, Example3Config};
use crate::expr::Expr;
use crate::family::ClosedFormFamily;
use crate::fluid::{self, FluidFamily, FluidParams};
use crate::pde::{CandidateSolution, SystemSpec, WaveVector, FD_STEP};
use crate::superpose::{DataFn, GridSpec, WaveDependence, WaveJacFn};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemId {
    Fluid,
    Example1,
    Example2,
    Example3,
    Custom,
}

impl std::str::FromStr for SystemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::Config(format!("unknown system `{s}` (fluid, example1, example2, example3, custom)")))
    }
}

impl SystemId {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemId::Fluid => "fluid",
            SystemId::Example1 => "example1",
            SystemId::Example2 => "example2",
            SystemId::Example3 => "example3",
            SystemId::Custom => "custom",
        }
    }

    /// Family ids accepted for this system; the first is the default.
    pub fn families(self) -> &'static [&'static str] {
        match self {
            SystemId::Fluid => &FluidFamily::IDS,
            SystemId::Example1 => &["sech", "cnoidal", "multisoliton"],
            SystemId::Example2 => &["curl"],
            SystemId::Example3 => &["loewner", "loewner-original"],
            SystemId::Custom => &["expr"],
        }
    }
}

/// A system Σ A^i(u) ∂u/∂x^i = b(u) given by expressions in the state
/// variables (default names u1..uq).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSystem {
    #[serde(default = "custom_name")]
    pub name: String,
    pub p: usize,
    pub q: usize,
    pub m: usize,
    #[serde(default)]
    pub vars: Option<Vec<String>>,
    /// p matrices, each m rows of q entries.
    pub coeffs: Vec<Vec<Vec<String>>>,
    pub source: Vec<String>,
    /// Each expression must be positive for the state to be admissible.
    #[serde(default)]
    pub admissible: Vec<String>,
}

fn custom_name() -> String {
    "custom".into()
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn parse_in(src: &str, vars: &[&str], what: &str) -> Result<Expr> {
    Expr::parse(src, vars).map_err(|e| match e {
        Error::Parse { pos, msg } => Error::Parse { pos, msg: format!("{what} `{src}`: {msg}") },
        other => other,
    })
}

impl CustomSystem {
    pub fn var_names(&self) -> Vec<String> {
        self.vars.clone().unwrap_or_else(|| default_names("u", self.q))
    }

    pub fn compile(&self) -> Result<SystemSpec> {
        let names = self.var_names();
        if names.len() != self.q {
            return Err(Error::Config(format!("{} variable names for q = {}", names.len(), self.q)));
        }
        let vars: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        if self.coeffs.len() != self.p {
            return Err(Error::Config(format!("{} coefficient matrices for p = {}", self.coeffs.len(), self.p)));
        }
        let mut mats = Vec::with_capacity(self.p);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.len() != self.m || a.iter().any(|row| row.len() != self.q) {
                return Err(Error::Config(format!("coefficient matrix {} must be {}×{}", i + 1, self.m, self.q)));
            }
            let rows = a
                .iter()
                .flatten()
                .map(|s| parse_in(s, &vars, &format!("coefficient {}", i + 1)))
                .collect::<Result<Vec<_>>>()?;
            mats.push(rows);
        }
        if self.source.len() != self.m {
            return Err(Error::Config(format!("source has {} entries, m = {}", self.source.len(), self.m)));
        }
        let src = self.source.iter().map(|s| parse_in(s, &vars, "source")).collect::<Result<Vec<_>>>()?;
        let adm = self.admissible.iter().map(|s| parse_in(s, &vars, "admissible")).collect::<Result<Vec<_>>>()?;
        let (m, q) = (self.m, self.q);
        SystemSpec::new(
            self.name.clone(),
            self.p,
            q,
            m,
            move |u| mats.iter().map(|a| DMatrix::from_row_iterator(m, q, a.iter().map(|e| e.eval_re(u)))).collect(),
            move |u| DVector::from_iterator(m, src.iter().map(|e| e.eval_re(u))),
            move |u| adm.iter().all(|e| e.eval_re(u) > 0.0),
        )
    }
}

/// A candidate solution of a custom system given by expressions in
/// x1..xp, with real wave vectors (expressions in x1..xp) for span_check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomFamily {
    pub solution: Vec<String>,
    #[serde(default)]
    pub waves: Vec<Vec<String>>,
}

/// A custom system inline, or the path of a JSON file holding one
/// (relative to the config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Inline(T),
    File(String),
}

impl<T: serde::de::DeserializeOwned + Clone> Source<T> {
    pub fn load(&self, base: Option<&Path>) -> Result<T> {
        match self {
            Source::Inline(t) => Ok(t.clone()),
            Source::File(p) => {
                let path = resolve(base, p);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
        }
    }
}

fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    match base {
        Some(b) if path.is_relative() => b.join(path),
        _ => path,
    }
}

/// Input of the `dispersion` and `elements` commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    /// State u.
    pub state: Vec<f64>,
    /// Spatial direction (dispersion) or full wave vector λ (elements).
    pub direction: Vec<f64>,
    /// Fluid element kind (E, A, E0, A0, H0); other systems use nullspaces.
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub options: Option<fluid::ElementOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperposeConfig {
    pub decomposition: Source<DecompositionSpec>,
    pub grid: GridSpec,
    /// f at the `lo` corner of the grid.
    pub f0: Vec<f64>,
    /// Probe box over (x, u) for the algebraic and well-definedness checks.
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub u_lo: Vec<f64>,
    pub u_hi: Vec<f64>,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

fn default_probes() -> usize {
    16
}

/// One run of the harness. Command-line flags override these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemId,
    #[serde(default)]
    pub family: Option<String>,
    /// Family (or, without a family, fluid system) parameters.
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub custom: Option<Source<CustomSystem>>,
    #[serde(default)]
    pub custom_family: Option<CustomFamily>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Sampling box (defaults to the family's box).
    #[serde(default)]
    pub lo: Option<Vec<f64>>,
    #[serde(default)]
    pub hi: Option<Vec<f64>>,
    /// Residual tolerance (defaults to the family's).
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default = "default_fd")]
    pub fd_step: f64,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub negative_control: bool,
    #[serde(default)]
    pub point: Option<PointConfig>,
    #[serde(default)]
    pub superpose: Option<SuperposeConfig>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_n() -> usize {
    200
}

fn default_fd() -> f64 {
    FD_STEP
}

impl RunConfig {
    pub fn new(system: SystemId) -> Self {
        Self {
            system,
            family: None,
            params: serde_json::Value::Null,
            custom: None,
            custom_family: None,
            n: default_n(),
            seed: None,
            lo: None,
            hi: None,
            tol: None,
            fd_step: default_fd(),
            out: None,
            negative_control: false,
            point: None,
            superpose: None,
            base_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(|p| p.to_path_buf());
        Ok(cfg)
    }

    /// Seed present, tolerances positive, sizes non-zero.
    pub fn validate(&self) -> Result<u64> {
        let seed = self.seed.ok_or_else(|| Error::Config("a seed is required (config `seed` or --seed)".into()))?;
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::Config(format!("fd_step must be positive, got {}", self.fd_step)));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tol must be positive, got {t}")));
            }
        }
        if let Some(f) = &self.family {
            if !self.system.families().contains(&f.as_str()) {
                return Err(Error::Config(format!(
                    "unknown family `{f}` for system {} ({})",
                    self.system.as_str(),
                    self.system.families().join(", ")
                )));
            }
        }
        Ok(seed)
    }

    pub fn family_id(&self) -> &str {
        self.family.as_deref().unwrap_or(self.system.families()[0])
    }

    fn params_as<T: serde::de::DeserializeOwned + Default>(&self, what: &str) -> Result<T> {
        if self.params.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(self.params.clone()).map_err(|e| Error::Config(format!("{what} parameters: {e}")))
    }

    fn example1(&self) -> Result<Example1Config> {
        let mut c: Example1Config = self.params_as("example1")?;
        if self.family.is_some() || c.variant != Ex1Variant::Custom {
            c.variant = match self.family_id() {
                "cnoidal" => Ex1Variant::Cnoidal,
                "multisoliton" => Ex1Variant::Multisoliton,
                _ => Ex1Variant::Sech,
            };
        }
        Ok(c)
    }

    fn fluid_params(&self) -> Result<FluidParams> {
        #[derive(Deserialize)]
        #[serde(default)]
        struct P {
            kappa: f64,
            g: [f64; 3],
            omega: [f64; 3],
        }
        impl Default for P {
            fn default() -> Self {
                P { kappa: 1.4, g: [0.0; 3], omega: [0.0; 3] }
            }
        }
        let p: P = if self.params.is_null() {
            P::default()
        } else {
            let mut obj = self.params.clone();
            if let Some(m) = obj.as_object_mut() {
                m.retain(|k, _| matches!(k.as_str(), "kappa" | "g" | "omega"));
            }
            serde_json::from_value(obj).map_err(|e| Error::Config(format!("fluid parameters: {e}")))?
        };
        let fp = FluidParams { kappa: p.kappa, g: p.g, omega: p.omega };
        fp.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(fp)
    }

    fn custom_system(&self) -> Result<CustomSystem> {
        self.custom
            .as_ref()
            .ok_or_else(|| Error::Config("system `custom` needs a `custom` entry (inline or file path)".into()))?
            .load(self.base_dir.as_deref())
    }

    /// The selected system (for dispersion, elements and superpose).
    pub fn build_system(&self) -> Result<SystemSpec> {
        match self.system {
            SystemId::Fluid => fluid::fluid_system(&self.fluid_params()?),
            SystemId::Example1 => examples::example1_system(&self.example1()?),
            SystemId::Example2 => examples::example2_system(&self.params_as::<Example2Config>("example2")?),
            SystemId::Example3 => {
                let (t, o) = examples::example3_systems(&self.params_as::<Example3Config>("example3")?)?;
                Ok(if self.family_id() == "loewner-original" { o } else { t })
            }
            SystemId::Custom => self.custom_system()?.compile(),
        }
    }

    /// The selected family with any sampling-box override applied.
    pub fn build_family(&self) -> Result<ClosedFormFamily> {
        let mut fam = match self.system {
            SystemId::Fluid => fluid::fluid_family(&FluidFamily::from_json(self.family_id(), &self.params)?)?,
            SystemId::Example1 => {
                let c = self.example1()?;
                c.validate()?;
                examples::example1_family(&c)?
            }
            SystemId::Example2 => examples::example2_family(&self.params_as("example2")?)?,
            SystemId::Example3 => {
                let c: Example3Config = self.params_as("example3")?;
                if self.family_id() == "loewner-original" {
                    examples::example3_original_family(&c)?
                } else {
                    examples::example3_family(&c)?
                }
            }
            SystemId::Custom => self.custom_family()?,
        };
        if let (Some(lo), Some(hi)) = (&self.lo, &self.hi) {
            if lo.len() != fam.system.p || hi.len() != fam.system.p || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                return Err(Error::Config(format!("sampling box must be {} pairs with lo < hi", fam.system.p)));
            }
            fam.lo = lo.clone();
            fam.hi = hi.clone();
        }
        if let Some(t) = self.tol {
            fam.tol = t;
        }
        Ok(fam)
    }

    fn custom_family(&self) -> Result<ClosedFormFamily> {
        let sys = self.custom_system()?.compile()?;
        let cf = self
            .custom_family
            .as_ref()
            .ok_or_else(|| Error::Config("custom system needs `custom_family` with a solution".into()))?;
        let (lo, hi) = match (&self.lo, &self.hi) {
            (Some(l), Some(h)) => (l.clone(), h.clone()),
            _ => return Err(Error::Config("custom family needs a sampling box `lo`/`hi`".into())),
        };
        let xs = default_names("x", sys.p);
        let vars: Vec<&str> = xs.iter().map(|s| s.as_str()).collect();
        if cf.solution.len() != sys.q {
            return Err(Error::Config(format!("solution has {} components, q = {}", cf.solution.len(), sys.q)));
        }
        let sol = cf.solution.iter().map(|s| parse_in(s, &vars, "solution")).collect::<Result<Vec<_>>>()?;
        let waves = cf
            .waves
            .iter()
            .map(|w| {
                if w.len() != sys.p {
                    return Err(Error::Config(format!("wave vectors need {} components", sys.p)));
                }
                w.iter().map(|s| parse_in(s, &vars, "wave")).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let q = sys.q;
        let cand = CandidateSolution::new(sys.p, q, move |x| Ok(DVector::from_iterator(q, sol.iter().map(|e| e.eval_re(x)))));
        let p = sys.p;
        Ok(ClosedFormFamily::new("expr", sys, cand, &lo, &hi, self.tol.unwrap_or(1e-6), move |x| {
            if waves.is_empty() {
                // no waves given: span_check against the full space
                return Ok((0..p).map(|i| WaveVector::real(&DVector::from_fn(p, |j, _| if i == j { 1.0 } else { 0.0 }).as_slice())).collect());
            }
            Ok(waves.iter().map(|w| WaveVector::real(&w.iter().map(|e| e.eval_re(x)).collect::<Vec<_>>())).collect())
        }))
    }
}

/// One block of a decomposition spec. Waves are expressions in u1..uq;
/// Ω, L, τ (and the sheets of underdetermined variants) may also use
/// b1..bm and x1..xp. Omitted Ω means 0, omitted L the identity, omitted τ
/// zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub wave: Vec<String>,
    #[serde(default)]
    pub complex: bool,
    #[serde(default)]
    pub omega: Option<String>,
    #[serde(default)]
    pub l: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub sheets: Option<Vec<SheetSpec>>,
    #[serde(default)]
    pub tau: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheetSpec {
    pub omega: String,
    pub l: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSpec {
    pub variant: Variant,
    pub blocks: Vec<BlockSpec>,
}

struct CompiledBlock {
    wave: Vec<Expr>,
    dwave: Vec<Vec<Expr>>,
    complex: bool,
    rotation: CompiledRotation,
    tau: Option<Vec<Expr>>,
}

enum CompiledRotation {
    Determined { omega: Option<Expr>, l: Option<Vec<Expr>> },
    Sheets(Vec<(Expr, Vec<Expr>)>),
}

impl DecompositionSpec {
    /// Evaluators of the decomposition data and of the wave derivatives.
    pub fn compile(&self, sys: &SystemSpec) -> Result<(Arc<DataFn>, WaveDependence)> {
        let (p, q, m) = (sys.p, sys.q, sys.m);
        let un = default_names("u", q);
        let all: Vec<String> = un.iter().cloned().chain(default_names("b", m)).chain(default_names("x", p)).collect();
        let uv: Vec<&str> = un.iter().map(|s| s.as_str()).collect();
        let av: Vec<&str> = all.iter().map(|s| s.as_str()).collect();
        let square = |rows: &Vec<Vec<String>>, what: &str| -> Result<Vec<Expr>> {
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(Error::Config(format!("{what} must be {m}×{m}")));
            }
            rows.iter().flatten().map(|s| parse_in(s, &av, what)).collect()
        };
        if self.blocks.is_empty() {
            return Err(Error::Config("decomposition needs at least one block".into()));
        }
        let under = matches!(self.variant, Variant::UnderdeterminedWave | Variant::UnderdeterminedMode);
        let mut blocks = Vec::new();
        for (a, b) in self.blocks.iter().enumerate() {
            let tag = format!("block {}", a + 1);
            if b.wave.len() != p {
                return Err(Error::Config(format!("{tag}: wave needs {p} components")));
            }
            let wave = b.wave.iter().map(|s| parse_in(s, &uv, &format!("{tag} wave"))).collect::<Result<Vec<_>>>()?;
            let dwave = wave.iter().map(|e| (0..q).map(|k| e.diff(k)).collect()).collect();
            let rotation = if under {
                let sheets = b.sheets.as_ref().ok_or_else(|| Error::Config(format!("{tag}: underdetermined variants need `sheets`")))?;
                if sheets.len() != q {
                    return Err(Error::Config(format!("{tag}: need q = {q} sheets, got {}", sheets.len())));
                }
                CompiledRotation::Sheets(
                    sheets
                        .iter()
                        .map(|s| Ok((parse_in(&s.omega, &av, &format!("{tag} sheet omega"))?, square(&s.l, &format!("{tag} sheet l"))?)))
                        .collect::<Result<Vec<_>>>()?,
                )
            } else {
                if b.sheets.is_some() {
                    return Err(Error::Config(format!("{tag}: `sheets` only apply to underdetermined variants")));
                }
                if m != q {
                    return Err(Error::Config(format!("{tag}: determined variants need m = q")));
                }
                CompiledRotation::Determined {
                    omega: b.omega.as_ref().map(|s| parse_in(s, &av, &format!("{tag} omega"))).transpose()?,
                    l: b.l.as_ref().map(|l| square(l, &format!("{tag} l"))).transpose()?,
                }
            };
            let tau = match &b.tau {
                None => None,
                Some(t) if t.len() == q => Some(t.iter().map(|s| parse_in(s, &av, &format!("{tag} tau"))).collect::<Result<Vec<_>>>()?),
                Some(t) => return Err(Error::Config(format!("{tag}: tau needs {q} components, got {}", t.len()))),
            };
            blocks.push(CompiledBlock { wave, dwave, complex: b.complex, rotation, tau });
        }
        let constant = blocks.iter().all(|b| b.wave.iter().all(|e| e.is_constant()));
        let blocks = Arc::new(blocks);
        let variant = self.variant;
        let sys2 = sys.clone();
        let bl = blocks.clone();
        let data: Arc<DataFn> = Arc::new(move |x, u| {
            if x.len() != p || u.len() != q {
                return Err(Error::Input("decomposition evaluated at a point of the wrong dimension".into()));
            }
            let b = sys2.source(u)?;
            let cu: Vec<Complex64> = u.iter().map(|v| Complex64::new(*v, 0.0)).collect();
            let vals: Vec<Complex64> = u.iter().chain(b.iter()).chain(x).map(|v| Complex64::new(*v, 0.0)).collect();
            let ev = |e: &Expr| -> Result<Complex64> {
                let z = e.eval(&vals);
                if z.re.is_finite() && z.im.is_finite() {
                    Ok(z)
                } else {
                    Err(Error::Evaluation(format!("non-finite decomposition entry at u = {u:?}")))
                }
            };
            let mut out = Vec::with_capacity(bl.len());
            for cb in bl.iter() {
                let comps: Vec<Complex64> = cb.wave.iter().map(|e| e.eval(&cu)).collect();
                let wave = if cb.complex {
                    WaveVector::complex(&comps)
                } else {
                    WaveVector::real(&comps.iter().map(|z| z.re).collect::<Vec<_>>())
                };
                let rotation = match &cb.rotation {
                    CompiledRotation::Determined { omega, l } => Rotation::Determined {
                        omega: omega.as_ref().map(ev).transpose()?.unwrap_or(Complex64::new(0.0, 0.0)),
                        l: match l {
                            Some(l) => DMatrix::from_row_iterator(m, m, l.iter().map(ev).collect::<Result<Vec<_>>>()?),
                            None => DMatrix::identity(m, m),
                        },
                    },
                    CompiledRotation::Sheets(s) => {
                        let omegas = s.iter().map(|(o, _)| ev(o)).collect::<Result<Vec<_>>>()?;
                        let ls = s
                            .iter()
                            .map(|(_, l)| Ok(DMatrix::from_row_iterator(m, m, l.iter().map(ev).collect::<Result<Vec<_>>>()?)))
                            .collect::<Result<Vec<_>>>()?;
                        Rotation::from_sheets(&omegas, ls)?
                    }
                };
                let tau = match &cb.tau {
                    Some(t) => DVector::from_vec(t.iter().map(ev).collect::<Result<Vec<_>>>()?),
                    None => DVector::zeros(q),
                };
                out.push(Block { wave, rotation, tau });
            }
            Ok(DecompositionData { variant, blocks: out })
        });
        let waves = if constant {
            WaveDependence::Constant
        } else {
            let jac: Arc<WaveJacFn> = Arc::new(move |u| {
                let cu: Vec<Complex64> = u.iter().map(|v| Complex64::new(*v, 0.0)).collect();
                Ok(blocks
                    .iter()
                    .map(|cb| DMatrix::from_fn(p, q, |i, k| cb.dwave[i][k].eval(&cu)))
                    .collect())
            });
            WaveDependence::Varying(jac)
        };
        Ok((data, waves))
    }
}

impl SuperposeConfig {
    /// Deterministic probe states from the (x, u) boxes.
    pub fn probes(&self, sys: &SystemSpec, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        if self.x_lo.len() != sys.p || self.x_hi.len() != sys.p || self.u_lo.len() != sys.q || self.u_hi.len() != sys.q {
            return Err(Error::Config("probe boxes have the wrong dimension".into()));
        }
        crate::superpose::probe_pairs(sys, (&self.x_lo, &self.x_hi), (&self.u_lo, &self.u_hi), self.probes.max(1), seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superpose::{build_reduced, integrate_reduced};

    fn ex1_spec() -> DecompositionSpec {
        serde_json::from_str(
            r#"{"variant": "multiwave",
                "blocks": [{"wave": ["1", "3", "3", "3"], "omega": "1/10"}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn system_ids_parse() {
        assert_eq!("example2".parse::<SystemId>().unwrap(), SystemId::Example2);
        assert!(matches!("nope".parse::<SystemId>(), Err(Error::Config(_))));
    }

    #[test]
    fn seed_is_required() {
        let mut c = RunConfig::new(SystemId::Example1);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.seed = Some(3);
        assert_eq!(c.validate().unwrap(), 3);
        c.family = Some("EE0a".into());
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.family = None;
        c.tol = Some(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn family_from_json_config() {
        let c = RunConfig::from_json(r#"{"system": "example1", "family": "cnoidal", "params": {"a": [1, 2, 0.5]}, "seed": 1}"#).unwrap();
        let fam = c.build_family().unwrap();
        assert_eq!(fam.system.name, "example1-cnoidal");
        let rep = fam.verify(20, 1, 1e-5).unwrap();
        assert!(rep.pass);
        assert!(RunConfig::from_json(r#"{"system": "example1", "bogus": 1}"#).is_err());
    }

    #[test]
    fn custom_system_and_family() {
        let c = RunConfig::from_json(
            r#"{"system": "custom", "seed": 1, "lo": [0, 0], "hi": [1, 1],
                "custom": {"p": 2, "q": 1, "m": 1, "coeffs": [[["1"]], [["u1"]]], "source": ["0"]},
                "custom_family": {"solution": ["x2 / (1 + x1)"], "waves": [["-x2/(1+x1)", "1"]]}}"#,
        )
        .unwrap();
        let fam = c.build_family().unwrap();
        let rep = fam.verify(50, 2, 1e-5).unwrap();
        assert!(rep.pass, "{}", rep.max_abs);
        assert!(fam.span_residual(&[0.5, 0.5], 1e-5).unwrap() < 1e-6);
        assert!(fam.negated().verify(50, 2, 1e-5).unwrap().pass, "b = 0: negation changes nothing");
    }

    #[test]
    fn parse_errors_keep_position() {
        let c = CustomSystem { name: "x".into(), p: 1, q: 1, m: 1, vars: None, coeffs: vec![vec![vec!["1 + * u1".into()]]], source: vec!["0".into()], admissible: vec![] };
        match c.compile() {
            Err(Error::Parse { pos, msg }) => {
                assert!(pos > 0 && msg.contains("coefficient 1"), "{pos} {msg}");
            }
            Err(e) => panic!("{e}"),
            Ok(_) => panic!("accepted"),
        }
    }

    #[test]
    fn decomposition_spec_drives_reduced_system() {
        let cfg = Example1Config::default();
        let sys = examples::example1_system(&cfg).unwrap();
        let (data, waves) = ex1_spec().compile(&sys).unwrap();
        assert!(matches!(waves, WaveDependence::Constant));
        let sc = SuperposeConfig {
            decomposition: Source::Inline(ex1_spec()),
            grid: GridSpec::new(&[0.0], &[10.0], &[101]),
            f0: vec![crate::special::sech(0.5); 3],
            x_lo: vec![-1.0; 4],
            x_hi: vec![1.0; 4],
            u_lo: vec![0.0; 3],
            u_hi: vec![0.99; 3],
            probes: 8,
        };
        let probes = sc.probes(&sys, 1).unwrap();
        let rs = build_reduced(&sys, data, waves, &probes).unwrap();
        let t = integrate_reduced(&rs, &sc.f0, &sc.grid).unwrap();
        for (j, r) in t.axes[0].iter().enumerate() {
            assert!((t.values[j][0] - crate::special::sech(0.5 + r / 10.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn varying_waves_get_symbolic_derivatives() {
        let sys = CustomSystem {
            name: "decay".into(),
            p: 2,
            q: 1,
            m: 1,
            vars: None,
            coeffs: vec![vec![vec!["1".into()]], vec![vec!["0".into()]]],
            source: vec!["-u1".into()],
            admissible: vec![],
        }
        .compile()
        .unwrap();
        let spec: DecompositionSpec = serde_json::from_str(
            r#"{"variant": "multiwave", "blocks": [{"wave": ["1 + u1^2/2", "0"], "omega": "1/(1 + u1^2/2)"}]}"#,
        )
        .unwrap();
        let (_, waves) = spec.compile(&sys).unwrap();
        let WaveDependence::Varying(j) = waves else { panic!("constant") };
        let d = j(&[0.7]).unwrap();
        assert!((d[0][(0, 0)].re - 0.7).abs() < 1e-15 && d[0][(1, 0)].norm() == 0.0);
    }

    #[test]
    fn complex_entries_and_shape_errors() {
        let cfg = Example1Config::default();
        let sys = examples::example1_system(&cfg).unwrap();
        let spec: DecompositionSpec = serde_json::from_str(
            r#"{"variant": "multimode", "blocks": [{"wave": ["1", "i", "i", "i"], "complex": true, "omega": "(1 - 3*i)/20",
                "tau": ["0", "0", "x1"]}]}"#,
        )
        .unwrap();
        let (data, _) = spec.compile(&sys).unwrap();
        let d = data(&[2.0, 0.0, 0.0, 0.0], &[0.1, 0.2, 0.3]).unwrap();
        assert!(d.blocks[0].wave.complex);
        assert_eq!(d.blocks[0].tau[2], Complex64::new(2.0, 0.0));
        let Rotation::Determined { omega, .. } = d.blocks[0].rotation else { panic!() };
        assert!((omega - Complex64::new(0.05, -0.15)).norm() < 1e-15);
        let bad: DecompositionSpec = serde_json::from_str(r#"{"variant": "multiwave", "blocks": [{"wave": ["1", "3"]}]}"#).unwrap();
        assert!(matches!(bad.compile(&sys), Err(Error::Config(_))));
    }
}
