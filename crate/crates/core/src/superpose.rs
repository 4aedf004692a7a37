//! Reduced systems for the Riemann-invariant functions f(r) built from
//! decomposition data, their integration into solution tables, and lifting
//! back to physical space.
//!
//! For every invariant column c (a real wave contributes one, a complex wave
//! contributes r and r̄) let R_c = Ω_c L_c b + τ_c (resp. P_c b + τ_c) and
//! D_c = x^i ∂λ^c_i/∂u. The relations Φ⁻¹ ∂f/∂r^c = R_c with
//! Φ = I − Σ_c ∂f/∂r^c D_c solve to
//!
//! ```text
//! ∂f/∂r = R (I_K + D R)⁻¹
//! ```
//!
//! which covers the real, complex, mixed and underdetermined cases alike
//! (the conjugate columns use conj(Ω) conj(L)). Complex invariants are
//! integrated in real coordinates s = Re r, t = Im r, where ∂f/∂s = F_r + F_r̄
//! and ∂f/∂t = i(F_r − F_r̄).

use crate::chardata::{self, DecompositionData, ElementKind, IntegralElement, Variant};
use crate::error::{Error, Result};
use crate::linalg;
use crate::newton::{self, NewtonOptions};
use crate::ode;
use crate::pde::{self, CandidateSolution, ResidualReport, Sampler, SystemSpec};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

/// Largest integration step.
pub const MAX_STEP: f64 = 1e-3;
/// Rotation condition and wave relation on probe states.
pub const CHECK_TOL: f64 = 1e-8;
/// ‖LᵀL − I‖ and |det L − 1|.
pub const SO_TOL: f64 = 1e-10;
pub const WELLDEFINED_TOL: f64 = 1e-6;
/// Cross-derivative defect above which a table is marked non-integrable.
pub const DEFECT_TOL: f64 = 1e-4;
pub const LIFT_TOL: f64 = 1e-10;
pub const SIMPLE_STATE_TOL: f64 = 1e-5;
/// Direction-constancy tolerance for simple states.
pub const CONSTANCY_TOL: f64 = 1e-6;
const SINGULAR_INV_COND: f64 = 1e-12;
const DEFECT_STEP: f64 = 1e-6;

/// Outcome of a check. The well-definedness conditions are sufficient, not
/// necessary, so their violation gives `Unverified` rather than `Fail`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Unverified,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Unverified => 3,
        }
    }

    /// The worse of the two (Fail > Unverified > Pass).
    pub fn and(self, other: Status) -> Status {
        use Status::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Unverified, _) | (_, Unverified) => Unverified,
            _ => Pass,
        }
    }
}

/// Decomposition data as a function of (x, u).
pub type DataFn = dyn Fn(&[f64], &[f64]) -> Result<DecompositionData> + Send + Sync;
/// Per block, the p×q matrix ∂λ_i/∂u^α.
pub type WaveJacFn = dyn Fn(&[f64]) -> Result<Vec<DMatrix<Complex64>>> + Send + Sync;
type DirectFn = dyn Fn(&[f64], &[f64]) -> Result<DMatrix<f64>> + Send + Sync;

#[derive(Clone)]
pub enum WaveDependence {
    Constant,
    Varying(Arc<WaveJacFn>),
}

/// Worst algebraic-condition residuals over the probe states.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Certificate {
    pub probes: usize,
    pub rotation_residual: f64,
    pub wave_residual: f64,
    pub so_orthogonality: f64,
    pub so_determinant: f64,
}

impl Certificate {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.so_orthogonality <= SO_TOL && self.so_determinant <= SO_TOL) {
            out.push(format!(
                "rotation matrices not in SO: ‖LᵀL − I‖ = {:.3e}, |det L − 1| = {:.3e}",
                self.so_orthogonality, self.so_determinant
            ));
        }
        if !(self.rotation_residual <= CHECK_TOL) {
            out.push(format!("rotation condition residual {:.3e} > {CHECK_TOL:e}", self.rotation_residual));
        }
        if !(self.wave_residual <= CHECK_TOL) {
            out.push(format!("wave relation residual {:.3e} > {CHECK_TOL:e}", self.wave_residual));
        }
        out
    }

    pub fn status(&self) -> Status {
        if self.failures().is_empty() {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

fn tau_elements(d: &DecompositionData) -> Vec<IntegralElement> {
    d.blocks
        .iter()
        .map(|b| IntegralElement {
            lambda: b.wave.clone(),
            gamma: b.tau.clone(),
            kind: ElementKind::Homogeneous,
            label: String::new(),
        })
        .collect()
}

/// Rotation condition, wave relation and SO membership at every probe (x, u).
pub fn certify(sys: &SystemSpec, data: &DataFn, probes: &[(Vec<f64>, Vec<f64>)]) -> Result<Certificate> {
    let mut c = Certificate { probes: probes.len(), ..Default::default() };
    for (x, u) in probes {
        let d = data(x, u)?;
        c.rotation_residual = c.rotation_residual.max(chardata::check_rotation_condition(sys, u, &d)?);
        c.wave_residual = c.wave_residual.max(chardata::check_wave_relation(sys, u, &tau_elements(&d))?);
        let (o, det) = d.rotation_errors();
        c.so_orthogonality = c.so_orthogonality.max(o);
        c.so_determinant = c.so_determinant.max(det);
    }
    Ok(c)
}

#[derive(Clone)]
enum RhsSource {
    Data { sys: SystemSpec, data: Arc<DataFn>, waves: WaveDependence },
    Direct(Arc<DirectFn>),
}

/// The reduced system ∂f/∂r = F(r, f) in real invariant coordinates.
#[derive(Clone)]
pub struct ReducedSystem {
    pub q: usize,
    /// Number of blocks k.
    pub k: usize,
    /// Number of real invariant coordinates (k plus the complex blocks).
    pub n: usize,
    pub variant: Variant,
    pub labels: Vec<String>,
    pub certificate: Option<Certificate>,
    source: RhsSource,
}

/// ∂f/∂r over the complex invariant columns at one (x, u).
#[derive(Debug, Clone)]
pub struct ComplexRhs {
    /// q×K, columns ordered block by block (r, then r̄ for complex blocks).
    pub f: DMatrix<Complex64>,
    /// The R_c columns.
    pub r: DMatrix<Complex64>,
    /// Inverse condition number of I_K + D R.
    pub inv_cond: f64,
    pub complex: Vec<bool>,
}

fn labels_for(d: &DecompositionData) -> Vec<String> {
    let mut out = Vec::new();
    for (a, b) in d.blocks.iter().enumerate() {
        if b.wave.complex {
            out.push(format!("r{}_re", a + 1));
            out.push(format!("r{}_im", a + 1));
        } else {
            out.push(format!("r{}", a + 1));
        }
    }
    out
}

/// Columns of a K-column complex matrix folded into real coordinates.
fn fold_real(m: &DMatrix<Complex64>, complex: &[bool]) -> (DMatrix<f64>, f64) {
    let mut cols = Vec::new();
    let mut imag: f64 = 0.0;
    let mut c = 0;
    for &cx in complex {
        if cx {
            let (a, b) = (m.column(c), m.column(c + 1));
            let s = a + b;
            let t = (a - b) * Complex64::i();
            imag = imag.max(s.iter().chain(t.iter()).map(|z| z.im.abs()).fold(0.0, f64::max));
            cols.push(s.map(|z| z.re));
            cols.push(t.map(|z| z.re));
            c += 2;
        } else {
            let a = m.column(c);
            imag = imag.max(a.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
            cols.push(a.map(|z| z.re));
            c += 1;
        }
    }
    (DMatrix::from_columns(&cols), imag)
}

impl ReducedSystem {
    /// A reduced system given directly as F(r, f) (q×n).
    pub fn direct(
        q: usize,
        n: usize,
        rhs: impl Fn(&[f64], &[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            q,
            k: n,
            n,
            variant: Variant::Multiwave,
            labels: (1..=n).map(|a| format!("r{a}")).collect(),
            certificate: None,
            source: RhsSource::Direct(Arc::new(rhs)),
        }
    }

    pub fn system(&self) -> Option<&SystemSpec> {
        match &self.source {
            RhsSource::Data { sys, .. } => Some(sys),
            RhsSource::Direct(_) => None,
        }
    }

    pub fn has_constant_waves(&self) -> bool {
        !matches!(&self.source, RhsSource::Data { waves: WaveDependence::Varying(_), .. })
    }

    pub fn data(&self, x: &[f64], u: &[f64]) -> Result<DecompositionData> {
        match &self.source {
            RhsSource::Data { data, .. } => data(x, u),
            RhsSource::Direct(_) => Err(Error::Input("reduced system given directly has no decomposition data".into())),
        }
    }

    pub fn rhs_complex(&self, x: &[f64], u: &[f64]) -> Result<ComplexRhs> {
        let RhsSource::Data { sys, data, waves } = &self.source else {
            return Err(Error::Input("reduced system given directly has no complex form".into()));
        };
        let d = data(x, u)?;
        d.validate(sys)?;
        if d.k() != self.k {
            return Err(Error::Input(format!("decomposition changed from {} to {} blocks", self.k, d.k())));
        }
        let b = linalg::to_complex_vec(&sys.source(u)?);
        let jac = match waves {
            WaveDependence::Constant => None,
            WaveDependence::Varying(j) => Some(j(u)?),
        };
        let xc = DVector::from_iterator(x.len(), x.iter().map(|v| Complex64::new(*v, 0.0)));
        let mut rcols = Vec::new();
        let mut drows = Vec::new();
        let mut complex = Vec::new();
        for (a, blk) in d.blocks.iter().enumerate() {
            let rc = blk.rotation.map() * &b + &blk.tau;
            let dr = match &jac {
                None => DVector::zeros(self.q),
                Some(j) => {
                    if j.len() != d.k() || j[a].shape() != (x.len(), self.q) {
                        return Err(Error::Input("wave derivative has the wrong shape".into()));
                    }
                    j[a].transpose() * &xc
                }
            };
            complex.push(blk.wave.complex);
            if blk.wave.complex {
                rcols.push(rc.clone());
                rcols.push(rc.conjugate());
                drows.push(dr.transpose());
                drows.push(dr.conjugate().transpose());
            } else {
                rcols.push(rc);
                drows.push(dr.transpose());
            }
        }
        let r = DMatrix::from_columns(&rcols);
        let dm = DMatrix::from_rows(&drows);
        let kk = rcols.len();
        let m = DMatrix::<Complex64>::identity(kk, kk) + &dm * &r;
        let sv = linalg::singular_values(&m);
        let inv_cond = match (sv.first(), sv.last()) {
            (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
            _ => 0.0,
        };
        if !(inv_cond > SINGULAR_INV_COND) {
            return Err(Error::Singular {
                msg: "I + (∂r/∂u)(𝓛b + τ) is singular".into(),
                inv_cond,
            });
        }
        let minv = m.try_inverse().ok_or_else(|| Error::Singular { msg: "I + (∂r/∂u)(𝓛b + τ) is singular".into(), inv_cond })?;
        Ok(ComplexRhs { f: &r * minv, r, inv_cond, complex })
    }

    /// ∂f/∂r in real coordinates (q×n) at (x, u).
    pub fn rhs(&self, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
        let c = self.rhs_complex(x, u)?;
        Ok(fold_real(&c.f, &c.complex).0)
    }

    /// Largest imaginary part left after folding conjugate columns — zero
    /// when the r̄ columns are the conjugates of the r columns.
    pub fn conjugation_defect(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        let c = self.rhs_complex(x, u)?;
        Ok(fold_real(&c.f, &c.complex).1)
    }

    /// Real wave rows (n×p): λ for real blocks, Re λ and Im λ for complex ones.
    pub fn wave_rows(&self, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.data(x, u)?;
        pde::wave_matrix(&d.waves())
    }

    /// ∂u/∂x = Σ_c ∂f/∂r^c λ^c at (x, u) (real: F_real · W).
    pub fn physical_jacobian(&self, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.rhs(x, u)? * self.wave_rows(x, u)?)
    }

    /// Real invariant coordinates Λ(u)x.
    pub fn invariants(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let w = self.wave_rows(x, u)?;
        Ok((w * DVector::from_column_slice(x)).iter().cloned().collect())
    }

    /// F(r, f), with x the minimum-norm solution of Λ(f)x = r.
    pub fn rhs_at(&self, r: &[f64], f: &[f64]) -> Result<DMatrix<f64>> {
        match &self.source {
            RhsSource::Direct(g) => {
                let m = g(r, f)?;
                if m.shape() != (self.q, self.n) {
                    return Err(Error::Input(format!("reduced rhs shape {:?}, expected {:?}", m.shape(), (self.q, self.n))));
                }
                Ok(m)
            }
            RhsSource::Data { sys, .. } => {
                let zero = vec![0.0; sys.p];
                let w = self.wave_rows(&zero, f)?;
                let (x, _) = linalg::lstsq_min_norm(&w, &DVector::from_column_slice(r), 1e-12);
                self.rhs(x.as_slice(), f)
            }
        }
    }
}

/// Assemble the reduced system after certifying the data on the probes.
pub fn build_reduced(
    sys: &SystemSpec,
    data: Arc<DataFn>,
    waves: WaveDependence,
    probes: &[(Vec<f64>, Vec<f64>)],
) -> Result<ReducedSystem> {
    let Some((x0, u0)) = probes.first() else {
        return Err(Error::Input("build_reduced needs at least one probe state".into()));
    };
    let d0 = data(x0, u0)?;
    d0.validate(sys)?;
    let cert = certify(sys, data.as_ref(), probes)?;
    let fails = cert.failures();
    if !fails.is_empty() {
        return Err(Error::Constraint(fails.join("; ")));
    }
    let rs = ReducedSystem {
        q: sys.q,
        k: d0.k(),
        n: d0.waves().iter().map(|w| if w.complex { 2 } else { 1 }).sum(),
        variant: d0.variant,
        labels: labels_for(&d0),
        certificate: Some(cert),
        source: RhsSource::Data { sys: sys.clone(), data, waves },
    };
    for (x, u) in probes {
        rs.rhs_complex(x, u)?;
    }
    Ok(rs)
}

/// Deterministic probe pairs (x, u) from one box each, skipping states the
/// system does not admit.
pub fn probe_pairs(
    sys: &SystemSpec,
    x_box: (&[f64], &[f64]),
    u_box: (&[f64], &[f64]),
    n: usize,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let lo: Vec<f64> = x_box.0.iter().chain(u_box.0).cloned().collect();
    let hi: Vec<f64> = x_box.1.iter().chain(u_box.1).cloned().collect();
    let s = Sampler::new(&lo, &hi, seed);
    let p = x_box.0.len();
    let mut out = Vec::new();
    for i in 0..(50 * n as u64).max(100) {
        if out.len() == n {
            break;
        }
        let z = s.point(i);
        let (x, u) = z.split_at(p);
        if sys.is_admissible(u) {
            out.push((x.to_vec(), u.to_vec()));
        }
    }
    if out.len() < n {
        return Err(Error::Sampling(format!("only {} of {n} admissible probe states", out.len())));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WellDefinedness {
    /// max |X_a · rhs| over probes and directions.
    pub max: f64,
    /// No direction orthogonal to the waves exists (k = p): nothing to check.
    pub vacuous: bool,
    pub status: Status,
}

/// Directional derivatives of the reduced rhs along every x-direction
/// annihilated by the waves.
pub fn welldefined_check(rs: &ReducedSystem, probes: &[(Vec<f64>, Vec<f64>)], h: f64) -> Result<WellDefinedness> {
    if matches!(rs.source, RhsSource::Direct(_)) {
        return Ok(WellDefinedness { max: 0.0, vacuous: true, status: Status::Pass });
    }
    let mut max: f64 = 0.0;
    let mut any = false;
    for (x, u) in probes {
        let w = rs.wave_rows(x, u)?;
        let xi = linalg::nullspace(&w, 1e-10);
        for col in xi.column_iter() {
            any = true;
            let xp: Vec<f64> = x.iter().zip(col.iter()).map(|(a, d)| a + h * d).collect();
            let xm: Vec<f64> = x.iter().zip(col.iter()).map(|(a, d)| a - h * d).collect();
            let dd = (rs.rhs(&xp, u)? - rs.rhs(&xm, u)?) / (2.0 * h);
            max = max.max(dd.amax());
        }
    }
    let status = if !any || max <= WELLDEFINED_TOL { Status::Pass } else { Status::Unverified };
    Ok(WellDefinedness { max, vacuous: !any, status })
}

/// Tensor grid over the real invariant coordinates. The initial value is
/// prescribed at the `lo` corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub nodes: Vec<usize>,
    #[serde(default = "default_step")]
    pub max_step: f64,
}

fn default_step() -> f64 {
    MAX_STEP
}

impl GridSpec {
    pub fn new(lo: &[f64], hi: &[f64], nodes: &[usize]) -> Self {
        Self { lo: lo.to_vec(), hi: hi.to_vec(), nodes: nodes.to_vec(), max_step: MAX_STEP }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.lo.len() != n || self.hi.len() != n || self.nodes.len() != n {
            return Err(Error::Input(format!("grid has the wrong dimension (expected {n})")));
        }
        if self.nodes.iter().any(|k| *k < 2) {
            return Err(Error::Input("every grid axis needs at least 2 nodes".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Input("grid needs lo < hi on every axis".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Input("max_step must be positive".into()));
        }
        Ok(())
    }

    pub fn axes(&self) -> Vec<Vec<f64>> {
        (0..self.nodes.len())
            .map(|a| {
                let k = self.nodes[a];
                (0..k).map(|j| self.lo[a] + (self.hi[a] - self.lo[a]) * j as f64 / (k - 1) as f64).collect()
            })
            .collect()
    }
}

/// f at the nodes of a tensor grid (axis 0 slowest).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionTable {
    pub labels: Vec<String>,
    pub axes: Vec<Vec<f64>>,
    pub q: usize,
    /// NaN where integration did not reach.
    pub values: Vec<Vec<f64>>,
    /// ∂f/∂r at the nodes of one-dimensional tables (cubic Hermite
    /// interpolation); multilinear interpolation otherwise.
    pub derivs: Option<Vec<Vec<f64>>>,
    pub defect: f64,
    pub integrable: bool,
    pub error: Option<String>,
}

impl SolutionTable {
    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        flat_index(&self.dims(), idx)
    }

    pub fn node(&self, idx: &[usize]) -> (Vec<f64>, &[f64]) {
        let r = idx.iter().enumerate().map(|(a, i)| self.axes[a][*i]).collect();
        (r, &self.values[self.flat(idx)])
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Interpolated f(r).
    pub fn eval(&self, r: &[f64]) -> Result<DVector<f64>> {
        if r.len() != self.axes.len() {
            return Err(Error::Input(format!("point of dimension {}, table has {}", r.len(), self.axes.len())));
        }
        let mut cell = Vec::with_capacity(r.len());
        for (a, ax) in self.axes.iter().enumerate() {
            let (lo, hi) = (ax[0], ax[ax.len() - 1]);
            let slack = 1e-12 * (hi - lo);
            if !(r[a] >= lo - slack && r[a] <= hi + slack) {
                return Err(Error::Domain(format!("r{} = {} outside the table [{lo}, {hi}]", a + 1, r[a])));
            }
            let h = (hi - lo) / (ax.len() - 1) as f64;
            let j = (((r[a] - lo) / h).floor().max(0.0) as usize).min(ax.len() - 2);
            cell.push((j, ((r[a] - ax[j]) / h).clamp(0.0, 1.0), h));
        }
        let out = if let (Some(d), 1) = (&self.derivs, r.len()) {
            let (j, s, h) = cell[0];
            let (y0, y1, d0, d1) = (&self.values[j], &self.values[j + 1], &d[j], &d[j + 1]);
            let (h00, h10, h01, h11) = (
                2.0 * s.powi(3) - 3.0 * s * s + 1.0,
                s.powi(3) - 2.0 * s * s + s,
                -2.0 * s.powi(3) + 3.0 * s * s,
                s.powi(3) - s * s,
            );
            DVector::from_fn(self.q, |i, _| h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i])
        } else {
            let n = r.len();
            let mut acc = DVector::zeros(self.q);
            for mask in 0..(1usize << n) {
                let mut w = 1.0;
                let idx: Vec<usize> = (0..n)
                    .map(|a| {
                        let (j, s, _) = cell[a];
                        if mask >> a & 1 == 1 {
                            w *= s;
                            j + 1
                        } else {
                            w *= 1.0 - s;
                            j
                        }
                    })
                    .collect();
                if w != 0.0 {
                    acc += DVector::from_column_slice(&self.values[self.flat(&idx)]) * w;
                }
            }
            acc
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("table has no value near r = {r:?}")));
        }
        Ok(out)
    }

    /// CSV: header of coordinate and component labels, one row per node,
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let mut head: Vec<String> = self.labels.clone();
        head.extend((1..=self.q).map(|i| format!("f{i}")));
        s.push_str(&head.join(","));
        s.push('\n');
        let dims = self.dims();
        for (flat, vals) in self.values.iter().enumerate() {
            let idx = unflat_index(&dims, flat);
            let row: Vec<String> = idx
                .iter()
                .enumerate()
                .map(|(a, i)| self.axes[a][*i])
                .chain(vals.iter().cloned())
                .map(fmt_sci)
                .collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn flat_index(dims: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (i, d)| acc * d + i)
}

fn unflat_index(dims: &[usize], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for a in (0..dims.len()).rev() {
        idx[a] = flat % dims[a];
        flat /= dims[a];
    }
    idx
}

/// Integrate the reduced system on a tensor grid: along r¹ from the `lo`
/// corner, then each further axis from the nodes already computed. Callers
/// should run [`welldefined_check`] first.
pub fn integrate_reduced(rs: &ReducedSystem, f0: &[f64], grid: &GridSpec) -> Result<SolutionTable> {
    grid.validate(rs.n)?;
    if f0.len() != rs.q {
        return Err(Error::Input(format!("initial value of length {}, expected {}", f0.len(), rs.q)));
    }
    if let Some(sys) = rs.system() {
        let w = rs.wave_rows(&vec![0.0; sys.p], f0)?;
        if linalg::rank(&w, 1e-10) < rs.n {
            return Err(Error::Rank(format!(
                "the {} real invariant coordinates are not independent functions of x",
                rs.n
            )));
        }
    }
    let axes = grid.axes();
    let dims = grid.nodes.clone();
    let total: usize = dims.iter().product();
    let mut values = vec![vec![f64::NAN; rs.q]; total];
    values[0] = f0.to_vec();
    let mut first_error: Option<String> = None;
    for axis in 0..rs.n {
        let starts: Vec<usize> = (0..total)
            .filter(|&fl| {
                let idx = unflat_index(&dims, fl);
                idx[axis] == 0 && idx[axis + 1..].iter().all(|i| *i == 0)
            })
            .collect();
        let lines: Vec<(Vec<(usize, Vec<f64>)>, Option<String>)> = starts
            .par_iter()
            .map(|&fl| integrate_line(rs, &axes, &dims, axis, fl, &values[fl], grid.max_step))
            .collect();
        for (pts, err) in lines {
            for (fl, v) in pts {
                values[fl] = v;
            }
            if first_error.is_none() {
                first_error = err;
            }
        }
    }
    let derivs = if rs.n == 1 {
        Some(
            values
                .iter()
                .enumerate()
                .map(|(j, v)| match rs.rhs_at(&[axes[0][j]], v) {
                    Ok(m) if v.iter().all(|x| x.is_finite()) => m.column(0).iter().cloned().collect(),
                    _ => vec![f64::NAN; rs.q],
                })
                .collect(),
        )
    } else {
        None
    };
    let mut table = SolutionTable {
        labels: rs.labels.clone(),
        axes,
        q: rs.q,
        values,
        derivs,
        defect: 0.0,
        integrable: true,
        error: first_error,
    };
    table.defect = cross_derivative_defect(rs, &table)?;
    table.integrable = table.error.is_none() && table.defect <= DEFECT_TOL;
    Ok(table)
}

fn integrate_line(
    rs: &ReducedSystem,
    axes: &[Vec<f64>],
    dims: &[usize],
    axis: usize,
    start: usize,
    f_start: &[f64],
    max_step: f64,
) -> (Vec<(usize, Vec<f64>)>, Option<String>) {
    let mut out = Vec::new();
    if f_start.iter().any(|v| !v.is_finite()) {
        return (out, None);
    }
    let mut idx = unflat_index(dims, start);
    let mut r: Vec<f64> = idx.iter().enumerate().map(|(a, i)| axes[a][*i]).collect();
    let mut f = f_start.to_vec();
    for j in 1..dims[axis] {
        let (t0, t1) = (axes[axis][j - 1], axes[axis][j]);
        let steps = ((t1 - t0) / max_step).ceil().max(1.0) as usize;
        let rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
            let mut rr = r.clone();
            rr[axis] = t;
            Ok(rs.rhs_at(&rr, y)?.column(axis).iter().cloned().collect())
        };
        match ode::rk4(&rhs, t0, t1, &f, steps) {
            Ok(y) => f = y,
            Err(e) => {
                let msg = format!("integration along {} stopped at {} = {t0}: {e}", rs.labels[axis], rs.labels[axis]);
                return (out, Some(msg));
            }
        }
        idx[axis] = j;
        r[axis] = t1;
        out.push((flat_index(dims, &idx), f.clone()));
    }
    (out, None)
}

/// max over nodes and pairs A < B of ‖d_B F_A − d_A F_B‖_∞, where d_B is the
/// derivative along the solution: d_B F_A = ∂F_A/∂r^B + (∂F_A/∂f) F_B,
/// by central differences of step 1e-6. Zero exactly when f_{AB} = f_{BA}
/// can hold (Frobenius condition); one-dimensional tables have no defect.
pub fn cross_derivative_defect(rs: &ReducedSystem, table: &SolutionTable) -> Result<f64> {
    if rs.n < 2 {
        return Ok(0.0);
    }
    let dims = table.dims();
    let h = DEFECT_STEP;
    let per_node: Vec<Result<f64>> = (0..table.values.len())
        .into_par_iter()
        .map(|fl| {
            let f = &table.values[fl];
            if f.iter().any(|v| !v.is_finite()) {
                return Ok(0.0);
            }
            let idx = unflat_index(&dims, fl);
            let r: Vec<f64> = idx.iter().enumerate().map(|(a, i)| table.axes[a][*i]).collect();
            let g = rs.rhs_at(&r, f)?;
            let along = |b: usize, s: f64| -> Result<DMatrix<f64>> {
                let mut rr = r.clone();
                rr[b] += s * h;
                let ff: Vec<f64> = f.iter().zip(g.column(b).iter()).map(|(v, d)| v + s * h * d).collect();
                rs.rhs_at(&rr, &ff)
            };
            let mut worst: f64 = 0.0;
            let mut deriv = Vec::with_capacity(rs.n);
            for b in 0..rs.n {
                deriv.push((along(b, 1.0)? - along(b, -1.0)?) / (2.0 * h));
            }
            for a in 0..rs.n {
                for b in a + 1..rs.n {
                    let d = deriv[b].column(a) - deriv[a].column(b);
                    worst = worst.max(d.amax());
                }
            }
            Ok(worst)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for v in per_node {
        worst = worst.max(v?);
    }
    Ok(worst)
}

/// u at x from f(r) with r = Λ(u)x. Constant waves evaluate directly;
/// u-dependent waves solve the fixed point u = f(Λ(u)x) from `guess`.
pub fn lift_solution<F, W>(f: F, waves: W, constant: bool, x: &[f64], guess: &[f64]) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
    W: Fn(&[f64]) -> Result<DMatrix<f64>>,
{
    let xv = DVector::from_column_slice(x);
    let map = |u: &[f64]| -> Result<DVector<f64>> {
        let r = waves(u)? * &xv;
        f(r.as_slice())
    };
    if constant {
        return map(guess);
    }
    let mut u = DVector::from_column_slice(guess);
    for _ in 0..200 {
        let next = match map(u.as_slice()) {
            Ok(v) => v,
            Err(_) => break,
        };
        let step = (&next - &u).norm();
        u = next;
        if step <= 1e-14 * (1.0 + u.norm()) {
            break;
        }
    }
    let resid = |u: &DVector<f64>| map(u.as_slice()).map(|v| (v - u).norm()).unwrap_or(f64::INFINITY);
    if resid(&u) > LIFT_TOL {
        let g = |v: &[f64]| -> Result<Vec<f64>> {
            let m = map(v)?;
            Ok(v.iter().zip(m.iter()).map(|(a, b)| a - b).collect())
        };
        let start = if resid(&u).is_finite() { u.clone() } else { DVector::from_column_slice(guess) };
        match newton::solve(g, start.as_slice(), &NewtonOptions::default()) {
            Ok(res) => u = DVector::from_vec(res.x),
            Err(Error::ImplicitSolve { last, .. }) => {
                return Err(Error::Lift { msg: "fixed point u = f(Λ(u)x) did not converge".into(), last })
            }
            Err(e) => {
                return Err(Error::Lift {
                    msg: format!("fixed point u = f(Λ(u)x) not found: {e}"),
                    last: u.iter().cloned().collect(),
                })
            }
        }
    }
    let r = resid(&u);
    if !(r <= LIFT_TOL) {
        return Err(Error::Lift {
            msg: format!("self-consistency residual {r:.3e} > {LIFT_TOL:e}"),
            last: u.iter().cloned().collect(),
        });
    }
    Ok(u)
}

/// Lift a table of a reduced system built from decomposition data.
pub fn lift_table(rs: &ReducedSystem, table: &SolutionTable, x: &[f64], guess: &[f64]) -> Result<DVector<f64>> {
    lift_solution(
        |r| table.eval(r),
        |u| rs.wave_rows(x, u),
        rs.has_constant_waves(),
        x,
        guess,
    )
}

pub type VecFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// Input of [`simple_state_verify`]: a characteristic vector γ₀(u) and wave
/// λ⁰(u) with S(λ⁰)γ₀ = b, the value f(0) and the x-box to verify on.
#[derive(Clone)]
pub struct SimpleState {
    pub gamma0: Arc<VecFn>,
    pub lambda0: Arc<VecFn>,
    pub f0: Vec<f64>,
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimpleStateReport {
    /// The constant wave c = λ⁰(f(0)).
    pub wave: Vec<f64>,
    /// Range of r⁰ = c·x over the box.
    pub r_range: (f64, f64),
    /// max ‖S(λ⁰)γ₀ − b‖ along the curve.
    pub wave_relation: f64,
    /// max ‖λ⁰' ∧ λ⁰‖/‖λ⁰‖² along the curve, λ⁰' the derivative along γ₀.
    pub constancy: f64,
    pub residual: ResidualReport,
    pub rank: usize,
    pub status: Status,
}

fn wedge(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a * b.transpose() - b * a.transpose()).norm()
}

/// Simple state u = f(r⁰), r⁰ = c·x: the direction of λ⁰ must be constant
/// along the integral curve of γ₀ through f(0). With c = λ⁰(f(0)) and
/// μ = c·λ⁰/|c|² the curve df/dr⁰ = μγ₀(f) gives ∂u/∂x = μγ₀ cᵀ, so
/// S(c)μγ₀ = S(λ⁰)γ₀ = b. The curve is integrated into a Hermite table,
/// lifted, and checked against the full system and for rank 1.
pub fn simple_state_verify(sys: &SystemSpec, st: &SimpleState, n: usize, seed: u64, h: f64) -> Result<SimpleStateReport> {
    if st.f0.len() != sys.q || st.x_lo.len() != sys.p || st.x_hi.len() != sys.p {
        return Err(Error::Input("simple state: f(0) or x-box has the wrong dimension".into()));
    }
    let lam = |u: &[f64]| -> Result<DVector<f64>> {
        let l = (st.lambda0)(u)?;
        if l.len() != sys.p {
            return Err(Error::Input(format!("λ⁰ of length {}, expected {}", l.len(), sys.p)));
        }
        Ok(DVector::from_vec(l))
    };
    let gam = |u: &[f64]| -> Result<DVector<f64>> {
        let g = (st.gamma0)(u)?;
        if g.len() != sys.q {
            return Err(Error::Input(format!("γ₀ of length {}, expected {}", g.len(), sys.q)));
        }
        Ok(DVector::from_vec(g))
    };
    let c = lam(&st.f0)?;
    let c2 = c.norm_squared();
    if !(c2 > 0.0) {
        return Err(Error::Degeneracy("λ⁰ vanishes at f(0)".into()));
    }
    // r⁰ range covered by the box
    let (mut rlo, mut rhi) = (0.0f64, 0.0f64);
    for i in 0..sys.p {
        let (a, b) = (c[i] * st.x_lo[i], c[i] * st.x_hi[i]);
        rlo += a.min(b);
        rhi += a.max(b);
    }
    let span = (rhi - rlo).max(1e-9);
    let slack = 0.05 * span;
    let (rlo, rhi) = (rlo.min(0.0) - slack, rhi.max(0.0) + slack);
    let dr = span / 200.0;
    let n_neg = (-rlo / dr).ceil() as usize;
    let n_pos = (rhi / dr).ceil() as usize;

    let cc = c.clone();
    let gamma_t = {
        let gamma0 = st.gamma0.clone();
        let lambda0 = st.lambda0.clone();
        move |f: &[f64], sign: f64| -> Result<DMatrix<f64>> {
            let mu = cc.dot(&DVector::from_vec(lambda0(f)?)) / c2;
            let g = DVector::from_vec(gamma0(f)?);
            Ok(DMatrix::from_column_slice(g.len(), 1, (g * (sign * mu)).as_slice()))
        }
    };
    let fwd_g = gamma_t.clone();
    let fwd = ReducedSystem::direct(sys.q, 1, move |_, f| fwd_g(f, 1.0));
    let bwd = ReducedSystem::direct(sys.q, 1, move |_, f| gamma_t(f, -1.0));
    let half = |rs: &ReducedSystem, k: usize| -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        if k == 0 {
            return Ok(vec![]);
        }
        let t = integrate_reduced(rs, &st.f0, &GridSpec::new(&[0.0], &[k as f64 * dr], &[k + 1]))?;
        if let Some(e) = &t.error {
            return Err(Error::Evaluation(format!("simple-state curve: {e}")));
        }
        let d = t.derivs.unwrap_or_default();
        Ok(t.values.into_iter().zip(d).skip(1).collect())
    };
    let neg = half(&bwd, n_neg)?;
    let pos = half(&fwd, n_pos)?;
    let mut values = Vec::new();
    let mut derivs = Vec::new();
    for (v, d) in neg.into_iter().rev() {
        derivs.push(d.iter().map(|x| -x).collect::<Vec<f64>>());
        values.push(v);
    }
    values.push(st.f0.clone());
    derivs.push(fwd.rhs_at(&[0.0], &st.f0)?.column(0).iter().cloned().collect());
    for (v, d) in pos {
        values.push(v);
        derivs.push(d);
    }
    let axis: Vec<f64> = (0..values.len()).map(|j| (j as f64 - n_neg as f64) * dr).collect();

    // algebraic checks along the curve
    let b = |u: &[f64]| sys.source(u);
    let mut wave_relation: f64 = 0.0;
    let mut constancy: f64 = 0.0;
    let eps = 1e-6;
    for v in &values {
        let l = lam(v)?;
        let g = gam(v)?;
        let s = sys.symbol(v, l.as_slice())?;
        wave_relation = wave_relation.max((s * &g - b(v)?).norm());
        let up: Vec<f64> = v.iter().zip(g.iter()).map(|(a, d)| a + eps * d).collect();
        let um: Vec<f64> = v.iter().zip(g.iter()).map(|(a, d)| a - eps * d).collect();
        let dl = (lam(&up)? - lam(&um)?) / (2.0 * eps);
        constancy = constancy.max(wedge(&dl, &l) / l.norm_squared());
    }
    if !(wave_relation <= CHECK_TOL) {
        return Err(Error::Constraint(format!("S(λ⁰)γ₀ ≠ b along the curve (residual {wave_relation:.3e})")));
    }
    if !(constancy <= CONSTANCY_TOL) {
        return Err(Error::Constraint(format!(
            "direction of λ⁰ changes along the curve ({constancy:.3e} > {CONSTANCY_TOL:e})"
        )));
    }

    let table = Arc::new(SolutionTable {
        labels: vec!["r0".into()],
        axes: vec![axis],
        q: sys.q,
        values,
        derivs: Some(derivs),
        defect: 0.0,
        integrable: true,
        error: None,
    });
    let cw = c.clone();
    let sol = CandidateSolution::new(sys.p, sys.q, move |x| table.eval(&[cw.dot(&DVector::from_column_slice(x))]));
    let sampler = Sampler::new(&st.x_lo, &st.x_hi, seed);
    let residual = pde::verify_on_grid(sys, &sol, &sampler, n, h, SIMPLE_STATE_TOL)?;
    let mid: Vec<f64> = st.x_lo.iter().zip(&st.x_hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let jac = pde::jacobian_fd(&sol, &mid, h)?;
    let rank = pde::fd_rank(&jac, 1e-6);
    let status = if residual.pass && rank == 1 { Status::Pass } else { Status::Fail };
    Ok(SimpleStateReport {
        wave: c.iter().cloned().collect(),
        r_range: (rlo, rhi),
        wave_relation,
        constancy,
        residual,
        rank,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chardata::{Block, Rotation};
    use crate::examples::{self, Example1Config, ThetaReading};
    use crate::pde::WaveVector;
    use proptest::prelude::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn small_a() -> Example1Config {
        Example1Config { a: [0.3, 0.2, 0.1], ..Default::default() }
    }

    /// One real wave (1, M a) with Ω = 1/(1+M²): S(λ) = (1+M²) I.
    fn ex1_simple(cfg: &Example1Config) -> (SystemSpec, Arc<DataFn>) {
        let sys = examples::example1_system(cfg).unwrap();
        let m = cfg.m();
        let a = cfg.a;
        let data: Arc<DataFn> = Arc::new(move |_x, _u| {
            Ok(DecompositionData {
                variant: Variant::Multiwave,
                blocks: vec![Block {
                    wave: WaveVector::real(&[1.0, m * a[0], m * a[1], m * a[2]]),
                    rotation: Rotation::Determined { omega: c(1.0 / (1.0 + m * m)), l: DMatrix::identity(3, 3) },
                    tau: DVector::zeros(3),
                }],
            })
        });
        (sys, data)
    }

    fn ex1_probes(cfg: &Example1Config, sys: &SystemSpec) -> Vec<(Vec<f64>, Vec<f64>)> {
        let hi: Vec<f64> = cfg.a.iter().map(|v| 0.99 * v).collect();
        let lo = vec![0.0; 3];
        probe_pairs(sys, (&[-1.0; 4], &[1.0; 4]), (&lo, &hi), 8, 3).unwrap()
    }

    fn sech(s: f64) -> f64 {
        1.0 / s.cosh()
    }

    #[test]
    fn ex1_simple_wave_reduces_to_sech() {
        let cfg = small_a();
        let (sys, data) = ex1_simple(&cfg);
        let probes = ex1_probes(&cfg, &sys);
        let rs = build_reduced(&sys, data, WaveDependence::Constant, &probes).unwrap();
        assert!(rs.certificate.as_ref().unwrap().rotation_residual < 1e-12);
        let wd = welldefined_check(&rs, &probes, 1e-5).unwrap();
        assert_eq!(wd.status, Status::Pass);
        assert!(!wd.vacuous);
        let f0: Vec<f64> = cfg.a.iter().map(|a| a * sech(0.5)).collect();
        let table = integrate_reduced(&rs, &f0, &GridSpec::new(&[0.0], &[2.0], &[201])).unwrap();
        assert!(table.integrable && table.is_complete());
        let s = 1.0 + cfg.m() * cfg.m();
        for (j, r) in table.axes[0].iter().enumerate() {
            for i in 0..3 {
                let exact = cfg.a[i] * sech(0.5 + r / s);
                assert!((table.values[j][i] - exact).abs() < 1e-10);
            }
        }
        let mid = table.eval(&[1.05]).unwrap();
        assert!((mid[0] - cfg.a[0] * sech(0.5 + 1.05 / s)).abs() < 1e-7);
        // lifted solution solves the full system
        let rs2 = rs.clone();
        let t2 = table.clone();
        let sol = CandidateSolution::new(4, 3, move |x| lift_table(&rs2, &t2, x, &[0.0; 3]));
        let sampler = Sampler::new(&[0.3, -0.02, -0.02, -0.02], &[1.5, 0.02, 0.02, 0.02], 1);
        let rep = pde::verify_on_grid(&sys, &sol, &sampler, 20, 1e-4, 1e-6).unwrap();
        assert!(rep.pass, "{}", rep.max_abs);
    }

    #[test]
    fn rk4_convergence_on_sech() {
        let cfg = small_a();
        let (sys, data) = ex1_simple(&cfg);
        let rs = build_reduced(&sys, data, WaveDependence::Constant, &ex1_probes(&cfg, &sys)).unwrap();
        let f0: Vec<f64> = cfg.a.iter().map(|a| a * sech(0.5)).collect();
        let s = 1.0 + cfg.m() * cfg.m();
        let err = |step: f64| {
            let mut g = GridSpec::new(&[0.0], &[2.0], &[2]);
            g.max_step = step;
            let t = integrate_reduced(&rs, &f0, &g).unwrap();
            (t.values[1][0] - cfg.a[0] * sech(0.5 + 2.0 / s)).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!(ratio > 12.0 && ratio < 20.0, "{ratio}");
    }

    fn ex1_mixed(reading: ThetaReading) -> (SystemSpec, Arc<DataFn>, Vec<(Vec<f64>, Vec<f64>)>, Example1Config) {
        let cfg = Example1Config::default();
        let sys = examples::example1_system(&cfg).unwrap();
        let states = examples::example1_decomposition_states(&cfg, 6, 11).unwrap();
        let probes = states.iter().map(|u| (vec![0.1, 0.2, -0.3, 0.4], u.to_vec())).collect();
        let cfg2 = cfg.clone();
        let data: Arc<DataFn> =
            Arc::new(move |_x, u| examples::example1_decomposition(&cfg2, u, &[0.1, -0.2, 0.3], reading));
        (sys, data, probes, cfg)
    }

    #[test]
    fn ex1_mixed_columns_are_rotated_source() {
        let (sys, data, probes, cfg) = ex1_mixed(ThetaReading::Corrected);
        let rs = build_reduced(&sys, data.clone(), WaveDependence::Constant, &probes).unwrap();
        assert_eq!((rs.k, rs.n), (2, 3));
        assert_eq!(rs.labels, vec!["r1", "r2_re", "r2_im"]);
        let m = cfg.m();
        for (x, u) in &probes {
            let cr = rs.rhs_complex(x, u).unwrap();
            let b = sys.source(u).unwrap();
            let d = data(x, u).unwrap();
            let Rotation::Determined { omega, l } = &d.blocks[1].rotation else { panic!() };
            let want = l * linalg::to_complex_vec(&b) * *omega + &d.blocks[1].tau;
            assert!((cr.f.column(1) - &want).norm() < 1e-12);
            assert!((cr.f.column(2) - want.conjugate()).norm() < 1e-12);
            assert!(cr.f.column(0).norm() < 1e-14);
            assert!(rs.conjugation_defect(x, u).unwrap() < 1e-12);
            assert!((*omega - examples::example1_omega2(m, b.as_slice())).norm() < 1e-15);
        }
        // η and the complex pair do not give three independent coordinates
        let f0 = probes[0].1.clone();
        let err = integrate_reduced(&rs, &f0, &GridSpec::new(&[0.0; 3], &[0.1; 3], &[2; 3])).unwrap_err();
        assert!(matches!(err, Error::Rank(_)));
    }

    #[test]
    fn printed_r2_column_differs_from_assembled() {
        let (sys, data, probes, cfg) = ex1_mixed(ThetaReading::Corrected);
        let rs = build_reduced(&sys, data, WaveDependence::Constant, &probes).unwrap();
        for (x, u) in &probes {
            let col = rs.rhs_complex(x, u).unwrap().f.column(1).into_owned();
            let b = sys.source(u).unwrap();
            let printed = [1.0, -1.0].map(|e| (&col - examples::example1_printed_rhs_r2(cfg.m(), b.as_slice(), e)).camax());
            assert!(printed[0].min(printed[1]) > 1e-3);
        }
    }

    #[test]
    fn printed_theta_is_rejected() {
        let (sys, data, probes, _) = ex1_mixed(ThetaReading::Printed { eps: 1.0 });
        match build_reduced(&sys, data, WaveDependence::Constant, &probes) {
            Err(Error::Constraint(msg)) => assert!(msg.contains("rotation condition")),
            Err(e) => panic!("unexpected {e}"),
            Ok(_) => panic!("printed θ accepted"),
        }
    }

    #[test]
    fn conjugate_representative_gives_same_jacobian() {
        let (sys, data, probes, _) = ex1_mixed(ThetaReading::Corrected);
        let d2 = data.clone();
        let conj: Arc<DataFn> = Arc::new(move |x, u| {
            let mut d = d2(x, u)?;
            let b = &mut d.blocks[1];
            b.wave = b.wave.conj();
            let Rotation::Determined { omega, l } = &b.rotation else { unreachable!() };
            b.rotation = Rotation::Determined { omega: omega.conj(), l: l.conjugate() };
            b.tau = b.tau.conjugate();
            Ok(d)
        });
        let rs = build_reduced(&sys, data, WaveDependence::Constant, &probes).unwrap();
        let rc = build_reduced(&sys, conj, WaveDependence::Constant, &probes).unwrap();
        for (x, u) in &probes {
            let diff = rs.physical_jacobian(x, u).unwrap() - rc.physical_jacobian(x, u).unwrap();
            assert!(diff.amax() < 1e-12);
        }
    }

    /// u_t = b with A¹ = A² = 0, waves (1,0,0), (1,1,0) and Ω₁ = s(x),
    /// Ω₂ = 1 − s(x): the rotation condition holds for every s.
    fn split_system(z_dependent: bool) -> (ReducedSystem, Vec<(Vec<f64>, Vec<f64>)>) {
        let sys = SystemSpec::new(
            "split",
            3,
            2,
            2,
            |_| vec![DMatrix::identity(2, 2), DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)],
            |u| DVector::from_vec(vec![1.0, 0.5 * u[0]]),
            |_| true,
        )
        .unwrap();
        let data: Arc<DataFn> = Arc::new(move |x, _u| {
            let s = 0.5 + 0.3 * if z_dependent { x[2] } else { x[1] };
            let blk = |w: [f64; 3], om: f64| Block {
                wave: WaveVector::real(&w),
                rotation: Rotation::Determined { omega: c(om), l: DMatrix::identity(2, 2) },
                tau: DVector::zeros(2),
            };
            Ok(DecompositionData { variant: Variant::Multiwave, blocks: vec![blk([1.0, 0.0, 0.0], s), blk([1.0, 1.0, 0.0], 1.0 - s)] })
        });
        let probes = probe_pairs(&sys, (&[-1.0; 3], &[1.0; 3]), (&[-1.0; 2], &[1.0; 2]), 5, 2).unwrap();
        (build_reduced(&sys, data, WaveDependence::Constant, &probes).unwrap(), probes)
    }

    #[test]
    fn welldefinedness_detects_dependence_off_the_waves() {
        let (rs, probes) = split_system(false);
        assert_eq!(welldefined_check(&rs, &probes, 1e-5).unwrap().status, Status::Pass);
        let (rs, probes) = split_system(true);
        let wd = welldefined_check(&rs, &probes, 1e-5).unwrap();
        assert_eq!(wd.status, Status::Unverified);
        assert!((wd.max - 0.3).abs() < 1e-6, "{}", wd.max);
    }

    #[test]
    fn scaled_varying_wave_matches_ode() {
        // u_t = −u with wave g(u)(1, 0), g = 1 + u²/2, Ω = 1/g
        let sys = SystemSpec::new(
            "decay",
            2,
            1,
            1,
            |_| vec![DMatrix::identity(1, 1), DMatrix::zeros(1, 1)],
            |u| DVector::from_vec(vec![-u[0]]),
            |_| true,
        )
        .unwrap();
        let g = |u: f64| 1.0 + 0.5 * u * u;
        let data: Arc<DataFn> = Arc::new(move |_x, u| {
            Ok(DecompositionData {
                variant: Variant::Multiwave,
                blocks: vec![Block {
                    wave: WaveVector::real(&[g(u[0]), 0.0]),
                    rotation: Rotation::Determined { omega: c(1.0 / g(u[0])), l: DMatrix::identity(1, 1) },
                    tau: DVector::zeros(1),
                }],
            })
        });
        let jac: Arc<WaveJacFn> = Arc::new(|u| Ok(vec![DMatrix::from_vec(2, 1, vec![c(u[0]), c(0.0)])]));
        let probes = probe_pairs(&sys, (&[0.0, -1.0], &[0.5, 1.0]), (&[0.5], &[1.0]), 5, 4).unwrap();
        let rs = build_reduced(&sys, data, WaveDependence::Varying(jac), &probes).unwrap();
        assert!(!rs.has_constant_waves());
        assert_eq!(welldefined_check(&rs, &probes, 1e-5).unwrap().status, Status::Pass);
        // (∂Λ/∂u)R = σ(u)Λ: the rhs sees x only through r = Λx
        let (a, b) = (rs.rhs(&[0.3, 0.4], &[0.8]).unwrap(), rs.rhs(&[0.3, -2.0], &[0.8]).unwrap());
        assert!((a - b).amax() < 1e-15);
        let table = integrate_reduced(&rs, &[1.0], &GridSpec::new(&[0.0], &[1.0], &[41])).unwrap();
        for t in [0.1, 0.25, 0.4] {
            let u = lift_table(&rs, &table, &[t, 0.3], &[1.0]).unwrap();
            assert!((u[0] - (-t as f64).exp()).abs() < 1e-8, "t={t}: {}", u[0]);
        }
    }

    #[test]
    fn zero_rhs_gives_constant_table() {
        let rs = ReducedSystem::direct(2, 2, |_, _| Ok(DMatrix::zeros(2, 2)));
        let t = integrate_reduced(&rs, &[1.5, -2.0], &GridSpec::new(&[0.0, 0.0], &[1.0, 1.0], &[4, 5])).unwrap();
        assert!(t.values.iter().all(|v| v == &vec![1.5, -2.0]));
        assert!(t.integrable && t.defect == 0.0);
    }

    #[test]
    fn incompatible_rhs_has_unit_defect() {
        let rs = ReducedSystem::direct(1, 2, |r, _| Ok(DMatrix::from_row_slice(1, 2, &[r[1], 0.0])));
        let t = integrate_reduced(&rs, &[0.0], &GridSpec::new(&[0.0, 0.0], &[1.0, 1.0], &[3, 3])).unwrap();
        assert!((t.defect - 1.0).abs() < 1e-6, "{}", t.defect);
        assert!(!t.integrable);
    }

    #[test]
    fn gradient_rhs_is_integrable_and_exact() {
        let phi = |r: &[f64]| r[0] * r[0] * r[1] + r[1].sin();
        let rs = ReducedSystem::direct(1, 2, |r, _| {
            Ok(DMatrix::from_row_slice(1, 2, &[2.0 * r[0] * r[1], r[0] * r[0] + r[1].cos()]))
        });
        let lo = [0.2, -0.5];
        let t = integrate_reduced(&rs, &[phi(&lo)], &GridSpec::new(&lo, &[1.0, 0.5], &[5, 6])).unwrap();
        assert!(t.defect <= 1e-8 && t.integrable);
        for fl in 0..t.values.len() {
            let idx = unflat_index(&t.dims(), fl);
            let (r, v) = t.node(&idx);
            assert!((v[0] - phi(&r)).abs() < 1e-9);
        }
        let csv = t.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "r1,r2,f1");
        assert_eq!(csv.lines().count(), 31);
        assert!(matches!(t.eval(&[1.5, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn failing_rhs_leaves_partial_table() {
        let rs = ReducedSystem::direct(1, 1, |r, _| {
            if r[0] > 0.55 {
                Err(Error::Evaluation("outside".into()))
            } else {
                Ok(DMatrix::from_element(1, 1, 1.0))
            }
        });
        let t = integrate_reduced(&rs, &[0.0], &GridSpec::new(&[0.0], &[1.0], &[11])).unwrap();
        assert!(t.error.is_some() && !t.integrable && !t.is_complete());
        assert!((t.values[5][0] - 0.5).abs() < 1e-12);
        assert!(t.values[10][0].is_nan());
    }

    #[test]
    fn singular_reduction_is_reported() {
        // 1 + D R = 1 − t·(b/g)·g' vanishes at t·u²/g = 1
        let sys = SystemSpec::new(
            "decay",
            2,
            1,
            1,
            |_| vec![DMatrix::identity(1, 1), DMatrix::zeros(1, 1)],
            |u| DVector::from_vec(vec![-u[0]]),
            |_| true,
        )
        .unwrap();
        let data: Arc<DataFn> = Arc::new(move |_x, u| {
            Ok(DecompositionData {
                variant: Variant::Multiwave,
                blocks: vec![Block {
                    wave: WaveVector::real(&[u[0], 0.0]),
                    rotation: Rotation::Determined { omega: c(1.0 / u[0]), l: DMatrix::identity(1, 1) },
                    tau: DVector::zeros(1),
                }],
            })
        });
        let jac: Arc<WaveJacFn> = Arc::new(|_| Ok(vec![DMatrix::from_vec(2, 1, vec![c(1.0), c(0.0)])]));
        let rs = build_reduced(&sys, data, WaveDependence::Varying(jac), &[(vec![0.0, 0.0], vec![1.0])]).unwrap();
        // 1 + t·(−u/u) = 0 at t = 1
        assert!(matches!(rs.rhs(&[1.0, 0.0], &[2.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn lift_contraction_and_failure() {
        let f = |r: &[f64]| Ok(DVector::from_vec(vec![0.5 * r[0].sin() + 0.2]));
        let w = |u: &[f64]| Ok(DMatrix::from_row_slice(1, 1, &[1.0 + 0.3 * u[0]]));
        let u = lift_solution(f, w, false, &[0.7], &[0.0]).unwrap();
        let r = (1.0 + 0.3 * u[0]) * 0.7;
        assert!((u[0] - (0.5 * r.sin() + 0.2)).abs() < 1e-12);
        let g = |r: &[f64]| Ok(DVector::from_vec(vec![r[0] + 1.0]));
        let one = |u: &[f64]| Ok(DMatrix::from_element(1, 1, u[0]));
        let res = lift_solution(g, one, false, &[1.0], &[0.0]);
        assert!(matches!(res, Err(Error::Lift { .. })), "{res:?}");
    }

    #[test]
    fn simple_state_on_example1() {
        let cfg = small_a();
        let sys = examples::example1_system(&cfg).unwrap();
        let m = cfg.m();
        let a = cfg.a;
        let s2 = sys.clone();
        let st = SimpleState {
            gamma0: Arc::new(move |u| Ok(s2.source(u)?.iter().map(|b| b / (1.0 + m * m)).collect())),
            lambda0: Arc::new(move |_| Ok(vec![1.0, m * a[0], m * a[1], m * a[2]])),
            f0: a.iter().map(|v| v * sech(0.5)).collect(),
            x_lo: vec![0.1, -0.05, -0.05, -0.05],
            x_hi: vec![1.5, 0.05, 0.05, 0.05],
        };
        let rep = simple_state_verify(&sys, &st, 20, 5, 1e-4).unwrap();
        assert_eq!(rep.status, Status::Pass, "{:?}", rep.residual.max_abs);
        assert_eq!(rep.rank, 1);
        assert!(rep.constancy < 1e-12);
    }

    #[test]
    fn simple_state_with_rotating_wave_is_rejected() {
        let sys = SystemSpec::new(
            "rot",
            2,
            1,
            1,
            |u| vec![DMatrix::from_element(1, 1, u[0].cos()), DMatrix::from_element(1, 1, u[0].sin())],
            |_| DVector::from_element(1, 1.0),
            |_| true,
        )
        .unwrap();
        let st = SimpleState {
            gamma0: Arc::new(|_| Ok(vec![1.0])),
            lambda0: Arc::new(|u| Ok(vec![u[0].cos(), u[0].sin()])),
            f0: vec![0.0],
            x_lo: vec![-1.0, -1.0],
            x_hi: vec![1.0, 1.0],
        };
        match simple_state_verify(&sys, &st, 10, 1, 1e-4) {
            Err(Error::Constraint(msg)) => assert!(msg.contains("direction")),
            other => panic!("{:?}", other.map(|r| r.status)),
        }
    }

    proptest! {
        #[test]
        fn flat_index_roundtrip(d0 in 1usize..5, d1 in 1usize..5, d2 in 1usize..5, seed in 0usize..1000) {
            let dims = [d0, d1, d2];
            let fl = seed % (d0 * d1 * d2);
            prop_assert_eq!(flat_index(&dims, &unflat_index(&dims, fl)), fl);
        }

        #[test]
        fn table_interpolates_nodes(vals in proptest::collection::vec(-5.0f64..5.0, 3..10)) {
            let n = vals.len();
            let t = SolutionTable {
                labels: vec!["r1".into()],
                axes: vec![(0..n).map(|j| j as f64 * 0.5).collect()],
                q: 1,
                values: vals.iter().map(|v| vec![*v]).collect(),
                derivs: Some(vec![vec![0.0]; n]),
                defect: 0.0,
                integrable: true,
                error: None,
            };
            for j in 0..n {
                prop_assert!((t.eval(&[j as f64 * 0.5]).unwrap()[0] - vals[j]).abs() < 1e-12);
            }
        }

        #[test]
        fn status_and_is_worst(a in 0usize..3, b in 0usize..3) {
            let s = [Status::Pass, Status::Unverified, Status::Fail];
            let rank = |x: Status| s.iter().position(|y| *y == x).unwrap();
            prop_assert_eq!(rank(s[a].and(s[b])), a.max(b));
        }
    }
}
