//! Characteristic analysis: dispersion roots, simple integral elements, wave
//! relations, the algebraic rotation conditions of the superposition ansatz,
//! and involutivity of wave-vector fields.

use crate::error::{Error, Result};
use crate::linalg::{self, RANK_TOL};
use crate::pde::SystemSpec;
pub use crate::pde::WaveVector;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Roots closer than this (absolute, in λ₀) are merged.
pub const ROOT_MERGE_TOL: f64 = 1e-7;
/// Eigenvalues within this distance (relative to the matrix scale) are
/// treated as one multiple root.
const CLUSTER_TOL: f64 = 1e-4;
/// Leading coefficients below this (relative) are dropped.
const COEFF_TOL: f64 = 1e-12;
/// σ_min/σ_max of A⁰ above which the eigenvalue route is used.
const INVERTIBLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub value: f64,
    pub multiplicity: usize,
}

fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * t + ck)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect()
}

/// Real roots λ₀ of det(λ₀A⁰ + Σ_{i≥1} λ_i A^i) = 0 for λ = (λ₀, spatial),
/// with multiplicities.
pub fn dispersion_roots(sys: &SystemSpec, u: &[f64], spatial: &[f64]) -> Result<Vec<Root>> {
    if !sys.is_determined() {
        return Err(Error::Input("dispersion roots need a determined system (m = q)".into()));
    }
    if spatial.len() + 1 != sys.p {
        return Err(Error::Input(format!("spatial direction has length {}, expected {}", spatial.len(), sys.p - 1)));
    }
    if spatial.iter().all(|s| *s == 0.0) {
        return Err(Error::Input("spatial direction is zero".into()));
    }
    let q = sys.q;
    let a = sys.coeffs(u)?;
    let mut base = DMatrix::zeros(q, q);
    for (ai, si) in a.iter().skip(1).zip(spatial) {
        base += ai * *si;
    }
    let svals = linalg::singular_values(&a[0]);
    let smin = svals.last().cloned().unwrap_or(0.0);
    let smax = svals.first().cloned().unwrap_or(0.0);

    // invertible A⁰: the roots are the eigenvalues of −(A⁰)⁻¹B
    if smin > INVERTIBLE_TOL * smax {
        if let Some(inv) = a[0].clone().try_inverse() {
            let m = -(inv * &base);
            let tol = CLUSTER_TOL * m.norm().max(1.0);
            let eig: Vec<Complex64> = m.complex_eigenvalues().iter().cloned().collect();
            let roots = cluster(&eig, tol)
                .into_iter()
                .filter(|(z, _)| z.im.abs() <= tol)
                .map(|(z, mult)| Root {
                    value: z.re,
                    multiplicity: mult,
                })
                .collect();
            return Ok(merge_roots(roots));
        }
    }

    // singular A⁰: interpolate det(λ₀A⁰ + B), a polynomial of degree < q.
    // |λ₀| ≤ ‖s‖₁·max‖A^i‖ / σ_min(A⁰), so no genuine root lies outside
    let s1: f64 = spatial.iter().map(|s| s.abs()).sum();
    let radius = (1.0 + 2.0 * a.iter().map(|m| m.norm()).fold(0.0, f64::max))
        * s1.max(1.0)
        * if smin > 0.0 { (1.0 / smin).max(1.0) } else { 1.0 };
    let det_at = |t: f64| (&a[0] * (radius * t) + &base).determinant();

    // interpolate the degree-q polynomial in t at Chebyshev nodes
    let n = q + 1;
    let nodes: Vec<f64> = (0..n)
        .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos())
        .collect();
    let vals = DVector::from_iterator(n, nodes.iter().map(|t| det_at(*t)));
    let vand = DMatrix::from_fn(n, n, |i, j| nodes[i].powi(j as i32));
    let coef = vand
        .lu()
        .solve(&vals)
        .ok_or_else(|| Error::Singular {
            msg: "Vandermonde interpolation".into(),
            inv_cond: 0.0,
        })?;
    let scale = coef.amax();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Degeneracy(format!("characteristic determinant vanishes identically along {spatial:?}")));
    }
    let mut c: Vec<f64> = coef.iter().cloned().collect();
    while c.len() > 1 && c.last().unwrap().abs() <= COEFF_TOL * scale {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = c[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    let eig: Vec<Complex64> = comp.complex_eigenvalues().iter().cloned().collect();
    let clusters = cluster(&eig, CLUSTER_TOL);

    let mut roots: Vec<Root> = Vec::new();
    for (z, mult) in clusters {
        if z.im.abs() > CLUSTER_TOL * (1.0 + z.re.abs()) {
            continue;
        }
        // Newton polish on the (mult-1)-th derivative, where the root is simple
        let mut d = c.clone();
        for _ in 1..mult {
            d = poly_deriv(&d);
        }
        let dd = poly_deriv(&d);
        let mut t = z.re;
        for _ in 0..20 {
            let slope = poly_eval(&dd, t);
            if slope == 0.0 {
                break;
            }
            let step = poly_eval(&d, t) / slope;
            t -= step;
            if step.abs() <= 1e-16 * (1.0 + t.abs()) {
                break;
            }
        }
        if !t.is_finite() || (t - z.re).abs() > CLUSTER_TOL {
            t = z.re;
        }
        if t.abs() > 1.0 + 1e-12 {
            continue; // outside the radius: spurious
        }
        roots.push(Root {
            value: t * radius,
            multiplicity: mult,
        });
    }
    Ok(merge_roots(roots))
}

/// Transitive clusters of points closer than `tol`, as (centroid, size).
fn cluster(eig: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let mut used = vec![false; eig.len()];
    let mut clusters = Vec::new();
    for i in 0..eig.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![eig[i]];
        let mut grew = true;
        while grew {
            grew = false;
            for j in 0..eig.len() {
                if !used[j] && members.iter().any(|z| (eig[j] - z).norm() <= tol) {
                    used[j] = true;
                    members.push(eig[j]);
                    grew = true;
                }
            }
        }
        let centroid = members.iter().sum::<Complex64>() / members.len() as f64;
        clusters.push((centroid, members.len()));
    }
    clusters
}

/// Sort and merge roots closer than [`ROOT_MERGE_TOL`], adding multiplicities.
fn merge_roots(mut roots: Vec<Root>) -> Vec<Root> {
    roots.sort_by(|x, y| x.value.total_cmp(&y.value));
    let mut merged: Vec<Root> = Vec::new();
    for r in roots {
        match merged.last_mut() {
            Some(last) if (r.value - last.value).abs() <= ROOT_MERGE_TOL => {
                let m = last.multiplicity + r.multiplicity;
                last.value = (last.value * last.multiplicity as f64 + r.value * r.multiplicity as f64) / m as f64;
                last.multiplicity = m;
            }
            _ => merged.push(r),
        }
    }
    merged
}

/// Orthonormal nullspace basis of Σ_i λ_i A^i together with the matrix rank.
#[derive(Debug, Clone)]
pub struct GammaBasis {
    pub rank: usize,
    /// Columns are the basis vectors.
    pub basis: DMatrix<Complex64>,
}

impl GammaBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Real parts of the basis vectors (exact for real wave vectors).
    pub fn real_vectors(&self) -> Vec<DVector<f64>> {
        (0..self.dim()).map(|j| self.basis.column(j).map(|z| z.re)).collect()
    }
}

pub fn homogeneous_gamma(sys: &SystemSpec, u: &[f64], lambda: &WaveVector) -> Result<GammaBasis> {
    if lambda.complex {
        let s = sys.symbol_complex(u, &lambda.comps)?;
        Ok(GammaBasis {
            rank: linalg::rank(&s, RANK_TOL),
            basis: linalg::nullspace(&s, RANK_TOL),
        })
    } else {
        let s = sys.symbol(u, &lambda.re())?;
        Ok(GammaBasis {
            rank: linalg::rank(&s, RANK_TOL),
            basis: linalg::to_complex(&linalg::nullspace(&s, RANK_TOL)),
        })
    }
}

/// Minimum-norm least-squares γ₀ of (Σ λ_i A^i) γ₀ = b, with the achieved
/// residual norm.
pub fn inhomogeneous_gamma(sys: &SystemSpec, u: &[f64], lambda: &[f64]) -> Result<(DVector<f64>, f64)> {
    let s = sys.symbol(u, lambda)?;
    let b = sys.source(u)?;
    if b.norm() == 0.0 {
        return Ok((DVector::zeros(sys.q), 0.0));
    }
    Ok(linalg::lstsq_min_norm(&s, &b, RANK_TOL))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Homogeneous,
    Inhomogeneous,
}

/// A simple integral element γ ⊗ λ.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralElement {
    pub lambda: WaveVector,
    pub gamma: DVector<Complex64>,
    pub kind: ElementKind,
    pub label: String,
}

impl IntegralElement {
    pub fn real(lambda: &[f64], gamma: &[f64], kind: ElementKind, label: impl Into<String>) -> Self {
        Self {
            lambda: WaveVector::real(lambda),
            gamma: DVector::from_iterator(gamma.len(), gamma.iter().map(|g| Complex64::new(*g, 0.0))),
            kind,
            label: label.into(),
        }
    }

    pub fn complex(lambda: &[Complex64], gamma: &[Complex64], label: impl Into<String>) -> Self {
        Self {
            lambda: WaveVector::complex(lambda),
            gamma: DVector::from_column_slice(gamma),
            kind: ElementKind::Homogeneous,
            label: label.into(),
        }
    }

    pub fn gamma_re(&self) -> DVector<f64> {
        self.gamma.map(|z| z.re)
    }

    /// Normalised residual of the element's defining relation:
    /// homogeneous ‖Sγ‖/(‖γ‖·max‖A^i‖), inhomogeneous ‖Sγ − b‖/(‖b‖ + 1).
    pub fn invariant_residual(&self, sys: &SystemSpec, u: &[f64]) -> Result<f64> {
        let s = sys.symbol_complex(u, &self.lambda.comps)?;
        let sg = &s * &self.gamma;
        match self.kind {
            ElementKind::Homogeneous => {
                let scale = self.gamma.norm() * sys.max_coeff_norm(u)?;
                Ok(if scale == 0.0 { 0.0 } else { sg.norm() / scale })
            }
            ElementKind::Inhomogeneous => {
                let b = linalg::to_complex_vec(&sys.source(u)?);
                Ok((sg - &b).norm() / (b.norm() + 1.0))
            }
        }
    }
}

/// ‖Σ_A S(λ^A) τ_A‖ for real elements, with 2 Re S(λ^A) τ_A for complex ones
/// (the conjugate pair is implied). Works for m ≤ q.
pub fn check_wave_relation(sys: &SystemSpec, u: &[f64], elements: &[IntegralElement]) -> Result<f64> {
    let mut total = DVector::<f64>::zeros(sys.m);
    for e in elements {
        if e.gamma.len() != sys.q {
            return Err(Error::Input(format!("characteristic vector of length {}, expected {}", e.gamma.len(), sys.q)));
        }
        if e.lambda.complex && e.lambda.im().iter().all(|v| *v == 0.0) {
            return Err(Error::Input(format!("element `{}` is flagged complex but its wave vector is real", e.label)));
        }
        if !e.lambda.complex && e.gamma.iter().any(|z| z.im != 0.0) {
            return Err(Error::Input(format!("real element `{}` has a complex characteristic vector", e.label)));
        }
        let s = sys.symbol_complex(u, &e.lambda.comps)?;
        let t = (&s * &e.gamma).map(|z| z.re);
        total += if e.lambda.complex { t * 2.0 } else { t };
    }
    Ok(total.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Multiwave,
    Multimode,
    Mixed,
    UnderdeterminedWave,
    UnderdeterminedMode,
}

/// Ω_A L_A (determined systems) or P_A (underdetermined systems) for one
/// invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Rotation {
    Determined {
        omega: Complex64,
        l: DMatrix<Complex64>,
    },
    Underdetermined {
        /// q×m matrix P_A = Σ_α Ω^α M_α L^α.
        p: DMatrix<Complex64>,
        /// The m×m rotations L^α, kept for the SO(m) checks.
        sheets: Vec<DMatrix<Complex64>>,
    },
}

impl Rotation {
    /// Assemble P_A from q scalars Ω^α and q rotations L^α ∈ SO(m): row α of
    /// P_A is Ω^α times the first row of L^α.
    pub fn from_sheets(omegas: &[Complex64], sheets: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if omegas.len() != sheets.len() || sheets.is_empty() {
            return Err(Error::Input("need one rotation per scalar sheet".into()));
        }
        let m = sheets[0].nrows();
        if sheets.iter().any(|l| l.shape() != (m, m)) {
            return Err(Error::Input("sheet rotations must all be m×m".into()));
        }
        let q = omegas.len();
        let p = DMatrix::from_fn(q, m, |a, j| omegas[a] * sheets[a][(0, j)]);
        Ok(Rotation::Underdetermined { p, sheets })
    }

    /// The linear map R_A with Φ⁻¹ ∂f/∂r^A = R_A b + τ_A.
    pub fn map(&self) -> DMatrix<Complex64> {
        match self {
            Rotation::Determined { omega, l } => l * *omega,
            Rotation::Underdetermined { p, .. } => p.clone(),
        }
    }

    fn rotations(&self) -> Vec<&DMatrix<Complex64>> {
        match self {
            Rotation::Determined { l, .. } => vec![l],
            Rotation::Underdetermined { sheets, .. } => sheets.iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub wave: WaveVector,
    pub rotation: Rotation,
    pub tau: DVector<Complex64>,
}

/// Data of the superposition ansatz evaluated at one point (x, u).
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionData {
    pub variant: Variant,
    pub blocks: Vec<Block>,
}

impl DecompositionData {
    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn waves(&self) -> Vec<WaveVector> {
        self.blocks.iter().map(|b| b.wave.clone()).collect()
    }

    /// Check that the variant matches the wave realness and the rotation
    /// shapes match the system.
    pub fn validate(&self, sys: &SystemSpec) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Input("decomposition without blocks".into()));
        }
        let n_complex = self.blocks.iter().filter(|b| b.wave.complex).count();
        let n_real = self.k() - n_complex;
        let determined = self.blocks.iter().all(|b| matches!(b.rotation, Rotation::Determined { .. }));
        let under = self.blocks.iter().all(|b| matches!(b.rotation, Rotation::Underdetermined { .. }));
        let ok = match self.variant {
            Variant::Multiwave => n_complex == 0 && determined,
            Variant::Multimode => n_real == 0 && determined,
            Variant::Mixed => n_real > 0 && n_complex > 0 && determined,
            Variant::UnderdeterminedWave => n_complex == 0 && under,
            Variant::UnderdeterminedMode => n_real == 0 && under,
        };
        if !ok {
            return Err(Error::Input(format!(
                "variant {:?} does not match {n_real} real / {n_complex} complex waves",
                self.variant
            )));
        }
        for b in &self.blocks {
            if b.wave.dim() != sys.p || b.tau.len() != sys.q {
                return Err(Error::Input("wave or τ dimension mismatch".into()));
            }
            let shape = b.rotation.map().shape();
            if shape != (sys.q, sys.m) {
                return Err(Error::Input(format!("rotation map is {shape:?}, expected {:?}", (sys.q, sys.m))));
            }
        }
        Ok(())
    }

    /// Worst ‖LᵀL − I‖ and |det L − 1| over all rotations (plain transpose).
    pub fn rotation_errors(&self) -> (f64, f64) {
        let mut orth: f64 = 0.0;
        let mut det: f64 = 0.0;
        for b in &self.blocks {
            for l in b.rotation.rotations() {
                let (o, d) = so_errors(l);
                orth = orth.max(o);
                det = det.max(d);
            }
        }
        (orth, det)
    }
}

/// (‖LᵀL − I‖_F, |det L − 1|) with the plain transpose, i.e. membership in
/// SO(n, ℂ) (or SO(n) for real L).
pub fn so_errors(l: &DMatrix<Complex64>) -> (f64, f64) {
    let n = l.nrows();
    let g = l.transpose() * l - DMatrix::<Complex64>::identity(n, n);
    let det = if l.is_square() { (l.determinant() - Complex64::new(1.0, 0.0)).norm() } else { f64::INFINITY };
    (g.norm(), det)
}

/// ‖(Σ_A T_A − I_m) b‖ where T_A = S(λ^A) R_A for real blocks and
/// 2 Re S(λ^A) R_A for complex blocks (the conjugate term is implied).
pub fn check_rotation_condition(sys: &SystemSpec, u: &[f64], d: &DecompositionData) -> Result<f64> {
    d.validate(sys)?;
    let b = sys.source(u)?;
    let mut total = -DMatrix::<f64>::identity(sys.m, sys.m);
    for blk in &d.blocks {
        let s = sys.symbol_complex(u, &blk.wave.comps)?;
        let t = (s * blk.rotation.map()).map(|z| z.re);
        total += if blk.wave.complex { t * 2.0 } else { t };
    }
    Ok((total * b).norm())
}

/// Σ_A S(λ^A)(R_A b + τ_A) (with 2 Re for complex blocks) — equals b when
/// both algebraic conditions hold.
pub fn assembled_image(sys: &SystemSpec, u: &[f64], d: &DecompositionData) -> Result<DVector<f64>> {
    d.validate(sys)?;
    let b = linalg::to_complex_vec(&sys.source(u)?);
    let mut total = DVector::<f64>::zeros(sys.m);
    for blk in &d.blocks {
        let s = sys.symbol_complex(u, &blk.wave.comps)?;
        let z = &blk.rotation.map() * &b + &blk.tau;
        let t = (s * z).map(|z| z.re);
        total += if blk.wave.complex { t * 2.0 } else { t };
    }
    Ok(total)
}

/// Wave vectors as functions of the invariants: an optional state wave λ⁰
/// (attached to r⁰, the first coordinate) and the waves λ^A.
#[derive(Debug, Clone)]
pub struct WaveSet {
    pub state: Option<Vec<f64>>,
    pub waves: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvolutivityReport {
    pub max_residual: f64,
    /// Smallest inverse condition number of the spans used.
    pub min_inv_cond: f64,
    /// Set when some span was nearly degenerate (inverse condition < 1e-8).
    pub ill_conditioned: bool,
}

/// Check ∂λ^A/∂r^n ∈ span{λ^A, λ^n} (n ≠ A) and ∂λ⁰/∂r^n ∈ span{λ^n} by
/// central differences of step `h` at every grid point. Invariant
/// coordinates are ordered (r⁰, r¹, …) when a state wave is present and
/// (r¹, …) otherwise.
pub fn check_involutivity<F>(field: F, grid: &[Vec<f64>], h: f64) -> Result<InvolutivityReport>
where
    F: Fn(&[f64]) -> Result<WaveSet>,
{
    let mut rep = InvolutivityReport {
        max_residual: 0.0,
        min_inv_cond: 1.0,
        ill_conditioned: false,
    };
    for r in grid {
        let here = field(r)?;
        let mut all: Vec<Vec<f64>> = Vec::new();
        let has_state = here.state.is_some();
        if let Some(s) = &here.state {
            all.push(s.clone());
        }
        all.extend(here.waves.iter().cloned());
        if all.len() != r.len() {
            return Err(Error::Input(format!("{} waves for {} invariants", all.len(), r.len())));
        }
        let p = all[0].len();
        let col = |v: &[f64]| DVector::from_column_slice(v);
        for n in 0..r.len() {
            let mut rp = r.clone();
            let mut rm = r.clone();
            rp[n] += h;
            rm[n] -= h;
            let fp = field(&rp)?;
            let fm = field(&rm)?;
            let flat = |w: WaveSet| -> Vec<Vec<f64>> { w.state.into_iter().chain(w.waves).collect() };
            let (ap, am) = (flat(fp), flat(fm));
            for a in 0..all.len() {
                let d = DVector::from_iterator(p, (0..p).map(|i| (ap[a][i] - am[a][i]) / (2.0 * h)));
                let basis = if has_state && a == 0 {
                    DMatrix::from_columns(&[col(&all[n])])
                } else if a == n {
                    continue;
                } else {
                    DMatrix::from_columns(&[col(&all[a]), col(&all[n])])
                };
                let ic = linalg::inverse_condition(&basis);
                rep.min_inv_cond = rep.min_inv_cond.min(ic);
                if ic < 1e-8 {
                    rep.ill_conditioned = true;
                }
                rep.max_residual = rep.max_residual.max(linalg::distance_from_span(&d, &basis));
            }
        }
    }
    Ok(rep)
}
