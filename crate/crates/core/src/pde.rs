//! Quasilinear first-order systems `Σ_i A^i(u) ∂u/∂x^i = b(u)` and the
//! finite-difference residual oracle used to judge every candidate solution.

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

type CoeffFn = dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync;
type SourceFn = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;
type PredFn = dyn Fn(&[f64]) -> bool + Send + Sync;
type EvalFn = dyn Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync;

/// A quasilinear system with `p` independent variables, `q` unknowns and
/// `m` equations. Coefficients are m×q matrices, one per independent
/// variable (index 0 is time when there is one).
#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub p: usize,
    pub q: usize,
    pub m: usize,
    coeffs: Arc<CoeffFn>,
    source: Arc<SourceFn>,
    admissible: Arc<PredFn>,
}

impl std::fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SystemSpec({}, p={}, q={}, m={})", self.name, self.p, self.q, self.m)
    }
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        p: usize,
        q: usize,
        m: usize,
        coeffs: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
        source: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        admissible: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    ) -> Result<Self> {
        if p == 0 || q == 0 || m == 0 || m > q {
            return Err(Error::Input(format!(
                "need p, q, m ≥ 1 and m ≤ q (got p={p}, q={q}, m={m})"
            )));
        }
        Ok(Self {
            name: name.into(),
            p,
            q,
            m,
            coeffs: Arc::new(coeffs),
            source: Arc::new(source),
            admissible: Arc::new(admissible),
        })
    }

    pub fn is_determined(&self) -> bool {
        self.m == self.q
    }

    pub fn is_admissible(&self, u: &[f64]) -> bool {
        u.len() == self.q && u.iter().all(|v| v.is_finite()) && (self.admissible)(u)
    }

    fn check_state(&self, u: &[f64]) -> Result<()> {
        if self.is_admissible(u) {
            Ok(())
        } else {
            Err(Error::State(format!("{u:?} is not admissible for {}", self.name)))
        }
    }

    /// A^1..A^p at `u`, with dimension and finiteness checks.
    pub fn coeffs(&self, u: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.check_state(u)?;
        let a = (self.coeffs)(u);
        if a.len() != self.p {
            return Err(Error::Input(format!("{} coefficient matrices, expected {}", a.len(), self.p)));
        }
        for ai in &a {
            if ai.shape() != (self.m, self.q) {
                return Err(Error::Input(format!("coefficient shape {:?}, expected {:?}", ai.shape(), (self.m, self.q))));
            }
            if ai.iter().any(|v| !v.is_finite()) {
                return Err(Error::Evaluation(format!("non-finite coefficient at {u:?}")));
            }
        }
        Ok(a)
    }

    pub fn source(&self, u: &[f64]) -> Result<DVector<f64>> {
        self.check_state(u)?;
        let b = (self.source)(u);
        if b.len() != self.m {
            return Err(Error::Input(format!("source length {}, expected {}", b.len(), self.m)));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite source at {u:?}")));
        }
        Ok(b)
    }

    /// Σ_i λ_i A^i(u).
    pub fn symbol(&self, u: &[f64], lambda: &[f64]) -> Result<DMatrix<f64>> {
        if lambda.len() != self.p {
            return Err(Error::Input(format!("wave vector length {}, expected {}", lambda.len(), self.p)));
        }
        let a = self.coeffs(u)?;
        let mut s = DMatrix::zeros(self.m, self.q);
        for (ai, li) in a.iter().zip(lambda) {
            s += ai * *li;
        }
        Ok(s)
    }

    /// Σ_i λ_i A^i(u) for a complex wave vector.
    pub fn symbol_complex(&self, u: &[f64], lambda: &[Complex64]) -> Result<DMatrix<Complex64>> {
        if lambda.len() != self.p {
            return Err(Error::Input(format!("wave vector length {}, expected {}", lambda.len(), self.p)));
        }
        let a = self.coeffs(u)?;
        let mut s = DMatrix::<Complex64>::zeros(self.m, self.q);
        for (ai, li) in a.iter().zip(lambda) {
            s += linalg::to_complex(ai) * *li;
        }
        Ok(s)
    }

    /// Largest Frobenius norm among the coefficient matrices.
    pub fn max_coeff_norm(&self, u: &[f64]) -> Result<f64> {
        Ok(self.coeffs(u)?.iter().map(|a| a.norm()).fold(0.0, f64::max))
    }

    /// The same system with `b` replaced by `-b` (negative control).
    pub fn with_negated_source(&self) -> SystemSpec {
        let src = self.source.clone();
        SystemSpec {
            name: format!("{} (b negated)", self.name),
            source: Arc::new(move |u: &[f64]| -src(u)),
            ..self.clone()
        }
    }
}

/// A real or complex wave vector λ ∈ ℝ^p or ℂ^p. Complex vectors stand for
/// the pair (λ, λ̄).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveVector {
    pub comps: Vec<Complex64>,
    pub complex: bool,
}

impl WaveVector {
    pub fn real(v: &[f64]) -> Self {
        Self {
            comps: v.iter().map(|x| Complex64::new(*x, 0.0)).collect(),
            complex: false,
        }
    }

    pub fn complex(v: &[Complex64]) -> Self {
        Self {
            comps: v.to_vec(),
            complex: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn re(&self) -> Vec<f64> {
        self.comps.iter().map(|z| z.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.comps.iter().map(|z| z.im).collect()
    }

    pub fn conj(&self) -> Self {
        Self {
            comps: self.comps.iter().map(|z| z.conj()).collect(),
            complex: self.complex,
        }
    }

    pub fn norm(&self) -> f64 {
        self.comps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Real row vectors spanning the same real subspace: λ itself for a real
    /// wave, (Re λ, Im λ) for a complex one.
    pub fn real_rows(&self) -> Vec<Vec<f64>> {
        if self.complex {
            vec![self.re(), self.im()]
        } else {
            vec![self.re()]
        }
    }
}

/// Stack the real rows of a wave set into a matrix (one row per real
/// direction).
pub fn wave_matrix(waves: &[WaveVector]) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = waves.iter().flat_map(|w| w.real_rows()).collect();
    let p = waves.first().map(|w| w.dim()).unwrap_or(0);
    if waves.iter().any(|w| w.dim() != p) {
        return Err(Error::Input("wave vectors of different lengths".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

/// A candidate solution x ↦ u with a domain predicate and an optional
/// analytic Jacobian.
#[derive(Clone)]
pub struct CandidateSolution {
    pub p: usize,
    pub q: usize,
    eval: Arc<EvalFn>,
    domain: Arc<PredFn>,
    jacobian: Option<Arc<JacFn>>,
}

impl CandidateSolution {
    pub fn new(
        p: usize,
        q: usize,
        eval: impl Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            p,
            q,
            eval: Arc::new(eval),
            domain: Arc::new(|_| true),
            jacobian: None,
        }
    }

    pub fn with_domain(mut self, domain: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Arc::new(domain);
        self
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.p && x.iter().all(|v| v.is_finite()) && (self.domain)(x)
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        if !self.in_domain(x) {
            return Err(Error::Domain(format!("{x:?} outside the solution domain")));
        }
        let u = (self.eval)(x)?;
        if u.len() != self.q {
            return Err(Error::Input(format!("solution length {}, expected {}", u.len(), self.q)));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite solution value at {x:?}")));
        }
        Ok(u)
    }

    pub fn analytic_jacobian(&self, x: &[f64]) -> Option<Result<DMatrix<f64>>> {
        self.jacobian.as_ref().map(|j| j(x))
    }
}

/// Central-difference Jacobian ∂u/∂x (q×p).
pub fn jacobian_fd(sol: &CandidateSolution, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::Input(format!("finite-difference step must be positive, got {h}")));
    }
    let mut jac = DMatrix::zeros(sol.q, sol.p);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for i in 0..sol.p {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        let up = sol.eval(&xp)?;
        let um = sol.eval(&xm)?;
        xp[i] = x[i];
        xm[i] = x[i];
        let col = (up - um) / (2.0 * h);
        jac.set_column(i, &col);
    }
    Ok(jac)
}

/// Σ_i A^i(u) (∂u/∂x^i)_FD − b(u) at `x`.
pub fn residual(sys: &SystemSpec, sol: &CandidateSolution, x: &[f64], h: f64) -> Result<DVector<f64>> {
    if sol.p != sys.p || sol.q != sys.q {
        return Err(Error::Input(format!(
            "solution dimensions (p={}, q={}) do not match system (p={}, q={})",
            sol.p, sol.q, sys.p, sys.q
        )));
    }
    let u = sol.eval(x)?;
    let us = u.as_slice();
    let a = sys.coeffs(us)?;
    let b = sys.source(us)?;
    let jac = jacobian_fd(sol, x, h)?;
    let mut r = -b;
    for (i, ai) in a.iter().enumerate() {
        r += ai * jac.column(i);
    }
    Ok(r)
}

/// Seeded uniform sampler over an axis-aligned box. Candidate `c` has
/// coordinates `lo_j + (hi_j - lo_j) * U(seed, c * dim + j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub seed: u64,
}

impl Sampler {
    pub fn new(lo: &[f64], hi: &[f64], seed: u64) -> Self {
        Self {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn point(&self, index: u64) -> Vec<f64> {
        let d = self.dim() as u64;
        (0..self.dim())
            .map(|j| {
                let u = rng::draw_unit(self.seed, index * d + j as u64);
                self.lo[j] + (self.hi[j] - self.lo[j]) * u
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationStat {
    pub max_abs: f64,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailingPoint {
    pub x: Vec<f64>,
    pub max_abs: f64,
}

/// Aggregated residual statistics of a grid verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub per_equation: Vec<EquationStat>,
    pub max_abs: f64,
    pub samples: usize,
    pub requested: usize,
    pub rejections: usize,
    pub fd_step: f64,
    pub tol: f64,
    /// At most [`MAX_FAILING_POINTS`] points, in sampling order.
    pub failing_points: Vec<FailingPoint>,
    pub pass: bool,
}

pub const MAX_FAILING_POINTS: usize = 10;

/// Evaluate [`residual`] at `n` accepted sample points. Candidates whose
/// stencil leaves the domain, whose state is inadmissible, or whose
/// evaluation fails are rejected; after 1000·n rejections sampling stops.
/// Candidates are evaluated in parallel chunks but accepted strictly in index
/// order, so the report is identical to a sequential run.
pub fn verify_on_grid(
    sys: &SystemSpec,
    sol: &CandidateSolution,
    sampler: &Sampler,
    n: usize,
    h: f64,
    tol: f64,
) -> Result<ResidualReport> {
    if n == 0 {
        return Err(Error::Input("need at least one sample".into()));
    }
    if sampler.dim() != sys.p {
        return Err(Error::Input(format!("sampler dimension {} ≠ p = {}", sampler.dim(), sys.p)));
    }
    let max_candidates = (n as u64) * 1001;
    let mut accepted: Vec<(Vec<f64>, DVector<f64>)> = Vec::with_capacity(n);
    let mut last_index = 0u64;
    let mut next = 0u64;
    let mut first_error: Option<Error> = None;
    while accepted.len() < n && next < max_candidates {
        let chunk = ((n - accepted.len()) as u64).max(64).min(max_candidates - next);
        let results: Vec<(u64, Vec<f64>, Result<DVector<f64>>)> = (next..next + chunk)
            .into_par_iter()
            .map(|c| {
                let x = sampler.point(c);
                let r = residual(sys, sol, &x, h);
                (c, x, r)
            })
            .collect();
        for (c, x, r) in results {
            if accepted.len() >= n {
                break;
            }
            match r {
                Ok(r) => {
                    accepted.push((x, r));
                    last_index = c;
                }
                Err(e) => {
                    if first_error.is_none() {
                        first_error = Some(e);
                    }
                }
            }
        }
        next += chunk;
    }
    if accepted.is_empty() {
        return Err(Error::Sampling(format!(
            "no usable sample among {next} candidates (first failure: {})",
            first_error.map(|e| e.to_string()).unwrap_or_else(|| "none".into())
        )));
    }
    let samples = accepted.len();
    let rejections = (last_index + 1) as usize - samples;
    let mut per_equation = vec![
        EquationStat {
            max_abs: 0.0,
            mean_abs: 0.0
        };
        sys.m
    ];
    let mut failing_points = Vec::new();
    let mut max_abs: f64 = 0.0;
    for (x, r) in &accepted {
        let mut local: f64 = 0.0;
        for (k, v) in r.iter().enumerate() {
            let a = v.abs();
            per_equation[k].max_abs = per_equation[k].max_abs.max(a);
            per_equation[k].mean_abs += a;
            local = local.max(a);
        }
        max_abs = max_abs.max(local);
        if local > tol && failing_points.len() < MAX_FAILING_POINTS {
            failing_points.push(FailingPoint {
                x: x.clone(),
                max_abs: local,
            });
        }
    }
    for s in &mut per_equation {
        s.mean_abs /= samples as f64;
    }
    Ok(ResidualReport {
        per_equation,
        max_abs,
        samples,
        requested: n,
        rejections,
        fd_step: h,
        tol,
        failing_points,
        pass: max_abs <= tol,
    })
}

/// How far the rows of `jac` (q×p) are from the span of the waves: the
/// largest ‖J ξ_a‖ / (‖J‖ + ε) over an orthonormal basis ξ_a of the
/// orthogonal complement of the (real rows of the) waves. Zero when the
/// waves span ℝ^p.
pub fn span_check(jac: &DMatrix<f64>, waves: &[WaveVector]) -> Result<f64> {
    if waves.is_empty() {
        return Err(Error::Input("empty wave set".into()));
    }
    let w = wave_matrix(waves)?;
    if w.ncols() != jac.ncols() {
        return Err(Error::Input(format!("waves have length {}, Jacobian has {} columns", w.ncols(), jac.ncols())));
    }
    let rk = linalg::rank(&w, linalg::RANK_TOL);
    if rk < w.nrows() {
        return Err(Error::Rank(format!("{} wave directions but rank {rk}", w.nrows())));
    }
    let xi = linalg::orthogonal_complement(&w, linalg::RANK_TOL);
    let jn = jac.norm() + 1e-300;
    let mut worst: f64 = 0.0;
    for a in 0..xi.ncols() {
        worst = worst.max((jac * xi.column(a)).norm() / jn);
    }
    Ok(worst)
}

/// Numerical rank of an FD Jacobian; the relative threshold should sit well
/// above the FD noise level.
pub fn fd_rank(jac: &DMatrix<f64>, rel_tol: f64) -> usize {
    linalg::rank(jac, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn burgers() -> SystemSpec {
        SystemSpec::new(
            "burgers",
            2,
            1,
            1,
            |u| vec![DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, u[0])],
            |_| DVector::zeros(1),
            |_| true,
        )
        .unwrap()
    }

    #[test]
    fn constant_solution_has_zero_jacobian_and_residual() {
        let sol = CandidateSolution::new(2, 1, |_| Ok(DVector::from_vec(vec![3.0])));
        let j = jacobian_fd(&sol, &[0.2, 0.5], FD_STEP).unwrap();
        assert_eq!(j.norm(), 0.0);
        let r = residual(&burgers(), &sol, &[0.2, 0.5], FD_STEP).unwrap();
        assert_eq!(r.norm(), 0.0);
    }

    #[test]
    fn affine_solution_jacobian_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.25, -1.0]);
        let mm = m.clone();
        let sol = CandidateSolution::new(3, 2, move |x| Ok(&mm * DVector::from_column_slice(x)));
        let j = jacobian_fd(&sol, &[0.3, -0.7, 1.1], FD_STEP).unwrap();
        assert!((j - m).amax() < 1e-10);
    }

    #[test]
    fn sech_derivative() {
        let sol = CandidateSolution::new(1, 1, |x| Ok(DVector::from_vec(vec![1.0 / x[0].cosh()])));
        let j = jacobian_fd(&sol, &[1.0], FD_STEP).unwrap();
        let exact = -(1.0 / 1f64.cosh()) * 1f64.tanh();
        assert!((j[(0, 0)] - exact).abs() < 1e-9);
    }

    #[test]
    fn stencil_outside_domain_is_domain_error() {
        let sol = CandidateSolution::new(1, 1, |x| Ok(DVector::from_vec(vec![x[0].sqrt()]))).with_domain(|x| x[0] >= 0.0);
        assert!(matches!(jacobian_fd(&sol, &[0.0], FD_STEP), Err(Error::Domain(_))));
    }

    #[test]
    fn burgers_simple_wave_residual() {
        // u = x/(1+t) solves u_t + u u_x = 0
        let sol = CandidateSolution::new(2, 1, |x| Ok(DVector::from_vec(vec![x[1] / (1.0 + x[0])])));
        let r = residual(&burgers(), &sol, &[0.5, 0.3], FD_STEP).unwrap();
        assert!(r.amax() < 1e-9);
    }

    #[test]
    fn verify_constant_passes_with_zero_max() {
        let sol = CandidateSolution::new(2, 1, |_| Ok(DVector::from_vec(vec![1.0])));
        let s = Sampler::new(&[0.0, 0.0], &[1.0, 1.0], 3);
        let rep = verify_on_grid(&burgers(), &sol, &s, 100, FD_STEP, 1e-10).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.max_abs, 0.0);
        assert_eq!(rep.samples, 100);
    }

    #[test]
    fn verify_rejects_outside_domain_and_is_deterministic() {
        let sol = CandidateSolution::new(2, 1, |x| Ok(DVector::from_vec(vec![x[1] / (1.0 + x[0])])))
            .with_domain(|x| x[1] > 0.5);
        let s = Sampler::new(&[0.0, 0.0], &[1.0, 1.0], 11);
        let a = verify_on_grid(&burgers(), &sol, &s, 50, FD_STEP, 1e-8).unwrap();
        let b = verify_on_grid(&burgers(), &sol, &s, 50, FD_STEP, 1e-8).unwrap();
        assert_eq!(a, b);
        assert!(a.rejections > 0);
        assert!(a.pass);
    }

    #[test]
    fn negative_control_fails() {
        // u = t solves u_t + u u_x = 1; with the source negated it does not
        let sys = SystemSpec::new(
            "forced",
            2,
            1,
            1,
            |u| vec![DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, u[0])],
            |_| DVector::from_vec(vec![1.0]),
            |_| true,
        )
        .unwrap();
        let sol = CandidateSolution::new(2, 1, |x| Ok(DVector::from_vec(vec![x[0]])));
        let s = Sampler::new(&[0.0, 0.0], &[1.0, 1.0], 1);
        assert!(verify_on_grid(&sys, &sol, &s, 20, FD_STEP, 1e-8).unwrap().pass);
        let bad = verify_on_grid(&sys.with_negated_source(), &sol, &s, 20, FD_STEP, 1e-8).unwrap();
        assert!(!bad.pass && bad.max_abs > 1.0);
        assert_eq!(bad.failing_points.len(), MAX_FAILING_POINTS);
    }

    #[test]
    fn no_usable_sample_is_sampling_error() {
        let sol = CandidateSolution::new(2, 1, |_| Ok(DVector::from_vec(vec![1.0]))).with_domain(|_| false);
        let s = Sampler::new(&[0.0, 0.0], &[1.0, 1.0], 1);
        assert!(matches!(verify_on_grid(&burgers(), &sol, &s, 2, FD_STEP, 1.0), Err(Error::Sampling(_))));
    }

    #[test]
    fn span_check_examples() {
        let lam = [1.0, -2.0, 0.5];
        let gam = DVector::from_vec(vec![0.3, 1.0, -1.0]);
        let j = &gam * DVector::from_vec(lam.to_vec()).transpose();
        assert!(span_check(&j, &[WaveVector::real(&lam)]).unwrap() < 1e-14);
        let id = DMatrix::<f64>::identity(3, 3);
        assert!(span_check(&id, &[WaveVector::real(&[1.0, 0.0, 0.0])]).unwrap() > 0.1);
        let dep = [WaveVector::real(&[1.0, 0.0, 0.0]), WaveVector::real(&[2.0, 0.0, 0.0])];
        assert!(matches!(span_check(&id, &dep), Err(Error::Rank(_))));
    }

    #[test]
    fn residual_richardson_consistency() {
        // smooth solution of the forced Burgers equation u_t + u u_x = 0
        let sol = CandidateSolution::new(2, 1, |x| Ok(DVector::from_vec(vec![(x[1] + 0.3) / (1.0 + x[0])])));
        let sys = burgers();
        let x = [0.4, 0.2];
        let r1 = residual(&sys, &sol, &x, 1e-3).unwrap();
        let r2 = residual(&sys, &sol, &x, 5e-4).unwrap();
        assert!((r1 - r2).norm() < 1e-6);
    }

    proptest! {
        #[test]
        fn rank_one_span(g in prop::collection::vec(-2.0f64..2.0, 4),
                         l in prop::collection::vec(-2.0f64..2.0, 3)) {
            let ln = l.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(ln > 1e-3);
            let j = DVector::from_vec(g) * DVector::from_vec(l.clone()).transpose();
            prop_assert!(span_check(&j, &[WaveVector::real(&l)]).unwrap() <= 1e-12);
        }

        #[test]
        fn sampler_points_in_box(seed in any::<u64>(), idx in 0u64..1_000_000) {
            let s = Sampler::new(&[-1.0, 2.0], &[1.0, 3.0], seed);
            let p = s.point(idx);
            prop_assert!(p[0] >= -1.0 && p[0] < 1.0 && p[1] >= 2.0 && p[1] < 3.0);
            prop_assert_eq!(p, s.point(idx));
        }
    }
}
