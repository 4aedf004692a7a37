//! Closed-form solution families and the implicit Riemann-invariant solver
//! they share.

use crate::error::{Error, Result};
use crate::newton::{self, NewtonOptions};
use crate::pde::{self, CandidateSolution, ResidualReport, Sampler, SystemSpec, WaveVector};
use nalgebra::DVector;
use std::sync::Arc;

type RelFn = dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync;
type StateFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;
type CheckFn = dyn Fn(&[f64]) -> Result<()> + Send + Sync;
type WavesFn = dyn Fn(&[f64]) -> Result<Vec<WaveVector>> + Send + Sync;

/// Continuation schedule tried when a direct Newton solve from the anchor
/// fails.
const CONTINUATION_STEPS: [usize; 3] = [4, 16, 64];

/// Riemann invariants r defined implicitly by F(r, x) = 0, the state u(r)
/// and the family's constraints on r.
#[derive(Clone)]
pub struct Invariants {
    relations: Arc<RelFn>,
    state: Arc<StateFn>,
    check: Arc<CheckFn>,
    pub anchor_x: Vec<f64>,
    pub anchor_r: Vec<f64>,
    pub options: NewtonOptions,
}

impl Invariants {
    /// Solves once at `anchor_x` from `guess`; later solves start from there.
    pub fn new(
        relations: impl Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
        state: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
        check: impl Fn(&[f64]) -> Result<()> + Send + Sync + 'static,
        anchor_x: &[f64],
        guess: &[f64],
    ) -> Result<Self> {
        let mut inv = Self {
            relations: Arc::new(relations),
            state: Arc::new(state),
            check: Arc::new(check),
            anchor_x: anchor_x.to_vec(),
            anchor_r: guess.to_vec(),
            options: NewtonOptions::default(),
        };
        inv.anchor_r = inv.solve(anchor_x, guess)?;
        Ok(inv)
    }

    pub fn relations(&self, r: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        (self.relations)(r, x)
    }

    /// Damped Newton for F(·, x) = 0 from `guess`.
    pub fn solve(&self, x: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let f = |r: &[f64]| (self.relations)(r, x);
        Ok(newton::solve(f, guess, &self.options)?.x)
    }

    /// Newton from the anchor solution, falling back to straight-line
    /// continuation from the anchor point. Deterministic in `x`.
    pub fn solve_continued(&self, x: &[f64]) -> Result<Vec<f64>> {
        let first = match self.solve(x, &self.anchor_r) {
            Ok(r) => return Ok(r),
            Err(e) => e,
        };
        for steps in CONTINUATION_STEPS {
            let mut r = self.anchor_r.clone();
            let mut ok = true;
            for s in 1..=steps {
                let w = s as f64 / steps as f64;
                let xs: Vec<f64> = self.anchor_x.iter().zip(x).map(|(a, b)| a + w * (b - a)).collect();
                match self.solve(&xs, &r) {
                    Ok(rn) => r = rn,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Ok(r);
            }
        }
        Err(first)
    }

    pub fn check(&self, r: &[f64]) -> Result<()> {
        (self.check)(r)
    }

    pub fn state(&self, r: &[f64]) -> Result<Vec<f64>> {
        (self.state)(r)
    }

    /// u(x): solve, check constraints (a violation puts x outside the domain),
    /// evaluate the state.
    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        let r = self.solve_continued(x)?;
        self.check(&r).map_err(|e| match e {
            Error::Constraint(m) => Error::Domain(m),
            other => other,
        })?;
        Ok(DVector::from_vec(self.state(&r)?))
    }

    /// Gradients ∂F_A/∂x at the solved r. They span the same space as the
    /// wave vectors ∂r^A/∂x whenever ∂F/∂r is invertible.
    pub fn waves(&self, x: &[f64]) -> Result<Vec<WaveVector>> {
        let r = self.solve_continued(x)?;
        let h = 1e-4;
        let n = self.anchor_r.len();
        let mut rows = vec![vec![0.0; x.len()]; n];
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for i in 0..x.len() {
            xp[i] += h;
            xm[i] -= h;
            let fp = (self.relations)(&r, &xp)?;
            let fm = (self.relations)(&r, &xm)?;
            for a in 0..n {
                rows[a][i] = (fp[a] - fm[a]) / (2.0 * h);
            }
            xp[i] = x[i];
            xm[i] = x[i];
        }
        Ok(rows.iter().map(|w| WaveVector::real(w)).collect())
    }

    /// Precondition check: the constraints must hold at the anchor and at
    /// every corner of the box where the invariants can be solved.
    pub fn probe(&self, lo: &[f64], hi: &[f64]) -> Result<()> {
        self.check(&self.anchor_r)?;
        let d = lo.len();
        for mask in 0..(1u32 << d) {
            let x: Vec<f64> = (0..d).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
            if let Ok(r) = self.solve_continued(&x) {
                self.check(&r)?;
            }
        }
        Ok(())
    }
}

/// A parameterised analytic solution with the system it solves, its wave
/// set and the box it is verified on.
#[derive(Clone)]
pub struct ClosedFormFamily {
    pub id: String,
    pub system: SystemSpec,
    pub solution: CandidateSolution,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Residual tolerance used by the verification suite.
    pub tol: f64,
    pub invariants: Option<Invariants>,
    /// Notes on readings of the printed formulas that this family relies on.
    pub notes: Vec<String>,
    waves: Arc<WavesFn>,
}

impl std::fmt::Debug for ClosedFormFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ClosedFormFamily({})", self.id)
    }
}

impl ClosedFormFamily {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        system: SystemSpec,
        solution: CandidateSolution,
        lo: &[f64],
        hi: &[f64],
        tol: f64,
        waves: impl Fn(&[f64]) -> Result<Vec<WaveVector>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            system,
            solution,
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            tol,
            invariants: None,
            notes: Vec::new(),
            waves: Arc::new(waves),
        }
    }

    /// Family whose solution is u(r(x)) with r from `inv`.
    pub fn implicit(id: impl Into<String>, system: SystemSpec, inv: Invariants, lo: &[f64], hi: &[f64], tol: f64) -> Result<Self> {
        inv.probe(lo, hi)?;
        let (ie, iw) = (inv.clone(), inv.clone());
        let solution = CandidateSolution::new(system.p, system.q, move |x| ie.eval(x));
        let mut fam = Self::new(id, system, solution, lo, hi, tol, move |x| iw.waves(x));
        fam.invariants = Some(inv);
        Ok(fam)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn waves(&self, x: &[f64]) -> Result<Vec<WaveVector>> {
        (self.waves)(x)
    }

    pub fn sampler(&self, seed: u64) -> Sampler {
        Sampler::new(&self.lo, &self.hi, seed)
    }

    pub fn verify(&self, n: usize, seed: u64, h: f64) -> Result<ResidualReport> {
        pde::verify_on_grid(&self.system, &self.solution, &self.sampler(seed), n, h, self.tol)
    }

    /// span_check of the FD Jacobian against the family's waves at x.
    pub fn span_residual(&self, x: &[f64], h: f64) -> Result<f64> {
        let j = pde::jacobian_fd(&self.solution, x, h)?;
        pde::span_check(&j, &self.waves(x)?)
    }

    /// Same family with its system's source negated (negative control).
    pub fn negated(&self) -> Self {
        let mut f = self.clone();
        f.system = self.system.with_negated_source();
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_invariants_match_direct_solve() {
        // r0 + 2 r1 = x0, r0 - r1 = x1
        let inv = Invariants::new(
            |r, x| Ok(vec![r[0] + 2.0 * r[1] - x[0], r[0] - r[1] - x[1]]),
            |r| Ok(vec![r[0], r[1]]),
            |_| Ok(()),
            &[0.0, 0.0],
            &[0.3, -0.2],
        )
        .unwrap();
        assert_eq!(inv.anchor_r.iter().map(|v| v.abs()).sum::<f64>() < 1e-14, true);
        let r = inv.solve_continued(&[3.0, 0.0]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
        let w = inv.waves(&[3.0, 0.0]).unwrap();
        assert!((w[0].re()[0] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn constraint_becomes_domain_error_at_evaluation() {
        let inv = Invariants::new(
            |r, x| Ok(vec![r[0] - x[0]]),
            |r| Ok(vec![r[0]]),
            |r| if r[0] > 0.5 { Err(Error::Constraint("r > 0.5".into())) } else { Ok(()) },
            &[0.0],
            &[0.0],
        )
        .unwrap();
        assert!(matches!(inv.eval(&[0.7]), Err(Error::Domain(_))));
        assert!(matches!(inv.probe(&[-1.0], &[1.0]), Err(Error::Constraint(_))));
        assert!(inv.probe(&[-1.0], &[0.4]).is_ok());
    }
}
