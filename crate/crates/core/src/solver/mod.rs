//! The subspace solver, its full-space quasi-Newton and accelerated proximal
//! gradient reference modes, and per-iteration records.

mod apg;
mod gksm;
mod inner;
mod reduced;
mod subspace;

pub use apg::{apg_run, fstar_protocol};
pub use gksm::{cqnpm_run, gksm_run};
pub use reduced::enrichment_residual;
pub use subspace::SubspaceBasis;

use crate::error::{Error, Result};
use crate::metric::MetricParams;
use crate::operators::ForwardOperator;
use crate::regularizers::SmoothRegularizer;
use crate::vector::ComplexVector;

/// Relative slack accepted when checking cost monotonicity.
pub const DESCENT_SLACK: f64 = 1e-10;

/// A composite problem instance: data term `0.5 ||A x - y||^2` plus the
/// smooth prior.
pub struct Problem {
    pub op: ForwardOperator,
    pub reg: SmoothRegularizer,
    pub y: ComplexVector,
}

impl Problem {
    pub fn new(op: ForwardOperator, reg: SmoothRegularizer, y: ComplexVector) -> Result<Self> {
        if y.len() != op.range_dim() {
            return Err(Error::DimensionMismatch {
                context: "Problem::new",
                expected: op.range_dim(),
                actual: y.len(),
            });
        }
        Ok(Self { op, reg, y })
    }

    /// Full objective at `x` given a cached `A x`.
    pub(crate) fn cost_with_ax(&self, x: &ComplexVector, ax: &ComplexVector) -> Result<(f64, f64)> {
        let h = 0.5 * ax.sub(&self.y).norm_sqr();
        let f = self.reg.value(x)?;
        Ok((h + f, h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Gksm,
    Cqnpm,
    Apg,
}

impl SolverMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverMode::Gksm => "gksm",
            SolverMode::Cqnpm => "cqnpm",
            SolverMode::Apg => "apg",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Fixed step size used in the proximal term.
    pub alpha: f64,
    /// Number of subspace-phase iterations K; iterations beyond K run in
    /// full-space mode.
    pub subspace_iters: usize,
    pub max_iter: usize,
    pub constrained: bool,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// 0 disables the cyclic basis restart.
    pub restart_period: usize,
    pub seed: u64,
    pub metric: MetricParams,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParam {
                name: "solver.alpha",
                reason: "step size must be positive".into(),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParam {
                name: "solver.max_iter",
                reason: "must be at least 1".into(),
            });
        }
        if self.subspace_iters > self.max_iter {
            return Err(Error::InvalidParam {
                name: "solver.k",
                reason: "subspace-phase length K must not exceed max_iter".into(),
            });
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::InvalidParam {
                name: "solver.inner_tol",
                reason: "must be positive".into(),
            });
        }
        if self.inner_max_iter == 0 {
            return Err(Error::InvalidParam {
                name: "solver.inner_max_iter",
                reason: "must be at least 1".into(),
            });
        }
        self.metric.validate()
    }
}

/// What happened to the subspace at the end of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnrichOutcome {
    Appended,
    Skipped,
    Restarted,
    /// Full-space iteration (k > K, or cqnpm mode).
    FullSpace,
    /// Mode without a subspace (apg).
    None,
}

impl EnrichOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnrichOutcome::Appended => "appended",
            EnrichOutcome::Skipped => "skipped",
            EnrichOutcome::Restarted => "restart",
            EnrichOutcome::FullSpace => "full",
            EnrichOutcome::None => "none",
        }
    }
}

/// One row of the iteration log.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iter: usize,
    /// Cumulative monotonic wall time at the end of the iteration.
    pub wall_time_s: f64,
    /// F(x_{k+1}).
    pub cost: f64,
    /// h(x_{k+1}) = 0.5 ||A x_{k+1} - y||^2.
    pub data_term: f64,
    /// ||x_{k+1} - x_k||.
    pub step_norm: f64,
    /// Running minimum of squared step norms (nonincreasing in k).
    pub delta_k: f64,
    /// Norm of the surrogate gradient at x_{k+1} (subspace phase) or of the
    /// final projected-gradient map of the inner solve (full-space / apg).
    pub gradmap_norm: f64,
    /// Basis dimension used this iteration; the full image dimension in
    /// full-space mode.
    pub subspace_dim: usize,
    pub lam_min: f64,
    pub lam_max: f64,
    pub enrich: EnrichOutcome,
}

/// Operator and gradient evaluations performed within one iteration.
#[derive(Debug, Clone, Copy, Default)]
pub struct CallCounts {
    pub applies: u64,
    pub adjoints: u64,
    pub grads: u64,
}

/// Result of a solver run.
pub struct SolverState {
    pub final_x: ComplexVector,
    /// F(x_1) and h(x_1) before the first iteration.
    pub f_initial: f64,
    pub data_term_initial: f64,
    pub records: Vec<IterationRecord>,
    /// Empirical extremal metric eigenvalues over the run.
    pub eta_lo: f64,
    pub eta_hi: f64,
    /// Iterations where F(x_{k+1}) exceeded F(x_k) beyond the slack.
    pub descent_violations: usize,
    /// Iterations where the strong-convexity descent inequality
    /// Re<g, dx> <= -0.5 ||dx||^2_{2B/alpha - lam_min I} + h_k - h_{k+1}
    /// failed beyond tolerance.
    pub surrogate_descent_violations: usize,
    pub per_iter_calls: Vec<CallCounts>,
    /// Final basis columns (subspace runs only); column prefixes reproduce
    /// the historical bases since columns are only appended.
    pub basis_columns: Option<Vec<ComplexVector>>,
    /// Constrained steps rejected by the monotonicity guard after retries.
    pub stagnation_events: usize,
    /// Iterations that kept the previous metric after a degenerate secant.
    pub metric_reuse_events: usize,
    /// Inner solves that hit inner_max_iter before reaching tolerance.
    pub inner_tol_misses: usize,
    /// Largest entry magnitude over all recorded iterates (feasibility
    /// telemetry for constrained runs).
    pub feasibility_max: f64,
}

impl SolverState {
    /// F(x_k) for k = 1.. (k=1 is the initial point).
    pub fn cost_at(&self, k: usize) -> f64 {
        if k <= 1 {
            self.f_initial
        } else {
            self.records[k - 2].cost
        }
    }

    pub fn final_cost(&self) -> f64 {
        self.records.last().map_or(self.f_initial, |r| r.cost)
    }
}

/// Componentwise magnitude clamp onto the complex unit infinity-norm ball;
/// phases are kept. Nonexpansive, and idempotent up to roundoff.
pub fn project_linf_ball(x: &ComplexVector) -> ComplexVector {
    let data = x
        .iter()
        .map(|z| {
            let mag = z.norm();
            if mag > 1.0 {
                z / mag
            } else {
                *z
            }
        })
        .collect();
    // Magnitudes only shrink, so finiteness is preserved.
    ComplexVector::new(data).expect("projection of finite input is finite")
}
