//! The subspace solver run loop and its full-space (quasi-Newton proximal)
//! limit. Both share the same iteration machinery: the full-space mode is
//! the subspace solver with zero subspace-phase iterations, which also makes
//! the mode-equivalence property hold by construction.

use std::time::Instant;

use crate::basis::{AppendOutcome, DEFAULT_DROP_TOL};
use crate::error::Result;
use crate::metric::{build_metric, RankOneMetric};
use crate::vector::{re_inner, ComplexVector};

use super::inner::{accelerated_minimize, SurrogateModel};
use super::reduced::{
    enrichment_residual, reduced_constrained_solve, reduced_unconstrained_solve, ReducedContext,
};
use super::subspace::SubspaceBasis;
use super::{
    CallCounts, EnrichOutcome, IterationRecord, Problem, SolverConfig, SolverState, DESCENT_SLACK,
};

/// Runs the generalized Krylov subspace solver: subspace iterations for
/// k <= K, full-space surrogate minimization afterwards.
pub fn gksm_run(
    problem: &Problem,
    cfg: &SolverConfig,
    x1: Option<ComplexVector>,
) -> Result<SolverState> {
    run_composite(problem, cfg, x1, cfg.subspace_iters)
}

/// The full-space quasi-Newton proximal reference: every iteration minimizes
/// the full surrogate by accelerated (projected) gradient.
pub fn cqnpm_run(
    problem: &Problem,
    cfg: &SolverConfig,
    x1: Option<ComplexVector>,
) -> Result<SolverState> {
    run_composite(problem, cfg, x1, 0)
}

/// Full-space surrogate
/// `0.5 ||A x - y||^2 + Re<g_k, x - x_k> + (1/(2 alpha)) ||x - x_k||^2_B`;
/// its value at x_k is exactly h(x_k), which the monotonicity guard uses.
struct FullSpaceModel<'a> {
    problem: &'a Problem,
    g_k: &'a ComplexVector,
    x_k: &'a ComplexVector,
    metric: &'a RankOneMetric,
    alpha: f64,
    lipschitz: f64,
}

impl SurrogateModel for FullSpaceModel<'_> {
    fn value(&self, z: &ComplexVector) -> f64 {
        let az = self.problem.op.apply(z).expect("dimension fixed");
        let dev = z.sub(self.x_k);
        let bdev = self.metric.apply(&dev).expect("dimension fixed");
        0.5 * az.sub(&self.problem.y).norm_sqr()
            + re_inner(self.g_k, &dev).expect("dimension fixed")
            + 0.5 / self.alpha * re_inner(&dev, &bdev).expect("dimension fixed")
    }

    fn grad(&self, z: &ComplexVector) -> ComplexVector {
        let az = self.problem.op.apply(z).expect("dimension fixed");
        let data = self
            .problem
            .op
            .adjoint(&az.sub(&self.problem.y))
            .expect("dimension fixed");
        let dev = z.sub(self.x_k);
        let prox = self
            .metric
            .apply(&dev)
            .expect("dimension fixed")
            .scale_re(1.0 / self.alpha);
        data.add(self.g_k).add(&prox)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

struct StepOutcome {
    x_next: ComplexVector,
    ax_next: ComplexVector,
    gradmap: f64,
    stagnated: bool,
    tol_missed: bool,
}

/// True surrogate value at a candidate, used by the monotonicity guard
/// (costs one operator application).
fn surrogate_at(
    problem: &Problem,
    g_k: &ComplexVector,
    x_k: &ComplexVector,
    metric: &RankOneMetric,
    alpha: f64,
    cand: &ComplexVector,
) -> Result<(f64, ComplexVector)> {
    let ax = problem.op.apply(cand)?;
    let dev = cand.sub(x_k);
    let bdev = metric.apply(&dev)?;
    let fbar = 0.5 * ax.sub(&problem.y).norm_sqr()
        + re_inner(g_k, &dev)?
        + 0.5 / alpha * re_inner(&dev, &bdev)?;
    Ok((fbar, ax))
}

/// One full-space iteration: accelerated (projected) gradient on the
/// surrogate to tolerance, with the monotonicity guard (retry at tighter
/// tolerance up to 3 times, then keep x_k).
#[allow(clippy::too_many_arguments)]
fn full_space_step(
    problem: &Problem,
    g_k: &ComplexVector,
    x_k: &ComplexVector,
    ax_k: &ComplexVector,
    h_k: f64,
    metric: &RankOneMetric,
    alpha: f64,
    opnorm_sq: f64,
    inner_tol: f64,
    inner_max_iter: usize,
    constrained: bool,
) -> Result<StepOutcome> {
    let (_, lam_max) = metric.extremal_eigs();
    let model = FullSpaceModel {
        problem,
        g_k,
        x_k,
        metric,
        alpha,
        lipschitz: opnorm_sq + lam_max / alpha,
    };
    let mut tol = inner_tol;
    let mut tol_missed = false;
    for _attempt in 0..4 {
        let res = accelerated_minimize(&model, x_k, constrained, tol, inner_max_iter);
        tol_missed |= !res.converged;
        // The inner solver starts at x_k and tracks the best value, so the
        // surrogate cannot increase; the guard stays as a safety net against
        // numerically inconsistent evaluations.
        if res.value <= h_k + 1e-12 * (1.0 + h_k.abs()) {
            let ax_next = problem.op.apply(&res.z)?;
            return Ok(StepOutcome {
                x_next: res.z,
                ax_next,
                gradmap: res.gradmap_norm,
                stagnated: false,
                tol_missed,
            });
        }
        tol /= 10.0;
    }
    Ok(StepOutcome {
        x_next: x_k.clone(),
        ax_next: ax_k.clone(),
        gradmap: f64::INFINITY,
        stagnated: true,
        tol_missed,
    })
}

fn run_composite(
    problem: &Problem,
    cfg: &SolverConfig,
    x1: Option<ComplexVector>,
    k_subspace: usize,
) -> Result<SolverState> {
    cfg.validate()?;
    let op = &problem.op;
    let n = op.domain_dim();

    let mut x_k = match x1 {
        Some(x) => {
            if x.len() != n {
                return Err(crate::error::Error::DimensionMismatch {
                    context: "gksm_run (x1)",
                    expected: n,
                    actual: x.len(),
                });
            }
            x
        }
        None => ComplexVector::zeros(n),
    };
    if cfg.constrained {
        x_k = super::project_linf_ball(&x_k);
    }

    // Setup work (excluded from the per-iteration operator budget): the
    // initial basis direction A^H y, its image, A x_1 for a nonzero start,
    // and the operator-norm estimate for full-space step sizes.
    let ahy = op.adjoint(&problem.y)?;
    let mut basis = if k_subspace > 0 {
        if ahy.norm() == 0.0 {
            return Err(crate::error::Error::DegenerateProblem(
                "A^H y vanishes; no initial subspace direction",
            ));
        }
        let mut b = SubspaceBasis::from_direction(op, &ahy)?;
        if x_k.norm() > 0.0 {
            // A nonzero start must lie in the subspace for the reduced solve
            // to be a descent step.
            b.append_residual(op, &x_k, DEFAULT_DROP_TOL)?;
        }
        Some(b)
    } else {
        None
    };
    let ax_k0 = if x_k.norm() == 0.0 {
        ComplexVector::zeros(op.range_dim())
    } else {
        op.apply(&x_k)?
    };
    let opnorm_sq = if k_subspace < cfg.max_iter {
        op.estimate_opnorm(100, cfg.seed)?
    } else {
        0.0
    };

    let mut ax_k = ax_k0;
    let (mut f_k, mut h_k) = problem.cost_with_ax(&x_k, &ax_k)?;
    let f_initial = f_k;
    let data_term_initial = h_k;

    let mut metric = RankOneMetric::identity(n);
    let mut g_prev: Option<ComplexVector> = None;
    let mut x_prev: Option<ComplexVector> = None;

    let mut records = Vec::with_capacity(cfg.max_iter);
    let mut per_iter_calls = Vec::with_capacity(cfg.max_iter);
    let mut delta_k = f64::INFINITY;
    let mut eta_lo = f64::INFINITY;
    let mut eta_hi = f64::NEG_INFINITY;
    let mut descent_violations = 0;
    let mut surrogate_descent_violations = 0;
    let mut stagnation_events = 0;
    let mut metric_reuse_events = 0;
    let mut inner_tol_misses = 0;
    let mut feasibility_max = x_k.max_abs();

    let timer = Instant::now();

    for k in 1..=cfg.max_iter {
        let applies0 = op.apply_count();
        let adjoints0 = op.adjoint_count();

        let g_k = problem.reg.grad(&x_k)?;
        if let (Some(xp), Some(gp)) = (&x_prev, &g_prev) {
            match build_metric(xp, &x_k, gp, &g_k, &cfg.metric) {
                Ok(b) => metric = b,
                Err(crate::error::Error::DegenerateStep(_)) => {
                    // Stalled iterate: keep the previous metric.
                    metric_reuse_events += 1;
                }
                Err(e) => return Err(e),
            }
        }
        let (lam_lo, lam_hi) = metric.extremal_eigs();
        eta_lo = eta_lo.min(lam_lo);
        eta_hi = eta_hi.max(lam_hi);

        let in_subspace_phase = k <= k_subspace;
        let (x_next, ax_next, gradmap, enrich, subspace_dim) = if in_subspace_phase {
            let b = basis.as_mut().expect("basis exists in subspace phase");
            let dim_used = b.dim();
            let (x_next, ax_next, gradmap_inner) = if !cfg.constrained {
                let ctx = ReducedContext {
                    basis: b,
                    metric: &metric,
                    alpha: cfg.alpha,
                    grad_xk: &g_k,
                    x_k: &x_k,
                    y: &problem.y,
                    ahy: &ahy,
                };
                let (_beta, x_next, ax_next) = reduced_unconstrained_solve(&ctx)?;
                (x_next, ax_next, None)
            } else {
                // Constrained: the feasible minimizer of the lifted
                // objective is the next iterate; the guard re-checks the
                // true surrogate since the lifted data term only sees the
                // subspace component.
                let mut tol = cfg.inner_tol;
                let mut accepted: Option<(ComplexVector, ComplexVector, f64)> = None;
                for _attempt in 0..4 {
                    let ctx = ReducedContext {
                        basis: b,
                        metric: &metric,
                        alpha: cfg.alpha,
                        grad_xk: &g_k,
                        x_k: &x_k,
                        y: &problem.y,
                        ahy: &ahy,
                    };
                    let res = reduced_constrained_solve(&ctx, tol, cfg.inner_max_iter)?;
                    if !res.converged {
                        inner_tol_misses += 1;
                    }
                    let (fbar, ax_cand) =
                        surrogate_at(problem, &g_k, &x_k, &metric, cfg.alpha, &res.x_next)?;
                    if fbar <= h_k + 1e-12 * (1.0 + h_k.abs()) {
                        accepted = Some((res.x_next, ax_cand, res.gradmap_norm));
                        break;
                    }
                    tol /= 10.0;
                }
                match accepted {
                    Some((x_next, ax_next, gm)) => (x_next, ax_next, Some(gm)),
                    None => {
                        stagnation_events += 1;
                        (x_k.clone(), ax_k.clone(), Some(f64::INFINITY))
                    }
                }
            };

            // Enrichment: the surrogate gradient at the new iterate (one
            // adjoint), then either the cyclic restart or the orthonormal
            // append (one apply each).
            let r = enrichment_residual(
                op, &metric, cfg.alpha, &x_next, &x_k, &g_k, &ax_next, &problem.y,
            )?;
            let gradmap = gradmap_inner.unwrap_or_else(|| r.norm());
            let outcome = if cfg.restart_period > 0 && k % cfg.restart_period == 0 {
                if b.reset_to(op, &x_next)? {
                    EnrichOutcome::Restarted
                } else {
                    EnrichOutcome::Skipped
                }
            } else {
                match b.append_residual(op, &r, DEFAULT_DROP_TOL)? {
                    AppendOutcome::Appended => EnrichOutcome::Appended,
                    AppendOutcome::Skipped => EnrichOutcome::Skipped,
                }
            };
            (x_next, ax_next, gradmap, outcome, dim_used)
        } else {
            let step = full_space_step(
                problem,
                &g_k,
                &x_k,
                &ax_k,
                h_k,
                &metric,
                cfg.alpha,
                opnorm_sq,
                cfg.inner_tol,
                cfg.inner_max_iter,
                cfg.constrained,
            )?;
            if step.stagnated {
                stagnation_events += 1;
            }
            if step.tol_missed {
                inner_tol_misses += 1;
            }
            (
                step.x_next,
                step.ax_next,
                step.gradmap,
                EnrichOutcome::FullSpace,
                n,
            )
        };

        let (f_next, h_next) = problem.cost_with_ax(&x_next, &ax_next)?;
        feasibility_max = feasibility_max.max(x_next.max_abs());
        let step_vec = x_next.sub(&x_k);
        let step_norm = step_vec.norm();
        delta_k = delta_k.min(step_norm * step_norm);

        if f_next > f_k + DESCENT_SLACK * (1.0 + f_k.abs()) {
            descent_violations += 1;
        }
        // Strong-convexity descent inequality of the exact subproblem:
        // Re<g, dx> <= -0.5 ||dx||^2_{2B/alpha - lam_lo I} + h_k - h_{k+1}.
        {
            let bdx = metric.apply(&step_vec)?;
            let quad = 2.0 / cfg.alpha * re_inner(&step_vec, &bdx)?
                - lam_lo * step_norm * step_norm;
            let lhs = re_inner(&g_k, &step_vec)?;
            let rhs = -0.5 * quad + h_k - h_next;
            if lhs > rhs + 1e-9 * (1.0 + lhs.abs() + rhs.abs()) {
                surrogate_descent_violations += 1;
            }
        }

        per_iter_calls.push(CallCounts {
            applies: op.apply_count() - applies0,
            adjoints: op.adjoint_count() - adjoints0,
            grads: 1,
        });
        records.push(IterationRecord {
            iter: k,
            wall_time_s: timer.elapsed().as_secs_f64(),
            cost: f_next,
            data_term: h_next,
            step_norm,
            delta_k,
            gradmap_norm: gradmap,
            subspace_dim,
            lam_min: lam_lo,
            lam_max: lam_hi,
            enrich,
        });

        x_prev = Some(std::mem::replace(&mut x_k, x_next));
        g_prev = Some(g_k);
        ax_k = ax_next;
        f_k = f_next;
        h_k = h_next;
    }

    Ok(SolverState {
        final_x: x_k,
        f_initial,
        data_term_initial,
        records,
        eta_lo,
        eta_hi,
        descent_violations,
        surrogate_descent_violations,
        per_iter_calls,
        basis_columns: basis.map(|b| b.columns().to_vec()),
        stagnation_events,
        metric_reuse_events,
        inner_tol_misses,
        feasibility_max,
    })
}
