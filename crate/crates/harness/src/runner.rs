//! Problem construction and the experiment pipeline: simulate data, run the
//! configured solver, write artifacts, and evaluate the convergence-theory
//! diagnostics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gksm_core::solver::{apg_run, cqnpm_run, fstar_protocol, gksm_run, SolverMode, SolverState};
use gksm_core::{ComplexVector, ForwardOperator, Problem, SmoothRegularizer};

use crate::cimg;
use crate::config::{ExperimentConfig, OperatorKind, RegularizerKind};
use crate::csvlog;
use crate::denoise::{gaussian_kernel, GaussianBlurDenoiser};
use crate::error::{HarnessError, Result};
use crate::mask::generate_mask;
use crate::phantom::generate_phantom;
use crate::rates::{fit_geometric_envelope, GeometricFit};
use crate::rng::{Purpose, Stream};
use crate::sense::generate_sensitivities;

pub struct BuiltProblem {
    pub problem: Problem,
    pub x_true: ComplexVector,
    pub height: usize,
    pub width: usize,
}

fn build_regularizer(cfg: &ExperimentConfig) -> Result<SmoothRegularizer> {
    Ok(match cfg.reg_kind {
        RegularizerKind::Tikhonov => SmoothRegularizer::tikhonov(cfg.lambda)?,
        RegularizerKind::HuberTv => {
            SmoothRegularizer::huber_tv(cfg.lambda, cfg.mu, cfg.height, cfg.width)?
        }
        RegularizerKind::LogSmooth => SmoothRegularizer::log_smooth(cfg.lambda, cfg.eps)?,
        RegularizerKind::DenoiserDriven => {
            let d = GaussianBlurDenoiser::new(cfg.height, cfg.width, cfg.denoiser_sigma)?;
            SmoothRegularizer::denoiser_driven(cfg.lambda, Box::new(d))?
        }
    })
}

fn build_operator(cfg: &ExperimentConfig) -> Result<ForwardOperator> {
    let n = cfg.height * cfg.width;
    Ok(match cfg.operator {
        OperatorKind::MaskedFourier => {
            let mask = generate_mask(cfg.height, cfg.width, cfg.mask, cfg.acceleration, cfg.seed)?;
            let sens = generate_sensitivities(cfg.height, cfg.width, cfg.num_coils, cfg.seed)?;
            ForwardOperator::masked_fourier(cfg.height, cfg.width, &mask, sens)?
        }
        OperatorKind::Convolution => {
            let kernel = gaussian_kernel(cfg.height, cfg.width, cfg.kernel_sigma)?;
            ForwardOperator::convolution(cfg.height, cfg.width, &kernel)?
        }
        OperatorKind::Dense => {
            if n > 1024 {
                return Err(HarnessError::Config {
                    key: "problem.operator".into(),
                    reason: format!(
                        "dense operator limited to grids of at most 1024 pixels, got {n}"
                    ),
                });
            }
            let mut stream = Stream::new(cfg.seed, Purpose::Probes);
            let scale = 1.0 / (n as f64).sqrt();
            let entries = (0..n * n)
                .map(|_| stream.complex_normal() * scale)
                .collect();
            ForwardOperator::dense(n, n, entries)?
        }
    })
}

/// Builds the problem instance: ground-truth phantom, operator, simulated
/// data `y = y_scale * (A x_true + noise)`.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<BuiltProblem> {
    cfg.validate()?;
    let x_true = generate_phantom(cfg.height, cfg.width, cfg.phantom, cfg.seed)?;
    let op = build_operator(cfg)?;
    let clean = op.apply(&x_true)?;
    let noisy = crate::noise::add_noise(&clean, cfg.noise_snr_db, cfg.seed)?;
    let y = if cfg.y_scale == 1.0 {
        noisy
    } else {
        noisy.scale_re(cfg.y_scale)
    };
    let reg = build_regularizer(cfg)?;
    Ok(BuiltProblem {
        problem: Problem::new(op, reg, y)?,
        x_true,
        height: cfg.height,
        width: cfg.width,
    })
}

/// Post-run convergence diagnostics.
pub struct Diagnostics {
    pub mode: SolverMode,
    pub f_initial: f64,
    pub f_final: f64,
    pub psnr_db: f64,
    pub descent_violations: usize,
    pub surrogate_descent_violations: usize,
    pub eta_lo: f64,
    pub eta_hi: f64,
    pub lipschitz: f64,
    /// alpha < 2 eta_lo / (eta_lo + L), evaluated with the empirical eta_lo.
    pub alpha_gate_ok: bool,
    pub upsilon_min: f64,
    pub fstar: Option<f64>,
    /// Iterations violating delta_k <= (F(x_1) - F*) / (upsilon_min k) + 1e-9;
    /// evaluated only when F* is available and the step-size gate holds.
    pub delta_bound_violations: Option<usize>,
    /// Iterations violating upsilon ||dx||^2 <= F_k - F_{k+1} + 1e-9 while
    /// the gate holds.
    pub per_iter_bound_violations: Option<usize>,
    /// Geometric-envelope fit on F(x_k) - F* (fit on the first half, checked
    /// on the second) and the number of hold-out violations.
    pub envelope: Option<(GeometricFit, usize)>,
    pub feasibility_max: f64,
    pub constrained: bool,
    pub stagnation_events: usize,
    pub metric_reuse_events: usize,
    pub inner_tol_misses: usize,
    pub surrogate_energy: bool,
    pub wall_time_s: f64,
}

impl Diagnostics {
    /// The checks that gate the process exit code.
    pub fn all_ok(&self) -> bool {
        if self.descent_violations != 0 {
            return false;
        }
        if self.constrained && self.feasibility_max > 1.0 + 1e-9 {
            return false;
        }
        if let Some(v) = self.delta_bound_violations {
            if v != 0 {
                return false;
            }
        }
        true
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode: {}", self.mode.as_str());
        let _ = writeln!(s, "f_initial: {:.16e}", self.f_initial);
        let _ = writeln!(s, "f_final: {:.16e}", self.f_final);
        let _ = writeln!(s, "psnr_db: {:.6}", self.psnr_db);
        let _ = writeln!(s, "wall_time_s: {:.3}", self.wall_time_s);
        let _ = writeln!(s, "descent_violations: {}", self.descent_violations);
        let _ = writeln!(
            s,
            "surrogate_descent_violations: {}",
            self.surrogate_descent_violations
        );
        let _ = writeln!(s, "eta_lo: {:.6e}", self.eta_lo);
        let _ = writeln!(s, "eta_hi: {:.6e}", self.eta_hi);
        let _ = writeln!(s, "grad_lipschitz_bound: {:.6e}", self.lipschitz);
        let _ = writeln!(s, "alpha_gate_ok: {}", self.alpha_gate_ok);
        let _ = writeln!(s, "upsilon_min: {:.6e}", self.upsilon_min);
        match self.fstar {
            Some(f) => {
                let _ = writeln!(s, "fstar: {:.16e}", f);
            }
            None => {
                let _ = writeln!(s, "fstar: none");
            }
        }
        match self.delta_bound_violations {
            Some(v) => {
                let _ = writeln!(s, "delta_bound_violations: {v}");
            }
            None => {
                let _ = writeln!(s, "delta_bound_violations: skipped");
            }
        }
        match self.per_iter_bound_violations {
            Some(v) => {
                let _ = writeln!(s, "per_iter_bound_violations: {v}");
            }
            None => {
                let _ = writeln!(s, "per_iter_bound_violations: skipped");
            }
        }
        match &self.envelope {
            Some((fit, violations)) => {
                let _ = writeln!(
                    s,
                    "envelope_fit: ratio {:.12}, gamma {:.6e}, holdout_violations {}",
                    fit.ratio, fit.gamma, violations
                );
            }
            None => {
                let _ = writeln!(s, "envelope_fit: skipped");
            }
        }
        let _ = writeln!(s, "feasibility_max: {:.12}", self.feasibility_max);
        let _ = writeln!(s, "stagnation_events: {}", self.stagnation_events);
        let _ = writeln!(s, "metric_reuse_events: {}", self.metric_reuse_events);
        let _ = writeln!(s, "inner_tol_misses: {}", self.inner_tol_misses);
        if self.surrogate_energy {
            let _ = writeln!(s, "note: surrogate energy (denoiser without potential)");
        }
        let _ = writeln!(s, "checks_ok: {}", self.all_ok());
        s
    }
}

pub fn compute_diagnostics(
    cfg: &ExperimentConfig,
    built: &BuiltProblem,
    state: &SolverState,
    fstar: Option<f64>,
) -> Result<Diagnostics> {
    let lipschitz = built.problem.reg.lipschitz_bound();
    let eta_lo = state.eta_lo;
    let eta_hi = state.eta_hi;
    let gate = cfg.mode != SolverMode::Apg
        && eta_lo.is_finite()
        && cfg.alpha < 2.0 * eta_lo / (eta_lo + lipschitz);
    let upsilon_min = eta_lo / cfg.alpha - (eta_lo + lipschitz) / 2.0;

    // Theorem-level bound checks require a reference optimum and a positive
    // upsilon.
    let (delta_bound_violations, per_iter_bound_violations) = if gate && upsilon_min > 0.0 {
        let per_iter = {
            let mut violations = 0;
            let mut f_prev = state.f_initial;
            for r in &state.records {
                let drop = f_prev - r.cost;
                if upsilon_min * r.step_norm * r.step_norm > drop + 1e-9 {
                    violations += 1;
                }
                f_prev = r.cost;
            }
            violations
        };
        let delta = fstar.map(|fs| {
            state
                .records
                .iter()
                .filter(|r| {
                    r.delta_k > (state.f_initial - fs) / (upsilon_min * r.iter as f64) + 1e-9
                })
                .count()
        });
        (delta, Some(per_iter))
    } else {
        (None, None)
    };

    // Geometric envelope on the gap sequence when a reference optimum
    // exists: fit on the first half (after a short warmup), verify on the
    // second half. Reported, not exit-gating.
    let envelope = fstar.and_then(|fs| {
        let mut phi = Vec::with_capacity(state.records.len() + 1);
        phi.push(state.f_initial - fs);
        phi.extend(state.records.iter().map(|r| r.cost - fs));
        let mid = phi.len() / 2;
        let warmup = (phi.len() / 10).max(1);
        if warmup + 1 >= mid {
            return None;
        }
        match fit_geometric_envelope(&phi, warmup, mid) {
            Ok(fit) => {
                let violations = fit.violations(&phi, mid, phi.len());
                Some((fit, violations))
            }
            Err(_) => None,
        }
    });

    let psnr_db = crate::noise::psnr(&state.final_x, &built.x_true)?;

    Ok(Diagnostics {
        mode: cfg.mode,
        f_initial: state.f_initial,
        f_final: state.final_cost(),
        psnr_db,
        descent_violations: state.descent_violations,
        surrogate_descent_violations: state.surrogate_descent_violations,
        eta_lo,
        eta_hi,
        lipschitz,
        alpha_gate_ok: gate,
        upsilon_min,
        fstar,
        delta_bound_violations,
        per_iter_bound_violations,
        envelope,
        feasibility_max: state.feasibility_max,
        constrained: cfg.constrained,
        stagnation_events: state.stagnation_events,
        metric_reuse_events: state.metric_reuse_events,
        inner_tol_misses: state.inner_tol_misses,
        surrogate_energy: built.problem.reg.is_surrogate_energy(),
        wall_time_s: state.records.last().map_or(0.0, |r| r.wall_time_s),
    })
}

pub fn dispatch_solver(problem: &Problem, cfg: &ExperimentConfig) -> Result<SolverState> {
    let solver_cfg = cfg.solver_config();
    let state = match cfg.mode {
        SolverMode::Gksm => gksm_run(problem, &solver_cfg, None)?,
        SolverMode::Cqnpm => cqnpm_run(problem, &solver_cfg, None)?,
        SolverMode::Apg => apg_run(problem, &solver_cfg, None)?,
    };
    Ok(state)
}

/// Output paths, resolved from the config with an optional directory
/// override.
pub struct OutputPaths {
    pub log: PathBuf,
    pub image: PathBuf,
    pub summary: PathBuf,
}

pub fn resolve_outputs(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> OutputPaths {
    let dir = out_dir.unwrap_or_else(|| Path::new("."));
    let from_key = |key: &Option<String>, default: &str| -> PathBuf {
        match key {
            Some(p) => {
                let p = Path::new(p);
                if p.is_absolute() || out_dir.is_none() {
                    p.to_path_buf()
                } else {
                    dir.join(p)
                }
            }
            None => dir.join(default),
        }
    };
    OutputPaths {
        log: from_key(&cfg.log_path, "log.csv"),
        image: from_key(&cfg.image_path, "recon.cimg"),
        summary: from_key(&cfg.summary_path, "summary.txt"),
    }
}

/// Runs the full pipeline and writes the iteration log, the reconstructed
/// image, and the diagnostics summary.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Diagnostics> {
    let built = build_problem(cfg)?;
    let fstar = if cfg.fstar_protocol {
        Some(fstar_protocol(
            &built.problem,
            &cfg.solver_config(),
            500,
            cfg.fstar_eps,
        )?)
    } else {
        None
    };
    let state = dispatch_solver(&built.problem, cfg)?;
    if !state.final_x.is_finite() {
        return Err(HarnessError::Numeric("non-finite final iterate".into()));
    }
    let paths = resolve_outputs(cfg, out_dir);
    if let Some(parent) = paths.log.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| HarnessError::io(parent.display().to_string(), e))?;
        }
    }
    csvlog::write_csv(&paths.log, &state)?;
    cimg::write_cimg(&paths.image, built.height, built.width, &state.final_x)?;
    let diagnostics = compute_diagnostics(cfg, &built, &state, fstar)?;
    std::fs::write(&paths.summary, diagnostics.render())
        .map_err(|e| HarnessError::io(paths.summary.display().to_string(), e))?;
    Ok(diagnostics)
}
