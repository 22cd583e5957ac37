//! Command-line experiment driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gksm_harness::csvlog::read_costs;
use gksm_harness::rates::{fit_geometric_envelope, kl_rate_envelope, RateEnvelope};
use gksm_harness::rng::{Purpose, Stream};
use gksm_harness::{load_config, run_experiment, HarnessError};

#[derive(Parser)]
#[command(name = "gksm", about = "Subspace solver experiment harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment: simulate, solve, write log/image/summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for output artifacts (log.csv, recon.cimg, summary.txt).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the forward/adjoint pair of the configured operator.
    AdjointTest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Verify the configured regularizer gradient by finite differences.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit a convergence-rate envelope to an iteration log.
    Rates {
        #[arg(long)]
        log: PathBuf,
        /// KL exponent of the envelope to report.
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        /// Reference optimum; defaults to the smallest cost in the log minus
        /// a relative epsilon.
        #[arg(long)]
        fstar: Option<f64>,
    },
    /// Render cost and delta_k versus iteration to a PNG.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let diagnostics = run_experiment(&cfg, out.as_deref())?;
            print!("{}", diagnostics.render());
            if diagnostics.all_ok() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("error: invariant checks failed (see summary)");
                Ok(ExitCode::from(2))
            }
        }
        Command::AdjointTest { config } => {
            let cfg = load_config(&config)?;
            let built = gksm_harness::build_problem(&cfg)?;
            let op = &built.problem.op;
            let mut stream = Stream::new(cfg.seed ^ 0x5eed, Purpose::Probes);
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let x = gksm_core::ComplexVector::new(
                    (0..op.domain_dim()).map(|_| stream.complex_normal()).collect(),
                )?;
                let z = gksm_core::ComplexVector::new(
                    (0..op.range_dim()).map(|_| stream.complex_normal()).collect(),
                )?;
                let ax = op.apply(&x)?;
                let ahz = op.adjoint(&z)?;
                let lhs = gksm_core::inner(&ax, &z)?;
                let rhs = gksm_core::inner(&x, &ahz)?;
                let scale = (ax.norm() * z.norm()).max(f64::MIN_POSITIVE);
                worst = worst.max((lhs - rhs).norm() / scale);
            }
            println!("max_dot_test_error: {worst:.3e}");
            if worst <= 1e-10 {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("error: adjoint inconsistency {worst:.3e} exceeds 1e-10");
                Ok(ExitCode::from(2))
            }
        }
        Command::Gradcheck { config } => {
            let cfg = load_config(&config)?;
            let built = gksm_harness::build_problem(&cfg)?;
            let mut stream = Stream::new(cfg.seed ^ 0x97ad, Purpose::Probes);
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let x = gksm_core::ComplexVector::new(
                    (0..built.problem.op.domain_dim())
                        .map(|_| stream.complex_normal() * 0.5)
                        .collect(),
                )?;
                let err =
                    built
                        .problem
                        .reg
                        .fd_gradient_check(&x, 20, 1e-5, stream.next_u64())?;
                worst = worst.max(err);
            }
            println!("max_fd_error: {worst:.3e}");
            if worst <= 1e-6 {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("error: gradient check {worst:.3e} exceeds 1e-6");
                Ok(ExitCode::from(2))
            }
        }
        Command::Rates { log, t, fstar } => {
            let rows = read_costs(&log)?;
            if rows.len() < 8 {
                return Err(HarnessError::Numeric(
                    "need at least 8 iterations to fit rates".into(),
                ));
            }
            let min_cost = rows.iter().map(|&(_, c, _)| c).fold(f64::INFINITY, f64::min);
            let fstar = fstar.unwrap_or_else(|| min_cost - 1e-8 * (1.0 + min_cost.abs()));
            let phi: Vec<f64> = rows.iter().map(|&(_, c, _)| c - fstar).collect();
            let mid = phi.len() / 2;
            let warmup = (phi.len() / 10).max(1);

            // t = 1/2 geometric ratio fit; for other exponents fit gamma from
            // the recursion phi_{k+1}^{2t} <= gamma (phi_k - phi_{k+1}).
            if (t - 0.5).abs() < 1e-12 {
                let fit = fit_geometric_envelope(&phi, warmup, mid)?;
                let violations = fit.violations(&phi, mid, phi.len());
                println!("t: 0.5");
                println!("fitted_ratio: {:.12}", fit.ratio);
                println!("fitted_gamma: {:.6e}", fit.gamma);
                println!("holdout_violations: {violations}");
                if violations == 0 {
                    Ok(ExitCode::SUCCESS)
                } else {
                    eprintln!("error: envelope violated on the hold-out window");
                    Ok(ExitCode::from(2))
                }
            } else {
                let mut gamma: f64 = 0.0;
                for k in warmup..mid.saturating_sub(1) {
                    let drop = phi[k] - phi[k + 1];
                    if drop > 0.0 {
                        gamma = gamma.max(phi[k + 1].powf(2.0 * t) / drop);
                    }
                }
                if gamma == 0.0 {
                    return Err(HarnessError::Numeric(
                        "cannot fit gamma: no decreasing steps in the fit window".into(),
                    ));
                }
                gamma *= 1.0 + 1e-9;
                let env = RateEnvelope {
                    t,
                    gamma,
                    phi1: phi[warmup],
                    sigma: 0.5,
                };
                let mut violations = 0;
                for k in mid..phi.len() {
                    let bound = kl_rate_envelope(&env, k - warmup)?;
                    if phi[k] > bound {
                        violations += 1;
                    }
                }
                println!("t: {t}");
                println!("fitted_gamma: {gamma:.6e}");
                println!("holdout_violations: {violations}");
                if violations == 0 {
                    Ok(ExitCode::SUCCESS)
                } else {
                    eprintln!("error: envelope violated on the hold-out window");
                    Ok(ExitCode::from(2))
                }
            }
        }
        Command::Plot { log, out } => {
            gksm_harness::plot::plot_log(&log, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
