//! Flat `key = value` experiment configuration. Dotted keys group related
//! settings; `#` starts a comment; unknown keys are rejected so typos fail
//! loudly.

use std::collections::BTreeMap;
use std::path::Path;

use gksm_core::metric::MetricParams;
use gksm_core::solver::SolverMode;

use crate::error::{HarnessError, Result};
use crate::mask::MaskKind;
use crate::phantom::PhantomKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    MaskedFourier,
    Convolution,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerKind {
    Tikhonov,
    HuberTv,
    LogSmooth,
    DenoiserDriven,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub height: usize,
    pub width: usize,
    pub operator: OperatorKind,
    pub mask: MaskKind,
    pub acceleration: f64,
    pub num_coils: usize,
    pub noise_snr_db: f64,
    pub seed: u64,
    pub phantom: PhantomKind,
    /// Gaussian width of the convolution kernel (convolution operator only).
    pub kernel_sigma: f64,
    /// Extra scaling applied to the simulated data, used to construct
    /// instances with binding constraints.
    pub y_scale: f64,

    pub reg_kind: RegularizerKind,
    pub lambda: f64,
    pub mu: f64,
    pub eps: f64,
    /// Blur width of the built-in denoiser for the adapter kind.
    pub denoiser_sigma: f64,

    pub metric: MetricParams,

    pub mode: SolverMode,
    pub alpha: f64,
    /// Subspace-phase length K; defaults to max_iter.
    pub subspace_iters: usize,
    pub max_iter: usize,
    pub constrained: bool,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub restart_period: usize,
    pub solver_seed: u64,

    pub log_path: Option<String>,
    pub image_path: Option<String>,
    pub summary_path: Option<String>,
    pub fstar_protocol: bool,
    /// Override for the protocol's subtracted epsilon; the default is
    /// 1e-8 (1 + |F(x_500)|).
    pub fstar_eps: Option<f64>,
}

fn bad(key: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

struct Raw {
    map: BTreeMap<String, String>,
}

impl Raw {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| bad(key, format!("cannot parse '{v}'"))),
        }
    }

    fn parse_opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| bad(key, format!("cannot parse '{v}'"))),
        }
    }

    fn parse_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "true" | "on" | "1" | "yes" => Ok(true),
                "false" | "off" | "0" | "no" => Ok(false),
                other => Err(bad(key, format!("expected a boolean, got '{other}'"))),
            },
        }
    }

    /// Accepts a float or the sentinel "inf" for noise-free simulation.
    fn parse_snr(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) if v == "inf" => Ok(f64::INFINITY),
            Some(v) => v.parse().map_err(|_| bad(key, format!("cannot parse '{v}'"))),
        }
    }
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(bad(
                "config",
                format!("line {}: expected 'key = value', got '{line}'", lineno + 1),
            ));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if map.insert(key.clone(), value).is_some() {
            return Err(bad(&key, "duplicate key"));
        }
    }
    let mut raw = Raw { map };

    let height = raw.parse("problem.height", 64usize)?;
    let width = raw.parse("problem.width", 64usize)?;
    let operator = match raw.take("problem.operator").as_deref() {
        None | Some("masked_fourier") => OperatorKind::MaskedFourier,
        Some("convolution") => OperatorKind::Convolution,
        Some("dense") => OperatorKind::Dense,
        Some(other) => return Err(bad("problem.operator", format!("unknown kind '{other}'"))),
    };
    let mask = match raw.take("problem.mask").as_deref() {
        None | Some("cartesian_vd") => MaskKind::CartesianVd,
        Some("pseudo_radial") => MaskKind::PseudoRadial,
        Some("full") => MaskKind::Full,
        Some(other) => return Err(bad("problem.mask", format!("unknown kind '{other}'"))),
    };
    let acceleration = raw.parse("problem.acceleration", 4.0f64)?;
    let num_coils = raw.parse("problem.num_coils", 4usize)?;
    let noise_snr_db = raw.parse_snr("problem.noise_snr_db", f64::INFINITY)?;
    let seed = raw.parse("problem.seed", 0u64)?;
    let phantom = match raw.take("problem.phantom").as_deref() {
        None | Some("shepp_logan") => PhantomKind::SheppLogan,
        Some("smooth_bumps") => PhantomKind::SmoothBumps,
        Some(other) => return Err(bad("problem.phantom", format!("unknown kind '{other}'"))),
    };
    let kernel_sigma = raw.parse("problem.kernel_sigma", 1.5f64)?;
    let y_scale = raw.parse("problem.y_scale", 1.0f64)?;

    let reg_kind = match raw.take("regularizer.kind").as_deref() {
        None | Some("tikhonov") => RegularizerKind::Tikhonov,
        Some("huber_tv") => RegularizerKind::HuberTv,
        Some("log_smooth") => RegularizerKind::LogSmooth,
        Some("denoiser_driven") => RegularizerKind::DenoiserDriven,
        Some(other) => return Err(bad("regularizer.kind", format!("unknown kind '{other}'"))),
    };
    let lambda = raw.parse("regularizer.lambda", 0.1f64)?;
    let mu = raw.parse("regularizer.mu", 0.01f64)?;
    let eps = raw.parse("regularizer.eps", 0.01f64)?;
    let denoiser_sigma = raw.parse("regularizer.denoiser_sigma", 1.0f64)?;

    let metric = MetricParams {
        delta: raw.parse("metric.delta", 1e-8f64)?,
        nu1: raw.parse("metric.nu1", 2e-6f64)?,
        nu2: raw.parse("metric.nu2", 200.0f64)?,
    };

    let mode = match raw.take("solver.mode").as_deref() {
        None | Some("gksm") => SolverMode::Gksm,
        Some("cqnpm") => SolverMode::Cqnpm,
        Some("apg") => SolverMode::Apg,
        Some(other) => return Err(bad("solver.mode", format!("unknown mode '{other}'"))),
    };
    let alpha = raw.parse("solver.alpha", 1.0f64)?;
    let max_iter = raw.parse("solver.max_iter", 150usize)?;
    let subspace_iters = raw.parse("solver.k", max_iter)?;
    let constrained = raw.parse_bool("solver.constrained", false)?;
    let inner_tol = raw.parse("solver.inner_tol", 1e-8f64)?;
    let inner_max_iter = raw.parse("solver.inner_max_iter", 500usize)?;
    let restart_period = raw.parse("solver.restart_period", 0usize)?;
    let solver_seed = raw.parse("solver.seed", 0u64)?;

    let log_path = raw.take("output.log_path");
    let image_path = raw.take("output.image_path");
    let summary_path = raw.take("output.summary_path");
    let fstar_protocol = raw.parse_bool("output.fstar_protocol", false)?;
    let fstar_eps = raw.parse_opt("output.fstar_eps")?;

    if let Some(key) = raw.map.keys().next() {
        return Err(bad(key, "unknown key"));
    }

    let cfg = ExperimentConfig {
        height,
        width,
        operator,
        mask,
        acceleration,
        num_coils,
        noise_snr_db,
        seed,
        phantom,
        kernel_sigma,
        y_scale,
        reg_kind,
        lambda,
        mu,
        eps,
        denoiser_sigma,
        metric,
        mode,
        alpha,
        subspace_iters,
        max_iter,
        constrained,
        inner_tol,
        inner_max_iter,
        restart_period,
        solver_seed,
        log_path,
        image_path,
        summary_path,
        fstar_protocol,
        fstar_eps,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    parse_config_str(&text)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height < 8 || self.width < 8 {
            return Err(bad("problem.height", "grid must be at least 8 x 8"));
        }
        if self.acceleration < 1.0 {
            return Err(bad("problem.acceleration", "must be at least 1"));
        }
        if self.num_coils == 0 {
            return Err(bad("problem.num_coils", "must be positive"));
        }
        if !(self.y_scale > 0.0) {
            return Err(bad("problem.y_scale", "must be positive"));
        }
        if !(self.lambda > 0.0) {
            return Err(bad("regularizer.lambda", "must be positive"));
        }
        if !(self.mu > 0.0) {
            return Err(bad("regularizer.mu", "must be positive"));
        }
        if !(self.eps > 0.0) {
            return Err(bad("regularizer.eps", "must be positive"));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(bad("solver.alpha", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(bad("solver.max_iter", "must be at least 1"));
        }
        if self.subspace_iters > self.max_iter {
            return Err(bad("solver.k", "must not exceed solver.max_iter"));
        }
        if !(self.inner_tol > 0.0) {
            return Err(bad("solver.inner_tol", "must be positive"));
        }
        if self.inner_max_iter == 0 {
            return Err(bad("solver.inner_max_iter", "must be at least 1"));
        }
        if !(self.metric.delta > 0.0) {
            return Err(bad("metric.delta", "must be positive"));
        }
        if !(self.metric.nu1 > 0.0 && self.metric.nu1 < 1.0) {
            return Err(bad("metric.nu1", "must lie in (0, 1)"));
        }
        if !(self.metric.nu2 > 1.0) {
            return Err(bad("metric.nu2", "must exceed 1"));
        }
        Ok(())
    }

    pub fn solver_config(&self) -> gksm_core::SolverConfig {
        gksm_core::SolverConfig {
            mode: self.mode,
            alpha: self.alpha,
            subspace_iters: self.subspace_iters,
            max_iter: self.max_iter,
            constrained: self.constrained,
            inner_tol: self.inner_tol,
            inner_max_iter: self.inner_max_iter,
            restart_period: self.restart_period,
            seed: self.solver_seed,
            metric: self.metric,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_with_empty_config() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg.height, 64);
        assert_eq!(cfg.mode, SolverMode::Gksm);
        assert_eq!(cfg.subspace_iters, cfg.max_iter);
        assert_eq!(cfg.metric.delta, 1e-8);
        assert_eq!(cfg.metric.nu1, 2e-6);
        assert_eq!(cfg.metric.nu2, 200.0);
        assert!(cfg.noise_snr_db.is_infinite());
    }

    #[test]
    fn parses_values_and_comments() {
        let text = "
# a comment
problem.height = 32
problem.width = 32
problem.noise_snr_db = 21   # inline comment
solver.mode = cqnpm
solver.alpha = 0.5
solver.constrained = true
";
        let cfg = parse_config_str(text).unwrap();
        assert_eq!(cfg.height, 32);
        assert_eq!(cfg.noise_snr_db, 21.0);
        assert_eq!(cfg.mode, SolverMode::Cqnpm);
        assert!(cfg.constrained);
    }

    #[test]
    fn negative_alpha_names_the_key() {
        let err = parse_config_str("solver.alpha = -1.0").unwrap_err();
        assert!(err.to_string().contains("solver.alpha"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config_str("solver.alhpa = 1.0").unwrap_err();
        assert!(err.to_string().contains("solver.alhpa"));
    }

    #[test]
    fn k_defaults_to_max_iter_and_is_bounded() {
        let cfg = parse_config_str("solver.max_iter = 70").unwrap();
        assert_eq!(cfg.subspace_iters, 70);
        let err = parse_config_str("solver.max_iter = 10\nsolver.k = 20").unwrap_err();
        assert!(err.to_string().contains("solver.k"));
    }

    #[test]
    fn snr_sentinel() {
        let cfg = parse_config_str("problem.noise_snr_db = inf").unwrap();
        assert!(cfg.noise_snr_db.is_infinite());
    }
}
