//! Self-scaling Hermitian rank-1 Hessian surrogate, stored implicitly as
//! `B = tau^{-1} I - u u^H / rho_b` (or `tau^{-1} I` when the rank-1 part is
//! dropped). Positive definiteness holds by construction: the rank-1 term is
//! kept only when `rho > delta ||s - tau m|| ||m||`, which forces
//! `lambda_min = tau rho / rho_b > 0`.

use crate::error::{Error, Result};
use crate::vector::{dot_unchecked, re_inner, ComplexVector};

/// Curvature-mixing and degeneracy thresholds for the metric update.
#[derive(Debug, Clone, Copy)]
pub struct MetricParams {
    /// Rank-1 drop threshold.
    pub delta: f64,
    /// Lower bound on the normalized secant curvature, in (0, 1).
    pub nu1: f64,
    /// Upper bound on the curvature ratio, in (1, inf).
    pub nu2: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            delta: 1e-8,
            nu1: 2e-6,
            nu2: 200.0,
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParam {
                name: "metric.delta",
                reason: "must be positive".into(),
            });
        }
        if !(self.nu1 > 0.0 && self.nu1 < 1.0) {
            return Err(Error::InvalidParam {
                name: "metric.nu1",
                reason: "must lie in (0, 1)".into(),
            });
        }
        if !(self.nu2 > 1.0) {
            return Err(Error::InvalidParam {
                name: "metric.nu2",
                reason: "must exceed 1".into(),
            });
        }
        Ok(())
    }
}

/// The implicit Hessian surrogate.
#[derive(Debug, Clone)]
pub struct RankOneMetric {
    tau: f64,
    /// Rank-1 direction; `None` when the update degenerated to a scaled
    /// identity.
    u: Option<ComplexVector>,
    /// `tau^2 rho + tau ||u||^2`, defined when `u` is present.
    rho_b: f64,
    /// `Re<s - tau m, m>`, retained for the closed-form inverse.
    rho: f64,
    dim: usize,
}

impl RankOneMetric {
    /// The identity metric used before the first secant pair exists; makes
    /// the first iteration a plain gradient step.
    pub fn identity(dim: usize) -> Self {
        Self {
            tau: 1.0,
            u: None,
            rho_b: 0.0,
            rho: 0.0,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn has_rank_one_term(&self) -> bool {
        self.u.is_some()
    }

    /// The rank-1 direction and its normalizer rho_b, when present.
    pub fn rank_one_part(&self) -> Option<(&ComplexVector, f64)> {
        self.u.as_ref().map(|u| (u, self.rho_b))
    }

    /// `B x`.
    pub fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "RankOneMetric::apply",
                expected: self.dim,
                actual: x.len(),
            });
        }
        let mut out = x.scale_re(1.0 / self.tau);
        if let Some(u) = &self.u {
            let coeff = dot_unchecked(u, x) / self.rho_b;
            out.axpy_in_place(-coeff, u);
        }
        Ok(out)
    }

    /// `B^{-1} x` via the closed form `B^{-1} = tau I + u u^H / rho`, an
    /// algebraic consequence of `rho_b = tau^2 rho + tau u^H u` (validated by
    /// the round-trip tests rather than assumed).
    pub fn apply_inv(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "RankOneMetric::apply_inv",
                expected: self.dim,
                actual: x.len(),
            });
        }
        let mut out = x.scale_re(self.tau);
        if let Some(u) = &self.u {
            if self.rho <= 0.0 {
                return Err(Error::DegenerateProblem(
                    "rank-one metric with nonpositive rho",
                ));
            }
            let coeff = dot_unchecked(u, x) / self.rho;
            out.axpy_in_place(coeff, u);
        }
        Ok(out)
    }

    /// Closed-form extremal eigenvalues: `lambda_max = tau^{-1}` and
    /// `lambda_min = tau^{-1} - ||u||^2 / rho_b` (equal when `u` is absent).
    pub fn extremal_eigs(&self) -> (f64, f64) {
        let lam_max = 1.0 / self.tau;
        match &self.u {
            None => (lam_max, lam_max),
            Some(u) => (lam_max - u.norm_sqr() / self.rho_b, lam_max),
        }
    }
}

/// Finds the minimal `a` in [0, 1] such that `m_mix = a s + (1 - a) m`
/// satisfies both curvature conditions
/// `nu1 <= Re<s, m_mix> / <s, s>` and `<m_mix, m_mix> / Re<s, m_mix> <= nu2`.
///
/// Both constraints are scalar in `a` (one linear, one convex quadratic), so
/// the feasible set is an interval containing a = 1; we take the closed-form
/// infimum with a 1e-12 interior nudge against boundary roundoff.
pub fn mix_coefficient(
    s: &ComplexVector,
    m: &ComplexVector,
    nu1: f64,
    nu2: f64,
) -> Result<(f64, ComplexVector)> {
    if s.len() != m.len() {
        return Err(Error::DimensionMismatch {
            context: "mix_coefficient",
            expected: s.len(),
            actual: m.len(),
        });
    }
    let s_sq = s.norm_sqr();
    if s_sq == 0.0 {
        return Err(Error::DegenerateStep("mix_coefficient"));
    }
    let pr = re_inner(s, m)?;
    let m_sq = m.norm_sqr();

    // Constraint 1: a (S - pr) >= nu1 S - pr. Only binding when S > pr.
    let a1 = if s_sq - pr > 0.0 {
        (nu1 * s_sq - pr) / (s_sq - pr)
    } else {
        0.0
    };

    // Constraint 2: g(a) = <m_mix, m_mix> - nu2 Re<s, m_mix> <= 0, a convex
    // quadratic with g(1) = S (1 - nu2) < 0, so its smaller root bounds the
    // feasible interval from below.
    let qa = s_sq + m_sq - 2.0 * pr; // ||s - m||^2
    let qb = 2.0 * pr - 2.0 * m_sq - nu2 * (s_sq - pr);
    let qc = m_sq - nu2 * pr;
    let a2 = if qa > 0.0 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 && qc > 0.0 {
            // Numerically stable smaller root.
            let sd = disc.sqrt();
            if qb <= 0.0 {
                (2.0 * qc) / (-qb + sd)
            } else {
                (-qb - sd) / (2.0 * qa)
            }
        } else {
            // g(0) <= 0: constraint inactive at the left end.
            0.0
        }
    } else {
        0.0
    };

    let a_raw = a1.max(a2);
    let mut a = if a_raw <= 0.0 {
        0.0
    } else {
        (a_raw + 1e-12).min(1.0)
    };

    // Escalating nudge: the closed form is exact in real arithmetic, but a
    // boundary root can land a hair outside under roundoff.
    for _ in 0..6 {
        let m_mix = mix(s, m, a);
        if conditions_hold(s, &m_mix, s_sq, nu1, nu2) {
            return Ok((a, m_mix));
        }
        a = (a + 1e-10 * (1.0 + a)).min(1.0);
    }
    // a = 1 gives m_mix = s with both ratios exactly 1.
    Ok((1.0, s.clone()))
}

fn mix(s: &ComplexVector, m: &ComplexVector, a: f64) -> ComplexVector {
    if a == 0.0 {
        m.clone()
    } else {
        s.scale_re(a).add(&m.scale_re(1.0 - a))
    }
}

fn conditions_hold(s: &ComplexVector, m_mix: &ComplexVector, s_sq: f64, nu1: f64, nu2: f64) -> bool {
    let c1 = dot_unchecked(s, m_mix).re;
    if c1 < nu1 * s_sq {
        return false;
    }
    let c2 = m_mix.norm_sqr();
    c2 <= nu2 * c1
}

/// Self-scaling factor
/// `tau = S/R - sqrt((S/R)^2 - S/Q)` with `S = <s,s>`, `R = Re<s,m_mix>`,
/// `Q = <m_mix,m_mix>`. The discriminant is nonnegative by Cauchy-Schwarz and
/// is clamped at zero against roundoff; the result satisfies 0 < tau <= S/R.
pub fn self_scaling_tau(s: &ComplexVector, m_mix: &ComplexVector) -> Result<f64> {
    let q = m_mix.norm_sqr();
    if q == 0.0 {
        return Err(Error::DegenerateStep("self_scaling_tau"));
    }
    let s_sq = s.norm_sqr();
    let r = re_inner(s, m_mix)?;
    if r <= 0.0 {
        return Err(Error::DegenerateStep("self_scaling_tau (nonpositive curvature)"));
    }
    let ratio = s_sq / r;
    let disc = (ratio * ratio - s_sq / q).max(0.0);
    Ok(ratio - disc.sqrt())
}

/// Runs the full metric update from consecutive iterates and gradients.
pub fn build_metric(
    x_prev: &ComplexVector,
    x_cur: &ComplexVector,
    g_prev: &ComplexVector,
    g_cur: &ComplexVector,
    params: &MetricParams,
) -> Result<RankOneMetric> {
    let s = x_cur.sub(x_prev);
    if s.norm_sqr() == 0.0 {
        return Err(Error::DegenerateStep("build_metric (stalled iterate)"));
    }
    let m = g_cur.sub(g_prev);
    let (_a, m_mix) = mix_coefficient(&s, &m, params.nu1, params.nu2)?;
    let tau = self_scaling_tau(&s, &m_mix)?;

    let d = s.sub(&m_mix.scale_re(tau)); // s - tau m_mix
    let rho = re_inner(&d, &m_mix)?;
    let keep_rank_one = rho > params.delta * d.norm() * m_mix.norm();

    let metric = if keep_rank_one {
        let rho_b = tau * tau * rho + tau * d.norm_sqr();
        if !rho_b.is_finite() || rho_b <= 0.0 {
            return Err(Error::NonFinite("build_metric (rho_b)"));
        }
        RankOneMetric {
            tau,
            u: Some(d),
            rho_b,
            rho,
            dim: x_cur.len(),
        }
    } else {
        RankOneMetric {
            tau,
            u: None,
            rho_b: 0.0,
            rho,
            dim: x_cur.len(),
        }
    };
    if !metric.tau.is_finite() || metric.tau <= 0.0 {
        return Err(Error::NonFinite("build_metric (tau)"));
    }
    Ok(metric)
}
