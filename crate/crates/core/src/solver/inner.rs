//! Accelerated (projected) gradient descent on the smooth strongly convex
//! surrogates that arise in the constrained reduced solve and in full-space
//! mode.

use num_complex::Complex64;

use crate::vector::ComplexVector;

use super::project_linf_ball;

/// A smooth quadratic-like model with a known gradient Lipschitz constant.
pub(crate) trait SurrogateModel {
    fn value(&self, z: &ComplexVector) -> f64;
    fn grad(&self, z: &ComplexVector) -> ComplexVector;
    fn lipschitz(&self) -> f64;
}

pub(crate) struct InnerResult {
    pub z: ComplexVector,
    pub value: f64,
    /// Norm of the last projected-gradient map L (v - P(v - grad(v)/L)),
    /// evaluated at the extrapolated point.
    pub gradmap_norm: f64,
    #[allow(dead_code)] // read by tests
    pub iterations: usize,
    pub converged: bool,
}

/// Monotone accelerated projected gradient from `z0`: classic momentum with
/// a function-value restart, returning the best-value iterate visited. Stops
/// when the projected-gradient-map norm drops below `tol * (1 + ||z||)`.
pub(crate) fn accelerated_minimize(
    model: &dyn SurrogateModel,
    z0: &ComplexVector,
    constrained: bool,
    tol: f64,
    max_iter: usize,
) -> InnerResult {
    let proj = |v: ComplexVector| {
        if constrained {
            project_linf_ball(&v)
        } else {
            v
        }
    };
    let lip = model.lipschitz().max(f64::MIN_POSITIVE);
    let step = Complex64::new(-1.0 / lip, 0.0);

    let mut z = proj(z0.clone());
    let mut z_val = model.value(&z);
    let mut best = z.clone();
    let mut best_val = z_val;
    let mut v = z.clone();
    let mut t = 1.0f64;
    let mut gradmap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=max_iter {
        iterations = it;
        let g = model.grad(&v);
        let cand = proj(v.axpy(step, &g));
        gradmap = lip * cand.sub(&v).norm();
        let cand_val = model.value(&cand);
        if cand_val < best_val {
            best = cand.clone();
            best_val = cand_val;
        }

        if gradmap <= tol * (1.0 + cand.norm()) {
            converged = true;
            z = cand;
            break;
        }

        if cand_val > z_val {
            // Restart: drop the momentum that overshot.
            t = 1.0;
            v = cand.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            v = cand.axpy(Complex64::new(beta, 0.0), &cand.sub(&z));
            t = t_next;
        }
        z = cand;
        z_val = cand_val;
    }

    // Return the best iterate seen; when converged the last candidate and
    // the best coincide up to the tolerance.
    let (z_out, val_out) = if best_val < z_val { (best, best_val) } else { (z, z_val) };
    InnerResult {
        z: z_out,
        value: val_out,
        gradmap_norm: gradmap,
        iterations,
        converged,
    }
}
