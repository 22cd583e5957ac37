//! Incrementally grown column-orthonormal bases.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::vector::{dot_unchecked, ComplexVector};

/// Default relative threshold below which a projected residual counts as
/// zero. Exact zero never occurs in floating point.
pub const DEFAULT_DROP_TOL: f64 = 1e-12;

/// Outcome of attempting to extend a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Appended,
    Skipped,
}

/// A list of orthonormal columns of fixed length, grown one vector at a time
/// by modified Gram-Schmidt with one reorthogonalization pass.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    vector_len: usize,
    columns: Vec<ComplexVector>,
}

impl OrthonormalBasis {
    pub fn new(vector_len: usize) -> Self {
        Self {
            vector_len,
            columns: Vec::new(),
        }
    }

    pub fn vector_len(&self) -> usize {
        self.vector_len
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ComplexVector] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &ComplexVector {
        &self.columns[j]
    }

    /// Coefficient vector `V^H x`.
    pub fn project_coeffs(&self, x: &ComplexVector) -> Vec<Complex64> {
        assert_eq!(x.len(), self.vector_len);
        self.columns.iter().map(|v| dot_unchecked(v, x)).collect()
    }

    /// Linear combination `V beta`.
    pub fn combine(&self, beta: &[Complex64]) -> ComplexVector {
        assert_eq!(beta.len(), self.dim());
        let mut out = ComplexVector::zeros(self.vector_len);
        for (v, b) in self.columns.iter().zip(beta) {
            out.axpy_in_place(*b, v);
        }
        out
    }

    /// Removes the span-V component of `r`: one modified Gram-Schmidt sweep
    /// plus one reorthogonalization pass (single-pass MGS loses orthogonality
    /// once the basis grows past a few dozen columns).
    pub fn project_out(&self, r: &ComplexVector) -> ComplexVector {
        let mut w = r.clone();
        for _ in 0..2 {
            for v in &self.columns {
                let h = dot_unchecked(v, &w);
                w.axpy_in_place(-h, v);
            }
        }
        w
    }

    /// Orthonormalizes `r` against the current columns and appends the result
    /// when its projected norm exceeds `drop_tol * ||r||`.
    pub fn orthonormal_append(
        &mut self,
        r: &ComplexVector,
        drop_tol: f64,
    ) -> Result<AppendOutcome> {
        if r.len() != self.vector_len {
            return Err(Error::DimensionMismatch {
                context: "orthonormal_append",
                expected: self.vector_len,
                actual: r.len(),
            });
        }
        if !r.is_finite() {
            return Err(Error::NonFinite("orthonormal_append"));
        }
        let r_norm = r.norm();
        if r_norm == 0.0 {
            return Ok(AppendOutcome::Skipped);
        }
        let w = self.project_out(r);
        let w_norm = w.norm();
        if w_norm <= drop_tol * r_norm {
            return Ok(AppendOutcome::Skipped);
        }
        self.columns.push(w.div_re(w_norm));
        Ok(AppendOutcome::Appended)
    }

    /// Maximum deviation of `V^H V` from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let k = self.dim();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let g = dot_unchecked(&self.columns[i], &self.columns[j]);
                let target = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn first_append_normalizes() {
        let mut basis = OrthonormalBasis::new(3);
        let r = ComplexVector::new(vec![c(3.0, 0.0), c(4.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(
            basis.orthonormal_append(&r, DEFAULT_DROP_TOL).unwrap(),
            AppendOutcome::Appended
        );
        let v = basis.column(0);
        assert_eq!(v[0], c(0.6, 0.0));
        assert_eq!(v[1], c(0.8, 0.0));
        assert_eq!(v[2], c(0.0, 0.0));
    }

    #[test]
    fn vector_in_span_is_skipped() {
        let mut basis = OrthonormalBasis::new(3);
        let e1 = ComplexVector::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        basis.orthonormal_append(&e1, DEFAULT_DROP_TOL).unwrap();
        let r = ComplexVector::new(vec![c(5.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(
            basis.orthonormal_append(&r, DEFAULT_DROP_TOL).unwrap(),
            AppendOutcome::Skipped
        );
        assert_eq!(basis.dim(), 1);
    }

    #[test]
    fn zero_vector_is_skipped_not_error() {
        let mut basis = OrthonormalBasis::new(4);
        let z = ComplexVector::zeros(4);
        assert_eq!(
            basis.orthonormal_append(&z, DEFAULT_DROP_TOL).unwrap(),
            AppendOutcome::Skipped
        );
    }

    #[test]
    fn non_finite_is_error() {
        let mut basis = OrthonormalBasis::new(1);
        let bad = ComplexVector::from_raw_for_test(vec![c(f64::INFINITY, 0.0)]);
        assert!(basis.orthonormal_append(&bad, DEFAULT_DROP_TOL).is_err());
    }

    /// Ten random appends in dimension 32: the explicit Gram matrix stays
    /// within 1e-12 of the identity.
    #[test]
    fn random_appends_keep_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut basis = OrthonormalBasis::new(32);
        for _ in 0..10 {
            let r = ComplexVector::new(
                (0..32)
                    .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    .collect(),
            )
            .unwrap();
            basis.orthonormal_append(&r, DEFAULT_DROP_TOL).unwrap();
        }
        assert_eq!(basis.dim(), 10);

        // Oracle: Gram matrix from explicit loops over raw slices.
        let mut worst = 0.0f64;
        for i in 0..10 {
            for j in 0..10 {
                let mut g = c(0.0, 0.0);
                for p in 0..32 {
                    g += basis.column(i)[p].conj() * basis.column(j)[p];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - c(target, 0.0)).norm());
            }
        }
        assert!(worst <= 1e-12, "gram deviation {worst}");
        assert!(basis.gram_deviation() <= 1e-12);
    }
}

#[cfg(test)]
impl ComplexVector {
    /// Test-only escape hatch to build invalid data.
    fn from_raw_for_test(data: Vec<Complex64>) -> Self {
        let mut v = ComplexVector::zeros(data.len());
        v.as_mut_slice().copy_from_slice(&data);
        v
    }
}
