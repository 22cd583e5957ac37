//! Flattened complex vectors and the inner-product kernels shared by every
//! other module.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A fixed-length vector of complex double-precision scalars.
///
/// The length is set at construction and all arithmetic partners must share
/// it. Entries are finite; constructors reject NaN/Inf.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    data: Vec<Complex64>,
}

impl ComplexVector {
    /// Wraps raw data, rejecting non-finite entries.
    pub fn new(data: Vec<Complex64>) -> Result<Self> {
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("ComplexVector::new"));
        }
        Ok(Self { data })
    }

    /// Wraps data that is known finite (e.g. output of arithmetic on finite
    /// inputs). Debug builds still check.
    pub(crate) fn from_raw(data: Vec<Complex64>) -> Self {
        debug_assert!(data.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        Self { data }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> Complex64) -> Result<Self> {
        Self::new((0..len).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[allow(dead_code)] // used by tests to build targeted inputs
    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_raw(self.data.iter().map(|z| z * s).collect())
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self::from_raw(self.data.iter().map(|z| z * s).collect())
    }

    /// Elementwise division by a real scalar. Exact where the quotient is
    /// representable, unlike multiplying by a rounded reciprocal.
    pub fn div_re(&self, s: f64) -> Self {
        Self::from_raw(self.data.iter().map(|z| z / s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "vector length mismatch in add");
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "vector length mismatch in sub");
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// `self + s * other`, the workhorse update.
    pub fn axpy(&self, s: Complex64, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "vector length mismatch in axpy");
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub(crate) fn axpy_in_place(&mut self, s: Complex64, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }
}

impl std::ops::Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.data[i]
    }
}

/// Inner product `sum conj(x_i) * y_i`.
pub fn inner(x: &ComplexVector, y: &ComplexVector) -> Result<Complex64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "inner",
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(dot_unchecked(x, y))
}

/// Real part of the inner product.
pub fn re_inner(x: &ComplexVector, y: &ComplexVector) -> Result<f64> {
    inner(x, y).map(|z| z.re)
}

/// Inner product without the length check; callers guarantee equal lengths.
pub(crate) fn dot_unchecked(x: &ComplexVector, y: &ComplexVector) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    x.data
        .iter()
        .zip(&y.data)
        .map(|(a, b)| a.conj() * b)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn self_inner_is_squared_norm() {
        let x = ComplexVector::new(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let v = inner(&x, &x).unwrap();
        assert_eq!(v, c(2.0, 0.0));
    }

    #[test]
    fn orthogonal_vectors_have_zero_inner() {
        let x = ComplexVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let y = ComplexVector::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(inner(&x, &y).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn inner_matches_naive_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draw = |rng: &mut ChaCha8Rng| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let x = ComplexVector::new((0..16).map(|_| draw(&mut rng)).collect()).unwrap();
        let y = ComplexVector::new((0..16).map(|_| draw(&mut rng)).collect()).unwrap();

        // Naive elementwise summation, kept independent of dot_unchecked.
        let mut want = c(0.0, 0.0);
        for i in 0..16 {
            want += x[i].conj() * y[i];
        }
        let got = inner(&x, &y).unwrap();
        assert!((got - want).norm() <= 1e-14 * (1.0 + want.norm()));
    }

    #[test]
    fn inner_rejects_length_mismatch() {
        let x = ComplexVector::zeros(3);
        let y = ComplexVector::zeros(4);
        assert!(matches!(
            inner(&x, &y),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn new_rejects_non_finite() {
        let bad = vec![c(1.0, f64::NAN)];
        assert!(matches!(
            ComplexVector::new(bad),
            Err(Error::NonFinite(_))
        ));
    }

    proptest! {
        #[test]
        fn self_inner_real_nonnegative(entries in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..32)) {
            let x = ComplexVector::new(entries.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let v = inner(&x, &x).unwrap();
            prop_assert!(v.im.abs() <= 1e-12 * (1.0 + v.re.abs()));
            prop_assert!(v.re >= 0.0);
        }

        #[test]
        fn cauchy_schwarz(
            xs in proptest::collection::vec((-1e2f64..1e2, -1e2f64..1e2), 8),
            ys in proptest::collection::vec((-1e2f64..1e2, -1e2f64..1e2), 8),
        ) {
            let x = ComplexVector::new(xs.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let y = ComplexVector::new(ys.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let lhs = inner(&x, &y).unwrap().norm();
            prop_assert!(lhs <= x.norm() * y.norm() * (1.0 + 1e-12));
        }
    }
}
