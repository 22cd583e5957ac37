//! The solver-side basis: orthonormal columns V plus the cached products
//! A V and the Gram matrix (A V)^H (A V), all grown incrementally so each
//! enrichment costs a single operator application.

use num_complex::Complex64;

use crate::basis::{AppendOutcome, OrthonormalBasis};
use crate::error::{Error, Result};
use crate::operators::ForwardOperator;
use crate::vector::{dot_unchecked, ComplexVector};

pub struct SubspaceBasis {
    basis: OrthonormalBasis,
    av: Vec<ComplexVector>,
    /// Row-major k x k Gram matrix of the cached AV columns.
    gram_data: Vec<Complex64>,
}

impl SubspaceBasis {
    /// Starts the basis from the direction of `v`, computing its image under
    /// the operator (one apply).
    pub fn from_direction(op: &ForwardOperator, v: &ComplexVector) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateProblem("zero initial basis direction"));
        }
        let mut basis = OrthonormalBasis::new(op.domain_dim());
        let unit = v.div_re(norm);
        basis.orthonormal_append(&unit, 0.0)?;
        let av = op.apply(basis.column(0))?;
        let g00 = Complex64::new(av.norm_sqr(), 0.0);
        Ok(Self {
            basis,
            av: vec![av],
            gram_data: vec![g00],
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn columns(&self) -> &[ComplexVector] {
        self.basis.columns()
    }

    pub fn av_columns(&self) -> &[ComplexVector] {
        &self.av
    }

    /// `V beta`.
    pub fn combine(&self, beta: &[Complex64]) -> ComplexVector {
        self.basis.combine(beta)
    }

    /// `(A V) beta` from the cache; no operator call.
    pub fn combine_av(&self, beta: &[Complex64]) -> ComplexVector {
        assert_eq!(beta.len(), self.av.len());
        let mut out = ComplexVector::zeros(self.av[0].len());
        for (col, b) in self.av.iter().zip(beta) {
            out.axpy_in_place(*b, col);
        }
        out
    }

    /// `V^H x`.
    pub fn project_coeffs(&self, x: &ComplexVector) -> Vec<Complex64> {
        self.basis.project_coeffs(x)
    }

    /// `(A V)^H z`.
    pub fn project_coeffs_av(&self, z: &ComplexVector) -> Vec<Complex64> {
        self.av.iter().map(|col| dot_unchecked(col, z)).collect()
    }

    /// Removes the span-V component of `r`.
    pub fn project_out(&self, r: &ComplexVector) -> ComplexVector {
        self.basis.project_out(r)
    }

    pub fn gram_data(&self, i: usize, j: usize) -> Complex64 {
        self.gram_data[i * self.dim() + j]
    }

    /// Largest eigenvalue of the data Gram matrix (squared largest singular
    /// value of A V) by power iteration on the k x k cache.
    pub fn gram_lambda_max(&self, iters: usize) -> f64 {
        let k = self.dim();
        let mut v: Vec<Complex64> = (0..k)
            .map(|i| Complex64::new(1.0 + (i as f64 * 0.37).sin(), 0.1 * (i as f64)))
            .collect();
        let mut lam = 0.0;
        for _ in 0..iters {
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|z| *z /= norm);
            let mut w = vec![Complex64::new(0.0, 0.0); k];
            for i in 0..k {
                let row = &self.gram_data[i * k..(i + 1) * k];
                w[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            }
            lam = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (b.conj() * a).re)
                .sum::<f64>();
            v = w;
        }
        lam.max(0.0)
    }

    /// Orthonormalizes `r` against V and appends it together with its image
    /// under the operator (one apply when appended, none when skipped).
    pub fn append_residual(
        &mut self,
        op: &ForwardOperator,
        r: &ComplexVector,
        drop_tol: f64,
    ) -> Result<AppendOutcome> {
        let outcome = self.basis.orthonormal_append(r, drop_tol)?;
        if outcome == AppendOutcome::Appended {
            let new_col = self.basis.column(self.basis.dim() - 1);
            let av_new = op.apply(new_col)?;
            self.push_av(av_new);
        }
        Ok(outcome)
    }

    /// Cyclic restart: collapses the basis to the single direction of `x`.
    /// Returns false (leaving the basis unchanged) when `x` is zero.
    pub fn reset_to(&mut self, op: &ForwardOperator, x: &ComplexVector) -> Result<bool> {
        if x.norm() == 0.0 {
            return Ok(false);
        }
        let fresh = Self::from_direction(op, x)?;
        *self = fresh;
        Ok(true)
    }

    fn push_av(&mut self, av_new: ComplexVector) {
        let k_old = self.av.len();
        let k_new = k_old + 1;
        let mut gram = vec![Complex64::new(0.0, 0.0); k_new * k_new];
        for i in 0..k_old {
            for j in 0..k_old {
                gram[i * k_new + j] = self.gram_data[i * k_old + j];
            }
        }
        for i in 0..k_old {
            let g = dot_unchecked(&self.av[i], &av_new);
            gram[i * k_new + k_old] = g;
            gram[k_old * k_new + i] = g.conj();
        }
        gram[k_old * k_new + k_old] = Complex64::new(av_new.norm_sqr(), 0.0);
        self.av.push(av_new);
        self.gram_data = gram;
    }

    /// Max deviation of V^H V from the identity.
    pub fn gram_deviation(&self) -> f64 {
        self.basis.gram_deviation()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(len: usize, seed: u64) -> ComplexVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexVector::new(
            (0..len)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect(),
        )
        .unwrap()
    }

    fn random_op(rows: usize, cols: usize, seed: u64) -> ForwardOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..rows * cols)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        ForwardOperator::dense(rows, cols, entries).unwrap()
    }

    #[test]
    fn cache_coherent_with_operator() {
        let op = random_op(10, 8, 1);
        let mut basis = SubspaceBasis::from_direction(&op, &random_vec(8, 2)).unwrap();
        for t in 0..5 {
            basis
                .append_residual(&op, &random_vec(8, 10 + t), 1e-12)
                .unwrap();
        }
        assert_eq!(basis.dim(), 6);
        assert!(basis.gram_deviation() <= 1e-12);
        for j in 0..basis.dim() {
            let want = op.apply(&basis.columns()[j].clone()).unwrap();
            let got = &basis.av_columns()[j];
            assert!(got.sub(&want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
        // Gram cache matches direct inner products.
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                let want = dot_unchecked(&basis.av_columns()[i], &basis.av_columns()[j]);
                assert!((basis.gram_data(i, j) - want).norm() <= 1e-13 * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn gram_lambda_max_matches_direct_power_iteration() {
        let op = random_op(12, 8, 3);
        let mut basis = SubspaceBasis::from_direction(&op, &random_vec(8, 4)).unwrap();
        for t in 0..4 {
            basis
                .append_residual(&op, &random_vec(8, 40 + t), 1e-12)
                .unwrap();
        }
        let lam = basis.gram_lambda_max(200);
        // Oracle: dense Hermitian eigensolver on the explicit k x k Gram.
        let k = basis.dim();
        let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| basis.gram_data(i, j));
        let eig = nalgebra::SymmetricEigen::new(gram);
        let want = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        assert!(
            (lam - want).abs() <= 1e-8 * (1.0 + want),
            "power iteration {lam} vs eigensolver {want}"
        );
    }

    #[test]
    fn restart_collapses_to_one_column() {
        let op = random_op(10, 8, 5);
        let mut basis = SubspaceBasis::from_direction(&op, &random_vec(8, 6)).unwrap();
        basis.append_residual(&op, &random_vec(8, 7), 1e-12).unwrap();
        let x = random_vec(8, 8);
        assert!(basis.reset_to(&op, &x).unwrap());
        assert_eq!(basis.dim(), 1);
        let v0 = &basis.columns()[0];
        let want = x.scale_re(1.0 / x.norm());
        assert!(v0.sub(&want).norm() <= 1e-14);
        assert!(!basis.reset_to(&op, &ComplexVector::zeros(8)).unwrap());
        assert_eq!(basis.dim(), 1);
    }
}
