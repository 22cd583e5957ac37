//! Small dense Hermitian matrices and the positive-definite solve used for
//! the reduced subspace systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense k-by-k Hermitian matrix, row-major storage.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Builds from row-major entries, checking Hermitian symmetry to 1e-12
    /// relative.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "HermitianMatrix::new",
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("HermitianMatrix::new"));
        }
        let scale = entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..dim {
            for j in 0..i {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i].conj();
                if (a - b).norm() > 1e-12 * (1.0 + scale) {
                    return Err(Error::InvalidParam {
                        name: "HermitianMatrix",
                        reason: format!("entry ({i},{j}) is not the conjugate of ({j},{i})"),
                    });
                }
            }
        }
        Ok(Self { dim, entries })
    }

    /// Builds the Hermitian matrix sum of the conjugate-symmetrized input.
    /// Used when assembling Gram matrices whose off-diagonal pairs agree only
    /// to roundoff.
    pub fn from_symmetrized(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "HermitianMatrix::from_symmetrized",
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        let mut sym = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i].conj();
                sym[i * dim + j] = 0.5 * (a + b);
            }
        }
        // Diagonal of a Hermitian matrix is real.
        for i in 0..dim {
            sym[i * dim + i] = Complex64::new(sym[i * dim + i].re, 0.0);
        }
        Self::new(dim, sym)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for i in 0..self.dim {
            let row = &self.entries[i * self.dim..(i + 1) * self.dim];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }
}

/// Solves `(M + reg I) beta = b` for Hermitian positive definite systems via
/// an LL^H factorization followed by one pass of iterative refinement (a
/// second pass runs when the first residual is still above 1e-13 relative).
///
/// A non-positive pivot aborts with the offending index.
pub fn hermitian_posdef_solve(
    m: &HermitianMatrix,
    b: &[Complex64],
    reg: f64,
) -> Result<Vec<Complex64>> {
    let n = m.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "hermitian_posdef_solve",
            expected: n,
            actual: b.len(),
        });
    }
    if reg < 0.0 {
        return Err(Error::InvalidParam {
            name: "reg",
            reason: "must be nonnegative".into(),
        });
    }

    let chol = cholesky(m, reg)?;
    let mut x = chol.solve(b);

    // Iterative refinement: residual r = b - (M + reg I) x, correction from
    // the existing factorization. Keeps the residual near working precision
    // even for condition numbers up to ~1e8.
    let b_norm = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for _ in 0..2 {
        let r = residual(m, reg, &x, b);
        let r_norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if r_norm <= 1e-13 * (1.0 + b_norm) {
            break;
        }
        let d = chol.solve(&r);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
    }
    Ok(x)
}

fn residual(m: &HermitianMatrix, reg: f64, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mx = m.matvec(x);
    b.iter()
        .zip(mx.iter().zip(x))
        .map(|(bi, (mi, xi))| bi - mi - reg * xi)
        .collect()
}

struct Cholesky {
    dim: usize,
    // Lower-triangular factor, row-major.
    l: Vec<Complex64>,
}

fn cholesky(m: &HermitianMatrix, reg: f64) -> Result<Cholesky> {
    let n = m.dim();
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = m.get(j, j).re + reg;
        for p in 0..j {
            d -= l[j * n + p].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Indefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = m.get(i, j);
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(Cholesky { dim: n, l })
}

impl Cholesky {
    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        // Forward: L z = b.
        let mut z = b.to_vec();
        for i in 0..n {
            for p in 0..i {
                let lip = self.l[i * n + p];
                z[i] = z[i] - lip * z[p];
            }
            z[i] /= self.l[i * n + i];
        }
        // Backward: L^H x = z.
        let mut x = z;
        for i in (0..n).rev() {
            for p in (i + 1)..n {
                let lpi = self.l[p * n + i].conj();
                x[i] = x[i] - lpi * x[p];
            }
            x[i] /= self.l[i * n + i];
        }
        x
    }
}
