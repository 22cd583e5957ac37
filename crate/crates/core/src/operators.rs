//! Forward operators with verified adjoints: dense matrices, multi-coil
//! Cartesian masked Fourier encoding, and circular convolution.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::vector::ComplexVector;

/// Unitary 2-D DFT on an h-by-w grid, row-major. Both directions carry the
/// 1/sqrt(N) factor, so the transform is an isometry and masked encodings
/// have spectrum inside [0, 1].
#[derive(Clone)]
pub struct UnitaryFft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl UnitaryFft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let (h, w) = (self.height, self.width);
        assert_eq!(data.len(), h * w);
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        // Per-call scratch keeps the transform thread-safe.
        let mut scratch = vec![Complex64::new(0.0, 0.0); row.get_inplace_scratch_len().max(col.get_inplace_scratch_len())];
        for r in 0..h {
            row.process_with_scratch(&mut data[r * w..(r + 1) * w], &mut scratch);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for cidx in 0..w {
            for r in 0..h {
                column[r] = data[r * w + cidx];
            }
            col.process_with_scratch(&mut column, &mut scratch);
            for r in 0..h {
                data[r * w + cidx] = column[r];
            }
        }
        let scale = 1.0 / ((h * w) as f64).sqrt();
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }
}

enum Kind {
    /// Row-major M x N matrix.
    Dense {
        rows: usize,
        cols: usize,
        entries: Vec<Complex64>,
    },
    /// Multi-coil Cartesian encoding: for each coil, mask-selected unitary
    /// DFT of the sensitivity-weighted image. Outputs are concatenated over
    /// coils; within a coil, retained k-space samples appear in row-major
    /// grid order.
    MaskedFourier {
        mask_indices: Vec<usize>,
        sensitivities: Vec<ComplexVector>,
        fft: UnitaryFft2,
    },
    /// Circular convolution with a fixed kernel, diagonalized by the DFT. The
    /// stored symbol is the unnormalized DFT of the kernel.
    Convolution {
        symbol: Vec<Complex64>,
        fft: UnitaryFft2,
    },
}

/// A linear map with an exact adjoint. Immutable after construction;
/// `apply`/`adjoint` are pure and bump atomic call counters used by the
/// solver's per-iteration cost accounting.
pub struct ForwardOperator {
    kind: Kind,
    domain_dim: usize,
    range_dim: usize,
    applies: AtomicU64,
    adjoints: AtomicU64,
}

impl ForwardOperator {
    pub fn dense(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "ForwardOperator::dense",
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("ForwardOperator::dense"));
        }
        Ok(Self {
            kind: Kind::Dense {
                rows,
                cols,
                entries,
            },
            domain_dim: cols,
            range_dim: rows,
            applies: AtomicU64::new(0),
            adjoints: AtomicU64::new(0),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self::dense(n, n, entries).unwrap()
    }

    /// Builds the multi-coil masked-Fourier encoding from a bitmap over the
    /// k-space grid (true = retained, row-major) and per-coil sensitivity
    /// maps.
    pub fn masked_fourier(
        height: usize,
        width: usize,
        mask: &[bool],
        sensitivities: Vec<ComplexVector>,
    ) -> Result<Self> {
        let n = height * width;
        if mask.len() != n {
            return Err(Error::DimensionMismatch {
                context: "ForwardOperator::masked_fourier (mask)",
                expected: n,
                actual: mask.len(),
            });
        }
        if sensitivities.is_empty() {
            return Err(Error::InvalidParam {
                name: "sensitivities",
                reason: "at least one coil required".into(),
            });
        }
        for s in &sensitivities {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "ForwardOperator::masked_fourier (sensitivity)",
                    expected: n,
                    actual: s.len(),
                });
            }
        }
        let mask_indices: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &keep)| keep.then_some(i))
            .collect();
        if mask_indices.is_empty() {
            return Err(Error::DegenerateProblem("mask retains no samples"));
        }
        let m = mask_indices.len();
        let coils = sensitivities.len();
        Ok(Self {
            kind: Kind::MaskedFourier {
                mask_indices,
                sensitivities,
                fft: UnitaryFft2::new(height, width),
            },
            domain_dim: n,
            range_dim: m * coils,
            applies: AtomicU64::new(0),
            adjoints: AtomicU64::new(0),
        })
    }

    /// Circular convolution with the given kernel (row-major on the grid).
    pub fn convolution(height: usize, width: usize, kernel: &ComplexVector) -> Result<Self> {
        let n = height * width;
        if kernel.len() != n {
            return Err(Error::DimensionMismatch {
                context: "ForwardOperator::convolution",
                expected: n,
                actual: kernel.len(),
            });
        }
        let fft = UnitaryFft2::new(height, width);
        // Unnormalized DFT of the kernel: forward unitary transform times
        // sqrt(N) so that apply() below realizes plain circular convolution.
        let mut symbol: Vec<Complex64> = kernel.as_slice().to_vec();
        fft.forward(&mut symbol);
        let scale = (n as f64).sqrt();
        for z in symbol.iter_mut() {
            *z *= scale;
        }
        Ok(Self {
            kind: Kind::Convolution {
                symbol,
                fft,
            },
            domain_dim: n,
            range_dim: n,
            applies: AtomicU64::new(0),
            adjoints: AtomicU64::new(0),
        })
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn range_dim(&self) -> usize {
        self.range_dim
    }

    pub fn apply_count(&self) -> u64 {
        self.applies.load(Ordering::Relaxed)
    }

    pub fn adjoint_count(&self) -> u64 {
        self.adjoints.load(Ordering::Relaxed)
    }

    /// Computes `A x`.
    pub fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.domain_dim {
            return Err(Error::DimensionMismatch {
                context: "apply",
                expected: self.domain_dim,
                actual: x.len(),
            });
        }
        self.applies.fetch_add(1, Ordering::Relaxed);
        let out = match &self.kind {
            Kind::Dense {
                rows,
                cols,
                entries,
            } => {
                let mut out = vec![Complex64::new(0.0, 0.0); *rows];
                for r in 0..*rows {
                    let row = &entries[r * cols..(r + 1) * cols];
                    out[r] = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                }
                out
            }
            Kind::MaskedFourier {
                mask_indices,
                sensitivities,
                fft,
                ..
            } => {
                let mut out = Vec::with_capacity(self.range_dim);
                let mut grid = vec![Complex64::new(0.0, 0.0); self.domain_dim];
                for s in sensitivities {
                    for (g, (si, xi)) in grid.iter_mut().zip(s.iter().zip(x.iter())) {
                        *g = si * xi;
                    }
                    fft.forward(&mut grid);
                    out.extend(mask_indices.iter().map(|&i| grid[i]));
                }
                out
            }
            Kind::Convolution { symbol, fft, .. } => {
                let mut grid: Vec<Complex64> = x.as_slice().to_vec();
                fft.forward(&mut grid);
                for (g, k) in grid.iter_mut().zip(symbol) {
                    *g *= k;
                }
                fft.inverse(&mut grid);
                grid
            }
        };
        ComplexVector::new(out)
    }

    /// Computes `A^H z`.
    pub fn adjoint(&self, z: &ComplexVector) -> Result<ComplexVector> {
        if z.len() != self.range_dim {
            return Err(Error::DimensionMismatch {
                context: "adjoint",
                expected: self.range_dim,
                actual: z.len(),
            });
        }
        self.adjoints.fetch_add(1, Ordering::Relaxed);
        let out = match &self.kind {
            Kind::Dense {
                rows,
                cols,
                entries,
            } => {
                let mut out = vec![Complex64::new(0.0, 0.0); *cols];
                for r in 0..*rows {
                    let zr = z[r];
                    let row = &entries[r * cols..(r + 1) * cols];
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a.conj() * zr;
                    }
                }
                out
            }
            Kind::MaskedFourier {
                mask_indices,
                sensitivities,
                fft,
                ..
            } => {
                let n = self.domain_dim;
                let m = mask_indices.len();
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                let mut grid = vec![Complex64::new(0.0, 0.0); n];
                for (c, s) in sensitivities.iter().enumerate() {
                    grid.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
                    for (j, &i) in mask_indices.iter().enumerate() {
                        grid[i] = z[c * m + j];
                    }
                    fft.inverse(&mut grid);
                    for (o, (si, gi)) in out.iter_mut().zip(s.iter().zip(grid.iter())) {
                        *o += si.conj() * gi;
                    }
                }
                out
            }
            Kind::Convolution { symbol, fft, .. } => {
                let mut grid: Vec<Complex64> = z.as_slice().to_vec();
                fft.forward(&mut grid);
                for (g, k) in grid.iter_mut().zip(symbol) {
                    *g *= k.conj();
                }
                fft.inverse(&mut grid);
                grid
            }
        };
        ComplexVector::new(out)
    }

    /// Estimates the largest eigenvalue of `A^H A` (i.e. the squared operator
    /// norm) by power iteration from a seeded random start. The Rayleigh
    /// quotient of a positive semidefinite map is nondecreasing over the
    /// iteration.
    pub fn estimate_opnorm(&self, iters: usize, seed: u64) -> Result<f64> {
        if iters == 0 {
            return Err(Error::InvalidParam {
                name: "iters",
                reason: "must be at least 1".into(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = ComplexVector::new(
            (0..self.domain_dim)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect(),
        )?;
        let nv = v.norm();
        if nv == 0.0 {
            return Ok(0.0);
        }
        v = v.scale_re(1.0 / nv);
        let mut estimate = 0.0;
        for _ in 0..iters {
            let av = self.apply(&v)?;
            estimate = av.norm_sqr(); // Rayleigh quotient; ||v|| = 1
            if estimate == 0.0 {
                return Ok(0.0);
            }
            let mut w = self.adjoint(&av)?;
            let nw = w.norm();
            if nw == 0.0 {
                return Ok(0.0);
            }
            w = w.scale_re(1.0 / nw);
            v = w;
        }
        Ok(estimate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::inner;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(len: usize, seed: u64) -> ComplexVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexVector::new(
            (0..len)
                .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect(),
        )
        .unwrap()
    }

    fn unit_sensitivities(n: usize, coils: usize) -> Vec<ComplexVector> {
        let ones = ComplexVector::new(vec![c(1.0, 0.0); n]).unwrap();
        let norm = (coils as f64).sqrt();
        (0..coils).map(|_| ones.scale_re(1.0 / norm)).collect()
    }

    fn dot_test(op: &ForwardOperator, trials: usize, seed: u64) -> f64 {
        let mut worst = 0.0f64;
        for t in 0..trials {
            let x = random_vec(op.domain_dim(), seed + 2 * t as u64);
            let z = random_vec(op.range_dim(), seed + 2 * t as u64 + 1);
            let ax = op.apply(&x).unwrap();
            let ahz = op.adjoint(&z).unwrap();
            let lhs = inner(&ax, &z).unwrap();
            let rhs = inner(&x, &ahz).unwrap();
            let scale = ax.norm() * z.norm();
            if scale > 0.0 {
                worst = worst.max((lhs - rhs).norm() / scale);
            }
        }
        worst
    }

    #[test]
    fn dense_identity_applies_as_identity() {
        let op = ForwardOperator::identity(5);
        let x = random_vec(5, 1);
        assert_eq!(op.apply(&x).unwrap(), x);
        assert_eq!(op.adjoint(&x).unwrap(), x);
    }

    #[test]
    fn dense_matches_explicit_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let entries: Vec<Complex64> = (0..24)
            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let op = ForwardOperator::dense(6, 4, entries.clone()).unwrap();
        let x = random_vec(4, 6);
        let got = op.apply(&x).unwrap();
        for r in 0..6 {
            let mut want = c(0.0, 0.0);
            for cidx in 0..4 {
                want += entries[r * 4 + cidx] * x[cidx];
            }
            assert!((got[r] - want).norm() <= 1e-14 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn masked_fourier_impulse_gives_flat_spectrum() {
        let (h, w) = (4, 4);
        let n = h * w;
        let mask = vec![true; n];
        let sens = vec![ComplexVector::new(vec![c(1.0, 0.0); n]).unwrap()];
        let op = ForwardOperator::masked_fourier(h, w, &mask, sens).unwrap();
        let mut x = vec![c(0.0, 0.0); n];
        x[0] = c(1.0, 0.0);
        let y = op.apply(&ComplexVector::new(x).unwrap()).unwrap();
        let want = 1.0 / (n as f64).sqrt();
        for i in 0..n {
            assert!((y[i] - c(want, 0.0)).norm() <= 1e-12);
        }
    }

    #[test]
    fn full_mask_unit_sensitivity_is_isometry() {
        let (h, w) = (8, 8);
        let n = h * w;
        let mask = vec![true; n];
        let sens = vec![ComplexVector::new(vec![c(1.0, 0.0); n]).unwrap()];
        let op = ForwardOperator::masked_fourier(h, w, &mask, sens).unwrap();
        let x = random_vec(n, 9);
        let y = op.apply(&x).unwrap();
        assert!((y.norm() - x.norm()).abs() <= 1e-12 * x.norm());
        // Unitarity: the adjoint inverts the transform.
        let back = op.adjoint(&y).unwrap();
        assert!(back.sub(&x).norm() <= 1e-12 * x.norm());
    }

    #[test]
    fn adjoint_dot_tests_pass_for_all_kinds() {
        let dense = {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let entries: Vec<Complex64> = (0..48)
                .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            ForwardOperator::dense(8, 6, entries).unwrap()
        };
        assert!(dot_test(&dense, 20, 100) <= 1e-10);

        let (h, w) = (8, 8);
        let n = h * w;
        let mut mask = vec![false; n];
        for i in (0..n).step_by(3) {
            mask[i] = true;
        }
        let op = ForwardOperator::masked_fourier(h, w, &mask, unit_sensitivities(n, 3)).unwrap();
        assert!(dot_test(&op, 20, 200) <= 1e-10);

        let kernel = random_vec(n, 13);
        let conv = ForwardOperator::convolution(h, w, &kernel).unwrap();
        assert!(dot_test(&conv, 20, 300) <= 1e-10);
    }

    #[test]
    fn convolution_matches_direct_circular_sum() {
        let (h, w) = (4, 3);
        let n = h * w;
        let kernel = random_vec(n, 21);
        let op = ForwardOperator::convolution(h, w, &kernel).unwrap();
        let x = random_vec(n, 22);
        let got = op.apply(&x).unwrap();
        // Direct O(N^2) circular convolution oracle.
        for r in 0..h {
            for cidx in 0..w {
                let mut want = c(0.0, 0.0);
                for p in 0..h {
                    for q in 0..w {
                        let kr = (r + h - p) % h;
                        let kc = (cidx + w - q) % w;
                        want += kernel[kr * w + kc] * x[p * w + q];
                    }
                }
                let g = got[r * w + cidx];
                assert!((g - want).norm() <= 1e-12 * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn opnorm_scaled_identity() {
        let n = 6;
        let mut entries = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            entries[i * n + i] = c(2.0, 0.0);
        }
        let op = ForwardOperator::dense(n, n, entries).unwrap();
        let est = op.estimate_opnorm(50, 0).unwrap();
        assert!((est - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn opnorm_unitary_masked_fourier() {
        let (h, w) = (8, 8);
        let n = h * w;
        let mask = vec![true; n];
        let sens = vec![ComplexVector::new(vec![c(1.0, 0.0); n]).unwrap()];
        let op = ForwardOperator::masked_fourier(h, w, &mask, sens).unwrap();
        let est = op.estimate_opnorm(100, 1).unwrap();
        assert!((est - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn opnorm_matches_dense_eigensolver_oracle() {
        use nalgebra::{DMatrix, SymmetricEigen};
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let entries: Vec<Complex64> = (0..n * n)
            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let op = ForwardOperator::dense(n, n, entries.clone()).unwrap();
        let a = DMatrix::from_row_slice(n, n, &entries);
        let m = a.adjoint() * &a;
        let eig = SymmetricEigen::new(m);
        let lam_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let est = op.estimate_opnorm(100, 2).unwrap();
        assert!(
            (est - lam_max).abs() <= 0.01 * lam_max,
            "est {est} vs oracle {lam_max}"
        );
    }

    #[test]
    fn opnorm_zero_operator() {
        let op = ForwardOperator::dense(3, 3, vec![c(0.0, 0.0); 9]).unwrap();
        assert_eq!(op.estimate_opnorm(10, 0).unwrap(), 0.0);
    }

    #[test]
    fn opnorm_nondecreasing_in_iters() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let entries: Vec<Complex64> = (0..36)
            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let op = ForwardOperator::dense(6, 6, entries).unwrap();
        let mut prev = 0.0;
        for iters in [1, 2, 5, 10, 30, 100] {
            let est = op.estimate_opnorm(iters, 4).unwrap();
            assert!(est >= prev - 1e-12, "estimate decreased: {prev} -> {est}");
            prev = est;
        }
    }

    #[test]
    fn apply_is_deterministic() {
        let (h, w) = (8, 8);
        let n = h * w;
        let mut mask = vec![false; n];
        for i in (0..n).step_by(2) {
            mask[i] = true;
        }
        let op = ForwardOperator::masked_fourier(h, w, &mask, unit_sensitivities(n, 2)).unwrap();
        let x = random_vec(n, 55);
        let a = op.apply(&x).unwrap();
        let b = op.apply(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn call_counters_track_usage() {
        let op = ForwardOperator::identity(4);
        let x = random_vec(4, 3);
        op.apply(&x).unwrap();
        op.apply(&x).unwrap();
        op.adjoint(&x).unwrap();
        assert_eq!(op.apply_count(), 2);
        assert_eq!(op.adjoint_count(), 1);
    }

    #[test]
    fn dimension_errors() {
        let op = ForwardOperator::dense(3, 2, vec![c(1.0, 0.0); 6]).unwrap();
        assert!(op.apply(&ComplexVector::zeros(3)).is_err());
        assert!(op.adjoint(&ComplexVector::zeros(2)).is_err());
    }
}
