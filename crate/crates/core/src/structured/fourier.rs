use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{dim_err, Error, Result};

/// DFT of one fixed order: planned transforms plus the explicit DFT matrix
/// `F[k, t] = exp(-2 pi i k t / q)`, built column by column with the FFT.
///
/// Orders are used as given (no zero padding), so prime orders go through
/// the planner's Bluestein path.
pub struct FourierCache {
    order: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    matrix: DMatrix<Complex64>,
}

impl std::fmt::Debug for FourierCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierCache").field("order", &self.order).finish()
    }
}

impl FourierCache {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("fourier order must be positive".into()));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(order);
        let inverse = planner.plan_fft_inverse(order);
        let mut matrix = DMatrix::from_element(order, order, Complex64::new(0.0, 0.0));
        for t in 0..order {
            let mut col = matrix.column_mut(t);
            col[t] = Complex64::new(1.0, 0.0);
            forward.process(col.as_mut_slice());
        }
        Ok(Self { order, forward, inverse, matrix })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// In place `buf <- F buf`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// In place `buf <- F^H buf` (unnormalized inverse).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    /// Column sets `(G, H)` of `F` representing a `rows x cols` Hankel
    /// matrix with `rows + cols - 1 == order`: `G` is columns `cols-1, ..., 0`
    /// and `H` is columns `cols-1, ..., cols+rows-2`.
    pub fn hankel_selectors(&self, rows: usize, cols: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if rows == 0 || cols == 0 || rows + cols - 1 != self.order {
            return dim_err(format!(
                "hankel {}x{} does not match fourier order {}",
                rows, cols, self.order
            ));
        }
        let g = (0..cols).rev().collect();
        let h = (cols - 1..cols - 1 + rows).collect();
        Ok((g, h))
    }

    /// `F^H X` computed with one inverse FFT per column.
    pub fn adjoint_times(&self, x: &mut DMatrix<Complex64>) {
        debug_assert_eq!(x.nrows(), self.order);
        for mut col in x.column_iter_mut() {
            let slice = col.as_mut_slice();
            self.inverse(slice);
        }
    }

    /// `X F` computed with one forward FFT per row (`F` is symmetric).
    pub fn times_right(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        debug_assert_eq!(x.ncols(), self.order);
        let mut t = x.transpose();
        for mut col in t.column_iter_mut() {
            self.forward(col.as_mut_slice());
        }
        t.transpose()
    }
}

fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Circulant matrix through `(1/q) F^H diag(F x) F`.
pub fn circulant_fourier(x: &[f64]) -> Result<DMatrix<Complex64>> {
    let cache = FourierCache::new(x.len())?;
    let mut fx = to_complex(x);
    cache.forward(&mut fx);
    let f = cache.matrix();
    let scaled = DMatrix::from_fn(x.len(), x.len(), |k, t| fx[k] * f[(k, t)]);
    Ok(f.adjoint() * scaled / Complex64::new(x.len() as f64, 0.0))
}

/// Hankel matrix through `(1/N) H^H diag(F x) G`.
pub fn hankel_fourier(x: &[f64], rows: usize, cols: usize) -> Result<DMatrix<Complex64>> {
    if rows == 0 || cols == 0 || x.len() != rows + cols - 1 {
        return dim_err("hankel_fourier: length mismatch");
    }
    let cache = FourierCache::new(x.len())?;
    let (g_idx, h_idx) = cache.hankel_selectors(rows, cols)?;
    let f = cache.matrix();
    let g = f.select_columns(&g_idx);
    let h = f.select_columns(&h_idx);
    let mut fx = to_complex(x);
    cache.forward(&mut fx);
    let n = x.len();
    let dg = DMatrix::from_fn(n, cols, |k, c| fx[k] * g[(k, c)]);
    Ok(h.adjoint() * dg / Complex64::new(n as f64, 0.0))
}

/// Hankel adjoint through `(1/N) F^H diag(H Z G^H)`.
pub fn hankel_adjoint_fourier(z: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let (rows, cols) = z.shape();
    if rows == 0 || cols == 0 {
        return dim_err("hankel_adjoint_fourier: empty matrix");
    }
    let n = rows + cols - 1;
    let cache = FourierCache::new(n)?;
    let (g_idx, h_idx) = cache.hankel_selectors(rows, cols)?;
    let f = cache.matrix();
    let g = f.select_columns(&g_idx);
    let h = f.select_columns(&h_idx);
    let zc = z.map(|v| Complex64::new(v, 0.0));
    let hz = &h * zc;
    // diag(HZ G^H)[k] = sum_c (HZ)[k, c] conj(G[k, c])
    let mut d: Vec<Complex64> =
        (0..n).map(|k| (0..cols).map(|c| hz[(k, c)] * g[(k, c)].conj()).sum()).collect();
    cache.inverse(&mut d);
    Ok(d.into_iter().map(|v| v / n as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structured::{circulant, hankel, hankel_adjoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for q in [1, 2, 5, 7, 12, 29, 97, 120] {
            let cache = FourierCache::new(q).unwrap();
            let x: Vec<Complex64> =
                (0..q).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let mut buf = x.clone();
            cache.forward(&mut buf);
            cache.inverse(&mut buf);
            let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (a, b) in x.iter().zip(buf.iter()) {
                assert!((a - b / q as f64).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn matrix_matches_definition() {
        let cache = FourierCache::new(6).unwrap();
        for k in 0..6 {
            for t in 0..6 {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / 6.0;
                let e = Complex64::new(ang.cos(), ang.sin());
                assert!((cache.matrix()[(k, t)] - e).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn circulant_fourier_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for q in [1, 3, 4, 9, 13] {
            let x: Vec<f64> = (0..q).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let direct = circulant(&x).unwrap();
            let via = circulant_fourier(&x).unwrap();
            for (a, b) in direct.iter().zip(via.iter()) {
                assert!((b - Complex64::new(*a, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hankel_fourier_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for (rows, cols) in [(3, 4), (1, 5), (5, 1), (4, 4), (8, 33), (15, 106)] {
            let x: Vec<f64> = (0..rows + cols - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let direct = hankel(&x, rows, cols).unwrap();
            let via = hankel_fourier(&x, rows, cols).unwrap();
            for (a, b) in direct.iter().zip(via.iter()) {
                assert!((b - Complex64::new(*a, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hankel_adjoint_fourier_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for (rows, cols) in [(3, 4), (2, 2), (7, 3), (10, 41)] {
            let z = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
            let direct = hankel_adjoint(&z);
            let via = hankel_adjoint_fourier(&z).unwrap();
            for (a, b) in direct.iter().zip(via.iter()) {
                assert!((b - Complex64::new(*a, 0.0)).norm() < 1e-10);
            }
        }
    }
}
