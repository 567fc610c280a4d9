use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::{hankel, hankel_adjoint};
use crate::error::{dim_err, Error, Result};

/// Problem dimensions: samples, block rows, outputs, inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n_samples: usize,
    pub s: usize,
    pub p: usize,
    pub m: usize,
}

impl Dims {
    /// Hankel column count `N - s + 1`.
    pub fn ncols(&self) -> usize {
        self.n_samples + 1 - self.s
    }

    /// Length of one output's share `x_i = (yhat_i, v_i, w_i)`.
    pub fn block_len(&self) -> usize {
        self.n_samples + self.m * self.s + self.p * (self.s - 1)
    }

    pub fn dim(&self) -> usize {
        self.p * self.block_len()
    }

    fn yhat_range(&self, i: usize) -> Range<usize> {
        let start = i * self.n_samples;
        start..start + self.n_samples
    }

    fn v_range(&self, i: usize, j: usize) -> Range<usize> {
        let start = self.p * self.n_samples + (i * self.m + j) * self.s;
        start..start + self.s
    }

    fn w_range(&self, i: usize, j: usize) -> Range<usize> {
        let start = self.p * (self.n_samples + self.m * self.s) + (i * self.p + j) * (self.s - 1);
        start..start + self.s - 1
    }

    /// Global indices of output `i`'s block, in block order
    /// `(yhat_i, v^{i,1..m}, w^{i,1..p})`.
    pub fn output_block_indices(&self, i: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self.yhat_range(i).collect();
        for j in 0..self.m {
            idx.extend(self.v_range(i, j));
        }
        for j in 0..self.p {
            idx.extend(self.w_range(i, j));
        }
        idx
    }
}

/// Frozen data of the structured operator.
///
/// `v[j]` is the negated `s x ncols` Hankel matrix of input channel `j` and
/// `w[j]` the same for output channel `j`.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    dims: Dims,
    pub v: Vec<DMatrix<f64>>,
    pub w: Vec<DMatrix<f64>>,
}

impl OperatorSpec {
    /// Builds the operator from `N x m` inputs and `N x p` outputs.
    pub fn new(u: &DMatrix<f64>, y: &DMatrix<f64>, s: usize) -> Result<Self> {
        let n = y.nrows();
        if u.nrows() != n {
            return dim_err(format!("u has {} samples, y has {}", u.nrows(), n));
        }
        if s < 2 {
            return Err(Error::InvalidArgument(format!("block rows s must be >= 2, got {s}")));
        }
        if n <= s {
            return Err(Error::InvalidArgument(format!(
                "need more samples than block rows: N = {n}, s = {s}"
            )));
        }
        if y.ncols() == 0 {
            return Err(Error::InvalidArgument("at least one output is required".into()));
        }
        let dims = Dims { n_samples: n, s, p: y.ncols(), m: u.ncols() };
        let ncols = dims.ncols();
        let neg_hankel = |col: Vec<f64>| -> Result<DMatrix<f64>> { Ok(-hankel(&col, s, ncols)?) };
        let v = (0..dims.m)
            .map(|j| neg_hankel(u.column(j).iter().cloned().collect()))
            .collect::<Result<Vec<_>>>()?;
        let w = (0..dims.p)
            .map(|j| neg_hankel(y.column(j).iter().cloned().collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dims, v, w })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Shape of `A(x)`: `(p s, N - s + 1)`.
    pub fn z_shape(&self) -> (usize, usize) {
        (self.dims.p * self.dims.s, self.dims.ncols())
    }
}

/// Decision variable `x = (yhat, v, w)` stored as one flat vector.
///
/// Global order: all `yhat_i` (`i = 0..p`, `N` values each), then all
/// `v^{i,j}` grouped by `i` then `j` (`s` values each, first column of the
/// `(i, j)` entries of `T_u`), then all `w^{i,j}` grouped the same way
/// (`s - 1` values each, first column of `T_y` below its zero diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    dims: Dims,
    pub data: DVector<f64>,
}

impl DecisionVector {
    pub fn zeros(dims: Dims) -> Self {
        Self { dims, data: DVector::zeros(dims.dim()) }
    }

    pub fn from_flat(dims: Dims, data: DVector<f64>) -> Result<Self> {
        if data.len() != dims.dim() {
            return dim_err(format!("decision vector has {} entries, expected {}", data.len(), dims.dim()));
        }
        Ok(Self { dims, data })
    }

    /// Vector whose `yhat` block holds the `N x p` outputs `y`, with `v = w = 0`.
    pub fn from_outputs(dims: Dims, y: &DMatrix<f64>) -> Result<Self> {
        if y.shape() != (dims.n_samples, dims.p) {
            return dim_err(format!("outputs are {:?}, expected ({}, {})", y.shape(), dims.n_samples, dims.p));
        }
        let mut out = Self::zeros(dims);
        for i in 0..dims.p {
            out.yhat_mut(i).copy_from_slice(y.column(i).as_slice());
        }
        Ok(out)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn yhat(&self, i: usize) -> &[f64] {
        &self.data.as_slice()[self.dims.yhat_range(i)]
    }
    pub fn yhat_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.dims.yhat_range(i);
        &mut self.data.as_mut_slice()[r]
    }
    pub fn v(&self, i: usize, j: usize) -> &[f64] {
        &self.data.as_slice()[self.dims.v_range(i, j)]
    }
    pub fn v_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let r = self.dims.v_range(i, j);
        &mut self.data.as_mut_slice()[r]
    }
    pub fn w(&self, i: usize, j: usize) -> &[f64] {
        &self.data.as_slice()[self.dims.w_range(i, j)]
    }
    pub fn w_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let r = self.dims.w_range(i, j);
        &mut self.data.as_mut_slice()[r]
    }

    /// `N x p` matrix of the predicted outputs.
    pub fn yhat_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dims.n_samples, self.dims.p, |k, i| self.yhat(i)[k])
    }

    pub fn output_block(&self, i: usize) -> DVector<f64> {
        let idx = self.dims.output_block_indices(i);
        DVector::from_iterator(idx.len(), idx.iter().map(|&g| self.data[g]))
    }

    pub fn set_output_block(&mut self, i: usize, block: &DVector<f64>) {
        let idx = self.dims.output_block_indices(i);
        assert_eq!(idx.len(), block.len(), "output block length");
        for (&g, &val) in idx.iter().zip(block.iter()) {
            self.data[g] = val;
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data.dot(&other.data)
    }
}

/// `T(first) * h` for an `s x s` lower-triangular Toeplitz `T` with first
/// column `[0; .., first]` where `shift` leading zeros are prepended.
fn toeplitz_times(first: &[f64], shift: usize, h: &DMatrix<f64>, out: &mut DMatrix<f64>) {
    let s = h.nrows();
    for a in 0..s {
        for c in 0..=a {
            let d = a - c;
            if d < shift {
                continue;
            }
            let coef = first[d - shift];
            if coef == 0.0 {
                continue;
            }
            for b in 0..h.ncols() {
                out[(a, b)] += coef * h[(c, b)];
            }
        }
    }
}

/// `A(x) = Yhat_s - T_u U_s - T_y Y_s` in block-Hankel row layout: row
/// `r p + i` is output `i` at window offset `r`.
pub fn apply_operator(x: &DecisionVector, spec: &OperatorSpec) -> Result<DMatrix<f64>> {
    let dims = spec.dims();
    if x.dims() != dims {
        return dim_err(format!("decision vector dims {:?} do not match operator {:?}", x.dims(), dims));
    }
    let (s, p, ncols) = (dims.s, dims.p, dims.ncols());
    let mut z = DMatrix::zeros(p * s, ncols);
    for i in 0..p {
        let mut zi = hankel(x.yhat(i), s, ncols)?;
        for (j, vj) in spec.v.iter().enumerate() {
            toeplitz_times(x.v(i, j), 0, vj, &mut zi);
        }
        for (j, wj) in spec.w.iter().enumerate() {
            toeplitz_times(x.w(i, j), 1, wj, &mut zi);
        }
        for a in 0..s {
            z.row_mut(a * p + i).copy_from(&zi.row(a));
        }
    }
    Ok(z)
}

/// Adjoint of [`apply_operator`] with respect to the Frobenius and
/// Euclidean inner products.
///
/// Per output, the `v` part is the Hankel adjoint of `V_j Z_i[rev, :]^T`
/// read at entries `s-1, ..., 0` and the `w` part the same for `W_j` read at
/// entries `s-2, ..., 0`.
pub fn apply_adjoint(z: &DMatrix<f64>, spec: &OperatorSpec) -> Result<DecisionVector> {
    let dims = spec.dims();
    if z.shape() != spec.z_shape() {
        return dim_err(format!("Z is {:?}, operator range is {:?}", z.shape(), spec.z_shape()));
    }
    let (s, p, ncols) = (dims.s, dims.p, dims.ncols());
    let mut out = DecisionVector::zeros(dims);
    for i in 0..p {
        let zi = DMatrix::from_fn(s, ncols, |a, b| z[(a * p + i, b)]);
        out.yhat_mut(i).copy_from_slice(&hankel_adjoint(&zi));
        // Z_i with rows in reverse order
        let zi_rev = DMatrix::from_fn(s, ncols, |a, b| zi[(s - 1 - a, b)]);
        for (j, vj) in spec.v.iter().enumerate() {
            let h = hankel_adjoint(&(vj * zi_rev.transpose()));
            let dst = out.v_mut(i, j);
            for (d, slot) in dst.iter_mut().enumerate() {
                *slot = h[s - 1 - d];
            }
        }
        for (j, wj) in spec.w.iter().enumerate() {
            let h = hankel_adjoint(&(wj * zi_rev.transpose()));
            let dst = out.w_mut(i, j);
            for (d, slot) in dst.iter_mut().enumerate() {
                *slot = h[s - 2 - d];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structured::{block_hankel, toeplitz_lower};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_x(rng: &mut ChaCha8Rng, dims: Dims) -> DecisionVector {
        DecisionVector::from_flat(dims, DVector::from_fn(dims.dim(), |_, _| rng.gen_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn layout_lengths() {
        let dims = Dims { n_samples: 10, s: 3, p: 2, m: 3 };
        assert_eq!(dims.dim(), 2 * 10 + 2 * 3 * 3 + 2 * 2 * 2);
        let mut all: Vec<usize> = (0..2).flat_map(|i| dims.output_block_indices(i)).collect();
        all.sort();
        assert_eq!(all, (0..dims.dim()).collect::<Vec<_>>());
    }

    #[test]
    fn spec_matrices_are_negated_hankels() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let u = rand_mat(&mut rng, 12, 2);
        let y = rand_mat(&mut rng, 12, 1);
        let spec = OperatorSpec::new(&u, &y, 4).unwrap();
        for j in 0..2 {
            let bh = block_hankel(&u.columns(j, 1).into_owned(), 4).unwrap();
            assert_eq!(-&spec.v[j], bh);
        }
        assert!(OperatorSpec::new(&u, &y, 1).is_err());
        assert!(OperatorSpec::new(&u.rows(0, 4).into_owned(), &y.rows(0, 4).into_owned(), 4).is_err());
    }

    #[test]
    fn hankel_only_when_toeplitz_parts_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let u = rand_mat(&mut rng, 9, 1);
        let y = rand_mat(&mut rng, 9, 2);
        let spec = OperatorSpec::new(&u, &y, 3).unwrap();
        let yhat = rand_mat(&mut rng, 9, 2);
        let x = DecisionVector::from_outputs(spec.dims(), &yhat).unwrap();
        let z = apply_operator(&x, &spec).unwrap();
        assert_eq!(z, block_hankel(&yhat, 3).unwrap());
    }

    #[test]
    fn siso_matches_dense_toeplitz_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let (n, s) = (11, 4);
        let u = rand_mat(&mut rng, n, 1);
        let y = rand_mat(&mut rng, n, 1);
        let spec = OperatorSpec::new(&u, &y, s).unwrap();
        let x = random_x(&mut rng, spec.dims());
        let tu = toeplitz_lower(x.v(0, 0), s).unwrap();
        let ty = toeplitz_lower(x.w(0, 0), s).unwrap();
        let dense = block_hankel(&x.yhat_matrix(), s).unwrap() - tu * block_hankel(&u, s).unwrap()
            - ty * block_hankel(&y, s).unwrap();
        assert!((apply_operator(&x, &spec).unwrap() - dense).amax() < 1e-12);
    }

    #[test]
    fn adjoint_of_single_entry_matches_dense_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let u = rand_mat(&mut rng, 8, 1);
        let y = rand_mat(&mut rng, 8, 1);
        let spec = OperatorSpec::new(&u, &y, 3).unwrap();
        let dims = spec.dims();
        // dense operator matrix, one column per basis vector
        let cols: Vec<DMatrix<f64>> = (0..dims.dim())
            .map(|k| {
                let mut e = DecisionVector::zeros(dims);
                e.data[k] = 1.0;
                apply_operator(&e, &spec).unwrap()
            })
            .collect();
        let (rows, ncols) = spec.z_shape();
        for a in 0..rows {
            for b in 0..ncols {
                let mut z = DMatrix::zeros(rows, ncols);
                z[(a, b)] = 1.0;
                let adj = apply_adjoint(&z, &spec).unwrap();
                for (k, col) in cols.iter().enumerate() {
                    assert!((adj.data[k] - col[(a, b)]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn adjoint_of_zero_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let spec = OperatorSpec::new(&rand_mat(&mut rng, 10, 2), &rand_mat(&mut rng, 10, 2), 3).unwrap();
        let (r, c) = spec.z_shape();
        let adj = apply_adjoint(&DMatrix::zeros(r, c), &spec).unwrap();
        assert!(adj.data.iter().all(|&v| v == 0.0));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn adjoint_identity(seed in 0u64..10_000, s in 2usize..=8, extra in 2usize..=20, p in 1usize..=2, m in 0usize..=2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = s + extra;
            let spec = OperatorSpec::new(&rand_mat(&mut rng, n, m), &rand_mat(&mut rng, n, p), s).unwrap();
            let x = random_x(&mut rng, spec.dims());
            let (r, c) = spec.z_shape();
            let z = rand_mat(&mut rng, r, c);
            let lhs = crate::linalg::frob_dot(&apply_operator(&x, &spec).unwrap(), &z);
            let rhs = x.dot(&apply_adjoint(&z, &spec).unwrap());
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
