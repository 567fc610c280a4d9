//! Circulant, Hankel and Toeplitz operators, the structured linear map
//! `x = (yhat, v, w) -> Yhat_s - T_u U_s - T_y Y_s` with its adjoint, and
//! FFT assembly of the normal-equation matrix.

mod coefficient;
mod fourier;
mod operator;

pub use coefficient::build_m;
pub use fourier::{circulant_fourier, hankel_adjoint_fourier, hankel_fourier, FourierCache};
pub use operator::{apply_adjoint, apply_operator, DecisionVector, Dims, OperatorSpec};

use nalgebra::DMatrix;

use crate::error::{dim_err, Error, Result};

/// Circulant matrix whose column `c` is `x` cyclically shifted down by `c`.
pub fn circulant(x: &[f64]) -> Result<DMatrix<f64>> {
    let q = x.len();
    if q == 0 {
        return Err(Error::InvalidArgument("circulant of an empty vector".into()));
    }
    Ok(DMatrix::from_fn(q, q, |r, c| x[(r + q - c) % q]))
}

/// `rows x cols` Hankel matrix with entry `(a, b) = x[a + b]`.
pub fn hankel(x: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if rows == 0 || cols == 0 || x.len() != rows + cols - 1 {
        return dim_err(format!(
            "hankel {}x{} needs {} values, got {}",
            rows,
            cols,
            (rows + cols).saturating_sub(1),
            x.len()
        ));
    }
    Ok(DMatrix::from_fn(rows, cols, |a, b| x[a + b]))
}

/// Adjoint of [`hankel`]: sums each anti-diagonal of `z`.
pub fn hankel_adjoint(z: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = z.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let mut out = vec![0.0; rows + cols - 1];
    for b in 0..cols {
        for a in 0..rows {
            out[a + b] += z[(a, b)];
        }
    }
    out
}

/// Lower-triangular Toeplitz matrix of side `s` with the given first column.
///
/// A first column of length `s` fills the diagonal; length `s - 1` gives a
/// strictly lower-triangular matrix whose subdiagonal starts with
/// `first_col[0]`.
pub fn toeplitz_lower(first_col: &[f64], s: usize) -> Result<DMatrix<f64>> {
    let shift = if first_col.len() == s {
        0
    } else if s >= 1 && first_col.len() + 1 == s {
        1
    } else {
        return dim_err(format!(
            "toeplitz of side {} needs {} or {} values, got {}",
            s,
            s,
            s.saturating_sub(1),
            first_col.len()
        ));
    };
    Ok(DMatrix::from_fn(s, s, |a, c| {
        if a >= c + shift {
            first_col[a - c - shift]
        } else {
            0.0
        }
    }))
}

/// Block-Hankel matrix of a multichannel series (`samples x q`).
///
/// Block row `r`, block column `c` holds sample `r + c` as a column of
/// height `q`; the result has `q * s` rows and `samples - s + 1` columns.
pub fn block_hankel(series: &DMatrix<f64>, s: usize) -> Result<DMatrix<f64>> {
    let (n, q) = series.shape();
    if s == 0 || n <= s {
        return Err(Error::InvalidArgument(format!(
            "block hankel needs more than s = {s} samples, got {n}"
        )));
    }
    let cols = n - s + 1;
    Ok(DMatrix::from_fn(q * s, cols, |row, c| series[(row / q + c, row % q)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn circulant_pattern() {
        let c = circulant(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c, dmatrix![1.0, 3.0, 2.0; 2.0, 1.0, 3.0; 3.0, 2.0, 1.0]);
        let e = circulant(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(e, DMatrix::identity(4, 4));
        assert!(circulant(&[]).is_err());
    }

    #[test]
    fn hankel_examples() {
        assert_eq!(hankel(&[1.0, 2.0, 3.0], 2, 2).unwrap(), dmatrix![1.0, 2.0; 2.0, 3.0]);
        assert_eq!(hankel(&[4.0, 5.0, 6.0], 1, 3).unwrap(), dmatrix![4.0, 5.0, 6.0]);
        assert!(hankel(&[1.0, 2.0], 2, 2).is_err());
    }

    #[test]
    fn hankel_is_reversed_corner_of_circulant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (rows, cols) in [(1, 1), (2, 5), (3, 4), (6, 2), (5, 5)] {
            let x: Vec<f64> = (0..rows + cols - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h = hankel(&x, rows, cols).unwrap();
            let c = circulant(&x).unwrap();
            // rows cols..cols+rows-1 (1-based), columns cols..1 reversed
            for a in 0..rows {
                for b in 0..cols {
                    assert_eq!(h[(a, b)], c[(cols - 1 + a, cols - 1 - b)]);
                }
            }
        }
    }

    #[test]
    fn hankel_adjoint_counts() {
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert_eq!(hankel_adjoint(&ones), vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn toeplitz_examples() {
        assert_eq!(toeplitz_lower(&[7.0], 1).unwrap(), dmatrix![7.0]);
        assert_eq!(
            toeplitz_lower(&[1.0, 2.0, 3.0], 3).unwrap(),
            dmatrix![1.0, 0.0, 0.0; 2.0, 1.0, 0.0; 3.0, 2.0, 1.0]
        );
        assert_eq!(
            toeplitz_lower(&[5.0, 7.0], 3).unwrap(),
            dmatrix![0.0, 0.0, 0.0; 5.0, 0.0, 0.0; 7.0, 5.0, 0.0]
        );
        assert!(toeplitz_lower(&[1.0], 3).is_err());
    }

    #[test]
    fn block_hankel_layout() {
        let x = dmatrix![1.0; 2.0; 3.0; 4.0];
        assert_eq!(block_hankel(&x, 2).unwrap(), dmatrix![1.0, 2.0, 3.0; 2.0, 3.0, 4.0]);

        let two = dmatrix![1.0, 10.0; 2.0, 20.0; 3.0, 30.0];
        let bh = block_hankel(&two, 2).unwrap();
        assert_eq!(bh.column(0).as_slice(), &[1.0, 10.0, 2.0, 20.0]);
        assert_eq!(bh.column(1).as_slice(), &[2.0, 20.0, 3.0, 30.0]);
        assert!(block_hankel(&two, 3).is_err());
    }
}
