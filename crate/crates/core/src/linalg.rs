//! Small dense linear-algebra helpers shared by the estimation code.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Relative singular-value tolerance used for every least-squares solve.
pub const LSTSQ_RTOL: f64 = 1e-10;

const SVD_MAX_ITER: usize = 10_000;

/// Thin SVD with singular values sorted in descending order.
pub fn svd(a: &DMatrix<f64>) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svd input".into()));
    }
    SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::SvdFailed(format!("{}x{}", a.nrows(), a.ncols())))
}

/// Outcome of a rank-revealing least-squares solve.
#[derive(Debug, Clone)]
pub struct LstSq {
    pub solution: DMatrix<f64>,
    pub rank: usize,
    /// Number of unknowns (columns of the regressor).
    pub unknowns: usize,
}

impl LstSq {
    pub fn is_deficient(&self) -> bool {
        self.rank < self.unknowns
    }
}

/// Minimum-norm least-squares solution of `a * x = b`.
///
/// Singular values below `LSTSQ_RTOL * sigma_max` are treated as zero.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<LstSq> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "least squares: regressor has {} rows, target has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let unknowns = a.ncols();
    if unknowns == 0 {
        return Ok(LstSq { solution: DMatrix::zeros(0, b.ncols()), rank: 0, unknowns });
    }
    if a.nrows() == 0 {
        return Ok(LstSq { solution: DMatrix::zeros(unknowns, b.ncols()), rank: 0, unknowns });
    }
    let dec = svd(a)?;
    let smax = dec.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = LSTSQ_RTOL * smax;
    let rank = dec.singular_values.iter().filter(|&&sv| sv > tol && sv > 0.0).count();
    let u = dec.u.as_ref().expect("u requested");
    let vt = dec.v_t.as_ref().expect("v_t requested");
    let mut utb = u.transpose() * b;
    for (r, &sv) in dec.singular_values.iter().enumerate() {
        let scale = if sv > tol && sv > 0.0 { 1.0 / sv } else { 0.0 };
        utb.row_mut(r).scale_mut(scale);
    }
    let solution = vt.transpose() * utb;
    Ok(LstSq { solution, rank, unknowns })
}

/// Frobenius inner product of two equally shaped matrices.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn is_finite(a: &DMatrix<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub fn is_finite_vec(a: &DVector<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// `[c; c a; ...; c a^(rows-1)]`, the extended observability matrix with `rows` block rows.
pub fn observability(a: &DMatrix<f64>, c: &DMatrix<f64>, rows: usize) -> DMatrix<f64> {
    let p = c.nrows();
    let n = a.nrows();
    let mut out = DMatrix::zeros(p * rows, n);
    let mut blk = c.clone();
    for r in 0..rows {
        out.view_mut((r * p, 0), (p, n)).copy_from(&blk);
        blk = &blk * a;
    }
    out
}

/// Eigenvalues of a real square matrix, sorted by (real, imag) for comparison.
pub fn sorted_eigenvalues(a: &DMatrix<f64>) -> Vec<num_complex::Complex64> {
    let mut ev: Vec<_> = a.complex_eigenvalues().iter().cloned().collect();
    ev.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn lstsq_consistent_system() {
        let a = dmatrix![1.0, 0.0; 0.0, 2.0; 1.0, 1.0];
        let x = dmatrix![3.0; -1.0];
        let b = &a * &x;
        let r = lstsq(&a, &b).unwrap();
        assert_eq!(r.rank, 2);
        assert!((r.solution - x).amax() < 1e-12);
    }

    #[test]
    fn lstsq_rank_deficient_min_norm() {
        let a = dmatrix![1.0, 1.0; 1.0, 1.0];
        let b = dmatrix![2.0; 2.0];
        let r = lstsq(&a, &b).unwrap();
        assert!(r.is_deficient());
        assert!((r.solution[0] - 1.0).abs() < 1e-12);
        assert!((r.solution[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_zero_regressor() {
        let a = DMatrix::zeros(3, 2);
        let b = dmatrix![1.0; 2.0; 3.0];
        let r = lstsq(&a, &b).unwrap();
        assert_eq!(r.rank, 0);
        assert_eq!(r.solution, DMatrix::zeros(2, 1));
    }

    #[test]
    fn svd_is_sorted() {
        let a = dmatrix![1.0, 0.0, 0.0; 0.0, 5.0, 0.0; 0.0, 0.0, 3.0];
        let d = svd(&a).unwrap();
        let s: Vec<f64> = d.singular_values.iter().cloned().collect();
        assert_eq!(s, vec![5.0, 3.0, 1.0]);
    }
}
