use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::fourier::FourierCache;
use super::operator::OperatorSpec;
use crate::error::{Error, Result};

/// Tolerated imaginary residue of the assembled matrix, relative to `1 + max |Re|`.
const IMAG_RTOL: f64 = 1e-9;

type CMat = DMatrix<Complex64>;

fn complexify(a: &DMatrix<f64>) -> CMat {
    a.map(|v| Complex64::new(v, 0.0))
}

/// `(1/q^2) L^H (X) R` where `L^H` is applied by inverse FFTs.
///
/// `right` is either the explicit right factor or, when `None`, the full
/// DFT matrix applied by forward FFTs along rows.
fn sandwich(cache: &FourierCache, x: &CMat, right: Option<&CMat>, left_rows: Option<&[usize]>) -> CMat {
    let q = cache.order() as f64;
    let mut t = match right {
        Some(r) => x * r,
        None => cache.times_right(x),
    };
    cache.adjoint_times(&mut t);
    let t = match left_rows {
        Some(rows) => t.select_rows(rows),
        None => t,
    };
    t / Complex64::new(q * q, 0.0)
}

/// Writes `blk` at `(r0, c0)` and, off the diagonal, its transpose at `(c0, r0)`.
fn place(out: &mut CMat, r0: usize, c0: usize, blk: &CMat) {
    out.view_mut((r0, c0), blk.shape()).copy_from(blk);
    if r0 != c0 {
        out.view_mut((c0, r0), (blk.ncols(), blk.nrows())).copy_from(&blk.transpose());
    }
}

/// Row `d` of `F_{:, sel}` columns: the vector `sum_{t in sel} exp(-2 pi i d t / q)`,
/// obtained as the DFT of the indicator of `sel`.
fn gram_symbol(cache: &FourierCache, sel: &[usize]) -> Vec<Complex64> {
    let mut ind = vec![Complex64::new(0.0, 0.0); cache.order()];
    for &t in sel {
        ind[t] = Complex64::new(1.0, 0.0);
    }
    cache.forward(&mut ind);
    ind
}

/// Coupling between `yhat` and a Toeplitz parameter of length `len` acting
/// on `data` (`s x ncols`) with `shift` leading zeros: entry `(t, d)` sums
/// `data[c, t - d - shift - c]` over `c < s - d - shift`. Used when the
/// Hankel matrices are wider than they are long, where the transform
/// formulation does not apply.
fn mixed_direct(data: &DMatrix<f64>, len: usize, shift: usize) -> DMatrix<f64> {
    let (s, ncols) = data.shape();
    let n = s + ncols - 1;
    let mut out = DMatrix::zeros(n, len);
    for d in 0..len {
        let off = d + shift;
        for c in 0..s - off {
            for b in 0..ncols {
                out[(off + c + b, d)] += data[(c, b)];
            }
        }
    }
    out
}

/// Normal-equation matrix `M_i` of one output block, defined by
/// `A_adj,i(A_i(x_i)) = M_i x_i`; identical for every output.
///
/// Block order follows `x_i = (yhat_i, v^{i,1..m}, w^{i,1..p})`. The
/// `yhat`-coupled blocks use the DFT of order `N`; the blocks among the
/// Toeplitz parameters use the DFT of order `2s - 1`.
pub fn build_m(spec: &OperatorSpec) -> Result<DMatrix<f64>> {
    let dims = spec.dims();
    let (n, s, p, m) = (dims.n_samples, dims.s, dims.p, dims.m);
    let ncols = dims.ncols();
    let kappa = 2 * s - 1;
    let side = dims.block_len();
    let v_off = |j: usize| n + j * s;
    let w_off = |j: usize| n + m * s + j * (s - 1);

    let big = FourierCache::new(n)?;
    let (g_idx, h_idx) = big.hankel_selectors(s, ncols)?;
    let f = big.matrix();

    let mut out = CMat::from_element(side, side, Complex64::new(0.0, 0.0));

    // M11: H H^H and G G^H depend only on (k - l) mod N.
    let g_sym = gram_symbol(&big, &g_idx);
    let h_sym = gram_symbol(&big, &h_idx);
    let x11 = CMat::from_fn(n, n, |k, l| {
        let d = (k + n - l) % n;
        h_sym[d] * g_sym[d].conj()
    });
    out.view_mut((0, 0), (n, n)).copy_from(&sandwich(&big, &x11, None, None));

    // M12_j, M13_j
    if m + p > 0 {
        let h_rev_idx: Vec<usize> = h_idx.iter().rev().cloned().collect();
        let a = f.select_columns(&h_rev_idx) * f.select_columns(&h_idx).adjoint();
        let g = f.select_columns(&g_idx);
        let g_first_adj = f.select_columns(&g_idx[..s.min(ncols)]).adjoint();
        let f_rev_s = f.select_columns(&(0..s).rev().collect::<Vec<_>>());
        let f_rev_s1 = f.select_columns(&(0..s - 1).rev().collect::<Vec<_>>());
        let mixed = |data: &DMatrix<f64>, right: &CMat| -> CMat {
            if ncols < s {
                return complexify(&mixed_direct(data, right.ncols(), s - right.ncols()));
            }
            let b = (&g * complexify(&data.transpose())) * &g_first_adj;
            let x = a.zip_map(&b, |ak, bk| ak * bk.conj());
            sandwich(&big, &x, Some(right), None)
        };
        for (j, vj) in spec.v.iter().enumerate() {
            place(&mut out, 0, v_off(j), &mixed(vj, &f_rev_s));
        }
        for (j, wj) in spec.w.iter().enumerate() {
            place(&mut out, 0, w_off(j), &mixed(wj, &f_rev_s1));
        }
    }

    // M22_jk, M23_jk, M33_jk on the order 2s-1 transform.
    let small = FourierCache::new(kappa)?;
    let (gk_idx, hk_idx) = small.hankel_selectors(s, s)?;
    let fk = small.matrix();
    let gk = fk.select_columns(&gk_idx);
    let hk = fk.select_columns(&hk_idx);
    let gram = (&gk * gk.adjoint()).map(|z| z.conj());
    let rs = fk.select_columns(&(0..s).rev().collect::<Vec<_>>());
    let rs1 = fk.select_columns(&(0..s - 1).rev().collect::<Vec<_>>());
    let pv: Vec<CMat> = spec.v.iter().map(|vj| &hk * complexify(vj)).collect();
    let pw: Vec<CMat> = spec.w.iter().map(|wj| &hk * complexify(wj)).collect();

    enum Kind {
        Vv,
        Vw,
        Ww,
    }
    let mut tasks = Vec::new();
    for j in 0..m {
        for k in j..m {
            tasks.push((Kind::Vv, j, k));
        }
        for k in 0..p {
            tasks.push((Kind::Vw, j, k));
        }
    }
    for j in 0..p {
        for k in j..p {
            tasks.push((Kind::Ww, j, k));
        }
    }
    let kappa2 = Complex64::new((kappa * kappa) as f64, 0.0);
    let blocks: Vec<(usize, usize, CMat)> = tasks
        .par_iter()
        .map(|(kind, j, k)| {
            let (lhs, rhs, left, right, r0, c0) = match kind {
                Kind::Vv => (&pv[*j], &pv[*k], &rs, &rs, v_off(*j), v_off(*k)),
                Kind::Vw => (&pv[*j], &pw[*k], &rs, &rs1, v_off(*j), w_off(*k)),
                Kind::Ww => (&pw[*j], &pw[*k], &rs1, &rs1, w_off(*j), w_off(*k)),
            };
            let x = (lhs * rhs.adjoint()).component_mul(&gram);
            (r0, c0, left.adjoint() * x * right / kappa2)
        })
        .collect();
    for (r0, c0, blk) in blocks {
        place(&mut out, r0, c0, &blk);
    }

    let max_re = out.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let max_im = out.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_im > IMAG_RTOL * (1.0 + max_re) {
        return Err(Error::Consistency(format!(
            "coefficient matrix has imaginary residue {max_im:e} (max real part {max_re:e})"
        )));
    }
    let re = out.map(|z| z.re);
    Ok((&re + re.transpose()) * 0.5)
}
