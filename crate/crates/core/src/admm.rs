//! ADMM for `min ||A(x)||_* + 1/2 (x - a)^T H (x - a)` with singular value
//! thresholding, plus a warm-started sweep over the regularization weight.
//!
//! Splitting: `min ||Z||_* + q(x)` subject to `A(x) - Z = 0`, with the
//! unscaled dual `Y`:
//!
//! ```text
//! x <- (H + rho M)^-1 (H a + rho A_adj(Z - Y / rho))
//! Z <- svt(A(x) + Y / rho, 1 / rho)
//! Y <- Y + rho (A(x) - Z)
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{dim_err, Error, Result};
use crate::linalg;
use crate::structured::{apply_adjoint, apply_operator, build_m, DecisionVector, Dims, OperatorSpec};

/// Data-fit term `(lambda / N) sum_k ||y(k) - yhat(k)||^2`, i.e.
/// `H = (2 lambda / N) I` on the `yhat` block and zero elsewhere.
#[derive(Debug, Clone)]
pub struct QuadraticTerm {
    pub lambda: f64,
    pub a: DecisionVector,
}

impl QuadraticTerm {
    /// Diagonal value of `H` on the `yhat` block.
    pub fn weight(&self) -> f64 {
        2.0 * self.lambda / self.a.dims().n_samples as f64
    }

    /// `1/2 (x - a)^T H (x - a)`.
    pub fn value(&self, x: &DecisionVector) -> f64 {
        let dims = self.a.dims();
        let mut acc = 0.0;
        for i in 0..dims.p {
            for (xv, av) in x.yhat(i).iter().zip(self.a.yhat(i)) {
                acc += (xv - av) * (xv - av);
            }
        }
        0.5 * self.weight() * acc
    }

    /// `H a` restricted to output `i`'s block.
    fn h_a_block(&self, i: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.a.dims().block_len());
        let w = self.weight();
        for (k, &v) in self.a.yhat(i).iter().enumerate() {
            out[k] = w * v;
        }
        out
    }
}

/// Builds the fit term from `N x p` measured outputs.
pub fn build_quadratic(y: &DMatrix<f64>, lambda: f64, dims: Dims) -> Result<QuadraticTerm> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(QuadraticTerm { lambda, a: DecisionVector::from_outputs(dims, y)? })
}

/// Solver settings. Defaults: 200 iterations, tolerances 1e-6 / 1e-3,
/// penalty update factor 2 and residual balance ratio 10.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmParams {
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub tau: f64,
    pub mu: f64,
    pub rho0: f64,
    /// Residual-balancing penalty updates; off gives a fixed-penalty run.
    pub adapt_rho: bool,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            max_iter: 200,
            eps_abs: 1e-6,
            eps_rel: 1e-3,
            tau: 2.0,
            mu: 10.0,
            rho0: 1.0,
            adapt_rho: true,
            rho_min: 1e-6,
            rho_max: 1e6,
        }
    }
}

impl AdmmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps_abs, self.eps_rel, self.rho0, self.rho_min, self.rho_max];
        if self.max_iter == 0 || positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("ADMM parameters must be positive".into()));
        }
        if !(self.tau > 1.0) || !(self.mu > 1.0) {
            return Err(Error::InvalidArgument("ADMM requires tau > 1 and mu > 1".into()));
        }
        if self.rho_min > self.rho_max {
            return Err(Error::InvalidArgument("rho_min exceeds rho_max".into()));
        }
        Ok(())
    }
}

/// Joint diagonalization of the per-output normal matrix `M` and the
/// selector `D = diag(1_N, 0)` of the `yhat` block.
///
/// With `B = M + D` and `T` such that `T^T B T = I`, `T^T D T = diag(gamma)`
/// (hence `T^T M T = I - diag(gamma)`), every system
/// `(rho M + h D) x = r` is solved as
/// `x = T diag(1 / (rho (1 - gamma) + h gamma)) T^T r`, for any `rho` and
/// `h` without refactoring. `T` comes from a Cholesky factor `L` of `B`
/// and the eigenvectors of `L^-1 D L^-T`. Coordinates where both `M` and
/// `D` vanish (an all-zero input channel) are dropped, giving the
/// minimum-norm solution.
#[derive(Debug, Clone)]
pub struct SweepFactorization {
    dims: Dims,
    m: DMatrix<f64>,
    t: DMatrix<f64>,
    gamma: DVector<f64>,
}

const DIAG_RTOL: f64 = 1e-14;
const PSEUDO_RTOL: f64 = 1e-12;

impl SweepFactorization {
    pub fn new(spec: &OperatorSpec) -> Result<Self> {
        let m = build_m(spec)?;
        Self::from_matrix(spec.dims(), m)
    }

    pub fn from_matrix(dims: Dims, m: DMatrix<f64>) -> Result<Self> {
        let side = dims.block_len();
        if m.shape() != (side, side) {
            return dim_err(format!("M is {:?}, expected {side}x{side}", m.shape()));
        }
        if !linalg::is_finite(&m) {
            return Err(Error::NonFinite("coefficient matrix".into()));
        }
        let n = dims.n_samples;
        let mut b = m.clone();
        for k in 0..n {
            b[(k, k)] += 1.0;
        }
        // M is PSD, so a vanishing diagonal entry means a vanishing row
        let dmax = b.diagonal().amax();
        let keep: Vec<usize> = (0..side).filter(|&k| b[(k, k)] > DIAG_RTOL * dmax).collect();
        let bk = b.select_rows(&keep).select_columns(&keep);
        let chol = bk
            .cholesky()
            .ok_or_else(|| Error::EigenFailed("M + D is not positive definite".into()))?;
        // C = L^-1 D L^-T has its spectrum in [0, 1], which the symmetric
        // eigensolver resolves to full accuracy (unlike B itself)
        let selected: Vec<usize> = keep.iter().enumerate().filter(|(_, &k)| k < n).map(|(r, _)| r).collect();
        let mut sel = DMatrix::zeros(keep.len(), selected.len());
        for (c, &r) in selected.iter().enumerate() {
            sel[(r, c)] = 1.0;
        }
        let l = chol.l();
        let g = l
            .solve_lower_triangular(&sel)
            .ok_or_else(|| Error::EigenFailed("triangular solve".into()))?;
        let c = &g * g.transpose();
        let ec = SymmetricEigen::try_new(c, f64::EPSILON, 0)
            .ok_or_else(|| Error::EigenFailed("reduced D pencil".into()))?;
        let tk = l
            .transpose()
            .solve_upper_triangular(&ec.eigenvectors)
            .ok_or_else(|| Error::EigenFailed("triangular solve".into()))?;
        let mut t = DMatrix::zeros(side, keep.len());
        for (r, &k) in keep.iter().enumerate() {
            t.set_row(k, &tk.row(r));
        }
        let gamma = ec.eigenvalues.map(|g| g.clamp(0.0, 1.0));
        Ok(Self { dims, m, t, gamma })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// The per-output normal matrix `M`.
    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Number of directions kept per output block.
    pub fn rank(&self) -> usize {
        self.t.ncols()
    }

    pub fn transform(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    /// `M` rebuilt from the factors, `B T (I - Gamma) T^T B`.
    pub fn reconstruct_m(&self) -> DMatrix<f64> {
        let mut b = self.m.clone();
        for k in 0..self.dims.n_samples {
            b[(k, k)] += 1.0;
        }
        let bt = &b * &self.t;
        let mut scaled = bt.clone();
        for (c, g) in self.gamma.iter().enumerate() {
            scaled.column_mut(c).scale_mut(1.0 - g);
        }
        scaled * bt.transpose()
    }

    /// Solves `(rho M + h D) x = rhs` for one output block.
    pub fn solve_block(&self, rhs: &DVector<f64>, rho: f64, h: f64) -> Result<DVector<f64>> {
        let mut coef = self.t.tr_mul(rhs);
        let scale = rho + h;
        let mut dropped = 0.0;
        let mut kept = 0.0;
        for (c, g) in coef.iter_mut().zip(self.gamma.iter()) {
            let denom = rho * (1.0 - g) + h * g;
            if denom > PSEUDO_RTOL * scale {
                kept += *c * *c;
                *c /= denom;
            } else {
                dropped += *c * *c;
                *c = 0.0;
            }
        }
        if dropped > 1e-16 * (1.0 + kept) && dropped.sqrt() > 1e-8 * (1.0 + kept.sqrt()) {
            return Err(Error::Consistency(
                "x-update system is singular and the right-hand side leaves its range".into(),
            ));
        }
        Ok(&self.t * coef)
    }
}

/// Proximal operator of `t ||.||_*`: soft-thresholds the singular values.
pub fn svt(y: &DMatrix<f64>, threshold: f64) -> Result<DMatrix<f64>> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be >= 0, got {threshold}")));
    }
    if threshold == 0.0 {
        return Ok(y.clone());
    }
    let mut dec = linalg::svd(y)?;
    for sv in dec.singular_values.iter_mut() {
        *sv = (*sv - threshold).max(0.0);
    }
    let u = dec.u.take().expect("u requested");
    let vt = dec.v_t.take().expect("v_t requested");
    let mut us = u;
    for (c, sv) in dec.singular_values.iter().enumerate() {
        us.column_mut(c).scale_mut(*sv);
    }
    Ok(us * vt)
}

pub fn nuclear_norm(z: &DMatrix<f64>) -> Result<f64> {
    Ok(linalg::svd(z)?.singular_values.sum())
}

/// Iterates to resume from.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub x: DecisionVector,
    pub z: DMatrix<f64>,
    pub dual: DMatrix<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub lambda: f64,
    pub x: DecisionVector,
    /// Low-rank iterate produced by the thresholding step.
    pub z: DMatrix<f64>,
    pub dual: DMatrix<f64>,
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    /// `||A(x)||_* + 1/2 (x - a)^T H (x - a)` at the returned `x`.
    pub objective: f64,
    pub converged: bool,
    pub rho: f64,
}

impl SolveResult {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart { x: self.x.clone(), z: self.z.clone(), dual: self.dual.clone(), rho: self.rho }
    }
}

/// Objective `||A(x)||_* + 1/2 (x - a)^T H (x - a)`.
pub fn objective(spec: &OperatorSpec, quad: &QuadraticTerm, x: &DecisionVector) -> Result<f64> {
    Ok(nuclear_norm(&apply_operator(x, spec)?)? + quad.value(x))
}

pub fn solve(
    spec: &OperatorSpec,
    quad: &QuadraticTerm,
    params: &AdmmParams,
    fact: &SweepFactorization,
    warm: Option<&WarmStart>,
) -> Result<SolveResult> {
    params.validate()?;
    let dims = spec.dims();
    if quad.a.dims() != dims || fact.dims() != dims {
        return dim_err("quadratic term, factorization and operator disagree on dimensions");
    }
    let (zr, zc) = spec.z_shape();
    if quad.lambda == 0.0 {
        // no fit term: x = 0 attains the minimum of the nuclear norm exactly
        return Ok(SolveResult {
            lambda: 0.0,
            x: DecisionVector::zeros(dims),
            z: DMatrix::zeros(zr, zc),
            dual: DMatrix::zeros(zr, zc),
            iterations: 0,
            primal_res: 0.0,
            dual_res: 0.0,
            objective: 0.0,
            converged: true,
            rho: params.rho0,
        });
    }
    let (mut x, mut z, mut dual, mut rho) = match warm {
        Some(w) => {
            if w.x.dims() != dims || w.z.shape() != (zr, zc) || w.dual.shape() != (zr, zc) {
                return dim_err("warm start does not match the operator");
            }
            (w.x.clone(), w.z.clone(), w.dual.clone(), w.rho.clamp(params.rho_min, params.rho_max))
        }
        None => {
            let x = quad.a.clone();
            let z = apply_operator(&x, spec)?;
            (x, z, DMatrix::zeros(zr, zc), params.rho0)
        }
    };
    let h = quad.weight();
    let ha: Vec<DVector<f64>> = (0..dims.p).map(|i| quad.h_a_block(i)).collect();
    let sqrt_pri = ((zr * zc) as f64).sqrt();
    // directions the solve never moves (e.g. an all-zero input) do not count
    let sqrt_dual = ((dims.p * fact.rank()) as f64).sqrt();

    let mut iterations = 0;
    let mut converged = false;
    let mut r_norm = f64::INFINITY;
    let mut s_norm = f64::INFINITY;
    for it in 1..=params.max_iter {
        iterations = it;
        let target = &z - &dual / rho;
        let adj = apply_adjoint(&target, spec)?;
        for (i, ha_i) in ha.iter().enumerate() {
            let rhs = ha_i + adj.output_block(i) * rho;
            let xi = fact.solve_block(&rhs, rho, h)?;
            x.set_output_block(i, &xi);
        }
        let ax = apply_operator(&x, spec)?;
        let z_old = std::mem::replace(&mut z, svt(&(&ax + &dual / rho), 1.0 / rho)?);
        let r = &ax - &z;
        dual += &r * rho;
        if !linalg::is_finite(&dual) || !linalg::is_finite(&z) || !linalg::is_finite_vec(&x.data) {
            return Err(Error::NonFinite(format!("ADMM iterate at iteration {it}")));
        }

        r_norm = r.norm();
        s_norm = rho * apply_adjoint(&(&z - &z_old), spec)?.data.norm();
        let eps_pri = sqrt_pri * params.eps_abs + params.eps_rel * ax.norm().max(z.norm());
        let eps_dual = sqrt_dual * params.eps_abs + params.eps_rel * apply_adjoint(&dual, spec)?.data.norm();
        if r_norm <= eps_pri && s_norm <= eps_dual {
            converged = true;
            break;
        }
        if params.adapt_rho {
            if r_norm > params.mu * s_norm {
                rho = (rho * params.tau).min(params.rho_max);
            } else if s_norm > params.mu * r_norm {
                rho = (rho / params.tau).max(params.rho_min);
            }
        }
    }
    let objective = objective(spec, quad, &x)?;
    Ok(SolveResult {
        lambda: quad.lambda,
        x,
        z,
        dual,
        iterations,
        primal_res: r_norm,
        dual_res: s_norm,
        objective,
        converged,
        rho,
    })
}

/// `L` logarithmically spaced points from `min` to `max`; the endpoints are
/// returned exactly as given.
pub fn logspace(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || !(min > 0.0) || !(max >= min) || !max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "logspace needs 0 < min <= max and count >= 1 (got {min}, {max}, {count})"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.log10(), max.log10());
    let step = (b - a) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| match i {
            0 => min,
            i if i == count - 1 => max,
            i => 10f64.powf(a + step * i as f64),
        })
        .collect())
}

/// One solve per grid point, sharing a single factorization.
///
/// With `warm_start` each point resumes from the previous successful one;
/// without it the points are independent and are solved in parallel.
/// Failures are kept per point and do not abort the sweep.
pub fn sweep(
    spec: &OperatorSpec,
    y: &DMatrix<f64>,
    grid: &[f64],
    params: &AdmmParams,
    warm_start: bool,
) -> Result<Vec<Result<SolveResult>>> {
    let fact = SweepFactorization::new(spec)?;
    sweep_with(spec, &fact, y, grid, params, warm_start)
}

pub fn sweep_with(
    spec: &OperatorSpec,
    fact: &SweepFactorization,
    y: &DMatrix<f64>,
    grid: &[f64],
    params: &AdmmParams,
    warm_start: bool,
) -> Result<Vec<Result<SolveResult>>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    if grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument("lambda grid must be strictly positive".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("lambda grid must be strictly ascending".into()));
    }
    let dims = spec.dims();
    let solve_at = |lambda: f64, warm: Option<&WarmStart>| -> Result<SolveResult> {
        let quad = build_quadratic(y, lambda, dims)?;
        solve(spec, &quad, params, fact, warm)
    };
    if warm_start {
        let mut out = Vec::with_capacity(grid.len());
        let mut warm: Option<WarmStart> = None;
        for &lambda in grid {
            let res = solve_at(lambda, warm.as_ref());
            if let Ok(r) = &res {
                warm = Some(r.warm_start());
            }
            out.push(res);
        }
        Ok(out)
    } else {
        Ok(grid.par_iter().map(|&lambda| solve_at(lambda, None)).collect())
    }
}
