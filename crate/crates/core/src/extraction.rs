//! System matrices from the solution of the convex program: SVD of the
//! low-rank matrix, order selection and the three model computations.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, lstsq, observability};
use crate::model::{IoRecord, ObserverModel, StateSpaceModel};
use crate::structured::DecisionVector;

/// Relative floor below which singular values are ignored by [`select_order`].
pub const SIGMA_FLOOR: f64 = 1e-12;

pub const DEFAULT_MAX_ORDER: usize = 10;

/// Thin SVD of the `ps x ncols` low-rank matrix, values descending.
#[derive(Debug, Clone)]
pub struct SubspaceSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub vt: DMatrix<f64>,
}

impl SubspaceSvd {
    pub fn new(z: &DMatrix<f64>) -> Result<Self> {
        let mut dec = linalg::svd(z)?;
        let u = dec.u.take().expect("u requested");
        let vt = dec.v_t.take().expect("v_t requested");
        Ok(Self { u, sigma: dec.singular_values, vt })
    }

    /// Number of singular values above `SIGMA_FLOOR * sigma_1`.
    pub fn numerical_rank(&self) -> usize {
        numerical_rank(self.sigma.as_slice())
    }
}

pub fn numerical_rank(sigma: &[f64]) -> usize {
    let top = sigma.first().cloned().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&v| v >= SIGMA_FLOOR * top).count()
}

/// Log-mean order rule: among the singular values at or above
/// `SIGMA_FLOOR * sigma_1`, pick the (1-based) index whose logarithm is
/// closest to the mean of the logs of the largest and smallest; ties go to
/// the smaller index. The result is clamped to `[1, max_order]`.
pub fn select_order(sigma: &[f64], max_order: usize) -> Result<usize> {
    if max_order == 0 {
        return Err(Error::InvalidArgument("max_order must be >= 1".into()));
    }
    let top = sigma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::InvalidArgument("no singular value above the floor".into()));
    }
    let kept: Vec<f64> = sigma.iter().cloned().filter(|&v| v >= SIGMA_FLOOR * top).collect();
    let lo = kept.iter().cloned().fold(f64::INFINITY, f64::min);
    let target = 0.5 * (top.ln() + lo.ln());
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (k, v) in kept.iter().enumerate() {
        let dist = (v.ln() - target).abs();
        if dist < best_dist {
            best = k;
            best_dist = dist;
        }
    }
    Ok((best + 1).clamp(1, max_order))
}

/// Block-Toeplitz estimates `T_u` (`ps x ms`) and `T_y` (`ps x ps`, zero
/// block diagonal) assembled from a decision vector.
#[derive(Debug, Clone)]
pub struct ToeplitzEstimates {
    pub tu: DMatrix<f64>,
    pub ty: DMatrix<f64>,
    pub s: usize,
    pub p: usize,
    pub m: usize,
}

impl ToeplitzEstimates {
    pub fn from_decision(x: &DecisionVector) -> Self {
        let d = x.dims();
        let (s, p, m) = (d.s, d.p, d.m);
        let mut tu = DMatrix::zeros(p * s, m * s);
        let mut ty = DMatrix::zeros(p * s, p * s);
        for r in 0..s {
            for c in 0..=r {
                for i in 0..p {
                    for j in 0..m {
                        tu[(r * p + i, c * m + j)] = x.v(i, j)[r - c];
                    }
                    if r > c {
                        for j in 0..p {
                            ty[(r * p + i, c * p + j)] = x.w(i, j)[r - c - 1];
                        }
                    }
                }
            }
        }
        Self { tu, ty, s, p, m }
    }

    /// Block `d` of the first block column of `T_u` (`p x m`).
    pub fn tu_block(&self, d: usize) -> DMatrix<f64> {
        self.tu.view((d * self.p, 0), (self.p, self.m)).into_owned()
    }

    /// Block `d` of the first block column of `T_y` (`p x p`).
    pub fn ty_block(&self, d: usize) -> DMatrix<f64> {
        self.ty.view((d * self.p, 0), (self.p, self.p)).into_owned()
    }
}

/// Which model computation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Shift invariance for `(a_obs, C)`, `K` from `T_y`, `(b_obs, D, x0)`
    /// by prediction-error least squares.
    #[default]
    M1,
    /// Everything by regression on the estimated state sequence.
    M2,
    /// As M1 but `(b_obs, D)` from the Markov parameters in `T_u`.
    M3,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::M1 => "m1",
            Variant::M2 => "m2",
            Variant::M3 => "m3",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Variant::M1),
            "m2" => Ok(Variant::M2),
            "m3" => Ok(Variant::M3),
            other => Err(Error::InvalidArgument(format!("unknown variant '{other}'"))),
        }
    }
}

/// Result of one model computation.
#[derive(Debug, Clone)]
pub struct IdentifiedModel {
    pub model: StateSpaceModel,
    pub observer: ObserverModel,
    pub order: usize,
    pub lambda: f64,
    pub sigma: Vec<f64>,
    pub variant: Variant,
    /// Observer initial state on the identification data.
    pub x0_ide: DVector<f64>,
    /// Rank-deficiency notices from the least-squares steps.
    pub warnings: Vec<String>,
}

fn check_order(order: usize, s: usize, p: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidArgument("model order must be >= 1".into()));
    }
    if order > (s - 1) * p {
        return Err(Error::InvalidArgument(format!(
            "model order {order} exceeds (s - 1) p = {}",
            (s - 1) * p
        )));
    }
    Ok(())
}

/// `(a_obs, C)` from an estimate of the extended observability matrix
/// (`s p x n`): `C` is the first block row and `a_obs` solves
/// `U[0..(s-1)p] a_obs = U[p..sp]` in the least-squares sense.
pub fn estimate_ac(
    u_n: &DMatrix<f64>,
    s: usize,
    p: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<String>)> {
    if s < 2 || u_n.nrows() != s * p {
        return dim_err(format!("observability estimate has {} rows, expected s p = {}", u_n.nrows(), s * p));
    }
    check_order(u_n.ncols(), s, p)?;
    let c = u_n.rows(0, p).into_owned();
    let top = u_n.rows(0, (s - 1) * p).into_owned();
    let bottom = u_n.rows(p, (s - 1) * p).into_owned();
    let ls = lstsq(&top, &bottom)?;
    let mut warnings = Vec::new();
    if ls.is_deficient() {
        warnings.push(format!(
            "shift-invariance regressor has rank {} < {}; minimum-norm a_obs",
            ls.rank, ls.unknowns
        ));
    }
    Ok((ls.solution, c, warnings))
}

/// Observer gain minimizing `sum_j ||C a_obs^(j-1) K - T_y,j||_F^2` over
/// the `s - 1` subdiagonal blocks of `T_y`.
pub fn estimate_k(
    a_obs: &DMatrix<f64>,
    c: &DMatrix<f64>,
    est: &ToeplitzEstimates,
) -> Result<(DMatrix<f64>, Vec<String>)> {
    let p = c.nrows();
    if est.p != p || a_obs.nrows() != c.ncols() {
        return dim_err("estimate_k: dimensions of (a_obs, C) and T_y disagree");
    }
    let s = est.s;
    let obs = observability(a_obs, c, s - 1);
    let mut target = DMatrix::zeros((s - 1) * p, p);
    for j in 1..s {
        target.view_mut(((j - 1) * p, 0), (p, p)).copy_from(&est.ty_block(j));
    }
    let ls = lstsq(&obs, &target)?;
    let mut warnings = Vec::new();
    if ls.is_deficient() {
        warnings.push(format!("gain regressor has rank {} < {}; minimum-norm K", ls.rank, ls.unknowns));
    }
    Ok((ls.solution, warnings))
}

/// Linear map from `(x0, vec b_obs, vec D)` to the predicted outputs of the
/// observer `(a_obs, b_obs, C, D, K)`, plus the part driven by `K y`.
///
/// Row `k p + i` is output `i` at sample `k`. Columns: `n` for `x0`, then
/// `n m` for `b_obs` (column-major), then `p m` for `D` (column-major).
pub(crate) struct PredictionRegressor {
    pub phi: DMatrix<f64>,
    pub offset: DVector<f64>,
}

pub(crate) fn prediction_regressor(
    a_obs: &DMatrix<f64>,
    c: &DMatrix<f64>,
    k: &DMatrix<f64>,
    rec: &IoRecord,
    with_input_terms: bool,
) -> PredictionRegressor {
    let n = a_obs.nrows();
    let p = c.nrows();
    let m = rec.m();
    let len = rec.len();
    let n_in = if with_input_terms { n * m + p * m } else { 0 };
    let mut phi = DMatrix::zeros(len * p, n + n_in);
    let mut offset = DVector::zeros(len * p);

    // state responses: columns of x0, b_obs and the K y drive, simulated together
    let mut xi0 = DMatrix::<f64>::identity(n, n);
    let mut xib = if with_input_terms { DMatrix::zeros(n, n * m) } else { DMatrix::zeros(n, 0) };
    let mut psi = DVector::zeros(n);
    for t in 0..len {
        let rows = t * p;
        phi.view_mut((rows, 0), (p, n)).copy_from(&(c * &xi0));
        if with_input_terms {
            phi.view_mut((rows, n), (p, n * m)).copy_from(&(c * &xib));
            for j in 0..m {
                for i in 0..p {
                    phi[(rows + i, n + n * m + j * p + i)] = rec.u[(t, j)];
                }
            }
        }
        offset.rows_mut(rows, p).copy_from(&(c * &psi));

        xi0 = a_obs * &xi0;
        if with_input_terms {
            let mut next = a_obs * &xib;
            for j in 0..m {
                for r in 0..n {
                    next[(r, j * n + r)] += rec.u[(t, j)];
                }
            }
            xib = next;
        }
        psi = a_obs * &psi + k * rec.y.row(t).transpose();
    }
    PredictionRegressor { phi, offset }
}

fn stacked_outputs(y: &DMatrix<f64>) -> DVector<f64> {
    // row-major: sample k, output i -> k p + i
    DVector::from_iterator(y.len(), y.transpose().iter().cloned())
}

/// `(b_obs, D, x0)` minimizing the one-step prediction error of the observer
/// with `(a_obs, C, K)` fixed.
pub fn estimate_bdx0(
    a_obs: &DMatrix<f64>,
    c: &DMatrix<f64>,
    k: &DMatrix<f64>,
    rec: &IoRecord,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>, Vec<String>)> {
    let (n, p, m) = (a_obs.nrows(), c.nrows(), rec.m());
    if rec.p() != p || c.ncols() != n || k.shape() != (n, p) {
        return dim_err("estimate_bdx0: record and (a_obs, C, K) disagree");
    }
    let reg = prediction_regressor(a_obs, c, k, rec, true);
    let target = stacked_outputs(&rec.y) - &reg.offset;
    let ls = lstsq(&reg.phi, &DMatrix::from_column_slice(target.len(), 1, target.as_slice()))?;
    let mut warnings = Vec::new();
    if ls.is_deficient() {
        warnings.push(format!(
            "(b_obs, D, x0) regressor has rank {} < {}; minimum-norm solution",
            ls.rank, ls.unknowns
        ));
    }
    let theta = ls.solution.column(0);
    let x0 = theta.rows(0, n).into_owned();
    let b_obs = DMatrix::from_column_slice(n, m, theta.rows(n, n * m).as_slice());
    let d = DMatrix::from_column_slice(p, m, theta.rows(n + n * m, p * m).as_slice());
    Ok((b_obs, d, x0, warnings))
}

/// Observer initial state minimizing the prediction error with every
/// matrix fixed.
pub fn estimate_observer_x0(obs: &ObserverModel, rec: &IoRecord) -> Result<(DVector<f64>, Vec<String>)> {
    let reg = prediction_regressor(&obs.a_obs, &obs.c, &obs.k, rec, false);
    let zero = obs.predict(rec, &DVector::zeros(obs.n()))?;
    let target = stacked_outputs(&rec.y) - stacked_outputs(&zero);
    let ls = lstsq(&reg.phi, &DMatrix::from_column_slice(target.len(), 1, target.as_slice()))?;
    let mut warnings = Vec::new();
    if ls.is_deficient() {
        warnings.push(format!("x0 regressor has rank {} < {}", ls.rank, ls.unknowns));
    }
    Ok((ls.solution.column(0).into_owned(), warnings))
}

/// Initial state for the deterministic simulation minimizing the output
/// error with every matrix fixed.
pub fn estimate_simulation_x0(model: &StateSpaceModel, rec: &IoRecord) -> Result<DVector<f64>> {
    let n = model.n();
    let zero = model.simulate(&rec.u, &DVector::zeros(n))?;
    let obs = ObserverModel::new(
        model.a.clone(),
        model.b.clone(),
        model.c.clone(),
        model.d.clone(),
        DMatrix::zeros(n, model.p()),
    )?;
    let reg = prediction_regressor(&obs.a_obs, &obs.c, &obs.k, rec, false);
    let target = stacked_outputs(&rec.y) - stacked_outputs(&zero);
    let ls = lstsq(&reg.phi, &DMatrix::from_column_slice(target.len(), 1, target.as_slice()))?;
    Ok(ls.solution.column(0).into_owned())
}

fn assemble(
    a_obs: DMatrix<f64>,
    b_obs: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    k: DMatrix<f64>,
) -> Result<(ObserverModel, StateSpaceModel)> {
    let observer = ObserverModel::new(a_obs, b_obs, c, d, k)?;
    let model = observer.to_innovation()?;
    Ok((observer, model))
}

/// M1: shift invariance, gain from `T_y`, then `(b_obs, D, x0)` by
/// prediction-error least squares on `rec`.
pub fn compute_m1(
    svd: &SubspaceSvd,
    est: &ToeplitzEstimates,
    rec: &IoRecord,
    order: usize,
) -> Result<IdentifiedModel> {
    check_order(order, est.s, est.p)?;
    let (a_obs, c, mut warnings) = estimate_ac(&svd.u.columns(0, order).into_owned(), est.s, est.p)?;
    let (k, w) = estimate_k(&a_obs, &c, est)?;
    warnings.extend(w);
    let (b_obs, d, x0, w) = estimate_bdx0(&a_obs, &c, &k, rec)?;
    warnings.extend(w);
    let (observer, model) = assemble(a_obs, b_obs, c, d, k)?;
    Ok(IdentifiedModel {
        model,
        observer,
        order,
        lambda: f64::NAN,
        sigma: svd.sigma.iter().cloned().collect(),
        variant: Variant::M1,
        x0_ide: x0,
        warnings,
    })
}

/// M2: state sequence from the right singular vectors (optionally scaled by
/// `sqrt(sigma)`), then one regression per observer equation:
/// `x(k+1)` on `[x(k); u(k); y(k)]` and `y(k)` on `[x(k); u(k)]`.
pub fn compute_m2(svd: &SubspaceSvd, rec: &IoRecord, order: usize, scaled: bool) -> Result<IdentifiedModel> {
    let ncols = svd.vt.ncols();
    let p = rec.p();
    let m = rec.m();
    let s = svd.u.nrows() / p;
    check_order(order, s, p)?;
    if ncols < order + 1 {
        return Err(Error::InvalidArgument(format!(
            "too few state samples: {ncols} columns for order {order}"
        )));
    }
    if rec.len() < ncols {
        return dim_err("record is shorter than the state sequence");
    }
    let mut states = svd.vt.rows(0, order).into_owned();
    if scaled {
        for r in 0..order {
            states.row_mut(r).scale_mut(svd.sigma[r].max(0.0).sqrt());
        }
    }
    let mut warnings = Vec::new();

    // x(k+1) = a_obs x(k) + b_obs u(k) + K y(k)
    let samples = ncols - 1;
    let mut reg_x = DMatrix::zeros(samples, order + m + p);
    let mut tgt_x = DMatrix::zeros(samples, order);
    for t in 0..samples {
        for r in 0..order {
            reg_x[(t, r)] = states[(r, t)];
            tgt_x[(t, r)] = states[(r, t + 1)];
        }
        for j in 0..m {
            reg_x[(t, order + j)] = rec.u[(t, j)];
        }
        for j in 0..p {
            reg_x[(t, order + m + j)] = rec.y[(t, j)];
        }
    }
    let ls_x = lstsq(&reg_x, &tgt_x)?;
    if ls_x.is_deficient() {
        warnings.push(format!("state regression has rank {} < {}", ls_x.rank, ls_x.unknowns));
    }
    let theta_x = ls_x.solution.transpose();
    let a_obs = theta_x.columns(0, order).into_owned();
    let b_obs = theta_x.columns(order, m).into_owned();
    let k = theta_x.columns(order + m, p).into_owned();

    // y(k) = C x(k) + D u(k)
    let mut reg_y = DMatrix::zeros(ncols, order + m);
    let mut tgt_y = DMatrix::zeros(ncols, p);
    for t in 0..ncols {
        for r in 0..order {
            reg_y[(t, r)] = states[(r, t)];
        }
        for j in 0..m {
            reg_y[(t, order + j)] = rec.u[(t, j)];
        }
        for j in 0..p {
            tgt_y[(t, j)] = rec.y[(t, j)];
        }
    }
    let ls_y = lstsq(&reg_y, &tgt_y)?;
    if ls_y.is_deficient() {
        warnings.push(format!("output regression has rank {} < {}", ls_y.rank, ls_y.unknowns));
    }
    let theta_y = ls_y.solution.transpose();
    let c = theta_y.columns(0, order).into_owned();
    let d = theta_y.columns(order, m).into_owned();
    let x0 = states.column(0).into_owned();
    let (observer, model) = assemble(a_obs, b_obs, c, d, k)?;
    Ok(IdentifiedModel {
        model,
        observer,
        order,
        lambda: f64::NAN,
        sigma: svd.sigma.iter().cloned().collect(),
        variant: Variant::M2,
        x0_ide: x0,
        warnings,
    })
}

/// `(b_obs, D)` from the Markov parameters in `T_u`: `D` is the diagonal
/// block and `b_obs` fits `C a_obs^(j-1) b_obs` to the subdiagonal blocks.
pub fn estimate_bd_markov(
    a_obs: &DMatrix<f64>,
    c: &DMatrix<f64>,
    est: &ToeplitzEstimates,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<String>)> {
    let (p, m, s) = (est.p, est.m, est.s);
    let d = est.tu_block(0);
    let obs = observability(a_obs, c, s - 1);
    let mut target = DMatrix::zeros((s - 1) * p, m);
    for j in 1..s {
        target.view_mut(((j - 1) * p, 0), (p, m)).copy_from(&est.tu_block(j));
    }
    let ls = lstsq(&obs, &target)?;
    let mut warnings = Vec::new();
    if ls.is_deficient() && m > 0 {
        warnings.push(format!("Markov regressor has rank {} < {}", ls.rank, ls.unknowns));
    }
    Ok((ls.solution, d, warnings))
}

/// M3: as M1 for `(a_obs, C, K)`, `(b_obs, D)` from `T_u`, then `x0`.
pub fn compute_m3(
    svd: &SubspaceSvd,
    est: &ToeplitzEstimates,
    rec: &IoRecord,
    order: usize,
) -> Result<IdentifiedModel> {
    check_order(order, est.s, est.p)?;
    let (a_obs, c, mut warnings) = estimate_ac(&svd.u.columns(0, order).into_owned(), est.s, est.p)?;
    let (k, w) = estimate_k(&a_obs, &c, est)?;
    warnings.extend(w);
    let (b_obs, d, w) = estimate_bd_markov(&a_obs, &c, est)?;
    warnings.extend(w);
    let (observer, model) = assemble(a_obs, b_obs, c, d, k)?;
    let (x0, w) = estimate_observer_x0(&observer, rec)?;
    warnings.extend(w);
    Ok(IdentifiedModel {
        model,
        observer,
        order,
        lambda: f64::NAN,
        sigma: svd.sigma.iter().cloned().collect(),
        variant: Variant::M3,
        x0_ide: x0,
        warnings,
    })
}
