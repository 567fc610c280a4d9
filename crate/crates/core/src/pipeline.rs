//! End-to-end identification: preprocessing, the lambda sweep, per-point
//! model extraction and the choice of the regularization weight.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::admm::{logspace, sweep_with, AdmmParams, SolveResult, SweepFactorization};
use crate::error::{dim_err, Error, Result};
use crate::extraction::{
    compute_m1, compute_m2, compute_m3, estimate_observer_x0, estimate_simulation_x0,
    numerical_rank, select_order, IdentifiedModel, SubspaceSvd, ToeplitzEstimates, Variant,
    DEFAULT_MAX_ORDER,
};
use crate::model::{vaf, IoRecord};
use crate::structured::{apply_operator, OperatorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderChoice {
    Auto,
    Fixed(usize),
}

/// How the identification data is divided between solving and scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    /// Solve and score on the same record.
    None,
    /// Solve on the first `ceil(N/2)` samples, score on the rest.
    Half,
}

/// Initial state used when simulating a model against measured data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum X0Policy {
    Zero,
    LsEstimate,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub s: usize,
    /// Grid bounds on `lambda / N`, the weight of the summed squared output
    /// error; the solver receives `lambda = N * (lambda / N)` with `N` the
    /// length of the record the convex problem is built on.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub grid_len: usize,
    pub variant: Variant,
    pub order: OrderChoice,
    pub max_order: usize,
    pub split: Split,
    pub del: usize,
    pub detrend: bool,
    pub scale_outputs: bool,
    pub x0_policy: X0Policy,
    pub admm: AdmmParams,
    pub warm_start: bool,
    /// M2 only: scale the state sequence by `sqrt(sigma)`.
    pub m2_scaled: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            s: 15,
            lambda_min: 10f64.powf(-1.5),
            lambda_max: 1e3,
            grid_len: 20,
            variant: Variant::M1,
            order: OrderChoice::Auto,
            max_order: DEFAULT_MAX_ORDER,
            split: Split::None,
            del: 0,
            detrend: true,
            scale_outputs: false,
            x0_policy: X0Policy::LsEstimate,
            admm: AdmmParams::default(),
            warm_start: true,
            m2_scaled: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s < 2 {
            return Err(Error::InvalidArgument(format!("s must be >= 2, got {}", self.s)));
        }
        if self.grid_len == 0 {
            return Err(Error::InvalidArgument("grid must have at least one point".into()));
        }
        if !(self.lambda_min > 0.0) || !(self.lambda_max >= self.lambda_min) || !self.lambda_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need 0 < lambda_min <= lambda_max, got [{}, {}]",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.max_order == 0 {
            return Err(Error::InvalidArgument("max_order must be >= 1".into()));
        }
        if self.order == OrderChoice::Fixed(0) {
            return Err(Error::InvalidArgument("fixed order must be >= 1".into()));
        }
        self.admm.validate()
    }

    /// Grid of `lambda / N` values.
    pub fn grid(&self) -> Result<Vec<f64>> {
        logspace(self.lambda_min, self.lambda_max, self.grid_len)
    }

    /// Solver weights `lambda` for a record of `n_samples` samples.
    pub fn lambdas(&self, n_samples: usize) -> Result<Vec<f64>> {
        Ok(self.grid()?.into_iter().map(|g| g * n_samples as f64).collect())
    }
}

/// Outcome at one grid point. `j` is `None` when the point failed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub lambda: f64,
    /// Grid value `lambda / N` (set by [`identify`]).
    pub lambda_over_n: f64,
    pub j: Option<f64>,
    pub order: Option<usize>,
    /// Singular values of `A(x*)`.
    pub sigma: Vec<f64>,
    /// Rank of the thresholded iterate `Z*`.
    pub z_rank: Option<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub lambda: f64,
    pub reason: String,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub factorization: f64,
    pub sweep: f64,
    pub extraction: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub best: IdentifiedModel,
    pub lambda_opt: f64,
    pub j_opt: f64,
    pub points: Vec<GridPoint>,
    pub scoring: Scoring,
    pub failures: Vec<Failure>,
    /// Simulation VAF on a validation record, when one was evaluated.
    pub vaf_validation: Option<f64>,
    /// One-step observer prediction VAF of the best model on the scoring data.
    pub vaf_prediction: f64,
    pub n_ide1: usize,
    pub n_ide2: usize,
    pub timings: Timings,
}

impl PipelineReport {
    pub fn j_curve(&self) -> Vec<(f64, Option<f64>)> {
        self.points.iter().map(|p| (p.lambda, p.j)).collect()
    }

    pub fn sigma_per_lambda(&self) -> Vec<(f64, &[f64])> {
        self.points.iter().map(|p| (p.lambda, p.sigma.as_slice())).collect()
    }
}

/// Drops `del` leading samples and removes channel means; optionally scales
/// each output to unit max-abs.
pub fn preprocess(rec: &IoRecord, cfg: &PipelineConfig) -> Result<IoRecord> {
    Ok(preprocess_with_scales(rec, cfg, None)?.0)
}

/// As [`preprocess`], returning the output scale factors applied. Passing
/// `scales` reuses factors computed on another record (e.g. identification
/// scales applied to validation data).
pub fn preprocess_with_scales(
    rec: &IoRecord,
    cfg: &PipelineConfig,
    scales: Option<&[f64]>,
) -> Result<(IoRecord, Vec<f64>)> {
    if rec.len() <= cfg.del + cfg.s {
        return Err(Error::InvalidArgument(format!(
            "{} samples leave too few after discarding {} (s = {})",
            rec.len(),
            cfg.del,
            cfg.s
        )));
    }
    let kept = rec.len() - cfg.del;
    let mut out = rec.slice(cfg.del, kept)?;
    if cfg.detrend {
        remove_mean(&mut out.u);
        remove_mean(&mut out.y);
    }
    let p = out.p();
    let factors: Vec<f64> = match scales {
        Some(f) => {
            if f.len() != p {
                return dim_err(format!("{} scale factors for {} outputs", f.len(), p));
            }
            f.to_vec()
        }
        None if cfg.scale_outputs => (0..p)
            .map(|j| {
                let peak = out.y.column(j).amax();
                if peak > 0.0 {
                    1.0 / peak
                } else {
                    1.0
                }
            })
            .collect(),
        None => vec![1.0; p],
    };
    for (j, f) in factors.iter().enumerate() {
        out.y.column_mut(j).scale_mut(*f);
    }
    Ok((out, factors))
}

fn remove_mean(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}

/// Splits the record into the solving part and the scoring part.
pub fn split_record(rec: &IoRecord, split: Split) -> Result<(IoRecord, IoRecord)> {
    match split {
        Split::None => Ok((rec.clone(), rec.clone())),
        Split::Half => {
            let first = rec.len().div_ceil(2);
            Ok((rec.slice(0, first)?, rec.slice(first, rec.len() - first)?))
        }
    }
}

fn x0_for(model: &IdentifiedModel, rec: &IoRecord, policy: X0Policy) -> Result<DVector<f64>> {
    match policy {
        X0Policy::Zero => Ok(DVector::zeros(model.order)),
        X0Policy::LsEstimate => estimate_simulation_x0(&model.model, rec),
    }
}

/// How a grid point is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scoring {
    /// Deterministic simulation from the inputs (no `K`).
    Simulation,
    /// One-step observer prediction; used when there is no input to
    /// simulate from, since the free response alone cannot rank models.
    Prediction,
}

impl Scoring {
    pub fn for_record(rec: &IoRecord) -> Self {
        if rec.u.iter().all(|v| *v == 0.0) {
            Scoring::Prediction
        } else {
            Scoring::Simulation
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Scoring::Simulation => "simulation",
            Scoring::Prediction => "prediction",
        }
    }
}

/// `J`: sum of squared output errors over `rec`.
fn cost(model: &IdentifiedModel, rec: &IoRecord, policy: X0Policy, scoring: Scoring) -> Result<f64> {
    let yhat = match scoring {
        Scoring::Simulation => model.model.simulate(&rec.u, &x0_for(model, rec, policy)?)?,
        Scoring::Prediction => predicted_output(model, rec, policy)?,
    };
    let j: f64 = (&rec.y - yhat).iter().map(|e| e * e).sum();
    if !j.is_finite() {
        return Err(Error::NonFinite("output error cost".into()));
    }
    Ok(j)
}

/// Validation VAF. Models with inputs are simulated (no `K`); output-only
/// models have nothing to simulate from, so the observer is driven by the
/// measured outputs instead.
pub fn evaluate(model: &IdentifiedModel, val: &IoRecord, policy: X0Policy) -> Result<f64> {
    vaf(&val.y, &validation_output(model, val, policy)?)
}

/// The output `evaluate` compares against `val.y`.
pub fn validation_output(model: &IdentifiedModel, val: &IoRecord, policy: X0Policy) -> Result<DMatrix<f64>> {
    if val.m() != model.model.m() || val.p() != model.model.p() {
        return dim_err(format!(
            "model has {} inputs / {} outputs, data has {} / {}",
            model.model.m(),
            model.model.p(),
            val.m(),
            val.p()
        ));
    }
    if model.model.m() == 0 {
        return predicted_output(model, val, policy);
    }
    model.model.simulate(&val.u, &x0_for(model, val, policy)?)
}

fn predicted_output(model: &IdentifiedModel, val: &IoRecord, policy: X0Policy) -> Result<DMatrix<f64>> {
    let x0 = match policy {
        X0Policy::Zero => DVector::zeros(model.order),
        X0Policy::LsEstimate => estimate_observer_x0(&model.observer, val)?.0,
    };
    model.observer.predict(val, &x0)
}

/// One-step-ahead observer prediction VAF.
pub fn prediction_vaf(model: &IdentifiedModel, val: &IoRecord, policy: X0Policy) -> Result<f64> {
    vaf(&val.y, &predicted_output(model, val, policy)?)
}

struct PointOutcome {
    point: GridPoint,
    model: Option<IdentifiedModel>,
}

fn extract_point(
    res: &SolveResult,
    spec: &OperatorSpec,
    ide1: &IoRecord,
    ide2: &IoRecord,
    cfg: &PipelineConfig,
    scoring: Scoring,
) -> Result<(IdentifiedModel, GridPoint)> {
    let low_rank = apply_operator(&res.x, spec)?;
    let svd = SubspaceSvd::new(&low_rank)?;
    let sigma: Vec<f64> = svd.sigma.iter().cloned().collect();
    let z_rank = numerical_rank(SubspaceSvd::new(&res.z)?.sigma.as_slice());
    let cap = (cfg.s - 1) * ide1.p();
    let order = match cfg.order {
        OrderChoice::Fixed(k) => k,
        OrderChoice::Auto => select_order(&sigma, cfg.max_order.min(z_rank.max(1)).min(cap))?,
    };
    let est = ToeplitzEstimates::from_decision(&res.x);
    let mut model = match cfg.variant {
        Variant::M1 => compute_m1(&svd, &est, ide1, order)?,
        Variant::M2 => compute_m2(&svd, ide1, order, cfg.m2_scaled)?,
        Variant::M3 => compute_m3(&svd, &est, ide1, order)?,
    };
    model.lambda = res.lambda;
    let j = cost(&model, ide2, cfg.x0_policy, scoring)?;
    let point = GridPoint {
        lambda: res.lambda,
        lambda_over_n: f64::NAN,
        j: Some(j),
        order: Some(order),
        sigma,
        z_rank: Some(z_rank),
        iterations: res.iterations,
        converged: res.converged,
        objective: res.objective,
        error: None,
    };
    Ok((model, point))
}

fn failed_point(lambda: f64, err: &Error) -> GridPoint {
    GridPoint {
        lambda,
        lambda_over_n: f64::NAN,
        j: None,
        order: None,
        sigma: Vec::new(),
        z_rank: None,
        iterations: 0,
        converged: false,
        objective: f64::NAN,
        error: Some(err.to_string()),
    }
}

/// Runs the full loop on `rec`: preprocessing, split, one convex solve per
/// grid point, order selection, model computation and scoring (see
/// [`Scoring`]). The point with the smallest finite cost wins (first on ties).
pub fn identify(rec: &IoRecord, cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let start = Instant::now();
    let data = preprocess(rec, cfg)?;
    let (ide1, ide2) = split_record(&data, cfg.split)?;
    if ide2.is_empty() {
        return Err(Error::InvalidArgument("scoring record is empty".into()));
    }
    let scoring = Scoring::for_record(&data);
    let spec = OperatorSpec::new(&ide1.u, &ide1.y, cfg.s)?;
    let scaled = cfg.grid()?;
    let grid = cfg.lambdas(ide1.len())?;

    let t0 = Instant::now();
    let fact = SweepFactorization::new(&spec)?;
    let factorization = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let solves = sweep_with(&spec, &fact, &ide1.y, &grid, &cfg.admm, cfg.warm_start)?;
    let sweep_time = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let mut outcomes: Vec<PointOutcome> = solves
        .par_iter()
        .zip(grid.par_iter())
        .map(|(res, &lambda)| {
            let res = match res {
                Ok(r) => r,
                Err(e) => return PointOutcome { point: failed_point(lambda, e), model: None },
            };
            match extract_point(res, &spec, &ide1, &ide2, cfg, scoring) {
                Ok((model, point)) => PointOutcome { point, model: Some(model) },
                Err(e) => {
                    let mut point = failed_point(lambda, &e);
                    point.iterations = res.iterations;
                    point.converged = res.converged;
                    point.objective = res.objective;
                    PointOutcome { point, model: None }
                }
            }
        })
        .collect();
    let extraction = t2.elapsed().as_secs_f64();
    for (o, &g) in outcomes.iter_mut().zip(&scaled) {
        o.point.lambda_over_n = g;
    }

    let mut best: Option<(usize, f64)> = None;
    for (k, o) in outcomes.iter().enumerate() {
        if let Some(j) = o.point.j {
            if best.map_or(true, |(_, bj)| j < bj) {
                best = Some((k, j));
            }
        }
    }
    let failures: Vec<Failure> = outcomes
        .iter()
        .filter_map(|o| {
            o.point.error.as_ref().map(|r| Failure { lambda: o.point.lambda, reason: r.clone() })
        })
        .collect();
    let (k_opt, j_opt) = best.ok_or_else(|| Error::AllGridPointsFailed {
        count: grid.len(),
        first: failures.first().map_or_else(String::new, |f| f.reason.clone()),
    })?;
    let mut points = Vec::with_capacity(outcomes.len());
    let mut best_model = None;
    for (k, o) in outcomes.into_iter().enumerate() {
        if k == k_opt {
            best_model = o.model;
        }
        points.push(o.point);
    }
    let best = best_model.expect("winning point carries a model");
    let vaf_prediction = prediction_vaf(&best, &ide2, cfg.x0_policy)?;
    Ok(PipelineReport {
        lambda_opt: best.lambda,
        j_opt,
        best,
        points,
        scoring,
        failures,
        vaf_validation: None,
        vaf_prediction,
        n_ide1: ide1.len(),
        n_ide2: ide2.len(),
        timings: Timings {
            factorization,
            sweep: sweep_time,
            extraction,
            total: start.elapsed().as_secs_f64(),
        },
    })
}

/// Identification from outputs alone: the input Toeplitz term is absent
/// and the model has no `B`, `D`.
pub fn identify_output_only(y: &DMatrix<f64>, cfg: &PipelineConfig) -> Result<PipelineReport> {
    identify(&IoRecord::output_only(y.clone())?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use nalgebra::dmatrix;

    fn quick_cfg(s: usize) -> PipelineConfig {
        PipelineConfig { s, grid_len: 6, detrend: false, ..PipelineConfig::default() }
    }

    fn siso2_record(n: usize, seed: u64) -> IoRecord {
        let model = synth::example_model("siso2").unwrap();
        let u = synth::prbs(n, 1, 0.3, seed);
        synth::generate(&model, &u, &DVector::zeros(2), 0.0, 0).unwrap()
    }

    #[test]
    fn preprocess_identity_and_mean_removal() {
        let rec = IoRecord::new(dmatrix![1.0; 2.0; 3.0; 4.0], dmatrix![5.0; 5.0; 5.0; 5.0]).unwrap();
        let cfg = PipelineConfig { s: 2, detrend: false, ..PipelineConfig::default() };
        assert_eq!(preprocess(&rec, &cfg).unwrap(), rec);
        let cfg = PipelineConfig { s: 2, ..PipelineConfig::default() };
        let out = preprocess(&rec, &cfg).unwrap();
        assert!(out.y.iter().all(|v| *v == 0.0));
        assert_eq!(out.u, dmatrix![-1.5; -0.5; 0.5; 1.5]);
    }

    #[test]
    fn preprocess_scaling_and_deletion() {
        let rec = IoRecord::new(DMatrix::zeros(5, 1), dmatrix![0.0; 4.0; -2.0; 1.0; 3.0]).unwrap();
        let cfg = PipelineConfig { s: 2, detrend: false, scale_outputs: true, ..PipelineConfig::default() };
        let (out, f) = preprocess_with_scales(&rec, &cfg, None).unwrap();
        assert_eq!(out.y.amax(), 1.0);
        assert_eq!(f, vec![0.25]);
        let cfg = PipelineConfig { s: 2, del: 2, detrend: false, ..PipelineConfig::default() };
        assert_eq!(preprocess(&rec, &cfg).unwrap().y, dmatrix![-2.0; 1.0; 3.0]);
        let cfg = PipelineConfig { s: 2, del: 3, ..PipelineConfig::default() };
        assert!(preprocess(&rec, &cfg).is_err());
    }

    #[test]
    fn split_half_lengths() {
        for n in [20, 21] {
            let rec = siso2_record(n, 1);
            let (a, b) = split_record(&rec, Split::Half).unwrap();
            assert_eq!(a.len() + b.len(), n);
            assert!(a.len() - b.len() <= 1);
            assert_eq!(a.y.row(a.len() - 1), rec.y.row(a.len() - 1));
            let (a, b) = split_record(&rec, Split::None).unwrap();
            assert_eq!(a, rec);
            assert_eq!(b, rec);
        }
    }

    #[test]
    fn default_grid_endpoints() {
        let g = PipelineConfig::default().grid().unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 10f64.powf(-1.5));
        assert_eq!(g[19], 1e3);
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig { s: 1, ..PipelineConfig::default() }.validate().is_err());
        assert!(PipelineConfig { grid_len: 0, ..PipelineConfig::default() }.validate().is_err());
        assert!(PipelineConfig { lambda_min: 2.0, lambda_max: 1.0, ..PipelineConfig::default() }
            .validate()
            .is_err());
        assert!(PipelineConfig { order: OrderChoice::Fixed(0), ..PipelineConfig::default() }
            .validate()
            .is_err());
    }

    #[test]
    fn noise_free_recovery() {
        let rec = siso2_record(120, 7);
        let report = identify(&rec, &PipelineConfig { s: 10, detrend: false, ..PipelineConfig::default() }).unwrap();
        assert_eq!(report.best.order, 2);
        let j_min = report.points.iter().filter_map(|p| p.j).fold(f64::INFINITY, f64::min);
        assert_eq!(report.j_opt, j_min);
        let val = siso2_record(200, 99);
        let v = evaluate(&report.best, &val, X0Policy::LsEstimate).unwrap();
        assert!(v >= 99.9, "vaf {v}");
    }

    #[test]
    fn single_point_grid_and_fixed_order() {
        let rec = siso2_record(60, 3);
        let cfg = PipelineConfig { grid_len: 1, order: OrderChoice::Fixed(3), ..quick_cfg(6) };
        let report = identify(&rec, &cfg).unwrap();
        assert_eq!(report.points.len(), 1);
        assert_eq!(report.lambda_opt, cfg.lambda_min * 60.0);
        assert_eq!(report.points[0].lambda_over_n, cfg.lambda_min);
        assert_eq!(report.best.order, 3);
    }

    #[test]
    fn deterministic_reports() {
        let rec = siso2_record(50, 5);
        let cfg = quick_cfg(5);
        let a = identify(&rec, &cfg).unwrap();
        let b = identify(&rec, &cfg).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.best.model, b.best.model);
        assert_eq!(a.lambda_opt.to_bits(), b.lambda_opt.to_bits());
    }

    #[test]
    fn evaluate_policies() {
        let rec = siso2_record(80, 11);
        let report = identify(&rec, &quick_cfg(8)).unwrap();
        let model = &report.best;
        // data generated by the identified model itself
        let u = synth::prbs(100, 1, 0.3, 2);
        let y = model.model.simulate(&u, &DVector::zeros(model.order)).unwrap();
        let own = IoRecord::new(u, y).unwrap();
        assert!((evaluate(model, &own, X0Policy::Zero).unwrap() - 100.0).abs() < 1e-6);
        let val = siso2_record(100, 12);
        let zero = evaluate(model, &val, X0Policy::Zero).unwrap();
        let ls = evaluate(model, &val, X0Policy::LsEstimate).unwrap();
        assert!(ls >= zero - 1e-9);
        let bad = IoRecord::new(DMatrix::zeros(10, 2), DMatrix::zeros(10, 1)).unwrap();
        assert!(evaluate(model, &bad, X0Policy::Zero).is_err());
    }

    #[test]
    fn evaluate_matches_vaf() {
        let rec = siso2_record(60, 4);
        let report = identify(&rec, &quick_cfg(6)).unwrap();
        let model = &report.best;
        let x0 = estimate_simulation_x0(&model.model, &rec).unwrap();
        let yhat = model.model.simulate(&rec.u, &x0).unwrap();
        assert_eq!(evaluate(model, &rec, X0Policy::LsEstimate).unwrap(), vaf(&rec.y, &yhat).unwrap());
    }

    #[test]
    fn output_only_matches_zero_input() {
        let model = synth::example_model("siso1-ar").unwrap();
        let e = synth::white_noise(150, 1, 1.0, 21).unwrap();
        let rec = synth::generate_with_innovation(&model, &DMatrix::zeros(150, 0), &e, &DVector::zeros(1)).unwrap();
        let cfg = quick_cfg(6);
        let a = identify_output_only(&rec.y, &cfg).unwrap();
        let zero_in = IoRecord::new(DMatrix::zeros(150, 1), rec.y.clone()).unwrap();
        let b = identify(&zero_in, &cfg).unwrap();
        assert_eq!(a.best.model.m(), 0);
        for (pa, pb) in a.points.iter().zip(&b.points) {
            let (ja, jb) = (pa.j.unwrap(), pb.j.unwrap());
            assert!((ja - jb).abs() <= 1e-6 * ja.abs().max(jb.abs()), "{ja} vs {jb}");
        }
    }

    #[test]
    fn output_only_ar1_order() {
        let model = synth::example_model("siso1-ar").unwrap();
        let e = synth::white_noise(600, 1, 1.0, 8).unwrap();
        let rec = synth::generate_with_innovation(&model, &DMatrix::zeros(600, 0), &e, &DVector::zeros(1)).unwrap();
        let report = identify_output_only(&rec.y, &quick_cfg(8)).unwrap();
        assert_eq!(report.scoring, Scoring::Prediction);
        // the log-mean rule overshoots by one on a single dominant value
        assert!(report.best.order <= 2, "order {}", report.best.order);
        // the true predictor leaves exactly the innovations
        let floor: f64 = e.iter().map(|v| v * v).sum();
        assert!(report.j_opt <= 1.1 * floor, "J {} vs {floor}", report.j_opt);
    }
}
