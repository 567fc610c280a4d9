//! JSON report: config echo plus one entry per identification run.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::IdentifiedModel;
use crate::model::{ObserverModel, StateSpaceModel};
use crate::pipeline::{PipelineReport, Timings};

/// Row-major matrix with explicit dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.row_iter().map(|r| r.iter().cloned().collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows || self.data.iter().any(|r| r.len() != self.cols) {
            return Err(Error::Format {
                path: "report".into(),
                msg: format!("matrix data does not match its {}x{} shape", self.rows, self.cols),
            });
        }
        let flat: Vec<f64> = self.data.iter().flatten().cloned().collect();
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &flat))
    }
}

/// Innovation-form model `(A, B, C, D, K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub a: MatrixJson,
    pub b: MatrixJson,
    pub c: MatrixJson,
    pub d: MatrixJson,
    pub k: MatrixJson,
}

impl ModelJson {
    pub fn from_model(model: &StateSpaceModel) -> Self {
        Self {
            n: model.n(),
            m: model.m(),
            p: model.p(),
            a: MatrixJson::from_matrix(&model.a),
            b: MatrixJson::from_matrix(&model.b),
            c: MatrixJson::from_matrix(&model.c),
            d: MatrixJson::from_matrix(&model.d),
            k: MatrixJson::from_matrix(&model.k),
        }
    }

    pub fn to_model(&self) -> Result<StateSpaceModel> {
        let model = StateSpaceModel::new(
            self.a.to_matrix()?,
            self.b.to_matrix()?,
            self.c.to_matrix()?,
            self.d.to_matrix()?,
            self.k.to_matrix()?,
        )?;
        if (model.n(), model.m(), model.p()) != (self.n, self.m, self.p) {
            return Err(Error::Format { path: "report".into(), msg: "model dimensions disagree with n, m, p".into() });
        }
        Ok(model)
    }

    /// Rebuilds an [`IdentifiedModel`] for evaluation.
    pub fn to_identified(&self) -> Result<IdentifiedModel> {
        let model = self.to_model()?;
        let observer: ObserverModel = model.to_observer()?;
        Ok(IdentifiedModel {
            order: model.n(),
            x0_ide: nalgebra::DVector::zeros(model.n()),
            model,
            observer,
            lambda: f64::NAN,
            sigma: Vec::new(),
            variant: Default::default(),
            warnings: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolJson {
    pub name: String,
    pub version: String,
}

impl Default for ToolJson {
    fn default() -> Self {
        Self { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigJson {
    pub data: String,
    pub inputs: usize,
    pub outputs: usize,
    pub s: usize,
    /// Grid bounds on `lambda / N_ide`.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub grid: usize,
    pub variant: String,
    pub order: String,
    pub max_order: usize,
    pub split: String,
    pub del: usize,
    pub detrend: bool,
    pub scale_outputs: bool,
    pub x0: String,
    pub output_only: bool,
    pub n_ide: Vec<usize>,
    pub n_val: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureJson {
    pub lambda: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingsJson {
    pub factorization_s: f64,
    pub sweep_s: f64,
    pub extraction_s: f64,
    pub total_s: f64,
}

impl From<Timings> for TimingsJson {
    fn from(t: Timings) -> Self {
        Self { factorization_s: t.factorization, sweep_s: t.sweep, extraction_s: t.extraction, total_s: t.total }
    }
}

/// Per-lambda diagnostics; arrays are aligned with `lambda`. Failed points
/// have `null` cost and order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridJson {
    pub lambda: Vec<f64>,
    pub lambda_over_n: Vec<f64>,
    pub j: Vec<Option<f64>>,
    pub order: Vec<Option<usize>>,
    pub z_rank: Vec<Option<usize>>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub sigma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunJson {
    pub n_ide: usize,
    pub n_val: Option<usize>,
    pub order: usize,
    pub lambda_opt: f64,
    pub j_opt: f64,
    pub variant: String,
    pub scoring: String,
    pub model: ModelJson,
    /// Observer initial state on the identification data.
    pub x0_ide: Vec<f64>,
    /// Output scale factors applied after detrending (all 1 without scaling).
    pub output_scales: Vec<f64>,
    pub vaf_validation: Option<f64>,
    pub vaf_validation_per_output: Option<Vec<f64>>,
    pub vaf_prediction: f64,
    pub grid: GridJson,
    pub failures: Vec<FailureJson>,
    pub warnings: Vec<String>,
    pub timings: TimingsJson,
}

impl RunJson {
    pub fn new(report: &PipelineReport, n_ide: usize, output_scales: Vec<f64>) -> Self {
        let best = &report.best;
        Self {
            n_ide,
            n_val: None,
            order: best.order,
            lambda_opt: report.lambda_opt,
            j_opt: report.j_opt,
            variant: best.variant.as_str().into(),
            scoring: report.scoring.as_str().into(),
            model: ModelJson::from_model(&best.model),
            x0_ide: best.x0_ide.iter().cloned().collect(),
            output_scales,
            vaf_validation: report.vaf_validation,
            vaf_validation_per_output: None,
            vaf_prediction: report.vaf_prediction,
            grid: GridJson {
                lambda: report.points.iter().map(|p| p.lambda).collect(),
                lambda_over_n: report.points.iter().map(|p| p.lambda_over_n).collect(),
                j: report.points.iter().map(|p| p.j).collect(),
                order: report.points.iter().map(|p| p.order).collect(),
                z_rank: report.points.iter().map(|p| p.z_rank).collect(),
                iterations: report.points.iter().map(|p| p.iterations).collect(),
                converged: report.points.iter().map(|p| p.converged).collect(),
                sigma: report.points.iter().map(|p| p.sigma.clone()).collect(),
            },
            failures: report
                .failures
                .iter()
                .map(|f| FailureJson { lambda: f.lambda, reason: f.reason.clone() })
                .collect(),
            warnings: best.warnings.clone(),
            timings: report.timings.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub tool: ToolJson,
    pub config: ConfigJson,
    pub runs: Vec<RunJson>,
}

impl ReportJson {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }
}
