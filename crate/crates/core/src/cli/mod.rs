//! Command-line front end: `identify`, `simulate` and `validate`.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or file error.

pub mod data;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::extraction::Variant;
use crate::model::{vaf, IoRecord};
use crate::pipeline::{
    identify, preprocess_with_scales, validation_output, OrderChoice, PipelineConfig, Split, X0Policy,
};
use crate::synth;
use data::{fmt_f64, read_record, record_to_csv, write_atomic};
use report::{ConfigJson, ModelJson, ReportJson, RunJson, ToolJson};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "N2SID_THREADS";

#[derive(Debug, Parser)]
#[command(name = "n2sid", version, about = "Nuclear norm subspace identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Identify a state-space model from a CSV data file.
    Identify(IdentifyArgs),
    /// Generate a CSV data file from a model.
    Simulate(SimulateArgs),
    /// Score a reported model on a CSV data file.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    M1,
    M2,
    M3,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    None,
    Half,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum X0Arg {
    Zero,
    Ls,
}

impl From<X0Arg> for X0Policy {
    fn from(v: X0Arg) -> Self {
        match v {
            X0Arg::Zero => X0Policy::Zero,
            X0Arg::Ls => X0Policy::LsEstimate,
        }
    }
}

fn parse_order(s: &str) -> std::result::Result<OrderChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(OrderChoice::Auto);
    }
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(OrderChoice::Fixed(k)),
        _ => Err(format!("expected 'auto' or a positive integer, got '{s}'")),
    }
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    /// CSV file with header u1..um,y1..yp.
    #[arg(long)]
    data: PathBuf,
    /// Number of input columns (checked against the header).
    #[arg(long)]
    inputs: Option<usize>,
    /// Number of output columns (checked against the header).
    #[arg(long)]
    outputs: Option<usize>,
    /// Block rows of the Hankel matrices.
    #[arg(long, default_value_t = 15)]
    s: usize,
    /// Smallest lambda / N_ide on the grid (default 10^-1.5).
    #[arg(long)]
    lambda_min: Option<f64>,
    /// Largest lambda / N_ide on the grid (default 1e3).
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Number of logarithmically spaced lambda values.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_enum, default_value = "m1")]
    variant: VariantArg,
    /// `auto` or a fixed order.
    #[arg(long, default_value = "auto", value_parser = parse_order)]
    order: OrderChoice,
    #[arg(long, default_value_t = crate::extraction::DEFAULT_MAX_ORDER)]
    max_order: usize,
    #[arg(long, value_enum, default_value = "none")]
    split: SplitArg,
    /// Leading samples to discard.
    #[arg(long, default_value_t = 0)]
    del: usize,
    /// Remove channel means.
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    detrend: bool,
    /// Scale each detrended output to unit max-abs.
    #[arg(long, default_value_t = false, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    scale_outputs: bool,
    /// Identification length (samples after `del`).
    #[arg(long, conflicts_with = "n_ide_list")]
    n_ide: Option<usize>,
    /// Comma-separated identification lengths, one run each.
    #[arg(long, value_delimiter = ',')]
    n_ide_list: Option<Vec<usize>>,
    /// Validation length; the validation block follows the longest
    /// identification block.
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long, value_enum, default_value = "ls")]
    x0: X0Arg,
    /// Scale the M2 state sequence by the square roots of the singular values.
    #[arg(long)]
    m2_scaled: bool,
    /// Ignore input columns and identify from the outputs alone.
    #[arg(long)]
    output_only: bool,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-lambda singular values as CSV.
    #[arg(long)]
    sv_csv: Option<PathBuf>,
    /// (N_ide, VAF) pairs as CSV; needs validation data.
    #[arg(long)]
    vaf_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Model JSON: a report (last run is used) or a bare model object.
    #[arg(long, conflicts_with = "example", required_unless_present = "example")]
    model: Option<PathBuf>,
    /// Built-in model: siso2, siso1-ar or mimo3.
    #[arg(long)]
    example: Option<String>,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the innovation e(k).
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    /// Switching probability of the PRBS input.
    #[arg(long, default_value_t = 0.3)]
    switch_prob: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Run index in the report (default: last).
    #[arg(long)]
    run: Option<usize>,
    /// Initial state policy (default: as in the report).
    #[arg(long, value_enum)]
    x0: Option<X0Arg>,
    #[arg(long, default_value_t = 0)]
    del: usize,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Format { .. } | Error::Dimension(_) | Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // fails only if a pool already exists, which is fine
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Identify(a) => cmd_identify(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Validate(a) => cmd_validate(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Identification blocks (one per length) and the optional validation
/// block, all taken after discarding `del` samples.
pub fn protocol_slices(
    rec: &IoRecord,
    del: usize,
    n_ide: &[usize],
    n_val: Option<usize>,
) -> Result<(Vec<IoRecord>, Option<IoRecord>)> {
    let total = rec.len();
    if del >= total {
        return Err(usage(format!("del = {del} discards all {total} samples")));
    }
    let avail = total - del;
    let lengths: Vec<usize> = if n_ide.is_empty() {
        vec![avail - n_val.unwrap_or(0).min(avail)]
    } else {
        n_ide.to_vec()
    };
    let longest = lengths.iter().cloned().max().unwrap_or(0);
    if lengths.iter().any(|&n| n == 0) {
        return Err(usage("identification length must be positive"));
    }
    if longest + n_val.unwrap_or(0) > avail {
        return Err(usage(format!(
            "need {} samples after del = {del}, file has {avail}",
            longest + n_val.unwrap_or(0)
        )));
    }
    let ide = lengths.iter().map(|&n| rec.slice(del, n)).collect::<Result<Vec<_>>>()?;
    let val = match n_val {
        Some(0) => return Err(usage("validation length must be positive")),
        Some(n) => Some(rec.slice(del + longest, n)?),
        None => None,
    };
    Ok((ide, val))
}

fn variant_of(v: VariantArg) -> Variant {
    match v {
        VariantArg::M1 => Variant::M1,
        VariantArg::M2 => Variant::M2,
        VariantArg::M3 => Variant::M3,
    }
}

fn pipeline_config(a: &IdentifyArgs) -> PipelineConfig {
    let base = PipelineConfig::default();
    PipelineConfig {
        s: a.s,
        lambda_min: a.lambda_min.unwrap_or(base.lambda_min),
        lambda_max: a.lambda_max.unwrap_or(base.lambda_max),
        grid_len: a.grid.unwrap_or(base.grid_len),
        variant: variant_of(a.variant),
        order: a.order,
        max_order: a.max_order,
        split: match a.split {
            SplitArg::None => Split::None,
            SplitArg::Half => Split::Half,
        },
        // slicing applies del before the pipeline sees the data
        del: 0,
        detrend: a.detrend,
        scale_outputs: a.scale_outputs,
        x0_policy: a.x0.into(),
        m2_scaled: a.m2_scaled,
        ..base
    }
}

fn order_label(o: OrderChoice) -> String {
    match o {
        OrderChoice::Auto => "auto".into(),
        OrderChoice::Fixed(k) => k.to_string(),
    }
}

fn per_output_vaf(y: &nalgebra::DMatrix<f64>, yhat: &nalgebra::DMatrix<f64>) -> Result<Vec<f64>> {
    (0..y.ncols())
        .map(|j| vaf(&y.columns(j, 1).into_owned(), &yhat.columns(j, 1).into_owned()))
        .collect()
}

fn cmd_identify(a: &IdentifyArgs) -> Result<()> {
    let cfg = pipeline_config(a);
    cfg.validate()?;
    let mut rec = read_record(&a.data, a.inputs, a.outputs)?;
    if a.output_only {
        rec = IoRecord::output_only(rec.y)?;
    }
    let n_ide = a.n_ide_list.clone().or(a.n_ide.map(|n| vec![n])).unwrap_or_default();
    if a.vaf_csv.is_some() && a.n_val.is_none() {
        return Err(usage("--vaf-csv needs validation data (--n-val)"));
    }
    let (ide_sets, val) = protocol_slices(&rec, a.del, &n_ide, a.n_val)?;

    let mut runs = Vec::with_capacity(ide_sets.len());
    for ide in &ide_sets {
        let report = identify(ide, &cfg)?;
        let (_, scales) = preprocess_with_scales(ide, &cfg, None)?;
        let mut run = RunJson::new(&report, ide.len(), scales.clone());
        if let Some(val_raw) = &val {
            let (val_pre, _) = preprocess_with_scales(val_raw, &cfg, Some(&scales))?;
            let yhat = validation_output(&report.best, &val_pre, cfg.x0_policy)?;
            run.n_val = Some(val_pre.len());
            run.vaf_validation = Some(vaf(&val_pre.y, &yhat)?);
            run.vaf_validation_per_output = Some(per_output_vaf(&val_pre.y, &yhat)?);
        }
        println!(
            "n_ide={} order={} lambda_opt={:.6e} J={:.6e} vaf_val={}",
            run.n_ide,
            run.order,
            run.lambda_opt,
            run.j_opt,
            run.vaf_validation.map_or("-".into(), |v| format!("{v:.4}"))
        );
        runs.push(run);
    }

    let report = ReportJson {
        tool: ToolJson::default(),
        config: ConfigJson {
            data: a.data.display().to_string(),
            inputs: rec.m(),
            outputs: rec.p(),
            s: cfg.s,
            lambda_min: cfg.lambda_min,
            lambda_max: cfg.lambda_max,
            grid: cfg.grid_len,
            variant: cfg.variant.as_str().into(),
            order: order_label(cfg.order),
            max_order: cfg.max_order,
            split: match cfg.split {
                Split::None => "none".into(),
                Split::Half => "half".into(),
            },
            del: a.del,
            detrend: cfg.detrend,
            scale_outputs: cfg.scale_outputs,
            x0: match cfg.x0_policy {
                X0Policy::Zero => "zero".into(),
                X0Policy::LsEstimate => "ls".into(),
            },
            output_only: a.output_only,
            n_ide: runs.iter().map(|r| r.n_ide).collect(),
            n_val: a.n_val,
        },
        runs,
    };
    if let Some(path) = &a.report {
        write_atomic(path, &report.to_bytes())?;
    }
    if let Some(path) = &a.sv_csv {
        write_atomic(path, &sv_csv(&report))?;
    }
    if let Some(path) = &a.vaf_csv {
        write_atomic(path, &vaf_csv(&report))?;
    }
    Ok(())
}

/// One row per (run, lambda): `n_ide,lambda,lambda_over_n,sv1,...`; failed points leave
/// the value columns empty.
pub fn sv_csv(report: &ReportJson) -> Vec<u8> {
    let width = report.runs.iter().flat_map(|r| r.grid.sigma.iter().map(Vec::len)).max().unwrap_or(0);
    let mut header = vec!["n_ide".to_string(), "lambda".to_string(), "lambda_over_n".to_string()];
    header.extend((1..=width).map(|k| format!("sv{k}")));
    let mut lines = vec![header.join(",")];
    for run in &report.runs {
        for ((lambda, scaled), sigma) in run.grid.lambda.iter().zip(&run.grid.lambda_over_n).zip(&run.grid.sigma) {
            let mut row = vec![run.n_ide.to_string(), fmt_f64(*lambda), fmt_f64(*scaled)];
            row.extend((0..width).map(|k| sigma.get(k).map_or(String::new(), |v| fmt_f64(*v))));
            lines.push(row.join(","));
        }
    }
    (lines.join("\n") + "\n").into_bytes()
}

/// `n_ide,vaf,order,lambda_opt`, one row per run.
pub fn vaf_csv(report: &ReportJson) -> Vec<u8> {
    let mut lines = vec!["n_ide,vaf,order,lambda_opt".to_string()];
    for run in &report.runs {
        lines.push(format!(
            "{},{},{},{}",
            run.n_ide,
            run.vaf_validation.map_or(String::new(), fmt_f64),
            run.order,
            fmt_f64(run.lambda_opt)
        ));
    }
    (lines.join("\n") + "\n").into_bytes()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::Format { path: path.display().to_string(), msg: e.to_string() })
}

fn load_model_json(path: &Path) -> Result<ModelJson> {
    let value: serde_json::Value = read_json(path)?;
    let fmt = |msg: String| Error::Format { path: path.display().to_string(), msg };
    let model = match value.get("runs") {
        Some(runs) => runs
            .as_array()
            .and_then(|r| r.last())
            .and_then(|r| r.get("model"))
            .cloned()
            .ok_or_else(|| fmt("report has no runs".into()))?,
        None => value,
    };
    serde_json::from_value(model).map_err(|e| fmt(e.to_string()))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let model = match (&a.model, &a.example) {
        (Some(path), _) => load_model_json(path)?.to_model()?,
        (None, Some(name)) => synth::example_model(name)?,
        (None, None) => return Err(usage("pass --model or --example")),
    };
    if a.samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    if !(0.0..=1.0).contains(&a.switch_prob) {
        return Err(usage("--switch-prob must lie in [0, 1]"));
    }
    let u = synth::prbs(a.samples, model.m(), a.switch_prob, a.seed);
    // separate stream for the innovations
    let rec = synth::generate(&model, &u, &DVector::zeros(model.n()), a.noise_std, a.seed.wrapping_add(1))?;
    write_atomic(&a.out, &record_to_csv(&rec))?;
    println!("wrote {} samples ({} inputs, {} outputs) to {}", rec.len(), rec.m(), rec.p(), a.out.display());
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<()> {
    let report: ReportJson = read_json(&a.report)?;
    let run = match a.run {
        Some(k) => report.runs.get(k),
        None => report.runs.last(),
    }
    .ok_or_else(|| usage("requested run is not in the report"))?;
    let model = run.model.to_identified()?;
    let mut rec = read_record(&a.data, None, None)?;
    if model.model.m() == 0 && rec.m() > 0 {
        rec = IoRecord::output_only(rec.y)?;
    }
    if rec.m() != model.model.m() || rec.p() != model.model.p() {
        return Err(Error::Dimension(format!(
            "model has {} inputs / {} outputs, {} has {} / {}",
            model.model.m(),
            model.model.p(),
            a.data.display(),
            rec.m(),
            rec.p()
        )));
    }
    let cfg = PipelineConfig {
        s: report.config.s,
        del: a.del,
        detrend: report.config.detrend,
        ..PipelineConfig::default()
    };
    let (val, _) = preprocess_with_scales(&rec, &cfg, Some(&run.output_scales))?;
    let policy = match a.x0 {
        Some(x) => x.into(),
        None if report.config.x0 == "zero" => X0Policy::Zero,
        None => X0Policy::LsEstimate,
    };
    let yhat = validation_output(&model, &val, policy)?;
    for (j, v) in per_output_vaf(&val.y, &yhat)?.iter().enumerate() {
        println!("y{}: VAF {:.6}", j + 1, v);
    }
    println!("aggregate: VAF {:.12}", vaf(&val.y, &yhat)?);
    Ok(())
}
