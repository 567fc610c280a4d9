//! Discrete-time LTI models in innovation and observer form.
//!
//! Samples are indexed from 0 internally: row `k` of a data array holds the
//! sample usually written `u(k+1)` / `y(k+1)` with 1-based time.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};

/// Innovation-form model
///
/// ```text
/// x(k+1) = A x(k) + B u(k) + K e(k)
/// y(k)   = C x(k) + D u(k) + e(k)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

/// Observer (predictor) form with `a_obs = A - K C` and `b_obs = B - K D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverModel {
    pub a_obs: DMatrix<f64>,
    pub b_obs: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

fn check_quintuple(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    k: &DMatrix<f64>,
) -> Result<()> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return dim_err(format!("A must be square and nonempty, got {}x{}", a.nrows(), a.ncols()));
    }
    let m = b.ncols();
    let p = c.nrows();
    if p == 0 {
        return dim_err("C must have at least one row");
    }
    if b.nrows() != n {
        return dim_err(format!("B has {} rows, expected {}", b.nrows(), n));
    }
    if c.ncols() != n {
        return dim_err(format!("C has {} columns, expected {}", c.ncols(), n));
    }
    if d.shape() != (p, m) {
        return dim_err(format!("D is {:?}, expected ({}, {})", d.shape(), p, m));
    }
    if k.shape() != (n, p) {
        return dim_err(format!("K is {:?}, expected ({}, {})", k.shape(), n, p));
    }
    for (name, mat) in [("A", a), ("B", b), ("C", c), ("D", d), ("K", k)] {
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("model matrix {name}")));
        }
    }
    Ok(())
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        k: DMatrix<f64>,
    ) -> Result<Self> {
        check_quintuple(&a, &b, &c, &d, &k)?;
        Ok(Self { a, b, c, d, k })
    }

    /// Model without a noise model (`K = 0`).
    pub fn deterministic(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let k = DMatrix::zeros(a.nrows(), c.nrows());
        Self::new(a, b, c, d, k)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        check_quintuple(&self.a, &self.b, &self.c, &self.d, &self.k)
    }

    pub fn to_observer(&self) -> Result<ObserverModel> {
        self.validate()?;
        Ok(ObserverModel {
            a_obs: &self.a - &self.k * &self.c,
            b_obs: &self.b - &self.k * &self.d,
            c: self.c.clone(),
            d: self.d.clone(),
            k: self.k.clone(),
        })
    }

    /// Deterministic simulation from `x0`; the innovation input is not used.
    ///
    /// Row `k` of the result is the output at 0-based sample `k`.
    pub fn simulate(&self, u: &DMatrix<f64>, x0: &DVector<f64>) -> Result<DMatrix<f64>> {
        if u.ncols() != self.m() {
            return dim_err(format!("input has {} columns, model expects {}", u.ncols(), self.m()));
        }
        if x0.len() != self.n() {
            return dim_err(format!("x0 has length {}, model order is {}", x0.len(), self.n()));
        }
        let mut x = x0.clone();
        let mut out = DMatrix::zeros(u.nrows(), self.p());
        for k in 0..u.nrows() {
            let uk = u.row(k).transpose();
            let yk = &self.c * &x + &self.d * &uk;
            out.row_mut(k).copy_from(&yk.transpose());
            x = &self.a * &x + &self.b * &uk;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("simulation state at sample {k} (overflow)")));
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("simulated output (overflow)".into()));
        }
        Ok(out)
    }
}

impl ObserverModel {
    pub fn new(
        a_obs: DMatrix<f64>,
        b_obs: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        k: DMatrix<f64>,
    ) -> Result<Self> {
        check_quintuple(&a_obs, &b_obs, &c, &d, &k)?;
        Ok(Self { a_obs, b_obs, c, d, k })
    }

    pub fn n(&self) -> usize {
        self.a_obs.nrows()
    }
    pub fn m(&self) -> usize {
        self.b_obs.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Back to innovation form: `A = a_obs + K C`, `B = b_obs + K D`.
    pub fn to_innovation(&self) -> Result<StateSpaceModel> {
        StateSpaceModel::new(
            &self.a_obs + &self.k * &self.c,
            &self.b_obs + &self.k * &self.d,
            self.c.clone(),
            self.d.clone(),
            self.k.clone(),
        )
    }

    /// One-step-ahead predictor driven by measured inputs and outputs.
    pub fn predict(&self, rec: &IoRecord, x0: &DVector<f64>) -> Result<DMatrix<f64>> {
        if rec.m() != self.m() || rec.p() != self.p() {
            return dim_err(format!(
                "record is {} in / {} out, observer is {} in / {} out",
                rec.m(),
                rec.p(),
                self.m(),
                self.p()
            ));
        }
        if x0.len() != self.n() {
            return dim_err(format!("x0 has length {}, observer order is {}", x0.len(), self.n()));
        }
        let mut x = x0.clone();
        let mut out = DMatrix::zeros(rec.len(), self.p());
        for k in 0..rec.len() {
            let uk = rec.u.row(k).transpose();
            let yk = rec.y.row(k).transpose();
            let yhat = &self.c * &x + &self.d * &uk;
            out.row_mut(k).copy_from(&yhat.transpose());
            x = &self.a_obs * &x + &self.b_obs * &uk + &self.k * &yk;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("observer state at sample {k} (overflow)")));
            }
        }
        Ok(out)
    }

    /// Impulse-response blocks of the observer.
    ///
    /// `Input` gives `[D, C b_obs, C a_obs b_obs, ...]`; `Output` gives
    /// `[0, C K, C a_obs K, ...]`.
    pub fn markov_parameters(&self, count: usize, channel: Channel) -> Result<Vec<DMatrix<f64>>> {
        if count == 0 {
            return Err(Error::InvalidArgument("markov parameter count must be >= 1".into()));
        }
        let (first, gain) = match channel {
            Channel::Input => (self.d.clone(), &self.b_obs),
            Channel::Output => (DMatrix::zeros(self.p(), self.p()), &self.k),
        };
        let mut out = Vec::with_capacity(count);
        out.push(first);
        let mut ca = self.c.clone();
        for _ in 1..count {
            out.push(&ca * gain);
            ca = &ca * &self.a_obs;
        }
        Ok(out)
    }
}

/// Which observer input a set of Markov parameters refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Input,
    Output,
}

/// Time-aligned input/output samples; row `k` is sample `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IoRecord {
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl IoRecord {
    pub fn new(u: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if u.nrows() != y.nrows() {
            return dim_err(format!("u has {} samples, y has {}", u.nrows(), y.nrows()));
        }
        if y.nrows() == 0 {
            return Err(Error::InvalidArgument("record must hold at least one sample".into()));
        }
        if y.ncols() == 0 {
            return Err(Error::InvalidArgument("record must have at least one output".into()));
        }
        if u.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("io record".into()));
        }
        Ok(Self { u, y })
    }

    /// Record without inputs.
    pub fn output_only(y: DMatrix<f64>) -> Result<Self> {
        Self::new(DMatrix::zeros(y.nrows(), 0), y)
    }

    pub fn len(&self) -> usize {
        self.y.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.y.nrows() == 0
    }
    pub fn m(&self) -> usize {
        self.u.ncols()
    }
    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    /// Samples `start..start+len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return dim_err(format!(
                "slice {}..{} out of range for {} samples",
                start,
                start + len,
                self.len()
            ));
        }
        Self::new(self.u.rows(start, len).into_owned(), self.y.rows(start, len).into_owned())
    }
}

/// Variance accounted for, in percent.
pub fn vaf(y: &DMatrix<f64>, yhat: &DMatrix<f64>) -> Result<f64> {
    if y.shape() != yhat.shape() {
        return dim_err(format!("vaf: y is {:?}, yhat is {:?}", y.shape(), yhat.shape()));
    }
    let den: f64 = y.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::InvalidArgument("vaf: measured output is identically zero".into()));
    }
    let num: f64 = y.iter().zip(yhat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((1.0 - num / den) * 100.0)
}
