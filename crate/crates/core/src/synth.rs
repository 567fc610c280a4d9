//! Seeded synthetic data for tests and the `simulate` command.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{dim_err, Error, Result};
use crate::model::{IoRecord, StateSpaceModel};

/// Random binary (+1 / -1) input that switches level with probability
/// `switch_prob` at each sample, independently per channel.
pub fn prbs(samples: usize, channels: usize, switch_prob: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(samples, channels);
    for c in 0..channels {
        let mut level = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for k in 0..samples {
            if k > 0 && rng.gen_bool(switch_prob) {
                level = -level;
            }
            out[(k, c)] = level;
        }
    }
    out
}

/// Zero-mean Gaussian white noise, `samples x channels`.
pub fn white_noise(samples: usize, channels: usize, std: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::InvalidArgument(format!("noise std must be finite and >= 0, got {std}")));
    }
    let mut out = DMatrix::zeros(samples, channels);
    if std == 0.0 {
        return Ok(out);
    }
    let dist = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // row-major draw order so the sequence does not depend on storage layout
    for k in 0..samples {
        for c in 0..channels {
            out[(k, c)] = dist.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Runs the innovation-form model with innovation sequence `e` (`N x p`).
pub fn generate_with_innovation(
    model: &StateSpaceModel,
    u: &DMatrix<f64>,
    e: &DMatrix<f64>,
    x0: &DVector<f64>,
) -> Result<IoRecord> {
    if u.ncols() != model.m() || e.ncols() != model.p() || e.nrows() != u.nrows() {
        return dim_err("generate: input or innovation shape does not match the model");
    }
    if x0.len() != model.n() {
        return dim_err("generate: initial state length does not match the model");
    }
    let mut x = x0.clone();
    let mut y = DMatrix::zeros(u.nrows(), model.p());
    for k in 0..u.nrows() {
        let uk = u.row(k).transpose();
        let ek = e.row(k).transpose();
        let yk = &model.c * &x + &model.d * &uk + &ek;
        y.row_mut(k).copy_from(&yk.transpose());
        x = &model.a * &x + &model.b * &uk + &model.k * &ek;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("generated state at sample {k} (overflow)")));
        }
    }
    IoRecord::new(u.clone(), y)
}

/// Innovation-form data with i.i.d. Gaussian innovations of the given std.
pub fn generate(
    model: &StateSpaceModel,
    u: &DMatrix<f64>,
    x0: &DVector<f64>,
    noise_std: f64,
    seed: u64,
) -> Result<IoRecord> {
    let e = white_noise(u.nrows(), model.p(), noise_std, seed)?;
    generate_with_innovation(model, u, &e, x0)
}

/// Adds white measurement noise so that each output channel has the given
/// signal-to-noise ratio in dB (power ratio of the clean channel to the noise).
pub fn add_output_noise(y: &DMatrix<f64>, snr_db: f64, seed: u64) -> Result<DMatrix<f64>> {
    let unit = white_noise(y.nrows(), y.ncols(), 1.0, seed)?;
    let mut out = y.clone();
    for c in 0..y.ncols() {
        let sig: f64 = y.column(c).iter().map(|v| v * v).sum::<f64>() / y.nrows() as f64;
        let noise: f64 = unit.column(c).iter().map(|v| v * v).sum::<f64>() / y.nrows() as f64;
        let gain = (sig / noise / 10f64.powf(snr_db / 10.0)).sqrt();
        for k in 0..y.nrows() {
            out[(k, c)] += gain * unit[(k, c)];
        }
    }
    Ok(out)
}

/// Built-in example systems, addressable by name from the command line.
pub fn example_model(name: &str) -> Result<StateSpaceModel> {
    use nalgebra::dmatrix;
    match name {
        // poles 0.8 +- 0.3i
        "siso2" => StateSpaceModel::new(
            dmatrix![1.6, -0.73; 1.0, 0.0],
            dmatrix![1.0; 0.0],
            dmatrix![0.5, 0.3],
            dmatrix![0.1],
            dmatrix![0.4; 0.2],
        ),
        "siso1-ar" => StateSpaceModel::new(dmatrix![0.8], DMatrix::zeros(1, 0), dmatrix![1.0], DMatrix::zeros(1, 0), dmatrix![0.6]),
        "mimo3" => StateSpaceModel::new(
            dmatrix![0.7, 0.2, 0.0; -0.2, 0.7, 0.0; 0.0, 0.0, -0.5],
            dmatrix![1.0, 0.0; 0.0, 0.5; 0.6, 1.0],
            dmatrix![1.0, 0.0, 0.5; 0.0, 1.0, -0.4],
            dmatrix![0.0, 0.1; 0.2, 0.0],
            dmatrix![0.3, 0.0; 0.0, 0.3; 0.1, 0.1],
        ),
        other => Err(Error::InvalidArgument(format!(
            "unknown example model '{other}' (known: siso2, siso1-ar, mimo3)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prbs_is_binary_and_seeded() {
        let a = prbs(200, 2, 0.3, 9);
        assert!(a.iter().all(|&v| v == 1.0 || v == -1.0));
        assert_eq!(a, prbs(200, 2, 0.3, 9));
        assert_ne!(a, prbs(200, 2, 0.3, 10));
    }

    #[test]
    fn zero_noise_matches_simulate() {
        let m = example_model("siso2").unwrap();
        let u = prbs(50, 1, 0.3, 1);
        let x0 = DVector::from_vec(vec![0.2, -0.1]);
        let rec = generate(&m, &u, &x0, 0.0, 3).unwrap();
        assert_eq!(rec.y, m.simulate(&u, &x0).unwrap());
    }

    #[test]
    fn output_noise_hits_requested_snr() {
        let y = DMatrix::from_fn(5000, 1, |k, _| (k as f64 * 0.1).sin());
        let noisy = add_output_noise(&y, 20.0, 4).unwrap();
        let sig: f64 = y.iter().map(|v| v * v).sum();
        let err: f64 = (&noisy - &y).iter().map(|v| v * v).sum();
        assert!((10.0 * (sig / err).log10() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn examples_are_valid() {
        for name in ["siso2", "siso1-ar", "mimo3"] {
            example_model(name).unwrap().validate().unwrap();
        }
        assert!(example_model("nope").is_err());
    }
}
