//! Envelope detection and log compression.

use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::types::{BModeImage, BeamformedRF, EnvelopeImage};

pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 60.0;

/// Minimum column length accepted by [`envelope`].
pub const MIN_COLUMN_LEN: usize = 8;

pub(crate) struct AnalyticPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl AnalyticPlan {
    pub(crate) fn new(n: usize) -> Self {
        let len = n.next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    /// Analytic signal of `x`, left in the first `x.len()` entries of `buf`.
    pub(crate) fn analytic(&self, x: impl Iterator<Item = f64>, buf: &mut Vec<Complex64>) {
        buf.clear();
        buf.extend(x.map(|v| Complex64::new(v, 0.0)));
        buf.resize(self.len, Complex64::new(0.0, 0.0));
        self.forward.process(buf);
        let half = self.len / 2;
        for (k, v) in buf.iter_mut().enumerate() {
            if k == 0 || k == half {
                continue;
            } else if k < half {
                *v *= 2.0;
            } else {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse.process(buf);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// Magnitude of the analytic signal of `x`, written to `out`.
    fn magnitude(&self, x: impl Iterator<Item = f64>, out: &mut [f64], buf: &mut Vec<Complex64>) {
        self.analytic(x, buf);
        for (o, v) in out.iter_mut().zip(buf.iter()) {
            *o = v.norm();
        }
    }
}

/// Analytic signal `x + i H{x}` of a real signal, zero-padded to the next
/// power of two internally.
pub fn analytic_signal(signal: &[f64]) -> Result<Vec<Complex64>> {
    if signal.len() < MIN_COLUMN_LEN {
        return Err(Error::ColumnTooShort(signal.len()));
    }
    let plan = AnalyticPlan::new(signal.len());
    let mut buf = Vec::new();
    plan.analytic(signal.iter().copied(), &mut buf);
    buf.truncate(signal.len());
    Ok(buf)
}

/// Envelope of a single real signal via the FFT Hilbert transform.
///
/// The signal is zero-padded to the next power of two and the result
/// truncated, which slightly perturbs the last few samples.
pub fn analytic_magnitude(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.len() < MIN_COLUMN_LEN {
        return Err(Error::ColumnTooShort(signal.len()));
    }
    let plan = AnalyticPlan::new(signal.len());
    let mut out = vec![0.0; signal.len()];
    plan.magnitude(signal.iter().copied(), &mut out, &mut Vec::new());
    Ok(out)
}

/// Axial envelope detection: magnitude of the analytic signal of every
/// image column.
pub fn envelope(rf: &BeamformedRF) -> Result<EnvelopeImage> {
    let (nz, nx) = rf.values().dim();
    if nz < MIN_COLUMN_LEN {
        return Err(Error::ColumnTooShort(nz));
    }
    let plan = AnalyticPlan::new(nz);
    let columns: Vec<Array1<f64>> = rf
        .values()
        .axis_iter(Axis(1))
        .into_par_iter()
        .map_init(Vec::new, |buf, col| {
            let mut out = Array1::zeros(nz);
            plan.magnitude(col.iter().copied(), out.as_slice_mut().expect("fresh array"), buf);
            out
        })
        .collect();
    let mut env = Array2::zeros((nz, nx));
    for (ix, col) in columns.into_iter().enumerate() {
        env.column_mut(ix).assign(&col);
    }
    EnvelopeImage::new(env, *rf.grid())
}

/// `20 log10(env / max)`, clipped to `[-dynamic_range_db, 0]`.
pub fn log_compress(env: &EnvelopeImage, dynamic_range_db: f64) -> Result<BModeImage> {
    let peak = env.values().iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::AllZeroEnvelope);
    }
    let db = env
        .values()
        .mapv(|v| (20.0 * (v / peak).log10()).clamp(-dynamic_range_db, 0.0));
    BModeImage::new(db, *env.grid(), dynamic_range_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ImageGrid;

    fn rf_column(values: Vec<f64>) -> BeamformedRF {
        let n = values.len();
        let grid = ImageGrid::spanning((0.0, 0.0), 1e-4, (1e-3, 1e-3 + (n - 1) as f64 * 1e-5), 1e-5).unwrap();
        BeamformedRF::new(Array2::from_shape_vec((n, 1), values).unwrap(), grid).unwrap()
    }

    #[test]
    fn pure_tone_has_flat_envelope() {
        let n = 1024;
        let a = 2.5;
        let values = (0..n)
            .map(|k| a * (2.0 * std::f64::consts::PI * 0.125 * k as f64 + 0.3).cos())
            .collect();
        let env = envelope(&rf_column(values)).unwrap();
        for k in 0..n {
            assert!((env.values()[[k, 0]] - a).abs() < 1e-9 * a, "k={k}");
        }
    }

    #[test]
    fn zero_column_and_short_column() {
        let env = envelope(&rf_column(vec![0.0; 32])).unwrap();
        assert!(env.values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            envelope(&rf_column(vec![1.0; 7])),
            Err(Error::ColumnTooShort(7))
        ));
    }

    #[test]
    fn log_compress_examples() {
        let grid = ImageGrid::spanning((0.0, 2e-4), 1e-4, (1e-3, 1e-3), 1e-4).unwrap();
        let env = EnvelopeImage::new(ndarray::array![[2.0, 0.2, 2e-9]], grid).unwrap();
        let b = log_compress(&env, 60.0).unwrap();
        assert_eq!(b.values()[[0, 0]], 0.0);
        assert!((b.values()[[0, 1]] + 20.0).abs() < 1e-12);
        assert_eq!(b.values()[[0, 2]], -60.0);
        let zero = EnvelopeImage::new(Array2::zeros((1, 3)), grid).unwrap();
        assert!(matches!(log_compress(&zero, 60.0), Err(Error::AllZeroEnvelope)));
    }
}
