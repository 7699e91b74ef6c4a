//! Delay-and-sum, coherent plane-wave compounding and minimum-variance
//! beamforming over delay-aligned channel data.
//!
//! Every beamformer works one pixel at a time over the dynamic receive
//! aperture and sums elements in ascending index order, so results do not
//! depend on the thread count.

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;
pub use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::aperture_for_depth;
use crate::postprocess::AnalyticPlan;
use crate::types::{BeamformedRF, PixelAlignedRF, ProbeGeometry};

pub const DEFAULT_FNUM: f64 = 1.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowKind {
    #[default]
    Boxcar,
    Hann,
    Hamming,
}

impl WindowKind {
    /// Window value at normalized aperture coordinate `u` (`0` at the center,
    /// `±0.5` at the edges).
    pub fn eval(self, u: f64) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * u;
        match self {
            WindowKind::Boxcar => 1.0,
            WindowKind::Hann => 0.5 + 0.5 * phase.cos(),
            WindowKind::Hamming => 0.54 + 0.46 * phase.cos(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Boxcar => "boxcar",
            WindowKind::Hann => "hann",
            WindowKind::Hamming => "hamming",
        }
    }
}

impl std::str::FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boxcar" => Ok(WindowKind::Boxcar),
            "hann" => Ok(WindowKind::Hann),
            "hamming" => Ok(WindowKind::Hamming),
            other => Err(Error::invalid(
                "apodization window",
                format!("{other:?} is not one of boxcar, hann, hamming"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApodizationSpec {
    pub window: WindowKind,
    pub fnum: f64,
}

impl Default for ApodizationSpec {
    fn default() -> Self {
        Self {
            window: WindowKind::Boxcar,
            fnum: DEFAULT_FNUM,
        }
    }
}

impl ApodizationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fnum > 0.0 && self.fnum.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("f-number", format!("{} is not positive", self.fnum)))
        }
    }
}

/// Receive weights for one pixel: index of the first active element and the
/// unit-sum window over the active aperture.
pub fn apodization_weights(probe: &ProbeGeometry, z: f64, pixel_x: f64, apod: &ApodizationSpec) -> (usize, Vec<f64>) {
    let (first, last) = aperture_for_depth(z, pixel_x, apod.fnum, probe);
    let length = z / apod.fnum;
    let mut w: Vec<f64> = probe.positions()[first..=last]
        .iter()
        .map(|&xi| apod.window.eval((xi - pixel_x) / length))
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|v| *v /= total);
    } else {
        let n = w.len() as f64;
        w.iter_mut().for_each(|v| *v = 1.0 / n);
    }
    (first, w)
}

fn check_probe(aligned: &PixelAlignedRF, probe: &ProbeGeometry) -> Result<()> {
    if aligned.element_count() != probe.element_count() {
        return Err(Error::ShapeMismatch(format!(
            "aligned data has {} elements, probe has {}",
            aligned.element_count(),
            probe.element_count()
        )));
    }
    Ok(())
}

/// Delay-and-sum: `S(x, z) = sum_i w_i(x, z) R_i(x, z)`.
pub fn das(aligned: &PixelAlignedRF, apod: &ApodizationSpec, probe: &ProbeGeometry) -> Result<BeamformedRF> {
    apod.validate()?;
    check_probe(aligned, probe)?;
    let grid = *aligned.grid();
    let data = aligned.data();
    let mut out = Array2::zeros(grid.shape());
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(iz, mut row)| {
            let z = grid.z(iz);
            for (ix, px) in row.iter_mut().enumerate() {
                let (first, w) = apodization_weights(probe, z, grid.x(ix), apod);
                *px = w
                    .iter()
                    .enumerate()
                    .fold(0.0, |acc, (k, wk)| acc + wk * data[[first + k, iz, ix]]);
            }
        });
    BeamformedRF::new(out, grid)
}

/// Coherent compounding: pixel-wise mean of per-angle beamformed RF.
///
/// The mean is accumulated incrementally, so compounding `n` identical frames
/// returns that frame bit for bit.
pub fn cpwc(frames: &[BeamformedRF]) -> Result<BeamformedRF> {
    let (head, rest) = frames.split_first().ok_or(Error::EmptyAngleList)?;
    if rest.iter().any(|f| f.grid() != head.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut mean = Array2::<f64>::zeros(head.grid().shape());
    for (k, frame) in frames.iter().enumerate() {
        let n = (k + 1) as f64;
        mean.zip_mut_with(frame.values(), |m, &v| *m += (v - *m) / n);
    }
    BeamformedRF::new(mean, *head.grid())
}

/// Minimum-variance settings. `None` selects the per-pixel defaults: half
/// the active aperture for the subarray and `1 / (100 L)` diagonal loading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvConfig {
    pub subaperture_len: Option<usize>,
    /// Loading as a fraction of the covariance trace per subarray element.
    pub diagonal_loading: Option<f64>,
    pub forward_backward: bool,
    /// Axial half-length over which covariances of neighboring pixels are
    /// averaged; 0 estimates from the pixel's own snapshot only.
    pub temporal_half_window_m: f64,
    /// f-number of the dynamic receive aperture.
    pub fnum: f64,
}

impl Default for MvConfig {
    fn default() -> Self {
        Self {
            subaperture_len: None,
            diagonal_loading: None,
            forward_backward: false,
            temporal_half_window_m: 0.0,
            fnum: DEFAULT_FNUM,
        }
    }
}

impl MvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subaperture_len == Some(0) {
            return Err(Error::invalid("MV subaperture", "length must be at least 1"));
        }
        if let Some(d) = self.diagonal_loading {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::invalid("MV diagonal loading", format!("{d} is negative")));
            }
        }
        if !(self.temporal_half_window_m >= 0.0 && self.temporal_half_window_m.is_finite()) {
            return Err(Error::invalid("MV temporal window", "must be a non-negative length"));
        }
        if !(self.fnum > 0.0) {
            return Err(Error::invalid("f-number", format!("{} is not positive", self.fnum)));
        }
        Ok(())
    }

    /// Subarray length for an active aperture of `active` elements.
    pub fn subaperture_for(&self, active: usize) -> usize {
        self.subaperture_len.unwrap_or(active / 2).clamp(1, active.max(1))
    }

    pub fn loading_for(&self, subaperture: usize) -> f64 {
        self.diagonal_loading.unwrap_or(1.0 / (100.0 * subaperture as f64))
    }
}

/// Spatially smoothed sample covariance `(1/W) sum x_s x_s^H` of the
/// `L`-element subarrays of one aperture snapshot, optionally
/// forward-backward averaged.
pub fn smoothed_covariance(samples: &[Complex64], subaperture: usize, forward_backward: bool) -> Array2<Complex64> {
    let mut cov = Array2::<Complex64>::zeros((subaperture, subaperture));
    accumulate_covariance(&mut cov, samples);
    finish_covariance(cov, samples.len() + 1 - subaperture, forward_backward)
}

/// Adds the upper triangle of `sum_s x_s x_s^H` over the subarrays of
/// `samples`.
fn accumulate_covariance(cov: &mut Array2<Complex64>, samples: &[Complex64]) {
    let l = cov.nrows();
    let windows = samples.len() + 1 - l;
    for start in 0..windows {
        let x = &samples[start..start + l];
        for a in 0..l {
            for b in a..l {
                cov[[a, b]] += x[a] * x[b].conj();
            }
        }
    }
}

/// Scales an accumulated upper triangle by `1 / count`, fills the lower
/// triangle and applies forward-backward averaging.
fn finish_covariance(mut cov: Array2<Complex64>, count: usize, forward_backward: bool) -> Array2<Complex64> {
    let l = cov.nrows();
    let scale = 1.0 / count as f64;
    for a in 0..l {
        for b in a..l {
            let v = cov[[a, b]] * scale;
            cov[[a, b]] = v;
            cov[[b, a]] = v.conj();
        }
    }
    if forward_backward {
        let flipped = Array2::from_shape_fn((l, l), |(a, b)| cov[[l - 1 - a, l - 1 - b]].conj());
        cov = (&cov + &flipped) * Complex64::new(0.5, 0.0);
    }
    cov
}

/// Distortionless minimum-variance weights `R^-1 a / (a^H R^-1 a)` with
/// `a = 1` and `R` loaded by `loading * trace(R) / L` on the diagonal.
pub fn mv_weights_from_covariance(cov: &Array2<Complex64>, loading: f64) -> Result<Vec<Complex64>> {
    let l = cov.nrows();
    let trace: f64 = cov.diag().iter().map(|d| d.re).sum();
    if trace == 0.0 && loading > 0.0 {
        // zero data: the loaded matrix is proportional to the identity
        return Ok(vec![Complex64::new(1.0 / l as f64, 0.0); l]);
    }
    let mut r = cov.clone();
    let eps = loading * trace / l as f64;
    r.diag_mut().mapv_inplace(|d| d + eps);
    let y = cholesky_solve_ones(&r, trace / l as f64)?;
    let total: Complex64 = y.iter().sum();
    if !(total.norm() > 0.0) || !total.is_finite() {
        return Err(Error::SingularCovariance);
    }
    Ok(y.into_iter().map(|v| v / total).collect())
}

/// Solves `R y = 1` for Hermitian positive-definite `R`.
fn cholesky_solve_ones(r: &Array2<Complex64>, scale: f64) -> Result<Vec<Complex64>> {
    let n = r.nrows();
    let tiny = 1e-12 * scale.abs();
    let zero = Complex64::new(0.0, 0.0);
    let mut lower = Array2::<Complex64>::zeros((n, n));
    for j in 0..n {
        let mut d = r[[j, j]].re;
        for k in 0..j {
            d -= lower[[j, k]].norm_sqr();
        }
        if !(d > tiny) {
            return Err(Error::SingularCovariance);
        }
        let d = d.sqrt();
        lower[[j, j]] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = r[[i, j]];
            for k in 0..j {
                s -= lower[[i, k]] * lower[[j, k]].conj();
            }
            lower[[i, j]] = s / d;
        }
    }
    let mut y = vec![zero; n];
    for i in 0..n {
        let mut s = Complex64::new(1.0, 0.0);
        for k in 0..i {
            s -= lower[[i, k]] * y[k];
        }
        y[i] = s / lower[[i, i]].re;
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= lower[[k, i]].conj() * y[k];
        }
        y[i] = s / lower[[i, i]].re;
    }
    Ok(y)
}

/// Minimum-variance weights for one aperture snapshot.
pub fn mv_weights(samples: &[Complex64], config: &MvConfig) -> Result<Vec<Complex64>> {
    if samples.is_empty() {
        return Err(Error::invalid("MV snapshot", "no samples"));
    }
    let l = config.subaperture_for(samples.len());
    let cov = smoothed_covariance(samples, l, config.forward_backward);
    mv_weights_from_covariance(&cov, config.loading_for(l))
}

/// MV output for one snapshot: the weighted subarray sums `w^H x_s`
/// averaged over the smoothing windows.
pub fn mv_pixel(samples: &[Complex64], config: &MvConfig) -> Result<Complex64> {
    Ok(mv_output(samples, &mv_weights(samples, config)?))
}

/// Weights for the centre snapshot of an axial neighborhood, from the
/// covariance averaged over all snapshots (all of equal length).
pub fn mv_weights_averaged(snapshots: &[&[Complex64]], config: &MvConfig) -> Result<Vec<Complex64>> {
    let m = snapshots.first().map_or(0, |s| s.len());
    if m == 0 || snapshots.iter().any(|s| s.len() != m) {
        return Err(Error::invalid("MV snapshot", "empty or unequal snapshots"));
    }
    let l = config.subaperture_for(m);
    let mut cov = Array2::<Complex64>::zeros((l, l));
    for x in snapshots {
        accumulate_covariance(&mut cov, x);
    }
    let cov = finish_covariance(cov, snapshots.len() * (m + 1 - l), config.forward_backward);
    mv_weights_from_covariance(&cov, config.loading_for(l))
}

/// `w^H x_s` averaged over the smoothing windows of `samples`.
pub fn mv_output(samples: &[Complex64], w: &[Complex64]) -> Complex64 {
    let l = w.len();
    let windows = samples.len() + 1 - l;
    let total: Complex64 = (0..windows)
        .map(|s| {
            samples[s..s + l]
                .iter()
                .zip(w)
                .fold(Complex64::new(0.0, 0.0), |acc, (x, wk)| acc + wk.conj() * x)
        })
        .sum();
    total / windows as f64
}

/// Minimum-variance beamforming over the dynamic receive aperture.
///
/// Each element's aligned data is converted to its axial analytic signal,
/// weights are computed from the complex covariance, and the real part of
/// the beamformed analytic signal is returned as RF.
pub fn mv_beamform(aligned: &PixelAlignedRF, config: &MvConfig, probe: &ProbeGeometry) -> Result<BeamformedRF> {
    config.validate()?;
    check_probe(aligned, probe)?;
    let grid = *aligned.grid();
    let data = aligned.data();
    let (ne, nz, nx) = data.dim();
    let plan = AnalyticPlan::new(nz);
    let half = (config.temporal_half_window_m / grid.dz()).round() as usize;
    let columns: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|ix| -> Result<Vec<f64>> {
            let mut buf = Vec::new();
            let mut analytic = Array2::<Complex64>::zeros((ne, nz));
            for (i, mut row) in analytic.outer_iter_mut().enumerate() {
                plan.analytic(data.slice(s![i, .., ix]).iter().copied(), &mut buf);
                row.iter_mut().zip(&buf).for_each(|(o, v)| *o = *v);
            }
            let analytic = analytic.reversed_axes().as_standard_layout().into_owned();
            (0..nz)
                .map(|iz| {
                    let (first, last) = aperture_for_depth(grid.z(iz), grid.x(ix), config.fnum, probe);
                    let row = |r: usize| &analytic.row(r).to_slice().expect("standard layout")[first..=last];
                    let rows = iz.saturating_sub(half)..(iz + half + 1).min(nz);
                    let x = row(iz);
                    let w = if half == 0 {
                        mv_weights(x, config)?
                    } else {
                        let snapshots: Vec<&[Complex64]> = rows.map(row).collect();
                        mv_weights_averaged(&snapshots, config)?
                    };
                    Ok(mv_output(x, &w).re)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros(grid.shape());
    for (ix, col) in columns.into_iter().enumerate() {
        out.column_mut(ix).assign(&ndarray::Array1::from(col));
    }
    BeamformedRF::new(out, grid)
}
