//! Resolution and contrast measurements: FWHM, SSNR, CR and gCNR.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::{EnvelopeImage, ImageGrid, RegionMask, RegionRole};

pub const DEFAULT_GCNR_BINS: usize = 100;

/// Full width at half maximum of a single-peaked profile.
///
/// The half-maximum crossings nearest the peak are located by linear
/// interpolation between the bracketing samples.
pub fn fwhm(profile: &[f64], spacing_m: f64) -> Result<f64> {
    let n = profile.len();
    if n < 3 {
        return Err(Error::PeakAtBoundary);
    }
    let peak = (0..n)
        .max_by(|&a, &b| profile[a].total_cmp(&profile[b]).then(b.cmp(&a)))
        .expect("non-empty");
    if peak == 0 || peak == n - 1 {
        return Err(Error::PeakAtBoundary);
    }
    let half = profile[peak] / 2.0;
    let crossing = |j: usize, k: usize| {
        // j is at or below half, k above it
        let (a, b) = (profile[j], profile[k]);
        j as f64 + (k as f64 - j as f64) * (half - a) / (b - a)
    };
    let left = (0..peak)
        .rev()
        .find(|&j| profile[j] <= half)
        .map(|j| crossing(j, j + 1))
        .ok_or(Error::NoCrossing("left"))?;
    let right = (peak + 1..n)
        .find(|&j| profile[j] <= half)
        .map(|j| crossing(j, j - 1))
        .ok_or(Error::NoCrossing("right"))?;
    Ok((right - left) * spacing_m)
}

/// Axial and lateral FWHM of the brightest point in a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResolution {
    pub axial_m: f64,
    pub lateral_m: f64,
    /// `(iz, ix)` of the peak pixel.
    pub peak: (usize, usize),
}

/// Finds the peak pixel (optionally within `window`, an inclusive pixel box
/// `(iz0, iz1, ix0, ix1)`) and measures FWHM along its column and row.
pub fn point_resolution(env: &EnvelopeImage, window: Option<(usize, usize, usize, usize)>) -> Result<PointResolution> {
    let v = env.values();
    let (nz, nx) = v.dim();
    let (iz0, iz1, ix0, ix1) = window.unwrap_or((0, nz - 1, 0, nx - 1));
    let (iz1, ix1) = (iz1.min(nz - 1), ix1.min(nx - 1));
    let mut peak = (iz0, ix0);
    for iz in iz0..=iz1 {
        for ix in ix0..=ix1 {
            if v[[iz, ix]] > v[peak] {
                peak = (iz, ix);
            }
        }
    }
    let column: Vec<f64> = v.column(peak.1).to_vec();
    let row: Vec<f64> = v.row(peak.0).to_vec();
    let grid = env.grid();
    Ok(PointResolution {
        axial_m: fwhm(&column, grid.dz())?,
        lateral_m: fwhm(&row, grid.dx())?,
        peak,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
fn std_dev(values: &[f64], mu: f64) -> f64 {
    (values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Speckle SNR `mu / sigma` of the (pre-log) envelope over the background.
/// Invariant to gain, not to offset.
pub fn ssnr(env: &EnvelopeImage, background: &RegionMask) -> Result<f64> {
    ssnr_values(&background.select(env.values())?)
}

pub fn ssnr_values(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::EmptyMask("background"));
    }
    let mu = mean(values);
    let sigma = std_dev(values, mu);
    if sigma == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(mu / sigma)
}

/// Contrast ratio `20 log10(mu_roi / mu_b)` in dB; a perfectly anechoic ROI
/// gives `-inf`, never NaN.
pub fn cr(env: &EnvelopeImage, roi: &RegionMask, background: &RegionMask) -> Result<f64> {
    cr_values(&roi.select(env.values())?, &background.select(env.values())?)
}

pub fn cr_values(roi: &[f64], background: &[f64]) -> Result<f64> {
    if roi.is_empty() {
        return Err(Error::EmptyMask("ROI"));
    }
    if background.is_empty() {
        return Err(Error::EmptyMask("background"));
    }
    let mu_b = mean(background);
    if !(mu_b > 0.0) {
        return Err(Error::ZeroBackground);
    }
    let mu_roi = mean(roi);
    if mu_roi == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (mu_roi / mu_b).log10())
}

/// Formats a contrast ratio for reports: finite values as-is, the anechoic
/// sentinel as `< -DR`.
pub fn format_cr(cr_db: f64, dynamic_range_db: f64) -> String {
    if cr_db.is_finite() {
        format!("{cr_db:.4}")
    } else {
        format!("< -{dynamic_range_db}")
    }
}

/// Density histogram on uniform bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub densities: Vec<f64>,
}

impl Histogram {
    /// Histogram of `values` over `[lo, hi]` with `bins` uniform bins; values
    /// outside the range are clamped to the end bins.
    pub fn build(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("histogram", "need at least one bin"));
        }
        if values.is_empty() {
            return Err(Error::EmptyMask("histogram"));
        }
        if !(hi > lo) {
            return Err(Error::invalid("histogram", format!("empty range [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &v in values {
            counts[bin_index(v, lo, width, bins)] += 1;
        }
        let norm = values.len() as f64 * width;
        Ok(Self {
            bin_edges: (0..=bins).map(|k| lo + k as f64 * width).collect(),
            densities: counts.iter().map(|&c| c as f64 / norm).collect(),
            counts,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }
}

fn bin_index(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
}

/// Generalized contrast-to-noise ratio: one minus the overlap of the ROI and
/// background value distributions, histogrammed on their joint range.
pub fn gcnr(env: &EnvelopeImage, roi: &RegionMask, background: &RegionMask, bins: usize) -> Result<f64> {
    gcnr_values(&roi.select(env.values())?, &background.select(env.values())?, bins)
}

pub fn gcnr_values(roi: &[f64], background: &[f64], bins: usize) -> Result<f64> {
    if roi.is_empty() {
        return Err(Error::EmptyMask("ROI"));
    }
    if background.is_empty() {
        return Err(Error::EmptyMask("background"));
    }
    if bins < 2 {
        return Err(Error::invalid("gCNR bins", format!("{bins} < 2")));
    }
    let (lo, hi) = roi
        .iter()
        .chain(background)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi == lo {
        return Ok(0.0);
    }
    let p_roi = Histogram::build(roi, lo, hi, bins)?;
    let p_b = Histogram::build(background, lo, hi, bins)?;
    let (n_roi, n_b) = (roi.len() as f64, background.len() as f64);
    // sum of min(p_roi, p_b) * width, evaluated on the probability masses
    let overlap: f64 = p_roi
        .counts
        .iter()
        .zip(&p_b.counts)
        .map(|(&a, &b)| (a as f64 / n_roi).min(b as f64 / n_b))
        .sum();
    Ok((1.0 - overlap).clamp(0.0, 1.0))
}

/// Disk of radius `r` centered at `(cx, cz)`.
pub fn disk_mask(grid: &ImageGrid, cx: f64, cz: f64, r: f64, role: RegionRole) -> Result<RegionMask> {
    annulus_mask(grid, cx, cz, -1.0, r, role)
}

/// Pixels with `r_in < distance <= r_out` from `(cx, cz)`.
pub fn annulus_mask(grid: &ImageGrid, cx: f64, cz: f64, r_in: f64, r_out: f64, role: RegionRole) -> Result<RegionMask> {
    let mask = Array2::from_shape_fn(grid.shape(), |(iz, ix)| {
        let d = ((grid.x(ix) - cx).powi(2) + (grid.z(iz) - cz).powi(2)).sqrt();
        d > r_in && d <= r_out
    });
    RegionMask::new(mask, role)
}

/// Axis-aligned rectangle `[x0, x1] × [z0, z1]`.
pub fn rect_mask(grid: &ImageGrid, x: (f64, f64), z: (f64, f64), role: RegionRole) -> Result<RegionMask> {
    let mask = Array2::from_shape_fn(grid.shape(), |(iz, ix)| {
        (x.0..=x.1).contains(&grid.x(ix)) && (z.0..=z.1).contains(&grid.z(iz))
    });
    RegionMask::new(mask, role)
}

/// ROI and background for a circular cyst: a disk at 0.7 radius and the
/// concentric annulus between 1.3 and 1.6 radii.
pub fn cyst_regions(grid: &ImageGrid, cx: f64, cz: f64, radius: f64) -> Result<(RegionMask, RegionMask)> {
    Ok((
        disk_mask(grid, cx, cz, 0.7 * radius, RegionRole::Roi)?,
        annulus_mask(grid, cx, cz, 1.3 * radius, 1.6 * radius, RegionRole::Background)?,
    ))
}
