//! Plane-wave delay geometry, channel-to-pixel alignment and the dynamic
//! receive aperture.
//!
//! Time zero is the instant the plane wave crosses the origin `(0, 0)`. The
//! simulator uses the same convention, so no lens or offset correction is
//! applied anywhere.

use ndarray::{Array2, Array3, Axis as NdAxis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{AcquisitionParams, ChannelDataCube, ImageGrid, PixelAlignedRF, ProbeGeometry};

fn check_depth(z: f64) -> Result<()> {
    if z > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveDepth(z))
    }
}

/// Path length of a plane wave steered by `alpha` from the origin to `(x, z)`.
pub fn tx_distance(x: f64, z: f64, alpha: f64) -> Result<f64> {
    check_depth(z)?;
    Ok(tx_distance_unchecked(x, z, alpha))
}

/// Distance from `(x, z)` back to the element at lateral position `xi`.
pub fn rx_distance(x: f64, z: f64, xi: f64) -> Result<f64> {
    check_depth(z)?;
    Ok(rx_distance_unchecked(x, z, xi))
}

/// Two-way travel time `(d_t + d_r) / c`.
pub fn propagation_delay(x: f64, z: f64, xi: f64, alpha: f64, c: f64) -> Result<f64> {
    check_depth(z)?;
    if !(c > 0.0) {
        return Err(Error::invalid("sound speed", format!("{c} is not positive")));
    }
    Ok(delay_unchecked(x, z, xi, alpha, c))
}

#[inline]
fn tx_distance_unchecked(x: f64, z: f64, alpha: f64) -> f64 {
    z * alpha.cos() + x * alpha.sin()
}

#[inline]
fn rx_distance_unchecked(x: f64, z: f64, xi: f64) -> f64 {
    let dx = x - xi;
    (dx * dx + z * z).sqrt()
}

#[inline]
pub(crate) fn delay_unchecked(x: f64, z: f64, xi: f64, alpha: f64, c: f64) -> f64 {
    (tx_distance_unchecked(x, z, alpha) + rx_distance_unchecked(x, z, xi)) / c
}

/// Linear interpolation of `trace` at fractional sample index `pos`; zero
/// outside `[0, len - 1]`.
#[inline]
pub(crate) fn sample_linear(trace: &[f64], pos: f64) -> Option<f64> {
    let last = trace.len() - 1;
    if !(pos >= 0.0 && pos <= last as f64) {
        return None;
    }
    let k = pos.floor() as usize;
    if k == last {
        return Some(trace[last]);
    }
    let frac = pos - k as f64;
    let (a, b) = (trace[k], trace[k + 1]);
    Some(a + frac * (b - a))
}

/// Materialized two-way delays, `element × nz × nx`, for beamforming many
/// frames recorded with one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTable {
    delays_s: Array3<f64>,
    grid: ImageGrid,
}

impl DelayTable {
    pub fn compute(probe: &ProbeGeometry, params: &AcquisitionParams, grid: &ImageGrid) -> Result<Self> {
        params.validate()?;
        let (nz, nx) = grid.shape();
        let mut delays = Array3::zeros((probe.element_count(), nz, nx));
        let (alpha, c) = (params.steer_angle_rad, params.sound_speed_mps);
        delays
            .axis_iter_mut(NdAxis(0))
            .into_par_iter()
            .zip(probe.positions().par_iter())
            .for_each(|(mut slab, &xi)| {
                for ((iz, ix), d) in slab.indexed_iter_mut() {
                    *d = delay_unchecked(grid.x(ix), grid.z(iz), xi, alpha, c);
                }
            });
        Ok(Self {
            delays_s: delays,
            grid: *grid,
        })
    }

    pub fn delays(&self) -> &Array3<f64> {
        &self.delays_s
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }
}

/// Reads every trace at the round-trip time of every pixel:
/// `aligned[i][z][x] = h_i(tau(x, z) - t0)`, linearly interpolated, zero
/// outside the recording window.
pub fn align_channels(
    cube: &ChannelDataCube,
    probe: &ProbeGeometry,
    params: &AcquisitionParams,
    grid: &ImageGrid,
) -> Result<PixelAlignedRF> {
    params.validate()?;
    check_elements(cube, probe.element_count())?;
    let (alpha, c) = (params.steer_angle_rad, params.sound_speed_mps);
    align_with(cube, grid, |i, ix, iz| {
        delay_unchecked(grid.x(ix), grid.z(iz), probe.positions()[i], alpha, c)
    })
}

/// [`align_channels`] reading delays from a precomputed table; results are
/// bit-identical.
pub fn align_channels_with_table(cube: &ChannelDataCube, table: &DelayTable) -> Result<PixelAlignedRF> {
    check_elements(cube, table.delays_s.dim().0)?;
    align_with(cube, &table.grid, |i, ix, iz| table.delays_s[[i, iz, ix]])
}

fn check_elements(cube: &ChannelDataCube, expected: usize) -> Result<()> {
    if cube.element_count() != expected {
        return Err(Error::ShapeMismatch(format!(
            "channel data has {} elements, probe has {expected}",
            cube.element_count()
        )));
    }
    Ok(())
}

fn align_with<F>(cube: &ChannelDataCube, grid: &ImageGrid, delay: F) -> Result<PixelAlignedRF>
where
    F: Fn(usize, usize, usize) -> f64 + Sync,
{
    let (nz, nx) = grid.shape();
    let (t0, fs) = (cube.t0_s(), cube.sampling_freq_hz());
    let mut aligned = Array3::zeros((cube.element_count(), nz, nx));
    let hits: usize = aligned
        .axis_iter_mut(NdAxis(0))
        .into_par_iter()
        .zip(cube.traces().axis_iter(NdAxis(0)).into_par_iter())
        .enumerate()
        .map(|(i, (mut slab, trace))| {
            let trace = trace.as_slice().expect("traces are row-major");
            let mut hits = 0;
            for ((iz, ix), out) in slab.indexed_iter_mut() {
                if let Some(v) = sample_linear(trace, (delay(i, ix, iz) - t0) * fs) {
                    *out = v;
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    if hits == 0 {
        return Err(Error::GridOutsideRecording);
    }
    PixelAlignedRF::new(aligned, *grid)
}

/// Active aperture length `z / f#` in meters.
pub fn aperture_length(z: f64, fnum: f64) -> f64 {
    z / fnum
}

/// Inclusive element range `(first, last)` of the receive aperture for a
/// pixel: every element within `±(z/f#)/2` of `pixel_x`, never empty.
pub fn aperture_for_depth(z: f64, pixel_x: f64, fnum: f64, probe: &ProbeGeometry) -> (usize, usize) {
    const SLACK_M: f64 = 1e-12;
    let pos = probe.positions();
    let half = 0.5 * aperture_length(z, fnum);
    let first = pos.partition_point(|&p| p < pixel_x - half - SLACK_M);
    let end = pos.partition_point(|&p| p <= pixel_x + half + SLACK_M);
    if first < end {
        return (first, end - 1);
    }
    let closest = nearest_element(pos, pixel_x);
    (closest, closest)
}

fn nearest_element(pos: &[f64], x: f64) -> usize {
    let i = pos.partition_point(|&p| p < x);
    match i {
        0 => 0,
        i if i == pos.len() => pos.len() - 1,
        i if (x - pos[i - 1]) <= (pos[i] - x) => i - 1,
        i => i,
    }
}

/// Receive aperture for every pixel of a grid, `nz × nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureMap {
    ranges: Array2<(usize, usize)>,
}

impl ApertureMap {
    pub fn compute(grid: &ImageGrid, fnum: f64, probe: &ProbeGeometry) -> Result<Self> {
        if !(fnum > 0.0) {
            return Err(Error::invalid("f-number", format!("{fnum} is not positive")));
        }
        let ranges = Array2::from_shape_fn(grid.shape(), |(iz, ix)| {
            aperture_for_depth(grid.z(iz), grid.x(ix), fnum, probe)
        });
        Ok(Self { ranges })
    }

    pub fn get(&self, iz: usize, ix: usize) -> (usize, usize) {
        self.ranges[[iz, ix]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: f64 = 1540.0;

    #[test]
    fn tx_distance_examples() {
        assert_eq!(tx_distance(0.0, 0.020, 0.0).unwrap(), 0.020);
        let a = 10f64.to_radians();
        let d = tx_distance(0.005, 0.030, a).unwrap();
        assert!((d - 0.030412473478700).abs() < 1e-15);
        // the listed value is truncated to seven places
        assert!((d - 0.0304124).abs() < 1e-7);
        assert_eq!(tx_distance(-0.005, 0.030, 0.0).unwrap(), 0.030);
        assert!(matches!(tx_distance(0.0, 0.0, 0.0), Err(Error::NonPositiveDepth(_))));
    }

    #[test]
    fn rx_distance_examples() {
        assert_eq!(rx_distance(0.0, 0.020, 0.0).unwrap(), 0.020);
        assert!((rx_distance(0.005, 0.030, -0.005).unwrap() - 0.0316228).abs() < 5e-8);
        assert!((rx_distance(0.003, 0.004, 0.0).unwrap() - 0.005).abs() < 1e-15);
        assert!(rx_distance(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn propagation_delay_examples() {
        let d = propagation_delay(0.0, 0.020, 0.0, 0.0, C).unwrap();
        assert!((d - 2.5974e-5).abs() < 5e-10);
        let d = propagation_delay(0.005, 0.030, -0.005, 10f64.to_radians(), C).unwrap();
        assert!((d - 4.028262992232772e-5).abs() < 1e-18);
        assert!((d - 4.0282e-5).abs() < 1e-9);
        let d1 = propagation_delay(0.001, 0.01, 0.002, 0.1, C).unwrap();
        let d2 = propagation_delay(0.001, 0.01, 0.002, 0.1, 2.0 * C).unwrap();
        assert_eq!(d2, d1 / 2.0);
        assert!(propagation_delay(0.0, 0.01, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn on_axis_delay_is_exactly_two_z_over_c() {
        for &(x, z) in &[(0.0, 0.02), (0.0031, 0.0173), (-0.012, 0.041)] {
            assert_eq!(propagation_delay(x, z, x, 0.0, C).unwrap(), 2.0 * z / C);
        }
    }

    #[test]
    fn interpolation_is_linear_and_zero_outside() {
        let trace = [0.0, 1.0, 3.0];
        assert_eq!(sample_linear(&trace, 0.25), Some(0.25));
        assert_eq!(sample_linear(&trace, 1.5), Some(2.0));
        assert_eq!(sample_linear(&trace, 2.0), Some(3.0));
        assert_eq!(sample_linear(&trace, 2.0001), None);
        assert_eq!(sample_linear(&trace, -1e-9), None);
    }

    #[test]
    fn aperture_examples() {
        let probe = ProbeGeometry::linear(128, 0.3e-3).unwrap();
        assert!((aperture_length(0.028, 1.75) - 0.016).abs() < 1e-15);
        let (a, b) = aperture_for_depth(0.028, 0.0, 1.75, &probe);
        let span = probe.positions()[b] - probe.positions()[a];
        assert!(span <= 0.016 && span + probe.pitch_m() > 0.016);

        let (a, b) = aperture_for_depth(1e-7, 0.0, 1.75, &probe);
        assert_eq!(a, b);
        let (a, b) = aperture_for_depth(1e-7, 0.2e-3, 1.75, &probe);
        assert_eq!((a, b), (64, 64));
        assert_eq!(aperture_for_depth(1.0, 0.0, 1.75, &probe), (0, 127));
        // far outside the array: clipped to the closest element
        assert_eq!(aperture_for_depth(1e-4, 1.0, 1.75, &probe), (127, 127));
    }

    #[test]
    fn aperture_map_matches_pointwise() {
        let probe = ProbeGeometry::linear(16, 0.3e-3).unwrap();
        let grid = ImageGrid::spanning((-3e-3, 3e-3), 1e-3, (1e-3, 5e-3), 1e-3).unwrap();
        let map = ApertureMap::compute(&grid, 1.5, &probe).unwrap();
        for iz in 0..grid.nz() {
            for ix in 0..grid.nx() {
                assert_eq!(map.get(iz, ix), aperture_for_depth(grid.z(iz), grid.x(ix), 1.5, &probe));
            }
        }
        assert!(ApertureMap::compute(&grid, 0.0, &probe).is_err());
    }
}
