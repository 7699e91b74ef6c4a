//! Phantom generation, single-scattering plane-wave channel data and the
//! ideal-PSF ground truth image.
//!
//! The channel-data model is deliberately simple: every scatterer returns a
//! delayed copy of the transmit pulse, with no attenuation, no element
//! directivity and no multiple scattering. The ground truth is the scatterer
//! field convolved with a sharp Gaussian PSF, in the envelope domain.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::delay_unchecked;
use crate::types::{
    AcquisitionParams, ChannelDataCube, EnvelopeImage, Extent, ImageGrid, Phantom, ProbeGeometry, Scatterer,
};

/// Pulse support used when synthesizing traces, in units of `sigma_t`.
/// Beyond it the envelope is below 1.3e-14.
const PULSE_SUPPORT_SIGMAS: f64 = 8.0;

/// Gaussian-modulated cosine transmit pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub center_freq_hz: f64,
    /// -6 dB fractional bandwidth.
    pub frac_bandwidth: f64,
}

impl PulseSpec {
    pub fn from_params(params: &AcquisitionParams) -> Self {
        Self {
            center_freq_hz: params.center_freq_hz,
            frac_bandwidth: params.frac_bandwidth,
        }
    }

    /// Envelope standard deviation that puts the -6 dB spectral full width
    /// at `b · f0`.
    pub fn sigma_t(&self) -> f64 {
        (2.0 * std::f64::consts::LN_2).sqrt() / (std::f64::consts::PI * self.frac_bandwidth * self.center_freq_hz)
    }

    fn validate(&self) -> Result<()> {
        if !(self.center_freq_hz > 0.0 && self.frac_bandwidth > 0.0) {
            return Err(Error::invalid("pulse", "frequency and bandwidth must be positive"));
        }
        Ok(())
    }
}

pub fn pulse_waveform(t: f64, spec: &PulseSpec) -> f64 {
    let s = spec.sigma_t();
    (-t * t / (2.0 * s * s)).exp() * (2.0 * std::f64::consts::PI * spec.center_freq_hz * t).cos()
}

/// Analytic envelope of [`pulse_waveform`].
pub fn pulse_envelope(t: f64, spec: &PulseSpec) -> f64 {
    let s = spec.sigma_t();
    (-t * t / (2.0 * s * s)).exp()
}

/// Diffraction-limited resolution cell `(axial, lateral)` in meters:
/// `c / (2 b f0)` axially and `lambda z_mid / D` laterally.
pub fn resolution_cell(params: &AcquisitionParams, probe: &ProbeGeometry, extent: &Extent) -> (f64, f64) {
    let axial = params.sound_speed_mps / (2.0 * params.frac_bandwidth * params.center_freq_hz);
    let lateral = params.wavelength_m() * extent.z_mid() / probe.aperture_m();
    (axial, lateral)
}

/// Number of scatterers for `density` scatterers per resolution cell.
pub fn scatterer_count(density: f64, extent: &Extent, cell_m: (f64, f64)) -> usize {
    (density * extent.area() / (cell_m.0 * cell_m.1)).round() as usize
}

/// Bilinear interpolation of `image` (rows along z, columns along x) at a
/// point of `extent`; image corners map onto extent corners.
pub fn bilinear_sample(image: &Array2<f64>, extent: &Extent, x_m: f64, z_m: f64) -> f64 {
    let (rows, cols) = image.dim();
    let frac_pos = |v: f64, lo: f64, span: f64, n: usize| -> (usize, usize, f64) {
        if n == 1 {
            return (0, 0, 0.0);
        }
        let p = ((v - lo) / span * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let k = (p.floor() as usize).min(n - 2);
        (k, k + 1, p - k as f64)
    };
    let (c0, c1, fx) = frac_pos(x_m, extent.x_min_m, extent.width(), cols);
    let (r0, r1, fz) = frac_pos(z_m, extent.z_min_m, extent.depth(), rows);
    let top = image[[r0, c0]] * (1.0 - fx) + image[[r0, c1]] * fx;
    let bottom = image[[r1, c0]] * (1.0 - fx) + image[[r1, c1]] * fx;
    top * (1.0 - fz) + bottom * fz
}

/// Speckle phantom whose echogenicity follows a grayscale image.
///
/// `scatterer_count` positions are drawn uniformly in `extent`; each
/// amplitude is a standard-normal draw weighted by the image intensity at
/// that position. Deterministic for a given seed.
pub fn phantom_from_image(image: &Array2<f64>, extent: Extent, scatterer_count: usize, seed: u64) -> Result<Phantom> {
    if !(extent.width() > 0.0 && extent.depth() > 0.0) {
        return Err(Error::EmptyExtent);
    }
    if image.is_empty() {
        return Err(Error::invalid("phantom image", "image has no pixels"));
    }
    if image.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("phantom image", "intensities must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scatterers = (0..scatterer_count)
        .map(|_| {
            let (x, z) = uniform_point(&mut rng, &extent);
            let g: f64 = StandardNormal.sample(&mut rng);
            Scatterer {
                x_m: x,
                z_m: z,
                amplitude: g * bilinear_sample(image, &extent, x, z),
            }
        })
        .collect();
    Phantom::new(scatterers, extent)
}

/// [`phantom_from_image`] with the count derived from a density per
/// resolution cell.
pub fn phantom_from_image_density(
    image: &Array2<f64>,
    extent: Extent,
    density: f64,
    cell_m: (f64, f64),
    seed: u64,
) -> Result<Phantom> {
    if !(density > 0.0) {
        return Err(Error::invalid(
            "scatterer density",
            format!("{density} is not positive"),
        ));
    }
    phantom_from_image(image, extent, scatterer_count(density, &extent, cell_m), seed)
}

fn uniform_point(rng: &mut ChaCha8Rng, extent: &Extent) -> (f64, f64) {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    (extent.x_min_m + u * extent.width(), extent.z_min_m + v * extent.depth())
}

/// Unit-amplitude point targets on an anechoic background; the count is
/// drawn uniformly from `count_range`.
pub fn phantom_point_targets(
    count_range: std::ops::RangeInclusive<usize>,
    extent: Extent,
    seed: u64,
) -> Result<Phantom> {
    if count_range.is_empty() {
        return Err(Error::invalid("point target count", "range is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(count_range);
    let scatterers = (0..count)
        .map(|_| {
            let (x, z) = uniform_point(&mut rng, &extent);
            Scatterer {
                x_m: x,
                z_m: z,
                amplitude: 1.0,
            }
        })
        .collect();
    Phantom::new(scatterers, extent)
}

/// Speckle phantom with circular anechoic inclusions `(x, z, radius)`.
pub fn phantom_with_cysts(
    extent: Extent,
    scatterer_count: usize,
    cysts: &[(f64, f64, f64)],
    seed: u64,
) -> Result<Phantom> {
    let all = phantom_from_image(&Array2::ones((1, 1)), extent, scatterer_count, seed)?;
    let kept = all
        .scatterers()
        .iter()
        .filter(|s| {
            cysts
                .iter()
                .all(|&(cx, cz, r)| (s.x_m - cx).powi(2) + (s.z_m - cz).powi(2) > r * r)
        })
        .copied()
        .collect();
    Phantom::new(kept, extent)
}

/// Round-trip time of the farthest scatterer over all elements.
pub fn max_round_trip(phantom: &Phantom, probe: &ProbeGeometry, params: &AcquisitionParams) -> f64 {
    let (alpha, c) = (params.steer_angle_rad, params.sound_speed_mps);
    phantom
        .scatterers()
        .iter()
        .flat_map(|s| {
            probe
                .positions()
                .iter()
                .map(move |&xi| delay_unchecked(s.x_m, s.z_m, xi, alpha, c))
        })
        .fold(0.0, f64::max)
}

/// Single-scattering plane-wave echo traces:
/// `trace_i(t) = sum_k a_k p(t - tau(x_k, z_k, x_i))`, sampled from `t0 = 0`.
pub fn synth_channel_data(
    phantom: &Phantom,
    probe: &ProbeGeometry,
    params: &AcquisitionParams,
    pulse: &PulseSpec,
    duration_s: f64,
) -> Result<ChannelDataCube> {
    params.validate()?;
    pulse.validate()?;
    if let Some(s) = phantom.scatterers().iter().find(|s| s.z_m <= 0.0) {
        return Err(Error::NonPositiveDepth(s.z_m));
    }
    let required = max_round_trip(phantom, probe, params);
    if !(duration_s >= required) {
        return Err(Error::DurationTooShort {
            required,
            available: duration_s,
        });
    }
    let fs = params.sampling_freq_hz;
    let n_samples = (duration_s * fs).floor() as usize + 1;
    let support = PULSE_SUPPORT_SIGMAS * pulse.sigma_t();
    let (alpha, c) = (params.steer_angle_rad, params.sound_speed_mps);

    let mut traces = Array2::<f64>::zeros((probe.element_count(), n_samples));
    traces
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(probe.positions().par_iter())
        .for_each(|(mut trace, &xi)| {
            let trace = trace.as_slice_mut().expect("rows are contiguous");
            for s in phantom.scatterers() {
                if s.amplitude == 0.0 {
                    continue;
                }
                let tau = delay_unchecked(s.x_m, s.z_m, xi, alpha, c);
                let first = ((tau - support) * fs).ceil().max(0.0) as usize;
                let last = (((tau + support) * fs).floor() as usize).min(n_samples - 1);
                for (n, v) in trace.iter_mut().enumerate().take(last + 1).skip(first) {
                    *v += s.amplitude * pulse_waveform(n as f64 / fs - tau, pulse);
                }
            }
        });
    ChannelDataCube::new(traces, 0.0, fs)
}

/// Adds white Gaussian noise at `snr_db` relative to the cube's RMS.
pub fn add_white_noise(cube: &ChannelDataCube, snr_db: f64, seed: u64) -> Result<ChannelDataCube> {
    let traces = cube.traces();
    let rms = (traces.iter().map(|v| v * v).sum::<f64>() / traces.len() as f64).sqrt();
    let sigma = rms / 10f64.powf(snr_db / 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = traces.mapv(|v| {
        let n: f64 = StandardNormal.sample(&mut rng);
        v + sigma * n
    });
    ChannelDataCube::new(noisy, cube.t0_s(), cube.sampling_freq_hz())
}

/// Gaussian PSF widths (standard deviations, meters) of the ideal imaging
/// system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsfSpec {
    pub sigma_lateral_m: f64,
    pub sigma_axial_m: f64,
}

impl Default for PsfSpec {
    fn default() -> Self {
        Self {
            sigma_lateral_m: 0.1e-3,
            sigma_axial_m: 0.1e-3,
        }
    }
}

/// Kernel truncation, in standard deviations.
pub const PSF_SUPPORT_SIGMAS: f64 = 4.0;

fn gaussian_profile(sigma: f64, spacing: f64) -> Vec<f64> {
    let half = (PSF_SUPPORT_SIGMAS * sigma / spacing + 1e-9).floor() as i64;
    (-half..=half)
        .map(|k| {
            let d = k as f64 * spacing;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// Separable factors `(axial, lateral)` of [`ideal_psf`].
pub fn psf_profiles(spec: &PsfSpec, dx_m: f64, dz_m: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(spec.sigma_lateral_m > 0.0 && spec.sigma_axial_m > 0.0) {
        return Err(Error::invalid("PSF", "sigma must be positive"));
    }
    if dx_m > spec.sigma_lateral_m / 2.0 {
        return Err(Error::UndersampledPsf {
            spacing: dx_m,
            sigma: spec.sigma_lateral_m,
        });
    }
    if dz_m > spec.sigma_axial_m / 2.0 {
        return Err(Error::UndersampledPsf {
            spacing: dz_m,
            sigma: spec.sigma_axial_m,
        });
    }
    Ok((
        gaussian_profile(spec.sigma_axial_m, dz_m),
        gaussian_profile(spec.sigma_lateral_m, dx_m),
    ))
}

/// Sampled Gaussian PSF, `axial × lateral`, peak 1 at the center, truncated
/// at 4 sigma.
pub fn ideal_psf(spec: &PsfSpec, dx_m: f64, dz_m: f64) -> Result<Array2<f64>> {
    let (pz, px) = psf_profiles(spec, dx_m, dz_m)?;
    Ok(Array2::from_shape_fn((pz.len(), px.len()), |(i, j)| pz[i] * px[j]))
}

/// How scatterers are deposited onto the grid before convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Deposit {
    #[default]
    Nearest,
    Bilinear,
}

/// Ideal image of a phantom, in `[0, 1]` with max 1 (all zero for an empty
/// or fully anechoic phantom).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthImage {
    values: Array2<f64>,
    grid: ImageGrid,
}

impl GroundTruthImage {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn to_envelope(&self) -> EnvelopeImage {
        EnvelopeImage::new(self.values.clone(), self.grid).expect("ground truth is non-negative")
    }
}

/// Scatterer magnitudes deposited on the grid and convolved with the ideal
/// PSF (zero-padded borders), then normalized to a unit maximum. No noise
/// term.
pub fn ground_truth_image(phantom: &Phantom, psf: &PsfSpec, grid: &ImageGrid) -> Result<GroundTruthImage> {
    ground_truth_image_with(phantom, psf, grid, Deposit::Nearest)
}

pub fn ground_truth_image_with(
    phantom: &Phantom,
    psf: &PsfSpec,
    grid: &ImageGrid,
    deposit: Deposit,
) -> Result<GroundTruthImage> {
    let (pz, px) = psf_profiles(psf, grid.dx(), grid.dz())?;
    let reflectivity = rasterize(phantom, grid, deposit);
    let lateral = convolve_axis(&reflectivity, &px, Axis(1));
    let mut image = convolve_axis(&lateral, &pz, Axis(0));
    image.mapv_inplace(f64::abs);
    let peak = image.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        image.mapv_inplace(|v| v / peak);
    }
    Ok(GroundTruthImage {
        values: image,
        grid: *grid,
    })
}

fn rasterize(phantom: &Phantom, grid: &ImageGrid, deposit: Deposit) -> Array2<f64> {
    let mut r = Array2::<f64>::zeros(grid.shape());
    let (xa, za) = (grid.x_axis(), grid.z_axis());
    for s in phantom.scatterers() {
        let a = s.amplitude.abs();
        match deposit {
            Deposit::Nearest => {
                if let Some(idx) = grid.pixel_of(s.x_m, s.z_m) {
                    r[idx] += a;
                }
            }
            Deposit::Bilinear => {
                let u = (s.x_m - xa.start) / xa.step;
                let v = (s.z_m - za.start) / za.step;
                let (i0, j0) = (v.floor(), u.floor());
                let (fv, fu) = (v - i0, u - j0);
                for (di, wi) in [(0, 1.0 - fv), (1, fv)] {
                    for (dj, wj) in [(0, 1.0 - fu), (1, fu)] {
                        let (i, j) = (i0 as i64 + di, j0 as i64 + dj);
                        if i >= 0 && j >= 0 && (i as usize) < grid.nz() && (j as usize) < grid.nx() {
                            r[[i as usize, j as usize]] += a * wi * wj;
                        }
                    }
                }
            }
        }
    }
    r
}

/// Zero-padded "same" convolution of every lane along `axis` with an
/// odd-length, centered kernel.
fn convolve_axis(input: &Array2<f64>, kernel: &[f64], axis: Axis) -> Array2<f64> {
    let half = (kernel.len() / 2) as i64;
    let mut out = Array2::<f64>::zeros(input.dim());
    out.lanes_mut(axis)
        .into_iter()
        .zip(input.lanes(axis))
        .for_each(|(mut dst, src)| {
            let n = src.len() as i64;
            for (i, d) in dst.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &w) in kernel.iter().enumerate() {
                    let j = i as i64 + k as i64 - half;
                    if (0..n).contains(&j) {
                        acc += w * src[j as usize];
                    }
                }
                *d = acc;
            }
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_params() -> AcquisitionParams {
        AcquisitionParams {
            sound_speed_mps: 1540.0,
            center_freq_hz: 5.208e6,
            frac_bandwidth: 0.67,
            sampling_freq_hz: 20.0 * 5.208e6,
            steer_angle_rad: 0.0,
        }
    }

    #[test]
    fn pulse_peak_and_decay() {
        let spec = PulseSpec::from_params(&desk_params());
        assert_eq!(pulse_waveform(0.0, &spec), 1.0);
        assert!((spec.sigma_t() - 1.074e-7).abs() < 5e-11);
        let s = spec.sigma_t();
        assert!(pulse_waveform(8.0 * s, &spec).abs() < 1e-13);
        assert!(pulse_waveform(-8.0 * s, &spec).abs() < 1e-13);
    }

    #[test]
    fn white_and_black_images_weight_amplitudes() {
        let extent = Extent::new((-1e-3, 1e-3), (5e-3, 7e-3)).unwrap();
        let white = phantom_from_image(&Array2::ones((4, 4)), extent, 50, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for s in white.scatterers() {
            let _: f64 = rng.random();
            let _: f64 = rng.random();
            let g: f64 = StandardNormal.sample(&mut rng);
            assert_eq!(s.amplitude, g);
        }
        let black = phantom_from_image(&Array2::zeros((4, 4)), extent, 50, 7).unwrap();
        assert!(black.scatterers().iter().all(|s| s.amplitude == 0.0));
        assert!(matches!(
            phantom_from_image_density(&Array2::ones((2, 2)), extent, 0.0, (1e-4, 1e-4), 1),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn bilinear_sampling_interpolates_corners() {
        let extent = Extent::new((0.0, 1.0), (1.0, 2.0)).unwrap();
        let img = ndarray::array![[0.0, 1.0], [2.0, 3.0]];
        assert_eq!(bilinear_sample(&img, &extent, 0.0, 1.0), 0.0);
        assert_eq!(bilinear_sample(&img, &extent, 1.0, 2.0), 3.0);
        assert!((bilinear_sample(&img, &extent, 0.5, 1.5) - 1.5).abs() < 1e-15);
        assert!((bilinear_sample(&img, &extent, 0.25, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn full_scale_scatterer_count() {
        let params = desk_params();
        let probe = ProbeGeometry::linear(128, 0.3e-3).unwrap();
        let extent = Extent::new((-10e-3, 10e-3), (5e-3, 50e-3)).unwrap();
        let (ax, lat) = resolution_cell(&params, &probe, &extent);
        assert!((ax - 1540.0 / (2.0 * 0.67 * 5.208e6)).abs() < 1e-15);
        assert!((lat - 1540.0 / 5.208e6 * 27.5e-3 / 38.4e-3).abs() < 1e-15);
        let n = scatterer_count(60.0, &extent, (ax, lat));
        let cells = 20e-3 * 45e-3 / (ax * lat);
        assert_eq!(n, (60.0 * cells).round() as usize);
    }

    #[test]
    fn point_targets_respect_range_and_seed() {
        let extent = Extent::new((-5e-3, 5e-3), (5e-3, 25e-3)).unwrap();
        assert_eq!(phantom_point_targets(1..=1, extent, 3).unwrap().len(), 1);
        for seed in 0..50 {
            let p = phantom_point_targets(5..=30, extent, seed).unwrap();
            assert!((5..=30).contains(&p.len()));
            assert!(p.scatterers().iter().all(|s| s.amplitude == 1.0));
            assert_eq!(p, phantom_point_targets(5..=30, extent, seed).unwrap());
        }
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 3..=2;
        assert!(phantom_point_targets(empty, extent, 0).is_err());
    }

    #[test]
    fn echo_arrives_at_round_trip_time() {
        let params = desk_params();
        let pulse = PulseSpec::from_params(&params);
        let probe = ProbeGeometry::with_pitch(vec![0.0, 0.010], 0.010).unwrap();
        let extent = Extent::new((-1e-3, 1e-3), (10e-3, 40e-3)).unwrap();
        let phantom = Phantom::new(
            vec![Scatterer {
                x_m: 0.0,
                z_m: 0.030,
                amplitude: 1.0,
            }],
            extent,
        )
        .unwrap();
        let cube = synth_channel_data(&phantom, &probe, &params, &pulse, 50e-6).unwrap();
        let fs = params.sampling_freq_hz;
        let argmax = |row: usize| {
            let t = cube.traces().row(row);
            (0..t.len()).max_by(|&a, &b| t[a].total_cmp(&t[b])).unwrap() as f64 / fs
        };
        assert!((argmax(0) - 2.0 * 0.030 / 1540.0).abs() <= 0.5 / fs);
        let expected = (0.030 + (0.010f64.powi(2) + 0.030f64.powi(2)).sqrt()) / 1540.0;
        assert!((expected - 4.0015e-5).abs() < 5e-10);
        assert!((argmax(1) - expected).abs() <= 0.5 / fs);

        assert!(matches!(
            synth_channel_data(&phantom, &probe, &params, &pulse, 30e-6),
            Err(Error::DurationTooShort { .. })
        ));
    }

    #[test]
    fn empty_phantom_gives_silent_traces() {
        let params = desk_params();
        let probe = ProbeGeometry::linear(4, 0.3e-3).unwrap();
        let extent = Extent::new((-1e-3, 1e-3), (10e-3, 20e-3)).unwrap();
        let phantom = Phantom::new(vec![], extent).unwrap();
        let cube = synth_channel_data(&phantom, &probe, &params, &PulseSpec::from_params(&params), 1e-5).unwrap();
        assert!(cube.traces().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn psf_kernel_shape_and_sampling() {
        let spec = PsfSpec::default();
        let k = ideal_psf(&spec, 0.025e-3, 0.025e-3).unwrap();
        assert_eq!(k.dim(), (33, 33));
        assert_eq!(k[[16, 16]], 1.0);
        for i in 0..33 {
            for j in 0..33 {
                assert_eq!(k[[i, j]], k[[32 - i, j]]);
                assert_eq!(k[[i, j]], k[[i, 32 - j]]);
            }
        }
        assert!(matches!(
            ideal_psf(&spec, 0.06e-3, 0.025e-3),
            Err(Error::UndersampledPsf { .. })
        ));
    }

    #[test]
    fn separated_scatterers_give_unit_peaks() {
        let grid = ImageGrid::spanning((-2e-3, 2e-3), 0.05e-3, (5e-3, 7e-3), 0.025e-3).unwrap();
        let extent = Extent::new((-2e-3, 2e-3), (5e-3, 7e-3)).unwrap();
        let phantom = Phantom::new(
            vec![
                Scatterer {
                    x_m: -1e-3,
                    z_m: 6e-3,
                    amplitude: 1.0,
                },
                Scatterer {
                    x_m: 1e-3,
                    z_m: 6e-3,
                    amplitude: -1.0,
                },
            ],
            extent,
        )
        .unwrap();
        let gt = ground_truth_image(&phantom, &PsfSpec::default(), &grid).unwrap();
        let (a, b) = (grid.pixel_of(-1e-3, 6e-3).unwrap(), grid.pixel_of(1e-3, 6e-3).unwrap());
        assert_eq!(gt.values()[a], 1.0);
        assert_eq!(gt.values()[b], 1.0);
        assert_eq!(gt.values()[grid.pixel_of(0.0, 6e-3).unwrap()], 0.0);
    }

    #[test]
    fn bilinear_deposit_conserves_mass() {
        let grid = ImageGrid::spanning((-1e-3, 1e-3), 0.05e-3, (5e-3, 6e-3), 0.025e-3).unwrap();
        let extent = Extent::new((-1e-3, 1e-3), (5e-3, 6e-3)).unwrap();
        let phantom = Phantom::new(
            vec![Scatterer {
                x_m: 0.013e-3,
                z_m: 5.51e-3,
                amplitude: 2.0,
            }],
            extent,
        )
        .unwrap();
        let r = rasterize(&phantom, &grid, Deposit::Bilinear);
        assert!((r.sum() - 2.0).abs() < 1e-12);
    }
}
