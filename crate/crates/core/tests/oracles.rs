//! Independent numerical oracles for derived constants and statistics.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pwbeam::geometry::{align_channels, propagation_delay};
use pwbeam::metrics::{fwhm, gcnr_values, ssnr_values};
use pwbeam::postprocess::envelope;
use pwbeam::simulate::{
    phantom_point_targets, psf_profiles, pulse_envelope, pulse_waveform, synth_channel_data, PsfSpec, PulseSpec,
};
use pwbeam::{AcquisitionParams, BeamformedRF, Extent, ImageGrid, Phantom, ProbeGeometry, Scatterer};

const MM: f64 = 1e-3;

fn desk() -> AcquisitionParams {
    AcquisitionParams {
        sound_speed_mps: 1540.0,
        center_freq_hz: 5.208e6,
        frac_bandwidth: 0.67,
        sampling_freq_hz: 104.16e6,
        steer_angle_rad: 0.0,
    }
}

/// -6 dB full width of the pulse spectrum by a direct DFT of the sampled
/// waveform, independent of the FFT used elsewhere.
#[test]
fn pulse_spectrum_has_the_configured_bandwidth() {
    let params = desk();
    let pulse = PulseSpec::from_params(&params);
    let fs = 500e6;
    let n = 2001;
    let samples: Vec<f64> = (0..n)
        .map(|k| pulse_waveform((k as f64 - 1000.0) / fs, &pulse))
        .collect();
    let magnitude = |f: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, v) in samples.iter().enumerate() {
            let phase = -2.0 * PI * f * (k as f64 - 1000.0) / fs;
            re += v * phase.cos();
            im += v * phase.sin();
        }
        f64::hypot(re, im)
    };
    // bisect the half-amplitude crossings on either side of the peak
    let peak = magnitude(params.center_freq_hz);
    let crossing = |mut inside: f64, mut outside: f64| {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if magnitude(mid) > 0.5 * peak {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };
    let lo = crossing(params.center_freq_hz, 0.5e6);
    let hi = crossing(params.center_freq_hz, 12e6);
    let width = (hi - lo) / params.center_freq_hz;
    assert!((width - 0.67).abs() < 0.67 * 0.01, "-6 dB width {width}");
    let sigma_t = (2.0 * 2f64.ln()).sqrt() / (PI * 0.67 * 5.208e6);
    assert!((pulse.sigma_t() - sigma_t).abs() < 1e-20);
    assert!((sigma_t - 1.074e-7).abs() < 5e-11);
}

#[test]
fn psf_profile_fwhm_matches_the_gaussian_formula() {
    let spec = PsfSpec {
        sigma_lateral_m: 0.2 * MM,
        sigma_axial_m: 0.2 * MM,
    };
    let spacing = 0.01 * MM;
    let (axial, lateral) = psf_profiles(&spec, spacing, spacing).unwrap();
    let analytic = 2.0 * (2.0 * 2f64.ln()).sqrt() * 0.2 * MM;
    for profile in [axial, lateral] {
        let w = fwhm(&profile, spacing).unwrap();
        assert!((w - analytic).abs() < 0.005 * analytic, "{w} vs {analytic}");
        assert!((w - 0.471 * MM).abs() < 0.0005 * MM);
    }
}

#[test]
fn sampled_gaussian_fwhm_at_coarse_spacing() {
    let (sigma, spacing) = (0.2 * MM, 0.02 * MM);
    let profile: Vec<f64> = (0..101)
        .map(|k| {
            let x = (k as f64 - 50.0) * spacing;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let w = fwhm(&profile, spacing).unwrap();
    assert!((w - 0.4710 * MM).abs() < 0.005 * 0.4710 * MM, "{w}");
}

#[test]
fn envelope_of_a_pulse_column_follows_its_analytic_envelope() {
    let params = desk();
    let pulse = PulseSpec::from_params(&params);
    let fs = params.sampling_freq_hz;
    let n = 512;
    let center = 256;
    let rf: Vec<f64> = (0..n)
        .map(|k| pulse_waveform((k as f64 - center as f64) / fs, &pulse))
        .collect();
    let grid = ImageGrid::spanning((0.0, 0.0), 1e-4, (1e-3, 1e-3 + (n - 1) as f64 * 1e-5), 1e-5).unwrap();
    let env = envelope(&BeamformedRF::new(Array2::from_shape_vec((n, 1), rf).unwrap(), grid).unwrap()).unwrap();
    let column: Vec<f64> = env.values().column(0).to_vec();
    let (peak_at, peak) = column
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
    assert!(peak_at.abs_diff(center) <= 1);
    assert!((peak - pulse_envelope(0.0, &pulse)).abs() < 0.02);
    for (k, v) in column.iter().enumerate() {
        let want = pulse_envelope((k as f64 - center as f64) / fs, &pulse);
        assert!((v - want).abs() < 0.02, "sample {k}: {v} vs {want}");
    }
}

fn rayleigh(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    scale * (-2.0 * (1.0 - rng.random::<f64>()).ln()).sqrt()
}

#[test]
fn ssnr_of_rayleigh_speckle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let values: Vec<f64> = (0..100_000).map(|_| rayleigh(&mut rng, 3.0)).collect();
    let s = ssnr_values(&values).unwrap();
    let analytic = (PI / (4.0 - PI)).sqrt();
    assert!((analytic - 1.913).abs() < 5e-4);
    assert!((s - 1.91).abs() <= 0.02, "{s}");
}

#[test]
fn gcnr_matches_analytic_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let n = 100_000;

    // uniform[0,1] vs uniform[0.5,1.5]: overlap integral by the midpoint rule
    let pdf_a = |x: f64| if (0.0..=1.0).contains(&x) { 1.0f64 } else { 0.0 };
    let pdf_b = |x: f64| if (0.5..=1.5).contains(&x) { 1.0 } else { 0.0 };
    let h = 1e-5;
    let overlap: f64 = (0..150_000)
        .map(|k| (k as f64 + 0.5) * h)
        .map(|x| pdf_a(x).min(pdf_b(x)) * h)
        .sum();
    let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
    let g = gcnr_values(&a, &b, 100).unwrap();
    assert!((g - (1.0 - overlap)).abs() <= 0.02, "{g} vs {}", 1.0 - overlap);

    // Rayleigh(s1) vs Rayleigh(s2): closed-form overlap at the density crossing
    let (s1, s2) = (1.0f64, 2.0f64);
    let x2 = 2.0 * (s2 * s2 / (s1 * s1)).ln() / (1.0 / (s1 * s1) - 1.0 / (s2 * s2));
    let cdf = |s: f64| 1.0 - (-x2 / (2.0 * s * s)).exp();
    let ovl = cdf(s2) + (1.0 - cdf(s1));
    let r1: Vec<f64> = (0..n).map(|_| rayleigh(&mut rng, s1)).collect();
    let r2: Vec<f64> = (0..n).map(|_| rayleigh(&mut rng, s2)).collect();
    let g = gcnr_values(&r1, &r2, 100).unwrap();
    assert!((g - (1.0 - ovl)).abs() <= 0.02, "{g} vs {}", 1.0 - ovl);
}

/// Aligned samples against the pulse read from 100x oversampled traces; the
/// error stays within the linear interpolation bound h^2/8 max|f''|.
#[test]
fn alignment_error_is_within_the_interpolation_bound() {
    let probe = ProbeGeometry::linear(16, 0.3 * MM).unwrap();
    let params = desk();
    let pulse = PulseSpec::from_params(&params);
    let extent = Extent::new((-5.0 * MM, 5.0 * MM), (10.0 * MM, 20.0 * MM)).unwrap();
    let phantom = Phantom::new(
        vec![Scatterer {
            x_m: 0.7 * MM,
            z_m: 15.0 * MM,
            amplitude: 1.0,
        }],
        extent,
    )
    .unwrap();
    let grid = ImageGrid::spanning((-MM, 2.0 * MM), 0.1 * MM, (14.5 * MM, 15.5 * MM), 0.013 * MM).unwrap();

    let cube = synth_channel_data(&phantom, &probe, &params, &pulse, 30e-6).unwrap();
    let aligned = align_channels(&cube, &probe, &params, &grid).unwrap();

    let fine = AcquisitionParams {
        sampling_freq_hz: 100.0 * params.sampling_freq_hz,
        ..params
    };
    let oracle = synth_channel_data(&phantom, &probe, &fine, &pulse, 30e-6).unwrap();
    let hf = 1.0 / fine.sampling_freq_hz;
    let curvature = oracle
        .traces()
        .rows()
        .into_iter()
        .flat_map(|r| {
            r.windows(3)
                .into_iter()
                .map(|w| ((w[0] - 2.0 * w[1] + w[2]) / (hf * hf)).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    let h = 1.0 / params.sampling_freq_hz;
    let bound = h * h / 8.0 * curvature;

    let mut worst: f64 = 0.0;
    for (i, &xi) in probe.positions().iter().enumerate() {
        for iz in 0..grid.nz() {
            for ix in 0..grid.nx() {
                let tau = propagation_delay(grid.x(ix), grid.z(iz), xi, 0.0, params.sound_speed_mps).unwrap();
                let k = (tau * fine.sampling_freq_hz).round() as usize;
                let want = oracle.traces()[[i, k]];
                worst = worst.max((aligned.data()[[i, iz, ix]] - want).abs());
            }
        }
    }
    // the oracle's own rounding to the fine grid adds at most h_f max|f'|
    let slope = 2.0 * PI * 5.208e6 * 2.0;
    assert!(worst <= bound + hf * slope, "error {worst}, bound {bound}");
    assert!(worst > 0.0);
}

#[test]
fn point_target_counts_stay_in_range() {
    let extent = Extent::new((-10.0 * MM, 10.0 * MM), (5.0 * MM, 50.0 * MM)).unwrap();
    for seed in 0..200 {
        let p = phantom_point_targets(5..=30, extent, seed).unwrap();
        assert!((5..=30).contains(&p.len()));
        assert!(p.scatterers().iter().all(|s| extent.contains(s.x_m, s.z_m)));
    }
}
