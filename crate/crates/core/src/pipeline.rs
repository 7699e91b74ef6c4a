//! End-to-end workflows shared by the command line and the examples:
//! multi-angle simulation, beamforming by method, UBF conversion of the
//! domain types, training-pair generation and region-based metrics.

use std::path::{Path, PathBuf};

use ndarray::{s, Array2, Array3};

use crate::beamform::{cpwc, das, mv_beamform};
use crate::error::{Error, Result};
use crate::geometry::{align_channels, delay_unchecked};
use crate::metrics::{self, cyst_regions, point_resolution, rect_mask, DEFAULT_GCNR_BINS};
use crate::postprocess::envelope;
use crate::simulate::{
    add_white_noise, ground_truth_image, max_round_trip, phantom_from_image_density, phantom_point_targets,
    resolution_cell, synth_channel_data,
};
use crate::storage::config::RunConfig;
use crate::storage::image_io::load_grayscale;
use crate::storage::tables::{ManifestEntry, MetricsRow};
use crate::storage::ubf::{Metadata, UbfArray};
use crate::types::{
    AcquisitionParams, BeamformedRF, ChannelDataCube, EnvelopeImage, ImageGrid, Phantom, ProbeGeometry, RegionRole,
};

const MM: f64 = 1e-3;

/// Channel data of one or more steered transmissions with their geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub probe: ProbeGeometry,
    /// Acquisition settings; `steer_angle_rad` is ignored in favor of
    /// `angles_rad`.
    pub params: AcquisitionParams,
    pub angles_rad: Vec<f64>,
    pub cubes: Vec<ChannelDataCube>,
}

impl ChannelSet {
    pub fn params_for(&self, k: usize) -> AcquisitionParams {
        self.params.with_angle(self.angles_rad[k])
    }

    /// `angles × elements × samples` container with acquisition metadata.
    pub fn to_ubf(&self) -> Result<UbfArray> {
        let first = self.cubes.first().ok_or(Error::EmptyAngleList)?;
        let (ne, ns) = (first.element_count(), first.n_samples());
        if self
            .cubes
            .iter()
            .any(|c| c.traces().dim() != (ne, ns) || c.t0_s() != first.t0_s())
        {
            return Err(Error::ShapeMismatch("cubes differ in shape or t0".into()));
        }
        let mut data = Vec::with_capacity(self.cubes.len() * ne * ns);
        for c in &self.cubes {
            data.extend(c.traces().iter().map(|&v| v as f32));
        }
        let meta = Metadata::new()
            .with("kind", "channel")
            .with("sound_speed", self.params.sound_speed_mps)
            .with("fs", self.params.sampling_freq_hz)
            .with("f0", self.params.center_freq_hz)
            .with("bandwidth", self.params.frac_bandwidth)
            .with("t0", first.t0_s())
            .with("pitch", self.probe.pitch_m())
            .with("angle", self.angles_rad[0])
            .with("angles", join(&self.angles_rad));
        UbfArray::new(vec![self.cubes.len(), ne, ns], data, meta)
    }

    pub fn from_ubf(array: &UbfArray) -> Result<Self> {
        expect_kind(array, &["channel"])?;
        let m = &array.metadata;
        let data = array.to_array3()?;
        let (na, ne, _) = data.dim();
        let angles = m.f64_list("angles")?;
        if angles.len() != na {
            return Err(Error::MalformedContainer(format!(
                "{} angles listed for {na} transmissions",
                angles.len()
            )));
        }
        let params = AcquisitionParams {
            sound_speed_mps: m.f64("sound_speed")?,
            center_freq_hz: m.f64("f0")?,
            frac_bandwidth: m.f64("bandwidth")?,
            sampling_freq_hz: m.f64("fs")?,
            steer_angle_rad: 0.0,
        };
        params.validate()?;
        let (t0, fs) = (m.f64("t0")?, params.sampling_freq_hz);
        let cubes = data
            .outer_iter()
            .map(|a| ChannelDataCube::new(a.to_owned(), t0, fs))
            .collect::<Result<_>>()?;
        Ok(Self {
            probe: ProbeGeometry::linear(ne, m.f64("pitch")?)?,
            params,
            angles_rad: angles,
            cubes,
        })
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn expect_kind(array: &UbfArray, kinds: &[&str]) -> Result<()> {
    let kind = array.metadata.require("kind")?;
    if kinds.contains(&kind) {
        Ok(())
    } else {
        Err(Error::MalformedContainer(format!(
            "container holds {kind:?} data, expected one of {kinds:?}"
        )))
    }
}

/// Recording length covering every grid pixel and scatterer for every
/// element and angle, plus the pulse tail.
pub fn auto_duration(cfg: &RunConfig, phantom: &Phantom) -> Result<f64> {
    if let Some(us) = cfg.duration_us {
        return Ok(us * 1e-6);
    }
    let probe = cfg.probe()?;
    let grid = cfg.grid()?;
    let corners = [
        (grid.x(0), grid.z(grid.nz() - 1)),
        (grid.x(grid.nx() - 1), grid.z(grid.nz() - 1)),
    ];
    let mut longest: f64 = 0.0;
    for alpha in cfg.angles_rad() {
        let params = cfg.acquisition(alpha)?;
        longest = longest.max(max_round_trip(phantom, &probe, &params));
        for &(x, z) in &corners {
            for &xi in probe.positions() {
                longest = longest.max(delay_unchecked(x, z, xi, alpha, params.sound_speed_mps));
            }
        }
    }
    Ok(longest + 10.0 * cfg.pulse().sigma_t())
}

/// Simulates every configured angle; optional noise uses `seed + angle index`.
pub fn simulate_channel_set(cfg: &RunConfig, phantom: &Phantom) -> Result<ChannelSet> {
    let probe = cfg.probe()?;
    let duration = auto_duration(cfg, phantom)?;
    let angles = cfg.angles_rad();
    let cubes = angles
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let params = cfg.acquisition(alpha)?;
            let cube = synth_channel_data(phantom, &probe, &params, &cfg.pulse(), duration)?;
            match cfg.noise_snr_db {
                Some(snr) => add_white_noise(&cube, snr, cfg.seed.wrapping_add(k as u64)),
                None => Ok(cube),
            }
        })
        .collect::<Result<_>>()?;
    Ok(ChannelSet {
        probe,
        params: cfg.acquisition(0.0)?,
        angles_rad: angles,
        cubes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Das,
    Cpwc,
    Mv,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Das => "das",
            Method::Cpwc => "cpwc",
            Method::Mv => "mv",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "das" => Ok(Method::Das),
            "cpwc" => Ok(Method::Cpwc),
            "mv" => Ok(Method::Mv),
            other => Err(Error::invalid("method", format!("{other:?} is not das, cpwc or mv"))),
        }
    }
}

/// Beamforms a channel set. DAS and MV use the first transmission; CPWC
/// compounds DAS images of all transmissions.
pub fn beamform_set(set: &ChannelSet, method: Method, cfg: &RunConfig, grid: &ImageGrid) -> Result<BeamformedRF> {
    let align = |k: usize| align_channels(&set.cubes[k], &set.probe, &set.params_for(k), grid);
    if set.cubes.is_empty() {
        return Err(Error::EmptyAngleList);
    }
    match method {
        Method::Das => das(&align(0)?, &cfg.apodization(), &set.probe),
        Method::Mv => mv_beamform(&align(0)?, &cfg.mv(), &set.probe),
        Method::Cpwc => {
            let frames = (0..set.cubes.len())
                .map(|k| das(&align(k)?, &cfg.apodization(), &set.probe))
                .collect::<Result<Vec<_>>>()?;
            cpwc(&frames)
        }
    }
}

/// A beamformed or detected image read back from a container.
#[derive(Debug, Clone, PartialEq)]
pub enum GridImage {
    Rf(BeamformedRF),
    Envelope(EnvelopeImage),
}

impl GridImage {
    pub fn to_ubf(&self) -> UbfArray {
        let (kind, values, grid) = match self {
            GridImage::Rf(rf) => ("rf", rf.values(), rf.grid()),
            GridImage::Envelope(env) => ("envelope", env.values(), env.grid()),
        };
        let mut meta = Metadata::new().with("kind", kind);
        meta.set_grid(grid);
        UbfArray::from_array(values, meta)
    }

    pub fn from_ubf(array: &UbfArray) -> Result<Self> {
        expect_kind(array, &["rf", "envelope"])?;
        let grid = array.metadata.grid()?;
        let values = array.to_array2()?;
        match array.metadata.require("kind")? {
            "rf" => Ok(GridImage::Rf(BeamformedRF::new(values, grid)?)),
            _ => Ok(GridImage::Envelope(EnvelopeImage::new(values, grid)?)),
        }
    }

    /// The envelope, detecting it first for RF input.
    pub fn into_envelope(self) -> Result<EnvelopeImage> {
        match self {
            GridImage::Rf(rf) => envelope(&rf),
            GridImage::Envelope(env) => Ok(env),
        }
    }
}

/// Aligned channel data of one transmission as an `element × nz × nx`
/// container.
pub fn aligned_to_ubf(aligned: &Array3<f64>, grid: &ImageGrid) -> UbfArray {
    let mut meta = Metadata::new().with("kind", "aligned");
    meta.set_grid(grid);
    UbfArray::from_array(aligned, meta)
}

/// Image files (`png`, `pgm`, `pnm`) in a directory, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "pnm"))
                .unwrap_or(false)
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Contiguous row ranges splitting `n` rows into `parts` near-equal patches.
pub fn patch_rows(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|k| {
            let len = base + usize::from(k < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .filter(|r| !r.is_empty())
        .collect()
}

/// Phantom for training pair `index`: image-weighted speckle for the first
/// pairs, random point targets for the last `point_fraction` of them.
pub fn dataset_phantom(cfg: &RunConfig, images: &[PathBuf], index: usize, count: usize) -> Result<Phantom> {
    let extent = cfg.phantom_extent()?;
    let seed = cfg.seed.wrapping_add(index as u64);
    let n_points = (count as f64 * cfg.point_fraction).round() as usize;
    if index >= count - n_points.min(count) {
        return phantom_point_targets(cfg.point_count_min..=cfg.point_count_max, extent, seed);
    }
    if images.is_empty() {
        return Err(Error::invalid("image directory", "contains no png/pgm images"));
    }
    let image = load_grayscale(&images[index % images.len()])?;
    let params = cfg.acquisition(0.0)?;
    let cell = resolution_cell(&params, &cfg.probe()?, &extent);
    phantom_from_image_density(&image, extent, cfg.scatterer_density, cell, seed)
}

/// Generates `count` training pairs into `out_dir`: normalized, aligned
/// channel data of the first configured angle as input and the ground-truth
/// envelope as target, each split axially into `cfg.patches` patches.
pub fn generate_dataset(
    cfg: &RunConfig,
    images_dir: &Path,
    count: usize,
    out_dir: &Path,
) -> Result<Vec<ManifestEntry>> {
    use crate::storage::ubf::ubf_write_array;
    use crate::types::normalize_channel_data;

    let images = list_images(images_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let grid = cfg.grid()?;
    let probe = cfg.probe()?;
    let alpha = cfg.angles_rad()[0];
    let params = cfg.acquisition(alpha)?;
    let single_angle = RunConfig {
        angles_deg: vec![cfg.angles_deg[0]],
        ..cfg.clone()
    };
    let mut entries = Vec::new();
    for index in 0..count {
        let phantom = dataset_phantom(cfg, &images, index, count)?;
        let duration = auto_duration(&single_angle, &phantom)?;
        let cube = synth_channel_data(&phantom, &probe, &params, &cfg.pulse(), duration)?;
        let cube = match normalize_channel_data(&cube) {
            Ok(c) => c,
            Err(Error::AllZeroData) => cube,
            Err(e) => return Err(e),
        };
        let aligned = align_channels(&cube, &probe, &params, &grid)?;
        let truth = ground_truth_image(&phantom, &cfg.psf(), &grid)?;
        for (patch, rows) in patch_rows(grid.nz(), cfg.patches).into_iter().enumerate() {
            let patch_grid = grid.rows(rows.clone())?;
            let input = aligned.data().slice(s![.., rows.clone(), ..]).to_owned();
            let target: Array2<f64> = truth.values().slice(s![rows, ..]).to_owned();
            let input_name = PathBuf::from(format!("pair_{index:05}_p{patch}_input.ubf"));
            let target_name = PathBuf::from(format!("pair_{index:05}_p{patch}_target.ubf"));
            ubf_write_array(&out_dir.join(&input_name), &aligned_to_ubf(&input, &patch_grid))?;
            let target = GridImage::Envelope(EnvelopeImage::new(target, patch_grid)?);
            ubf_write_array(&out_dir.join(&target_name), &target.to_ubf())?;
            entries.push(ManifestEntry {
                input_path: input_name,
                target_path: target_name,
                phantom_id: index,
                patch,
            });
        }
    }
    Ok(entries)
}

/// Regions for the `metrics` command, read from a `key = value` file with
/// millimeter coordinates. Point keys enable FWHM, cyst keys enable SSNR, CR
/// and gCNR; a background rectangle alone enables SSNR.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub dataset_id: String,
    pub method: String,
    pub point_mm: Option<(f64, f64)>,
    pub point_half_window_mm: f64,
    pub cyst_mm: Option<(f64, f64, f64)>,
    pub background_rect_mm: Option<(f64, f64, f64, f64)>,
    pub gcnr_bins: usize,
}

impl Default for RegionSpec {
    fn default() -> Self {
        Self {
            dataset_id: String::new(),
            method: String::new(),
            point_mm: None,
            point_half_window_mm: 1.0,
            cyst_mm: None,
            background_rect_mm: None,
            gcnr_bins: DEFAULT_GCNR_BINS,
        }
    }
}

impl RegionSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut values = std::collections::BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| Error::Config {
                path: origin.to_owned(),
                line: n + 1,
                reason,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "dataset_id" => spec.dataset_id = v.to_owned(),
                "method" => spec.method = v.to_owned(),
                "gcnr_bins" => spec.gcnr_bins = v.parse().map_err(|_| err(format!("bad bin count {v:?}")))?,
                "point_x_mm"
                | "point_z_mm"
                | "point_half_window_mm"
                | "cyst_x_mm"
                | "cyst_z_mm"
                | "cyst_radius_mm"
                | "background_x_min_mm"
                | "background_x_max_mm"
                | "background_z_min_mm"
                | "background_z_max_mm" => {
                    let x: f64 = v.parse().map_err(|_| err(format!("{k} = {v:?} is not a number")))?;
                    values.insert(k, x);
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let get = |k: &str| values.get(k).copied();
        let incomplete = |what: &str| Error::Config {
            path: origin.to_owned(),
            line: 0,
            reason: format!("incomplete {what} specification"),
        };
        if let Some(w) = get("point_half_window_mm") {
            spec.point_half_window_mm = w;
        }
        spec.point_mm = match (get("point_x_mm"), get("point_z_mm")) {
            (Some(x), Some(z)) => Some((x, z)),
            (None, None) => None,
            _ => return Err(incomplete("point")),
        };
        spec.cyst_mm = match (get("cyst_x_mm"), get("cyst_z_mm"), get("cyst_radius_mm")) {
            (Some(x), Some(z), Some(r)) => Some((x, z, r)),
            (None, None, None) => None,
            _ => return Err(incomplete("cyst")),
        };
        spec.background_rect_mm = match (
            get("background_x_min_mm"),
            get("background_x_max_mm"),
            get("background_z_min_mm"),
            get("background_z_max_mm"),
        ) {
            (Some(a), Some(b), Some(c), Some(d)) => Some((a, b, c, d)),
            (None, None, None, None) => None,
            _ => return Err(incomplete("background rectangle")),
        };
        Ok(spec)
    }
}

/// Evaluates every metric the region spec enables.
pub fn compute_metrics(env: &EnvelopeImage, spec: &RegionSpec) -> Result<MetricsRow> {
    let grid = *env.grid();
    let mut row = MetricsRow {
        dataset_id: spec.dataset_id.clone(),
        method: spec.method.clone(),
        ..Default::default()
    };
    if let Some((x, z)) = spec.point_mm {
        let w = spec.point_half_window_mm * MM;
        let (x, z) = (x * MM, z * MM);
        let window = clamp_window(&grid, (x - w, z - w), (x + w, z + w))
            .ok_or_else(|| Error::invalid("point window", "does not overlap the image"))?;
        let res = point_resolution(env, Some(window))?;
        row.fwhm_a_mm = Some(res.axial_m / MM);
        row.fwhm_l_mm = Some(res.lateral_m / MM);
    }
    let background = match (spec.cyst_mm, spec.background_rect_mm) {
        (Some((x, z, r)), _) => {
            let (roi, bg) = cyst_regions(&grid, x * MM, z * MM, r * MM)?;
            row.cr_db = Some(metrics::cr(env, &roi, &bg)?);
            row.gcnr = Some(metrics::gcnr(env, &roi, &bg, spec.gcnr_bins)?);
            Some(bg)
        }
        (None, Some((x0, x1, z0, z1))) => Some(rect_mask(
            &grid,
            (x0 * MM, x1 * MM),
            (z0 * MM, z1 * MM),
            RegionRole::Background,
        )?),
        (None, None) => None,
    };
    if let Some(bg) = background {
        row.ssnr = Some(metrics::ssnr(env, &bg)?);
    }
    Ok(row)
}

/// Pixel box `(iz0, iz1, ix0, ix1)` of the rectangle clipped to the grid.
fn clamp_window(grid: &ImageGrid, lo: (f64, f64), hi: (f64, f64)) -> Option<(usize, usize, usize, usize)> {
    let index = |axis: crate::types::Axis, v: f64| -> usize {
        (((v - axis.start) / axis.step).round().max(0.0) as usize).min(axis.len - 1)
    };
    let (xa, za) = (grid.x_axis(), grid.z_axis());
    let outside = |axis: crate::types::Axis, a: f64, b: f64| b < axis.start || a > axis.last();
    if outside(xa, lo.0, hi.0) || outside(za, lo.1, hi.1) {
        return None;
    }
    let (ix0, ix1) = (index(xa, lo.0), index(xa, hi.0));
    let (iz0, iz1) = (index(za, lo.1), index(za, hi.1));
    (ix0 <= ix1 && iz0 <= iz1).then_some((iz0, iz1, ix0, ix1))
}
