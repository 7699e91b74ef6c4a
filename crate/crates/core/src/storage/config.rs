//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Every key has a
//! default; unknown keys are rejected so typos do not pass silently. Lengths
//! are given in millimeters and frequencies in megahertz, and converted to SI
//! by the accessor methods.

use std::fmt::Write as _;
use std::path::Path;

use crate::beamform::{ApodizationSpec, MvConfig, WindowKind};
use crate::error::{Error, Result};
use crate::simulate::{PsfSpec, PulseSpec};
use crate::types::{AcquisitionParams, Extent, ImageGrid, ProbeGeometry};

const MM: f64 = 1e-3;
const MHZ: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub element_count: usize,
    pub pitch_mm: f64,
    pub sound_speed_mps: f64,
    pub center_freq_mhz: f64,
    pub frac_bandwidth: f64,
    pub sampling_freq_mhz: f64,
    pub angles_deg: Vec<f64>,
    pub x_min_mm: f64,
    pub x_max_mm: f64,
    pub dx_mm: f64,
    pub z_min_mm: f64,
    pub z_max_mm: f64,
    pub dz_mm: f64,
    pub apod_window: WindowKind,
    pub fnum: f64,
    pub mv_subaperture: Option<usize>,
    pub mv_diagonal_loading: Option<f64>,
    pub mv_forward_backward: bool,
    /// Axial half-length of MV covariance averaging; 0 uses one sample.
    pub mv_temporal_half_window_mm: f64,
    pub psf_sigma_lateral_mm: f64,
    pub psf_sigma_axial_mm: f64,
    pub phantom_x_min_mm: f64,
    pub phantom_x_max_mm: f64,
    pub phantom_z_min_mm: f64,
    pub phantom_z_max_mm: f64,
    pub scatterer_density: f64,
    pub point_count_min: usize,
    pub point_count_max: usize,
    pub point_fraction: f64,
    pub patches: usize,
    /// Recording length; `None` covers the farthest grid pixel.
    pub duration_us: Option<f64>,
    pub noise_snr_db: Option<f64>,
    pub dynamic_range_db: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            element_count: 128,
            pitch_mm: 0.3,
            sound_speed_mps: 1540.0,
            center_freq_mhz: 5.208,
            frac_bandwidth: 0.67,
            sampling_freq_mhz: 104.16,
            angles_deg: vec![0.0],
            x_min_mm: -10.0,
            x_max_mm: 10.0,
            dx_mm: 0.05,
            z_min_mm: 5.0,
            z_max_mm: 50.0,
            dz_mm: 0.025,
            apod_window: WindowKind::Boxcar,
            fnum: 1.75,
            mv_subaperture: None,
            mv_diagonal_loading: None,
            mv_forward_backward: false,
            mv_temporal_half_window_mm: 0.0,
            psf_sigma_lateral_mm: 0.1,
            psf_sigma_axial_mm: 0.1,
            phantom_x_min_mm: -10.0,
            phantom_x_max_mm: 10.0,
            phantom_z_min_mm: 5.0,
            phantom_z_max_mm: 50.0,
            scatterer_density: 60.0,
            point_count_min: 5,
            point_count_max: 30,
            point_fraction: 0.125,
            patches: 2,
            duration_us: None,
            noise_snr_db: None,
            dynamic_range_db: 60.0,
            seed: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("{value:?} is not a valid number"))
}

fn parse_auto<T: std::str::FromStr>(value: &str) -> std::result::Result<Option<T>, String> {
    match value {
        "auto" | "none" => Ok(None),
        v => parse_num(v).map(Some),
    }
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => Err(format!("{v:?} is not a boolean")),
    }
}

/// Either a comma list (`-4,0,4`) or an inclusive sweep `start:end:count`.
pub fn parse_angles(value: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [start, end, count] => {
            let (a, b): (f64, f64) = (parse_num(start)?, parse_num(end)?);
            let n: usize = parse_num(count)?;
            match n {
                0 => Err("sweep needs at least one angle".into()),
                1 => Ok(vec![a]),
                n => Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()),
            }
        }
        [list] => list.split(',').map(|s| parse_num(s.trim())).collect(),
        _ => Err(format!("{value:?} is neither a list nor start:end:count")),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses config text on top of the defaults. `origin` names the source
    /// in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
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
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            cfg.apply(key.trim(), value.trim()).map_err(err)?;
        }
        cfg.validate().map_err(|e| Error::Config {
            path: origin.to_owned(),
            line: 0,
            reason: e.to_string(),
        })?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "element_count" => self.element_count = parse_num(v)?,
            "pitch_mm" => self.pitch_mm = parse_num(v)?,
            "sound_speed_mps" => self.sound_speed_mps = parse_num(v)?,
            "center_freq_mhz" => self.center_freq_mhz = parse_num(v)?,
            "frac_bandwidth" => self.frac_bandwidth = parse_num(v)?,
            "sampling_freq_mhz" => self.sampling_freq_mhz = parse_num(v)?,
            "angles_deg" => self.angles_deg = parse_angles(v)?,
            "x_min_mm" => self.x_min_mm = parse_num(v)?,
            "x_max_mm" => self.x_max_mm = parse_num(v)?,
            "dx_mm" => self.dx_mm = parse_num(v)?,
            "z_min_mm" => self.z_min_mm = parse_num(v)?,
            "z_max_mm" => self.z_max_mm = parse_num(v)?,
            "dz_mm" => self.dz_mm = parse_num(v)?,
            "apod_window" => self.apod_window = v.parse().map_err(|e: Error| e.to_string())?,
            "fnum" => self.fnum = parse_num(v)?,
            "mv_subaperture" => self.mv_subaperture = parse_auto(v)?,
            "mv_diagonal_loading" => self.mv_diagonal_loading = parse_auto(v)?,
            "mv_forward_backward" => self.mv_forward_backward = parse_bool(v)?,
            "mv_temporal_half_window_mm" => self.mv_temporal_half_window_mm = parse_num(v)?,
            "psf_sigma_lateral_mm" => self.psf_sigma_lateral_mm = parse_num(v)?,
            "psf_sigma_axial_mm" => self.psf_sigma_axial_mm = parse_num(v)?,
            "phantom_x_min_mm" => self.phantom_x_min_mm = parse_num(v)?,
            "phantom_x_max_mm" => self.phantom_x_max_mm = parse_num(v)?,
            "phantom_z_min_mm" => self.phantom_z_min_mm = parse_num(v)?,
            "phantom_z_max_mm" => self.phantom_z_max_mm = parse_num(v)?,
            "scatterer_density" => self.scatterer_density = parse_num(v)?,
            "point_count_min" => self.point_count_min = parse_num(v)?,
            "point_count_max" => self.point_count_max = parse_num(v)?,
            "point_fraction" => self.point_fraction = parse_num(v)?,
            "patches" => self.patches = parse_num(v)?,
            "duration_us" => self.duration_us = parse_auto(v)?,
            "noise_snr_db" => self.noise_snr_db = parse_auto(v)?,
            "dynamic_range_db" => self.dynamic_range_db = parse_num(v)?,
            "seed" => self.seed = parse_num(v)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.probe()?;
        for &a in &self.angles_deg {
            self.acquisition(a.to_radians())?;
        }
        if self.angles_deg.is_empty() {
            return Err(Error::EmptyAngleList);
        }
        self.grid()?;
        self.apodization().validate()?;
        self.mv().validate()?;
        self.phantom_extent()?;
        if self.point_count_min > self.point_count_max {
            return Err(Error::invalid("point count", "min exceeds max"));
        }
        if !(0.0..=1.0).contains(&self.point_fraction) {
            return Err(Error::invalid("point fraction", "must lie in [0, 1]"));
        }
        if self.patches == 0 {
            return Err(Error::invalid("patches", "must be at least 1"));
        }
        if !(self.scatterer_density > 0.0) {
            return Err(Error::invalid("scatterer density", "must be positive"));
        }
        if !(self.dynamic_range_db > 0.0) {
            return Err(Error::invalid("dynamic range", "must be positive"));
        }
        Ok(())
    }

    pub fn probe(&self) -> Result<ProbeGeometry> {
        ProbeGeometry::linear(self.element_count, self.pitch_mm * MM)
    }

    pub fn acquisition(&self, steer_angle_rad: f64) -> Result<AcquisitionParams> {
        let p = AcquisitionParams {
            sound_speed_mps: self.sound_speed_mps,
            center_freq_hz: self.center_freq_mhz * MHZ,
            frac_bandwidth: self.frac_bandwidth,
            sampling_freq_hz: self.sampling_freq_mhz * MHZ,
            steer_angle_rad,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn angles_rad(&self) -> Vec<f64> {
        self.angles_deg.iter().map(|a| a.to_radians()).collect()
    }

    pub fn pulse(&self) -> PulseSpec {
        PulseSpec {
            center_freq_hz: self.center_freq_mhz * MHZ,
            frac_bandwidth: self.frac_bandwidth,
        }
    }

    pub fn grid(&self) -> Result<ImageGrid> {
        ImageGrid::spanning(
            (self.x_min_mm * MM, self.x_max_mm * MM),
            self.dx_mm * MM,
            (self.z_min_mm * MM, self.z_max_mm * MM),
            self.dz_mm * MM,
        )
    }

    pub fn apodization(&self) -> ApodizationSpec {
        ApodizationSpec {
            window: self.apod_window,
            fnum: self.fnum,
        }
    }

    pub fn mv(&self) -> MvConfig {
        MvConfig {
            subaperture_len: self.mv_subaperture,
            diagonal_loading: self.mv_diagonal_loading,
            forward_backward: self.mv_forward_backward,
            temporal_half_window_m: self.mv_temporal_half_window_mm * MM,
            fnum: self.fnum,
        }
    }

    pub fn psf(&self) -> PsfSpec {
        PsfSpec {
            sigma_lateral_m: self.psf_sigma_lateral_mm * MM,
            sigma_axial_m: self.psf_sigma_axial_mm * MM,
        }
    }

    pub fn phantom_extent(&self) -> Result<Extent> {
        let e = Extent::new(
            (self.phantom_x_min_mm * MM, self.phantom_x_max_mm * MM),
            (self.phantom_z_min_mm * MM, self.phantom_z_max_mm * MM),
        )?;
        if e.z_min_m <= 0.0 {
            return Err(Error::NonPositiveDepth(e.z_min_m));
        }
        Ok(e)
    }

    /// Serializes every key, so `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let auto = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let angles = self.angles_deg.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("element_count", self.element_count.to_string());
        put("pitch_mm", self.pitch_mm.to_string());
        put("sound_speed_mps", self.sound_speed_mps.to_string());
        put("center_freq_mhz", self.center_freq_mhz.to_string());
        put("frac_bandwidth", self.frac_bandwidth.to_string());
        put("sampling_freq_mhz", self.sampling_freq_mhz.to_string());
        put("angles_deg", angles);
        put("x_min_mm", self.x_min_mm.to_string());
        put("x_max_mm", self.x_max_mm.to_string());
        put("dx_mm", self.dx_mm.to_string());
        put("z_min_mm", self.z_min_mm.to_string());
        put("z_max_mm", self.z_max_mm.to_string());
        put("dz_mm", self.dz_mm.to_string());
        put("apod_window", self.apod_window.name().into());
        put("fnum", self.fnum.to_string());
        put("mv_subaperture", auto(self.mv_subaperture.map(|v| v.to_string())));
        put(
            "mv_diagonal_loading",
            auto(self.mv_diagonal_loading.map(|v| v.to_string())),
        );
        put("mv_forward_backward", self.mv_forward_backward.to_string());
        put(
            "mv_temporal_half_window_mm",
            self.mv_temporal_half_window_mm.to_string(),
        );
        put("psf_sigma_lateral_mm", self.psf_sigma_lateral_mm.to_string());
        put("psf_sigma_axial_mm", self.psf_sigma_axial_mm.to_string());
        put("phantom_x_min_mm", self.phantom_x_min_mm.to_string());
        put("phantom_x_max_mm", self.phantom_x_max_mm.to_string());
        put("phantom_z_min_mm", self.phantom_z_min_mm.to_string());
        put("phantom_z_max_mm", self.phantom_z_max_mm.to_string());
        put("scatterer_density", self.scatterer_density.to_string());
        put("point_count_min", self.point_count_min.to_string());
        put("point_count_max", self.point_count_max.to_string());
        put("point_fraction", self.point_fraction.to_string());
        put("patches", self.patches.to_string());
        put("duration_us", auto(self.duration_us.map(|v| v.to_string())));
        put("noise_snr_db", auto(self.noise_snr_db.map(|v| v.to_string())));
        put("dynamic_range_db", self.dynamic_range_db.to_string());
        put("seed", self.seed.to_string());
        s
    }
}
