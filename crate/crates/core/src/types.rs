//! Shared domain types: probe, acquisition, image grid and the data that
//! flows between the simulation, beamforming and metrics stages.
//!
//! All quantities are SI (meters, seconds, hertz, radians). Containers that
//! carry invariants validate them on construction and are immutable after.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// Tolerance on the constant element spacing of a linear array.
const PITCH_TOLERANCE_M: f64 = 1e-12;

/// Linear array with elements on the x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGeometry {
    element_positions_m: Vec<f64>,
    pitch_m: f64,
}

/// Checks the linear-array invariants: non-empty, strictly increasing and
/// spaced by `pitch_m` within 1e-12 m.
pub fn validate_probe(positions_m: &[f64], pitch_m: f64) -> Result<()> {
    if positions_m.is_empty() {
        return Err(Error::EmptyProbe);
    }
    if !(pitch_m > 0.0 && pitch_m.is_finite()) {
        return Err(Error::invalid("pitch", format!("{pitch_m} m is not positive")));
    }
    if let Some(bad) = positions_m.iter().position(|p| !p.is_finite()) {
        return Err(Error::invalid("element position", format!("index {bad} is not finite")));
    }
    for (i, pair) in positions_m.windows(2).enumerate() {
        let step = pair[1] - pair[0];
        if step <= 0.0 {
            return Err(Error::UnsortedElements { index: i + 1 });
        }
        if (step - pitch_m).abs() > PITCH_TOLERANCE_M {
            return Err(Error::NonUniformPitch {
                index: i + 1,
                pitch: pitch_m,
                found: step,
            });
        }
    }
    Ok(())
}

impl ProbeGeometry {
    /// Builds a probe from explicit element positions. The pitch is taken
    /// from the first spacing and every other spacing must match it.
    pub fn from_positions(positions_m: Vec<f64>) -> Result<Self> {
        let pitch_m = match positions_m.as_slice() {
            [] => return Err(Error::EmptyProbe),
            [_] => return Err(Error::invalid("pitch", "single-element probes need an explicit pitch")),
            [a, b, ..] => b - a,
        };
        Self::with_pitch(positions_m, pitch_m)
    }

    pub fn with_pitch(positions_m: Vec<f64>, pitch_m: f64) -> Result<Self> {
        validate_probe(&positions_m, pitch_m)?;
        Ok(Self {
            element_positions_m: positions_m,
            pitch_m,
        })
    }

    /// Uniform linear array centered on x = 0.
    pub fn linear(element_count: usize, pitch_m: f64) -> Result<Self> {
        if element_count == 0 {
            return Err(Error::EmptyProbe);
        }
        let center = (element_count as f64 - 1.0) / 2.0;
        let positions = (0..element_count).map(|i| (i as f64 - center) * pitch_m).collect();
        Self::with_pitch(positions, pitch_m)
    }

    pub fn positions(&self) -> &[f64] {
        &self.element_positions_m
    }

    pub fn element_count(&self) -> usize {
        self.element_positions_m.len()
    }

    pub fn pitch_m(&self) -> f64 {
        self.pitch_m
    }

    /// Physical aperture: element count times pitch.
    pub fn aperture_m(&self) -> f64 {
        self.element_count() as f64 * self.pitch_m
    }
}

/// Transmit/receive settings of one plane-wave acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionParams {
    pub sound_speed_mps: f64,
    pub center_freq_hz: f64,
    /// -6 dB fractional bandwidth.
    pub frac_bandwidth: f64,
    pub sampling_freq_hz: f64,
    pub steer_angle_rad: f64,
}

impl AcquisitionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} is not positive")))
            }
        };
        positive("sound speed", self.sound_speed_mps)?;
        positive("center frequency", self.center_freq_hz)?;
        positive("sampling frequency", self.sampling_freq_hz)?;
        if !(self.frac_bandwidth > 0.0 && self.frac_bandwidth < 2.0) {
            return Err(Error::invalid(
                "fractional bandwidth",
                format!("{} outside (0, 2)", self.frac_bandwidth),
            ));
        }
        let band_edge = self.center_freq_hz * (1.0 + self.frac_bandwidth / 2.0);
        if self.sampling_freq_hz <= 2.0 * band_edge {
            return Err(Error::invalid(
                "sampling frequency",
                format!(
                    "{} Hz does not exceed twice the band edge {} Hz",
                    self.sampling_freq_hz, band_edge
                ),
            ));
        }
        if !(self.steer_angle_rad.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid(
                "steering angle",
                format!("|{}| rad is not below pi/2", self.steer_angle_rad),
            ));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        self.sound_speed_mps / self.center_freq_hz
    }

    pub fn with_angle(self, steer_angle_rad: f64) -> Self {
        Self {
            steer_angle_rad,
            ..self
        }
    }
}

/// Uniformly spaced, strictly increasing coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("axis", "length is zero"));
        }
        if !(step > 0.0 && step.is_finite() && start.is_finite()) {
            return Err(Error::invalid("axis", format!("step {step} is not positive")));
        }
        Ok(Self { start, step, len })
    }

    /// Axis covering `[min, max]` with the given step; the last sample is the
    /// largest `min + k·step` not exceeding `max` (with a 1e-9 step slack).
    pub fn spanning(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(max >= min) {
            return Err(Error::invalid("axis", format!("max {max} below min {min}")));
        }
        if !(step > 0.0) {
            return Err(Error::invalid("axis", format!("step {step} is not positive")));
        }
        let len = ((max - min) / step + 1e-9).floor() as usize + 1;
        Self::new(min, step, len)
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.coord(self.len - 1)
    }

    /// Index of the sample nearest to `v`, if `v` lies within half a step of
    /// the axis.
    pub fn nearest(&self, v: f64) -> Option<usize> {
        let k = ((v - self.start) / self.step).round();
        if k < 0.0 || k >= self.len as f64 {
            None
        } else {
            Some(k as usize)
        }
    }
}

/// Pixel centers of the reconstruction grid; z grows into the tissue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrid {
    x: Axis,
    z: Axis,
}

impl ImageGrid {
    pub fn new(x: Axis, z: Axis) -> Result<Self> {
        if z.start <= 0.0 {
            return Err(Error::NonPositiveDepth(z.start));
        }
        Ok(Self { x, z })
    }

    pub fn spanning(x_range_m: (f64, f64), dx_m: f64, z_range_m: (f64, f64), dz_m: f64) -> Result<Self> {
        Self::new(
            Axis::spanning(x_range_m.0, x_range_m.1, dx_m)?,
            Axis::spanning(z_range_m.0, z_range_m.1, dz_m)?,
        )
    }

    pub fn x_axis(&self) -> Axis {
        self.x
    }

    pub fn z_axis(&self) -> Axis {
        self.z
    }

    pub fn nx(&self) -> usize {
        self.x.len
    }

    pub fn nz(&self) -> usize {
        self.z.len
    }

    pub fn dx(&self) -> f64 {
        self.x.step
    }

    pub fn dz(&self) -> f64 {
        self.z.step
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x.coord(ix)
    }

    pub fn z(&self, iz: usize) -> f64 {
        self.z.coord(iz)
    }

    /// `(nz, nx)`, the shape of every image on this grid.
    pub fn shape(&self) -> (usize, usize) {
        (self.nz(), self.nx())
    }

    pub fn x_coords(&self) -> Vec<f64> {
        (0..self.nx()).map(|i| self.x(i)).collect()
    }

    pub fn z_coords(&self) -> Vec<f64> {
        (0..self.nz()).map(|i| self.z(i)).collect()
    }

    /// `(iz, ix)` of the pixel containing the point, if it is on the grid.
    pub fn pixel_of(&self, x_m: f64, z_m: f64) -> Option<(usize, usize)> {
        Some((self.z.nearest(z_m)?, self.x.nearest(x_m)?))
    }

    /// Same grid with the axial range restricted to `rows`.
    pub fn rows(&self, rows: std::ops::Range<usize>) -> Result<Self> {
        if rows.is_empty() || rows.end > self.nz() {
            return Err(Error::invalid("row range", format!("{rows:?} out of 0..{}", self.nz())));
        }
        Self::new(self.x, Axis::new(self.z.coord(rows.start), self.z.step, rows.len())?)
    }
}

/// Raw per-element echo traces of one transmission, `element × sample`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataCube {
    traces: Array2<f64>,
    t0_s: f64,
    sampling_freq_hz: f64,
}

impl ChannelDataCube {
    pub fn new(traces: Array2<f64>, t0_s: f64, sampling_freq_hz: f64) -> Result<Self> {
        if traces.ncols() == 0 || traces.nrows() == 0 {
            return Err(Error::invalid("channel data", "no samples"));
        }
        if traces.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("channel data", "non-finite sample"));
        }
        if !(sampling_freq_hz > 0.0) || !t0_s.is_finite() {
            return Err(Error::invalid(
                "channel data",
                "sampling frequency must be positive and t0 finite",
            ));
        }
        Ok(Self {
            traces,
            t0_s,
            sampling_freq_hz,
        })
    }

    pub fn traces(&self) -> &Array2<f64> {
        &self.traces
    }

    pub fn into_traces(self) -> Array2<f64> {
        self.traces
    }

    pub fn t0_s(&self) -> f64 {
        self.t0_s
    }

    pub fn sampling_freq_hz(&self) -> f64 {
        self.sampling_freq_hz
    }

    pub fn element_count(&self) -> usize {
        self.traces.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.traces.ncols()
    }

    /// Time of the last recorded sample.
    pub fn t_end_s(&self) -> f64 {
        self.t0_s + (self.n_samples() - 1) as f64 / self.sampling_freq_hz
    }
}

/// Scales the whole cube so its largest absolute sample is exactly 1.
///
/// One gain for all channels, so inter-element amplitude ratios survive.
pub fn normalize_channel_data(cube: &ChannelDataCube) -> Result<ChannelDataCube> {
    let peak = cube.traces.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::AllZeroData);
    }
    Ok(ChannelDataCube {
        traces: cube.traces.mapv(|v| v / peak),
        ..cube.clone()
    })
}

/// Delay-aligned channel data, `element × nz × nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelAlignedRF {
    aligned: Array3<f64>,
    grid: ImageGrid,
}

impl PixelAlignedRF {
    pub fn new(aligned: Array3<f64>, grid: ImageGrid) -> Result<Self> {
        let (_, nz, nx) = aligned.dim();
        if (nz, nx) != grid.shape() {
            return Err(Error::ShapeMismatch(format!(
                "aligned data is {nz}x{nx}, grid is {}x{}",
                grid.nz(),
                grid.nx()
            )));
        }
        Ok(Self { aligned, grid })
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.aligned
    }

    pub fn into_data(self) -> Array3<f64> {
        self.aligned
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn element_count(&self) -> usize {
        self.aligned.dim().0
    }
}

macro_rules! grid_image {
    ($(#[$doc:meta])* $name:ident, $check:expr, $what:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            values: Array2<f64>,
            grid: ImageGrid,
        }

        impl $name {
            pub fn new(values: Array2<f64>, grid: ImageGrid) -> Result<Self> {
                if values.dim() != grid.shape() {
                    return Err(Error::ShapeMismatch(format!(
                        "{} image is {:?}, grid is {:?}",
                        $what,
                        values.dim(),
                        grid.shape()
                    )));
                }
                let check: fn(f64) -> bool = $check;
                if !values.iter().all(|&v| check(v)) {
                    return Err(Error::invalid($what, "value outside the valid range"));
                }
                Ok(Self { values, grid })
            }

            pub fn values(&self) -> &Array2<f64> {
                &self.values
            }

            pub fn into_values(self) -> Array2<f64> {
                self.values
            }

            pub fn grid(&self) -> &ImageGrid {
                &self.grid
            }
        }
    };
}

grid_image!(
    /// Beamformed RF, `nz × nx`.
    BeamformedRF,
    |v| v.is_finite(),
    "beamformed RF"
);
grid_image!(
    /// Detected envelope, non-negative, `nz × nx`.
    EnvelopeImage,
    |v| v.is_finite() && v >= 0.0,
    "envelope"
);

/// Log-compressed image in dB, within `[-dynamic_range_db, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BModeImage {
    values: Array2<f64>,
    grid: ImageGrid,
    dynamic_range_db: f64,
}

impl BModeImage {
    pub fn new(values: Array2<f64>, grid: ImageGrid, dynamic_range_db: f64) -> Result<Self> {
        if !(dynamic_range_db > 0.0 && dynamic_range_db.is_finite()) {
            return Err(Error::invalid("dynamic range", format!("{dynamic_range_db} dB")));
        }
        if values.dim() != grid.shape() {
            return Err(Error::ShapeMismatch("B-mode image does not match grid".into()));
        }
        if values.iter().any(|&v| !(v <= 0.0 && v >= -dynamic_range_db)) {
            return Err(Error::invalid("B-mode", "value outside [-DR, 0] dB"));
        }
        Ok(Self {
            values,
            grid,
            dynamic_range_db,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn dynamic_range_db(&self) -> f64 {
        self.dynamic_range_db
    }
}

/// Lateral × axial bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub z_min_m: f64,
    pub z_max_m: f64,
}

impl Extent {
    pub fn new(x_range_m: (f64, f64), z_range_m: (f64, f64)) -> Result<Self> {
        let e = Self {
            x_min_m: x_range_m.0,
            x_max_m: x_range_m.1,
            z_min_m: z_range_m.0,
            z_max_m: z_range_m.1,
        };
        if !(e.width() > 0.0 && e.depth() > 0.0) {
            return Err(Error::EmptyExtent);
        }
        Ok(e)
    }

    pub fn width(&self) -> f64 {
        self.x_max_m - self.x_min_m
    }

    pub fn depth(&self) -> f64 {
        self.z_max_m - self.z_min_m
    }

    pub fn area(&self) -> f64 {
        self.width() * self.depth()
    }

    pub fn z_mid(&self) -> f64 {
        0.5 * (self.z_min_m + self.z_max_m)
    }

    pub fn contains(&self, x_m: f64, z_m: f64) -> bool {
        (self.x_min_m..=self.x_max_m).contains(&x_m) && (self.z_min_m..=self.z_max_m).contains(&z_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub x_m: f64,
    pub z_m: f64,
    pub amplitude: f64,
}

/// Scatterer field: the known tissue reflectivity of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    scatterers: Vec<Scatterer>,
    extent: Extent,
}

impl Phantom {
    pub fn new(scatterers: Vec<Scatterer>, extent: Extent) -> Result<Self> {
        if let Some(k) = scatterers
            .iter()
            .position(|s| !extent.contains(s.x_m, s.z_m) || !s.amplitude.is_finite())
        {
            return Err(Error::invalid(
                "phantom",
                format!("scatterer {k} lies outside the extent or has a non-finite amplitude"),
            ));
        }
        Ok(Self { scatterers, extent })
    }

    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    /// Same positions with every amplitude multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            scatterers: self
                .scatterers
                .iter()
                .map(|s| Scatterer {
                    amplitude: s.amplitude * gain,
                    ..*s
                })
                .collect(),
            extent: self.extent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionRole {
    Roi,
    Background,
}

impl RegionRole {
    pub fn label(self) -> &'static str {
        match self {
            RegionRole::Roi => "ROI",
            RegionRole::Background => "background",
        }
    }
}

/// Boolean pixel mask, `nz × nx`, with at least one selected pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    mask: Array2<bool>,
    role: RegionRole,
}

impl RegionMask {
    pub fn new(mask: Array2<bool>, role: RegionRole) -> Result<Self> {
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyMask(role.label()));
        }
        Ok(Self { mask, role })
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn role(&self) -> RegionRole {
        self.role
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Values of `image` under the mask, in row-major order.
    pub fn select(&self, image: &Array2<f64>) -> Result<Vec<f64>> {
        if image.dim() != self.mask.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} mask is {:?}, image is {:?}",
                self.role.label(),
                self.mask.dim(),
                image.dim()
            )));
        }
        Ok(image
            .iter()
            .zip(self.mask.iter())
            .filter_map(|(&v, &m)| m.then_some(v))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn default_linear_probe_is_valid() {
        let probe = ProbeGeometry::linear(128, 0.3e-3).unwrap();
        assert_eq!(probe.element_count(), 128);
        assert!((probe.positions()[1] - probe.positions()[0] - 0.3e-3).abs() < 1e-15);
    }

    #[test]
    fn probe_errors_name_the_invariant() {
        assert!(matches!(
            ProbeGeometry::from_positions(vec![0.0, 1e-4, 3e-4]),
            Err(Error::NonUniformPitch { index: 2, .. })
        ));
        assert!(matches!(ProbeGeometry::from_positions(vec![]), Err(Error::EmptyProbe)));
        assert!(matches!(
            ProbeGeometry::from_positions(vec![0.0, 1e-4, 0.5e-4]),
            Err(Error::UnsortedElements { index: 2 })
        ));
        assert!(matches!(validate_probe(&[], 1e-4), Err(Error::EmptyProbe)));
    }

    #[test]
    fn acquisition_rejects_undersampling() {
        let mut p = AcquisitionParams {
            sound_speed_mps: 1540.0,
            center_freq_hz: 5.208e6,
            frac_bandwidth: 0.67,
            sampling_freq_hz: 104.16e6,
            steer_angle_rad: 0.0,
        };
        p.validate().unwrap();
        p.sampling_freq_hz = 12e6;
        assert!(p.validate().is_err());
        p.sampling_freq_hz = 104.16e6;
        p.steer_angle_rad = 1.6;
        assert!(p.validate().is_err());
    }

    #[test]
    fn normalize_divides_by_global_peak() {
        let cube = ChannelDataCube::new(array![[1.0, -4.0], [2.0, 0.5]], 0.0, 1e6).unwrap();
        let n = normalize_channel_data(&cube).unwrap();
        assert_eq!(n.traces(), &array![[0.25, -1.0], [0.5, 0.125]]);
        assert_eq!(normalize_channel_data(&n).unwrap(), n);
    }

    #[test]
    fn normalize_rejects_all_zero() {
        let cube = ChannelDataCube::new(Array2::zeros((3, 4)), 0.0, 1e6).unwrap();
        assert!(matches!(normalize_channel_data(&cube), Err(Error::AllZeroData)));
    }

    #[test]
    fn grid_requires_positive_depth() {
        assert!(ImageGrid::spanning((-1e-3, 1e-3), 1e-4, (0.0, 1e-3), 1e-4).is_err());
        let g = ImageGrid::spanning((-1e-3, 1e-3), 1e-4, (1e-3, 2e-3), 1e-4).unwrap();
        assert_eq!(g.shape(), (11, 21));
        assert_eq!(g.pixel_of(0.0, 1.5e-3), Some((5, 10)));
        assert_eq!(g.pixel_of(5e-3, 1.5e-3), None);
    }

    #[test]
    fn empty_mask_is_rejected() {
        assert!(RegionMask::new(Array2::from_elem((2, 2), false), RegionRole::Roi).is_err());
    }
}
