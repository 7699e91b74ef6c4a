//! Plane-wave ultrasound imaging: channel-data simulation, delay-and-sum,
//! coherent compounding and minimum-variance beamforming, envelope detection,
//! image-quality metrics and a binary array container for training data.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamform;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod simulate;
pub mod storage;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    AcquisitionParams, Axis, BModeImage, BeamformedRF, ChannelDataCube, EnvelopeImage, Extent, ImageGrid, Phantom,
    PixelAlignedRF, ProbeGeometry, RegionMask, RegionRole, Scatterer,
};
