//! Builds a ground-truth target from an image-derived phantom and reports
//! the width of a lone scatterer's blob.
//!
//! Run with `cargo run --release --example ground_truth [image]`.

use ndarray::Array2;
use pwbeam::metrics::point_resolution;
use pwbeam::simulate::{ground_truth_image, phantom_from_image, PsfSpec};
use pwbeam::storage::image_io::load_grayscale;
use pwbeam::{Extent, ImageGrid, Phantom, Scatterer};

fn main() -> pwbeam::Result<()> {
    let extent = Extent::new((-5e-3, 5e-3), (10e-3, 20e-3))?;
    let grid = ImageGrid::spanning((-5e-3, 5e-3), 0.05e-3, (10e-3, 20e-3), 0.05e-3)?;
    let psf = PsfSpec::default();

    let lone = Phantom::new(
        vec![Scatterer {
            x_m: 0.0,
            z_m: 15e-3,
            amplitude: 1.0,
        }],
        extent,
    )?;
    let fine = ImageGrid::spanning((-1e-3, 1e-3), 0.01e-3, (14e-3, 16e-3), 0.01e-3)?;
    let res = point_resolution(&ground_truth_image(&lone, &psf, &fine)?.to_envelope(), None)?;
    println!(
        "lone scatterer: axial {:.4} mm, lateral {:.4} mm",
        res.axial_m * 1e3,
        res.lateral_m * 1e3
    );

    let image = match std::env::args().nth(1) {
        Some(path) => load_grayscale(path.as_ref())?,
        None => Array2::from_shape_fn((64, 64), |(r, c)| ((r / 16 + c / 16) % 2) as f64),
    };
    let phantom = phantom_from_image(&image, extent, 2000, 1)?;
    let truth = ground_truth_image(&phantom, &psf, &grid)?;
    let values = truth.values();
    let occupied = values.iter().filter(|v| **v > 0.01).count() as f64 / values.len() as f64;
    println!(
        "{} scatterers, grid {}x{}, {:.1}% of pixels above 1% of peak",
        phantom.len(),
        grid.nz(),
        grid.nx(),
        occupied * 100.0
    );
    Ok(())
}
