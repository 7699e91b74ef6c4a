//! Generates a small set of (aligned channels, ground truth) training pairs
//! from grayscale images and prints the manifest.
//!
//! Run with `cargo run --release --example training_pairs [images_dir] [count] [out_dir]`.

use std::path::PathBuf;

use pwbeam::pipeline::generate_dataset;
use pwbeam::storage::config::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let images = args.next().map(PathBuf::from);
    let count: usize = args.next().map_or(4, |s| s.parse().expect("pair count"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "pairs_out".into()));

    let images = match images {
        Some(dir) => dir,
        None => {
            let dir = out.join("images");
            std::fs::create_dir_all(&dir)?;
            image::GrayImage::from_fn(32, 32, |x, y| image::Luma([(x * 4 + y * 3) as u8]))
                .save(dir.join("gradient.png"))?;
            dir
        }
    };
    let cfg = RunConfig {
        element_count: 32,
        x_min_mm: -3.0,
        x_max_mm: 3.0,
        z_min_mm: 10.0,
        z_max_mm: 16.0,
        dz_mm: 0.05,
        phantom_x_min_mm: -4.0,
        phantom_x_max_mm: 4.0,
        phantom_z_min_mm: 9.0,
        phantom_z_max_mm: 17.0,
        psf_sigma_lateral_mm: 0.2,
        psf_sigma_axial_mm: 0.2,
        patches: 2,
        ..RunConfig::default()
    };
    let entries = generate_dataset(&cfg, &images, count, &out)?;
    println!("input_path,target_path,phantom_id,patch");
    for e in &entries {
        println!(
            "{},{},{},{}",
            e.input_path.display(),
            e.target_path.display(),
            e.phantom_id,
            e.patch
        );
    }
    println!("{} pairs in {}", entries.len(), out.display());
    Ok(())
}
