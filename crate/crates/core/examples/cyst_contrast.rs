//! Contrast of an anechoic cyst in speckle for DAS, MV and the ground truth.
//! Writes a B-mode PNG per method into the output directory.
//!
//! Run with `cargo run --release --example cyst_contrast [out_dir]`.

use std::path::PathBuf;

use pwbeam::metrics::{cr, cyst_regions, format_cr, gcnr};
use pwbeam::pipeline::{beamform_set, simulate_channel_set, Method};
use pwbeam::postprocess::{envelope, log_compress};
use pwbeam::simulate::{ground_truth_image, phantom_with_cysts, resolution_cell, scatterer_count};
use pwbeam::storage::config::RunConfig;
use pwbeam::storage::image_io::export_bmode_png;
use pwbeam::Extent;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "cyst_out".into()));
    std::fs::create_dir_all(&out)?;

    let cfg = RunConfig {
        element_count: 64,
        sampling_freq_mhz: 8.0 * 5.208,
        x_min_mm: -5.0,
        x_max_mm: 5.0,
        dx_mm: 0.05,
        z_min_mm: 15.0,
        z_max_mm: 25.0,
        dz_mm: 0.025,
        scatterer_density: 20.0,
        ..RunConfig::default()
    };
    let extent = Extent::new((-7e-3, 7e-3), (13e-3, 27e-3))?;
    let (cx, cz, r) = (0.0, 20e-3, 2.5e-3);
    let cell = resolution_cell(&cfg.acquisition(0.0)?, &cfg.probe()?, &extent);
    let phantom = phantom_with_cysts(
        extent,
        scatterer_count(cfg.scatterer_density, &extent, cell),
        &[(cx, cz, r)],
        3,
    )?;
    let grid = cfg.grid()?;
    let (roi, bg) = cyst_regions(&grid, cx, cz, r)?;
    let set = simulate_channel_set(&cfg, &phantom)?;

    println!("source        CR_dB  gCNR");
    let mut images = vec![("truth", ground_truth_image(&phantom, &cfg.psf(), &grid)?.to_envelope())];
    for method in [Method::Das, Method::Mv] {
        images.push((method.name(), envelope(&beamform_set(&set, method, &cfg, &grid)?)?));
    }
    for (name, env) in &images {
        let c = cr(env, &roi, &bg)?;
        println!(
            "{name:<8} {:>10}  {:.3}",
            format_cr(c, 60.0),
            gcnr(env, &roi, &bg, 100)?
        );
        export_bmode_png(&log_compress(env, 60.0)?, &out.join(format!("{name}.png")))?;
    }
    println!("images written to {}", out.display());
    Ok(())
}
