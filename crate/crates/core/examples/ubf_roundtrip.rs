//! Writes a beamformed image to a UBF container, reads it back and checks
//! the payload is bit-identical.
//!
//! Run with `cargo run --release --example ubf_roundtrip [path]`.

use pwbeam::pipeline::{beamform_set, simulate_channel_set, GridImage, Method};
use pwbeam::storage::config::RunConfig;
use pwbeam::storage::ubf::{ubf_read, ubf_write_array};
use pwbeam::{Extent, Phantom, Scatterer};

fn main() -> pwbeam::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "das.ubf".into());
    let cfg = RunConfig {
        element_count: 32,
        x_min_mm: -2.0,
        x_max_mm: 2.0,
        z_min_mm: 12.0,
        z_max_mm: 14.0,
        ..RunConfig::default()
    };
    let extent = Extent::new((-3e-3, 3e-3), (11e-3, 15e-3))?;
    let phantom = Phantom::new(
        vec![Scatterer {
            x_m: 0.0,
            z_m: 13e-3,
            amplitude: 1.0,
        }],
        extent,
    )?;
    let set = simulate_channel_set(&cfg, &phantom)?;
    let rf = beamform_set(&set, Method::Das, &cfg, &cfg.grid()?)?;

    let written = GridImage::Rf(rf).to_ubf();
    ubf_write_array(path.as_ref(), &written)?;
    let read = ubf_read(path.as_ref())?;
    let identical = read.dims == written.dims
        && read.metadata == written.metadata
        && read
            .data
            .iter()
            .zip(&written.data)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    println!(
        "{path}: dims {:?}, {} metadata keys",
        read.dims,
        read.metadata.entries().len()
    );
    for (k, v) in read.metadata.entries() {
        println!("  {k} = {v}");
    }
    println!("bit-identical: {identical}");
    Ok(())
}
