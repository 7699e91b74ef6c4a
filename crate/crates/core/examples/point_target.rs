//! Resolution of a single point target under DAS, CPWC and MV.
//!
//! Run with `cargo run --release --example point_target [angles] [span_deg]`.

use pwbeam::metrics::point_resolution;
use pwbeam::pipeline::{beamform_set, simulate_channel_set, Method};
use pwbeam::postprocess::envelope;
use pwbeam::storage::config::RunConfig;
use pwbeam::{Extent, Phantom, Scatterer};

fn main() -> pwbeam::Result<()> {
    let mut args = std::env::args().skip(1);
    let angles: usize = args.next().map_or(15, |s| s.parse().expect("angle count"));
    let span: f64 = args.next().map_or(16.0, |s| s.parse().expect("angle span"));

    let cfg = RunConfig {
        element_count: 64,
        x_min_mm: -3.0,
        x_max_mm: 3.0,
        dx_mm: 0.02,
        z_min_mm: 18.5,
        z_max_mm: 21.5,
        dz_mm: 0.01,
        ..RunConfig::default()
    };
    let extent = Extent::new((-5e-3, 5e-3), (15e-3, 25e-3))?;
    let phantom = Phantom::new(
        vec![Scatterer {
            x_m: 0.0,
            z_m: 20e-3,
            amplitude: 1.0,
        }],
        extent,
    )?;
    let grid = cfg.grid()?;

    let single = simulate_channel_set(&cfg, &phantom)?;
    let compound_cfg = RunConfig {
        angles_deg: pwbeam::storage::config::parse_angles(&format!("{}:{}:{angles}", -span, span)).expect("angle list"),
        ..cfg.clone()
    };
    let compound = simulate_channel_set(&compound_cfg, &phantom)?;

    println!("method  axial_mm  lateral_mm");
    for (method, set) in [(Method::Das, &single), (Method::Cpwc, &compound), (Method::Mv, &single)] {
        let env = envelope(&beamform_set(set, method, &cfg, &grid)?)?;
        let res = point_resolution(&env, None)?;
        println!(
            "{:<6}  {:>8.4}  {:>10.4}",
            method.name(),
            res.axial_m * 1e3,
            res.lateral_m * 1e3
        );
    }
    Ok(())
}
