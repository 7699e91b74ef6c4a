//! End-to-end runs of the `pwbeam` binary.

use std::path::Path;
use std::process::{Command, Output};

use pwbeam::storage::tables::{read_manifest, read_metrics_csv};
use pwbeam::storage::ubf::ubf_read;

const CONFIG: &str = "element_count = 32\nangles_deg = 0\nx_min_mm = -2\nx_max_mm = 2\ndx_mm = 0.1\n\
                      z_min_mm = 12\nz_max_mm = 14\ndz_mm = 0.025\nphantom_x_min_mm = -3\nphantom_x_max_mm = 3\n\
                      phantom_z_min_mm = 11\nphantom_z_max_mm = 15\nscatterer_density = 2\npatches = 2\nseed = 5\n\
                      psf_sigma_lateral_mm = 0.2\npsf_sigma_axial_mm = 0.2\n";

fn pwbeam(args: &str, cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwbeam"))
        .args(args.split_whitespace())
        .current_dir(cwd)
        .env("PWBEAM_THREADS", "2")
        .output()
        .expect("spawn pwbeam")
}

fn ok(args: &str, cwd: &Path) {
    let out = pwbeam(args, cwd);
    assert!(
        out.status.success(),
        "pwbeam {args}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), CONFIG).unwrap();
    dir
}

#[test]
fn usage_errors_exit_one() {
    let dir = workspace();
    assert_eq!(pwbeam("frobnicate", dir.path()).status.code(), Some(1));
    assert_eq!(pwbeam("beamform --method fancy", dir.path()).status.code(), Some(1));
    assert_eq!(pwbeam("--help", dir.path()).status.code(), Some(0));
}

#[test]
fn corrupt_input_exits_two() {
    let dir = workspace();
    std::fs::write(dir.path().join("bad.ubf"), b"NOPE0000000000000000").unwrap();
    let out = pwbeam(
        "beamform --method das --in bad.ubf --config run.cfg --out o.ubf",
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!dir.path().join("o.ubf").exists());
}

#[test]
fn single_angle_cpwc_matches_das() {
    let dir = workspace();
    let d = dir.path();
    ok("simulate --config run.cfg --point-targets --out chan.ubf", d);
    ok("beamform --method das --in chan.ubf --config run.cfg --out das.ubf", d);
    ok(
        "beamform --method cpwc --in chan.ubf --config run.cfg --out cpwc.ubf",
        d,
    );
    let das = ubf_read(&d.join("das.ubf")).unwrap();
    let cpwc = ubf_read(&d.join("cpwc.ubf")).unwrap();
    assert_eq!(das.dims, cpwc.dims);
    assert!(das.data.iter().zip(&cpwc.data).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(cpwc.metadata.get("method"), Some("cpwc"));
}

#[test]
fn point_pipeline_produces_finite_resolution() {
    let dir = workspace();
    let d = dir.path();
    std::fs::write(d.join("point.csv"), "x_m,z_m,amplitude\n0,0.013,1\n").unwrap();
    std::fs::write(
        d.join("regions.cfg"),
        "dataset_id = single\npoint_x_mm = 0\npoint_z_mm = 13\npoint_half_window_mm = 0.9\n",
    )
    .unwrap();
    ok("simulate --config run.cfg --phantom point.csv --out chan.ubf", d);
    ok("beamform --method das --in chan.ubf --config run.cfg --out das.ubf", d);
    ok("metrics --env das.ubf --regions regions.cfg --out m.csv", d);
    ok("render --in das.ubf --out das.png", d);
    let rows = read_metrics_csv(&d.join("m.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].dataset_id, "single");
    let (a, l) = (rows[0].fwhm_a_mm.unwrap(), rows[0].fwhm_l_mm.unwrap());
    assert!(a > 0.05 && a < 1.0, "axial {a}");
    assert!(l > 0.1 && l < 2.0, "lateral {l}");
    let png = image::open(d.join("das.png")).unwrap();
    assert_eq!((png.width(), png.height()), (41, 81));
}

#[test]
fn dataset_manifest_lists_every_pair() {
    let dir = workspace();
    let d = dir.path();
    std::fs::create_dir(d.join("images")).unwrap();
    for name in ["a.png", "b.png"] {
        image::GrayImage::from_fn(8, 8, |x, y| image::Luma([(x * 30 + y) as u8]))
            .save(d.join("images").join(name))
            .unwrap();
    }
    ok("dataset-gen --images images --count 3 --config run.cfg --out ds", d);
    let manifest = read_manifest(&d.join("ds/manifest.csv")).unwrap();
    assert_eq!(manifest.len(), 3 * 2);
    for entry in &manifest {
        let input = ubf_read(&d.join("ds").join(&entry.input_path)).unwrap();
        let target = ubf_read(&d.join("ds").join(&entry.target_path)).unwrap();
        assert_eq!(input.dims.len(), 3);
        assert_eq!(target.dims.len(), 2);
        assert_eq!(&input.dims[1..], &target.dims[..]);
        let peak = target.data.iter().cloned().fold(f32::MIN, f32::max);
        assert!(peak <= 1.0 && target.data.iter().all(|v| *v >= 0.0));
    }
}
