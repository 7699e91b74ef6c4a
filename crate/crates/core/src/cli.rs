//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error; failures print a single diagnostic line to stderr.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::pipeline::{
    beamform_set, compute_metrics, generate_dataset, simulate_channel_set, ChannelSet, GridImage, Method, RegionSpec,
};
use crate::postprocess::log_compress;
use crate::simulate::{ground_truth_image, phantom_from_image_density, phantom_point_targets, resolution_cell};
use crate::storage::config::RunConfig;
use crate::storage::image_io::{export_bmode_png, load_grayscale};
use crate::storage::tables::{read_phantom_csv, write_manifest, write_metrics_csv, write_phantom_csv};
use crate::storage::ubf::{ubf_read, ubf_write_array};
use crate::types::Phantom;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "PWBEAM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "pwbeam", version, about = "Plane-wave ultrasound beamforming toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate channel data for every configured steering angle.
    Simulate(SimulateArgs),
    /// Beamform channel data with DAS, CPWC or MV.
    Beamform(BeamformArgs),
    /// Render the ideal ground-truth envelope of a phantom.
    Groundtruth(GroundtruthArgs),
    /// Generate (aligned channels, ground truth) training pairs and a manifest.
    DatasetGen(DatasetArgs),
    /// Compute image-quality metrics of an envelope or RF image.
    Metrics(MetricsArgs),
    /// Render a log-compressed B-mode PNG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
struct PhantomSource {
    /// Grayscale image weighting scatterer amplitudes.
    #[arg(long, group = "source")]
    phantom_image: Option<PathBuf>,
    /// Scatterer table (x_m,z_m,amplitude).
    #[arg(long, group = "source")]
    phantom: Option<PathBuf>,
    /// Random point targets.
    #[arg(long, group = "source")]
    point_targets: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    source: PhantomSource,
    #[arg(long)]
    out: PathBuf,
    /// Also write the generated phantom as CSV.
    #[arg(long)]
    phantom_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BeamformArgs {
    #[arg(long, value_parser = ["das", "cpwc", "mv"])]
    method: String,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GroundtruthArgs {
    #[arg(long)]
    phantom: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    regions: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 60.0)]
    dr: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Runs the command line and returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match with_thread_pool(|| run(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn with_thread_pool<F: FnOnce() -> Result<()> + Send>(f: F) -> Result<()> {
    let Some(value) = std::env::var_os(THREADS_ENV) else {
        return f();
    };
    let threads: usize = value
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::invalid(THREADS_ENV, format!("{value:?} is not a positive integer")))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(THREADS_ENV, e.to_string()))?;
    pool.install(f)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Beamform(a) => {
            let cfg = RunConfig::load(&a.config)?;
            let set = ChannelSet::from_ubf(&ubf_read(&a.input)?)?;
            let method: Method = a.method.parse()?;
            let rf = beamform_set(&set, method, &cfg, &cfg.grid()?)?;
            let mut array = GridImage::Rf(rf).to_ubf();
            array.metadata.set("method", method.name());
            ubf_write_array(&a.out, &array)
        }
        Command::Groundtruth(a) => {
            let cfg = RunConfig::load(&a.config)?;
            let phantom = read_phantom_csv(&a.phantom, cfg.phantom_extent()?)?;
            let gt = ground_truth_image(&phantom, &cfg.psf(), &cfg.grid()?)?;
            ubf_write_array(&a.out, &GridImage::Envelope(gt.to_envelope()).to_ubf())
        }
        Command::DatasetGen(a) => {
            let cfg = RunConfig::load(&a.config)?;
            if a.count == 0 {
                return Err(Error::invalid("count", "must be at least 1"));
            }
            let entries = generate_dataset(&cfg, &a.images, a.count, &a.out)?;
            write_manifest(&entries, &a.out.join("manifest.csv"))
        }
        Command::Metrics(a) => {
            let env = GridImage::from_ubf(&ubf_read(&a.env)?)?.into_envelope()?;
            let row = compute_metrics(&env, &RegionSpec::load(&a.regions)?)?;
            write_metrics_csv(&[row], &a.out)
        }
        Command::Render(a) => {
            if !(a.dr.is_finite() && a.dr > 0.0) {
                return Err(Error::invalid("dr", "must be a positive number of decibels"));
            }
            let env = GridImage::from_ubf(&ubf_read(&a.input)?)?.into_envelope()?;
            export_bmode_png(&log_compress(&env, a.dr)?, &a.out)
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let extent = cfg.phantom_extent()?;
    let phantom: Phantom = if let Some(path) = &a.source.phantom_image {
        let image = load_grayscale(path)?;
        let cell = resolution_cell(&cfg.acquisition(0.0)?, &cfg.probe()?, &extent);
        phantom_from_image_density(&image, extent, cfg.scatterer_density, cell, cfg.seed)?
    } else if let Some(path) = &a.source.phantom {
        read_phantom_csv(path, extent)?
    } else {
        phantom_point_targets(cfg.point_count_min..=cfg.point_count_max, extent, cfg.seed)?
    };
    if let Some(path) = &a.phantom_out {
        write_phantom_csv(&phantom, path)?;
    }
    let set = simulate_channel_set(&cfg, &phantom)?;
    ubf_write_array(&a.out, &set.to_ubf()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cli_main(["pwbeam", "frobnicate"]), 1);
        assert_eq!(cli_main(["pwbeam"]), 1);
        assert_eq!(cli_main(["pwbeam", "render", "--in", "x.ubf"]), 1);
        assert_eq!(
            cli_main(["pwbeam", "beamform", "--method", "fcnn", "--in", "a", "--config", "b", "--out", "c"]),
            1
        );
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(cli_main(["pwbeam", "--help"]), 0);
    }

    #[test]
    fn missing_input_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("b.png");
        let missing = dir.path().join("missing.ubf");
        let code = cli_main([
            "pwbeam".into(),
            "render".into(),
            OsString::from("--in"),
            missing.into_os_string(),
            "--out".into(),
            out.into_os_string(),
        ]);
        assert_eq!(code, 2);
    }
}
