//! CSV tables: phantom scatterers, metric rows and training manifests.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::storage::atomic_write;
use crate::types::{Extent, Phantom, Scatterer};

fn csv_err(path: &Path, e: impl ToString) -> Error {
    Error::Csv {
        path: path.to_owned(),
        reason: e.to_string(),
    }
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut bytes = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        w.write_record(header).map_err(|e| csv_err(path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    atomic_write(path, |out| out.write_all(&bytes).map_err(|e| Error::io(path, e)))
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let found = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().take(header.len()).ne(header.iter().copied()) {
        return Err(csv_err(path, format!("expected header {header:?}, found {found:?}")));
    }
    r.records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_err(path, e))
}

pub const PHANTOM_HEADER: [&str; 3] = ["x_m", "z_m", "amplitude"];

/// Writes scatterers as `x_m,z_m,amplitude` with round-trip precision.
pub fn write_phantom_csv(phantom: &Phantom, path: &Path) -> Result<()> {
    write_csv(
        path,
        &PHANTOM_HEADER,
        phantom
            .scatterers()
            .iter()
            .map(|s| vec![s.x_m.to_string(), s.z_m.to_string(), s.amplitude.to_string()]),
    )
}

/// Reads a phantom CSV; every scatterer must lie inside `extent`.
pub fn read_phantom_csv(path: &Path, extent: Extent) -> Result<Phantom> {
    let rows = read_csv(path, &PHANTOM_HEADER)?;
    let scatterers = rows
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| csv_err(path, format!("row {}: bad {}", i + 2, PHANTOM_HEADER[k])))
            };
            Ok(Scatterer {
                x_m: field(0)?,
                z_m: field(1)?,
                amplitude: field(2)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Phantom::new(scatterers, extent)
}

pub const METRICS_HEADER: [&str; 7] = [
    "dataset_id",
    "method",
    "fwhm_a_mm",
    "fwhm_l_mm",
    "ssnr",
    "cr_db",
    "gcnr",
];

/// One metrics row; missing measurements are written as empty fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsRow {
    pub dataset_id: String,
    pub method: String,
    pub fwhm_a_mm: Option<f64>,
    pub fwhm_l_mm: Option<f64>,
    pub ssnr: Option<f64>,
    /// `-inf` for a perfectly anechoic ROI.
    pub cr_db: Option<f64>,
    pub gcnr: Option<f64>,
}

impl MetricsRow {
    fn fields(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.dataset_id.clone(),
            self.method.clone(),
            f(self.fwhm_a_mm),
            f(self.fwhm_l_mm),
            f(self.ssnr),
            f(self.cr_db),
            f(self.gcnr),
        ]
    }
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    write_csv(path, &METRICS_HEADER, rows.iter().map(MetricsRow::fields))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    read_csv(path, &METRICS_HEADER)?
        .iter()
        .map(|rec| {
            let f = |k: usize| -> Result<Option<f64>> {
                match rec.get(k).unwrap_or("") {
                    "" => Ok(None),
                    s => s
                        .parse()
                        .map(Some)
                        .map_err(|_| csv_err(path, format!("{} = {s:?}", METRICS_HEADER[k]))),
                }
            };
            Ok(MetricsRow {
                dataset_id: rec.get(0).unwrap_or("").to_owned(),
                method: rec.get(1).unwrap_or("").to_owned(),
                fwhm_a_mm: f(2)?,
                fwhm_l_mm: f(3)?,
                ssnr: f(4)?,
                cr_db: f(5)?,
                gcnr: f(6)?,
            })
        })
        .collect()
}

pub const MANIFEST_HEADER: [&str; 4] = ["input_path", "target_path", "phantom_id", "patch"];

/// A training pair; paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub input_path: PathBuf,
    pub target_path: PathBuf,
    pub phantom_id: usize,
    pub patch: usize,
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    write_csv(
        path,
        &MANIFEST_HEADER,
        entries.iter().map(|e| {
            vec![
                e.input_path.display().to_string(),
                e.target_path.display().to_string(),
                e.phantom_id.to_string(),
                e.patch.to_string(),
            ]
        }),
    )
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    read_csv(path, &MANIFEST_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let int = |k: usize| -> Result<usize> {
                rec.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| csv_err(path, format!("row {}: bad {}", i + 2, MANIFEST_HEADER[k])))
            };
            Ok(ManifestEntry {
                input_path: rec.get(0).unwrap_or("").into(),
                target_path: rec.get(1).unwrap_or("").into(),
                phantom_id: int(2)?,
                patch: int(3)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantom_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let extent = Extent::new((-1e-3, 1e-3), (1e-3, 3e-3)).unwrap();
        let phantom = Phantom::new(
            vec![
                Scatterer {
                    x_m: 0.1e-3 / 3.0,
                    z_m: 2e-3,
                    amplitude: -std::f64::consts::FRAC_1_SQRT_2,
                },
                Scatterer {
                    x_m: -1e-3,
                    z_m: 1e-3,
                    amplitude: 1e-300,
                },
            ],
            extent,
        )
        .unwrap();
        write_phantom_csv(&phantom, &path).unwrap();
        assert_eq!(read_phantom_csv(&path, extent).unwrap(), phantom);
        let narrow = Extent::new((0.0, 1e-3), (1e-3, 3e-3)).unwrap();
        assert!(read_phantom_csv(&path, narrow).is_err());
    }

    #[test]
    fn metrics_rows_keep_empty_and_infinite_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let row = MetricsRow {
            dataset_id: "cyst".into(),
            method: "das".into(),
            cr_db: Some(f64::NEG_INFINITY),
            gcnr: Some(0.75),
            ..Default::default()
        };
        write_metrics_csv(std::slice::from_ref(&row), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("dataset_id,method,fwhm_a_mm,fwhm_l_mm,ssnr,cr_db,gcnr\n"));
        assert_eq!(read_metrics_csv(&path).unwrap(), vec![row]);
    }
}
