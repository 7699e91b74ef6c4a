//! UBF: a minimal binary container for float32 arrays.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "UBF1"
//! version    u16      1
//! dtype      u16      1 = float32 little-endian
//! ndim       u32
//! dims       ndim × u64
//! meta_len   u32
//! metadata   meta_len bytes of UTF-8 "key=value\n" lines
//! payload    product(dims) × 4 bytes, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3, ArrayD, IxDyn};

use crate::error::{Error, Result};
use crate::storage::atomic_write;
use crate::types::{Axis, ImageGrid};

pub const MAGIC: [u8; 4] = *b"UBF1";
pub const VERSION: u16 = 1;
pub const DTYPE_F32_LE: u16 = 1;

const CHUNK: usize = 1 << 16;

/// Ordered `key=value` metadata. Keys may not contain `=` or newlines and
/// values may not contain newlines.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an existing entry in place.
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
        self
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.set(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::MalformedContainer(format!("missing metadata key {key:?}")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::MalformedContainer(format!("metadata {key}={raw:?} is not a number")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::MalformedContainer(format!("metadata {key}={raw:?} is not an integer")))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.require(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::MalformedContainer(format!("metadata {key} has a non-numeric entry {s:?}")))
            })
            .collect()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn validate(&self) -> Result<()> {
        for (k, v) in &self.entries {
            if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::MalformedContainer(format!(
                    "metadata entry {k:?}={v:?} cannot be encoded"
                )));
            }
        }
        Ok(())
    }

    fn encode(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    fn decode(block: &str) -> Result<Self> {
        let entries = block
            .split_terminator('\n')
            .map(|line| {
                line.split_once('=')
                    .map(|(k, v)| (k.to_owned(), v.to_owned()))
                    .ok_or_else(|| Error::MalformedContainer(format!("metadata line {line:?} has no '='")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    /// Records an image grid as `x0, dx, nx, z0, dz, nz` (meters).
    pub fn set_grid(&mut self, grid: &ImageGrid) -> &mut Self {
        let (x, z) = (grid.x_axis(), grid.z_axis());
        self.set("x0", x.start)
            .set("dx", x.step)
            .set("nx", x.len)
            .set("z0", z.start)
            .set("dz", z.step)
            .set("nz", z.len)
    }

    pub fn grid(&self) -> Result<ImageGrid> {
        ImageGrid::new(
            Axis::new(self.f64("x0")?, self.f64("dx")?, self.usize("nx")?)?,
            Axis::new(self.f64("z0")?, self.f64("dz")?, self.usize("nz")?)?,
        )
    }
}

/// A float32 array with its dims and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct UbfArray {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
    pub metadata: Metadata,
}

impl UbfArray {
    pub fn new(dims: Vec<usize>, data: Vec<f32>, metadata: Metadata) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data, metadata })
    }

    pub fn from_array<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>, metadata: Metadata) -> Self {
        Self {
            dims: a.shape().to_vec(),
            data: a.iter().map(|&v| v as f32).collect(),
            metadata,
        }
    }

    pub fn to_array(&self) -> ArrayD<f64> {
        ArrayD::from_shape_vec(IxDyn(&self.dims), self.data.iter().map(|&v| v as f64).collect())
            .expect("dims match payload")
    }

    pub fn to_array2(&self) -> Result<Array2<f64>> {
        self.to_array()
            .into_dimensionality()
            .map_err(|_| Error::ShapeMismatch(format!("expected 2-D array, got dims {:?}", self.dims)))
    }

    pub fn to_array3(&self) -> Result<Array3<f64>> {
        self.to_array()
            .into_dimensionality()
            .map_err(|_| Error::ShapeMismatch(format!("expected 3-D array, got dims {:?}", self.dims)))
    }
}

/// Payload size in bytes for the given dims.
pub fn payload_bytes(dims: &[usize]) -> u64 {
    dims.iter().map(|&d| d as u64).product::<u64>() * 4
}

/// Serializes a container to any writer.
pub fn write_to(out: &mut dyn Write, dims: &[usize], data: &[f32], metadata: &Metadata) -> Result<()> {
    let expected: usize = dims.iter().product();
    if expected != data.len() {
        return Err(Error::ShapeMismatch(format!(
            "dims {dims:?} need {expected} values, got {}",
            data.len()
        )));
    }
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid("UBF payload", format!("value {k} is not finite")));
    }
    metadata.validate()?;
    let meta = metadata.encode();
    let io = |e| Error::io("<ubf stream>", e);

    let mut header = Vec::with_capacity(16 + 8 * dims.len() + meta.len());
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&DTYPE_F32_LE.to_le_bytes());
    header.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        header.extend_from_slice(&(d as u64).to_le_bytes());
    }
    header.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    header.extend_from_slice(meta.as_bytes());
    out.write_all(&header).map_err(io)?;

    let mut buf = Vec::with_capacity(CHUNK * 4);
    for chunk in data.chunks(CHUNK) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

/// Writes a container atomically.
pub fn ubf_write(path: &Path, dims: &[usize], data: &[f32], metadata: &Metadata) -> Result<()> {
    atomic_write(path, |w| write_to(w, dims, data, metadata)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn ubf_write_array(path: &Path, array: &UbfArray) -> Result<()> {
    ubf_write(path, &array.dims, &array.data, &array.metadata)
}

fn read_exact(input: &mut dyn Read, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::MalformedContainer(format!("file ends inside {what}")),
        _ => Error::io("<ubf stream>", e),
    })
}

fn read_u16(input: &mut dyn Read, what: &str) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(input, &mut b, what)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(input: &mut dyn Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

/// Parsed header: dims and metadata; the reader is left at the payload.
pub fn read_header(input: &mut dyn Read) -> Result<(Vec<usize>, Metadata)> {
    read_header_sized(input).map(|(dims, meta, _)| (dims, meta))
}

/// [`read_header`] plus the header length in bytes.
fn read_header_sized(input: &mut dyn Read) -> Result<(Vec<usize>, Metadata, u64)> {
    let mut magic = [0u8; 4];
    read_exact(input, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = read_u16(input, "version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dtype = read_u16(input, "dtype")?;
    if dtype != DTYPE_F32_LE {
        return Err(Error::UnsupportedDtype(dtype));
    }
    let ndim = read_u32(input, "ndim")? as usize;
    if ndim > 32 {
        return Err(Error::MalformedContainer(format!("implausible ndim {ndim}")));
    }
    let dims = (0..ndim)
        .map(|_| {
            let mut b = [0u8; 8];
            read_exact(input, &mut b, "dims")?;
            usize::try_from(u64::from_le_bytes(b))
                .map_err(|_| Error::MalformedContainer("dimension exceeds address space".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let meta_len = read_u32(input, "metadata length")? as usize;
    let mut meta = vec![0u8; meta_len];
    read_exact(input, &mut meta, "metadata")?;
    let meta = String::from_utf8(meta).map_err(|_| Error::MalformedContainer("metadata is not UTF-8".into()))?;
    let header_len = 16 + 8 * dims.len() as u64 + meta_len as u64;
    Ok((dims, Metadata::decode(&meta)?, header_len))
}

/// Reads the payload for `dims` into a new buffer.
pub fn read_payload(input: &mut dyn Read, dims: &[usize]) -> Result<Vec<f32>> {
    let count: usize = dims.iter().product();
    let mut data = Vec::with_capacity(count);
    let mut buf = vec![0u8; CHUNK * 4];
    let mut remaining = count;
    while remaining > 0 {
        let n = remaining.min(CHUNK);
        let bytes = &mut buf[..n * 4];
        let mut filled = 0;
        while filled < bytes.len() {
            match input.read(&mut bytes[filled..]) {
                Ok(0) => {
                    return Err(Error::TruncatedPayload {
                        expected: payload_bytes(dims),
                        found: (data.len() * 4 + filled) as u64,
                    })
                }
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io("<ubf stream>", e)),
            }
        }
        data.extend(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
        );
        remaining -= n;
    }
    Ok(data)
}

pub fn read_from(input: &mut dyn Read) -> Result<UbfArray> {
    let (dims, metadata) = read_header(input)?;
    let data = read_payload(input, &dims)?;
    let mut probe = [0u8; 1];
    match input.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(Error::MalformedContainer("trailing bytes after payload".into())),
        Err(e) => return Err(Error::io("<ubf stream>", e)),
    }
    Ok(UbfArray { dims, data, metadata })
}

/// Reads a container, checking the payload length against the file size
/// before allocating.
pub fn ubf_read(path: &Path) -> Result<UbfArray> {
    let with_path = |e: Error| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut input = BufReader::with_capacity(1 << 20, file);
    let (dims, metadata, header_len) = read_header_sized(&mut input).map_err(with_path)?;
    let expected = payload_bytes(&dims);
    let found = file_len.saturating_sub(header_len);
    if found < expected {
        return Err(Error::TruncatedPayload { expected, found });
    }
    let data = read_payload(&mut input, &dims).map_err(with_path)?;
    if found > expected {
        return Err(Error::MalformedContainer("trailing bytes after payload".into()));
    }
    Ok(UbfArray { dims, data, metadata })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(dims: &[usize], data: &[f32], meta: &Metadata) -> Vec<u8> {
        let mut out = Vec::new();
        write_to(&mut out, dims, data, meta).unwrap();
        out
    }

    #[test]
    fn header_layout_is_little_endian() {
        let meta = Metadata::new().with("fs", 1.5);
        let bytes = encode(&[2, 3], &[0.0, 1.0, -2.5, 3.0, 4.0, 5.0], &meta);
        assert_eq!(&bytes[0..4], b"UBF1");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..8], &[1, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..20], &[2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[20..28], &[3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[28..32], &[7, 0, 0, 0]);
        assert_eq!(&bytes[32..39], b"fs=1.5\n");
        assert_eq!(bytes.len(), 39 + 6 * 4);
        assert_eq!(&bytes[47..51], &(-2.5f32).to_le_bytes());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let data = vec![0.1f32, -0.0, f32::MIN_POSITIVE, 1e-42, 3.25, -7.0];
        let meta = Metadata::new().with("kind", "rf").with("angles", "0,0.1");
        let back = read_from(&mut encode(&[2, 3], &data, &meta).as_slice()).unwrap();
        assert_eq!(back.dims, vec![2, 3]);
        assert_eq!(back.metadata, meta);
        assert!(back.data.iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rejects_bad_magic_dtype_and_truncation() {
        let mut bytes = encode(&[2], &[1.0, 2.0], &Metadata::new());
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(read_from(&mut bad.as_slice()), Err(Error::BadMagic(m)) if &m == b"XXXX"));
        let mut bad = bytes.clone();
        bad[6] = 2;
        assert!(matches!(
            read_from(&mut bad.as_slice()),
            Err(Error::UnsupportedDtype(2))
        ));
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(
            read_from(&mut bytes.as_slice()),
            Err(Error::TruncatedPayload { expected: 8, found: 6 })
        ));
    }

    #[test]
    fn rejects_non_finite_and_unencodable_metadata() {
        let mut out = Vec::new();
        assert!(write_to(&mut out, &[1], &[f32::NAN], &Metadata::new()).is_err());
        let meta = Metadata::new().with("a=b", 1);
        assert!(write_to(&mut out, &[1], &[0.0], &meta).is_err());
    }

    #[test]
    fn full_size_payload_length() {
        assert_eq!(payload_bytes(&[128, 2688, 384]), 128 * 2688 * 384 * 4);
    }

    #[test]
    fn grid_metadata_round_trips() {
        let grid = ImageGrid::spanning((-1e-3, 1e-3), 0.05e-3, (5e-3, 6e-3), 0.025e-3).unwrap();
        let mut meta = Metadata::new();
        meta.set_grid(&grid);
        assert_eq!(meta.grid().unwrap(), grid);
    }
}
