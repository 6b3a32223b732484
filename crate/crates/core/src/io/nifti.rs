//! Single-file NIfTI-1 (`.nii`, `.nii.gz`) reading and writing.
//!
//! Scalar volumes are written as float32, label maps as int16 and displacement
//! fields as a 5D float32 image (`dim = [5, nx, ny, nz, 1, 3]`) with the vector
//! intent, in millimetres. Orientation is reduced to voxel spacing and the
//! translation column of the sform (or the qform offsets).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::evaluation::LabelMap;
use crate::volume::{DisplacementField, Grid, Volume};

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;
const INTENT_VECTOR: i16 = 1007;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_INT32: i16 = 8;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;
const DT_INT8: i16 = 256;
const DT_UINT16: i16 = 512;
const DT_UINT32: i16 = 768;

/// The header fields this crate uses.
#[derive(Clone, Debug, PartialEq)]
pub struct NiftiHeader {
    /// `dim[1..=dim[0]]`.
    pub dims: Vec<usize>,
    pub pixdim: [f64; 3],
    pub origin: [f64; 3],
    pub datatype: i16,
    pub intent_code: i16,
    pub vox_offset: usize,
    pub scl_slope: f64,
    pub scl_inter: f64,
}

struct Reader<'a> {
    bytes: &'a [u8],
    little: bool,
}

impl Reader<'_> {
    fn take<const N: usize>(&self, offset: usize) -> Result<[u8; N]> {
        let slice = self.bytes.get(offset..offset + N).ok_or_else(|| Error::NiftiParse {
            offset,
            reason: format!("file ends after {} bytes", self.bytes.len()),
        })?;
        let mut out = [0u8; N];
        out.copy_from_slice(slice);
        if !self.little {
            out.reverse();
        }
        Ok(out)
    }

    fn i16(&self, offset: usize) -> Result<i16> {
        Ok(i16::from_le_bytes(self.take(offset)?))
    }

    fn i32(&self, offset: usize) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(offset)?))
    }

    fn f32(&self, offset: usize) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(offset)?) as f64)
    }
}

fn bytes_per_voxel(datatype: i16) -> Result<usize> {
    Ok(match datatype {
        DT_UINT8 | DT_INT8 => 1,
        DT_INT16 | DT_UINT16 => 2,
        DT_INT32 | DT_UINT32 | DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        other => return Err(Error::UnsupportedDatatype(other)),
    })
}

/// Parses the header of an uncompressed NIfTI-1 byte stream.
pub fn parse_header(bytes: &[u8]) -> Result<NiftiHeader> {
    let probe = Reader { bytes, little: true };
    let little = match probe.i32(0)? {
        348 => true,
        v if v.swap_bytes() == 348 => false,
        v => return Err(Error::NiftiParse { offset: 0, reason: format!("sizeof_hdr is {v}, expected 348") }),
    };
    let r = Reader { bytes, little };
    let magic = bytes.get(344..348).ok_or(Error::NiftiParse { offset: 344, reason: "missing magic".into() })?;
    if magic != b"n+1\0" {
        return Err(Error::NiftiParse { offset: 344, reason: format!("magic {magic:?} is not single-file NIfTI-1") });
    }
    let ndim = r.i16(40)?;
    if !(1..=7).contains(&ndim) {
        return Err(Error::NiftiParse { offset: 40, reason: format!("dim[0] = {ndim} out of range") });
    }
    let mut dims = Vec::with_capacity(ndim as usize);
    for k in 1..=ndim as usize {
        let n = r.i16(40 + 2 * k)?;
        if n < 1 {
            return Err(Error::NiftiParse { offset: 40 + 2 * k, reason: format!("dim[{k}] = {n}") });
        }
        dims.push(n as usize);
    }
    let intent_code = r.i16(68)?;
    let datatype = r.i16(70)?;
    bytes_per_voxel(datatype)?;
    let mut pixdim = [1.0; 3];
    for (a, p) in pixdim.iter_mut().enumerate() {
        let v = r.f32(80 + 4 * a)?;
        *p = if v > 0.0 && v.is_finite() { v } else { 1.0 };
    }
    let vox = r.f32(108)?;
    if !(vox >= HEADER_SIZE as f64) {
        return Err(Error::NiftiParse { offset: 108, reason: format!("vox_offset {vox} precedes the data") });
    }
    let slope = r.f32(112)?;
    let inter = r.f32(116)?;
    let qform = r.i16(252)?;
    let sform = r.i16(254)?;
    let origin = if sform > 0 {
        [r.f32(280 + 12)?, r.f32(296 + 12)?, r.f32(312 + 12)?]
    } else if qform > 0 {
        [r.f32(268)?, r.f32(272)?, r.f32(276)?]
    } else {
        [0.0; 3]
    };
    Ok(NiftiHeader {
        dims,
        pixdim,
        origin,
        datatype,
        intent_code,
        vox_offset: vox as usize,
        scl_slope: if slope == 0.0 || !slope.is_finite() { 1.0 } else { slope },
        scl_inter: if inter.is_finite() { inter } else { 0.0 },
    })
}

/// Header plus voxel values with intensity scaling applied, in file order.
pub fn parse(bytes: &[u8]) -> Result<(NiftiHeader, Vec<f64>)> {
    let h = parse_header(bytes)?;
    let little = i32::from_le_bytes(bytes[0..4].try_into().expect("checked")) == 348;
    let width = bytes_per_voxel(h.datatype)?;
    let count: usize = h.dims.iter().product();
    let end = h.vox_offset + count * width;
    let raw = bytes.get(h.vox_offset..end).ok_or_else(|| Error::NiftiParse {
        offset: bytes.len(),
        reason: format!("expected {count} voxels ending at byte {end}"),
    })?;
    let fix = |chunk: &[u8]| -> Vec<u8> {
        let mut b = chunk.to_vec();
        if !little {
            b.reverse();
        }
        b
    };
    let data = raw
        .chunks_exact(width)
        .map(|c| {
            let b = fix(c);
            let v = match h.datatype {
                DT_UINT8 => b[0] as f64,
                DT_INT8 => b[0] as i8 as f64,
                DT_INT16 => i16::from_le_bytes([b[0], b[1]]) as f64,
                DT_UINT16 => u16::from_le_bytes([b[0], b[1]]) as f64,
                DT_INT32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
                DT_UINT32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
                DT_FLOAT32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
                _ => f64::from_le_bytes(b[..8].try_into().unwrap()),
            };
            v * h.scl_slope + h.scl_inter
        })
        .collect();
    Ok((h, data))
}

fn is_gzip_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let result = if is_gzip_path(path) {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(bytes).and_then(|_| enc.finish().map(|_| ()))
    } else {
        fs::write(path, bytes)
    };
    result.map_err(|e| Error::io(path, e))
}

fn spatial_grid(h: &NiftiHeader) -> Result<Grid> {
    let d = |k: usize| h.dims.get(k).copied().unwrap_or(1);
    Grid::new([d(0), d(1), d(2)], h.pixdim, h.origin)
}

fn read(path: &Path) -> Result<(NiftiHeader, Vec<f64>)> {
    parse(&read_bytes(path)?)
}

/// Reads a 3D scalar volume (trailing singleton dimensions allowed).
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let (h, data) = read(path)?;
    if h.dims.iter().skip(3).any(|&n| n != 1) {
        return Err(Error::NiftiParse {
            offset: 40,
            reason: format!("expected a scalar 3D volume, dims {:?}", h.dims),
        });
    }
    Volume::new(spatial_grid(&h)?, data)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let v = read_volume(path)?;
    let data = v
        .data
        .iter()
        .map(|&x| {
            if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
                Ok(x as u32)
            } else {
                Err(Error::invalid(format!("label value {x} is not a non-negative integer")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    LabelMap::new(v.grid, data)
}

/// Reads a displacement field written by [`write_displacement`], converting
/// millimetres back to voxels.
pub fn read_displacement(path: impl AsRef<Path>) -> Result<DisplacementField> {
    let (h, data) = read(path.as_ref())?;
    let ok = h.dims.len() == 5 && h.dims[3] == 1 && h.dims[4] == 3;
    if !ok {
        return Err(Error::NiftiParse {
            offset: 40,
            reason: format!("expected dims [nx, ny, nz, 1, 3], got {:?}", h.dims),
        });
    }
    let grid = spatial_grid(&h)?;
    let n = grid.len();
    let components = std::array::from_fn(|a| data[a * n..(a + 1) * n].iter().map(|v| v / h.pixdim[a]).collect());
    DisplacementField::new(grid, components)
}

fn header_bytes(grid: &Grid, extra_dims: &[usize], datatype: i16, intent: i16) -> Vec<u8> {
    let mut b = vec![0u8; DATA_OFFSET];
    let put_i16 = |b: &mut [u8], o: usize, v: i16| b[o..o + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |b: &mut [u8], o: usize, v: f64| b[o..o + 4].copy_from_slice(&(v as f32).to_le_bytes());
    b[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    let dims: Vec<usize> = grid.dims.iter().chain(extra_dims).copied().collect();
    put_i16(&mut b, 40, dims.len() as i16);
    for (k, &n) in dims.iter().enumerate() {
        put_i16(&mut b, 42 + 2 * k, n as i16);
    }
    for k in dims.len()..7 {
        put_i16(&mut b, 42 + 2 * k, 1);
    }
    put_i16(&mut b, 68, intent);
    put_i16(&mut b, 70, datatype);
    put_i16(&mut b, 72, 8 * bytes_per_voxel(datatype).expect("writer datatype") as i16);
    put_f32(&mut b, 76, 1.0);
    for a in 0..3 {
        put_f32(&mut b, 80 + 4 * a, grid.spacing[a]);
    }
    for k in 3..7 {
        put_f32(&mut b, 80 + 4 * k, 1.0);
    }
    put_f32(&mut b, 108, DATA_OFFSET as f64);
    put_f32(&mut b, 112, 1.0);
    b[123] = 2; // millimetres
    put_i16(&mut b, 254, 1);
    for a in 0..3 {
        let row = 280 + 16 * a;
        put_f32(&mut b, row + 4 * a, grid.spacing[a]);
        put_f32(&mut b, row + 12, grid.origin[a]);
    }
    b[344..348].copy_from_slice(b"n+1\0");
    b
}

pub fn write_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = header_bytes(&v.grid, &[], DT_FLOAT32, 0);
    bytes.reserve(4 * v.data.len());
    for &x in &v.data {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    write_bytes(path.as_ref(), &bytes)
}

pub fn write_labels(m: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = header_bytes(&m.grid, &[], DT_INT16, 0);
    for &l in &m.data {
        let v = i16::try_from(l).map_err(|_| Error::invalid(format!("label {l} exceeds the int16 range")))?;
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(path.as_ref(), &bytes)
}

pub fn write_displacement(d: &DisplacementField, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = header_bytes(&d.grid, &[1, 3], DT_FLOAT32, INTENT_VECTOR);
    for a in 0..3 {
        for &x in &d.components[a] {
            bytes.extend_from_slice(&((x * d.grid.spacing[a]) as f32).to_le_bytes());
        }
    }
    write_bytes(path.as_ref(), &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(seed: u64) -> Volume {
        let g = Grid::new([16, 12, 10], [1.5, 0.75, 2.0], [-10.0, 3.5, 0.25]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Volume::new(g, (0..g.len()).map(|_| rng.random_range(-1000.0..1000.0)).collect()).unwrap()
    }

    #[test]
    fn volume_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["v.nii", "v.nii.gz"] {
            let path = dir.path().join(name);
            let v = random_volume(1);
            write_volume(&v, &path).unwrap();
            let back = read_volume(&path).unwrap();
            assert_eq!(back.grid, v.grid);
            for (a, b) in back.data.iter().zip(&v.data) {
                assert!((a - b).abs() <= f32::EPSILON as f64 * b.abs());
            }
        }
    }

    #[test]
    fn labels_and_fields_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new([6, 5, 4], [2.0, 1.0, 0.5], [0.0; 3]).unwrap();
        let m = LabelMap::new(g, (0..g.len()).map(|x| (x % 7) as u32).collect()).unwrap();
        write_labels(&m, dir.path().join("l.nii")).unwrap();
        assert_eq!(read_labels(dir.path().join("l.nii")).unwrap(), m);

        let d = DisplacementField::from_fn(g, |i| [i[0] as f64 * 0.25, -1.5, i[2] as f64]);
        write_displacement(&d, dir.path().join("d.nii.gz")).unwrap();
        let back = read_displacement(dir.path().join("d.nii.gz")).unwrap();
        for a in 0..3 {
            for (x, y) in back.components[a].iter().zip(&d.components[a]) {
                assert!((x - y).abs() < 1e-6);
            }
        }
        let raw = parse(&read_bytes(&dir.path().join("d.nii.gz")).unwrap()).unwrap().0;
        assert_eq!(raw.dims, vec![6, 5, 4, 1, 3]);
        assert_eq!(raw.intent_code, INTENT_VECTOR);
        assert!(read_volume(dir.path().join("d.nii.gz")).is_err());
    }

    fn minimal(datatype: i16, bitpix: i16, payload: &[u8]) -> Vec<u8> {
        let mut b = vec![0u8; DATA_OFFSET];
        b[0..4].copy_from_slice(&348i32.to_le_bytes());
        for (k, v) in [3i16, 2, 1, 1, 1, 1, 1, 1].iter().enumerate() {
            b[40 + 2 * k..42 + 2 * k].copy_from_slice(&v.to_le_bytes());
        }
        b[70..72].copy_from_slice(&datatype.to_le_bytes());
        b[72..74].copy_from_slice(&bitpix.to_le_bytes());
        b[108..112].copy_from_slice(&352f32.to_le_bytes());
        b[344..348].copy_from_slice(b"n+1\0");
        b.extend_from_slice(payload);
        b
    }

    #[test]
    fn accepts_float32_and_applies_scaling() {
        let payload: Vec<u8> = [1.5f32, -2.0].iter().flat_map(|v| v.to_le_bytes()).collect();
        let (h, data) = parse(&minimal(DT_FLOAT32, 32, &payload)).unwrap();
        assert_eq!(h.dims, vec![2, 1, 1]);
        assert_eq!(data, vec![1.5, -2.0]);

        let mut bytes = minimal(DT_INT16, 16, &[10, 0, 0xff, 0xff]);
        bytes[112..116].copy_from_slice(&2f32.to_le_bytes());
        bytes[116..120].copy_from_slice(&0.5f32.to_le_bytes());
        assert_eq!(parse(&bytes).unwrap().1, vec![20.5, -1.5]);
    }

    #[test]
    fn reads_big_endian_headers() {
        let mut b = vec![0u8; DATA_OFFSET];
        b[0..4].copy_from_slice(&348i32.to_be_bytes());
        for (k, v) in [3i16, 2, 1, 1].iter().enumerate() {
            b[40 + 2 * k..42 + 2 * k].copy_from_slice(&v.to_be_bytes());
        }
        b[70..72].copy_from_slice(&DT_FLOAT32.to_be_bytes());
        b[108..112].copy_from_slice(&352f32.to_be_bytes());
        b[344..348].copy_from_slice(b"n+1\0");
        b.extend(3.25f32.to_be_bytes());
        b.extend((-1f32).to_be_bytes());
        assert_eq!(parse(&b).unwrap().1, vec![3.25, -1.0]);
    }

    #[test]
    fn malformed_input_is_reported() {
        let good = minimal(DT_FLOAT32, 32, &[0; 8]);
        assert!(matches!(parse(&good[..100]), Err(Error::NiftiParse { .. })));
        assert!(matches!(parse(&good[..356]), Err(Error::NiftiParse { .. })));
        let mut bad_magic = good.clone();
        bad_magic[344] = b'x';
        assert!(matches!(parse(&bad_magic), Err(Error::NiftiParse { offset: 344, .. })));
        assert!(matches!(parse(&minimal(128, 24, &[0; 6])), Err(Error::UnsupportedDatatype(128))));
        assert!(matches!(parse(&[0u8; 10]), Err(Error::NiftiParse { offset: 0, .. })));
        assert!(matches!(read_volume("/nonexistent/file.nii"), Err(Error::Io { .. })));
    }
}
