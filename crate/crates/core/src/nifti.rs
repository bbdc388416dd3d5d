//! Single-file NIfTI-1 (`.nii`, optionally gzipped) reading and writing.
//!
//! Reads little- and big-endian files with uint8, int16, int32, float32 or
//! float64 voxels and three spatial dimensions. Writes little-endian only.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::volume::{diagonal_affine, Affine, Dims, MaskVolume, Volume, VolumeError, VoxelGrid};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const DATA_OFFSET: usize = 352;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed NIfTI header field `{field}`: {message}")]
    Format {
        field: &'static str,
        message: String,
    },
    #[error("unsupported NIfTI content: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

impl NiftiError {
    fn format(field: &'static str, message: impl Into<String>) -> Self {
        NiftiError::Format {
            field,
            message: message.into(),
        }
    }

    /// Header field responsible for a format error, if any.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            NiftiError::Format { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// On-disk voxel type codes we understand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(i16)]
pub enum DataType {
    Uint8 = 2,
    Int16 = 4,
    Int32 = 8,
    Float32 = 16,
    Float64 = 64,
}

impl DataType {
    fn from_code(code: i16) -> Option<Self> {
        Some(match code {
            2 => DataType::Uint8,
            4 => DataType::Int16,
            8 => DataType::Int32,
            16 => DataType::Float32,
            64 => DataType::Float64,
            _ => return None,
        })
    }

    pub fn bytes(self) -> usize {
        match self {
            DataType::Uint8 => 1,
            DataType::Int16 => 2,
            DataType::Int32 | DataType::Float32 => 4,
            DataType::Float64 => 8,
        }
    }
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume, NiftiError> {
    let bytes = fs::read(path)?;
    read_volume(&bytes)
}

/// Parses an in-memory NIfTI-1 file, gunzipping first if it starts with the
/// gzip magic.
pub fn read_volume(bytes: &[u8]) -> Result<Volume, NiftiError> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut raw = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut raw)
            .map_err(|e| NiftiError::format("gzip", e.to_string()))?;
        return read_volume(&raw);
    }
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::format(
            "sizeof_hdr",
            format!(
                "file is {} bytes, shorter than the {HEADER_SIZE}-byte header",
                bytes.len()
            ),
        ));
    }
    if LittleEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        parse::<LittleEndian>(bytes)
    } else if BigEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        parse::<BigEndian>(bytes)
    } else {
        Err(NiftiError::format(
            "sizeof_hdr",
            "expected 348 in either byte order",
        ))
    }
}

fn parse<B: ByteOrder>(bytes: &[u8]) -> Result<Volume, NiftiError> {
    let h = &bytes[..HEADER_SIZE];

    let magic = &h[344..348];
    if magic == MAGIC_PAIR {
        return Err(NiftiError::Unsupported("two-file (.hdr/.img) NIfTI".into()));
    }
    if magic != MAGIC_SINGLE {
        return Err(NiftiError::format(
            "magic",
            format!("expected \"n+1\\0\", found {magic:?}"),
        ));
    }

    let mut dim = [0i16; 8];
    B::read_i16_into(&h[40..56], &mut dim);
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(NiftiError::format(
            "dim",
            format!("dim[0] = {ndim} is not in 1..=7"),
        ));
    }
    let ndim = ndim as usize;
    let extent = |i: usize| if i <= ndim { dim[i] } else { 1 };
    let mut dims: Dims = [1; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let e = extent(i + 1);
        if e < 1 {
            return Err(NiftiError::format(
                "dim",
                format!("dim[{}] = {e} must be >= 1", i + 1),
            ));
        }
        *d = e as usize;
    }
    if extent(4) > 1 {
        return Err(NiftiError::Unsupported(format!(
            "4D volume with {} timepoints",
            extent(4)
        )));
    }
    for i in 5..=ndim {
        if extent(i) > 1 {
            return Err(NiftiError::Unsupported(format!(
                "dim[{i}] = {} (more than 4 dimensions)",
                extent(i)
            )));
        }
    }

    let datatype_code = B::read_i16(&h[70..72]);
    let datatype = DataType::from_code(datatype_code)
        .ok_or_else(|| NiftiError::Unsupported(format!("datatype code {datatype_code}")))?;
    let bitpix = B::read_i16(&h[72..74]);
    if bitpix as usize != datatype.bytes() * 8 {
        return Err(NiftiError::format(
            "bitpix",
            format!("{bitpix} does not match datatype {datatype:?}"),
        ));
    }

    let mut pixdim = [0f32; 8];
    B::read_f32_into(&h[76..108], &mut pixdim);
    let mut spacing = [0f64; 3];
    for i in 0..3 {
        let p = pixdim[i + 1].abs() as f64;
        if !(p > 0.0) || !p.is_finite() {
            return Err(NiftiError::format(
                "pixdim",
                format!("pixdim[{}] = {} must be > 0", i + 1, pixdim[i + 1]),
            ));
        }
        spacing[i] = p;
    }

    let vox_offset = B::read_f32(&h[108..112]);
    if !(vox_offset >= HEADER_SIZE as f32) || vox_offset.fract() != 0.0 {
        return Err(NiftiError::format(
            "vox_offset",
            format!("{vox_offset} is not a valid data offset"),
        ));
    }
    let offset = vox_offset as usize;
    let count: usize = dims.iter().product();
    let needed = offset + count * datatype.bytes();
    if bytes.len() < needed {
        return Err(NiftiError::format(
            "vox_offset",
            format!(
                "voxel data truncated: need {needed} bytes, file has {}",
                bytes.len()
            ),
        ));
    }

    let slope = B::read_f32(&h[112..116]) as f64;
    let inter = B::read_f32(&h[116..120]) as f64;
    let (slope, inter) = if slope.is_finite() && slope != 0.0 {
        (slope, if inter.is_finite() { inter } else { 0.0 })
    } else {
        (1.0, 0.0)
    };

    let raw = &bytes[offset..needed];
    let mut data: Vec<f64> = match datatype {
        DataType::Uint8 => raw.iter().map(|&b| b as f64).collect(),
        DataType::Int16 => raw.chunks_exact(2).map(|c| B::read_i16(c) as f64).collect(),
        DataType::Int32 => raw.chunks_exact(4).map(|c| B::read_i32(c) as f64).collect(),
        DataType::Float32 => raw.chunks_exact(4).map(|c| B::read_f32(c) as f64).collect(),
        DataType::Float64 => raw.chunks_exact(8).map(B::read_f64).collect(),
    };
    if slope != 1.0 || inter != 0.0 {
        data.iter_mut().for_each(|v| *v = *v * slope + inter);
    }

    let affine = read_affine::<B>(h, spacing, pixdim[0]);
    let descrip = String::from_utf8_lossy(&h[148..228])
        .trim_end_matches('\0')
        .trim()
        .to_string();
    let vol = Volume::with_affine(dims, spacing, data, affine)?.with_modality(descrip);
    Ok(vol)
}

/// sform if set, else qform, else a diagonal of the spacing.
fn read_affine<B: ByteOrder>(h: &[u8], spacing: [f64; 3], qfac: f32) -> Affine {
    let qform_code = B::read_i16(&h[252..254]);
    let sform_code = B::read_i16(&h[254..256]);
    if sform_code > 0 {
        let mut rows = [0f32; 12];
        B::read_f32_into(&h[280..328], &mut rows);
        let mut a = [[0.0; 4]; 4];
        for r in 0..3 {
            for c in 0..4 {
                a[r][c] = rows[r * 4 + c] as f64;
            }
        }
        a[3][3] = 1.0;
        if det3(&a) != 0.0 {
            return a;
        }
    }
    if qform_code > 0 {
        let q = |o: usize| B::read_f32(&h[o..o + 4]) as f64;
        let (b, c, d) = (q(256), q(260), q(264));
        let (qx, qy, qz) = (q(268), q(272), q(276));
        let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
        let qfac = if qfac < 0.0 { -1.0 } else { 1.0 };
        let r = [
            [
                a * a + b * b - c * c - d * d,
                2.0 * (b * c - a * d),
                2.0 * (b * d + a * c),
            ],
            [
                2.0 * (b * c + a * d),
                a * a + c * c - b * b - d * d,
                2.0 * (c * d - a * b),
            ],
            [
                2.0 * (b * d - a * c),
                2.0 * (c * d + a * b),
                a * a + d * d - c * c - b * b,
            ],
        ];
        let scale = [spacing[0], spacing[1], spacing[2] * qfac];
        let mut m = [[0.0; 4]; 4];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = r[i][j] * scale[j];
            }
        }
        m[0][3] = qx;
        m[1][3] = qy;
        m[2][3] = qz;
        m[3][3] = 1.0;
        return m;
    }
    diagonal_affine(spacing)
}

fn det3(a: &Affine) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn header_bytes(
    dims: Dims,
    spacing: [f64; 3],
    affine: &Affine,
    datatype: DataType,
    descrip: &str,
) -> Vec<u8> {
    type E = LittleEndian;
    let mut h = vec![0u8; DATA_OFFSET];
    E::write_i32(&mut h[0..4], HEADER_SIZE as i32);
    h[38] = b'r';
    let dim: [i16; 8] = [
        3,
        dims[0] as i16,
        dims[1] as i16,
        dims[2] as i16,
        1,
        1,
        1,
        1,
    ];
    E::write_i16_into(&dim, &mut h[40..56]);
    E::write_i16(&mut h[70..72], datatype as i16);
    E::write_i16(&mut h[72..74], (datatype.bytes() * 8) as i16);
    let pixdim: [f32; 8] = [
        1.0,
        spacing[0] as f32,
        spacing[1] as f32,
        spacing[2] as f32,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    E::write_f32_into(&pixdim, &mut h[76..108]);
    E::write_f32(&mut h[108..112], DATA_OFFSET as f32);
    E::write_f32(&mut h[112..116], 1.0);
    E::write_f32(&mut h[116..120], 0.0);
    // millimeters
    h[123] = 2;
    let d = descrip.as_bytes();
    let n = d.len().min(79);
    h[148..148 + n].copy_from_slice(&d[..n]);
    E::write_i16(&mut h[252..254], 0);
    E::write_i16(&mut h[254..256], 2);
    for r in 0..3 {
        for c in 0..4 {
            let o = 280 + (r * 4 + c) * 4;
            E::write_f32(&mut h[o..o + 4], affine[r][c] as f32);
        }
    }
    h[344..348].copy_from_slice(MAGIC_SINGLE);
    h
}

fn finish(mut bytes: Vec<u8>, payload: &[u8], gzip: bool) -> Result<Vec<u8>, NiftiError> {
    bytes.extend_from_slice(payload);
    if !gzip {
        return Ok(bytes);
    }
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&bytes)?;
    Ok(enc.finish()?)
}

fn wants_gzip(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

/// Serializes a mask as uint8 with the reference volume's geometry.
pub fn write_mask(
    mask: &MaskVolume,
    reference: &Volume,
    gzip: bool,
) -> Result<Vec<u8>, NiftiError> {
    mask.ensure_same_dims(reference.dims())?;
    let header = header_bytes(
        reference.dims(),
        reference.spacing(),
        reference.affine(),
        DataType::Uint8,
        "mask",
    );
    let payload: Vec<u8> = mask.data().iter().map(|&b| b as u8).collect();
    finish(header, &payload, gzip)
}

/// Writes a uint8 mask file; gzipped when the path ends in `.gz`.
pub fn save_mask(
    mask: &MaskVolume,
    reference: &Volume,
    path: impl AsRef<Path>,
) -> Result<(), NiftiError> {
    let path = path.as_ref();
    let bytes = write_mask(mask, reference, wants_gzip(path))?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Serializes a volume as float32.
pub fn write_volume(vol: &Volume, gzip: bool) -> Result<Vec<u8>, NiftiError> {
    let header = header_bytes(
        vol.dims(),
        vol.spacing(),
        vol.affine(),
        DataType::Float32,
        vol.modality(),
    );
    let mut payload = vec![0u8; vol.data().len() * 4];
    for (chunk, &v) in payload.chunks_exact_mut(4).zip(vol.data()) {
        LittleEndian::write_f32(chunk, v as f32);
    }
    finish(header, &payload, gzip)
}

pub fn save_volume(vol: &Volume, path: impl AsRef<Path>) -> Result<(), NiftiError> {
    let path = path.as_ref();
    let bytes = write_volume(vol, wants_gzip(path))?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Loads a label file and binarizes it (nonzero is foreground).
pub fn load_mask(path: impl AsRef<Path>) -> Result<(Volume, MaskVolume), NiftiError> {
    let vol = load_volume(path)?;
    let mask = mask_from_labels(&vol)?;
    Ok((vol, mask))
}

pub fn mask_from_labels(vol: &Volume) -> Result<MaskVolume, NiftiError> {
    Ok(MaskVolume::from_vec(
        vol.dims(),
        vol.data().iter().map(|&v| v != 0.0).collect(),
    )?)
}
