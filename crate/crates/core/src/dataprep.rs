//! Magnitude-volume ingestion: a minimal NIfTI-1 reader, in-plane conforming,
//! background noise plus normalization, and the corner-patch exclusion rule.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::grid::RealGrid;
use crate::rng;

pub const NIFTI_HEADER_SIZE: usize = 348;
pub const DEFAULT_TARGET: usize = 256;
pub const DEFAULT_NOISE_MEAN: f64 = 0.003;
pub const DEFAULT_NOISE_SD: f64 = 5.0;
pub const PATCH_SIZE: usize = 30;
pub const EXCLUDE_MEAN_BELOW: f64 = 0.04;
pub const EXCLUDE_SD_BELOW: f64 = 0.0061;

/// Real magnitude volume, `x` varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Voxel size in mm along x, y, z.
    pub spacing: [f64; 3],
    pub data: Vec<f64>,
}

impl Volume {
    pub fn new(nx: usize, ny: usize, nz: usize, spacing: [f64; 3], data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny * nz {
            return Err(Error::arg(format!(
                "volume {nx}x{ny}x{nz} needs {} samples, got {}",
                nx * ny * nz,
                data.len()
            )));
        }
        if let Some(s) = spacing.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::arg(format!("voxel spacing must be positive, got {s}")));
        }
        Ok(Self {
            nx,
            ny,
            nz,
            spacing,
            data,
        })
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[x + self.nx * (y + self.ny * z)]
    }

    /// Axial slice `z` as a grid with rows along x and columns along y.
    pub fn slice(&self, z: usize) -> RealGrid {
        RealGrid::from_fn(self.nx, self.ny, |x, y| self.get(x, y, z))
    }
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Header<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Header<'_> {
    fn raw<const N: usize>(&self, off: usize) -> [u8; N] {
        self.bytes[off..off + N].try_into().expect("header slice")
    }

    fn i16(&self, off: usize) -> i16 {
        match self.endian {
            Endian::Little => i16::from_le_bytes(self.raw(off)),
            Endian::Big => i16::from_be_bytes(self.raw(off)),
        }
    }

    fn f32(&self, off: usize) -> f32 {
        match self.endian {
            Endian::Little => f32::from_le_bytes(self.raw(off)),
            Endian::Big => f32::from_be_bytes(self.raw(off)),
        }
    }
}

fn format_err(field: &str, detail: impl std::fmt::Display) -> Error {
    Error::Format(format!("NIfTI {field}: {detail}"))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads an uncompressed NIfTI-1 volume (`n+1` single file or `ni1` header
/// with a sibling `.img`). Supported datatypes: uint8, int16, float32.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    if bytes.len() < NIFTI_HEADER_SIZE {
        return Err(format_err("sizeof_hdr", format!("file has only {} bytes", bytes.len())));
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let be = i32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let endian = if le == NIFTI_HEADER_SIZE as i32 {
        Endian::Little
    } else if be == NIFTI_HEADER_SIZE as i32 {
        Endian::Big
    } else {
        return Err(format_err("sizeof_hdr", format!("expected 348, found {le}")));
    };
    let h = Header { bytes: &bytes, endian };

    let magic = &bytes[344..348];
    let single_file = match magic {
        b"n+1\0" => true,
        b"ni1\0" => false,
        other => return Err(format_err("magic", format!("unrecognized {other:?}"))),
    };

    let ndim = h.i16(40);
    if !(2..=7).contains(&ndim) {
        return Err(format_err("dim", format!("dim[0] = {ndim} is outside 2..=7")));
    }
    let mut dims = [1usize; 7];
    for (i, d) in dims.iter_mut().enumerate().take(ndim as usize) {
        let v = h.i16(42 + 2 * i);
        if v < 1 {
            return Err(format_err("dim", format!("dim[{}] = {v}", i + 1)));
        }
        *d = v as usize;
    }
    if dims[3..].iter().any(|&d| d != 1) {
        return Err(format_err("dim", "only single 2D or 3D volumes are supported"));
    }
    let (nx, ny, nz) = (dims[0], dims[1], dims[2]);

    let datatype = h.i16(70);
    let width = match datatype {
        2 => 1,
        4 => 2,
        16 => 4,
        other => return Err(format_err("datatype", format!("code {other} is not uint8, int16 or float32"))),
    };

    let mut spacing = [0.0; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        *s = h.f32(80 + 4 * i) as f64;
    }
    if ndim == 2 && !(spacing[2] > 0.0) {
        spacing[2] = 1.0;
    }
    if let Some(s) = spacing.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(format_err("pixdim", format!("voxel size {s} is not positive")));
    }

    let vox_offset = h.f32(108);
    let slope = h.f32(112) as f64;
    let inter = h.f32(116) as f64;

    let expected = nx * ny * nz * width;
    let img_bytes;
    let payload: &[u8] = if single_file {
        if !(vox_offset >= NIFTI_HEADER_SIZE as f32) || vox_offset.fract() != 0.0 {
            return Err(format_err("vox_offset", format!("{vox_offset} is invalid for a single-file volume")));
        }
        let start = vox_offset as usize;
        if bytes.len() != start + expected {
            return Err(format_err(
                "payload",
                format!("expected {expected} data bytes after offset {start}, file holds {}", bytes.len().saturating_sub(start)),
            ));
        }
        &bytes[start..]
    } else {
        let img = path.with_extension("img");
        img_bytes = read_file(&img)?;
        let start = if vox_offset > 0.0 { vox_offset as usize } else { 0 };
        if img_bytes.len() != start + expected {
            return Err(format_err(
                "payload",
                format!("expected {expected} data bytes in {}, found {}", img.display(), img_bytes.len().saturating_sub(start)),
            ));
        }
        &img_bytes[start..]
    };

    let decode = |chunk: &[u8]| -> f64 {
        match (datatype, endian) {
            (2, _) => chunk[0] as f64,
            (4, Endian::Little) => i16::from_le_bytes([chunk[0], chunk[1]]) as f64,
            (4, Endian::Big) => i16::from_be_bytes([chunk[0], chunk[1]]) as f64,
            (_, Endian::Little) => f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64,
            (_, Endian::Big) => f32::from_be_bytes(chunk.try_into().expect("4 bytes")) as f64,
        }
    };
    // a zero or non-finite slope means "no scaling"
    let scaled = slope != 0.0 && slope.is_finite();
    let data = payload
        .chunks_exact(width)
        .map(|c| {
            let v = decode(c);
            if scaled {
                v * slope + inter
            } else {
                v
            }
        })
        .collect();
    Volume::new(nx, ny, nz, spacing, data)
}

/// Bilinear sample at fractional index `(p, q)`. Positions within half a pixel
/// outside the sample grid are clamped to the edge; farther ones are zero.
fn sample_bilinear(img: &RealGrid, p: f64, q: f64) -> f64 {
    let (rows, cols) = img.shape();
    let inside = |v: f64, n: usize| v >= -0.5 && v <= n as f64 - 0.5;
    if !inside(p, rows) || !inside(q, cols) {
        return 0.0;
    }
    let p = p.clamp(0.0, (rows - 1) as f64);
    let q = q.clamp(0.0, (cols - 1) as f64);
    let r0 = p.floor() as usize;
    let c0 = q.floor() as usize;
    let r1 = (r0 + 1).min(rows - 1);
    let c1 = (c0 + 1).min(cols - 1);
    let fr = p - r0 as f64;
    let fc = q - c0 as f64;
    let top = img.get(r0, c0) * (1.0 - fc) + img.get(r0, c1) * fc;
    let bottom = img.get(r1, c0) * (1.0 - fc) + img.get(r1, c1) * fc;
    top * (1.0 - fr) + bottom * fr
}

/// Resamples every axial slice onto a centered `target x target` grid of 1 mm
/// pixels. The field of view is preserved; regions outside it are zero.
pub fn conform_slices(vol: &Volume, target: usize) -> Result<Vec<RealGrid>> {
    if target == 0 {
        return Err(Error::arg("conform target must be positive"));
    }
    let [sx, sy, _] = vol.spacing;
    if !(sx > 0.0 && sy > 0.0) || !sx.is_finite() || !sy.is_finite() {
        return Err(Error::arg(format!("degenerate in-plane spacing {sx} x {sy}")));
    }
    let half_out = (target as f64 - 1.0) / 2.0;
    let cx = (vol.nx as f64 - 1.0) / 2.0;
    let cy = (vol.ny as f64 - 1.0) / 2.0;
    Ok((0..vol.nz)
        .map(|z| {
            let src = vol.slice(z);
            RealGrid::from_fn(target, target, |i, j| {
                let p = (i as f64 - half_out) / sx + cx;
                let q = (j as f64 - half_out) / sy + cy;
                sample_bilinear(&src, p, q)
            })
        })
        .collect())
}

/// Adds Gaussian background noise (raw intensity units), clamps at zero and
/// divides by the maximum. `None` when nothing positive remains.
pub fn prep_slice(slice: &RealGrid, noise_mean: f64, noise_sd: f64, seed: u64) -> Result<Option<RealGrid>> {
    if !(noise_sd >= 0.0) {
        return Err(Error::arg(format!("noise sd must be nonnegative, got {noise_sd}")));
    }
    if let Some(v) = slice.data().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::arg(format!("slice must be nonnegative, found {v}")));
    }
    let mut rng = rng::stream(seed, 0);
    let noisy = slice.map(|&v| (v + noise_mean + noise_sd * rng::normal(&mut rng)).max(0.0));
    let max = noisy.max();
    if !(max > 0.0) {
        warn!("slice is all zero after noise injection; excluded");
        return Ok(None);
    }
    Ok(Some(noisy.map(|v| v / max)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Corner {
    #[default]
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl FromStr for Corner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tl" => Ok(Self::TopLeft),
            "tr" => Ok(Self::TopRight),
            "bl" => Ok(Self::BottomLeft),
            "br" => Ok(Self::BottomRight),
            other => Err(Error::arg(format!("unknown corner `{other}` (tl, tr, bl, br)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchStats {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub exclude: bool,
}

/// The exclusion predicate: both statistics must fall below their thresholds.
pub fn exclusion_rule(mean: f64, sd: f64) -> bool {
    mean < EXCLUDE_MEAN_BELOW && sd < EXCLUDE_SD_BELOW
}

/// Statistics of the 30x30 corner patch of a normalized slice and the
/// resulting keep/exclude decision.
pub fn exclusion_check(grid: &RealGrid, corner: Corner) -> Result<PatchStats> {
    let (rows, cols) = grid.shape();
    if rows < PATCH_SIZE || cols < PATCH_SIZE {
        return Err(Error::arg(format!(
            "slice {rows}x{cols} is smaller than the {PATCH_SIZE}x{PATCH_SIZE} patch"
        )));
    }
    let (r0, c0) = match corner {
        Corner::TopLeft => (0, 0),
        Corner::TopRight => (0, cols - PATCH_SIZE),
        Corner::BottomLeft => (rows - PATCH_SIZE, 0),
        Corner::BottomRight => (rows - PATCH_SIZE, cols - PATCH_SIZE),
    };
    let vals: Vec<f64> = (r0..r0 + PATCH_SIZE)
        .flat_map(|r| (c0..c0 + PATCH_SIZE).map(move |c| (r, c)))
        .map(|(r, c)| *grid.get(r, c))
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(PatchStats {
        mean,
        sd,
        exclude: exclusion_rule(mean, sd),
    })
}

#[derive(Clone, Debug)]
pub struct PrepOptions {
    pub target: usize,
    pub noise_mean: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub corner: Corner,
}

impl Default for PrepOptions {
    fn default() -> Self {
        Self {
            target: DEFAULT_TARGET,
            noise_mean: DEFAULT_NOISE_MEAN,
            noise_sd: DEFAULT_NOISE_SD,
            seed: 0,
            corner: Corner::TopLeft,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PreppedSlice {
    pub index: usize,
    /// Normalized slice; `None` when it was empty after noise injection.
    pub image: Option<RealGrid>,
    pub stats: Option<PatchStats>,
}

impl PreppedSlice {
    pub fn kept(&self) -> bool {
        matches!(self.stats, Some(s) if !s.exclude)
    }
}

/// Conform, noise, normalize and test every slice of `vol`. Slice `z` uses the
/// seed derived from `(seed, volume_index, z)`.
pub fn prep_volume(vol: &Volume, volume_index: usize, opts: &PrepOptions) -> Result<Vec<PreppedSlice>> {
    let slices = conform_slices(vol, opts.target)?;
    let vol_seed = rng::derive_seed(opts.seed, volume_index as u64);
    slices
        .iter()
        .enumerate()
        .map(|(z, s)| {
            let image = prep_slice(s, opts.noise_mean, opts.noise_sd, rng::derive_seed(vol_seed, z as u64))?;
            let stats = image.as_ref().map(|g| exclusion_check(g, opts.corner)).transpose()?;
            Ok(PreppedSlice { index: z, image, stats })
        })
        .collect()
}
