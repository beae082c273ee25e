//! Raw complex-float array container.
//!
//! An array named `name` is a pair of files:
//!
//! * `name.hdr`: text, first line `# Dimensions`, second line the extents
//!   separated by single spaces.
//! * `name.cfl`: interleaved `(re, im)` little-endian `f32` pairs in
//!   column-major order (first dimension varies fastest).
//!
//! Grids are stored with `dims = [rows, cols, n]`, so element `(r, c)` of
//! slice `s` lives at flat index `r + rows * (c + cols * s)`.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::{Complex32, Complex64};

use super::ComplexGrid;
use crate::error::{Error, Result};

const MAX_DIMS: usize = 16;

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Strips a trailing `.hdr` / `.cfl` so either the stem or one of the pair can be passed.
fn stem(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("hdr") | Some("cfl") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

/// Writes `data` (column-major, `product(dims)` elements) to `path.hdr` / `path.cfl`.
pub fn write_array(path: impl AsRef<Path>, dims: &[usize], data: &[Complex64]) -> Result<()> {
    let base = stem(path.as_ref());
    if dims.is_empty() || dims.len() > MAX_DIMS {
        return Err(Error::arg(format!(
            "unsupported number of dims: {}",
            dims.len()
        )));
    }
    let count: usize = dims.iter().product();
    if count != data.len() {
        return Err(Error::arg(format!(
            "dims {dims:?} describe {count} elements but {} were given",
            data.len()
        )));
    }
    if let Some(parent) = base.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }

    let dims_line = dims
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let hdr = with_ext(&base, "hdr");
    fs::write(&hdr, format!("# Dimensions\n{dims_line}\n")).map_err(|e| Error::io(&hdr, e))?;

    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        let v = Complex32::new(v.re as f32, v.im as f32);
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    let cfl = with_ext(&base, "cfl");
    fs::write(&cfl, bytes).map_err(|e| Error::io(&cfl, e))
}

fn parse_header(text: &str, hdr: &Path) -> Result<Vec<usize>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some(l) if l.starts_with('#') && l.trim_start_matches('#').trim() == "Dimensions" => {}
        other => {
            return Err(Error::Format(format!(
                "{}: expected `# Dimensions`, found {:?}",
                hdr.display(),
                other
            )))
        }
    }
    let line = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: missing dimension line", hdr.display())))?;
    let mut dims = line
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Format(format!("{}: bad extent `{t}`", hdr.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    if dims.is_empty() || dims.len() > MAX_DIMS {
        return Err(Error::Format(format!(
            "{}: unsupported number of dims {}",
            hdr.display(),
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Format(format!(
            "{}: zero extent in {dims:?}",
            hdr.display()
        )));
    }
    while dims.len() > 1 && dims.last() == Some(&1) {
        dims.pop();
    }
    Ok(dims)
}

/// Reads an array pair. Trailing singleton dims are dropped from the result.
pub fn read_array(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<Complex64>)> {
    let base = stem(path.as_ref());
    let hdr = with_ext(&base, "hdr");
    let cfl = with_ext(&base, "cfl");
    let text = fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    let dims = parse_header(&text, &hdr)?;
    let bytes = fs::read(&cfl).map_err(|e| Error::io(&cfl, e))?;

    let count: usize = dims.iter().product();
    let expected = count * 8;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: payload has {} bytes, dims {dims:?} require {expected} bytes",
            cfl.display(),
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(count);
    for pair in bytes.chunks_exact(8) {
        let re = f32::from_le_bytes(pair[0..4].try_into().unwrap());
        let im = f32::from_le_bytes(pair[4..8].try_into().unwrap());
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Format(format!(
                "{}: non-finite sample in payload",
                cfl.display()
            )));
        }
        data.push(Complex64::new(re as f64, im as f64));
    }
    Ok((dims, data))
}

/// Writes a stack of equally shaped grids with dims `[rows, cols, n]`
/// (`[rows, cols]` for a single grid).
pub fn write_grids(path: impl AsRef<Path>, grids: &[ComplexGrid]) -> Result<()> {
    let first = grids
        .first()
        .ok_or_else(|| Error::arg("cannot write an empty grid stack"))?;
    let (rows, cols) = first.shape();
    let mut data = Vec::with_capacity(rows * cols * grids.len());
    for g in grids {
        first.check_shape(g, "grid stack")?;
        for c in 0..cols {
            for r in 0..rows {
                data.push(*g.get(r, c));
            }
        }
    }
    let dims: Vec<usize> = if grids.len() == 1 {
        vec![rows, cols]
    } else {
        vec![rows, cols, grids.len()]
    };
    write_array(path, &dims, &data)
}

/// Reads an array as a stack of `dims[0] x dims[1]` grids; all higher dims are flattened.
pub fn read_grids(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<ComplexGrid>)> {
    let (dims, data) = read_array(path)?;
    let rows = dims[0];
    let cols = dims.get(1).copied().unwrap_or(1);
    let plane = rows * cols;
    let grids = data
        .chunks_exact(plane)
        .map(|chunk| ComplexGrid::from_fn(rows, cols, |r, c| chunk[r + rows * c]))
        .collect();
    Ok((dims, grids))
}
