//! NPY v1.0 subset: little-endian `<f4`/`<f8`, C order, two dimensions.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use super::{io_err, malformed};
use crate::error::Result;

const MAGIC: &[u8] = b"\x93NUMPY";

pub fn read_npy(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse(&bytes).map_err(|reason| malformed(path, reason))
}

fn parse(bytes: &[u8]) -> std::result::Result<Array2<f64>, String> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err("bad magic".into());
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(format!("unsupported version {}.{}", bytes[6], bytes[7]));
    }
    let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let header = bytes.get(10..10 + hlen).ok_or("truncated header")?;
    let header = std::str::from_utf8(header).map_err(|_| "header is not ASCII")?;
    let body = &bytes[10 + hlen..];

    let descr = dict_value(header, "descr").ok_or("missing descr")?;
    let width = match descr.trim_matches(|c| c == '\'' || c == '"') {
        "<f8" => 8,
        "<f4" => 4,
        d => return Err(format!("unsupported dtype {d}")),
    };
    match dict_value(header, "fortran_order") {
        Some("False") => {}
        Some(_) => return Err("fortran order not supported".into()),
        None => return Err("missing fortran_order".into()),
    }
    let shape = dict_value(header, "shape").ok_or("missing shape")?;
    let dims: Vec<usize> = shape
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| format!("bad shape {shape}")))
        .collect::<std::result::Result<_, _>>()?;
    let [n, p] = dims[..] else {
        return Err(format!("expected 2-D shape, got {shape}"));
    };
    let count = n.checked_mul(p).ok_or("shape overflows")?;
    if body.len() != count * width {
        return Err(format!("expected {} data bytes, found {}", count * width, body.len()));
    }
    let values: Vec<f64> = if width == 8 {
        body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
    } else {
        body.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))).collect()
    };
    Array2::from_shape_vec((n, p), values).map_err(|e| e.to_string())
}

/// Value text for `key` in a Python dict literal, e.g. `'<f8'` or `(3, 4)`.
fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let pat_a = format!("'{key}'");
    let pat_b = format!("\"{key}\"");
    let start = header.find(&pat_a).map(|i| i + pat_a.len()).or_else(|| header.find(&pat_b).map(|i| i + pat_b.len()))?;
    let rest = header[start..].trim_start().strip_prefix(':')?.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')? + 1
    } else if let Some(q @ ('\'' | '"')) = rest.chars().next() {
        rest[1..].find(q)? + 2
    } else {
        rest.find([',', '}']).unwrap_or(rest.len())
    };
    Some(rest[..end].trim())
}

/// Writes a float64 C-order NPY v1.0 file.
pub fn write_npy(path: &Path, data: ArrayView2<'_, f64>) -> Result<()> {
    let (n, p) = data.dim();
    let mut header = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': ({n}, {p}), }}");
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');

    let mut buf = Vec::with_capacity(10 + header.len() + 8 * n * p);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&[1, 0]);
    buf.extend_from_slice(&(header.len() as u16).to_le_bytes());
    buf.extend_from_slice(header.as_bytes());
    for v in data.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))
}
