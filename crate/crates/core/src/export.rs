//! Plot-ready artifacts: 16-bit PGM magnitude images and CSV tables.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::RealImage;

pub const PGM_MAX: u16 = u16::MAX;

/// Write `image` as a binary 16-bit PGM, scaled so its maximum maps to 65535.
///
/// Negative values clip to 0. Returns the scale (the image maximum).
pub fn write_pgm16(path: &Path, image: &RealImage) -> Result<f64> {
    let n = image.side();
    let max = image.max();
    let scale = if max > 0.0 { f64::from(PGM_MAX) / max } else { 0.0 };
    let mut buf = format!("P5\n{n} {n}\n{PGM_MAX}\n").into_bytes();
    buf.reserve(2 * n * n);
    for &v in image.data() {
        let q = (v * scale).round().clamp(0.0, f64::from(PGM_MAX)) as u16;
        buf.extend_from_slice(&q.to_be_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(max)
}

/// Read a binary 16-bit PGM written by [`write_pgm16`]: `(width, height, samples)`.
pub fn read_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::format(path, "not a binary PGM"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format(path, format!("bad PGM field `{s}`")));
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != usize::from(PGM_MAX) {
        return Err(Error::format(path, format!("expected maxval 65535, got {maxval}")));
    }
    let body = bytes.get(pos..).unwrap_or_default();
    if body.len() != 2 * w * h {
        return Err(Error::format(path, "PGM body length mismatch"));
    }
    Ok((w, h, body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()))
}

/// CSV file with a header row and rows of already formatted cells.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::InvalidArgument(format!("CSV row has {} cells, header has {}", r.len(), header.len())));
        }
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
