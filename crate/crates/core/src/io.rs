//! File formats: PGM images, sinogram CSV, slice stacks, polygon and pixel
//! set CSV.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Vec2};
use crate::grid::{ImageGrid, PixelSet};
use crate::projector::{Sinogram, TiltSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// ASCII (`P2`).
    Plain,
    /// Binary (`P5`).
    Raw,
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// 8-bit grey levels: 0 maps to black and `max(1, largest value)` to white;
/// negative values are clamped to black.
pub fn to_grey_levels(img: &ImageGrid) -> Vec<u8> {
    let top = img.pixels().iter().copied().fold(1.0f64, f64::max);
    img.pixels()
        .iter()
        .map(|&v| ((v.max(0.0) / top) * 255.0).round() as u8)
        .collect()
}

pub fn write_pgm(path: impl AsRef<Path>, img: &ImageGrid, format: PgmFormat) -> Result<()> {
    let n = img.size();
    let grey = to_grey_levels(img);
    let mut w = BufWriter::new(fs::File::create(path)?);
    match format {
        PgmFormat::Plain => {
            writeln!(w, "P2\n{n} {n}\n255")?;
            for row in grey.chunks(n) {
                let line: Vec<String> = row.iter().map(u8::to_string).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        PgmFormat::Raw => {
            write!(w, "P5\n{n} {n}\n255\n")?;
            w.write_all(&grey)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a square P2 or P5 file; values are scaled to `[0, 1]` by the maxval.
pub fn read_pgm(path: impl AsRef<Path>, spacing: f64) -> Result<ImageGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    // header: magic, width, height, maxval, separated by whitespace with # comments
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(path, format!("bad header field '{s}'")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if w != h || w == 0 {
        return Err(parse_err(
            path,
            format!("expected a square image, got {w}x{h}"),
        ));
    }
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(path, format!("unsupported maxval {maxval}")));
    }
    let values: Vec<f64> = match fields[0].as_str() {
        "P2" => String::from_utf8_lossy(&bytes[pos..])
            .split_ascii_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(path, format!("bad pixel '{t}'")))
            })
            .collect::<Result<_>>()?,
        "P5" => bytes
            .get(pos + 1..)
            .unwrap_or(&[])
            .iter()
            .map(|&b| b as f64)
            .collect(),
        m => return Err(parse_err(path, format!("unsupported magic {m}"))),
    };
    if values.len() < w * h {
        return Err(parse_err(
            path,
            format!("expected {} pixels, found {}", w * h, values.len()),
        ));
    }
    let pixels = values[..w * h].iter().map(|v| v / maxval as f64).collect();
    ImageGrid::from_pixels(w, spacing, pixels)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    parse_err(path, e.to_string())
}

/// Header `angle_deg,d0,…,d{n-1}`, one row per angle.
pub fn write_sinogram_csv(path: impl AsRef<Path>, sino: &Sinogram) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["angle_deg".to_string()];
    header.extend((0..sino.detector_count()).map(|j| format!("d{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (angle, row) in sino.angles().iter().zip(sino.rows()) {
        let mut rec = vec![angle.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sinogram_csv(path: impl AsRef<Path>, detector_spacing: f64) -> Result<Sinogram> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.get(0) != Some("angle_deg") {
        return Err(parse_err(path, "first column must be angle_deg"));
    }
    let mut angles = Vec::new();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let mut vals = rec.iter().map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(path, format!("bad number '{t}'")))
        });
        angles.push(
            vals.next()
                .unwrap_or_else(|| Err(parse_err(path, "empty row")))?,
        );
        rows.push(vals.collect::<Result<Vec<f64>>>()?);
    }
    let schedule = TiltSchedule::new(angles)?;
    Sinogram::from_rows(schedule, detector_spacing, rows)
}

pub fn slice_file_name(index: usize) -> String {
    format!("slice_{index:04}.csv")
}

pub fn write_stack(dir: impl AsRef<Path>, slices: &[Sinogram]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    slices
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = dir.join(slice_file_name(i));
            write_sinogram_csv(&p, s)?;
            Ok(p)
        })
        .collect()
}

/// Files named `slice_NNNN.csv` in `dir`, in name order.
pub fn stack_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix("slice_"))
                .and_then(|n| n.strip_suffix(".csv"))
                .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_stack(
    dir: impl AsRef<Path>,
    detector_spacing: f64,
) -> Result<Vec<(PathBuf, Sinogram)>> {
    stack_files(dir)?
        .into_iter()
        .map(|p| read_sinogram_csv(&p, detector_spacing).map(|s| (p, s)))
        .collect()
}

/// Header `x,y`, one vertex per line in counter-clockwise order.
pub fn write_polygon_csv(path: impl AsRef<Path>, poly: &ConvexPolygon) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["x", "y"]).map_err(|e| csv_err(path, e))?;
    for v in poly.vertices() {
        w.write_record([v.x.to_string(), v.y.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_polygon_csv(path: impl AsRef<Path>) -> Result<ConvexPolygon> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut pts = Vec::new();
    for rec in r.deserialize::<(f64, f64)>() {
        let (x, y) = rec.map_err(|e| csv_err(path, e))?;
        pts.push(Vec2::new(x, y));
    }
    Ok(ConvexPolygon::from_points(&pts))
}

/// Header `row,col`, one pixel per line in row-major order.
pub fn write_pixelset_csv(path: impl AsRef<Path>, set: &PixelSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["row", "col"])
        .map_err(|e| csv_err(path, e))?;
    for (r, c) in set.iter() {
        w.serialize((r, c)).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pixelset_csv(path: impl AsRef<Path>, size: usize) -> Result<PixelSet> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut set = PixelSet::empty(size);
    for rec in r.deserialize::<(usize, usize)>() {
        let (row, col) = rec.map_err(|e| csv_err(path, e))?;
        if row >= size || col >= size {
            return Err(parse_err(
                path,
                format!("pixel ({row}, {col}) outside a {size} grid"),
            ));
        }
        set.insert(row, col);
    }
    Ok(set)
}
