//! Parallel-beam forward projection, its exact adjoint, and the shadow, width
//! and support-function measurements derived from a sinogram.
//!
//! A tilt of `θ` degrees rotates the object clockwise. The detector coordinate
//! of a world point `p` is `p · (cos θ, sin θ)`, and detector bin `j` of `n`
//! sits at offset `(j - (n-1)/2) · spacing`. Every pixel deposits its mass on
//! the two nearest bins by linear interpolation, which is what rotating the
//! image with bilinear splatting and summing its columns amounts to. Pixels
//! whose rotated position leaves the square frame are cropped.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{detector_axis, Vec2};
use crate::grid::{bin_row, median_filter_1x3, BinaryMask, ImageGrid, StructuringElement};

/// Tilt angles in degrees, strictly increasing, within `[0, 180]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltSchedule {
    angles: Vec<f64>,
}

impl TiltSchedule {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Schedule("no angles".into()));
        }
        if let Some(a) = angles.iter().find(|a| !(0.0..=180.0).contains(*a)) {
            return Err(Error::Schedule(format!("angle {a} outside [0, 180]")));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Schedule("angles must be strictly increasing".into()));
        }
        Ok(Self { angles })
    }

    /// `{first, first + step, ...}` up to and including `last`.
    pub fn range(first: f64, last: f64, step: f64) -> Result<Self> {
        let n = ((last - first) / step + 1e-9).floor() as usize + 1;
        Self::new((0..n).map(|i| first + step * i as f64).collect())
    }

    /// `S_{180,1}`: 1°, 2°, …, 180°.
    pub fn s180_1() -> Self {
        Self::range(1.0, 180.0, 1.0).unwrap()
    }

    /// `S_{140,1}`: 1°, 2°, …, 140°.
    pub fn s140_1() -> Self {
        Self::range(1.0, 140.0, 1.0).unwrap()
    }

    /// `S_{180,10}`: 1°, 11°, …, 171°.
    pub fn s180_10() -> Self {
        Self::range(1.0, 171.0, 10.0).unwrap()
    }

    /// `S_{140,10}`: 1°, 11°, …, 131°.
    pub fn s140_10() -> Self {
        Self::range(1.0, 131.0, 10.0).unwrap()
    }

    /// Parses a named schedule (`S180_1`, `S140_10`, …) or a comma-separated
    /// list of angles.
    pub fn parse(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '{' | '}' | ' ' | '_' | ','))
            .collect::<String>()
            .to_ascii_uppercase();
        match key.as_str() {
            "S1801" => return Ok(Self::s180_1()),
            "S1401" => return Ok(Self::s140_1()),
            "S18010" => return Ok(Self::s180_10()),
            "S14010" => return Ok(Self::s140_10()),
            _ => {}
        }
        let angles = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Schedule(format!("cannot parse schedule '{s}'")))?;
        Self::new(angles)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Projection data: one row of `detector_count` line sums per tilt angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    schedule: TiltSchedule,
    detector_count: usize,
    detector_spacing: f64,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(schedule: TiltSchedule, detector_count: usize, detector_spacing: f64) -> Self {
        let values = vec![0.0; schedule.len() * detector_count];
        Self {
            schedule,
            detector_count,
            detector_spacing,
            values,
        }
    }

    pub fn from_rows(
        schedule: TiltSchedule,
        detector_spacing: f64,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if rows.len() != schedule.len() {
            return Err(Error::SizeMismatch {
                expected: schedule.len(),
                actual: rows.len(),
            });
        }
        let detector_count = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != detector_count) {
            return Err(Error::SizeMismatch {
                expected: detector_count,
                actual: r.len(),
            });
        }
        Ok(Self {
            schedule,
            detector_count,
            detector_spacing,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn schedule(&self) -> &TiltSchedule {
        &self.schedule
    }

    pub fn angles(&self) -> &[f64] {
        self.schedule.angles()
    }

    pub fn detector_count(&self) -> usize {
        self.detector_count
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.detector_count..(i + 1) * self.detector_count]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.detector_count..(i + 1) * self.detector_count]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.detector_count)
    }

    /// World offset of the center of bin `j` along the detector axis.
    pub fn bin_center(&self, j: usize) -> f64 {
        (j as f64 - (self.detector_count as f64 - 1.0) / 2.0) * self.detector_spacing
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Sinogram) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Sum groups of `factor` adjacent detector bins.
    pub fn bin(&self, factor: usize) -> Result<Sinogram> {
        let rows = self
            .rows()
            .map(|r| bin_row(r, factor))
            .collect::<Result<Vec<_>>>()?;
        Sinogram::from_rows(
            self.schedule.clone(),
            self.detector_spacing * factor as f64,
            rows,
        )
    }

    pub fn scaled(mut self, s: f64) -> Sinogram {
        self.values.iter_mut().for_each(|v| *v *= s);
        self
    }

    /// Keep only the listed angles (matched within 1e-9 degrees).
    pub fn restrict(&self, angles: &[f64]) -> Result<Sinogram> {
        let mut rows = Vec::with_capacity(angles.len());
        for &a in angles {
            let i = self
                .angles()
                .iter()
                .position(|&b| (a - b).abs() < 1e-9)
                .ok_or_else(|| Error::Schedule(format!("angle {a} not in sinogram")))?;
            rows.push(self.row(i).to_vec());
        }
        Sinogram::from_rows(
            TiltSchedule::new(angles.to_vec())?,
            self.detector_spacing,
            rows,
        )
    }
}

/// Precomputed geometry of the pixel-driven projector for one image size,
/// schedule and detector.
#[derive(Debug, Clone)]
pub struct Projector {
    size: usize,
    spacing: f64,
    schedule: TiltSchedule,
    detector_count: usize,
    detector_spacing: f64,
    // angle-major tables: detector coordinate (in bins) split into column and
    // row terms, and the rotated vertical coordinate used for cropping
    det_col: Vec<f64>,
    det_row: Vec<f64>,
    crop_col: Vec<f64>,
    crop_row: Vec<f64>,
    half_frame: f64,
}

impl Projector {
    /// Detector with one bin per pixel column at the pixel spacing.
    pub fn new(size: usize, spacing: f64, schedule: &TiltSchedule) -> Self {
        Self::with_detector(size, spacing, schedule, size, spacing)
    }

    pub fn with_detector(
        size: usize,
        spacing: f64,
        schedule: &TiltSchedule,
        detector_count: usize,
        detector_spacing: f64,
    ) -> Self {
        let c = (size as f64 - 1.0) / 2.0;
        let half_bins = (detector_count as f64 - 1.0) / 2.0;
        let coord: Vec<f64> = (0..size).map(|i| (i as f64 - c) * spacing).collect();
        let mut det_col = Vec::new();
        let mut det_row = Vec::new();
        let mut crop_col = Vec::new();
        let mut crop_row = Vec::new();
        for &theta in schedule.angles() {
            let Vec2 { x: ct, y: st } = detector_axis(theta);
            // x = coord[col], y = -coord[row]
            det_col.extend(coord.iter().map(|&x| x * ct / detector_spacing + half_bins));
            det_row.extend(coord.iter().map(|&y| -y * st / detector_spacing));
            crop_col.extend(coord.iter().map(|&x| -x * st));
            crop_row.extend(coord.iter().map(|&y| -y * ct));
        }
        Self {
            size,
            spacing,
            schedule: schedule.clone(),
            detector_count,
            detector_spacing,
            det_col,
            det_row,
            crop_col,
            crop_row,
            half_frame: size as f64 * spacing / 2.0 + 1e-9,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn schedule(&self) -> &TiltSchedule {
        &self.schedule
    }

    pub fn detector_count(&self) -> usize {
        self.detector_count
    }

    pub fn empty_sinogram(&self) -> Sinogram {
        Sinogram::zeros(
            self.schedule.clone(),
            self.detector_count,
            self.detector_spacing,
        )
    }

    /// Fractional bin position of pixel `(row, col)` at angle index `a`, or
    /// `None` when the pixel is cropped.
    #[inline]
    fn position(&self, a: usize, row: usize, col: usize) -> Option<f64> {
        let n = self.size;
        let t = self.crop_col[a * n + col] + self.crop_row[a * n + row];
        (t.abs() <= self.half_frame).then(|| self.det_col[a * n + col] + self.det_row[a * n + row])
    }

    /// Column ranges for angle `a` and image row `r`: every pixel that can
    /// survive the crop lies in `outer`, and every pixel of `inner` survives it
    /// and lands strictly inside the detector, so it needs no checks.
    fn row_ranges(&self, a: usize, r: usize) -> (Range<usize>, Range<usize>) {
        let n = self.size;
        let base = a * n;
        let k_crop = if n > 1 {
            self.crop_col[base + 1] - self.crop_col[base]
        } else {
            0.0
        };
        let k_det = if n > 1 {
            self.det_col[base + 1] - self.det_col[base]
        } else {
            0.0
        };
        let t0 = self.crop_col[base] + self.crop_row[base + r];
        let f0 = self.det_col[base] + self.det_row[base + r];
        let hf = self.half_frame;
        let (clo, chi) = linear_range(t0, k_crop, -hf, hf, n);
        let outer = clo.saturating_sub(1)..(chi + 1).min(n);
        let (flo, fhi) = linear_range(f0, k_det, 0.0, self.detector_count as f64 - 2.0, n);
        let lo = (clo + 1).max(flo + 1);
        let hi = chi.saturating_sub(1).min(fhi.saturating_sub(1)).max(lo);
        (outer, lo..hi)
    }

    #[inline]
    fn deposit(out: &mut [f64], f: f64, v: f64) {
        let j0 = f.floor();
        let w = f - j0;
        let n = out.len() as isize;
        let j0 = j0 as isize;
        if j0 >= 0 && j0 < n {
            out[j0 as usize] += (1.0 - w) * v;
        }
        if j0 + 1 >= 0 && j0 + 1 < n {
            out[(j0 + 1) as usize] += w * v;
        }
    }

    #[inline]
    fn gather(row: &[f64], f: f64) -> f64 {
        let j0 = f.floor();
        let w = f - j0;
        let n = row.len() as isize;
        let j0 = j0 as isize;
        let mut acc = 0.0;
        if j0 >= 0 && j0 < n {
            acc += (1.0 - w) * row[j0 as usize];
        }
        if j0 + 1 >= 0 && j0 + 1 < n {
            acc += w * row[(j0 + 1) as usize];
        }
        acc
    }

    pub fn project(&self, img: &ImageGrid) -> Sinogram {
        let mut out = self.empty_sinogram();
        self.project_into(img.pixels(), None, &mut out);
        out
    }

    /// Forward projection of `pixels`, optionally restricted to the pixel
    /// indices in `subset` (sorted ascending). Overwrites `out`.
    pub fn project_into(&self, pixels: &[f64], subset: Option<&[usize]>, out: &mut Sinogram) {
        assert_eq!(pixels.len(), self.size * self.size);
        let n = self.size;
        let groups = subset.map(|idx| group_by_row(idx, n));
        out.values
            .par_chunks_mut(self.detector_count)
            .enumerate()
            .for_each(|(a, row_out)| {
                row_out.fill(0.0);
                let dc = &self.det_col[a * n..(a + 1) * n];
                match &groups {
                    Some(groups) => {
                        for &(r, cols) in groups {
                            let (_, inner) = self.row_ranges(a, r);
                            let fr = self.det_row[a * n + r];
                            for &p in cols {
                                let v = pixels[p];
                                if v == 0.0 {
                                    continue;
                                }
                                let c = p - r * n;
                                if inner.contains(&c) {
                                    let f = dc[c] + fr;
                                    let j = f as usize;
                                    let w = f - j as f64;
                                    row_out[j] += (1.0 - w) * v;
                                    row_out[j + 1] += w * v;
                                } else if let Some(f) = self.position(a, r, c) {
                                    Self::deposit(row_out, f, v);
                                }
                            }
                        }
                    }
                    None => {
                        for r in 0..n {
                            let px = &pixels[r * n..(r + 1) * n];
                            let (outer, inner) = self.row_ranges(a, r);
                            let fr = self.det_row[a * n + r];
                            for c in edges(&outer, &inner) {
                                let v = px[c];
                                if v != 0.0 {
                                    if let Some(f) = self.position(a, r, c) {
                                        Self::deposit(row_out, f, v);
                                    }
                                }
                            }
                            // bin indices are monotone in c: accumulate in registers
                            // and flush when the bin changes
                            let (mut cur, mut acc0, mut acc1) = (usize::MAX, 0.0, 0.0);
                            for c in inner {
                                let v = px[c];
                                if v != 0.0 {
                                    let f = dc[c] + fr;
                                    let j = f as usize;
                                    let w = f - j as f64;
                                    if j != cur {
                                        if cur != usize::MAX {
                                            row_out[cur] += acc0;
                                            row_out[cur + 1] += acc1;
                                        }
                                        (cur, acc0, acc1) = (j, 0.0, 0.0);
                                    }
                                    acc0 += (1.0 - w) * v;
                                    acc1 += w * v;
                                }
                            }
                            if cur != usize::MAX {
                                row_out[cur] += acc0;
                                row_out[cur + 1] += acc1;
                            }
                        }
                    }
                }
            });
    }

    /// Exact adjoint of [`Projector::project`].
    pub fn backproject(&self, sino: &Sinogram) -> Result<ImageGrid> {
        self.check(sino)?;
        let mut img = ImageGrid::zeros(self.size, self.spacing);
        self.backproject_into(sino, None, img.pixels_mut());
        Ok(img)
    }

    /// Adjoint evaluated only at the pixels in `subset` (sorted ascending);
    /// other pixels are left untouched.
    pub fn backproject_into(&self, sino: &Sinogram, subset: Option<&[usize]>, out: &mut [f64]) {
        let n = self.size;
        let angles = self.schedule.len();
        let Some(idx) = subset else {
            out.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
                row.fill(0.0);
                for a in 0..angles {
                    let s = sino.row(a);
                    let (outer, inner) = self.row_ranges(a, r);
                    for c in edges(&outer, &inner) {
                        if let Some(f) = self.position(a, r, c) {
                            row[c] += Self::gather(s, f);
                        }
                    }
                    let dc = &self.det_col[a * n..(a + 1) * n];
                    let fr = self.det_row[a * n + r];
                    for c in inner {
                        let f = dc[c] + fr;
                        let j = f as usize;
                        let w = f - j as f64;
                        row[c] += (1.0 - w) * s[j] + w * s[j + 1];
                    }
                }
            });
            return;
        };
        let groups = group_by_row(idx, n);
        out.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
            let Ok(k) = groups.binary_search_by_key(&r, |g| g.0) else {
                return;
            };
            let cols: Vec<usize> = groups[k].1.iter().map(|p| p - r * n).collect();
            let mut acc = vec![0.0; cols.len()];
            for a in 0..angles {
                let s = sino.row(a);
                let (outer, inner) = self.row_ranges(a, r);
                let dc = &self.det_col[a * n..(a + 1) * n];
                let fr = self.det_row[a * n + r];
                for (v, &c) in acc.iter_mut().zip(&cols) {
                    if inner.contains(&c) {
                        let f = dc[c] + fr;
                        let j = f as usize;
                        let w = f - j as f64;
                        *v += (1.0 - w) * s[j] + w * s[j + 1];
                    } else if outer.contains(&c) {
                        if let Some(f) = self.position(a, r, c) {
                            *v += Self::gather(s, f);
                        }
                    }
                }
            }
            for (v, &c) in acc.iter().zip(&cols) {
                row[c] = *v;
            }
        });
    }

    fn check(&self, sino: &Sinogram) -> Result<()> {
        if sino.detector_count != self.detector_count {
            return Err(Error::SizeMismatch {
                expected: self.detector_count,
                actual: sino.detector_count,
            });
        }
        if sino.schedule.len() != self.schedule.len() {
            return Err(Error::SizeMismatch {
                expected: self.schedule.len(),
                actual: sino.schedule.len(),
            });
        }
        Ok(())
    }

    /// Non-zero entries `(pixel index, weight)` of the system-matrix row for
    /// angle index `a` and detector bin `bin`. Appends to `out`.
    pub fn ray_weights(&self, a: usize, bin: usize, out: &mut Vec<(usize, f64)>) {
        let n = self.size;
        let j = bin as f64;
        let mut push = |r: usize, c: usize| {
            if let Some(f) = self.position(a, r, c) {
                let j0 = f.floor();
                let w = f - j0;
                if j0 == j {
                    out.push((r * n + c, 1.0 - w));
                } else if j0 + 1.0 == j && w > 0.0 {
                    out.push((r * n + c, w));
                }
            }
        };
        let dc = &self.det_col[a * n..(a + 1) * n];
        let dr = &self.det_row[a * n..(a + 1) * n];
        // slopes of the bin position per column / per row step
        let kc = if n > 1 { dc[1] - dc[0] } else { 0.0 };
        let kr = if n > 1 { dr[1] - dr[0] } else { 0.0 };
        if kc.abs() >= kr.abs() {
            for r in 0..n {
                // f = dc[0] + kc * c + dr[r] in [j - 1, j + 1)
                let base = dc[0] + dr[r];
                let (lo, hi) = span((j - 1.0 - base) / kc, (j + 1.0 - base) / kc, n);
                for c in lo..hi {
                    push(r, c);
                }
            }
        } else {
            for c in 0..n {
                let base = dc[c] + dr[0];
                let (lo, hi) = span((j - 1.0 - base) / kr, (j + 1.0 - base) / kr, n);
                for r in lo..hi {
                    push(r, c);
                }
            }
        }
    }
}

/// The part of `outer` not covered by `inner`.
fn edges(outer: &Range<usize>, inner: &Range<usize>) -> impl Iterator<Item = usize> {
    if inner.is_empty() {
        outer.clone().chain(0..0)
    } else {
        (outer.start..inner.start).chain(inner.end..outer.end)
    }
}

/// Splits sorted pixel indices into `(row, indices in that row)` groups.
fn group_by_row(idx: &[usize], n: usize) -> Vec<(usize, &[usize])> {
    debug_assert!(idx.windows(2).all(|w| w[0] < w[1]), "subset must be sorted");
    let mut out = Vec::new();
    let mut start = 0;
    while start < idx.len() {
        let r = idx[start] / n;
        let len = idx[start..].partition_point(|&p| p / n == r);
        out.push((r, &idx[start..start + len]));
        start += len;
    }
    out
}

/// Integer `c` in `[0, n)` with `lo <= g0 + k·c <= hi`, as a half-open pair;
/// exact up to rounding at the two ends.
fn linear_range(g0: f64, k: f64, lo: f64, hi: f64, n: usize) -> (usize, usize) {
    if k.abs() < 1e-12 {
        return if (lo..=hi).contains(&g0) {
            (0, n)
        } else {
            (0, 0)
        };
    }
    let (a, b) = ((lo - g0) / k, (hi - g0) / k);
    let (a, b) = (a.min(b), a.max(b));
    let start = a.ceil().clamp(0.0, n as f64);
    let end = (b.floor() + 1.0).clamp(0.0, n as f64);
    if start >= end {
        (0, 0)
    } else {
        (start as usize, end as usize)
    }
}

/// Index range covering the real interval between `a` and `b`, padded by one
/// and clamped to `[0, n)`.
fn span(a: f64, b: f64, n: usize) -> (usize, usize) {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let lo = (lo.floor() - 1.0).max(0.0);
    let hi = (hi.ceil() + 2.0).min(n as f64);
    if lo >= hi {
        (0, 0)
    } else {
        (lo as usize, hi as usize)
    }
}

/// Forward projection at the image resolution (one bin per column).
pub fn project(img: &ImageGrid, schedule: &TiltSchedule) -> Sinogram {
    Projector::new(img.size(), img.spacing(), schedule).project(img)
}

/// Adjoint of [`project`] for an image of `size` pixels and `spacing`.
pub fn backproject(sino: &Sinogram, size: usize) -> Result<ImageGrid> {
    if sino.detector_count() != size {
        return Err(Error::SizeMismatch {
            expected: size,
            actual: sino.detector_count(),
        });
    }
    Projector::new(size, sino.detector_spacing(), sino.schedule()).backproject(sino)
}

/// Per-angle runs of detector bins that record signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowSet {
    schedule: TiltSchedule,
    detector_count: usize,
    detector_spacing: f64,
    /// Inclusive bin ranges per angle.
    intervals: Vec<Vec<(usize, usize)>>,
}

impl ShadowSet {
    pub fn new(
        schedule: TiltSchedule,
        detector_count: usize,
        detector_spacing: f64,
        intervals: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        if intervals.len() != schedule.len() {
            return Err(Error::SizeMismatch {
                expected: schedule.len(),
                actual: intervals.len(),
            });
        }
        Ok(Self {
            schedule,
            detector_count,
            detector_spacing,
            intervals,
        })
    }

    pub fn schedule(&self) -> &TiltSchedule {
        &self.schedule
    }

    pub fn angles(&self) -> &[f64] {
        self.schedule.angles()
    }

    pub fn detector_count(&self) -> usize {
        self.detector_count
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }

    pub fn intervals(&self, i: usize) -> &[(usize, usize)] {
        &self.intervals[i]
    }

    /// The longest run at angle index `i` (first one on ties).
    pub fn primary(&self, i: usize) -> Option<(usize, usize)> {
        longest(&self.intervals[i])
    }

    /// World extent `[lo, hi]` along the detector axis covered by the primary
    /// run, measured to the outer edges of its end bins.
    pub fn extent(&self, i: usize) -> Option<(f64, f64)> {
        let (a, b) = self.primary(i)?;
        let half = (self.detector_count as f64 - 1.0) / 2.0;
        let sp = self.detector_spacing;
        Some(((a as f64 - half - 0.5) * sp, (b as f64 - half + 0.5) * sp))
    }

    /// Angles with a non-empty primary run and their world extents.
    pub fn extents(&self) -> Vec<(f64, (f64, f64))> {
        (0..self.schedule.len())
            .filter_map(|i| self.extent(i).map(|e| (self.angles()[i], e)))
            .collect()
    }
}

fn longest(runs: &[(usize, usize)]) -> Option<(usize, usize)> {
    runs.iter()
        .copied()
        .fold(None, |best: Option<(usize, usize)>, r| match best {
            Some(b) if b.1 - b.0 >= r.1 - r.0 => Some(b),
            _ => Some(r),
        })
}

fn runs(bits: impl Iterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut last = 0;
    for (j, b) in bits.enumerate() {
        match (b, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                out.push((s, j - 1));
                start = None;
            }
            _ => {}
        }
        last = j;
    }
    if let Some(s) = start {
        out.push((s, last));
    }
    out
}

/// How shadows are extracted from projection rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadowOptions {
    /// Signal threshold; bins strictly above it record signal.
    pub threshold: f64,
    /// Keep only the longest run per angle.
    pub convex: bool,
    /// Apply the 1×3 median filter before thresholding.
    pub median: bool,
}

impl Default for ShadowOptions {
    /// Direct thresholding at zero, convex mode, no median filter.
    fn default() -> Self {
        Self {
            threshold: 0.0,
            convex: true,
            median: false,
        }
    }
}

impl ShadowOptions {
    /// Preset for measured data: median filter on.
    pub fn measured() -> Self {
        Self {
            median: true,
            ..Self::default()
        }
    }
}

fn binarize_row(row: &[f64], opts: &ShadowOptions) -> Vec<bool> {
    if opts.median {
        median_filter_1x3(row)
            .into_iter()
            .map(|v| v > opts.threshold)
            .collect()
    } else {
        row.iter().map(|&v| v > opts.threshold).collect()
    }
}

fn finish(bits: &[bool], convex: bool) -> Vec<(usize, usize)> {
    let r = runs(bits.iter().copied());
    if convex {
        longest(&r).into_iter().collect()
    } else {
        r
    }
}

/// Threshold each projection row (after the optional median filter) and
/// collect the runs of bins above the threshold.
pub fn extract_shadows(sino: &Sinogram, opts: ShadowOptions) -> ShadowSet {
    let intervals = sino
        .rows()
        .map(|row| finish(&binarize_row(row, &opts), opts.convex))
        .collect();
    ShadowSet {
        schedule: sino.schedule().clone(),
        detector_count: sino.detector_count(),
        detector_spacing: sino.detector_spacing(),
        intervals,
    }
}

/// Shadow extraction for a stack of slices acquired with one schedule. For
/// every angle the binarized `slices × bins` matrix is opened with `se`, so
/// that neighbouring slices interact.
pub fn extract_shadow_stack(
    sinos: &[Sinogram],
    opts: ShadowOptions,
    se: &StructuringElement,
) -> Result<Vec<ShadowSet>> {
    let Some(first) = sinos.first() else {
        return Ok(Vec::new());
    };
    for s in sinos {
        if s.detector_count() != first.detector_count() || s.angles() != first.angles() {
            return Err(Error::Schedule(
                "slice sinograms disagree in geometry".into(),
            ));
        }
    }
    let (rows, cols) = (sinos.len(), first.detector_count());
    let mut per_slice: Vec<Vec<Vec<(usize, usize)>>> = vec![Vec::new(); rows];
    for a in 0..first.schedule().len() {
        let mut mask = BinaryMask::new(rows, cols);
        for (s, sino) in sinos.iter().enumerate() {
            for (j, b) in binarize_row(sino.row(a), &opts).into_iter().enumerate() {
                mask.set(s, j, b);
            }
        }
        let opened = mask.open(se);
        for (s, slot) in per_slice.iter_mut().enumerate() {
            slot.push(finish(&opened.data[s * cols..(s + 1) * cols], opts.convex));
        }
    }
    Ok(per_slice
        .into_iter()
        .map(|intervals| ShadowSet {
            schedule: first.schedule().clone(),
            detector_count: cols,
            detector_spacing: first.detector_spacing(),
            intervals,
        })
        .collect())
}

/// Widths per angle; angles with an empty shadow are listed in `missing`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WidthSamples {
    pub samples: Vec<(f64, f64)>,
    pub missing: Vec<f64>,
}

/// Shadow length times detector spacing, per angle.
pub fn widths(shadows: &ShadowSet) -> WidthSamples {
    let mut out = WidthSamples::default();
    for (i, &theta) in shadows.angles().iter().enumerate() {
        match shadows.primary(i) {
            Some((a, b)) => out
                .samples
                .push((theta, (b - a + 1) as f64 * shadows.detector_spacing)),
            None => out.missing.push(theta),
        }
    }
    out
}

/// Support-function measurements: unit directions `u_i`, their angles in
/// degrees (in `[0, 360)`), and values `h_i`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SupportMeasurements {
    pub directions: Vec<Vec2>,
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
}

impl SupportMeasurements {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, angle_deg: f64, value: f64) {
        let a = angle_deg.rem_euclid(360.0);
        self.directions.push(Vec2::from_angle_deg(a));
        self.angles.push(a);
        self.values.push(value);
    }
}

/// Two measurements per angle with a shadow: the far edges of the shadow along
/// `+v(θ)` and `-v(θ)`.
pub fn support_measurements(shadows: &ShadowSet) -> SupportMeasurements {
    let mut m = SupportMeasurements::default();
    for (theta, (lo, hi)) in shadows.extents() {
        m.push(theta, hi);
        m.push(theta + 180.0, -lo);
    }
    m
}
