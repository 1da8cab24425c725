//! Square raster images and the pixel-level operations shared by every
//! reconstructor: thresholding, binning, 1×3 median filtering, binary
//! morphology and polygon rasterization.
//!
//! Pixel `(row, col)` of an image of size `n` and spacing `s` has its center at
//! world `x = (col - (n-1)/2)·s`, `y = ((n-1)/2 - row)·s`, i.e. the image center
//! sits at the world origin and rows grow downward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Vec2, EPS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    size: usize,
    pixels: Vec<f64>,
    spacing: f64,
}

impl ImageGrid {
    pub fn zeros(size: usize, spacing: f64) -> Self {
        assert!(size > 0 && spacing > 0.0);
        Self {
            size,
            pixels: vec![0.0; size * size],
            spacing,
        }
    }

    pub fn filled(size: usize, spacing: f64, value: f64) -> Self {
        let mut g = Self::zeros(size, spacing);
        g.pixels.fill(value);
        g
    }

    /// Row-major pixels; fails when the length is not `size²`.
    pub fn from_pixels(size: usize, spacing: f64, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != size * size {
            return Err(Error::SizeMismatch {
                expected: size * size,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            size,
            pixels,
            spacing,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.pixels[row * self.size + col] = v;
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// World coordinate of a pixel center.
    pub fn pixel_center(&self, row: usize, col: usize) -> Vec2 {
        pixel_center(self.size, self.spacing, row, col)
    }

    pub fn is_binary(&self) -> bool {
        self.pixels.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn dot(&self, other: &ImageGrid) -> f64 {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| a * b)
            .sum()
    }
}

pub(crate) fn pixel_center(size: usize, spacing: f64, row: usize, col: usize) -> Vec2 {
    let c = (size as f64 - 1.0) / 2.0;
    Vec2::new((col as f64 - c) * spacing, (c - row as f64) * spacing)
}

/// Binary image: 1 where the input is strictly greater than `t`.
pub fn threshold(img: &ImageGrid, t: f64) -> ImageGrid {
    ImageGrid {
        size: img.size,
        spacing: img.spacing,
        pixels: img
            .pixels
            .iter()
            .map(|&v| if v > t { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// Sum over non-overlapping `factor × factor` blocks. The output spacing is
/// `factor` times the input spacing.
pub fn bin(img: &ImageGrid, factor: usize) -> Result<ImageGrid> {
    if factor == 0 || img.size % factor != 0 {
        return Err(Error::BinFactorMismatch {
            size: img.size,
            factor,
        });
    }
    let out_size = img.size / factor;
    let mut out = ImageGrid::zeros(out_size, img.spacing * factor as f64);
    for r in 0..img.size {
        let orow = r / factor;
        for c in 0..img.size {
            out.pixels[orow * out_size + c / factor] += img.pixels[r * img.size + c];
        }
    }
    Ok(out)
}

/// 1D analogue of [`bin`] used on detector rows.
pub fn bin_row(row: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || row.len() % factor != 0 {
        return Err(Error::BinFactorMismatch {
            size: row.len(),
            factor,
        });
    }
    Ok(row.chunks(factor).map(|c| c.iter().sum()).collect())
}

/// Median of each entry and its two horizontal neighbours. The two end
/// entries only have one neighbour and take the mean of that pair.
pub fn median_filter_1x3(row: &[f64]) -> Vec<f64> {
    let n = row.len();
    if n < 2 {
        return row.to_vec();
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                0.5 * (row[0] + row[1])
            } else if i == n - 1 {
                0.5 * (row[n - 2] + row[n - 1])
            } else {
                let (a, b, c) = (row[i - 1], row[i], row[i + 1]);
                a.max(b).min(a.min(b).max(c))
            }
        })
        .collect()
}

/// Flat structuring element given by its offsets `(dr, dc)` from the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(isize, isize)>,
}

impl StructuringElement {
    /// All offsets with `|dr| + |dc| <= radius`.
    pub fn diamond(radius: usize) -> Self {
        let r = radius as isize;
        let mut offsets = Vec::new();
        for dr in -r..=r {
            for dc in -r..=r {
                if dr.abs() + dc.abs() <= r {
                    offsets.push((dr, dc));
                }
            }
        }
        Self { offsets }
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self::diamond(2)
    }
}

/// Rectangular boolean matrix. Used for the angle-indexed shadow matrices of
/// slice stacks, which need not be square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.cols + c] = v;
    }

    fn at(&self, r: isize, c: isize) -> Option<bool> {
        (r >= 0 && c >= 0 && (r as usize) < self.rows && (c as usize) < self.cols)
            .then(|| self.data[r as usize * self.cols + c as usize])
    }

    /// Erosion; pixels outside the matrix count as set.
    pub fn erode(&self, se: &StructuringElement) -> Self {
        let mut out = Self::new(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[r * self.cols + c] = se
                    .offsets
                    .iter()
                    .all(|&(dr, dc)| self.at(r as isize + dr, c as isize + dc).unwrap_or(true));
            }
        }
        out
    }

    /// Dilation; pixels outside the matrix count as unset.
    pub fn dilate(&self, se: &StructuringElement) -> Self {
        let mut out = Self::new(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[r * self.cols + c] = se
                    .offsets
                    .iter()
                    .any(|&(dr, dc)| self.at(r as isize - dr, c as isize - dc).unwrap_or(false));
            }
        }
        out
    }

    pub fn open(&self, se: &StructuringElement) -> Self {
        self.erode(se).dilate(se)
    }
}

/// Erosion followed by dilation of a binary image.
pub fn morphological_open(img: &ImageGrid, se: &StructuringElement) -> ImageGrid {
    let mask = BinaryMask {
        rows: img.size,
        cols: img.size,
        data: img.pixels.iter().map(|&v| v > 0.5).collect(),
    };
    let opened = mask.open(se);
    ImageGrid {
        size: img.size,
        spacing: img.spacing,
        pixels: opened
            .data
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// Subset of the pixels of a `size × size` grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelSet {
    size: usize,
    mask: Vec<bool>,
}

impl PixelSet {
    pub fn empty(size: usize) -> Self {
        Self {
            size,
            mask: vec![false; size * size],
        }
    }

    /// Pixels whose value exceeds 0.5.
    pub fn from_binary(img: &ImageGrid) -> Self {
        Self {
            size: img.size,
            mask: img.pixels.iter().map(|&v| v > 0.5).collect(),
        }
    }

    pub fn from_coords(size: usize, coords: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut s = Self::empty(size);
        for (r, c) in coords {
            s.insert(r, c);
        }
        s
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn insert(&mut self, r: usize, c: usize) {
        assert!(
            r < self.size && c < self.size,
            "pixel ({r}, {c}) outside grid"
        );
        self.mask[r * self.size + c] = true;
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.mask[r * self.size + c]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.size;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / n, i % n))
    }

    pub fn is_subset(&self, other: &PixelSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn to_image(&self, spacing: f64) -> ImageGrid {
        ImageGrid {
            size: self.size,
            spacing,
            pixels: self
                .mask
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Pixels whose center lies inside or on `poly`.
pub fn rasterize(poly: &ConvexPolygon, size: usize, spacing: f64) -> PixelSet {
    let mut set = PixelSet::empty(size);
    if poly.is_empty() {
        return set;
    }
    let c = (size as f64 - 1.0) / 2.0;
    for row in 0..size {
        let y = (c - row as f64) * spacing;
        let Some((x0, x1)) = horizontal_extent(poly, y) else {
            continue;
        };
        let col_lo = ((x0 - EPS) / spacing + c).ceil().max(0.0);
        let col_hi = ((x1 + EPS) / spacing + c).floor().min(size as f64 - 1.0);
        if col_lo > col_hi {
            continue;
        }
        for col in col_lo as usize..=col_hi as usize {
            set.mask[row * size + col] = true;
        }
    }
    set
}

/// `[xmin, xmax]` of the horizontal line at height `y` inside `poly`.
fn horizontal_extent(poly: &ConvexPolygon, y: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in poly.edges() {
        let (ya, yb) = (a.y, b.y);
        if (ya - y).abs() <= EPS {
            lo = lo.min(a.x);
            hi = hi.max(a.x);
        }
        if (ya < y - EPS && yb > y + EPS) || (ya > y + EPS && yb < y - EPS) {
            let x = a.x + (y - ya) / (yb - ya) * (b.x - a.x);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
        let get = |m: &BinaryMask, r: isize, c: isize, outside: bool| {
            if r < 0 || c < 0 || r >= m.rows as isize || c >= m.cols as isize {
                outside
            } else {
                m.get(r as usize, c as usize)
            }
        };
        let mut er = BinaryMask::new(mask.rows, mask.cols);
        for r in 0..mask.rows {
            for c in 0..mask.cols {
                let mut keep = true;
                for &(dr, dc) in se.offsets() {
                    keep &= get(mask, r as isize + dr, c as isize + dc, true);
                }
                er.set(r, c, keep);
            }
        }
        let mut out = BinaryMask::new(mask.rows, mask.cols);
        for r in 0..mask.rows {
            for c in 0..mask.cols {
                if er.get(r, c) {
                    for &(dr, dc) in se.offsets() {
                        let (rr, cc) = (r as isize + dr, c as isize + dc);
                        if rr >= 0
                            && cc >= 0
                            && (rr as usize) < mask.rows
                            && (cc as usize) < mask.cols
                        {
                            out.set(rr as usize, cc as usize, true);
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn threshold_examples() {
        let z = ImageGrid::zeros(4, 1.0);
        assert_eq!(threshold(&z, 0.5), z);
        let img = ImageGrid::from_pixels(2, 1.0, vec![0.4, 0.6, 0.6, 0.4]).unwrap();
        assert_eq!(threshold(&img, 0.5).pixels(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn bin_examples() {
        let ones = ImageGrid::filled(4, 1.0, 1.0);
        let b = bin(&ones, 2).unwrap();
        assert_eq!(b.size(), 2);
        assert_eq!(b.pixels(), &[4.0; 4]);
        assert_eq!(b.spacing(), 2.0);
        let img = ImageGrid::from_pixels(2, 1.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(bin(&img, 2).unwrap().pixels(), &[10.0]);
        assert!(matches!(
            bin(&ones, 3),
            Err(Error::BinFactorMismatch { .. })
        ));
        assert_eq!(bin_row(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_filter_1x3(&[0.0, 100.0, 0.0]), vec![50.0, 0.0, 50.0]);
        assert_eq!(median_filter_1x3(&[5.0; 4]), vec![5.0; 4]);
        // brute-force sliding median over the interior
        let row = [0.0, 0.0, 7.0, 0.0, 0.0];
        let brute: Vec<f64> = (0..row.len())
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(row.len() - 1);
                let mut w: Vec<f64> = row[lo..=hi].to_vec();
                w.sort_by(f64::total_cmp);
                if w.len() == 3 {
                    w[1]
                } else {
                    0.5 * (w[0] + w[1])
                }
            })
            .collect();
        assert_eq!(median_filter_1x3(&row), brute);
        assert_eq!(brute, vec![0.0; 5]);
        assert_eq!(median_filter_1x3(&[3.0]), vec![3.0]);
    }

    #[test]
    fn diamond_has_thirteen_pixels() {
        assert_eq!(StructuringElement::diamond(2).offsets().len(), 13);
    }

    #[test]
    fn opening_examples() {
        let se = StructuringElement::default();
        let mut dot = ImageGrid::zeros(64, 1.0);
        dot.set(30, 30, 1.0);
        assert_eq!(morphological_open(&dot, &se).sum(), 0.0);

        let mut sq = ImageGrid::zeros(64, 1.0);
        for r in 20..40 {
            for c in 20..40 {
                sq.set(r, c, 1.0);
            }
        }
        let opened = morphological_open(&sq, &se);
        let mask = BinaryMask {
            rows: 64,
            cols: 64,
            data: sq.pixels().iter().map(|&v| v > 0.5).collect(),
        };
        let oracle = brute_open(&mask, &se);
        let oracle_img: Vec<f64> = oracle
            .data
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(opened.pixels(), &oracle_img[..]);
        // interior of the square survives
        for r in 22..38 {
            for c in 22..38 {
                assert_eq!(opened.get(r, c), 1.0);
            }
        }

        let full = ImageGrid::filled(16, 1.0, 1.0);
        assert_eq!(morphological_open(&full, &se), full);
    }

    #[test]
    fn rasterize_examples() {
        // pixel centers of a 20-grid sit at half-integers; this square covers a 10×10 block
        let sq = ConvexPolygon::rectangle(-4.9, -4.9, 4.9, 4.9);
        assert_eq!(rasterize(&sq, 20, 1.0).len(), 100);
        assert!(rasterize(&ConvexPolygon::empty(), 20, 1.0).is_empty());
        // boundary pixels count
        let on = ConvexPolygon::rectangle(-0.5, -0.5, 0.5, 0.5);
        assert_eq!(rasterize(&on, 4, 1.0).len(), 4);
    }

    #[test]
    fn hexagon_raster_count_matches_area() {
        let r = 60.0;
        let hex = ConvexPolygon::regular(6, r, Vec2::default(), 0.0);
        let n = rasterize(&hex, 512, 1.0).len() as f64;
        let area = 1.5 * 3f64.sqrt() * r * r;
        assert!((n - area).abs() / area < 0.005, "{n} vs {area}");
    }

    proptest! {
        #[test]
        fn bin_conserves_mass(vals in proptest::collection::vec(0u32..1000, 64)) {
            let img = ImageGrid::from_pixels(8, 1.0, vals.iter().map(|&v| v as f64).collect()).unwrap();
            for f in [1usize, 2, 4, 8] {
                prop_assert_eq!(bin(&img, f).unwrap().sum(), img.sum());
            }
        }

        #[test]
        fn threshold_idempotent_on_binary(bits in proptest::collection::vec(any::<bool>(), 36), t in 0.01f64..0.99) {
            let img = ImageGrid::from_pixels(6, 1.0, bits.iter().map(|&b| b as u8 as f64).collect()).unwrap();
            let once = threshold(&img, 0.5);
            prop_assert_eq!(threshold(&once, t), once);
        }

        #[test]
        fn opening_is_anti_extensive(bits in proptest::collection::vec(any::<bool>(), 144)) {
            let img = ImageGrid::from_pixels(12, 1.0, bits.iter().map(|&b| b as u8 as f64).collect()).unwrap();
            let opened = morphological_open(&img, &StructuringElement::default());
            prop_assert!(PixelSet::from_binary(&opened).is_subset(&PixelSet::from_binary(&img)));
        }

        #[test]
        fn rasterize_is_monotone(r in 5.0f64..40.0, shrink in 0.1f64..1.0, phase in 0.0f64..60.0) {
            let big = ConvexPolygon::regular(6, r, Vec2::new(1.3, -0.7), phase);
            let small = big.scaled(shrink);
            // scaling about the origin keeps `small` inside `big` only if the origin is inside
            prop_assume!(small.vertices().iter().all(|&v| big.contains(v, 0.0)));
            prop_assert!(rasterize(&small, 96, 1.0).is_subset(&rasterize(&big, 96, 1.0)));
        }
    }
}
