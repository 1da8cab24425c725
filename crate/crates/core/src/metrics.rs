//! Reconstruction errors between pixel sets: symmetric difference count and
//! Hausdorff distance under the Chebyshev norm.

use serde::{Deserialize, Serialize};

use crate::grid::PixelSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPair {
    pub delta_s: usize,
    pub delta_h: usize,
    /// Exactly one of the two sets was empty; `delta_h` is then the grid
    /// diagonal in Chebyshev distance.
    pub degenerate: bool,
}

/// `|A △ B|`.
pub fn symmetric_difference(a: &PixelSet, b: &PixelSet) -> usize {
    assert_eq!(a.size(), b.size(), "pixel sets on different grids");
    a.mask()
        .iter()
        .zip(b.mask())
        .filter(|(x, y)| x != y)
        .count()
}

/// Chessboard distance from every pixel to the nearest member of `set`, by a
/// forward and a backward raster pass. `usize::MAX` everywhere if `set` is
/// empty.
pub fn chessboard_distance(set: &PixelSet) -> Vec<usize> {
    let n = set.size();
    let inf = usize::MAX / 2;
    let mut d: Vec<usize> = set
        .mask()
        .iter()
        .map(|&m| if m { 0 } else { inf })
        .collect();
    for r in 0..n {
        for c in 0..n {
            let mut v = d[r * n + c];
            if v == 0 {
                continue;
            }
            if c > 0 {
                v = v.min(d[r * n + c - 1] + 1);
            }
            if r > 0 {
                let up = (r - 1) * n;
                v = v.min(d[up + c] + 1);
                if c > 0 {
                    v = v.min(d[up + c - 1] + 1);
                }
                if c + 1 < n {
                    v = v.min(d[up + c + 1] + 1);
                }
            }
            d[r * n + c] = v;
        }
    }
    for r in (0..n).rev() {
        for c in (0..n).rev() {
            let mut v = d[r * n + c];
            if v == 0 {
                continue;
            }
            if c + 1 < n {
                v = v.min(d[r * n + c + 1] + 1);
            }
            if r + 1 < n {
                let down = (r + 1) * n;
                v = v.min(d[down + c] + 1);
                if c > 0 {
                    v = v.min(d[down + c - 1] + 1);
                }
                if c + 1 < n {
                    v = v.min(d[down + c + 1] + 1);
                }
            }
            d[r * n + c] = v;
        }
    }
    if set.is_empty() {
        d.fill(usize::MAX);
    }
    d
}

/// Directed distance `max_{a∈A} min_{b∈B} ‖a − b‖∞` given the distance map of B.
fn directed(a: &PixelSet, dist_b: &[usize]) -> usize {
    a.mask()
        .iter()
        .zip(dist_b)
        .filter(|(m, _)| **m)
        .map(|(_, d)| *d)
        .max()
        .unwrap_or(0)
}

/// Chebyshev Hausdorff distance. Both empty gives 0; exactly one empty gives
/// `size - 1`, the largest distance on the grid.
pub fn hausdorff(a: &PixelSet, b: &PixelSet) -> usize {
    assert_eq!(a.size(), b.size(), "pixel sets on different grids");
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0,
        (true, false) | (false, true) => a.size().saturating_sub(1),
        _ => directed(a, &chessboard_distance(b)).max(directed(b, &chessboard_distance(a))),
    }
}

pub fn errors(truth: &PixelSet, recon: &PixelSet) -> ErrorPair {
    ErrorPair {
        delta_s: symmetric_difference(truth, recon),
        delta_h: hausdorff(truth, recon),
        degenerate: truth.is_empty() != recon.is_empty(),
    }
}
