//! The six convex test phantoms, as exact polygons in world units (one world
//! unit is one pixel of the 512×512 reconstruction grid).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Vec2};
use crate::grid::{rasterize, ImageGrid, PixelSet};

/// Reconstruction grid size.
pub const TRUTH_SIZE: usize = 512;
/// Oversampling of the data-generation raster relative to the truth grid.
pub const HIRES_FACTOR: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub id: u8,
    pub polygon: ConvexPolygon,
    pub description: String,
}

impl PhantomSpec {
    /// Ground-truth pixel set on the `size`-pixel grid covering the same field
    /// of view as the 512 grid.
    pub fn truth(&self, size: usize) -> PixelSet {
        rasterize(&self.polygon, size, TRUTH_SIZE as f64 / size as f64)
    }

    /// Binary raster at `factor` times the truth resolution.
    pub fn hires(&self, factor: usize) -> ImageGrid {
        let size = TRUTH_SIZE * factor;
        let spacing = 1.0 / factor as f64;
        rasterize(&self.polygon, size, spacing).to_image(spacing)
    }
}

/// Replace vertex `i` by the chord through the points at `fraction` of the
/// way along its two incident edges, for each `(i, fraction)`.
fn truncate_corners(poly: &ConvexPolygon, cuts: &[(usize, f64)]) -> ConvexPolygon {
    let v = poly.vertices();
    let n = v.len();
    let mut pts = Vec::with_capacity(n + cuts.len());
    for i in 0..n {
        match cuts.iter().find(|c| c.0 == i) {
            Some(&(_, fraction)) => {
                let prev = v[(i + n - 1) % n];
                let next = v[(i + 1) % n];
                pts.push(v[i] + (prev - v[i]) * fraction);
                pts.push(v[i] + (next - v[i]) * fraction);
            }
            None => pts.push(v[i]),
        }
    }
    ConvexPolygon::from_points(&pts)
}

/// Deterministic phantom geometry for ids 1 to 6.
pub fn make_phantom(id: u8) -> Result<PhantomSpec> {
    let origin = Vec2::default();
    let (polygon, description) = match id {
        1 => (
            ConvexPolygon::regular(6, 60.0, origin, 0.0),
            "regular hexagon, circumradius 60, edge normal at 90°",
        ),
        2 => (
            ConvexPolygon::regular(6, 70.0, origin, 15.0),
            "regular hexagon, circumradius 70, rotated by 15°",
        ),
        3 => {
            let factors = [1.00, 0.93, 1.05, 0.97, 1.04, 0.95];
            let pts: Vec<Vec2> = factors
                .iter()
                .enumerate()
                .map(|(i, f)| Vec2::from_angle_deg(60.0 * i as f64) * (60.0 * f))
                .collect();
            (
                ConvexPolygon::from_points(&pts),
                "irregular hexagon, radially perturbed phantom 1",
            )
        }
        4 => (
            ConvexPolygon::regular(8, 65.0, origin, 0.0),
            "regular octagon, circumradius 65, edge normals at 22.5° + k·45°",
        ),
        5 => {
            let p1 = ConvexPolygon::regular(6, 60.0, origin, 0.0);
            (
                truncate_corners(&p1, &[(0, 0.2), (2, 0.2)]),
                "phantom 1 with two corners truncated at 20% of the edge length",
            )
        }
        6 => {
            let p2 = ConvexPolygon::regular(6, 70.0, origin, 15.0);
            // two deep cuts opposite each other, four minor ones
            let fractions = [0.05, 0.45, 0.1, 0.1, 0.4, 0.05];
            let cuts: Vec<(usize, f64)> = fractions.iter().copied().enumerate().collect();
            let dodecagon = truncate_corners(&p2, &cuts);
            (
                truncate_corners(&dodecagon, &[(1, 0.3), (6, 0.3)]),
                "phantom 2 with all corners truncated, two of them deeply, plus two shallow facets (14-gon)",
            )
        }
        _ => return Err(Error::InvalidPhantom(id)),
    };
    Ok(PhantomSpec {
        id,
        polygon,
        description: description.to_string(),
    })
}
