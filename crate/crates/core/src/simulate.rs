//! Simulated acquisition: project an oversampled raster of a polygon, add
//! noise on the fine detector, then bin down to the reconstruction grid.

use crate::geometry::ConvexPolygon;
use crate::grid::rasterize;
use crate::noise::{add_noise, NoiseSpec};
use crate::phantoms::{HIRES_FACTOR, TRUTH_SIZE};
use crate::projector::{Projector, Sinogram, TiltSchedule};

/// Noise-free projection of the `factor`-times oversampled raster on a
/// detector with `512·factor` bins of width `1/factor`.
pub fn hires_sinogram(poly: &ConvexPolygon, schedule: &TiltSchedule, factor: usize) -> Sinogram {
    let size = TRUTH_SIZE * factor;
    let spacing = 1.0 / factor as f64;
    let img = rasterize(poly, size, spacing).to_image(spacing);
    Projector::with_detector(size, spacing, schedule, size, spacing).project(&img)
}

/// Bins a fine sinogram down by `factor` and rescales so that a unit-density
/// pixel of the coarse grid contributes one unit per unit path length.
pub fn downsample(hires: &Sinogram, factor: usize) -> Sinogram {
    hires
        .bin(factor)
        .expect("detector count divisible by factor")
        .scaled(1.0 / (factor * factor) as f64)
}

/// Noisy coarse sinogram from a cached noise-free fine one.
pub fn acquire_from(hires: &Sinogram, factor: usize, noise: Option<NoiseSpec>) -> Sinogram {
    match noise {
        Some(spec) if spec.sigma > 0.0 => downsample(&add_noise(hires, spec), factor),
        _ => downsample(hires, factor),
    }
}

/// Full acquisition at the default oversampling.
pub fn acquire(
    poly: &ConvexPolygon,
    schedule: &TiltSchedule,
    noise: Option<NoiseSpec>,
) -> Sinogram {
    acquire_from(
        &hires_sinogram(poly, schedule, HIRES_FACTOR),
        HIRES_FACTOR,
        noise,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantoms::make_phantom;
    use crate::projector::project;

    #[test]
    fn binned_data_matches_truth_projection() {
        let p = make_phantom(1).unwrap();
        let sched = TiltSchedule::s180_10();
        let fine = acquire(&p.polygon, &sched, None);
        assert_eq!(fine.detector_count(), 512);
        assert_eq!(fine.detector_spacing(), 1.0);
        let coarse = project(&p.truth(512).to_image(1.0), &sched);
        // same total mass per angle up to boundary pixels
        for (a, b) in fine.rows().zip(coarse.rows()) {
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            assert!((sa - sb).abs() / sb < 0.01, "{sa} {sb}");
        }
        let d = fine
            .values()
            .iter()
            .zip(coarse.values())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>();
        assert!(d.sqrt() / coarse.norm() < 0.02);
    }

    #[test]
    fn noise_is_seeded() {
        let p = make_phantom(2).unwrap();
        let sched = TiltSchedule::s180_10();
        let h = hires_sinogram(&p.polygon, &sched, 4);
        let spec = NoiseSpec {
            sigma: 50.0,
            seed: 9,
        };
        assert_eq!(
            acquire_from(&h, 4, Some(spec)),
            acquire_from(&h, 4, Some(spec))
        );
        assert_eq!(
            acquire_from(
                &h,
                4,
                Some(NoiseSpec {
                    sigma: 0.0,
                    seed: 1
                })
            ),
            acquire_from(&h, 4, None)
        );
    }
}
