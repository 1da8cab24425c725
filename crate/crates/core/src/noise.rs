//! Additive Gaussian noise on the non-zero projection intensities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::projector::Sinogram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Adds an independent `N(0, σ²)` draw to every strictly positive bin and clamps
/// the result at zero. Bins that are exactly zero stay zero.
///
/// The draw for `(angle i, bin j)` is the `j`-th normal of ChaCha stream `i`
/// under `seed`, so rows can be processed in any order.
pub fn add_noise(sino: &Sinogram, spec: NoiseSpec) -> Sinogram {
    let mut out = sino.clone();
    if spec.sigma == 0.0 {
        return out;
    }
    for i in 0..out.schedule().len() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        for v in out.row_mut(i) {
            let z: f64 = StandardNormal.sample(&mut rng);
            if *v > 0.0 {
                *v = (*v + spec.sigma * z).max(0.0);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantoms::make_phantom;
    use crate::projector::{project, TiltSchedule};

    fn phantom_sinogram() -> Sinogram {
        let p = make_phantom(1).unwrap();
        project(&p.truth(512).to_image(1.0), &TiltSchedule::s180_1())
    }

    #[test]
    fn zero_sigma_is_identity() {
        let s = phantom_sinogram();
        assert_eq!(
            add_noise(
                &s,
                NoiseSpec {
                    sigma: 0.0,
                    seed: 3
                }
            ),
            s
        );
    }

    #[test]
    fn zero_bins_stay_zero() {
        let z = Sinogram::zeros(TiltSchedule::s180_10(), 64, 1.0);
        assert_eq!(
            add_noise(
                &z,
                NoiseSpec {
                    sigma: 50.0,
                    seed: 1
                }
            ),
            z
        );
        let s = phantom_sinogram();
        let n = add_noise(
            &s,
            NoiseSpec {
                sigma: 50.0,
                seed: 1,
            },
        );
        for (a, b) in s.values().iter().zip(n.values()) {
            if *a == 0.0 {
                assert_eq!(*b, 0.0);
            }
            assert!(*b >= 0.0);
        }
    }

    #[test]
    fn reproducible_bitwise() {
        let s = phantom_sinogram();
        let spec = NoiseSpec {
            sigma: 50.0,
            seed: 42,
        };
        let a = add_noise(&s, spec);
        let b = add_noise(&s, spec);
        assert!(a
            .values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(
            a,
            add_noise(
                &s,
                NoiseSpec {
                    sigma: 50.0,
                    seed: 43
                }
            )
        );
    }

    #[test]
    fn generator_moments() {
        // large positive values so clamping never triggers and deltas are the raw draws
        let mut s = Sinogram::zeros(TiltSchedule::s180_1(), 600, 1.0);
        s.values_mut().fill(1.0e6);
        let n = add_noise(
            &s,
            NoiseSpec {
                sigma: 50.0,
                seed: 7,
            },
        );
        let d: Vec<f64> = n
            .values()
            .iter()
            .zip(s.values())
            .map(|(a, b)| a - b)
            .collect();
        assert!(d.len() >= 100_000);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!(mean.abs() <= 0.5, "{mean}");
        assert!((var.sqrt() - 50.0).abs() <= 0.5, "{}", var.sqrt());
    }
}
