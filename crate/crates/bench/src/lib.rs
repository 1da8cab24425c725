//! Shared inputs for the benchmarks.

use geotomo::simulate::acquire;
use geotomo::{make_phantom, NoiseSpec, Sinogram, TiltSchedule};

/// Phantom 1 at 50-noise, seed 0.
pub fn noisy_sinogram(schedule: &TiltSchedule) -> Sinogram {
    let p = make_phantom(1).expect("phantom 1 exists");
    acquire(&p.polygon, schedule, Some(NoiseSpec { sigma: 50.0, seed: 0 }))
}
