//! Limited-angle tomography of homogeneous and convex objects: pixel-based
//! algebraic reconstructors (SIRT, BART, DART), geometric reconstructors
//! (GKXR, U-FBP, MPW, 2n-GON), the simulation pipeline and a seeded
//! experiment harness.

pub mod algebraic;
pub mod convexrec;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod phantoms;
pub mod projector;
pub mod simulate;
pub mod solvers;

pub use algebraic::{bart, dart, sirt, BartConfig, DartConfig, SirtConfig};
pub use convexrec::{
    gkxr, mpw, ngon_2n, ufbp, GkxrConfig, NgonConfig, NgonOutcome, NoReconstruction,
};
pub use error::{Error, Result};
pub use geometry::{ConvexPolygon, Vec2};
pub use grid::{ImageGrid, PixelSet};
pub use harness::{
    run_experiment, run_stack, Algorithm, ExperimentConfig, StackConfig, TrialReport,
};
pub use metrics::{errors, ErrorPair};
pub use noise::NoiseSpec;
pub use phantoms::{make_phantom, PhantomSpec};
pub use projector::{ShadowOptions, ShadowSet, Sinogram, TiltSchedule};
