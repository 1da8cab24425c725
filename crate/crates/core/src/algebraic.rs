//! Pixel-based reconstructors: SIRT, BART and DART.
//!
//! All three reconstruct on a square grid with one pixel per detector bin at
//! the detector spacing, using the same projector pair as data generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{threshold, ImageGrid};
use crate::projector::{Projector, Sinogram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SirtConfig {
    pub iterations: usize,
    pub lambda: f64,
    pub threshold: f64,
}

impl Default for SirtConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            lambda: 1.0,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DartConfig {
    pub init_sirt_iters: usize,
    pub dart_iters: usize,
    pub inner_sirt_iters: usize,
    /// Gray level of the object; background is 0 and the threshold `rho/2`.
    pub rho: f64,
    pub fix_fraction: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for DartConfig {
    fn default() -> Self {
        Self {
            init_sirt_iters: 25,
            dart_iters: 25,
            inner_sirt_iters: 10,
            rho: 1.0,
            fix_fraction: 0.85,
            lambda: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BartConfig {
    pub art_sweeps: usize,
    pub relaxation: f64,
    pub lower: f64,
    pub upper: f64,
    /// Half-width of the ART3 tolerance band around each measured ray sum.
    pub band: f64,
    pub contour_threshold: f64,
    pub filter_rounds: usize,
    /// Smoothing weights `(center, edge, corner)`, normalized before use.
    pub smooth_weights: (f64, f64, f64),
}

impl Default for BartConfig {
    fn default() -> Self {
        Self {
            art_sweeps: 5,
            relaxation: 0.3,
            lower: 0.0,
            upper: 1.0,
            band: 1.0,
            contour_threshold: 0.5,
            filter_rounds: 7,
            smooth_weights: (2.0, 1.0, 1.0),
        }
    }
}

fn validate(sino: &Sinogram) -> Result<()> {
    if !sino.is_finite() {
        return Err(Error::NonFinite("sinogram"));
    }
    Ok(())
}

/// Projector whose grid matches the detector of `sino`.
pub fn reconstruction_projector(sino: &Sinogram) -> Projector {
    Projector::new(
        sino.detector_count(),
        sino.detector_spacing(),
        sino.schedule(),
    )
}

fn reciprocal(v: f64) -> f64 {
    if v > 0.0 {
        1.0 / v
    } else {
        0.0
    }
}

/// SIRT state on a fixed projector: the `C` (inverse column sums) and `D`
/// (inverse row sums) weights.
pub struct Sirt<'a> {
    proj: &'a Projector,
    c: Vec<f64>,
    d: Vec<f64>,
    lambda: f64,
}

impl<'a> Sirt<'a> {
    pub fn new(proj: &'a Projector, lambda: f64) -> Self {
        let n = proj.size();
        let ones = vec![1.0; n * n];
        let mut rows = proj.empty_sinogram();
        proj.project_into(&ones, None, &mut rows);
        let mut cols = vec![0.0; n * n];
        let mut ones_sino = proj.empty_sinogram();
        ones_sino.values_mut().fill(1.0);
        proj.backproject_into(&ones_sino, None, &mut cols);
        Self {
            proj,
            c: cols.into_iter().map(reciprocal).collect(),
            d: rows.values().iter().copied().map(reciprocal).collect(),
            lambda,
        }
    }

    /// `iterations` updates `x ← x − λ C Aᵀ D (Ax − b)` starting from `x`.
    pub fn run(&self, b: &Sinogram, x: &mut [f64], iterations: usize) {
        let mut ax = self.proj.empty_sinogram();
        let mut grad = vec![0.0; x.len()];
        for _ in 0..iterations {
            self.proj.project_into(x, None, &mut ax);
            for ((r, &bv), &dv) in ax.values_mut().iter_mut().zip(b.values()).zip(&self.d) {
                *r = (*r - bv) * dv;
            }
            self.proj.backproject_into(&ax, None, &mut grad);
            for ((xv, g), cv) in x.iter_mut().zip(&grad).zip(&self.c) {
                *xv -= self.lambda * cv * g;
            }
        }
    }

    /// `‖D^{1/2}(Ax − b)‖`.
    pub fn weighted_residual(&self, b: &Sinogram, x: &[f64]) -> f64 {
        let mut ax = self.proj.empty_sinogram();
        self.proj.project_into(x, None, &mut ax);
        ax.values()
            .iter()
            .zip(b.values())
            .zip(&self.d)
            .map(|((a, bv), dv)| (a - bv).powi(2) * dv)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirtOutput {
    pub gray: ImageGrid,
    pub binary: ImageGrid,
}

pub fn sirt(sino: &Sinogram, cfg: &SirtConfig) -> Result<SirtOutput> {
    validate(sino)?;
    if cfg.iterations == 0 || !(cfg.lambda > 0.0 && cfg.lambda <= 2.0) {
        return Err(Error::Config(
            "SIRT needs iterations >= 1 and lambda in (0, 2]".into(),
        ));
    }
    let proj = reconstruction_projector(sino);
    let engine = Sirt::new(&proj, cfg.lambda);
    let n = proj.size();
    let mut x = vec![0.0; n * n];
    engine.run(sino, &mut x, cfg.iterations);
    let gray = ImageGrid::from_pixels(n, sino.detector_spacing(), x)?;
    let binary = threshold(&gray, cfg.threshold);
    Ok(SirtOutput { gray, binary })
}

/// Pixels with a 4-neighbour in the other class.
fn boundary_mask(seg: &[bool], n: usize) -> Vec<bool> {
    let mut out = vec![false; n * n];
    for r in 0..n {
        for c in 0..n {
            let v = seg[r * n + c];
            let differs = (r > 0 && seg[(r - 1) * n + c] != v)
                || (r + 1 < n && seg[(r + 1) * n + c] != v)
                || (c > 0 && seg[r * n + c - 1] != v)
                || (c + 1 < n && seg[r * n + c + 1] != v);
            out[r * n + c] = differs;
        }
    }
    out
}

pub fn dart(sino: &Sinogram, cfg: &DartConfig) -> Result<ImageGrid> {
    validate(sino)?;
    if !(cfg.rho > 0.0) || !(0.0..=1.0).contains(&cfg.fix_fraction) {
        return Err(Error::Config(
            "DART needs rho > 0 and fix_fraction in [0, 1]".into(),
        ));
    }
    let proj = reconstruction_projector(sino);
    let n = proj.size();
    let engine = Sirt::new(&proj, cfg.lambda);
    let mut x = vec![0.0; n * n];
    engine.run(sino, &mut x, cfg.init_sirt_iters);
    let cut = cfg.rho / 2.0;
    let mut seg: Vec<bool> = x.iter().map(|&v| v > cut).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut fixed_proj = proj.empty_sinogram();
    let mut free_ones = proj.empty_sinogram();
    let mut ax = proj.empty_sinogram();
    for _ in 0..cfg.dart_iters {
        let boundary = boundary_mask(&seg, n);
        let mut free = Vec::new();
        let mut fixed = Vec::new();
        for p in 0..n * n {
            // one draw per pixel keeps the random stream aligned across iterations
            let keep_free = rng.random::<f64>() >= cfg.fix_fraction;
            if boundary[p] || keep_free {
                free.push(p);
            } else {
                fixed.push(p);
                x[p] = if seg[p] { cfg.rho } else { 0.0 };
            }
        }
        if free.is_empty() {
            break;
        }
        // reduced system A_F x_F = b − A_fixed x_fixed
        proj.project_into(&x, Some(&fixed), &mut fixed_proj);
        let ones = vec![1.0; n * n];
        proj.project_into(&ones, Some(&free), &mut free_ones);
        let d: Vec<f64> = free_ones.values().iter().copied().map(reciprocal).collect();
        let mut grad = vec![0.0; n * n];
        for _ in 0..cfg.inner_sirt_iters {
            proj.project_into(&x, Some(&free), &mut ax);
            for (((r, &bv), &fv), &dv) in ax
                .values_mut()
                .iter_mut()
                .zip(sino.values())
                .zip(fixed_proj.values())
                .zip(&d)
            {
                *r = (*r + fv - bv) * dv;
            }
            proj.backproject_into(&ax, Some(&free), &mut grad);
            for &p in &free {
                x[p] -= cfg.lambda * engine.c[p] * grad[p];
            }
        }
        for (s, &v) in seg.iter_mut().zip(&x) {
            *s = v > cut;
        }
    }
    ImageGrid::from_pixels(
        n,
        sino.detector_spacing(),
        seg.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    )
}

/// Angle visiting order for ART: a fixed stride coprime to the angle count so
/// consecutive rays are far apart in angle.
fn angle_order(m: usize) -> Vec<usize> {
    if m <= 2 {
        return (0..m).collect();
    }
    let gcd = |mut a: usize, mut b: usize| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let mut stride = ((m as f64) * 0.381_966).round().max(1.0) as usize;
    while gcd(stride, m) != 1 {
        stride += 1;
    }
    (0..m).map(|i| (i * stride) % m).collect()
}

/// One round of 3×3 weighted smoothing followed by re-contouring.
fn smooth_and_contour(mask: &[bool], n: usize, w: (f64, f64, f64), t: f64) -> Vec<bool> {
    let total = w.0 + 4.0 * w.1 + 4.0 * w.2;
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= n as isize || c >= n as isize {
            0.0
        } else if mask[r as usize * n + c as usize] {
            1.0
        } else {
            0.0
        }
    };
    let mut out = vec![false; n * n];
    for r in 0..n as isize {
        for c in 0..n as isize {
            let edge = at(r - 1, c) + at(r + 1, c) + at(r, c - 1) + at(r, c + 1);
            let corner = at(r - 1, c - 1) + at(r - 1, c + 1) + at(r + 1, c - 1) + at(r + 1, c + 1);
            let v = (w.0 * at(r, c) + w.1 * edge + w.2 * corner) / total;
            out[r as usize * n + c as usize] = v > t;
        }
    }
    out
}

pub fn bart(sino: &Sinogram, cfg: &BartConfig) -> Result<ImageGrid> {
    validate(sino)?;
    if cfg.lower > cfg.upper {
        return Err(Error::Config("BART needs lower <= upper".into()));
    }
    let proj = reconstruction_projector(sino);
    let n = proj.size();
    let bins = sino.detector_count();
    let mut x = vec![cfg.lower.max(0.0).min(cfg.upper); n * n];
    let mut ray = Vec::new();
    let order = angle_order(sino.angles().len());
    for _ in 0..cfg.art_sweeps {
        for &a in &order {
            let row = sino.row(a);
            for (j, &b) in row.iter().enumerate().take(bins) {
                ray.clear();
                proj.ray_weights(a, j, &mut ray);
                let norm2: f64 = ray.iter().map(|(_, w)| w * w).sum();
                if norm2 == 0.0 {
                    continue;
                }
                let sum: f64 = ray.iter().map(|&(p, w)| w * x[p]).sum();
                let r = b - sum;
                if r.abs() <= cfg.band {
                    continue;
                }
                let target = r - cfg.band * r.signum();
                let step = cfg.relaxation * target / norm2;
                for &(p, w) in &ray {
                    x[p] = (x[p] + step * w).clamp(cfg.lower, cfg.upper);
                }
            }
        }
    }
    let mut mask: Vec<bool> = x.iter().map(|&v| v > cfg.contour_threshold).collect();
    for _ in 0..cfg.filter_rounds {
        mask = smooth_and_contour(&mask, n, cfg.smooth_weights, cfg.contour_threshold);
    }
    ImageGrid::from_pixels(
        n,
        sino.detector_spacing(),
        mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    )
}
