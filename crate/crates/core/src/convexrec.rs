//! Object-based reconstructors that return a convex polygon: U-FBP, MPW,
//! GKXR and 2n-GON.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    chord_length, convex_hull, detector_axis, halfspace_intersection, ConvexPolygon, Halfspace,
    Line, Vec2,
};
use crate::projector::{support_measurements, widths, ShadowSet, Sinogram};
use crate::solvers::{
    anneal_minimize_with, constrained_lsq, poly_local_minima, polyfit_ls, AnnealConfig,
    ConstrainedLsqProblem,
};

/// A strip `lo <= v(θ)·x <= hi` in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub angle: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Strip {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn bound_of(shadows: &ShadowSet) -> f64 {
    shadows.detector_count() as f64 * shadows.detector_spacing() / 2.0
}

fn strips_of(shadows: &ShadowSet) -> Vec<Strip> {
    shadows
        .extents()
        .into_iter()
        .map(|(angle, (lo, hi))| Strip { angle, lo, hi })
        .collect()
}

/// Intersection of strips inside the square of half-width `bound`.
pub fn intersect_strips(strips: &[Strip], bound: f64) -> ConvexPolygon {
    let hs: Vec<Halfspace> = strips
        .iter()
        .flat_map(|s| {
            let v = detector_axis(s.angle);
            [Halfspace::new(v, s.hi), Halfspace::new(-v, -s.lo)]
        })
        .collect();
    halfspace_intersection(&hs, bound)
}

/// Intersection of the strips backprojected from every non-empty shadow.
pub fn ufbp(shadows: &ShadowSet) -> Result<ConvexPolygon> {
    let strips = strips_of(shadows);
    if strips.len() < 2 {
        return Err(Error::InsufficientShadows {
            usable: strips.len(),
        });
    }
    Ok(intersect_strips(&strips, bound_of(shadows)))
}

/// Support measurements made consistent by constrained least squares, then
/// intersected as halfspaces.
pub fn mpw(shadows: &ShadowSet) -> Result<ConvexPolygon> {
    let usable = shadows.extents().len();
    if usable < 2 {
        return Err(Error::InsufficientShadows { usable });
    }
    let m = support_measurements(shadows);
    // sort by direction and average repeated directions (θ and θ + 180° can both be measured)
    let mut pairs: Vec<(f64, f64)> = m
        .angles
        .iter()
        .copied()
        .zip(m.values.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut angles: Vec<f64> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for (a, h) in pairs {
        match angles.last() {
            Some(&last) if (a - last).abs() < 1e-9 => {
                *targets.last_mut().unwrap() += h;
                *counts.last_mut().unwrap() += 1.0;
            }
            _ => {
                angles.push(a);
                targets.push(h);
                counts.push(1.0);
            }
        }
    }
    if angles.len() > 1 && angles[0] + 360.0 - angles[angles.len() - 1] < 1e-9 {
        let (h, c) = (targets.pop().unwrap(), counts.pop().unwrap());
        angles.pop();
        targets[0] += h;
        counts[0] += c;
    }
    // the boundary lies somewhere inside the outermost occupied bin; its
    // center is the unbiased estimate the least-squares fit assumes
    let offset = 0.5 * shadows.detector_spacing();
    for (t, c) in targets.iter_mut().zip(&counts) {
        *t = *t / c - offset;
    }
    let y = constrained_lsq(&ConstrainedLsqProblem {
        angles: angles.clone(),
        targets,
    })?;
    let hs: Vec<Halfspace> = angles
        .iter()
        .zip(&y)
        .map(|(&a, &h)| Halfspace::new(Vec2::from_angle_deg(a), h))
        .collect();
    Ok(halfspace_intersection(&hs, bound_of(shadows)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GkxrConfig {
    /// Tilt angles of the four measured directions, in degrees.
    pub directions: [f64; 4],
    /// Measurement lines per direction.
    pub k: usize,
    /// Pairs closer than this (in detector spacings) are dropped from the hull.
    pub pair_merge_threshold: f64,
    pub iir_rounds: usize,
    /// Radius of the window known to contain the object, as a fraction of the
    /// detector length.
    pub window_fraction: f64,
    /// Initial annealing temperature as a fraction of the starting objective.
    pub temperature_fraction: f64,
    /// Final annealing temperature as a fraction of the starting objective.
    pub min_temperature_fraction: f64,
    /// Share of annealing moves that redraw a coordinate uniformly on its line.
    pub jump_probability: f64,
    /// Share of annealing moves that merge a pair, or split a merged one.
    pub pair_probability: f64,
    /// Share of annealing moves that open a pair to the measured chord length.
    pub chord_probability: f64,
    /// Independent annealing runs; the one with the lowest misfit is kept.
    pub restarts: usize,
    pub anneal: AnnealConfig,
}

impl Default for GkxrConfig {
    fn default() -> Self {
        Self {
            directions: [1.0, 28.0, 91.0, 118.0],
            k: 40,
            pair_merge_threshold: 1.0,
            iir_rounds: 50,
            window_fraction: 0.45,
            temperature_fraction: 1e-2,
            min_temperature_fraction: 1e-5,
            jump_probability: 0.1,
            pair_probability: 0.1,
            chord_probability: 0.1,
            restarts: 1,
            anneal: AnnealConfig {
                step_scale: 20.0,
                steps_per_temperature: 1000,
                polish_evaluations: 60_000,
                ..AnnealConfig::default()
            },
        }
    }
}

impl GkxrConfig {
    /// The noise-free setting: no pre-smoothing, and more restarts since
    /// the misfit then identifies the object sharply.
    pub fn noise_free() -> Self {
        Self {
            iir_rounds: 0,
            restarts: 8,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GkxrOutput {
    pub polygon: ConvexPolygon,
    pub initial_objective: f64,
    pub final_objective: f64,
}

impl GkxrOutput {
    /// All point pairs merged: the data show no object.
    pub fn no_object(&self) -> bool {
        self.polygon.is_empty()
    }
}

/// Smooths the non-zero run of a projection with the recursion
/// `y'_i = (y_i + y'_{i-1}) / 2`, seeded with 0. Successive rounds alternate
/// direction so the profile is not shifted.
pub fn iir_smooth(row: &[f64], rounds: usize) -> Vec<f64> {
    let mut out = row.to_vec();
    let Some(first) = row.iter().position(|&v| v > 0.0) else {
        return out;
    };
    let last = row.iter().rposition(|&v| v > 0.0).unwrap();
    let run = &mut out[first..=last];
    let pass = |it: &mut dyn Iterator<Item = &mut f64>| {
        let mut prev = 0.0;
        for v in it {
            prev = 0.5 * (*v + prev);
            *v = prev;
        }
    };
    for r in 0..rounds {
        if r % 2 == 0 {
            pass(&mut run.iter_mut());
        } else {
            pass(&mut run.iter_mut().rev());
        }
    }
    out
}

/// Linear interpolation of a detector row at world offset `s`.
fn sample_row(row: &[f64], spacing: f64, s: f64) -> f64 {
    let n = row.len();
    let f = s / spacing + (n as f64 - 1.0) / 2.0;
    if f < 0.0 || f > n as f64 - 1.0 {
        return 0.0;
    }
    let j = (f.floor() as usize).min(n.saturating_sub(2));
    let w = f - j as f64;
    (1.0 - w) * row[j] + w * row.get(j + 1).copied().unwrap_or(0.0)
}

struct GkxrProblem {
    lines: Vec<Line>,
    half_lengths: Vec<f64>,
    measured: Vec<f64>,
    merge: f64,
}

impl GkxrProblem {
    fn points(&self, z: &[f64], out: &mut Vec<Vec2>) {
        out.clear();
        for (i, line) in self.lines.iter().enumerate() {
            let l = self.half_lengths[i];
            let a = z[2 * i].clamp(-l, l);
            let b = z[2 * i + 1].clamp(-l, l);
            if (a - b).abs() >= self.merge {
                out.push(line.point + line.direction * a);
                out.push(line.point + line.direction * b);
            }
        }
    }

    fn objective(&self, z: &[f64], buf: &mut Vec<Vec2>) -> f64 {
        self.points(z, buf);
        let hull = convex_hull(buf);
        self.lines
            .iter()
            .zip(&self.measured)
            .map(|(line, m)| (m - chord_length(&hull, line)).powi(2))
            .sum()
    }
}

/// Fits a convex polygon to four projections through point pairs on the
/// measurement lines, by simulated annealing on the chord misfit.
pub fn gkxr(sino: &Sinogram, cfg: &GkxrConfig) -> Result<GkxrOutput> {
    if cfg.k < 2 {
        return Err(Error::Config("GKXR needs k >= 2".into()));
    }
    if !sino.is_finite() {
        return Err(Error::NonFinite("sinogram"));
    }
    let sp = sino.detector_spacing();
    let radius = cfg.window_fraction * sino.detector_count() as f64 * sp;
    let mut lines = Vec::new();
    let mut half_lengths = Vec::new();
    let mut measured = Vec::new();
    for &theta in &cfg.directions {
        let i = sino
            .angles()
            .iter()
            .position(|&a| (a - theta).abs() < 1e-9)
            .ok_or_else(|| Error::Config(format!("GKXR direction {theta}° not in sinogram")))?;
        let row = iir_smooth(sino.row(i), cfg.iir_rounds);
        for j in 0..cfg.k {
            let s = -radius + (j as f64 + 0.5) * 2.0 * radius / cfg.k as f64;
            lines.push(Line::detector(theta, s));
            half_lengths.push((radius * radius - s * s).max(0.0).sqrt());
            measured.push(sample_row(&row, sp, s));
        }
    }
    let problem = GkxrProblem {
        lines,
        half_lengths,
        measured,
        merge: cfg.pair_merge_threshold * sp,
    };
    let mut best: Option<GkxrOutput> = None;
    for r in 0..cfg.restarts.max(1) {
        let out = gkxr_run(&problem, cfg, sp, cfg.anneal.seed.wrapping_add(r as u64));
        if best
            .as_ref()
            .is_none_or(|b| out.final_objective < b.final_objective)
        {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one run"))
}

/// One annealing run from a random start.
fn gkxr_run(problem: &GkxrProblem, cfg: &GkxrConfig, sp: f64, seed: u64) -> GkxrOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let z0: Vec<f64> = problem
        .half_lengths
        .iter()
        .flat_map(|&l| [rng.random_range(-l..=l), rng.random_range(-l..=l)])
        .collect();
    let mut buf = Vec::new();
    let f0 = problem.objective(&z0, &mut buf);
    let merge = problem.merge;
    let scale = if f0 > 0.0 { f0 } else { 1.0 };
    let anneal = AnnealConfig {
        step_scale: cfg.anneal.step_scale * sp,
        initial_temperature: cfg.temperature_fraction * scale,
        min_temperature: cfg.min_temperature_fraction * scale,
        seed,
        ..cfg.anneal.clone()
    };
    let half_lengths = &problem.half_lengths;
    let measured = &problem.measured;
    let (p_jump, p_pair, p_fit) = (
        cfg.jump_probability,
        cfg.pair_probability,
        cfg.chord_probability,
    );
    let mut obj_buf = Vec::new();
    let z = anneal_minimize_with(
        |z| problem.objective(z, &mut obj_buf),
        &z0,
        &anneal,
        |rng, z, scale, undo| {
            let i = rng.random_range(0..z.len());
            let j = i ^ 1;
            let l = half_lengths[i / 2];
            let mut set = |k: usize, v: f64, z: &mut [f64]| {
                undo.push((k, z[k]));
                z[k] = v.clamp(-l, l);
            };
            let u: f64 = rng.random();
            if u < p_jump {
                set(i, rng.random_range(-l..=l), z);
            } else if u < p_jump + p_pair {
                // merge a split pair, or split a merged one
                if (z[i] - z[j]).abs() < merge {
                    set(i, rng.random_range(-l..=l), z);
                } else {
                    set(i, z[j], z);
                }
            } else if u < p_jump + p_pair + p_fit {
                // open the pair to the measured chord on its line
                let m = measured[i / 2];
                let sign = if z[i] >= z[j] { 1.0 } else { -1.0 };
                set(i, z[j] + sign * m, z);
            } else if rng.random::<bool>() {
                let g: f64 = rng.sample(StandardNormal);
                set(i, z[i] + scale * g, z);
            } else {
                // translate the pair along its line
                let g: f64 = rng.sample(StandardNormal);
                let (a, b) = (z[i] + scale * g, z[j] + scale * g);
                set(i, a, z);
                set(j, b, z);
            }
        },
    );
    let final_objective = problem.objective(&z, &mut buf);
    problem.points(&z, &mut buf);
    GkxrOutput {
        polygon: convex_hull(&buf),
        initial_objective: f0,
        final_objective,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NgonConfig {
    pub n: usize,
    /// Polynomial degree; `None` uses `2n + 5`.
    pub poly_degree: Option<usize>,
    /// Upper end of the angle range searched for minima; `None` takes the
    /// range covered by the schedule.
    pub omega: Option<f64>,
    pub spacing_tolerance: f64,
}

impl Default for NgonConfig {
    fn default() -> Self {
        Self {
            n: 3,
            poly_degree: None,
            omega: None,
            spacing_tolerance: 10.0,
        }
    }
}

impl NgonConfig {
    pub fn with_n(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn degree(&self) -> usize {
        self.poly_degree.unwrap_or(2 * self.n + 5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoReconstruction {
    /// Fewer than two minima of the fitted width curve.
    TooFewMinima,
    /// No consecutive minima roughly `180/n` apart.
    EmptyR,
    /// A completing angle would lie at or beyond 180°.
    TOutOfRange,
}

impl fmt::Display for NoReconstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TooFewMinima => "m<2",
            Self::EmptyR => "R empty",
            Self::TOutOfRange => "T out of range",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NgonOutcome {
    Polygon(ConvexPolygon),
    NoReconstruction(NoReconstruction),
}

/// Diagnostics of a 2n-GON run, for inspection and tests.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NgonTrace {
    pub minima: Vec<f64>,
    /// Indices `i` of consecutive minima pairs `(t_i, t_{i+1})` in `R`.
    pub r_set: Vec<usize>,
    pub t_set: Vec<f64>,
    pub strips: Vec<Strip>,
}

/// Shadow strip at an arbitrary angle: the measured one if a measured angle
/// lies within 1°, otherwise a width from the fitted curve centered by linear
/// interpolation of the measured shadow centers.
fn strip_at(theta: f64, measured: &[Strip], fit: &crate::solvers::Polynomial) -> Strip {
    let nearest = measured
        .iter()
        .min_by(|a, b| (a.angle - theta).abs().total_cmp(&(b.angle - theta).abs()))
        .copied()
        .expect("measured strips are non-empty");
    if (nearest.angle - theta).abs() <= 1.0 {
        return nearest;
    }
    let after = measured.iter().position(|s| s.angle > theta);
    let center = match after {
        Some(0) | None => nearest.center(),
        Some(k) => {
            let (a, b) = (measured[k - 1], measured[k]);
            let w = (theta - a.angle) / (b.angle - a.angle);
            (1.0 - w) * a.center() + w * b.center()
        }
    };
    let half = 0.5 * fit.eval(theta).max(0.0);
    Strip {
        angle: theta,
        lo: center - half,
        hi: center + half,
    }
}

/// Picks `count` pair indices out of `r`: a run of consecutive indices if one
/// exists, otherwise the pairs whose spacing is closest to `target`. Among
/// candidates the smallest total deviation wins.
fn choose_pairs(r: &[usize], minima: &[f64], count: usize, target: f64) -> Vec<usize> {
    let dev = |i: usize| ((minima[i + 1] - minima[i]) - target).abs();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for w in r.windows(count) {
        if w.windows(2).all(|p| p[1] == p[0] + 1) {
            let score: f64 = w.iter().map(|&i| dev(i)).sum();
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, w.to_vec()));
            }
        }
    }
    if let Some((_, w)) = best {
        return w;
    }
    let mut sorted = r.to_vec();
    sorted.sort_by(|&a, &b| dev(a).total_cmp(&dev(b)));
    sorted.truncate(count);
    sorted.sort_unstable();
    sorted
}

pub fn ngon_2n(shadows: &ShadowSet, cfg: &NgonConfig) -> Result<NgonOutcome> {
    ngon_2n_traced(shadows, cfg).map(|(o, _)| o)
}

/// [`ngon_2n`] plus the intermediate sets.
pub fn ngon_2n_traced(shadows: &ShadowSet, cfg: &NgonConfig) -> Result<(NgonOutcome, NgonTrace)> {
    let n = cfg.n;
    if n < 2 {
        return Err(Error::Config("2n-GON needs n >= 2".into()));
    }
    let mut trace = NgonTrace::default();
    let w = widths(shadows);
    if w.samples.is_empty() {
        // nothing in the slice
        return Ok((
            NgonOutcome::NoReconstruction(NoReconstruction::TooFewMinima),
            trace,
        ));
    }
    let degree = cfg.degree();
    let fit = polyfit_ls(&w.samples, degree)?;
    let measured = strips_of(shadows);
    let omega = cfg.omega.unwrap_or_else(|| {
        let a = shadows.angles();
        let step = if a.len() > 1 {
            a[a.len() - 1] - a[a.len() - 2]
        } else {
            1.0
        };
        (a[a.len() - 1] + step).min(180.0)
    });
    let mut minima = poly_local_minima(&fit, 0.0, omega);
    // a minimum just below 180° repeats one just above 0°
    if let (Some(&first), Some(&last)) = (minima.first(), minima.last()) {
        if minima.len() > 1 && last - first > 178.0 {
            minima.pop();
        }
    }
    trace.minima = minima.clone();
    let no = |reason, trace| Ok((NgonOutcome::NoReconstruction(reason), trace));
    if minima.len() < 2 {
        return no(NoReconstruction::TooFewMinima, trace);
    }
    let target = 180.0 / n as f64;
    let r: Vec<usize> = (0..minima.len() - 1)
        .filter(|&i| ((minima[i + 1] - minima[i]).abs() - target).abs() <= cfg.spacing_tolerance)
        .collect();
    trace.r_set = r.clone();
    if r.is_empty() {
        return no(NoReconstruction::EmptyR, trace);
    }
    let bound = bound_of(shadows);
    let involved = |pairs: &[usize]| {
        let mut idx: Vec<usize> = pairs.iter().flat_map(|&i| [i, i + 1]).collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    };
    let strips: Vec<Strip> = if r.len() >= n - 1 {
        let pairs = if r.len() == n - 1 {
            r.clone()
        } else {
            choose_pairs(&r, &minima, n - 1, target)
        };
        involved(&pairs)
            .iter()
            .map(|&i| strip_at(minima[i], &measured, &fit))
            .collect()
    } else {
        let a = *r.last().unwrap();
        let b = a + 1;
        let count = n - r.len() - 1;
        let t_set: Vec<f64> = (1..=count).map(|i| minima[b] + target * i as f64).collect();
        trace.t_set = t_set.clone();
        if t_set.iter().any(|&t| t >= 180.0) {
            return no(NoReconstruction::TOutOfRange, trace);
        }
        let mut strips: Vec<Strip> = involved(&r)
            .iter()
            .map(|&i| strip_at(minima[i], &measured, &fit))
            .collect();
        let sa = strip_at(minima[a], &measured, &fit);
        let sb = strip_at(minima[b], &measured, &fit);
        let last_measured = measured.last().map_or(0.0, |s| s.angle);
        let first_measured = measured.first().map_or(0.0, |s| s.angle);
        let parallelogram = intersect_strips(&[sa, sb], bound);
        let c = parallelogram.centroid().unwrap_or_default();
        for &t in &t_set {
            if t <= last_measured + 1.0 && t >= first_measured - 1.0 {
                strips.push(strip_at(t, &measured, &fit));
            } else {
                let mid = c.dot(detector_axis(t));
                let half = 0.5 * sb.width();
                strips.push(Strip {
                    angle: t,
                    lo: mid - half,
                    hi: mid + half,
                });
            }
        }
        strips
    };
    trace.strips = strips.clone();
    Ok((
        NgonOutcome::Polygon(intersect_strips(&strips, bound)),
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::support;
    use crate::grid::rasterize;
    use crate::metrics::errors;
    use crate::noise::NoiseSpec;
    use crate::phantoms::make_phantom;
    use crate::projector::{extract_shadows, project, ShadowOptions, TiltSchedule};
    use crate::simulate::acquire;

    fn shadows_of(poly: &ConvexPolygon, sched: &TiltSchedule) -> ShadowSet {
        extract_shadows(&acquire(poly, sched, None), ShadowOptions::default())
    }

    #[test]
    fn ufbp_two_strips_of_a_square() {
        let sq = ConvexPolygon::rectangle(-19.9, -9.9, 19.9, 9.9);
        let img = rasterize(&sq, 128, 1.0).to_image(1.0);
        let sched = TiltSchedule::new(vec![0.0, 90.0]).unwrap();
        let sh = extract_shadows(&project(&img, &sched), ShadowOptions::default());
        let p = ufbp(&sh).unwrap();
        // the bounding box of the raster, edges at the outer bin edges
        let b = ConvexPolygon::rectangle(-20.0, -10.0, 20.0, 10.0);
        assert!((p.area() - b.area()).abs() < 1e-6, "{p:?}");
        for v in b.vertices() {
            assert!(p.contains(*v, 1e-6));
        }
    }

    #[test]
    fn ufbp_needs_two_angles() {
        let sq = ConvexPolygon::rectangle(-5.0, -5.0, 5.0, 5.0);
        let sh = shadows_of(&sq, &TiltSchedule::new(vec![0.0]).unwrap());
        assert!(matches!(
            ufbp(&sh),
            Err(Error::InsufficientShadows { usable: 1 })
        ));
        assert!(matches!(mpw(&sh), Err(Error::InsufficientShadows { .. })));
    }

    #[test]
    fn ufbp_is_a_superset_at_zero_noise() {
        for id in 1..=6u8 {
            let p = make_phantom(id).unwrap();
            for sched in [TiltSchedule::s180_10(), TiltSchedule::s140_10()] {
                let rec = ufbp(&shadows_of(&p.polygon, &sched)).unwrap();
                // a vertex sliver thinner than the data raster can go unseen
                for v in p.polygon.vertices() {
                    assert!(rec.contains(*v, 0.25), "phantom {id}");
                }
                let raster = rasterize(&rec, 512, 1.0);
                let missing = p
                    .truth(512)
                    .iter()
                    .filter(|&(r, c)| !raster.contains(r, c))
                    .count();
                assert!(missing <= 2, "phantom {id}: {missing}");
            }
        }
    }

    #[test]
    fn ufbp_from_two_angles_is_a_parallelogram() {
        let p = make_phantom(1).unwrap();
        let sh = shadows_of(&p.polygon, &TiltSchedule::new(vec![0.0, 70.0]).unwrap());
        let rec = ufbp(&sh).unwrap();
        assert_eq!(rec.len(), 4);
        assert!(rec.area() > p.polygon.area() * 1.05);
        for v in p.polygon.vertices() {
            assert!(rec.contains(*v, 1e-9));
        }
    }

    #[test]
    fn mpw_on_consistent_data_is_ufbp_at_bin_centers() {
        let sq = ConvexPolygon::rectangle(-19.9, -9.9, 19.9, 9.9);
        let img = rasterize(&sq, 128, 1.0).to_image(1.0);
        let sched = TiltSchedule::new(vec![0.0, 90.0]).unwrap();
        let sh = extract_shadows(&project(&img, &sched), ShadowOptions::default());
        let a = ufbp(&sh).unwrap();
        let b = mpw(&sh).unwrap();
        let extent = |p: &ConvexPolygon, f: fn(&Vec2) -> f64| {
            let v: Vec<f64> = p.vertices().iter().map(f).collect();
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        let (w, h) = (extent(&a, |v| v.x), extent(&a, |v| v.y));
        assert!(
            (b.area() - (w - 1.0) * (h - 1.0)).abs() < 1e-9,
            "{} {w} {h}",
            b.area()
        );

        // pixel shadows are only nearly consistent
        let p = make_phantom(1).unwrap();
        let sh = shadows_of(&p.polygon, &TiltSchedule::s180_1());
        let b = mpw(&sh).unwrap();
        let area = p.polygon.area();
        assert!((area - b.area()).abs() / area < 0.02, "{} {area}", b.area());
    }

    #[test]
    fn mpw_survives_one_corrupted_shadow() {
        let p = make_phantom(1).unwrap();
        let sched = TiltSchedule::s180_10();
        let sh = shadows_of(&p.polygon, &sched);
        // cut one shadow far inside the object
        let mut intervals: Vec<Vec<(usize, usize)>> =
            (0..sched.len()).map(|i| sh.intervals(i).to_vec()).collect();
        let (a, b) = intervals[4][0];
        intervals[4] = vec![(a + 35, b)];
        let bad = ShadowSet::new(
            sched.clone(),
            sh.detector_count(),
            sh.detector_spacing(),
            intervals,
        )
        .unwrap();
        let area = p.polygon.area();
        let u = ufbp(&bad).unwrap();
        let m = mpw(&bad).unwrap();
        assert!(m.area() >= 0.9 * area, "{} vs {area}", m.area());
        assert!(u.area() < m.area());
        // the result realizes its own consistent support values
        let mm = support_measurements(&bad);
        let y: Vec<f64> = mm
            .directions
            .iter()
            .map(|d| support(&m, *d).unwrap())
            .collect();
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.sort_by(|&i, &j| mm.angles[i].total_cmp(&mm.angles[j]));
        let angles: Vec<f64> = order.iter().map(|&i| mm.angles[i]).collect();
        let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        assert!(crate::solvers::max_violation(&angles, &ys) <= 1e-9);
    }

    #[test]
    fn iir_single_pass_and_zeros() {
        let row = [0.0, 0.0, 4.0, 8.0, 8.0, 4.0, 0.0];
        assert_eq!(iir_smooth(&row, 0), row.to_vec());
        assert_eq!(
            iir_smooth(&row, 1),
            vec![0.0, 0.0, 2.0, 5.0, 6.5, 5.25, 0.0]
        );
        assert_eq!(iir_smooth(&[0.0; 5], 10), vec![0.0; 5]);
    }

    #[test]
    fn iir_even_rounds_do_not_shift() {
        let row: Vec<f64> = (0..200)
            .map(|i| if (60..140).contains(&i) { 100.0 } else { 0.0 })
            .collect();
        let s = iir_smooth(&row, 50);
        let mass: f64 = s.iter().sum();
        let center = s.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>() / mass;
        assert!((center - 99.5).abs() < 0.5, "{center}");
        assert!(s[..60].iter().chain(&s[140..]).all(|&v| v == 0.0));
    }

    #[test]
    fn gkxr_zero_data_gives_empty_polygon() {
        let z = Sinogram::zeros(
            TiltSchedule::new(vec![1.0, 28.0, 91.0, 118.0]).unwrap(),
            512,
            1.0,
        );
        let cfg = GkxrConfig {
            anneal: AnnealConfig {
                polish_evaluations: 20_000,
                ..GkxrConfig::default().anneal
            },
            ..GkxrConfig::noise_free()
        };
        let out = gkxr(&z, &cfg).unwrap();
        assert!(out.polygon.is_empty(), "{:?}", out.polygon);
        assert!(out.final_objective <= out.initial_objective);
    }

    #[test]
    fn gkxr_recovers_hexagon() {
        let p = make_phantom(1).unwrap();
        let sched = TiltSchedule::new(vec![1.0, 28.0, 91.0, 118.0]).unwrap();
        let sino = acquire(&p.polygon, &sched, None);
        let cfg = GkxrConfig {
            restarts: 3,
            ..GkxrConfig::noise_free()
        };
        let out = gkxr(&sino, &cfg).unwrap();
        assert!(out.final_objective <= out.initial_objective);
        let e = errors(&p.truth(512), &rasterize(&out.polygon, 512, 1.0));
        assert!(e.delta_s < 1000, "{e:?}");
        assert_eq!(gkxr(&sino, &cfg).unwrap(), out);
    }

    #[test]
    fn gkxr_requires_configured_directions() {
        let z = Sinogram::zeros(TiltSchedule::s180_10(), 64, 1.0);
        assert!(matches!(
            gkxr(&z, &GkxrConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ngon_exact_recovery_for_regular_hexagon() {
        let p = make_phantom(1).unwrap();
        let sh = shadows_of(&p.polygon, &TiltSchedule::s140_1());
        let (out, trace) = ngon_2n_traced(&sh, &NgonConfig::default()).unwrap();
        // the true minima at 30° and 90° pair up; 150° lies in the missing wedge
        let &[i] = trace.r_set.as_slice() else {
            panic!("{trace:?}");
        };
        assert!((trace.minima[i] - 30.0).abs() < 1.0, "{trace:?}");
        assert!((trace.minima[i + 1] - 90.0).abs() < 1.0, "{trace:?}");
        assert_eq!(trace.t_set.len(), 1);
        assert!((trace.t_set[0] - 150.0).abs() < 1.0, "{trace:?}");
        let NgonOutcome::Polygon(poly) = out else {
            panic!("no reconstruction");
        };
        assert_eq!(poly.len(), 6);
        let e = errors(&p.truth(512), &rasterize(&poly, 512, 1.0));
        assert!(e.delta_h <= 2, "{e:?}");
    }

    #[test]
    fn ngon_full_range_uses_measured_minima() {
        let p = make_phantom(2).unwrap();
        let sh = shadows_of(&p.polygon, &TiltSchedule::s180_1());
        let (out, trace) = ngon_2n_traced(&sh, &NgonConfig::default()).unwrap();
        assert_eq!(trace.minima.len(), 3, "{trace:?}");
        assert_eq!(trace.r_set.len(), 2);
        assert!(trace.t_set.is_empty());
        assert!(matches!(out, NgonOutcome::Polygon(_)));
    }

    #[test]
    fn ngon_octagon() {
        let p = make_phantom(4).unwrap();
        let sino = acquire(
            &p.polygon,
            &TiltSchedule::s140_1(),
            Some(NoiseSpec {
                sigma: 50.0,
                seed: 4,
            }),
        );
        let sh = extract_shadows(&sino, ShadowOptions::default());
        let (out, trace) = ngon_2n_traced(&sh, &NgonConfig::with_n(4)).unwrap();
        let NgonOutcome::Polygon(poly) = out else {
            panic!("{trace:?}");
        };
        let e = errors(&p.truth(512), &rasterize(&poly, 512, 1.0));
        assert!(e.delta_s <= 500, "{e:?} {trace:?}");
    }

    #[test]
    fn ngon_single_minimum_exits() {
        // a long thin rectangle seen over a narrow range has one width minimum
        let rect = ConvexPolygon::rectangle(-80.0, -10.0, 80.0, 10.0);
        let sched = TiltSchedule::range(60.0, 120.0, 1.0).unwrap();
        let sh = shadows_of(&rect, &sched);
        let out = ngon_2n(&sh, &NgonConfig::default()).unwrap();
        assert_eq!(
            out,
            NgonOutcome::NoReconstruction(NoReconstruction::TooFewMinima)
        );
    }

    #[test]
    fn ngon_empty_slice_is_no_reconstruction() {
        let z = Sinogram::zeros(TiltSchedule::s140_1(), 512, 1.0);
        let sh = extract_shadows(&z, ShadowOptions::default());
        assert_eq!(
            ngon_2n(&sh, &NgonConfig::default()).unwrap(),
            NgonOutcome::NoReconstruction(NoReconstruction::TooFewMinima)
        );
    }

    #[test]
    fn ngon_needs_enough_samples() {
        let p = make_phantom(1).unwrap();
        let sh = shadows_of(&p.polygon, &TiltSchedule::range(1.0, 61.0, 10.0).unwrap());
        assert!(matches!(
            ngon_2n(&sh, &NgonConfig::default()),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
