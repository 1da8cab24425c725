//! Numeric subroutines for the object-based reconstructors: simulated
//! annealing with a pattern-search polish, the support-consistency
//! constrained least-squares problem, and polynomial least squares.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub initial_temperature: f64,
    pub cooling_factor: f64,
    pub steps_per_temperature: usize,
    pub min_temperature: f64,
    /// Proposal standard deviation at the initial temperature.
    pub step_scale: f64,
    pub seed: u64,
    /// Upper bound on objective evaluations spent in the local polish.
    pub polish_evaluations: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            initial_temperature: 1.0,
            cooling_factor: 0.95,
            steps_per_temperature: 50,
            min_temperature: 1e-3,
            step_scale: 1.0,
            seed: 0,
            polish_evaluations: 200_000,
        }
    }
}

impl AnnealConfig {
    /// The default schedule scaled to an objective value: `T0 = f0`, floor
    /// `1e-3 · f0`.
    pub fn scaled_to(mut self, f0: f64) -> Self {
        let t0 = if f0 > 0.0 { f0 } else { 1.0 };
        self.initial_temperature = t0;
        self.min_temperature = 1e-3 * t0;
        self
    }
}

/// Metropolis annealing with single-coordinate Gaussian proposals whose scale
/// shrinks with the temperature, then a Hooke–Jeeves pattern search from the
/// best point seen. Never returns a point worse than `x0`.
pub fn anneal_minimize<F>(objective: F, x0: &[f64], cfg: &AnnealConfig) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    anneal_minimize_with(objective, x0, cfg, |rng, x, scale, undo| {
        let i = rng.random_range(0..x.len());
        let z: f64 = rng.sample(StandardNormal);
        undo.push((i, x[i]));
        x[i] += scale * z;
    })
}

/// [`anneal_minimize`] with a caller-supplied move. `propose(rng, x, scale, undo)`
/// changes `x` in place and records `(index, old value)` for every coordinate
/// it touched; `scale` is `step_scale · T / T0`.
pub fn anneal_minimize_with<F, P>(
    mut objective: F,
    x0: &[f64],
    cfg: &AnnealConfig,
    mut propose: P,
) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
    P: FnMut(&mut ChaCha8Rng, &mut [f64], f64, &mut Vec<(usize, f64)>),
{
    if x0.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x0.to_vec();
    let mut fx = objective(&x);
    let mut best = x.clone();
    let mut fbest = fx;
    let t0 = cfg.initial_temperature;
    let mut t = t0;
    let mut undo = Vec::new();
    while t > cfg.min_temperature {
        let scale = cfg.step_scale * t / t0;
        for _ in 0..cfg.steps_per_temperature {
            undo.clear();
            propose(&mut rng, &mut x, scale, &mut undo);
            let fy = objective(&x);
            let accept = fy <= fx || rng.random::<f64>() < (-(fy - fx) / t).exp();
            if accept {
                fx = fy;
                if fx < fbest {
                    fbest = fx;
                    best.clone_from(&x);
                }
            } else {
                for &(i, old) in undo.iter().rev() {
                    x[i] = old;
                }
            }
        }
        t *= cfg.cooling_factor;
    }
    pattern_search(
        &mut objective,
        best,
        fbest,
        cfg.step_scale,
        cfg.polish_evaluations,
    )
}

/// Hooke–Jeeves: coordinate exploration with a shrinking step, plus pattern
/// moves along successful directions. Stops when the step is negligible, a
/// full exploration improves by less than `1e-6` relative, or the evaluation
/// budget runs out.
fn pattern_search<F>(
    objective: &mut F,
    mut base: Vec<f64>,
    mut fbase: f64,
    step0: f64,
    budget: usize,
) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut step = step0;
    let min_step = step0 * 1e-6;
    let mut evals = 0usize;

    while step > min_step && evals < budget {
        let (x, fx) = explore(objective, &base, fbase, step, &mut evals);
        if fx < fbase {
            let gain = (fbase - fx) / fbase.abs().max(1e-300);
            // pattern moves while they keep paying off
            let mut prev = base;
            let mut cur = x;
            let mut fcur = fx;
            loop {
                if evals >= budget {
                    break;
                }
                let probe: Vec<f64> = cur.iter().zip(&prev).map(|(c, p)| 2.0 * c - p).collect();
                let fprobe = objective(&probe);
                evals += 1;
                let (next, fnext) = explore(objective, &probe, fprobe, step, &mut evals);
                if fnext < fcur {
                    prev = std::mem::replace(&mut cur, next);
                    fcur = fnext;
                } else {
                    break;
                }
            }
            base = cur;
            let total_gain = (fbase - fcur) / fbase.abs().max(1e-300);
            fbase = fcur;
            if total_gain < 1e-6 && gain < 1e-6 {
                step *= 0.5;
            }
        } else {
            step *= 0.5;
        }
        if fbase == 0.0 {
            break;
        }
    }
    base
}

fn explore<F>(
    objective: &mut F,
    center: &[f64],
    fc: f64,
    step: f64,
    evals: &mut usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = center.to_vec();
    let mut fx = fc;
    for i in 0..x.len() {
        let old = x[i];
        x[i] = old + step;
        let up = objective(&x);
        *evals += 1;
        if up < fx {
            fx = up;
            continue;
        }
        x[i] = old - step;
        let down = objective(&x);
        *evals += 1;
        if down < fx {
            fx = down;
            continue;
        }
        x[i] = old;
    }
    (x, fx)
}

/// Support-function consistency problem: directions at sorted angles (degrees,
/// modulo 360) with measured support values `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedLsqProblem {
    pub angles: Vec<f64>,
    pub targets: Vec<f64>,
}

/// Coefficients `(i-1, i, i+1)` of the consecutive-triple constraint
/// `y_b sin(θc−θa) − y_a sin(θc−θb) − y_c sin(θb−θa) ≤ 0`, cyclically.
fn constraint_rows(angles: &[f64]) -> Vec<[(usize, f64); 3]> {
    let n = angles.len();
    (0..n)
        .map(|b| {
            let a = (b + n - 1) % n;
            let c = (b + 1) % n;
            let (ta, tb, tc) = (
                angles[a].to_radians(),
                angles[b].to_radians(),
                angles[c].to_radians(),
            );
            [
                (a, -(tc - tb).sin()),
                (b, (tc - ta).sin()),
                (c, -(tb - ta).sin()),
            ]
        })
        .collect()
}

fn row_dot(row: &[(usize, f64); 3], y: &[f64]) -> f64 {
    row.iter().map(|&(j, g)| g * y[j]).sum()
}

/// Largest violation `max(0, g·y)` of the consistency constraints at `y`.
pub fn max_violation(angles: &[f64], y: &[f64]) -> f64 {
    constraint_rows(angles)
        .iter()
        .map(|r| row_dot(r, y))
        .fold(0.0, f64::max)
}

/// Projects `h` onto the cone of consistent support vectors. The dual is a
/// non-negative least-squares problem in the multipliers `λ`, with
/// `y = h − Gᵀλ`; it is warm-started by Hildreth's coordinate method and
/// finished by Lawson–Hanson iterations on the Gram matrix.
pub fn constrained_lsq(p: &ConstrainedLsqProblem) -> Result<Vec<f64>> {
    let n = p.angles.len();
    if n != p.targets.len() {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: p.targets.len(),
        });
    }
    if n < 3 {
        return Err(Error::Solver(format!(
            "need at least 3 directions, got {n}"
        )));
    }
    if p.angles.windows(2).any(|w| w[1] <= w[0]) || p.angles[n - 1] - p.angles[0] >= 360.0 {
        return Err(Error::Solver(
            "angles must be strictly sorted within one turn".into(),
        ));
    }
    let max_gap = (0..n)
        .map(|i| (p.angles[(i + 1) % n] - p.angles[i]).rem_euclid(360.0))
        .fold(0.0, f64::max);
    if max_gap >= 180.0 {
        return Err(Error::Solver(
            "directions do not span more than a half-plane".into(),
        ));
    }
    if p.targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("support measurements"));
    }
    let rows = constraint_rows(&p.angles);
    let h = &p.targets;

    // Hildreth
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|(_, g)| g * g).sum())
        .collect();
    let mut lambda = vec![0.0; n];
    let mut y = h.clone();
    let scale = h.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for _ in 0..2000 {
        let mut change = 0.0f64;
        for i in 0..n {
            let r = row_dot(&rows[i], &y);
            let delta = (r / norms[i]).max(-lambda[i]);
            if delta != 0.0 {
                lambda[i] += delta;
                for &(j, g) in &rows[i] {
                    y[j] -= delta * g;
                }
                change = change.max(delta.abs());
            }
        }
        if change < 1e-13 * scale {
            break;
        }
    }

    // Lawson–Hanson on the Gram system Qλ = c, Q = GGᵀ, c = Gh
    let mut q = DMatrix::<f64>::zeros(n, n);
    for (i, ri) in rows.iter().enumerate() {
        for (k, rk) in rows.iter().enumerate() {
            let mut s = 0.0;
            for &(a, ga) in ri {
                for &(b, gb) in rk {
                    if a == b {
                        s += ga * gb;
                    }
                }
            }
            q[(i, k)] = s;
        }
    }
    let c: Vec<f64> = rows.iter().map(|r| row_dot(r, h)).collect();
    lambda = lawson_hanson(&q, &c, lambda, scale)?;

    let mut y = h.clone();
    for (i, r) in rows.iter().enumerate() {
        for &(j, g) in r {
            y[j] -= lambda[i] * g;
        }
    }
    // clean up round-off on active constraints
    for _ in 0..100 {
        let mut worst = 0.0f64;
        for i in 0..n {
            let r = row_dot(&rows[i], &y);
            if r > 0.0 {
                let delta = r / norms[i];
                for &(j, g) in &rows[i] {
                    y[j] -= delta * g;
                }
                worst = worst.max(r);
            }
        }
        if worst <= 1e-12 * scale {
            break;
        }
    }
    let v = max_violation(&p.angles, &y);
    if v > 1e-9 * scale {
        return Err(Error::Solver(format!(
            "constraint violation {v:e} after solve"
        )));
    }
    Ok(y)
}

/// Solves `Q_PP s = c_P` on the passive set; `None` if numerically singular.
fn solve_passive(q: &DMatrix<f64>, c: &[f64], passive: &[usize]) -> Option<Vec<f64>> {
    let m = passive.len();
    if m == 0 {
        return Some(Vec::new());
    }
    let sub = DMatrix::from_fn(m, m, |i, k| q[(passive[i], passive[k])]);
    let rhs = DVector::from_iterator(m, passive.iter().map(|&i| c[i]));
    if let Some(ch) = sub.clone().cholesky() {
        let s = ch.solve(&rhs);
        if s.iter().all(|v| v.is_finite()) {
            return Some(s.iter().copied().collect());
        }
    }
    let svd = sub.svd(true, true);
    svd.solve(&rhs, 1e-12)
        .ok()
        .map(|s| s.iter().copied().collect())
}

fn lawson_hanson(
    q: &DMatrix<f64>,
    c: &[f64],
    mut lambda: Vec<f64>,
    scale: f64,
) -> Result<Vec<f64>> {
    let n = c.len();
    let tol = 1e-12 * scale * scale.max(1.0);
    let mut passive: Vec<bool> = lambda.iter().map(|&l| l > 0.0).collect();
    let mut fresh = true;
    for _ in 0..(10 * n + 100) {
        if !fresh {
            let w: Vec<f64> = (0..n)
                .map(|i| c[i] - (0..n).map(|k| q[(i, k)] * lambda[k]).sum::<f64>())
                .collect();
            let pick = (0..n)
                .filter(|&i| !passive[i] && w[i] > tol)
                .max_by(|&a, &b| w[a].total_cmp(&w[b]));
            match pick {
                Some(j) => passive[j] = true,
                None => return Ok(lambda),
            }
        }
        fresh = false;
        // inner loop: keep λ feasible while moving toward the passive solution
        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let s = solve_passive(q, c, &idx)
                .ok_or_else(|| Error::Solver("singular active set".into()))?;
            if s.iter().all(|&v| v > 0.0) {
                for (k, &i) in idx.iter().enumerate() {
                    lambda[i] = s[k];
                }
                for i in (0..n).filter(|&i| !passive[i]) {
                    lambda[i] = 0.0;
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (k, &i) in idx.iter().enumerate() {
                if s[k] <= 0.0 {
                    let d = lambda[i] - s[k];
                    if d > 0.0 {
                        alpha = alpha.min(lambda[i] / d);
                    }
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                lambda[i] += alpha * (s[k] - lambda[i]);
                if lambda[i] <= 1e-15 * scale || (s[k] <= 0.0 && lambda[i] <= 0.0) {
                    lambda[i] = 0.0;
                    passive[i] = false;
                }
            }
            if idx.iter().all(|&i| !passive[i]) {
                break;
            }
        }
    }
    Err(Error::Solver("active-set iteration limit reached".into()))
}

/// Least-squares polynomial in the angle, stored in a basis rescaled to
/// `[-1, 1]` over the sampled range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
    pub center: f64,
    pub half_range: f64,
}

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.half_range;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// Least-squares fit of `degree` to `(x, value)` samples via Householder QR.
pub fn polyfit_ls(samples: &[(f64, f64)], degree: usize) -> Result<Polynomial> {
    if samples.len() <= degree {
        return Err(Error::InsufficientSamples {
            samples: samples.len(),
            degree,
        });
    }
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples
        .iter()
        .map(|s| s.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (lo + hi);
    let half_range = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let m = samples.len();
    let a = DMatrix::from_fn(m, degree + 1, |i, k| {
        ((samples[i].0 - center) / half_range).powi(k as i32)
    });
    let b = DVector::from_iterator(m, samples.iter().map(|s| s.1));
    let qr = a.qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if r.diagonal().iter().any(|v| v.abs() <= 1e-12 * rmax) {
        return Err(Error::RankDeficient);
    }
    let qtb = qr.q().transpose() * b;
    let coeffs = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient)?
        .iter()
        .copied()
        .collect();
    Ok(Polynomial {
        coeffs,
        center,
        half_range,
    })
}

/// Strict local minima of `poly` in `[lo, hi)`: located on a 0.1° grid, then
/// refined by ternary search to 0.01°.
pub fn poly_local_minima(poly: &Polynomial, lo: f64, hi: f64) -> Vec<f64> {
    let step = 0.1;
    let count = ((hi - lo) / step - 1e-9).ceil().max(0.0) as usize;
    let xs: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
    let f = |x: f64| poly.eval(x);
    let mut out = Vec::new();
    for &x in &xs {
        let (l, c, r) = (f(x - step), f(x), f(x + step));
        if c < l && c < r {
            let (mut a, mut b) = (x - step, x + step);
            while b - a > 0.01 {
                let m1 = a + (b - a) / 3.0;
                let m2 = b - (b - a) / 3.0;
                if f(m1) < f(m2) {
                    b = m2;
                } else {
                    a = m1;
                }
            }
            let m = 0.5 * (a + b);
            if m >= lo && m < hi {
                out.push(m);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{support, width, ConvexPolygon, Vec2};

    fn bowl(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn anneal_bowl_and_rosenbrock() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = AnnealConfig::default().scaled_to(bowl(&x0));
        let x = anneal_minimize(bowl, &x0, &cfg);
        assert!(bowl(&x) <= 1e-4, "{}", bowl(&x));

        let x0 = [-1.2, 1.0];
        let cfg = AnnealConfig {
            step_scale: 0.5,
            ..AnnealConfig::default().scaled_to(rosenbrock(&x0))
        };
        let x = anneal_minimize(rosenbrock, &x0, &cfg);
        assert!(rosenbrock(&x) <= 1e-2, "{}", rosenbrock(&x));
        assert!(anneal_minimize(bowl, &[], &cfg).is_empty());
    }

    #[test]
    fn anneal_never_worse_and_deterministic() {
        let f = |x: &[f64]| (x[0] - 3.0).abs() + (x[1] * 5.0).sin() + 2.0;
        let cfg = AnnealConfig::default();
        let x0 = [0.2, 0.1];
        let a = anneal_minimize(f, &x0, &cfg);
        assert!(f(&a) <= f(&x0));
        assert_eq!(a, anneal_minimize(f, &x0, &cfg));
    }

    fn problem_from(poly: &ConvexPolygon, angles: &[f64]) -> ConstrainedLsqProblem {
        ConstrainedLsqProblem {
            angles: angles.to_vec(),
            targets: angles
                .iter()
                .map(|&a| support(poly, Vec2::from_angle_deg(a)).unwrap())
                .collect(),
        }
    }

    /// Exhaustive enumeration of active sets: the projection onto
    /// `{G_S y = 0}` for every subset `S`, keeping feasible points with
    /// non-negative multipliers, and returning the closest one.
    fn enumerate_oracle(p: &ConstrainedLsqProblem) -> Vec<f64> {
        let n = p.angles.len();
        let rows = constraint_rows(&p.angles);
        let h = DVector::from_vec(p.targets.clone());
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let g: DMatrix<f64> = DMatrix::from_fn(set.len(), n, |r, j| {
                rows[set[r]]
                    .iter()
                    .filter(|(k, _)| *k == j)
                    .map(|(_, v)| *v)
                    .sum()
            });
            let y = if set.is_empty() {
                h.clone()
            } else {
                let gram: DMatrix<f64> = &g * g.transpose();
                let lam = gram.svd(true, true).solve(&(&g * &h), 1e-12).unwrap();
                if lam.iter().any(|&l| l < -1e-9) {
                    continue;
                }
                &h - g.transpose() * lam
            };
            let yv: Vec<f64> = y.iter().copied().collect();
            if max_violation(&p.angles, &yv) > 1e-9 {
                continue;
            }
            let d = (&y - &h).norm();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, yv));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn consistent_data_is_fixed() {
        let sq = ConvexPolygon::rectangle(-0.5, -0.5, 0.5, 0.5);
        let p = problem_from(&sq, &[0.0, 90.0, 180.0, 270.0]);
        let y = constrained_lsq(&p).unwrap();
        assert_eq!(y, p.targets);
        let zero = ConstrainedLsqProblem {
            angles: vec![0.0, 120.0, 240.0],
            targets: vec![0.0; 3],
        };
        assert_eq!(constrained_lsq(&zero).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn inflated_entry_is_pulled_back() {
        let hex = ConvexPolygon::regular(6, 10.0, Vec2::default(), 0.0);
        let angles: Vec<f64> = (0..6).map(|i| 30.0 + 60.0 * i as f64).collect();
        let mut p = problem_from(&hex, &angles);
        let clean = p.targets.clone();
        p.targets[2] += 15.0;
        let y = constrained_lsq(&p).unwrap();
        let oracle = enumerate_oracle(&p);
        for (a, b) in y.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "{y:?} {oracle:?}");
        }
        let dist: f64 = y
            .iter()
            .zip(&p.targets)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(dist > 1.0 && dist < 15.0);
        // the correction concentrates on the corrupted entry
        let moved: Vec<f64> = y
            .iter()
            .zip(&p.targets)
            .map(|(a, b)| (a - b).abs())
            .collect();
        assert!(moved.iter().all(|&m| m <= moved[2] + 1e-9), "{moved:?}");
        for i in [0, 4, 5] {
            assert!(moved[i] < 1e-9, "{moved:?}");
        }
        assert!((y[5] - clean[5]).abs() < 1e-9);
        assert!(max_violation(&angles, &y) <= 1e-9);
    }

    #[test]
    fn matches_enumeration_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = rng.random_range(3..=8);
            let mut angles: Vec<f64>;
            loop {
                angles = (0..n).map(|_| rng.random_range(0.0..360.0)).collect();
                angles.sort_by(f64::total_cmp);
                let gap = (0..n)
                    .map(|i| (angles[(i + 1) % n] - angles[i]).rem_euclid(360.0))
                    .fold(0.0, f64::max);
                if gap < 170.0 && angles.windows(2).all(|w| w[1] - w[0] > 1.0) {
                    break;
                }
            }
            let p = ConstrainedLsqProblem {
                angles,
                targets: (0..n).map(|_| rng.random_range(-5.0..10.0)).collect(),
            };
            let y = constrained_lsq(&p).unwrap();
            assert!(max_violation(&p.angles, &y) <= 1e-9);
            let oracle = enumerate_oracle(&p);
            for (a, b) in y.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-6, "{p:?}\n{y:?}\n{oracle:?}");
            }
        }
    }

    #[test]
    fn large_noisy_instance() {
        let hex = ConvexPolygon::regular(6, 60.0, Vec2::default(), 0.0);
        let angles: Vec<f64> = (0..360).map(|i| i as f64).collect();
        let mut p = problem_from(&hex, &angles);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for t in &mut p.targets {
            *t += rng.random_range(-2.0..2.0);
        }
        let y = constrained_lsq(&p).unwrap();
        assert!(max_violation(&angles, &y) <= 1e-9);
        let before: f64 = p
            .targets
            .iter()
            .zip(problem_from(&hex, &angles).targets)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let after: f64 = y
            .iter()
            .zip(problem_from(&hex, &angles).targets)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        assert!(after < before);
    }

    #[test]
    fn rejects_bad_input() {
        let p = ConstrainedLsqProblem {
            angles: vec![0.0, 10.0, 20.0],
            targets: vec![1.0; 3],
        };
        assert!(constrained_lsq(&p).is_err());
        let p = ConstrainedLsqProblem {
            angles: vec![0.0, 10.0],
            targets: vec![1.0; 2],
        };
        assert!(constrained_lsq(&p).is_err());
    }

    #[test]
    fn polyfit_examples() {
        let line: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 - 2.0)).collect();
        let p = polyfit_ls(&line, 1).unwrap();
        for &(x, v) in &line {
            assert!((p.eval(x) - v).abs() < 1e-9);
        }
        assert!(matches!(
            polyfit_ls(&line[..3], 5),
            Err(Error::InsufficientSamples { .. })
        ));
        let dup = vec![(1.0, 1.0); 10];
        assert!(matches!(polyfit_ls(&dup, 2), Err(Error::RankDeficient)));
    }

    #[test]
    fn polyfit_is_least_squares_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s: Vec<(f64, f64)> = (0..40)
            .map(|i| (i as f64 * 3.0, rng.random_range(-1.0..1.0)))
            .collect();
        let p = polyfit_ls(&s, 5).unwrap();
        let res = |q: &Polynomial| s.iter().map(|(x, v)| (q.eval(*x) - v).powi(2)).sum::<f64>();
        let r0 = res(&p);
        for _ in 0..200 {
            let mut q = p.clone();
            for c in &mut q.coeffs {
                *c += rng.random_range(-0.05..0.05);
            }
            assert!(res(&q) >= r0 - 1e-12);
        }
    }

    #[test]
    fn minima_examples() {
        let s: Vec<(f64, f64)> = (0..=140)
            .map(|i| (i as f64, (i as f64 - 70.0).powi(2)))
            .collect();
        let p = polyfit_ls(&s, 2).unwrap();
        let m = poly_local_minima(&p, 0.0, 140.0);
        assert_eq!(m.len(), 1);
        assert!((m[0] - 70.0).abs() <= 0.01);
        let mono: Vec<(f64, f64)> = (0..=140).map(|i| (i as f64, (i as f64).powi(3))).collect();
        assert!(poly_local_minima(&polyfit_ls(&mono, 3).unwrap(), 0.0, 140.0).is_empty());
    }

    #[test]
    fn hexagon_width_fit_finds_edge_normals() {
        let hex = ConvexPolygon::regular(6, 60.0, Vec2::default(), 0.0);
        let s: Vec<(f64, f64)> = (1..=140)
            .map(|i| (i as f64, width(&hex, i as f64).unwrap()))
            .collect();
        let p = polyfit_ls(&s, 11).unwrap();
        let m = poly_local_minima(&p, 0.0, 140.0);
        // edge normals of the flat-top hexagon sit at 30°, 90°, 150°
        let inside: Vec<f64> = m.iter().copied().filter(|a| *a > 10.0).collect();
        assert!(inside.len() >= 2, "{m:?}");
        for a in &inside {
            let nearest = [30.0, 90.0, 150.0]
                .iter()
                .map(|t| (a - t).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= 3.0, "{m:?}");
        }
        for w in inside.windows(2) {
            assert!(((w[1] - w[0]) - 60.0).abs() <= 2.0, "{m:?}");
        }
    }
}
