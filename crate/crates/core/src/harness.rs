//! Seeded Monte-Carlo experiments (phantom → data → noise → reconstruction →
//! score) and slice-by-slice reconstruction of sinogram stacks.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebraic::{
    bart, dart, reconstruction_projector, sirt, BartConfig, DartConfig, SirtConfig,
};
use crate::convexrec::{
    gkxr, mpw, ngon_2n, ufbp, GkxrConfig, NgonConfig, NgonOutcome, NoReconstruction,
};
use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Vec2};
use crate::grid::{rasterize, PixelSet, StructuringElement};
use crate::io::{read_stack, write_pgm, write_polygon_csv, PgmFormat};
use crate::metrics::errors;
use crate::noise::NoiseSpec;
use crate::phantoms::{make_phantom, PhantomSpec, HIRES_FACTOR, TRUTH_SIZE};
use crate::projector::{
    extract_shadow_stack, extract_shadows, ShadowOptions, ShadowSet, Sinogram, TiltSchedule,
};
use crate::simulate::{acquire_from, hires_sinogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "sirt")]
    Sirt,
    #[serde(rename = "bart")]
    Bart,
    #[serde(rename = "dart")]
    Dart,
    #[serde(rename = "gkxr")]
    Gkxr,
    #[serde(rename = "ufbp", alias = "u-fbp")]
    Ufbp,
    #[serde(rename = "mpw")]
    Mpw,
    #[serde(rename = "2n-gon", alias = "ngon")]
    Ngon,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Sirt,
        Algorithm::Bart,
        Algorithm::Dart,
        Algorithm::Gkxr,
        Algorithm::Ufbp,
        Algorithm::Mpw,
        Algorithm::Ngon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sirt => "sirt",
            Algorithm::Bart => "bart",
            Algorithm::Dart => "dart",
            Algorithm::Gkxr => "gkxr",
            Algorithm::Ufbp => "ufbp",
            Algorithm::Mpw => "mpw",
            Algorithm::Ngon => "2n-gon",
        }
    }

    /// Reconstructs from shadows only.
    pub fn uses_shadows(self) -> bool {
        matches!(self, Algorithm::Ufbp | Algorithm::Mpw | Algorithm::Ngon)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "sirt" => Algorithm::Sirt,
            "bart" => Algorithm::Bart,
            "dart" => Algorithm::Dart,
            "gkxr" => Algorithm::Gkxr,
            "ufbp" => Algorithm::Ufbp,
            "mpw" => Algorithm::Mpw,
            "2ngon" | "ngon" => Algorithm::Ngon,
            _ => return Err(Error::Config(format!("unknown algorithm '{s}'"))),
        })
    }
}

/// Parameters of every reconstructor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmConfigs {
    pub sirt: SirtConfig,
    pub bart: BartConfig,
    pub dart: DartConfig,
    /// GKXR on noisy data.
    pub gkxr: GkxrConfig,
    /// GKXR when σ = 0.
    pub gkxr_noise_free: GkxrConfig,
    pub ngon: NgonConfig,
    /// Forces `n` for 2n-GON. Unset: 4 for the octagon phantom, otherwise
    /// `ngon.n`.
    pub ngon_n: Option<usize>,
    pub shadows: ShadowOptions,
}

impl Default for AlgorithmConfigs {
    fn default() -> Self {
        Self {
            sirt: SirtConfig::default(),
            bart: BartConfig::default(),
            dart: DartConfig::default(),
            gkxr: GkxrConfig::default(),
            gkxr_noise_free: GkxrConfig::noise_free(),
            ngon: NgonConfig::default(),
            ngon_n: None,
            shadows: ShadowOptions::default(),
        }
    }
}

impl AlgorithmConfigs {
    pub fn ngon_for(&self, phantom: Option<u8>) -> NgonConfig {
        let n = self
            .ngon_n
            .unwrap_or(if phantom == Some(4) { 4 } else { self.ngon.n });
        NgonConfig {
            n,
            ..self.ngon.clone()
        }
    }

    pub fn gkxr_for(&self, sigma: f64) -> &GkxrConfig {
        if sigma == 0.0 {
            &self.gkxr_noise_free
        } else {
            &self.gkxr
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reconstruction {
    Pixels(PixelSet),
    Polygon(ConvexPolygon),
    NoReconstruction(NoReconstruction),
}

impl Reconstruction {
    /// The reconstruction on the `size` grid spanning the 512 field of view.
    pub fn pixels(&self, size: usize) -> Option<PixelSet> {
        match self {
            Reconstruction::Pixels(p) => Some(p.clone()),
            Reconstruction::Polygon(poly) => {
                Some(rasterize(poly, size, TRUTH_SIZE as f64 / size as f64))
            }
            Reconstruction::NoReconstruction(_) => None,
        }
    }
}

/// What a reconstructor may know beyond the data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReconContext {
    pub phantom: Option<u8>,
    pub sigma: f64,
    pub seed: u64,
}

pub fn reconstruct(
    alg: Algorithm,
    sino: &Sinogram,
    cfgs: &AlgorithmConfigs,
    ctx: &ReconContext,
) -> Result<Reconstruction> {
    if alg.uses_shadows() {
        return reconstruct_shadows(alg, &extract_shadows(sino, cfgs.shadows), cfgs, ctx);
    }
    Ok(match alg {
        Algorithm::Sirt => {
            Reconstruction::Pixels(PixelSet::from_binary(&sirt(sino, &cfgs.sirt)?.binary))
        }
        Algorithm::Dart => {
            let cfg = DartConfig {
                seed: ctx.seed,
                ..cfgs.dart.clone()
            };
            let img = dart(sino, &cfg)?;
            Reconstruction::Pixels(PixelSet::from_coords(
                img.size(),
                (0..img.size() * img.size())
                    .filter(|&i| img.pixels()[i] > 0.5 * cfg.rho)
                    .map(|i| (i / img.size(), i % img.size())),
            ))
        }
        Algorithm::Bart => Reconstruction::Pixels(PixelSet::from_binary(&bart(sino, &cfgs.bart)?)),
        Algorithm::Gkxr => {
            let mut cfg = cfgs.gkxr_for(ctx.sigma).clone();
            cfg.anneal.seed = ctx.seed;
            Reconstruction::Polygon(gkxr(sino, &cfg)?.polygon)
        }
        Algorithm::Ufbp | Algorithm::Mpw | Algorithm::Ngon => unreachable!(),
    })
}

/// Shadow-based reconstructors on already extracted shadows.
pub fn reconstruct_shadows(
    alg: Algorithm,
    shadows: &ShadowSet,
    cfgs: &AlgorithmConfigs,
    ctx: &ReconContext,
) -> Result<Reconstruction> {
    Ok(match alg {
        Algorithm::Ufbp => Reconstruction::Polygon(ufbp(shadows)?),
        Algorithm::Mpw => Reconstruction::Polygon(mpw(shadows)?),
        Algorithm::Ngon => match ngon_2n(shadows, &cfgs.ngon_for(ctx.phantom))? {
            NgonOutcome::Polygon(p) => Reconstruction::Polygon(p),
            NgonOutcome::NoReconstruction(r) => Reconstruction::NoReconstruction(r),
        },
        _ => {
            return Err(Error::Config(format!(
                "{alg} does not reconstruct from shadows"
            )))
        }
    })
}

/// `‖A·x − b‖₂` for the binary image `x` of `recon` under the projector
/// matching the detector of `sino`.
pub fn residual_norm(sino: &Sinogram, recon: &PixelSet) -> Result<f64> {
    let proj = reconstruction_projector(sino);
    if recon.size() != proj.size() {
        return Err(Error::SizeMismatch {
            expected: proj.size(),
            actual: recon.size(),
        });
    }
    let ax = proj.project(&recon.to_image(sino.detector_spacing()));
    Ok(ax
        .values()
        .iter()
        .zip(sino.values())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub phantoms: Vec<u8>,
    pub algorithms: Vec<Algorithm>,
    /// `S180_1`, `S140_1`, `S180_10`, `S140_10` or comma-separated angles.
    pub schedules: Vec<String>,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub save_images: bool,
    pub configs: AlgorithmConfigs,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            phantoms: vec![1],
            algorithms: Algorithm::ALL.to_vec(),
            schedules: vec!["S140_10".into()],
            sigmas: vec![0.0, 50.0],
            trials: 20,
            base_seed: 0,
            out_dir: None,
            workers: 0,
            save_images: false,
            configs: AlgorithmConfigs::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<Vec<TiltSchedule>> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.phantoms.is_empty()
            || self.algorithms.is_empty()
            || self.schedules.is_empty()
            || self.sigmas.is_empty()
        {
            return Err(Error::Config(
                "phantoms, algorithms, schedules and sigmas must be non-empty".into(),
            ));
        }
        for &p in &self.phantoms {
            make_phantom(p)?;
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Config(format!("invalid noise level {s}")));
        }
        self.schedules
            .iter()
            .map(|s| TiltSchedule::parse(s))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    NoReconstruction(NoReconstruction),
    Error(String),
}

impl TrialStatus {
    fn label(&self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::NoReconstruction(_) => "no_reconstruction",
            TrialStatus::Error(_) => "error",
        }
    }

    fn detail(&self) -> String {
        match self {
            TrialStatus::Ok => String::new(),
            TrialStatus::NoReconstruction(r) => r.to_string(),
            TrialStatus::Error(e) => e.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub phantom: u8,
    pub algorithm: Algorithm,
    pub schedule: String,
    pub sigma: f64,
    pub trial: usize,
    pub seed: u64,
    pub delta_s: Option<usize>,
    pub delta_h: Option<usize>,
    pub residual: Option<f64>,
    pub wall_time_ms: f64,
    pub status: TrialStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub phantom: u8,
    pub algorithm: Algorithm,
    pub schedule: String,
    pub sigma: f64,
    pub trials: usize,
    pub ok: usize,
    pub no_reconstruction: usize,
    pub errors: usize,
    pub mean_delta_s: Option<f64>,
    pub std_delta_s: Option<f64>,
    pub mean_delta_h: Option<f64>,
    pub std_delta_h: Option<f64>,
    pub mean_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub trials: Vec<TrialReport>,
    pub summary: Vec<CellSummary>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

/// Per-cell statistics over the `ok` trials, cells in order of first
/// appearance.
pub fn summarize(reports: &[TrialReport]) -> Vec<CellSummary> {
    let mut order: Vec<(u8, Algorithm, String, u64)> = Vec::new();
    let mut groups: HashMap<(u8, Algorithm, String, u64), Vec<&TrialReport>> = HashMap::new();
    for r in reports {
        let key = (
            r.phantom,
            r.algorithm,
            r.schedule.clone(),
            r.sigma.to_bits(),
        );
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let ok: Vec<&&TrialReport> = g.iter().filter(|r| r.status == TrialStatus::Ok).collect();
            let ds: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.delta_s)
                .map(|v| v as f64)
                .collect();
            let dh: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.delta_h)
                .map(|v| v as f64)
                .collect();
            let res: Vec<f64> = ok.iter().filter_map(|r| r.residual).collect();
            let s = mean_std(&ds);
            let h = mean_std(&dh);
            CellSummary {
                phantom: key.0,
                algorithm: key.1,
                schedule: key.2.clone(),
                sigma: f64::from_bits(key.3),
                trials: g.len(),
                ok: ok.len(),
                no_reconstruction: g
                    .iter()
                    .filter(|r| matches!(r.status, TrialStatus::NoReconstruction(_)))
                    .count(),
                errors: g
                    .iter()
                    .filter(|r| matches!(r.status, TrialStatus::Error(_)))
                    .count(),
                mean_delta_s: s.map(|v| v.0),
                std_delta_s: s.map(|v| v.1),
                mean_delta_h: h.map(|v| v.0),
                std_delta_h: h.map(|v| v.1),
                mean_residual: mean_std(&res).map(|v| v.0),
            }
        })
        .collect()
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed derived from a sequence of parts; stable across platforms and
/// releases.
pub fn stable_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, &p| mix(acc ^ mix(p)))
}

/// FNV-1a, for folding names into seeds.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed of the noisy data of one trial. All algorithms of a
/// (phantom, schedule, σ) cell see the same data in trial `t`.
pub fn data_seed(base: u64, phantom: u8, schedule: &str, sigma: f64, trial: usize) -> u64 {
    stable_seed(&[
        base,
        phantom as u64,
        stable_hash(schedule),
        sigma.to_bits(),
        trial as u64,
    ])
}

pub fn algorithm_seed(data_seed: u64, alg: Algorithm) -> u64 {
    stable_seed(&[data_seed, stable_hash(alg.name())])
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn data_schedule(
    alg: Algorithm,
    schedule: &TiltSchedule,
    cfgs: &AlgorithmConfigs,
    sigma: f64,
) -> Result<TiltSchedule> {
    if alg == Algorithm::Gkxr {
        // GKXR always measures its own four directions
        TiltSchedule::new(cfgs.gkxr_for(sigma).directions.to_vec())
    } else {
        Ok(schedule.clone())
    }
}

struct Job {
    phantom: u8,
    alg: Algorithm,
    schedule_idx: usize,
    sigma: f64,
    trial: usize,
}

fn schedule_key(s: &TiltSchedule) -> Vec<u64> {
    s.angles().iter().map(|a| a.to_bits()).collect()
}

fn image_stem(j: &Job, schedule: &str) -> String {
    let sched: String = schedule
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect();
    format!(
        "p{}_{}_{}_s{}_t{:03}",
        j.phantom, j.alg, sched, j.sigma, j.trial
    )
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let schedules = cfg.validate()?;
    let pool = pool(cfg.workers)?;
    let mut jobs = Vec::new();
    for &phantom in &cfg.phantoms {
        for &alg in &cfg.algorithms {
            for (schedule_idx, _) in schedules.iter().enumerate() {
                for &sigma in &cfg.sigmas {
                    for trial in 0..cfg.trials {
                        jobs.push(Job {
                            phantom,
                            alg,
                            schedule_idx,
                            sigma,
                            trial,
                        });
                    }
                }
            }
        }
    }

    // noise-free high-resolution data, once per (phantom, acquisition schedule)
    let mut needed: Vec<(u8, TiltSchedule)> = Vec::new();
    for &phantom in &cfg.phantoms {
        for &alg in &cfg.algorithms {
            for s in &schedules {
                for &sigma in &cfg.sigmas {
                    let ds = data_schedule(alg, s, &cfg.configs, sigma)?;
                    if !needed.iter().any(|(p, x)| *p == phantom && x == &ds) {
                        needed.push((phantom, ds));
                    }
                }
            }
        }
    }
    let phantoms: HashMap<u8, PhantomSpec> = cfg
        .phantoms
        .iter()
        .map(|&p| Ok((p, make_phantom(p)?)))
        .collect::<Result<_>>()?;
    let hires: HashMap<(u8, Vec<u64>), Sinogram> = pool.install(|| {
        needed
            .par_iter()
            .map(|(p, s)| {
                (
                    (*p, schedule_key(s)),
                    hires_sinogram(&phantoms[p].polygon, s, HIRES_FACTOR),
                )
            })
            .collect()
    });
    let truths: HashMap<u8, PixelSet> = phantoms
        .iter()
        .map(|(&p, spec)| (p, spec.truth(TRUTH_SIZE)))
        .collect();

    let image_dir = match (&cfg.out_dir, cfg.save_images) {
        (Some(dir), true) => {
            let d = dir.join("images");
            fs::create_dir_all(&d)?;
            Some(d)
        }
        _ => None,
    };

    let run = |j: &Job| -> TrialReport {
        let schedule_name = &cfg.schedules[j.schedule_idx];
        let seed = data_seed(cfg.base_seed, j.phantom, schedule_name, j.sigma, j.trial);
        let mut report = TrialReport {
            phantom: j.phantom,
            algorithm: j.alg,
            schedule: schedule_name.clone(),
            sigma: j.sigma,
            trial: j.trial,
            seed,
            delta_s: None,
            delta_h: None,
            residual: None,
            wall_time_ms: 0.0,
            status: TrialStatus::Ok,
        };
        let ds = match data_schedule(j.alg, &schedules[j.schedule_idx], &cfg.configs, j.sigma) {
            Ok(ds) => ds,
            Err(e) => {
                report.status = TrialStatus::Error(e.to_string());
                return report;
            }
        };
        let noise = (j.sigma > 0.0).then_some(NoiseSpec {
            sigma: j.sigma,
            seed,
        });
        let sino = acquire_from(&hires[&(j.phantom, schedule_key(&ds))], HIRES_FACTOR, noise);
        let ctx = ReconContext {
            phantom: Some(j.phantom),
            sigma: j.sigma,
            seed: algorithm_seed(seed, j.alg),
        };
        let start = Instant::now();
        let result = reconstruct(j.alg, &sino, &cfg.configs, &ctx);
        report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        match result {
            Err(e) => report.status = TrialStatus::Error(e.to_string()),
            Ok(Reconstruction::NoReconstruction(r)) => {
                report.status = TrialStatus::NoReconstruction(r)
            }
            Ok(rec) => {
                let pixels = rec
                    .pixels(TRUTH_SIZE)
                    .expect("pixel or polygon reconstruction");
                let e = errors(&truths[&j.phantom], &pixels);
                report.delta_s = Some(e.delta_s);
                report.delta_h = Some(e.delta_h);
                match residual_norm(&sino, &pixels) {
                    Ok(r) => report.residual = Some(r),
                    Err(e) => report.status = TrialStatus::Error(e.to_string()),
                }
                if let Some(dir) = &image_dir {
                    let stem = image_stem(j, schedule_name);
                    let mut saved = write_pgm(
                        dir.join(format!("{stem}.pgm")),
                        &pixels.to_image(1.0),
                        PgmFormat::Raw,
                    );
                    if let (Ok(()), Reconstruction::Polygon(poly)) = (&saved, &rec) {
                        saved = write_polygon_csv(dir.join(format!("{stem}_polygon.csv")), poly);
                    }
                    if let Err(e) = saved {
                        report.status = TrialStatus::Error(format!("saving images: {e}"));
                    }
                }
            }
        }
        report
    };
    let trials: Vec<TrialReport> = pool.install(|| jobs.par_iter().map(run).collect());
    let summary = summarize(&trials);
    if let Some(dir) = &cfg.out_dir {
        write_reports(dir, &trials, &summary)?;
    }
    Ok(ExperimentOutput { trials, summary })
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

/// Writes `trials.csv`, `summary.csv` and `timings.csv`. The first two depend
/// only on the configuration; wall times live in the third.
pub fn write_reports(dir: &Path, trials: &[TrialReport], summary: &[CellSummary]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join("trials.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record([
        "phantom",
        "algorithm",
        "schedule",
        "sigma",
        "trial",
        "seed",
        "delta_s",
        "delta_h",
        "residual",
        "status",
        "detail",
    ])
    .map_err(|e| csv_error(&path, e))?;
    for r in trials {
        w.write_record([
            r.phantom.to_string(),
            r.algorithm.to_string(),
            r.schedule.clone(),
            r.sigma.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            opt(&r.delta_s),
            opt(&r.delta_h),
            opt(&r.residual),
            r.status.label().to_string(),
            r.status.detail(),
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush()?;

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record([
        "phantom",
        "algorithm",
        "schedule",
        "sigma",
        "trials",
        "ok",
        "no_reconstruction",
        "errors",
        "mean_delta_s",
        "std_delta_s",
        "mean_delta_h",
        "std_delta_h",
        "mean_residual",
    ])
    .map_err(|e| csv_error(&path, e))?;
    for s in summary {
        w.write_record([
            s.phantom.to_string(),
            s.algorithm.to_string(),
            s.schedule.clone(),
            s.sigma.to_string(),
            s.trials.to_string(),
            s.ok.to_string(),
            s.no_reconstruction.to_string(),
            s.errors.to_string(),
            opt(&s.mean_delta_s),
            opt(&s.std_delta_s),
            opt(&s.mean_delta_h),
            opt(&s.std_delta_h),
            opt(&s.mean_residual),
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush()?;

    let path = dir.join("timings.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record([
        "phantom",
        "algorithm",
        "schedule",
        "sigma",
        "trial",
        "wall_time_ms",
    ])
    .map_err(|e| csv_error(&path, e))?;
    for r in trials {
        w.write_record([
            r.phantom.to_string(),
            r.algorithm.to_string(),
            r.schedule.clone(),
            r.sigma.to_string(),
            r.trial.to_string(),
            format!("{:.3}", r.wall_time_ms),
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StackConfig {
    pub algorithm: Algorithm,
    pub configs: AlgorithmConfigs,
    pub detector_spacing: f64,
    /// Morphological opening of the shadows across neighbouring slices.
    pub opening: bool,
    pub shadows: ShadowOptions,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ngon,
            configs: AlgorithmConfigs::default(),
            detector_spacing: 1.0,
            opening: true,
            shadows: ShadowOptions::measured(),
            seed: 0,
            workers: 0,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceResult {
    pub index: usize,
    pub file: PathBuf,
    pub status: TrialStatus,
    pub reconstruction: Option<Reconstruction>,
    pub residual: Option<f64>,
}

impl SliceResult {
    pub fn polygon(&self) -> Option<&ConvexPolygon> {
        match &self.reconstruction {
            Some(Reconstruction::Polygon(p)) => Some(p),
            _ => None,
        }
    }
}

/// Reconstructs every `slice_NNNN.csv` in `dir` independently. Per-slice
/// failures are recorded and the stack continues.
pub fn run_stack(dir: impl AsRef<Path>, cfg: &StackConfig) -> Result<Vec<SliceResult>> {
    let slices = read_stack(dir.as_ref(), cfg.detector_spacing)?;
    if slices.is_empty() {
        return Err(Error::Config(format!(
            "no slice_NNNN.csv files in {}",
            dir.as_ref().display()
        )));
    }
    let sinos: Vec<Sinogram> = slices.iter().map(|(_, s)| s.clone()).collect();
    let shadows: Option<Vec<ShadowSet>> = if cfg.algorithm.uses_shadows() {
        Some(if cfg.opening {
            extract_shadow_stack(&sinos, cfg.shadows, &StructuringElement::diamond(2))?
        } else {
            sinos
                .iter()
                .map(|s| extract_shadows(s, cfg.shadows))
                .collect()
        })
    } else {
        None
    };
    let pool = pool(cfg.workers)?;
    let results: Vec<SliceResult> = pool.install(|| {
        (0..slices.len())
            .into_par_iter()
            .map(|i| {
                let sino = &sinos[i];
                let ctx = ReconContext {
                    phantom: None,
                    sigma: f64::NAN,
                    seed: stable_seed(&[cfg.seed, i as u64]),
                };
                let rec = match &shadows {
                    Some(sh) => reconstruct_shadows(cfg.algorithm, &sh[i], &cfg.configs, &ctx),
                    None => reconstruct(cfg.algorithm, sino, &cfg.configs, &ctx),
                };
                let mut out = SliceResult {
                    index: i,
                    file: slices[i].0.clone(),
                    status: TrialStatus::Ok,
                    reconstruction: None,
                    residual: None,
                };
                match rec {
                    Err(e) => out.status = TrialStatus::Error(e.to_string()),
                    Ok(Reconstruction::NoReconstruction(r)) => {
                        out.status = TrialStatus::NoReconstruction(r)
                    }
                    Ok(r) => {
                        let n = sino.detector_count();
                        let px = r.pixels(n).expect("pixel or polygon reconstruction");
                        out.residual = residual_norm(sino, &px).ok();
                        out.reconstruction = Some(r);
                    }
                }
                out
            })
            .collect()
    });
    if let Some(dir) = &cfg.out_dir {
        write_stack_outputs(dir, &results, sinos[0].detector_count())?;
    }
    Ok(results)
}

fn write_stack_outputs(dir: &Path, results: &[SliceResult], size: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join("stack.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record([
        "slice", "file", "status", "detail", "vertices", "area", "residual", "image",
    ])
    .map_err(|e| csv_error(&path, e))?;
    for r in results {
        let mut image = String::new();
        if let Some(rec) = &r.reconstruction {
            let name = format!("recon_{:04}.pgm", r.index);
            let px = rec.pixels(size).expect("pixel or polygon reconstruction");
            write_pgm(dir.join(&name), &px.to_image(1.0), PgmFormat::Raw)?;
            if let Reconstruction::Polygon(p) = rec {
                write_polygon_csv(dir.join(format!("recon_{:04}_polygon.csv", r.index)), p)?;
            }
            image = name;
        }
        let poly = r.polygon();
        w.write_record([
            r.index.to_string(),
            r.file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            r.status.label().to_string(),
            r.status.detail(),
            poly.map(|p| p.len().to_string()).unwrap_or_default(),
            poly.map(|p| p.area().to_string()).unwrap_or_default(),
            opt(&r.residual),
            image,
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Orientation of a polygon with approximate `fold`-fold symmetry: the
/// length-weighted circular mean of its outer edge normals taken modulo
/// `360/fold` degrees, in `[0, 360/fold)`.
pub fn edge_normal_phase(poly: &ConvexPolygon, fold: usize) -> Option<f64> {
    let k = fold as f64;
    let (mut c, mut s) = (0.0, 0.0);
    for (a, b) in poly.edges() {
        let e = b - a;
        let normal = Vec2::new(e.y, -e.x);
        let phi = normal.y.atan2(normal.x) * k;
        c += e.norm() * phi.cos();
        s += e.norm() * phi.sin();
    }
    if c.hypot(s) < 1e-12 {
        return None;
    }
    Some((s.atan2(c).to_degrees() / k).rem_euclid(360.0 / k))
}

/// Sinograms of a synthetic wire: hexagon slices whose top `top_fraction`
/// is rotated by `twist` degrees, like the two-segment nanowire.
pub fn synthetic_wire_stack(
    slices: usize,
    top_fraction: f64,
    twist: f64,
    schedule: &TiltSchedule,
    sigma: f64,
    seed: u64,
) -> Vec<Sinogram> {
    let bottom = ConvexPolygon::regular(6, 60.0, Vec2::default(), 0.0);
    let top = ConvexPolygon::regular(6, 55.0, Vec2::default(), twist);
    let hires_bottom = hires_sinogram(&bottom, schedule, HIRES_FACTOR);
    let hires_top = hires_sinogram(&top, schedule, HIRES_FACTOR);
    let first_top = slices - ((slices as f64 * top_fraction).round() as usize).min(slices);
    (0..slices)
        .map(|i| {
            let h = if i >= first_top {
                &hires_top
            } else {
                &hires_bottom
            };
            let noise = (sigma > 0.0).then_some(NoiseSpec {
                sigma,
                seed: stable_seed(&[seed, i as u64]),
            });
            acquire_from(h, HIRES_FACTOR, noise)
        })
        .collect()
}
