use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use geotomo::harness::{reconstruct, residual_norm, AlgorithmConfigs, ReconContext, Reconstruction};
use geotomo::io::{
    read_pgm, read_pixelset_csv, read_polygon_csv, read_sinogram_csv, write_pgm, write_polygon_csv,
    write_sinogram_csv, write_stack, PgmFormat,
};
use geotomo::phantoms::{HIRES_FACTOR, TRUTH_SIZE};
use geotomo::simulate::{acquire_from, hires_sinogram};
use geotomo::{
    errors, make_phantom, run_experiment, run_stack, Algorithm, ExperimentConfig, NoiseSpec, PixelSet, StackConfig,
    TiltSchedule,
};

#[derive(Parser)]
#[command(name = "geotomo", version, about = "Limited-angle tomography of convex and homogeneous objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a 512-bin sinogram of a phantom
    Gen(GenArgs),
    /// Reconstruct one slice from a sinogram CSV or a simulated phantom
    Recon(ReconArgs),
    /// Monte-Carlo experiment over phantoms x algorithms x schedules x noise levels
    Bench(BenchArgs),
    /// Reconstruct a directory of slice_NNNN.csv sinograms
    Stack(StackArgs),
    /// Compare a reconstruction against a phantom or another pixel set
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    phantom: u8,
    #[arg(long, default_value = "S140_10")]
    schedule: String,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (sinogram.csv, truth.pgm, truth_polygon.csv)
    #[arg(long)]
    out: PathBuf,
    /// Write this many copies as slice_NNNN.csv, with independent noise
    #[arg(long)]
    slices: Option<usize>,
}

#[derive(Args)]
struct ReconArgs {
    #[arg(long, default_value = "2n-gon")]
    algo: Algorithm,
    /// Sinogram CSV; without it the phantom is simulated
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    detector_spacing: f64,
    /// Phantom to simulate and score against
    #[arg(long)]
    phantom: Option<u8>,
    #[arg(long, default_value = "S140_10")]
    schedule: String,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Algorithm parameters as JSON, same layout as `configs` in the bench config
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON experiment configuration; flags given on the command line override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    phantom: Option<Vec<u8>>,
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<Algorithm>>,
    /// Named schedules, separated by ';' (explicit angle lists use ',')
    #[arg(long, value_delimiter = ';')]
    schedule: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    save_images: bool,
}

#[derive(Args)]
struct StackArgs {
    /// Directory of slice_NNNN.csv sinograms
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "2n-gon")]
    algo: Algorithm,
    /// JSON stack configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    detector_spacing: Option<f64>,
    /// Skip the shadow opening across neighbouring slices
    #[arg(long)]
    no_opening: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Reconstruction: PGM (thresholded at 0.5), polygon CSV (x,y) or pixel CSV (row,col)
    #[arg(long)]
    recon: PathBuf,
    /// Ground-truth phantom
    #[arg(long, conflicts_with = "truth")]
    phantom: Option<u8>,
    /// Ground truth in any of the reconstruction formats
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Sinogram CSV for the residual norm
    #[arg(long)]
    sinogram: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    size: usize,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Recon(a) => recon(a),
        Command::Bench(a) => bench(a),
        Command::Stack(a) => stack(a),
        Command::Metrics(a) => metrics(a),
    }
}

fn noise(sigma: f64, seed: u64) -> Option<NoiseSpec> {
    (sigma > 0.0).then_some(NoiseSpec { sigma, seed })
}

fn gen(a: GenArgs) -> Result<()> {
    let p = make_phantom(a.phantom)?;
    let schedule = TiltSchedule::parse(&a.schedule)?;
    fs::create_dir_all(&a.out)?;
    let hires = hires_sinogram(&p.polygon, &schedule, HIRES_FACTOR);
    match a.slices {
        Some(n) => {
            let slices: Vec<_> = (0..n as u64)
                .map(|i| acquire_from(&hires, HIRES_FACTOR, noise(a.sigma, a.seed.wrapping_add(i))))
                .collect();
            write_stack(&a.out, &slices)?;
        }
        None => write_sinogram_csv(a.out.join("sinogram.csv"), &acquire_from(&hires, HIRES_FACTOR, noise(a.sigma, a.seed)))?,
    }
    write_pgm(a.out.join("truth.pgm"), &p.truth(TRUTH_SIZE).to_image(1.0), PgmFormat::Raw)?;
    write_polygon_csv(a.out.join("truth_polygon.csv"), &p.polygon)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn recon(a: ReconArgs) -> Result<()> {
    let cfgs: AlgorithmConfigs = match &a.config {
        Some(p) => read_json(p)?,
        None => Default::default(),
    };
    let sino = match (&a.input, a.phantom) {
        (Some(path), _) => read_sinogram_csv(path, a.detector_spacing)?,
        (None, Some(id)) => {
            let p = make_phantom(id)?;
            let schedule = if a.algo == Algorithm::Gkxr {
                let c = cfgs.gkxr_for(a.sigma);
                TiltSchedule::new(c.directions.to_vec())?
            } else {
                TiltSchedule::parse(&a.schedule)?
            };
            acquire_from(&hires_sinogram(&p.polygon, &schedule, HIRES_FACTOR), HIRES_FACTOR, noise(a.sigma, a.seed))
        }
        (None, None) => bail!("give --input or --phantom"),
    };
    let ctx = ReconContext {
        phantom: a.phantom,
        sigma: a.sigma,
        seed: a.seed,
    };
    fs::create_dir_all(&a.out)?;
    let rec = reconstruct(a.algo, &sino, &cfgs, &ctx)?;
    let size = sino.detector_count();
    let Some(pixels) = rec.pixels(size) else {
        if let Reconstruction::NoReconstruction(r) = rec {
            println!("no reconstruction: {r}");
        }
        return Ok(());
    };
    write_pgm(a.out.join("recon.pgm"), &pixels.to_image(1.0), PgmFormat::Raw)?;
    if let Reconstruction::Polygon(poly) = &rec {
        write_polygon_csv(a.out.join("recon_polygon.csv"), poly)?;
        println!("vertices {} area {:.1}", poly.len(), poly.area());
    }
    println!("residual {:.4}", residual_norm(&sino, &pixels)?);
    if let Some(id) = a.phantom {
        let truth = make_phantom(id)?.truth(TRUTH_SIZE);
        let e = errors(&truth, &rec.pixels(TRUTH_SIZE).expect("reconstruction present"));
        println!("delta_s {} delta_h {}", e.delta_s, e.delta_h);
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.phantom {
        cfg.phantoms = v;
    }
    if let Some(v) = a.algo {
        cfg.algorithms = v;
    }
    if let Some(v) = a.schedule {
        cfg.schedules = v;
    }
    if let Some(v) = a.sigma {
        cfg.sigmas = v;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = a.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = a.workers {
        cfg.workers = v;
    }
    if a.out.is_some() {
        cfg.out_dir = a.out;
    }
    cfg.save_images |= a.save_images;
    if cfg.out_dir.is_none() {
        cfg.out_dir = Some(PathBuf::from("results"));
    }
    let out = run_experiment(&cfg)?;
    println!(
        "{:>3} {:>7} {:>10} {:>6} {:>4} {:>4} {:>10} {:>8} {:>8} {:>6}",
        "ph", "algo", "schedule", "sigma", "ok", "noR", "mean_dS", "std_dS", "mean_dH", "std_dH"
    );
    let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    for s in &out.summary {
        println!(
            "{:>3} {:>7} {:>10} {:>6} {:>4} {:>4} {:>10} {:>8} {:>8} {:>6}",
            s.phantom,
            s.algorithm.name(),
            s.schedule,
            s.sigma,
            s.ok,
            s.no_reconstruction,
            f(s.mean_delta_s),
            f(s.std_delta_s),
            f(s.mean_delta_h),
            f(s.std_delta_h)
        );
    }
    println!("wrote {}", cfg.out_dir.as_ref().expect("set above").display());
    Ok(())
}

fn stack(a: StackArgs) -> Result<()> {
    let mut cfg: StackConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => StackConfig {
            algorithm: a.algo,
            ..StackConfig::default()
        },
    };
    if a.config.is_some() && a.algo != Algorithm::Ngon {
        cfg.algorithm = a.algo;
    }
    if let Some(v) = a.detector_spacing {
        cfg.detector_spacing = v;
    }
    if a.no_opening {
        cfg.opening = false;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.workers {
        cfg.workers = v;
    }
    cfg.out_dir = Some(a.out.clone());
    let res = run_stack(&a.input, &cfg)?;
    let ok = res.iter().filter(|r| r.reconstruction.is_some()).count();
    println!("{ok}/{} slices reconstructed, manifest {}", res.len(), a.out.join("stack.csv").display());
    Ok(())
}

fn load_pixels(path: &Path, size: usize) -> Result<PixelSet> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("pgm") {
        let img = read_pgm(path, 1.0)?;
        if img.size() != size {
            bail!("{} is {}x{}, expected {size}", path.display(), img.size(), img.size());
        }
        return Ok(PixelSet::from_binary(&img));
    }
    let header = fs::read_to_string(path)?.lines().next().unwrap_or("").trim().to_string();
    if header == "x,y" {
        let poly = read_polygon_csv(path)?;
        Ok(Reconstruction::Polygon(poly).pixels(size).expect("polygon"))
    } else {
        Ok(read_pixelset_csv(path, size)?)
    }
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let recon = load_pixels(&a.recon, a.size)?;
    let truth = match (a.phantom, &a.truth) {
        (Some(id), _) => make_phantom(id)?.truth(a.size),
        (None, Some(p)) => load_pixels(p, a.size)?,
        (None, None) => bail!("give --phantom or --truth"),
    };
    let e = errors(&truth, &recon);
    println!("delta_s {} delta_h {}", e.delta_s, e.delta_h);
    if let Some(s) = &a.sinogram {
        let sino = read_sinogram_csv(s, TRUTH_SIZE as f64 / a.size as f64)?;
        println!("residual {:.4}", residual_norm(&sino, &recon)?);
    }
    Ok(())
}
