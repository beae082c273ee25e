#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use magprior::acquisition::{
    forward, make_mask_1d, make_mask_2d, make_mask_poisson, phantom, simulate_coils, CoilSet, PhantomKind,
    PhaseModel, SamplingMask, DEFAULT_SOBOLEV_A, DEFAULT_SOBOLEV_L,
};
use magprior::dataprep::{prep_volume, read_nifti, Corner, PrepOptions, DEFAULT_NOISE_MEAN, DEFAULT_NOISE_SD};
use magprior::experiment::{build_prior, run_recipe, PriorSpec};
use magprior::grid::{read_grids, write_grids, ComplexGrid};
use magprior::metrics::{psnr, ssim};
use magprior::phase_aug::{augment, AugmentConfig, DEFAULT_EPSILON, DEFAULT_GAMMA, DEFAULT_SAMPLES, DEFAULT_STEPS_PER_LEVEL};
use magprior::priors::{schedule, PriorKind, DEFAULT_N_SCALES, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN};
use magprior::recon::{nlinv, pics_cg, pics_fista, NlinvConfig, PicsConfig};
use magprior::rng::derive_seed;
use magprior::score_model::{save_checkpoint, train, Mode, TrainConfig, DEFAULT_DEPTH, DEFAULT_WIDTH};
use magprior::{Error, Result};

/// Multi-coil MRI simulation, reconstruction and prior training.
#[derive(Parser)]
#[command(name = "magprior", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a k-space sampling mask.
    Mask(MaskArgs),
    /// Generate phantom images.
    Phantom(PhantomArgs),
    /// Simulate coil sensitivity maps.
    Coils(CoilsArgs),
    /// Simulate undersampled multi-coil k-space.
    Sim(SimArgs),
    /// Reconstruct with known coils.
    Pics(PicsArgs),
    /// Joint image and coil reconstruction.
    Nlinv(NlinvArgs),
    /// Train a score network.
    TrainPrior(TrainArgs),
    /// Sample complex images for magnitude images.
    AugmentPhase(AugmentArgs),
    /// Preprocess NIfTI volumes into normalized slices.
    Prep(PrepArgs),
    /// PSNR and SSIM of test images against references.
    Metrics(MetricsArgs),
    /// Run an experiment recipe.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskKindArg {
    #[value(name = "1d")]
    Lines,
    #[value(name = "2d")]
    Lattice,
    Poisson,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, value_enum, default_value = "poisson")]
    kind: MaskKindArg,
    /// Acceleration; for `2d`, the factor along rows.
    #[arg(long)]
    accel: f64,
    /// Factor along columns for `2d`.
    #[arg(long, default_value_t = 1)]
    accel_c: usize,
    /// Calibration lines (`1d`) or block size.
    #[arg(long, default_value_t = 0)]
    calib: usize,
    /// Calibration block columns, if different from rows.
    #[arg(long)]
    calib_c: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    /// shepp-logan or random-ellipses.
    #[arg(long, default_value = "shepp-logan")]
    kind: PhantomKind,
    /// none or smooth-random.
    #[arg(long, default_value = "none")]
    phase: PhaseModel,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoilsArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 8)]
    coils: usize,
    #[arg(long, default_value_t = 0.05)]
    smoothness: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    coils: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PriorArgs {
    #[arg(long, default_value = "l2")]
    prior: PriorKind,
    /// Threshold scale of the wavelet prior.
    #[arg(long, default_value_t = 1.0)]
    prior_weight: f64,
    /// Annealing levels for the Gaussian prior (0: none).
    #[arg(long = "schedule-N", default_value_t = 0)]
    schedule_n: usize,
    #[arg(long, default_value_t = DEFAULT_SIGMA_MIN)]
    sigma_min: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA_MAX)]
    sigma_max: f64,
    /// Gaussian parameters as a two-slice ArrayFile (mean, precision).
    #[arg(long)]
    gauss: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    gauss_p0: f64,
    #[arg(long, default_value_t = 1.0)]
    gauss_kappa: f64,
    /// Score-network checkpoint directory.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl PriorArgs {
    fn spec(&self) -> Result<PriorSpec> {
        let mut spec = PriorSpec::new(self.prior);
        spec.weight = self.prior_weight;
        if self.schedule_n > 0 {
            spec.schedule = Some(schedule(self.schedule_n, self.sigma_min, self.sigma_max)?);
        }
        spec.gauss_params = self.gauss.clone();
        spec.gauss_p0 = self.gauss_p0;
        spec.gauss_kappa = self.gauss_kappa;
        spec.checkpoint = self.checkpoint.clone();
        Ok(spec)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Fista,
    Cg,
}

#[derive(Args)]
struct PicsArgs {
    #[arg(long)]
    ksp: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    coils: PathBuf,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// `cg` solves the l2 problem directly.
    #[arg(long, value_enum, default_value = "fista")]
    solver: Solver,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NlinvArgs {
    #[arg(long)]
    ksp: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 10)]
    gn_steps: usize,
    #[arg(long, default_value_t = 4)]
    reg_steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    alpha_min: f64,
    #[arg(long, default_value_t = 200)]
    fista_iters: usize,
    #[arg(long, default_value_t = DEFAULT_SOBOLEV_A)]
    sobolev_a: f64,
    #[arg(long, default_value_t = DEFAULT_SOBOLEV_L)]
    sobolev_l: f64,
    /// Coil-combined image `x RSS(c)`.
    #[arg(long)]
    out: PathBuf,
    /// Coils scaled to unit root-sum-of-squares.
    #[arg(long)]
    coils_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Smld,
    Ddpm,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "smld")]
    mode: ModeArg,
    /// Directory of ArrayFiles; every slice is one training image.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_WIDTH)]
    width: usize,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    #[arg(long = "schedule-N", default_value_t = DEFAULT_N_SCALES)]
    schedule_n: usize,
    #[arg(long, default_value_t = DEFAULT_SIGMA_MIN)]
    sigma_min: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA_MAX)]
    sigma_max: f64,
    #[arg(long)]
    no_augment: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    /// Magnitude ArrayFiles with values in [0, 1].
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// `gauss` or a score-network checkpoint directory.
    #[arg(long)]
    prior: String,
    #[arg(long)]
    gauss: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    gauss_p0: f64,
    #[arg(long, default_value_t = 1000.0)]
    gauss_kappa: f64,
    #[arg(long = "schedule-N", default_value_t = DEFAULT_N_SCALES)]
    schedule_n: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_STEPS_PER_LEVEL)]
    steps_per_level: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PrepArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NOISE_MEAN)]
    noise_mean: f64,
    #[arg(long, default_value_t = DEFAULT_NOISE_SD)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "tl")]
    corner: Corner,
    /// In-plane extent of the conformed slices.
    #[arg(long, default_value_t = magprior::dataprep::DEFAULT_TARGET)]
    target: usize,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Also write the table to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    recipe: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the recipe seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn read_one(path: &Path) -> Result<ComplexGrid> {
    let (_, mut grids) = read_grids(path)?;
    if grids.len() != 1 {
        return Err(Error::Argument(format!(
            "{} holds {} slices, expected 1",
            path.display(),
            grids.len()
        )));
    }
    Ok(grids.remove(0))
}

fn read_mask(path: &Path) -> Result<SamplingMask> {
    Ok(SamplingMask::from_grid(&read_one(path)?))
}

fn read_coils(path: &Path) -> Result<CoilSet> {
    CoilSet::new(read_grids(path)?.1)
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn write_text(p: &Path, s: &str) -> Result<()> {
    fs::write(p, s).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn cmd_mask(a: MaskArgs) -> Result<()> {
    let calib_c = a.calib_c.unwrap_or(a.calib);
    let mask = match a.kind {
        MaskKindArg::Lines => {
            if a.accel.fract() != 0.0 || a.accel < 1.0 {
                return Err(Error::Argument(format!("1d masks need an integer acceleration, got {}", a.accel)));
            }
            make_mask_1d(a.rows, a.cols, a.accel as usize, a.calib)?
        }
        MaskKindArg::Lattice => {
            if a.accel.fract() != 0.0 || a.accel < 1.0 {
                return Err(Error::Argument(format!("2d masks need an integer acceleration, got {}", a.accel)));
            }
            make_mask_2d(a.rows, a.cols, a.accel as usize, a.accel_c, a.calib, calib_c)?
        }
        MaskKindArg::Poisson => make_mask_poisson(a.rows, a.cols, a.accel, a.calib, calib_c, a.seed)?,
    };
    info!("realized acceleration {:.3}", mask.realized_acceleration());
    write_grids(&a.out, &[mask.to_grid()])
}

fn cmd_phantom(a: PhantomArgs) -> Result<()> {
    let grids = (0..a.count)
        .map(|i| {
            let seed = if a.count == 1 { a.seed } else { derive_seed(a.seed, i as u64) };
            phantom(a.rows, a.cols, a.kind, a.phase, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    write_grids(&a.out, &grids)
}

fn cmd_coils(a: CoilsArgs) -> Result<()> {
    let coils = simulate_coils(a.rows, a.cols, a.coils, a.smoothness, a.seed)?;
    write_grids(&a.out, coils.maps())
}

fn cmd_sim(a: SimArgs) -> Result<()> {
    let img = read_one(&a.image)?;
    let coils = read_coils(&a.coils)?;
    let mask = read_mask(&a.mask)?;
    let ksp = forward(&img, &coils, &mask, a.noise_sd, a.seed)?;
    write_grids(&a.out, &ksp)
}

fn cmd_pics(a: PicsArgs) -> Result<()> {
    let ksp = read_grids(&a.ksp)?.1;
    let mask = read_mask(&a.mask)?;
    let coils = read_coils(&a.coils)?;
    let x = match a.solver {
        Solver::Cg => {
            if a.prior.prior != PriorKind::L2 {
                return Err(Error::Argument("the cg solver supports only the l2 prior".into()));
            }
            pics_cg(&ksp, &coils, &mask, a.alpha, a.iters)?
        }
        Solver::Fista => {
            let prior = build_prior(&a.prior.spec()?, mask.rows(), mask.cols())?;
            let cfg = PicsConfig {
                alpha: a.alpha,
                iterations: a.iters,
                ..Default::default()
            };
            pics_fista(&ksp, &coils, &mask, prior.as_ref(), &cfg)?
        }
    };
    write_grids(&a.out, &[x])
}

fn cmd_nlinv(a: NlinvArgs) -> Result<()> {
    let ksp = read_grids(&a.ksp)?.1;
    let mask = read_mask(&a.mask)?;
    let prior = build_prior(&a.prior.spec()?, mask.rows(), mask.cols())?;
    let cfg = NlinvConfig {
        n: a.gn_steps,
        r: a.reg_steps,
        alpha0: a.alpha,
        alpha_min: a.alpha_min,
        fista_iters: a.fista_iters,
        sobolev_a: a.sobolev_a,
        sobolev_l: a.sobolev_l,
        ..Default::default()
    };
    let out = nlinv(&ksp, &mask, &cfg, prior.as_ref())?;
    for (k, s) in out.trace.iter().enumerate() {
        info!("step {k}: alpha {:.3e} residual {:.6e}", s.alpha, s.residual);
    }
    let (image, coils) = out.normalized()?;
    write_grids(&a.out, &[image])?;
    if let Some(p) = &a.coils_out {
        write_grids(p, coils.maps())?;
    }
    Ok(())
}

fn array_stems(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut stems: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "hdr"))
        .map(|p| p.with_extension(""))
        .collect();
    stems.sort();
    Ok(stems)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut data = Vec::new();
    for stem in array_stems(&a.data)? {
        for g in read_grids(&stem)?.1 {
            let m = g.max_abs();
            if m > 0.0 {
                data.push(g.scale(1.0 / m));
            } else {
                warn!("skipping all-zero slice in {}", stem.display());
            }
        }
    }
    info!("{} training images", data.len());
    let mode = match a.mode {
        ModeArg::Smld => Mode::Smld,
        ModeArg::Ddpm => Mode::Ddpm,
    };
    let mut cfg = TrainConfig::new(mode, schedule(a.schedule_n, a.sigma_min, a.sigma_max)?);
    cfg.epochs = a.epochs;
    cfg.batch = a.batch;
    cfg.learn_rate = a.lr;
    cfg.seed = a.seed;
    cfg.width = a.width;
    cfg.depth = a.depth;
    cfg.augment = !a.no_augment;
    let (net, report) = train(&data, &cfg)?;
    save_checkpoint(&net, &a.out)?;
    let mut log = String::from("epoch,mean_loss\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(log, "{i},{l:.6e}");
    }
    write_text(&a.out.join("losses.csv"), &log)
}

fn cmd_augment(a: AugmentArgs) -> Result<()> {
    let sched = schedule(a.schedule_n, DEFAULT_SIGMA_MIN, DEFAULT_SIGMA_MAX)?;
    let mut spec = if a.prior == "gauss" {
        let mut s = PriorSpec::new(PriorKind::Gauss);
        s.gauss_params = a.gauss.clone();
        s.gauss_p0 = a.gauss_p0;
        s.gauss_kappa = a.gauss_kappa;
        s
    } else {
        let mut s = PriorSpec::new(PriorKind::Diffusion);
        s.checkpoint = Some(PathBuf::from(&a.prior));
        s
    };
    spec.schedule = Some(sched.clone());
    create_dir(&a.out)?;
    let mut index = 0u64;
    for input in &a.inputs {
        let (_, grids) = read_grids(input)?;
        let name = input
            .with_extension("")
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("input")
            .to_string();
        for (k, g) in grids.iter().enumerate() {
            let (rows, cols) = g.shape();
            let prior = build_prior(&spec, rows, cols)?;
            let mut cfg = AugmentConfig {
                epsilon: a.eps,
                gamma: a.gamma,
                steps_per_level: a.steps_per_level,
                samples: a.samples,
                seed: derive_seed(a.seed, index),
                ..Default::default()
            };
            if prior.n_levels() > 0 {
                cfg.schedule = sched.clone();
            }
            let samples = augment(&g.abs(), prior.as_ref(), &cfg)?;
            write_grids(a.out.join(format!("{name}_s{k}")), &samples)?;
            index += 1;
        }
    }
    Ok(())
}

fn cmd_prep(a: PrepArgs) -> Result<()> {
    create_dir(&a.out)?;
    let opts = PrepOptions {
        target: a.target,
        noise_mean: a.noise_mean,
        noise_sd: a.noise_sd,
        seed: a.seed,
        corner: a.corner,
    };
    let mut manifest = String::from("file\tvolume\tslice\tstatus\tpatch_mean\tpatch_sd\n");
    for (v, input) in a.inputs.iter().enumerate() {
        let vol = read_nifti(input)?;
        for s in prep_volume(&vol, v, &opts)? {
            let status = match (&s.stats, s.kept()) {
                (None, _) => "empty",
                (Some(_), true) => "kept",
                (Some(_), false) => "excluded",
            };
            let name = format!("v{v:03}_z{:03}", s.index);
            let (mean, sd) = s
                .stats
                .map_or(("-".to_string(), "-".to_string()), |p| (format!("{:.6}", p.mean), format!("{:.6}", p.sd)));
            let _ = writeln!(manifest, "{}\t{v}\t{}\t{status}\t{mean}\t{sd}", input.display(), s.index);
            if s.kept() {
                let img = s.image.as_ref().expect("kept slices have an image");
                write_grids(a.out.join(name), &[ComplexGrid::from_real(img)])?;
            }
        }
    }
    write_text(&a.out.join("manifest.txt"), &manifest)
}

fn cmd_metrics(a: MetricsArgs) -> Result<()> {
    let (_, refs) = read_grids(&a.reference)?;
    let (_, tests) = read_grids(&a.test)?;
    if refs.len() != tests.len() {
        return Err(Error::Argument(format!(
            "reference has {} slices, test has {}",
            refs.len(),
            tests.len()
        )));
    }
    let mut table = String::from("slice,psnr_db,ssim\n");
    for (i, (r, t)) in refs.iter().zip(&tests).enumerate() {
        let (r, t) = (r.abs(), t.abs());
        let _ = writeln!(table, "{i},{:.4},{:.6}", psnr(&r, &t)?, ssim(&r, &t)?);
    }
    print!("{table}");
    if let Some(p) = &a.out {
        write_text(p, &table)?;
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let report = run_recipe(&a.recipe, &a.out, a.seed)?;
    info!("wrote {} metric rows to {}", report.rows.len(), report.out_dir.display());
    print!(
        "{}",
        fs::read_to_string(a.out.join("summary.csv")).map_err(|e| Error::Io {
            path: a.out.join("summary.csv"),
            source: e,
        })?
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mask(a) => cmd_mask(a),
        Command::Phantom(a) => cmd_phantom(a),
        Command::Coils(a) => cmd_coils(a),
        Command::Sim(a) => cmd_sim(a),
        Command::Pics(a) => cmd_pics(a),
        Command::Nlinv(a) => cmd_nlinv(a),
        Command::TrainPrior(a) => cmd_train(a),
        Command::AugmentPhase(a) => cmd_augment(a),
        Command::Prep(a) => cmd_prep(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Run(a) => cmd_run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
