//! Prior construction shared with the command line, recipe files and the
//! end-to-end comparison runner.
//!
//! A recipe is flat `key = value` text grouped under `[section]` headers.
//! Blank lines and lines starting with `#` are ignored. Unknown sections or
//! keys are configuration errors, so typos do not silently fall back to
//! defaults. Relative paths are resolved against the recipe's directory.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use image::{GrayImage, Luma, Rgb, RgbImage};
use log::info;
use rayon::prelude::*;

use crate::acquisition::{
    forward, make_mask_1d, make_mask_poisson, phantom, simulate_coils, CoilSet, PhantomKind, PhaseModel,
    SamplingMask,
};
use crate::error::{Error, Result};
use crate::grid::{read_grids, write_grids, ComplexGrid, RealGrid};
use crate::metrics::{psnr, ssim};
use crate::priors::{
    schedule, GaussianPrior, GaussianPriorParams, L2Prior, NoiseSchedule, Prior, PriorKind, WaveletPrior,
    DEFAULT_N_SCALES, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN,
};
use crate::recon::{nlinv, pics_cg, pics_fista, zero_filled, NlinvConfig, PicsConfig};
use crate::rng::derive_seed;
use crate::score_model::load_checkpoint;

/// Everything needed to instantiate a [`Prior`].
#[derive(Clone, Debug)]
pub struct PriorSpec {
    pub kind: PriorKind,
    /// Wavelet threshold scale; the solver weight multiplies it.
    pub weight: f64,
    /// Annealing schedule for the Gaussian prior. `None` evaluates its score
    /// without added noise.
    pub schedule: Option<NoiseSchedule>,
    /// ArrayFile with two slices: the mean and (in the real part) the precision.
    pub gauss_params: Option<PathBuf>,
    pub gauss_p0: f64,
    pub gauss_kappa: f64,
    pub checkpoint: Option<PathBuf>,
}

impl PriorSpec {
    pub fn new(kind: PriorKind) -> Self {
        Self {
            kind,
            weight: 1.0,
            schedule: None,
            gauss_params: None,
            gauss_p0: 1.0,
            gauss_kappa: 1.0,
            checkpoint: None,
        }
    }
}

/// Reads Gaussian prior parameters stored as a two-slice ArrayFile.
pub fn read_gaussian_params(path: &Path) -> Result<GaussianPriorParams> {
    let (_, grids) = read_grids(path)?;
    if grids.len() != 2 {
        return Err(Error::Format(format!(
            "{}: Gaussian parameters need 2 slices (mean, precision), found {}",
            path.display(),
            grids.len()
        )));
    }
    let precision = grids[1].map(|v| v.re);
    GaussianPriorParams::new(grids[0].clone(), precision)
}

pub fn write_gaussian_params(path: &Path, params: &GaussianPriorParams) -> Result<()> {
    write_grids(path, &[params.mean().clone(), ComplexGrid::from_real(params.precision())])
}

/// Builds the prior for images of the given shape.
pub fn build_prior(spec: &PriorSpec, rows: usize, cols: usize) -> Result<Box<dyn Prior>> {
    Ok(match spec.kind {
        PriorKind::L2 => Box::new(L2Prior::new()),
        PriorKind::L1Wavelet => {
            if !(spec.weight >= 0.0) {
                return Err(Error::arg(format!("prior weight must be nonnegative, got {}", spec.weight)));
            }
            Box::new(WaveletPrior::new(spec.weight))
        }
        PriorKind::Gauss => {
            let params = match &spec.gauss_params {
                Some(p) => read_gaussian_params(p)?,
                None => GaussianPriorParams::smooth(rows, cols, spec.gauss_p0, spec.gauss_kappa)?,
            };
            if params.shape() != (rows, cols) {
                return Err(Error::arg(format!(
                    "Gaussian prior is {:?} but images are {rows}x{cols}",
                    params.shape()
                )));
            }
            match &spec.schedule {
                Some(s) => Box::new(GaussianPrior::with_schedule(params, s.clone())),
                None => Box::new(GaussianPrior::new(params)),
            }
        }
        PriorKind::Diffusion => {
            let dir = spec
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::arg("the diffusion prior needs a checkpoint directory"))?;
            let net = load_checkpoint(dir)?;
            Box::new(crate::priors::DiffusionPrior::new(Arc::new(net)))
        }
    })
}

/// Parsed recipe text. Lookups record which keys were consumed.
#[derive(Debug, Default)]
pub struct Recipe {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    used: RefCell<BTreeSet<(String, String)>>,
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i + 1;
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {lineno}: unterminated section header")))?
                    .trim();
                if name.is_empty() {
                    return Err(Error::Config(format!("line {lineno}: empty section name")));
                }
                sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
            let section = current
                .as_ref()
                .ok_or_else(|| Error::Config(format!("line {lineno}: key outside any section")))?;
            let entries = sections.get_mut(section).expect("section exists");
            if entries.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {lineno}: duplicate key `{}`", k.trim())));
            }
        }
        Ok(Self {
            sections,
            used: RefCell::new(BTreeSet::new()),
        })
    }
}

impl Recipe {
    pub fn read(path: &Path) -> Result<Self> {
        fs::read_to_string(path).map_err(|e| Error::io(path, e))?.parse()
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        let v = self.sections.get(section)?.get(key)?;
        self.used.borrow_mut().insert((section.to_string(), key.to_string()));
        Some(v)
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(section, key)
            .map(|v| {
                v.parse()
                    .map_err(|e| Error::Config(format!("[{section}] {key} = `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(section, key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim()
                            .parse()
                            .map_err(|e| Error::Config(format!("[{section}] {key}: `{}`: {e}", item.trim())))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Fails on any key that no lookup has consumed.
    pub fn check_all_used(&self) -> Result<()> {
        let used = self.used.borrow();
        for (section, entries) in &self.sections {
            for key in entries.keys() {
                if !used.contains(&(section.clone(), key.clone())) {
                    return Err(Error::Config(format!("unknown key `{key}` in [{section}]")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    ZeroFilled,
    PicsL2,
    PicsL1Wav,
    PicsPrior,
    NlinvPrior,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::ZeroFilled,
        Method::PicsL2,
        Method::PicsL1Wav,
        Method::PicsPrior,
        Method::NlinvPrior,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ZeroFilled => "zero-filled",
            Method::PicsL2 => "pics-l2",
            Method::PicsL1Wav => "pics-l1wav",
            Method::PicsPrior => "pics-prior",
            Method::NlinvPrior => "nlinv-prior",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown method `{s}`")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub enum Source {
    Phantom {
        kind: PhantomKind,
        phase: PhaseModel,
        rows: usize,
        cols: usize,
    },
    /// Ground-truth slices from an ArrayFile.
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskKind {
    Lines,
    Poisson,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub slices: usize,
    pub source: Source,
    pub coils: usize,
    pub coil_smoothness: f64,
    pub mask_kind: MaskKind,
    pub accels: Vec<f64>,
    pub calib: usize,
    pub noise_sd: f64,
    pub methods: Vec<Method>,
    pub pics_iters: usize,
    pub l2_alpha: f64,
    pub l1wav_alpha: f64,
    pub prior: PriorSpec,
    pub prior_alpha: f64,
    pub nlinv: NlinvConfig,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    /// Interprets a recipe; `base` anchors relative paths.
    pub fn from_recipe(r: &Recipe, base: &Path) -> Result<Self> {
        let seed = r.get_or("experiment", "seed", 0u64)?;
        let slices = r.get_or("experiment", "slices", 1usize)?;
        let source = match r.raw("input", "source").unwrap_or("phantom") {
            "phantom" => {
                let size = r.get_or("input", "size", 64usize)?;
                Source::Phantom {
                    kind: r.get_or("input", "kind", PhantomKind::RandomEllipses)?,
                    phase: r.get_or("input", "phase", PhaseModel::SmoothRandom)?,
                    rows: r.get_or("input", "rows", size)?,
                    cols: r.get_or("input", "cols", size)?,
                }
            }
            "file" => {
                let p = r
                    .raw("input", "path")
                    .ok_or_else(|| Error::Config("[input] source = file needs `path`".into()))?;
                Source::File(resolve(base, p))
            }
            other => return Err(Error::Config(format!("[input] unknown source `{other}`"))),
        };
        let mask_kind = match r.raw("mask", "kind").unwrap_or("poisson") {
            "poisson" => MaskKind::Poisson,
            "1d" => MaskKind::Lines,
            other => return Err(Error::Config(format!("[mask] unknown kind `{other}`"))),
        };
        let accels = r.list("mask", "accel")?.unwrap_or_else(|| vec![4.0]);
        if accels.is_empty() || accels.iter().any(|a: &f64| !(*a >= 1.0)) {
            return Err(Error::Config("[mask] accel values must be at least 1".into()));
        }
        let methods = r.list("methods", "run")?.unwrap_or_else(|| Method::ALL.to_vec());

        let kind: PriorKind = r.get_or("prior", "kind", PriorKind::Gauss)?;
        let mut prior = PriorSpec::new(kind);
        prior.weight = r.get_or("prior", "weight", 1.0)?;
        prior.gauss_p0 = r.get_or("prior", "p0", 1.0)?;
        prior.gauss_kappa = r.get_or("prior", "kappa", 1.0)?;
        prior.gauss_params = r.raw("prior", "params").map(|p| resolve(base, p));
        prior.checkpoint = r.raw("prior", "checkpoint").map(|p| resolve(base, p));
        let n_scales: usize = r.get_or("prior", "schedule_n", 0)?;
        let sigma_min = r.get_or("prior", "sigma_min", DEFAULT_SIGMA_MIN)?;
        let sigma_max = r.get_or("prior", "sigma_max", DEFAULT_SIGMA_MAX)?;
        if n_scales > 0 {
            prior.schedule = Some(schedule(n_scales, sigma_min, sigma_max)?);
        }

        let d = NlinvConfig::default();
        let nlinv = NlinvConfig {
            n: r.get_or("nlinv", "n", d.n)?,
            r: r.get_or("nlinv", "r", d.r)?,
            alpha0: r.get_or("nlinv", "alpha", d.alpha0)?,
            alpha_min: r.get_or("nlinv", "alpha_min", d.alpha_min)?,
            fista_iters: r.get_or("nlinv", "fista_iters", d.fista_iters)?,
            sobolev_a: r.get_or("nlinv", "sobolev_a", d.sobolev_a)?,
            sobolev_l: r.get_or("nlinv", "sobolev_l", d.sobolev_l)?,
            ..d
        };

        let cfg = Self {
            seed,
            slices,
            source,
            coils: r.get_or("coils", "count", 8)?,
            coil_smoothness: r.get_or("coils", "smoothness", 0.05)?,
            mask_kind,
            accels,
            calib: r.get_or("mask", "calib", 16)?,
            noise_sd: r.get_or("sim", "noise_sd", 0.0)?,
            methods,
            pics_iters: r.get_or("pics", "iters", 100)?,
            l2_alpha: r.get_or("pics", "l2_alpha", 0.01)?,
            l1wav_alpha: r.get_or("pics", "l1wav_alpha", 0.003)?,
            prior,
            prior_alpha: r.get_or("prior", "alpha", 0.01)?,
            nlinv,
        };
        r.check_all_used()?;
        if cfg.slices == 0 {
            return Err(Error::Config("[experiment] slices must be at least 1".into()));
        }
        Ok(cfg)
    }
}

/// One row of the metrics table.
#[derive(Clone, Debug, PartialEq)]
pub struct CellMetrics {
    pub method: Method,
    pub accel: f64,
    pub slice: usize,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<CellMetrics>,
    pub out_dir: PathBuf,
}

impl ExperimentReport {
    /// Median PSNR and SSIM over slices for one `(method, accel)` pair.
    pub fn median(&self, method: Method, accel: f64) -> Option<(f64, f64)> {
        let sel: Vec<&CellMetrics> = self
            .rows
            .iter()
            .filter(|c| c.method == method && c.accel == accel)
            .collect();
        if sel.is_empty() {
            return None;
        }
        let med = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        };
        Some((
            med(sel.iter().map(|c| c.psnr_db).collect()),
            med(sel.iter().map(|c| c.ssim).collect()),
        ))
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })
}

fn fmt_num(v: f64, digits: usize) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.digits$}")
    }
}

/// Accelerations print without trailing zeros (`2`, `8.2`).
pub fn accel_label(a: f64) -> String {
    format!("{a}")
}

/// Magnitude linearly mapped from `[0, max]` to gray levels.
pub fn write_magnitude_png(path: &Path, x: &ComplexGrid) -> Result<()> {
    let (rows, cols) = x.shape();
    let peak = x.max_abs();
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    let img = GrayImage::from_fn(cols as u32, rows as u32, |c, r| {
        Luma([(x.get(r as usize, c as usize).norm() * scale).round().clamp(0.0, 255.0) as u8])
    });
    img.save(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

// fully saturated hue wheel
fn hue_rgb(h: f64) -> [u8; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let f = h6 - h6.floor();
    let (r, g, b) = match h6.floor() as u32 {
        0 => (1.0, f, 0.0),
        1 => (1.0 - f, 1.0, 0.0),
        2 => (0.0, 1.0, f),
        3 => (0.0, 1.0 - f, 1.0),
        4 => (f, 0.0, 1.0),
        _ => (1.0, 0.0, 1.0 - f),
    };
    [r, g, b].map(|v: f64| (v * 255.0).round() as u8)
}

/// Phase mapped from `(-pi, pi]` onto a cyclic hue wheel.
pub fn write_phase_png(path: &Path, x: &ComplexGrid) -> Result<()> {
    let (rows, cols) = x.shape();
    let img = RgbImage::from_fn(cols as u32, rows as u32, |c, r| {
        let phi = x.get(r as usize, c as usize).arg();
        Rgb(hue_rgb((phi + std::f64::consts::PI) / std::f64::consts::TAU))
    });
    img.save(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| Error::io(p, e))
}

/// Array, magnitude PNG and phase PNG under a common stem.
pub fn write_image_set(stem: &Path, x: &ComplexGrid) -> Result<()> {
    write_grids(stem, std::slice::from_ref(x))?;
    let name = stem.file_name().and_then(|s| s.to_str()).unwrap_or("image");
    write_magnitude_png(&stem.with_file_name(format!("{name}_mag.png")), x)?;
    write_phase_png(&stem.with_file_name(format!("{name}_phase.png")), x)
}

pub fn metrics_csv(rows: &[CellMetrics]) -> String {
    let mut s = String::from("method,accel,slice,psnr_db,ssim\n");
    for c in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            c.method,
            accel_label(c.accel),
            c.slice,
            fmt_num(c.psnr_db, 4),
            fmt_num(c.ssim, 6)
        );
    }
    s
}

fn load_truth(cfg: &ExperimentConfig) -> Result<Vec<ComplexGrid>> {
    match &cfg.source {
        Source::Phantom { kind, phase, rows, cols } => (0..cfg.slices)
            .map(|s| phantom(*rows, *cols, *kind, *phase, derive_seed(cfg.seed, s as u64)))
            .collect(),
        Source::File(p) => {
            let (_, grids) = read_grids(p)?;
            if grids.len() < cfg.slices {
                return Err(Error::arg(format!(
                    "{} holds {} slices, recipe asks for {}",
                    p.display(),
                    grids.len(),
                    cfg.slices
                )));
            }
            Ok(grids.into_iter().take(cfg.slices).collect())
        }
    }
}

const COIL_TAG: u64 = 1 << 32;
const MASK_TAG: u64 = 2 << 32;
const NOISE_TAG: u64 = 3 << 32;

fn make_mask(cfg: &ExperimentConfig, rows: usize, cols: usize, ai: usize) -> Result<SamplingMask> {
    let a = cfg.accels[ai];
    match cfg.mask_kind {
        MaskKind::Lines => {
            if a.fract() != 0.0 {
                return Err(Error::arg(format!("line masks need integer acceleration, got {a}")));
            }
            make_mask_1d(rows, cols, a as usize, cfg.calib)
        }
        MaskKind::Poisson => make_mask_poisson(
            rows,
            cols,
            a,
            cfg.calib,
            cfg.calib,
            derive_seed(cfg.seed, MASK_TAG + ai as u64),
        ),
    }
}

struct Acquired {
    mask: SamplingMask,
    ksp: Vec<Vec<ComplexGrid>>,
}

fn reconstruct(
    method: Method,
    cfg: &ExperimentConfig,
    ksp: &[ComplexGrid],
    coils: &CoilSet,
    mask: &SamplingMask,
    prior: Option<&dyn Prior>,
) -> Result<ComplexGrid> {
    let pics = |alpha| PicsConfig {
        alpha,
        iterations: cfg.pics_iters,
        ..Default::default()
    };
    let prior = || prior.ok_or_else(|| Error::arg("no prior configured"));
    match method {
        Method::ZeroFilled => zero_filled(ksp, coils, mask),
        Method::PicsL2 => pics_cg(ksp, coils, mask, cfg.l2_alpha, cfg.pics_iters.max(1)),
        Method::PicsL1Wav => pics_fista(ksp, coils, mask, &WaveletPrior::new(1.0), &pics(cfg.l1wav_alpha)),
        Method::PicsPrior => pics_fista(ksp, coils, mask, prior()?, &pics(cfg.prior_alpha)),
        Method::NlinvPrior => {
            Ok(nlinv(ksp, mask, &cfg.nlinv, prior()?)?.normalized()?.0)
        }
    }
}

/// Runs every `(method, accel, slice)` cell and writes arrays, renderings and
/// `metrics.csv` / `summary.csv` to `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    create_dir(out)?;
    let truth = stage("input", load_truth(cfg))?;
    let (rows, cols) = truth[0].shape();
    if truth.iter().any(|t| t.shape() != (rows, cols)) {
        stage::<()>("input", Err(Error::arg("slices differ in shape")))?;
    }
    let coils = stage(
        "coils",
        simulate_coils(rows, cols, cfg.coils, cfg.coil_smoothness, derive_seed(cfg.seed, COIL_TAG)),
    )?;
    let acquired: Vec<Acquired> = cfg
        .accels
        .par_iter()
        .enumerate()
        .map(|(ai, _)| {
            let mask = stage("mask", make_mask(cfg, rows, cols, ai))?;
            let ksp = truth
                .iter()
                .enumerate()
                .map(|(s, t)| {
                    let seed = derive_seed(cfg.seed, NOISE_TAG + (ai * cfg.slices + s) as u64);
                    stage("sim", forward(t, &coils, &mask, cfg.noise_sd, seed))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Acquired { mask, ksp })
        })
        .collect::<Result<_>>()?;

    let needs_prior = cfg
        .methods
        .iter()
        .any(|m| matches!(m, Method::PicsPrior | Method::NlinvPrior));
    let prior = if needs_prior {
        Some(stage("prior", build_prior(&cfg.prior, rows, cols))?)
    } else {
        None
    };

    let mut cells = Vec::new();
    for &m in &cfg.methods {
        for ai in 0..cfg.accels.len() {
            for s in 0..cfg.slices {
                cells.push((m, ai, s));
            }
        }
    }
    info!("running {} reconstruction cells", cells.len());
    let images: Vec<ComplexGrid> = cells
        .par_iter()
        .map(|&(m, ai, s)| {
            let a = &acquired[ai];
            stage(
                m.as_str(),
                reconstruct(m, cfg, &a.ksp[s], &coils, &a.mask, prior.as_deref()),
            )
        })
        .collect::<Result<_>>()?;

    // single writer
    let report_stage = |r: Result<()>| stage("report", r);
    let truth_dir = out.join("truth");
    let mask_dir = out.join("masks");
    report_stage(create_dir(&truth_dir))?;
    report_stage(create_dir(&mask_dir))?;
    for (s, t) in truth.iter().enumerate() {
        report_stage(write_image_set(&truth_dir.join(format!("s{s}")), t))?;
    }
    for (ai, a) in acquired.iter().enumerate() {
        let stem = mask_dir.join(format!("a{}", accel_label(cfg.accels[ai])));
        report_stage(write_grids(&stem, &[a.mask.to_grid()]))?;
    }
    let mut rows_out = Vec::with_capacity(cells.len());
    for (&(m, ai, s), img) in cells.iter().zip(&images) {
        let dir = out.join(m.as_str());
        report_stage(create_dir(&dir))?;
        let stem = dir.join(format!("a{}_s{s}", accel_label(cfg.accels[ai])));
        report_stage(write_image_set(&stem, img))?;
        let reference = truth[s].abs();
        let test: RealGrid = img.abs();
        let psnr_db = stage("metrics", psnr(&reference, &test))?;
        let ssim_v = stage("metrics", ssim(&reference, &test))?;
        rows_out.push(CellMetrics {
            method: m,
            accel: cfg.accels[ai],
            slice: s,
            psnr_db,
            ssim: ssim_v,
        });
    }
    report_stage(write_text(&out.join("metrics.csv"), &metrics_csv(&rows_out)))?;
    let report = ExperimentReport {
        rows: rows_out,
        out_dir: out.to_path_buf(),
    };
    let mut summary = String::from("method,accel,psnr_db,ssim\n");
    for &m in &cfg.methods {
        for &a in &cfg.accels {
            if let Some((p, s)) = report.median(m, a) {
                let _ = writeln!(summary, "{m},{},{},{}", accel_label(a), fmt_num(p, 4), fmt_num(s, 6));
            }
        }
    }
    report_stage(write_text(&out.join("summary.csv"), &summary))?;
    Ok(report)
}

/// Reads a recipe, applies a seed override and runs it.
pub fn run_recipe(recipe: &Path, out: &Path, seed: Option<u64>) -> Result<ExperimentReport> {
    let r = stage("recipe", Recipe::read(recipe))?;
    let base = recipe.parent().unwrap_or(Path::new("."));
    let mut cfg = stage("recipe", ExperimentConfig::from_recipe(&r, base))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    run_experiment(&cfg, out)
}

/// Default schedule for priors that need one.
pub fn default_schedule() -> NoiseSchedule {
    schedule(DEFAULT_N_SCALES, DEFAULT_SIGMA_MIN, DEFAULT_SIGMA_MAX).expect("default schedule")
}
