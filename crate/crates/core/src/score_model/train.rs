use log::info;
use rand::seq::SliceRandom;
use rand::Rng;

use super::net::{Mode, ScoreNet, DEFAULT_DEPTH, DEFAULT_WIDTH};
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::priors::NoiseSchedule;
use crate::rng;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub mode: Mode,
    pub epochs: usize,
    pub batch: usize,
    pub learn_rate: f64,
    pub seed: u64,
    pub schedule: NoiseSchedule,
    pub augment: bool,
    pub width: usize,
    pub depth: usize,
}

impl TrainConfig {
    pub fn new(mode: Mode, schedule: NoiseSchedule) -> Self {
        Self {
            mode,
            epochs: 50,
            batch: 8,
            learn_rate: 1e-3,
            seed: 0,
            schedule,
            augment: true,
            width: DEFAULT_WIDTH,
            depth: DEFAULT_DEPTH,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::arg("batch size must be at least 1"));
        }
        if !(self.learn_rate > 0.0) {
            return Err(Error::arg("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub step_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

/// Trailing moving average with window `w` (shorter at the start).
pub fn smoothed(losses: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let mut out = Vec::with_capacity(losses.len());
    let mut acc = 0.0;
    for i in 0..losses.len() {
        acc += losses[i];
        if i >= w {
            acc -= losses[i - w];
        }
        out.push(acc / (i + 1).min(w) as f64);
    }
    out
}

/// Random element of the dihedral group of the grid (rotations by 90 degrees
/// only when square).
pub fn augment<R: Rng + ?Sized>(x: &ComplexGrid, rng: &mut R) -> ComplexGrid {
    let (rows, cols) = x.shape();
    let flip_r = rng.random_bool(0.5);
    let flip_c = rng.random_bool(0.5);
    let transpose = rows == cols && rng.random_bool(0.5);
    ComplexGrid::from_fn(rows, cols, |r, c| {
        let (mut sr, mut sc) = if transpose { (c, r) } else { (r, c) };
        if flip_r {
            sr = rows - 1 - sr;
        }
        if flip_c {
            sc = cols - 1 - sc;
        }
        *x.get(sr, sc)
    })
}

/// Training data must lie in the unit magnitude range.
pub fn check_normalized(batch: &[ComplexGrid]) -> Result<()> {
    for (i, x) in batch.iter().enumerate() {
        let m = x.max_abs();
        if !(m <= 1.0 + 1e-9) {
            return Err(Error::arg(format!(
                "training grid {i} has max magnitude {m}; grids must be normalized to at most 1"
            )));
        }
    }
    Ok(())
}

/// Draws levels uniformly over `0..=N` and unit complex noise per sample, then
/// evaluates the denoising score-matching loss.
pub fn dsm_loss<R: Rng + ?Sized>(
    net: &ScoreNet<f32>,
    batch: &[ComplexGrid],
    rng: &mut R,
) -> Result<(f64, Vec<f32>)> {
    if batch.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    check_normalized(batch)?;
    let n = net.schedule().n_scales();
    let levels: Vec<usize> = batch.iter().map(|_| rng.random_range(0..=n)).collect();
    let noises: Vec<ComplexGrid> = batch
        .iter()
        .map(|x| rng::complex_normal_grid(x.rows(), x.cols(), rng))
        .collect();
    net.loss_and_grad(batch, &levels, &noises)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f32], grads: &[f32], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i] as f64;
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g;
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= (lr * mh / (vh.sqrt() + Self::EPS)) as f32;
        }
    }
}

fn clip(grads: &mut [f32], max_norm: f64) {
    let norm = grads
        .iter()
        .map(|&g| (g as f64).powi(2))
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = (max_norm / norm) as f32;
        grads.iter_mut().for_each(|g| *g *= s);
    }
}

/// Train a fresh network on the given grids.
pub fn train(
    dataset: &[ComplexGrid],
    config: &TrainConfig,
) -> Result<(ScoreNet<f32>, TrainReport)> {
    config.validate()?;
    let net = ScoreNet::new(
        config.mode,
        config.width,
        config.depth,
        config.schedule.clone(),
        config.seed,
    )?;
    train_from(net, dataset, config)
}

/// Continue training an existing network.
pub fn train_from(
    mut net: ScoreNet<f32>,
    dataset: &[ComplexGrid],
    config: &TrainConfig,
) -> Result<(ScoreNet<f32>, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::arg("training dataset is empty"));
    }
    check_normalized(dataset)?;
    let mut rng = rng::stream(config.seed, 1);
    let mut adam = Adam::new(net.params().len());
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut step = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        let mut epoch_steps = 0;
        for chunk in order.chunks(config.batch) {
            let batch: Vec<ComplexGrid> = chunk
                .iter()
                .map(|&i| {
                    if config.augment {
                        augment(&dataset[i], &mut rng)
                    } else {
                        dataset[i].clone()
                    }
                })
                .collect();
            let (loss, mut grads) = dsm_loss(&net, &batch, &mut rng)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training {
                    step,
                    reason: format!("loss is {loss}"),
                });
            }
            clip(&mut grads, 1.0);
            adam.step(net.params_mut(), &grads, config.learn_rate);
            report.step_losses.push(loss);
            epoch_sum += loss;
            epoch_steps += 1;
            step += 1;
        }
        let mean = epoch_sum / epoch_steps as f64;
        info!("epoch {epoch}: mean loss {mean:.4}");
        report.epoch_losses.push(mean);
    }
    Ok((net, report))
}

/// Per-sample losses under draws fixed by `seed`, for comparing networks or
/// data transforms with common random numbers.
pub fn evaluate_loss(net: &ScoreNet<f32>, data: &[ComplexGrid], seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng::stream(seed, 2);
    let n = net.schedule().n_scales();
    data.iter()
        .map(|x| {
            let level = rng.random_range(0..=n);
            let z = rng::complex_normal_grid(x.rows(), x.cols(), &mut rng);
            net.loss_and_grad(std::slice::from_ref(x), &[level], &[z])
                .map(|(l, _)| l)
        })
        .collect()
}
