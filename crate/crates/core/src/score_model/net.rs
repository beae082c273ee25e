//! Small convolutional score network with hand-written reverse mode.
//!
//! Complex grids enter as two real channels (real, imaginary). Each layer is a
//! 3x3 zero-padded convolution; all but the last are followed by SiLU. The
//! noise level conditions the network through a learned bias added to the
//! first hidden layer and a learned per-level gain on an input skip path.

use std::str::FromStr;

use num_complex::Complex64;

use super::gemm::{gemm, Mat, Scalar};
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::priors::NoiseSchedule;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Smld,
    Ddpm,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Smld => "smld",
            Mode::Ddpm => "ddpm",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smld" => Ok(Mode::Smld),
            "ddpm" => Ok(Mode::Ddpm),
            other => Err(Error::arg(format!("unknown training mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const DEFAULT_WIDTH: usize = 32;
pub const DEFAULT_DEPTH: usize = 6;

#[derive(Clone, Debug)]
pub struct ScoreNet<T> {
    mode: Mode,
    width: usize,
    depth: usize,
    schedule: NoiseSchedule,
    tensors: Vec<TensorInfo>,
    params: Vec<T>,
}

fn layout(width: usize, depth: usize, n_levels: usize) -> Vec<TensorInfo> {
    let mut out = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, shape: Vec<usize>| {
        let len: usize = shape.iter().product();
        out.push(TensorInfo {
            name,
            shape,
            offset,
        });
        offset += len;
    };
    for l in 0..depth {
        let cin = if l == 0 { 2 } else { width };
        let cout = if l + 1 == depth { 2 } else { width };
        push(format!("conv{l}.weight"), vec![cout, cin, 3, 3]);
        push(format!("conv{l}.bias"), vec![cout]);
    }
    push("level_embedding".into(), vec![n_levels, width]);
    push("level_skip".into(), vec![n_levels]);
    out
}

fn silu<T: Scalar>(z: T) -> T {
    let one = T::from_f64(1.0);
    z / (one + (-z).exp())
}

fn silu_grad<T: Scalar>(z: T) -> T {
    let one = T::from_f64(1.0);
    let s = one / (one + (-z).exp());
    s * (one + z * (one - s))
}

fn im2col<T: Scalar>(src: &[T], cin: usize, h: usize, w: usize, col: &mut Vec<T>) {
    let p = h * w;
    col.clear();
    col.resize(cin * 9 * p, T::default());
    for ci in 0..cin {
        let plane = &src[ci * p..(ci + 1) * p];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((ci * 9) + ky * 3 + kx) * p..][..p];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let sy = sy as usize;
                    for x in 0..w {
                        let sx = x as isize + kx as isize - 1;
                        if sx >= 0 && sx < w as isize {
                            row[y * w + x] = plane[sy * w + sx as usize];
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(col: &[T], cin: usize, h: usize, w: usize, dst: &mut [T]) {
    let p = h * w;
    dst.iter_mut().for_each(|v| *v = T::default());
    for ci in 0..cin {
        let plane = &mut dst[ci * p..(ci + 1) * p];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((ci * 9) + ky * 3 + kx) * p..][..p];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let sy = sy as usize;
                    for x in 0..w {
                        let sx = x as isize + kx as isize - 1;
                        if sx >= 0 && sx < w as isize {
                            plane[sy * w + sx as usize] += row[y * w + x];
                        }
                    }
                }
            }
        }
    }
}

struct Cache<T> {
    cols: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
}

impl<T: Scalar> ScoreNet<T> {
    /// Freshly initialized network. Hidden layers use He-normal weights, the
    /// output layer starts small, and conditioning tensors start at zero.
    pub fn new(
        mode: Mode,
        width: usize,
        depth: usize,
        schedule: NoiseSchedule,
        seed: u64,
    ) -> Result<Self> {
        if width == 0 || depth < 2 {
            return Err(Error::arg(format!(
                "network needs width >= 1 and depth >= 2 (got {width}, {depth})"
            )));
        }
        let tensors = layout(width, depth, schedule.n_scales() + 1);
        let total = tensors.last().map_or(0, |t| t.offset + t.len());
        let mut params = vec![T::default(); total];
        let mut r = rng::stream(seed, 0);
        for l in 0..depth {
            let t = &tensors[2 * l];
            let fan_in = (t.shape[1] * 9) as f64;
            let gain = if l + 1 == depth { 0.1 } else { 2.0f64.sqrt() };
            let sd = gain / fan_in.sqrt();
            for v in &mut params[t.offset..t.offset + t.len()] {
                *v = T::from_f64(sd * rng::normal(&mut r));
            }
        }
        Ok(Self {
            mode,
            width,
            depth,
            schedule,
            tensors,
            params,
        })
    }

    /// Assemble from stored parts; tensor shapes must match the layout.
    pub fn from_parts(
        mode: Mode,
        width: usize,
        depth: usize,
        schedule: NoiseSchedule,
        tensors: Vec<(String, Vec<T>)>,
    ) -> Result<Self> {
        let mut net = Self::new(mode, width, depth, schedule, 0)?;
        if tensors.len() != net.tensors.len() {
            return Err(Error::Config(format!(
                "expected {} tensors, found {}",
                net.tensors.len(),
                tensors.len()
            )));
        }
        for (info, (name, data)) in net.tensors.iter().zip(tensors) {
            if info.name != name || info.len() != data.len() {
                return Err(Error::Config(format!(
                    "tensor `{name}` ({} values) does not match `{}` ({} values)",
                    data.len(),
                    info.name,
                    info.len()
                )));
            }
            net.params[info.offset..info.offset + info.len()].copy_from_slice(&data);
        }
        Ok(net)
    }

    pub fn cast<U: Scalar>(&self) -> ScoreNet<U> {
        ScoreNet {
            mode: self.mode,
            width: self.width,
            depth: self.depth,
            schedule: self.schedule.clone(),
            tensors: self.tensors.clone(),
            params: self
                .params
                .iter()
                .map(|v| U::from_f64(v.to_f64()))
                .collect(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &[T] {
        let t = &self.tensors[i];
        &self.params[t.offset..t.offset + t.len()]
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn channels(&self, l: usize) -> (usize, usize) {
        let cin = if l == 0 { 2 } else { self.width };
        let cout = if l + 1 == self.depth { 2 } else { self.width };
        (cin, cout)
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level > self.schedule.n_scales() {
            return Err(Error::Config(format!(
                "level {level} exceeds the network's {} noise scales",
                self.schedule.n_scales()
            )));
        }
        Ok(())
    }

    fn input_scale(&self, level: usize) -> f64 {
        match self.mode {
            Mode::Smld => 1.0,
            Mode::Ddpm => 1.0 / (1.0 + self.schedule.sigma(level).powi(2)).sqrt(),
        }
    }

    fn to_channels(&self, x: &ComplexGrid, scale: f64) -> Vec<T> {
        let p = x.len();
        let mut v = vec![T::default(); 2 * p];
        for (i, z) in x.data().iter().enumerate() {
            v[i] = T::from_f64(z.re * scale);
            v[p + i] = T::from_f64(z.im * scale);
        }
        v
    }

    fn forward_cached(&self, input: &[T], h: usize, w: usize, level: usize) -> (Vec<T>, Cache<T>) {
        let p = h * w;
        let mut cache = Cache {
            cols: Vec::with_capacity(self.depth),
            pre: Vec::with_capacity(self.depth),
        };
        let mut act = input.to_vec();
        for l in 0..self.depth {
            let (cin, cout) = self.channels(l);
            let mut col = Vec::new();
            im2col(&act, cin, h, w, &mut col);
            let wt = self.tensor(2 * l);
            let bias = self.tensor(2 * l + 1);
            let mut z = vec![T::default(); cout * p];
            for (o, row) in z.chunks_mut(p).enumerate() {
                let mut b = bias[o];
                if l == 0 {
                    b += self.tensor(2 * self.depth)[level * self.width + o];
                }
                row.iter_mut().for_each(|v| *v = b);
            }
            gemm(
                Mat::new(wt, cout, cin * 9),
                Mat::new(&col, cin * 9, p),
                T::from_f64(1.0),
                &mut z,
            );
            act = if l + 1 == self.depth {
                z.clone()
            } else {
                z.iter().map(|&v| silu(v)).collect()
            };
            cache.cols.push(col);
            cache.pre.push(z);
        }
        let gain = self.tensor(2 * self.depth + 1)[level];
        for (o, i) in act.iter_mut().zip(input) {
            *o += gain * *i;
        }
        (act, cache)
    }

    fn backward(
        &self,
        input: &[T],
        h: usize,
        w: usize,
        level: usize,
        cache: &Cache<T>,
        dout: &[T],
        grads: &mut [T],
    ) {
        let p = h * w;
        let skip = &self.tensors[2 * self.depth + 1];
        let mut g = T::default();
        for (d, i) in dout.iter().zip(input) {
            g += *d * *i;
        }
        grads[skip.offset + level] += g;

        let mut dz = dout.to_vec();
        for l in (0..self.depth).rev() {
            let (cin, cout) = self.channels(l);
            if l + 1 != self.depth {
                for (d, &z) in dz.iter_mut().zip(&cache.pre[l]) {
                    *d = *d * silu_grad(z);
                }
            }
            let wi = &self.tensors[2 * l];
            let bi = &self.tensors[2 * l + 1];
            gemm(
                Mat::new(&dz, cout, p),
                Mat::new(&cache.cols[l], cin * 9, p).t(),
                T::from_f64(1.0),
                &mut grads[wi.offset..wi.offset + wi.len()],
            );
            for (o, row) in dz.chunks(p).enumerate() {
                let mut s = T::default();
                for &v in row {
                    s += v;
                }
                grads[bi.offset + o] += s;
                if l == 0 {
                    grads[self.tensors[2 * self.depth].offset + level * self.width + o] += s;
                }
            }
            if l > 0 {
                let mut dcol = vec![T::default(); cin * 9 * p];
                gemm(
                    Mat::new(self.tensor(2 * l), cout, cin * 9).t(),
                    Mat::new(&dz, cout, p),
                    T::default(),
                    &mut dcol,
                );
                let mut da = vec![T::default(); cin * p];
                col2im(&dcol, cin, h, w, &mut da);
                dz = da;
            }
        }
    }

    /// Raw two-channel network output as a complex grid.
    pub fn raw_output(&self, x: &ComplexGrid, level: usize) -> Result<ComplexGrid> {
        self.check_level(level)?;
        let input = self.to_channels(x, self.input_scale(level));
        let (out, _) = self.forward_cached(&input, x.rows(), x.cols(), level);
        let p = x.len();
        ComplexGrid::from_vec(
            x.rows(),
            x.cols(),
            (0..p)
                .map(|i| Complex64::new(out[i].to_f64(), out[p + i].to_f64()))
                .collect(),
        )
    }

    /// Estimated conjugate gradient of the log-density smoothed at level
    /// `level`, on the image range the network was trained on.
    pub fn score(&self, x: &ComplexGrid, level: usize) -> Result<ComplexGrid> {
        let raw = self.raw_output(x, level)?;
        let sigma = self.schedule.sigma(level);
        let s = match self.mode {
            Mode::Smld => 1.0 / sigma,
            Mode::Ddpm => -1.0 / sigma,
        };
        Ok(raw.scale(s))
    }

    /// Denoising score-matching loss for given clean grids, levels and unit
    /// complex noise draws, with its parameter gradient.
    ///
    /// Per sample the loss is `sigma^2 * sum |score + z/sigma|^2` in SMLD mode
    /// and the unit-weighted noise-prediction error in DDPM mode. The batch
    /// value is the mean over samples.
    pub fn loss_and_grad(
        &self,
        x0s: &[ComplexGrid],
        levels: &[usize],
        noises: &[ComplexGrid],
    ) -> Result<(f64, Vec<T>)> {
        if x0s.is_empty() || x0s.len() != levels.len() || x0s.len() != noises.len() {
            return Err(Error::arg(
                "batch, levels and noises must be nonempty and equally long",
            ));
        }
        let b = x0s.len() as f64;
        let mut grads = vec![T::default(); self.params.len()];
        let mut total = 0.0;
        for ((x0, &level), z) in x0s.iter().zip(levels).zip(noises) {
            self.check_level(level)?;
            x0.check_shape(z, "noise")?;
            let sigma = self.schedule.sigma(level);
            let mut xi = x0.clone();
            xi.axpy(Complex64::new(sigma, 0.0), z);
            let input = self.to_channels(&xi, self.input_scale(level));
            let (h, w) = x0.shape();
            let (out, cache) = self.forward_cached(&input, h, w, level);
            let sign = match self.mode {
                Mode::Smld => -1.0,
                Mode::Ddpm => 1.0,
            };
            let target = self.to_channels(z, sign);
            let mut dout = vec![T::default(); out.len()];
            let mut loss = 0.0;
            for ((d, &o), &t) in dout.iter_mut().zip(&out).zip(&target) {
                let r = o.to_f64() - t.to_f64();
                loss += r * r;
                *d = T::from_f64(2.0 * r / b);
            }
            total += loss;
            self.backward(&input, h, w, level, &cache, &dout, &mut grads);
        }
        Ok((total / b, grads))
    }
}
