//! Checkpoint directory: `manifest.txt` plus one array file per tensor.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::net::{Mode, ScoreNet};
use crate::error::{Error, Result};
use crate::grid::{read_array, write_array};
use crate::priors::schedule;

const MAGIC: &str = "magprior-scorenet 1";

pub fn save_checkpoint(net: &ScoreNet<f32>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let s = net.schedule();
    let mut manifest = format!(
        "{MAGIC}\nmode {}\nwidth {}\ndepth {}\nn_scales {}\nsigma_min {:e}\nsigma_max {:e}\n",
        net.mode().as_str(),
        net.width(),
        net.depth(),
        s.n_scales(),
        s.sigma_min(),
        s.sigma_max()
    );
    for (i, t) in net.tensors().iter().enumerate() {
        let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
        manifest.push_str(&format!("tensor {} {}\n", t.name, dims.join(" ")));
        // stored with reversed dims so the column-major file order equals the
        // row-major parameter order
        let rev: Vec<usize> = t.shape.iter().rev().copied().collect();
        let data: Vec<Complex64> = net
            .tensor(i)
            .iter()
            .map(|&v| Complex64::new(v as f64, 0.0))
            .collect();
        write_array(dir.join(&t.name), &rev, &data)?;
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

fn field<'a>(lines: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<&'a str> {
    let line = lines
        .next()
        .ok_or_else(|| Error::Format(format!("manifest ends before `{key}`")))?;
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::Format(format!("manifest line `{line}` should start with `{key}`")))
}

fn parse<T: std::str::FromStr>(v: &str, key: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Format(format!("manifest field `{key}` has bad value `{v}`")))
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<ScoreNet<f32>> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Format(format!(
            "{} is not a score-network manifest",
            path.display()
        )));
    }
    let mode: Mode = field(&mut lines, "mode")?.parse()?;
    let width: usize = parse(field(&mut lines, "width")?, "width")?;
    let depth: usize = parse(field(&mut lines, "depth")?, "depth")?;
    let n: usize = parse(field(&mut lines, "n_scales")?, "n_scales")?;
    let smin: f64 = parse(field(&mut lines, "sigma_min")?, "sigma_min")?;
    let smax: f64 = parse(field(&mut lines, "sigma_max")?, "sigma_max")?;
    let mut tensors = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let mut parts = line.split_whitespace();
        if parts.next() != Some("tensor") {
            return Err(Error::Format(format!("unexpected manifest line `{line}`")));
        }
        let name = parts
            .next()
            .ok_or_else(|| Error::Format("tensor line without a name".into()))?
            .to_string();
        let shape = parts
            .map(|d| parse::<usize>(d, "tensor shape"))
            .collect::<Result<Vec<_>>>()?;
        let (dims, data) = read_array(dir.join(&name))?;
        let expected: usize = shape.iter().product();
        if dims.iter().product::<usize>() != expected {
            return Err(Error::Format(format!(
                "tensor `{name}` has {} values, manifest declares {expected}",
                data.len()
            )));
        }
        tensors.push((name, data.iter().map(|z| z.re as f32).collect()));
    }
    ScoreNet::from_parts(mode, width, depth, schedule(n, smin, smax)?, tensors)
}
