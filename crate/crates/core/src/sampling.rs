//! Grids of (r, s) points and seeded random configurations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Config;
use crate::phi::PhiModel;

/// `count` evenly spaced values from `lo` to `hi` (just `lo` when `count == 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Range {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        Range { lo, hi, count }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.hi } else { self.lo + step * i as f64 }).collect()
    }

    /// Parses `lo:hi:count`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::InvalidConfig(format!("expected lo:hi:count, got `{text}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse().map_err(|_| bad())?;
        let hi = parts[1].trim().parse().map_err(|_| bad())?;
        let count = parts[2].trim().parse().map_err(|_| bad())?;
        Ok(Range { lo, hi, count })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_range: Range,
    /// `s = fraction · r`
    pub s_fraction_range: Range,
    pub n: usize,
    pub seed: u64,
}

/// One grid node; `index` is its position in row-major (r, fraction) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub index: usize,
    pub r: f64,
    pub s: f64,
}

impl GridSpec {
    pub fn new(r_range: Range, s_fraction_range: Range, n: usize, seed: u64) -> Self {
        GridSpec { r_range, s_fraction_range, n, seed }
    }

    /// Parses `rlo:rhi:rcount,flo:fhi:fcount`.
    pub fn parse(text: &str, n: usize, seed: u64) -> Result<Self> {
        let (r, f) = text
            .split_once(',')
            .ok_or_else(|| Error::InvalidConfig(format!("grid must be `rlo:rhi:rcount,flo:fhi:fcount`, got `{text}`")))?;
        Ok(GridSpec::new(Range::parse(r)?, Range::parse(f)?, n, seed))
    }

    pub fn validate(&self, model: &PhiModel) -> Result<()> {
        let r = self.r_range;
        let f = self.s_fraction_range;
        if r.count == 0 || f.count == 0 {
            return Err(Error::InvalidConfig("grid counts must be at least 1".into()));
        }
        if !(r.lo > 0.0 && r.lo <= r.hi && r.hi < model.r_max()) || (r.count > 1 && r.lo == r.hi) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < r_lo < r_hi < {} (got {}..{})",
                model.r_max(),
                r.lo,
                r.hi
            )));
        }
        if f.lo > f.hi || f.lo.abs() > model.s_safety() || f.hi.abs() > model.s_safety() {
            return Err(Error::InvalidConfig(format!(
                "s fractions must lie within ±{} (got {}..{})",
                model.s_safety(),
                f.lo,
                f.hi
            )));
        }
        if !(2..=crate::geometry::MAX_DIM).contains(&self.n) {
            return Err(Error::InvalidConfig(format!("dimension must be in 2..=8, got {}", self.n)));
        }
        Ok(())
    }

    pub fn r_values(&self) -> Vec<f64> {
        self.r_range.values()
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let fr = self.s_fraction_range.values();
        let mut out = Vec::with_capacity(self.r_range.count * fr.len());
        for r in self.r_values() {
            for &f in &fr {
                out.push(GridPoint { index: out.len(), r, s: f * r });
            }
        }
        out
    }

    /// A configuration realising the grid point, with a frame and |y| drawn
    /// from a stream keyed by (seed, index) — independent of evaluation order.
    pub fn config_for(&self, p: &GridPoint) -> Result<Config<f64>> {
        let mut rng = point_rng(self.seed, p.index as u64);
        config_with(&mut rng, self.n, p.r, p.s)
    }
}

pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.1 && norm <= 1.0 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

/// A configuration with the given `r` and `s`, random orientation and random `u ∈ [0.5, 2]`.
pub fn config_with<R: Rng>(rng: &mut R, n: usize, r: f64, s: f64) -> Result<Config<f64>> {
    let e1 = unit_vector(rng, n);
    let e2 = loop {
        let v = unit_vector(rng, n);
        let d: f64 = v.iter().zip(&e1).map(|(a, b)| a * b).sum();
        let w: Vec<f64> = v.iter().zip(&e1).map(|(a, b)| a - d * b).collect();
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.1 {
            break w.into_iter().map(|a| a / norm).collect::<Vec<_>>();
        }
    };
    let u: f64 = rng.gen_range(0.5..2.0);
    let c = s / r;
    let t = (1.0 - c * c).max(0.0).sqrt();
    let x = e1.iter().map(|a| r * a).collect();
    let y = e1.iter().zip(&e2).map(|(a, b)| u * (c * a + t * b)).collect();
    Config::new(x, y)
}

/// A random admissible configuration for `model`: r uniform in
/// `[0.15, 0.85] · r_max`, |s|/r uniform in the model's sampling band.
pub fn random_config<R: Rng>(rng: &mut R, model: &PhiModel, n: usize) -> Result<Config<f64>> {
    let r = rng.gen_range(0.15..0.85) * model.r_max();
    let (lo, hi) = model.sample_band();
    let frac = rng.gen_range(lo..hi);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    config_with(rng, n, r, sign * frac * r)
}
