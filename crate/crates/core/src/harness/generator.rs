use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Clustering, Instance, Point};
use crate::margin::{centroids, max_margin};

const MAX_REPAIR_ROUNDS: usize = 100;
const SHRINK: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub k: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub gamma_target: f64,
    #[serde(default)]
    pub seed: u64,
    /// Radius of the ball each cluster is drawn from.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Minimum center distance, in units of `gamma_target · radius`.
    #[serde(default = "default_separation")]
    pub separation: f64,
}

fn default_dim() -> usize {
    2
}

fn default_radius() -> f64 {
    1.0
}

fn default_separation() -> f64 {
    4.0
}

impl GenConfig {
    pub fn new(n: usize, k: usize, dim: usize, gamma_target: f64, seed: u64) -> Self {
        Self { n, k, dim, gamma_target, seed, radius: default_radius(), separation: default_separation() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n < self.k {
            return Err(Error::InvalidParameter(format!("need n >= k >= 1, got n={} k={}", self.n, self.k)));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".into()));
        }
        if !(self.gamma_target > 1.0 && self.gamma_target.is_finite()) {
            return Err(Error::MarginParameter);
        }
        if !(self.radius > 0.0 && self.separation > 0.0 && self.radius.is_finite() && self.separation.is_finite()) {
            return Err(Error::InvalidParameter("radius and separation must be positive".into()));
        }
        Ok(())
    }
}

fn place_centers(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let min_dist = cfg.separation * cfg.gamma_target * cfg.radius;
    let mut side = min_dist * (2.0 * cfg.k as f64).powf(1.0 / cfg.dim as f64);
    loop {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(cfg.k);
        let mut attempts = 0;
        while centers.len() < cfg.k && attempts < 1000 * cfg.k {
            attempts += 1;
            let c: Vec<f64> = (0..cfg.dim).map(|_| rng.random_range(0.0..side)).collect();
            let clear = centers.iter().all(|o| {
                o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= min_dist
            });
            if clear {
                centers.push(c);
            }
        }
        if centers.len() == cfg.k {
            return centers;
        }
        side *= 1.5;
    }
}

/// Uniform draw from the ball of radius `r` around `center`.
fn draw_in_ball(center: &[f64], r: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dim = center.len();
    let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let scale = r * rng.random::<f64>().powf(1.0 / dim as f64) / norm;
    center.iter().zip(&dir).map(|(c, d)| c + scale * d).collect()
}

/// Draws `k` separated blobs and shrinks them toward their centroids until the
/// ground truth satisfies the γ-margin property at `gamma_target`.
pub fn generate_margin_instance(cfg: &GenConfig) -> Result<(Instance, Clustering)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers = place_centers(cfg, &mut rng);
    let mut rows = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for (c, center) in centers.iter().enumerate() {
        let size = cfg.n / cfg.k + usize::from(c < cfg.n % cfg.k);
        for _ in 0..size {
            rows.push(draw_in_ball(center, cfg.radius, &mut rng));
            labels.push(c);
        }
    }
    let truth = Clustering::new(labels, cfg.k)?;
    let mut instance = Instance::from_rows(rows)?;
    for _ in 0..MAX_REPAIR_ROUNDS {
        if max_margin(&instance, &truth)?.gamma_star > cfg.gamma_target {
            return Ok((instance, truth));
        }
        let mus = centroids(&instance, &truth);
        let shrunk: Vec<Point> = instance
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mu = mus[truth.label(i)].coords();
                Point::new(mu.iter().zip(p.coords()).map(|(m, x)| m + SHRINK * (x - m)).collect())
            })
            .collect();
        instance = Instance::new(shrunk)?;
    }
    Err(Error::InvalidParameter(format!("margin repair did not reach {} in {MAX_REPAIR_ROUNDS} rounds", cfg.gamma_target)))
}
