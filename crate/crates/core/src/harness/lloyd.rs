use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{centroid, kmeans_cost, Clustering, Instance, Point};
use crate::scalar::Scalar;

pub const MAX_LLOYD_ROUNDS: usize = 500;

#[derive(Debug, Clone)]
pub struct LloydResult<T = f64> {
    pub clustering: Clustering,
    pub cost: T,
    pub rounds: usize,
}

fn nearest<T: Scalar>(p: &Point<T>, centers: &[Point<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, center) in centers.iter().enumerate() {
        let d = p.dist_sq(center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Farthest-point seeding from a random first center.
fn seed_centers<T: Scalar>(instance: &Instance<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Point<T>> {
    let n = instance.len();
    let mut centers = vec![instance.point(rng.random_range(0..n)).clone()];
    let mut gap: Vec<T> = instance.points().iter().map(|p| p.dist_sq(&centers[0])).collect();
    while centers.len() < k {
        let far = (0..n).fold(0, |b, i| if gap[i] > gap[b] { i } else { b });
        let c = instance.point(far).clone();
        for (g, p) in gap.iter_mut().zip(instance.points()) {
            *g = g.min(p.dist_sq(&c));
        }
        centers.push(c);
    }
    centers
}

/// Lloyd iterations until the assignment is stable or the round cap is hit.
/// An empty cluster is reseeded at the point farthest from its own center.
pub fn lloyd<T: Scalar>(instance: &Instance<T>, k: usize, seed: u64) -> Result<LloydResult<T>> {
    let n = instance.len();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(instance, k, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut rounds = 0;
    while rounds < MAX_LLOYD_ROUNDS {
        rounds += 1;
        let mut changed = false;
        let mut gaps = Vec::with_capacity(n);
        for (i, p) in instance.points().iter().enumerate() {
            let (c, d) = nearest(p, &centers);
            changed |= labels[i] != c;
            labels[i] = c;
            gaps.push(d);
        }
        let mut members = vec![Vec::new(); k];
        for (i, &c) in labels.iter().enumerate() {
            members[c].push(i);
        }
        for c in 0..k {
            if members[c].is_empty() {
                let far = (0..n)
                    .filter(|&i| members[labels[i]].len() > 1)
                    .fold(None, |b: Option<usize>, i| match b {
                        Some(b) if gaps[b] >= gaps[i] => Some(b),
                        _ => Some(i),
                    })
                    .ok_or(Error::EmptyCluster)?;
                let old = labels[far];
                members[old].retain(|&i| i != far);
                members[c].push(far);
                labels[far] = c;
                gaps[far] = T::zero();
                changed = true;
            }
        }
        for (c, m) in members.iter().enumerate() {
            centers[c] = centroid(instance, m)?;
        }
        if !changed {
            break;
        }
    }
    let clustering = Clustering::new(labels, k)?;
    let cost = kmeans_cost(instance, &clustering)?;
    Ok(LloydResult { clustering, cost, rounds })
}
