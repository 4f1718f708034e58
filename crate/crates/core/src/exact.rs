//! Exhaustive solvers for tiny inputs, used as ground truth.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{kmeans_cost, Clustering, Instance};
use crate::hardness::{NiceClustering, Reduction, RowKind, X3cInstance};

pub const MAX_BRUTE_LOCATIONS: usize = 14;
pub const MAX_COVER_CANDIDATES: u128 = 1_000_000;
pub const MAX_NICE_ROWS: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct BruteResult {
    pub clustering: Clustering,
    pub cost: f64,
    /// Complete partitions whose cost was evaluated.
    pub examined: u64,
}

struct Search<'a> {
    coords: Vec<&'a [f64]>,
    weights: &'a [f64],
    k: usize,
    labels: Vec<usize>,
    // Per open cluster: total weight, weighted coordinate sum, weighted squared norm.
    mass: Vec<f64>,
    sum: Vec<Vec<f64>>,
    sq: Vec<f64>,
    best: Option<(f64, Vec<usize>)>,
    examined: u64,
}

impl Search<'_> {
    fn cost_of(&self, c: usize) -> f64 {
        if self.mass[c] == 0.0 {
            return 0.0;
        }
        let norm: f64 = self.sum[c].iter().map(|s| s * s).sum();
        (self.sq[c] - norm / self.mass[c]).max(0.0)
    }

    fn partial(&self, used: usize) -> f64 {
        (0..used).map(|c| self.cost_of(c)).sum()
    }

    fn place(&mut self, i: usize, c: usize, sign: f64) {
        let w = self.weights[i] * sign;
        self.mass[c] += w;
        let mut norm = 0.0;
        for (s, &x) in self.sum[c].iter_mut().zip(self.coords[i]) {
            *s += w * x;
            norm += x * x;
        }
        self.sq[c] += w * norm;
    }

    /// Restricted-growth enumeration: point `i` joins an open cluster or opens
    /// the next one.
    fn descend(&mut self, i: usize, used: usize) {
        let n = self.labels.len();
        if i == n {
            if used == self.k {
                self.examined += 1;
                let cost = self.partial(used);
                if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    self.best = Some((cost, self.labels.clone()));
                }
            }
            return;
        }
        if n - i < self.k - used {
            return;
        }
        // Cluster costs only grow as points join, so the partial cost bounds
        // every completion from below.
        if let Some((b, _)) = &self.best {
            if self.partial(used) >= *b {
                return;
            }
        }
        let open = if used < self.k { used + 1 } else { used };
        for c in 0..open {
            self.labels[i] = c;
            self.place(i, c, 1.0);
            self.descend(i + 1, used.max(c + 1));
            self.place(i, c, -1.0);
        }
    }
}

/// Optimal weighted k-means over all partitions of the locations into exactly
/// `k` nonempty parts. Ties keep the first partition in enumeration order.
pub fn brute_kmeans(instance: &Instance, k: usize) -> Result<BruteResult> {
    let n = instance.len();
    if n > MAX_BRUTE_LOCATIONS {
        return Err(Error::TooLarge(format!("{n} locations, limit {MAX_BRUTE_LOCATIONS}")));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in 1..={n}")));
    }
    let dim = instance.dim();
    let mut search = Search {
        coords: instance.points().iter().map(|p| p.coords()).collect(),
        weights: instance.weights(),
        k,
        labels: vec![0; n],
        mass: vec![0.0; k],
        sum: vec![vec![0.0; dim]; k],
        sq: vec![0.0; k],
        best: None,
        examined: 0,
    };
    search.descend(0, 0);
    let (_, labels) = search.best.expect("k <= n admits a partition");
    let clustering = Clustering::new(labels, k)?;
    let cost = kmeans_cost(instance, &clustering)?;
    Ok(BruteResult { clustering, cost, examined: search.examined })
}

fn binomial(n: usize, r: usize) -> u128 {
    let r = r.min(n.saturating_sub(r));
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Some exact cover as zero-based set indices, first in lexicographic order.
pub fn brute_exact_cover(x3c: &X3cInstance) -> Result<Option<Vec<usize>>> {
    let (l, m) = (x3c.len(), x3c.m());
    if m > l {
        return Ok(None);
    }
    let candidates = binomial(l, m);
    if candidates > MAX_COVER_CANDIDATES {
        return Err(Error::TooLarge(format!("{candidates} candidate covers, limit {MAX_COVER_CANDIDATES}")));
    }
    Ok((0..l).combinations(m).find(|rows| x3c.is_exact_cover(rows)))
}

#[derive(Debug, Clone)]
pub struct MinNice {
    pub cost: f64,
    /// Number of A-rows in the cheapest realizable assignment.
    pub a_rows: usize,
    pub nice: NiceClustering,
    /// Row assignments that admitted a nice clustering.
    pub realizable: usize,
}

/// Cheapest nice clustering over every A/B row assignment that the per-column
/// matchings can realize.
pub fn min_nice_cost(red: &Reduction) -> Result<MinNice> {
    let l = red.rows();
    if l > MAX_NICE_ROWS {
        return Err(Error::TooLarge(format!("{l} rows, limit {MAX_NICE_ROWS}")));
    }
    let mut best: Option<MinNice> = None;
    let mut realizable = 0;
    for mask in 0u32..(1 << l) {
        let rows: Vec<RowKind> =
            (0..l).map(|i| if mask >> i & 1 == 1 { RowKind::A } else { RowKind::B }).collect();
        let nice = match red.nice_clustering(&rows) {
            Ok(nice) => nice,
            Err(Error::NotRealizable { .. }) => continue,
            Err(e) => return Err(e),
        };
        realizable += 1;
        let cost = kmeans_cost(&red.instance, &nice.clustering)?;
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(MinNice { cost, a_rows: nice.a_rows(), nice, realizable: 0 });
        }
    }
    let mut best = best.expect("the all-B assignment is always realizable");
    best.realizable = realizable;
    Ok(best)
}
