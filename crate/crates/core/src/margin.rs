//! Clusterability checks: γ-margin, α-center proximity, approximate-center
//! separation and the single-linkage pruning property.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{centroid_unchecked, Clustering, Instance, Point};
use crate::scalar::Scalar;

/// The pair of points attaining the smallest outside/inside distance ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MarginWitness {
    pub cluster: usize,
    /// Member of `cluster` farthest from its center.
    pub inside: usize,
    /// Non-member closest to the center of `cluster`.
    pub outside: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport<T = f64> {
    /// Supremum of the γ values the clustering satisfies; `+inf` when no
    /// cluster constrains it.
    pub gamma_star: T,
    pub witness: Option<MarginWitness>,
}

/// Ratio of one cluster: nearest outsider distance over radius, both measured
/// from `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRatio<T = f64> {
    pub ratio: T,
    pub radius: T,
    pub nearest_outside: Option<T>,
    pub witness: Option<MarginWitness>,
}

fn cluster_ratio<T: Scalar>(
    instance: &Instance<T>,
    clustering: &Clustering,
    cluster: usize,
    members: &[usize],
    center: &Point<T>,
) -> ClusterRatio<T> {
    let mut radius = T::zero();
    let mut inside = members[0];
    for &x in members {
        let d = instance.point(x).dist(center);
        if d > radius {
            radius = d;
            inside = x;
        }
    }
    let mut nearest: Option<(T, usize)> = None;
    for y in 0..instance.len() {
        if clustering.label(y) == cluster {
            continue;
        }
        let d = instance.point(y).dist(center);
        if nearest.is_none_or(|(best, _)| d < best) {
            nearest = Some((d, y));
        }
    }
    let Some((near, outside)) = nearest else {
        return ClusterRatio { ratio: T::infinity(), radius, nearest_outside: None, witness: None };
    };
    let ratio = if radius > T::zero() {
        near / radius
    } else if near > T::zero() {
        T::infinity()
    } else {
        // 0/0: an outsider sits on a zero-radius cluster's center; no γ works.
        T::zero()
    };
    let witness = ratio.is_finite().then_some(MarginWitness { cluster, inside, outside });
    ClusterRatio { ratio, radius, nearest_outside: Some(near), witness }
}

/// Per-cluster ratios with explicit centers.
pub fn cluster_ratios<T: Scalar>(
    instance: &Instance<T>,
    clustering: &Clustering,
    centers: &[Point<T>],
) -> Result<Vec<ClusterRatio<T>>> {
    clustering.check_for(instance)?;
    if centers.len() != clustering.k() {
        return Err(Error::CenterCount { expected: clustering.k(), got: centers.len() });
    }
    Ok(clustering
        .clusters()
        .iter()
        .enumerate()
        .map(|(c, members)| cluster_ratio(instance, clustering, c, members, &centers[c]))
        .collect())
}

pub fn centroids<T: Scalar>(instance: &Instance<T>, clustering: &Clustering) -> Vec<Point<T>> {
    clustering.clusters().iter().map(|m| centroid_unchecked(instance, m)).collect()
}

/// Largest margin of a clustering whose centers are its centroids.
pub fn max_margin<T: Scalar>(instance: &Instance<T>, clustering: &Clustering) -> Result<MarginReport<T>> {
    clustering.check_for(instance)?;
    max_margin_with_centers(instance, clustering, &centroids(instance, clustering))
}

pub fn max_margin_with_centers<T: Scalar>(
    instance: &Instance<T>,
    clustering: &Clustering,
    centers: &[Point<T>],
) -> Result<MarginReport<T>> {
    let mut report = MarginReport { gamma_star: T::infinity(), witness: None };
    for r in cluster_ratios(instance, clustering, centers)? {
        if r.ratio < report.gamma_star {
            report = MarginReport { gamma_star: r.ratio, witness: r.witness };
        }
    }
    Ok(report)
}

/// Whether `γ·d(x, μ_i) < d(y, μ_i)` holds for every member `x` and outsider `y`.
pub fn satisfies_gamma_margin<T: Scalar>(
    instance: &Instance<T>,
    clustering: &Clustering,
    gamma: T,
) -> Result<bool> {
    if !(gamma > T::zero()) {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    Ok(gamma < max_margin(instance, clustering)?.gamma_star)
}

/// α-center proximity: `α·d(x, c_i) < d(x, c_j)` for every `x ∈ C_i`, `j ≠ i`.
pub fn satisfies_alpha_proximity<T: Scalar>(
    instance: &Instance<T>,
    clustering: &Clustering,
    centers: &[Point<T>],
    alpha: T,
) -> Result<bool> {
    clustering.check_for(instance)?;
    if centers.len() != clustering.k() {
        return Err(Error::CenterCount { expected: clustering.k(), got: centers.len() });
    }
    if !(alpha > T::one()) {
        return Err(Error::InvalidParameter("alpha must exceed 1".into()));
    }
    Ok(instance.points().iter().zip(clustering.labels()).all(|(x, &i)| {
        let own = alpha * x.dist(&centers[i]);
        centers
            .iter()
            .enumerate()
            .all(|(j, c)| j == i || own < x.dist(c))
    }))
}

/// True iff every point of `inside` is strictly closer to `center` than every
/// point of `outside`.
pub fn separates<T: Scalar>(
    instance: &Instance<T>,
    inside: &[usize],
    outside: &[usize],
    center: &Point<T>,
) -> bool {
    let far_in = inside
        .iter()
        .map(|&x| instance.point(x).dist(center))
        .fold(T::neg_infinity(), T::max);
    outside.iter().all(|&y| far_in < instance.point(y).dist(center))
}

/// Checks that each approximate center separates its cluster from the rest.
pub fn check_center_separation<T: Scalar>(
    instance: &Instance<T>,
    clustering: &Clustering,
    approx_centers: &[Point<T>],
) -> Result<bool> {
    clustering.check_for(instance)?;
    if approx_centers.len() != clustering.k() {
        return Err(Error::CenterCount { expected: clustering.k(), got: approx_centers.len() });
    }
    let clusters = clustering.clusters();
    Ok(clusters.iter().enumerate().all(|(c, members)| {
        let outside: Vec<usize> = (0..instance.len()).filter(|&y| clustering.label(y) != c).collect();
        separates(instance, members, &outside, &approx_centers[c])
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Merge<T = f64> {
    pub left: usize,
    pub right: usize,
    pub height: T,
    pub size: usize,
}

/// Binary merge tree. Nodes `0..n` are leaves; merge `t` creates node `n + t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram<T = f64> {
    leaves: usize,
    merges: Vec<Merge<T>>,
}

impl<T: Scalar> Dendrogram<T> {
    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn merges(&self) -> &[Merge<T>] {
        &self.merges
    }

    pub fn node_count(&self) -> usize {
        self.leaves + self.merges.len()
    }

    pub fn root(&self) -> usize {
        self.node_count() - 1
    }

    /// `(left, right)` children of an internal node.
    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.leaves)
            .and_then(|t| self.merges.get(t))
            .map(|m| (m.left, m.right))
    }

    /// Sorted leaf indices under `node`.
    pub fn leaf_set(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match self.children(v) {
                Some((a, b)) => stack.extend([a, b]),
                None => out.push(v),
            }
        }
        out.sort_unstable();
        out
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Agglomerative single-linkage tree, built from a minimum spanning tree.
pub fn single_linkage_tree<T: Scalar>(instance: &Instance<T>) -> Dendrogram<T> {
    let n = instance.len();
    // Prim on the complete graph, O(n²).
    let mut in_tree = vec![false; n];
    let mut best = vec![T::infinity(); n];
    let mut link = vec![0usize; n];
    let mut edges: Vec<(T, usize, usize)> = Vec::with_capacity(n.saturating_sub(1));
    best[0] = T::zero();
    for step in 0..n {
        let mut v = usize::MAX;
        for u in 0..n {
            if !in_tree[u] && (v == usize::MAX || best[u] < best[v]) {
                v = u;
            }
        }
        in_tree[v] = true;
        if step > 0 {
            edges.push((best[v], link[v].min(v), link[v].max(v)));
        }
        for u in 0..n {
            if !in_tree[u] {
                let d = instance.dist(u, v);
                if d < best[u] {
                    best[u] = d;
                    link[u] = v;
                }
            }
        }
    }
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut sets = DisjointSets::new(n);
    let mut node_of = (0..n).collect::<Vec<_>>();
    let mut size_of = vec![1usize; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (height, a, b) in edges {
        let (ra, rb) = (sets.find(a), sets.find(b));
        let (left, right) = (node_of[ra].min(node_of[rb]), node_of[ra].max(node_of[rb]));
        let size = size_of[ra] + size_of[rb];
        sets.parent[rb] = ra;
        node_of[ra] = n + merges.len();
        size_of[ra] = size;
        merges.push(Merge { left, right, height, size });
    }
    Dendrogram { leaves: n, merges }
}

/// Whether every cluster is exactly the leaf set of some tree node.
pub fn is_pruning<T: Scalar>(dendrogram: &Dendrogram<T>, clustering: &Clustering) -> bool {
    if dendrogram.leaves() != clustering.len() {
        return false;
    }
    let n = dendrogram.leaves();
    // Label of each node when all its leaves share one label.
    let mut pure: Vec<Option<usize>> = clustering.labels().iter().map(|&l| Some(l)).collect();
    let mut size = vec![1usize; n];
    let mut found = vec![false; clustering.k()];
    let cluster_sizes: Vec<usize> = clustering.clusters().iter().map(Vec::len).collect();
    for (c, &s) in cluster_sizes.iter().enumerate() {
        if s == 1 {
            found[c] = true;
        }
    }
    for m in dendrogram.merges() {
        let label = match (pure[m.left], pure[m.right]) {
            (Some(a), Some(b)) if a == b => Some(a),
            _ => None,
        };
        pure.push(label);
        size.push(m.size);
        if let Some(c) = label {
            if m.size == cluster_sizes[c] {
                found[c] = true;
            }
        }
    }
    found.into_iter().all(|f| f)
}
