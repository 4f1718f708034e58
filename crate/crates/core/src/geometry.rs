//! Weighted Euclidean point sets, clusterings and the k-means objective.
//!
//! A weight stands for the multiplicity of a location: a point of weight `w`
//! behaves exactly like `w` coincident unit points in every cost formula.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<T = f64> {
    coords: Vec<T>,
}

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn origin(dim: usize) -> Self {
        Self { coords: vec![T::zero(); dim] }
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn dist_sq(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, other: &Self) -> T {
        self.dist_sq(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// `self + s * dir`
    pub fn offset(&self, dir: &[T], s: T) -> Self {
        Self::new(self.coords.iter().zip(dir).map(|(&a, &d)| a + s * d).collect())
    }
}

impl<T> From<Vec<T>> for Point<T> {
    fn from(coords: Vec<T>) -> Self {
        Self { coords }
    }
}

/// A finite weighted point set of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T = f64> {
    dim: usize,
    points: Vec<Point<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> Instance<T> {
    /// Unit-weight instance.
    pub fn new(points: Vec<Point<T>>) -> Result<Self> {
        let weights = vec![T::one(); points.len()];
        Self::with_weights(points, weights)
    }

    pub fn with_weights(points: Vec<Point<T>>, weights: Vec<T>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyInstance)?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if weights.len() != points.len() {
            return Err(Error::LabelCount { expected: points.len(), got: weights.len() });
        }
        for (index, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
            }
            if !p.is_finite() {
                return Err(Error::NonFinite { index });
            }
        }
        for (index, &w) in weights.iter().enumerate() {
            if !(w > T::zero() && w.is_finite()) {
                return Err(Error::InvalidWeight { index });
            }
        }
        Ok(Self { dim, points, weights })
    }

    /// Convenience constructor from raw coordinate rows.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Point::new).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point<T> {
        &self.points[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn is_unweighted(&self) -> bool {
        self.weights.iter().all(|&w| w == T::one())
    }

    pub fn dist(&self, i: usize, j: usize) -> T {
        self.points[i].dist(&self.points[j])
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index, len: self.len() })
        }
    }

    /// Applies `f` to every point, keeping weights.
    pub fn map_points(&self, mut f: impl FnMut(&Point<T>) -> Point<T>) -> Result<Self> {
        Self::with_weights(self.points.iter().map(&mut f).collect(), self.weights.clone())
    }
}

/// A partition of the instance points into `k` labeled, nonempty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawClustering")]
pub struct Clustering {
    k: usize,
    labels: Vec<usize>,
}

#[derive(Deserialize)]
struct RawClustering {
    k: usize,
    labels: Vec<usize>,
}

impl TryFrom<RawClustering> for Clustering {
    type Error = Error;

    fn try_from(raw: RawClustering) -> Result<Self> {
        Clustering::new(raw.labels, raw.k)
    }
}

impl Clustering {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        let mut seen = vec![false; k];
        for &label in &labels {
            if label >= k {
                return Err(Error::LabelOutOfRange { label, k });
            }
            seen[label] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::MissingLabel(missing));
        }
        Ok(Self { k, labels })
    }

    /// Builds labels from arbitrary tags, numbering clusters by first appearance.
    pub fn from_tags<K: std::hash::Hash + Eq>(tags: impl IntoIterator<Item = K>) -> Result<Self> {
        let mut ids = HashMap::new();
        let labels: Vec<usize> = tags
            .into_iter()
            .map(|t| {
                let next = ids.len();
                *ids.entry(t).or_insert(next)
            })
            .collect();
        Self::new(labels, ids.len())
    }

    /// Builds a clustering of `n` points from explicit member lists.
    pub fn from_parts(parts: &[Vec<usize>], n: usize) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (c, part) in parts.iter().enumerate() {
            for &i in part {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, len: n });
                }
                if labels[i] != usize::MAX {
                    return Err(Error::InvalidParameter(format!("point {i} assigned twice")));
                }
                labels[i] = c;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidParameter(format!("point {i} not assigned")));
        }
        Self::new(labels, parts.len())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }

    /// Member lists indexed by label.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Labels renumbered by order of first appearance.
    pub fn canonical_labels(&self) -> Vec<usize> {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        self.labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect()
    }

    /// Partition equality, ignoring how clusters are numbered.
    pub fn same_partition(&self, other: &Clustering) -> bool {
        self.k == other.k
            && self.len() == other.len()
            && self.canonical_labels() == other.canonical_labels()
    }

    pub fn check_for<T: Scalar>(&self, instance: &Instance<T>) -> Result<()> {
        if self.len() != instance.len() {
            return Err(Error::LabelCount { expected: instance.len(), got: self.len() });
        }
        Ok(())
    }
}

/// Weighted mean of the selected points.
pub fn centroid<T: Scalar>(instance: &Instance<T>, members: &[usize]) -> Result<Point<T>> {
    if members.is_empty() {
        return Err(Error::EmptyCluster);
    }
    for &i in members {
        instance.check_index(i)?;
    }
    Ok(centroid_unchecked(instance, members))
}

pub(crate) fn centroid_unchecked<T: Scalar>(instance: &Instance<T>, members: &[usize]) -> Point<T> {
    let mut acc = vec![T::zero(); instance.dim()];
    let mut total = T::zero();
    for &i in members {
        let w = instance.weight(i);
        total = total + w;
        for (a, &c) in acc.iter_mut().zip(instance.point(i).coords()) {
            *a = *a + w * c;
        }
    }
    Point::new(acc.into_iter().map(|a| a / total).collect())
}

/// Unweighted mean of a set of points.
pub fn mean<T: Scalar>(points: &[&Point<T>]) -> Result<Point<T>> {
    let first = points.first().ok_or(Error::EmptyCluster)?;
    let mut acc = vec![T::zero(); first.dim()];
    for p in points {
        for (a, &c) in acc.iter_mut().zip(p.coords()) {
            *a = *a + c;
        }
    }
    let n = T::from_usize(points.len()).expect("count fits in scalar");
    Ok(Point::new(acc.into_iter().map(|a| a / n).collect()))
}

/// Σ w_i ‖x_i − μ‖² for the given members around their own centroid.
pub fn cluster_cost<T: Scalar>(instance: &Instance<T>, members: &[usize]) -> Result<T> {
    let mu = centroid(instance, members)?;
    Ok(scatter_about(instance, members, &mu))
}

/// Σ w_i ‖x_i − c‖² for an arbitrary reference point `c`.
pub fn scatter_about<T: Scalar>(instance: &Instance<T>, members: &[usize], c: &Point<T>) -> T {
    members.iter().map(|&i| instance.weight(i) * instance.point(i).dist_sq(c)).sum()
}

/// The k-means objective of a clustering with centroid centers.
pub fn kmeans_cost<T: Scalar>(instance: &Instance<T>, clustering: &Clustering) -> Result<T> {
    clustering.check_for(instance)?;
    Ok(clustering
        .clusters()
        .iter()
        .map(|m| scatter_about(instance, m, &centroid_unchecked(instance, m)))
        .sum())
}

/// Exact cost increase of adding point `z` to `cluster`.
///
/// Uses the closed form `W·w_z/(W + w_z) · ‖z − μ‖²` rather than recomputing
/// both costs, so it can be checked against [`cluster_cost`].
pub fn cost_delta_add<T: Scalar>(instance: &Instance<T>, cluster: &[usize], z: usize) -> Result<T> {
    instance.check_index(z)?;
    if cluster.contains(&z) {
        return Err(Error::AlreadyMember(z));
    }
    let mu = centroid(instance, cluster)?;
    let total: T = cluster.iter().map(|&i| instance.weight(i)).sum();
    let wz = instance.weight(z);
    Ok(total * wz / (total + wz) * instance.point(z).dist_sq(&mu))
}
