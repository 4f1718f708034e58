//! Query-driven exact recovery of a γ-margin clustering.
//!
//! Each of the `k` rounds estimates one cluster center from cluster-assignment
//! answers on a uniform sample of the remaining points, then sorts the
//! remaining points by distance to that estimate and binary-searches the
//! cluster boundary with same-cluster queries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{mean, Clustering, Instance, Point};
use crate::oracle::{solve_with_abstentions, AbstentionConfig, Answer, Oracle, QueryBudgetReport, SimulationOutcome};
use crate::scalar::Scalar;

pub const DEFAULT_BETA: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SsacParams {
    pub k: usize,
    /// Margin the target clustering is promised to satisfy; must exceed 1.
    pub gamma: f64,
    /// Failure probability, in `(0, 1)`.
    pub delta: f64,
    /// Multiplier of the concentration bound.
    pub beta: f64,
    pub seed: u64,
}

impl SsacParams {
    pub fn new(k: usize, gamma: f64, delta: f64) -> Self {
        Self { k, gamma, delta, beta: DEFAULT_BETA, seed: 0 }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(Error::MarginParameter);
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        Ok(())
    }

    /// Samples drawn per round: `k·η + 1`.
    pub fn samples_per_round(&self) -> Result<u64> {
        Ok(self.k as u64 * eta(self)? + 1)
    }
}

/// `max(1, ⌈β·(ln k + ln(1/δ)) / (γ − 1)⁴⌉)`.
pub fn eta(params: &SsacParams) -> Result<u64> {
    params.validate()?;
    let raw = params.beta * ((params.k as f64).ln() + (1.0 / params.delta).ln()) / (params.gamma - 1.0).powi(4);
    Ok((raw.ceil() as u64).max(1))
}

/// Sample count `⌈c·ln(1/δ)/ε²⌉` after which the empirical mean of i.i.d.
/// vectors bounded by `R` lies within `R·√ε` of the true mean with
/// probability at least `1 − δ`.
pub fn concentration_sample_size(c: f64, eps: f64, delta: f64) -> usize {
    (c * (1.0 / delta).ln() / (eps * eps)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterEstimate<T = f64> {
    /// Modal oracle label among the samples.
    pub label: usize,
    pub mu_prime: Point<T>,
    /// Smallest sampled index carrying `label`.
    pub witness: usize,
    /// How many of the draws returned `label`.
    pub modal_count: usize,
}

/// Draws `l` uniform samples (with replacement) from `active`, asks one
/// cluster-assignment query per draw and averages the distinct points of the
/// modal label. Ties go to the smaller label.
pub fn phase1<T, O, R>(
    instance: &Instance<T>,
    active: &[usize],
    o: &mut O,
    l: u64,
    rng: &mut R,
) -> Result<CenterEstimate<T>>
where
    T: Scalar,
    O: Oracle + ?Sized,
    R: Rng + ?Sized,
{
    if active.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let mut counts: Vec<usize> = Vec::new();
    let mut label_at: Vec<Option<usize>> = vec![None; active.len()];
    for _ in 0..l {
        let pos = rng.random_range(0..active.len());
        let label = o.cluster_assignment(active[pos])?;
        if label >= counts.len() {
            counts.resize(label + 1, 0);
        }
        counts[label] += 1;
        label_at[pos] = Some(label);
    }
    let (label, modal_count) = counts
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0), |best, (t, c)| if c > best.1 { (t, c) } else { best });

    let members: Vec<usize> = label_at
        .iter()
        .zip(active)
        .filter(|(l, _)| **l == Some(label))
        .map(|(_, &i)| i)
        .collect();
    let witness = *members.iter().min().ok_or(Error::EmptyCluster)?;
    let points: Vec<&Point<T>> = members.iter().map(|&i| instance.point(i)).collect();
    Ok(CenterEstimate { label, mu_prime: mean(&points)?, witness, modal_count })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction<T = f64> {
    /// Recovered points, nearest to the center estimate first.
    pub members: Vec<usize>,
    /// Distance of the farthest recovered point.
    pub radius: T,
}

/// Sorts `active` by distance to `mu_prime` (ties by index) and returns the
/// longest prefix whose last point shares a cluster with `witness`.
pub fn phase2<T, O>(
    instance: &Instance<T>,
    active: &[usize],
    mu_prime: &Point<T>,
    witness: usize,
    o: &mut O,
) -> Result<Extraction<T>>
where
    T: Scalar,
    O: Oracle + ?Sized,
{
    let mut order: Vec<(T, usize)> = active.iter().map(|&i| (instance.point(i).dist(mu_prime), i)).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
    let start = order
        .iter()
        .position(|&(_, i)| i == witness)
        .ok_or_else(|| Error::InvalidParameter(format!("witness {witness} is not active")))?;

    // Invariant: position `lo` is in the cluster, everything from `hi` on is not.
    let (mut lo, mut hi) = (start, order.len());
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match o.same_cluster(order[mid].1, witness)? {
            Answer::Yes => lo = mid,
            Answer::No => hi = mid,
            Answer::Abstain => return Err(Error::Abstained(order[mid].1, witness)),
        }
    }
    Ok(Extraction { members: order[..=lo].iter().map(|&(_, i)| i).collect(), radius: order[lo].0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord<T = f64> {
    /// Size of the remaining set at the start of the round.
    pub remaining: usize,
    pub sampled: u64,
    pub label: usize,
    pub mu_prime: Point<T>,
    pub witness: usize,
    pub radius: T,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SsacTrace<T = f64> {
    pub eta: u64,
    pub rounds: Vec<RoundRecord<T>>,
    /// Queries issued by this run only.
    pub queries: QueryBudgetReport,
}

/// Recovers the oracle's clustering. On success the output equals the target
/// partition with probability at least `1 − δ` when the target is a
/// centroid-based clustering satisfying the γ-margin property.
pub fn ssac_cluster<T, O>(instance: &Instance<T>, o: &mut O, params: &SsacParams) -> Result<(Clustering, SsacTrace<T>)>
where
    T: Scalar,
    O: Oracle + ?Sized,
{
    let eta = eta(params)?;
    if !instance.is_unweighted() {
        return Err(Error::InvalidParameter("query-driven recovery expects unit weights".into()));
    }
    if o.len() != instance.len() {
        return Err(Error::LabelCount { expected: instance.len(), got: o.len() });
    }
    let l = params.k as u64 * eta + 1;
    let before = o.query_counts();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let n = instance.len();
    let mut labels = vec![usize::MAX; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut rounds = Vec::with_capacity(params.k);
    for round in 0..params.k {
        if active.is_empty() {
            return Err(Error::RecoveryFailed(format!("no points left for cluster {round}")));
        }
        let est = phase1(instance, &active, o, l, &mut rng)?;
        let ext = phase2(instance, &active, &est.mu_prime, est.witness, o)?;
        for &i in &ext.members {
            labels[i] = round;
        }
        let remaining = active.len();
        active.retain(|&i| labels[i] == usize::MAX);
        rounds.push(RoundRecord {
            remaining,
            sampled: l,
            label: est.label,
            mu_prime: est.mu_prime,
            witness: est.witness,
            radius: ext.radius,
            members: ext.members,
        });
    }
    if !active.is_empty() {
        return Err(Error::RecoveryFailed(format!("{} points left unassigned", active.len())));
    }
    let after = o.query_counts();
    let queries = QueryBudgetReport::new(
        after.same_cluster_count - before.same_cluster_count,
        after.cluster_assignment_count - before.cluster_assignment_count,
        params.k,
    );
    Ok((Clustering::new(labels, params.k)?, SsacTrace { eta, rounds, queries }))
}

/// [`ssac_cluster`] under an oracle that may abstain: every completion of the
/// abstained answers is tried and the cheapest output is returned.
pub fn ssac_with_abstentions<T, O>(
    instance: &Instance<T>,
    o: &mut O,
    params: &SsacParams,
    config: AbstentionConfig,
) -> Result<SimulationOutcome<T>>
where
    T: Scalar,
    O: Oracle,
{
    solve_with_abstentions(instance, o, config, |inst, oracle| ssac_cluster(inst, oracle, params).map(|(c, _)| c))
}
