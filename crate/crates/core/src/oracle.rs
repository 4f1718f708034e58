//! Query oracles with exact accounting.
//!
//! Oracles answer by point index. Every answered query is counted, repeats
//! included; memoization is opt-in through [`MemoOracle`].

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{kmeans_cost, Clustering, Instance};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
    Abstain,
}

impl Answer {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    /// `Some(bool)` unless the oracle abstained.
    pub fn known(self) -> Option<bool> {
        match self {
            Answer::Yes => Some(true),
            Answer::No => Some(false),
            Answer::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct QueryBudgetReport {
    pub same_cluster_count: u64,
    pub cluster_assignment_count: u64,
    /// Cost of the run if every assignment query were replaced by `k`
    /// same-cluster queries.
    pub same_cluster_equivalent: u64,
}

impl QueryBudgetReport {
    pub fn new(same: u64, assignment: u64, k: usize) -> Self {
        Self {
            same_cluster_count: same,
            cluster_assignment_count: assignment,
            same_cluster_equivalent: same + k as u64 * assignment,
        }
    }
}

pub trait Oracle {
    /// Number of points the oracle knows about.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn same_cluster(&mut self, i: usize, j: usize) -> Result<Answer>;

    fn cluster_assignment(&mut self, _i: usize) -> Result<usize> {
        Err(Error::InvalidParameter("oracle does not answer cluster-assignment queries".into()))
    }

    fn query_counts(&self) -> QueryBudgetReport;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn len(&self) -> usize {
        (**self).len()
    }

    fn same_cluster(&mut self, i: usize, j: usize) -> Result<Answer> {
        (**self).same_cluster(i, j)
    }

    fn cluster_assignment(&mut self, i: usize) -> Result<usize> {
        (**self).cluster_assignment(i)
    }

    fn query_counts(&self) -> QueryBudgetReport {
        (**self).query_counts()
    }
}

/// When the truth oracle refuses to answer a same-cluster query.
#[derive(Debug, Clone, Default)]
pub enum AbstentionPolicy {
    #[default]
    Never,
    /// Abstain on exactly these unordered pairs.
    Pairs(HashSet<(usize, usize)>),
    /// Abstain on each unordered pair independently with probability `rate`.
    /// The decision is a hash of `(seed, pair)`, so repeats agree.
    Rate { rate: f64, seed: u64 },
}

impl AbstentionPolicy {
    pub fn pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        AbstentionPolicy::Pairs(pairs.into_iter().map(|(a, b)| ordered(a, b)).collect())
    }

    fn abstains(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        match self {
            AbstentionPolicy::Never => false,
            AbstentionPolicy::Pairs(set) => set.contains(&ordered(i, j)),
            AbstentionPolicy::Rate { rate, seed } => {
                let (a, b) = ordered(i, j);
                let h = splitmix64(splitmix64(seed ^ a as u64) ^ b as u64);
                ((h >> 11) as f64 / (1u64 << 53) as f64) < *rate
            }
        }
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Oracle answering from a hidden target clustering.
#[derive(Debug, Clone)]
pub struct TruthOracle {
    labels: Vec<usize>,
    k: usize,
    policy: AbstentionPolicy,
    same: u64,
    assignment: u64,
}

pub fn make_truth_oracle(clustering: &Clustering) -> TruthOracle {
    TruthOracle::new(clustering)
}

impl TruthOracle {
    pub fn new(clustering: &Clustering) -> Self {
        Self {
            labels: clustering.labels().to_vec(),
            k: clustering.k(),
            policy: AbstentionPolicy::Never,
            same: 0,
            assignment: 0,
        }
    }

    pub fn with_policy(mut self, policy: AbstentionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.labels.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, len: self.labels.len() })
        }
    }
}

impl Oracle for TruthOracle {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn same_cluster(&mut self, i: usize, j: usize) -> Result<Answer> {
        self.check(i)?;
        self.check(j)?;
        self.same += 1;
        if self.policy.abstains(i, j) {
            return Ok(Answer::Abstain);
        }
        Ok(Answer::from_bool(self.labels[i] == self.labels[j]))
    }

    fn cluster_assignment(&mut self, i: usize) -> Result<usize> {
        self.check(i)?;
        self.assignment += 1;
        Ok(self.labels[i])
    }

    fn query_counts(&self) -> QueryBudgetReport {
        QueryBudgetReport::new(self.same, self.assignment, self.k)
    }
}

/// A same-cluster answer from two cluster-assignment queries.
pub fn same_from_assignment<O: Oracle + ?Sized>(o: &mut O, i: usize, j: usize) -> Result<bool> {
    let a = o.cluster_assignment(i)?;
    let b = o.cluster_assignment(j)?;
    Ok(a == b)
}

/// Cluster-assignment answers simulated with same-cluster queries against one
/// representative per discovered cluster. Indices are assigned in discovery
/// order, so they are a relabeling of the truth.
#[derive(Debug, Clone, Default)]
pub struct AssignmentAdapter {
    representatives: Vec<usize>,
}

impl AssignmentAdapter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }

    pub fn assign<O: Oracle + ?Sized>(&mut self, o: &mut O, i: usize) -> Result<usize> {
        if i >= o.len() {
            return Err(Error::IndexOutOfRange { index: i, len: o.len() });
        }
        for (index, &rep) in self.representatives.iter().enumerate() {
            match o.same_cluster(i, rep)? {
                Answer::Yes => return Ok(index),
                Answer::No => {}
                Answer::Abstain => return Err(Error::Abstained(i, rep)),
            }
        }
        self.representatives.push(i);
        Ok(self.representatives.len() - 1)
    }
}

pub fn assignment_from_same<O: Oracle + ?Sized>(
    adapter: &mut AssignmentAdapter,
    o: &mut O,
    i: usize,
) -> Result<usize> {
    adapter.assign(o, i)
}

/// Serves same-cluster queries through `2` assignment queries each.
#[derive(Debug)]
pub struct SameFromAssignment<O> {
    inner: O,
}

impl<O: Oracle> SameFromAssignment<O> {
    pub fn new(inner: O) -> Self {
        Self { inner }
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Oracle> Oracle for SameFromAssignment<O> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn same_cluster(&mut self, i: usize, j: usize) -> Result<Answer> {
        same_from_assignment(&mut self.inner, i, j).map(Answer::from_bool)
    }

    fn cluster_assignment(&mut self, i: usize) -> Result<usize> {
        self.inner.cluster_assignment(i)
    }

    fn query_counts(&self) -> QueryBudgetReport {
        self.inner.query_counts()
    }
}

/// Serves cluster-assignment queries through an [`AssignmentAdapter`].
#[derive(Debug)]
pub struct AssignmentFromSame<O> {
    inner: O,
    adapter: AssignmentAdapter,
}

impl<O: Oracle> AssignmentFromSame<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, adapter: AssignmentAdapter::new() }
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Oracle> Oracle for AssignmentFromSame<O> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn same_cluster(&mut self, i: usize, j: usize) -> Result<Answer> {
        self.inner.same_cluster(i, j)
    }

    fn cluster_assignment(&mut self, i: usize) -> Result<usize> {
        self.adapter.assign(&mut self.inner, i)
    }

    fn query_counts(&self) -> QueryBudgetReport {
        self.inner.query_counts()
    }
}

/// Remembers same-cluster answers so each unordered pair reaches the inner
/// oracle once.
#[derive(Debug)]
pub struct MemoOracle<O> {
    inner: O,
    cache: HashMap<(usize, usize), Answer>,
}

impl<O: Oracle> MemoOracle<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, cache: HashMap::new() }
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Oracle> Oracle for MemoOracle<O> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn same_cluster(&mut self, i: usize, j: usize) -> Result<Answer> {
        if i == j {
            return Ok(Answer::Yes);
        }
        if let Some(&a) = self.cache.get(&ordered(i, j)) {
            return Ok(a);
        }
        let a = self.inner.same_cluster(i, j)?;
        self.cache.insert(ordered(i, j), a);
        Ok(a)
    }

    fn cluster_assignment(&mut self, i: usize) -> Result<usize> {
        self.inner.cluster_assignment(i)
    }

    fn query_counts(&self) -> QueryBudgetReport {
        self.inner.query_counts()
    }
}

/// Same-cluster oracle backed by a person at a terminal answering `y`/`n`.
pub struct PromptOracle<R, W> {
    input: R,
    output: W,
    n: usize,
    k: usize,
    same: u64,
}

impl<R: BufRead, W: Write> PromptOracle<R, W> {
    pub fn new(input: R, output: W, n: usize, k: usize) -> Self {
        Self { input, output, n, k, same: 0 }
    }
}

impl<R: BufRead, W: Write> Oracle for PromptOracle<R, W> {
    fn len(&self) -> usize {
        self.n
    }

    fn same_cluster(&mut self, i: usize, j: usize) -> Result<Answer> {
        for idx in [i, j] {
            if idx >= self.n {
                return Err(Error::IndexOutOfRange { index: idx, len: self.n });
            }
        }
        loop {
            write!(self.output, "same cluster? {i} {j} [y/n/?] ")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Err(Error::InvalidParameter("input closed before answer".into()));
            }
            let answer = match line.trim().to_ascii_lowercase().as_str() {
                "y" | "yes" => Answer::Yes,
                "n" | "no" => Answer::No,
                "?" | "skip" => Answer::Abstain,
                _ => continue,
            };
            self.same += 1;
            return Ok(answer);
        }
    }

    fn query_counts(&self) -> QueryBudgetReport {
        QueryBudgetReport::new(self.same, 0, self.k)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AbstentionConfig {
    /// Largest number of distinct abstained pairs one run may meet.
    pub max_abstentions: usize,
}

impl Default for AbstentionConfig {
    fn default() -> Self {
        Self { max_abstentions: 16 }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome<T = f64> {
    pub clustering: Clustering,
    pub cost: T,
    /// Runs that finished, one per explored completion.
    pub runs: usize,
    /// Abstained pairs met by the winning run, with the answers it assumed.
    pub assumed: Vec<((usize, usize), bool)>,
}

/// Replays abstained answers from a script; a pair beyond the script aborts the
/// run and asks the driver to branch.
struct Completion<'a, O> {
    inner: &'a mut O,
    script: &'a [bool],
    order: Vec<(usize, usize)>,
    branch: bool,
}

impl<O: Oracle> Oracle for Completion<'_, O> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn same_cluster(&mut self, i: usize, j: usize) -> Result<Answer> {
        let a = self.inner.same_cluster(i, j)?;
        if a != Answer::Abstain {
            return Ok(a);
        }
        let pair = ordered(i, j);
        let slot = match self.order.iter().position(|&p| p == pair) {
            Some(s) => s,
            None => {
                self.order.push(pair);
                self.order.len() - 1
            }
        };
        match self.script.get(slot) {
            Some(&b) => Ok(Answer::from_bool(b)),
            None => {
                self.branch = true;
                Err(Error::Abstained(i, j))
            }
        }
    }

    fn cluster_assignment(&mut self, i: usize) -> Result<usize> {
        self.inner.cluster_assignment(i)
    }

    fn query_counts(&self) -> QueryBudgetReport {
        self.inner.query_counts()
    }
}

/// Runs `solver` once for every completion of the abstained same-cluster
/// answers and keeps the output of least k-means cost.
///
/// Completions are explored depth-first; a run that meets a new abstained pair
/// is restarted once per possible answer, so a run meeting `a` pairs accounts
/// for `2^a` leaves. The solver must be deterministic given the oracle answers.
pub fn solve_with_abstentions<T, O, F>(
    instance: &Instance<T>,
    oracle: &mut O,
    config: AbstentionConfig,
    mut solver: F,
) -> Result<SimulationOutcome<T>>
where
    T: Scalar,
    O: Oracle,
    F: FnMut(&Instance<T>, &mut dyn Oracle) -> Result<Clustering>,
{
    let mut best: Option<SimulationOutcome<T>> = None;
    let mut last_err = None;
    let mut runs = 0;
    let mut stack: Vec<Vec<bool>> = vec![Vec::new()];
    while let Some(script) = stack.pop() {
        let mut completion =
            Completion { inner: &mut *oracle, script: &script, order: Vec::new(), branch: false };
        let result = solver(instance, &mut completion);
        let (branch, order) = (completion.branch, completion.order);
        if branch {
            if script.len() >= config.max_abstentions {
                return Err(Error::AbstentionBudgetExceeded { limit: config.max_abstentions });
            }
            for b in [true, false] {
                let mut next = script.clone();
                next.push(b);
                stack.push(next);
            }
            continue;
        }
        runs += 1;
        match result {
            Ok(clustering) => {
                let cost = kmeans_cost(instance, &clustering)?;
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    let assumed = order.into_iter().zip(script.iter().copied()).collect();
                    best = Some(SimulationOutcome { clustering, cost, runs: 0, assumed });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(mut b) => {
            b.runs = runs;
            Ok(b)
        }
        None => Err(last_err.unwrap_or_else(|| Error::RecoveryFailed("no completion produced a clustering".into()))),
    }
}
