#![allow(dead_code)]

use ssac::hardness::{make_x3c, X3cInstance};
use ssac::Instance;

pub const W: u64 = 10;

/// X3C inputs shared by the reduction suites, as `(m, sets)`.
pub fn corpus() -> Vec<X3cInstance> {
    let raw: Vec<(usize, Vec<[usize; 3]>)> = vec![
        (1, vec![[1, 2, 3]]),
        (1, vec![[1, 2, 3], [1, 2, 3]]),
        (2, vec![[1, 2, 3], [4, 5, 6], [1, 4, 5]]),
        (2, vec![[1, 2, 3], [1, 2, 4], [4, 5, 6]]),
        (2, vec![[1, 2, 3], [1, 4, 5]]),
        (2, vec![[1, 2, 3], [1, 4, 5], [2, 4, 6]]),
        (2, vec![[1, 4, 5], [2, 3, 6], [1, 2, 3], [4, 5, 6]]),
        (3, vec![[1, 2, 3], [4, 5, 6], [7, 8, 9], [1, 4, 7]]),
        (3, vec![[1, 2, 3], [3, 4, 5], [5, 6, 7], [7, 8, 9]]),
    ];
    raw.into_iter().map(|(m, sets)| make_x3c(m, sets.into_iter().map(|s| s.to_vec()).collect()).unwrap()).collect()
}

/// Weighted sum of squared distances to the weighted mean, computed from
/// scratch.
pub fn weighted_cost(inst: &Instance, members: &[usize]) -> f64 {
    let dim = inst.dim();
    let total: f64 = members.iter().map(|&i| inst.weight(i)).sum();
    let mut mu = vec![0.0; dim];
    for &i in members {
        for (m, x) in mu.iter_mut().zip(inst.point(i).coords()) {
            *m += inst.weight(i) * x / total;
        }
    }
    members
        .iter()
        .map(|&i| {
            let d: f64 = inst.point(i).coords().iter().zip(&mu).map(|(x, m)| (x - m) * (x - m)).sum();
            inst.weight(i) * d
        })
        .sum()
}

pub fn total_cost(inst: &Instance, labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut parts = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        parts[l].push(i);
    }
    parts.iter().filter(|p| !p.is_empty()).map(|p| weighted_cost(inst, p)).sum()
}

/// Exact-cover existence by scanning every subset of the sets.
pub fn has_exact_cover(x: &X3cInstance) -> bool {
    let l = x.len();
    let full: u64 = (1u64 << (3 * x.m())) - 1;
    (0u64..1 << l).any(|mask| {
        let mut covered = 0u64;
        for (i, set) in x.sets().iter().enumerate() {
            if mask >> i & 1 == 1 {
                for &e in set {
                    let bit = 1u64 << (e - 1);
                    if covered & bit != 0 {
                        return false;
                    }
                    covered |= bit;
                }
            }
        }
        covered == full
    })
}

/// `max(1, ceil(beta (ln k + ln 1/delta) / (gamma - 1)^4))`.
pub fn eta_oracle(k: usize, gamma: f64, delta: f64, beta: f64) -> u64 {
    let raw = beta * ((k as f64).ln() + (1.0 / delta).ln()) / (gamma - 1.0).powi(4);
    (raw.ceil() as u64).max(1)
}
