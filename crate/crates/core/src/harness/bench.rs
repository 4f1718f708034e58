use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::generator::{generate_margin_instance, GenConfig};
use crate::oracle::{splitmix64, Oracle, TruthOracle};
use crate::ssac::{ssac_cluster, SsacParams, DEFAULT_BETA};

/// One JSON sweep description; cells are the cartesian product of the lists
/// times `trials`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    #[serde(default)]
    pub base_seed: u64,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Record wall-clock time per cell. Off by default so that output depends
    /// on the configuration alone.
    #[serde(default)]
    pub timing: bool,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_trials() -> usize {
    1
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub cell: usize,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub gamma: f64,
    pub delta: f64,
    pub beta: f64,
    pub same_cluster_count: u64,
    pub cluster_assignment_count: u64,
    pub same_cluster_equivalent: u64,
    pub recovered: bool,
    pub elapsed_ms: u64,
}

const HEADER: [&str; 12] = [
    "cell",
    "seed",
    "n",
    "k",
    "gamma",
    "delta",
    "beta",
    "same_cluster_count",
    "cluster_assignment_count",
    "same_cluster_equivalent",
    "recovered",
    "elapsed_ms",
];

fn cell_seed(base: u64, cell: usize) -> u64 {
    splitmix64(splitmix64(base) ^ cell as u64)
}

fn run_cell(cfg: &BenchConfig, cell: usize, n: usize, k: usize, gamma: f64, delta: f64) -> BenchRow {
    let seed = cell_seed(cfg.base_seed, cell);
    let start = Instant::now();
    let mut row = BenchRow {
        cell,
        seed,
        n,
        k,
        gamma,
        delta,
        beta: cfg.beta,
        same_cluster_count: 0,
        cluster_assignment_count: 0,
        same_cluster_equivalent: 0,
        recovered: false,
        elapsed_ms: 0,
    };
    let gen = GenConfig::new(n, k, cfg.dim, gamma, seed);
    if let Ok((instance, truth)) = generate_margin_instance(&gen) {
        let mut oracle = TruthOracle::new(&truth);
        let params = SsacParams::new(k, gamma, delta).with_beta(cfg.beta).with_seed(splitmix64(seed));
        let outcome = ssac_cluster(&instance, &mut oracle, &params);
        let counts = oracle.query_counts();
        row.same_cluster_count = counts.same_cluster_count;
        row.cluster_assignment_count = counts.cluster_assignment_count;
        row.same_cluster_equivalent = counts.same_cluster_equivalent;
        row.recovered = matches!(outcome, Ok((found, _)) if found.same_partition(&truth));
    }
    if cfg.timing {
        row.elapsed_ms = start.elapsed().as_millis() as u64;
    }
    row
}

/// Runs every cell in parallel and returns rows ordered by cell id. Failures
/// inside a cell are reported as `recovered = false`.
pub fn run_bench(cfg: &BenchConfig) -> Vec<BenchRow> {
    let mut cells = Vec::new();
    for &n in &cfg.n {
        for &k in &cfg.k {
            for &gamma in &cfg.gamma {
                for &delta in &cfg.delta {
                    for _ in 0..cfg.trials {
                        cells.push((cells.len(), n, k, gamma, delta));
                    }
                }
            }
        }
    }
    let mut rows: Vec<BenchRow> =
        cells.into_par_iter().map(|(cell, n, k, gamma, delta)| run_cell(cfg, cell, n, k, gamma, delta)).collect();
    rows.sort_by_key(|r| r.cell);
    rows
}

/// CSV with a header line, also when there are no rows.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
