//! Semi-supervised active clustering with same-cluster queries.
//!
//! The crate covers the query-driven recovery algorithm for γ-margin
//! clusterings ([`ssac`]), the margin and clusterability checkers it relies on
//! ([`margin`]), simulated and interactive oracles ([`oracle`]), the
//! Exact Cover reduction showing k-means stays hard under a margin
//! ([`hardness`]), brute-force ground truth for tiny inputs ([`exact`]) and an
//! experiment harness ([`harness`]).
//!
//! Geometry, margins, oracles and recovery are generic over [`Scalar`]
//! (`f32` or `f64`); the reduction and the harness work in `f64`.

pub mod error;
pub mod exact;
pub mod geometry;
pub mod hardness;
pub mod harness;
pub mod margin;
pub mod oracle;
pub mod scalar;
pub mod ssac;

pub use error::{Error, Result};
pub use exact::{brute_exact_cover, brute_kmeans, min_nice_cost, BruteResult, MinNice};
pub use geometry::{centroid, cluster_cost, cost_delta_add, kmeans_cost, Clustering, Instance, Point};
pub use hardness::{
    build_reduction, canonical_nice_clustering, is_nice, make_x3c, verify_reduction, NiceClustering, Reduction,
    RowKind, VerificationReport, X3cInstance,
};
pub use harness::{generate_margin_instance, lloyd, run_bench, BenchConfig, BenchRow, GenConfig};
pub use margin::{is_pruning, max_margin, satisfies_alpha_proximity, satisfies_gamma_margin, single_linkage_tree, MarginReport};
pub use oracle::{
    make_truth_oracle, solve_with_abstentions, AbstentionConfig, AbstentionPolicy, Answer, Oracle, QueryBudgetReport,
    TruthOracle,
};
pub use scalar::Scalar;
pub use ssac::{eta, ssac_cluster, SsacParams, SsacTrace};

pub type Point32 = Point<f32>;
pub type Point64 = Point<f64>;
pub type Instance32 = Instance<f32>;
pub type Instance64 = Instance<f64>;
pub type MarginReport32 = MarginReport<f32>;
pub type MarginReport64 = MarginReport<f64>;
pub type SsacTrace32 = SsacTrace<f32>;
pub type SsacTrace64 = SsacTrace<f64>;
