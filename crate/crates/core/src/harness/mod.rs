//! Instance generation, the Lloyd baseline, benchmark sweeps and file formats.

mod bench;
mod generator;
pub mod io;
mod lloyd;

pub use bench::{run_bench, write_bench_csv, BenchConfig, BenchRow};
pub use generator::{generate_margin_instance, GenConfig};
pub use lloyd::{lloyd, LloydResult, MAX_LLOYD_ROUNDS};
