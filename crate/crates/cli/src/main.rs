use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use ssac::exact::{brute_exact_cover, brute_kmeans};
use ssac::hardness::{build_reduction, canonical_nice_clustering, X3cInstance};
use ssac::harness::io::{load_instance, load_json, save_instance, write_json, InstanceFile};
use ssac::harness::{generate_margin_instance, lloyd, run_bench, write_bench_csv, BenchConfig, GenConfig};
use ssac::oracle::{AssignmentFromSame, PromptOracle};
use ssac::ssac::DEFAULT_BETA;
use ssac::{max_margin, satisfies_gamma_margin, ssac_cluster, verify_reduction, Clustering, SsacParams, TruthOracle};

#[derive(Parser)]
#[command(name = "ssac", version, about = "Query-driven clustering under the γ-margin property")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an instance whose ground truth satisfies the γ-margin property.
    GenMargin {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        gamma: f64,
        /// Where to write the ground-truth clustering.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Build the k-means instance for an X3C input.
    ReduceX3c {
        #[command(flatten)]
        common: Common,
        /// X3C JSON file.
        #[arg(long)]
        x3c: PathBuf,
        #[arg(long, default_value_t = 10)]
        w: u64,
        /// Where to write the certificate sidecar.
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Recover a clustering with oracle queries answered from a ground truth.
    Ssac {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instance: PathBuf,
        /// Ground-truth clustering the simulated oracle answers from.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
    },
    /// Lloyd's algorithm from farthest-point seeding.
    Lloyd {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Optimal k-means by enumeration (at most 14 locations).
    Brute {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Report the largest γ a clustering satisfies.
    CheckMargin {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        clustering: PathBuf,
        /// Exit with status 2 unless the clustering satisfies this γ.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Build a reduction and check the identities of its canonical clustering.
    VerifyReduction {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x3c: PathBuf,
        #[arg(long, default_value_t = 10)]
        w: u64,
        /// One-based set indices of an exact cover; searched for when absent.
        #[arg(long, value_delimiter = ',')]
        cover: Option<Vec<usize>>,
    },
    /// Run a benchmark sweep from a JSON config and write CSV rows (whatever
    /// the format flag says).
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        config: PathBuf,
    },
    /// Recover a clustering while a person answers same-cluster queries.
    OracleInteractive {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
    },
}

/// A well-formed run whose outcome is negative: recovery or verification failed.
#[derive(Debug)]
struct Unmet(String);

impl std::fmt::Display for Unmet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Unmet {}

fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit<T: Serialize>(common: &Common, value: &T) -> anyhow::Result<()> {
    if common.format == Format::Csv {
        bail!("csv output is only available for clusterings and bench rows");
    }
    let mut w = sink(&common.out)?;
    write_json(value, &mut w)?;
    w.flush()?;
    Ok(())
}

fn emit_clustering(common: &Common, c: &Clustering) -> anyhow::Result<()> {
    match common.format {
        Format::Json => emit(common, c),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(&common.out)?);
            w.write_record(["index", "label"])?;
            for (i, l) in c.labels().iter().enumerate() {
                w.write_record([i.to_string(), l.to_string()])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn load_clustering(path: &Path) -> anyhow::Result<Clustering> {
    load_json(path).with_context(|| format!("reading clustering {}", path.display()))
}

fn load_x3c(path: &Path) -> anyhow::Result<X3cInstance> {
    load_json(path).with_context(|| format!("reading X3C input {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenMargin { common, n, k, dim, gamma, truth } => {
            let (inst, labels) = generate_margin_instance(&GenConfig::new(n, k, dim, gamma, common.seed))?;
            if let Some(path) = truth {
                ssac::harness::io::save_json(&labels, path)?;
            }
            match &common.out {
                Some(p) if common.format == Format::Json => save_instance(&inst, p)?,
                _ => emit(&common, &InstanceFile::from(&inst))?,
            }
        }
        Command::ReduceX3c { common, x3c, w, cert } => {
            let x = load_x3c(&x3c)?;
            let red = build_reduction(&x, w)?;
            if let Some(path) = cert {
                let cover = brute_exact_cover(&x).ok().flatten();
                let nice = cover.as_ref().map(|c| canonical_nice_clustering(&red, c)).transpose()?;
                let certificate = red.certificate(cover.as_deref().zip(nice.as_ref()));
                ssac::harness::io::save_json(&certificate, path)?;
            }
            emit(&common, &InstanceFile::from(&red.instance))?;
        }
        Command::Ssac { common, instance, truth, k, gamma, delta, beta } => {
            let inst = load_instance(&instance)?;
            let truth = load_clustering(&truth)?;
            let k = k.unwrap_or(truth.k());
            let params = SsacParams::new(k, gamma, delta).with_beta(beta).with_seed(common.seed);
            params.validate()?;
            let mut oracle = TruthOracle::new(&truth);
            let (found, trace) = ssac_cluster(&inst, &mut oracle, &params)?;
            eprintln!("{}", serde_json::to_string(&json!({ "eta": trace.eta, "queries": trace.queries }))?);
            emit_clustering(&common, &found)?;
            if !found.same_partition(&truth) {
                return Err(Unmet("recovered clustering differs from the ground truth".into()).into());
            }
        }
        Command::Lloyd { common, instance, k } => {
            let inst = load_instance(&instance)?;
            let r = lloyd(&inst, k, common.seed)?;
            eprintln!("{}", serde_json::to_string(&json!({ "cost": r.cost, "rounds": r.rounds }))?);
            emit_clustering(&common, &r.clustering)?;
        }
        Command::Brute { common, instance, k } => {
            let inst = load_instance(&instance)?;
            let r = brute_kmeans(&inst, k)?;
            eprintln!("{}", serde_json::to_string(&json!({ "cost": r.cost, "examined": r.examined }))?);
            emit_clustering(&common, &r.clustering)?;
        }
        Command::CheckMargin { common, instance, clustering, gamma } => {
            let inst = load_instance(&instance)?;
            let c = load_clustering(&clustering)?;
            let report = max_margin(&inst, &c)?;
            let satisfied = gamma.map(|g| satisfies_gamma_margin(&inst, &c, g)).transpose()?;
            // JSON has no infinity; an unconstrained margin is written as null.
            let star = report.gamma_star.is_finite().then_some(report.gamma_star);
            emit(&common, &json!({ "gamma_star": star, "witness": report.witness, "satisfied": satisfied }))?;
            if satisfied == Some(false) {
                return Err(Unmet(format!("clustering does not satisfy gamma = {}", gamma.unwrap_or_default())).into());
            }
        }
        Command::VerifyReduction { common, x3c, w, cover } => {
            let x = load_x3c(&x3c)?;
            let red = build_reduction(&x, w)?;
            let rows: Vec<usize> = match cover {
                Some(c) => {
                    if c.contains(&0) {
                        bail!("cover indices are one-based");
                    }
                    c.into_iter().map(|r| r - 1).collect()
                }
                None => brute_exact_cover(&x)?.ok_or_else(|| Unmet("the X3C instance has no exact cover".into()))?,
            };
            let nice = canonical_nice_clustering(&red, &rows)?;
            let report = verify_reduction(&red, &nice)?;
            emit(&common, &report)?;
            if !report.passed() {
                let names: Vec<&str> = report.failures().map(|f| f.name.as_str()).collect();
                return Err(Unmet(format!("failed checks: {}", names.join(", "))).into());
            }
        }
        Command::Bench { common, config } => {
            let cfg: BenchConfig =
                load_json(&config).with_context(|| format!("reading bench config {}", config.display()))?;
            let rows = run_bench(&cfg);
            write_bench_csv(&rows, sink(&common.out)?)?;
        }
        Command::OracleInteractive { common, instance, k, gamma, delta, beta } => {
            let inst = load_instance(&instance)?;
            let params = SsacParams::new(k, gamma, delta).with_beta(beta).with_seed(common.seed);
            params.validate()?;
            let prompt = PromptOracle::new(io::stdin().lock(), io::stderr(), inst.len(), k);
            let mut oracle = AssignmentFromSame::new(prompt);
            let (found, trace) = ssac_cluster(&inst, &mut oracle, &params)?;
            eprintln!("{}", serde_json::to_string(&json!({ "eta": trace.eta, "queries": trace.queries }))?);
            emit_clustering(&common, &found)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let unmet = e.downcast_ref::<Unmet>().is_some()
                || matches!(
                    e.downcast_ref::<ssac::Error>(),
                    Some(ssac::Error::RecoveryFailed(_) | ssac::Error::NotRealizable { .. })
                );
            ExitCode::from(if unmet { 2 } else { 1 })
        }
    }
}
