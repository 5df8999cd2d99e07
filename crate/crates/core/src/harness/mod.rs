//! Replication harness: deterministic seeding, batch execution, aggregation,
//! parameter sweeps, and result export.
//!
//! Every replication gets its own counter-derived seed, so a batch is
//! reproducible run by run regardless of worker count or execution order.

pub mod config;
pub mod export;
pub mod stats;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, ProblemConfig};
pub use stats::{mann_whitney_u, MannWhitneyResult, PMethod, StatSummary};

use crate::error::{Error, Result};
use crate::selection::{self, RunRecord};

/// Seed of replication `index` under `base_seed`: a splitmix64-style
/// finalizer over the pair, so neighboring indices land far apart.
pub fn replication_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one replication from its derived seed. The rng first draws the
/// problem instance (where the problem is random), then drives evolution.
pub fn run_replication(config: &ExperimentConfig, index: usize) -> Result<RunRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(config.base_seed, index as u64));
    let problem = config.build_problem(&mut rng)?;
    let spec = problem.genome_spec(config.num_nodes)?;
    match config.problem {
        ProblemConfig::Dynamic {
            epochs,
            epoch_length,
            flips,
            ..
        } => selection::evolve_dynamic(
            &problem,
            &spec,
            &config.policy,
            epochs,
            epoch_length,
            flips,
            config.record_traces,
            &mut rng,
        ),
        _ => selection::evolve_with_trace(
            &problem,
            &spec,
            &config.policy,
            config.budget,
            config.record_traces,
            &mut rng,
        ),
    }
}

/// Aggregates of one batch. Budget-limited statistics (evaluations,
/// generations, sizes) summarize the solved replications only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub method: String,
    pub replications: usize,
    pub solved: usize,
    pub success_fraction: f64,
    pub evaluations_solved: Option<StatSummary>,
    pub generations_solved: Option<StatSummary>,
    pub final_fitness: StatSummary,
    pub functional_size_solved: Option<StatSummary>,
    pub active_links_solved: Option<StatSummary>,
    pub recovery: Option<RecoveryStats>,
}

/// Recovery behavior of a dynamic batch, split into the initial discovery
/// (epoch 0) and the epochs that follow a target change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryStats {
    pub epochs_per_run: usize,
    /// Generations to the first optimum, over runs that found one.
    pub initial_discovery: Option<StatSummary>,
    /// Post-change epochs observed across all replications.
    pub changes_observed: usize,
    pub changes_recovered: usize,
    pub recovered_fraction: f64,
    /// Generations to recover, over recovered post-change epochs.
    pub recovery_generations: Option<StatSummary>,
}

/// One experiment: the echoed configuration, per-replication seeds and
/// records, and the aggregate view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub records: Vec<RunRecord>,
    pub aggregate: AggregateStats,
}

fn aggregate(config: &ExperimentConfig, records: &[RunRecord]) -> AggregateStats {
    let solved: Vec<&RunRecord> = records.iter().filter(|r| r.solved).collect();
    let of_solved = |f: &dyn Fn(&RunRecord) -> f64| {
        StatSummary::from_values(&solved.iter().map(|r| f(r)).collect::<Vec<f64>>())
    };
    let recovery = records.iter().any(|r| !r.recovery_times.is_empty()).then(|| {
        let epochs_per_run = records
            .iter()
            .map(|r| r.recovery_times.len())
            .max()
            .unwrap_or(0);
        let initial: Vec<f64> = records
            .iter()
            .filter_map(|r| r.recovery_times.first().copied().flatten())
            .map(|g| g as f64)
            .collect();
        let after_change: Vec<Option<u64>> = records
            .iter()
            .flat_map(|r| r.recovery_times.iter().skip(1).copied())
            .collect();
        let recovered: Vec<f64> = after_change
            .iter()
            .filter_map(|r| r.map(|g| g as f64))
            .collect();
        RecoveryStats {
            epochs_per_run,
            initial_discovery: StatSummary::from_values(&initial),
            changes_observed: after_change.len(),
            changes_recovered: recovered.len(),
            recovered_fraction: if after_change.is_empty() {
                0.0
            } else {
                recovered.len() as f64 / after_change.len() as f64
            },
            recovery_generations: StatSummary::from_values(&recovered),
        }
    });
    AggregateStats {
        method: config.policy.label(),
        replications: records.len(),
        solved: solved.len(),
        success_fraction: solved.len() as f64 / records.len() as f64,
        evaluations_solved: of_solved(&|r| r.evaluations_used as f64),
        generations_solved: of_solved(&|r| r.generations_used as f64),
        final_fitness: StatSummary::from_values(
            &records.iter().map(|r| r.best_fitness.value).collect::<Vec<f64>>(),
        )
        .expect("at least one replication"),
        functional_size_solved: of_solved(&|r| r.functional_size as f64),
        active_links_solved: of_solved(&|r| r.active_links as f64),
        recovery,
    }
}

#[cfg(feature = "parallel")]
fn run_all(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    use rayon::prelude::*;
    if config.workers == 1 {
        return (0..config.replications)
            .map(|i| run_replication(config, i))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|i| run_replication(config, i))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn run_all(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    (0..config.replications)
        .map(|i| run_replication(config, i))
        .collect()
}

/// Runs every replication of the experiment and aggregates the results.
/// Records always come back in replication order, so output is independent
/// of scheduling.
pub fn run_replications(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let records = run_all(config)?;
    let seeds = (0..config.replications)
        .map(|i| replication_seed(config.base_seed, i as u64))
        .collect();
    let aggregate = aggregate(config, &records);
    Ok(ExperimentSummary {
        config: config.clone(),
        seeds,
        records,
        aggregate,
    })
}

/// One cell of a mutation-rate by brood-size sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub mutation_rate: f64,
    pub lambda: usize,
    pub replications: usize,
    pub success_fraction: f64,
    pub median_evaluations_solved: Option<f64>,
    pub mean_final_fitness: f64,
    pub median_functional_size_solved: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "mut_rate,lambda,replications,success_fraction,median_evaluations_solved,\
             mean_final_fitness,median_functional_size_solved\n",
        );
        for c in &self.cells {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.mutation_rate,
                c.lambda,
                c.replications,
                c.success_fraction,
                opt(c.median_evaluations_solved),
                c.mean_final_fitness,
                opt(c.median_functional_size_solved),
            ));
        }
        out
    }
}

/// Runs the experiment once per (rate, lambda) pair, rates outermost. Every
/// cell reuses the same base seed, so cells are paired by replication index.
pub fn sweep_grid(
    base: &ExperimentConfig,
    rates: &[f64],
    lambdas: &[usize],
) -> Result<SweepReport> {
    if rates.is_empty() || lambdas.is_empty() {
        return Err(Error::Config("sweep needs at least one rate and one lambda".into()));
    }
    let mut cells = Vec::with_capacity(rates.len() * lambdas.len());
    for &rate in rates {
        for &lambda in lambdas {
            let mut config = base.clone();
            config.policy.initial_mutation_rate = rate;
            config.policy.lambda = lambda;
            let summary = run_replications(&config)?;
            let agg = &summary.aggregate;
            cells.push(SweepCell {
                mutation_rate: rate,
                lambda,
                replications: agg.replications,
                success_fraction: agg.success_fraction,
                median_evaluations_solved: agg.evaluations_solved.map(|s| s.median),
                mean_final_fitness: agg.final_fitness.mean,
                median_functional_size_solved: agg.functional_size_solved.map(|s| s.median),
            });
        }
    }
    Ok(SweepReport { cells })
}
