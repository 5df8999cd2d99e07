//! Demo scenarios behind the browser page. Everything here is plain Rust so
//! the logic is testable on the host; the wasm bindings only serialize it.
//!
//! Each scenario runs the same experiment once per selection method from the
//! same seed, so the methods start from an identical parent and any split in
//! the curves comes from selection alone.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use cgp_core::analysis;
use cgp_core::genome::decode;
use cgp_core::problems::Problem;
use cgp_core::selection::{
    evolve_dynamic, evolve_with_trace, SelectionPolicy, TracePoint,
};
use cgp_core::Result;

/// Browser runs stay small; anything past this would stall the page.
const MAX_BITS: usize = 6;
const MAX_NODES: usize = 400;
const MAX_BUDGET: u64 = 2_000_000;

fn clamp_shape(bits: usize, nodes: usize) -> (usize, usize) {
    (bits.clamp(2, MAX_BITS), nodes.clamp(10, MAX_NODES))
}

/// The two methods every scenario contrasts.
fn methods(lambda: usize, rate: f64) -> [SelectionPolicy; 2] {
    [
        SelectionPolicy::es(lambda, rate),
        SelectionPolicy::es_pl(lambda, rate),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct StaticSeries {
    pub method: String,
    pub solved: bool,
    pub evaluations: u64,
    pub generations: u64,
    pub best_fitness: f64,
    pub functional_size: usize,
    pub active_links: usize,
    pub trace: Vec<TracePoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StaticComparison {
    pub bits: usize,
    pub nodes: usize,
    pub budget: u64,
    pub seed: u64,
    pub series: Vec<StaticSeries>,
}

/// Even parity race: plain selection against prefer-larger, shared seed.
pub fn compare_static(
    bits: usize,
    nodes: usize,
    lambda: usize,
    rate: f64,
    budget: u64,
    seed: u64,
) -> Result<StaticComparison> {
    let (bits, nodes) = clamp_shape(bits, nodes);
    let budget = budget.min(MAX_BUDGET);
    let problem = Problem::parity(bits)?;
    let spec = problem.genome_spec(nodes)?;
    let mut series = Vec::new();
    for policy in methods(lambda, rate) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = evolve_with_trace(&problem, &spec, &policy, budget, true, &mut rng)?;
        series.push(StaticSeries {
            method: policy.label(),
            solved: record.solved,
            evaluations: record.evaluations_used,
            generations: record.generations_used,
            best_fitness: record.best_fitness.value,
            functional_size: record.functional_size,
            active_links: record.active_links,
            trace: record.trace,
        });
    }
    Ok(StaticComparison {
        bits,
        nodes,
        budget,
        seed,
        series,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicSeries {
    pub method: String,
    pub changes: usize,
    pub recovered: usize,
    /// Generations back to an optimum per post-change epoch; unrecovered
    /// epochs count as a full epoch.
    pub mean_recovery: Option<f64>,
    pub recovery: Vec<Option<u64>>,
    pub trace: Vec<TracePoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicComparison {
    pub bits: usize,
    pub epochs: usize,
    pub epoch_length: u64,
    pub flips: usize,
    pub seed: u64,
    pub series: Vec<DynamicSeries>,
}

/// Moving-target race: the target flips bits every epoch and the methods
/// chase it. Recovery is time back to a perfect score.
#[allow(clippy::too_many_arguments)]
pub fn compare_dynamic(
    bits: usize,
    nodes: usize,
    lambda: usize,
    rate: f64,
    epochs: usize,
    epoch_length: u64,
    flips: usize,
    seed: u64,
) -> Result<DynamicComparison> {
    let (bits, nodes) = clamp_shape(bits, nodes);
    let epochs = epochs.clamp(1, 20);
    let epoch_length = epoch_length.clamp(1, 100_000);
    let mut problem_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let problem = Problem::random_boolean(bits, &mut problem_rng)?;
    let spec = problem.genome_spec(nodes)?;
    let mut series = Vec::new();
    for policy in methods(lambda, rate) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = evolve_dynamic(
            &problem,
            &spec,
            &policy,
            epochs,
            epoch_length,
            flips,
            true,
            &mut rng,
        )?;
        let after_change: Vec<&Option<u64>> = record.recovery_times.iter().skip(1).collect();
        let recovered = after_change.iter().filter(|r| r.is_some()).count();
        let mean_recovery = if after_change.is_empty() {
            None
        } else {
            let total: u64 = after_change
                .iter()
                .map(|r| r.unwrap_or(epoch_length))
                .sum();
            Some(total as f64 / after_change.len() as f64)
        };
        series.push(DynamicSeries {
            method: policy.label(),
            changes: after_change.len(),
            recovered,
            mean_recovery,
            recovery: record.recovery_times,
            trace: record.trace,
        });
    }
    Ok(DynamicComparison {
        bits,
        epochs,
        epoch_length,
        flips,
        seed,
        series,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustnessSeries {
    pub method: String,
    pub solved: bool,
    pub functional_size: usize,
    pub fitness_preserved_fraction: f64,
    pub functional_change_fraction: f64,
    pub preserved_given_functional_change: Option<f64>,
    pub walk_accepted: u64,
    pub walk_unique_behaviors: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustnessComparison {
    pub bits: usize,
    pub probe_samples: u64,
    pub probe_rate: f64,
    pub walk_steps: u64,
    pub seed: u64,
    pub series: Vec<RobustnessSeries>,
}

/// Evolves one solution per method, then bombards each with mutants and
/// walks its neutral network.
#[allow(clippy::too_many_arguments)]
pub fn compare_robustness(
    bits: usize,
    nodes: usize,
    lambda: usize,
    rate: f64,
    budget: u64,
    probe_samples: u64,
    walk_steps: u64,
    seed: u64,
) -> Result<RobustnessComparison> {
    let (bits, nodes) = clamp_shape(bits, nodes);
    let budget = budget.min(MAX_BUDGET);
    let probe_samples = probe_samples.clamp(1, 20_000);
    let walk_steps = walk_steps.clamp(1, 50_000);
    let problem = Problem::parity(bits)?;
    let spec = problem.genome_spec(nodes)?;
    let mut series = Vec::new();
    for policy in methods(lambda, rate) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = evolve_with_trace(&problem, &spec, &policy, budget, false, &mut rng)?;
        let chrom = &record.final_chromosome;
        let probe = analysis::robustness_probe(&problem, chrom, rate, probe_samples, &mut rng)?;
        let walk = analysis::variability_walk(&problem, chrom, walk_steps, &mut rng)?;
        let phen = decode(chrom);
        series.push(RobustnessSeries {
            method: policy.label(),
            solved: record.solved,
            functional_size: phen.functional_size,
            fitness_preserved_fraction: probe.fitness_preserved_fraction,
            functional_change_fraction: probe.functional_change_fraction,
            preserved_given_functional_change: probe.preserved_given_functional_change,
            walk_accepted: walk.accepted,
            walk_unique_behaviors: walk.unique_behaviors,
        });
    }
    Ok(RobustnessComparison {
        bits,
        probe_samples,
        probe_rate: rate,
        walk_steps,
        seed,
        series,
    })
}
