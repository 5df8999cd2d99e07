//! Genotype analysis instruments: mutational robustness probes, an
//! exhaustive single-gene baseline, a fitness-preserving random walk, and
//! size accounting.
//!
//! Functional change means the active subgraph differs: the set of active
//! nodes, any gene of an active node, or any output gene. Behavioral change
//! means the program's output table over the problem's pattern source
//! differs. A mutation can change structure without changing behavior, but
//! never the reverse.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Fingerprint;
use crate::genome::{self, Chromosome, Phenotype};
use crate::problems::{Fitness, Problem};

/// Sampled robustness of a chromosome under its evolutionary mutation
/// operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub samples: u64,
    /// Mutants whose fitness exactly matched the original.
    pub fitness_preserved: u64,
    pub fitness_preserved_fraction: f64,
    /// Mutants whose active subgraph differed from the original.
    pub functional_changes: u64,
    pub functional_change_fraction: f64,
    /// Fitness preservation restricted to mutants with a functional change;
    /// `None` when no sample changed structure.
    pub preserved_given_functional_change: Option<f64>,
    /// Mutants whose output table differed from the original.
    pub behavioral_changes: u64,
    pub behavioral_change_fraction: f64,
    /// Fitness preservation restricted to mutants with a behavioral change;
    /// `None` when no sample changed behavior.
    pub preserved_given_behavioral_change: Option<f64>,
}

/// True when both chromosomes compute through the same active subgraph: same
/// active nodes, same genes on them, same output wiring.
pub fn same_functional_structure(
    a: &Chromosome,
    phen_a: &Phenotype,
    b: &Chromosome,
    phen_b: &Phenotype,
) -> bool {
    if phen_a.active_node_indices != phen_b.active_node_indices {
        return false;
    }
    let spec = a.spec();
    for o in 0..spec.num_outputs {
        if a.output_address(o) != b.output_address(o) {
            return false;
        }
    }
    for &node in &phen_a.active_node_indices {
        if a.function_of(node) != b.function_of(node)
            || a.input_of(node, 0) != b.input_of(node, 0)
            || a.input_of(node, 1) != b.input_of(node, 1)
        {
            return false;
        }
    }
    true
}

/// Draws `samples` mutants of `chrom` at the given mutation rate and reports
/// how often fitness, structure, and behavior survive.
pub fn robustness_probe(
    problem: &Problem,
    chrom: &Chromosome,
    rate: f64,
    samples: u64,
    rng: &mut impl Rng,
) -> Result<RobustnessReport> {
    if samples == 0 {
        return Err(Error::Input("robustness probe needs at least one sample".into()));
    }
    let phen = genome::decode(chrom);
    let fitness = problem.fitness_of(chrom, &phen);
    let fingerprint = problem.evaluate_table(chrom, &phen).fingerprint();

    let mut preserved = 0u64;
    let mut functional = 0u64;
    let mut preserved_and_functional = 0u64;
    let mut behavioral = 0u64;
    let mut preserved_and_behavioral = 0u64;
    for _ in 0..samples {
        let mutant = genome::mutate(chrom, rate, rng)?;
        let mutant_phen = genome::decode(&mutant);
        let keeps_fitness = problem.fitness_of(&mutant, &mutant_phen).value == fitness.value;
        let changed_structure = !same_functional_structure(chrom, &phen, &mutant, &mutant_phen);
        let changed_behavior = if changed_structure {
            problem.evaluate_table(&mutant, &mutant_phen).fingerprint() != fingerprint
        } else {
            false
        };
        if keeps_fitness {
            preserved += 1;
        }
        if changed_structure {
            functional += 1;
            if keeps_fitness {
                preserved_and_functional += 1;
            }
        }
        if changed_behavior {
            behavioral += 1;
            if keeps_fitness {
                preserved_and_behavioral += 1;
            }
        }
    }

    let frac = |num: u64, den: u64| num as f64 / den as f64;
    Ok(RobustnessReport {
        samples,
        fitness_preserved: preserved,
        fitness_preserved_fraction: frac(preserved, samples),
        functional_changes: functional,
        functional_change_fraction: frac(functional, samples),
        preserved_given_functional_change: (functional > 0)
            .then(|| frac(preserved_and_functional, functional)),
        behavioral_changes: behavioral,
        behavioral_change_fraction: frac(behavioral, samples),
        preserved_given_behavioral_change: (behavioral > 0)
            .then(|| frac(preserved_and_behavioral, behavioral)),
    })
}

/// Exact probability that one uniformly drawn single-gene substitution
/// (position uniform, replacement value uniform over the full legal range,
/// so redrawing the current value counts) preserves fitness. The analytic
/// baseline for a probe whose rate redraws exactly one gene.
pub fn exhaustive_single_gene_preservation(problem: &Problem, chrom: &Chromosome) -> f64 {
    let spec = chrom.spec();
    let phen = genome::decode(chrom);
    let fitness = problem.fitness_of(chrom, &phen);
    let total = spec.total_genes();
    let mut sum = 0.0;
    for pos in 0..total {
        let bound = spec.gene_bound(pos);
        let current = chrom.genes()[pos];
        let mut preserving = 0u32;
        for value in 0..bound {
            if value == current {
                preserving += 1;
                continue;
            }
            let mutant = chrom.with_gene(pos, value);
            let mutant_phen = genome::decode(&mutant);
            if problem.fitness_of(&mutant, &mutant_phen).value == fitness.value {
                preserving += 1;
            }
        }
        sum += preserving as f64 / bound as f64;
    }
    sum / total as f64
}

/// Outcome of a fitness-preserving random walk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkReport {
    pub steps: u64,
    /// Steps whose mutant kept the original fitness and was adopted.
    pub accepted: u64,
    /// Output tables encountered that had not been seen before, counted
    /// whether or not the step was accepted. The starting behavior is not
    /// counted.
    pub unique_behaviors: u64,
    pub final_chromosome: Chromosome,
}

struct WalkState {
    current: Chromosome,
    phen: Phenotype,
    base_fitness: Fitness,
    seen: HashSet<Fingerprint>,
    accepted: u64,
    unique: u64,
}

impl WalkState {
    fn new(problem: &Problem, start: Chromosome) -> Self {
        let phen = genome::decode(&start);
        let base_fitness = problem.fitness_of(&start, &phen);
        let mut seen = HashSet::new();
        seen.insert(problem.evaluate_table(&start, &phen).fingerprint());
        WalkState {
            current: start,
            phen,
            base_fitness,
            seen,
            accepted: 0,
            unique: 0,
        }
    }

    /// Proposes replacing one gene; counts novelty, adopts iff fitness is
    /// exactly preserved.
    fn step(&mut self, problem: &Problem, pos: usize, value: u32) {
        let candidate = self.current.with_gene(pos, value);
        let cand_phen = genome::decode(&candidate);
        let cand_fitness = problem.fitness_of(&candidate, &cand_phen);
        if self.seen.insert(
            problem
                .evaluate_table(&candidate, &cand_phen)
                .fingerprint(),
        ) {
            self.unique += 1;
        }
        if cand_fitness.value == self.base_fitness.value {
            self.current = candidate;
            self.phen = cand_phen;
            self.accepted += 1;
        }
        let now = problem.fitness_of(&self.current, &self.phen);
        assert!(
            now.value == self.base_fitness.value,
            "walk left its fitness level: {} != {}",
            now.value,
            self.base_fitness.value
        );
    }
}

/// Random walk over single-gene substitutions that keeps fitness constant,
/// counting how many distinct behaviors the neighborhood exposes.
pub fn variability_walk(
    problem: &Problem,
    start: &Chromosome,
    steps: u64,
    rng: &mut impl Rng,
) -> Result<WalkReport> {
    if steps == 0 {
        return Err(Error::Input("walk needs at least one step".into()));
    }
    let spec = *start.spec();
    let mut state = WalkState::new(problem, start.clone());
    for _ in 0..steps {
        let pos = rng.gen_range(0..spec.total_genes());
        let value = rng.gen_range(0..spec.gene_bound(pos));
        state.step(problem, pos, value);
    }
    Ok(WalkReport {
        steps,
        accepted: state.accepted,
        unique_behaviors: state.unique,
        final_chromosome: state.current,
    })
}

/// Size accounting of one chromosome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeReport {
    pub total_nodes: usize,
    pub total_genes: usize,
    pub functional_size: usize,
    pub active_links: usize,
}

pub fn size_report(chrom: &Chromosome) -> SizeReport {
    let phen = genome::decode(chrom);
    SizeReport {
        total_nodes: chrom.spec().num_nodes,
        total_genes: chrom.spec().total_genes(),
        functional_size: phen.functional_size,
        active_links: phen.active_links,
    }
}
