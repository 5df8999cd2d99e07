//! Survivor selection for the (1 + lambda) evolution strategy, including the
//! variants that prefer larger solutions, and the evolution loops built on
//! them.
//!
//! Three policies share one total order over candidates:
//!
//! * plain: fitness, offspring before parent on ties;
//! * prefer-larger: fitness, then more active nodes, then offspring first;
//! * quasi-stable prefer-larger: candidates within a fitness band of the
//!   generation's best come first, ordered by size, then fitness, then
//!   origin.
//!
//! The optional adaptive mutation rate follows a one-fifth style rule:
//! multiply by 1.4 after a successful generation, by `1.4^(-1/4)` after a
//! failed one, clamped to fixed bounds.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{self, Chromosome, GenomeSpec, Phenotype};
use crate::problems::{Fitness, Problem};

/// Lower and upper clamp for the adaptive mutation rate.
pub const DEFAULT_RATE_BOUNDS: (f64, f64) = (0.0005, 0.25);

/// Growth factor of the adaptive rate after a successful generation; failure
/// divides by its fourth root.
pub const RATE_FACTOR: f64 = 1.4;

/// Survivor policy and mutation parameters of a (1 + lambda) run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub lambda: usize,
    /// Break fitness ties toward more active nodes.
    pub prefer_larger: bool,
    /// Relative fitness band for quasi-stable selection; implies
    /// `prefer_larger`.
    pub quasi_band: Option<f64>,
    /// Adapt the mutation rate each generation.
    pub adaptive_mutation: bool,
    pub initial_mutation_rate: f64,
    pub rate_bounds: (f64, f64),
}

impl SelectionPolicy {
    pub fn es(lambda: usize, mutation_rate: f64) -> Self {
        SelectionPolicy {
            lambda,
            prefer_larger: false,
            quasi_band: None,
            adaptive_mutation: false,
            initial_mutation_rate: mutation_rate,
            rate_bounds: DEFAULT_RATE_BOUNDS,
        }
    }

    pub fn es_pl(lambda: usize, mutation_rate: f64) -> Self {
        SelectionPolicy {
            prefer_larger: true,
            ..Self::es(lambda, mutation_rate)
        }
    }

    pub fn es_plqs(lambda: usize, mutation_rate: f64, band: f64) -> Self {
        SelectionPolicy {
            prefer_larger: true,
            quasi_band: Some(band),
            ..Self::es(lambda, mutation_rate)
        }
    }

    pub fn with_adaptive_mutation(mut self) -> Self {
        self.adaptive_mutation = true;
        self
    }

    pub fn with_rate_bounds(mut self, bounds: (f64, f64)) -> Self {
        self.rate_bounds = bounds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 {
            return Err(Error::Config("lambda must be at least 1".into()));
        }
        if !(self.initial_mutation_rate > 0.0 && self.initial_mutation_rate <= 1.0) {
            return Err(Error::Config(format!(
                "mutation rate must be in (0, 1], got {}",
                self.initial_mutation_rate
            )));
        }
        if let Some(band) = self.quasi_band {
            if !self.prefer_larger {
                return Err(Error::Config(
                    "a quasi-stability band requires prefer_larger".into(),
                ));
            }
            if !(band >= 0.0 && band.is_finite()) {
                return Err(Error::Config(format!(
                    "quasi-stability band must be finite and nonnegative, got {band}"
                )));
            }
        }
        let (lo, hi) = self.rate_bounds;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!(
                "rate bounds must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})"
            )));
        }
        if self.adaptive_mutation
            && !(lo..=hi).contains(&self.initial_mutation_rate)
        {
            return Err(Error::Config(format!(
                "initial rate {} outside adaptive bounds ({lo}, {hi})",
                self.initial_mutation_rate
            )));
        }
        Ok(())
    }

    /// Short method label used in exports and reports.
    pub fn label(&self) -> String {
        let base = match (self.prefer_larger, self.quasi_band) {
            (false, _) => "es",
            (true, None) => "es-pl",
            (true, Some(_)) => "es-plqs",
        };
        if self.adaptive_mutation {
            format!("{base}+am")
        } else {
            base.to_string()
        }
    }

    /// Whether the survivor's fitness can never fall below the parent's.
    /// Only a positive quasi-stability band gives that freedom up.
    pub fn monotone_fitness(&self) -> bool {
        match self.quasi_band {
            None => true,
            Some(band) => band == 0.0,
        }
    }
}

/// Where a candidate came from within one generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Parent,
    /// Offspring index within the brood, 0-based.
    Offspring(usize),
}

impl Origin {
    /// Offspring sort before the parent, earlier broodmates first.
    pub fn rank(&self) -> usize {
        match self {
            Origin::Offspring(i) => *i,
            Origin::Parent => usize::MAX,
        }
    }
}

/// Sort key of one candidate in a generation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub fitness: Fitness,
    pub functional_size: usize,
    pub origin: Origin,
}

/// Whether `fitness` lies within the relative band around the generation
/// best. The band is anchored at the best value, so a best of zero (or a
/// shared non-finite value) admits only exact ties.
pub fn in_band(fitness: &Fitness, best: &Fitness, band: f64) -> bool {
    fitness.value == best.value || (fitness.value - best.value).abs() <= band * best.value.abs()
}

/// Total order over candidates under `policy`; `Less` survives. Distinct
/// origins always separate candidates, so the order is strict.
pub fn candidate_order(
    a: &Candidate,
    b: &Candidate,
    policy: &SelectionPolicy,
    best: &Fitness,
) -> Ordering {
    match policy.quasi_band {
        Some(band) if policy.prefer_larger => {
            let a_in = in_band(&a.fitness, best, band);
            let b_in = in_band(&b.fitness, best, band);
            b_in.cmp(&a_in)
                .then_with(|| b.functional_size.cmp(&a.functional_size))
                .then_with(|| a.fitness.better_cmp(&b.fitness))
                .then_with(|| a.origin.rank().cmp(&b.origin.rank()))
        }
        _ if policy.prefer_larger => a
            .fitness
            .better_cmp(&b.fitness)
            .then_with(|| b.functional_size.cmp(&a.functional_size))
            .then_with(|| a.origin.rank().cmp(&b.origin.rank())),
        _ => a
            .fitness
            .better_cmp(&b.fitness)
            .then_with(|| a.origin.rank().cmp(&b.origin.rank())),
    }
}

/// Index of the surviving candidate: the minimum of [`candidate_order`],
/// with the band anchored at the best fitness present.
pub fn select_survivor(candidates: &[Candidate], policy: &SelectionPolicy) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Input("no candidates to select from".into()));
    }
    let best = candidates
        .iter()
        .map(|c| c.fitness)
        .min_by(|a, b| a.better_cmp(b))
        .expect("nonempty");
    Ok((0..candidates.len())
        .min_by(|&i, &j| candidate_order(&candidates[i], &candidates[j], policy, &best))
        .expect("nonempty"))
}

/// One unclamped-then-clamped step of the adaptive rule.
pub fn update_mutation_rate(rate: f64, success: bool, bounds: (f64, f64)) -> f64 {
    let factor = if success {
        RATE_FACTOR
    } else {
        RATE_FACTOR.powf(-0.25)
    };
    (rate * factor).clamp(bounds.0, bounds.1)
}

/// Adaptive mutation rate kept in closed form.
///
/// The rate is `base * 1.4^(q / 4)` where `q` counts quarter steps: +4 per
/// success, -1 per failure. Evaluating the exponent once per query instead
/// of compounding float multiplies makes one success followed by four
/// failures restore the previous rate bit for bit, and keeps long histories
/// at full precision. Hitting a bound re-anchors the base at that bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MutationRateState {
    base: f64,
    quarter_steps: i64,
    bounds: (f64, f64),
}

impl MutationRateState {
    pub fn new(initial: f64, bounds: (f64, f64)) -> Self {
        debug_assert!(initial > 0.0 && bounds.0 > 0.0 && bounds.0 <= bounds.1);
        MutationRateState {
            base: initial.clamp(bounds.0, bounds.1),
            quarter_steps: 0,
            bounds,
        }
    }

    pub fn rate(&self) -> f64 {
        let raw = self.base * RATE_FACTOR.powf(self.quarter_steps as f64 / 4.0);
        raw.clamp(self.bounds.0, self.bounds.1)
    }

    pub fn record(&mut self, success: bool) {
        self.quarter_steps += if success { 4 } else { -1 };
        let raw = self.base * RATE_FACTOR.powf(self.quarter_steps as f64 / 4.0);
        if raw > self.bounds.1 {
            self.base = self.bounds.1;
            self.quarter_steps = 0;
        } else if raw < self.bounds.0 {
            self.base = self.bounds.0;
            self.quarter_steps = 0;
        }
    }
}

/// Snapshot of the surviving parent after one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub generation: u64,
    pub best_fitness: f64,
    pub functional_size: usize,
    pub mutation_rate: f64,
}

/// Outcome of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub evaluations_used: u64,
    pub generations_used: u64,
    pub best_fitness: Fitness,
    pub solved: bool,
    pub functional_size: usize,
    pub active_links: usize,
    pub final_chromosome: Chromosome,
    /// Initial rate followed by one entry per generation when adaptation is
    /// on; just the initial rate otherwise.
    pub mutation_rate_trace: Vec<f64>,
    /// One entry per epoch of a dynamic run: generations needed to reach an
    /// optimum after the target moved, `None` if the epoch ended first.
    /// Empty for static runs.
    pub recovery_times: Vec<Option<u64>>,
    /// Per-generation history when tracing was requested; the first point is
    /// the initial parent.
    pub trace: Vec<TracePoint>,
}

struct ParentState {
    chrom: Chromosome,
    phen: Phenotype,
    fitness: Fitness,
}

impl ParentState {
    fn random(problem: &Problem, spec: &GenomeSpec, rng: &mut impl Rng) -> Result<Self> {
        let chrom = genome::random_chromosome(spec, rng)?;
        let phen = genome::decode(&chrom);
        let fitness = problem.fitness_of(&chrom, &phen);
        Ok(ParentState {
            chrom,
            phen,
            fitness,
        })
    }

    fn key(&self, origin: Origin) -> Candidate {
        Candidate {
            fitness: self.fitness,
            functional_size: self.phen.functional_size,
            origin,
        }
    }
}

struct StepReport {
    /// An optimal candidate appeared and was adopted (only when stopping at
    /// the optimum).
    terminated: bool,
    /// The best offspring was at least as good as the parent; drives the
    /// adaptive rate.
    success: bool,
}

/// Runs one generation: breed, evaluate, select, replace the parent.
fn generation_step(
    problem: &Problem,
    policy: &SelectionPolicy,
    parent: &mut ParentState,
    rate: f64,
    stop_at_optimum: bool,
    rng: &mut impl Rng,
) -> Result<StepReport> {
    let parent_fitness = parent.fitness;
    let mut offspring = Vec::with_capacity(policy.lambda);
    for _ in 0..policy.lambda {
        let chrom = genome::mutate(&parent.chrom, rate, rng)?;
        let phen = genome::decode(&chrom);
        let fitness = problem.fitness_of(&chrom, &phen);
        offspring.push(ParentState {
            chrom,
            phen,
            fitness,
        });
    }

    let mut keys = Vec::with_capacity(policy.lambda + 1);
    keys.push(parent.key(Origin::Parent));
    for (i, o) in offspring.iter().enumerate() {
        keys.push(o.key(Origin::Offspring(i)));
    }
    let best = keys
        .iter()
        .map(|c| c.fitness)
        .min_by(|a, b| a.better_cmp(b))
        .expect("nonempty");
    let best_offspring = keys[1..]
        .iter()
        .map(|c| c.fitness)
        .min_by(|a, b| a.better_cmp(b))
        .expect("lambda >= 1");
    let success = best_offspring.at_least_as_good_as(&parent_fitness);

    let terminated = stop_at_optimum && keys.iter().any(|c| problem.is_optimal(&c.fitness));
    let survivor = if terminated {
        (0..keys.len())
            .filter(|&i| problem.is_optimal(&keys[i].fitness))
            .min_by(|&i, &j| candidate_order(&keys[i], &keys[j], policy, &best))
            .expect("an optimal candidate exists")
    } else {
        (0..keys.len())
            .min_by(|&i, &j| candidate_order(&keys[i], &keys[j], policy, &best))
            .expect("nonempty")
    };
    if survivor > 0 {
        *parent = offspring.swap_remove(survivor - 1);
    }

    if !terminated {
        if policy.monotone_fitness() {
            assert!(
                parent.fitness.at_least_as_good_as(&parent_fitness),
                "survivor fitness regressed under a monotone policy"
            );
        }
        if let Some(band) = policy.quasi_band {
            assert!(
                in_band(&parent.fitness, &best, band),
                "survivor left the quasi-stability band"
            );
        }
    }
    Ok(StepReport {
        terminated,
        success,
    })
}

fn check_problem_spec(problem: &Problem, spec: &GenomeSpec) -> Result<()> {
    spec.validate()?;
    if spec.num_inputs != problem.num_inputs()
        || spec.function_set != problem.function_set()
        || spec.num_outputs != 1
    {
        return Err(Error::Config(format!(
            "genome spec ({} inputs, {} outputs, {} set) does not fit the problem \
             ({} inputs, 1 output, {} set)",
            spec.num_inputs,
            spec.num_outputs,
            spec.function_set.name(),
            problem.num_inputs(),
            problem.function_set().name()
        )));
    }
    Ok(())
}

/// Evolves until an optimum appears or the evaluation budget is exhausted.
pub fn evolve(
    problem: &Problem,
    spec: &GenomeSpec,
    policy: &SelectionPolicy,
    budget: u64,
    rng: &mut impl Rng,
) -> Result<RunRecord> {
    evolve_with_trace(problem, spec, policy, budget, false, rng)
}

/// [`evolve`] with optional per-generation tracing.
pub fn evolve_with_trace(
    problem: &Problem,
    spec: &GenomeSpec,
    policy: &SelectionPolicy,
    budget: u64,
    record_trace: bool,
    rng: &mut impl Rng,
) -> Result<RunRecord> {
    policy.validate()?;
    check_problem_spec(problem, spec)?;
    if budget < 1 + policy.lambda as u64 {
        return Err(Error::Config(format!(
            "budget {budget} cannot cover the initial parent plus one brood of {}",
            policy.lambda
        )));
    }

    let mut parent = ParentState::random(problem, spec, rng)?;
    let mut evaluations = 1u64;
    let mut generations = 0u64;
    let mut rate_state = MutationRateState::new(policy.initial_mutation_rate, policy.rate_bounds);
    let mut rate_trace = vec![rate_state.rate()];
    let mut best_ever = (parent.chrom.clone(), parent.fitness);
    let mut trace = Vec::new();
    if record_trace {
        trace.push(TracePoint {
            generation: 0,
            best_fitness: parent.fitness.value,
            functional_size: parent.phen.functional_size,
            mutation_rate: rate_state.rate(),
        });
    }

    let mut solved = problem.is_optimal(&parent.fitness);
    while !solved && evaluations + policy.lambda as u64 <= budget {
        let rate = rate_state.rate();
        let report = generation_step(problem, policy, &mut parent, rate, true, rng)?;
        generations += 1;
        evaluations += policy.lambda as u64;
        if policy.adaptive_mutation {
            rate_state.record(report.success);
            rate_trace.push(rate_state.rate());
        }
        if parent.fitness.better_than(&best_ever.1) {
            best_ever = (parent.chrom.clone(), parent.fitness);
        }
        if record_trace {
            trace.push(TracePoint {
                generation: generations,
                best_fitness: parent.fitness.value,
                functional_size: parent.phen.functional_size,
                mutation_rate: rate,
            });
        }
        solved = report.terminated;
    }

    // Report the final parent when it matches the best fitness seen; only a
    // quasi-stable run can end below its own high-water mark.
    let (final_chromosome, best_fitness) = if parent.fitness.at_least_as_good_as(&best_ever.1) {
        (parent.chrom, parent.fitness)
    } else {
        best_ever
    };
    let final_phen = genome::decode(&final_chromosome);
    Ok(RunRecord {
        evaluations_used: evaluations,
        generations_used: generations,
        best_fitness,
        solved,
        functional_size: final_phen.functional_size,
        active_links: final_phen.active_links,
        final_chromosome,
        mutation_rate_trace: rate_trace,
        recovery_times: Vec::new(),
        trace,
    })
}

/// Evolves against a target that is perturbed every `epoch_length`
/// generations, recording how many generations each epoch needed to regain
/// an optimum. Epoch 0 measures the initial discovery; every later epoch
/// starts by flipping `flips` target bits and re-scoring the parent. The run
/// never stops early, so size drift continues after recovery.
#[allow(clippy::too_many_arguments)]
pub fn evolve_dynamic(
    problem: &Problem,
    spec: &GenomeSpec,
    policy: &SelectionPolicy,
    epochs: usize,
    epoch_length: u64,
    flips: usize,
    record_trace: bool,
    rng: &mut impl Rng,
) -> Result<RunRecord> {
    policy.validate()?;
    check_problem_spec(problem, spec)?;
    if epochs == 0 || epoch_length == 0 {
        return Err(Error::Config(
            "dynamic runs need at least one epoch of at least one generation".into(),
        ));
    }
    if !matches!(problem, Problem::Boolean { .. }) {
        return Err(Error::Config(
            "only boolean targets can be perturbed".into(),
        ));
    }

    let mut current = problem.clone();
    let mut parent = ParentState::random(&current, spec, rng)?;
    let mut evaluations = 1u64;
    let mut generations = 0u64;
    let mut rate_state = MutationRateState::new(policy.initial_mutation_rate, policy.rate_bounds);
    let mut rate_trace = vec![rate_state.rate()];
    let mut recovery_times = Vec::with_capacity(epochs);
    let mut trace = Vec::new();
    if record_trace {
        trace.push(TracePoint {
            generation: 0,
            best_fitness: parent.fitness.value,
            functional_size: parent.phen.functional_size,
            mutation_rate: rate_state.rate(),
        });
    }

    for epoch in 0..epochs {
        if epoch > 0 {
            current = current.perturbed(flips, rng)?;
            parent.fitness = current.fitness_of(&parent.chrom, &parent.phen);
            evaluations += 1;
        }
        let mut recovered = if current.is_optimal(&parent.fitness) {
            Some(0u64)
        } else {
            None
        };
        for within in 0..epoch_length {
            let rate = rate_state.rate();
            let report = generation_step(&current, policy, &mut parent, rate, false, rng)?;
            generations += 1;
            evaluations += policy.lambda as u64;
            if policy.adaptive_mutation {
                rate_state.record(report.success);
                rate_trace.push(rate_state.rate());
            }
            if record_trace {
                trace.push(TracePoint {
                    generation: generations,
                    best_fitness: parent.fitness.value,
                    functional_size: parent.phen.functional_size,
                    mutation_rate: rate,
                });
            }
            if recovered.is_none() && current.is_optimal(&parent.fitness) {
                recovered = Some(within + 1);
            }
        }
        recovery_times.push(recovered);
    }

    let solved = current.is_optimal(&parent.fitness);
    Ok(RunRecord {
        evaluations_used: evaluations,
        generations_used: generations,
        best_fitness: parent.fitness,
        solved,
        functional_size: parent.phen.functional_size,
        active_links: parent.phen.active_links,
        final_chromosome: parent.chrom,
        mutation_rate_trace: rate_trace,
        recovery_times,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::problems::Direction;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn maxi(value: f64) -> Fitness {
        Fitness::new(value, Direction::Maximize)
    }

    fn cand(value: f64, size: usize, origin: Origin) -> Candidate {
        Candidate {
            fitness: maxi(value),
            functional_size: size,
            origin,
        }
    }

    #[test]
    fn policy_validation() {
        assert!(SelectionPolicy::es(0, 0.02).validate().is_err());
        assert!(SelectionPolicy::es(4, 0.0).validate().is_err());
        assert!(SelectionPolicy::es(4, 1.5).validate().is_err());
        assert!(SelectionPolicy::es_plqs(4, 0.02, -0.1).validate().is_err());
        let mut broken = SelectionPolicy::es(4, 0.02);
        broken.quasi_band = Some(0.01);
        assert!(broken.validate().is_err());
        assert!(SelectionPolicy::es(4, 0.02)
            .with_rate_bounds((0.1, 0.05))
            .validate()
            .is_err());
        assert!(SelectionPolicy::es(4, 0.5)
            .with_adaptive_mutation()
            .validate()
            .is_err());
        assert!(SelectionPolicy::es(4, 0.02).validate().is_ok());
        assert!(SelectionPolicy::es_pl(4, 0.02).validate().is_ok());
        assert!(SelectionPolicy::es_plqs(4, 0.02, 0.01).validate().is_ok());
    }

    #[test]
    fn labels() {
        assert_eq!(SelectionPolicy::es(4, 0.02).label(), "es");
        assert_eq!(SelectionPolicy::es_pl(4, 0.02).label(), "es-pl");
        assert_eq!(SelectionPolicy::es_plqs(4, 0.02, 0.01).label(), "es-plqs");
        assert_eq!(
            SelectionPolicy::es(4, 0.02).with_adaptive_mutation().label(),
            "es+am"
        );
    }

    #[test]
    fn plain_order_ignores_size() {
        let policy = SelectionPolicy::es(4, 0.02);
        let best = maxi(0.9);
        let fit_small = cand(0.9, 2, Origin::Offspring(0));
        let weak_huge = cand(0.8, 50, Origin::Offspring(1));
        assert_eq!(
            candidate_order(&fit_small, &weak_huge, &policy, &best),
            Ordering::Less
        );

        let parent = cand(0.9, 10, Origin::Parent);
        assert_eq!(
            candidate_order(&fit_small, &parent, &policy, &best),
            Ordering::Less,
            "offspring wins fitness ties"
        );
        let second = cand(0.9, 10, Origin::Offspring(1));
        assert_eq!(
            candidate_order(&fit_small, &second, &policy, &best),
            Ordering::Less,
            "earlier broodmate wins ties"
        );
    }

    #[test]
    fn prefer_larger_order() {
        let policy = SelectionPolicy::es_pl(4, 0.02);
        let best = maxi(0.9);
        let small = cand(0.9, 2, Origin::Offspring(0));
        let large = cand(0.9, 7, Origin::Offspring(1));
        assert_eq!(
            candidate_order(&large, &small, &policy, &best),
            Ordering::Less,
            "size breaks fitness ties"
        );
        let fitter = cand(0.95, 1, Origin::Offspring(2));
        assert_eq!(
            candidate_order(&fitter, &large, &policy, &best),
            Ordering::Less,
            "fitness still dominates size"
        );
        let parent = cand(0.9, 7, Origin::Parent);
        assert_eq!(
            candidate_order(&large, &parent, &policy, &best),
            Ordering::Less,
            "offspring wins full ties"
        );
    }

    #[test]
    fn quasi_stable_order() {
        let policy = SelectionPolicy::es_plqs(4, 0.02, 0.01);
        let best = maxi(1.0);
        let exact = cand(1.0, 3, Origin::Offspring(0));
        let banded_large = cand(0.995, 9, Origin::Offspring(1));
        let out_of_band = cand(0.9, 40, Origin::Offspring(2));
        assert_eq!(
            candidate_order(&banded_large, &exact, &policy, &best),
            Ordering::Less,
            "within the band, size outranks fitness"
        );
        assert_eq!(
            candidate_order(&exact, &out_of_band, &policy, &best),
            Ordering::Less,
            "band membership outranks size"
        );
        let banded_small = cand(0.999, 3, Origin::Offspring(3));
        assert_eq!(
            candidate_order(&banded_small, &cand(0.995, 3, Origin::Offspring(4)), &policy, &best),
            Ordering::Less,
            "equal sizes in band fall back to fitness"
        );
    }

    #[test]
    fn band_membership() {
        let band = 0.01;
        assert!(in_band(&maxi(1.0), &maxi(1.0), band));
        assert!(in_band(&maxi(0.995), &maxi(1.0), band));
        assert!(!in_band(&maxi(0.9899), &maxi(1.0), band));
        // A zero best admits only exact ties.
        assert!(in_band(&maxi(0.0), &maxi(0.0), band));
        assert!(!in_band(&maxi(0.001), &maxi(0.0), band));
        // Non-finite values compare by equality alone.
        let inf = Fitness::new(f64::INFINITY, Direction::Minimize);
        assert!(in_band(&inf, &inf, band));
        assert!(!in_band(&inf, &Fitness::new(1.0, Direction::Minimize), band));
    }

    #[test]
    fn survivor_selection_examples() {
        let candidates = vec![
            cand(0.9, 10, Origin::Parent),
            cand(0.9, 4, Origin::Offspring(0)),
            cand(0.8, 20, Origin::Offspring(1)),
        ];
        assert_eq!(
            select_survivor(&candidates, &SelectionPolicy::es(4, 0.02)).unwrap(),
            1
        );
        assert_eq!(
            select_survivor(&candidates, &SelectionPolicy::es_pl(4, 0.02)).unwrap(),
            0,
            "parent outranks smaller equal-fitness offspring"
        );
        assert_eq!(
            select_survivor(&candidates, &SelectionPolicy::es_plqs(4, 0.02, 0.5)).unwrap(),
            2,
            "a wide band lets the largest in-band candidate survive"
        );
        assert!(select_survivor(&[], &SelectionPolicy::es(4, 0.02)).is_err());
    }

    #[test]
    fn rate_update_examples() {
        let b = DEFAULT_RATE_BOUNDS;
        assert!((update_mutation_rate(0.02, true, b) - 0.028).abs() < 1e-15);
        let expect = 0.02 * 1.4f64.powf(-0.25);
        assert!((update_mutation_rate(0.02, false, b) - expect).abs() < 1e-15);
        assert_eq!(update_mutation_rate(0.2, true, b), 0.25);
        assert_eq!(update_mutation_rate(0.00052, false, b), 0.0005);
    }

    #[test]
    fn rate_state_cycle_is_exact() {
        let mut state = MutationRateState::new(0.02, DEFAULT_RATE_BOUNDS);
        let before = state.rate();
        state.record(true);
        assert!((state.rate() - 0.028).abs() < 1e-15);
        for _ in 0..4 {
            state.record(false);
        }
        assert_eq!(state.rate().to_bits(), before.to_bits());
    }

    #[test]
    fn rate_state_matches_closed_form() {
        // Bounds wide enough that no step clamps.
        let mut state = MutationRateState::new(0.02, (1e-300, 1e300));
        let mut successes = 0i64;
        let mut failures = 0i64;
        let mut r = rng(40);
        for _ in 0..500 {
            let s = r.gen_bool(0.2);
            state.record(s);
            if s {
                successes += 1;
            } else {
                failures += 1;
            }
            let closed = 0.02 * RATE_FACTOR.powf(successes as f64 - failures as f64 / 4.0);
            let rel = (state.rate() - closed).abs() / closed;
            assert!(rel < 1e-12, "relative error {rel}");
        }
    }

    #[test]
    fn rate_state_reanchors_at_bounds() {
        let mut state = MutationRateState::new(0.2, DEFAULT_RATE_BOUNDS);
        state.record(true);
        assert_eq!(state.rate(), 0.25);
        state.record(false);
        let expect = 0.25 * RATE_FACTOR.powf(-0.25);
        assert!((state.rate() - expect).abs() < 1e-15);

        let mut low = MutationRateState::new(0.0006, DEFAULT_RATE_BOUNDS);
        for _ in 0..10 {
            low.record(false);
        }
        assert!(low.rate() >= 0.0005);
        low.record(true);
        assert!((low.rate() - 0.0005 * RATE_FACTOR).abs() < 1e-15);
    }

    fn tiny_parity() -> (Problem, GenomeSpec) {
        let problem = Problem::parity(2).unwrap();
        let spec = problem.genome_spec(12).unwrap();
        (problem, spec)
    }

    #[test]
    fn evolve_solves_tiny_parity() {
        let (problem, spec) = tiny_parity();
        let policy = SelectionPolicy::es(4, 0.05);
        let record = evolve(&problem, &spec, &policy, 200_000, &mut rng(41)).unwrap();
        assert!(record.solved, "two-bit parity within the budget");
        assert_eq!(record.best_fitness.value, 1.0);
        assert_eq!(
            record.evaluations_used,
            1 + 4 * record.generations_used,
            "one parent evaluation plus lambda per generation"
        );
        assert_eq!(record.mutation_rate_trace, vec![0.05]);
        assert!(record.recovery_times.is_empty());
        let phen = genome::decode(&record.final_chromosome);
        assert_eq!(phen.functional_size, record.functional_size);
        assert_eq!(phen.active_links, record.active_links);
    }

    #[test]
    fn evolve_is_deterministic_per_seed() {
        let (problem, spec) = tiny_parity();
        for policy in [
            SelectionPolicy::es(4, 0.05),
            SelectionPolicy::es_pl(4, 0.05),
            SelectionPolicy::es_plqs(4, 0.05, 0.01),
            SelectionPolicy::es_pl(4, 0.05).with_adaptive_mutation(),
        ] {
            let a = evolve(&problem, &spec, &policy, 50_000, &mut rng(42)).unwrap();
            let b = evolve(&problem, &spec, &policy, 50_000, &mut rng(42)).unwrap();
            assert_eq!(a, b, "{}", policy.label());
            let c = evolve(&problem, &spec, &policy, 50_000, &mut rng(43)).unwrap();
            assert!(a != c || a.solved, "different seeds should diverge");
        }
    }

    #[test]
    fn evolve_rejects_small_budget() {
        let (problem, spec) = tiny_parity();
        let policy = SelectionPolicy::es(4, 0.05);
        assert!(evolve(&problem, &spec, &policy, 4, &mut rng(44)).is_err());
        assert!(evolve(&problem, &spec, &policy, 5, &mut rng(44)).is_ok());
    }

    #[test]
    fn evolve_rejects_mismatched_spec() {
        let (problem, _) = tiny_parity();
        let wrong = GenomeSpec::new(3, 12, 1, crate::exec::FunctionSet::Boolean).unwrap();
        let policy = SelectionPolicy::es(4, 0.05);
        assert!(evolve(&problem, &wrong, &policy, 1000, &mut rng(45)).is_err());
    }

    #[test]
    fn trace_is_monotone_for_plain_policy() {
        let (problem, spec) = tiny_parity();
        let policy = SelectionPolicy::es(4, 0.05);
        let record =
            evolve_with_trace(&problem, &spec, &policy, 50_000, true, &mut rng(46)).unwrap();
        assert_eq!(record.trace.len() as u64, record.generations_used + 1);
        assert_eq!(record.trace[0].generation, 0);
        for pair in record.trace.windows(2) {
            assert!(
                pair[1].best_fitness >= pair[0].best_fitness,
                "fitness regressed in trace"
            );
        }
    }

    #[test]
    fn adaptive_rate_traces_every_generation() {
        let (problem, spec) = tiny_parity();
        let policy = SelectionPolicy::es(4, 0.05).with_adaptive_mutation();
        let record = evolve(&problem, &spec, &policy, 50_000, &mut rng(47)).unwrap();
        assert_eq!(
            record.mutation_rate_trace.len() as u64,
            record.generations_used + 1
        );
        let (lo, hi) = policy.rate_bounds;
        for &r in &record.mutation_rate_trace {
            assert!(r >= lo && r <= hi);
        }
    }

    #[test]
    fn quasi_stable_run_completes() {
        let (problem, spec) = tiny_parity();
        let policy = SelectionPolicy::es_plqs(4, 0.05, 0.05);
        // The in-band assertion inside the loop checks every generation.
        let record = evolve(&problem, &spec, &policy, 50_000, &mut rng(48)).unwrap();
        assert!(record.evaluations_used <= 50_000);
    }

    #[test]
    fn dynamic_run_accounts_evaluations() {
        let mut r = rng(49);
        let problem = Problem::random_boolean(3, &mut r).unwrap();
        let spec = problem.genome_spec(20).unwrap();
        let policy = SelectionPolicy::es_pl(4, 0.05);
        let epochs = 3usize;
        let epoch_length = 150u64;
        let record =
            evolve_dynamic(&problem, &spec, &policy, epochs, epoch_length, 1, false, &mut r)
                .unwrap();
        assert_eq!(record.recovery_times.len(), epochs);
        assert_eq!(record.generations_used, epochs as u64 * epoch_length);
        assert_eq!(
            record.evaluations_used,
            1 + epochs as u64 * epoch_length * 4 + (epochs as u64 - 1),
            "initial parent, brood per generation, one re-score per move"
        );
    }

    #[test]
    fn dynamic_run_with_no_flips_recovers_instantly() {
        let mut r = rng(50);
        let problem = Problem::parity(2).unwrap();
        let spec = problem.genome_spec(12).unwrap();
        let policy = SelectionPolicy::es(4, 0.05);
        let record =
            evolve_dynamic(&problem, &spec, &policy, 4, 3000, 0, false, &mut r).unwrap();
        assert!(record.recovery_times[0].is_some(), "initial discovery");
        for epoch in 1..4 {
            assert_eq!(
                record.recovery_times[epoch],
                Some(0),
                "an unchanged target keeps the parent optimal"
            );
        }
    }

    #[test]
    fn dynamic_run_is_deterministic() {
        let problem = Problem::random_boolean(5, &mut rng(51)).unwrap();
        let spec = problem.genome_spec(30).unwrap();
        let policy = SelectionPolicy::es_pl(4, 0.05);
        let a = evolve_dynamic(&problem, &spec, &policy, 2, 200, 4, false, &mut rng(52)).unwrap();
        let b = evolve_dynamic(&problem, &spec, &policy, 2, 200, 4, false, &mut rng(52)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dynamic_rejects_degenerate_schedules() {
        let problem = Problem::parity(2).unwrap();
        let spec = problem.genome_spec(12).unwrap();
        let policy = SelectionPolicy::es(4, 0.05);
        assert!(
            evolve_dynamic(&problem, &spec, &policy, 0, 10, 1, false, &mut rng(53)).is_err()
        );
        assert!(
            evolve_dynamic(&problem, &spec, &policy, 1, 0, 1, false, &mut rng(53)).is_err()
        );
        let reg = Problem::regression(crate::problems::pagie_grid());
        let rspec = reg.genome_spec(12).unwrap();
        assert!(
            evolve_dynamic(&reg, &rspec, &policy, 2, 10, 1, false, &mut rng(53)).is_err()
        );
    }

    fn arb_candidate(idx: usize) -> impl Strategy<Value = Candidate> {
        (0u64..=64, 0usize..60, prop::bool::ANY).prop_map(move |(wrong, size, parent)| Candidate {
            fitness: maxi(1.0 - wrong as f64 / 64.0),
            functional_size: size,
            origin: if parent && idx == 0 {
                Origin::Parent
            } else {
                Origin::Offspring(idx)
            },
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn order_is_total_and_consistent(
            a in arb_candidate(0),
            b in arb_candidate(1),
            c in arb_candidate(2),
        ) {
            for policy in [
                SelectionPolicy::es(4, 0.02),
                SelectionPolicy::es_pl(4, 0.02),
                SelectionPolicy::es_plqs(4, 0.02, 0.05),
            ] {
                let cands = [a, b, c];
                let best = cands
                    .iter()
                    .map(|c| c.fitness)
                    .min_by(|x, y| x.better_cmp(y))
                    .unwrap();
                let ord = |x: &Candidate, y: &Candidate| candidate_order(x, y, &policy, &best);
                // Antisymmetry.
                prop_assert_eq!(ord(&a, &b), ord(&b, &a).reverse());
                prop_assert_eq!(ord(&a, &a), Ordering::Equal);
                // Transitivity over the triple.
                let mut sorted = cands;
                sorted.sort_by(ord);
                for w in sorted.windows(2) {
                    prop_assert_ne!(ord(&w[0], &w[1]), Ordering::Greater);
                }
                // The survivor is never beaten by anyone.
                let survivor = select_survivor(&cands, &policy).unwrap();
                for x in &cands {
                    prop_assert_ne!(ord(x, &cands[survivor]), Ordering::Less);
                }
            }
        }
    }
}
