//! Benchmark problems and fitness evaluation.
//!
//! Three problem families: even-parity truth tables, randomly drawn boolean
//! target tables that can be perturbed between epochs, and a two-variable
//! rational regression surface sampled either uniformly at random or on a
//! fixed grid. Boolean fitness counts correct patterns and is maximized;
//! regression fitness sums absolute errors and is minimized.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, FunctionSet, OutputTable};
use crate::genome::{Chromosome, GenomeSpec, Phenotype};

/// Whether larger or smaller fitness values win.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

/// A fitness value tagged with its optimization direction, so comparisons
/// never depend on call-site knowledge of the problem domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    pub value: f64,
    pub direction: Direction,
}

impl Fitness {
    pub fn new(value: f64, direction: Direction) -> Self {
        Fitness { value, direction }
    }

    /// `Less` means `self` is strictly better than `other`. Total over all
    /// float values via `total_cmp`, so sorting never panics.
    pub fn better_cmp(&self, other: &Fitness) -> std::cmp::Ordering {
        debug_assert_eq!(self.direction, other.direction, "mixed-direction compare");
        match self.direction {
            Direction::Maximize => other.value.total_cmp(&self.value),
            Direction::Minimize => self.value.total_cmp(&other.value),
        }
    }

    pub fn better_than(&self, other: &Fitness) -> bool {
        self.better_cmp(other) == std::cmp::Ordering::Less
    }

    pub fn at_least_as_good_as(&self, other: &Fitness) -> bool {
        self.better_cmp(other) != std::cmp::Ordering::Greater
    }
}

/// Desired single-output truth table, one bit per input pattern, packed 64
/// patterns per word with zeroed trailing bits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetTable {
    pub num_inputs: usize,
    pub words: Vec<u64>,
}

impl TargetTable {
    pub fn num_patterns(&self) -> usize {
        1 << self.num_inputs
    }

    pub fn get(&self, pattern: usize) -> bool {
        (self.words[pattern / 64] >> (pattern % 64)) & 1 == 1
    }

    fn flip(&mut self, pattern: usize) {
        self.words[pattern / 64] ^= 1u64 << (pattern % 64);
    }
}

fn check_table_arity(num_inputs: usize) -> Result<()> {
    if !(2..=16).contains(&num_inputs) {
        return Err(Error::Config(format!(
            "boolean problems support 2 to 16 inputs, got {num_inputs}"
        )));
    }
    Ok(())
}

/// Even-parity target: pattern `j` maps to 1 iff `j` has an even number of
/// set bits.
pub fn parity_targets(num_inputs: usize) -> Result<TargetTable> {
    check_table_arity(num_inputs)?;
    let patterns = 1usize << num_inputs;
    let mut words = vec![0u64; exec::word_count(patterns)];
    for j in 0..patterns {
        if j.count_ones() % 2 == 0 {
            words[j / 64] |= 1u64 << (j % 64);
        }
    }
    Ok(TargetTable { num_inputs, words })
}

/// Draws every target bit as a fair coin flip.
pub fn random_targets(num_inputs: usize, rng: &mut impl Rng) -> Result<TargetTable> {
    check_table_arity(num_inputs)?;
    let patterns = 1usize << num_inputs;
    let words = exec::word_count(patterns);
    let mut words: Vec<u64> = (0..words).map(|_| rng.gen()).collect();
    *words.last_mut().unwrap() &= exec::tail_mask(patterns);
    Ok(TargetTable { num_inputs, words })
}

/// Flips exactly `flips` distinct pattern positions of the table.
pub fn perturb_targets(
    targets: &TargetTable,
    flips: usize,
    rng: &mut impl Rng,
) -> Result<TargetTable> {
    let patterns = targets.num_patterns();
    if flips > patterns {
        return Err(Error::Config(format!(
            "cannot flip {flips} of {patterns} target positions"
        )));
    }
    let mut out = targets.clone();
    for pattern in rand::seq::index::sample(rng, patterns, flips) {
        out.flip(pattern);
    }
    Ok(out)
}

/// Fraction of the `2^num_inputs` patterns answered correctly:
/// `1 - wrong / 2^num_inputs`. Exact in f64 for every reachable wrong count,
/// since the denominator is a power of two, so an optimum compares equal to
/// 1.0 with no tolerance.
pub fn fitness_boolean(wrong: u64, num_inputs: usize) -> Result<f64> {
    check_table_arity(num_inputs)?;
    let patterns = 1u64 << num_inputs;
    if wrong > patterns {
        return Err(Error::Input(format!(
            "{wrong} wrong patterns out of {patterns}"
        )));
    }
    Ok(1.0 - wrong as f64 / patterns as f64)
}

/// Value of the two-variable rational benchmark surface
/// `1/(1 + x1^-4) + 1/(1 + x2^-4)`. Undefined on the axes.
pub fn pagie_value(x1: f64, x2: f64) -> Result<f64> {
    if x1 == 0.0 || x2 == 0.0 {
        return Err(Error::Input(
            "surface is undefined where a coordinate is zero".into(),
        ));
    }
    Ok(1.0 / (1.0 + x1.powi(-4)) + 1.0 / (1.0 + x2.powi(-4)))
}

/// Coordinates this close to an axis are resampled when drawing random
/// sample points.
pub const AXIS_GUARD: f64 = 1e-6;

/// Two-input regression dataset stored column-major, ready for table
/// evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionProblem {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub targets: Vec<f64>,
}

impl RegressionProblem {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Writes `x1,x2,target` rows; floats print in shortest round-trip form.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("x1,x2,target\n");
        for i in 0..self.len() {
            text.push_str(&format!("{},{},{}\n", self.x1[i], self.x2[i], self.targets[i]));
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn draw_coordinate(rng: &mut impl Rng) -> f64 {
    loop {
        let c: f64 = rng.gen_range(-5.0..=5.0);
        if c.abs() >= AXIS_GUARD {
            return c;
        }
    }
}

/// Samples the surface uniformly over `[-5, 5]^2`, resampling coordinates
/// that land within the axis guard.
pub fn pagie_sampled(num_samples: usize, rng: &mut impl Rng) -> Result<RegressionProblem> {
    if num_samples == 0 {
        return Err(Error::Config("sample count must be nonzero".into()));
    }
    let mut x1 = Vec::with_capacity(num_samples);
    let mut x2 = Vec::with_capacity(num_samples);
    let mut targets = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let a = draw_coordinate(rng);
        let b = draw_coordinate(rng);
        targets.push(pagie_value(a, b)?);
        x1.push(a);
        x2.push(b);
    }
    Ok(RegressionProblem { x1, x2, targets })
}

/// The 26 x 26 grid from -5 to 5 in steps of 0.4 (676 points, none on an
/// axis).
pub fn pagie_grid() -> RegressionProblem {
    let coords: Vec<f64> = (0..26).map(|k| -5.0 + 0.4 * k as f64).collect();
    let mut x1 = Vec::with_capacity(676);
    let mut x2 = Vec::with_capacity(676);
    let mut targets = Vec::with_capacity(676);
    for &a in &coords {
        for &b in &coords {
            x1.push(a);
            x2.push(b);
            targets.push(pagie_value(a, b).expect("grid avoids the axes"));
        }
    }
    RegressionProblem { x1, x2, targets }
}

/// Sum of absolute errors; any non-finite output (or error sum) collapses to
/// positive infinity so runaway programs always lose comparisons.
pub fn regression_error(outputs: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(outputs.len(), targets.len(), "output/target length mismatch");
    let mut sum = 0.0;
    for (&o, &t) in outputs.iter().zip(targets) {
        if !o.is_finite() {
            return f64::INFINITY;
        }
        sum += (o - t).abs();
    }
    if sum.is_finite() {
        sum
    } else {
        f64::INFINITY
    }
}

/// Regression solutions closer than this to zero total error count as
/// optimal.
pub const REGRESSION_OPTIMUM: f64 = 1e-4;

/// A fitness case a chromosome can be scored against.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Boolean { targets: TargetTable },
    Regression(RegressionProblem),
}

impl Problem {
    pub fn parity(num_inputs: usize) -> Result<Problem> {
        Ok(Problem::Boolean {
            targets: parity_targets(num_inputs)?,
        })
    }

    pub fn random_boolean(num_inputs: usize, rng: &mut impl Rng) -> Result<Problem> {
        Ok(Problem::Boolean {
            targets: random_targets(num_inputs, rng)?,
        })
    }

    pub fn regression(dataset: RegressionProblem) -> Problem {
        Problem::Regression(dataset)
    }

    /// Copy with `flips` target bits flipped; only boolean problems perturb.
    pub fn perturbed(&self, flips: usize, rng: &mut impl Rng) -> Result<Problem> {
        match self {
            Problem::Boolean { targets } => Ok(Problem::Boolean {
                targets: perturb_targets(targets, flips, rng)?,
            }),
            Problem::Regression(_) => Err(Error::Config(
                "regression problems have no perturbation".into(),
            )),
        }
    }

    pub fn num_inputs(&self) -> usize {
        match self {
            Problem::Boolean { targets } => targets.num_inputs,
            Problem::Regression(_) => 2,
        }
    }

    pub fn function_set(&self) -> FunctionSet {
        match self {
            Problem::Boolean { .. } => FunctionSet::Boolean,
            Problem::Regression(_) => FunctionSet::Real,
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Problem::Boolean { .. } => Direction::Maximize,
            Problem::Regression(_) => Direction::Minimize,
        }
    }

    /// Genome dimensions for this problem with the given node budget.
    pub fn genome_spec(&self, num_nodes: usize) -> Result<GenomeSpec> {
        GenomeSpec::new(self.num_inputs(), num_nodes, 1, self.function_set())
    }

    /// Scores a decoded chromosome. The boolean path never materializes the
    /// output table.
    pub fn fitness_of(&self, chrom: &Chromosome, phen: &Phenotype) -> Fitness {
        match self {
            Problem::Boolean { targets } => {
                let wrong = exec::eval_bool_wrong_bits(chrom, phen, &targets.words);
                let value = fitness_boolean(wrong, targets.num_inputs)
                    .expect("wrong count is bounded by the pattern count");
                Fitness::new(value, Direction::Maximize)
            }
            Problem::Regression(data) => {
                let columns = [data.x1.clone(), data.x2.clone()];
                let table = exec::eval_real_table(chrom, phen, &columns)
                    .expect("dataset columns are consistent");
                Fitness::new(
                    regression_error(&table.outputs[0], &data.targets),
                    Direction::Minimize,
                )
            }
        }
    }

    /// Full behavior of a chromosome over this problem's pattern source.
    pub fn evaluate_table(&self, chrom: &Chromosome, phen: &Phenotype) -> OutputTable {
        match self {
            Problem::Boolean { .. } => OutputTable::Bits(exec::eval_bool_table(chrom, phen)),
            Problem::Regression(data) => {
                let columns = [data.x1.clone(), data.x2.clone()];
                OutputTable::Reals(
                    exec::eval_real_table(chrom, phen, &columns)
                        .expect("dataset columns are consistent"),
                )
            }
        }
    }

    /// Boolean optima answer every pattern (exact equality is safe because
    /// the fitness values are dyadic); regression optima fall below the
    /// error threshold.
    pub fn is_optimal(&self, fitness: &Fitness) -> bool {
        match self {
            Problem::Boolean { .. } => fitness.value == 1.0,
            Problem::Regression(_) => fitness.value < REGRESSION_OPTIMUM,
        }
    }
}
