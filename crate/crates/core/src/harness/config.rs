//! Experiment configuration and its flat `key = value` text format.
//!
//! Keys are dotted paths (`problem.kind`, `policy.lambda`, `run.seed`).
//! Blank lines and `#` comments are ignored; unknown and duplicate keys are
//! errors. Every key except `problem.kind` has a default.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{self, Problem};
use crate::selection::{SelectionPolicy, DEFAULT_RATE_BOUNDS};

/// Which benchmark an experiment runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemConfig {
    /// Even parity over `bits` inputs.
    Parity { bits: usize },
    /// Random boolean target over `bits` inputs, re-drawn per replication
    /// and perturbed by `flips` bit flips every `epoch_length` generations.
    Dynamic {
        bits: usize,
        epochs: usize,
        epoch_length: u64,
        flips: usize,
    },
    /// Two-variable rational surface regression; `grid` switches from
    /// per-replication uniform sampling to the fixed 26 x 26 lattice.
    Pagie { grid: bool, samples: usize },
}

impl ProblemConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ProblemConfig::Parity { .. } => "parity",
            ProblemConfig::Dynamic { .. } => "dynamic",
            ProblemConfig::Pagie { .. } => "pagie",
        }
    }
}

/// Everything a reproducible experiment needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub num_nodes: usize,
    pub policy: SelectionPolicy,
    pub replications: usize,
    /// Evaluation budget per replication (static problems only; dynamic runs
    /// are bounded by their epoch schedule).
    pub budget: u64,
    pub base_seed: u64,
    /// Worker threads; 0 uses all cores, 1 forces sequential execution.
    pub workers: usize,
    pub record_traces: bool,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Standard settings: 100 nodes, plain selection with a brood of 4 at
    /// rate 0.02, 30 replications of at most one million evaluations.
    pub fn new(problem: ProblemConfig) -> Self {
        ExperimentConfig {
            problem,
            num_nodes: 100,
            policy: SelectionPolicy::es(4, 0.02),
            replications: 30,
            budget: 1_000_000,
            base_seed: 1,
            workers: 0,
            record_traces: false,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.num_nodes == 0 {
            return Err(Error::Config("genome.nodes must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("run.replications must be at least 1".into()));
        }
        match self.problem {
            ProblemConfig::Parity { bits } | ProblemConfig::Dynamic { bits, .. } => {
                if !(2..=16).contains(&bits) {
                    return Err(Error::Config(format!(
                        "problem.bits must be in 2..=16, got {bits}"
                    )));
                }
            }
            ProblemConfig::Pagie { samples, .. } => {
                if samples == 0 {
                    return Err(Error::Config("problem.samples must be at least 1".into()));
                }
            }
        }
        if let ProblemConfig::Dynamic {
            bits,
            epochs,
            epoch_length,
            flips,
        } = self.problem
        {
            if epochs == 0 || epoch_length == 0 {
                return Err(Error::Config(
                    "problem.epochs and problem.epoch_length must be at least 1".into(),
                ));
            }
            if flips > (1 << bits) {
                return Err(Error::Config(format!(
                    "problem.flips {flips} exceeds the {} target positions",
                    1usize << bits
                )));
            }
        } else if self.budget < 1 + self.policy.lambda as u64 {
            return Err(Error::Config(format!(
                "run.budget {} cannot cover the initial parent plus one brood of {}",
                self.budget, self.policy.lambda
            )));
        }
        Ok(())
    }

    /// Instantiates the problem, drawing any random targets or samples from
    /// `rng`. Deterministic problems ignore it.
    pub fn build_problem(&self, rng: &mut impl Rng) -> Result<Problem> {
        match self.problem {
            ProblemConfig::Parity { bits } => Problem::parity(bits),
            ProblemConfig::Dynamic { bits, .. } => Problem::random_boolean(bits, rng),
            ProblemConfig::Pagie { grid: true, .. } => {
                Ok(Problem::regression(problems::pagie_grid()))
            }
            ProblemConfig::Pagie { grid: false, samples } => {
                Ok(Problem::regression(problems::pagie_sampled(samples, rng)?))
            }
        }
    }

    /// Serializes to the flat key = value format; `parse` inverts this
    /// byte for byte.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        line("problem.kind", self.problem.kind_name().to_string());
        match self.problem {
            ProblemConfig::Parity { bits } => line("problem.bits", bits.to_string()),
            ProblemConfig::Dynamic {
                bits,
                epochs,
                epoch_length,
                flips,
            } => {
                line("problem.bits", bits.to_string());
                line("problem.epochs", epochs.to_string());
                line("problem.epoch_length", epoch_length.to_string());
                line("problem.flips", flips.to_string());
            }
            ProblemConfig::Pagie { grid, samples } => {
                line("problem.grid", grid.to_string());
                line("problem.samples", samples.to_string());
            }
        }
        line("genome.nodes", self.num_nodes.to_string());
        line("policy.lambda", self.policy.lambda.to_string());
        line(
            "policy.mut_rate",
            self.policy.initial_mutation_rate.to_string(),
        );
        line(
            "policy.prefer_larger",
            self.policy.prefer_larger.to_string(),
        );
        line(
            "policy.quasi_band",
            self.policy
                .quasi_band
                .map_or_else(|| "none".to_string(), |b| b.to_string()),
        );
        line(
            "policy.adaptive_mutation",
            self.policy.adaptive_mutation.to_string(),
        );
        line("policy.rate_min", self.policy.rate_bounds.0.to_string());
        line("policy.rate_max", self.policy.rate_bounds.1.to_string());
        line("run.replications", self.replications.to_string());
        line("run.budget", self.budget.to_string());
        line("run.seed", self.base_seed.to_string());
        line("run.workers", self.workers.to_string());
        line("run.traces", self.record_traces.to_string());
        if let Some(dir) = &self.output_dir {
            line("output.dir", dir.display().to_string());
        }
        s
    }

    /// Parses the flat format, rejecting unknown keys, duplicate keys, and
    /// malformed values. The result is validated.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut entries: HashMap<String, String> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {lineno}: expected 'key = value', got '{line}'"))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("line {lineno}: duplicate key '{key}'")));
            }
        }

        let mut take = |key: &str| entries.remove(key);
        fn parse_as<T: std::str::FromStr>(key: &str, value: String) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse::<T>()
                .map_err(|e| Error::Config(format!("{key}: {e}")))
        }

        let kind = take("problem.kind")
            .ok_or_else(|| Error::Config("missing required key problem.kind".into()))?;
        let problem = match kind.as_str() {
            "parity" => ProblemConfig::Parity {
                bits: take("problem.bits")
                    .map_or(Ok(6), |v| parse_as("problem.bits", v))?,
            },
            "dynamic" => ProblemConfig::Dynamic {
                bits: take("problem.bits")
                    .map_or(Ok(5), |v| parse_as("problem.bits", v))?,
                epochs: take("problem.epochs")
                    .map_or(Ok(10), |v| parse_as("problem.epochs", v))?,
                epoch_length: take("problem.epoch_length")
                    .map_or(Ok(100_000), |v| parse_as("problem.epoch_length", v))?,
                flips: take("problem.flips")
                    .map_or(Ok(4), |v| parse_as("problem.flips", v))?,
            },
            "pagie" => ProblemConfig::Pagie {
                grid: take("problem.grid")
                    .map_or(Ok(false), |v| parse_as("problem.grid", v))?,
                samples: take("problem.samples")
                    .map_or(Ok(676), |v| parse_as("problem.samples", v))?,
            },
            other => {
                return Err(Error::Config(format!(
                    "problem.kind must be parity, dynamic, or pagie, got '{other}'"
                )))
            }
        };

        let mut policy = SelectionPolicy::es(
            take("policy.lambda").map_or(Ok(4), |v| parse_as("policy.lambda", v))?,
            take("policy.mut_rate").map_or(Ok(0.02), |v| parse_as("policy.mut_rate", v))?,
        );
        policy.prefer_larger = take("policy.prefer_larger")
            .map_or(Ok(false), |v| parse_as("policy.prefer_larger", v))?;
        policy.quasi_band = match take("policy.quasi_band") {
            None => None,
            Some(v) if v == "none" => None,
            Some(v) => Some(parse_as("policy.quasi_band", v)?),
        };
        policy.adaptive_mutation = take("policy.adaptive_mutation")
            .map_or(Ok(false), |v| parse_as("policy.adaptive_mutation", v))?;
        policy.rate_bounds = (
            take("policy.rate_min")
                .map_or(Ok(DEFAULT_RATE_BOUNDS.0), |v| parse_as("policy.rate_min", v))?,
            take("policy.rate_max")
                .map_or(Ok(DEFAULT_RATE_BOUNDS.1), |v| parse_as("policy.rate_max", v))?,
        );

        let config = ExperimentConfig {
            problem,
            num_nodes: take("genome.nodes").map_or(Ok(100), |v| parse_as("genome.nodes", v))?,
            policy,
            replications: take("run.replications")
                .map_or(Ok(30), |v| parse_as("run.replications", v))?,
            budget: take("run.budget").map_or(Ok(1_000_000), |v| parse_as("run.budget", v))?,
            base_seed: take("run.seed").map_or(Ok(1), |v| parse_as("run.seed", v))?,
            workers: take("run.workers").map_or(Ok(0), |v| parse_as("run.workers", v))?,
            record_traces: take("run.traces")
                .map_or(Ok(false), |v| parse_as("run.traces", v))?,
            output_dir: take("output.dir").map(PathBuf::from),
        };

        if let Some(unknown) = entries.keys().next() {
            return Err(Error::Config(format!("unknown key '{unknown}'")));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn read_file(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
