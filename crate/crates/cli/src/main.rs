//! `cgp`: run, sweep, and analyze evolution experiments from the shell.
//!
//! Subcommands mirror the library harness: `run` and `dynamic` execute one
//! experiment, `sweep` scans mutation rates against brood sizes, `analyze`
//! probes stored chromosomes, and `stats` compares two exported batches.
//! Every run is reproducible from its seed; flags override config files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cgp_core::analysis;
use cgp_core::genome;
use cgp_core::harness::{
    self, export, stats, ExperimentConfig, ProblemConfig, StatSummary,
};
use cgp_core::problems::Problem;

#[derive(Parser)]
#[command(name = "cgp", version, about = "Evolve and analyze program graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replications of a static benchmark and report aggregates.
    Run(RunArgs),
    /// Run replications against a target that moves every epoch.
    Dynamic(DynamicArgs),
    /// Run one experiment per (mutation rate, lambda) pair.
    Sweep(SweepArgs),
    /// Probe stored chromosomes: size, robustness, neutral variability.
    Analyze(AnalyzeArgs),
    /// Rank-sum comparison of a column across two exported batches.
    Stats(StatsArgs),
}

/// Flags shared by every experiment-launching subcommand. Unset flags leave
/// the config file (or default) value in place; boolean flags only switch
/// their feature on.
#[derive(Args)]
struct CommonArgs {
    /// Config file in the flat key = value format.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed for the replication sequence.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Evaluation budget per replication.
    #[arg(long)]
    budget: Option<u64>,
    /// Offspring per generation.
    #[arg(long)]
    lambda: Option<usize>,
    /// Mutation rate (fraction of genes redrawn).
    #[arg(long)]
    mut_rate: Option<f64>,
    /// Prefer larger candidates on fitness ties.
    #[arg(long)]
    pl: bool,
    /// Quasi-stability band around the generation best; implies --pl.
    #[arg(long)]
    quasi_band: Option<f64>,
    /// Adapt the mutation rate with a one-fifth style rule.
    #[arg(long)]
    am: bool,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long)]
    workers: Option<usize>,
    /// Record per-generation traces.
    #[arg(long)]
    traces: bool,
    /// Genome nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Export directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    /// Loads the config file or falls back to `fresh`, then applies flag
    /// overrides.
    fn build(&self, fresh: ProblemConfig) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::read_file(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::new(fresh),
        };
        if let Some(seed) = self.seed {
            config.base_seed = seed;
        }
        if let Some(reps) = self.reps {
            config.replications = reps;
        }
        if let Some(budget) = self.budget {
            config.budget = budget;
        }
        if let Some(lambda) = self.lambda {
            config.policy.lambda = lambda;
        }
        if let Some(rate) = self.mut_rate {
            config.policy.initial_mutation_rate = rate;
        }
        if self.pl {
            config.policy.prefer_larger = true;
        }
        if let Some(band) = self.quasi_band {
            config.policy.prefer_larger = true;
            config.policy.quasi_band = Some(band);
        }
        if self.am {
            config.policy.adaptive_mutation = true;
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        if self.traces {
            config.record_traces = true;
        }
        if let Some(nodes) = self.nodes {
            config.num_nodes = nodes;
        }
        if let Some(out) = &self.out {
            config.output_dir = Some(out.clone());
        }
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Benchmark: parity or pagie (ignored with --config).
    #[arg(long, default_value = "parity")]
    problem: String,
    /// Input count for boolean problems.
    #[arg(long)]
    bits: Option<usize>,
    /// Use the fixed 26 x 26 lattice instead of sampling (pagie).
    #[arg(long)]
    grid: bool,
    /// Sample count per replication (pagie).
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct DynamicArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Input count of the random boolean target.
    #[arg(long)]
    bits: Option<usize>,
    /// Number of target epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Generations per epoch.
    #[arg(long)]
    epoch_length: Option<u64>,
    /// Target bits flipped at each epoch boundary.
    #[arg(long)]
    flips: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Benchmark: parity or pagie (ignored with --config).
    #[arg(long, default_value = "parity")]
    problem: String,
    /// Input count for boolean problems.
    #[arg(long)]
    bits: Option<usize>,
    /// Mutation rates to scan.
    #[arg(long, value_delimiter = ',', required = true)]
    rates: Vec<f64>,
    /// Brood sizes to scan.
    #[arg(long, value_delimiter = ',', required = true)]
    lambdas: Vec<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Chromosome file in the line format (for example an exported
    /// chromosomes_solved.txt).
    #[arg(long)]
    chromosomes: PathBuf,
    /// Problem to score against: parity or pagie.
    #[arg(long, default_value = "parity")]
    problem: String,
    /// Input count for parity.
    #[arg(long, default_value_t = 6)]
    bits: usize,
    /// Use the fixed lattice for pagie.
    #[arg(long)]
    grid: bool,
    /// Mutants drawn per robustness probe.
    #[arg(long, default_value_t = 1000)]
    probe_samples: u64,
    /// Mutation rate of the probe.
    #[arg(long, default_value_t = 0.02)]
    probe_rate: f64,
    /// Steps of the fitness-preserving walk (0 skips it).
    #[arg(long, default_value_t = 0)]
    walk_steps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct StatsArgs {
    /// First replications.csv export.
    #[arg(long)]
    a: PathBuf,
    /// Second replications.csv export.
    #[arg(long)]
    b: PathBuf,
    /// Column to compare: evaluations, generations, final_fitness,
    /// functional_size, or active_links.
    #[arg(long, default_value = "evaluations")]
    column: String,
    /// Keep only rows with solved = true.
    #[arg(long)]
    solved_only: bool,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Dynamic(args) => dynamic(args),
        Command::Sweep(args) => sweep(args),
        Command::Analyze(args) => analyze(args),
        Command::Stats(args) => stats_cmd(args),
    }
}

fn fresh_problem(name: &str, bits: Option<usize>, grid: bool, samples: Option<usize>) -> Result<ProblemConfig> {
    match name {
        "parity" => Ok(ProblemConfig::Parity {
            bits: bits.unwrap_or(6),
        }),
        "pagie" => Ok(ProblemConfig::Pagie {
            grid,
            samples: samples.unwrap_or(676),
        }),
        other => bail!("unknown problem '{other}' (expected parity or pagie)"),
    }
}

fn print_summary_line(name: &str, summary: Option<&StatSummary>) {
    match summary {
        Some(s) => println!(
            "{name}: n={} median={} q1={} q3={} mean={:.4}",
            s.n, s.median, s.q1, s.q3, s.mean
        ),
        None => println!("{name}: no data"),
    }
}

fn finish(config: &ExperimentConfig, summary: &harness::ExperimentSummary) -> Result<()> {
    let agg = &summary.aggregate;
    println!(
        "method={} problem={} replications={} solved={}/{} success={:.2}",
        agg.method,
        config.problem.kind_name(),
        agg.replications,
        agg.solved,
        agg.replications,
        agg.success_fraction
    );
    print_summary_line("evaluations (solved)", agg.evaluations_solved.as_ref());
    print_summary_line("functional size (solved)", agg.functional_size_solved.as_ref());
    if let Some(recovery) = &agg.recovery {
        println!(
            "recovery: changes={} recovered={} fraction={:.2}",
            recovery.changes_observed, recovery.changes_recovered, recovery.recovered_fraction
        );
        print_summary_line("recovery generations", recovery.recovery_generations.as_ref());
    }
    if let Some(dir) = &config.output_dir {
        export::export_summary(summary, dir)?;
        println!("exported to {}", dir.display());
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let fresh = fresh_problem(&args.problem, args.bits, args.grid, args.samples)?;
    let mut config = args.common.build(fresh)?;
    // Without --config the fresh problem already carries the flags; with it
    // the flags act as overrides on whatever the file declared.
    if args.common.config.is_some() {
        if let Some(bits) = args.bits {
            if let ProblemConfig::Parity { bits: b } | ProblemConfig::Dynamic { bits: b, .. } =
                &mut config.problem
            {
                *b = bits;
            }
        }
        if let ProblemConfig::Pagie { grid, samples } = &mut config.problem {
            if args.grid {
                *grid = true;
            }
            if let Some(s) = args.samples {
                *samples = s;
            }
        }
    }
    let summary = harness::run_replications(&config)?;
    finish(&config, &summary)
}

fn dynamic(args: DynamicArgs) -> Result<()> {
    let fresh = ProblemConfig::Dynamic {
        bits: args.bits.unwrap_or(5),
        epochs: args.epochs.unwrap_or(10),
        epoch_length: args.epoch_length.unwrap_or(100_000),
        flips: args.flips.unwrap_or(4),
    };
    let mut config = args.common.build(fresh)?;
    match &mut config.problem {
        ProblemConfig::Dynamic {
            bits,
            epochs,
            epoch_length,
            flips,
        } => {
            if let Some(v) = args.bits {
                *bits = v;
            }
            if let Some(v) = args.epochs {
                *epochs = v;
            }
            if let Some(v) = args.epoch_length {
                *epoch_length = v;
            }
            if let Some(v) = args.flips {
                *flips = v;
            }
        }
        other => bail!(
            "the dynamic subcommand needs a dynamic problem, config has {}",
            other.kind_name()
        ),
    }
    let summary = harness::run_replications(&config)?;
    finish(&config, &summary)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let fresh = fresh_problem(&args.problem, args.bits, false, None)?;
    let config = args.common.build(fresh)?;
    let report = harness::sweep_grid(&config, &args.rates, &args.lambdas)?;
    let csv = report.to_csv();
    match &config.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join("sweep.csv");
            std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
            println!("{} cells -> {}", report.cells.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn analyze_problem(args: &AnalyzeArgs) -> Result<Problem> {
    match args.problem.as_str() {
        "parity" => Ok(Problem::parity(args.bits)?),
        "pagie" => {
            if args.grid {
                Ok(Problem::regression(cgp_core::problems::pagie_grid()))
            } else {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
                Ok(Problem::regression(cgp_core::problems::pagie_sampled(
                    676, &mut rng,
                )?))
            }
        }
        other => bail!("unknown problem '{other}' (expected parity or pagie)"),
    }
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    use rand::SeedableRng;
    let problem = analyze_problem(&args)?;
    let chromosomes = genome::read_chromosome_file(&args.chromosomes)?;
    if chromosomes.is_empty() {
        bail!("{} holds no chromosomes", args.chromosomes.display());
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    for (index, chrom) in chromosomes.iter().enumerate() {
        let phen = genome::decode(chrom);
        let fitness = problem.fitness_of(chrom, &phen);
        let size = analysis::size_report(chrom);
        let robustness =
            analysis::robustness_probe(&problem, chrom, args.probe_rate, args.probe_samples, &mut rng)?;
        let walk = if args.walk_steps > 0 {
            Some(analysis::variability_walk(
                &problem,
                chrom,
                args.walk_steps,
                &mut rng,
            )?)
        } else {
            None
        };
        let report = serde_json::json!({
            "index": index,
            "fitness": fitness.value,
            "optimal": problem.is_optimal(&fitness),
            "size": size,
            "robustness": robustness,
            "walk": walk.map(|w| serde_json::json!({
                "steps": w.steps,
                "accepted": w.accepted,
                "unique_behaviors": w.unique_behaviors,
            })),
        });
        println!("{report}");
    }
    Ok(())
}

/// Pulls one numeric column out of a replications.csv export.
fn read_column(path: &Path, column: &str, solved_only: bool) -> Result<Vec<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .with_context(|| format!("{} is empty", path.display()))?
        .split(',')
        .collect();
    let col = header
        .iter()
        .position(|&h| h == column)
        .with_context(|| format!("{} has no column '{column}'", path.display()))?;
    let solved_col = header.iter().position(|&h| h == "solved");
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if solved_only {
            let sc = solved_col.with_context(|| format!("{} has no solved column", path.display()))?;
            if fields.get(sc).copied() != Some("true") {
                continue;
            }
        }
        let raw = fields
            .get(col)
            .with_context(|| format!("{}:{}: missing field {column}", path.display(), i + 2))?;
        values.push(raw.parse::<f64>().with_context(|| {
            format!("{}:{}: bad number '{raw}'", path.display(), i + 2)
        })?);
    }
    Ok(values)
}

fn stats_cmd(args: StatsArgs) -> Result<()> {
    let a = read_column(&args.a, &args.column, args.solved_only)?;
    let b = read_column(&args.b, &args.column, args.solved_only)?;
    let result = stats::mann_whitney_u(&a, &b)?;
    let median = |xs: &[f64]| {
        StatSummary::from_values(xs).map_or("n/a".to_string(), |s| s.median.to_string())
    };
    println!("a: n={} median={}", a.len(), median(&a));
    println!("b: n={} median={}", b.len(), median(&b));
    println!(
        "column={} U={} p={} method={}",
        args.column,
        result.u_a,
        result.p_two_sided,
        match result.method {
            stats::PMethod::Exact => "exact",
            stats::PMethod::NormalApprox => "normal",
        }
    );
    Ok(())
}
