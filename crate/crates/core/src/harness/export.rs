//! Structured export of experiment results.
//!
//! An export directory holds `summary.json` (the full `ExperimentSummary`),
//! `replications.csv` (one row per run), the final chromosomes in line
//! format (all runs, and the solved subset), per-replication trace CSVs when
//! tracing was on, `recovery.csv` for dynamic runs, and the regression
//! datasets when the problem has one. Exporting the same summary twice
//! produces byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::genome;
use crate::harness::{config::ProblemConfig, ExperimentSummary};
use crate::problems::Problem;

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn replications_csv(summary: &ExperimentSummary) -> String {
    let mut out = String::from(
        "rep,seed,method,solved,evaluations,generations,final_fitness,functional_size,active_links\n",
    );
    let method = summary.config.policy.label();
    for (i, r) in summary.records.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            i,
            summary.seeds[i],
            method,
            r.solved,
            r.evaluations_used,
            r.generations_used,
            r.best_fitness.value,
            r.functional_size,
            r.active_links
        )
        .expect("string write");
    }
    out
}

fn trace_csv(record: &crate::selection::RunRecord) -> String {
    let mut out = String::from("generation,best_fitness,functional_size,mutation_rate\n");
    for p in &record.trace {
        writeln!(
            out,
            "{},{},{},{}",
            p.generation, p.best_fitness, p.functional_size, p.mutation_rate
        )
        .expect("string write");
    }
    out
}

fn recovery_csv(summary: &ExperimentSummary) -> String {
    let mut out = String::from("rep,epoch,recovered,generations\n");
    for (i, r) in summary.records.iter().enumerate() {
        for (epoch, rec) in r.recovery_times.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                i,
                epoch,
                rec.is_some(),
                rec.map_or(String::new(), |g| g.to_string())
            )
            .expect("string write");
        }
    }
    out
}

/// Writes the full export tree for one experiment into `dir`, creating it if
/// needed.
pub fn export_summary(summary: &ExperimentSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let json = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Internal(format!("serializing summary: {e}")))?;
    write_text(&dir.join("summary.json"), &json)?;

    write_text(&dir.join("replications.csv"), &replications_csv(summary))?;

    let all: Vec<_> = summary
        .records
        .iter()
        .map(|r| r.final_chromosome.clone())
        .collect();
    genome::write_chromosome_file(&dir.join("chromosomes.txt"), &all)?;
    let solved: Vec<_> = summary
        .records
        .iter()
        .filter(|r| r.solved)
        .map(|r| r.final_chromosome.clone())
        .collect();
    genome::write_chromosome_file(&dir.join("chromosomes_solved.txt"), &solved)?;

    if summary.records.iter().any(|r| !r.trace.is_empty()) {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces).map_err(|e| Error::io(&traces, e))?;
        for (i, r) in summary.records.iter().enumerate() {
            write_text(&traces.join(format!("rep_{i}.csv")), &trace_csv(r))?;
        }
    }

    if summary.records.iter().any(|r| !r.recovery_times.is_empty()) {
        write_text(&dir.join("recovery.csv"), &recovery_csv(summary))?;
    }

    match summary.config.problem {
        ProblemConfig::Pagie { grid: true, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(summary.seeds[0]);
            if let Problem::Regression(data) = summary.config.build_problem(&mut rng)? {
                data.write_csv(&dir.join("dataset.csv"))?;
            }
        }
        ProblemConfig::Pagie { grid: false, .. } => {
            let datasets = dir.join("datasets");
            fs::create_dir_all(&datasets).map_err(|e| Error::io(&datasets, e))?;
            for (i, &seed) in summary.seeds.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                if let Problem::Regression(data) = summary.config.build_problem(&mut rng)? {
                    data.write_csv(&datasets.join(format!("rep_{i}.csv")))?;
                }
            }
        }
        _ => {}
    }
    Ok(())
}
