//! Integer-vector genome encoding a feed-forward program graph.
//!
//! A chromosome is a fixed-length vector of integer genes. Each node owns one
//! function gene plus `node_arity` input genes; a trailing block of output
//! genes selects which addresses feed the program outputs. Addresses form a
//! single space: problem inputs occupy `0..num_inputs`, node `i` sits at
//! `num_inputs + i`, and a node may only consume addresses strictly below its
//! own (full feed-forward connectivity).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::FunctionSet;

/// Dimensions and function set of a genome; shared by every chromosome of an
/// experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenomeSpec {
    pub num_inputs: usize,
    pub num_nodes: usize,
    pub num_outputs: usize,
    pub function_set: FunctionSet,
    pub node_arity: usize,
}

impl GenomeSpec {
    /// Standard spec: binary nodes over the given function set.
    pub fn new(
        num_inputs: usize,
        num_nodes: usize,
        num_outputs: usize,
        function_set: FunctionSet,
    ) -> Result<Self> {
        let spec = GenomeSpec {
            num_inputs,
            num_nodes,
            num_outputs,
            function_set,
            node_arity: 2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_inputs == 0 || self.num_nodes == 0 || self.num_outputs == 0 {
            return Err(Error::Config(format!(
                "genome dimensions must be nonzero (inputs={}, nodes={}, outputs={})",
                self.num_inputs, self.num_nodes, self.num_outputs
            )));
        }
        if self.node_arity != 2 {
            return Err(Error::Config(format!(
                "node arity must be 2 for the binary function sets (got {})",
                self.node_arity
            )));
        }
        Ok(())
    }

    pub fn genes_per_node(&self) -> usize {
        1 + self.node_arity
    }

    pub fn total_genes(&self) -> usize {
        self.num_nodes * self.genes_per_node() + self.num_outputs
    }

    /// Size of the unified address space (inputs followed by nodes).
    pub fn num_addresses(&self) -> usize {
        self.num_inputs + self.num_nodes
    }

    pub fn function_gene_pos(&self, node: usize) -> usize {
        node * self.genes_per_node()
    }

    pub fn input_gene_pos(&self, node: usize, slot: usize) -> usize {
        debug_assert!(slot < self.node_arity);
        node * self.genes_per_node() + 1 + slot
    }

    pub fn output_gene_pos(&self, output: usize) -> usize {
        self.num_nodes * self.genes_per_node() + output
    }

    /// Exclusive upper bound on the legal values of the gene at `pos`.
    ///
    /// Function genes draw from the function list; input genes of node `i`
    /// draw from the addresses preceding node `i`; output genes draw from the
    /// whole address space.
    pub fn gene_bound(&self, pos: usize) -> u32 {
        let node_block = self.num_nodes * self.genes_per_node();
        if pos < node_block {
            let node = pos / self.genes_per_node();
            if pos.is_multiple_of(self.genes_per_node()) {
                self.function_set.len() as u32
            } else {
                (self.num_inputs + node) as u32
            }
        } else {
            debug_assert!(pos < self.total_genes());
            self.num_addresses() as u32
        }
    }
}

/// A fixed-length integer genome over a [`GenomeSpec`].
///
/// Immutable after construction; mutation produces a fresh chromosome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chromosome {
    spec: GenomeSpec,
    genes: Vec<u32>,
}

impl Chromosome {
    /// Builds a chromosome from a flat gene vector, checking every gene
    /// against its legal range.
    pub fn from_genes(spec: GenomeSpec, genes: Vec<u32>) -> Result<Self> {
        spec.validate()?;
        if genes.len() != spec.total_genes() {
            return Err(Error::Input(format!(
                "expected {} genes, got {}",
                spec.total_genes(),
                genes.len()
            )));
        }
        for (pos, &g) in genes.iter().enumerate() {
            let bound = spec.gene_bound(pos);
            if g >= bound {
                return Err(Error::Input(format!(
                    "gene {pos} = {g} out of range [0, {})",
                    bound
                )));
            }
        }
        Ok(Chromosome { spec, genes })
    }

    pub fn spec(&self) -> &GenomeSpec {
        &self.spec
    }

    pub fn genes(&self) -> &[u32] {
        &self.genes
    }

    /// Function index of node `node`.
    pub fn function_of(&self, node: usize) -> usize {
        self.genes[self.spec.function_gene_pos(node)] as usize
    }

    /// Address consumed by input slot `slot` of node `node`.
    pub fn input_of(&self, node: usize, slot: usize) -> usize {
        self.genes[self.spec.input_gene_pos(node, slot)] as usize
    }

    /// Address wired to program output `output`.
    pub fn output_address(&self, output: usize) -> usize {
        self.genes[self.spec.output_gene_pos(output)] as usize
    }

    /// Copy with one gene replaced; the value must be legal for the position.
    pub(crate) fn with_gene(&self, pos: usize, value: u32) -> Chromosome {
        debug_assert!(value < self.spec.gene_bound(pos));
        let mut clone = self.clone();
        clone.genes[pos] = value;
        clone
    }
}

/// Decoded view of a chromosome: the nodes that actually contribute to some
/// program output, in ascending address order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phenotype {
    /// Indices (not addresses) of active nodes, ascending.
    pub active_node_indices: Vec<usize>,
    /// Input connections entering active nodes, counting links to problem
    /// inputs as well as to other nodes.
    pub active_links: usize,
    /// Number of active nodes.
    pub functional_size: usize,
}

/// Draws every gene uniformly from its legal range.
pub fn random_chromosome(spec: &GenomeSpec, rng: &mut impl Rng) -> Result<Chromosome> {
    spec.validate()?;
    let genes = (0..spec.total_genes())
        .map(|pos| rng.gen_range(0..spec.gene_bound(pos)))
        .collect();
    Ok(Chromosome { spec: *spec, genes })
}

/// Number of genes redrawn by a mutation at `rate`: at least one, otherwise
/// the rounded fraction of the genome.
pub fn mutation_gene_count(total_genes: usize, rate: f64) -> usize {
    ((rate * total_genes as f64).round() as usize).max(1)
}

/// Redraws `max(1, round(rate * total_genes))` distinct gene positions
/// uniformly from their legal ranges. A redrawn gene may land on its old
/// value, so the offspring can be genotypically closer to the parent than the
/// redraw count suggests.
pub fn mutate(parent: &Chromosome, rate: f64, rng: &mut impl Rng) -> Result<Chromosome> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Config(format!(
            "mutation rate must be in (0, 1], got {rate}"
        )));
    }
    let total = parent.spec.total_genes();
    let k = mutation_gene_count(total, rate);
    let mut child = parent.clone();
    for pos in rand::seq::index::sample(rng, total, k) {
        child.genes[pos] = rng.gen_range(0..parent.spec.gene_bound(pos));
    }
    Ok(child)
}

/// Computes the active subgraph by walking backward from the output genes.
///
/// A node is active iff its address is reachable from some output; output
/// genes pointing straight at problem inputs need no nodes at all.
pub fn decode(chrom: &Chromosome) -> Phenotype {
    let spec = chrom.spec();
    let mut active = vec![false; spec.num_nodes];
    let mut stack: Vec<usize> = Vec::new();
    for o in 0..spec.num_outputs {
        let addr = chrom.output_address(o);
        if addr >= spec.num_inputs {
            stack.push(addr - spec.num_inputs);
        }
    }
    while let Some(node) = stack.pop() {
        if active[node] {
            continue;
        }
        active[node] = true;
        for slot in 0..spec.node_arity {
            let addr = chrom.input_of(node, slot);
            if addr >= spec.num_inputs && !active[addr - spec.num_inputs] {
                stack.push(addr - spec.num_inputs);
            }
        }
    }
    let active_node_indices: Vec<usize> = (0..spec.num_nodes).filter(|&i| active[i]).collect();
    let functional_size = active_node_indices.len();
    Phenotype {
        active_node_indices,
        active_links: spec.node_arity * functional_size,
        functional_size,
    }
}

/// One chromosome per line: the [`GenomeSpec`] fields, then the flat gene
/// sequence, all whitespace-separated.
pub fn format_chromosome(chrom: &Chromosome) -> String {
    let spec = chrom.spec();
    let mut line = format!(
        "{} {} {} {} {}",
        spec.num_inputs,
        spec.num_nodes,
        spec.num_outputs,
        spec.node_arity,
        spec.function_set.name()
    );
    for &g in chrom.genes() {
        write!(line, " {g}").expect("writing to a String cannot fail");
    }
    line
}

/// Parses one line of [`format_chromosome`] output, validating all genes.
pub fn parse_chromosome(line: &str) -> Result<Chromosome> {
    let mut tokens = line.split_whitespace();
    let mut next_count = |name: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Input(format!("chromosome record missing {name}")))?
            .parse::<usize>()
            .map_err(|e| Error::Input(format!("bad {name}: {e}")))
    };
    let num_inputs = next_count("input count")?;
    let num_nodes = next_count("node count")?;
    let num_outputs = next_count("output count")?;
    let node_arity = next_count("node arity")?;
    let set_name = tokens
        .next()
        .ok_or_else(|| Error::Input("chromosome record missing function set".into()))?;
    let function_set = FunctionSet::from_name(set_name)?;
    let spec = GenomeSpec {
        num_inputs,
        num_nodes,
        num_outputs,
        function_set,
        node_arity,
    };
    let genes = tokens
        .map(|t| {
            t.parse::<u32>()
                .map_err(|e| Error::Input(format!("bad gene '{t}': {e}")))
        })
        .collect::<Result<Vec<u32>>>()?;
    Chromosome::from_genes(spec, genes)
}

/// Writes chromosomes newline-delimited in the line format.
pub fn write_chromosome_file(path: &Path, chromosomes: &[Chromosome]) -> Result<()> {
    let mut text = String::new();
    for c in chromosomes {
        text.push_str(&format_chromosome(c));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a newline-delimited chromosome file, reporting the offending line on
/// parse failures. Blank lines and `#` comments are skipped.
pub fn read_chromosome_file(path: &Path) -> Result<Vec<Chromosome>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_chromosome(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// n0 = OR(in0, in1), n1 = NAND(in0, in1), n2 = AND(n0, n1); the familiar
/// three-gate XOR composition over the boolean set [AND, NAND, OR, NOR].
#[cfg(test)]
pub(crate) fn xor_composition(output_addr: u32) -> Chromosome {
    let spec = GenomeSpec::new(2, 3, 1, FunctionSet::Boolean).unwrap();
    Chromosome::from_genes(
        spec,
        vec![
            2, 0, 1, // n0 (address 2): OR(in0, in1)
            1, 0, 1, // n1 (address 3): NAND(in0, in1)
            0, 2, 3, // n2 (address 4): AND(n0, n1)
            output_addr,
        ],
    )
    .unwrap()
}
