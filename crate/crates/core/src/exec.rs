//! Program evaluation over boolean and real function sets.
//!
//! Boolean programs are evaluated bit-parallel: 64 input patterns per machine
//! word, one word lane per address. Real programs are evaluated sample by
//! sample over caller-supplied input columns. Both paths walk only the active
//! nodes of a decoded phenotype, in ascending address order.

use std::cell::RefCell;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::genome::{Chromosome, Phenotype};

/// The two node function repertoires. Both are binary and have four entries,
/// so the function gene range is identical across problem domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionSet {
    /// AND, NAND, OR, NOR.
    Boolean,
    /// Addition, subtraction, multiplication, protected division.
    Real,
}

impl FunctionSet {
    pub fn len(&self) -> usize {
        4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn name(&self) -> &'static str {
        match self {
            FunctionSet::Boolean => "boolean",
            FunctionSet::Real => "real",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "boolean" => Ok(FunctionSet::Boolean),
            "real" => Ok(FunctionSet::Real),
            other => Err(Error::Input(format!("unknown function set '{other}'"))),
        }
    }

    pub fn function_name(&self, index: usize) -> &'static str {
        match self {
            FunctionSet::Boolean => ["and", "nand", "or", "nor"][index],
            FunctionSet::Real => ["add", "sub", "mul", "div"][index],
        }
    }
}

/// Divisors smaller than this in magnitude make division return 1.0 instead
/// of exploding.
pub const DIV_GUARD: f64 = 1e-10;

/// Scalar boolean function application.
#[inline]
pub fn bool_fn(index: usize, a: bool, b: bool) -> bool {
    match index {
        0 => a & b,
        1 => !(a & b),
        2 => a | b,
        3 => !(a | b),
        _ => unreachable!("function index {index} out of range"),
    }
}

/// Word-parallel boolean function application, 64 patterns at once.
#[inline]
pub fn bool_fn_word(index: usize, a: u64, b: u64) -> u64 {
    match index {
        0 => a & b,
        1 => !(a & b),
        2 => a | b,
        3 => !(a | b),
        _ => unreachable!("function index {index} out of range"),
    }
}

/// Real function application with protected division.
#[inline]
pub fn real_fn(index: usize, a: f64, b: f64) -> f64 {
    match index {
        0 => a + b,
        1 => a - b,
        2 => a * b,
        3 => {
            if b.abs() < DIV_GUARD {
                1.0
            } else {
                a / b
            }
        }
        _ => unreachable!("function index {index} out of range"),
    }
}

/// A single program value, for callers that mix domains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Bit(bool),
    Real(f64),
}

/// Checked scalar application: validates the function index and that the
/// argument types match the set's domain.
pub fn apply_function(set: FunctionSet, index: usize, a: Value, b: Value) -> Result<Value> {
    if index >= set.len() {
        return Err(Error::Input(format!(
            "function index {index} out of range for {} set of {}",
            set.name(),
            set.len()
        )));
    }
    match (set, a, b) {
        (FunctionSet::Boolean, Value::Bit(a), Value::Bit(b)) => {
            Ok(Value::Bit(bool_fn(index, a, b)))
        }
        (FunctionSet::Real, Value::Real(a), Value::Real(b)) => {
            Ok(Value::Real(real_fn(index, a, b)))
        }
        _ => Err(Error::Input(format!(
            "argument types do not match the {} function set",
            set.name()
        ))),
    }
}

/// Word of input `input` at word index `word`: bit `j` holds the value of
/// that input under pattern `word * 64 + j`, where pattern bits enumerate the
/// truth table in canonical order (input `i` toggles with period `2^i`).
///
/// The first six inputs toggle within a word and are fixed masks; beyond
/// that, an input is constant across a whole word.
#[inline]
pub(crate) fn input_word(input: usize, word: usize) -> u64 {
    const MASKS: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    if input < 6 {
        MASKS[input]
    } else if (word >> (input - 6)) & 1 == 1 {
        !0
    } else {
        0
    }
}

/// Word count covering `num_patterns` packed bits.
#[inline]
pub(crate) fn word_count(num_patterns: usize) -> usize {
    num_patterns.div_ceil(64)
}

/// Mask selecting the valid bits of the final word; all-ones when the
/// pattern count fills it exactly.
#[inline]
pub(crate) fn tail_mask(num_patterns: usize) -> u64 {
    match num_patterns % 64 {
        0 => !0,
        r => (1u64 << r) - 1,
    }
}

thread_local! {
    static BOOL_SCRATCH: RefCell<Vec<u64>> = const { RefCell::new(Vec::new()) };
    static REAL_SCRATCH: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

fn with_bool_scratch<R>(len: usize, f: impl FnOnce(&mut [u64]) -> R) -> R {
    BOOL_SCRATCH.with(|cell| {
        let mut scratch = cell.borrow_mut();
        scratch.clear();
        scratch.resize(len, 0);
        f(&mut scratch)
    })
}

fn with_real_scratch<R>(len: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    REAL_SCRATCH.with(|cell| {
        let mut scratch = cell.borrow_mut();
        scratch.clear();
        scratch.resize(len, 0.0);
        f(&mut scratch)
    })
}

/// Packed truth table of every program output over all `2^num_inputs`
/// patterns. Trailing bits of the last word are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitTable {
    pub num_patterns: usize,
    /// One word vector per program output.
    pub outputs: Vec<Vec<u64>>,
}

impl BitTable {
    pub fn get(&self, output: usize, pattern: usize) -> bool {
        (self.outputs[output][pattern / 64] >> (pattern % 64)) & 1 == 1
    }
}

/// Program outputs over a fixed sample list, one column per output.
#[derive(Clone, Debug, PartialEq)]
pub struct RealTable {
    pub num_samples: usize,
    pub outputs: Vec<Vec<f64>>,
}

/// Behavior of a chromosome over a pattern source, in either domain.
#[derive(Clone, Debug, PartialEq)]
pub enum OutputTable {
    Bits(BitTable),
    Reals(RealTable),
}

impl OutputTable {
    pub fn fingerprint(&self) -> Fingerprint {
        match self {
            OutputTable::Bits(t) => {
                let mut h = Sha256::new();
                h.update(b"bits");
                h.update((t.outputs.len() as u32).to_le_bytes());
                h.update((t.num_patterns as u64).to_le_bytes());
                for words in &t.outputs {
                    for w in words {
                        h.update(w.to_le_bytes());
                    }
                }
                Fingerprint(h.finalize().into())
            }
            OutputTable::Reals(t) => {
                let mut h = Sha256::new();
                h.update(b"real");
                h.update((t.outputs.len() as u32).to_le_bytes());
                h.update((t.num_samples as u64).to_le_bytes());
                for col in &t.outputs {
                    for &x in col {
                        h.update(canonical_f64_bits(x).to_le_bytes());
                    }
                }
                Fingerprint(h.finalize().into())
            }
        }
    }
}

/// Collapses NaN payloads and the sign of zero so numerically identical
/// behaviors hash identically.
fn canonical_f64_bits(x: f64) -> u64 {
    if x.is_nan() {
        f64::NAN.to_bits()
    } else if x == 0.0 {
        0.0f64.to_bits()
    } else {
        x.to_bits()
    }
}

/// Content hash of an output table; equal tables hash equal, and any
/// single-bit behavioral difference separates them.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for byte in &self.0 {
            write!(f, "{byte:02x}")?;
        }
        Ok(())
    }
}

/// Evaluates one boolean input assignment. Inactive nodes are skipped; their
/// lanes stay zero and are never read.
pub fn eval_bool_single(chrom: &Chromosome, phen: &Phenotype, inputs: &[bool]) -> Vec<bool> {
    let spec = chrom.spec();
    assert_eq!(inputs.len(), spec.num_inputs, "input arity mismatch");
    let mut values = vec![false; spec.num_addresses()];
    values[..spec.num_inputs].copy_from_slice(inputs);
    for &node in &phen.active_node_indices {
        let a = values[chrom.input_of(node, 0)];
        let b = values[chrom.input_of(node, 1)];
        values[spec.num_inputs + node] = bool_fn(chrom.function_of(node), a, b);
    }
    (0..spec.num_outputs)
        .map(|o| values[chrom.output_address(o)])
        .collect()
}

/// Evaluates one real input assignment.
pub fn eval_real_single(chrom: &Chromosome, phen: &Phenotype, inputs: &[f64]) -> Vec<f64> {
    let spec = chrom.spec();
    assert_eq!(inputs.len(), spec.num_inputs, "input arity mismatch");
    let mut values = vec![0.0f64; spec.num_addresses()];
    values[..spec.num_inputs].copy_from_slice(inputs);
    for &node in &phen.active_node_indices {
        let a = values[chrom.input_of(node, 0)];
        let b = values[chrom.input_of(node, 1)];
        values[spec.num_inputs + node] = real_fn(chrom.function_of(node), a, b);
    }
    (0..spec.num_outputs)
        .map(|o| values[chrom.output_address(o)])
        .collect()
}

/// Full truth table of a boolean chromosome, 64 patterns per word.
pub fn eval_bool_table(chrom: &Chromosome, phen: &Phenotype) -> BitTable {
    let spec = chrom.spec();
    assert!(
        spec.num_inputs <= 20,
        "truth table over {} inputs is too large",
        spec.num_inputs
    );
    let num_patterns = 1usize << spec.num_inputs;
    let words = word_count(num_patterns);
    let mut outputs = vec![vec![0u64; words]; spec.num_outputs];
    with_bool_scratch(spec.num_addresses(), |values| {
        for w in 0..words {
            for (i, v) in values.iter_mut().enumerate().take(spec.num_inputs) {
                *v = input_word(i, w);
            }
            for &node in &phen.active_node_indices {
                let a = values[chrom.input_of(node, 0)];
                let b = values[chrom.input_of(node, 1)];
                values[spec.num_inputs + node] = bool_fn_word(chrom.function_of(node), a, b);
            }
            for (o, out) in outputs.iter_mut().enumerate() {
                out[w] = values[chrom.output_address(o)];
            }
        }
    });
    let mask = tail_mask(num_patterns);
    for out in &mut outputs {
        if let Some(last) = out.last_mut() {
            *last &= mask;
        }
    }
    BitTable {
        num_patterns,
        outputs,
    }
}

/// Counts patterns where the single program output differs from the packed
/// target words. The fast path of boolean fitness: no output table is built.
///
/// `target_words` must cover exactly `2^num_inputs` patterns with zeroed
/// trailing bits.
pub fn eval_bool_wrong_bits(chrom: &Chromosome, phen: &Phenotype, target_words: &[u64]) -> u64 {
    let spec = chrom.spec();
    assert_eq!(spec.num_outputs, 1, "fast path is single-output");
    let num_patterns = 1usize << spec.num_inputs;
    assert_eq!(target_words.len(), word_count(num_patterns));
    let mask = tail_mask(num_patterns);
    with_bool_scratch(spec.num_addresses(), |values| {
        let mut wrong = 0u64;
        for (w, &target) in target_words.iter().enumerate() {
            for (i, v) in values.iter_mut().enumerate().take(spec.num_inputs) {
                *v = input_word(i, w);
            }
            for &node in &phen.active_node_indices {
                let a = values[chrom.input_of(node, 0)];
                let b = values[chrom.input_of(node, 1)];
                values[spec.num_inputs + node] = bool_fn_word(chrom.function_of(node), a, b);
            }
            let mut diff = values[chrom.output_address(0)] ^ target;
            if w + 1 == target_words.len() {
                diff &= mask;
            }
            wrong += diff.count_ones() as u64;
        }
        wrong
    })
}

/// Evaluates a real chromosome over column-major input samples: one column
/// per problem input, all columns the same length.
pub fn eval_real_table(
    chrom: &Chromosome,
    phen: &Phenotype,
    input_columns: &[Vec<f64>],
) -> Result<RealTable> {
    let spec = chrom.spec();
    if input_columns.len() != spec.num_inputs {
        return Err(Error::Input(format!(
            "expected {} input columns, got {}",
            spec.num_inputs,
            input_columns.len()
        )));
    }
    let num_samples = input_columns.first().map_or(0, Vec::len);
    if input_columns.iter().any(|c| c.len() != num_samples) {
        return Err(Error::Input("input columns differ in length".into()));
    }
    let mut outputs = vec![Vec::with_capacity(num_samples); spec.num_outputs];
    with_real_scratch(spec.num_addresses(), |values| {
        for s in 0..num_samples {
            for (i, col) in input_columns.iter().enumerate() {
                values[i] = col[s];
            }
            for &node in &phen.active_node_indices {
                let a = values[chrom.input_of(node, 0)];
                let b = values[chrom.input_of(node, 1)];
                values[spec.num_inputs + node] = real_fn(chrom.function_of(node), a, b);
            }
            for (o, out) in outputs.iter_mut().enumerate() {
                out.push(values[chrom.output_address(o)]);
            }
        }
    });
    Ok(RealTable {
        num_samples,
        outputs,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::genome::{self, GenomeSpec};

    #[test]
    fn boolean_truth_tables() {
        let cases = [(false, false), (false, true), (true, false), (true, true)];
        for (a, b) in cases {
            assert_eq!(bool_fn(0, a, b), a && b);
            assert_eq!(bool_fn(1, a, b), !(a && b));
            assert_eq!(bool_fn(2, a, b), a || b);
            assert_eq!(bool_fn(3, a, b), !(a || b));
        }
    }

    #[test]
    fn word_functions_match_scalar_per_bit() {
        let mut r = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..50 {
            let a: u64 = r.gen();
            let b: u64 = r.gen();
            for f in 0..4 {
                let word = bool_fn_word(f, a, b);
                for bit in 0..64 {
                    let expect = bool_fn(f, (a >> bit) & 1 == 1, (b >> bit) & 1 == 1);
                    assert_eq!((word >> bit) & 1 == 1, expect);
                }
            }
        }
    }

    #[test]
    fn protected_division() {
        assert_eq!(real_fn(3, 6.0, 2.0), 3.0);
        assert_eq!(real_fn(3, 1.0, 0.0), 1.0);
        assert_eq!(real_fn(3, 42.0, 5e-11), 1.0);
        assert_eq!(real_fn(3, 0.0, -5e-11), 1.0);
        assert_eq!(real_fn(3, 1.0, -2.0), -0.5);
    }

    #[test]
    fn real_arithmetic() {
        assert_eq!(real_fn(0, 2.5, 0.5), 3.0);
        assert_eq!(real_fn(1, 2.5, 0.5), 2.0);
        assert_eq!(real_fn(2, 2.5, 0.5), 1.25);
    }

    #[test]
    fn apply_function_checks_index_and_types() {
        let bit = Value::Bit(true);
        let real = Value::Real(1.0);
        assert_eq!(
            apply_function(FunctionSet::Boolean, 2, bit, Value::Bit(false)).unwrap(),
            Value::Bit(true)
        );
        assert!(apply_function(FunctionSet::Boolean, 4, bit, bit).is_err());
        assert!(apply_function(FunctionSet::Boolean, 0, bit, real).is_err());
        assert!(apply_function(FunctionSet::Real, 0, bit, bit).is_err());
        assert_eq!(
            apply_function(FunctionSet::Real, 2, real, Value::Real(4.0)).unwrap(),
            Value::Real(4.0)
        );
    }

    #[test]
    fn input_words_enumerate_patterns() {
        for n in 1..=8usize {
            let patterns = 1usize << n;
            for j in 0..patterns {
                for i in 0..n {
                    let expect = (j >> i) & 1 == 1;
                    let got = (input_word(i, j / 64) >> (j % 64)) & 1 == 1;
                    assert_eq!(got, expect, "input {i}, pattern {j}");
                }
            }
        }
    }

    #[test]
    fn tail_masks() {
        assert_eq!(tail_mask(4), 0b1111);
        assert_eq!(tail_mask(64), !0);
        assert_eq!(tail_mask(128), !0);
        assert_eq!(word_count(4), 1);
        assert_eq!(word_count(64), 1);
        assert_eq!(word_count(65), 2);
        assert_eq!(word_count(256), 4);
    }

    #[test]
    fn xor_composition_truth_table() {
        let c = genome::xor_composition(4);
        let phen = genome::decode(&c);
        let table = eval_bool_table(&c, &phen);
        assert_eq!(table.num_patterns, 4);
        assert_eq!(table.outputs[0][0], 0b0110);
        for (pattern, expect) in [(0, false), (1, true), (2, true), (3, false)] {
            assert_eq!(table.get(0, pattern), expect);
            assert_eq!(
                eval_bool_single(&c, &phen, &[(pattern & 1) == 1, (pattern & 2) == 2]),
                vec![expect]
            );
        }
    }

    #[test]
    fn table_matches_single_pattern_eval() {
        let mut r = ChaCha8Rng::seed_from_u64(21);
        // Eight inputs exercises the constant-word path for inputs 6 and 7.
        for n in [2usize, 5, 8] {
            let spec = GenomeSpec::new(n, 24, 2, FunctionSet::Boolean).unwrap();
            for _ in 0..40 {
                let c = genome::random_chromosome(&spec, &mut r).unwrap();
                let phen = genome::decode(&c);
                let table = eval_bool_table(&c, &phen);
                for pattern in 0..(1usize << n) {
                    let bits: Vec<bool> = (0..n).map(|i| (pattern >> i) & 1 == 1).collect();
                    let single = eval_bool_single(&c, &phen, &bits);
                    for (o, &bit) in single.iter().enumerate() {
                        assert_eq!(table.get(o, pattern), bit, "pattern {pattern}");
                    }
                }
            }
        }
    }

    #[test]
    fn wrong_bits_agrees_with_table_diff() {
        let mut r = ChaCha8Rng::seed_from_u64(22);
        for n in [3usize, 6, 7] {
            let spec = GenomeSpec::new(n, 30, 1, FunctionSet::Boolean).unwrap();
            let patterns = 1usize << n;
            let words = word_count(patterns);
            for _ in 0..40 {
                let c = genome::random_chromosome(&spec, &mut r).unwrap();
                let phen = genome::decode(&c);
                let mut target: Vec<u64> = (0..words).map(|_| r.gen()).collect();
                *target.last_mut().unwrap() &= tail_mask(patterns);
                let table = eval_bool_table(&c, &phen);
                let expect: u64 = table.outputs[0]
                    .iter()
                    .zip(&target)
                    .map(|(a, b)| (a ^ b).count_ones() as u64)
                    .sum();
                assert_eq!(eval_bool_wrong_bits(&c, &phen, &target), expect);
            }
        }
    }

    #[test]
    fn real_table_matches_single_sample_eval() {
        let mut r = ChaCha8Rng::seed_from_u64(23);
        let spec = GenomeSpec::new(2, 16, 1, FunctionSet::Real).unwrap();
        let xs: Vec<f64> = (0..50).map(|_| r.gen_range(-5.0..5.0)).collect();
        let ys: Vec<f64> = (0..50).map(|_| r.gen_range(-5.0..5.0)).collect();
        let columns = vec![xs.clone(), ys.clone()];
        for _ in 0..40 {
            let c = genome::random_chromosome(&spec, &mut r).unwrap();
            let phen = genome::decode(&c);
            let table = eval_real_table(&c, &phen, &columns).unwrap();
            assert_eq!(table.num_samples, 50);
            for s in 0..50 {
                let single = eval_real_single(&c, &phen, &[xs[s], ys[s]]);
                assert_eq!(table.outputs[0][s].to_bits(), single[0].to_bits());
            }
        }
    }

    #[test]
    fn real_table_rejects_ragged_columns() {
        let spec = GenomeSpec::new(2, 4, 1, FunctionSet::Real).unwrap();
        let c = genome::random_chromosome(&spec, &mut ChaCha8Rng::seed_from_u64(24)).unwrap();
        let phen = genome::decode(&c);
        assert!(eval_real_table(&c, &phen, &[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(eval_real_table(&c, &phen, &[vec![1.0]]).is_err());
    }

    #[test]
    fn fingerprints_separate_behaviors() {
        let full = OutputTable::Bits(BitTable {
            num_patterns: 4,
            outputs: vec![vec![0b0110]],
        });
        let same = OutputTable::Bits(BitTable {
            num_patterns: 4,
            outputs: vec![vec![0b0110]],
        });
        let flipped = OutputTable::Bits(BitTable {
            num_patterns: 4,
            outputs: vec![vec![0b0111]],
        });
        assert_eq!(full.fingerprint(), same.fingerprint());
        assert_ne!(full.fingerprint(), flipped.fingerprint());
    }

    #[test]
    fn fingerprint_canonicalizes_nan_and_zero() {
        let nan_a = f64::from_bits(0x7ff8_0000_0000_0001);
        let nan_b = f64::from_bits(0xfff8_0000_0000_0002);
        let a = OutputTable::Reals(RealTable {
            num_samples: 2,
            outputs: vec![vec![nan_a, 0.0]],
        });
        let b = OutputTable::Reals(RealTable {
            num_samples: 2,
            outputs: vec![vec![nan_b, -0.0]],
        });
        let c = OutputTable::Reals(RealTable {
            num_samples: 2,
            outputs: vec![vec![1.0, 0.0]],
        });
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn bit_and_real_domains_hash_apart() {
        let bits = OutputTable::Bits(BitTable {
            num_patterns: 1,
            outputs: vec![vec![0]],
        });
        let reals = OutputTable::Reals(RealTable {
            num_samples: 0,
            outputs: vec![vec![]],
        });
        assert_ne!(bits.fingerprint(), reals.fingerprint());
    }
}
