//! Cartesian genetic programming engine with preferential selection of
//! larger solutions.
//!
//! The crate covers the full experimental loop: genome representation and
//! mutation ([`genome`]), program evaluation over boolean and real function
//! sets ([`exec`]), benchmark problems and fitness ([`problems`]), the
//! (1+lambda) survivor policies including the size-preferring and
//! quasi-stable variants plus the adaptive mutation rate ([`selection`]),
//! genotype analysis instruments ([`analysis`]), and the replication harness
//! with its statistics and exports ([`harness`]).

pub mod analysis;
pub mod error;
pub mod exec;
pub mod genome;
pub mod harness;
pub mod problems;
pub mod selection;

pub use error::{Error, Result};
pub use exec::FunctionSet;
pub use genome::{Chromosome, GenomeSpec, Phenotype};
pub use problems::{Direction, Fitness, Problem};
pub use selection::{RunRecord, SelectionPolicy};
