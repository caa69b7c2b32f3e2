//! Weighted sampling of satisfying assignments through probabilistic
//! OBDD[∧] diagrams.
//!
//! The pipeline is: parse a CNF formula ([`cnf`]), compile it into a
//! diagram ([`compiler`]), smooth and parameterize the diagram ([`prob`]),
//! then draw weighted samples in one bottom-up pass ([`sampler`]). New
//! weights only require re-parameterization, so repeated rounds reuse the
//! compiled structure. [`oracle`] provides brute-force ground truth for
//! small formulas.
//!
//! ```
//! use prob_sampler::cnf::{parse_dimacs, WeightFunction};
//! use prob_sampler::compiler::{compile, VariableOrdering};
//!
//! let f = parse_dimacs("p cnf 3 2\n1 2 0\n-1 -3 0\n").unwrap();
//! let mut prob = compile(&f, &VariableOrdering::natural(3)).unwrap().smooth();
//! prob.parameterize(&WeightFunction::polarity(3, 0.75, 0.25).unwrap()).unwrap();
//! let batch = prob_sampler::sampler::sample(&prob, 1000, 7).unwrap();
//! assert!(batch.iter().all(|a| f.evaluate(&a).unwrap()));
//! ```

pub mod cnf;
pub mod compiler;
pub mod generate;
pub mod oracle;
pub mod prob;
pub mod sampler;
mod varset;

pub use varset::VarSet;
