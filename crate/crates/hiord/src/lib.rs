//! hiord: a verifier for higher-order (constraint) logic programs with
//! predicate-property assertions.
//!
//! Programs are Horn-clause programs extended with higher-order atoms
//! `X(t1,...,tn)` whose callee is a variable bound at runtime to a predicate
//! name. Assertions describe call and success conditions of predicates with
//! formulas over property predicates; predicate properties package anonymous
//! assertions that can be required of predicate-valued arguments.
//!
//! The pipeline: parse ([`parser`]), derive assertion conditions
//! ([`assertions`]), run the concrete semantics for oracles and witnesses
//! ([`engine`], [`oracle`]), abstract into a regular-type or finite-lattice
//! domain ([`domain`]), analyze ([`analysis`]), decide abstract conformance
//! of predicates to properties ([`conformance`]), and verify whole programs
//! by the conformance fixpoint ([`verifier`]). [`report`] renders results,
//! [`cli`] wires up the command line.

pub mod analysis;
pub mod assertions;
pub mod cli;
pub mod conformance;
pub mod domain;
pub mod engine;
pub mod oracle;
pub mod parser;
pub mod report;
pub mod store;
pub mod syntax;
pub mod verifier;
