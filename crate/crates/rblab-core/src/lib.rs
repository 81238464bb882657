//! Single-qubit randomized-benchmarking laboratory.
//!
//! The crate is organised bottom-up:
//!
//! * [`ptm`] — SU(2) pulses and their Pauli-Liouville (transfer-matrix) representation.
//! * [`gateset`] — the 24-element single-qubit Clifford group, its canonical labels,
//!   the 8-element NIST gateset, the two embedded 12-element 2-designs, and the Markov
//!   chain of aggregate NIST circuits.
//! * [`compile`] — Table-of-pulse-sets alphabets, minimal-cost pulse decompositions under
//!   three conventions, and pulse-level error models.
//! * [`theory`] — twirling, the NIST recursion matrix and its exact/perturbative spectra,
//!   averaged superoperators and the perturbed projector L.
//! * [`engine`] — sequence sampling, survival probabilities, seeded parallel experiment
//!   runs and exponential-decay fitting.
//! * [`sweep`] — infidelity comparison grids over error models and pulse rows.
//! * [`report`] — tiny table writer shared by the CSV/JSON exports.

pub mod compile;
pub mod engine;
pub mod gateset;
pub mod ptm;
pub mod report;
pub mod sweep;
pub mod theory;
