//! Inputs shared by the benchmarks.

use qcomb::comb::comb_spec;
use qcomb::sampler::{random_comb, Seed};
use qcomb::{AlgOperator, AlgebraShape, SupermapSpec};

/// `Comb(B_0, …, B_{L-1})` on `L` qubits.
pub fn qubit_combs(l: usize) -> SupermapSpec {
    comb_spec(&vec![AlgebraShape::full(2); l]).expect("qubit comb spec")
}

pub fn member(spec: &SupermapSpec, seed: u64) -> AlgOperator {
    random_comb(spec, Seed(seed)).expect("sampled member").0
}
