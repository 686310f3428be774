use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::AlgOperator;
use crate::tensor::Layout;

/// Gaussian element of the algebra of `l`, not Hermitian.
pub fn rand_op(l: &Layout, seed: u64) -> AlgOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let d = l.dim();
    let m = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    AlgOperator::from_trusted(l.clone(), m)
}

pub fn rand_herm(l: &Layout, seed: u64) -> AlgOperator {
    rand_op(l, seed).hermitian_part()
}

pub fn rand_positive(l: &Layout, seed: u64) -> AlgOperator {
    let g = rand_op(l, seed);
    g.compose(&g.adjoint()).unwrap()
}
