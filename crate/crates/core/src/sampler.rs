//! Seeded random states, channels, section elements, generalized
//! channels and combs.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::algebra::{min_eigenvalue, sqrt_positive, AlgOperator, AlgebraShape};
use crate::choi::{choi_of_fn, compose, CpMapChoi};
use crate::comb::SupermapSpec;
use crate::decompose::{LadderDecomposition, LadderStage};
use crate::error::{Error, Result};
use crate::gchannel::{simple_channel, SectionSpec};
use crate::tensor::{Factor, FactorLabel, Layout};
use crate::{CMat, Complex64};

/// Seed of a deterministic generator. Equal seeds give bit-identical
/// outputs on one build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// An independent seed for sub-task `i`.
    pub fn fork(self, i: u64) -> Seed {
        Seed(splitmix(self.0 ^ splitmix(i)))
    }
}

impl From<u64> for Seed {
    fn from(s: u64) -> Self {
        Seed(s)
    }
}

/// Matrix of independent standard complex normal entries.
pub fn ginibre(rows: usize, cols: usize, seed: Seed) -> CMat {
    let mut rng = seed.rng();
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// `rows × cols` matrix with orthonormal columns.
pub fn random_isometry(rows: usize, cols: usize, seed: Seed) -> Result<CMat> {
    if cols > rows || cols == 0 {
        return Err(Error::InvalidShape(format!("no {rows}x{cols} isometry")));
    }
    Ok(crate::dense::qr_positive(&ginibre(rows, cols, seed)).0)
}

pub fn random_unitary(d: usize, seed: Seed) -> Result<CMat> {
    random_isometry(d, d, seed)
}

/// Hermitian element of the algebra with Gaussian entries.
pub fn random_hermitian(layout: &Layout, seed: Seed) -> AlgOperator {
    let d = layout.dim();
    let g = ginibre(d, d, seed);
    AlgOperator::from_trusted(layout.clone(), (&g + g.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Faithful state: the block compression of `g g*` for Gaussian `g`.
pub fn random_state(layout: &Layout, seed: Seed) -> AlgOperator {
    let d = layout.dim();
    let g = ginibre(d, d, seed);
    let p = AlgOperator::from_trusted(layout.clone(), &g * g.adjoint());
    let t = p.trace_re();
    p.scale(1.0 / t)
}

/// Channel `T(a) = E_B(Tr_r V a V*)` from a random Stinespring isometry
/// `V: C^{D_in} → C^{D_out} ⊗ C^r`, with `E_B` the block compression.
pub fn random_channel(input: &Layout, output: &Layout, kraus_rank: usize, seed: Seed) -> Result<CpMapChoi> {
    let (di, do_) = (input.dim(), output.dim());
    if kraus_rank == 0 || do_ * kraus_rank < di {
        return Err(Error::InvalidShape(format!(
            "no channel {di} -> {do_} with Kraus rank {kraus_rank}"
        )));
    }
    let v = random_isometry(do_ * kraus_rank, di, seed)?;
    let r = kraus_rank;
    choi_of_fn(input, output, |a| {
        let big = &v * a.matrix() * v.adjoint();
        let m = CMat::from_fn(do_, do_, |i, j| (0..r).map(|k| big[(i * r + k, j * r + k)]).sum());
        Ok(AlgOperator::from_trusted(output.clone(), m))
    })
}

/// Largest `t` with `a + t·h ⪰ 0`, capped at `2^20`: doubling, then 40
/// bisection steps.
pub(crate) fn max_weight(a: &AlgOperator, h: &AlgOperator, tol: f64) -> Result<f64> {
    let ok = |t: f64| -> Result<bool> { Ok(min_eigenvalue(&(a + &(h * t)), tol)? >= 0.0) };
    let mut hi = 1.0;
    while ok(hi)? {
        hi *= 2.0;
        if hi > 1048576.0 {
            return Ok(hi);
        }
    }
    let mut lo = 0.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `ρ + t h_0` with `h_0` a random traceless direction in `[K]` and `t`
/// half the largest weight keeping positivity.
pub fn random_section_element(spec: &SectionSpec, seed: Seed) -> Result<AlgOperator> {
    let rho = spec.reference_state().hermitian_part();
    if min_eigenvalue(&rho, crate::DEFAULT_TOL)? < -crate::DEFAULT_TOL {
        return Err(Error::NotPositive(min_eigenvalue(&rho, crate::DEFAULT_TOL)?));
    }
    let h = random_hermitian(spec.layout(), seed);
    let p = spec.span().project(&h)?.hermitian_part();
    let h0 = &p - &rho.scale(p.trace_re());
    if h0.norm() == 0.0 {
        return Ok(rho);
    }
    let t = max_weight(&rho, &h0, crate::DEFAULT_TOL)?;
    Ok(&rho + &(&h0 * (0.5 * t)))
}

/// Random simple element `c ∈ (s^{-1} I + [K]^⊥) ∩ A^+`.
pub fn random_simple_element(spec: &SectionSpec, seed: Seed) -> Result<AlgOperator> {
    let i = AlgOperator::identity(spec.layout()).scale(1.0 / spec.scale());
    let h = random_hermitian(spec.layout(), seed);
    let perp = (&h - &spec.span().project(&h)?).hermitian_part();
    if perp.norm() <= 1e-12 {
        return Ok(i);
    }
    let t = max_weight(&i, &perp, crate::DEFAULT_TOL)?;
    Ok(&i + &(&perp * (0.5 * t)))
}

/// `Λ ∘ χ_c` with a random simple element `c` and random channel `Λ`.
pub fn random_generalized_channel(spec: &SectionSpec, output: &Layout, seed: Seed) -> Result<CpMapChoi> {
    let c = random_simple_element(spec, seed.fork(0))?;
    let l = spec.layout();
    let start = l.max_label().unwrap_or(0).max(output.max_label().unwrap_or(0)) + 1;
    let mid: Vec<FactorLabel> = (0..l.len() as u32).map(|k| FactorLabel(start + k)).collect();
    let chi = simple_channel(&c, &mid, crate::DEFAULT_TOL)?;
    let rank = (l.dim() + output.dim() - 1) / output.dim();
    let lam = random_channel(l, output, rank.max(2), seed.fork(1))?;
    compose(&lam, &chi)
}

/// A member of `spec` built from random chained channels with ancillas
/// of dimension 2, and the ladder that produced it.
pub fn random_comb(spec: &SupermapSpec, seed: Seed) -> Result<(AlgOperator, LadderDecomposition)> {
    random_comb_with_ancilla(spec, 2, seed)
}

pub fn random_comb_with_ancilla(
    spec: &SupermapSpec,
    dd: usize,
    seed: Seed,
) -> Result<(AlgOperator, LadderDecomposition)> {
    let n = spec.level();
    let k = n / 2;
    let top = spec.layout(n);
    let start = top.max_label().map_or(0, |m| m + 1);
    let ancillas: Vec<FactorLabel> = (0..=k as u32).map(|m| FactorLabel(start + m)).collect();
    let dl = |m: usize| Layout::single(ancillas[m].0, AlgebraShape::full(if n <= 1 { 1 } else { dd }));
    let base = spec.layout(0);
    let initial = if n % 2 == 1 {
        let out = dl(0).concat(&spec.factor_layout(1))?;
        random_generalized_channel(spec.base(), &out, seed.fork(0))?.into_choi()
    } else {
        let sigma = random_section_element(spec.base(), seed.fork(0))?;
        let z = random_channel(base, &dl(0), base.dim().div_ceil(dl(0).dim()).max(2), seed.fork(1))?.into_choi();
        let s = crate::tensor::identity_tensor(&dl(0), &sqrt_positive(&sigma, crate::DEFAULT_TOL)?)?;
        s.compose(&z)?.compose(&s)?
    };
    let off = n % 2;
    let mut stages = Vec::new();
    for m in 1..=k {
        let b_in = 2 * m - 1 + off;
        let input = spec.factor_layout(b_in).concat(&dl(m - 1))?;
        let output = dl(m).concat(&spec.factor_layout(b_in + 1))?;
        let lower = spec.layout(b_in - 1).clone();
        let mut blocks = Vec::new();
        for (i, s) in lower.sectors().into_iter().enumerate() {
            let r = input.dim().div_ceil(output.dim()).max(2);
            let ch = random_channel(&input, &output, r, seed.fork(100 * m as u64 + i as u64 + 2))?;
            blocks.push((s.blocks, ch));
        }
        stages.push(LadderStage {
            input,
            output,
            lower,
            blocks,
        });
    }
    let lad = LadderDecomposition {
        level: n,
        ancilla_dim: if n <= 1 { 1 } else { dd },
        ancillas,
        initial,
        stages,
    };
    let x = lad.recompose(spec)?;
    Ok((x, lad))
}

/// Random PVM: projections onto consecutive groups of columns of a
/// random unitary.
pub fn random_pvm(layout: &Layout, sizes: &[usize], seed: Seed) -> Result<Vec<AlgOperator>> {
    if layout.sectors().len() != 1 {
        return Err(Error::InvalidShape("random PVMs need a full matrix algebra".into()));
    }
    let u = random_unitary(layout.dim(), seed)?;
    crate::gchannel::pvm_from_columns(layout, &u, sizes)
}

/// A random probability vector with all entries positive.
pub fn random_distribution(m: usize, seed: Seed) -> Vec<f64> {
    let mut rng = seed.rng();
    let v: Vec<f64> = (0..m)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x.abs() + 0.1
        })
        .collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// A random unit vector.
pub fn random_vector(d: usize, seed: Seed) -> DVector<Complex64> {
    let g = ginibre(d, 1, seed);
    let n = g.norm();
    DVector::from_iterator(d, g.iter().map(|z| z / n))
}

/// Factors `B(C^d)` labeled `first, first+1, …`.
pub fn qudit_chain(first: u32, dims: &[usize]) -> Vec<Factor> {
    dims.iter()
        .enumerate()
        .map(|(i, &d)| Factor::new(first + i as u32, AlgebraShape::full(d)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choi::{is_channel, is_cp, is_tp};
    use crate::comb::{build_spec, membership_by_chain, membership_by_subspace};
    use crate::gchannel::is_generalized_channel;
    use crate::subspace::section_contains;

    fn qubit() -> Layout {
        Layout::single(0, AlgebraShape::full(2))
    }

    #[test]
    fn states_and_channels_are_valid() {
        let l = Layout::single(0, AlgebraShape::new(vec![2, 1]).unwrap());
        let o = Layout::single(1, AlgebraShape::new(vec![1, 2]).unwrap());
        for s in 0..20 {
            let r = random_state(&l, Seed(s));
            assert!(section_contains(&crate::Subspace::full(&l), &r, 1e-10).unwrap());
            let c = random_channel(&l, &o, 2, Seed(s)).unwrap();
            assert!(is_cp(&c, 1e-10).unwrap() && is_tp(&c, 1e-10).unwrap());
        }
    }

    #[test]
    fn rank_one_square_channel_is_unitary() {
        let o = Layout::single(1, AlgebraShape::full(2));
        let c = random_channel(&qubit(), &o, 1, Seed(4)).unwrap();
        let k = crate::choi::kraus(&c, 1e-10).unwrap();
        assert_eq!(k.len(), 1);
        assert!((k[0].adjoint() * &k[0] - CMat::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn determinism() {
        let a = random_state(&qubit(), Seed(9));
        let b = random_state(&qubit(), Seed(9));
        assert_eq!(a.matrix(), b.matrix());
        assert_ne!(Seed(9).fork(1), Seed(9).fork(2));
    }

    #[test]
    fn section_elements_and_generalized_channels() {
        let spec = SectionSpec::channels(Factor::new(1, AlgebraShape::full(2)), Factor::new(0, AlgebraShape::full(2))).unwrap();
        let out = Layout::single(2, AlgebraShape::full(2));
        for s in 0..20 {
            let x = random_section_element(&spec, Seed(s)).unwrap();
            assert!(section_contains(spec.subspace(), &x, 1e-9).unwrap());
            let g = random_generalized_channel(&spec, &out, Seed(s)).unwrap();
            assert!(is_generalized_channel(&g, &spec, 1e-9).unwrap());
        }
        let full = SectionSpec::full(&qubit());
        let g = random_generalized_channel(&full, &out, Seed(1)).unwrap();
        assert!(is_channel(&g, 1e-9).unwrap());
    }

    #[test]
    fn random_combs_are_members() {
        let base = SectionSpec::full(&qubit());
        for n in 1..=3 {
            let spec = build_spec(&base, qudit_chain(1, &vec![2; n])).unwrap();
            for s in 0..5 {
                let (x, lad) = random_comb(&spec, Seed(s)).unwrap();
                assert!(membership_by_chain(&x, &spec, 1e-9).unwrap().holds, "n={n}");
                assert!(membership_by_subspace(&x, &spec, 1e-9).unwrap().holds, "n={n}");
                assert!(lad.stages_are_channels(1e-10).unwrap());
            }
        }
    }
}
