//! The tower of generalized supermaps over a section, with combs and
//! testers as the special case of the full state space.

use crate::algebra::{min_eigenvalue, AlgOperator, AlgebraShape};
use crate::choi::CpMapChoi;
use crate::error::{Error, Result};
use crate::gchannel::{check_generalized_channel, SectionSpec};
use crate::subspace::{
    identity_tensor_subspace, preimage_under_partial_trace, section_contains, tilde, Subspace,
};
use crate::tensor::{identity_tensor, link_product, partial_trace, permute, Factor, FactorLabel, Layout};
use crate::{rel, CMat};

/// Largest total dimension of `A_n` accepted by [`build_spec`].
pub const DEFAULT_BUDGET: usize = 64;

/// `𝒞_K(B_0, …, B_n)`: the base section `K` on `B_0` and the chain
/// `B_1, …, B_n`. Level `i` lives on `A_i = B_i ⊗ … ⊗ B_1 ⊗ B_0`.
#[derive(Clone, Debug)]
pub struct SupermapSpec {
    base: SectionSpec,
    chain: Vec<Factor>,
    layouts: Vec<Layout>,
    j: Vec<Subspace>,
}

impl SupermapSpec {
    /// The top level `n`.
    pub fn level(&self) -> usize {
        self.chain.len()
    }

    pub fn base(&self) -> &SectionSpec {
        &self.base
    }

    pub fn chain(&self) -> &[Factor] {
        &self.chain
    }

    /// `A_i`.
    pub fn layout(&self, i: usize) -> &Layout {
        &self.layouts[i]
    }

    /// `J_i`.
    pub fn subspace(&self, i: usize) -> &Subspace {
        &self.j[i]
    }

    /// Layout of `B_i`; for `i = 0` the (possibly multi-factor) base.
    pub fn factor_layout(&self, i: usize) -> Layout {
        if i == 0 {
            self.base.layout().clone()
        } else {
            Layout::new(vec![self.chain[i - 1].clone()]).expect("single factor")
        }
    }

    pub fn factor_labels(&self, i: usize) -> Vec<FactorLabel> {
        self.factor_layout(i).labels()
    }

    /// `t_{B_i}`.
    pub fn unit_trace(&self, i: usize) -> f64 {
        self.factor_layout(i).dim() as f64
    }

    /// `c_i = Π_{l=0}^{⌊(i-1)/2⌋} t_{B_{i-1-2l}}`, with `c_0 = 1`.
    pub fn constant(&self, i: usize) -> f64 {
        if i == 0 {
            return 1.0;
        }
        (0..=(i - 1) / 2).map(|l| self.unit_trace(i - 1 - 2 * l)).product()
    }

    /// The same tower cut at level `n`.
    pub fn truncated(&self, n: usize) -> SupermapSpec {
        SupermapSpec {
            base: self.base.clone(),
            chain: self.chain[..n].to_vec(),
            layouts: self.layouts[..=n].to_vec(),
            j: self.j[..=n].to_vec(),
        }
    }
}

/// Chain factors for the given shapes, labeled after the base labels.
pub fn chain_factors(base: &Layout, shapes: &[AlgebraShape]) -> Vec<Factor> {
    let start = base.max_label().map_or(0, |m| m + 1);
    shapes
        .iter()
        .enumerate()
        .map(|(i, s)| Factor::new(start + i as u32, s.clone()))
        .collect()
}

pub fn build_spec(base: &SectionSpec, chain: Vec<Factor>) -> Result<SupermapSpec> {
    build_spec_with_budget(base, chain, DEFAULT_BUDGET, crate::DEFAULT_TOL)
}

/// Builds `J_i = S_i^{-1}(tilde J_{i-1})` with `S_i = Tr_{B_i}`, from
/// `J_0 = [K]`. The base is always used normalized.
pub fn build_spec_with_budget(
    base: &SectionSpec,
    chain: Vec<Factor>,
    budget: usize,
    tol: f64,
) -> Result<SupermapSpec> {
    if !base.tau_in_k() {
        return Err(Error::violation(
            "supermaps need the tracial state in the base section",
            base.subspace().distance(&AlgOperator::tracial_state(base.layout()))?,
        ));
    }
    let base = base.normalized();
    let mut layouts = vec![base.layout().clone()];
    for f in &chain {
        let l = Layout::new(vec![f.clone()])?.concat(layouts.last().unwrap())?;
        layouts.push(l);
    }
    let top = layouts.last().unwrap().dim();
    if top > budget {
        return Err(Error::Budget { dim: top, budget });
    }
    let mut j = vec![base.span().clone()];
    for (i, f) in chain.iter().enumerate() {
        let t = tilde(&j[i], tol)?;
        j.push(preimage_under_partial_trace(&layouts[i + 1], &[f.label], &t, tol)?);
    }
    let spec = SupermapSpec {
        base,
        chain,
        layouts,
        j,
    };
    let n = spec.level();
    if n >= 2 {
        let c = closed_form_subspace(&spec, n, tol)?;
        let d = c.projector_distance(&spec.j[n])?;
        if d > 1e-6 {
            return Err(Error::Numerical(format!(
                "recursive and closed-form J_{n} differ by {d:e}"
            )));
        }
    }
    Ok(spec)
}

/// `J_n` from the alternating closed form: `S_n^{-1} S_{n-1}^* S_{n-2}^{-1} …`
/// applied to `tilde J` for odd `n` and to `J` for even `n`.
pub fn closed_form_subspace(spec: &SupermapSpec, n: usize, tol: f64) -> Result<Subspace> {
    if n == 0 {
        return Ok(spec.j[0].clone());
    }
    let mut l = if n % 2 == 1 {
        tilde(&spec.j[0], tol)?
    } else {
        spec.j[0].clone()
    };
    for m in 1..=n {
        let label = spec.chain[m - 1].label;
        l = if (n - m) % 2 == 0 {
            preimage_under_partial_trace(&spec.layouts[m], &[label], &l, tol)?
        } else {
            identity_tensor_subspace(&spec.factor_layout(m), &l, tol)?
        };
    }
    Ok(l)
}

/// Bring `x` onto `target`: same layout, a permutation of its labels, or
/// the same shapes under other labels.
pub fn to_layout(x: &AlgOperator, target: &Layout) -> Result<AlgOperator> {
    if x.layout() == target {
        return Ok(x.clone());
    }
    let mut a = x.layout().labels();
    let mut b = target.labels();
    a.sort();
    b.sort();
    if a == b {
        let p = permute(x, &target.labels())?;
        if p.layout() == target {
            return Ok(p);
        }
    }
    x.on_layout(target)
}

/// Result of a subspace-based membership test.
#[derive(Clone, Debug, PartialEq)]
pub struct Membership {
    pub holds: bool,
    pub min_eigenvalue: f64,
    pub subspace_residual: f64,
    pub trace: f64,
    pub expected_trace: f64,
}

/// `X ⪰ 0`, `X ∈ J_n` and `Tr X = c_n`, at the top level of `spec`.
pub fn membership_by_subspace(x: &AlgOperator, spec: &SupermapSpec, tol: f64) -> Result<Membership> {
    let n = spec.level();
    let x = to_layout(x, spec.layout(n))?;
    let h = x.check_hermitian(tol)?;
    let lo = min_eigenvalue(&h, tol)?;
    let r = spec.j[n].distance(&x)?;
    let c = spec.constant(n);
    let t = x.trace_re();
    let holds = lo >= -rel(tol, x.norm())
        && r <= rel(tol, x.norm())
        && (x.trace() - crate::Complex64::new(c, 0.0)).norm() <= rel(tol, c);
    Ok(Membership {
        holds,
        min_eigenvalue: lo,
        subspace_residual: r,
        trace: t,
        expected_trace: c,
    })
}

/// Rungs `Y^(0) = X, Y^(1), …` of the chain characterization, with the
/// residual of each reconstruction `Tr_{B_{n-2m}} Y^(m) = I ⊗ Y^(m+1)`.
#[derive(Clone, Debug)]
pub struct ChainWitness {
    pub holds: bool,
    pub rungs: Vec<AlgOperator>,
    pub residuals: Vec<f64>,
    pub terminal_residual: f64,
    pub min_eigenvalue: f64,
    /// Index `m` of the first failing rung, or the terminal index.
    pub failed_rung: Option<usize>,
    pub reason: Option<String>,
}

pub fn membership_by_chain(x: &AlgOperator, spec: &SupermapSpec, tol: f64) -> Result<ChainWitness> {
    let n = spec.level();
    let x = to_layout(x, spec.layout(n))?;
    let h = x.check_hermitian(tol)?;
    let lo = min_eigenvalue(&h, tol)?;
    let mut w = ChainWitness {
        holds: true,
        rungs: vec![h.clone()],
        residuals: vec![],
        terminal_residual: 0.0,
        min_eigenvalue: lo,
        failed_rung: None,
        reason: None,
    };
    if lo < -rel(tol, h.norm()) {
        w.holds = false;
        w.failed_rung = Some(0);
        w.reason = Some(format!("not positive (minimum eigenvalue {lo:e})"));
        return Ok(w);
    }
    let mut y = h;
    let mut level = n;
    let mut m = 0;
    while level >= 2 {
        let t = partial_trace(&y, &spec.factor_labels(level))?;
        let t2 = partial_trace(&t, &spec.factor_labels(level - 1))?;
        let next = t2.scale(1.0 / spec.unit_trace(level - 1));
        let recon = identity_tensor(&spec.factor_layout(level - 1), &next)?;
        let r = (t.matrix() - recon.matrix()).norm();
        w.residuals.push(r);
        if r > rel(tol, t.norm()) {
            w.holds = false;
            w.failed_rung = Some(m);
            w.reason = Some(format!(
                "rung {m}: Tr_B{level} Y is not I ⊗ Y' (residual {r:e})"
            ));
            return Ok(w);
        }
        w.rungs.push(next.clone());
        y = next;
        level -= 2;
        m += 1;
    }
    let (ok, r) = if level == 1 {
        let map = CpMapChoi::new(
            spec.layout(0).clone(),
            spec.factor_layout(1),
            y.clone(),
        )?;
        let c = check_generalized_channel(&map, &spec.base, tol)?;
        (c.holds, c.residual)
    } else {
        let ok = section_contains(spec.base.subspace(), &y, tol)?;
        (ok, spec.base.subspace().distance(&y)? + (y.trace_re() - 1.0).abs())
    };
    w.terminal_residual = r;
    if !ok {
        w.holds = false;
        w.failed_rung = Some(m);
        w.reason = Some(if level == 1 {
            format!("terminal rung {m} is not a generalized channel (residual {r:e})")
        } else {
            format!("terminal rung {m} is not in the base section (residual {r:e})")
        });
    }
    Ok(w)
}

/// Spec of `Comb(B_0, …, B_{L-1})`, labels `0, …, L-1`.
pub fn comb_spec(shapes: &[AlgebraShape]) -> Result<SupermapSpec> {
    let (first, rest) = shapes
        .split_first()
        .ok_or_else(|| Error::ShapeMismatch("no factors".into()))?;
    let base = SectionSpec::full(&Layout::single(0, first.clone()));
    let chain = rest
        .iter()
        .enumerate()
        .map(|(i, s)| Factor::new(i as u32 + 1, s.clone()))
        .collect();
    build_spec(&base, chain)
}

/// Spec of the testers `𝒞(B_0, …, B_{2N-1}, C^m)`.
pub fn tester_spec(shapes: &[AlgebraShape], m: usize) -> Result<SupermapSpec> {
    let mut s = shapes.to_vec();
    s.push(AlgebraShape::classical(m));
    comb_spec(&s)
}

fn check_even(shapes: &[AlgebraShape]) -> Result<()> {
    if shapes.is_empty() || shapes.len() % 2 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "a comb needs an even number of factors, got {}",
            shapes.len()
        )));
    }
    Ok(())
}

pub fn is_comb(x: &AlgOperator, shapes: &[AlgebraShape], tol: f64) -> Result<bool> {
    check_even(shapes)?;
    Ok(membership_by_subspace(x, &comb_spec(shapes)?, tol)?.holds)
}

pub fn is_tester(x: &AlgOperator, shapes: &[AlgebraShape], m: usize, tol: f64) -> Result<bool> {
    check_even(shapes)?;
    Ok(membership_by_subspace(x, &tester_spec(shapes, m)?, tol)?.holds)
}

fn require_member(x: &AlgOperator, spec: &SupermapSpec, tol: f64, what: &str) -> Result<AlgOperator> {
    let n = spec.level();
    let x = to_layout(x, spec.layout(n))?;
    if n == 0 {
        if !section_contains(spec.base.subspace(), &x, tol)? {
            return Err(Error::violation(
                format!("{what} is not in the base section"),
                spec.base.subspace().distance(&x)?,
            ));
        }
        return Ok(x);
    }
    let m = membership_by_subspace(&x, spec, tol)?;
    if !m.holds {
        return Err(Error::violation(
            format!("{what} is not a level-{n} member"),
            m.subspace_residual
                .max((m.trace - m.expected_trace).abs())
                .max(-m.min_eigenvalue),
        ));
    }
    Ok(x)
}

/// `Φ_Y(X) = Y * X`, after checking `Y ∈ 𝒞(B_0..B_{n+1})` and
/// `X ∈ 𝒞(B_0..B_n)`. The result is a state on `B_{n+1}`.
pub fn apply_supermap(
    y: &AlgOperator,
    x: &AlgOperator,
    spec_y: &SupermapSpec,
    tol: f64,
) -> Result<AlgOperator> {
    let n1 = spec_y.level();
    if n1 == 0 {
        return Err(Error::ShapeMismatch("supermap spec has level 0".into()));
    }
    let y = require_member(y, spec_y, tol, "supermap")?;
    let x = require_member(x, &spec_y.truncated(n1 - 1), tol, "argument")?;
    link_product(&y, &x)
}

fn sector_projector(l: &Layout, indices: &[usize]) -> AlgOperator {
    let d = l.dim();
    let mut m = CMat::zeros(d, d);
    for &i in indices {
        m[(i, i)] = crate::Complex64::new(1.0, 0.0);
    }
    AlgOperator::from_trusted(l.clone(), m)
}

/// `⊕_i Σ_I ((q_i ⊗ q(I))Y) * (q(I)X)` over the minimal central
/// projections `q_i` of `B_{n+1}` and `q(I)` of `A_n`. No membership checks.
pub fn apply_supermap_blockwise(
    y: &AlgOperator,
    x: &AlgOperator,
    spec_y: &SupermapSpec,
) -> Result<AlgOperator> {
    let n1 = spec_y.level();
    let y = to_layout(y, spec_y.layout(n1))?;
    let x = to_layout(x, spec_y.layout(n1 - 1))?;
    let out_l = spec_y.factor_layout(n1);
    let mut acc = AlgOperator::zeros(&out_l);
    for si in out_l.sectors() {
        let qi = sector_projector(&out_l, &si.indices);
        for sec in x.layout().sectors() {
            let q = sector_projector(x.layout(), &sec.indices);
            let p = crate::tensor::tensor(&qi, &q)?;
            let yb = p.compose(&y)?;
            let xb = q.compose(&x)?;
            acc = &acc + &link_product(&yb, &xb)?;
        }
    }
    Ok(acc)
}

/// `(Σ_i ‖x * w_i^T‖²)^{1/2}`: the norm of the component of `x` along
/// `(rest) ⊗ W` for an orthonormal Hermitian basis `w_i` of `W`.
pub(crate) fn component_along(x: &AlgOperator, w_basis: &[AlgOperator]) -> Result<f64> {
    let mut s = 0.0;
    for w in w_basis {
        s += link_product(x, &w.transpose())?.matrix().norm_squared();
    }
    Ok(s.sqrt())
}

/// `X_1 - X_2 ∈ B_n ⊗ (J_{n-1}^T)^⊥`, returned as the size of the
/// offending component.
pub fn supermap_equivalence_residual(
    x1: &AlgOperator,
    x2: &AlgOperator,
    spec: &SupermapSpec,
) -> Result<f64> {
    let n = spec.level();
    if n == 0 {
        return Err(Error::ShapeMismatch("equivalence needs level ≥ 1".into()));
    }
    let a = to_layout(x1, spec.layout(n))?;
    let b = to_layout(x2, spec.layout(n))?;
    let d = a.try_sub(&b)?;
    component_along(&d, &spec.j[n - 1].transpose().basis())
}

pub fn supermap_equivalent(
    x1: &AlgOperator,
    x2: &AlgOperator,
    spec: &SupermapSpec,
    tol: f64,
) -> Result<bool> {
    require_member(x1, spec, tol, "first operator")?;
    require_member(x2, spec, tol, "second operator")?;
    let r = supermap_equivalence_residual(x1, x2, spec)?;
    Ok(r <= rel(tol, x1.norm().max(x2.norm())))
}

/// Outcome of an equivalence-respecting test.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub holds: bool,
    /// Component outside the subspace that characterizes the property.
    pub residual: f64,
    /// An independent characterization, when one applies.
    pub cross_check: Option<bool>,
}

/// Whether a level-`(n+1)` member takes equal values on equivalent
/// level-`n` members: `X ∈ B_{n+1} ⊗ B_n ⊗ J_{n-1}`.
pub fn respects_equivalence(x: &AlgOperator, spec: &SupermapSpec, tol: f64) -> Result<EquivalenceReport> {
    let top = spec.level();
    let x = require_member(x, spec, tol, "operator")?;
    if top < 2 {
        return Ok(EquivalenceReport {
            holds: true,
            residual: 0.0,
            cross_check: None,
        });
    }
    let n = top - 1;
    let perp = spec.j[n - 1].orthocomplement().basis();
    let r = component_along(&x, &perp)?;
    let holds = r <= rel(tol, x.norm());
    let full_base = spec.base.layout().len() == 1
        && spec.base.subspace().dim() == spec.base.subspace().ambient_dim();
    let permuted = if full_base {
        let b = |i: usize| -> Factor {
            if i == 0 {
                spec.base.layout().factors()[0].clone()
            } else {
                spec.chain[i - 1].clone()
            }
        };
        let order: Vec<usize> = if n % 2 == 0 {
            [n, n + 1].into_iter().chain(0..n).collect()
        } else {
            [0, n, n + 1].into_iter().chain(1..n).collect()
        };
        let base = SectionSpec::full(&Layout::new(vec![b(order[0])])?);
        let ps = build_spec_with_budget(
            &base,
            order[1..].iter().map(|&i| b(i)).collect(),
            usize::MAX,
            tol,
        )?;
        let px = to_layout(&x, ps.layout(ps.level()))?;
        Some(membership_by_subspace(&px, &ps, tol)?.holds)
    } else {
        None
    };
    Ok(EquivalenceReport {
        holds,
        residual: r,
        cross_check: permuted,
    })
}

/// `X_1 - X_2 ∈ B_{2N+1} ⊗ (Ĵ^T)^⊥ ⊗ B_0` for combs on `B_0, …, B_{2N+1}`,
/// where `Ĵ = J_{2N-1}(B_1, …, B_{2N})`.
pub fn comb_equivalence_residual(x1: &AlgOperator, x2: &AlgOperator, shapes: &[AlgebraShape]) -> Result<f64> {
    check_even(shapes)?;
    let spec = comb_spec(shapes)?;
    let top = spec.layout(spec.level()).clone();
    let d = to_layout(x1, &top)?.try_sub(&to_layout(x2, &top)?)?;
    if shapes.len() == 2 {
        return Ok(d.norm());
    }
    let inner = hat_spec(shapes, 1, shapes.len() - 2)?;
    component_along(&d, &inner.j[inner.level()].transpose().basis())
}

/// Tower over `B_from, …, B_to` with full base and the comb labels.
fn hat_spec(shapes: &[AlgebraShape], from: usize, to: usize) -> Result<SupermapSpec> {
    let base = SectionSpec::full(&Layout::single(from as u32, shapes[from].clone()));
    let chain = (from + 1..=to)
        .map(|i| Factor::new(i as u32, shapes[i].clone()))
        .collect();
    build_spec_with_budget(&base, chain, usize::MAX, crate::DEFAULT_TOL)
}

pub fn comb_equivalent(
    x1: &AlgOperator,
    x2: &AlgOperator,
    shapes: &[AlgebraShape],
    tol: f64,
) -> Result<bool> {
    for (x, what) in [(x1, "first operator"), (x2, "second operator")] {
        if !is_comb(x, shapes, tol)? {
            return Err(Error::violation(format!("{what} is not a comb"), 0.0));
        }
    }
    let r = comb_equivalence_residual(x1, x2, shapes)?;
    Ok(r <= rel(tol, x1.norm().max(x2.norm())))
}

/// A comb on `B_0, …, B_{2N+1}` that takes equal values on equivalent
/// combs of `B_1, …, B_{2N}`: membership in the comb set with the order
/// `B_0, B_1, B_{2N}, B_{2N+1}, B_2, …, B_{2N-1}`. The subspace residual
/// is that of `B_{2N+1} ⊗ B_{2N} ⊗ J(B_2, …, B_{2N-1}) ⊗ B_1 ⊗ B_0`.
pub fn comb_respects_equivalence(
    x: &AlgOperator,
    shapes: &[AlgebraShape],
    tol: f64,
) -> Result<EquivalenceReport> {
    check_even(shapes)?;
    let spec = comb_spec(shapes)?;
    let x = require_member(x, &spec, tol, "operator")?;
    let l = shapes.len();
    if l < 6 {
        return Ok(EquivalenceReport {
            holds: true,
            residual: 0.0,
            cross_check: Some(true),
        });
    }
    let two_n = l - 2;
    let order: Vec<usize> = [0, 1, two_n, two_n + 1].into_iter().chain(2..two_n).collect();
    let shuffled: Vec<AlgebraShape> = order.iter().map(|&i| shapes[i].clone()).collect();
    let ps = comb_spec(&shuffled)?;
    // relabel the permuted spec's factors back to the original labels
    let target_labels: Vec<FactorLabel> = ps
        .layout(ps.level())
        .labels()
        .iter()
        .map(|lb| FactorLabel(order[lb.0 as usize] as u32))
        .collect();
    let target = ps.layout(ps.level()).relabel(&target_labels)?;
    let px = to_layout(&x, &target)?.on_layout(ps.layout(ps.level()))?;
    let permuted = membership_by_subspace(&px, &ps, tol)?.holds;
    let inner = hat_spec(shapes, 2, two_n - 1)?;
    let r = component_along(&x, &inner.j[inner.level()].orthocomplement().basis())?;
    Ok(EquivalenceReport {
        holds: permuted,
        residual: r,
        cross_check: Some(r <= rel(tol, x.norm())),
    })
}
