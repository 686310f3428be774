//! Sections of the state space and the generalized channels and
//! measurements defined on them.


use crate::algebra::{
    is_positive, min_eigenvalue, pinv_sqrt, sqrt_positive, support_projection, AlgOperator,
};
use crate::choi::{apply_map, choi_of_fn, povm_map, CpMapChoi};
use crate::error::{Error, Result};
use crate::subspace::{
    meet, preimage_under_partial_trace, preimage_with, section_contains, section_span, span,
    Subspace,
};
use crate::tensor::{partial_trace, tensor, Factor, FactorLabel, Layout};
use crate::{rel, CMat};

/// A convex section `K = J ∩ 𝔖(A)` of the states, possibly scaled by `s`.
///
/// The section is described by a self-adjoint subspace `J` with `τ ∈ J`
/// or, failing that, by an explicit reference state of maximal support
/// in `K`. All operations use `[K]`, the span of the section.
#[derive(Clone, Debug)]
pub struct SectionSpec {
    subspace: Subspace,
    rho: AlgOperator,
    span: Subspace,
    scale: f64,
    tau_in_k: bool,
}

impl SectionSpec {
    /// `rho` must be a state of maximal support in `J ∩ 𝔖`.
    pub fn new(j: Subspace, rho: AlgOperator, tol: f64) -> Result<Self> {
        let span = section_span(&j, &rho, tol)?;
        let tau = AlgOperator::tracial_state(j.layout());
        let tau_in_k = j.contains(&tau, tol)?;
        Ok(SectionSpec {
            subspace: j,
            rho,
            span,
            scale: 1.0,
            tau_in_k,
        })
    }

    /// Uses the projection of `τ` onto `J` as reference state. Fails when
    /// that projection is not a faithful state; pass a state explicitly in
    /// that case.
    pub fn from_subspace(j: Subspace, tol: f64) -> Result<Self> {
        let tau = AlgOperator::tracial_state(j.layout());
        let p = j.project(&tau)?.hermitian_part();
        let t = p.trace_re();
        if t <= tol {
            return Err(Error::violation("section has no state near the trace", t));
        }
        let rho = p.scale(1.0 / t);
        let lo = min_eigenvalue(&rho, tol)?;
        if lo <= tol {
            return Err(Error::violation(
                "projected trace is not faithful; give a reference state",
                lo,
            ));
        }
        SectionSpec::new(j, rho, tol)
    }

    /// The whole state space.
    pub fn full(layout: &Layout) -> Self {
        let j = Subspace::full(layout);
        SectionSpec {
            span: j.clone(),
            subspace: j,
            rho: AlgOperator::tracial_state(layout),
            scale: 1.0,
            tau_in_k: true,
        }
    }

    /// The Choi matrices of channels `B_0 → B_1`, as the section of
    /// `B_1 ⊗ B_0` given by `Tr_{B_1} x ∈ [I]`, scaled by `t_{B_0}`.
    pub fn channels(output: Factor, input: Factor) -> Result<Self> {
        let t0 = input.shape.unit_trace();
        let layout = Layout::new(vec![output.clone(), input.clone()])?;
        let base = Layout::new(vec![input])?;
        let j = preimage_under_partial_trace(
            &layout,
            &[output.label],
            &Subspace::identity_line(&base),
            crate::DEFAULT_TOL,
        )?;
        let mut s = SectionSpec::new(j, AlgOperator::tracial_state(&layout), crate::DEFAULT_TOL)?;
        s.scale = t0;
        Ok(s)
    }

    /// States with the statistics of `rho` for every listed POVM.
    pub fn fixed_statistics(
        layout: &Layout,
        povms: &[Vec<AlgOperator>],
        rho: AlgOperator,
        tol: f64,
    ) -> Result<Self> {
        let mut j = Subspace::full(layout);
        for (n, e) in povms.iter().enumerate() {
            let m = povm_map(e, FactorLabel(u32::MAX - n as u32))?;
            let lam = crate::choi::apply_map(&m, &rho)?;
            let line = span(m.output(), &[lam], tol)?;
            let pre = preimage_with(layout, &|x| crate::choi::apply_map(&m, x), &line, tol)?;
            j = meet(&j, &pre, tol)?;
        }
        SectionSpec::new(j, rho, tol)
    }

    /// Multiply the section by `s > 0`.
    pub fn with_scale(mut self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::violation("section scale must be positive", s));
        }
        self.scale = s;
        Ok(self)
    }

    pub fn normalized(&self) -> Self {
        SectionSpec {
            scale: 1.0,
            ..self.clone()
        }
    }

    pub fn layout(&self) -> &Layout {
        self.subspace.layout()
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    /// `[K]`.
    pub fn span(&self) -> &Subspace {
        &self.span
    }

    pub fn reference_state(&self) -> &AlgOperator {
        &self.rho
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn tau_in_k(&self) -> bool {
        self.tau_in_k
    }

    /// Membership in the scaled section `s·K`.
    pub fn contains(&self, x: &AlgOperator, tol: f64) -> Result<bool> {
        section_contains(&self.subspace, &x.scale(1.0 / self.scale), tol)
    }

    /// The same section on renamed factors.
    pub fn relabeled(&self, labels: &[FactorLabel]) -> Result<Self> {
        Ok(SectionSpec {
            subspace: self.subspace.relabeled(labels)?,
            rho: self.rho.relabeled(labels)?,
            span: self.span.relabeled(labels)?,
            scale: self.scale,
            tau_in_k: self.tau_in_k,
        })
    }
}

/// Outcome of a checked condition, with the quantities it was decided on.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub holds: bool,
    /// Smallest eigenvalue of the operator whose positivity was required.
    pub min_eigenvalue: f64,
    /// Norm of the part violating the linear condition.
    pub residual: f64,
}

fn check_input(x: &CpMapChoi, spec: &SectionSpec) -> Result<()> {
    if !x.input().same_shapes(spec.layout()) {
        return Err(Error::ShapeMismatch(format!(
            "map input {} does not match section on {}",
            x.input(),
            spec.layout()
        )));
    }
    Ok(())
}

/// Norm of the component of `y` along `L`, computed on `L`'s layout.
fn component(l: &Subspace, y: &AlgOperator) -> Result<f64> {
    let y = y.on_layout(l.layout())?;
    let p = l.project(&y)?;
    Ok(p.norm())
}

/// `X ⪰ 0` and `Tr_B X ∈ s^{-1} I + ([K]^T)^⊥`.
pub fn check_generalized_channel(x: &CpMapChoi, spec: &SectionSpec, tol: f64) -> Result<Check> {
    check_input(x, spec)?;
    let lo = min_eigenvalue(x.choi(), tol)?;
    let pos = lo >= -rel(tol, x.choi().norm());
    let t = partial_trace(x.choi(), &x.output().labels())?;
    let y = &t - &AlgOperator::identity(t.layout()).scale(1.0 / spec.scale);
    let r = component(&spec.span.transpose(), &y)?;
    Ok(Check {
        holds: pos && r <= rel(tol, t.norm()),
        min_eigenvalue: lo,
        residual: r,
    })
}

pub fn is_generalized_channel(x: &CpMapChoi, spec: &SectionSpec, tol: f64) -> Result<bool> {
    Ok(check_generalized_channel(x, spec, tol)?.holds)
}

/// A generalized channel into `C^m ⊗ B` whose outcome factor is `outcome`.
pub fn check_generalized_instrument(
    x: &CpMapChoi,
    outcome: FactorLabel,
    spec: &SectionSpec,
    tol: f64,
) -> Result<Check> {
    let f = x.output().factor(outcome)?;
    if !f.shape.is_classical() {
        return Err(Error::ShapeMismatch(format!(
            "outcome factor {outcome} is not classical"
        )));
    }
    let lo = min_eigenvalue(x.choi(), tol)?;
    let pos = lo >= -rel(tol, x.choi().norm());
    let rest = x.output().without(&[outcome]);
    let reduced = CpMapChoi::new(
        x.input().clone(),
        rest,
        partial_trace(x.choi(), &[outcome])?,
    )?;
    let mut c = check_generalized_channel(&reduced, spec, tol)?;
    c.holds &= pos;
    c.min_eigenvalue = lo;
    Ok(c)
}

pub fn is_generalized_instrument(
    x: &CpMapChoi,
    outcome: FactorLabel,
    spec: &SectionSpec,
    tol: f64,
) -> Result<bool> {
    Ok(check_generalized_instrument(x, outcome, spec, tol)?.holds)
}

/// Size of the difference of two maps on `[K]`:
/// `(Σ_i ‖(X_1 - X_2) * k_i‖²)^{1/2}` over an orthonormal basis `k_i`.
pub fn equivalence_residual(x1: &CpMapChoi, x2: &CpMapChoi, spec: &SectionSpec) -> Result<f64> {
    check_input(x1, spec)?;
    if x1.input() != x2.input() || x1.output() != x2.output() {
        return Err(Error::ShapeMismatch("maps act between different layouts".into()));
    }
    let d = CpMapChoi::new(
        x1.input().clone(),
        x1.output().clone(),
        x1.choi().try_sub(x2.choi())?,
    )?;
    let mut s = 0.0;
    for k in spec.span.basis() {
        s += crate::choi::apply_map(&d, &k)?.matrix().norm_squared();
    }
    Ok(s.sqrt())
}

/// `X_1 - X_2 ∈ B ⊗ ([K]^T)^⊥`: both maps agree on the section.
pub fn are_equivalent(x1: &CpMapChoi, x2: &CpMapChoi, spec: &SectionSpec, tol: f64) -> Result<bool> {
    let r = equivalence_residual(x1, x2, spec)?;
    Ok(r <= rel(tol, x1.choi().norm().max(x2.choi().norm())))
}

/// `c ⪰ 0` and `c - s^{-1} I ∈ [K]^⊥`.
pub fn check_simple_element(c: &AlgOperator, spec: &SectionSpec, tol: f64) -> Result<Check> {
    let c = c.on_layout(spec.layout())?;
    let lo = min_eigenvalue(&c, tol)?;
    let pos = lo >= -rel(tol, c.norm());
    let y = &c - &AlgOperator::identity(c.layout()).scale(1.0 / spec.scale);
    let r = component(&spec.span, &y)?;
    Ok(Check {
        holds: pos && r <= rel(tol, c.norm()),
        min_eigenvalue: lo,
        residual: r,
    })
}

/// The simple generalized channel `χ_c(a) = c^{1/2} a c^{1/2}` on the
/// algebra of `c`, with output factors relabeled by `out_labels`.
pub fn simple_channel(c: &AlgOperator, out_labels: &[FactorLabel], tol: f64) -> Result<CpMapChoi> {
    let input = c.layout().clone();
    let out = input.relabel(out_labels)?;
    let s = sqrt_positive(c, tol)?;
    let psi = crate::choi::psi(&out, &input)?;
    let left = tensor(&s.on_layout(&out)?, &AlgOperator::identity(&input))?;
    let x = left.compose(&psi)?.compose(&left)?;
    CpMapChoi::new(input, out, x)
}

/// A finite family of positive effects on the algebra of a section.
#[derive(Clone, Debug)]
pub struct GeneralizedPovm {
    pub effects: Vec<AlgOperator>,
}

impl GeneralizedPovm {
    pub fn new(effects: Vec<AlgOperator>) -> Result<Self> {
        let first = effects
            .first()
            .ok_or_else(|| Error::ShapeMismatch("no effects".into()))?;
        if effects.iter().any(|e| e.layout() != first.layout()) {
            return Err(Error::ShapeMismatch("effects on different layouts".into()));
        }
        Ok(GeneralizedPovm { effects })
    }

    pub fn layout(&self) -> &Layout {
        self.effects[0].layout()
    }

    pub fn total(&self) -> AlgOperator {
        let mut t = AlgOperator::zeros(self.layout());
        for e in &self.effects {
            t = &t + e;
        }
        t
    }

    /// Outcome probabilities `Tr(M_i σ)`.
    pub fn probabilities(&self, sigma: &AlgOperator) -> Result<Vec<f64>> {
        self.effects
            .iter()
            .map(|e| {
                let s = sigma.on_layout(e.layout())?;
                Ok((e.matrix() * s.matrix()).trace().re)
            })
            .collect()
    }

    /// The measurement as a map into `C^m`, with Choi `Σ |i⟩⟨i| ⊗ M_i^T`.
    pub fn to_map(&self, label: FactorLabel) -> Result<CpMapChoi> {
        povm_map(&self.effects, label)
    }
}

/// All `M_i ⪰ 0` and `Σ M_i ∈ s^{-1} I + [K]^⊥`.
pub fn check_generalized_povm(m: &GeneralizedPovm, spec: &SectionSpec, tol: f64) -> Result<Check> {
    let mut lo = f64::INFINITY;
    let mut pos = true;
    for e in &m.effects {
        let l = min_eigenvalue(e, tol)?;
        lo = lo.min(l);
        pos &= is_positive(e, tol)?;
    }
    let mut c = check_simple_element(&m.total(), spec, tol)?;
    c.holds = pos && c.residual <= rel(tol, m.total().norm());
    c.min_eigenvalue = lo;
    Ok(c)
}

pub fn is_generalized_povm(m: &GeneralizedPovm, spec: &SectionSpec, tol: f64) -> Result<bool> {
    Ok(check_generalized_povm(m, spec, tol)?.holds)
}

/// Effects of a projective measurement in the eigenbasis of a unitary
/// matrix, grouping consecutive columns by `sizes`.
pub fn pvm_from_columns(layout: &Layout, u: &CMat, sizes: &[usize]) -> Result<Vec<AlgOperator>> {
    let d = layout.dim();
    if sizes.iter().sum::<usize>() != d || u.nrows() != d {
        return Err(Error::ShapeMismatch("PVM sizes do not cover the space".into()));
    }
    let mut out = Vec::new();
    let mut col = 0;
    for &s in sizes {
        let mut p = CMat::zeros(d, d);
        for k in col..col + s {
            let v = u.column(k);
            p += v * v.adjoint();
        }
        col += s;
        out.push(AlgOperator::from_projected(layout.clone(), p, 1e-8)?);
    }
    Ok(out)
}

/// `χ_c` after checking that `c` is a simple element of the section.
pub fn make_simple(c: &AlgOperator, spec: &SectionSpec, out_labels: &[FactorLabel], tol: f64) -> Result<CpMapChoi> {
    let k = check_simple_element(c, spec, tol)?;
    if !k.holds {
        return Err(Error::violation(
            "not a simple element of the section",
            k.residual.max(-k.min_eigenvalue),
        ));
    }
    simple_channel(&c.on_layout(spec.layout())?, out_labels, tol)
}

/// `Φ = Λ ∘ χ_c` with `c = Φ*(I)` and `Λ` a channel.
#[derive(Clone, Debug)]
pub struct SimpleFactorization {
    pub c: AlgOperator,
    /// Support projection `p` of `c`.
    pub support: AlgOperator,
    /// `Λ_p = Φ ∘ χ_{c^{-1}}` on `A_p`, as a Choi matrix on the full input.
    pub lambda_p: CpMapChoi,
    /// `Λ(a) = Λ_p(pap) + τ_B Tr(a(1 - p))`.
    pub lambda: CpMapChoi,
}

impl SimpleFactorization {
    /// `Λ ∘ χ_c`.
    pub fn recompose(&self, tol: f64) -> Result<CpMapChoi> {
        let (inp, out) = (self.lambda.input(), self.lambda.output());
        let start = inp.fresh_label(&[out]).0;
        let mid: Vec<FactorLabel> = (0..inp.len() as u32).map(|k| FactorLabel(start + k)).collect();
        let chi = simple_channel(&self.c, &mid, tol)?;
        let mut labels = out.labels();
        labels.extend(&mid);
        let lam = CpMapChoi::new(
            inp.relabel(&mid)?,
            out.clone(),
            self.lambda.choi().relabeled(&labels)?,
        )?;
        crate::choi::compose(&lam, &chi)
    }
}

pub fn factor_simple(x: &CpMapChoi, spec: &SectionSpec, tol: f64) -> Result<SimpleFactorization> {
    let k = check_generalized_channel(x, spec, tol)?;
    if !k.holds {
        return Err(Error::violation(
            "not a generalized channel",
            k.residual.max(-k.min_eigenvalue),
        ));
    }
    let adj = crate::choi::adjoint_map(x)?;
    let c = crate::choi::apply_map(&adj, &AlgOperator::identity(x.output()))?
        .check_hermitian(tol)?
        .relabeled(&x.input().labels())?;
    let p = support_projection(&c, tol)?;
    let r = pinv_sqrt(&c, tol)?;
    let tau = AlgOperator::tracial_state(x.output());
    let lambda_p = choi_of_fn(x.input(), x.output(), |a| {
        let b = r.compose(&a.on_layout(r.layout())?)?.compose(&r)?;
        apply_map(x, &b)
    })?;
    let q = &AlgOperator::identity(p.layout()) - &p;
    let lambda = choi_of_fn(x.input(), x.output(), |a| {
        let a = a.on_layout(r.layout())?;
        let b = r.compose(&a)?.compose(&r)?;
        let t = a.compose(&q)?.trace();
        Ok(&apply_map(x, &b)? + &tau.scale_c(t))
    })?;
    Ok(SimpleFactorization {
        c,
        support: p,
        lambda_p,
        lambda,
    })
}

/// `M_j - N_j ∈ [K]^⊥` for every outcome.
pub fn povm_equivalence_residual(m: &GeneralizedPovm, n: &GeneralizedPovm, spec: &SectionSpec) -> Result<f64> {
    if m.effects.len() != n.effects.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} and {} outcomes",
            m.effects.len(),
            n.effects.len()
        )));
    }
    let mut s = 0.0;
    for (a, b) in m.effects.iter().zip(&n.effects) {
        s += component(&spec.span, &a.try_sub(b)?)?.powi(2);
    }
    Ok(s.sqrt())
}

pub fn povm_equivalent(m: &GeneralizedPovm, n: &GeneralizedPovm, spec: &SectionSpec, tol: f64) -> Result<bool> {
    let r = povm_equivalence_residual(m, n, spec)?;
    Ok(r <= rel(tol, m.total().norm().max(n.total().norm())))
}
