//! Constructive realizations: semilocal splittings, the ladder of a
//! generalized comb, and ancilla realizations of channels on channels.

use std::collections::BTreeMap;

use crate::algebra::{fix_phase, min_eigenvalue, AlgOperator, AlgebraShape};
use crate::choi::{apply_map, choi_of_fn, is_channel, tp_residual, CpMapChoi};
use crate::comb::{membership_by_chain, to_layout, SupermapSpec};
use crate::error::{Error, Result};
use crate::gchannel::{check_generalized_channel, factor_simple, SectionSpec, SimpleFactorization};
use crate::subspace::section_contains;
use crate::tensor::{
    identity_tensor, link_product, partial_trace, permute, tensor_all, Factor, FactorLabel, Layout,
    Sector,
};
use crate::{rel, CMat, Complex64};

fn compress(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

fn embed_into(target: &mut CMat, small: &CMat, idx: &[usize]) {
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            target[(i, j)] += small[(r, c)];
        }
    }
}

/// Restriction `q X q` to the given blocks of some factors.
pub(crate) fn project_blocks(x: &AlgOperator, assign: &[(FactorLabel, usize)]) -> Result<AlgOperator> {
    let l = x.layout();
    let mut want = Vec::with_capacity(assign.len());
    for &(lb, id) in assign {
        let p = l
            .position(lb)
            .ok_or(Error::UnknownLabel(lb.0))?;
        want.push((p, id));
    }
    let shapes = l.shapes();
    let mask: Vec<bool> = (0..l.dim())
        .map(|i| {
            let d = l.digits(i);
            want.iter().all(|&(p, id)| shapes[p].block_of(d[p]) == id)
        })
        .collect();
    let mut m = x.matrix().clone();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !(mask[i] && mask[j]) {
                m[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok(AlgOperator::from_trusted(l.clone(), m))
}

/// Zero-pads the full factor `label` to dimension `d`, keeping the old
/// space as the leading corner.
fn embed_factor(x: &AlgOperator, label: FactorLabel, d: usize) -> Result<AlgOperator> {
    let l = x.layout();
    let p = l.position(label).ok_or(Error::UnknownLabel(label.0))?;
    let mut fs = l.factors().to_vec();
    fs[p] = Factor::new(label.0, AlgebraShape::full(d));
    let nl = Layout::new(fs)?;
    let map: Vec<usize> = (0..l.dim()).map(|i| nl.compose_index(&l.digits(i))).collect();
    let mut m = CMat::zeros(nl.dim(), nl.dim());
    for (r, &i) in map.iter().enumerate() {
        for (c, &j) in map.iter().enumerate() {
            m[(i, j)] = x.matrix()[(r, c)];
        }
    }
    Ok(AlgOperator::from_trusted(nl, m))
}

/// Extends a channel to a larger input ancilla `label`: inputs outside
/// the old corner are traced out and replaced by the tracial state.
fn complete_input(m: &CpMapChoi, label: FactorLabel, d: usize) -> Result<CpMapChoi> {
    let old = m.input().factor(label)?.shape.total_dim();
    let padded = embed_factor(m.choi(), label, d)?;
    let mut parts = Vec::new();
    for f in padded.layout().factors() {
        let fl = Layout::new(vec![f.clone()])?;
        let op = if m.output().contains(f.label) {
            AlgOperator::tracial_state(&fl)
        } else if f.label == label {
            let diag: Vec<f64> = (0..d).map(|i| if i < old { 0.0 } else { 1.0 }).collect();
            AlgOperator::diagonal(&fl, &diag)?
        } else {
            AlgOperator::identity(&fl)
        };
        parts.push(op);
    }
    let refs: Vec<&AlgOperator> = parts.iter().collect();
    let extra = tensor_all(&refs)?;
    let input = padded.layout().select(&m.input().labels())?;
    CpMapChoi::new(input, m.output().clone(), padded.try_add(&extra)?)
}

fn fresh(l: &Layout) -> u32 {
    l.max_label().map_or(0, |m| m + 1)
}

/// Splitting `X_{m,n} = X_1(m,n) * X_0(n)` of a positive `X` on `A ⊗ B ⊗ C`
/// with `Tr_A X = I_B ⊗ Y`.
#[derive(Clone, Debug)]
pub struct SemilocalSplit {
    pub ancilla_dim: usize,
    pub ancilla: FactorLabel,
    pub a: Layout,
    pub b: Layout,
    pub c: Layout,
    pub b_sectors: Vec<Sector>,
    pub c_sectors: Vec<Sector>,
    /// Labels of the single factors carrying `H_{B_m}` and `H_{C_n}`.
    pub b_block_label: FactorLabel,
    pub c_block_label: FactorLabel,
    /// `X_1(m,n)`, a channel `B(H_{B_m} ⊗ H_D) → A`, indexed `[m][n]`.
    pub x1: Vec<Vec<CpMapChoi>>,
    /// `X_0(n)` on `H_D ⊗ H_{C_n}`.
    pub x0: Vec<AlgOperator>,
    pub y: AlgOperator,
}

impl SemilocalSplit {
    fn block_layout(&self, m: usize, n: usize) -> Result<Layout> {
        let bm = Layout::single(self.b_block_label.0, AlgebraShape::full(self.b_sectors[m].indices.len()));
        let cn = Layout::single(self.c_block_label.0, AlgebraShape::full(self.c_sectors[n].indices.len()));
        self.a.concat(&bm)?.concat(&cn)
    }

    fn block_indices(&self, m: usize, n: usize) -> Vec<usize> {
        let (db, dc) = (self.b.dim(), self.c.dim());
        let mut v = Vec::new();
        for a in 0..self.a.dim() {
            for &b in &self.b_sectors[m].indices {
                for &c in &self.c_sectors[n].indices {
                    v.push((a * db + b) * dc + c);
                }
            }
        }
        v
    }

    fn arranged(&self, x: &AlgOperator) -> Result<AlgOperator> {
        let mut order = self.a.labels();
        order.extend(self.b.labels());
        order.extend(self.c.labels());
        permute(x, &order)
    }

    /// `X_{m,n} = (I_A ⊗ q_m ⊗ r_n) X` as an operator on `A ⊗ H_{B_m} ⊗ H_{C_n}`.
    pub fn block(&self, x: &AlgOperator, m: usize, n: usize) -> Result<AlgOperator> {
        let x = self.arranged(x)?;
        let idx = self.block_indices(m, n);
        Ok(AlgOperator::from_trusted(self.block_layout(m, n)?, compress(x.matrix(), &idx)))
    }

    /// `max_{m,n} ‖X_1(m,n) * X_0(n) - X_{m,n}‖`.
    pub fn reconstruction_residual(&self, x: &AlgOperator) -> Result<f64> {
        let mut r: f64 = 0.0;
        for m in 0..self.b_sectors.len() {
            for n in 0..self.c_sectors.len() {
                let z = link_product(self.x1[m][n].choi(), &self.x0[n])?;
                let want = self.block(x, m, n)?;
                r = r.max((z.matrix() - want.matrix()).norm());
            }
        }
        Ok(r)
    }

    /// `max_n ‖Tr_D X_0(n) - Y_n‖`.
    pub fn marginal_residual(&self) -> Result<f64> {
        let mut r: f64 = 0.0;
        for (n, sec) in self.c_sectors.iter().enumerate() {
            let t = partial_trace(&self.x0[n], &[self.ancilla])?;
            let yn = compress(self.y.matrix(), &sec.indices);
            r = r.max((t.matrix() - yn).norm());
        }
        Ok(r)
    }

    /// `⊕_m X_1(m,n)`, a channel `B ⊗ B(H_D) → A`.
    pub fn stage_channel(&self, n: usize) -> Result<CpMapChoi> {
        let dl = Layout::single(self.ancilla.0, AlgebraShape::full(self.ancilla_dim));
        let input = self.b.concat(&dl)?;
        let layout = self.a.concat(&input)?;
        let (db, d) = (self.b.dim(), self.ancilla_dim);
        let mut acc = CMat::zeros(layout.dim(), layout.dim());
        for (m, sec) in self.b_sectors.iter().enumerate() {
            let mut idx = Vec::new();
            for a in 0..self.a.dim() {
                for &b in &sec.indices {
                    for k in 0..d {
                        idx.push((a * db + b) * d + k);
                    }
                }
            }
            embed_into(&mut acc, self.x1[m][n].choi().matrix(), &idx);
        }
        CpMapChoi::new(input, self.a.clone(), AlgOperator::from_trusted(layout, acc))
    }

    /// `⊕_n X_0(n)` on `H_D ⊗ C`.
    pub fn lower_state(&self) -> Result<AlgOperator> {
        let dl = Layout::single(self.ancilla.0, AlgebraShape::full(self.ancilla_dim));
        let layout = dl.concat(&self.c)?;
        let dc = self.c.dim();
        let mut acc = CMat::zeros(layout.dim(), layout.dim());
        for (n, sec) in self.c_sectors.iter().enumerate() {
            let mut idx = Vec::new();
            for k in 0..self.ancilla_dim {
                for &c in &sec.indices {
                    idx.push(k * dc + c);
                }
            }
            embed_into(&mut acc, self.x0[n].matrix(), &idx);
        }
        Ok(AlgOperator::from_trusted(layout, acc))
    }

    /// `Σ_{m,n} X_1(m,n) * X_0(n)` on `A ⊗ B ⊗ C`.
    pub fn recompose(&self) -> Result<AlgOperator> {
        let layout = self.a.concat(&self.b)?.concat(&self.c)?;
        let mut acc = CMat::zeros(layout.dim(), layout.dim());
        for m in 0..self.b_sectors.len() {
            for n in 0..self.c_sectors.len() {
                let z = link_product(self.x1[m][n].choi(), &self.x0[n])?;
                embed_into(&mut acc, z.matrix(), &self.block_indices(m, n));
            }
        }
        Ok(AlgOperator::from_trusted(layout, acc))
    }
}

/// Splits `X` on `A ⊗ B ⊗ C`, where `A` and `B` are the factors listed
/// and `C` the remaining ones.
pub fn semilocalize(x: &AlgOperator, a: &[FactorLabel], b: &[FactorLabel], tol: f64) -> Result<SemilocalSplit> {
    let d = FactorLabel(fresh(x.layout()));
    semilocalize_with_label(x, a, b, d, tol)
}

fn semilocalize_with_label(
    x: &AlgOperator,
    a: &[FactorLabel],
    b: &[FactorLabel],
    ancilla: FactorLabel,
    tol: f64,
) -> Result<SemilocalSplit> {
    let l = x.layout();
    for lb in a.iter().chain(b) {
        if !l.contains(*lb) {
            return Err(Error::UnknownLabel(lb.0));
        }
    }
    let la = l.select(a)?;
    let lb = l.select(b)?;
    let mut ab = a.to_vec();
    ab.extend_from_slice(b);
    let lc = l.without(&ab);
    let mut order = ab.clone();
    order.extend(lc.labels());
    let xp = permute(&x.check_hermitian(tol)?, &order)?;
    let lo = min_eigenvalue(&xp, tol)?;
    if lo < -rel(tol, xp.norm()) {
        return Err(Error::NotPositive(lo));
    }
    let t = partial_trace(&xp, a)?;
    let y = partial_trace(&t, b)?.scale(1.0 / lb.dim() as f64);
    let recon = identity_tensor(&lb, &y)?;
    let r = (t.matrix() - recon.matrix()).norm();
    if r > rel(tol, t.norm()) {
        return Err(Error::violation("Tr_A X is not of the form I_B ⊗ Y", r));
    }

    let next = ancilla.0.max(fresh(l));
    let (bl, cl) = (FactorLabel(next + 1), FactorLabel(next + 2));
    let b_sectors = lb.sectors();
    let c_sectors = lc.sectors();
    let ynorm = y.norm();
    let mut spectra = Vec::new();
    for sec in &c_sectors {
        let yn = compress(y.matrix(), &sec.indices);
        let (vals, vecs) = crate::dense::herm_eigen(&yn)?;
        let mut kept: Vec<(f64, nalgebra::DVector<Complex64>)> = Vec::new();
        for (k, &v) in vals.iter().enumerate().rev() {
            if v > rel(tol, ynorm) {
                let mut u = vecs.column(k).clone_owned();
                fix_phase(&mut u);
                kept.push((v, u));
            }
        }
        spectra.push(kept);
    }
    let dd = spectra.iter().map(|s| s.len()).max().unwrap_or(0).max(1);
    let dl = Layout::single(ancilla.0, AlgebraShape::full(dd));

    let mut x0 = Vec::new();
    for (n, sec) in c_sectors.iter().enumerate() {
        let cn = sec.indices.len();
        let mut psi = nalgebra::DVector::<Complex64>::zeros(dd * cn);
        for (k, (v, u)) in spectra[n].iter().enumerate() {
            for j in 0..cn {
                psi[k * cn + j] = u[j] * v.sqrt();
            }
        }
        let cl_l = Layout::single(cl.0, AlgebraShape::full(cn));
        x0.push(AlgOperator::from_trusted(dl.concat(&cl_l)?, &psi * psi.adjoint()));
    }

    let mut split = SemilocalSplit {
        ancilla_dim: dd,
        ancilla,
        a: la.clone(),
        b: lb.clone(),
        c: lc.clone(),
        b_sectors,
        c_sectors,
        b_block_label: bl,
        c_block_label: cl,
        x1: vec![],
        x0,
        y,
    };
    let tau_a = AlgOperator::tracial_state(&la);
    for m in 0..split.b_sectors.len() {
        let dm = split.b_sectors[m].indices.len();
        let bm = Layout::single(bl.0, AlgebraShape::full(dm));
        let input = bm.concat(&dl)?;
        let mut row = Vec::new();
        for n in 0..split.c_sectors.len() {
            let cn = split.c_sectors[n].indices.len();
            let block = compress(xp.matrix(), &split.block_indices(m, n));
            let mut g = CMat::zeros(cn, dd);
            let r = spectra[n].len();
            for (k, (v, u)) in spectra[n].iter().enumerate() {
                for j in 0..cn {
                    g[(j, k)] = u[j] / v.sqrt();
                }
            }
            let w = CMat::identity(la.dim() * dm, la.dim() * dm).kronecker(&g);
            let mut z = w.adjoint() * block * &w;
            let rest: Vec<f64> = (0..dd).map(|k| if k < r { 0.0 } else { 1.0 }).collect();
            let pad = tau_a
                .matrix()
                .kronecker(&CMat::identity(dm, dm))
                .kronecker(&CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                    dd,
                    rest.iter().map(|&t| Complex64::new(t, 0.0)),
                )));
            z += pad;
            let choi = AlgOperator::from_projected(la.concat(&input)?, z, crate::DEFAULT_TOL)?;
            row.push(CpMapChoi::new(input.clone(), la.clone(), choi)?);
        }
        split.x1.push(row);
    }
    Ok(split)
}

/// One rung `X_m(I^{m-1})` of a ladder: for each block multi-index of the
/// lower factors, a channel `B_in ⊗ B(H_{D_{m-1}}) → B(H_{D_m}) ⊗ B_out`.
#[derive(Clone, Debug)]
pub struct LadderStage {
    pub input: Layout,
    pub output: Layout,
    pub lower: Layout,
    pub blocks: Vec<(Vec<usize>, CpMapChoi)>,
}

impl LadderStage {
    pub fn block(&self, ids: &[usize]) -> Option<&CpMapChoi> {
        self.blocks.iter().find(|(k, _)| k == ids).map(|(_, m)| m)
    }
}

/// `q(I)X = I_{D_k} * X_k(I^k) * … * X_1(I^1) * X_0(I_0)`.
#[derive(Clone, Debug)]
pub struct LadderDecomposition {
    pub level: usize,
    pub ancilla_dim: usize,
    /// `D_0, …, D_k`.
    pub ancillas: Vec<FactorLabel>,
    /// On `D_0 ⊗ B_1 ⊗ B_0` for odd levels, `D_0 ⊗ B_0` for even ones.
    pub initial: AlgOperator,
    pub stages: Vec<LadderStage>,
}

impl LadderDecomposition {
    /// The chain for one block multi-index of `A_n`, on the layout `A_n`.
    pub fn chain(&self, spec: &SupermapSpec, sector: &Sector) -> Result<AlgOperator> {
        let top = spec.layout(spec.level());
        let ids: BTreeMap<FactorLabel, usize> = top
            .labels()
            .into_iter()
            .zip(sector.blocks.iter().copied())
            .collect();
        let assign = |l: &Layout| -> Vec<(FactorLabel, usize)> {
            l.labels()
                .into_iter()
                .filter_map(|lb| ids.get(&lb).map(|&i| (lb, i)))
                .collect()
        };
        let mut acc = project_blocks(&self.initial, &assign(self.initial.layout()))?;
        for st in &self.stages {
            let key: Vec<usize> = st.lower.labels().iter().map(|lb| ids[lb]).collect();
            let blk = st
                .block(&key)
                .ok_or_else(|| Error::ShapeMismatch(format!("no ladder block for {key:?}")))?;
            let p = project_blocks(blk.choi(), &assign(blk.choi().layout()))?;
            acc = link_product(&p, &acc)?;
        }
        let dk = *self.ancillas.last().unwrap();
        let acc = partial_trace(&acc, &[dk])?;
        let acc = permute(&acc, &top.labels())?;
        acc.on_layout(top)
    }

    /// `Σ_I` of the chains, which is the operator the ladder realizes.
    pub fn recompose(&self, spec: &SupermapSpec) -> Result<AlgOperator> {
        let top = spec.layout(spec.level());
        let mut acc = AlgOperator::zeros(top);
        for s in top.sectors() {
            acc = acc.try_add(&self.chain(spec, &s)?)?;
        }
        Ok(acc)
    }

    /// `‖q(I)X - chain(I)‖` for every block multi-index.
    pub fn residuals(&self, x: &AlgOperator, spec: &SupermapSpec) -> Result<Vec<f64>> {
        let top = spec.layout(spec.level());
        let x = to_layout(x, top)?;
        top.sectors()
            .iter()
            .map(|s| {
                let assign: Vec<(FactorLabel, usize)> =
                    top.labels().into_iter().zip(s.blocks.iter().copied()).collect();
                let q = project_blocks(&x, &assign)?;
                Ok((q.matrix() - self.chain(spec, s)?.matrix()).norm())
            })
            .collect()
    }

    pub fn max_tp_residual(&self) -> Result<f64> {
        let mut r: f64 = 0.0;
        for st in &self.stages {
            for (_, m) in &st.blocks {
                r = r.max(tp_residual(m)?);
            }
        }
        Ok(r)
    }

    pub fn stages_are_channels(&self, tol: f64) -> Result<bool> {
        for st in &self.stages {
            for (_, m) in &st.blocks {
                if !is_channel(m, tol)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// For odd levels, `X_0` is a generalized channel `B_0 → B(H_{D_0}) ⊗ B_1`;
    /// for even levels, a state with `Tr_{D_0} X_0 ∈ K`.
    pub fn check_initial(&self, spec: &SupermapSpec, tol: f64) -> Result<bool> {
        let base = spec.layout(0);
        if self.level % 2 == 1 {
            let out = self.initial.layout().without(&base.labels());
            let m = CpMapChoi::new(base.clone(), out, self.initial.clone())?;
            Ok(check_generalized_channel(&m, spec.base(), tol)?.holds)
        } else {
            let t = partial_trace(&self.initial, &[self.ancillas[0]])?;
            section_contains(spec.base().subspace(), &t.on_layout(base)?, tol)
        }
    }

    /// The layout of `D_0 ⊗ B_1 ⊗ B_0` or `D_0 ⊗ B_0`.
    pub fn initial_output(&self, spec: &SupermapSpec) -> Layout {
        self.initial.layout().without(&spec.layout(0).labels())
    }
}

struct RawStage {
    lower: Layout,
    blocks: Vec<(Vec<usize>, CpMapChoi)>,
}

fn ladder_rec(
    x: AlgOperator,
    groups: Vec<Vec<FactorLabel>>,
    next: &mut u32,
    tol: f64,
    stages: &mut Vec<RawStage>,
    ancillas: &mut Vec<(FactorLabel, usize)>,
) -> Result<AlgOperator> {
    let n = groups.len() - 1;
    if n <= 1 {
        return Ok(x);
    }
    let d = FactorLabel(*next);
    *next += 3;
    let split = semilocalize_with_label(&x, &groups[n], &groups[n - 1], d, tol)?;
    ancillas.push((d, split.ancilla_dim));
    let mut blocks = Vec::new();
    for (i, sec) in split.c_sectors.iter().enumerate() {
        blocks.push((sec.blocks.clone(), split.stage_channel(i)?));
    }
    let lower = split.lower_state()?;
    let mut g = groups[..n - 1].to_vec();
    g[n - 2].insert(0, d);
    let initial = ladder_rec(lower, g, next, tol, stages, ancillas)?;
    stages.push(RawStage {
        lower: split.c.clone(),
        blocks,
    });
    Ok(initial)
}

/// The ladder of a member `X ∈ 𝒞_J(B_0, …, B_n)`. All ancillas are padded
/// to a common dimension; the last one carries the tracial state.
pub fn ladder_decompose(x: &AlgOperator, spec: &SupermapSpec, tol: f64) -> Result<LadderDecomposition> {
    let n = spec.level();
    let w = membership_by_chain(x, spec, tol)?;
    if !w.holds {
        return Err(Error::violation(
            format!(
                "not a member: {}",
                w.reason.unwrap_or_else(|| "chain condition fails".into())
            ),
            w.residuals.last().copied().unwrap_or(w.terminal_residual),
        ));
    }
    let x = to_layout(x, spec.layout(n))?.hermitian_part();
    let groups: Vec<Vec<FactorLabel>> = (0..=n).map(|i| spec.factor_labels(i)).collect();
    let mut next = fresh(spec.layout(n));
    let mut raw = Vec::new();
    let mut anc = Vec::new();
    let initial = ladder_rec(x, groups, &mut next, tol, &mut raw, &mut anc)?;
    let k = raw.len();
    let mut initial = initial;
    // D_0 is the ancilla of the deepest split
    let mut ancillas: Vec<FactorLabel> = anc.iter().rev().map(|a| a.0).collect();
    if k == 0 {
        let d0 = FactorLabel(next);
        next += 1;
        initial = identity_tensor(&Layout::single(d0.0, AlgebraShape::full(1)), &initial)?;
        ancillas.push(d0);
        anc.push((d0, 1));
    }
    let dk = FactorLabel(next);
    let dd = anc.iter().map(|a| a.1).max().unwrap_or(1);
    if k > 0 {
        ancillas.push(dk);
    }
    for &(lb, dim) in &anc {
        if dim < dd && initial.layout().contains(lb) {
            initial = embed_factor(&initial, lb, dd)?;
        }
    }
    let mut stages = Vec::new();
    for (i, st) in raw.into_iter().enumerate() {
        let mut blocks = Vec::new();
        for (key, mut m) in st.blocks {
            for &(lb, dim) in &anc {
                if dim < dd && m.input().contains(lb) {
                    m = complete_input(&m, lb, dd)?;
                }
                if dim < dd && m.output().contains(lb) {
                    let c = embed_factor(m.choi(), lb, dd)?;
                    let out = c.layout().select(&m.output().labels())?;
                    m = CpMapChoi::new(m.input().clone(), out, c)?;
                }
            }
            if i + 1 == k {
                let dl = Layout::single(dk.0, AlgebraShape::full(dd));
                let c = crate::tensor::tensor(&AlgOperator::tracial_state(&dl), m.choi())?;
                m = CpMapChoi::new(m.input().clone(), dl.concat(m.output())?, c)?;
            }
            blocks.push((key, m));
        }
        let (input, output) = (blocks[0].1.input().clone(), blocks[0].1.output().clone());
        stages.push(LadderStage {
            input,
            output,
            lower: st.lower,
            blocks,
        });
    }
    Ok(LadderDecomposition {
        level: n,
        ancilla_dim: if k == 0 { 1 } else { dd },
        ancillas,
        initial,
        stages,
    })
}

/// For odd levels, `Φ_X = Λ ∘ (id ⊗ χ_c)` with `χ_c` simple on the base
/// and `X_Λ` a comb. Returns the factorization of `X_0` and `X_Λ`.
pub fn comb_factorization(
    ladder: &LadderDecomposition,
    spec: &SupermapSpec,
    tol: f64,
) -> Result<(SimpleFactorization, AlgOperator)> {
    if ladder.level % 2 == 0 {
        return Err(Error::ShapeMismatch("comb factorization needs an odd level".into()));
    }
    let base = spec.layout(0);
    let out = ladder.initial_output(spec);
    let m = CpMapChoi::new(base.clone(), out, ladder.initial.clone())?;
    let f = factor_simple(&m, spec.base(), tol)?;
    let mut l2 = ladder.clone();
    l2.initial = f.lambda.choi().clone();
    Ok((f, l2.recompose(spec)?))
}

/// `V = (U ⊗ I_B)(I_A ⊗ W)` for `V: C^a ⊗ C^c → C^p ⊗ C^b` and
/// `W: C^c → C^d ⊗ C^b`. `U: C^a ⊗ C^d → C^p` is fixed on the range of
/// `I_A ⊗ W` and completed to an isometry by Gram–Schmidt.
pub fn intertwining_isometry(v: &CMat, w: &CMat, b: usize, tol: f64) -> Result<CMat> {
    let c = w.ncols();
    if b == 0 || c == 0 || w.nrows() % b != 0 || v.nrows() % b != 0 || v.ncols() % c != 0 {
        return Err(Error::ShapeMismatch(format!(
            "V is {}x{}, W is {}x{}, output factor {b}",
            v.nrows(),
            v.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let (d, p, a) = (w.nrows() / b, v.nrows() / b, v.ncols() / c);
    let cols = a * c;
    let mut mcat = CMat::zeros(a * d, b * cols);
    let mut vcat = CMat::zeros(p, b * cols);
    for al in 0..a {
        for g in 0..c {
            let j = al * c + g;
            for de in 0..d {
                for be in 0..b {
                    mcat[(al * d + de, j * b + be)] = w[(de * b + be, g)];
                }
            }
            for pi in 0..p {
                for be in 0..b {
                    vcat[(pi, j * b + be)] = v[(pi * b + be, j)];
                }
            }
        }
    }
    let (us, s, vs) = crate::dense::svd_complex(&mcat)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let r = s.iter().filter(|&&x| x > tol * smax.max(1.0)).count();
    let q1 = us.columns(0, r).clone_owned();
    let mut pinv = CMat::zeros(b * cols, a * d);
    for k in 0..r {
        pinv += vs.column(k) * us.column(k).adjoint() / Complex64::new(s[k], 0.0);
    }
    let u_part = &vcat * pinv;
    let res = (&u_part * &mcat - &vcat).norm();
    if res > rel(tol, v.norm()) {
        return Err(Error::violation("V does not factor through I ⊗ W", res));
    }
    let uq = &u_part * &q1;
    let iso = (uq.adjoint() * &uq - CMat::identity(r, r)).norm();
    if iso > rel(tol, 1.0) * (r.max(1) as f64) {
        return Err(Error::violation("intertwiner is not isometric on the range", iso));
    }
    let q2 = gram_schmidt_complete(&q1, a * d - r);
    let t = gram_schmidt_complete(&uq, a * d - r);
    if t.ncols() < a * d - r || q2.ncols() < a * d - r {
        return Err(Error::violation(
            "no room to complete the intertwiner to an isometry",
            (a * d - p.min(a * d)) as f64,
        ));
    }
    Ok(&uq * q1.adjoint() + t * q2.adjoint())
}

/// Up to `count` orthonormal vectors orthogonal to the columns of `q`,
/// taken from the standard basis in index order.
fn gram_schmidt_complete(q: &CMat, count: usize) -> CMat {
    let n = q.nrows();
    let mut basis: Vec<nalgebra::DVector<Complex64>> = q.column_iter().map(|c| c.clone_owned()).collect();
    let mut out = Vec::new();
    for i in 0..n {
        if out.len() == count {
            break;
        }
        let mut e = nalgebra::DVector::<Complex64>::zeros(n);
        e[i] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for v in &basis {
                let c = v.dotc(&e);
                e -= v * c;
            }
        }
        let nrm = e.norm();
        if nrm > 1e-8 {
            e /= Complex64::new(nrm, 0.0);
            basis.push(e.clone());
            out.push(e);
        }
    }
    let mut m = CMat::zeros(n, out.len());
    for (j, v) in out.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// `Ξ(X_ℰ) = Λ ∘ (ℰ ⊗ id_A)(ρ)` for a generalized channel on the channels
/// `B(H_0) → B(H_1)`.
#[derive(Clone, Debug)]
pub struct Realization {
    pub ancilla: Layout,
    /// Pure state on `H_0 ⊗ H_A`.
    pub rho: AlgOperator,
    /// Channel `B(H_1 ⊗ H_A) → B`.
    pub lambda: CpMapChoi,
    pub omega: AlgOperator,
}

impl Realization {
    /// `Λ((ℰ ⊗ id)(ρ))` for a channel `ℰ: B(H_0) → B(H_1)`.
    pub fn evaluate(&self, e: &CpMapChoi) -> Result<AlgOperator> {
        let h0 = self.rho.layout().factors()[0].clone();
        let h1 = self.lambda.input().factors()[0].clone();
        let el = Layout::new(vec![h1, h0])?;
        let ec = e.choi().on_layout(&el)?;
        let t = link_product(&ec, &self.rho)?;
        apply_map(&self.lambda, &t)
    }
}

/// The input layout of `x` must be `H_1 ⊗ H_0`.
pub fn realize_on_channels(x: &CpMapChoi, tol: f64) -> Result<Realization> {
    let fs = x.input().factors();
    if fs.len() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "input {} is not of the form H_1 ⊗ H_0",
            x.input()
        )));
    }
    let (h1, h0) = (fs[0].clone(), fs[1].clone());
    let spec = SectionSpec::channels(h1.clone(), h0.clone())?;
    let f = factor_simple(x, &spec, tol)?;
    let d1 = h1.shape.total_dim() as f64;
    let omega = partial_trace(&f.c, &[h1.label])?.scale(1.0 / d1);
    let recon = identity_tensor(&Layout::new(vec![h1.clone()])?, &omega)?;
    let r = (recon.matrix() - f.c.matrix()).norm();
    if r > rel(tol, f.c.norm()) {
        return Err(Error::violation("Φ*(I) is not of the form I ⊗ ω", r));
    }
    let e = crate::algebra::hermitian_eigen(&omega, tol)?;
    let cut = rel(tol, e.values.first().copied().unwrap_or(0.0));
    let supp: Vec<_> = e
        .values
        .iter()
        .zip(&e.vectors)
        .filter(|(l, _)| **l > cut)
        .map(|(l, v)| (*l, v.clone()))
        .collect();
    let rk = supp.len();
    let d0 = h0.shape.total_dim();
    let mut pm = CMat::zeros(d0, rk);
    for (k, (_, v)) in supp.iter().enumerate() {
        pm.set_column(k, v);
    }
    let sq = crate::algebra::sqrt_positive(&omega, tol)?;
    let g = pm.adjoint() * sq.matrix();
    let mut psi = nalgebra::DVector::<Complex64>::zeros(d0 * rk);
    for i in 0..d0 {
        for k in 0..rk {
            psi[i * rk + k] = g[(k, i)];
        }
    }
    let al = Layout::single(fresh(&x.input().concat(x.output())?), AlgebraShape::full(rk));
    let rho_layout = Layout::new(vec![h0.clone()])?.concat(&al)?;
    let rho = AlgOperator::from_projected(rho_layout, &psi * psi.adjoint(), crate::DEFAULT_TOL)?;
    let lin = Layout::new(vec![h1.clone()])?.concat(&al)?;
    let wm = CMat::identity(h1.shape.total_dim(), h1.shape.total_dim()).kronecker(&pm);
    let lam = &f.lambda;
    let lambda = choi_of_fn(&lin, x.output(), |z| {
        let big = AlgOperator::from_projected(x.input().clone(), &wm * z.matrix() * wm.adjoint(), crate::DEFAULT_TOL)?;
        apply_map(lam, &big)
    })?;
    Ok(Realization {
        ancilla: al,
        rho,
        lambda,
        omega,
    })
}

/// `Φ = Λ ∘ (id_{H_1} ⊗ ℛ)` where `ℛ: B(H_0) → B(H_A)` has Choi matrix `ρ`.
pub fn from_realization(ancilla: &Layout, rho: &AlgOperator, lambda: &CpMapChoi, tol: f64) -> Result<CpMapChoi> {
    let rl = rho.layout();
    if rl.len() != 2 || rl.factors()[1].label != ancilla.factors()[0].label {
        return Err(Error::ShapeMismatch(format!(
            "ρ on {rl} is not a state on H_0 ⊗ {ancilla}"
        )));
    }
    if !section_contains(&crate::subspace::Subspace::full(rl), rho, tol)? {
        return Err(Error::violation("ρ is not a state", rho.trace_re() - 1.0));
    }
    if !is_channel(lambda, tol)? {
        return Err(Error::violation("Λ is not a channel", tp_residual(lambda)?));
    }
    let h0 = rl.factors()[0].clone();
    let h1 = lambda.input().factors()[0].clone();
    let a = ancilla.factors()[0].label;
    if lambda.input().len() != 2 || lambda.input().factors()[1].label != a {
        return Err(Error::ShapeMismatch(format!(
            "Λ input {} is not H_1 ⊗ {ancilla}",
            lambda.input()
        )));
    }
    let rc = permute(rho, &[a, h0.label])?;
    let input = Layout::new(vec![h1.clone(), h0])?;
    choi_of_fn(&input, lambda.output(), |z| {
        let t = link_product(&rc, z)?;
        let t = permute(&t, &[h1.label, a])?;
        apply_map(lambda, &t)
    })
}
