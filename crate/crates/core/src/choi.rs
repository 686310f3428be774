//! Linear maps between algebras, represented by Choi matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{hermitian_eigen, is_positive, matrix_unit, AlgOperator, AlgebraShape};
use crate::error::{Error, Result};
use crate::tensor::{link_product, partial_trace, permute, Factor, FactorLabel, Layout};
use crate::{rel, CMat};

/// A linear map `A → B` stored as its Choi matrix
/// `X = Σ T(E_ij) ⊗ E_ij`, summed over the matrix units of `A`.
/// The Choi matrix lives on the output factors followed by the input
/// factors; input and output labels are disjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct CpMapChoi {
    input: Layout,
    output: Layout,
    choi: AlgOperator,
}

impl CpMapChoi {
    /// Wrap a Choi matrix whose layout is `output ⊗ input`.
    pub fn new(input: Layout, output: Layout, choi: AlgOperator) -> Result<Self> {
        let want = output.concat(&input)?;
        if choi.layout() != &want {
            return Err(Error::ShapeMismatch(format!(
                "Choi matrix on {} but map is {} -> {}",
                choi.layout(),
                input,
                output
            )));
        }
        Ok(CpMapChoi {
            input,
            output,
            choi,
        })
    }

    /// Interpret an operator as the Choi matrix of a map from the factors
    /// `input` to the remaining factors, in their current order.
    pub fn from_operator(choi: &AlgOperator, input: &[FactorLabel]) -> Result<Self> {
        let in_l = choi.layout().select(input)?;
        let out_l = choi.layout().without(input);
        let mut order = out_l.labels();
        order.extend(input.iter().copied());
        let c = permute(choi, &order)?;
        CpMapChoi::new(in_l, out_l, c)
    }

    /// Identity map from `input` onto a copy labeled by `out_labels`.
    pub fn identity(input: &Layout, out_labels: &[FactorLabel]) -> Result<Self> {
        let out = input.relabel(out_labels)?;
        let psi = psi(&out, input)?;
        CpMapChoi::new(input.clone(), out, psi)
    }

    pub fn input(&self) -> &Layout {
        &self.input
    }

    pub fn output(&self) -> &Layout {
        &self.output
    }

    pub fn choi(&self) -> &AlgOperator {
        &self.choi
    }

    pub fn into_choi(self) -> AlgOperator {
        self.choi
    }
}

/// The unnormalized maximally entangled element `Ψ = Σ E_ij ⊗ E_ij`
/// over the matrix units of `input`, placed on `out ⊗ input`.
pub fn psi(out: &Layout, input: &Layout) -> Result<AlgOperator> {
    if !out.same_shapes(input) {
        return Err(Error::ShapeMismatch(format!(
            "Ψ needs equal shapes, got {out} and {input}"
        )));
    }
    let d = input.dim();
    let layout = out.concat(input)?;
    let ids = input.sector_ids();
    let mut m = CMat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            if ids[i] == ids[j] {
                m[(i * d + i, j * d + j)] = Complex64::new(1.0, 0.0);
            }
        }
    }
    AlgOperator::new(layout, m)
}

/// Matrix units `(i, j, E_ij)` allowed by the block pattern of `l`.
pub fn matrix_units(l: &Layout) -> Vec<(usize, usize, AlgOperator)> {
    let d = l.dim();
    let ids = l.sector_ids();
    let mut v = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if ids[i] == ids[j] {
                v.push((i, j, AlgOperator::from_trusted(l.clone(), matrix_unit(d, i, j))));
            }
        }
    }
    v
}

/// Choi matrix of the map given by a closure on `input`.
pub fn choi_of_fn(
    input: &Layout,
    output: &Layout,
    f: impl Fn(&AlgOperator) -> Result<AlgOperator>,
) -> Result<CpMapChoi> {
    let layout = output.concat(input)?;
    let mut x = CMat::zeros(layout.dim(), layout.dim());
    for (_, _, e) in matrix_units(input) {
        let te = f(&e)?;
        if !te.layout().same_shapes(output) {
            return Err(Error::ShapeMismatch(format!(
                "map produced {} instead of {}",
                te.layout(),
                output
            )));
        }
        x += te.matrix().kronecker(e.matrix());
    }
    let choi = AlgOperator::from_projected(layout, x, crate::DEFAULT_TOL)?;
    CpMapChoi::new(input.clone(), output.clone(), choi)
}

/// Choi matrix of the map `vec(a) ↦ M vec(a)` with column-stacking `vec`.
/// `action` has `D_out²` rows and `D_in²` columns.
pub fn choi_of_action(action: &CMat, input: &Layout, output: &Layout) -> Result<CpMapChoi> {
    let (di, do_) = (input.dim(), output.dim());
    if action.nrows() != do_ * do_ || action.ncols() != di * di {
        return Err(Error::ShapeMismatch(format!(
            "action matrix is {}x{}, need {}x{}",
            action.nrows(),
            action.ncols(),
            do_ * do_,
            di * di
        )));
    }
    choi_of_fn(input, output, |e| {
        let v = CMat::from_column_slice(di * di, 1, e.matrix().as_slice());
        let w = action * v;
        AlgOperator::from_projected(
            output.clone(),
            CMat::from_column_slice(do_, do_, w.as_slice()),
            crate::DEFAULT_TOL,
        )
    })
}

/// Action matrix of a map, the inverse of [`choi_of_action`] on the
/// allowed matrix units.
pub fn action_matrix(m: &CpMapChoi) -> Result<CMat> {
    let (di, do_) = (m.input.dim(), m.output.dim());
    let mut a = CMat::zeros(do_ * do_, di * di);
    for (i, j, e) in matrix_units(&m.input) {
        let t = apply_map(m, &e)?;
        let col = j * di + i;
        for (k, z) in t.matrix().iter().enumerate() {
            a[(k, col)] = *z;
        }
    }
    Ok(a)
}

/// `T(a) = Tr_in[(I ⊗ a^T) X]`. The operand may carry any labels as long
/// as its shapes match the input.
pub fn apply_map(m: &CpMapChoi, a: &AlgOperator) -> Result<AlgOperator> {
    let a = a.on_layout(&m.input)?;
    link_product(&m.choi, &a)
}

/// Composition `outer ∘ inner`. The output of `outer` keeps its labels
/// unless they clash with the input of `inner`, in which case it is moved
/// to fresh labels.
pub fn compose(outer: &CpMapChoi, inner: &CpMapChoi) -> Result<CpMapChoi> {
    if !outer.input.same_shapes(&inner.output) {
        return Err(Error::ShapeMismatch(format!(
            "cannot compose {} -> {} after {} -> {}",
            outer.input, outer.output, inner.input, inner.output
        )));
    }
    let mut out = outer.output.clone();
    if out.labels().iter().any(|l| inner.input.contains(*l) || inner.output.contains(*l)) {
        let base = inner.input.fresh_label(&[&inner.output, &out]).0;
        let fresh: Vec<FactorLabel> = (0..out.len() as u32).map(|k| FactorLabel(base + k)).collect();
        out = out.relabel(&fresh)?;
    }
    let mut labels = out.labels();
    labels.extend(inner.output.labels());
    let outer_choi = outer.choi.relabeled(&labels)?;
    let c = link_product(&outer_choi, &inner.choi)?;
    CpMapChoi::new(inner.input.clone(), out, c)
}

pub fn is_cp(m: &CpMapChoi, tol: f64) -> Result<bool> {
    is_positive(&m.choi, tol)
}

/// Deviation `‖Tr_out X - I_in‖_F`.
pub fn tp_residual(m: &CpMapChoi) -> Result<f64> {
    let t = partial_trace(&m.choi, &m.output.labels())?;
    Ok((t.matrix() - CMat::identity(t.dim(), t.dim())).norm())
}

pub fn is_tp(m: &CpMapChoi, tol: f64) -> Result<bool> {
    Ok(tp_residual(m)? <= rel(tol, (m.input.dim() as f64).sqrt()))
}

pub fn is_channel(m: &CpMapChoi, tol: f64) -> Result<bool> {
    Ok(is_cp(m, tol)? && is_tp(m, tol)?)
}

/// Choi matrix of the Hilbert–Schmidt adjoint, `Tr(T*(b) a) = Tr(b T(a))`
/// for Hermitian arguments.
pub fn adjoint_map(m: &CpMapChoi) -> Result<CpMapChoi> {
    let mut order = m.input.labels();
    order.extend(m.output.labels());
    let z = permute(&m.choi.conj(), &order)?;
    CpMapChoi::new(m.output.clone(), m.input.clone(), z)
}

/// `S^T(a) = S(a^T)^T`, whose Choi matrix is the transpose of `X_S`.
pub fn transpose_map(m: &CpMapChoi) -> CpMapChoi {
    CpMapChoi {
        input: m.input.clone(),
        output: m.output.clone(),
        choi: m.choi.transpose(),
    }
}

/// Kraus operators `K_k` with `T(a) = Σ K_k a K_k*`, taken from the
/// eigenvectors of the Choi matrix with eigenvalue above the cut-off.
/// Each `K_k` is a `D_out × D_in` matrix.
pub fn kraus(m: &CpMapChoi, tol: f64) -> Result<Vec<CMat>> {
    Ok(kraus_with_sectors(m, tol)?.into_iter().map(|(k, _)| k).collect())
}

fn kraus_with_sectors(m: &CpMapChoi, tol: f64) -> Result<Vec<(CMat, usize)>> {
    let e = hermitian_eigen(&m.choi, tol)?;
    let lo = e.values.last().copied().unwrap_or(0.0);
    let scale = crate::algebra::op_norm_of(&e);
    if lo < -rel(tol, scale) {
        return Err(Error::NotPositive(lo));
    }
    let cut = rel(tol, scale);
    let (di, do_) = (m.input.dim(), m.output.dim());
    let in_ids = m.input.sector_ids();
    let mut out = Vec::new();
    for (l, v) in e.values.iter().zip(&e.vectors) {
        if *l <= cut {
            continue;
        }
        let s = l.sqrt();
        let k = DMatrix::from_fn(do_, di, |o, i| v[o * di + i] * s);
        let col = (0..di).find(|&i| (0..do_).any(|o| k[(o, i)].norm() > 0.0)).unwrap_or(0);
        out.push((k, in_ids[col]));
    }
    Ok(out)
}

/// One summand of a Stinespring dilation: the Kraus operators that act
/// on a single sector of the input algebra.
#[derive(Clone, Debug)]
pub struct DilationBlock {
    /// Global basis indices of the input sector.
    pub input_indices: Vec<usize>,
    /// `K_k` restricted to the sector, each `D_out × d_n`.
    pub kraus: Vec<CMat>,
}

/// `V : H_out → ⊕_n C^{r_n} ⊗ H_{A_n}` with `T(a) = V*(⊕_n I ⊗ a_n)V`.
#[derive(Clone, Debug)]
pub struct Stinespring {
    pub blocks: Vec<DilationBlock>,
}

impl Stinespring {
    /// Dilation dimension `Σ_n r_n d_n`.
    pub fn dilation_dim(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.kraus.len() * b.input_indices.len())
            .sum()
    }

    /// The stacked matrix of `V`; block `n` holds `Σ_k |k⟩ ⊗ K_k*`.
    pub fn isometry(&self) -> CMat {
        let d_out = self.blocks.first().and_then(|b| b.kraus.first()).map_or(0, |k| k.nrows());
        let mut v = CMat::zeros(self.dilation_dim(), d_out);
        let mut row = 0;
        for b in &self.blocks {
            for k in &b.kraus {
                let ka = k.adjoint();
                v.view_mut((row, 0), (ka.nrows(), d_out)).copy_from(&ka);
                row += ka.nrows();
            }
        }
        v
    }

    /// Evaluate `V*(⊕ I ⊗ a_n)V` on a full input matrix.
    pub fn apply(&self, a: &CMat) -> CMat {
        let d_out = self.blocks.first().and_then(|b| b.kraus.first()).map_or(0, |k| k.nrows());
        let mut r = CMat::zeros(d_out, d_out);
        for b in &self.blocks {
            let idx = &b.input_indices;
            let an = CMat::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])]);
            for k in &b.kraus {
                r += k * &an * k.adjoint();
            }
        }
        r
    }
}

/// Minimal Stinespring dilation, grouped by input sector.
pub fn minimal_stinespring(m: &CpMapChoi, tol: f64) -> Result<Stinespring> {
    let ks = kraus_with_sectors(m, tol)?;
    let sectors = m.input.sectors();
    let ids = m.input.sector_ids();
    let mut blocks = Vec::new();
    for sec in &sectors {
        let sid = ids[sec.indices[0]];
        let kr: Vec<CMat> = ks
            .iter()
            .filter(|(_, s)| *s == sid)
            .map(|(k, _)| {
                let idx = &sec.indices;
                CMat::from_fn(k.nrows(), idx.len(), |o, i| k[(o, idx[i])])
            })
            .collect();
        blocks.push(DilationBlock {
            input_indices: sec.indices.clone(),
            kraus: kr,
        });
    }
    Ok(Stinespring { blocks })
}

/// Measurement map `a ↦ Σ_k Tr(E_k a) |k⟩⟨k|` into `C^m` under `label`.
pub fn povm_map(effects: &[AlgOperator], label: FactorLabel) -> Result<CpMapChoi> {
    let first = effects
        .first()
        .ok_or_else(|| Error::ShapeMismatch("empty list of effects".into()))?;
    let input = first.layout().clone();
    let out = Layout::new(vec![Factor {
        label,
        shape: AlgebraShape::classical(effects.len()),
    }])?;
    let m = effects.len();
    let mut x = CMat::zeros(m * input.dim(), m * input.dim());
    for (k, e) in effects.iter().enumerate() {
        if e.layout() != &input {
            return Err(Error::ShapeMismatch("effects on different layouts".into()));
        }
        x += crate::tensor::basis_projector(m, k).kronecker(&e.matrix().transpose());
    }
    CpMapChoi::new(input.clone(), out.clone(), AlgOperator::from_trusted(out.concat(&input)?, x))
}
