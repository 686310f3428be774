//! Labeled tensor factors and the operations that act on them.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgOperator, AlgebraShape};
use crate::error::{Error, Result};
use crate::CMat;

/// The name of one tensor factor. Labels are stable across operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactorLabel(pub u32);

impl fmt::Display for FactorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub label: FactorLabel,
    pub shape: AlgebraShape,
}

impl Factor {
    pub fn new(label: u32, shape: AlgebraShape) -> Self {
        Factor {
            label: FactorLabel(label),
            shape,
        }
    }
}

/// One joint block of a layout: the block index on every factor and
/// the global basis indices it spans, in increasing order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sector {
    pub blocks: Vec<usize>,
    pub indices: Vec<usize>,
}

/// An ordered list of labeled factors. The first factor is the most
/// significant one in the Kronecker ordering of basis indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Factor>", into = "Vec<Factor>")]
pub struct Layout {
    factors: Vec<Factor>,
}

impl TryFrom<Vec<Factor>> for Layout {
    type Error = Error;
    fn try_from(factors: Vec<Factor>) -> Result<Self> {
        Layout::new(factors)
    }
}

impl From<Layout> for Vec<Factor> {
    fn from(l: Layout) -> Self {
        l.factors
    }
}

impl Layout {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for f in &factors {
            if !seen.insert(f.label) {
                return Err(Error::DuplicateLabel(f.label.0));
            }
        }
        Ok(Layout { factors })
    }

    pub fn single(label: u32, shape: AlgebraShape) -> Self {
        Layout {
            factors: vec![Factor::new(label, shape)],
        }
    }

    /// The layout of the scalars: no factors, dimension one.
    pub fn scalar() -> Self {
        Layout { factors: vec![] }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.shape.total_dim()).product()
    }

    pub fn labels(&self) -> Vec<FactorLabel> {
        self.factors.iter().map(|f| f.label).collect()
    }

    pub fn max_label(&self) -> Option<u32> {
        self.factors.iter().map(|f| f.label.0).max()
    }

    pub fn position(&self, label: FactorLabel) -> Option<usize> {
        self.factors.iter().position(|f| f.label == label)
    }

    pub fn contains(&self, label: FactorLabel) -> bool {
        self.position(label).is_some()
    }

    pub fn factor(&self, label: FactorLabel) -> Result<&Factor> {
        self.factors
            .iter()
            .find(|f| f.label == label)
            .ok_or(Error::UnknownLabel(label.0))
    }

    pub fn concat(&self, other: &Layout) -> Result<Layout> {
        let mut f = self.factors.clone();
        f.extend(other.factors.iter().cloned());
        Layout::new(f)
    }

    /// The factors of `self` whose labels are not listed, in order.
    pub fn without(&self, labels: &[FactorLabel]) -> Layout {
        Layout {
            factors: self
                .factors
                .iter()
                .filter(|f| !labels.contains(&f.label))
                .cloned()
                .collect(),
        }
    }

    /// The listed factors, in the order given.
    pub fn select(&self, labels: &[FactorLabel]) -> Result<Layout> {
        let f = labels
            .iter()
            .map(|l| self.factor(*l).cloned())
            .collect::<Result<Vec<_>>>()?;
        Layout::new(f)
    }

    pub fn shapes(&self) -> Vec<&AlgebraShape> {
        self.factors.iter().map(|f| &f.shape).collect()
    }

    /// True when both layouts have the same shapes in the same order,
    /// ignoring labels.
    pub fn same_shapes(&self, other: &Layout) -> bool {
        self.shapes() == other.shapes()
    }

    pub fn relabel(&self, labels: &[FactorLabel]) -> Result<Layout> {
        if labels.len() != self.factors.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} factors",
                labels.len(),
                self.factors.len()
            )));
        }
        Layout::new(
            self.factors
                .iter()
                .zip(labels)
                .map(|(f, l)| Factor {
                    label: *l,
                    shape: f.shape.clone(),
                })
                .collect(),
        )
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.factors.len()];
        for i in (0..self.factors.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.factors[i + 1].shape.total_dim();
        }
        s
    }

    pub fn digits(&self, mut idx: usize) -> Vec<usize> {
        let mut d = vec![0; self.factors.len()];
        for i in (0..self.factors.len()).rev() {
            let n = self.factors[i].shape.total_dim();
            d[i] = idx % n;
            idx /= n;
        }
        d
    }

    pub fn compose_index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (d, f)| acc * f.shape.total_dim() + d)
    }

    /// Sector id of every basis index. Two indices carry an allowed matrix
    /// entry exactly when their sector ids agree.
    pub fn sector_ids(&self) -> Vec<usize> {
        let d = self.dim();
        let mut ids = vec![0usize; d];
        let maps: Vec<Vec<usize>> = self.factors.iter().map(|f| f.shape.block_map()).collect();
        for (idx, id) in ids.iter_mut().enumerate() {
            let dg = self.digits(idx);
            let mut s = 0;
            for (k, f) in self.factors.iter().enumerate() {
                s = s * f.shape.blocks().len() + maps[k][dg[k]];
            }
            *id = s;
        }
        ids
    }

    /// Sectors in lexicographic order of their block multi-index.
    pub fn sectors(&self) -> Vec<Sector> {
        let ids = self.sector_ids();
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, s) in ids.iter().enumerate() {
            groups.entry(*s).or_default().push(i);
        }
        groups
            .into_values()
            .map(|indices| {
                let dg = self.digits(indices[0]);
                let blocks = self
                    .factors
                    .iter()
                    .zip(dg)
                    .map(|(f, d)| f.shape.block_of(d))
                    .collect();
                Sector { blocks, indices }
            })
            .collect()
    }

    /// Split every basis index into the part on the listed factors and the
    /// rest. Returns `(listed_index, rest_index)` per global index, each
    /// measured in the listed order and in the remaining factor order.
    pub(crate) fn split_indices(&self, listed: &[FactorLabel]) -> Result<Vec<(usize, usize)>> {
        let pos = listed
            .iter()
            .map(|l| self.position(*l).ok_or(Error::UnknownLabel(l.0)))
            .collect::<Result<Vec<_>>>()?;
        let rest: Vec<usize> = (0..self.factors.len()).filter(|i| !pos.contains(i)).collect();
        let dims: Vec<usize> = self.factors.iter().map(|f| f.shape.total_dim()).collect();
        let mut out = Vec::with_capacity(self.dim());
        for idx in 0..self.dim() {
            let dg = self.digits(idx);
            let a = pos.iter().fold(0, |acc, &p| acc * dims[p] + dg[p]);
            let b = rest.iter().fold(0, |acc, &p| acc * dims[p] + dg[p]);
            out.push((a, b));
        }
        Ok(out)
    }

    /// A label not used by this layout or by any of `others`.
    pub fn fresh_label(&self, others: &[&Layout]) -> FactorLabel {
        let m = std::iter::once(self)
            .chain(others.iter().copied())
            .filter_map(|l| l.max_label())
            .max();
        FactorLabel(m.map_or(0, |m| m + 1))
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|x| format!("{}:{:?}", x.label, x.shape.blocks()))
            .collect();
        write!(f, "[{}]", parts.join(" ⊗ "))
    }
}

/// Alias used where an operator is thought of as living on labeled factors.
pub type LabeledOperator = AlgOperator;

pub fn tensor(x: &AlgOperator, y: &AlgOperator) -> Result<AlgOperator> {
    let layout = x.layout().concat(y.layout())?;
    Ok(AlgOperator::from_trusted(layout, x.matrix().kronecker(y.matrix())))
}

pub fn tensor_all(ops: &[&AlgOperator]) -> Result<AlgOperator> {
    let mut acc = AlgOperator::identity(&Layout::scalar());
    for o in ops {
        acc = tensor(&acc, o)?;
    }
    Ok(acc)
}

pub fn partial_trace(x: &AlgOperator, over: &[FactorLabel]) -> Result<AlgOperator> {
    let split = x.layout().split_indices(over)?;
    let kept = x.layout().without(over);
    let dk = kept.dim();
    let mut out = CMat::zeros(dk, dk);
    let m = x.matrix();
    for c in 0..m.ncols() {
        let (tc, kc) = split[c];
        for r in 0..m.nrows() {
            let (tr, kr) = split[r];
            if tr == tc {
                out[(kr, kc)] += m[(r, c)];
            }
        }
    }
    Ok(AlgOperator::from_trusted(kept, out))
}

/// Transpose on the listed factors, leaving the others untouched.
pub fn partial_transpose(x: &AlgOperator, over: &[FactorLabel]) -> Result<AlgOperator> {
    let l = x.layout();
    let pos = over
        .iter()
        .map(|lb| l.position(*lb).ok_or(Error::UnknownLabel(lb.0)))
        .collect::<Result<Vec<_>>>()?;
    let strides = l.strides();
    let d = l.dim();
    // Global index = listed part + rest part, both as stride-weighted sums.
    let listed: Vec<usize> = (0..d)
        .map(|i| {
            let dg = l.digits(i);
            pos.iter().map(|&p| dg[p] * strides[p]).sum()
        })
        .collect();
    let m = x.matrix();
    let mut out = CMat::zeros(d, d);
    for c in 0..d {
        for r in 0..d {
            let nr = r - listed[r] + listed[c];
            let nc = c - listed[c] + listed[r];
            out[(nr, nc)] = m[(r, c)];
        }
    }
    Ok(AlgOperator::from_trusted(l.clone(), out))
}

/// Reorder factors so that they appear in the order given by `order`.
pub fn permute(x: &AlgOperator, order: &[FactorLabel]) -> Result<AlgOperator> {
    let l = x.layout();
    if order.len() != l.len() {
        return Err(Error::ShapeMismatch(format!(
            "permutation lists {} labels, layout has {}",
            order.len(),
            l.len()
        )));
    }
    let target = l.select(order)?;
    let split = l.split_indices(order)?;
    let m = x.matrix();
    let d = l.dim();
    let mut out = CMat::zeros(d, d);
    for c in 0..d {
        for r in 0..d {
            out[(split[r].0, split[c].0)] = m[(r, c)];
        }
    }
    Ok(AlgOperator::from_trusted(target, out))
}

/// Link product over the factors shared by `x` and `y`:
/// `x * y = Tr_S[(I ⊗ y^{T_S})(x ⊗ I)]`, where `S` is the set of shared
/// labels. The result carries the remaining factors of `x` followed by
/// those of `y`.
pub fn link_product(x: &AlgOperator, y: &AlgOperator) -> Result<AlgOperator> {
    let lx = x.layout();
    let ly = y.layout();
    let shared: Vec<FactorLabel> = lx.labels().into_iter().filter(|l| ly.contains(*l)).collect();
    for s in &shared {
        if lx.factor(*s)?.shape != ly.factor(*s)?.shape {
            return Err(Error::ShapeMismatch(format!(
                "shared factor {s} has different shapes"
            )));
        }
    }
    let la = lx.without(&shared);
    let lb = ly.without(&shared);
    let out_layout = la.concat(&lb)?;
    let (da, db) = (la.dim(), lb.dim());
    let ds: usize = lx.select(&shared)?.dim();
    let sx = lx.split_indices(&shared)?;
    let sy = ly.split_indices(&shared)?;

    let xm = x.matrix();
    let mut xr = CMat::zeros(da * da, ds * ds);
    for c in 0..xm.ncols() {
        let (s, a2) = sx[c];
        for r in 0..xm.nrows() {
            let (s2, a) = sx[r];
            xr[(a * da + a2, s2 * ds + s)] = xm[(r, c)];
        }
    }
    let ym = y.matrix();
    let mut yr = CMat::zeros(ds * ds, db * db);
    for c in 0..ym.ncols() {
        let (s, b2) = sy[c];
        for r in 0..ym.nrows() {
            let (s2, b) = sy[r];
            yr[(s2 * ds + s, b * db + b2)] = ym[(r, c)];
        }
    }
    let prod = xr * yr;
    let mut out = CMat::zeros(da * db, da * db);
    for a in 0..da {
        for a2 in 0..da {
            for b in 0..db {
                for b2 in 0..db {
                    out[(a * db + b, a2 * db + b2)] = prod[(a * da + a2, b * db + b2)];
                }
            }
        }
    }
    AlgOperator::from_projected(out_layout, out, crate::DEFAULT_TOL)
}

/// `I_l ⊗ x` for a layout `l` placed in front.
pub fn identity_tensor(l: &Layout, x: &AlgOperator) -> Result<AlgOperator> {
    tensor(&AlgOperator::identity(l), x)
}

pub(crate) fn basis_projector(d: usize, i: usize) -> CMat {
    let mut m = DMatrix::zeros(d, d);
    m[(i, i)] = Complex64::new(1.0, 0.0);
    m
}
