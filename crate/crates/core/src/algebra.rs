//! Block-diagonal algebras and their elements.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FactorLabel, Layout};
use crate::{rel, CMat};

/// The algebra `⊕_j B(C^{d_j})`, embedded block-diagonally in `B(C^D)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AlgebraShape {
    blocks: Vec<usize>,
}

impl TryFrom<Vec<usize>> for AlgebraShape {
    type Error = Error;
    fn try_from(b: Vec<usize>) -> Result<Self> {
        AlgebraShape::new(b)
    }
}

impl From<AlgebraShape> for Vec<usize> {
    fn from(s: AlgebraShape) -> Self {
        s.blocks
    }
}

impl AlgebraShape {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidShape("no blocks".into()));
        }
        if blocks.contains(&0) {
            return Err(Error::InvalidShape(format!("zero-sized block in {blocks:?}")));
        }
        Ok(AlgebraShape { blocks })
    }

    /// `B(C^d)`.
    pub fn full(d: usize) -> Self {
        AlgebraShape { blocks: vec![d.max(1)] }
    }

    /// The commutative algebra `C^m`.
    pub fn classical(m: usize) -> Self {
        AlgebraShape {
            blocks: vec![1; m.max(1)],
        }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// Complex dimension of the algebra, `Σ d_j²`.
    pub fn algebra_dim(&self) -> usize {
        self.blocks.iter().map(|d| d * d).sum()
    }

    pub fn block_offset(&self, j: usize) -> usize {
        self.blocks[..j].iter().sum()
    }

    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        let o = self.block_offset(j);
        o..o + self.blocks[j]
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.block_map()[i]
    }

    pub(crate) fn block_map(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(j, &d)| std::iter::repeat_n(j, d))
            .collect()
    }

    /// Trace of the unit, `t_A = Σ d_j`.
    pub fn unit_trace(&self) -> f64 {
        self.total_dim() as f64
    }

    pub fn is_classical(&self) -> bool {
        self.blocks.iter().all(|&d| d == 1)
    }
}

/// An element of the algebra described by a [`Layout`]. The matrix is
/// stored in full; entries outside the block pattern are exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgOperator {
    layout: Layout,
    matrix: CMat,
}

impl AlgOperator {
    /// Strict constructor: entries outside the block pattern must be zero.
    pub fn new(layout: Layout, matrix: CMat) -> Result<Self> {
        check_dims(&layout, &matrix)?;
        let leak = off_block_max(&layout, &matrix);
        if leak > 0.0 {
            return Err(Error::OffBlock(leak));
        }
        Ok(AlgOperator { layout, matrix })
    }

    /// Accepts off-pattern leakage up to `tol·max(1, ‖m‖_F)` and zeroes it.
    pub fn from_projected(layout: Layout, mut matrix: CMat, tol: f64) -> Result<Self> {
        check_dims(&layout, &matrix)?;
        let leak = off_block_max(&layout, &matrix);
        if leak > rel(tol, matrix.norm()) {
            return Err(Error::OffBlock(leak));
        }
        zero_off_block(&layout, &mut matrix);
        Ok(AlgOperator { layout, matrix })
    }

    /// For matrices whose pattern is correct by construction.
    pub(crate) fn from_trusted(layout: Layout, mut matrix: CMat) -> Self {
        debug_assert_eq!(matrix.nrows(), layout.dim());
        zero_off_block(&layout, &mut matrix);
        AlgOperator { layout, matrix }
    }

    /// Single-factor element of `B(H_shape)` with factor label 0.
    pub fn on_shape(shape: &AlgebraShape, matrix: CMat) -> Result<Self> {
        AlgOperator::new(Layout::single(0, shape.clone()), matrix)
    }

    pub fn zeros(layout: &Layout) -> Self {
        let d = layout.dim();
        AlgOperator {
            layout: layout.clone(),
            matrix: CMat::zeros(d, d),
        }
    }

    pub fn identity(layout: &Layout) -> Self {
        let d = layout.dim();
        AlgOperator {
            layout: layout.clone(),
            matrix: CMat::identity(d, d),
        }
    }

    /// The normalized trace `I / t_A`.
    pub fn tracial_state(layout: &Layout) -> Self {
        let d = layout.dim();
        AlgOperator::identity(layout).scale(1.0 / d as f64)
    }

    /// Diagonal operator with the given real entries.
    pub fn diagonal(layout: &Layout, diag: &[f64]) -> Result<Self> {
        if diag.len() != layout.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} diagonal entries for dimension {}",
                diag.len(),
                layout.dim()
            )));
        }
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Ok(AlgOperator {
            layout: layout.clone(),
            matrix: CMat::from_diagonal(&v),
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn trace_re(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn adjoint(&self) -> Self {
        AlgOperator {
            layout: self.layout.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn transpose(&self) -> Self {
        AlgOperator {
            layout: self.layout.clone(),
            matrix: self.matrix.transpose(),
        }
    }

    pub fn conj(&self) -> Self {
        AlgOperator {
            layout: self.layout.clone(),
            matrix: self.matrix.map(|z| z.conj()),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        AlgOperator {
            layout: self.layout.clone(),
            matrix: &self.matrix * Complex64::new(s, 0.0),
        }
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        AlgOperator {
            layout: self.layout.clone(),
            matrix: &self.matrix * s,
        }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &AlgOperator) -> Result<Self> {
        same_layout(&self.layout, &other.layout)?;
        Ok(AlgOperator::from_trusted(
            self.layout.clone(),
            &self.matrix * &other.matrix,
        ))
    }

    pub fn try_add(&self, other: &AlgOperator) -> Result<Self> {
        same_layout(&self.layout, &other.layout)?;
        Ok(AlgOperator {
            layout: self.layout.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn try_sub(&self, other: &AlgOperator) -> Result<Self> {
        same_layout(&self.layout, &other.layout)?;
        Ok(AlgOperator {
            layout: self.layout.clone(),
            matrix: &self.matrix - &other.matrix,
        })
    }

    /// Same matrix on factors renamed to `labels`.
    pub fn relabeled(&self, labels: &[FactorLabel]) -> Result<Self> {
        Ok(AlgOperator {
            layout: self.layout.relabel(labels)?,
            matrix: self.matrix.clone(),
        })
    }

    /// Same matrix on a layout with the same shapes.
    pub fn on_layout(&self, layout: &Layout) -> Result<Self> {
        if !self.layout.same_shapes(layout) {
            return Err(Error::ShapeMismatch(format!(
                "cannot move operator on {} to {}",
                self.layout, layout
            )));
        }
        Ok(AlgOperator {
            layout: layout.clone(),
            matrix: self.matrix.clone(),
        })
    }

    /// `(x + x*)/2`.
    pub fn hermitian_part(&self) -> Self {
        AlgOperator {
            layout: self.layout.clone(),
            matrix: (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0),
        }
    }

    /// `(x - x*)/(2i)`.
    pub fn antihermitian_part(&self) -> Self {
        AlgOperator {
            layout: self.layout.clone(),
            matrix: (&self.matrix - self.matrix.adjoint()) * Complex64::new(0.0, -0.5),
        }
    }

    /// Checks `‖x - x*‖_F ≤ tol·‖x‖_F` and returns the Hermitian part.
    pub fn check_hermitian(&self, tol: f64) -> Result<Self> {
        let n = self.matrix.norm();
        let r = (&self.matrix - self.matrix.adjoint()).norm();
        if r > tol * n {
            return Err(Error::NotHermitian(if n > 0.0 { r / n } else { r }));
        }
        Ok(self.hermitian_part())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.check_hermitian(tol).is_ok()
    }
}

fn check_dims(layout: &Layout, m: &CMat) -> Result<()> {
    let d = layout.dim();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {}x{}, layout {} has dimension {}",
            m.nrows(),
            m.ncols(),
            layout,
            d
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn off_block_max(layout: &Layout, m: &CMat) -> f64 {
    let ids = layout.sector_ids();
    let mut worst: f64 = 0.0;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if ids[r] != ids[c] {
                worst = worst.max(m[(r, c)].norm());
            }
        }
    }
    worst
}

fn zero_off_block(layout: &Layout, m: &mut CMat) {
    let ids = layout.sector_ids();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if ids[r] != ids[c] {
                m[(r, c)] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

fn same_layout(a: &Layout, b: &Layout) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("layouts {a} and {b} differ")));
    }
    Ok(())
}

impl Add for &AlgOperator {
    type Output = AlgOperator;
    /// Panics when the layouts differ; see [`AlgOperator::try_add`].
    fn add(self, rhs: &AlgOperator) -> AlgOperator {
        self.try_add(rhs).expect("layout mismatch in addition")
    }
}

impl Sub for &AlgOperator {
    type Output = AlgOperator;
    fn sub(self, rhs: &AlgOperator) -> AlgOperator {
        self.try_sub(rhs).expect("layout mismatch in subtraction")
    }
}

impl Mul<f64> for &AlgOperator {
    type Output = AlgOperator;
    fn mul(self, s: f64) -> AlgOperator {
        self.scale(s)
    }
}

impl Neg for &AlgOperator {
    type Output = AlgOperator;
    fn neg(self) -> AlgOperator {
        self.scale(-1.0)
    }
}

/// `Tr(a* b)`.
pub fn hs_inner(a: &AlgOperator, b: &AlgOperator) -> Result<Complex64> {
    same_layout(a.layout(), b.layout())?;
    Ok(a.matrix().dotc(b.matrix()))
}

pub fn transpose(a: &AlgOperator) -> AlgOperator {
    a.transpose()
}

pub fn identity(layout: &Layout) -> AlgOperator {
    AlgOperator::identity(layout)
}

pub fn tracial_state(layout: &Layout) -> AlgOperator {
    AlgOperator::tracial_state(layout)
}

/// Eigendecomposition of a Hermitian element, computed sector by sector.
/// Eigenvalues are sorted in descending order; each eigenvector is
/// supported on one sector and its first component of largest modulus
/// is real and positive.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<Complex64>>,
    /// Index into `layout.sectors()` of the sector carrying each vector.
    pub sectors: Vec<usize>,
}

pub fn hermitian_eigen(a: &AlgOperator, tol: f64) -> Result<Eigen> {
    let h = a.check_hermitian(tol)?;
    let d = h.dim();
    let mut pairs: Vec<(f64, DVector<Complex64>, usize)> = Vec::with_capacity(d);
    for (si, sec) in h.layout().sectors().iter().enumerate() {
        let idx = &sec.indices;
        let sub = CMat::from_fn(idx.len(), idx.len(), |r, c| h.matrix()[(idx[r], idx[c])]);
        let (vals, vecs) = crate::dense::herm_eigen(&sub)?;
        for (k, &l) in vals.iter().enumerate() {
            let mut v = DVector::zeros(d);
            for (r, &g) in idx.iter().enumerate() {
                v[g] = vecs[(r, k)];
            }
            fix_phase(&mut v);
            pairs.push((l, v, si));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut e = Eigen {
        values: Vec::with_capacity(d),
        vectors: Vec::with_capacity(d),
        sectors: Vec::with_capacity(d),
    };
    for (l, v, s) in pairs {
        e.values.push(l);
        e.vectors.push(v);
        e.sectors.push(s);
    }
    Ok(e)
}

pub(crate) fn fix_phase(v: &mut DVector<Complex64>) {
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        return;
    }
    let i = v.iter().position(|z| z.norm() >= m * (1.0 - 1e-10)).unwrap();
    let ph = v[i].conj() / v[i].norm();
    *v *= ph;
}

/// `Σ f(λ) v v*` over the spectrum of a Hermitian element.
pub fn spectral_map(a: &AlgOperator, tol: f64, f: impl Fn(f64) -> f64) -> Result<AlgOperator> {
    let e = hermitian_eigen(a, tol)?;
    let d = a.dim();
    let mut m = CMat::zeros(d, d);
    for (l, v) in e.values.iter().zip(&e.vectors) {
        let fl = f(*l);
        if fl != 0.0 {
            m += v * v.adjoint() * Complex64::new(fl, 0.0);
        }
    }
    Ok(AlgOperator::from_trusted(a.layout().clone(), m))
}

/// Smallest eigenvalue of the Hermitian part check.
pub fn min_eigenvalue(a: &AlgOperator, tol: f64) -> Result<f64> {
    let e = hermitian_eigen(a, tol)?;
    Ok(e.values.last().copied().unwrap_or(0.0))
}

pub(crate) fn op_norm_of(e: &Eigen) -> f64 {
    e.values.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `a ⪰ 0` up to `tol·max(1, ‖a‖)`; errors when `a` is not Hermitian.
pub fn is_positive(a: &AlgOperator, tol: f64) -> Result<bool> {
    let e = hermitian_eigen(a, tol)?;
    let lo = e.values.last().copied().unwrap_or(0.0);
    Ok(lo >= -rel(tol, op_norm_of(&e)))
}

pub(crate) fn require_positive(a: &AlgOperator, tol: f64) -> Result<Eigen> {
    let e = hermitian_eigen(a, tol)?;
    let lo = e.values.last().copied().unwrap_or(0.0);
    if lo < -rel(tol, op_norm_of(&e)) {
        return Err(Error::NotPositive(lo));
    }
    Ok(e)
}

/// Rank threshold used for supports: eigenvalues above `tol·max(1,‖a‖)`.
pub(crate) fn support_cut(e: &Eigen, tol: f64) -> f64 {
    rel(tol, op_norm_of(e))
}

/// Projection onto the range of a positive element.
pub fn support_projection(a: &AlgOperator, tol: f64) -> Result<AlgOperator> {
    let e = require_positive(a, tol)?;
    let cut = support_cut(&e, tol);
    let d = a.dim();
    let mut m = CMat::zeros(d, d);
    for (l, v) in e.values.iter().zip(&e.vectors) {
        if *l > cut {
            m += v * v.adjoint();
        }
    }
    Ok(AlgOperator::from_trusted(a.layout().clone(), m))
}

/// `c^{1/2}` of a positive element, with negative round-off clipped.
pub fn sqrt_positive(c: &AlgOperator, tol: f64) -> Result<AlgOperator> {
    require_positive(c, tol)?;
    spectral_map(c, tol, |l| l.max(0.0).sqrt())
}

/// `c^{+1/2}`: inverse square root on the support, zero elsewhere.
pub fn pinv_sqrt(c: &AlgOperator, tol: f64) -> Result<AlgOperator> {
    let e = require_positive(c, tol)?;
    let cut = support_cut(&e, tol);
    spectral_map(c, tol, |l| if l > cut { 1.0 / l.sqrt() } else { 0.0 })
}

/// `c^{1/2} a c^{1/2}` for positive `c`.
pub fn conjugate_by_sqrt(c: &AlgOperator, a: &AlgOperator, tol: f64) -> Result<AlgOperator> {
    same_layout(c.layout(), a.layout())?;
    let s = sqrt_positive(c, tol)?;
    s.compose(a)?.compose(&s)
}

pub(crate) fn matrix_unit(d: usize, i: usize, j: usize) -> CMat {
    let mut m = DMatrix::zeros(d, d);
    m[(i, j)] = Complex64::new(1.0, 0.0);
    m
}
