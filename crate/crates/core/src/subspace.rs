//! Self-adjoint operator subspaces of an algebra.
//!
//! A subspace is stored as a real orthonormal basis of Hermitian elements,
//! expressed in coordinates where the Hilbert–Schmidt inner product of
//! Hermitian operators becomes the Euclidean one.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::algebra::{is_positive, support_projection, AlgOperator};
use crate::choi::{adjoint_map, apply_map, CpMapChoi};
use crate::error::{Error, Result};
use crate::tensor::{identity_tensor, partial_trace, FactorLabel, Layout};
use crate::dense::{self, RMat};
use crate::{rel, CMat};

type RVec = DVector<f64>;

#[derive(Clone, Copy, Debug)]
enum Coord {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn coords(l: &Layout) -> Vec<Coord> {
    let mut v = Vec::new();
    for s in l.sectors() {
        let idx = &s.indices;
        for (a, &r) in idx.iter().enumerate() {
            v.push(Coord::Diag(r));
            for &c in &idx[a + 1..] {
                v.push(Coord::Re(r, c));
                v.push(Coord::Im(r, c));
            }
        }
    }
    v
}

/// Real coordinates of a Hermitian operator (the anti-Hermitian part is
/// ignored).
fn to_real(cs: &[Coord], m: &CMat) -> RVec {
    RVec::from_iterator(
        cs.len(),
        cs.iter().map(|c| match *c {
            Coord::Diag(i) => m[(i, i)].re,
            Coord::Re(r, c) => SQRT2 * 0.5 * (m[(r, c)].re + m[(c, r)].re),
            Coord::Im(r, c) => SQRT2 * 0.5 * (m[(r, c)].im - m[(c, r)].im),
        }),
    )
}

fn from_real(cs: &[Coord], l: &Layout, v: &[f64]) -> AlgOperator {
    let d = l.dim();
    let mut m = CMat::zeros(d, d);
    for (c, &x) in cs.iter().zip(v) {
        match *c {
            Coord::Diag(i) => m[(i, i)] += Complex64::new(x, 0.0),
            Coord::Re(r, c) => {
                m[(r, c)] += Complex64::new(x / SQRT2, 0.0);
                m[(c, r)] += Complex64::new(x / SQRT2, 0.0);
            }
            Coord::Im(r, c) => {
                m[(r, c)] += Complex64::new(0.0, x / SQRT2);
                m[(c, r)] += Complex64::new(0.0, -x / SQRT2);
            }
        }
    }
    AlgOperator::from_trusted(l.clone(), m)
}

/// A self-adjoint subspace `L = L*` of the algebra of a layout.
#[derive(Clone, Debug)]
pub struct Subspace {
    layout: Layout,
    basis: RMat,
}

impl Subspace {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Real dimension of the Hermitian part, equal to the complex
    /// dimension of the subspace.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Dimension of the ambient algebra.
    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthonormal Hermitian basis.
    pub fn basis(&self) -> Vec<AlgOperator> {
        let cs = coords(&self.layout);
        (0..self.dim())
            .map(|k| from_real(&cs, &self.layout, self.basis.column(k).as_slice()))
            .collect()
    }

    pub fn zero(layout: &Layout) -> Self {
        let n = layout.sectors().iter().map(|s| s.indices.len().pow(2)).sum();
        Subspace {
            layout: layout.clone(),
            basis: RMat::zeros(n, 0),
        }
    }

    pub fn full(layout: &Layout) -> Self {
        let n = layout.sectors().iter().map(|s| s.indices.len().pow(2)).sum();
        Subspace {
            layout: layout.clone(),
            basis: RMat::identity(n, n),
        }
    }

    /// `[I]`, the multiples of the unit.
    pub fn identity_line(layout: &Layout) -> Self {
        span(layout, &[AlgOperator::identity(layout)], crate::DEFAULT_TOL)
            .expect("unit spans a line")
    }

    /// The subalgebra `p A p` for a projection `p` of the algebra.
    pub fn corner(p: &AlgOperator, tol: f64) -> Result<Self> {
        let l = p.layout();
        let gens: Vec<AlgOperator> = crate::choi::matrix_units(l)
            .into_iter()
            .map(|(_, _, e)| p.compose(&e).and_then(|x| x.compose(p)))
            .collect::<Result<_>>()?;
        span(l, &gens, tol)
    }

    fn coords_of(&self, x: &AlgOperator) -> Result<(RVec, RVec)> {
        if x.layout() != &self.layout {
            return Err(Error::ShapeMismatch(format!(
                "operator on {} tested against subspace of {}",
                x.layout(),
                self.layout
            )));
        }
        let cs = coords(&self.layout);
        Ok((
            to_real(&cs, x.hermitian_part().matrix()),
            to_real(&cs, x.antihermitian_part().matrix()),
        ))
    }

    /// `‖x - P x‖_F` for the orthogonal projection `P` onto the subspace.
    pub fn distance(&self, x: &AlgOperator) -> Result<f64> {
        let (h, a) = self.coords_of(x)?;
        let rh = &h - &self.basis * (self.basis.transpose() * &h);
        let ra = &a - &self.basis * (self.basis.transpose() * &a);
        Ok((rh.norm_squared() + ra.norm_squared()).sqrt())
    }

    /// Membership with residual bound `tol·max(1, ‖x‖_F)`.
    pub fn contains(&self, x: &AlgOperator, tol: f64) -> Result<bool> {
        Ok(self.distance(x)? <= rel(tol, x.norm()))
    }

    pub fn project(&self, x: &AlgOperator) -> Result<AlgOperator> {
        let (h, a) = self.coords_of(x)?;
        let cs = coords(&self.layout);
        let ph = &self.basis * (self.basis.transpose() * &h);
        let pa = &self.basis * (self.basis.transpose() * &a);
        let hh = from_real(&cs, &self.layout, ph.as_slice());
        let aa = from_real(&cs, &self.layout, pa.as_slice());
        Ok(&hh + &aa.scale_c(Complex64::new(0.0, 1.0)))
    }

    pub fn orthocomplement(&self) -> Self {
        Subspace {
            layout: self.layout.clone(),
            basis: complement_basis(&self.basis),
        }
    }

    /// `L^T`; the map `x ↦ x^T` negates the imaginary coordinates.
    pub fn transpose(&self) -> Self {
        let cs = coords(&self.layout);
        let mut b = self.basis.clone();
        for (i, c) in cs.iter().enumerate() {
            if matches!(c, Coord::Im(..)) {
                b.row_mut(i).neg_mut();
            }
        }
        Subspace {
            layout: self.layout.clone(),
            basis: b,
        }
    }

    /// `‖P_1 - P_2‖_F` for the orthogonal projections onto both subspaces.
    pub fn projector_distance(&self, other: &Subspace) -> Result<f64> {
        self.check_same(other)?;
        // ‖P_1 - P_2‖² = ‖(I - P_2)Q_1‖² + ‖(I - P_1)Q_2‖², free of cancellation
        let a = &self.basis - &other.basis * (other.basis.transpose() * &self.basis);
        let b = &other.basis - &self.basis * (self.basis.transpose() * &other.basis);
        Ok((a.norm_squared() + b.norm_squared()).sqrt())
    }

    pub fn equals(&self, other: &Subspace, tol: f64) -> Result<bool> {
        Ok(self.projector_distance(other)? <= tol * (self.dim().max(1) as f64).sqrt())
    }

    /// `self ⊆ other`.
    pub fn is_subspace_of(&self, other: &Subspace, tol: f64) -> Result<bool> {
        self.check_same(other)?;
        let r = &self.basis - &other.basis * (other.basis.transpose() * &self.basis);
        Ok(r.norm() <= tol * (self.dim().max(1) as f64).sqrt())
    }

    /// `L ⊗ M` on the concatenated layout.
    pub fn tensor(&self, other: &Subspace) -> Result<Self> {
        let l = self.layout.concat(&other.layout)?;
        let a = self.basis();
        let b = other.basis();
        let mut ops = Vec::with_capacity(a.len() * b.len());
        for x in &a {
            for y in &b {
                ops.push(crate::tensor::tensor(x, y)?);
            }
        }
        span(&l, &ops, crate::DEFAULT_TOL)
    }

    /// Same subspace with factors renamed.
    pub fn relabeled(&self, labels: &[FactorLabel]) -> Result<Self> {
        Ok(Subspace {
            layout: self.layout.relabel(labels)?,
            basis: self.basis.clone(),
        })
    }

    /// Subspace moved to a layout with identical shapes.
    pub fn on_layout(&self, layout: &Layout) -> Result<Self> {
        if !self.layout.same_shapes(layout) {
            return Err(Error::ShapeMismatch(format!(
                "cannot move subspace of {} to {}",
                self.layout, layout
            )));
        }
        Ok(Subspace {
            layout: layout.clone(),
            basis: self.basis.clone(),
        })
    }

    /// Image under a permutation of factors.
    pub fn permuted(&self, order: &[FactorLabel]) -> Result<Self> {
        let ops: Vec<AlgOperator> = self
            .basis()
            .iter()
            .map(|b| crate::tensor::permute(b, order))
            .collect::<Result<_>>()?;
        let l = self.layout.select(order)?;
        span(&l, &ops, crate::DEFAULT_TOL)
    }

    fn check_same(&self, other: &Subspace) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::ShapeMismatch(format!(
                "subspaces of {} and {}",
                self.layout, other.layout
            )));
        }
        Ok(())
    }
}

/// Orthonormal basis of the column space, keeping singular values above
/// `tol·σ_max`.
fn range_basis(m: &RMat, tol: f64) -> Result<RMat> {
    range_basis_above(m, tol, 0.0)
}

/// As [`range_basis`], with the cut-off measured against at least `floor`.
fn range_basis_above(m: &RMat, tol: f64, floor: f64) -> Result<RMat> {
    let (sv, u) = dense::svd_left(m)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(RMat::zeros(m.nrows(), 0));
    }
    let k = sv.iter().filter(|&&s| s > tol * smax.max(floor)).count();
    Ok(u.columns(0, k).into_owned())
}

/// Orthonormal basis of the complement of the span of orthonormal columns.
fn complement_basis(q: &RMat) -> RMat {
    let n = q.nrows();
    let k = q.ncols();
    if k == 0 {
        return RMat::identity(n, n);
    }
    if k >= n {
        return RMat::zeros(n, 0);
    }
    dense::full_q(q).columns(k, n - k).into_owned()
}

/// Smallest self-adjoint subspace containing the given operators.
pub fn span(layout: &Layout, ops: &[AlgOperator], tol: f64) -> Result<Subspace> {
    let cs = coords(layout);
    let mut cols = Vec::with_capacity(2 * ops.len());
    for o in ops {
        if o.layout() != layout {
            return Err(Error::ShapeMismatch(format!(
                "spanning operator on {} for subspace of {}",
                o.layout(),
                layout
            )));
        }
        cols.push(to_real(&cs, o.hermitian_part().matrix()));
        let a = o.antihermitian_part();
        if a.norm() > 0.0 {
            cols.push(to_real(&cs, a.matrix()));
        }
    }
    let m = if cols.is_empty() {
        RMat::zeros(cs.len(), 0)
    } else {
        RMat::from_columns(&cols)
    };
    Ok(Subspace {
        layout: layout.clone(),
        basis: range_basis(&m, tol)?,
    })
}

pub fn orthocomplement(l: &Subspace) -> Subspace {
    l.orthocomplement()
}

pub fn join(a: &Subspace, b: &Subspace, tol: f64) -> Result<Subspace> {
    a.check_same(b)?;
    let mut m = RMat::zeros(a.ambient_dim(), a.dim() + b.dim());
    m.columns_mut(0, a.dim()).copy_from(&a.basis);
    m.columns_mut(a.dim(), b.dim()).copy_from(&b.basis);
    Ok(Subspace {
        layout: a.layout.clone(),
        basis: range_basis(&m, tol)?,
    })
}

/// `L_1 ∧ L_2`, from the unit vectors of `L_1` whose component outside
/// `L_2` vanishes.
pub fn meet(a: &Subspace, b: &Subspace, tol: f64) -> Result<Subspace> {
    a.check_same(b)?;
    if a.dim() == 0 || b.dim() == 0 {
        return Ok(Subspace::zero(&a.layout));
    }
    // Rayleigh quotient of the squared distance to L_2 on L_1.
    let g = b.basis.transpose() * &a.basis;
    let mut h = RMat::identity(a.dim(), a.dim()) - g.transpose() * &g;
    h = (&h + h.transpose()) * 0.5;
    let (vals, vecs) = dense::sym_eigen(&h)?;
    let k = vals.iter().filter(|&&l| l <= tol).count();
    let w = vecs.columns(0, k).into_owned();
    let v = &a.basis * w;
    Ok(Subspace {
        layout: a.layout.clone(),
        basis: range_basis(&v, tol)?,
    })
}

/// Real matrix of a Hermitian-preserving linear map between the Hermitian
/// coordinates of two layouts.
fn real_matrix(
    input: &Layout,
    output: &Layout,
    f: &dyn Fn(&AlgOperator) -> Result<AlgOperator>,
) -> Result<RMat> {
    let ci = coords(input);
    let co = coords(output);
    let mut m = RMat::zeros(co.len(), ci.len());
    let mut e = vec![0.0; ci.len()];
    for k in 0..ci.len() {
        e[k] = 1.0;
        let x = from_real(&ci, input, &e);
        e[k] = 0.0;
        let y = f(&x)?;
        if !y.layout().same_shapes(output) {
            return Err(Error::ShapeMismatch(format!(
                "map produced {} instead of {}",
                y.layout(),
                output
            )));
        }
        m.set_column(k, &to_real(&co, y.matrix()));
    }
    Ok(m)
}

/// `S^{-1}(L_0) = {x : S(x) ∈ L_0}`, from the kernel of `(I - P_0) S`.
pub fn preimage_with(
    input: &Layout,
    f: &dyn Fn(&AlgOperator) -> Result<AlgOperator>,
    l0: &Subspace,
    tol: f64,
) -> Result<Subspace> {
    let s = real_matrix(input, l0.layout(), f)?;
    let q = &l0.basis;
    let m = &s - q * (q.transpose() * &s);
    let scale = s.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let row = range_basis_above(&m.transpose(), tol, scale)?;
    Ok(Subspace {
        layout: input.clone(),
        basis: complement_basis(&row),
    })
}

/// `span{ f(x) : x ∈ L }`.
pub fn image_with(
    output: &Layout,
    f: &dyn Fn(&AlgOperator) -> Result<AlgOperator>,
    l: &Subspace,
    tol: f64,
) -> Result<Subspace> {
    let imgs: Vec<AlgOperator> = l
        .basis()
        .iter()
        .map(|b| f(b).and_then(|y| y.on_layout(output)))
        .collect::<Result<_>>()?;
    span(output, &imgs, tol)
}

/// Preimage of `L_0` under the map with Choi matrix `S`.
pub fn preimage_under_map(s: &CpMapChoi, l0: &Subspace, tol: f64) -> Result<Subspace> {
    let l0 = l0.on_layout(s.output())?;
    preimage_with(s.input(), &|x| apply_map(s, x), &l0, tol)
}

/// `S*(L_0)`, the image of `L_0` under the adjoint map.
pub fn adjoint_image(s: &CpMapChoi, l0: &Subspace, tol: f64) -> Result<Subspace> {
    let adj = adjoint_map(s)?;
    image_with(s.input(), &|x| apply_map(&adj, x), l0, tol)
}

/// Preimage under the partial trace over `over`, as a subspace of
/// `layout`. `l0` lives on the remaining factors.
pub fn preimage_under_partial_trace(
    layout: &Layout,
    over: &[FactorLabel],
    l0: &Subspace,
    tol: f64,
) -> Result<Subspace> {
    preimage_with(layout, &|x| partial_trace(x, over), l0, tol)
}

/// `I_front ⊗ L`, the image under the adjoint of the partial trace.
pub fn identity_tensor_subspace(front: &Layout, l: &Subspace, tol: f64) -> Result<Subspace> {
    let out = front.concat(l.layout())?;
    image_with(&out, &|x| identity_tensor(front, x), l, tol)
}

/// `[I] ∨ (L^T)^⊥`.
pub fn tilde(l: &Subspace, tol: f64) -> Result<Subspace> {
    join(
        &Subspace::identity_line(l.layout()),
        &l.transpose().orthocomplement(),
        tol,
    )
}

/// `ρ ∈ J`, `ρ ⪰ 0` and `Tr ρ = 1`.
pub fn section_contains(j: &Subspace, rho: &AlgOperator, tol: f64) -> Result<bool> {
    if !j.contains(rho, tol)? {
        return Ok(false);
    }
    if !rho.is_hermitian(tol) || !is_positive(rho, tol)? {
        return Ok(false);
    }
    Ok((rho.trace() - Complex64::new(1.0, 0.0)).norm() <= tol)
}

/// `[K] = J ∩ A_p` where `p` is the support of a state of maximal support
/// in the section.
pub fn section_span(j: &Subspace, rho: &AlgOperator, tol: f64) -> Result<Subspace> {
    if !section_contains(j, rho, tol)? {
        return Err(Error::violation(
            "reference state is not in the section",
            j.distance(rho)?,
        ));
    }
    let p = support_projection(rho, tol)?;
    if (p.matrix() - CMat::identity(p.dim(), p.dim())).norm() <= tol {
        return Ok(j.clone());
    }
    meet(j, &Subspace::corner(&p, tol)?, tol)
}
