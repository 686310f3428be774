//! JSON files for operators, maps, subspaces, sections and supermap specs.
//!
//! Matrices are stored row-major with real and imaginary parts in separate
//! arrays. Floats are written in shortest round-trip form and parsed
//! exactly, so a save/load cycle reproduces every bit. Loading re-runs all
//! constructors, so a file that parses is also a valid object.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgOperator, AlgebraShape};
use crate::choi::CpMapChoi;
use crate::comb::{build_spec, SupermapSpec};
use crate::error::{Error, Result};
use crate::gchannel::SectionSpec;
use crate::subspace::{span, Subspace};
use crate::tensor::{Factor, FactorLabel, Layout};
use crate::{CMat, Complex64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorDesc {
    pub label: u32,
    pub blocks: Vec<usize>,
}

impl FactorDesc {
    pub fn from_factor(f: &Factor) -> Self {
        FactorDesc {
            label: f.label.0,
            blocks: f.shape.blocks().to_vec(),
        }
    }

    pub fn to_factor(&self) -> Result<Factor> {
        Ok(Factor::new(self.label, AlgebraShape::new(self.blocks.clone())?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixData {
    pub fn from_matrix(m: &CMat) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let rows = |f: fn(&Complex64) -> f64| {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect())
                .collect()
        };
        Ok(MatrixData {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        })
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.re.len();
        let bad = |what: &str| Error::ShapeMismatch(format!("matrix data: {what}"));
        if self.im.len() != n {
            return Err(bad("re and im have different row counts"));
        }
        let cols = self.re.first().map_or(0, |r| r.len());
        for (r, i) in self.re.iter().zip(&self.im) {
            if r.len() != cols || i.len() != cols {
                return Err(bad("ragged rows"));
            }
        }
        let m = CMat::from_fn(n, cols, |r, c| Complex64::new(self.re[r][c], self.im[r][c]));
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }
}

/// An operator on a layout, optionally marked as the Choi matrix of a map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorFile {
    pub factors: Vec<FactorDesc>,
    pub matrix: MatrixData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_labels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_labels: Option<Vec<u32>>,
}

pub const CHOI_ROLE: &str = "choi";

fn layout_of(factors: &[FactorDesc]) -> Result<Layout> {
    Layout::new(factors.iter().map(FactorDesc::to_factor).collect::<Result<_>>()?)
}

fn descs(l: &Layout) -> Vec<FactorDesc> {
    l.factors().iter().map(FactorDesc::from_factor).collect()
}

fn labels(v: &[u32]) -> Vec<FactorLabel> {
    v.iter().map(|&l| FactorLabel(l)).collect()
}

fn raw(v: &[FactorLabel]) -> Vec<u32> {
    v.iter().map(|l| l.0).collect()
}

impl OperatorFile {
    pub fn from_operator(x: &AlgOperator) -> Result<Self> {
        Ok(OperatorFile {
            factors: descs(x.layout()),
            matrix: MatrixData::from_matrix(x.matrix())?,
            role: None,
            output_labels: None,
            input_labels: None,
        })
    }

    pub fn from_map(m: &CpMapChoi) -> Result<Self> {
        let mut f = OperatorFile::from_operator(m.choi())?;
        f.role = Some(CHOI_ROLE.into());
        f.output_labels = Some(raw(&m.output().labels()));
        f.input_labels = Some(raw(&m.input().labels()));
        Ok(f)
    }

    pub fn is_choi(&self) -> bool {
        self.role.as_deref() == Some(CHOI_ROLE)
    }

    /// The operator, ignoring any map annotation.
    pub fn to_operator(&self) -> Result<AlgOperator> {
        AlgOperator::new(layout_of(&self.factors)?, self.matrix.to_matrix()?)
    }

    pub fn to_map(&self) -> Result<CpMapChoi> {
        let x = self.to_operator()?;
        if !self.is_choi() {
            return Err(Error::ShapeMismatch("file does not hold a Choi matrix".into()));
        }
        let (out, inp) = match (&self.output_labels, &self.input_labels) {
            (Some(o), Some(i)) => (labels(o), labels(i)),
            _ => {
                return Err(Error::ShapeMismatch(
                    "Choi file needs output_labels and input_labels".into(),
                ))
            }
        };
        let mut order = out.clone();
        order.extend(&inp);
        if x.layout().labels() != order {
            return Err(Error::ShapeMismatch(format!(
                "Choi factors {} are not output {:?} followed by input {:?}",
                x.layout(),
                raw(&out),
                raw(&inp)
            )));
        }
        CpMapChoi::from_operator(&x, &inp)
    }

    /// A map when the file is marked as one, otherwise the map with the
    /// given input labels.
    pub fn to_map_or(&self, input: &[FactorLabel]) -> Result<CpMapChoi> {
        if self.is_choi() {
            self.to_map()
        } else {
            CpMapChoi::from_operator(&self.to_operator()?, input)
        }
    }
}

/// A list of operators on one layout: POVM effects, instrument branches,
/// or any family of results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorListFile {
    pub operators: Vec<OperatorFile>,
}

impl OperatorListFile {
    pub fn from_operators(xs: &[AlgOperator]) -> Result<Self> {
        Ok(OperatorListFile {
            operators: xs.iter().map(OperatorFile::from_operator).collect::<Result<_>>()?,
        })
    }

    pub fn from_maps(ms: &[CpMapChoi]) -> Result<Self> {
        Ok(OperatorListFile {
            operators: ms.iter().map(OperatorFile::from_map).collect::<Result<_>>()?,
        })
    }

    pub fn to_operators(&self) -> Result<Vec<AlgOperator>> {
        let xs: Vec<_> = self.operators.iter().map(OperatorFile::to_operator).collect::<Result<_>>()?;
        same_layout(&xs)?;
        Ok(xs)
    }

    pub fn to_maps(&self) -> Result<Vec<CpMapChoi>> {
        let ms: Vec<_> = self.operators.iter().map(OperatorFile::to_map).collect::<Result<_>>()?;
        if ms.windows(2).any(|w| w[0].input() != w[1].input() || w[0].output() != w[1].output()) {
            return Err(Error::ShapeMismatch("maps in a list must share input and output".into()));
        }
        Ok(ms)
    }
}

fn same_layout(xs: &[AlgOperator]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::ShapeMismatch("empty operator list".into()));
    }
    if let Some(x) = xs.iter().find(|x| x.layout() != xs[0].layout()) {
        return Err(Error::ShapeMismatch(format!(
            "operators on {} and {} in one list",
            xs[0].layout(),
            x.layout()
        )));
    }
    Ok(())
}

/// A self-adjoint subspace given by spanning operators. The span is
/// orthonormalized on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceFile {
    pub subspace: Vec<OperatorFile>,
}

fn subspace_of(files: &[OperatorFile], tol: f64) -> Result<Subspace> {
    let xs: Vec<_> = files.iter().map(OperatorFile::to_operator).collect::<Result<_>>()?;
    same_layout(&xs)?;
    let l = xs[0].layout().clone();
    span(&l, &xs, tol)
}

fn subspace_files(s: &Subspace) -> Result<Vec<OperatorFile>> {
    s.basis().iter().map(OperatorFile::from_operator).collect()
}

impl SubspaceFile {
    pub fn from_subspace(s: &Subspace) -> Result<Self> {
        Ok(SubspaceFile {
            subspace: subspace_files(s)?,
        })
    }

    pub fn to_subspace(&self, tol: f64) -> Result<Subspace> {
        subspace_of(&self.subspace, tol)
    }
}

/// A section `s·(J ∩ 𝔖)`. Either `subspace` spans `J`, or `factors`
/// alone gives the whole state space. Without `rho` the reference state
/// is the projection of the trace onto `J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<Vec<OperatorFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<FactorDesc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<OperatorFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

fn section_of(
    sub: Option<&[OperatorFile]>,
    factors: Option<&[FactorDesc]>,
    rho: Option<&OperatorFile>,
    tol: f64,
) -> Result<SectionSpec> {
    match (sub, factors) {
        (Some(s), None) => {
            let j = subspace_of(s, tol)?;
            match rho {
                Some(r) => SectionSpec::new(j, r.to_operator()?, tol),
                None => SectionSpec::from_subspace(j, tol),
            }
        }
        (None, Some(f)) => {
            let l = layout_of(f)?;
            match rho {
                Some(r) => SectionSpec::new(Subspace::full(&l), r.to_operator()?, tol),
                None => Ok(SectionSpec::full(&l)),
            }
        }
        _ => Err(Error::ShapeMismatch(
            "a section needs exactly one of `subspace` and `factors`".into(),
        )),
    }
}

impl SectionFile {
    pub fn from_section(k: &SectionSpec) -> Result<Self> {
        Ok(SectionFile {
            subspace: Some(subspace_files(k.subspace())?),
            factors: None,
            rho: Some(OperatorFile::from_operator(k.reference_state())?),
            scale: (k.scale() != 1.0).then_some(k.scale()),
        })
    }

    pub fn to_section(&self, tol: f64) -> Result<SectionSpec> {
        let k = section_of(
            self.subspace.as_deref(),
            self.factors.as_deref(),
            self.rho.as_ref(),
            tol,
        )?;
        match self.scale {
            Some(s) => k.with_scale(s),
            None => Ok(k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecKind {
    Supermap,
    Comb,
    Tester,
}

/// A supermap tower, a comb or a tester.
///
/// * `supermap`: base section from `base_subspace` (or `base_factors` for
///   the full state space) and `rho`; `chain` lists `B_1, …, B_n`.
/// * `comb`: `chain` lists all `B_0, …, B_{L-1}`, `L` even.
/// * `tester`: `chain` lists `B_0, …, B_{2N-1}` and `outcomes` the number
///   of outcomes; the outcome factor gets the next free label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    pub kind: SpecKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_subspace: Option<Vec<OperatorFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_factors: Option<Vec<FactorDesc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<OperatorFile>,
    pub chain: Vec<FactorDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<usize>,
}

/// A loaded spec file.
#[derive(Clone, Debug)]
pub struct LoadedSpec {
    pub kind: SpecKind,
    pub spec: SupermapSpec,
    /// Every factor of the top layout from `B_0` upwards; for combs and
    /// testers these are the comb factors (plus the outcome factor).
    pub factors: Vec<Factor>,
}

impl SpecFile {
    pub fn comb(factors: &[Factor]) -> Self {
        SpecFile {
            kind: SpecKind::Comb,
            base_subspace: None,
            base_factors: None,
            rho: None,
            chain: factors.iter().map(FactorDesc::from_factor).collect(),
            outcomes: None,
        }
    }

    pub fn tester(factors: &[Factor], outcomes: usize) -> Self {
        SpecFile {
            kind: SpecKind::Tester,
            outcomes: Some(outcomes),
            ..SpecFile::comb(factors)
        }
    }

    pub fn supermap(base: &SectionSpec, chain: &[Factor]) -> Result<Self> {
        Ok(SpecFile {
            kind: SpecKind::Supermap,
            base_subspace: Some(subspace_files(base.subspace())?),
            base_factors: None,
            rho: Some(OperatorFile::from_operator(base.reference_state())?),
            chain: chain.iter().map(FactorDesc::from_factor).collect(),
            outcomes: None,
        })
    }

    pub fn load(&self, tol: f64) -> Result<LoadedSpec> {
        let chain: Vec<Factor> = self.chain.iter().map(FactorDesc::to_factor).collect::<Result<_>>()?;
        let even = |n: usize| {
            if n == 0 || n % 2 != 0 {
                Err(Error::ShapeMismatch(format!(
                    "a comb needs an even number of factors, got {n}"
                )))
            } else {
                Ok(())
            }
        };
        match self.kind {
            SpecKind::Supermap => {
                if self.outcomes.is_some() {
                    return Err(Error::ShapeMismatch("`outcomes` is only for testers".into()));
                }
                let base = section_of(
                    self.base_subspace.as_deref(),
                    self.base_factors.as_deref(),
                    self.rho.as_ref(),
                    tol,
                )?;
                let spec = build_spec(&base, chain.clone())?;
                let mut factors = base.layout().factors().to_vec();
                factors.extend(chain);
                Ok(LoadedSpec {
                    kind: self.kind,
                    spec,
                    factors,
                })
            }
            SpecKind::Comb | SpecKind::Tester => {
                if self.base_subspace.is_some() || self.base_factors.is_some() || self.rho.is_some() {
                    return Err(Error::ShapeMismatch(
                        "comb and tester specs take their base from `chain`".into(),
                    ));
                }
                even(chain.len())?;
                let mut factors = chain;
                match (self.kind, self.outcomes) {
                    (SpecKind::Tester, Some(m)) => {
                        let next = factors.iter().map(|f| f.label.0).max().unwrap() + 1;
                        factors.push(Factor::new(next, AlgebraShape::classical(m)));
                    }
                    (SpecKind::Tester, None) => {
                        return Err(Error::ShapeMismatch("a tester spec needs `outcomes`".into()))
                    }
                    (_, Some(_)) => {
                        return Err(Error::ShapeMismatch("`outcomes` is only for testers".into()))
                    }
                    _ => {}
                }
                let base = SectionSpec::full(&Layout::new(vec![factors[0].clone()])?);
                let spec = build_spec(&base, factors[1..].to_vec())?;
                Ok(LoadedSpec {
                    kind: self.kind,
                    spec,
                    factors,
                })
            }
        }
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

pub fn from_json<T: DeserializeOwned>(s: &str) -> Result<T> {
    Ok(serde_json::from_str(s)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&std::fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = to_json(v)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn save_operator(path: &Path, x: &AlgOperator) -> Result<()> {
    write_json(path, &OperatorFile::from_operator(x)?)
}

pub fn load_operator(path: &Path) -> Result<AlgOperator> {
    read_json::<OperatorFile>(path)?.to_operator()
}

pub fn save_map(path: &Path, m: &CpMapChoi) -> Result<()> {
    write_json(path, &OperatorFile::from_map(m)?)
}

pub fn load_map(path: &Path) -> Result<CpMapChoi> {
    read_json::<OperatorFile>(path)?.to_map()
}
