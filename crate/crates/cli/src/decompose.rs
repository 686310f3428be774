use std::path::{Path, PathBuf};

use qcomb::choi::{choi_of_fn, tp_residual};
use qcomb::decompose::{from_realization, ladder_decompose, realize_on_channels, semilocalize};
use qcomb::gchannel::{equivalence_residual, factor_simple};
use qcomb::{AlgOperator, FactorLabel, SectionSpec};
use serde_json::{json, Map, Value};

use crate::util::{self, load_map, load_operator, load_section, load_spec, malformed, require, sci, write_map, write_operator, write_value, Failure, Outcome};
use crate::DecomposeMethod;

pub struct Options {
    pub method: DecomposeMethod,
    pub input: PathBuf,
    pub spec: Option<PathBuf>,
    pub section: Option<PathBuf>,
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub out: PathBuf,
    pub tol: f64,
}

struct Writer {
    dir: PathBuf,
    files: Map<String, Value>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| malformed(format!("{}: {e}", dir.display())))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            files: Map::new(),
        })
    }

    fn operator(&mut self, key: &str, x: &AlgOperator) -> Result<(), Failure> {
        let name = format!("{key}.json");
        write_operator(&self.dir.join(&name), x)?;
        self.files.insert(key.into(), name.into());
        Ok(())
    }

    fn map(&mut self, key: &str, m: &qcomb::CpMapChoi) -> Result<(), Failure> {
        let name = format!("{key}.json");
        write_map(&self.dir.join(&name), m)?;
        self.files.insert(key.into(), name.into());
        Ok(())
    }

    fn finish(self, method: &str, residual: f64, threshold: f64, extra: Value, accepted: bool) -> Result<Outcome, Failure> {
        let holds = accepted && residual <= threshold;
        let mut m = json!({
            "method": method,
            "residual": residual,
            "threshold": threshold,
            "accepted": holds,
            "files": Value::Object(self.files),
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut m, extra) {
            m.extend(e);
        }
        write_value(&self.dir.join("manifest.json"), &m)?;
        let text = vec![
            format!("{method}: residual {} (threshold {})", sci(residual), sci(threshold)),
            format!("wrote {}", self.dir.join("manifest.json").display()),
        ];
        Ok(Outcome::new(holds, m, text))
    }
}

pub fn run(opts: &Options) -> Result<Outcome, Failure> {
    let tol = opts.tol;
    match opts.method {
        DecomposeMethod::SimpleFactor => {
            let x = load_map(&opts.input)?;
            let k = load_section(require(&opts.section, "section", "simple-factor")?, tol)?;
            let f = factor_simple(&x, &k, tol)?;
            let back = f.recompose(tol)?;
            let res = (back.choi().matrix() - x.choi().matrix()).norm();
            let lambda_tp = tp_residual(&f.lambda)?;
            // Λ_p against the corner map a ↦ p a p.
            let identity_on_support = if x.output().same_shapes(x.input()) {
                let p = &f.support;
                let out = x.output().clone();
                let id = choi_of_fn(x.input(), &out, |a| {
                    let a = a.on_layout(p.layout())?;
                    p.compose(&a)?.compose(p)?.on_layout(&out)
                })?;
                Some((f.lambda_p.choi().matrix() - id.choi().matrix()).norm())
            } else {
                None
            };
            let mut w = Writer::new(&opts.out)?;
            w.operator("c", &f.c)?;
            w.operator("support", &f.support)?;
            w.map("lambda_p", &f.lambda_p)?;
            w.map("lambda", &f.lambda)?;
            let extra = json!({
                "lambda_tp_residual": lambda_tp,
                "lambda_p_identity_on_support_residual": identity_on_support,
                "lambda_p_is_identity_on_support": identity_on_support.map(|r| r <= util::rel(tol, x.choi().norm())),
            });
            w.finish("simple-factor", res, util::rel(tol, x.choi().norm()), extra, true)
        }
        DecomposeMethod::Semilocalize => {
            let x = load_operator(&opts.input)?;
            if opts.a.is_empty() || opts.b.is_empty() {
                return Err(malformed("semilocalize needs --a and --b"));
            }
            let a: Vec<FactorLabel> = opts.a.iter().map(|&l| FactorLabel(l)).collect();
            let b: Vec<FactorLabel> = opts.b.iter().map(|&l| FactorLabel(l)).collect();
            let s = semilocalize(&x, &a, &b, tol)?;
            let res = s.reconstruction_residual(&x)?;
            let marg = s.marginal_residual()?;
            let mut w = Writer::new(&opts.out)?;
            w.operator("y", &s.y)?;
            for (n, x0) in s.x0.iter().enumerate() {
                w.operator(&format!("x0_n{n}"), x0)?;
                w.map(&format!("stage_n{n}"), &s.stage_channel(n)?)?;
            }
            for (m, row) in s.x1.iter().enumerate() {
                for (n, x1) in row.iter().enumerate() {
                    w.map(&format!("x1_m{m}_n{n}"), x1)?;
                }
            }
            let extra = json!({
                "ancilla_dim": s.ancilla_dim,
                "ancilla_label": s.ancilla.0,
                "marginal_residual": marg,
            });
            let ok = marg <= util::rel(tol, s.y.norm());
            w.finish("semilocalize", res, util::rel(tol, x.norm()), extra, ok)
        }
        DecomposeMethod::Ladder => {
            let ls = load_spec(require(&opts.spec, "spec", "ladder")?, tol)?;
            let x = load_operator(&opts.input)?;
            let lad = ladder_decompose(&x, &ls.spec, tol)?;
            let res = lad.residuals(&x, &ls.spec)?;
            let max = res.iter().cloned().fold(0.0, f64::max);
            let tp = lad.max_tp_residual()?;
            let channels = lad.stages_are_channels(tol)?;
            let initial_ok = lad.check_initial(&ls.spec, tol)?;
            let mut w = Writer::new(&opts.out)?;
            w.operator("initial", &lad.initial)?;
            for (k, st) in lad.stages.iter().enumerate() {
                for (ids, m) in &st.blocks {
                    let tag: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                    let key = if tag.is_empty() {
                        format!("stage{}", k + 1)
                    } else {
                        format!("stage{}_b{}", k + 1, tag.join("-"))
                    };
                    w.map(&key, m)?;
                }
            }
            let extra = json!({
                "level": lad.level,
                "ancilla_dim": lad.ancilla_dim,
                "ancillas": lad.ancillas.iter().map(|l| l.0).collect::<Vec<_>>(),
                "residuals": res,
                "max_tp_residual": tp,
                "stages_are_channels": channels,
                "initial_valid": initial_ok,
            });
            w.finish("ladder", max, util::rel(tol, x.norm()), extra, channels && initial_ok)
        }
        DecomposeMethod::Realize => {
            let x = load_map(&opts.input)?;
            let r = realize_on_channels(&x, tol)?;
            let back = from_realization(&r.ancilla, &r.rho, &r.lambda, tol)?;
            let fs = x.input().factors();
            let k = SectionSpec::channels(fs[0].clone(), fs[1].clone())?;
            let res = equivalence_residual(&back, &x, &k)?;
            let mut w = Writer::new(&opts.out)?;
            w.operator("rho", &r.rho)?;
            w.map("lambda", &r.lambda)?;
            w.operator("omega", &r.omega)?;
            let extra = json!({
                "ancilla": qcomb::io::FactorDesc::from_factor(&r.ancilla.factors()[0]).label,
                "ancilla_dim": r.ancilla.dim(),
                "lambda_tp_residual": tp_residual(&r.lambda)?,
            });
            w.finish("realize", res, util::rel(tol, x.choi().norm()), extra, true)
        }
    }
}
