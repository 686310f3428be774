use std::path::{Path, PathBuf};

use qcomb::algebra::min_eigenvalue;
use qcomb::choi::{is_cp, tp_residual};
use qcomb::comb::{membership_by_chain, membership_by_subspace, ChainWitness, Membership};
use qcomb::gchannel::{check_generalized_channel, check_generalized_instrument, check_generalized_povm, Check};
use qcomb::io::SpecKind;
use qcomb::{FactorLabel, GeneralizedPovm, SectionSpec};
use serde_json::{json, Value};

use crate::util::{self, load_effects, load_map, load_operator, load_section, load_spec, malformed, require, sci, Failure, Outcome};
use crate::{Kind, Method};

pub struct Options {
    pub kind: Kind,
    pub section: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub method: Method,
    pub outcome: Option<u32>,
    pub tol: f64,
}

fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Cp => "cp",
        Kind::Channel => "channel",
        Kind::Gchannel => "gchannel",
        Kind::Gpovm => "gpovm",
        Kind::Instrument => "instrument",
        Kind::Ppovm => "ppovm",
        Kind::Supermap => "supermap",
        Kind::Comb => "comb",
        Kind::Tester => "tester",
    }
}

fn check_outcome(name: &str, c: &Check, linear: &str, tol: f64) -> Outcome {
    let mut text = vec![format!("{name}: {}", if c.holds { "holds" } else { "fails" })];
    if !c.holds {
        if c.min_eigenvalue < -tol {
            text.push(format!("  positivity broken: minimum eigenvalue {}", sci(c.min_eigenvalue)));
        }
        text.push(format!("  {linear}: residual {}", sci(c.residual)));
    }
    Outcome::new(
        c.holds,
        json!({
            "kind": name,
            "holds": c.holds,
            "min_eigenvalue": c.min_eigenvalue,
            "residual": c.residual,
            "condition": linear,
        }),
        text,
    )
}

fn section(opts: &Options, what: &str) -> Result<SectionSpec, Failure> {
    load_section(require(&opts.section, "section", what)?, opts.tol)
}

pub fn verify(input: &Path, opts: &Options) -> Result<Outcome, Failure> {
    let tol = opts.tol;
    let name = kind_name(opts.kind);
    match opts.kind {
        Kind::Cp | Kind::Channel => {
            let m = load_map(input)?;
            let lo = min_eigenvalue(m.choi(), tol)?;
            let cp = is_cp(&m, tol)?;
            let tp = tp_residual(&m)?;
            let tp_ok = tp <= util::rel(tol, m.choi().norm());
            let holds = cp && (opts.kind == Kind::Cp || tp_ok);
            let mut text = vec![format!("{name}: {}", if holds { "holds" } else { "fails" })];
            if !cp {
                text.push(format!("  Choi matrix not positive: minimum eigenvalue {}", sci(lo)));
            }
            if opts.kind == Kind::Channel && !tp_ok {
                text.push(format!("  not trace preserving: residual {}", sci(tp)));
            }
            Ok(Outcome::new(
                holds,
                json!({"kind": name, "holds": holds, "min_eigenvalue": lo, "tp_residual": tp}),
                text,
            ))
        }
        Kind::Gchannel => {
            let m = load_map(input)?;
            let k = section(opts, "gchannel")?;
            let c = check_generalized_channel(&m, &k, tol)?;
            Ok(check_outcome(name, &c, "component of Tr_out X - I/s along the transposed section", tol))
        }
        Kind::Instrument => {
            let m = load_map(input)?;
            let k = section(opts, "instrument")?;
            let label = match opts.outcome {
                Some(l) => FactorLabel(l),
                None => m
                    .output()
                    .factors()
                    .iter()
                    .find(|f| f.shape.is_classical())
                    .map(|f| f.label)
                    .ok_or_else(|| malformed("instrument has no classical output factor"))?,
            };
            let c = check_generalized_instrument(&m, label, &k, tol)?;
            Ok(check_outcome(name, &c, "summed branches are not a generalized channel", tol))
        }
        Kind::Gpovm | Kind::Ppovm => {
            let effects = load_effects(input)?;
            let k = if opts.kind == Kind::Ppovm && opts.section.is_none() {
                let l = effects[0].layout();
                if l.len() != 2 {
                    return Err(malformed(format!(
                        "PPOVM effects must live on output ⊗ input, got {l}"
                    )));
                }
                SectionSpec::channels(l.factors()[0].clone(), l.factors()[1].clone())?
            } else {
                section(opts, name)?
            };
            let m = GeneralizedPovm::new(effects)?;
            let c = check_generalized_povm(&m, &k, tol)?;
            Ok(check_outcome(name, &c, "component of Σ M_i - I/s along the section", tol))
        }
        Kind::Supermap | Kind::Comb | Kind::Tester => {
            let ls = load_spec(require(&opts.spec, "spec", name)?, tol)?;
            let want = match opts.kind {
                Kind::Comb => SpecKind::Comb,
                Kind::Tester => SpecKind::Tester,
                _ => SpecKind::Supermap,
            };
            if ls.kind != want {
                let spec_name = |k: SpecKind| match k {
                    SpecKind::Supermap => "supermap",
                    SpecKind::Comb => "comb",
                    SpecKind::Tester => "tester",
                };
                return Err(malformed(format!(
                    "--kind {name} needs a {} spec, got a {} spec",
                    spec_name(want),
                    spec_name(ls.kind)
                )));
            }
            let x = load_operator(input)?;
            Ok(tower(name, &x, &ls.spec, opts.method, tol)?)
        }
    }
}

fn membership_json(m: &Membership) -> Value {
    json!({
        "holds": m.holds,
        "min_eigenvalue": m.min_eigenvalue,
        "subspace_residual": m.subspace_residual,
        "trace": m.trace,
        "expected_trace": m.expected_trace,
    })
}

fn chain_json(w: &ChainWitness) -> Value {
    json!({
        "holds": w.holds,
        "min_eigenvalue": w.min_eigenvalue,
        "rung_residuals": w.residuals,
        "terminal_residual": w.terminal_residual,
        "failed_rung": w.failed_rung,
        "reason": w.reason,
    })
}

fn tower(name: &str, x: &qcomb::AlgOperator, spec: &qcomb::SupermapSpec, method: Method, tol: f64) -> qcomb::Result<Outcome> {
    let sub = match method {
        Method::Chain => None,
        _ => Some(membership_by_subspace(x, spec, tol)?),
    };
    let chain = match method {
        Method::Subspace => None,
        _ => Some(membership_by_chain(x, spec, tol)?),
    };
    let holds = sub.as_ref().is_none_or(|m| m.holds) && chain.as_ref().is_none_or(|w| w.holds);
    let mut text = vec![format!(
        "{name} (level {}): {}",
        spec.level(),
        if holds { "holds" } else { "fails" }
    )];
    if let Some(m) = &sub {
        if !m.holds {
            text.push(format!(
                "  subspace: minimum eigenvalue {}, distance to J_n {}, trace {} (expected {})",
                sci(m.min_eigenvalue),
                sci(m.subspace_residual),
                m.trace,
                m.expected_trace
            ));
        }
    }
    if let Some(w) = &chain {
        if let (Some(r), Some(why)) = (w.failed_rung, &w.reason) {
            text.push(format!("  chain: failing rung {r}: {why}"));
        }
    }
    if let (Some(m), Some(w)) = (&sub, &chain) {
        if m.holds != w.holds {
            text.push("  warning: the subspace and chain tests disagree".into());
        }
    }
    Ok(Outcome::new(
        holds,
        json!({
            "kind": name,
            "holds": holds,
            "level": spec.level(),
            "subspace": sub.as_ref().map(membership_json),
            "chain": chain.as_ref().map(chain_json),
        }),
        text,
    ))
}

/// Verifies every `.json` file of a directory, spread over worker threads.
pub fn verify_dir(dir: &Path, opts: &Options) -> Result<Outcome, Failure> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| malformed(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(malformed(format!("{}: no JSON files", dir.display())));
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(files.len());
    let mut results: Vec<Option<Result<Outcome, Failure>>> = (0..files.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunk = files.len().div_ceil(workers);
        for (fs, rs) in files.chunks(chunk).zip(results.chunks_mut(chunk)) {
            s.spawn(move || {
                for (f, r) in fs.iter().zip(rs.iter_mut()) {
                    *r = Some(verify(f, opts));
                }
            });
        }
    });
    let mut code = 0;
    let mut items = Vec::new();
    let mut text = Vec::new();
    for (f, r) in files.iter().zip(results) {
        let r = r.expect("every file visited");
        let name = f.file_name().unwrap().to_string_lossy().into_owned();
        match r {
            Ok(o) => {
                code = code.max(o.code());
                text.push(format!("{name}: {}", o.text.first().cloned().unwrap_or_default()));
                items.push(json!({"file": name, "exit": o.code(), "result": o.json}));
            }
            Err(e) => {
                code = code.max(e.code());
                text.push(format!("{name}: error: {}", e.message()));
                items.push(json!({"file": name, "exit": e.code(), "result": e.to_json()}));
            }
        }
    }
    let mut o = Outcome::new(code == 0, json!({"files": items}), text);
    o.code = code;
    Ok(o)
}
