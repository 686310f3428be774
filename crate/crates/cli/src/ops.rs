use std::path::{Path, PathBuf};

use qcomb::comb::{apply_supermap, comb_equivalence_residual, comb_equivalent, supermap_equivalence_residual, supermap_equivalent, to_layout};
use qcomb::gchannel::{are_equivalent, equivalence_residual, povm_equivalence_residual, povm_equivalent};
use qcomb::io::SpecKind;
use qcomb::sampler::{random_channel, random_comb, random_generalized_channel, random_section_element, random_simple_element, random_state, Seed};
use qcomb::tensor::link_product;
use qcomb::{AlgebraShape, Factor, GeneralizedPovm, Layout};
use serde_json::json;

use crate::util::{load_any, load_operator, load_section, load_spec, malformed, require, sci, write_map, write_operator, Failure, Loaded, Outcome};
use crate::SampleKind;

pub fn link(a: &Path, b: &Path, output: &Path) -> Result<Outcome, Failure> {
    let x = load_operator(a)?;
    let y = load_operator(b)?;
    let z = link_product(&x, &y)?;
    write_operator(output, &z)?;
    let shared: Vec<u32> = x
        .layout()
        .labels()
        .into_iter()
        .filter(|l| y.layout().contains(*l))
        .map(|l| l.0)
        .collect();
    Ok(Outcome::new(
        true,
        json!({
            "output": output.display().to_string(),
            "contracted": shared,
            "layout": z.layout().labels().iter().map(|l| l.0).collect::<Vec<_>>(),
            "trace": [z.trace().re, z.trace().im],
        }),
        vec![format!("link over {shared:?} -> {} on {}", output.display(), z.layout())],
    ))
}

pub fn apply(sup: &Path, member: &Path, spec: &Path, output: Option<&Path>, tol: f64) -> Result<Outcome, Failure> {
    let ls = load_spec(spec, tol)?;
    let y = load_operator(sup)?;
    let x = load_operator(member)?;
    let z = apply_supermap(&y, &x, &ls.spec, tol)?;
    if let Some(o) = output {
        write_operator(o, &z)?;
    }
    let fs = z.layout().factors();
    let probs = (fs.len() == 1 && fs[0].shape.is_classical())
        .then(|| (0..z.dim()).map(|i| z.matrix()[(i, i)].re).collect::<Vec<f64>>());
    let mut text = vec![format!("result on {}, trace {}", z.layout(), z.trace_re())];
    if let Some(p) = &probs {
        text.push(format!(
            "probabilities: [{}] (sum {})",
            p.iter().map(|v| format!("{v:.12}")).collect::<Vec<_>>().join(", "),
            p.iter().sum::<f64>()
        ));
    }
    Ok(Outcome::new(
        true,
        json!({
            "layout": z.layout().labels().iter().map(|l| l.0).collect::<Vec<_>>(),
            "trace": z.trace_re(),
            "probabilities": probs,
            "output": output.map(|o| o.display().to_string()),
        }),
        text,
    ))
}

fn verdict(holds: bool, residual: f64, what: &str) -> Outcome {
    Outcome::new(
        holds,
        json!({"equivalent": holds, "holds": holds, "residual": residual, "relation": what}),
        vec![format!(
            "{}: {what} residual {}",
            if holds { "equivalent" } else { "not equivalent" },
            sci(residual)
        )],
    )
}

pub fn equiv(x1: &Path, x2: &Path, spec: Option<&Path>, section: Option<&Path>, tol: f64) -> Result<Outcome, Failure> {
    match (spec, section) {
        (Some(s), None) => {
            let ls = load_spec(s, tol)?;
            let a = load_operator(x1)?;
            let b = load_operator(x2)?;
            let top = ls.spec.layout(ls.spec.level());
            let (a, b) = (to_layout(&a, top)?, to_layout(&b, top)?);
            if ls.kind == SpecKind::Comb {
                let shapes: Vec<AlgebraShape> = ls.factors.iter().map(|f| f.shape.clone()).collect();
                let held = comb_equivalent(&a, &b, &shapes, tol)?;
                Ok(verdict(held, comb_equivalence_residual(&a, &b, &shapes)?, "comb"))
            } else {
                let held = supermap_equivalent(&a, &b, &ls.spec, tol)?;
                Ok(verdict(held, supermap_equivalence_residual(&a, &b, &ls.spec)?, "supermap"))
            }
        }
        (None, Some(k)) => {
            let k = load_section(k, tol)?;
            match (load_any(x1)?, load_any(x2)?) {
                (Loaded::One(f1), Loaded::One(f2)) => {
                    let m1 = f1.to_map()?;
                    let m2 = f2.to_map()?;
                    let held = are_equivalent(&m1, &m2, &k, tol)?;
                    Ok(verdict(held, equivalence_residual(&m1, &m2, &k)?, "generalized channel"))
                }
                (Loaded::List(l1), Loaded::List(l2)) => {
                    let p1 = GeneralizedPovm::new(l1.to_operators()?)?;
                    let p2 = GeneralizedPovm::new(l2.to_operators()?)?;
                    let held = povm_equivalent(&p1, &p2, &k, tol)?;
                    Ok(verdict(held, povm_equivalence_residual(&p1, &p2, &k)?, "generalized POVM"))
                }
                _ => Err(malformed("cannot compare a map with a list of effects")),
            }
        }
        _ => Err(malformed("equiv needs exactly one of --spec and --section")),
    }
}

pub struct SampleOptions {
    pub kind: SampleKind,
    pub seed: u64,
    pub output: PathBuf,
    pub blocks: Vec<usize>,
    pub input_blocks: Vec<usize>,
    pub output_blocks: Vec<usize>,
    pub kraus_rank: Option<usize>,
    pub section: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub tol: f64,
}

pub fn sample(o: &SampleOptions) -> Result<Outcome, Failure> {
    let seed = Seed(o.seed);
    let what = match o.kind {
        SampleKind::State => {
            let l = Layout::single(0, AlgebraShape::new(o.blocks.clone())?);
            write_operator(&o.output, &random_state(&l, seed))?;
            "state"
        }
        SampleKind::Channel => {
            let inp = Layout::single(0, AlgebraShape::new(o.input_blocks.clone())?);
            let out = Layout::single(1, AlgebraShape::new(o.output_blocks.clone())?);
            let r = o.kraus_rank.unwrap_or(inp.dim() * out.dim());
            if r == 0 {
                return Err(malformed("Kraus rank must be positive"));
            }
            write_map(&o.output, &random_channel(&inp, &out, r, seed)?)?;
            "channel"
        }
        SampleKind::Gchannel => {
            let k = load_section(require(&o.section, "section", "this sample kind")?, o.tol)?;
            let label = k.layout().max_label().map_or(0, |m| m + 1);
            let out = Layout::new(vec![Factor::new(label, AlgebraShape::new(o.output_blocks.clone())?)])?;
            write_map(&o.output, &random_generalized_channel(&k, &out, seed)?)?;
            "generalized channel"
        }
        SampleKind::SectionElement => {
            let k = load_section(require(&o.section, "section", "this sample kind")?, o.tol)?;
            let x = random_section_element(&k, seed)?.scale(k.scale());
            write_operator(&o.output, &x)?;
            "section element"
        }
        SampleKind::SimpleElement => {
            let k = load_section(require(&o.section, "section", "this sample kind")?, o.tol)?;
            write_operator(&o.output, &random_simple_element(&k, seed)?)?;
            "simple element"
        }
        SampleKind::Comb => {
            let ls = load_spec(require(&o.spec, "spec", "this sample kind")?, o.tol)?;
            let (x, _) = random_comb(&ls.spec, seed)?;
            write_operator(&o.output, &x)?;
            "member"
        }
    };
    Ok(Outcome::new(
        true,
        json!({"kind": what, "seed": o.seed, "output": o.output.display().to_string()}),
        vec![format!("wrote {what} to {}", o.output.display())],
    ))
}
