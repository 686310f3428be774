//! Writes the CLI fixture corpus: `cargo run -p qcomb-cli --example make_fixtures -- DIR`.

use std::path::{Path, PathBuf};

use qcomb::algebra::min_eigenvalue;
use qcomb::choi::{choi_of_fn, psi};
use qcomb::comb::build_spec;
use qcomb::gchannel::{simple_channel, SectionSpec};
use qcomb::io::{save_map, save_operator, write_json, FactorDesc, OperatorFile, OperatorListFile, SectionFile, SpecFile};
use qcomb::sampler::{random_channel, random_comb, random_generalized_channel, random_hermitian, random_pvm, random_simple_element, random_state, Seed};
use qcomb::{AlgOperator, AlgebraShape, CpMapChoi, Factor, FactorLabel, Layout, Subspace};

fn q(label: u32) -> Factor {
    Factor::new(label, AlgebraShape::full(2))
}

fn lay(fs: &[Factor]) -> Layout {
    Layout::new(fs.to_vec()).unwrap()
}

/// Traceless Hermitian direction of unit norm.
fn traceless(l: &Layout, seed: u64) -> AlgOperator {
    let h = random_hermitian(l, Seed(seed));
    let t = h.trace_re() / l.dim() as f64;
    let h = &h - &AlgOperator::identity(l).scale(t);
    h.scale(1.0 / h.norm())
}

fn main() {
    let dir: PathBuf = std::env::args().nth(1).expect("output directory").into();
    std::fs::create_dir_all(&dir).unwrap();
    let p = |n: &str| dir.join(n);
    let tol = 1e-9;

    // sections
    let chans = SectionSpec::channels(q(1), q(0)).unwrap();
    write_json(&p("sec_channels.json"), &SectionFile::from_section(&chans).unwrap()).unwrap();
    let full_q = SectionFile {
        subspace: None,
        factors: Some(vec![FactorDesc { label: 0, blocks: vec![2] }]),
        rho: None,
        scale: None,
    };
    write_json(&p("sec_full_q.json"), &full_q).unwrap();
    let l3 = Layout::single(0, AlgebraShape::full(3));
    let pvm = random_pvm(&l3, &[1, 1, 1], Seed(7)).unwrap();
    let sigma = random_state(&l3, Seed(8));
    let fixed = SectionSpec::fixed_statistics(&l3, &[pvm], sigma, tol).unwrap();
    write_json(&p("sec_pvm.json"), &SectionFile::from_section(&fixed).unwrap()).unwrap();

    // specs
    write_json(&p("spec_comb_2.json"), &SpecFile::comb(&[q(0), q(1)])).unwrap();
    write_json(&p("spec_comb_4.json"), &SpecFile::comb(&[q(0), q(1), q(2), q(3)])).unwrap();
    write_json(&p("spec_tester_2.json"), &SpecFile::tester(&[q(0), q(1)], 2)).unwrap();
    write_json(&p("spec_odd.json"), &SpecFile::comb(&[q(0), q(1), q(2)])).unwrap();
    let full0 = SectionSpec::full(&lay(&[q(0)]));
    write_json(&p("spec_supermap_full2.json"), &SpecFile::supermap(&full0, &[q(1), q(2)]).unwrap()).unwrap();
    write_json(&p("spec_supermap_chan.json"), &SpecFile::supermap(&chans, &[q(2), q(3)]).unwrap()).unwrap();

    // channels and maps
    let in0 = lay(&[q(0)]);
    let out1 = lay(&[q(1)]);
    let id = CpMapChoi::new(in0.clone(), out1.clone(), psi(&out1, &in0).unwrap()).unwrap();
    save_map(&p("psi2.json"), &id).unwrap();
    let ch = random_channel(&in0, &out1, 4, Seed(1)).unwrap();
    save_map(&p("chan_rand.json"), &ch).unwrap();
    let ch2 = random_channel(&in0, &out1, 2, Seed(2)).unwrap();
    save_map(&p("chan_rand2.json"), &ch2).unwrap();
    let scaled = CpMapChoi::new(in0.clone(), out1.clone(), ch.choi().scale(2.0)).unwrap();
    save_map(&p("chan_not_tp.json"), &scaled).unwrap();
    let transpose = choi_of_fn(&in0, &out1, |a| a.transpose().relabeled(&[FactorLabel(1)])).unwrap();
    save_map(&p("transpose_map.json"), &transpose).unwrap();

    // generalized channels on the qubit channels, output label 2
    let out2 = lay(&[q(2)]);
    let g = random_generalized_channel(&chans, &out2, Seed(3)).unwrap();
    save_map(&p("gchan.json"), &g).unwrap();
    let bump = traceless(g.choi().layout(), 4).scale(0.05);
    let gbad = CpMapChoi::new(g.input().clone(), g.output().clone(), &g.choi().clone() + &bump).unwrap();
    save_map(&p("gchan_bad.json"), &gbad).unwrap();
    let c = random_simple_element(&chans, Seed(5)).unwrap();
    let simple = simple_channel(&c, &[FactorLabel(2), FactorLabel(3)], tol).unwrap();
    save_map(&p("simple_chan.json"), &simple).unwrap();

    // an equivalent pair: X and X + D with D ∈ B ⊗ ([K]^T)^⊥
    let flat = AlgOperator::identity(g.choi().layout()).scale(1.0 / (2.0 * chans.scale()));
    let x1 = &g.choi().scale(0.5) + &flat.scale(0.5);
    let w = Subspace::full(&out2).tensor(&chans.span().transpose().orthocomplement()).unwrap();
    let d = w.project(&random_hermitian(x1.layout(), Seed(6))).unwrap().hermitian_part();
    let d = d.scale(0.1 / d.norm());
    let x2 = &x1 + &d;
    assert!(min_eigenvalue(&x2, tol).unwrap() > 0.0);
    save_map(&p("gchan_eq_a.json"), &CpMapChoi::new(g.input().clone(), out2.clone(), x1.clone()).unwrap()).unwrap();
    save_map(&p("gchan_eq_b.json"), &CpMapChoi::new(g.input().clone(), out2.clone(), x2).unwrap()).unwrap();
    let e = traceless(x1.layout(), 9).scale(0.1);
    save_map(&p("gchan_eq_c.json"), &CpMapChoi::new(g.input().clone(), out2.clone(), &x1 + &e).unwrap()).unwrap();

    // an instrument with two outcomes on the full qubit section
    let outc = lay(&[Factor::new(4, AlgebraShape::classical(2)), q(5)]);
    let inst = random_generalized_channel(&SectionSpec::full(&in0), &outc, Seed(10)).unwrap();
    save_map(&p("instrument.json"), &inst).unwrap();

    // measurements
    let l10 = lay(&[q(1), q(0)]);
    let quarter = AlgOperator::identity(&l10).scale(0.25);
    let list = |xs: &[AlgOperator], name: &str| {
        write_json(&p(name), &OperatorListFile::from_operators(xs).unwrap()).unwrap();
    };
    list(&[quarter.clone(), quarter.clone()], "ppovm_uniform.json");
    list(&[quarter.scale(2.0), quarter.clone()], "ppovm_bad.json");
    let dp = chans.span().orthocomplement().project(&random_hermitian(&l10, Seed(11))).unwrap().hermitian_part();
    let dp = dp.scale(0.1 / dp.norm());
    list(&[&quarter + &dp, &quarter - &dp], "ppovm_eq.json");
    let ep = traceless(&l10, 12);
    let ep = chans.span().project(&ep).unwrap().hermitian_part();
    let ep = ep.scale(0.1 / ep.norm());
    list(&[&quarter + &ep, &quarter - &ep], "ppovm_neq.json");
    let pr = random_pvm(&in0, &[1, 1], Seed(13)).unwrap();
    list(&pr, "gpovm_full.json");

    // combs, testers and supermaps
    let s4 = qcomb::io::read_json::<SpecFile>(&p("spec_comb_4.json")).unwrap().load(tol).unwrap();
    let (cb, _) = random_comb(&s4.spec, Seed(14)).unwrap();
    save_operator(&p("comb4.json"), &cb).unwrap();
    let uni = AlgOperator::identity(s4.spec.layout(3)).scale(0.25);
    save_operator(&p("comb4_uniform.json"), &uni).unwrap();
    let corrupt = &cb + &traceless(cb.layout(), 15).scale(0.02);
    save_operator(&p("comb4_corrupt.json"), &corrupt).unwrap();
    let mut skew = cb.matrix().clone();
    skew[(0, 1)] += qcomb::Complex64::new(0.0, 0.05);
    save_operator(&p("comb4_nonherm.json"), &AlgOperator::new(cb.layout().clone(), skew).unwrap()).unwrap();

    let ts = qcomb::io::read_json::<SpecFile>(&p("spec_tester_2.json")).unwrap().load(tol).unwrap();
    let (t, _) = random_comb(&ts.spec, Seed(16)).unwrap();
    save_operator(&p("tester.json"), &t).unwrap();
    save_operator(&p("tester_uniform.json"), &AlgOperator::identity(ts.spec.layout(2)).scale(0.25)).unwrap();

    let sm = build_spec(&full0, vec![q(1), q(2)]).unwrap();
    let (m2, _) = random_comb(&sm, Seed(17)).unwrap();
    save_operator(&p("member_l2.json"), &m2).unwrap();
    let sc = build_spec(&chans, vec![q(2), q(3)]).unwrap();
    let (smx, _) = random_comb(&sc, Seed(18)).unwrap();
    save_operator(&p("supermap_chan.json"), &smx).unwrap();

    // link inputs
    save_operator(&p("state_q0.json"), &random_state(&in0, Seed(19))).unwrap();
    save_operator(&p("state_q5.json"), &random_state(&lay(&[q(5)]), Seed(20))).unwrap();

    // malformed inputs
    let good = OperatorFile::from_operator(&random_state(&in0, Seed(21))).unwrap();
    let raw = |name: &str, s: String| std::fs::write(p(name), s).unwrap();
    raw("bad_syntax.json", "{\"factors\": [".into());
    let mut f = good.clone();
    f.matrix.re.pop();
    f.matrix.im.pop();
    write_json(&p("bad_dims.json"), &f).unwrap();
    let mut f = OperatorFile::from_operator(&random_state(&Layout::single(0, AlgebraShape::new(vec![2, 1]).unwrap()), Seed(22))).unwrap();
    f.matrix.re[0][2] = 0.125;
    f.matrix.re[2][0] = 0.125;
    write_json(&p("bad_offblock.json"), &f).unwrap();
    let mut f = OperatorFile::from_operator(&AlgOperator::identity(&l10)).unwrap();
    f.factors[1].label = 1;
    write_json(&p("bad_duplicate_label.json"), &f).unwrap();
    let mut f = OperatorFile::from_map(&ch).unwrap();
    f.input_labels = None;
    write_json(&p("bad_choi_labels.json"), &f).unwrap();
    let s = qcomb::io::to_json(&good).unwrap();
    raw("bad_nan.json", s.replacen(&format!("{:?}", good.matrix.re[0][0]), "NaN", 1));
    raw("bad_inf.json", s.replacen(&format!("{:?}", good.matrix.re[0][0]), "1e999", 1));
    raw("bad_spec_kind.json", "{\"kind\": \"pipeline\", \"chain\": []}".into());
    println!("fixtures written to {}", Path::new(&dir).display());
}
