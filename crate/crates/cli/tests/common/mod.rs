#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn qcomb(args: &[&str], out: &Path, env: &[(&str, &str)]) -> Run {
    let o = out.to_str().unwrap();
    let args: Vec<String> = args.iter().map(|a| a.replace("$OUT", o)).collect();
    let mut c = Command::new(env!("CARGO_BIN_EXE_qcomb"));
    c.args(&args).current_dir(fixtures()).env_remove("QCOMB_TOL");
    for (k, v) in env {
        c.env(k, v);
    }
    let r = c.output().expect("run qcomb");
    Run {
        code: r.status.code().expect("exit code"),
        stdout: String::from_utf8(r.stdout).unwrap().replace(o, "$OUT"),
        stderr: String::from_utf8(r.stderr).unwrap(),
    }
}

pub fn close(a: &Value, b: &Value, path: &str, diffs: &mut Vec<String>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() > 1e-8 * x.abs().max(y.abs()).max(1.0) {
                diffs.push(format!("{path}: {x} vs {y}"));
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                close(u, v, &format!("{path}[{i}]"), diffs);
            }
        }
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => {
            for (k, u) in x {
                match y.get(k) {
                    Some(v) => close(u, v, &format!("{path}.{k}"), diffs),
                    None => diffs.push(format!("{path}.{k}: missing")),
                }
            }
        }
        _ if a == b => {}
        _ => diffs.push(format!("{path}: {a} vs {b}")),
    }
}

/// Runs each case with `--json` and compares exit code and stdout with
/// `tests/golden/<name>.json`. `UPDATE_GOLDEN=1` rewrites the files.
pub fn golden_failures(cases: &[(&str, &[&str], i32)]) -> Vec<String> {
    let tmp = tempfile::tempdir().unwrap();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut failures = Vec::new();
    for (name, args, want) in cases {
        let mut a: Vec<&str> = args.to_vec();
        a.push("--json");
        let r = qcomb(&a, tmp.path(), &[]);
        if r.code != *want {
            failures.push(format!("{name}: exit {} (want {want}); stderr: {}", r.code, r.stderr));
            continue;
        }
        let stdout: Value = match serde_json::from_str(&r.stdout) {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("{name}: stdout is not JSON ({e}): {}", r.stdout));
                continue;
            }
        };
        let got = serde_json::json!({"exit": r.code, "stdout": stdout});
        let path = golden_dir().join(format!("{name}.json"));
        if update {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
            continue;
        }
        let Ok(text) = std::fs::read_to_string(&path) else {
            failures.push(format!("{name}: missing golden file {}", path.display()));
            continue;
        };
        let want: Value = serde_json::from_str(&text).unwrap();
        let mut diffs = Vec::new();
        close(&got, &want, name, &mut diffs);
        if !diffs.is_empty() {
            failures.push(diffs.join("\n"));
        }
    }
    failures
}

pub fn golden(cases: &[(&str, &[&str], i32)]) {
    let failures = golden_failures(cases);
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

pub fn all_cases() -> Vec<(&'static str, &'static [&'static str], i32)> {
    VERIFY.iter().chain(DECOMPOSE).chain(OPS).copied().collect()
}

/// Number of fixture files, after checking that every one is used by a case.
pub fn corpus_coverage() -> Result<usize, String> {
    let files: Vec<String> = std::fs::read_dir(fixtures())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    let used: Vec<&str> = all_cases().iter().flat_map(|c| c.1.iter().copied()).collect();
    for f in &files {
        if !used.contains(&f.as_str()) {
            return Err(format!("fixture {f} is not exercised"));
        }
    }
    Ok(files.len())
}

/// Re-serializes every well-formed operator fixture and compares the text.
pub fn round_trip() -> Result<usize, String> {
    let mut n = 0;
    for e in std::fs::read_dir(fixtures()).map_err(|e| e.to_string())? {
        let p = e.unwrap().path();
        let text = std::fs::read_to_string(&p).map_err(|e| e.to_string())?;
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("bad_") {
            continue;
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| format!("{name}: {e}"))?;
        let fail = |e: qcomb::Error| format!("{name}: {e}");
        let again = if v.get("matrix").is_some() {
            let f: qcomb::io::OperatorFile = qcomb::io::from_json(&text).map_err(fail)?;
            let g = if f.is_choi() {
                qcomb::io::OperatorFile::from_map(&f.to_map().map_err(fail)?)
            } else {
                qcomb::io::OperatorFile::from_operator(&f.to_operator().map_err(fail)?)
            };
            qcomb::io::to_json(&g.map_err(fail)?).map_err(fail)?
        } else if v.get("operators").is_some() {
            let f: qcomb::io::OperatorListFile = qcomb::io::from_json(&text).map_err(fail)?;
            let ops = f.to_operators().map_err(fail)?;
            qcomb::io::to_json(&qcomb::io::OperatorListFile::from_operators(&ops).map_err(fail)?).map_err(fail)?
        } else {
            continue;
        };
        if again + "\n" != text {
            return Err(format!("{name} does not round-trip"));
        }
        n += 1;
    }
    Ok(n)
}

pub const VERIFY: &[(&str, &[&str], i32)] = &[
    ("verify_channel_psi", &["verify", "--kind", "channel", "--input", "psi2.json"], 0),
    ("verify_channel_random", &["verify", "--kind", "channel", "--input", "chan_rand.json"], 0),
    ("verify_cp_random", &["verify", "--kind", "cp", "--input", "chan_rand2.json"], 0),
    ("verify_cp_transpose", &["verify", "--kind", "cp", "--input", "transpose_map.json"], 1),
    ("verify_channel_not_tp", &["verify", "--kind", "channel", "--input", "chan_not_tp.json"], 1),
    ("verify_cp_not_tp", &["verify", "--kind", "cp", "--input", "chan_not_tp.json"], 0),
    ("verify_gchannel", &["verify", "--kind", "gchannel", "--input", "gchan.json", "--section", "sec_channels.json"], 0),
    ("verify_gchannel_simple", &["verify", "--kind", "gchannel", "--input", "simple_chan.json", "--section", "sec_channels.json"], 0),
    ("verify_gchannel_bad", &["verify", "--kind", "gchannel", "--input", "gchan_bad.json", "--section", "sec_channels.json"], 1),
    ("verify_gchannel_no_section", &["verify", "--kind", "gchannel", "--input", "gchan.json"], 2),
    ("verify_ppovm_uniform", &["verify", "--kind", "ppovm", "--input", "ppovm_uniform.json"], 0),
    ("verify_ppovm_bad", &["verify", "--kind", "ppovm", "--input", "ppovm_bad.json"], 1),
    ("verify_ppovm_eq", &["verify", "--kind", "ppovm", "--input", "ppovm_eq.json"], 0),
    ("verify_gpovm_pvm", &["verify", "--kind", "gpovm", "--input", "gpovm_full.json", "--section", "sec_full_q.json"], 0),
    ("verify_instrument", &["verify", "--kind", "instrument", "--input", "instrument.json", "--section", "sec_full_q.json"], 0),
    ("verify_comb_both", &["verify", "--kind", "comb", "--input", "comb4.json", "--spec", "spec_comb_4.json", "--method", "both"], 0),
    ("verify_comb_uniform", &["verify", "--kind", "comb", "--input", "comb4_uniform.json", "--spec", "spec_comb_4.json", "--method", "both"], 0),
    ("verify_comb_corrupt", &["verify", "--kind", "comb", "--input", "comb4_corrupt.json", "--spec", "spec_comb_4.json", "--method", "both"], 1),
    ("verify_comb_corrupt_chain", &["verify", "--kind", "comb", "--input", "comb4_corrupt.json", "--spec", "spec_comb_4.json", "--method", "chain"], 1),
    ("verify_comb_nonhermitian", &["verify", "--kind", "comb", "--input", "comb4_nonherm.json", "--spec", "spec_comb_4.json"], 1),
    ("verify_comb_odd_spec", &["verify", "--kind", "comb", "--input", "comb4.json", "--spec", "spec_odd.json"], 2),
    ("verify_comb_wrong_kind", &["verify", "--kind", "supermap", "--input", "comb4.json", "--spec", "spec_comb_4.json"], 2),
    ("verify_comb2_psi", &["verify", "--kind", "comb", "--input", "psi2.json", "--spec", "spec_comb_2.json"], 0),
    ("verify_tester", &["verify", "--kind", "tester", "--input", "tester.json", "--spec", "spec_tester_2.json", "--method", "both"], 0),
    ("verify_tester_uniform", &["verify", "--kind", "tester", "--input", "tester_uniform.json", "--spec", "spec_tester_2.json"], 0),
    ("verify_supermap_chan", &["verify", "--kind", "supermap", "--input", "supermap_chan.json", "--spec", "spec_supermap_chan.json", "--method", "both"], 0),
    ("verify_supermap_full", &["verify", "--kind", "supermap", "--input", "member_l2.json", "--spec", "spec_supermap_full2.json", "--method", "chain"], 0),
    ("verify_bad_syntax", &["verify", "--kind", "cp", "--input", "bad_syntax.json"], 2),
    ("verify_bad_nan", &["verify", "--kind", "cp", "--input", "bad_nan.json"], 2),
    ("verify_bad_inf", &["verify", "--kind", "cp", "--input", "bad_inf.json"], 2),
    ("verify_bad_offblock", &["verify", "--kind", "comb", "--input", "bad_offblock.json", "--spec", "spec_comb_2.json"], 2),
    ("verify_bad_dims", &["verify", "--kind", "cp", "--input", "bad_dims.json"], 2),
    ("verify_bad_duplicate", &["verify", "--kind", "cp", "--input", "bad_duplicate_label.json"], 2),
    ("verify_bad_choi_labels", &["verify", "--kind", "channel", "--input", "bad_choi_labels.json"], 2),
    ("verify_bad_spec_kind", &["verify", "--kind", "comb", "--input", "comb4.json", "--spec", "bad_spec_kind.json"], 2),
    ("verify_missing_file", &["verify", "--kind", "cp", "--input", "absent.json"], 2),
    ("verify_gchannel_on_pvm_section_mismatch", &["verify", "--kind", "gchannel", "--input", "gchan.json", "--section", "sec_pvm.json"], 2),
    ("verify_cp_on_plain_operator", &["verify", "--kind", "cp", "--input", "state_q0.json"], 2),
];

pub const DECOMPOSE: &[(&str, &[&str], i32)] = &[
    ("decompose_simple_factor", &["decompose", "--method", "simple-factor", "--input", "simple_chan.json", "--section", "sec_channels.json", "--out", "$OUT/sf"], 0),
    ("decompose_simple_factor_random", &["decompose", "--method", "simple-factor", "--input", "gchan.json", "--section", "sec_channels.json", "--out", "$OUT/sf2"], 0),
    ("decompose_simple_factor_invalid", &["decompose", "--method", "simple-factor", "--input", "gchan_bad.json", "--section", "sec_channels.json", "--out", "$OUT/sf3"], 1),
    ("decompose_semilocalize", &["decompose", "--method", "semilocalize", "--input", "member_l2.json", "--a", "2", "--b", "1", "--out", "$OUT/sl"], 0),
    ("decompose_semilocalize_invalid", &["decompose", "--method", "semilocalize", "--input", "comb4_corrupt.json", "--a", "3", "--b", "2", "--out", "$OUT/sl2"], 1),
    ("decompose_semilocalize_no_groups", &["decompose", "--method", "semilocalize", "--input", "member_l2.json", "--out", "$OUT/sl3"], 2),
    ("decompose_ladder", &["decompose", "--method", "ladder", "--input", "comb4.json", "--spec", "spec_comb_4.json", "--out", "$OUT/lad"], 0),
    ("decompose_ladder_tester", &["decompose", "--method", "ladder", "--input", "tester.json", "--spec", "spec_tester_2.json", "--out", "$OUT/lad2"], 0),
    ("decompose_ladder_invalid", &["decompose", "--method", "ladder", "--input", "comb4_corrupt.json", "--spec", "spec_comb_4.json", "--out", "$OUT/lad3"], 1),
    ("decompose_realize", &["decompose", "--method", "realize", "--input", "gchan.json", "--out", "$OUT/re"], 0),
    ("decompose_realize_simple", &["decompose", "--method", "realize", "--input", "simple_chan.json", "--out", "$OUT/re2"], 0),
];

pub const OPS: &[(&str, &[&str], i32)] = &[
    ("link_disjoint", &["link", "state_q0.json", "state_q5.json", "-o", "$OUT/l.json"], 0),
    ("link_channel_state", &["link", "chan_rand.json", "state_q0.json", "-o", "$OUT/l2.json"], 0),
    ("link_malformed", &["link", "bad_dims.json", "state_q0.json", "-o", "$OUT/l3.json"], 2),
    ("apply_tester_channel", &["apply", "tester.json", "chan_rand.json", "--spec", "spec_tester_2.json", "-o", "$OUT/p.json"], 0),
    ("apply_uniform_tester", &["apply", "tester_uniform.json", "chan_rand2.json", "--spec", "spec_tester_2.json"], 0),
    ("apply_non_member", &["apply", "tester.json", "chan_not_tp.json", "--spec", "spec_tester_2.json"], 1),
    ("apply_supermap", &["apply", "member_l2.json", "chan_rand.json", "--spec", "spec_supermap_full2.json"], 0),
    ("equiv_gchannel_pair", &["equiv", "gchan_eq_a.json", "gchan_eq_b.json", "--section", "sec_channels.json"], 0),
    ("equiv_gchannel_different", &["equiv", "gchan_eq_a.json", "gchan_eq_c.json", "--section", "sec_channels.json"], 1),
    ("equiv_ppovm_pair", &["equiv", "ppovm_uniform.json", "ppovm_eq.json", "--section", "sec_channels.json"], 0),
    ("equiv_ppovm_different", &["equiv", "ppovm_uniform.json", "ppovm_neq.json", "--section", "sec_channels.json"], 1),
    ("equiv_comb_same", &["equiv", "comb4.json", "comb4.json", "--spec", "spec_comb_4.json"], 0),
    ("equiv_comb_different", &["equiv", "comb4.json", "comb4_uniform.json", "--spec", "spec_comb_4.json"], 1),
    ("equiv_tester_same", &["equiv", "tester.json", "tester.json", "--spec", "spec_tester_2.json"], 0),
    ("equiv_no_reference", &["equiv", "comb4.json", "comb4.json"], 2),
    ("equiv_mixed_inputs", &["equiv", "gchan_eq_a.json", "ppovm_eq.json", "--section", "sec_channels.json"], 2),
    ("sample_state", &["sample", "--kind", "state", "--blocks", "2,1", "--seed", "1", "-o", "$OUT/s.json"], 0),
    ("sample_channel", &["sample", "--kind", "channel", "--seed", "2", "--kraus-rank", "1", "-o", "$OUT/c.json"], 0),
    ("sample_gchannel", &["sample", "--kind", "gchannel", "--section", "sec_pvm.json", "--seed", "3", "-o", "$OUT/g.json"], 0),
    ("sample_section_element", &["sample", "--kind", "section-element", "--section", "sec_channels.json", "--seed", "4", "-o", "$OUT/e.json"], 0),
    ("sample_simple_element", &["sample", "--kind", "simple-element", "--section", "sec_channels.json", "--seed", "5", "-o", "$OUT/se.json"], 0),
    ("sample_comb", &["sample", "--kind", "comb", "--spec", "spec_comb_4.json", "--seed", "6", "-o", "$OUT/cb.json"], 0),
    ("sample_missing_spec", &["sample", "--kind", "comb", "--seed", "6", "-o", "$OUT/cb2.json"], 2),
];

