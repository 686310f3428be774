use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use qcomb::io::{read_json, LoadedSpec, OperatorFile, OperatorListFile, SectionFile, SpecFile};
use qcomb::{AlgOperator, CpMapChoi, Error, SectionSpec};
use serde_json::{json, Value};

/// Result of a command: whether the checked property holds, a JSON
/// document for `--json` and lines for people.
pub struct Outcome {
    pub json: Value,
    pub text: Vec<String>,
    pub code: u8,
}

impl Outcome {
    pub fn new(holds: bool, json: Value, text: Vec<String>) -> Self {
        let code = if holds { 0 } else { 1 };
        Outcome {
            json,
            text,
            code,
        }
    }

    pub fn code(&self) -> u8 {
        self.code
    }

    pub fn emit(self, as_json: bool) -> ExitCode {
        let mut out = std::io::stdout().lock();
        if as_json {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&self.json).expect("json value"));
        } else {
            for l in &self.text {
                let _ = writeln!(out, "{l}");
            }
        }
        ExitCode::from(self.code())
    }
}

#[derive(Debug)]
pub enum Failure {
    /// A checked condition failed on well-formed input.
    Fails(String),
    /// Unreadable or invalid input.
    Malformed(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Fails(_) => 1,
            Failure::Malformed(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Fails(m) | Failure::Malformed(m) => m,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "holds": false,
            "error": match self { Failure::Fails(_) => "fails", Failure::Malformed(_) => "malformed" },
            "message": self.message(),
        })
    }

    pub fn emit(self, as_json: bool) -> ExitCode {
        eprintln!("qcomb: {}", self.message());
        if as_json {
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&self.to_json()).expect("json value"));
        }
        ExitCode::from(self.code())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Violation { .. } | Error::NotPositive(_) | Error::NotHermitian(_) => {
                Failure::Fails(e.to_string())
            }
            _ => Failure::Malformed(e.to_string()),
        }
    }
}

pub fn malformed(msg: impl Into<String>) -> Failure {
    Failure::Malformed(msg.into())
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    read_json(path).map_err(|e| malformed(format!("{}: {e}", path.display())))
}

fn ctx<T>(path: &Path, r: qcomb::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Fails(m) => Failure::Fails(format!("{}: {m}", path.display())),
        Failure::Malformed(m) => Failure::Malformed(format!("{}: {m}", path.display())),
    })
}

pub fn load_operator_file(path: &Path) -> Result<OperatorFile, Failure> {
    read(path)
}

pub fn load_operator(path: &Path) -> Result<AlgOperator, Failure> {
    let f = load_operator_file(path)?;
    ctx(path, f.to_operator())
}

pub fn load_map(path: &Path) -> Result<CpMapChoi, Failure> {
    let f = load_operator_file(path)?;
    ctx(path, f.to_map())
}

pub fn load_effects(path: &Path) -> Result<Vec<AlgOperator>, Failure> {
    let f: OperatorListFile = read(path)?;
    ctx(path, f.to_operators())
}

pub fn load_section(path: &Path, tol: f64) -> Result<SectionSpec, Failure> {
    let f: SectionFile = read(path)?;
    ctx(path, f.to_section(tol)).map_err(|e| malformed(e.message()))
}

pub fn load_spec(path: &Path, tol: f64) -> Result<LoadedSpec, Failure> {
    let f: SpecFile = read(path)?;
    ctx(path, f.load(tol)).map_err(|e| malformed(e.message()))
}

pub fn require<'a>(p: &'a Option<std::path::PathBuf>, flag: &str, what: &str) -> Result<&'a Path, Failure> {
    p.as_deref()
        .ok_or_else(|| malformed(format!("{what} needs --{flag}")))
}

/// Either a single operator file or a list file.
pub enum Loaded {
    One(OperatorFile),
    List(OperatorListFile),
}

pub fn load_any(path: &Path) -> Result<Loaded, Failure> {
    let s = std::fs::read_to_string(path).map_err(|e| malformed(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&s).map_err(|e| malformed(format!("{}: {e}", path.display())))?;
    let parsed = if v.get("operators").is_some() {
        serde_json::from_value(v).map(Loaded::List)
    } else {
        serde_json::from_value(v).map(Loaded::One)
    };
    parsed.map_err(|e| malformed(format!("{}: {e}", path.display())))
}

pub fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

pub fn write_operator(path: &Path, x: &AlgOperator) -> Result<(), Failure> {
    qcomb::io::save_operator(path, x).map_err(|e| malformed(format!("{}: {e}", path.display())))
}

pub fn write_map(path: &Path, m: &CpMapChoi) -> Result<(), Failure> {
    qcomb::io::save_map(path, m).map_err(|e| malformed(format!("{}: {e}", path.display())))
}

pub fn write_value(path: &Path, v: &Value) -> Result<(), Failure> {
    qcomb::io::write_json(path, v).map_err(|e| malformed(format!("{}: {e}", path.display())))
}

/// `tol · max(1, scale)`.
pub fn rel(tol: f64, scale: f64) -> f64 {
    tol * scale.max(1.0)
}
