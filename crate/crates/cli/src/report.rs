use std::fmt::Write as _;

use polyside::grouping::{DualCertificate, GroupStructure, Solution};
use polyside::rational::{fmt_rational, Rational};
use polyside::setfn::{Check, Subset};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Infeasible,
    Invalid,
    CheckFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Infeasible | Status::Invalid => 1,
            Status::CheckFailed => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub oracle: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

impl CheckReport {
    pub fn new(oracle: &'static str, ok: bool, detail: impl Into<String>) -> Self {
        CheckReport {
            oracle,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail: detail.into(),
        }
    }

    pub fn skipped(oracle: &'static str, detail: impl Into<String>) -> Self {
        CheckReport {
            oracle,
            verdict: Verdict::Skipped,
            detail: detail.into(),
        }
    }
}

/// The result of one subcommand before it is wrapped into a report.
pub struct Outcome {
    pub status: Status,
    pub result: Value,
    pub stats: Option<Value>,
    pub check: Option<CheckReport>,
}

impl Outcome {
    pub fn ok(result: Value) -> Self {
        Outcome {
            status: Status::Ok,
            result,
            stats: None,
            check: None,
        }
    }

    pub fn invalid(message: impl ToString) -> Self {
        Outcome {
            status: Status::Invalid,
            result: json!({ "error": message.to_string() }),
            stats: None,
            check: None,
        }
    }

    /// Downgrades the status when the attached check failed.
    pub fn with_check(mut self, check: Option<CheckReport>) -> Self {
        if check.as_ref().is_some_and(|c| c.verdict == Verdict::Fail) {
            self.status = Status::CheckFailed;
        }
        self.check = check;
        self
    }
}

/// One line of output. Everything except `wall_ms` is a function of the
/// arguments and the instance bytes.
#[derive(Serialize)]
pub struct RunReport {
    pub record: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub instance_digest: Option<String>,
    pub status: Status,
    pub result: Value,
    pub stats: Option<Value>,
    pub check: Option<CheckReport>,
    pub wall_ms: u64,
}

pub fn digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let mut out = String::from("sha256:");
    for b in hash {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn num(r: &Rational) -> Value {
    Value::String(fmt_rational(r))
}

pub fn nums(v: &[Rational]) -> Value {
    Value::Array(v.iter().map(num).collect())
}

pub fn set(s: Subset) -> Value {
    Value::String(s.to_string())
}

pub fn check_json(c: &Check) -> Value {
    match c {
        Check::Pass => json!("pass"),
        Check::Fail { a, b } => json!({ "fail": { "a": a.to_string(), "b": b.to_string() } }),
    }
}

pub fn groups(gs: &GroupStructure) -> Value {
    Value::Array(
        gs.groups
            .iter()
            .map(|g| {
                json!({
                    "lead": g.lead,
                    "subgroups": g.subgroups.iter().map(|s| s.members.clone()).collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

pub fn certificate(cert: &DualCertificate) -> Value {
    json!({
        "y": cert.y.iter().map(|(s, v)| json!({ "set": s.to_string(), "value": num(v) })).collect::<Vec<_>>(),
        "z": cert.z.iter().map(|(k, v)| json!({ "element": k, "value": num(v) })).collect::<Vec<_>>(),
    })
}

pub fn solution(sense: &str, sol: &Solution) -> Value {
    json!({
        "sense": sense,
        "x": nums(&sol.primal.x),
        "objective": num(&sol.primal.objective),
        "groups": groups(&sol.groups),
        "certificate": certificate(&sol.certificate),
    })
}

pub fn stats(s: &polyside::grouping::Stats) -> Value {
    serde_json::to_value(s).expect("stats serialize")
}
