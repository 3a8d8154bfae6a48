use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use polyside::grouping::{
    check_certificate, check_min_side_certificate, solve_max_side_with, solve_min_side_with, GroupingError,
    Solution, SolveOptions,
};
use polyside::oracle::{
    brute_lp, brute_lp_min_side, brute_sfm, cut_graph_max_flow, OracleBudget, OracleError,
};
use polyside::polymatroid::Permutation;
use polyside::rational::{fmt_rational, int, one, parse_rational, zero, Rational};
use polyside::schedule::{decompose, describe_policy, verify_conservation, ConservationViolation, PerformanceTable, TableKind};
use polyside::setfn::{
    complement, generate_instance, generate_sfm_instance, validate_polymatroid, Family, InstanceFile,
    NumberField, PolymatroidInstance, SetFunction, SetFunctionOracle, SfmFamily, Subset,
};
use polyside::sfm::{minimize_with, SfmInstance};
use serde_json::{json, Value};

use crate::report::{self, num, nums, set, CheckReport, Outcome, Status};
use crate::{Cli, Command, FamilyArg, Sense, UsageError};

type Run = Result<(Outcome, Option<String>), UsageError>;

pub fn run(cli: &Cli) -> Run {
    match &cli.command {
        Command::Solve => with_instance(cli, solve),
        Command::Sfm => with_instance(cli, sfm),
        Command::Decompose => with_instance(cli, decompose_cmd),
        Command::Validate { table: Some(path) } => {
            let bytes = read(path)?;
            Ok((validate_table(cli, &bytes), Some(report::digest(&bytes))))
        }
        Command::Validate { table: None } => with_instance(cli, validate),
        Command::Gen { sfm } => Ok((gen(cli, *sfm)?, None)),
        Command::Bench { sfm, reps } => Ok((bench(cli, *sfm, *reps)?, None)),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, UsageError> {
    fs::read(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))
}

fn with_instance(cli: &Cli, body: fn(&Cli, &InstanceFile) -> Outcome) -> Run {
    let path = cli
        .instance
        .as_ref()
        .ok_or_else(|| UsageError("--instance is required".into()))?;
    let bytes = read(path)?;
    let digest = Some(report::digest(&bytes));
    let text = String::from_utf8_lossy(&bytes);
    let outcome = match InstanceFile::parse(&text) {
        Ok(file) => body(cli, &file),
        Err(e) => Outcome::invalid(e),
    };
    Ok((outcome, digest))
}

fn finite_vector(v: &Option<Vec<NumberField>>, name: &str, n: usize) -> Result<Vec<Rational>, String> {
    match v {
        None => Ok(vec![zero(); n]),
        Some(items) => items
            .iter()
            .map(|x| x.finite().cloned().ok_or_else(|| format!("`{name}` must be finite")))
            .collect(),
    }
}

fn options(cli: &Cli) -> SolveOptions {
    SolveOptions {
        trace: cli.trace.is_some(),
        audit: false,
    }
}

fn write_trace(cli: &Cli, sol: &Solution) -> Result<(), String> {
    let Some(path) = &cli.trace else { return Ok(()) };
    let mut file = fs::File::create(path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    for event in &sol.trace {
        let line = serde_json::to_string(event).expect("trace serializes");
        writeln!(file, "{line}").map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn infeasible(err: &GroupingError) -> Option<Value> {
    match err {
        GroupingError::InfeasibleSideConstraints { witness, load, capacity } => Some(json!({
            "witness": witness.to_string(),
            "load": num(load),
            "capacity": num(capacity),
        })),
        _ => None,
    }
}

fn corrupt(sol: &mut Solution, c: &[Rational]) {
    if let Some(x0) = sol.primal.x.first_mut() {
        *x0 += one();
    }
    sol.primal.objective = c.iter().zip(&sol.primal.x).map(|(a, b)| a * b).sum();
}

enum Problem {
    Max(PolymatroidInstance),
    Min {
        b: SetFunctionOracle,
        c: Vec<Rational>,
        d: Vec<Option<Rational>>,
    },
}

fn problem(cli: &Cli, file: &InstanceFile) -> Result<Problem, String> {
    let n = file.n;
    let oracle = file.rank_oracle().map_err(|e| e.to_string())?;
    let c = match &file.c {
        None => return Err("field `c` is missing".into()),
        Some(_) => finite_vector(&file.c, "c", n)?,
    };
    match cli.sense {
        Sense::MaxF => {
            let d = finite_vector(&file.d, "d", n)?;
            PolymatroidInstance::new(Arc::new(oracle), c, d)
                .map(Problem::Max)
                .map_err(|e| e.to_string())
        }
        Sense::MinB => {
            let d = match &file.d {
                None => vec![None; n],
                Some(items) => items.iter().map(|x| x.finite().cloned()).collect(),
            };
            Ok(Problem::Min { b: oracle, c, d })
        }
    }
}

fn solve_problem(cli: &Cli, p: &Problem) -> Result<Solution, GroupingError> {
    match p {
        Problem::Max(inst) => solve_max_side_with(inst, &options(cli)),
        Problem::Min { b, c, d } => solve_min_side_with(b, c, d, &options(cli)),
    }
}

fn brute(p: &Problem) -> Result<(Vec<Rational>, Rational), OracleError> {
    match p {
        Problem::Max(inst) => brute_lp(inst),
        Problem::Min { b, c, d } => brute_lp_min_side(b, b.n(), c, d, &OracleBudget::default()),
    }
}

fn lp_check(p: &Problem, sol: Result<&Solution, &GroupingError>) -> CheckReport {
    const ORACLE: &str = "brute-lp";
    if let Err(e) = sol {
        if infeasible(e).is_none() {
            return CheckReport::skipped(ORACLE, "solver rejected the instance");
        }
    }
    let expected = match brute(p) {
        Err(OracleError::BudgetExceeded { what, needed, limit }) => {
            return CheckReport::skipped(ORACLE, format!("{what}: {needed} exceeds {limit}"))
        }
        other => other,
    };
    match (sol, expected) {
        (Ok(sol), Ok((_, opt))) => {
            let cert = match p {
                Problem::Max(inst) => check_certificate(inst, sol),
                Problem::Min { b, c, d } => check_min_side_certificate(b, c, d, sol),
            };
            let same = sol.primal.objective == opt;
            let mut detail = format!("oracle objective {}", fmt_rational(&opt));
            if !cert.passed() {
                detail = format!("{detail}; certificate: {}", cert.failures.join("; "));
            }
            CheckReport::new(ORACLE, same && cert.passed(), detail)
        }
        (Err(e), Err(OracleError::Infeasible { .. })) if infeasible(e).is_some() => {
            CheckReport::new(ORACLE, true, "oracle also infeasible")
        }
        (Ok(_), Err(e)) => CheckReport::new(ORACLE, false, format!("oracle: {e}")),
        (Err(_), Ok((_, opt))) => {
            CheckReport::new(ORACLE, false, format!("oracle objective {}", fmt_rational(&opt)))
        }
        (Err(_), Err(e)) => CheckReport::new(ORACLE, false, format!("oracle: {e}")),
    }
}

fn sense_name(cli: &Cli) -> &'static str {
    match cli.sense {
        Sense::MaxF => "max-f",
        Sense::MinB => "min-b",
    }
}

fn solve(cli: &Cli, file: &InstanceFile) -> Outcome {
    let p = match problem(cli, file) {
        Ok(p) => p,
        Err(e) => return Outcome::invalid(e),
    };
    let c = match &p {
        Problem::Max(inst) => inst.c.clone(),
        Problem::Min { c, .. } => c.clone(),
    };
    let mut res = solve_problem(cli, &p);
    if let (Ok(sol), true) = (&mut res, cli.inject_fault) {
        corrupt(sol, &c);
    }
    let check = cli.check.then(|| lp_check(&p, res.as_ref()));
    match res {
        Ok(sol) => {
            if let Err(e) = write_trace(cli, &sol) {
                return Outcome::invalid(e);
            }
            Outcome {
                status: Status::Ok,
                result: report::solution(sense_name(cli), &sol),
                stats: Some(report::stats(&sol.stats)),
                check: None,
            }
            .with_check(check)
        }
        Err(e) => failed_solve(e).with_check(check),
    }
}

fn failed_solve(e: GroupingError) -> Outcome {
    match infeasible(&e) {
        Some(detail) => Outcome {
            status: Status::Infeasible,
            result: json!({ "infeasible": detail, "error": e.to_string() }),
            stats: None,
            check: None,
        },
        None => Outcome::invalid(e),
    }
}

fn sfm(cli: &Cli, file: &InstanceFile) -> Outcome {
    let psi = match file.oracle() {
        Ok(o) => Arc::new(o),
        Err(e) => return Outcome::invalid(e),
    };
    let inst = SfmInstance::new(Arc::clone(&psi));
    let mut res = match minimize_with(&inst, &options(cli)) {
        Ok(r) => r,
        Err(e) => return Outcome::invalid(e),
    };
    if cli.inject_fault {
        res.value += one();
    }
    let check = cli.check.then(|| {
        const ORACLE: &str = "brute-sfm";
        match brute_sfm(&psi) {
            Ok((argmin, value)) => {
                let mut ok = argmin == res.argmin && value == res.value;
                let mut detail = format!("oracle argmin {argmin} value {}", fmt_rational(&value));
                if let Some(graph) = psi.cut_graph() {
                    match cut_graph_max_flow(graph) {
                        Ok(flow) => {
                            ok &= flow == res.value;
                            detail = format!("{detail}; max flow {}", fmt_rational(&flow));
                        }
                        Err(e) => {
                            ok = false;
                            detail = format!("{detail}; max flow: {e}");
                        }
                    }
                }
                CheckReport::new(ORACLE, ok, detail)
            }
            Err(OracleError::BudgetExceeded { what, needed, limit }) => {
                CheckReport::skipped(ORACLE, format!("{what}: {needed} exceeds {limit}"))
            }
            Err(e) => CheckReport::new(ORACLE, false, e.to_string()),
        }
    });
    let mut stats = report::stats(&res.stats);
    stats["psi_evaluations"] = json!(res.psi_evaluations);
    Outcome {
        status: Status::Ok,
        result: json!({
            "argmin": set(res.argmin),
            "argmin_mask": res.argmin.mask().to_string(),
            "value": num(&res.value),
            "candidates": res.candidates.iter().map(|c| json!({
                "element": c.element,
                "set": set(c.set),
                "value": num(&c.value),
            })).collect::<Vec<_>>(),
        }),
        stats: Some(stats),
        check: None,
    }
    .with_check(check)
}

fn decompose_cmd(cli: &Cli, file: &InstanceFile) -> Outcome {
    if cli.sense != Sense::MaxF {
        return Outcome::invalid("decompose supports --sense max-f only");
    }
    let inst = match problem(cli, file) {
        Ok(Problem::Max(inst)) => inst,
        Ok(_) => unreachable!(),
        Err(e) => return Outcome::invalid(e),
    };
    let sol = match solve_max_side_with(&inst, &options(cli)) {
        Ok(sol) => sol,
        Err(e) => return failed_solve(e),
    };
    let dec = match decompose(inst.f.as_ref(), &sol.primal.x, &sol.groups) {
        Ok(d) => d,
        Err(e) => return Outcome::invalid(e),
    };
    let desc = describe_policy(&dec, &sol.groups, &sol.primal.x);
    let check = cli.check.then(|| {
        let mut target = sol.primal.x.clone();
        if cli.inject_fault {
            target[0] += one();
        }
        let total: Rational = dec.terms.iter().map(|(w, _)| w).sum();
        let ok = dec.reconstruct(inst.f.as_ref()) == target && total == one() && dec.respects_groups();
        CheckReport::new("reconstruction", ok, format!("{} terms", dec.terms.len()))
    });
    Outcome {
        status: Status::Ok,
        result: json!({
            "x": nums(&sol.primal.x),
            "objective": num(&sol.primal.objective),
            "groups": report::groups(&sol.groups),
            "terms": dec.terms.iter().map(|(w, pi)| json!({
                "weight": num(w),
                "order": pi.order(),
            })).collect::<Vec<_>>(),
            "policy": serde_json::to_value(&desc).expect("policy serializes"),
            "description": desc.to_string(),
        }),
        stats: Some(report::stats(&sol.stats)),
        check: None,
    }
    .with_check(check)
}

fn validate(cli: &Cli, file: &InstanceFile) -> Outcome {
    let oracle = match file.rank_oracle() {
        Ok(o) => o,
        Err(e) => return Outcome::invalid(e),
    };
    let (kind, normalized, rep) = match cli.sense {
        Sense::MaxF => ("polymatroid", None, validate_polymatroid(&oracle)),
        Sense::MinB => {
            let at_empty = oracle.eval(Subset::EMPTY);
            let conj = complement(&Arc::new(oracle)).and_then(|c| validate_polymatroid(&c));
            ("supermodular", Some(at_empty), conj)
        }
    };
    let rep = match rep {
        Ok(r) => r,
        Err(e) => return Outcome::invalid(e),
    };
    let normalized_ok = normalized.as_ref().map_or(rep.normalized.passed(), |v| *v == zero());
    let valid = normalized_ok && rep.increasing.passed() && rep.submodular.passed();
    let curvature = if cli.sense == Sense::MaxF { "submodular" } else { "supermodular" };
    let normalized_json = match normalized {
        None => report::check_json(&rep.normalized),
        Some(v) if v == zero() => json!("pass"),
        Some(v) => json!({ "fail": { "value": num(&v) } }),
    };
    let mut result = json!({
        "kind": kind,
        "valid": valid,
        "normalized": normalized_json,
        "increasing": report::check_json(&rep.increasing),
        "method": format!("{:?}", rep.method).to_lowercase(),
    });
    result[curvature] = report::check_json(&rep.submodular);
    Outcome {
        status: if valid { Status::Ok } else { Status::Invalid },
        result,
        stats: None,
        check: None,
    }
}

fn parse_table(bytes: &[u8]) -> Result<PerformanceTable, String> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    let n = root["n"].as_u64().ok_or("field `n` is missing")? as usize;
    let rows = root["rows"].as_array().ok_or("field `rows` is missing")?;
    let mut table = PerformanceTable {
        n,
        rows: Default::default(),
    };
    for row in rows {
        let order: Vec<usize> = row["order"]
            .as_array()
            .ok_or("row without `order`")?
            .iter()
            .map(|v| v.as_u64().map(|u| u as usize).ok_or("orders hold element indices"))
            .collect::<Result<_, _>>()?;
        let pi = Permutation::new(order).map_err(|e| e.to_string())?;
        let x: Vec<Rational> = row["x"]
            .as_array()
            .ok_or("row without `x`")?
            .iter()
            .map(|v| match v {
                Value::Number(k) => k
                    .as_i64()
                    .map(int)
                    .ok_or_else(|| "write fractions as \"p/q\"".to_string()),
                Value::String(s) => parse_rational(s).map_err(|e| e.to_string()),
                _ => Err("unexpected table entry".to_string()),
            })
            .collect::<Result<_, _>>()?;
        table.rows.insert(pi, x);
    }
    Ok(table)
}

fn violation_json(v: &ConservationViolation) -> Value {
    let order = |p: &Permutation| json!(p.order());
    match v {
        ConservationViolation::PrefixInconsistent { set: s, first, second, first_value, second_value } => json!({
            "condition": "prefix-consistency",
            "set": set(*s),
            "orders": [order(first), order(second)],
            "values": [num(first_value), num(second_value)],
        }),
        ConservationViolation::TotalVaries { first, second, first_total, second_total } => json!({
            "condition": "total-invariance",
            "orders": [order(first), order(second)],
            "values": [num(first_total), num(second_total)],
        }),
        ConservationViolation::NotNormalized => json!({ "condition": "normalized" }),
        ConservationViolation::NotIncreasing { set: s, element } => json!({
            "condition": "increasing",
            "set": set(*s),
            "element": element,
        }),
        ConservationViolation::WrongCurvature { a, b } => json!({
            "condition": "curvature",
            "a": set(*a),
            "b": set(*b),
        }),
    }
}

fn validate_table(cli: &Cli, bytes: &[u8]) -> Outcome {
    let table = match parse_table(bytes) {
        Ok(t) => t,
        Err(e) => return Outcome::invalid(e),
    };
    let kind = match cli.sense {
        Sense::MaxF => TableKind::FType,
        Sense::MinB => TableKind::BType,
    };
    let rep = match verify_conservation(&table, kind) {
        Ok(r) => r,
        Err(e) => return Outcome::invalid(e),
    };
    Outcome {
        status: if rep.passed() { Status::Ok } else { Status::Invalid },
        result: json!({
            "kind": kind,
            "conserved": rep.passed(),
            "induced": rep.induced.as_deref().map(nums),
            "violation": rep.violation.as_ref().map(violation_json),
        }),
        stats: None,
        check: None,
    }
}

fn lp_family(f: FamilyArg) -> Result<Family, UsageError> {
    match f {
        FamilyArg::Cut => Ok(Family::CutGraph),
        FamilyArg::Concave => Ok(Family::ConcaveCardinality),
        FamilyArg::Coverage => Ok(Family::Coverage),
        FamilyArg::Table => Err(UsageError("--family table needs --sfm".into())),
    }
}

fn sfm_family(f: FamilyArg) -> SfmFamily {
    match f {
        FamilyArg::Cut => SfmFamily::Cut,
        FamilyArg::Concave => SfmFamily::Concave,
        FamilyArg::Coverage => SfmFamily::Coverage,
        FamilyArg::Table => SfmFamily::RandomTable,
    }
}

fn gen(cli: &Cli, sfm: bool) -> Result<Outcome, UsageError> {
    let family = cli.family.ok_or_else(|| UsageError("--family is required".into()))?;
    let n = cli.n.ok_or_else(|| UsageError("--n is required".into()))?;
    let file = if sfm {
        generate_sfm_instance(sfm_family(family), n, cli.seed)
            .and_then(|psi| InstanceFile::from_oracle(&psi, None, None))
    } else {
        let fam = lp_family(family)?;
        generate_instance(fam, n, cli.seed)
            .and_then(|inst| InstanceFile::from_oracle(&inst.f, Some(&inst.c), Some(&inst.d)))
    };
    let file = match file {
        Ok(f) => f,
        Err(e) => return Ok(Outcome::invalid(e)),
    };
    let text = file.to_json();
    let mut result = json!({
        "n": n,
        "seed": cli.seed,
        "digest": report::digest(text.as_bytes()),
    });
    match &cli.out {
        Some(path) => {
            fs::write(path, &text).map_err(|e| UsageError(format!("cannot write {}: {e}", path.display())))?;
            result["path"] = json!(path.display().to_string());
        }
        None => result["instance"] = serde_json::from_str(&text).expect("instance is JSON"),
    }
    Ok(Outcome::ok(result))
}

fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let num: f64 = points.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
    let den: f64 = points.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    Some(num / den)
}

fn bench(cli: &Cli, sfm: bool, reps: u64) -> Result<Outcome, UsageError> {
    let family = cli.family.unwrap_or(FamilyArg::Concave);
    let default_max = match (sfm, family) {
        (true, _) => 32,
        (false, FamilyArg::Cut) => 32,
        (false, _) => 64,
    };
    let max_n = cli.n.unwrap_or(default_max);
    let mut sizes = Vec::new();
    let mut n = if sfm { 4 } else { 8 };
    while n <= max_n {
        sizes.push(n);
        n *= 2;
    }
    if sizes.is_empty() {
        return Err(UsageError(format!("--n {max_n} is below the smallest sweep size")));
    }
    let reps = reps.max(1);
    let mut points = Vec::new();
    for &n in &sizes {
        let (mut calls, mut solves, mut pivots, mut work) = (0u64, 0u64, 0u64, 0u64);
        let start = Instant::now();
        for seed in cli.seed..cli.seed + reps {
            let stats = if sfm {
                let psi = generate_sfm_instance(sfm_family(family), n, seed).map_err(|e| UsageError(e.to_string()))?;
                match minimize_with(&SfmInstance::new(Arc::new(psi)), &SolveOptions::default()) {
                    Ok(r) => r.stats,
                    Err(e) => return Ok(Outcome::invalid(e)),
                }
            } else {
                let inst = generate_instance(lp_family(family)?, n, seed).map_err(|e| UsageError(e.to_string()))?;
                match solve_max_side_with(&inst, &SolveOptions::default()) {
                    Ok(s) => s.stats,
                    Err(e) => return Ok(Outcome::invalid(e)),
                }
            };
            calls += stats.oracle_calls;
            solves += stats.lp_solves;
            pivots += stats.lp_pivots;
            work += stats.total_work();
        }
        let ms = start.elapsed().as_secs_f64() * 1000.0 / reps as f64;
        let avg = work as f64 / reps as f64;
        points.push((n as f64, avg));
        let record = json!({
            "record": "bench",
            "n": n,
            "oracle_calls": calls / reps,
            "lp_solves": solves / reps,
            "lp_pivots": pivots / reps,
            "total_work": avg,
            "time_ms": ms,
        });
        println!("{record}");
    }
    let slope = fit_slope(&points);
    Ok(Outcome::ok(json!({
        "target": if sfm { "sfm" } else { "solve" },
        "family": format!("{family:?}").to_lowercase(),
        "reps": reps,
        "sizes": sizes,
        "slope": slope,
    })))
}
