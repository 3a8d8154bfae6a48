//! Naive reference solvers used to certify the main algorithms. They
//! materialize every constraint or enumerate every subset.

use std::collections::VecDeque;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::lpcore::{self, FarkasCertificate, LinearProgram, LpError, LpOutcome, Relation, Sense};
use crate::rational::{one, zero, Rational};
use crate::setfn::{CutGraph, PolymatroidInstance, SetFunction, SetFunctionOracle, Subset};

/// Caps checked before anything is allocated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_subsets: u64,
    pub max_lp_rows: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_subsets: 1 << 20,
            max_lp_rows: 5000,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("budget exceeded: {what} needs {needed}, limit {limit}")]
    BudgetExceeded {
        what: &'static str,
        needed: u64,
        limit: u64,
    },
    #[error("constraint system is infeasible")]
    Infeasible { farkas: FarkasCertificate },
    #[error("objective is unbounded")]
    Unbounded,
    #[error("malformed graph: {0}")]
    MalformedGraph(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

fn check_rows(n: usize, extra: usize, budget: &OracleBudget) -> Result<(), OracleError> {
    if n >= 63 {
        return Err(OracleError::BudgetExceeded {
            what: "constraint rows",
            needed: u64::MAX,
            limit: budget.max_lp_rows as u64,
        });
    }
    let rows = (1u64 << n) - 1 + extra as u64;
    if rows > budget.max_lp_rows as u64 {
        return Err(OracleError::BudgetExceeded {
            what: "constraint rows",
            needed: rows,
            limit: budget.max_lp_rows as u64,
        });
    }
    Ok(())
}

fn indicator(n: usize, set: Subset) -> Vec<Rational> {
    (0..n).map(|i| if set.contains(i) { one() } else { zero() }).collect()
}

fn finish(lp: &LinearProgram) -> Result<(Vec<Rational>, Rational), OracleError> {
    match lpcore::solve(lp)? {
        LpOutcome::Optimal { point, value, .. } => Ok((point, value)),
        LpOutcome::Infeasible { farkas, .. } => Err(OracleError::Infeasible { farkas }),
        LpOutcome::Unbounded { .. } => Err(OracleError::Unbounded),
    }
}

/// `max c·x` subject to every rank constraint and `x ≥ d`.
pub fn brute_lp(inst: &PolymatroidInstance) -> Result<(Vec<Rational>, Rational), OracleError> {
    brute_lp_with_budget(inst, &OracleBudget::default())
}

pub fn brute_lp_with_budget(
    inst: &PolymatroidInstance,
    budget: &OracleBudget,
) -> Result<(Vec<Rational>, Rational), OracleError> {
    let n = inst.n();
    check_rows(n, n, budget)?;
    let mut lp = LinearProgram::new(Sense::Maximize, inst.c.clone());
    for mask in 1..(1u64 << n) {
        let set = Subset(mask as u128);
        lp.constrain(indicator(n, set), Relation::Le, inst.f.eval(set));
    }
    for i in 0..n {
        lp.constrain(indicator(n, Subset::singleton(i)), Relation::Ge, inst.d[i].clone());
    }
    finish(&lp)
}

/// `min c·x` subject to `x(A) ≥ b(A)`, `x(E) = b(E)`, and `x_i ≤ d_i`
/// for every finite `d_i`.
pub fn brute_lp_min_side<F: SetFunction + ?Sized>(
    b: &F,
    n: usize,
    c: &[Rational],
    d: &[Option<Rational>],
    budget: &OracleBudget,
) -> Result<(Vec<Rational>, Rational), OracleError> {
    check_rows(n, n, budget)?;
    let mut lp = LinearProgram::new(Sense::Minimize, c.to_vec());
    // implied by the singleton rows; keeps the variables bounded below
    lp.lower = (0..n).map(|i| b.eval(Subset::singleton(i))).collect();
    let full = Subset::full(n);
    for mask in 1..(1u64 << n) {
        let set = Subset(mask as u128);
        let rel = if set == full { Relation::Eq } else { Relation::Ge };
        lp.constrain(indicator(n, set), rel, b.eval(set));
    }
    for (i, v) in d.iter().enumerate() {
        if let Some(v) = v {
            lp.constrain(indicator(n, Subset::singleton(i)), Relation::Le, v.clone());
        }
    }
    finish(&lp)
}

/// Exact minimum of `psi` over all subsets; ties go to smaller
/// cardinality, then smaller mask.
pub fn brute_sfm(psi: &SetFunctionOracle) -> Result<(Subset, Rational), OracleError> {
    brute_sfm_with_budget(psi, psi.n(), &OracleBudget::default())
}

pub fn brute_sfm_with_budget<F: SetFunction + ?Sized>(
    psi: &F,
    n: usize,
    budget: &OracleBudget,
) -> Result<(Subset, Rational), OracleError> {
    let needed = if n >= 63 { u64::MAX } else { 1u64 << n };
    if needed > budget.max_subsets {
        return Err(OracleError::BudgetExceeded {
            what: "subsets",
            needed,
            limit: budget.max_subsets,
        });
    }
    let mut best = (psi.eval(Subset::EMPTY), 0usize, Subset::EMPTY);
    for mask in 1..needed {
        let set = Subset(mask as u128);
        let v = psi.eval(set);
        let key = (v, set.len(), set);
        if key < best {
            best = key;
        }
    }
    Ok((best.2, best.0))
}

/// Maximum `s`-`t` flow by shortest augmenting paths.
pub fn max_flow_min_cut(
    nodes: usize,
    edges: &[(usize, usize, Rational)],
    source: usize,
    sink: usize,
) -> Result<Rational, OracleError> {
    if source >= nodes || sink >= nodes {
        return Err(OracleError::MalformedGraph("terminal out of range".into()));
    }
    if source == sink {
        return Err(OracleError::MalformedGraph("source equals sink".into()));
    }
    let mut residual = vec![vec![zero(); nodes]; nodes];
    for (u, v, cap) in edges {
        if *u >= nodes || *v >= nodes {
            return Err(OracleError::MalformedGraph(format!("edge ({u},{v}) out of range")));
        }
        if cap.is_negative() {
            return Err(OracleError::MalformedGraph(format!("edge ({u},{v}) has negative capacity")));
        }
        if u != v {
            residual[*u][*v] += cap;
        }
    }
    let mut flow = zero();
    loop {
        let mut parent = vec![usize::MAX; nodes];
        parent[source] = source;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for v in 0..nodes {
                if parent[v] == usize::MAX && residual[u][v].is_positive() {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            return Ok(flow);
        }
        let mut push: Option<Rational> = None;
        let mut v = sink;
        while v != source {
            let u = parent[v];
            let r = &residual[u][v];
            if push.as_ref().is_none_or(|p| r < p) {
                push = Some(r.clone());
            }
            v = u;
        }
        let push = push.expect("path has at least one edge");
        let mut v = sink;
        while v != source {
            let u = parent[v];
            residual[u][v] -= &push;
            residual[v][u] += &push;
            v = u;
        }
        debug_assert!(!push.is_zero());
        flow += push;
    }
}

pub fn cut_graph_max_flow(graph: &CutGraph) -> Result<Rational, OracleError> {
    max_flow_min_cut(graph.nodes(), graph.edges(), graph.source(), graph.sink())
}
