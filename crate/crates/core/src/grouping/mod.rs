//! Maximizing `c·x` over a polymatroid with lower bounds `x ≥ d`.
//!
//! Elements enter one at a time by decreasing cost. Each lands in a group
//! of the chain `G^(1) ⊂ … ⊂ G^(m)`; every group has one lead that absorbs
//! the slack, and its other members sit at their side bounds, clustered
//! into ordered subgroups. Whenever a subgroup stops fitting inside the
//! contracted polymatroid it is merged, or the offending elements move to
//! the previous group. The final chain is also a dual certificate.

mod engine;

use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::polymatroid::{membership, MembershipReport, Permutation};
use crate::rational::{fmt_rational, zero, Rational};
use crate::setfn::{FnOracle, PolymatroidInstance, SetFunction, SetFunctionOracle, Subset};
use engine::{Checks, Engine, Halt};

/// Exhaustive primal checks stop here.
pub const EXHAUSTIVE_CHECK_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Subgroup {
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Group {
    pub lead: usize,
    pub subgroups: Vec<Subgroup>,
}

impl Group {
    pub fn non_leads(&self) -> impl Iterator<Item = usize> + '_ {
        self.subgroups.iter().flat_map(|s| s.members.iter().copied())
    }

    pub fn members(&self) -> Subset {
        self.non_leads().chain([self.lead]).collect()
    }

    pub fn len(&self) -> usize {
        1 + self.subgroups.iter().map(|s| s.members.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroupStructure {
    pub groups: Vec<Group>,
    /// `prefixes[i]` is `G^(i+1)`, the union of the first `i+1` groups.
    pub prefixes: Vec<Subset>,
}

impl GroupStructure {
    pub fn new(groups: Vec<Group>) -> Self {
        let mut acc = Subset::EMPTY;
        let prefixes = groups
            .iter()
            .map(|g| {
                acc = acc.union(g.members());
                acc
            })
            .collect();
        GroupStructure { groups, prefixes }
    }

    /// `G^(i)` with `G^(0) = ∅`.
    pub fn prefix(&self, i: usize) -> Subset {
        if i == 0 {
            Subset::EMPTY
        } else {
            self.prefixes[i - 1]
        }
    }

    pub fn group_of(&self, e: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.members().contains(e))
    }

    pub fn leads(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().map(|g| g.lead)
    }

    pub fn is_lead(&self, e: usize) -> bool {
        self.leads().any(|l| l == e)
    }

    /// Whether the groups partition `0..n`.
    pub fn partitions(&self, n: usize) -> bool {
        let mut seen = Subset::EMPTY;
        for g in &self.groups {
            let m = g.members();
            if !m.is_disjoint(seen) || m.len() != g.len() {
                return false;
            }
            seen = seen.union(m);
        }
        seen == Subset::full(n)
    }
}

impl fmt::Display for GroupStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.groups.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            write!(f, "G{}: lead {}", i + 1, g.lead)?;
            for s in &g.subgroups {
                write!(f, " [")?;
                for (t, k) in s.members.iter().enumerate() {
                    if t > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}")?;
                }
                write!(f, "]")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalSolution {
    pub x: Vec<Rational>,
    pub objective: Rational,
}

/// Duals on the chain sets and on the side constraints of non-leads.
#[derive(Clone, Debug, PartialEq)]
pub struct DualCertificate {
    pub y: Vec<(Subset, Rational)>,
    pub z: Vec<(usize, Rational)>,
}

impl DualCertificate {
    pub fn z_of(&self, i: usize) -> Rational {
        self.z
            .iter()
            .find(|(k, _)| *k == i)
            .map_or_else(zero, |(_, v)| v.clone())
    }

    /// `Σ y_A f(A) - Σ d_i z_i`.
    pub fn objective<F: SetFunction + ?Sized>(&self, f: &F, d: &[Rational]) -> Rational {
        let mut v = zero();
        for (a, y) in &self.y {
            v += y * f.eval(*a);
        }
        for (k, z) in &self.z {
            v -= z * &d[*k];
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Step3Record {
    pub base: Subset,
    pub members: Vec<usize>,
    pub reduced_feasible: bool,
    pub accepted: bool,
}

/// One relocation of an element. A `from_subgroup` of `None` marks a lead.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MoveRecord {
    pub element: usize,
    pub from_group: usize,
    pub from_subgroup: Option<usize>,
    pub to_group: usize,
    pub to_subgroup: usize,
}

impl MoveRecord {
    /// Lexicographic decrease of (group, subgroup).
    pub fn is_descending(&self) -> bool {
        match self.from_subgroup {
            _ if self.to_group < self.from_group => true,
            Some(s) => self.to_group == self.from_group && self.to_subgroup < s,
            None => false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Stats {
    /// Distinct subsets on which the input function was evaluated.
    pub oracle_calls: u64,
    pub lp_solves: u64,
    pub lp_pivots: u64,
    pub moves: u64,
    pub validations: u64,
    pub exact_membership_runs: u64,
    pub repairs: u64,
    /// Groups and subgroups opened on the input function.
    pub positions_opened: u64,
    #[serde(skip)]
    pub step3_log: Vec<Step3Record>,
    #[serde(skip)]
    pub move_log: Vec<MoveRecord>,
}

impl Stats {
    pub fn total_work(&self) -> u64 {
        self.oracle_calls + self.lp_pivots
    }

    pub fn absorb(&mut self, other: &Stats) {
        self.oracle_calls += other.oracle_calls;
        self.lp_solves += other.lp_solves;
        self.lp_pivots += other.lp_pivots;
        self.moves += other.moves;
        self.validations += other.validations;
        self.exact_membership_runs += other.exact_membership_runs;
        self.repairs += other.repairs;
        self.positions_opened += other.positions_opened;
    }
}

/// One line of the solve trace. Group and subgroup numbers are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    Insert {
        element: usize,
    },
    Step1 {
        element: usize,
        group: usize,
        gain_before: String,
        gain_after: Option<String>,
        bound: String,
        moves: bool,
        positive: bool,
    },
    NewGroup {
        element: usize,
        group: usize,
    },
    Step2 {
        element: usize,
        group: usize,
        subgroup: usize,
        new_subgroup: bool,
    },
    Step3 {
        group: usize,
        subgroup: usize,
        members: Vec<usize>,
        accepted: bool,
    },
    Step4 {
        action: &'static str,
        group: usize,
        subgroup: Option<usize>,
        moved: Vec<usize>,
    },
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub trace: bool,
    /// Keep the per-validation and per-move logs in [`Stats`].
    pub audit: bool,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub primal: PrimalSolution,
    pub certificate: DualCertificate,
    pub groups: GroupStructure,
    pub stats: Stats,
    pub trace: Vec<TraceEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolymatroidViolation {
    NotNormalized { value: Rational },
    Decreasing { set: Subset, element: usize },
    NotSubmodular { smaller: Subset, larger: Subset, element: usize },
}

impl fmt::Display for PolymatroidViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolymatroidViolation::NotNormalized { value } => {
                write!(f, "value on the empty set is {}", fmt_rational(value))
            }
            PolymatroidViolation::Decreasing { set, element } => {
                write!(f, "adding {element} to {set} decreases the value")
            }
            PolymatroidViolation::NotSubmodular {
                smaller,
                larger,
                element,
            } => write!(
                f,
                "marginal of {element} grows from {smaller} to {larger}"
            ),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GroupingError {
    #[error("side constraints cannot be met: on {witness} the bounds sum to {} against rank {}", fmt_rational(.load), fmt_rational(.capacity))]
    InfeasibleSideConstraints {
        witness: Subset,
        load: Rational,
        capacity: Rational,
    },
    #[error("not a polymatroid: {0}")]
    NotAPolymatroid(PolymatroidViolation),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("internal consistency failure: {0}")]
    Inconsistent(String),
}

/// Above this size the solve runs on a helper thread with a large stack,
/// since nested validations recurse once per level.
const DEEP_STACK_FROM: usize = 16;
const DEEP_STACK_BYTES: usize = 512 << 20;

fn dsum(d: &[Rational], set: Subset) -> Rational {
    set.iter().fold(zero(), |acc, i| acc + &d[i])
}

pub(crate) fn solve_general<F: SetFunction + ?Sized>(
    f: &F,
    n: usize,
    c: &[Rational],
    d: &[Rational],
    checks: Checks,
    opts: &SolveOptions,
) -> Result<Solution, GroupingError> {
    if c.len() != n || d.len() != n {
        return Err(GroupingError::DimensionMismatch(format!(
            "{n} elements but {} costs and {} side bounds",
            c.len(),
            d.len()
        )));
    }
    if n == 0 || n > crate::setfn::MAX_ELEMENTS {
        return Err(GroupingError::InvalidInput(format!("unsupported ground set size {n}")));
    }
    if c.iter().any(|v| v.is_negative()) {
        return Err(GroupingError::InvalidInput("costs must be nonnegative".into()));
    }
    let f: &dyn SetFunction = &FnOracle(|a: Subset| f.eval(a));
    if n < DEEP_STACK_FROM {
        return solve_inner(f, n, c, d, checks, opts);
    }
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(DEEP_STACK_BYTES)
            .spawn_scoped(scope, || solve_inner(f, n, c, d, checks, opts))
            .expect("spawn solver thread")
            .join()
            .unwrap_or_else(|p| std::panic::resume_unwind(p))
    })
}

fn solve_inner(
    f: &dyn SetFunction,
    n: usize,
    c: &[Rational],
    d: &[Rational],
    checks: Checks,
    opts: &SolveOptions,
) -> Result<Solution, GroupingError> {
    let mut engine = Engine::new(f, n, checks, opts.trace, opts.audit);
    let empty = engine.eval_top(Subset::EMPTY);
    if !empty.is_zero() {
        return Err(GroupingError::NotAPolymatroid(PolymatroidViolation::NotNormalized {
            value: empty,
        }));
    }
    let order = Permutation::by_descending_cost(c);
    let mut inst = engine.top_instance(Subset::full(n), d.to_vec());
    match engine.run(&mut inst, order.order()) {
        Ok(()) => {}
        Err(Halt::Error(e)) => return Err(e),
        Err(Halt::Infeasible(w)) => return Err(infeasibility(&mut engine, n, d, w)),
    }

    let groups: Vec<Group> = inst
        .groups
        .iter()
        .map(|g| Group {
            lead: g.lead,
            subgroups: g
                .subs
                .iter()
                .map(|s| Subgroup { members: s.clone() })
                .collect(),
        })
        .collect();
    let gs = GroupStructure::new(groups);
    let mut x = d.to_vec();
    let mut prev = zero();
    for (i, g) in gs.groups.iter().enumerate() {
        let cur = engine.eval_top(gs.prefixes[i]);
        let non_leads: Subset = g.non_leads().collect();
        x[g.lead] = &cur - &prev - dsum(d, non_leads);
        prev = cur;
    }
    let objective = x.iter().zip(c).map(|(a, b)| a * b).sum();
    let certificate = certificate_for(&gs, c);
    Ok(Solution {
        primal: PrimalSolution { x, objective },
        certificate,
        groups: gs,
        stats: engine.stats,
        trace: engine.trace.unwrap_or_default(),
    })
}

fn infeasibility(engine: &mut Engine<'_>, n: usize, d: &[Rational], w: Subset) -> GroupingError {
    let load = dsum(d, w);
    let capacity = engine.eval_top(w);
    if load > capacity {
        return GroupingError::InfeasibleSideConstraints {
            witness: w,
            load,
            capacity,
        };
    }
    if n <= crate::setfn::MAX_EXHAUSTIVE {
        if let Ok(MembershipReport::Violated { set, load, capacity }) = membership(engine.top_fn(), n, d) {
            return GroupingError::InfeasibleSideConstraints {
                witness: set,
                load,
                capacity,
            };
        }
    }
    GroupingError::Inconsistent(format!("reported infeasibility on {w} is not a violation"))
}

fn certificate_for(gs: &GroupStructure, c: &[Rational]) -> DualCertificate {
    let m = gs.groups.len();
    let mut y = Vec::with_capacity(m);
    let mut z = Vec::new();
    for (j, g) in gs.groups.iter().enumerate() {
        let next = if j + 1 < m {
            c[gs.groups[j + 1].lead].clone()
        } else {
            zero()
        };
        y.push((gs.prefixes[j], &c[g.lead] - next));
        for k in g.non_leads() {
            z.push((k, &c[g.lead] - &c[k]));
        }
    }
    z.sort_by_key(|(k, _)| *k);
    DualCertificate { y, z }
}

/// Maximizes `c·x` over `{x : x(A) ≤ f(A) ∀A, x ≥ d}`.
pub fn solve_max_side(inst: &PolymatroidInstance) -> Result<Solution, GroupingError> {
    solve_max_side_with(inst, &SolveOptions::default())
}

pub fn solve_max_side_with(
    inst: &PolymatroidInstance,
    opts: &SolveOptions,
) -> Result<Solution, GroupingError> {
    let checks = Checks {
        monotone: true,
        submodular: true,
    };
    solve_general(inst.f.as_ref(), inst.n(), &inst.c, &inst.d, checks, opts)
}

/// Side bounds of the minimization form with `None` for `+∞` replaced by
/// the largest value any point of B(b) can take, `b(E) - b(E ∖ i)`.
pub fn effective_upper_bounds<F: SetFunction + ?Sized>(
    b: &F,
    n: usize,
    d: &[Option<Rational>],
) -> Vec<Rational> {
    let full = Subset::full(n);
    let total = b.eval(full);
    d.iter()
        .enumerate()
        .map(|(i, v)| match v {
            Some(v) => v.clone(),
            None => &total - b.eval(full.without(i)),
        })
        .collect()
}

/// Minimizes `c·x` over `{x : x(A) ≥ b(A) ∀A, x(E) = b(E), x ≤ d}` for a
/// supermodular `b`, by running the maximization on `-b` with bounds `-d`.
pub fn solve_min_side(
    b: &SetFunctionOracle,
    c: &[Rational],
    d: &[Option<Rational>],
) -> Result<Solution, GroupingError> {
    solve_min_side_with(b, c, d, &SolveOptions::default())
}

pub fn solve_min_side_with(
    b: &SetFunctionOracle,
    c: &[Rational],
    d: &[Option<Rational>],
    opts: &SolveOptions,
) -> Result<Solution, GroupingError> {
    let n = b.n();
    if d.len() != n {
        return Err(GroupingError::DimensionMismatch(format!(
            "{n} elements but {} side bounds",
            d.len()
        )));
    }
    let upper = effective_upper_bounds(b, n, d);
    let neg_d: Vec<Rational> = upper.iter().map(|v| -v).collect();
    let neg = FnOracle(|a: Subset| -b.eval(a));
    let checks = Checks {
        monotone: false,
        submodular: true,
    };
    match solve_general(&neg, n, c, &neg_d, checks, opts) {
        Ok(mut sol) => {
            for v in sol.primal.x.iter_mut() {
                *v = -v.clone();
            }
            sol.primal.objective = -sol.primal.objective;
            Ok(sol)
        }
        Err(GroupingError::InfeasibleSideConstraints { witness, .. }) => {
            Err(GroupingError::InfeasibleSideConstraints {
                witness,
                load: dsum(&upper, witness),
                capacity: b.eval(witness),
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    pub side_constraints: bool,
    pub chain_tight: bool,
    /// Every rank constraint, checked when `n` is small enough.
    pub rank_constraints: Option<bool>,
    pub partition: bool,
    pub dual_support: bool,
    pub dual_nonnegative: bool,
    pub dual_equality: bool,
    pub objective_equality: bool,
    pub primal_objective: Rational,
    pub dual_objective: Rational,
    pub failures: Vec<String>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Max,
    Min,
}

/// Verifies a maximization solution: primal feasibility, the dual
/// conditions, and equal objectives.
pub fn check_certificate(inst: &PolymatroidInstance, sol: &Solution) -> CertificateReport {
    check(inst.f.as_ref(), inst.n(), &inst.c, &inst.d, sol, Side::Max)
}

/// The mirrored check for [`solve_min_side`]: `x(A) ≥ b(A)`, `x ≤ d`, and
/// the dual value `Σ y_A b(A) - Σ d_i z_i`.
pub fn check_min_side_certificate(
    b: &SetFunctionOracle,
    c: &[Rational],
    d: &[Option<Rational>],
    sol: &Solution,
) -> CertificateReport {
    let upper = effective_upper_bounds(b, b.n(), d);
    check(b, b.n(), c, &upper, sol, Side::Min)
}

fn check<F: SetFunction + ?Sized>(
    f: &F,
    n: usize,
    c: &[Rational],
    d: &[Rational],
    sol: &Solution,
    side: Side,
) -> CertificateReport {
    let x = &sol.primal.x;
    let gs = &sol.groups;
    let cert = &sol.certificate;
    let mut failures = Vec::new();
    if x.len() != n || c.len() != n || d.len() != n {
        failures.push("dimension mismatch".to_string());
        return CertificateReport {
            side_constraints: false,
            chain_tight: false,
            rank_constraints: None,
            partition: false,
            dual_support: false,
            dual_nonnegative: false,
            dual_equality: false,
            objective_equality: false,
            primal_objective: zero(),
            dual_objective: zero(),
            failures,
        };
    }
    let within = |load: &Rational, cap: &Rational| match side {
        Side::Max => load <= cap,
        Side::Min => load >= cap,
    };

    let side_constraints = (0..n).all(|i| match side {
        Side::Max => x[i] >= d[i],
        Side::Min => x[i] <= d[i],
    });
    if !side_constraints {
        failures.push("side constraint violated".into());
    }
    let partition = gs.partitions(n) && gs.prefixes == GroupStructure::new(gs.groups.clone()).prefixes;
    if !partition {
        failures.push("groups do not partition the ground set".into());
    }
    let chain_tight = gs.prefixes.iter().all(|&a| dsum(x, a) == f.eval(a));
    if !chain_tight {
        failures.push("a chain set is not tight".into());
    }
    let rank_constraints = (n <= EXHAUSTIVE_CHECK_LIMIT).then(|| {
        let mut load = vec![zero(); 1 << n];
        (1..1usize << n).all(|mask| {
            let low = mask.trailing_zeros() as usize;
            load[mask] = &load[mask & (mask - 1)] + &x[low];
            within(&load[mask], &f.eval(Subset(mask as u128)))
        })
    });
    if rank_constraints == Some(false) {
        failures.push("a rank constraint is violated".into());
    }

    let dual_support = cert.y.iter().all(|(a, _)| gs.prefixes.contains(a))
        && cert.z.iter().all(|(k, _)| *k < n && !gs.is_lead(*k));
    if !dual_support {
        failures.push("dual support lies outside the chain and non-leads".into());
    }
    let dual_nonnegative = cert
        .y
        .iter()
        .map(|(_, v)| v)
        .chain(cert.z.iter().map(|(_, v)| v))
        .all(|v| !v.is_negative());
    if !dual_nonnegative {
        failures.push("a dual value is negative".into());
    }
    let dual_equality = (0..n).all(|h| {
        let covered: Rational = cert
            .y
            .iter()
            .filter(|(a, _)| a.contains(h))
            .fold(zero(), |acc, (_, v)| acc + v);
        covered - cert.z_of(h) == c[h]
    });
    if !dual_equality {
        failures.push("dual constraint not tight at some element".into());
    }
    let primal_objective: Rational = x.iter().zip(c).map(|(a, b)| a * b).sum();
    let dual_objective = cert.objective(f, d);
    let objective_equality = primal_objective == dual_objective && sol.primal.objective == primal_objective;
    if !objective_equality {
        failures.push(format!(
            "objectives differ: primal {} dual {}",
            fmt_rational(&primal_objective),
            fmt_rational(&dual_objective)
        ));
    }
    CertificateReport {
        side_constraints,
        chain_tight,
        rank_constraints,
        partition,
        dual_support,
        dual_nonnegative,
        dual_equality,
        objective_equality,
        primal_objective,
        dual_objective,
        failures,
    }
}

#[cfg(test)]
mod tests;
