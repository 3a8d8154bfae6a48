//! Priority-rule interpretation of solutions: write an optimal point as a
//! lottery over priority orders, and check whether a table of per-order
//! performance vectors obeys conservation laws.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::grouping::GroupStructure;
use crate::polymatroid::{vertex, Permutation};
use crate::rational::{fmt_rational, one, zero, Rational};
use crate::setfn::{FnOracle, SetFunction, Subset, MAX_EXHAUSTIVE};

/// Largest `n` accepted by [`verify_conservation`].
pub const MAX_TABLE_N: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("point leaves the base polytope on {set}: load {} against rank {}", fmt_rational(.load), fmt_rational(.capacity))]
    NotInBase {
        set: Subset,
        load: Rational,
        capacity: Rational,
    },
    #[error("group of {size} elements exceeds the enumeration limit {limit}")]
    GroupTooLarge { size: usize, limit: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("incomplete table: {0}")]
    IncompleteTable(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyDecomposition {
    pub terms: Vec<(Rational, Permutation)>,
    pub groups: GroupStructure,
}

impl PolicyDecomposition {
    /// `Σ w_t x^{π_t}`.
    pub fn reconstruct<F: SetFunction + ?Sized>(&self, f: &F) -> Vec<Rational> {
        let n = self.terms.first().map_or(0, |(_, p)| p.len());
        let mut x = vec![zero(); n];
        for (w, pi) in &self.terms {
            for (xi, vi) in x.iter_mut().zip(vertex(f, pi).x) {
                *xi += w * vi;
            }
        }
        x
    }

    /// Every permutation lists the groups in chain order.
    pub fn respects_groups(&self) -> bool {
        self.terms.iter().all(|(_, pi)| {
            let mut pos = 0;
            self.groups.groups.iter().all(|g| {
                let size = g.len();
                let block: Subset = pi.order()[pos..pos + size].iter().copied().collect();
                pos += size;
                block == g.members()
            })
        })
    }
}

fn dsum(x: &[Rational], set: Subset) -> Rational {
    set.iter().fold(zero(), |acc, i| acc + &x[i])
}

/// Peels a point of `B(g)` on `elements` into at most `|elements|`
/// vertices. Returns weights summing to one with group-local orders.
fn peel<G: SetFunction + ?Sized>(
    g: &G,
    elements: &[usize],
    lead: usize,
    x: &[Rational],
) -> Result<Vec<(Rational, Vec<usize>)>, ScheduleError> {
    let k = elements.len();
    let local = |m: u128| -> Subset {
        Subset(m)
            .iter()
            .map(|t| elements[t])
            .collect()
    };
    let masks: Vec<Subset> = (0..1u128 << k).map(local).collect();
    let cap: Vec<Rational> = masks.iter().map(|&a| g.eval(a)).collect();
    let mut y: Vec<Rational> = x.to_vec();
    let full = masks[masks.len() - 1];
    for (t, &a) in masks.iter().enumerate() {
        let load = dsum(&y, a);
        if load > cap[t] || (a == full && load != cap[t]) {
            return Err(ScheduleError::NotInBase {
                set: a,
                load,
                capacity: cap[t].clone(),
            });
        }
    }
    let mut mass = one();
    let mut terms = Vec::new();
    loop {
        let tight: Vec<usize> = (0..masks.len())
            .filter(|&t| dsum(&y, masks[t]) == cap[t])
            .collect();
        // maximal chain of tight sets, each step the smallest superset
        let mut order = Vec::with_capacity(k);
        let mut current = Subset::EMPTY;
        while current != full {
            let next = tight
                .iter()
                .map(|&t| masks[t])
                .filter(|a| current.is_subset_of(*a) && *a != current)
                .min_by_key(|a| (a.len(), *a))
                .expect("the full group is tight");
            let mut level: Vec<usize> = next.difference(current).iter().collect();
            level.sort_by_key(|&e| (e != lead, e));
            order.extend(level);
            current = next;
        }
        let mut v = vec![zero(); y.len()];
        let mut prefix = Subset::EMPTY;
        let mut prev = zero();
        for &e in &order {
            prefix = prefix.with(e);
            let cur = g.eval(prefix);
            v[e] = &cur - &prev;
            prev = cur;
        }
        let mut lambda = one();
        for (t, &a) in masks.iter().enumerate() {
            let va = dsum(&v, a);
            if va < cap[t] {
                let ratio = (&cap[t] - dsum(&y, a)) / (&cap[t] - va);
                if ratio < lambda {
                    lambda = ratio;
                }
            }
        }
        terms.push((&mass * &lambda, order));
        if lambda.is_one() {
            return Ok(terms);
        }
        debug_assert!(lambda.is_positive());
        let rest = one() - &lambda;
        for &e in elements {
            y[e] = (&y[e] - &lambda * &v[e]) / &rest;
        }
        mass *= rest;
    }
}

/// Writes `x ∈ B(f)` as a lottery over priority orders that serve the
/// groups of `gs` in chain order.
pub fn decompose<F: SetFunction + ?Sized>(
    f: &F,
    x: &[Rational],
    gs: &GroupStructure,
) -> Result<PolicyDecomposition, ScheduleError> {
    let n = x.len();
    if !gs.partitions(n) {
        return Err(ScheduleError::DimensionMismatch(format!(
            "groups do not partition {n} elements"
        )));
    }
    let mut per_group = Vec::with_capacity(gs.groups.len());
    for (i, group) in gs.groups.iter().enumerate() {
        let members: Vec<usize> = group.members().iter().collect();
        if members.len() > MAX_EXHAUSTIVE {
            return Err(ScheduleError::GroupTooLarge {
                size: members.len(),
                limit: MAX_EXHAUSTIVE,
            });
        }
        let base = gs.prefix(i);
        let f_base = f.eval(base);
        let g = FnOracle(|a: Subset| f.eval(base.union(a)) - &f_base);
        per_group.push(peel(&g, &members, group.lead, x).map_err(|e| match e {
            ScheduleError::NotInBase { set, load, capacity } => ScheduleError::NotInBase {
                set: base.union(set),
                load: load + dsum(x, base),
                capacity: capacity + &f_base,
            },
            other => other,
        })?);
    }
    // common refinement of the cumulative weights
    let mut cursor = vec![0usize; per_group.len()];
    let mut used = vec![zero(); per_group.len()];
    let mut done = zero();
    let mut terms = Vec::new();
    while done < one() {
        let mut step: Option<Rational> = None;
        for (g, terms_g) in per_group.iter().enumerate() {
            let left = &terms_g[cursor[g]].0 - &used[g];
            if step.as_ref().is_none_or(|s| left < *s) {
                step = Some(left);
            }
        }
        let step = step.expect("at least one group");
        let mut order = Vec::with_capacity(n);
        for (g, terms_g) in per_group.iter().enumerate() {
            order.extend_from_slice(&terms_g[cursor[g]].1);
            used[g] += &step;
            if used[g] == terms_g[cursor[g]].0 && cursor[g] + 1 < terms_g.len() {
                cursor[g] += 1;
                used[g] = zero();
            }
        }
        done += &step;
        terms.push((step, Permutation::new(order).expect("groups partition the ground set")));
    }
    Ok(PolicyDecomposition {
        terms,
        groups: gs.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroupPolicy {
    pub members: Vec<usize>,
    pub lead: usize,
    /// Orders within the group with their probabilities.
    pub orders: Vec<(Vec<usize>, String)>,
    /// Non-lead elements with the expected value they are held at.
    pub pinned: Vec<(usize, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PolicyDescription {
    pub groups: Vec<GroupPolicy>,
    pub mixture: Vec<(Vec<usize>, String)>,
    pub note: &'static str,
}

impl fmt::Display for PolicyDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_order = |o: &[usize]| format!("({})", o.iter().join(","));
        write!(f, "serve groups in order")?;
        for g in &self.groups {
            write!(f, " {}", Subset::from_elements(g.members.iter().copied()))?;
        }
        writeln!(f)?;
        for g in &self.groups {
            let set = Subset::from_elements(g.members.iter().copied());
            if g.orders.len() == 1 {
                write!(f, "group {set}: priority {}", fmt_order(&g.orders[0].0))?;
            } else {
                let parts: Vec<String> = g
                    .orders
                    .iter()
                    .map(|(o, w)| format!("{} w.p. {w}", fmt_order(o)))
                    .collect();
                write!(f, "group {set}: randomize {}", parts.join(", "))?;
            }
            for (k, v) in &g.pinned {
                write!(f, "; element {k} held at d_{k} = {v} in expectation")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

const DYNAMIC_PRIORITY_NOTE: &str =
    "a dynamic priority rule with indices proportional to waiting time can realize the same point";

/// Summarizes a decomposition group by group. `x` supplies the values of
/// the pinned non-lead elements.
pub fn describe_policy(dec: &PolicyDecomposition, gs: &GroupStructure, x: &[Rational]) -> PolicyDescription {
    let mut pos = 0;
    let mut groups = Vec::with_capacity(gs.groups.len());
    for g in &gs.groups {
        let size = g.len();
        let mut orders: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
        let mut first_seen: Vec<Vec<usize>> = Vec::new();
        for (w, pi) in &dec.terms {
            let block = pi.order()[pos..pos + size].to_vec();
            if !orders.contains_key(&block) {
                first_seen.push(block.clone());
            }
            *orders.entry(block).or_insert_with(zero) += w;
        }
        pos += size;
        let mut pinned: Vec<(usize, String)> = g.non_leads().map(|k| (k, fmt_rational(&x[k]))).collect();
        pinned.sort();
        groups.push(GroupPolicy {
            members: g.members().iter().collect(),
            lead: g.lead,
            orders: first_seen
                .into_iter()
                .map(|o| {
                    let w = fmt_rational(&orders[&o]);
                    (o, w)
                })
                .collect(),
            pinned,
        });
    }
    PolicyDescription {
        groups,
        mixture: dec
            .terms
            .iter()
            .map(|(w, pi)| (pi.order().to_vec(), fmt_rational(w)))
            .collect(),
        note: DYNAMIC_PRIORITY_NOTE,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    /// Prefix sums give a submodular `f`.
    FType,
    /// Prefix sums give a supermodular `b`.
    BType,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerformanceTable {
    pub n: usize,
    pub rows: BTreeMap<Permutation, Vec<Rational>>,
}

impl PerformanceTable {
    /// The table whose row for `π` is `vertex(f, π)`.
    pub fn from_vertices<F: SetFunction + ?Sized>(f: &F, n: usize) -> Self {
        let rows = Permutation::all(n)
            .into_iter()
            .map(|pi| {
                let x = vertex(f, &pi).x;
                (pi, x)
            })
            .collect();
        PerformanceTable { n, rows }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConservationViolation {
    PrefixInconsistent {
        set: Subset,
        first: Permutation,
        second: Permutation,
        first_value: Rational,
        second_value: Rational,
    },
    TotalVaries {
        first: Permutation,
        second: Permutation,
        first_total: Rational,
        second_total: Rational,
    },
    NotNormalized,
    NotIncreasing { set: Subset, element: usize },
    WrongCurvature { a: Subset, b: Subset },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConservationReport {
    pub kind: TableKind,
    /// The induced set function by mask, when prefix sums are consistent.
    pub induced: Option<Vec<Rational>>,
    pub violation: Option<ConservationViolation>,
}

impl ConservationReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks that every prefix sum depends only on the prefix set, that the
/// total is the same for every order, and that the induced function has
/// the shape `kind` asks for.
pub fn verify_conservation(
    table: &PerformanceTable,
    kind: TableKind,
) -> Result<ConservationReport, ScheduleError> {
    let n = table.n;
    if n == 0 || n > MAX_TABLE_N {
        return Err(ScheduleError::IncompleteTable(format!("n = {n} outside 1..={MAX_TABLE_N}")));
    }
    let all = Permutation::all(n);
    if table.rows.len() != all.len() || all.iter().any(|p| !table.rows.contains_key(p)) {
        return Err(ScheduleError::IncompleteTable(format!(
            "{} of {} orders present",
            table.rows.len(),
            all.len()
        )));
    }
    if let Some((pi, _)) = table.rows.iter().find(|(_, x)| x.len() != n) {
        return Err(ScheduleError::IncompleteTable(format!("row {pi} has the wrong length")));
    }
    let report = |violation| {
        Ok(ConservationReport {
            kind,
            induced: None,
            violation: Some(violation),
        })
    };
    let mut values: Vec<Option<(Rational, &Permutation)>> = vec![None; 1 << n];
    values[0] = Some((zero(), &all[0]));
    for k in 1..n {
        for (pi, x) in &table.rows {
            let set = pi.prefix(k);
            let v = pi.order()[..k].iter().fold(zero(), |acc, &i| acc + &x[i]);
            match &values[set.mask() as usize] {
                None => values[set.mask() as usize] = Some((v, pi)),
                Some((w, first)) if *w != v => {
                    return report(ConservationViolation::PrefixInconsistent {
                        set,
                        first: (*first).clone(),
                        second: pi.clone(),
                        first_value: w.clone(),
                        second_value: v,
                    })
                }
                Some(_) => {}
            }
        }
    }
    let mut total: Option<(Rational, &Permutation)> = None;
    for (pi, x) in &table.rows {
        let t: Rational = x.iter().sum();
        match &total {
            None => total = Some((t, pi)),
            Some((w, first)) if *w != t => {
                return report(ConservationViolation::TotalVaries {
                    first: (*first).clone(),
                    second: pi.clone(),
                    first_total: w.clone(),
                    second_total: t,
                })
            }
            Some(_) => {}
        }
    }
    let full = Subset::full(n).mask() as usize;
    values[full] = total;
    let induced: Vec<Rational> = values
        .into_iter()
        .map(|v| v.expect("every subset is a prefix of some order").0)
        .collect();
    let violation = shape_violation(&induced, n, kind);
    Ok(ConservationReport {
        kind,
        induced: Some(induced),
        violation,
    })
}

fn shape_violation(h: &[Rational], n: usize, kind: TableKind) -> Option<ConservationViolation> {
    if !h[0].is_zero() {
        return Some(ConservationViolation::NotNormalized);
    }
    for mask in 0..h.len() {
        let a = Subset(mask as u128);
        for i in (0..n).filter(|&i| !a.contains(i)) {
            let ai = a.with(i).mask() as usize;
            if h[ai] < h[mask] {
                return Some(ConservationViolation::NotIncreasing { set: a, element: i });
            }
            for j in (i + 1..n).filter(|&j| !a.contains(j)) {
                let aj = a.with(j).mask() as usize;
                let aij = a.with(i).with(j).mask() as usize;
                let lhs = &h[ai] + &h[aj];
                let rhs = &h[aij] + &h[mask];
                let bad = match kind {
                    TableKind::FType => lhs < rhs,
                    TableKind::BType => lhs > rhs,
                };
                if bad {
                    return Some(ConservationViolation::WrongCurvature {
                        a: a.with(i),
                        b: a.with(j),
                    });
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::{Group, Subgroup};
    use crate::rational::{int, rat};
    use crate::setfn::SetFunctionOracle;

    fn table() -> SetFunctionOracle {
        SetFunctionOracle::explicit(2, vec![int(0), int(1), int(1), rat(3, 2)]).unwrap()
    }

    fn one_group() -> GroupStructure {
        GroupStructure::new(vec![Group {
            lead: 0,
            subgroups: vec![Subgroup { members: vec![1] }],
        }])
    }

    fn perm(o: &[usize]) -> Permutation {
        Permutation::new(o.to_vec()).unwrap()
    }

    #[test]
    fn vertex_is_a_single_term() {
        let f = table();
        let x = vertex(&f, &perm(&[1, 0])).x;
        let dec = decompose(&f, &x, &one_group()).unwrap();
        assert_eq!(dec.terms.len(), 1);
        assert_eq!(dec.terms[0].0, int(1));
        assert_eq!(dec.reconstruct(&f), x);
    }

    #[test]
    fn two_term_mixtures() {
        let f = table();
        let dec = decompose(&f, &[rat(4, 5), rat(7, 10)], &one_group()).unwrap();
        assert_eq!(
            dec.terms,
            vec![(rat(3, 5), perm(&[0, 1])), (rat(2, 5), perm(&[1, 0]))]
        );
        let dec = decompose(&f, &[rat(3, 4), rat(3, 4)], &one_group()).unwrap();
        assert_eq!(
            dec.terms,
            vec![(rat(1, 2), perm(&[0, 1])), (rat(1, 2), perm(&[1, 0]))]
        );
    }

    #[test]
    fn rejects_points_outside_the_base() {
        let f = table();
        assert!(matches!(
            decompose(&f, &[int(1), rat(3, 5)], &one_group()),
            Err(ScheduleError::NotInBase { .. })
        ));
    }

    #[test]
    fn description_lists_pinned_elements() {
        let f = table();
        let x = [rat(4, 5), rat(7, 10)];
        let gs = one_group();
        let dec = decompose(&f, &x, &gs).unwrap();
        let text = describe_policy(&dec, &gs, &x).to_string();
        assert!(text.contains("randomize (0,1) w.p. 3/5, (1,0) w.p. 2/5"), "{text}");
        assert!(text.contains("element 1 held at d_1 = 7/10"), "{text}");

        let singles = GroupStructure::new(vec![
            Group { lead: 0, subgroups: vec![] },
            Group { lead: 1, subgroups: vec![] },
        ]);
        let x = vertex(&f, &perm(&[0, 1])).x;
        let dec = decompose(&f, &x, &singles).unwrap();
        let desc = describe_policy(&dec, &singles, &x);
        assert_eq!(desc.mixture, vec![(vec![0, 1], "1".to_string())]);
    }

    fn two_row_table(second: Vec<Rational>) -> PerformanceTable {
        let mut rows = BTreeMap::new();
        rows.insert(perm(&[0, 1]), vec![int(1), rat(1, 2)]);
        rows.insert(perm(&[1, 0]), second);
        PerformanceTable { n: 2, rows }
    }

    #[test]
    fn consistent_table_induces_f() {
        let report = verify_conservation(&two_row_table(vec![rat(1, 2), int(1)]), TableKind::FType).unwrap();
        assert!(report.passed());
        assert_eq!(report.induced.unwrap(), vec![int(0), int(1), int(1), rat(3, 2)]);
    }

    #[test]
    fn total_variation_is_detected() {
        let report =
            verify_conservation(&two_row_table(vec![rat(1, 2), rat(9, 10)]), TableKind::FType).unwrap();
        assert!(matches!(report.violation, Some(ConservationViolation::TotalVaries { .. })));
    }

    #[test]
    fn prefix_inconsistency_is_detected() {
        let f = SetFunctionOracle::concave_cardinality(vec![int(0), int(2), int(3), rat(7, 2)], vec![int(0); 3])
            .unwrap();
        let mut t = PerformanceTable::from_vertices(&f, 3);
        assert!(verify_conservation(&t, TableKind::FType).unwrap().passed());
        let row = t.rows.get_mut(&perm(&[0, 1, 2])).unwrap();
        row[0] += rat(1, 10);
        match verify_conservation(&t, TableKind::FType).unwrap().violation {
            Some(ConservationViolation::PrefixInconsistent { set, .. }) => {
                assert_eq!(set, Subset::singleton(0))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn incomplete_table_is_an_error() {
        let mut t = two_row_table(vec![rat(1, 2), int(1)]);
        t.rows.remove(&perm(&[1, 0]));
        assert!(matches!(
            verify_conservation(&t, TableKind::FType),
            Err(ScheduleError::IncompleteTable(_))
        ));
    }
}
