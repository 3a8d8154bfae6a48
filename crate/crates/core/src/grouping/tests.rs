use std::sync::Arc;

use super::*;
use crate::rational::{int, rat};

fn table() -> Arc<SetFunctionOracle> {
    Arc::new(SetFunctionOracle::explicit(2, vec![int(0), int(1), int(1), rat(3, 2)]).unwrap())
}

fn instance(d: Vec<Rational>) -> PolymatroidInstance {
    PolymatroidInstance::new(table(), vec![int(2), int(1)], d).unwrap()
}

fn members(g: &Group) -> Vec<usize> {
    g.members().iter().collect()
}

#[test]
fn modular_rank_all_leads() {
    let f = Arc::new(SetFunctionOracle::partition_matroid(3, vec![(Subset::full(3), 3)]).unwrap());
    let inst = PolymatroidInstance::new(f, vec![int(3), int(2), int(1)], vec![int(0); 3]).unwrap();
    let sol = solve_max_side(&inst).unwrap();
    assert_eq!(sol.primal.x, vec![int(1); 3]);
    assert_eq!(sol.primal.objective, int(6));
    assert_eq!(sol.groups.groups.len(), 3);
    assert!(sol.groups.groups.iter().all(|g| g.subgroups.is_empty()));
}

#[test]
fn two_singleton_groups() {
    let inst = instance(vec![rat(2, 5), rat(2, 5)]);
    let sol = solve_max_side(&inst).unwrap();
    assert_eq!(sol.primal.x, vec![int(1), rat(1, 2)]);
    assert_eq!(sol.primal.objective, rat(5, 2));
    let gs: Vec<Vec<usize>> = sol.groups.groups.iter().map(members).collect();
    assert_eq!(gs, vec![vec![0], vec![1]]);
    let report = check_certificate(&inst, &sol);
    assert!(report.passed(), "{:?}", report.failures);
    assert_eq!(report.dual_objective, rat(5, 2));
    assert_eq!(sol.certificate.y, vec![(Subset::singleton(0), int(1)), (Subset::full(2), int(1))]);
}

#[test]
fn side_bound_pulls_element_into_first_group() {
    let inst = instance(vec![rat(2, 5), rat(7, 10)]);
    let sol = solve_max_side(&inst).unwrap();
    assert_eq!(sol.primal.x, vec![rat(4, 5), rat(7, 10)]);
    assert_eq!(sol.primal.objective, rat(23, 10));
    assert_eq!(sol.groups.groups.len(), 1);
    assert_eq!(sol.groups.groups[0].lead, 0);
    assert_eq!(sol.groups.groups[0].subgroups, vec![Subgroup { members: vec![1] }]);
    assert!(check_certificate(&inst, &sol).passed());
}

#[test]
fn perturbed_primal_fails_objective_equality() {
    let inst = instance(vec![rat(2, 5), rat(2, 5)]);
    let mut sol = solve_max_side(&inst).unwrap();
    sol.primal.x = vec![int(1), rat(3, 5)];
    sol.primal.objective = rat(13, 5);
    let report = check_certificate(&inst, &sol);
    assert!(!report.objective_equality);
    assert!(!report.passed());
}

#[test]
fn negative_dual_is_rejected() {
    let inst = instance(vec![rat(2, 5), rat(7, 10)]);
    let mut sol = solve_max_side(&inst).unwrap();
    sol.certificate.z[0].1 = int(-1);
    let report = check_certificate(&inst, &sol);
    assert!(!report.dual_nonnegative);
}

#[test]
fn infeasible_bounds_name_the_violated_set() {
    let inst = instance(vec![int(1), rat(3, 5)]);
    match solve_max_side(&inst) {
        Err(GroupingError::InfeasibleSideConstraints { witness, load, capacity }) => {
            assert_eq!(witness, Subset::full(2));
            assert_eq!((load, capacity), (rat(8, 5), rat(3, 2)));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn rejects_non_submodular_table() {
    // f({0,1}) = 3 > f({0}) + f({1})
    let f = Arc::new(SetFunctionOracle::explicit(2, vec![int(0), int(1), int(1), int(3)]).unwrap());
    let inst = PolymatroidInstance::new(f, vec![int(2), int(1)], vec![int(0); 2]).unwrap();
    assert!(matches!(solve_max_side(&inst), Err(GroupingError::NotAPolymatroid(_))));
}

fn b_table() -> SetFunctionOracle {
    SetFunctionOracle::explicit(2, vec![int(0), rat(1, 2), rat(1, 2), rat(3, 2)]).unwrap()
}

#[test]
fn min_side_unbounded_sides() {
    let b = b_table();
    let c = [int(2), int(1)];
    let d = [None, None];
    let sol = solve_min_side(&b, &c, &d).unwrap();
    assert_eq!(sol.primal.x, vec![rat(1, 2), int(1)]);
    assert_eq!(sol.primal.objective, int(2));
    assert!(check_min_side_certificate(&b, &c, &d, &sol).passed());
}

#[test]
fn min_side_with_upper_bounds() {
    let b = b_table();
    let c = [int(2), int(1)];
    let d = [Some(int(2)), Some(rat(4, 5))];
    let sol = solve_min_side(&b, &c, &d).unwrap();
    assert_eq!(sol.primal.x, vec![rat(7, 10), rat(4, 5)]);
    assert_eq!(sol.primal.objective, rat(11, 5));
    let report = check_min_side_certificate(&b, &c, &d, &sol);
    assert!(report.passed(), "{:?}", report.failures);
}

#[test]
fn min_side_single_point_base() {
    let b = SetFunctionOracle::partition_matroid(3, vec![(Subset::full(3), 3)]).unwrap();
    let c = [int(3), int(2), int(1)];
    let d = vec![Some(int(1)); 3];
    let sol = solve_min_side(&b, &c, &d).unwrap();
    assert_eq!(sol.primal.x, vec![int(1); 3]);
}

#[test]
fn trace_records_each_insertion() {
    let inst = instance(vec![rat(2, 5), rat(7, 10)]);
    let sol = solve_max_side_with(&inst, &SolveOptions { trace: true, audit: true }).unwrap();
    let inserts = sol
        .trace
        .iter()
        .filter(|e| matches!(e, TraceEvent::Insert { .. }))
        .count();
    assert_eq!(inserts, 2);
    assert!(sol.trace.iter().any(|e| matches!(
        e,
        TraceEvent::Step1 { element: 1, moves: true, positive: true, .. }
    )));
    assert!(!sol.stats.step3_log.is_empty());
}
