use num_traits::{One, Signed};
use proptest::prelude::*;

use polyside::grouping::{solve_max_side_with, SolveOptions};
use polyside::rational::Rational;
use polyside::schedule::{decompose, verify_conservation, PerformanceTable, TableKind};
use polyside::setfn::{generate_instance, Family, SetFunction, Subset};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::CutGraph), Just(Family::ConcaveCardinality), Just(Family::Coverage)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_reconstructs_the_solution(fam in family(), n in 1usize..=10, seed in 0u64..1000) {
        let inst = generate_instance(fam, n, seed).unwrap();
        let sol = solve_max_side_with(&inst, &SolveOptions::default()).unwrap();
        let dec = decompose(inst.f.as_ref(), &sol.primal.x, &sol.groups).unwrap();
        prop_assert!(dec.terms.len() <= n);
        prop_assert!(dec.terms.iter().all(|(w, _)| w.is_positive()));
        let total: Rational = dec.terms.iter().map(|(w, _)| w).sum();
        prop_assert!(total.is_one());
        prop_assert_eq!(dec.reconstruct(inst.f.as_ref()), sol.primal.x);
        prop_assert!(dec.respects_groups());
    }

    #[test]
    fn vertex_tables_are_conserved(fam in family(), n in 1usize..=5, seed in 0u64..1000) {
        let inst = generate_instance(fam, n, seed).unwrap();
        let f = inst.f.as_ref();
        let report = verify_conservation(&PerformanceTable::from_vertices(f, n), TableKind::FType).unwrap();
        prop_assert!(report.passed());
        let expected: Vec<Rational> = (0..1u128 << n).map(|m| f.eval(Subset(m))).collect();
        prop_assert_eq!(report.induced, Some(expected));
    }
}
