use std::sync::Arc;

use proptest::prelude::*;

use polyside::oracle::{brute_sfm, cut_graph_max_flow};
use polyside::rational::Rational;
use polyside::setfn::{generate_sfm_instance, SetFunction, SfmFamily, Subset};
use polyside::sfm::{minimize, reduce, SfmInstance};

fn family() -> impl Strategy<Value = SfmFamily> {
    prop_oneof![
        Just(SfmFamily::Cut),
        Just(SfmFamily::Coverage),
        Just(SfmFamily::RandomTable),
        Just(SfmFamily::Concave)
    ]
}

fn dsum(d: &[Rational], set: Subset) -> Rational {
    set.iter().map(|i| &d[i]).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduction_identity(fam in family(), n in 1usize..=12, seed in 0u64..1000) {
        let psi = Arc::new(generate_sfm_instance(fam, n, seed).unwrap());
        let red = reduce(&SfmInstance::new(Arc::clone(&psi))).unwrap();
        let empty = psi.eval(Subset::EMPTY);
        for a in red.keep.subsets() {
            prop_assert_eq!(red.f.eval(a) - dsum(&red.d, a), psi.eval(a) - &empty);
        }
    }

    #[test]
    fn candidates_dominate_their_subproblem(fam in family(), n in 1usize..=10, seed in 0u64..1000) {
        let psi = Arc::new(generate_sfm_instance(fam, n, seed).unwrap());
        let inst = SfmInstance::new(Arc::clone(&psi));
        let red = reduce(&inst).unwrap();
        let res = minimize(&inst).unwrap();
        for cand in &res.candidates {
            let i = cand.element;
            let best = red.f.eval(cand.set) - dsum(&red.d, cand.set.without(i));
            for b in red.keep.subsets().filter(|b| b.contains(i)) {
                prop_assert!(red.f.eval(b) - dsum(&red.d, b.without(i)) >= best.clone());
            }
        }
    }

    #[test]
    fn min_cut_matches_max_flow(n in 1usize..=12, seed in 0u64..100_000) {
        let psi = Arc::new(generate_sfm_instance(SfmFamily::Cut, n, seed).unwrap());
        let res = minimize(&SfmInstance::new(Arc::clone(&psi))).unwrap();
        let flow = cut_graph_max_flow(psi.cut_graph().unwrap()).unwrap();
        prop_assert_eq!(&res.value, &flow);
        prop_assert_eq!(brute_sfm(&psi).unwrap().1, flow);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cut_minimum_equals_flow_on_random_graphs(n in 1usize..=12, seed in 100_000u64..200_000) {
        let psi = Arc::new(generate_sfm_instance(SfmFamily::Cut, n, seed).unwrap());
        let res = minimize(&SfmInstance::new(Arc::clone(&psi))).unwrap();
        prop_assert_eq!(res.value, cut_graph_max_flow(psi.cut_graph().unwrap()).unwrap());
    }
}
