use std::sync::Arc;

use proptest::prelude::*;

use polyside::setfn::{contraction, generate_instance, Family, SetFunction, Subset};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::CutGraph), Just(Family::ConcaveCardinality), Just(Family::Coverage)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diminishing_returns(fam in family(), n in 2usize..=16, seed in 0u64..1000, picks in prop::collection::vec(any::<u64>(), 32)) {
        let inst = generate_instance(fam, n, seed).unwrap();
        let f = inst.f.as_ref();
        let full = Subset::full(n).mask() as u64;
        for w in picks.chunks(2) {
            let b = Subset((w[0] & full) as u128);
            let a = Subset((w[0] & w[1] & full) as u128);
            for i in (0..n).filter(|&i| !b.contains(i)) {
                prop_assert!(f.eval(a.with(i)) - f.eval(a) >= f.eval(b.with(i)) - f.eval(b));
            }
        }
    }

    #[test]
    fn contraction_matches_definition(fam in family(), n in 1usize..=10, seed in 0u64..1000, base in any::<u16>()) {
        let inst = generate_instance(fam, n, seed).unwrap();
        let base = Subset(u128::from(base) & Subset::full(n).mask());
        let g = contraction(&inst.f, base).unwrap();
        let f = inst.f.as_ref();
        for a in Subset::full(n).difference(base).subsets() {
            prop_assert_eq!(g.eval(a), f.eval(base.union(a)) - f.eval(base));
        }
    }

    #[test]
    fn eval_count_tracks_calls(fam in family(), n in 1usize..=8, seed in 0u64..1000, k in 0usize..=40) {
        let inst = generate_instance(fam, n, seed).unwrap();
        let f = Arc::clone(&inst.f);
        f.reset_count();
        let k = k.min(1 << n);
        for mask in 0..k {
            f.eval(Subset(mask as u128));
        }
        prop_assert_eq!(f.eval_count(), k as u64);
    }
}
