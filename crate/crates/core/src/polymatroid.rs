//! Greedy vertices, the unconstrained greedy LP, membership in P(f), and
//! the passage from a supermodular `b` to its submodular conjugate.

use std::sync::Arc;

use itertools::Itertools;
use crate::rational::{zero, Rational};
use crate::setfn::{complement, SetFnError, SetFunction, SetFunctionOracle, Subset, MAX_EXHAUSTIVE};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("not a permutation of 0..{n}: {order:?}")]
pub struct PermutationError {
    pub n: usize,
    pub order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self, PermutationError> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || seen[i] {
                return Err(PermutationError { n, order });
            }
            seen[i] = true;
        }
        Ok(Permutation(order))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sorts by descending cost, ties by ascending index.
    pub fn by_descending_cost(c: &[Rational]) -> Self {
        let mut order: Vec<usize> = (0..c.len()).collect();
        order.sort_by(|&a, &b| c[b].cmp(&c[a]).then(a.cmp(&b)));
        Permutation(order)
    }

    /// The first `k` elements as a set.
    pub fn prefix(&self, k: usize) -> Subset {
        self.0[..k].iter().copied().collect()
    }

    /// Every permutation of `0..n` in lexicographic order.
    pub fn all(n: usize) -> Vec<Permutation> {
        (0..n).permutations(n).map(Permutation).collect()
    }
}

impl std::fmt::Display for Permutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({})", self.0.iter().join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub x: Vec<Rational>,
    pub pi: Permutation,
}

/// Telescoped marginals along `pi`.
pub fn vertex<F: SetFunction + ?Sized>(f: &F, pi: &Permutation) -> Vertex {
    let mut x = vec![zero(); pi.len()];
    let mut prefix = Subset::EMPTY;
    let mut prev = f.eval(prefix);
    for &i in pi.order() {
        prefix = prefix.with(i);
        let cur = f.eval(prefix);
        x[i] = &cur - &prev;
        prev = cur;
    }
    Vertex { x, pi: pi.clone() }
}

/// Maximizes `c·x` over P(f) for `c ≥ 0`.
pub fn greedy_lp<F: SetFunction + ?Sized>(f: &F, c: &[Rational]) -> (Vec<Rational>, Rational) {
    let v = vertex(f, &Permutation::by_descending_cost(c));
    let objective = v.x.iter().zip(c).map(|(x, c)| x * c).sum();
    (v.x, objective)
}

#[derive(Clone, Debug, PartialEq)]
pub enum MembershipReport {
    Member,
    Violated {
        set: Subset,
        load: Rational,
        capacity: Rational,
    },
}

impl MembershipReport {
    pub fn is_member(&self) -> bool {
        matches!(self, MembershipReport::Member)
    }
}

/// Exhaustive check of `d(A) ≤ f(A)` over every subset. Reports the
/// violated set of least mask.
pub fn membership<F: SetFunction + ?Sized>(
    f: &F,
    n: usize,
    d: &[Rational],
) -> Result<MembershipReport, SetFnError> {
    if n > MAX_EXHAUSTIVE {
        return Err(SetFnError::GroundSetTooLarge {
            n,
            limit: MAX_EXHAUSTIVE,
        });
    }
    if d.len() != n {
        return Err(SetFnError::Payload(format!("expected {n} side bounds, got {}", d.len())));
    }
    let mut load = vec![zero(); 1 << n];
    for mask in 1..(1usize << n) {
        let low = mask.trailing_zeros() as usize;
        load[mask] = &load[mask & (mask - 1)] + &d[low];
        let set = Subset(mask as u128);
        let capacity = f.eval(set);
        if load[mask] > capacity {
            return Ok(MembershipReport::Violated {
                set,
                load: load[mask].clone(),
                capacity,
            });
        }
    }
    Ok(MembershipReport::Member)
}

/// `f(A) = b(E) - b(E ∖ A)`; B(f) = B(b) when `b` is supermodular.
pub fn b_to_f(b: &Arc<SetFunctionOracle>) -> SetFunctionOracle {
    complement(b).expect("same ground set as b")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use crate::setfn::FnOracle;

    fn table() -> SetFunctionOracle {
        SetFunctionOracle::explicit(2, vec![int(0), int(1), int(1), rat(3, 2)]).unwrap()
    }

    fn card() -> FnOracle<impl Fn(Subset) -> Rational + Send + Sync> {
        FnOracle(|a: Subset| int(a.len() as i64))
    }

    #[test]
    fn modular_vertex_is_all_ones() {
        for pi in Permutation::all(3) {
            assert_eq!(vertex(&card(), &pi).x, vec![int(1); 3]);
        }
    }

    #[test]
    fn telescoped_vertex() {
        let pi = Permutation::new(vec![1, 0]).unwrap();
        assert_eq!(vertex(&table(), &pi).x, vec![rat(1, 2), int(1)]);
        let concave =
            SetFunctionOracle::concave_cardinality(vec![int(0), int(2), int(3), rat(7, 2)], vec![int(0); 3])
                .unwrap();
        assert_eq!(
            vertex(&concave, &Permutation::identity(3)).x,
            vec![int(2), int(1), rat(1, 2)]
        );
    }

    #[test]
    fn greedy_examples() {
        let (x, obj) = greedy_lp(&card(), &[int(3), int(2), int(1)]);
        assert_eq!((x, obj), (vec![int(1); 3], int(6)));
        let (_, obj) = greedy_lp(&table(), &[int(1), int(1)]);
        assert_eq!(obj, rat(3, 2));
    }

    #[test]
    fn membership_examples() {
        let f = table();
        assert!(membership(&f, 2, &[int(0), int(0)]).unwrap().is_member());
        assert!(membership(&f, 2, &[rat(2, 5), rat(7, 10)]).unwrap().is_member());
        match membership(&f, 2, &[int(1), rat(3, 5)]).unwrap() {
            MembershipReport::Violated { set, load, capacity } => {
                assert_eq!(set, Subset::full(2));
                assert_eq!(load, rat(8, 5));
                assert_eq!(capacity, rat(3, 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conjugate_of_table() {
        let b = Arc::new(
            SetFunctionOracle::explicit(2, vec![int(0), rat(1, 2), rat(1, 2), rat(3, 2)]).unwrap(),
        );
        let f = b_to_f(&b);
        let values: Vec<Rational> = Subset::full(2).subsets().map(|a| f.eval(a)).collect();
        assert_eq!(values, vec![int(0), int(1), int(1), rat(3, 2)]);
    }

    #[test]
    fn permutation_rejects_repeats() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert_eq!(Permutation::all(3).len(), 6);
        assert_eq!(
            Permutation::by_descending_cost(&[int(1), int(2), int(1)]).order(),
            &[1, 0, 2]
        );
    }
}
