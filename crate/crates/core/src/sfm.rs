//! Submodular minimization through the side-constrained polymatroid LP.
//!
//! With `d_i = ψ(E∖i) - ψ(E)`, the function `f(A) = ψ(A) + d(A) - ψ(∅)` is
//! a polymatroid rank on the elements with `d_i ≥ 0`, and the others
//! never belong to a minimizer. For each kept `i`, maximizing `x_i` over
//! `{x ∈ P(f), x ≥ d}` puts a best set containing `i` into the first
//! group. The answer is the best of those sets and `∅`.

use std::sync::Arc;

use num_traits::Signed;
use thiserror::Error;

use crate::grouping::{solve_general, GroupingError, SolveOptions, Stats};
use crate::rational::{one, zero, Rational};
use crate::setfn::{validate_sampled, Check, FnOracle, SetFunction, SetFunctionOracle, Subset};

const SAMPLED_PAIRS: usize = 64;
const SAMPLE_SEED: u64 = 0x5f3;

#[derive(Debug, Error, PartialEq)]
pub enum SfmError {
    #[error("not submodular: psi({a}) + psi({b}) < psi(union) + psi(intersection)")]
    NotSubmodular { a: Subset, b: Subset },
    #[error("element {0} was eliminated by the reduction")]
    ElementNotKept(usize),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
}

#[derive(Clone, Debug)]
pub struct SfmInstance {
    pub psi: Arc<SetFunctionOracle>,
    /// A known `M` with `ψ(A) ≥ -M` for every `A`.
    pub lower_bound: Option<Rational>,
}

impl SfmInstance {
    pub fn new(psi: Arc<SetFunctionOracle>) -> Self {
        SfmInstance {
            psi,
            lower_bound: None,
        }
    }

    pub fn n(&self) -> usize {
        self.psi.n()
    }
}

#[derive(Clone, Debug)]
pub struct SfmReduction {
    pub psi: Arc<SetFunctionOracle>,
    pub d: Vec<Rational>,
    pub keep: Subset,
    /// `ψ(A) + d(A) - ψ(∅)` on subsets of `keep`.
    pub f: SetFunctionOracle,
    pub psi_empty: Rational,
}

impl SfmReduction {
    pub fn kept(&self) -> Vec<usize> {
        self.keep.iter().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub element: usize,
    pub set: Subset,
    pub value: Rational,
}

#[derive(Clone, Debug)]
pub struct SfmResult {
    pub argmin: Subset,
    pub value: Rational,
    pub candidates: Vec<Candidate>,
    /// Work summed over the subproblem solves.
    pub stats: Stats,
    /// Evaluations of `ψ` itself during the minimization.
    pub psi_evaluations: u64,
}

pub fn reduce(inst: &SfmInstance) -> Result<SfmReduction, SfmError> {
    let psi = &inst.psi;
    let n = psi.n();
    if let Check::Fail { a, b } = validate_sampled(psi.as_ref(), n, SAMPLED_PAIRS, SAMPLE_SEED).submodular {
        return Err(SfmError::NotSubmodular { a, b });
    }
    let full = Subset::full(n);
    let psi_full = psi.eval(full);
    let psi_empty = psi.eval(Subset::EMPTY);
    let mut d = Vec::with_capacity(n);
    let mut keep = Subset::EMPTY;
    for i in 0..n {
        let di = psi.eval(full.without(i)) - &psi_full;
        if !di.is_negative() {
            keep = keep.with(i);
        }
        d.push(di);
    }
    let f = SetFunctionOracle::shifted_sfm(Arc::clone(psi), d.clone(), keep, psi_empty.clone())
        .expect("shift vector matches the ground set");
    Ok(SfmReduction {
        psi: Arc::clone(psi),
        d,
        keep,
        f,
        psi_empty,
    })
}

fn tie_key(value: &Rational, set: Subset) -> (Rational, usize, Subset) {
    (value.clone(), set.len(), set)
}

pub fn minimize(inst: &SfmInstance) -> Result<SfmResult, SfmError> {
    minimize_with(inst, &SolveOptions::default())
}

pub fn minimize_with(inst: &SfmInstance, opts: &SolveOptions) -> Result<SfmResult, SfmError> {
    let red = reduce(inst)?;
    let psi = &red.psi;
    let before = psi.eval_count();
    let kept = red.kept();
    let k = kept.len();
    let mut stats = Stats::default();
    let mut candidates = Vec::with_capacity(k);
    let mut best = (red.psi_empty.clone(), Subset::EMPTY);

    if k > 0 {
        let total: Rational = kept.iter().map(|&i| &red.d[i]).sum();
        // ψ(∅) lowered below every ψ(A) - d(A) keeps d inside P(f)
        let lowered = &red.psi_empty - &total - one();
        let to_original = |a: Subset| -> Subset { a.iter().map(|t| kept[t]).collect() };
        let f = FnOracle(|a: Subset| {
            if a.is_empty() {
                return zero();
            }
            let orig = to_original(a);
            let shift: Rational = orig.iter().map(|i| &red.d[i]).sum();
            psi.eval(orig) + shift - &lowered
        });
        let d: Vec<Rational> = kept.iter().map(|&i| red.d[i].clone()).collect();
        for t in 0..k {
            let mut c = vec![zero(); k];
            c[t] = one();
            let sol = solve_general(&f, k, &c, &d, Default::default(), opts)?;
            stats.absorb(&sol.stats);
            let first = sol
                .groups
                .groups
                .first()
                .expect("a nonempty ground set has a first group");
            let set = to_original(first.members());
            let value = psi.eval(set);
            if tie_key(&value, set) < tie_key(&best.0, best.1) {
                best = (value.clone(), set);
            }
            candidates.push(Candidate {
                element: kept[t],
                set,
                value,
            });
        }
    }
    Ok(SfmResult {
        argmin: best.1,
        value: best.0,
        candidates,
        stats,
        psi_evaluations: psi.eval_count() - before,
    })
}

/// `ψ` on each candidate, best first under the minimization tie-break.
pub fn evaluate_candidates(
    red: &SfmReduction,
    candidates: &[Subset],
) -> Result<Vec<(Subset, Rational)>, SfmError> {
    let mut out = Vec::with_capacity(candidates.len());
    for &set in candidates {
        if let Some(i) = set.difference(red.keep).iter().next() {
            return Err(SfmError::ElementNotKept(i));
        }
        out.push((set, red.psi.eval(set)));
    }
    out.sort_by_key(|a| tie_key(&a.1, a.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;
    use crate::setfn::CutGraph;

    fn table(values: &[i64]) -> SfmInstance {
        let n = values.len().trailing_zeros() as usize;
        let vals = values.iter().map(|&v| int(v)).collect();
        SfmInstance::new(Arc::new(SetFunctionOracle::explicit(n, vals).unwrap()))
    }

    fn cut4() -> SfmInstance {
        let g = CutGraph::new(
            4,
            vec![
                (2, 0, int(3)),
                (0, 3, int(2)),
                (2, 1, int(1)),
                (1, 3, int(4)),
                (0, 1, int(1)),
            ],
            2,
            3,
        )
        .unwrap();
        SfmInstance::new(Arc::new(SetFunctionOracle::cut(g).unwrap()))
    }

    #[test]
    fn zero_function() {
        let inst = table(&[0, 0, 0, 0]);
        let red = reduce(&inst).unwrap();
        assert_eq!(red.d, vec![int(0), int(0)]);
        assert_eq!(red.keep, Subset::full(2));
        assert!(Subset::full(2).subsets().all(|a| red.f.eval(a) == int(0)));
        let res = minimize(&inst).unwrap();
        assert_eq!((res.argmin, res.value), (Subset::EMPTY, int(0)));
    }

    #[test]
    fn small_table() {
        let inst = table(&[0, 2, -1, 0]);
        let red = reduce(&inst).unwrap();
        assert_eq!(red.d, vec![int(-1), int(2)]);
        assert_eq!(red.keep, Subset::singleton(1));
        assert_eq!(red.f.eval(Subset::singleton(1)), int(1));
        let res = minimize(&inst).unwrap();
        assert_eq!((res.argmin, res.value), (Subset::singleton(1), int(-1)));
        assert_eq!(
            evaluate_candidates(&red, &[Subset::singleton(1)]).unwrap(),
            vec![(Subset::singleton(1), int(-1))]
        );
        assert_eq!(
            evaluate_candidates(&red, &[Subset::singleton(0)]),
            Err(SfmError::ElementNotKept(0))
        );
    }

    #[test]
    fn all_elements_eliminated() {
        let inst = table(&[0, 0, 0, 3]);
        assert!(matches!(reduce(&inst), Err(SfmError::NotSubmodular { .. })));
        // modular and increasing: every d_i < 0
        let inst = table(&[1, 3, 3, 5]);
        let red = reduce(&inst).unwrap();
        assert_eq!(red.keep, Subset::EMPTY);
        let res = minimize(&inst).unwrap();
        assert_eq!((res.argmin, res.value), (Subset::EMPTY, int(1)));
    }

    #[test]
    fn cut_instance() {
        let inst = cut4();
        let res = minimize(&inst).unwrap();
        assert_eq!((res.argmin, res.value), (Subset::EMPTY, int(4)));
        let red = reduce(&inst).unwrap();
        let cands = [Subset::singleton(0), Subset::full(2)];
        if cands.iter().all(|c| c.is_subset_of(red.keep)) {
            assert_eq!(
                evaluate_candidates(&red, &cands).unwrap(),
                vec![(Subset::singleton(0), int(4)), (Subset::full(2), int(6))]
            );
        }
        assert_eq!(evaluate_candidates(&red, &[Subset::EMPTY]).unwrap(), vec![(Subset::EMPTY, int(4))]);
    }
}
