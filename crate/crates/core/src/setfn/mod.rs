//! Set functions in the value-oracle model.
//!
//! Subsets are bitmasks over at most 64 labelled elements. Every oracle
//! counts its evaluations atomically so concurrent readers can share one.

mod generate;
mod io;

pub use generate::{
    generate_instance, generate_sfm_instance, random_side_bounds, Family, SfmFamily,
};
pub use io::{InstanceFile, InstanceFormatError, NumberField, SetFunctionSpec};

use crate::rational::{zero, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use thiserror::Error;

pub const MAX_ELEMENTS: usize = 64;
/// Largest ground set for which exhaustive checks are attempted.
pub const MAX_EXHAUSTIVE: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SetFnError {
    #[error("ground set of {n} elements is too large (limit {limit})")]
    GroundSetTooLarge { n: usize, limit: usize },
    #[error("ground set must contain at least one element")]
    EmptyGroundSet,
    #[error("query {query} intersects the contracted set {base}")]
    Overlap { query: Subset, base: Subset },
    #[error("subset {0} has elements outside the ground set")]
    OutOfRange(Subset),
    #[error("unsupported family {0:?}")]
    UnsupportedFamily(String),
    #[error("malformed oracle payload: {0}")]
    Payload(String),
    #[error("generated side bounds left the polymatroid (violated by {0})")]
    GeneratorBounds(Subset),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GroundSet {
    n: usize,
}

impl GroundSet {
    pub fn new(n: usize) -> Result<Self, SetFnError> {
        if n == 0 {
            return Err(SetFnError::EmptyGroundSet);
        }
        if n > MAX_ELEMENTS {
            return Err(SetFnError::GroundSetTooLarge {
                n,
                limit: MAX_ELEMENTS,
            });
        }
        Ok(GroundSet { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn full(&self) -> Subset {
        Subset::full(self.n)
    }

    pub fn contains(&self, set: Subset) -> bool {
        set.is_subset_of(self.full())
    }

    /// All subsets in mask order.
    pub fn subsets(&self) -> impl Iterator<Item = Subset> {
        (0..1u128 << self.n).map(Subset)
    }
}

/// A subset of the ground set stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset(pub u128);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn full(n: usize) -> Subset {
        if n >= 128 {
            Subset(u128::MAX)
        } else {
            Subset((1u128 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Subset {
        Subset(1 << i)
    }

    pub fn from_elements<I: IntoIterator<Item = usize>>(items: I) -> Subset {
        Subset(items.into_iter().fold(0, |m, i| m | 1 << i))
    }

    pub fn mask(self) -> u128 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Subset {
        Subset(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Subset {
        Subset(self.0 & !(1 << i))
    }

    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn intersection(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub fn difference(self, other: Subset) -> Subset {
        Subset(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Subset) -> bool {
        self.0 & other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Elements in ascending order.
    pub fn iter(self) -> SubsetIter {
        SubsetIter(self.0)
    }

    /// Lowest label not contained in the set.
    pub fn lowest_free(self) -> Option<usize> {
        let free = !self.0;
        (free != 0).then(|| free.trailing_zeros() as usize)
    }

    /// All subsets of `self`, starting with the empty set.
    pub fn subsets(self) -> SubsetsOf {
        SubsetsOf {
            of: self.0,
            next: Some(0),
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl serde::Serialize for Subset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl FromIterator<usize> for Subset {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Subset::from_elements(iter)
    }
}

pub struct SubsetIter(u128);

impl Iterator for SubsetIter {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }
}

pub struct SubsetsOf {
    of: u128,
    next: Option<u128>,
}

impl Iterator for SubsetsOf {
    type Item = Subset;
    fn next(&mut self) -> Option<Subset> {
        let cur = self.next?;
        self.next = if cur == self.of {
            None
        } else {
            Some((cur.wrapping_sub(self.of)) & self.of)
        };
        Some(Subset(cur))
    }
}

/// Anything that can be queried for set-function values.
pub trait SetFunction: Send + Sync {
    fn eval(&self, set: Subset) -> Rational;
}

impl<T: SetFunction + ?Sized> SetFunction for &T {
    fn eval(&self, set: Subset) -> Rational {
        (**self).eval(set)
    }
}

impl<T: SetFunction + ?Sized> SetFunction for Arc<T> {
    fn eval(&self, set: Subset) -> Rational {
        (**self).eval(set)
    }
}

/// Adapts a closure into a [`SetFunction`].
pub struct FnOracle<F>(pub F);

impl<F: Fn(Subset) -> Rational + Send + Sync> SetFunction for FnOracle<F> {
    fn eval(&self, set: Subset) -> Rational {
        (self.0)(set)
    }
}

/// Capacitated digraph whose non-terminal nodes are the ground elements,
/// listed in ascending node order.
#[derive(Clone, Debug, PartialEq)]
pub struct CutGraph {
    nodes: usize,
    edges: Vec<(usize, usize, Rational)>,
    source: usize,
    sink: usize,
    element_node: Vec<usize>,
    node_element: Vec<Option<usize>>,
}

impl CutGraph {
    pub fn new(
        nodes: usize,
        edges: Vec<(usize, usize, Rational)>,
        source: usize,
        sink: usize,
    ) -> Result<Self, SetFnError> {
        if source >= nodes || sink >= nodes || source == sink {
            return Err(SetFnError::Payload(format!(
                "source {source} and sink {sink} must be distinct nodes below {nodes}"
            )));
        }
        for (u, v, cap) in &edges {
            if *u >= nodes || *v >= nodes {
                return Err(SetFnError::Payload(format!("edge ({u},{v}) out of range")));
            }
            if *cap < zero() {
                return Err(SetFnError::Payload(format!("edge ({u},{v}) has negative capacity")));
            }
        }
        let element_node: Vec<usize> = (0..nodes).filter(|&v| v != source && v != sink).collect();
        let mut node_element = vec![None; nodes];
        for (i, &v) in element_node.iter().enumerate() {
            node_element[v] = Some(i);
        }
        Ok(CutGraph {
            nodes,
            edges,
            source,
            sink,
            element_node,
            node_element,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize, Rational)] {
        &self.edges
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn elements(&self) -> usize {
        self.element_node.len()
    }

    pub fn element_node(&self, i: usize) -> usize {
        self.element_node[i]
    }

    fn on_source_side(&self, node: usize, set: Subset) -> bool {
        node == self.source || self.node_element[node].is_some_and(|i| set.contains(i))
    }

    /// Capacity of the cut separating `{source} ∪ set` from the rest.
    pub fn cut_capacity(&self, set: Subset) -> Rational {
        let mut total = zero();
        for (u, v, cap) in &self.edges {
            if self.on_source_side(*u, set) && !self.on_source_side(*v, set) {
                total += cap;
            }
        }
        total
    }
}

#[derive(Clone, Debug)]
pub enum OracleKind {
    /// Values indexed by subset mask.
    ExplicitTable(Vec<Rational>),
    /// Raw cut capacity; not normalized.
    Cut(CutGraph),
    /// `levels[|A|] + Σ_{i∈A} weights[i]`.
    ConcaveCardinality {
        levels: Vec<Rational>,
        weights: Vec<Rational>,
    },
    /// Rank of a partition matroid: `Σ_b min(|A ∩ block_b|, cap_b)`.
    MatroidRank { blocks: Vec<(Subset, u32)> },
    /// `psi(A) + d(A) - offset` on nonempty subsets of `keep`, zero on ∅.
    ShiftedSfm {
        psi: Arc<SetFunctionOracle>,
        d: Vec<Rational>,
        keep: Subset,
        offset: Rational,
    },
    /// `inner(base ∪ A) - inner(base)` for `A` disjoint from `base`.
    Contraction {
        inner: Arc<SetFunctionOracle>,
        base: Subset,
    },
    /// `inner(E) - inner(E ∖ A)`.
    Complement { inner: Arc<SetFunctionOracle> },
}

impl OracleKind {
    pub fn name(&self) -> &'static str {
        match self {
            OracleKind::ExplicitTable(_) => "explicit-table",
            OracleKind::Cut(_) => "cut-function",
            OracleKind::ConcaveCardinality { .. } => "concave-cardinality",
            OracleKind::MatroidRank { .. } => "matroid-rank",
            OracleKind::ShiftedSfm { .. } => "shifted-sfm",
            OracleKind::Contraction { .. } => "contraction",
            OracleKind::Complement { .. } => "complement",
        }
    }
}

/// A set function with an evaluation counter.
#[derive(Debug)]
pub struct SetFunctionOracle {
    ground: GroundSet,
    kind: OracleKind,
    evals: AtomicU64,
}

impl Clone for SetFunctionOracle {
    fn clone(&self) -> Self {
        SetFunctionOracle {
            ground: self.ground,
            kind: self.kind.clone(),
            evals: AtomicU64::new(0),
        }
    }
}

impl SetFunctionOracle {
    fn build(n: usize, kind: OracleKind) -> Result<Self, SetFnError> {
        Ok(SetFunctionOracle {
            ground: GroundSet::new(n)?,
            kind,
            evals: AtomicU64::new(0),
        })
    }

    pub fn explicit(n: usize, values: Vec<Rational>) -> Result<Self, SetFnError> {
        if n > 26 {
            return Err(SetFnError::GroundSetTooLarge { n, limit: 26 });
        }
        if values.len() != 1usize << n {
            return Err(SetFnError::Payload(format!(
                "explicit table needs {} values, got {}",
                1usize << n,
                values.len()
            )));
        }
        Self::build(n, OracleKind::ExplicitTable(values))
    }

    /// Tabulates any set function on `n` elements.
    pub fn tabulate<F: SetFunction + ?Sized>(n: usize, f: &F) -> Result<Self, SetFnError> {
        if n > MAX_EXHAUSTIVE {
            return Err(SetFnError::GroundSetTooLarge {
                n,
                limit: MAX_EXHAUSTIVE,
            });
        }
        let values = (0..1u128 << n).map(|m| f.eval(Subset(m))).collect();
        Self::explicit(n, values)
    }

    pub fn cut(graph: CutGraph) -> Result<Self, SetFnError> {
        let n = graph.elements();
        Self::build(n, OracleKind::Cut(graph))
    }

    pub fn concave_cardinality(
        levels: Vec<Rational>,
        weights: Vec<Rational>,
    ) -> Result<Self, SetFnError> {
        let n = weights.len();
        if levels.len() != n + 1 {
            return Err(SetFnError::Payload(format!(
                "need {} cardinality levels, got {}",
                n + 1,
                levels.len()
            )));
        }
        Self::build(n, OracleKind::ConcaveCardinality { levels, weights })
    }

    pub fn partition_matroid(n: usize, blocks: Vec<(Subset, u32)>) -> Result<Self, SetFnError> {
        let mut seen = Subset::EMPTY;
        for (block, _) in &blocks {
            if !block.is_disjoint(seen) || !block.is_subset_of(Subset::full(n)) {
                return Err(SetFnError::Payload("matroid blocks must be disjoint".into()));
            }
            seen = seen.union(*block);
        }
        Self::build(n, OracleKind::MatroidRank { blocks })
    }

    pub fn shifted_sfm(
        psi: Arc<SetFunctionOracle>,
        d: Vec<Rational>,
        keep: Subset,
        offset: Rational,
    ) -> Result<Self, SetFnError> {
        let n = psi.ground().len();
        if d.len() != n {
            return Err(SetFnError::Payload("shift vector has wrong length".into()));
        }
        Self::build(
            n,
            OracleKind::ShiftedSfm {
                psi,
                d,
                keep,
                offset,
            },
        )
    }

    pub fn ground(&self) -> GroundSet {
        self.ground
    }

    pub fn n(&self) -> usize {
        self.ground.len()
    }

    pub fn kind(&self) -> &OracleKind {
        &self.kind
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.evals.store(0, Ordering::Relaxed);
    }

    /// Evaluates with full precondition checks.
    pub fn try_eval(&self, set: Subset) -> Result<Rational, SetFnError> {
        if !self.ground.contains(set) {
            return Err(SetFnError::OutOfRange(set));
        }
        if let OracleKind::Contraction { base, .. } = &self.kind {
            if !set.is_disjoint(*base) {
                return Err(SetFnError::Overlap {
                    query: set,
                    base: *base,
                });
            }
        }
        Ok(self.eval(set))
    }

    /// Whether the kind is meant to be a polymatroid rank function.
    pub fn claims_normalized(&self) -> bool {
        match &self.kind {
            OracleKind::ExplicitTable(_) | OracleKind::Cut(_) => false,
            OracleKind::ConcaveCardinality { levels, .. } => levels[0] == zero(),
            _ => true,
        }
    }

    fn compute(&self, set: Subset) -> Rational {
        match &self.kind {
            OracleKind::ExplicitTable(values) => values[set.mask() as usize].clone(),
            OracleKind::Cut(graph) => graph.cut_capacity(set),
            OracleKind::ConcaveCardinality { levels, weights } => {
                let mut v = levels[set.len()].clone();
                for i in set.iter() {
                    v += &weights[i];
                }
                v
            }
            OracleKind::MatroidRank { blocks } => {
                let rank: u32 = blocks
                    .iter()
                    .map(|(b, cap)| (set.intersection(*b).len() as u32).min(*cap))
                    .sum();
                Rational::from_integer(rank.into())
            }
            OracleKind::ShiftedSfm {
                psi,
                d,
                keep,
                offset,
            } => {
                if set.is_empty() {
                    return zero();
                }
                debug_assert!(set.is_subset_of(*keep));
                let mut v = psi.eval(set) - offset;
                for i in set.iter() {
                    v += &d[i];
                }
                v
            }
            OracleKind::Contraction { inner, base } => {
                inner.eval(base.union(set)) - inner.eval(*base)
            }
            OracleKind::Complement { inner } => {
                let full = inner.ground().full();
                inner.eval(full) - inner.eval(full.difference(set))
            }
        }
    }
}

impl SetFunction for SetFunctionOracle {
    fn eval(&self, set: Subset) -> Rational {
        self.evals.fetch_add(1, Ordering::Relaxed);
        self.compute(set)
    }
}

/// `g(A) = f(S ∪ A) - f(S)` on the elements outside `S`.
pub fn contraction(oracle: &Arc<SetFunctionOracle>, base: Subset) -> Result<SetFunctionOracle, SetFnError> {
    if !oracle.ground().contains(base) {
        return Err(SetFnError::OutOfRange(base));
    }
    SetFunctionOracle::build(
        oracle.n(),
        OracleKind::Contraction {
            inner: Arc::clone(oracle),
            base,
        },
    )
}

/// `f(A) = b(E) - b(E ∖ A)`.
pub fn complement(oracle: &Arc<SetFunctionOracle>) -> Result<SetFunctionOracle, SetFnError> {
    SetFunctionOracle::build(
        oracle.n(),
        OracleKind::Complement {
            inner: Arc::clone(oracle),
        },
    )
}

/// Outcome of one axiom check; failures carry a witness pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Check {
    Pass,
    Fail { a: Subset, b: Subset },
}

impl Check {
    pub fn passed(&self) -> bool {
        matches!(self, Check::Pass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMethod {
    Exhaustive,
    Sampled { pairs: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityReport {
    pub normalized: Check,
    pub increasing: Check,
    pub submodular: Check,
    pub method: CheckMethod,
}

impl ValidityReport {
    pub fn is_polymatroid(&self) -> bool {
        self.normalized.passed() && self.increasing.passed() && self.submodular.passed()
    }
}

/// Exhaustive check for tables, sampled spot-check for structured families.
pub fn validate_polymatroid(oracle: &SetFunctionOracle) -> Result<ValidityReport, SetFnError> {
    match oracle.kind() {
        OracleKind::ExplicitTable(_) => validate_exhaustive(oracle, oracle.n()),
        _ if oracle.n() <= 12 => validate_exhaustive(oracle, oracle.n()),
        _ => Ok(validate_sampled(oracle, oracle.n(), 100, 0)),
    }
}

pub fn validate_exhaustive<F: SetFunction + ?Sized>(
    f: &F,
    n: usize,
) -> Result<ValidityReport, SetFnError> {
    if n > MAX_EXHAUSTIVE {
        return Err(SetFnError::GroundSetTooLarge {
            n,
            limit: MAX_EXHAUSTIVE,
        });
    }
    let table: Vec<Rational> = (0..1u128 << n).map(|m| f.eval(Subset(m))).collect();
    let normalized = if table[0] == zero() {
        Check::Pass
    } else {
        Check::Fail {
            a: Subset::EMPTY,
            b: Subset::EMPTY,
        }
    };
    let mut increasing = Check::Pass;
    let mut submodular = Check::Pass;
    'outer: for m in 0..table.len() {
        let a = Subset(m as u128);
        for i in 0..n {
            if a.contains(i) {
                continue;
            }
            let ai = a.with(i);
            if increasing.passed() && table[ai.mask() as usize] < table[m] {
                increasing = Check::Fail { a, b: ai };
            }
            if submodular.passed() {
                for j in i + 1..n {
                    if a.contains(j) {
                        continue;
                    }
                    let aj = a.with(j);
                    let aij = ai.with(j);
                    if &table[ai.mask() as usize] + &table[aj.mask() as usize]
                        < &table[aij.mask() as usize] + &table[m]
                    {
                        submodular = Check::Fail { a: ai, b: aj };
                        break;
                    }
                }
            }
            if !increasing.passed() && !submodular.passed() {
                break 'outer;
            }
        }
    }
    Ok(ValidityReport {
        normalized,
        increasing,
        submodular,
        method: CheckMethod::Exhaustive,
    })
}

/// Random-pair spot check of the three axioms.
pub fn validate_sampled<F: SetFunction + ?Sized>(
    f: &F,
    n: usize,
    pairs: usize,
    seed: u64,
) -> ValidityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = Subset::full(n).mask();
    let normalized = if f.eval(Subset::EMPTY) == zero() {
        Check::Pass
    } else {
        Check::Fail {
            a: Subset::EMPTY,
            b: Subset::EMPTY,
        }
    };
    let mut increasing = Check::Pass;
    let mut submodular = Check::Pass;
    for _ in 0..pairs {
        let a = Subset(rng.gen::<u128>() & full);
        let b = Subset(rng.gen::<u128>() & full);
        let fa = f.eval(a);
        let fb = f.eval(b);
        let fu = f.eval(a.union(b));
        let fi = f.eval(a.intersection(b));
        if increasing.passed() && fu < fa {
            increasing = Check::Fail { a, b: a.union(b) };
        }
        if submodular.passed() && &fa + &fb < &fu + &fi {
            submodular = Check::Fail { a, b };
        }
    }
    ValidityReport {
        normalized,
        increasing,
        submodular,
        method: CheckMethod::Sampled { pairs },
    }
}

/// A polymatroid LP instance: maximize `c·x` over `x(A) ≤ f(A)`, `x ≥ d`.
#[derive(Clone, Debug)]
pub struct PolymatroidInstance {
    pub f: Arc<SetFunctionOracle>,
    pub c: Vec<Rational>,
    pub d: Vec<Rational>,
}

impl PolymatroidInstance {
    pub fn new(
        f: Arc<SetFunctionOracle>,
        c: Vec<Rational>,
        d: Vec<Rational>,
    ) -> Result<Self, SetFnError> {
        let n = f.n();
        if c.len() != n || d.len() != n {
            return Err(SetFnError::Payload(format!(
                "cost and bound vectors must have {n} entries"
            )));
        }
        if c.iter().chain(d.iter()).any(|v| *v < zero()) {
            return Err(SetFnError::Payload("costs and side bounds must be nonnegative".into()));
        }
        Ok(PolymatroidInstance { f, c, d })
    }

    pub fn n(&self) -> usize {
        self.f.n()
    }
}
