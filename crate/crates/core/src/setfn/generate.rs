//! Seeded instance families used by tests, benchmarks and the `gen` command.

use super::{
    CutGraph, OracleKind, PolymatroidInstance, SetFnError, SetFunction, SetFunctionOracle, Subset,
};
use crate::rational::{int, rat, zero, Rational};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    CutGraph,
    ConcaveCardinality,
    Coverage,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::CutGraph, Family::ConcaveCardinality, Family::Coverage];

    pub fn name(self) -> &'static str {
        match self {
            Family::CutGraph => "cut",
            Family::ConcaveCardinality => "concave",
            Family::Coverage => "coverage",
        }
    }

    pub fn max_n(self) -> usize {
        match self {
            Family::Coverage => 20,
            _ => super::MAX_ELEMENTS,
        }
    }
}

impl FromStr for Family {
    type Err = SetFnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cut" | "cut-graph" => Ok(Family::CutGraph),
            "concave" | "concave-cardinality" | "concave-cardinality-plus-modular" => {
                Ok(Family::ConcaveCardinality)
            }
            "coverage" => Ok(Family::Coverage),
            other => Err(SetFnError::UnsupportedFamily(other.to_string())),
        }
    }
}

/// Families of submodular (not necessarily monotone) functions to minimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SfmFamily {
    Cut,
    Coverage,
    RandomTable,
    Concave,
}

impl SfmFamily {
    pub const ALL: [SfmFamily; 4] = [
        SfmFamily::Cut,
        SfmFamily::Coverage,
        SfmFamily::RandomTable,
        SfmFamily::Concave,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SfmFamily::Cut => "cut",
            SfmFamily::Coverage => "coverage",
            SfmFamily::RandomTable => "table",
            SfmFamily::Concave => "concave",
        }
    }
}

impl FromStr for SfmFamily {
    type Err = SetFnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cut" => Ok(SfmFamily::Cut),
            "coverage" => Ok(SfmFamily::Coverage),
            "table" | "random-table" => Ok(SfmFamily::RandomTable),
            "concave" => Ok(SfmFamily::Concave),
            other => Err(SetFnError::UnsupportedFamily(other.to_string())),
        }
    }
}

fn rng_for(tag: u64, n: usize, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (tag << 56) ^ ((n as u64) << 40))
}

fn random_fraction(rng: &mut ChaCha8Rng, num_max: i64, den_max: i64) -> Rational {
    rat(rng.gen_range(0..=num_max), rng.gen_range(1..=den_max))
}

fn concave_levels(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    let mut steps: Vec<Rational> = (0..n).map(|_| random_fraction(rng, 6, 3)).collect();
    steps.sort_by(|a, b| b.cmp(a));
    let mut levels = Vec::with_capacity(n + 1);
    levels.push(zero());
    for s in steps {
        let next = levels.last().unwrap() + s;
        levels.push(next);
    }
    levels
}

fn concave_oracle(rng: &mut ChaCha8Rng, n: usize) -> SetFunctionOracle {
    let levels = concave_levels(rng, n);
    let weights = (0..n).map(|_| random_fraction(rng, 4, 2)).collect();
    SetFunctionOracle::concave_cardinality(levels, weights).expect("consistent sizes")
}

fn coverage_table(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    let universe = rng.gen_range(2..=2 * n + 2);
    let weights: Vec<Rational> = (0..universe).map(|_| int(rng.gen_range(1..=5))).collect();
    let covers: Vec<u64> = (0..n)
        .map(|_| (0..universe).fold(0u64, |m, u| if rng.gen_bool(0.35) { m | 1 << u } else { m }))
        .collect();
    (0..1u64 << n)
        .map(|mask| {
            let covered = Subset(mask as u128).iter().fold(0u64, |m, i| m | covers[i]);
            Subset(covered as u128).iter().fold(zero(), |acc, u| acc + &weights[u])
        })
        .collect()
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize, Rational)> {
    let (source, sink) = (n, n + 1);
    let p = (3.0 / n as f64).min(0.4);
    let mut edges = Vec::new();
    for u in 0..n + 2 {
        for v in 0..n + 2 {
            if u == v || v == source || u == sink {
                continue;
            }
            if rng.gen_bool(p) {
                edges.push((u, v, int(rng.gen_range(1..=5))));
            }
        }
    }
    edges
}

/// Cut function of `graph` made monotone by routing each element's inbound
/// capacity to the sink, then normalized by contracting the empty set.
fn monotone_cut_oracle(rng: &mut ChaCha8Rng, n: usize) -> SetFunctionOracle {
    let mut edges = random_edges(rng, n);
    let sink = n + 1;
    let mut inbound = vec![zero(); n];
    for (_, v, cap) in &edges {
        if *v < n {
            inbound[*v] += cap;
        }
    }
    for (i, cap) in inbound.into_iter().enumerate() {
        if cap > zero() {
            edges.push((i, sink, cap));
        }
    }
    let graph = CutGraph::new(n + 2, edges, n, sink).expect("generated graph is well formed");
    let cut = Arc::new(SetFunctionOracle::cut(graph).expect("valid graph"));
    super::contraction(&cut, Subset::EMPTY).expect("empty base")
}

/// Vertex of `f` for permutation `pi`, computed locally so the generator
/// does not depend on the polymatroid module.
fn telescope<F: SetFunction + ?Sized>(f: &F, n: usize, pi: &[usize]) -> Vec<Rational> {
    let mut x = vec![zero(); n];
    let mut prefix = Subset::EMPTY;
    let mut prev = f.eval(prefix);
    for &e in pi {
        prefix = prefix.with(e);
        let cur = f.eval(prefix);
        x[e] = &cur - &prev;
        prev = cur;
    }
    x
}

/// Side bounds inside `P(f)`: a scaled-down convex combination of one to
/// three random vertices with some entries shrunk or zeroed.
pub fn random_side_bounds<F: SetFunction + ?Sized>(
    f: &F,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Rational> {
    let k = rng.gen_range(1..=3);
    let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    let mut d = vec![zero(); n];
    for w in weights {
        let mut pi: Vec<usize> = (0..n).collect();
        pi.shuffle(rng);
        let v = telescope(f, n, &pi);
        let share = rat(w, total);
        for i in 0..n {
            d[i] += &share * &v[i];
        }
    }
    let scale = {
        let num = *[1, 1, 3, 4, 9].choose(rng).unwrap();
        let den = *[1, 1, 4, 5, 10].choose(rng).unwrap();
        rat(num.min(den), den)
    };
    for di in d.iter_mut() {
        let r: f64 = rng.gen();
        if r < 0.15 {
            *di = zero();
        } else if r < 0.4 {
            *di = &*di * &scale * rat(rng.gen_range(1..=4), 4);
        } else {
            *di = &*di * &scale;
        }
    }
    d
}

/// Deterministic polymatroid instance for `(family, n, seed)`.
pub fn generate_instance(
    family: Family,
    n: usize,
    seed: u64,
) -> Result<PolymatroidInstance, SetFnError> {
    if n == 0 {
        return Err(SetFnError::EmptyGroundSet);
    }
    if n > family.max_n() {
        return Err(SetFnError::GroundSetTooLarge {
            n,
            limit: family.max_n(),
        });
    }
    let tag = match family {
        Family::CutGraph => 1,
        Family::ConcaveCardinality => 2,
        Family::Coverage => 3,
    };
    let mut rng = rng_for(tag, n, seed);
    let f = match family {
        Family::CutGraph => monotone_cut_oracle(&mut rng, n),
        Family::ConcaveCardinality => concave_oracle(&mut rng, n),
        Family::Coverage => {
            let values = coverage_table(&mut rng, n);
            SetFunctionOracle::explicit(n, values)?
        }
    };
    let d = random_side_bounds(&f, n, &mut rng);
    if n <= 12 {
        for set in Subset::full(n).subsets() {
            let ds: Rational = set.iter().map(|i| &d[i]).sum();
            if ds > f.eval(set) {
                return Err(SetFnError::GeneratorBounds(set));
            }
        }
    }
    let c = (0..n).map(|_| int(rng.gen_range(1..=9))).collect();
    f.reset_count();
    PolymatroidInstance::new(Arc::new(f), c, d)
}

/// Deterministic submodular function for minimization experiments.
pub fn generate_sfm_instance(
    family: SfmFamily,
    n: usize,
    seed: u64,
) -> Result<SetFunctionOracle, SetFnError> {
    if n == 0 {
        return Err(SetFnError::EmptyGroundSet);
    }
    let tag = match family {
        SfmFamily::Cut => 4,
        SfmFamily::Coverage => 5,
        SfmFamily::RandomTable => 6,
        SfmFamily::Concave => 7,
    };
    let mut rng = rng_for(tag, n, seed);
    let oracle = match family {
        SfmFamily::Cut => {
            if n > super::MAX_ELEMENTS {
                return Err(SetFnError::GroundSetTooLarge { n, limit: super::MAX_ELEMENTS });
            }
            let edges = random_edges(&mut rng, n);
            SetFunctionOracle::cut(CutGraph::new(n + 2, edges, n, n + 1)?)?
        }
        SfmFamily::Coverage => {
            if n > 20 {
                return Err(SetFnError::GroundSetTooLarge { n, limit: 20 });
            }
            let mut values = coverage_table(&mut rng, n);
            let penalty: Vec<Rational> = (0..n).map(|_| random_fraction(&mut rng, 6, 2)).collect();
            for (mask, v) in values.iter_mut().enumerate() {
                for i in Subset(mask as u128).iter() {
                    *v -= &penalty[i];
                }
            }
            SetFunctionOracle::explicit(n, values)?
        }
        SfmFamily::RandomTable => {
            if n > 20 {
                return Err(SetFnError::GroundSetTooLarge { n, limit: 20 });
            }
            let terms = rng.gen_range(2..=4);
            let parts: Vec<(u128, Vec<Rational>)> = (0..terms)
                .map(|_| {
                    let support = rng.gen::<u128>() & Subset::full(n).mask();
                    (support, concave_levels(&mut rng, n))
                })
                .collect();
            let penalty: Vec<Rational> = (0..n).map(|_| random_fraction(&mut rng, 8, 2)).collect();
            let constant = int(rng.gen_range(-3..=3));
            let values = (0..1u128 << n)
                .map(|mask| {
                    let mut v = constant.clone();
                    for (support, levels) in &parts {
                        v += &levels[(mask & support).count_ones() as usize];
                    }
                    for i in Subset(mask).iter() {
                        v -= &penalty[i];
                    }
                    v
                })
                .collect();
            SetFunctionOracle::explicit(n, values)?
        }
        SfmFamily::Concave => {
            if n > super::MAX_ELEMENTS {
                return Err(SetFnError::GroundSetTooLarge { n, limit: super::MAX_ELEMENTS });
            }
            let levels = concave_levels(&mut rng, n);
            let top = levels[n].clone();
            let weights = (0..n)
                .map(|_| -(random_fraction(&mut rng, 6, 3) * &top / int(n as i64)) * int(2))
                .collect();
            SetFunctionOracle::concave_cardinality(levels, weights)?
        }
    };
    Ok(oracle)
}

impl SetFunctionOracle {
    /// The cut graph behind a cut oracle, raw or normalized.
    pub fn cut_graph(&self) -> Option<&CutGraph> {
        match self.kind() {
            OracleKind::Cut(g) => Some(g),
            OracleKind::Contraction { inner, base } if base.is_empty() => inner.cut_graph(),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfn::{validate_exhaustive, validate_sampled};

    #[test]
    fn instances_are_deterministic() {
        for fam in Family::ALL {
            let a = generate_instance(fam, 3, 7).unwrap();
            let b = generate_instance(fam, 3, 7).unwrap();
            assert_eq!(a.c, b.c);
            assert_eq!(a.d, b.d);
            for s in Subset::full(3).subsets() {
                assert_eq!(a.f.eval(s), b.f.eval(s));
            }
        }
    }

    #[test]
    fn generated_functions_are_polymatroids() {
        for fam in Family::ALL {
            for n in 1..=10 {
                for seed in 0..3 {
                    let inst = generate_instance(fam, n, seed).unwrap();
                    let report = validate_exhaustive(inst.f.as_ref(), n).unwrap();
                    assert!(report.is_polymatroid(), "{fam:?} n={n} seed={seed}: {report:?}");
                    assert!(inst.c.iter().all(|c| *c > zero()));
                }
            }
        }
    }

    #[test]
    fn cut_family_spot_check() {
        let inst = generate_instance(Family::CutGraph, 5, 1).unwrap();
        assert!(inst.f.cut_graph().is_some());
        let report = validate_sampled(inst.f.as_ref(), 5, 100, 11);
        assert!(report.submodular.passed());
    }

    #[test]
    fn large_concave_instances_use_structured_oracles() {
        let inst = generate_instance(Family::ConcaveCardinality, 64, 3).unwrap();
        assert_eq!(inst.f.kind().name(), "concave-cardinality");
        assert!(validate_sampled(inst.f.as_ref(), 64, 200, 1).is_polymatroid());
    }

    #[test]
    fn unknown_family_is_rejected() {
        assert!(matches!(
            "matroid-union".parse::<Family>(),
            Err(SetFnError::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn sfm_families_are_submodular() {
        for fam in SfmFamily::ALL {
            for seed in 0..4 {
                let psi = generate_sfm_instance(fam, 7, seed).unwrap();
                let report = validate_exhaustive(&psi, 7).unwrap();
                assert!(report.submodular.passed(), "{fam:?} seed {seed}");
            }
        }
    }
}
