//! The insertion engine. One [`Engine`] serves a whole solve: it owns the
//! value caches, the membership verdict memo, and the counters, while
//! [`Instance`]s are the (possibly nested) group structures being built.

use std::collections::HashMap;
use std::sync::Arc;

use num_traits::Signed;

use super::{GroupingError, MoveRecord, PolymatroidViolation, Stats, Step3Record, TraceEvent};
use crate::lpcore::{self, LinearProgram, LpOutcome, Relation, Sense};
use crate::rational::{fmt_rational, int, one, zero, Rational};
use crate::setfn::{SetFunction, Subset};

pub(crate) const LABELS: usize = 128;

pub(crate) enum Halt {
    Infeasible(Subset),
    Error(GroupingError),
}

impl From<GroupingError> for Halt {
    fn from(e: GroupingError) -> Self {
        Halt::Error(e)
    }
}

type Run<T> = Result<T, Halt>;

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Checks {
    pub monotone: bool,
    pub submodular: bool,
}

/// `φ(A∖z) + dd(A∖z) + shift` on nonempty `A`, where
/// `φ(A) = F(base ∪ A) - F(base) - d(A)` for the parent function `F`.
struct Repair {
    parent: usize,
    parent_d: Arc<Vec<Rational>>,
    base: Subset,
    base_value: Rational,
    z: usize,
    dd: Arc<Vec<Rational>>,
    shift: Rational,
}

enum Func {
    Top,
    Repair(Arc<Repair>),
}

#[derive(Clone, Debug)]
pub(crate) struct Grp {
    pub lead: usize,
    pub subs: Vec<Vec<usize>>,
}

impl Grp {
    pub fn mask(&self) -> Subset {
        self.non_leads().chain([self.lead]).collect()
    }

    pub fn non_leads(&self) -> impl Iterator<Item = usize> + '_ {
        self.subs.iter().flatten().copied()
    }
}

pub(crate) struct Instance {
    fid: usize,
    base: Subset,
    ground: Subset,
    d: Arc<Vec<Rational>>,
    pub groups: Vec<Grp>,
    top: bool,
}

impl Instance {
    fn prefix(&self, i: usize) -> Subset {
        self.groups[..i]
            .iter()
            .fold(Subset::EMPTY, |acc, g| acc.union(g.mask()))
    }
}

pub(crate) struct Engine<'f> {
    top: &'f dyn SetFunction,
    funcs: Vec<Func>,
    caches: Vec<HashMap<u128, Rational>>,
    verdicts: HashMap<(usize, u128, u128), Option<Subset>>,
    pub stats: Stats,
    pub trace: Option<Vec<TraceEvent>>,
    checks: Checks,
    audit: bool,
    rounds: u64,
    round_limit: u64,
}

fn dsum(d: &[Rational], set: Subset) -> Rational {
    set.iter().fold(zero(), |acc, i| acc + &d[i])
}

fn s(v: &Rational) -> String {
    fmt_rational(v)
}

impl<'f> Engine<'f> {
    pub fn new(top: &'f dyn SetFunction, n: usize, checks: Checks, trace: bool, audit: bool) -> Self {
        let n = n as u64;
        Engine {
            top,
            funcs: vec![Func::Top],
            caches: vec![HashMap::new()],
            verdicts: HashMap::new(),
            stats: Stats::default(),
            trace: trace.then(Vec::new),
            checks,
            audit,
            rounds: 0,
            round_limit: 100_000 + 200 * n * n * n * n,
        }
    }

    pub fn top_instance(&self, ground: Subset, d: Vec<Rational>) -> Instance {
        let mut padded = d;
        padded.resize(LABELS, zero());
        Instance {
            fid: 0,
            base: Subset::EMPTY,
            ground,
            d: Arc::new(padded),
            groups: Vec::new(),
            top: true,
        }
    }

    pub fn top_fn(&self) -> &'f dyn SetFunction {
        self.top
    }

    pub fn eval_top(&mut self, set: Subset) -> Rational {
        self.eval(0, set)
    }

    fn eval(&mut self, fid: usize, set: Subset) -> Rational {
        if let Some(v) = self.caches[fid].get(&set.0) {
            return v.clone();
        }
        let v = match &self.funcs[fid] {
            Func::Top => {
                self.stats.oracle_calls += 1;
                self.top.eval(set)
            }
            Func::Repair(r) => {
                let r = Arc::clone(r);
                if set.is_empty() {
                    zero()
                } else {
                    let a = set.without(r.z);
                    let inner = self.eval(r.parent, r.base.union(a));
                    inner - &r.base_value - dsum(&r.parent_d, a) + dsum(&r.dd, a) + &r.shift
                }
            }
        };
        self.caches[fid].insert(set.0, v.clone());
        v
    }

    fn fb(&mut self, inst: &Instance, set: Subset) -> Rational {
        self.eval(inst.fid, inst.base.union(set))
    }

    fn emit(&mut self, inst: &Instance, event: impl FnOnce() -> TraceEvent) {
        if inst.top {
            if let Some(t) = self.trace.as_mut() {
                t.push(event());
            }
        }
    }

    fn tick(&mut self) -> Run<()> {
        self.rounds += 1;
        if self.rounds > self.round_limit {
            return Err(GroupingError::Inconsistent(
                "structure did not stabilize; the rank function is likely not submodular".into(),
            )
            .into());
        }
        Ok(())
    }

    /// Inserts the elements of `order` one at a time.
    pub fn run(&mut self, inst: &mut Instance, order: &[usize]) -> Run<()> {
        for &e in order {
            self.emit(inst, || TraceEvent::Insert { element: e });
            let gain = self.fb(inst, Subset::singleton(e)) - self.fb(inst, Subset::EMPTY);
            if inst.top && self.checks.monotone && gain < zero() {
                return Err(GroupingError::NotAPolymatroid(PolymatroidViolation::Decreasing {
                    set: Subset::EMPTY,
                    element: e,
                })
                .into());
            }
            if inst.d[e] > gain {
                return Err(Halt::Infeasible(Subset::singleton(e)));
            }
            self.step1(inst, e)?;
            self.fix(inst)?;
        }
        Ok(())
    }

    fn step1(&mut self, inst: &mut Instance, e: usize) -> Run<()> {
        let de = inst.d[e].clone();
        let mut upper: Option<Rational> = None;
        for i in (1..=inst.groups.len()).rev() {
            let a = inst.prefix(i - 1);
            let b = inst.prefix(i);
            let fa = self.fb(inst, a);
            let fae = self.fb(inst, a.with(e));
            let gain_a = &fae - &fa;
            if inst.top && self.checks.monotone && gain_a < zero() {
                return Err(GroupingError::NotAPolymatroid(PolymatroidViolation::Decreasing {
                    set: a,
                    element: e,
                })
                .into());
            }
            let moves = &fa + &de <= fae;
            let (positive, gain_b) = if moves {
                let fbv = self.fb(inst, b);
                let fbe = self.fb(inst, b.with(e));
                let gain_b = &fbe - &fbv;
                (&fbv + &de > fbe, Some(gain_b))
            } else {
                (false, upper.take())
            };
            if inst.top && self.checks.submodular {
                if let Some(gb) = &gain_b {
                    if gain_a < *gb {
                        return Err(GroupingError::NotAPolymatroid(
                            PolymatroidViolation::NotSubmodular {
                                smaller: a,
                                larger: b,
                                element: e,
                            },
                        )
                        .into());
                    }
                }
            }
            upper = Some(gain_a.clone());
            self.emit(inst, || TraceEvent::Step1 {
                element: e,
                group: i,
                gain_before: s(&gain_a),
                gain_after: gain_b.as_ref().map(s),
                bound: s(&de),
                moves,
                positive,
            });
            if moves && positive {
                return self.step2(inst, e, i - 1).map(|_| ());
            }
        }
        inst.groups.push(Grp {
            lead: e,
            subs: Vec::new(),
        });
        let group = inst.groups.len();
        if inst.top {
            self.stats.positions_opened += 1;
        }
        self.emit(inst, || TraceEvent::NewGroup { element: e, group });
        Ok(())
    }

    fn step2(&mut self, inst: &mut Instance, e: usize, gi: usize) -> Run<usize> {
        let de = inst.d[e].clone();
        let mut qs = vec![inst.prefix(gi)];
        for sub in &inst.groups[gi].subs {
            let last = *qs.last().unwrap();
            qs.push(sub.iter().fold(last, |acc, &k| acc.with(k)));
        }
        let len = inst.groups[gi].subs.len();
        let mut jj = 0;
        for j in (0..=len).rev() {
            let q = qs[j];
            if self.fb(inst, q) + &de <= self.fb(inst, q.with(e)) {
                jj = j;
                break;
            }
        }
        let new_sub = jj == len || {
            let qe = qs[jj].with(e);
            let fqe = self.fb(inst, qe);
            let members = inst.groups[gi].subs[jj].clone();
            let mut all = true;
            for k in members {
                if &fqe + &inst.d[k] > self.fb(inst, qe.with(k)) {
                    all = false;
                    break;
                }
            }
            all
        };
        if new_sub {
            if inst.top {
                self.stats.positions_opened += 1;
            }
            inst.groups[gi].subs.insert(jj, vec![e]);
        } else {
            inst.groups[gi].subs[jj].push(e);
        }
        self.emit(inst, || TraceEvent::Step2 {
            element: e,
            group: gi + 1,
            subgroup: jj + 1,
            new_subgroup: new_sub,
        });
        Ok(jj)
    }

    fn record_move(&mut self, inst: &Instance, element: usize, from: (usize, Option<usize>), to: (usize, usize)) {
        self.stats.moves += 1;
        if inst.top && self.audit {
            self.stats.move_log.push(MoveRecord {
                element,
                from_group: from.0,
                from_subgroup: from.1,
                to_group: to.0,
                to_subgroup: to.1,
            });
        }
    }

    fn fix(&mut self, inst: &mut Instance) -> Run<()> {
        'outer: loop {
            self.tick()?;
            for gi in 0..inst.groups.len() {
                let b0 = inst.prefix(gi);
                let mut q = b0;
                for j in 0..inst.groups[gi].subs.len() {
                    let members = inst.groups[gi].subs[j].clone();
                    let verdict = self.member(inst.fid, &inst.d, inst.base.union(q), &members)?;
                    self.emit(inst, || TraceEvent::Step3 {
                        group: gi + 1,
                        subgroup: j + 1,
                        members: members.clone(),
                        accepted: verdict.is_none(),
                    });
                    let Some(witness) = verdict else {
                        q = members.iter().fold(q, |acc, &k| acc.with(k));
                        continue;
                    };
                    if j > 0 {
                        let moved = inst.groups[gi].subs.remove(j);
                        for &k in &moved {
                            self.record_move(inst, k, (gi, Some(j)), (gi, j - 1));
                        }
                        self.emit(inst, || TraceEvent::Step4 {
                            action: "merge-subgroup",
                            group: gi + 1,
                            subgroup: Some(j + 1),
                            moved: moved.clone(),
                        });
                        inst.groups[gi].subs[j - 1].extend(moved);
                    } else if gi == 0 {
                        return Err(Halt::Infeasible(witness));
                    } else {
                        self.repair_group(inst, gi, b0)?;
                    }
                    continue 'outer;
                }
                let after = inst.prefix(gi + 1);
                let h_after = self.fb(inst, after) - self.fb(inst, Subset::EMPTY) - dsum(&inst.d, after);
                let h_before = self.fb(inst, b0) - self.fb(inst, Subset::EMPTY) - dsum(&inst.d, b0);
                if h_after < h_before {
                    if gi == 0 {
                        return Err(Halt::Infeasible(after));
                    }
                    let g = inst.groups.remove(gi);
                    let members: Vec<usize> = [g.lead].into_iter().chain(g.non_leads()).collect();
                    self.emit(inst, || TraceEvent::Step4 {
                        action: "dissolve-group",
                        group: gi + 1,
                        subgroup: None,
                        moved: members.clone(),
                    });
                    for &k in &members {
                        let from = g.subs.iter().position(|s| s.contains(&k));
                        let to = self.step2(inst, k, gi - 1)?;
                        self.record_move(inst, k, (gi, from), (gi - 1, to));
                    }
                    continue 'outer;
                }
            }
            return Ok(());
        }
    }

    /// Moves the minimal minimizer of the group's slack out of group `gi`.
    fn repair_group(&mut self, inst: &mut Instance, gi: usize, b0: Subset) -> Run<()> {
        let s: Vec<usize> = inst.groups[gi].non_leads().collect();
        let used = inst.base.union(inst.ground);
        let a = self.minimal_minimizer(inst.fid, &inst.d, inst.base.union(b0), &s, used)?;
        let moved: Vec<usize> = s.iter().copied().filter(|&k| a.contains(k)).collect();
        if moved.is_empty() {
            return Err(GroupingError::Inconsistent(
                "an invalid subgroup admits no improving set; the rank function is likely not submodular".into(),
            )
            .into());
        }
        let origins: Vec<Option<usize>> = moved
            .iter()
            .map(|k| inst.groups[gi].subs.iter().position(|s| s.contains(k)))
            .collect();
        for sub in inst.groups[gi].subs.iter_mut() {
            sub.retain(|k| !a.contains(*k));
        }
        inst.groups[gi].subs.retain(|sub| !sub.is_empty());
        self.emit(inst, || TraceEvent::Step4 {
            action: "repair",
            group: gi + 1,
            subgroup: None,
            moved: moved.clone(),
        });
        for (&k, &from) in moved.iter().zip(&origins) {
            let to = self.step2(inst, k, gi - 1)?;
            self.record_move(inst, k, (gi, from), (gi - 1, to));
        }
        Ok(())
    }

    /// Validates that `d` restricted to `members` lies in the polymatroid
    /// of `F(base ∪ ·) - F(base)`. Returns a violated set relative to
    /// `base`, or `None` when the bounds fit.
    fn member(
        &mut self,
        fid: usize,
        d: &Arc<Vec<Rational>>,
        base: Subset,
        members: &[usize],
    ) -> Run<Option<Subset>> {
        let set: Subset = members.iter().copied().collect();
        let key = (fid, base.0, set.0);
        if let Some(v) = self.verdicts.get(&key) {
            return Ok(*v);
        }
        self.stats.validations += 1;
        let f_base = self.eval(fid, base);
        let capacity = self.eval(fid, base.union(set)) - &f_base;
        let reduced = self.reduced_lp(members, d, &capacity);
        let mut witness = (!reduced).then_some(set);
        if witness.is_none() && members.len() >= 2 {
            for &k in members {
                if d[k] > self.eval(fid, base.with(k)) - &f_base {
                    witness = Some(Subset::singleton(k));
                    break;
                }
            }
        }
        if witness.is_none() && members.len() >= 3 {
            self.stats.exact_membership_runs += 1;
            let mut sub = Instance {
                fid,
                base,
                ground: set,
                d: Arc::clone(d),
                groups: Vec::new(),
                top: false,
            };
            match self.run(&mut sub, members) {
                Ok(()) => {}
                Err(Halt::Infeasible(w)) => witness = Some(w),
                Err(e) => return Err(e),
            }
        }
        if self.audit && fid == 0 && members.len() <= 10 {
            self.stats.step3_log.push(Step3Record {
                base,
                members: members.to_vec(),
                reduced_feasible: reduced,
                accepted: witness.is_none(),
            });
        }
        self.verdicts.insert(key, witness);
        Ok(witness)
    }

    /// The reduced membership test: side constraints plus the full-set
    /// row, decided through the dual with one variable per row. The dual
    /// is always feasible, so the primal is infeasible exactly when the
    /// dual is unbounded.
    fn reduced_lp(&mut self, members: &[usize], d: &[Rational], capacity: &Rational) -> bool {
        let l = members.len();
        let mut objective = vec![-capacity.clone()];
        objective.extend(members.iter().map(|&k| d[k].clone()));
        let mut lp = LinearProgram::new(Sense::Maximize, objective);
        for (t, _) in members.iter().enumerate() {
            let mut row = vec![zero(); l + 1];
            row[0] = int(-1);
            row[t + 1] = one();
            let c = if t == 0 { one() } else { zero() };
            lp.constrain(row, Relation::Eq, c);
        }
        let outcome = lpcore::solve(&lp).expect("well-formed reduced program");
        self.stats.lp_solves += 1;
        self.stats.lp_pivots += outcome.pivots() as u64;
        !matches!(outcome, LpOutcome::Unbounded { .. })
    }

    /// Least minimizer of `φ(A) = F(p ∪ A) - F(p) - d(A)` over `A ⊆ s`,
    /// found by one engine run on an auxiliary polymatroid over the kept
    /// elements plus a fresh label `z` that takes the first group.
    fn minimal_minimizer(
        &mut self,
        fid: usize,
        d: &Arc<Vec<Rational>>,
        p: Subset,
        s: &[usize],
        used: Subset,
    ) -> Run<Subset> {
        self.stats.repairs += 1;
        let fp = self.eval(fid, p);
        let sm: Subset = s.iter().copied().collect();
        let phi_s = self.eval(fid, p.union(sm)) - &fp - dsum(d, sm);
        let mut dd = vec![zero(); LABELS];
        let mut keep = Vec::new();
        let mut total = zero();
        for &k in s {
            let a = sm.without(k);
            let v = self.eval(fid, p.union(a)) - &fp - dsum(d, a) - &phi_s;
            if !v.is_negative() {
                total += &v;
                dd[k] = v;
                keep.push(k);
            }
        }
        let z = match used.lowest_free() {
            Some(z) if z < LABELS => z,
            _ => {
                return Err(GroupingError::Inconsistent("no free label for the auxiliary element".into()).into())
            }
        };
        let mz = &total + one();
        dd[z] = mz.clone();
        let shift = &mz + &total + one();
        let dd = Arc::new(dd);
        let nf = self.funcs.len();
        self.funcs.push(Func::Repair(Arc::new(Repair {
            parent: fid,
            parent_d: Arc::clone(d),
            base: p,
            base_value: fp,
            z,
            dd: Arc::clone(&dd),
            shift,
        })));
        self.caches.push(HashMap::new());
        let order: Vec<usize> = [z].into_iter().chain(keep.iter().copied()).collect();
        let mut inst = Instance {
            fid: nf,
            base: Subset::EMPTY,
            ground: order.iter().copied().collect(),
            d: dd,
            groups: Vec::new(),
            top: false,
        };
        let result = self.run(&mut inst, &order);
        self.caches[nf] = HashMap::new();
        match result {
            Ok(()) => Ok(inst.groups[0].mask().without(z)),
            Err(Halt::Infeasible(_)) => Err(GroupingError::Inconsistent(
                "auxiliary minimization instance reported infeasible bounds".into(),
            )
            .into()),
            Err(e) => Err(e),
        }
    }
}
