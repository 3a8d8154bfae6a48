//! Exact dense linear programming.
//!
//! Primal simplex in dictionary form with Bland's rule, so it always
//! terminates. Infeasibility comes with a Farkas certificate from the
//! auxiliary phase, unboundedness with a ray, and optimality with a dual
//! solution whose objective matches exactly.

use crate::rational::{zero, Rational};
use num_traits::{Signed, Zero};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<Rational>,
    pub upper: Vec<Option<Rational>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl LinearProgram {
    /// A program over `objective.len()` variables, each bounded below by zero.
    pub fn new(sense: Sense, objective: Vec<Rational>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            constraints: Vec::new(),
            lower: vec![zero(); n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "{n} variables but {} lower and {} upper bounds",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::DimensionMismatch(format!(
                    "row {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
        }
        Ok(())
    }

    /// `a·x` for row `i`.
    pub fn row_activity(&self, i: usize, x: &[Rational]) -> Rational {
        dot(&self.constraints[i].coeffs, x)
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        dot(&self.objective, x)
    }

    /// Exact feasibility of a point.
    pub fn satisfied_by(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars()
            && x.iter().zip(&self.lower).all(|(v, l)| v >= l)
            && x
                .iter()
                .zip(&self.upper)
                .all(|(v, u)| u.as_ref().is_none_or(|u| v <= u))
            && self.constraints.iter().all(|c| {
                let a = dot(&c.coeffs, x);
                match c.relation {
                    Relation::Le => a <= c.rhs,
                    Relation::Ge => a >= c.rhs,
                    Relation::Eq => a == c.rhs,
                }
            })
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .filter(|(x, _)| !x.is_zero())
        .fold(zero(), |acc, (x, y)| acc + x * y)
}

/// Multipliers for each constraint and each upper bound. At an optimum the
/// objective equals `Σ row·rhs + Σ upper·u + Σ reduced·lower`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub rows: Vec<Rational>,
    pub upper: Vec<Rational>,
    pub reduced: Vec<Rational>,
}

/// Proof that no point satisfies the constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct FarkasCertificate {
    pub rows: Vec<Rational>,
    pub upper: Vec<Rational>,
}

impl FarkasCertificate {
    /// Checks sign conditions, `g = Aᵀy + w ≥ 0`, and
    /// `yᵀb + wᵀu - gᵀl < 0`.
    pub fn verify(&self, lp: &LinearProgram) -> bool {
        let n = lp.num_vars();
        if self.rows.len() != lp.constraints.len() || self.upper.len() != n {
            return false;
        }
        for (y, c) in self.rows.iter().zip(&lp.constraints) {
            let ok = match c.relation {
                Relation::Le => !y.is_negative(),
                Relation::Ge => !y.is_positive(),
                Relation::Eq => true,
            };
            if !ok {
                return false;
            }
        }
        let mut bound = zero();
        for (j, w) in self.upper.iter().enumerate() {
            if w.is_negative() || (!w.is_zero() && lp.upper[j].is_none()) {
                return false;
            }
            if let Some(u) = &lp.upper[j] {
                bound += w * u;
            }
        }
        for (y, c) in self.rows.iter().zip(&lp.constraints) {
            bound += y * &c.rhs;
        }
        for j in 0..n {
            let mut g = self.upper[j].clone();
            for (y, c) in self.rows.iter().zip(&lp.constraints) {
                g += y * &c.coeffs[j];
            }
            if g.is_negative() {
                return false;
            }
            bound -= &g * &lp.lower[j];
        }
        bound.is_negative()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal {
        point: Vec<Rational>,
        value: Rational,
        duals: DualSolution,
        pivots: usize,
    },
    Infeasible {
        farkas: FarkasCertificate,
        pivots: usize,
    },
    /// `point + t·direction` stays feasible for all `t ≥ 0` while the
    /// objective improves without bound.
    Unbounded {
        point: Vec<Rational>,
        direction: Vec<Rational>,
        pivots: usize,
    },
}

impl LpOutcome {
    pub fn pivots(&self) -> usize {
        match self {
            LpOutcome::Optimal { pivots, .. }
            | LpOutcome::Infeasible { pivots, .. }
            | LpOutcome::Unbounded { pivots, .. } => *pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal { .. })
    }

    pub fn value(&self) -> Option<&Rational> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible { point: Vec<Rational>, pivots: usize },
    Infeasible { farkas: FarkasCertificate, pivots: usize },
}

/// Origin of a standardized row.
#[derive(Clone, Copy, Debug)]
enum RowSource {
    Constraint { index: usize, sign: i8 },
    Upper { var: usize },
}

/// `x_B = rhs - a · x_N`, objective `z = value + cost · x_N`.
struct Dictionary {
    a: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    cost: Vec<Rational>,
    value: Rational,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    pivots: usize,
}

impl Dictionary {
    fn pivot(&mut self, r: usize, s: usize) {
        self.pivots += 1;
        let ars = self.a[r][s].clone();
        let inv = ars.recip();
        let cols = self.nonbasic.len();
        {
            let row = &mut self.a[r];
            for j in 0..cols {
                if j != s && !row[j].is_zero() {
                    row[j] *= &inv;
                }
            }
            row[s] = inv.clone();
            self.rhs[r] *= &inv;
        }
        let pivot_row = self.a[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.a.len() {
            if i == r || self.a[i][s].is_zero() {
                continue;
            }
            let ais = self.a[i][s].clone();
            let row = &mut self.a[i];
            for j in 0..cols {
                if j != s && !pivot_row[j].is_zero() {
                    row[j] -= &ais * &pivot_row[j];
                }
            }
            row[s] = -(&ais * &inv);
            self.rhs[i] -= &ais * &pivot_rhs;
        }
        let cs = self.cost[s].clone();
        if !cs.is_zero() {
            for j in 0..cols {
                if j != s && !pivot_row[j].is_zero() {
                    self.cost[j] -= &cs * &pivot_row[j];
                }
            }
            self.cost[s] = -(&cs * &inv);
            self.value += &cs * &pivot_rhs;
        }
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[s]);
    }

    /// Bland's rule: lowest-index improving column, then lowest-index
    /// leaving variable among ratio ties. Returns the unbounded column.
    fn optimize(&mut self) -> Result<(), usize> {
        loop {
            let entering = (0..self.nonbasic.len())
                .filter(|&j| self.cost[j].is_positive())
                .min_by_key(|&j| self.nonbasic[j]);
            let Some(s) = entering else { return Ok(()) };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.a.len() {
                if !self.a[i][s].is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / &self.a[i][s];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < *br || (ratio == *br && self.basic[i] < self.basic[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, s),
                None => return Err(s),
            }
        }
    }
}

/// Constraints shifted to `x' = x - lower ≥ 0`, all rows in `≤` form.
struct Standard {
    n: usize,
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    sources: Vec<RowSource>,
}

fn standardize(lp: &LinearProgram) -> Standard {
    let n = lp.num_vars();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut sources = Vec::new();
    for (index, c) in lp.constraints.iter().enumerate() {
        let shifted = &c.rhs - dot(&c.coeffs, &lp.lower);
        let signs: &[i8] = match c.relation {
            Relation::Le => &[1],
            Relation::Ge => &[-1],
            Relation::Eq => &[1, -1],
        };
        for &sign in signs {
            if sign > 0 {
                rows.push(c.coeffs.clone());
                rhs.push(shifted.clone());
            } else {
                rows.push(c.coeffs.iter().map(|v| -v).collect());
                rhs.push(-shifted.clone());
            }
            sources.push(RowSource::Constraint { index, sign });
        }
    }
    for (var, u) in lp.upper.iter().enumerate() {
        if let Some(u) = u {
            let mut row = vec![zero(); n];
            row[var] = Rational::from_integer(1.into());
            rows.push(row);
            rhs.push(u - &lp.lower[var]);
            sources.push(RowSource::Upper { var });
        }
    }
    Standard {
        n,
        rows,
        rhs,
        sources,
    }
}

/// Multipliers of the standardized rows read off the objective row.
fn row_multipliers(dict: &Dictionary, n: usize, m: usize) -> Vec<Rational> {
    let mut y = vec![zero(); m];
    for (j, &var) in dict.nonbasic.iter().enumerate() {
        if var >= n && var < n + m {
            y[var - n] = -dict.cost[j].clone();
        }
    }
    y
}

fn fold_multipliers(
    std: &Standard,
    y: &[Rational],
    lp: &LinearProgram,
) -> (Vec<Rational>, Vec<Rational>) {
    let mut rows = vec![zero(); lp.constraints.len()];
    let mut upper = vec![zero(); lp.num_vars()];
    for (r, src) in std.sources.iter().enumerate() {
        match *src {
            RowSource::Constraint { index, sign } => {
                if sign > 0 {
                    rows[index] += &y[r];
                } else {
                    rows[index] -= &y[r];
                }
            }
            RowSource::Upper { var } => upper[var] += &y[r],
        }
    }
    (rows, upper)
}

fn point_of(dict: &Dictionary, lp: &LinearProgram) -> Vec<Rational> {
    let n = lp.num_vars();
    let mut x = lp.lower.clone();
    for (i, &var) in dict.basic.iter().enumerate() {
        if var < n {
            x[var] = &lp.lower[var] + &dict.rhs[i];
        }
    }
    x
}

enum PhaseOne {
    Feasible(Dictionary),
    Infeasible(FarkasCertificate, usize),
}

/// Finds a feasible dictionary, or a Farkas certificate.
fn phase_one(lp: &LinearProgram, std: &Standard) -> PhaseOne {
    let n = std.n;
    let m = std.rows.len();
    let needs_aux = std.rhs.iter().any(|b| b.is_negative());
    let mut dict = Dictionary {
        a: std.rows.clone(),
        rhs: std.rhs.clone(),
        cost: vec![zero(); n],
        value: zero(),
        basic: (n..n + m).collect(),
        nonbasic: (0..n).collect(),
        pivots: 0,
    };
    if !needs_aux {
        return PhaseOne::Feasible(dict);
    }
    // auxiliary variable x0 = n + m with objective max -x0
    let aux = n + m;
    for row in dict.a.iter_mut() {
        row.push(Rational::from_integer((-1).into()));
    }
    dict.nonbasic.push(aux);
    dict.cost.push(Rational::from_integer((-1).into()));
    let s = n;
    let r = (0..m)
        .min_by(|&i, &k| {
            dict.rhs[i]
                .cmp(&dict.rhs[k])
                .then(dict.basic[i].cmp(&dict.basic[k]))
        })
        .expect("at least one row");
    dict.pivot(r, s);
    dict.optimize()
        .expect("auxiliary problem is bounded by zero");
    if dict.value.is_negative() {
        let y = row_multipliers(&dict, n, m);
        let (rows, upper) = fold_multipliers(std, &y, lp);
        let pivots = dict.pivots;
        return PhaseOne::Infeasible(FarkasCertificate { rows, upper }, pivots);
    }
    // drive the auxiliary variable out of the basis, then drop its column
    if let Some(r) = dict.basic.iter().position(|&v| v == aux) {
        let s = (0..dict.nonbasic.len())
            .filter(|&j| !dict.a[r][j].is_zero())
            .min_by_key(|&j| dict.nonbasic[j])
            .expect("a nonzero entry exists in the auxiliary row");
        dict.pivot(r, s);
    }
    let col = dict
        .nonbasic
        .iter()
        .position(|&v| v == aux)
        .expect("auxiliary variable is nonbasic");
    for row in dict.a.iter_mut() {
        row.remove(col);
    }
    dict.nonbasic.remove(col);
    dict.cost.remove(col);
    PhaseOne::Feasible(dict)
}

/// Installs the objective `max c·x'` on a feasible dictionary.
fn install_objective(dict: &mut Dictionary, c: &[Rational], n: usize) {
    dict.value = zero();
    dict.cost = dict
        .nonbasic
        .iter()
        .map(|&v| if v < n { c[v].clone() } else { zero() })
        .collect();
    for (i, &var) in dict.basic.iter().enumerate() {
        if var < n && !c[var].is_zero() {
            let cv = &c[var];
            dict.value += cv * &dict.rhs[i];
            for j in 0..dict.nonbasic.len() {
                if !dict.a[i][j].is_zero() {
                    dict.cost[j] -= cv * &dict.a[i][j];
                }
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let std = standardize(lp);
    let m = std.rows.len();
    let mut dict = match phase_one(lp, &std) {
        PhaseOne::Feasible(d) => d,
        PhaseOne::Infeasible(farkas, pivots) => {
            return Ok(LpOutcome::Infeasible { farkas, pivots })
        }
    };
    let sign = match lp.sense {
        Sense::Maximize => Rational::from_integer(1.into()),
        Sense::Minimize => Rational::from_integer((-1).into()),
    };
    let c: Vec<Rational> = lp.objective.iter().map(|v| v * &sign).collect();
    install_objective(&mut dict, &c, n);
    if let Err(s) = dict.optimize() {
        let point = point_of(&dict, lp);
        let mut direction = vec![zero(); n];
        let entering = dict.nonbasic[s];
        if entering < n {
            direction[entering] = Rational::from_integer(1.into());
        }
        for (i, &var) in dict.basic.iter().enumerate() {
            if var < n {
                direction[var] = -dict.a[i][s].clone();
            }
        }
        return Ok(LpOutcome::Unbounded {
            point,
            direction,
            pivots: dict.pivots,
        });
    }
    let point = point_of(&dict, lp);
    let value = lp.objective_value(&point);
    let y = row_multipliers(&dict, n, m);
    let (mut rows, mut upper) = fold_multipliers(&std, &y, lp);
    for v in rows.iter_mut().chain(upper.iter_mut()) {
        *v *= &sign;
    }
    let reduced = (0..n)
        .map(|j| {
            let mut r = lp.objective[j].clone() - &upper[j];
            for (yi, c) in rows.iter().zip(&lp.constraints) {
                r -= yi * &c.coeffs[j];
            }
            r
        })
        .collect();
    Ok(LpOutcome::Optimal {
        point,
        value,
        duals: DualSolution {
            rows,
            upper,
            reduced,
        },
        pivots: dict.pivots,
    })
}

/// Feasibility of the constraint system alone.
pub fn feasible(lp: &LinearProgram) -> Result<Feasibility, LpError> {
    lp.validate()?;
    let std = standardize(lp);
    Ok(match phase_one(lp, &std) {
        PhaseOne::Feasible(dict) => Feasibility::Feasible {
            point: point_of(&dict, lp),
            pivots: dict.pivots,
        },
        PhaseOne::Infeasible(farkas, pivots) => Feasibility::Infeasible { farkas, pivots },
    })
}

/// Dual objective `Σ row·rhs + Σ upper·u + Σ reduced·lower`.
pub fn dual_objective(lp: &LinearProgram, duals: &DualSolution) -> Rational {
    let mut v = zero();
    for (y, c) in duals.rows.iter().zip(&lp.constraints) {
        v += y * &c.rhs;
    }
    for (w, u) in duals.upper.iter().zip(&lp.upper) {
        if let Some(u) = u {
            v += w * u;
        }
    }
    for (r, l) in duals.reduced.iter().zip(&lp.lower) {
        v += r * l;
    }
    v
}

/// Sign conditions of an optimal dual for the program's sense.
pub fn dual_feasible(lp: &LinearProgram, duals: &DualSolution) -> bool {
    let max = lp.sense == Sense::Maximize;
    let nonneg = |v: &Rational| if max { !v.is_negative() } else { !v.is_positive() };
    let nonpos = |v: &Rational| if max { !v.is_positive() } else { !v.is_negative() };
    duals.rows.iter().zip(&lp.constraints).all(|(y, c)| match c.relation {
        Relation::Le => nonneg(y),
        Relation::Ge => nonpos(y),
        Relation::Eq => true,
    }) && duals
        .upper
        .iter()
        .zip(&lp.upper)
        .all(|(w, u)| nonneg(w) && (u.is_some() || w.is_zero()))
        && duals.reduced.iter().all(nonpos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn single(sense: Sense) -> LinearProgram {
        LinearProgram::new(sense, vec![int(1)])
    }

    #[test]
    fn max_x_below_one() {
        let mut lp = single(Sense::Maximize);
        lp.constrain(vec![int(1)], Relation::Le, int(1));
        match solve(&lp).unwrap() {
            LpOutcome::Optimal { point, value, duals, .. } => {
                assert_eq!(point, vec![int(1)]);
                assert_eq!(value, int(1));
                assert_eq!(dual_objective(&lp, &duals), int(1));
                assert!(dual_feasible(&lp, &duals));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = single(Sense::Maximize);
        lp.constrain(vec![int(1)], Relation::Ge, int(2));
        lp.constrain(vec![int(1)], Relation::Le, int(1));
        match solve(&lp).unwrap() {
            LpOutcome::Infeasible { farkas, .. } => assert!(farkas.verify(&lp)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(feasible(&lp).unwrap(), Feasibility::Infeasible { .. }));
    }

    #[test]
    fn feasibility_examples() {
        let mut lp = single(Sense::Maximize);
        lp.constrain(vec![int(1)], Relation::Le, int(1));
        assert!(matches!(feasible(&lp).unwrap(), Feasibility::Feasible { .. }));

        // three side bounds summing past the full-set capacity
        let mut lp = LinearProgram::new(Sense::Minimize, vec![int(1), int(0), int(0)]);
        for (i, d) in [rat(13, 20), rat(13, 20), rat(13, 20)].into_iter().enumerate() {
            let mut row = vec![int(0); 3];
            row[i] = int(1);
            lp.constrain(row, Relation::Ge, d);
        }
        lp.constrain(vec![int(1); 3], Relation::Le, rat(9, 5));
        match feasible(&lp).unwrap() {
            Feasibility::Infeasible { farkas, .. } => assert!(farkas.verify(&lp)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![int(1), int(1)]);
        lp.constrain(vec![int(1), int(-1)], Relation::Le, int(1));
        match solve(&lp).unwrap() {
            LpOutcome::Unbounded { point, direction, .. } => {
                assert!(lp.satisfied_by(&point));
                let far: Vec<Rational> =
                    point.iter().zip(&direction).map(|(p, d)| p + d * int(100)).collect();
                assert!(lp.satisfied_by(&far));
                assert!(lp.objective_value(&direction) > int(0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bounds_equalities_and_minimization() {
        // min 2a + b, a + b = 3, a >= 1/2, b <= 2
        let mut lp = LinearProgram::new(Sense::Minimize, vec![int(2), int(1)]);
        lp.lower[0] = rat(1, 2);
        lp.upper[1] = Some(int(2));
        lp.constrain(vec![int(1), int(1)], Relation::Eq, int(3));
        match solve(&lp).unwrap() {
            LpOutcome::Optimal { point, value, duals, .. } => {
                assert_eq!(point, vec![int(1), int(2)]);
                assert_eq!(value, int(4));
                assert_eq!(dual_objective(&lp, &duals), value);
                assert!(dual_feasible(&lp, &duals));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn subgroup_dual_is_bounded_when_bounds_fit() {
        // dual of: min x1 s.t. x(S) <= 1.4, x_k >= 0.65, reduced to the full-set row
        // variables (y_full, z1, z2); rows: z_k - y <= c_k
        let d = [rat(13, 20), rat(13, 20)];
        let g_full = rat(7, 5);
        let mut lp = LinearProgram::new(
            Sense::Maximize,
            vec![-g_full.clone(), d[0].clone(), d[1].clone()],
        );
        lp.constrain(vec![int(-1), int(1), int(0)], Relation::Le, int(1));
        lp.constrain(vec![int(-1), int(0), int(1)], Relation::Le, int(0));
        assert!(solve(&lp).unwrap().is_optimal());
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let mut lp = single(Sense::Maximize);
        lp.constrain(vec![int(1), int(2)], Relation::Le, int(1));
        assert!(matches!(solve(&lp), Err(LpError::DimensionMismatch(_))));
    }
}
