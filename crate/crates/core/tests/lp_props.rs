use proptest::prelude::*;

use polyside::lpcore::{dual_feasible, dual_objective, solve, LinearProgram, LpOutcome, Relation, Sense};
use polyside::rational::{int, zero, Rational};

/// Solves a square system exactly; `None` when singular.
fn solve_square(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| a[r][col] != zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col && a[r][col] != zero() {
                let factor = &a[r][col] / &a[col][col];
                for k in col..n {
                    let v = &factor * &a[col][k];
                    a[r][k] -= v;
                }
                let v = &factor * &b[col];
                b[r] -= v;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Best objective over basic feasible solutions, `None` if none exist.
fn best_vertex(lp: &LinearProgram) -> Option<Rational> {
    let n = lp.num_vars();
    let mut rows: Vec<(Vec<Rational>, Rational)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.rhs.clone()))
        .collect();
    for i in 0..n {
        let mut e = vec![zero(); n];
        e[i] = int(1);
        rows.push((e, zero()));
    }
    let mut best: Option<Rational> = None;
    let m = rows.len();
    let mut pick: Vec<usize> = (0..n).collect();
    if n > m {
        return None;
    }
    loop {
        let a = pick.iter().map(|&r| rows[r].0.clone()).collect();
        let b = pick.iter().map(|&r| rows[r].1.clone()).collect();
        if let Some(x) = solve_square(a, b) {
            if lp.satisfied_by(&x) {
                let v = lp.objective_value(&x);
                let better = match (&best, lp.sense) {
                    (None, _) => true,
                    (Some(b), Sense::Maximize) => v > *b,
                    (Some(b), Sense::Minimize) => v < *b,
                };
                if better {
                    best = Some(v);
                }
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn small_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..=6, 1usize..=8, any::<bool>()).prop_flat_map(|(n, m, maximize)| {
        let row = (
            prop::collection::vec(-4i64..=4, n),
            prop_oneof![4 => Just(Relation::Le), 2 => Just(Relation::Ge), 1 => Just(Relation::Eq)],
            -3i64..=12,
        );
        (prop::collection::vec(-5i64..=5, n), prop::collection::vec(row, m)).prop_map(move |(c, rows)| {
            let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
            let mut lp = LinearProgram::new(sense, c.into_iter().map(int).collect());
            for (coeffs, rel, rhs) in rows {
                lp.constrain(coeffs.into_iter().map(int).collect(), rel, int(rhs));
            }
            lp
        })
    })
}

fn ray_improves(lp: &LinearProgram, point: &[Rational], direction: &[Rational]) -> bool {
    let gain: Rational = lp.objective.iter().zip(direction).map(|(c, d)| c * d).sum();
    let improving = match lp.sense {
        Sense::Maximize => gain > zero(),
        Sense::Minimize => gain < zero(),
    };
    let stays = (1..=3).all(|t| {
        let x: Vec<Rational> = point.iter().zip(direction).map(|(p, d)| p + int(t * 1000) * d).collect();
        lp.satisfied_by(&x)
    });
    improving && stays && lp.satisfied_by(point)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn simplex_agrees_with_vertex_enumeration(lp in small_lp()) {
        let best = best_vertex(&lp);
        match solve(&lp).unwrap() {
            LpOutcome::Optimal { point, value, duals, .. } => {
                prop_assert!(lp.satisfied_by(&point));
                prop_assert_eq!(lp.objective_value(&point), value.clone());
                prop_assert!(dual_feasible(&lp, &duals));
                prop_assert_eq!(dual_objective(&lp, &duals), value.clone());
                prop_assert_eq!(best, Some(value));
            }
            LpOutcome::Infeasible { farkas, .. } => {
                prop_assert!(farkas.verify(&lp));
                prop_assert_eq!(best, None);
            }
            LpOutcome::Unbounded { point, direction, .. } => {
                prop_assert!(ray_improves(&lp, &point, &direction));
                prop_assert!(best.is_some());
            }
        }
    }
}
