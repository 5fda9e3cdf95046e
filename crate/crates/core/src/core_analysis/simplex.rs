//! Primal simplex in exact rational arithmetic with Bland's rule, for
//! `max c·x  s.t.  A x ≤ b,  x ≥ 0` with `b ≥ 0` (the slack basis is feasible).

use num_rational::BigRational;
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, PartialEq)]
pub struct RationalOptimum {
    pub x: Vec<BigRational>,
    /// Optimal dual prices of the rows (nonnegative).
    pub duals: Vec<BigRational>,
    pub objective: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RationalOutcome {
    Optimal(RationalOptimum),
    Unbounded,
}

/// `a` is row-major `m × n`.
pub fn maximize(c: &[BigRational], a: &[Vec<BigRational>], b: &[BigRational]) -> RationalOutcome {
    let m = a.len();
    let n = c.len();
    assert!(
        b.iter().all(|x| !x.is_negative()),
        "right-hand sides must be nonnegative"
    );
    let cols = n + m;
    // tableau rows: [A | I | b]
    let mut t: Vec<Vec<BigRational>> = (0..m)
        .map(|r| {
            let mut row = Vec::with_capacity(cols + 1);
            row.extend(a[r].iter().cloned());
            for k in 0..m {
                row.push(if k == r {
                    BigRational::from_integer(1.into())
                } else {
                    BigRational::zero()
                });
            }
            row.push(b[r].clone());
            row
        })
        .collect();
    // reduced costs of the minimisation of -c·x; last entry is the objective of max
    let mut d: Vec<BigRational> = (0..=cols)
        .map(|j| if j < n { -c[j].clone() } else { BigRational::zero() })
        .collect();
    let mut basis: Vec<usize> = (n..cols).collect();

    while let Some(enter) = (0..cols).find(|&j| d[j].is_negative()) {
        let mut leave: Option<(usize, BigRational)> = None;
        for r in 0..m {
            if t[r][enter].is_positive() {
                let ratio = &t[r][cols] / &t[r][enter];
                let take = match &leave {
                    None => true,
                    Some((lr, lratio)) => ratio < *lratio || (ratio == *lratio && basis[r] < basis[*lr]),
                };
                if take {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            return RationalOutcome::Unbounded;
        };
        let p = t[r][enter].clone();
        for v in t[r].iter_mut() {
            *v = &*v / &p;
        }
        let prow = t[r].clone();
        for (k, row) in t.iter_mut().enumerate() {
            if k == r || row[enter].is_zero() {
                continue;
            }
            let f = row[enter].clone();
            for (v, pv) in row.iter_mut().zip(&prow) {
                *v -= &f * pv;
            }
        }
        if !d[enter].is_zero() {
            let f = d[enter].clone();
            for (v, pv) in d.iter_mut().zip(&prow) {
                *v -= &f * pv;
            }
        }
        basis[r] = enter;
    }

    let mut x = vec![BigRational::zero(); n];
    for (r, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[r][cols].clone();
        }
    }
    let duals = (0..m).map(|k| d[n + k].clone()).collect();
    RationalOptimum {
        objective: d[cols].clone(),
        x,
        duals,
    }
    .into()
}

impl From<RationalOptimum> for RationalOutcome {
    fn from(o: RationalOptimum) -> Self {
        RationalOutcome::Optimal(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn textbook_program() {
        // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  → (2, 6), 36
        let c = vec![r(3, 1), r(5, 1)];
        let a = vec![
            vec![r(1, 1), r(0, 1)],
            vec![r(0, 1), r(2, 1)],
            vec![r(3, 1), r(2, 1)],
        ];
        let b = vec![r(4, 1), r(12, 1), r(18, 1)];
        let RationalOutcome::Optimal(o) = maximize(&c, &a, &b) else {
            panic!("expected optimum")
        };
        assert_eq!(o.x, vec![r(2, 1), r(6, 1)]);
        assert_eq!(o.objective, r(36, 1));
        // complementary slackness: y = (0, 3/2, 1)
        assert_eq!(o.duals, vec![r(0, 1), r(3, 2), r(1, 1)]);
    }

    #[test]
    fn unbounded() {
        let c = vec![r(1, 1), r(1, 1)];
        let a = vec![vec![r(1, 1), r(-1, 1)]];
        let b = vec![r(1, 1)];
        assert_eq!(maximize(&c, &a, &b), RationalOutcome::Unbounded);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under Dantzig's rule
        let c = vec![r(3, 4), r(-150, 1), r(1, 50), r(-6, 1)];
        let a = vec![
            vec![r(1, 4), r(-60, 1), r(-1, 25), r(9, 1)],
            vec![r(1, 2), r(-90, 1), r(-1, 50), r(3, 1)],
            vec![r(0, 1), r(0, 1), r(1, 1), r(0, 1)],
        ];
        let b = vec![r(0, 1), r(0, 1), r(1, 1)];
        let RationalOutcome::Optimal(o) = maximize(&c, &a, &b) else {
            panic!("expected optimum")
        };
        assert_eq!(o.objective, r(1, 20));
    }
}
