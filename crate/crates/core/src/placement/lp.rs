//! Dense two-phase primal simplex in floating point, used for the LP
//! relaxations inside branch-and-bound.

const COST_EPS: f64 = 1e-11;
const PIVOT_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-7;
const MAX_ITERATIONS: usize = 100_000;
/// Degenerate pivots tolerated under Dantzig's rule before switching to Bland's.
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn flipped(self) -> Sense {
        match self {
            Sense::Le => Sense::Ge,
            Sense::Ge => Sense::Le,
            Sense::Eq => Sense::Eq,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// One constraint: sparse coefficients, sense, right-hand side.
pub type Row = (Vec<(usize, f64)>, Sense, f64);

/// `minimize c·x  s.t.  rows,  lower ≤ x ≤ upper`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            rows: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push((coeffs, sense, rhs));
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).map_or(LpOutcome::Infeasible, |mut t| t.run(self))
    }
}

struct Tableau {
    m: usize,
    /// Structural columns.
    n: usize,
    cols: usize,
    /// Row-major `m × (cols + 1)`; last column is the right-hand side.
    a: Vec<f64>,
    basis: Vec<usize>,
    artificial: Vec<bool>,
}

impl Tableau {
    /// `None` when a bound pair is already contradictory.
    fn build(lp: &LinearProgram) -> Option<Tableau> {
        let n = lp.num_vars();
        let mut rows: Vec<Row> = Vec::with_capacity(lp.rows.len());
        for (coeffs, sense, rhs) in &lp.rows {
            let shift: f64 = coeffs.iter().map(|&(j, v)| v * lp.lower[j]).sum();
            rows.push((coeffs.clone(), *sense, rhs - shift));
        }
        for j in 0..n {
            if lp.upper[j].is_finite() {
                let span = lp.upper[j] - lp.lower[j];
                if span < -FEAS_EPS {
                    return None;
                }
                rows.push((vec![(j, 1.0)], Sense::Le, span.max(0.0)));
            }
        }
        for row in rows.iter_mut() {
            if row.2 < 0.0 {
                for c in row.0.iter_mut() {
                    c.1 = -c.1;
                }
                row.1 = row.1.flipped();
                row.2 = -row.2;
            }
        }
        let m = rows.len();
        let extra: usize = rows.iter().map(|r| if r.1 == Sense::Ge { 2 } else { 1 }).sum();
        let cols = n + extra;
        let w = cols + 1;
        let mut a = vec![0.0; m * w];
        let mut basis = vec![0; m];
        let mut artificial = vec![false; cols];
        let mut next = n;
        for (r, (coeffs, sense, rhs)) in rows.iter().enumerate() {
            for &(j, v) in coeffs {
                a[r * w + j] += v;
            }
            a[r * w + cols] = *rhs;
            match sense {
                Sense::Le => {
                    a[r * w + next] = 1.0;
                    basis[r] = next;
                    next += 1;
                }
                Sense::Ge => {
                    a[r * w + next] = -1.0;
                    a[r * w + next + 1] = 1.0;
                    artificial[next + 1] = true;
                    basis[r] = next + 1;
                    next += 2;
                }
                Sense::Eq => {
                    a[r * w + next] = 1.0;
                    artificial[next] = true;
                    basis[r] = next;
                    next += 1;
                }
            }
        }
        Some(Tableau {
            m,
            n,
            cols,
            a,
            basis,
            artificial,
        })
    }

    fn w(&self) -> usize {
        self.cols + 1
    }

    fn pivot(&mut self, r: usize, c: usize, d: &mut [f64]) {
        let w = self.w();
        let p = self.a[r * w + c];
        for k in 0..w {
            self.a[r * w + k] /= p;
        }
        let (before, rest) = self.a.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for k in 0..w {
                    row[k] -= f * prow[k];
                }
                row[c] = 0.0;
            }
        }
        let f = d[c];
        if f != 0.0 {
            for k in 0..w {
                d[k] -= f * prow[k];
            }
            d[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Reduced-cost row (last entry is minus the objective) for column costs `cost`.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let w = self.w();
        let mut d = vec![0.0; w];
        d[..self.cols].copy_from_slice(&cost[..self.cols]);
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (dk, a) in d.iter_mut().zip(&self.a[r * w..(r + 1) * w]) {
                    *dk -= cb * a;
                }
            }
        }
        d
    }

    /// Minimises over the current basis. `allowed(j)` filters entering columns.
    fn optimise(&mut self, d: &mut [f64], allowed: &dyn Fn(usize) -> bool) -> LpOutcome {
        let w = self.w();
        let mut degenerate = 0usize;
        for _ in 0..MAX_ITERATIONS {
            let bland = degenerate > DEGENERATE_SWITCH;
            let mut enter = None;
            let mut best = -COST_EPS;
            for (j, &dj) in d.iter().enumerate().take(self.cols) {
                if !allowed(j) || dj >= -COST_EPS {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if dj < best {
                    best = dj;
                    enter = Some(j);
                }
            }
            let Some(c) = enter else {
                return LpOutcome::Optimal {
                    x: Vec::new(),
                    objective: -d[self.cols],
                };
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let v = self.a[r * w + c];
                if v > PIVOT_EPS {
                    let ratio = self.a[r * w + self.cols] / v;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return LpOutcome::Unbounded;
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c, d);
        }
        LpOutcome::IterationLimit
    }

    fn run(&mut self, lp: &LinearProgram) -> LpOutcome {
        let w = self.w();
        // phase 1
        if self.artificial.iter().any(|&a| a) {
            let cost: Vec<f64> = self
                .artificial
                .iter()
                .map(|&a| if a { 1.0 } else { 0.0 })
                .collect();
            let mut d = self.reduced_costs(&cost);
            match self.optimise(&mut d, &|_| true) {
                LpOutcome::Optimal { objective, .. } if objective > FEAS_EPS => return LpOutcome::Infeasible,
                LpOutcome::Optimal { .. } => {}
                other => return other,
            }
            for r in 0..self.m {
                if !self.artificial[self.basis[r]] {
                    continue;
                }
                let col =
                    (0..self.cols).find(|&j| !self.artificial[j] && self.a[r * w + j].abs() > PIVOT_EPS);
                if let Some(c) = col {
                    self.pivot(r, c, &mut d);
                }
            }
        }
        // phase 2
        let mut cost = vec![0.0; self.cols];
        cost[..self.n].copy_from_slice(&lp.objective);
        let mut d = self.reduced_costs(&cost);
        let artificial = self.artificial.clone();
        match self.optimise(&mut d, &|j| !artificial[j]) {
            LpOutcome::Optimal { .. } => {}
            other => return other,
        }
        let mut x = lp.lower.clone();
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.n {
                x[b] += self.a[r * w + self.cols].max(0.0);
            }
        }
        let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal { x, objective }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn optimum(lp: &LinearProgram) -> (Vec<f64>, f64) {
        match lp.solve() {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn small_mixed_program() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.add_row(vec![(0, 1.0), (1, 2.0)], Sense::Le, 4.0);
        lp.add_row(vec![(0, 3.0), (1, 1.0)], Sense::Le, 6.0);
        let (x, z) = optimum(&lp);
        assert_relative_eq!(x[0], 1.6, epsilon = 1e-9);
        assert_relative_eq!(x[1], 1.2, epsilon = 1e-9);
        assert_relative_eq!(z, -2.8, epsilon = 1e-9);
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        // min x + 2y  s.t. x + y = 3, x >= 1, y >= 0.5, x <= 2
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 3.0);
        lp.add_row(vec![(1, 1.0)], Sense::Ge, 0.5);
        lp.lower[0] = 1.0;
        lp.upper[0] = 2.0;
        let (x, z) = optimum(&lp);
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-9);
        assert_relative_eq!(z, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row(vec![(0, 1.0)], Sense::Ge, 2.0);
        lp.upper[0] = 1.0;
        assert_eq!(lp.solve(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_row(vec![(0, 1.0), (1, -1.0)], Sense::Le, 1.0);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);

        let mut lp = LinearProgram::new(vec![1.0]);
        lp.lower[0] = 3.0;
        lp.upper[0] = 2.0;
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 2.0);
        lp.add_row(vec![(0, 2.0), (1, 2.0)], Sense::Eq, 4.0);
        let (_, z) = optimum(&lp);
        assert_relative_eq!(z, 2.0, epsilon = 1e-9);
    }
}
