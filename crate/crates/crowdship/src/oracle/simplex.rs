//! A dense two-phase primal simplex for small linear programs of the form
//! min c.x subject to A.x <= b, x >= 0 (b of any sign).
//!
//! Bland's rule on both the entering and leaving choice guarantees
//! termination. Intended for oracle-sized instances (tens of variables), not
//! production use.

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-9;

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let factor = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= factor;
        }
        self.rhs[row] /= factor;
        let pivot_row = self.rows[row].clone();
        let pivot_rhs = self.rhs[row];
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let scale = self.rows[i][col];
            if scale.abs() < EPS {
                continue;
            }
            for j in 0..self.cols {
                self.rows[i][j] -= scale * pivot_row[j];
            }
            self.rhs[i] -= scale * pivot_rhs;
        }
        self.basis[row] = col;
    }

    /// Minimize `cost` over the current basis; `allowed` masks usable columns.
    /// Returns false when unbounded.
    fn run(&mut self, cost: &[f64], allowed: &[bool]) -> bool {
        loop {
            // reduced costs for the current basis
            let mut reduced = cost.to_vec();
            for (i, &b) in self.basis.iter().enumerate() {
                let cb = cost[b];
                if cb.abs() < EPS {
                    continue;
                }
                for j in 0..self.cols {
                    reduced[j] -= cb * self.rows[i][j];
                }
            }
            // Bland: the lowest-index improving column
            let mut entering = None;
            for (j, &ok) in allowed.iter().enumerate() {
                if ok && reduced[j] < -EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return true;
            };
            // ratio test, ties by lowest basis index
            let mut leaving: Option<(f64, usize, usize)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > EPS {
                    let ratio = self.rhs[i] / a;
                    let better = match &leaving {
                        None => true,
                        Some((r, _, bix)) => {
                            ratio < r - EPS || (ratio < r + EPS && self.basis[i] < *bix)
                        }
                    };
                    if better {
                        leaving = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            let Some((_, row, _)) = leaving else {
                return false;
            };
            self.pivot(row, col);
        }
    }
}

/// Solve min c.x s.t. A.x <= b, x >= 0.
pub fn solve_min_lp(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    // columns: n structural + m slack + up to m artificial
    let mut need_artificial = Vec::new();
    for (i, &bi) in b.iter().enumerate() {
        if bi < 0.0 {
            need_artificial.push(i);
        }
    }
    let cols = n + m + need_artificial.len();
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art_ix = n + m;
    for i in 0..m {
        let mut row = vec![0.0; cols];
        let negate = b[i] < 0.0;
        for j in 0..n {
            row[j] = if negate { -a[i][j] } else { a[i][j] };
        }
        row[n + i] = if negate { -1.0 } else { 1.0 };
        rhs.push(b[i].abs());
        if negate {
            row[art_ix] = 1.0;
            basis.push(art_ix);
            art_ix += 1;
        } else {
            basis.push(n + i);
        }
        rows.push(row);
    }
    let mut t = Tableau { rows, rhs, basis, cols };

    if !need_artificial.is_empty() {
        let mut phase1 = vec![0.0; cols];
        for j in (n + m)..cols {
            phase1[j] = 1.0;
        }
        let allowed = vec![true; cols];
        if !t.run(&phase1, &allowed) {
            return LpOutcome::Infeasible;
        }
        let obj1: f64 = t
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= n + m)
            .map(|(i, _)| t.rhs[i])
            .sum();
        if obj1 > 1e-7 {
            return LpOutcome::Infeasible;
        }
        // drive any zero-level artificial out of the basis
        for i in 0..t.rows.len() {
            if t.basis[i] >= n + m {
                if let Some(col) = (0..n + m).find(|&j| t.rows[i][j].abs() > EPS) {
                    t.pivot(i, col);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(c);
    let mut allowed = vec![true; cols];
    for a in allowed.iter_mut().take(cols).skip(n + m) {
        *a = false;
    }
    if !t.run(&cost, &allowed) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &bix) in t.basis.iter().enumerate() {
        if bix < n {
            x[bix] = t.rhs[i];
        }
    }
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    LpOutcome::Optimal { x, objective }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_maximization_via_negated_cost() {
        // max x (i.e. min -x) s.t. x <= 5
        let out = solve_min_lp(&[-1.0], &[vec![1.0]], &[5.0]);
        match out {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 5.0).abs() < 1e-9);
                assert!((objective + 5.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn greater_equal_constraints_through_negative_rhs() {
        // min x1 + 2 x2 s.t. x1 + x2 >= 2  (written -x1 - x2 <= -2)
        let out = solve_min_lp(&[1.0, 2.0], &[vec![-1.0, -1.0]], &[-2.0]);
        match out {
            LpOutcome::Optimal { x, objective } => {
                assert!((objective - 2.0).abs() < 1e-9);
                assert!((x[0] - 2.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasibility() {
        // x <= 1 and x >= 3
        let out = solve_min_lp(&[1.0], &[vec![1.0], vec![-1.0]], &[1.0, -3.0]);
        assert_eq!(out, LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unboundedness() {
        // min -x with no cap
        let out = solve_min_lp(&[-1.0], &[vec![-1.0]], &[0.0]);
        assert_eq!(out, LpOutcome::Unbounded);
    }

    #[test]
    fn two_variable_transport_shape() {
        // route 2 units to the cheap sink: min 1*w1 + 3*w2 s.t. w1+w2 >= 2, w1 <= 1
        let out = solve_min_lp(
            &[1.0, 3.0],
            &[vec![-1.0, -1.0], vec![1.0, 0.0]],
            &[-2.0, 1.0],
        );
        match out {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 1.0).abs() < 1e-9);
                assert!((x[1] - 1.0).abs() < 1e-9);
                assert!((objective - 4.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }
}
