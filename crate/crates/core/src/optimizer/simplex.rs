//! Dense-tableau simplex for `min cost·x` subject to `Ax = b`, `0 <= x <= u`.
//!
//! Nonbasic variables sit at either bound. Entering and leaving choices follow
//! Bland's rule (smallest index), which makes the method finite and
//! deterministic. Phase one drives artificial variables out of a crash basis;
//! phase two then optimizes the true cost with the artificials pinned at zero.

/// Pivot elements at or below this magnitude are treated as zero.
pub const PIVOT_TOL: f64 = 1e-9;
/// Reduced costs must be below `-OPT_TOL` to enter.
const OPT_TOL: f64 = 1e-9;
/// Phase-one objective above this means the constraints are infeasible.
const FEAS_TOL: f64 = 1e-8;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct Problem {
    /// Row-major constraint matrix, `rows x cols`.
    pub a: Vec<Vec<f64>>,
    /// Right-hand side; every entry must be non-negative.
    pub b: Vec<f64>,
    pub upper: Vec<f64>,
    /// Minimized.
    pub cost: Vec<f64>,
    /// Per row, a structural column to pivot into the starting basis.
    pub crash: Vec<Option<usize>>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `B^-1 [A | I]`, row-major.
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    upper: Vec<f64>,
    /// Reduced costs of the current phase.
    reduced: Vec<f64>,
}

enum Step {
    Optimal,
    Moved,
    Unbounded,
}

impl Tableau {
    fn new(p: &Problem) -> Tableau {
        let rows = p.b.len();
        let structural = p.upper.len();
        let cols = structural + rows;
        let mut t = vec![0.0; rows * cols];
        for (i, row) in p.a.iter().enumerate() {
            t[i * cols..i * cols + structural].copy_from_slice(row);
            t[i * cols + structural + i] = 1.0;
        }
        let mut state = vec![State::Lower; cols];
        state[structural..].fill(State::Basic);
        let mut upper = p.upper.clone();
        upper.extend(std::iter::repeat_n(f64::INFINITY, rows));
        Tableau {
            rows,
            cols,
            t,
            beta: p.b.clone(),
            basis: (structural..cols).collect(),
            state,
            upper,
            reduced: vec![0.0; cols],
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn value_at_rest(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Upper => self.upper[j],
            _ => 0.0,
        }
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (d, &a) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * a;
                }
            }
        }
    }

    /// Gauss-Jordan pivot on `(r, j)`, including the reduced-cost row.
    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let piv = self.at(r, j);
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        prow[j] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[j];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[j] = 0.0;
            }
        };
        before.chunks_exact_mut(cols).for_each(eliminate);
        after.chunks_exact_mut(cols).for_each(eliminate);
        eliminate(&mut self.reduced);
    }

    /// Moves entering column `j` into row `r` at value `value`; the
    /// departing variable rests at `leaving_state`.
    fn enter(&mut self, r: usize, j: usize, value: f64, leaving_state: State) {
        let leaving = self.basis[r];
        self.state[leaving] = leaving_state;
        self.state[j] = State::Basic;
        self.basis[r] = j;
        self.pivot(r, j);
        self.beta[r] = value;
    }

    /// Pivots the crash columns into the starting basis where that keeps
    /// every basic value within its bounds.
    fn crash(&mut self, crash: &[Option<usize>]) {
        for (r, j) in crash.iter().enumerate() {
            let Some(j) = *j else { continue };
            let piv = self.at(r, j);
            if piv.abs() <= PIVOT_TOL || self.state[j] == State::Basic {
                continue;
            }
            let value = self.beta[r] / piv;
            if !(0.0..=self.upper[j]).contains(&value) {
                continue;
            }
            let feasible = (0..self.rows).filter(|&i| i != r).all(|i| {
                let v = self.beta[i] - self.at(i, j) * value;
                v >= -FEAS_TOL && v <= self.upper[self.basis[i]] + FEAS_TOL
            });
            if !feasible {
                continue;
            }
            for i in 0..self.rows {
                if i != r {
                    self.beta[i] = (self.beta[i] - self.at(i, j) * value).max(0.0);
                }
            }
            self.enter(r, j, value, State::Lower);
        }
    }

    fn step(&mut self) -> Step {
        // Bland: the lowest-index improving column enters
        let entering = (0..self.cols).find_map(|j| match self.state[j] {
            State::Lower if self.upper[j] > 0.0 && self.reduced[j] < -OPT_TOL => Some((j, 1.0)),
            State::Upper if self.reduced[j] > OPT_TOL => Some((j, -1.0)),
            _ => None,
        });
        let Some((j, dir)) = entering else {
            return Step::Optimal;
        };

        let mut limit = self.upper[j];
        let mut leave: Option<(usize, State)> = None;
        for i in 0..self.rows {
            let a = self.at(i, j);
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let rate = dir * a;
            let (bound_gap, rest) = if rate > 0.0 {
                (self.beta[i].max(0.0), State::Lower)
            } else {
                let u = self.upper[self.basis[i]];
                if u.is_infinite() {
                    continue;
                }
                ((u - self.beta[i]).max(0.0), State::Upper)
            };
            let ratio = bound_gap / rate.abs();
            let better = match leave {
                _ if ratio < limit => true,
                Some((r, _)) => ratio == limit && self.basis[i] < self.basis[r],
                None => false,
            };
            if better {
                limit = ratio;
                leave = Some((i, rest));
            }
        }
        if limit.is_infinite() {
            return Step::Unbounded;
        }

        let shift = dir * limit;
        for i in 0..self.rows {
            let a = self.at(i, j);
            if a != 0.0 {
                self.beta[i] -= shift * a;
            }
        }
        match leave {
            None => {
                self.state[j] = if dir > 0.0 { State::Upper } else { State::Lower };
            }
            Some((r, rest)) => {
                let value = self.value_at_rest(j) + shift;
                self.enter(r, j, value, rest);
            }
        }
        Step::Moved
    }

    /// Runs the current phase; `Err` carries the terminal status.
    fn optimize(&mut self, iterations: &mut usize, cap: usize) -> Result<(), Status> {
        loop {
            if *iterations >= cap {
                return Err(Status::IterationLimit);
            }
            match self.step() {
                Step::Optimal => return Ok(()),
                Step::Moved => *iterations += 1,
                // all variables are bounded, so this only follows numeric breakdown
                Step::Unbounded => return Err(Status::IterationLimit),
            }
        }
    }

    fn values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.cols).map(|j| self.value_at_rest(j)).collect();
        for (i, &j) in self.basis.iter().enumerate() {
            x[j] = self.beta[i];
        }
        x
    }
}

/// Solves `B dx = rhs` for the columns of `a` named by `basis`.
fn solve_basis(a: &[Vec<f64>], basis: &[usize], structural: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let m = rhs.len();
    let mut mat: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = basis
                .iter()
                .map(|&j| {
                    if j < structural {
                        a[i][j]
                    } else if j - structural == i {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            row.push(rhs[i]);
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m).max_by(|&p, &q| mat[p][col].abs().total_cmp(&mat[q][col].abs()))?;
        if mat[piv][col].abs() <= PIVOT_TOL {
            return None;
        }
        mat.swap(col, piv);
        let (top, bottom) = mat.split_at_mut(col + 1);
        let prow = &top[col];
        for row in bottom.iter_mut() {
            let f = row[col] / prow[col];
            if f != 0.0 {
                for (v, p) in row[col..].iter_mut().zip(&prow[col..]) {
                    *v -= f * p;
                }
            }
        }
    }
    let mut out = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|k| mat[i][k] * out[k]).sum();
        out[i] = (mat[i][m] - s) / mat[i][i];
    }
    Some(out)
}

pub fn solve(p: &Problem, max_iterations: usize) -> Solution {
    let structural = p.upper.len();
    let rows = p.b.len();
    let mut tab = Tableau::new(p);
    tab.crash(&p.crash);
    // artificials that left the basis never return
    for j in structural..tab.cols {
        if tab.state[j] != State::Basic {
            tab.upper[j] = 0.0;
        }
    }

    let mut iterations = 0;
    let finish = |tab: &Tableau, status: Status, iterations: usize| Solution {
        x: tab.values()[..structural].to_vec(),
        status,
        iterations,
    };

    let mut phase_one = vec![0.0; tab.cols];
    phase_one[structural..].fill(1.0);
    tab.set_costs(&phase_one);
    if let Err(status) = tab.optimize(&mut iterations, max_iterations) {
        return finish(&tab, status, iterations);
    }
    let infeasibility: f64 = tab
        .basis
        .iter()
        .zip(&tab.beta)
        .filter(|(&j, _)| j >= structural)
        .map(|(_, &v)| v)
        .sum();
    if infeasibility > FEAS_TOL {
        return finish(&tab, Status::Infeasible, iterations);
    }
    for j in structural..tab.cols {
        tab.upper[j] = 0.0;
    }

    let mut phase_two = p.cost.clone();
    phase_two.resize(tab.cols, 0.0);
    tab.set_costs(&phase_two);
    if let Err(status) = tab.optimize(&mut iterations, max_iterations) {
        return finish(&tab, status, iterations);
    }

    // recompute basic values from the original data to shed pivot drift
    let mut x = tab.values();
    let residual: Vec<f64> = (0..rows)
        .map(|i| {
            let ax: f64 = (0..structural).map(|j| p.a[i][j] * x[j]).sum::<f64>() + x[structural + i];
            p.b[i] - ax
        })
        .collect();
    if residual.iter().any(|r| r.abs() > 1e-12) {
        if let Some(dx) = solve_basis(&p.a, &tab.basis, structural, &residual) {
            for (&j, d) in tab.basis.iter().zip(dx) {
                x[j] += d;
            }
        }
    }
    for (v, &u) in x.iter_mut().zip(&tab.upper).take(structural) {
        *v = v.clamp(0.0, u);
    }
    x.truncate(structural);
    Solution {
        x,
        status: Status::Optimal,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(a: Vec<Vec<f64>>, b: Vec<f64>, upper: Vec<f64>, cost: Vec<f64>) -> Problem {
        let rows = b.len();
        Problem {
            a,
            b,
            upper,
            cost,
            crash: vec![None; rows],
        }
    }

    #[test]
    fn bound_flip_only() {
        // min -x0 - x1, x0 + x1 + s = 3, all in [0, 1] except s in [0, 5]
        let p = problem(
            vec![vec![1.0, 1.0, 1.0]],
            vec![3.0],
            vec![1.0, 1.0, 5.0],
            vec![-1.0, -1.0, 0.0],
        );
        let s = solve(&p, 100);
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.x, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn detects_infeasibility() {
        let p = problem(vec![vec![1.0, 1.0]], vec![3.0], vec![1.0, 1.0], vec![0.0, 0.0]);
        assert_eq!(solve(&p, 100).status, Status::Infeasible);
    }

    #[test]
    fn textbook_equality_lp() {
        // max 3x + 2y s.t. x + y + s1 = 4, x + 3y + s2 = 6, x <= 3
        let p = problem(
            vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]],
            vec![4.0, 6.0],
            vec![3.0, 10.0, 10.0, 10.0],
            vec![-3.0, -2.0, 0.0, 0.0],
        );
        let s = solve(&p, 100);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_reported() {
        let p = problem(
            vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]],
            vec![4.0, 6.0],
            vec![3.0, 10.0, 10.0, 10.0],
            vec![-3.0, -2.0, 0.0, 0.0],
        );
        assert_eq!(solve(&p, 1).status, Status::IterationLimit);
    }
}
