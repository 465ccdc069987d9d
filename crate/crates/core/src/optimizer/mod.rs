//! One-price-per-product revenue maximization under a price-sum budget.
//!
//! Every product contributes three binary columns (one per ladder entry).
//! Selection rows force exactly one choice per product and a final row fixes
//! the sum of chosen prices to the budget `c`. The binary program is relaxed
//! to `0 <= x <= 1`, solved with [`simplex`], rounded per product, and the
//! whole procedure is swept over `c`.

pub mod simplex;

use std::path::Path;

use serde::Serialize;

use crate::elasticity::PriceLadder;
use crate::error::{Error, Result};
use crate::money::Money;

/// Ladder entries per product.
pub const CHOICES: usize = 3;
/// Entries within this of 0 or 1 count as integral.
pub const INTEGRALITY_TOL: f64 = 1e-7;
/// Largest instance [`brute_force_optimal`] will enumerate.
pub const BRUTE_FORCE_MAX_PRODUCTS: usize = 12;
/// Argmax ties: base entry first, then lower discount, then higher.
const TIE_ORDER: [usize; CHOICES] = [1, 0, 2];
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LpInstance {
    pub n: usize,
    pub k: usize,
    /// `r[3i + j]`: revenue of product `i` at ladder entry `j`, in INR.
    pub r: Vec<f64>,
    /// `(n + 1) x 3n`: selection rows, then the price row (INR).
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub prices: Vec<Money>,
    pub c: Money,
}

impl LpInstance {
    pub fn revenue(&self, product: usize, choice: usize) -> f64 {
        self.r[product * self.k + choice]
    }

    pub fn price(&self, product: usize, choice: usize) -> Money {
        self.prices[product * self.k + choice]
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// `r · x` in INR.
    pub objective: f64,
    pub status: LpStatus,
    pub n_fractional_products: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriceAssignment {
    /// Chosen ladder index per product.
    pub choices: Vec<usize>,
    pub total_price: Money,
    pub expected_revenue: f64,
}

/// Cheapest and dearest achievable price sums.
pub fn budget_range(ladders: &[PriceLadder]) -> (Money, Money) {
    ladders.iter().fold((Money::ZERO, Money::ZERO), |(lo, hi), l| {
        (lo + l.min_price(), hi + l.max_price())
    })
}

pub fn build_lp_instance(ladders: &[PriceLadder], c: Money) -> Result<LpInstance> {
    if ladders.is_empty() {
        return Err(Error::domain("no price ladders to optimize"));
    }
    let (c_min, c_max) = budget_range(ladders);
    if c < c_min || c > c_max {
        return Err(Error::Infeasible(format!(
            "budget {c} outside the achievable range [{c_min}, {c_max}]"
        )));
    }
    let n = ladders.len();
    let cols = n * CHOICES;
    let mut a = vec![vec![0.0; cols]; n + 1];
    let mut r = Vec::with_capacity(cols);
    let mut prices = Vec::with_capacity(cols);
    for (i, ladder) in ladders.iter().enumerate() {
        for (j, e) in ladder.entries.iter().enumerate() {
            let col = i * CHOICES + j;
            a[i][col] = 1.0;
            a[n][col] = e.price.as_rupees();
            r.push(e.revenue());
            prices.push(e.price);
        }
    }
    let mut b = vec![1.0; n + 1];
    b[n] = c.as_rupees();
    Ok(LpInstance {
        n,
        k: CHOICES,
        r,
        a,
        b,
        prices,
        c,
    })
}

/// Products whose entries are not all within [`INTEGRALITY_TOL`] of 0 or 1.
pub fn count_fractional(x: &[f64], k: usize) -> usize {
    x.chunks(k)
        .filter(|xs| {
            xs.iter()
                .any(|&v| v > INTEGRALITY_TOL && v < 1.0 - INTEGRALITY_TOL)
        })
        .count()
}

/// Maximizes `r · x` over the relaxation with the bounded-variable simplex.
pub fn solve_lp(inst: &LpInstance) -> LpSolution {
    let n = inst.n;
    let cols = inst.r.len();
    let c = inst.c.as_rupees();
    let r_scale = inst.r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r_scale = if r_scale > 0.0 { r_scale } else { 1.0 };

    let mut a = inst.a.clone();
    let mut b = inst.b.clone();
    if c > 0.0 {
        a[n].iter_mut().for_each(|v| *v /= c);
        b[n] = 1.0;
    }
    // start each product at its cheapest entry
    let crash = (0..n)
        .map(|i| {
            (0..inst.k)
                .min_by_key(|&j| (inst.price(i, j), j))
                .map(|j| i * inst.k + j)
        })
        .chain(std::iter::once(None))
        .collect();
    let problem = simplex::Problem {
        a,
        b,
        upper: vec![1.0; cols],
        cost: inst.r.iter().map(|v| -v / r_scale).collect(),
        crash,
    };
    let cap = 10 * (cols + n + 1);
    let solved = simplex::solve(&problem, cap);

    let mut x = solved.x;
    for v in &mut x {
        if *v < TIE_TOL {
            *v = 0.0;
        } else if *v > 1.0 - TIE_TOL {
            *v = 1.0;
        }
    }
    let status = match solved.status {
        simplex::Status::Optimal => LpStatus::Optimal,
        simplex::Status::Infeasible => LpStatus::Infeasible,
        simplex::Status::IterationLimit => LpStatus::IterationLimit,
    };
    LpSolution {
        objective: inst.r.iter().zip(&x).map(|(r, x)| r * x).sum(),
        n_fractional_products: count_fractional(&x, inst.k),
        x,
        status,
        iterations: solved.iterations,
    }
}

/// Picks the largest `x` per product and prices the result.
pub fn round_solution(sol: &LpSolution, inst: &LpInstance) -> PriceAssignment {
    let choices: Vec<usize> = sol
        .x
        .chunks(inst.k)
        .map(|xs| {
            let mut best = TIE_ORDER[0];
            for &j in &TIE_ORDER[1..] {
                if xs[j] > xs[best] + TIE_TOL {
                    best = j;
                }
            }
            best
        })
        .collect();
    assignment_from_choices(inst, choices)
}

fn assignment_from_choices(inst: &LpInstance, choices: Vec<usize>) -> PriceAssignment {
    let total_price = choices.iter().enumerate().map(|(i, &j)| inst.price(i, j)).sum();
    let expected_revenue = choices.iter().enumerate().map(|(i, &j)| inst.revenue(i, j)).sum();
    PriceAssignment {
        choices,
        total_price,
        expected_revenue,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub c: Money,
    pub lp_objective: f64,
    pub rounded_revenue: f64,
    /// `|total_price - c|` of the rounded assignment.
    pub budget_residual: Money,
    pub n_fractional: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub best: PriceAssignment,
    pub best_c: Money,
    pub table: Vec<SweepRow>,
    pub failed_steps: usize,
}

/// `steps` evenly spaced budgets over `[c_min, c_max]`, rounded to the paisa.
pub fn budget_grid(c_min: Money, c_max: Money, steps: usize) -> Vec<Money> {
    let span = i128::from(c_max.paise() - c_min.paise());
    let last = (steps - 1) as i128;
    (0..steps)
        .map(|k| {
            let offset = (2 * k as i128 * span + last) / (2 * last);
            Money::from_paise(c_min.paise() + offset as i64)
        })
        .collect()
}

fn sweep_step(ladders: &[PriceLadder], c: Money) -> Result<(SweepRow, PriceAssignment)> {
    let inst = build_lp_instance(ladders, c)?;
    let sol = solve_lp(&inst);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Infeasible(format!("LP at c={c} ended {:?}", sol.status)));
    }
    let assignment = round_solution(&sol, &inst);
    let row = SweepRow {
        c,
        lp_objective: sol.objective,
        rounded_revenue: assignment.expected_revenue,
        budget_residual: assignment.total_price.abs_diff(c),
        n_fractional: sol.n_fractional_products,
    };
    Ok((row, assignment))
}

/// Solves and rounds at every grid budget and keeps the best rounded revenue
/// (earliest step on ties). Steps run in parallel.
pub fn sweep_budget(ladders: &[PriceLadder], steps: usize) -> Result<Sweep> {
    if steps < 2 {
        return Err(Error::domain(format!(
            "sweep needs at least 2 steps, got {steps}"
        )));
    }
    if ladders.is_empty() {
        return Err(Error::domain("no price ladders to optimize"));
    }
    let (c_min, c_max) = budget_range(ladders);
    let grid = budget_grid(c_min, c_max, steps);
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(grid.len());
    let chunk = grid.len().div_ceil(workers);
    let results: Vec<Result<(SweepRow, PriceAssignment)>> = if workers == 1 {
        grid.iter().map(|&c| sweep_step(ladders, c)).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = grid
                .chunks(chunk)
                .map(|cs| s.spawn(move || cs.iter().map(|&c| sweep_step(ladders, c)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        })
    };

    let mut table = Vec::with_capacity(steps);
    let mut best: Option<(Money, PriceAssignment)> = None;
    let mut failed_steps = 0;
    for result in results {
        match result {
            Ok((row, assignment)) => {
                if best
                    .as_ref()
                    .is_none_or(|(_, b)| assignment.expected_revenue > b.expected_revenue)
                {
                    best = Some((row.c, assignment));
                }
                table.push(row);
            }
            Err(e) => {
                log::warn!("skipping sweep step: {e}");
                failed_steps += 1;
            }
        }
    }
    let (best_c, best) = best.ok_or_else(|| Error::Infeasible("every sweep step failed".to_owned()))?;
    Ok(Sweep {
        best,
        best_c,
        table,
        failed_steps,
    })
}

/// Exhaustive search over all `3^n` selections whose price sum is within
/// `price_tolerance` of `c` (`None` means unconstrained).
pub fn brute_force_optimal(
    ladders: &[PriceLadder],
    c: Money,
    price_tolerance: Option<Money>,
) -> Result<PriceAssignment> {
    let n = ladders.len();
    if n > BRUTE_FORCE_MAX_PRODUCTS {
        return Err(Error::Refused(format!(
            "brute force over {n} products exceeds the limit of {BRUTE_FORCE_MAX_PRODUCTS}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("no price ladders to optimize"));
    }
    let mut choices = vec![0usize; n];
    let mut best: Option<PriceAssignment> = None;
    loop {
        let total: Money = choices
            .iter()
            .zip(ladders)
            .map(|(&j, l)| l.entries[j].price)
            .sum();
        if price_tolerance.is_none_or(|tol| total.abs_diff(c) <= tol) {
            let revenue: f64 = choices
                .iter()
                .zip(ladders)
                .map(|(&j, l)| l.entries[j].revenue())
                .sum();
            if best.as_ref().is_none_or(|b| revenue > b.expected_revenue) {
                best = Some(PriceAssignment {
                    choices: choices.clone(),
                    total_price: total,
                    expected_revenue: revenue,
                });
            }
        }
        // odometer increment, last product fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return best
                    .ok_or_else(|| Error::Infeasible(format!("no selection has a price sum near {c}")));
            }
            pos -= 1;
            choices[pos] += 1;
            if choices[pos] < CHOICES {
                break;
            }
            choices[pos] = 0;
        }
    }
}

#[derive(Serialize)]
struct AssignmentRow<'a> {
    product_id: &'a str,
    chosen_discount_pct: f64,
    chosen_price: Money,
    projected_demand: f64,
    expected_revenue: f64,
}

pub fn write_assignment_csv(
    path: &Path,
    ladders: &[PriceLadder],
    assignment: &PriceAssignment,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for (ladder, &j) in ladders.iter().zip(&assignment.choices) {
        let e = &ladder.entries[j];
        w.serialize(AssignmentRow {
            product_id: ladder.product_id.as_str(),
            chosen_discount_pct: e.discount_pct,
            chosen_price: e.price,
            projected_demand: e.projected_demand,
            expected_revenue: e.revenue(),
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep_csv(path: &Path, table: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for row in table {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elasticity::LadderEntry;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn ladder(id: &str, pairs: [(i64, f64); 3]) -> PriceLadder {
        PriceLadder {
            product_id: id.into(),
            entries: pairs.map(|(p, d)| LadderEntry {
                discount_pct: 0.0,
                price: Money::from_rupees(p),
                projected_demand: d,
            }),
        }
    }

    /// Ladder entries ordered by ascending discount (descending price).
    fn fixture() -> Vec<PriceLadder> {
        vec![
            ladder("P1", [(105, 9.0), (100, 10.0), (95, 12.0)]),
            ladder("P2", [(210, 4.0), (200, 5.0), (190, 6.0)]),
        ]
    }

    fn random_ladders(rng: &mut ChaCha8Rng, n: usize) -> Vec<PriceLadder> {
        (0..n)
            .map(|i| {
                let base = rng.random_range(100..2000i64);
                let step = rng.random_range(1..=base / 10);
                let d = rng.random_range(1.0..50.0);
                let ed: f64 = rng.random_range(-5.0..1.0);
                let entries = [base + step, base, base - step].map(|p| {
                    let dem = (d + d * ed * (p - base) as f64 / base as f64).max(0.0);
                    (p, dem)
                });
                ladder(&format!("P{i}"), entries)
            })
            .collect()
    }

    #[test]
    fn two_product_encoding() {
        let inst = build_lp_instance(&fixture(), Money::from_rupees(300)).unwrap();
        assert_eq!((inst.n, inst.k), (2, 3));
        assert_eq!(
            inst.a,
            vec![
                vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
                vec![105.0, 100.0, 95.0, 210.0, 200.0, 190.0],
            ]
        );
        assert_eq!(inst.b, vec![1.0, 1.0, 300.0]);
        assert_eq!(inst.r, vec![945.0, 1000.0, 1140.0, 840.0, 1000.0, 1140.0]);
        for col in 0..6 {
            assert_eq!(inst.a.iter().filter(|row| row[col] != 0.0).count(), 2);
        }
    }

    #[test]
    fn budget_outside_range_is_infeasible() {
        let err = build_lp_instance(&fixture(), Money::from_rupees(284)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
        assert!(build_lp_instance(&fixture(), Money::from_rupees(316)).is_err());
        assert!(build_lp_instance(&[], Money::ZERO).is_err());
    }

    #[test]
    fn fixture_optimum_at_cheapest_budget() {
        let inst = build_lp_instance(&fixture(), Money::from_rupees(285)).unwrap();
        let sol = solve_lp(&inst);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, 2280.0);
        assert_eq!(sol.n_fractional_products, 0);
        assert_eq!(sol.x, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let a = round_solution(&sol, &inst);
        assert_eq!(a.choices, vec![2, 2]);
        assert_eq!(a.expected_revenue, sol.objective);
    }

    #[test]
    fn brute_force_examples() {
        let best = brute_force_optimal(&fixture(), Money::ZERO, None).unwrap();
        assert_eq!(best.choices, vec![2, 2]);
        assert_eq!(best.expected_revenue, 2280.0);
        // price sums equal to 305: (105,200), (95,210)
        let at_305 =
            brute_force_optimal(&fixture(), Money::from_rupees(305), Some(Money::from_paise(50))).unwrap();
        assert_eq!(at_305.choices, vec![2, 0]);
        assert_eq!(at_305.expected_revenue, 1140.0 + 840.0);
        let one = brute_force_optimal(&fixture()[..1], Money::ZERO, None).unwrap();
        assert_eq!(one.choices, vec![2]);
        assert!(matches!(
            brute_force_optimal(&fixture(), Money::from_rupees(1), Some(Money::ZERO)),
            Err(Error::Infeasible(_))
        ));
        let many = random_ladders(&mut ChaCha8Rng::seed_from_u64(1), 13);
        assert!(matches!(
            brute_force_optimal(&many, Money::ZERO, None),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn single_product_at_base_price() {
        let l = vec![ladder("P", [(110, 3.0), (100, 4.0), (90, 5.0)])];
        let inst = build_lp_instance(&l, Money::from_rupees(100)).unwrap();
        let sol = solve_lp(&inst);
        assert_eq!(sol.x, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn rounding_rules() {
        let inst = build_lp_instance(&fixture(), Money::from_rupees(300)).unwrap();
        let sol = |x: Vec<f64>| LpSolution {
            x,
            objective: 0.0,
            status: LpStatus::Optimal,
            n_fractional_products: 0,
            iterations: 0,
        };
        let a = round_solution(&sol(vec![0.6, 0.4, 0.0, 0.0, 0.0, 1.0]), &inst);
        assert_eq!(a.choices, vec![0, 2]);
        let a = round_solution(&sol(vec![0.5, 0.5, 0.0, 0.5, 0.0, 0.5]), &inst);
        assert_eq!(a.choices, vec![1, 0]);
        assert_eq!(a.expected_revenue, 1000.0 + 840.0);
        assert_eq!(a.total_price, Money::from_rupees(310));
    }

    #[test]
    fn sweep_finds_per_product_argmax() {
        let s = sweep_budget(&fixture(), 101).unwrap();
        assert_eq!(s.best.choices, vec![2, 2]);
        assert_eq!(s.best.expected_revenue, 2280.0);
        assert_eq!(s.table.len(), 101);
        assert_eq!(s.failed_steps, 0);
        assert_eq!(s.table[0].c, Money::from_rupees(285));
        assert_eq!(s.table[100].c, Money::from_rupees(315));
        for row in &s.table {
            assert!(s.best.expected_revenue >= row.rounded_revenue);
        }

        let one = vec![ladder("P", [(110, 3.0), (100, 4.0), (90, 5.0)])];
        assert_eq!(sweep_budget(&one, 5).unwrap().best.choices, vec![2]);
        assert!(sweep_budget(&one, 1).is_err());
    }

    #[test]
    fn grid_is_inclusive_and_even() {
        let g = budget_grid(Money::from_paise(0), Money::from_paise(10), 3);
        assert_eq!(g, [0, 5, 10].map(Money::from_paise));
        let g = budget_grid(Money::from_paise(100), Money::from_paise(100), 4);
        assert!(g.iter().all(|&c| c == Money::from_paise(100)));
    }

    #[test]
    fn random_instances_hold_lp_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(1..=6);
            let ladders = random_ladders(&mut rng, n);
            let pick: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let c: Money = pick.iter().zip(&ladders).map(|(&j, l)| l.entries[j].price).sum();
            let inst = build_lp_instance(&ladders, c).unwrap();
            let sol = solve_lp(&inst);
            assert_eq!(sol.status, LpStatus::Optimal);
            let int_opt = brute_force_optimal(&ladders, c, Some(Money::ZERO)).unwrap();
            assert!(sol.objective >= int_opt.expected_revenue * (1.0 - 1e-9));
            assert!(sol.n_fractional_products <= 1);
            for (i, row) in inst.a.iter().enumerate() {
                let ax: f64 = row.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
                assert!((ax - inst.b[i]).abs() < 1e-6 * inst.b[i].max(1.0));
            }
            let again = solve_lp(&inst);
            assert_eq!(again, sol);
        }
    }

    #[test]
    fn csv_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let s = sweep_budget(&fixture(), 3).unwrap();
        let p = dir.path().join("sweep.csv");
        write_sweep_csv(&p, &s.table).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("c,lp_objective,rounded_revenue,budget_residual,n_fractional\n285.00,"));
        let p = dir.path().join("assignment.csv");
        write_assignment_csv(&p, &fixture(), &s.best).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "product_id,chosen_discount_pct,chosen_price,projected_demand,expected_revenue\n\
             P1,0.0,95.00,12.0,1140.0\nP2,0.0,190.00,6.0,1140.0\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn rounding_picks_one_price_per_product(seed in 0u64..1000, n in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ladders = random_ladders(&mut rng, n);
            let (lo, hi) = budget_range(&ladders);
            let c = Money::from_paise(rng.random_range(lo.paise()..=hi.paise()));
            let inst = build_lp_instance(&ladders, c).unwrap();
            let sol = solve_lp(&inst);
            prop_assert_eq!(sol.status, LpStatus::Optimal);
            for xs in sol.x.chunks(3) {
                prop_assert!((xs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
            let a = round_solution(&sol, &inst);
            prop_assert_eq!(a.choices.len(), n);
            prop_assert!(a.choices.iter().all(|&j| j < 3));
            let unconstrained = brute_force_optimal(&ladders, c, None).unwrap();
            prop_assert!(sol.objective <= unconstrained.expected_revenue * (1.0 + 1e-9));
        }
    }
}
