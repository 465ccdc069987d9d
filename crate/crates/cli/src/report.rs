//! Human-readable and JSON summaries of a completed run.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pricewise_core::elasticity::{read_elasticities, ElasticityEstimate, ELASTICITY_BOUND};
use pricewise_demand::metrics::EvalReport;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::layout::{read_json, write_json, RunLayout};
use crate::stages::demand::EvalSummary;
use crate::stages::optimize::{read_recommendations, Recommendation};

/// Width of one elasticity histogram bucket.
pub const BUCKET_WIDTH: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `count / (total * width)`, so the buckets integrate to one.
    pub density: f64,
}

/// Products per chosen ladder entry.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceCounts {
    /// Base discount minus delta (the highest price).
    pub lower_discount: usize,
    pub base: usize,
    /// Base discount plus delta (the lowest price).
    pub higher_discount: usize,
}

impl ChoiceCounts {
    pub fn of(choices: impl IntoIterator<Item = usize>) -> Self {
        let mut c = ChoiceCounts::default();
        for j in choices {
            match j {
                0 => c.lower_discount += 1,
                1 => c.base += 1,
                _ => c.higher_discount += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.lower_discount + self.base + self.higher_discount
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevenueSummary {
    pub expected: f64,
    /// Predicted revenue with every product at its base discount.
    pub baseline: f64,
    pub uplift_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub products: usize,
    pub partitions: usize,
    pub model: String,
    pub models: Vec<(String, EvalReport)>,
    pub elasticity_histogram: Vec<HistogramBucket>,
    pub chosen_prices: ChoiceCounts,
    pub revenue: RevenueSummary,
}

/// Unit-width buckets over `[-5, 5]`; the last bucket is closed.
pub fn elasticity_histogram(values: &[f64]) -> Vec<HistogramBucket> {
    let n = (2.0 * ELASTICITY_BOUND / BUCKET_WIDTH).round() as usize;
    let mut counts = vec![0usize; n];
    for &v in values {
        let k = ((v + ELASTICITY_BOUND) / BUCKET_WIDTH).floor();
        counts[(k.max(0.0) as usize).min(n - 1)] += 1;
    }
    let total = values.len().max(1) as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBucket {
            lower: -ELASTICITY_BOUND + k as f64 * BUCKET_WIDTH,
            upper: -ELASTICITY_BOUND + (k + 1) as f64 * BUCKET_WIDTH,
            count,
            density: count as f64 / (total * BUCKET_WIDTH),
        })
        .collect()
}

impl Report {
    pub fn build(
        recommendations: &[Recommendation],
        elasticities: &[ElasticityEstimate],
        eval: &EvalSummary,
    ) -> Self {
        let expected: f64 = recommendations.iter().map(|r| r.chosen().revenue()).sum();
        let baseline: f64 = recommendations.iter().map(|r| r.ladder.base().revenue()).sum();
        let ed: Vec<f64> = elasticities.iter().map(|e| e.ed).collect();
        let mut models: Vec<(String, EvalReport)> =
            eval.models.iter().map(|(k, v)| (k.clone(), *v)).collect();
        // the chosen model first, members after
        models.sort_by_key(|(k, _)| (k != eval.model.as_str(), k.clone()));
        Report {
            products: recommendations.len(),
            partitions: recommendations
                .iter()
                .map(|r| r.partition.as_str())
                .collect::<BTreeSet<_>>()
                .len(),
            model: eval.model.to_string(),
            models,
            elasticity_histogram: elasticity_histogram(&ed),
            chosen_prices: ChoiceCounts::of(recommendations.iter().map(|r| r.choice)),
            revenue: RevenueSummary {
                expected,
                baseline,
                uplift_pct: if baseline > 0.0 {
                    100.0 * (expected / baseline - 1.0)
                } else {
                    0.0
                },
            },
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Products");
        let _ = writeln!(s, "  products:   {}", self.products);
        let _ = writeln!(s, "  partitions: {}", self.partitions);

        let _ = writeln!(s, "\nDemand models (holdout day, chosen: {})", self.model);
        let _ = writeln!(s, "  {:<20} {:>12} {:>12} {:>8}", "model", "mae", "rmse", "n");
        for (name, e) in &self.models {
            let _ = writeln!(s, "  {name:<20} {:>12.4} {:>12.4} {:>8}", e.mae, e.rmse, e.n);
        }

        let _ = writeln!(s, "\nElasticity distribution");
        for b in &self.elasticity_histogram {
            let close = if b.upper >= ELASTICITY_BOUND { ']' } else { ')' };
            let _ = writeln!(
                s,
                "  [{:>4}, {:>4}{close} {:>7} {:>8.4}",
                b.lower, b.upper, b.count, b.density
            );
        }

        let _ = writeln!(s, "\nChosen prices");
        let total = self.chosen_prices.total().max(1) as f64;
        for (label, n) in [
            ("base - delta discount", self.chosen_prices.lower_discount),
            ("base discount", self.chosen_prices.base),
            ("base + delta discount", self.chosen_prices.higher_discount),
        ] {
            let _ = writeln!(s, "  {label:<22} {n:>7} ({:.1}%)", 100.0 * n as f64 / total);
        }

        let _ = writeln!(s, "\nRevenue (predicted, INR)");
        let _ = writeln!(s, "  expected: {:.2}", self.revenue.expected);
        let _ = writeln!(s, "  baseline: {:.2}", self.revenue.baseline);
        let _ = writeln!(s, "  uplift:   {:+.2}%", self.revenue.uplift_pct);
        s
    }
}

/// Builds the report from a completed run directory and writes
/// `report.txt` and `report.json` next to the inputs.
pub fn emit_report(run_dir: &Path) -> Result<Report> {
    let layout = RunLayout::new(run_dir);
    let assignment = layout.assignment();
    let assignment_rows = csv::Reader::from_path(&assignment)
        .map_err(|e| CliError::artifact(&assignment, e))?
        .records()
        .count();
    if assignment_rows == 0 {
        return Err(CliError::NothingToReport(assignment));
    }
    let recommendations = read_recommendations(&layout.ladders())?;
    let elasticities = read_elasticities(&layout.elasticities())?;
    let eval: EvalSummary = read_json(&layout.eval())?;
    let report = Report::build(&recommendations, &elasticities, &eval);
    let text = report.to_text();
    fs::write(layout.report_text(), &text).map_err(|e| CliError::io(layout.report_text(), e))?;
    write_json(&layout.report_json(), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bounds_and_density() {
        let h = elasticity_histogram(&[-5.0, -0.5, 0.0, 0.2, 4.99, 5.0]);
        assert_eq!(h.len(), 10);
        assert_eq!(h[0].lower, -5.0);
        assert_eq!(h[9].upper, 5.0);
        assert_eq!(h[0].count, 1);
        assert_eq!(h[4].count, 1);
        assert_eq!(h[5].count, 2);
        assert_eq!(h[9].count, 2);
        let mass: f64 = h.iter().map(|b| b.density * BUCKET_WIDTH).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn choice_counts() {
        let c = ChoiceCounts::of([0, 1, 1, 2, 2, 2]);
        assert_eq!((c.lower_discount, c.base, c.higher_discount), (1, 2, 3));
        assert_eq!(c.total(), 6);
    }
}
