//! Benchmark report assembly and deterministic rendering.
//!
//! Rows are sorted by (category, pair, policy); aggregation produces one
//! mean-AP value per (category, policy) and per policy overall, plus
//! relative-improvement percentages between policies. Rendered CSV and
//! JSON are byte-stable across runs: floats are written at fixed
//! precision and nothing carries a timestamp.

use crate::evaluation::mean_ap;
use serde::Serialize;

/// Per-pair, per-policy result row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub category: String,
    pub pair: String,
    pub policy: String,
    pub ap: f64,
    pub correspondences: usize,
    pub features_a: usize,
    pub features_b: usize,
    pub skipped_a: usize,
    pub skipped_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySummary {
    pub category: String,
    pub policy: String,
    pub mean_ap: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub policy: String,
    pub mean_ap: f64,
    pub pairs: usize,
}

/// Relative improvement of one policy's overall mean AP over another's.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementRow {
    pub policy: String,
    pub baseline: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<PairRow>,
    pub categories: Vec<CategorySummary>,
    pub overall: Vec<PolicySummary>,
    pub improvements: Vec<ImprovementRow>,
    pub skipped: Vec<String>,
}

/// 100·(candidate − baseline)/baseline, defined only for positive
/// baselines.
pub fn improvement_percent(candidate: f64, baseline: f64) -> Option<f64> {
    (baseline > 0.0).then(|| 100.0 * (candidate - baseline) / baseline)
}

/// Improvement pairs reported when both sides are present: the meaningful
/// policies over the fixed cap, and the fixed cap over no clamping.
const IMPROVEMENT_PAIRS: [(&str, &str); 3] =
    [("mc-exact", "lowe"), ("mc-approx", "lowe"), ("lowe", "none")];

/// Sorts, groups, and aggregates rows into the final report.
pub fn build_report(mut rows: Vec<PairRow>, skipped: Vec<String>) -> BenchReport {
    rows.sort_by(|a, b| {
        (&a.category, &a.pair, &a.policy).cmp(&(&b.category, &b.pair, &b.policy))
    });

    let mut categories: Vec<CategorySummary> = Vec::new();
    let mut overall: Vec<PolicySummary> = Vec::new();
    {
        // (category, policy) and (policy) AP lists, in first-seen order.
        let mut per_category: Vec<((String, String), Vec<f64>)> = Vec::new();
        let mut per_policy: Vec<(String, Vec<f64>)> = Vec::new();
        for row in &rows {
            let key = (row.category.clone(), row.policy.clone());
            match per_category.iter_mut().find(|(k, _)| *k == key) {
                Some((_, aps)) => aps.push(row.ap),
                None => per_category.push((key, vec![row.ap])),
            }
            match per_policy.iter_mut().find(|(p, _)| *p == row.policy) {
                Some((_, aps)) => aps.push(row.ap),
                None => per_policy.push((row.policy.clone(), vec![row.ap])),
            }
        }
        per_category.sort_by(|a, b| a.0.cmp(&b.0));
        per_policy.sort_by(|a, b| a.0.cmp(&b.0));
        for ((category, policy), aps) in per_category {
            categories.push(CategorySummary {
                category,
                policy,
                mean_ap: mean_ap(&aps).expect("group is non-empty by construction"),
                pairs: aps.len(),
            });
        }
        for (policy, aps) in per_policy {
            overall.push(PolicySummary {
                policy,
                mean_ap: mean_ap(&aps).expect("group is non-empty by construction"),
                pairs: aps.len(),
            });
        }
    }

    let mut improvements = Vec::new();
    for (candidate, baseline) in IMPROVEMENT_PAIRS {
        let c = overall.iter().find(|s| s.policy == candidate);
        let b = overall.iter().find(|s| s.policy == baseline);
        if let (Some(c), Some(b)) = (c, b) {
            if let Some(percent) = improvement_percent(c.mean_ap, b.mean_ap) {
                improvements.push(ImprovementRow {
                    policy: candidate.to_string(),
                    baseline: baseline.to_string(),
                    percent,
                });
            }
        }
    }

    BenchReport { rows, categories, overall, improvements, skipped }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-pair rows as CSV.
pub fn render_pairs_csv(report: &BenchReport) -> String {
    let mut out = String::from(
        "category,pair,policy,ap,correspondences,features_a,features_b,skipped_a,skipped_b\n",
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{},{},{},{},{}\n",
            csv_field(&r.category),
            csv_field(&r.pair),
            csv_field(&r.policy),
            r.ap,
            r.correspondences,
            r.features_a,
            r.features_b,
            r.skipped_a,
            r.skipped_b
        ));
    }
    out
}

/// Mean-AP summary as CSV: one row per category plus an `all` row, one
/// column per policy.
pub fn render_summary_csv(report: &BenchReport) -> String {
    let policies: Vec<&str> = report.overall.iter().map(|s| s.policy.as_str()).collect();
    let mut out = String::from("category");
    for p in &policies {
        out.push(',');
        out.push_str(&csv_field(p));
    }
    out.push('\n');
    let mut category_names: Vec<&str> =
        report.categories.iter().map(|c| c.category.as_str()).collect();
    category_names.dedup();
    for name in category_names {
        out.push_str(&csv_field(name));
        for p in &policies {
            let cell = report
                .categories
                .iter()
                .find(|c| c.category == name && c.policy == *p)
                .map(|c| format!("{:.6}", c.mean_ap))
                .unwrap_or_default();
            out.push(',');
            out.push_str(&cell);
        }
        out.push('\n');
    }
    out.push_str("all");
    for p in &policies {
        let cell = report
            .overall
            .iter()
            .find(|s| s.policy == *p)
            .map(|s| format!("{:.6}", s.mean_ap))
            .unwrap_or_default();
        out.push(',');
        out.push_str(&cell);
    }
    out.push('\n');
    out
}

/// JSON mirror of the report. Floats are rounded to six decimals so the
/// bytes match the CSV values exactly.
pub fn render_json(report: &BenchReport) -> String {
    fn round6(x: f64) -> f64 {
        (x * 1e6).round() / 1e6
    }
    let mut rounded = report.clone();
    for r in &mut rounded.rows {
        r.ap = round6(r.ap);
    }
    for c in &mut rounded.categories {
        c.mean_ap = round6(c.mean_ap);
    }
    for s in &mut rounded.overall {
        s.mean_ap = round6(s.mean_ap);
    }
    for i in &mut rounded.improvements {
        i.percent = round6(i.percent);
    }
    let mut text =
        serde_json::to_string_pretty(&rounded).expect("report serialization cannot fail");
    text.push('\n');
    text
}
