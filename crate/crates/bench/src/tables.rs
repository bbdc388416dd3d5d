//! Comparison and per-round growth tables.

use serde::{Deserialize, Serialize};
use slicewise_core::metrics::{dice_growth_per_point, RoundLog};

use crate::baselines::{BaselineData, BaselineTable, Metric};
use crate::config::PromptMode;
use crate::report::{CaseStatus, Report};
use crate::BenchError;

/// Relative difference to `best` in percent.
pub fn percent_delta(ours: f64, best: f64) -> f64 {
    (ours - best) / best * 100.0
}

/// Two decimals with an explicit sign, e.g. `+26.20%`, `-10.69%`, `0.00%`.
pub fn format_delta(delta: f64) -> String {
    let s = format!("{delta:.2}");
    match s.as_str() {
        "0.00" | "-0.00" => "0.00%".into(),
        _ if delta > 0.0 => format!("+{s}%"),
        _ => format!("{s}%"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub table: String,
    pub method: String,
    /// Percent values per table column.
    pub values: Vec<Option<f64>>,
    /// Percent delta to the best baseline per column.
    pub deltas: Vec<Option<f64>>,
}

impl ComparisonRow {
    pub fn rendered_deltas(&self) -> Vec<Option<String>> {
        self.deltas.iter().map(|d| d.map(format_delta)).collect()
    }
}

pub fn compare(table: &BaselineTable, method: &str, values: Vec<Option<f64>>) -> ComparisonRow {
    let deltas = values
        .iter()
        .zip(table.best())
        .map(|(v, b)| Some(percent_delta((*v)?, b?)))
        .collect();
    ComparisonRow {
        table: table.id.clone(),
        method: method.to_string(),
        values,
        deltas,
    }
}

/// The published rows of the data file compared against its baselines.
pub fn reported_rows(data: &BaselineData) -> Vec<ComparisonRow> {
    data.tables
        .iter()
        .flat_map(|t| {
            t.reported
                .iter()
                .map(move |r| compare(t, &r.method, r.values.clone()))
        })
        .collect()
}

/// Rows for a report, one per table containing the report's task: the
/// unfiltered result and, when the salient filter ran, the salient one.
pub fn comparison_rows(report: &Report, data: &BaselineData) -> Vec<ComparisonRow> {
    let (Some(task), Some(summary)) = (&report.config.task, &report.summary) else {
        return Vec::new();
    };
    let label = report.config.mode.label();
    let mut variants = vec![(
        format!("ours ({label})"),
        Some(summary.dice.mean),
        Some(summary.nsd.mean),
    )];
    if report.config.salient_filter {
        variants.push((
            format!("ours ({label}) (salient area)"),
            summary.salient_dice.map(|s| s.mean),
            summary.salient_nsd.map(|s| s.mean),
        ));
    }
    let mut out = Vec::new();
    for t in &data.tables {
        if !t.columns.iter().any(|c| c.task.eq_ignore_ascii_case(task)) {
            continue;
        }
        for (method, dice, nsd) in &variants {
            let values = t
                .columns
                .iter()
                .map(|c| {
                    if !c.task.eq_ignore_ascii_case(task) {
                        return None;
                    }
                    match c.metric {
                        Metric::Dice => dice.map(|v| v * 100.0),
                        Metric::Nsd => nsd.map(|v| v * 100.0),
                    }
                })
                .collect();
            out.push(compare(t, method, values));
        }
    }
    out
}

/// Mean dice growth per added point in each round across logs. A round is
/// averaged over the logs that reached it.
pub fn mean_growth(logs: &[RoundLog], baseline_dice: f64) -> Result<Vec<f64>, BenchError> {
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for log in logs {
        let g = dice_growth_per_point(log, baseline_dice)
            .map_err(|e| BenchError::Report(e.to_string()))?;
        for (i, v) in g.into_iter().enumerate() {
            if sums.len() <= i {
                sums.push((0.0, 0));
            }
            sums[i].0 += v;
            sums[i].1 += 1;
        }
    }
    Ok(sums.into_iter().map(|(s, n)| s / n as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub method: String,
    pub points_per_round: Vec<u32>,
    /// Dice growth per point per round, as a fraction; `None` where no
    /// per-round dice is available.
    pub growth: Vec<Option<f64>>,
    /// Cases averaged per round.
    pub cases_per_round: Vec<usize>,
}

/// Growth table: the report's own row first, then the baseline protocols.
pub fn growth_report(report: &Report, data: &BaselineData) -> Result<Vec<GrowthRow>, BenchError> {
    let PromptMode::Clicks(k) = report.config.mode else {
        return Err(BenchError::Report(
            "growth needs a clicks-mode report".into(),
        ));
    };
    let logs: Vec<RoundLog> = report
        .cases
        .iter()
        .filter(|c| c.status == CaseStatus::Ok)
        .filter_map(|c| c.round_log.clone())
        .collect();
    if logs.is_empty() {
        return Err(BenchError::Report(
            "no successful cases with round logs".into(),
        ));
    }
    let growth = mean_growth(&logs, 0.0)?;
    let cases_per_round = (0..growth.len())
        .map(|i| logs.iter().filter(|l| l.rounds.len() > i).count())
        .collect();
    let mut rows = vec![GrowthRow {
        method: format!("ours ({} clicks, simulated user)", k),
        points_per_round: vec![1; growth.len()],
        growth: growth.into_iter().map(Some).collect(),
        cases_per_round,
    }];
    for b in &data.growth {
        let growth = match &b.dice_per_round {
            Some(d) => {
                let pairs: Vec<(u32, f64)> = b
                    .points_per_round
                    .iter()
                    .zip(d)
                    .map(|(&p, &v)| (p, v / 100.0))
                    .collect();
                dice_growth_per_point(&RoundLog::from_pairs(&pairs), 0.0)
                    .map_err(|e| BenchError::Baselines(format!("{}: {e}", b.method)))?
                    .into_iter()
                    .map(Some)
                    .collect()
            }
            None => vec![None; b.points_per_round.len()],
        };
        rows.push(GrowthRow {
            method: b.method.clone(),
            points_per_round: b.points_per_round.clone(),
            growth,
            cases_per_round: Vec::new(),
        });
    }
    Ok(rows)
}

pub fn render_growth_markdown(rows: &[GrowthRow]) -> String {
    let rounds = rows
        .iter()
        .map(|r| r.points_per_round.len())
        .max()
        .unwrap_or(0);
    let mut out = String::from("| Method | Points per round |");
    for i in 1..=rounds {
        out.push_str(&format!(" Round {i} |"));
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---|".repeat(rounds));
    out.push('\n');
    for r in rows {
        let pts: Vec<String> = r.points_per_round.iter().map(|p| p.to_string()).collect();
        out.push_str(&format!("| {} | {} |", r.method, pts.join(", ")));
        for i in 0..rounds {
            let cell = match r.growth.get(i) {
                Some(Some(g)) => format!("{:.3}", g * 100.0),
                _ => "–".into(),
            };
            out.push_str(&format!(" {cell} |"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_formatting() {
        assert_eq!(format_delta(percent_delta(81.29, 91.02)), "-10.69%");
        assert_eq!(format_delta(percent_delta(90.18, 71.46)), "+26.20%");
        assert_eq!(format_delta(percent_delta(71.46, 71.46)), "0.00%");
        assert_eq!(format_delta(-0.001), "0.00%");
        assert_eq!(format_delta(0.004), "0.00%");
    }

    #[test]
    fn growth_single_case() {
        let log = RoundLog::from_pairs(&[(1, 0.5), (1, 0.6)]);
        let g = mean_growth(&[log], 0.0).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0], 0.5);
        assert!((g[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn growth_averages_per_round() {
        let a = RoundLog::from_pairs(&[(1, 0.4), (1, 0.6)]);
        let b = RoundLog::from_pairs(&[(1, 0.8)]);
        let g = mean_growth(&[a, b], 0.0).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-12);
        assert!((g[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn growth_markdown_shape() {
        let rows = vec![GrowthRow {
            method: "m".into(),
            points_per_round: vec![25, 5],
            growth: vec![Some(0.02), None],
            cases_per_round: vec![],
        }];
        let md = render_growth_markdown(&rows);
        assert!(md.contains("| m | 25, 5 | 2.000 | – |"), "{md}");
    }
}
