use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use slicewise_core::metrics::{aggregate, CaseMetrics, RoundLog, Stat, Summary};
use slicewise_core::prompt::SessionRound;

use crate::baselines::BaselineData;
use crate::config::ExperimentConfig;
use crate::tables::{comparison_rows, format_delta};
use crate::BenchError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStatus {
    Ok,
    /// Propagation stopped early in at least one direction; metrics are
    /// computed with the missing slices left empty.
    Partial,
    Failed,
}

impl CaseStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseStatus::Ok => "ok",
            CaseStatus::Partial => "partial",
            CaseStatus::Failed => "failed",
        }
    }
}

/// The serializable part of a click session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub rounds: Vec<SessionRound>,
    pub stopped_early: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub status: CaseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub center_slice: Option<usize>,
    pub metrics: Option<CaseMetrics>,
    /// Dice of the propagated volume's center slice against ground truth.
    pub center_dice: Option<f64>,
    pub salient_slice_count: Option<usize>,
    /// No slice passed the salient filter; the salient fields repeat the
    /// unfiltered metrics.
    #[serde(default)]
    pub salient_fallback: bool,
    pub session: Option<SessionRecord>,
    pub round_log: Option<RoundLog>,
    /// Clicks actually placed; 0 when the ground-truth mask was the prompt.
    pub rounds_used: Option<u32>,
}

impl CaseReport {
    pub fn failed(case_id: &str, error: String) -> Self {
        Self {
            case_id: case_id.to_string(),
            status: CaseStatus::Failed,
            error: Some(error),
            center_slice: None,
            metrics: None,
            center_dice: None,
            salient_slice_count: None,
            salient_fallback: false,
            session: None,
            round_log: None,
            rounds_used: None,
        }
    }
}

/// Baseline value echoed into a report for the configured task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub table: String,
    pub column: String,
    pub method: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    /// Clicks come from a deterministic robot user, not a human.
    pub simulated_user: bool,
    pub config: ExperimentConfig,
    pub cases: Vec<CaseReport>,
    /// Statistics over cases with status `ok`.
    pub summary: Option<Summary>,
    pub baselines: Vec<BaselineEntry>,
}

impl Report {
    pub fn assemble(config: ExperimentConfig, cases: Vec<CaseReport>, data: &BaselineData) -> Self {
        let ok: Vec<CaseMetrics> = cases
            .iter()
            .filter(|c| c.status == CaseStatus::Ok)
            .filter_map(|c| c.metrics.clone())
            .collect();
        let summary = aggregate(&ok).ok();
        let baselines = match &config.task {
            Some(task) => data
                .tables
                .iter()
                .flat_map(|t| {
                    t.columns
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| c.task.eq_ignore_ascii_case(task))
                        .flat_map(move |(j, c)| {
                            t.baselines.iter().filter_map(move |r| {
                                r.values[j].map(|value| BaselineEntry {
                                    table: t.id.clone(),
                                    column: c.label.clone(),
                                    method: r.method.clone(),
                                    value,
                                })
                            })
                        })
                })
                .collect(),
            None => Vec::new(),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            simulated_user: matches!(config.mode, crate::PromptMode::Clicks(_)),
            config,
            cases,
            summary,
            baselines,
        }
    }

    pub fn failed_count(&self) -> usize {
        self.cases
            .iter()
            .filter(|c| c.status != CaseStatus::Ok)
            .count()
    }

    /// Canonical JSON form. Contains no timing, so equal runs give equal bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let r: Self = serde_json::from_str(text).map_err(|e| BenchError::Report(e.to_string()))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(BenchError::Report(format!(
                "schema version {} (expected {SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        Ok(r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(format!("unknown report format `{other}` (json, csv, md)")),
        }
    }
}

pub const CSV_COLUMNS: [&str; 8] = [
    "case_id",
    "dice",
    "nsd",
    "hd95",
    "salient_dice",
    "salient_nsd",
    "rounds_used",
    "status",
];

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn render_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report, &BaselineData::embedded()),
    }
}

fn render_csv(report: &Report) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for c in &report.cases {
        let m = c.metrics.as_ref();
        w.write_record([
            c.case_id.clone(),
            num(m.map(|m| m.dice)),
            num(m.map(|m| m.nsd)),
            num(m.and_then(|m| m.hd95)),
            num(m.and_then(|m| m.salient_dice)),
            num(m.and_then(|m| m.salient_nsd)),
            c.rounds_used.map(|r| r.to_string()).unwrap_or_default(),
            c.status.as_str().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

fn stat(s: Option<&Stat>, scale: f64) -> String {
    match s {
        Some(s) => format!("{:.2} ± {:.2}", s.mean * scale, s.std * scale),
        None => "–".into(),
    }
}

pub fn render_markdown(report: &Report, data: &BaselineData) -> String {
    let mut out = String::new();
    let cfg = &report.config;
    let _ = writeln!(out, "# Benchmark report\n");
    let _ = writeln!(
        out,
        "- prompt: {}{}\n- task: {}\n- split: {}\n- cases: {} ({} not ok)\n",
        cfg.mode.label(),
        if report.simulated_user {
            " (simulated user)"
        } else {
            ""
        },
        cfg.task.as_deref().unwrap_or("–"),
        cfg.split.as_deref().unwrap_or("–"),
        report.cases.len(),
        report.failed_count(),
    );

    let rows = comparison_rows(report, data);
    for table in &data.tables {
        let ours: Vec<_> = rows.iter().filter(|r| r.table == table.id).collect();
        if ours.is_empty() {
            continue;
        }
        let _ = writeln!(out, "## {}\n", table.title);
        let header: Vec<&str> = table.columns.iter().map(|c| c.label.as_str()).collect();
        let _ = writeln!(out, "| Method | {} |", header.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(header.len()));
        let cell = |v: &Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "–".into());
        for b in &table.baselines {
            let cells: Vec<String> = b.values.iter().map(cell).collect();
            let _ = writeln!(out, "| {} | {} |", b.method, cells.join(" | "));
        }
        for r in ours {
            let cells: Vec<String> = r
                .values
                .iter()
                .zip(&r.deltas)
                .map(|(v, d)| match (v, d) {
                    (Some(v), Some(d)) => format!("{v:.2} ({})", format_delta(*d)),
                    (v, _) => cell(v),
                })
                .collect();
            let _ = writeln!(out, "| {} | {} |", r.method, cells.join(" | "));
        }
        out.push('\n');
    }

    let _ = writeln!(out, "## Summary\n");
    let s = report.summary.as_ref();
    let _ = writeln!(
        out,
        "| Dice (%) | NSD (%) | HD95 (mm) | Salient Dice (%) | Salient NSD (%) |"
    );
    let _ = writeln!(out, "|---|---|---|---|---|");
    let _ = writeln!(
        out,
        "| {} | {} | {} | {} | {} |\n",
        stat(s.map(|s| &s.dice), 100.0),
        stat(s.map(|s| &s.nsd), 100.0),
        stat(s.and_then(|s| s.hd95.as_ref()), 1.0),
        stat(s.and_then(|s| s.salient_dice.as_ref()), 100.0),
        stat(s.and_then(|s| s.salient_nsd.as_ref()), 100.0),
    );

    let _ = writeln!(out, "## Cases\n");
    let _ = writeln!(out, "| {} |", CSV_COLUMNS.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(CSV_COLUMNS.len()));
    for c in &report.cases {
        let m = c.metrics.as_ref();
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            c.case_id,
            num(m.map(|m| m.dice)),
            num(m.map(|m| m.nsd)),
            num(m.and_then(|m| m.hd95)),
            num(m.and_then(|m| m.salient_dice)),
            num(m.and_then(|m| m.salient_nsd)),
            c.rounds_used.map(|r| r.to_string()).unwrap_or_default(),
            c.status.as_str(),
        );
    }
    out
}

pub fn emit_report(
    report: &Report,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<(), BenchError> {
    let path = path.as_ref();
    fs::write(path, render_report(report, format)).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}
