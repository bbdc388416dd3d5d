//! Reference numbers quoted from published results, used only to render
//! comparisons. Values are percentages.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PromptMode;
use crate::BenchError;

const EMBEDDED: &str = include_str!("../data/baselines.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dice,
    Nsd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub task: String,
    pub metric: Metric,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub values: Vec<Option<f64>>,
}

/// A published row of the method under study, kept for side-by-side display.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportedRow {
    pub method: String,
    pub mode: PromptMode,
    pub salient: bool,
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub id: String,
    pub title: String,
    pub columns: Vec<Column>,
    pub baselines: Vec<MethodRow>,
    #[serde(default)]
    pub reported: Vec<ReportedRow>,
}

impl BaselineTable {
    /// Best (largest) baseline value per column.
    pub fn best(&self) -> Vec<Option<f64>> {
        (0..self.columns.len())
            .map(|j| {
                self.baselines
                    .iter()
                    .filter_map(|r| r.values[j])
                    .fold(None, |acc: Option<f64>, v| {
                        Some(acc.map_or(v, |a| a.max(v)))
                    })
            })
            .collect()
    }

    pub fn column(&self, task: &str, metric: Metric) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.task.eq_ignore_ascii_case(task) && c.metric == metric)
    }
}

/// Per-round interaction protocol of a baseline method. `dice_per_round`
/// (percent) is optional; without it only the protocol is shown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthBaseline {
    pub method: String,
    pub points_per_round: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dice_per_round: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineData {
    pub tables: Vec<BaselineTable>,
    #[serde(default)]
    pub growth: Vec<GrowthBaseline>,
}

impl BaselineData {
    /// The data file shipped with the crate.
    pub fn embedded() -> Self {
        Self::parse(EMBEDDED).expect("embedded baselines are valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let data: Self =
            serde_json::from_str(text).map_err(|e| BenchError::Baselines(e.to_string()))?;
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<(), BenchError> {
        for t in &self.tables {
            let n = t.columns.len();
            let rows = t.baselines.iter().map(|r| (&r.method, r.values.len()));
            let reported = t.reported.iter().map(|r| (&r.method, r.values.len()));
            for (method, len) in rows.chain(reported) {
                if len != n {
                    return Err(BenchError::Baselines(format!(
                        "table `{}`: row `{method}` has {len} values for {n} columns",
                        t.id
                    )));
                }
            }
        }
        for g in &self.growth {
            if let Some(d) = &g.dice_per_round {
                if d.len() != g.points_per_round.len() {
                    return Err(BenchError::Baselines(format!(
                        "growth row `{}`: rounds disagree",
                        g.method
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn table(&self, id: &str) -> Option<&BaselineTable> {
        self.tables.iter().find(|t| t.id == id)
    }
}
