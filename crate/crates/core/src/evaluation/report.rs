use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runs::read_runs_csv;
use super::stats::{compare_runs, RunComparison};
use super::{mean, std_dev, EvalError, Metric, Result, RunResult};
use crate::graph::Scheme;

pub const ALPHA: f64 = 0.05;

/// Runs of one model trained on one annotation scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub model: String,
    pub scheme: Scheme,
    pub runs: Vec<RunResult>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonKind {
    /// Scheme A against whichever expert scheme has the higher mean.
    AVersusBestB,
    /// Grouping against grouping plus connectivity.
    GroupingVersusConnectivity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub model: String,
    pub kind: ComparisonKind,
    pub scheme_a: Scheme,
    pub scheme_b: Scheme,
    #[serde(flatten)]
    pub stats: RunComparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    pub std: f64,
    pub best: bool,
    /// Scheme A differs significantly from the best expert scheme.
    pub star: bool,
    /// Grouping and grouping plus connectivity differ significantly.
    pub plus: bool,
}

impl Cell {
    fn rounded(&self) -> String {
        format!("{:.2}", self.mean)
    }

    fn markers(&self) -> String {
        let mut m = String::new();
        if self.star {
            m.push('*');
        }
        if self.plus {
            m.push('+');
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    /// Indexed `scheme * 3 + metric` over [`ResultTable::schemes`] and [`Metric::ALL`].
    pub cells: Vec<Option<Cell>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub title: String,
    pub schemes: Vec<Scheme>,
    /// Runs per condition.
    pub runs: usize,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub table: ResultTable,
    pub comparisons: Vec<Comparison>,
}

/// Means per model and scheme with significance markers and the best value
/// of every column in bold.
pub fn build_report(title: &str, conditions: &[Condition]) -> Result<Report> {
    let first = conditions
        .first()
        .ok_or_else(|| EvalError::Report("no conditions to report".into()))?;
    let n_runs = first.runs.len();
    let mut models: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for c in conditions {
        if c.runs.len() != n_runs {
            return Err(EvalError::Report(format!(
                "{} on {} has {} runs, {} on {} has {n_runs}",
                c.model,
                c.scheme,
                c.runs.len(),
                first.model,
                first.scheme
            )));
        }
        if c.runs.is_empty() {
            return Err(EvalError::Report(format!("{} on {} has no runs", c.model, c.scheme)));
        }
        if !seen.insert((c.model.clone(), c.scheme)) {
            return Err(EvalError::Report(format!("{} on {} listed twice", c.model, c.scheme)));
        }
        if !models.contains(&c.model) {
            models.push(c.model.clone());
        }
    }
    let schemes: Vec<Scheme> = Scheme::ALL
        .into_iter()
        .filter(|s| conditions.iter().any(|c| c.scheme == *s))
        .collect();
    let find = |model: &str, scheme: Scheme| {
        conditions
            .iter()
            .find(|c| c.model == model && c.scheme == scheme)
    };

    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    for model in &models {
        let mut cells = Vec::new();
        for &scheme in &schemes {
            for metric in Metric::ALL {
                cells.push(find(model, scheme).map(|c| {
                    let xs: Vec<f64> = c.runs.iter().map(|r| r.metric(metric)).collect();
                    Cell {
                        mean: mean(&xs),
                        std: std_dev(&xs),
                        best: false,
                        star: false,
                        plus: false,
                    }
                }));
            }
        }
        let a = find(model, Scheme::A);
        let g = find(model, Scheme::Grouping);
        let gc = find(model, Scheme::GroupingConnectivity);
        for (mi, metric) in Metric::ALL.into_iter().enumerate() {
            let col = |s: Scheme| schemes.iter().position(|&x| x == s).unwrap() * 3 + mi;
            let best_b = match (g, gc) {
                (Some(g), Some(gc)) => {
                    let mg = cells[col(Scheme::Grouping)].as_ref().unwrap().mean;
                    let mgc = cells[col(Scheme::GroupingConnectivity)].as_ref().unwrap().mean;
                    Some(if mgc > mg { gc } else { g })
                }
                (Some(b), None) | (None, Some(b)) => Some(b),
                (None, None) => None,
            };
            if let (Some(a), Some(b)) = (a, best_b) {
                let stats = compare_runs(&a.runs, &b.runs, metric, ALPHA)?;
                if stats.significant {
                    cells[col(Scheme::A)].as_mut().unwrap().star = true;
                }
                comparisons.push(Comparison {
                    model: model.clone(),
                    kind: ComparisonKind::AVersusBestB,
                    scheme_a: Scheme::A,
                    scheme_b: b.scheme,
                    stats,
                });
            }
            if let (Some(g), Some(gc)) = (g, gc) {
                let stats = compare_runs(&g.runs, &gc.runs, metric, ALPHA)?;
                if stats.significant {
                    cells[col(Scheme::GroupingConnectivity)].as_mut().unwrap().plus = true;
                }
                comparisons.push(Comparison {
                    model: model.clone(),
                    kind: ComparisonKind::GroupingVersusConnectivity,
                    scheme_a: Scheme::Grouping,
                    scheme_b: Scheme::GroupingConnectivity,
                    stats,
                });
            }
        }
        rows.push(TableRow {
            model: model.clone(),
            cells,
        });
    }

    // bold compares the printed (rounded) values so ties render consistently
    for col in 0..schemes.len() * 3 {
        let best = rows
            .iter()
            .filter_map(|r| r.cells[col].as_ref())
            .map(|c| c.rounded())
            .max_by(|x, y| x.parse::<f64>().unwrap().total_cmp(&y.parse().unwrap()));
        if let Some(best) = best {
            for r in &mut rows {
                if let Some(c) = r.cells[col].as_mut() {
                    c.best = c.rounded() == best;
                }
            }
        }
    }

    Ok(Report {
        table: ResultTable {
            title: title.to_string(),
            schemes,
            runs: n_runs,
            rows,
        },
        comparisons,
    })
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let t = &self.table;
        let mut out = format!("### {}\n\n| Model |", t.title);
        for s in &t.schemes {
            for m in Metric::ALL {
                out.push_str(&format!(" {} {} |", s.short_label(), m.title()));
            }
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(t.schemes.len() * 3));
        out.push('\n');
        for row in &t.rows {
            out.push_str(&format!("| {} |", row.model));
            for cell in &row.cells {
                match cell {
                    None => out.push_str(" - |"),
                    Some(c) => {
                        let v = if c.best {
                            format!("**{}**", c.rounded())
                        } else {
                            c.rounded()
                        };
                        out.push_str(&format!(" {v}{} |", c.markers().replace('*', "\\*")));
                    }
                }
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "\nMeans over {} runs. `*` A differs from the best expert graph, `+` G differs from G+C (Mann-Whitney U, p < {ALPHA}). Bold marks the best value in each column.\n",
            self.table.runs
        ));
        out
    }

    /// Long format: one line per model, scheme and metric.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "scheme", "metric", "mean", "std", "best", "markers"])
            .expect("in-memory csv");
        let t = &self.table;
        for row in &t.rows {
            for (si, s) in t.schemes.iter().enumerate() {
                for (mi, m) in Metric::ALL.into_iter().enumerate() {
                    if let Some(c) = &row.cells[si * 3 + mi] {
                        w.write_record([
                            row.model.clone(),
                            s.as_str().to_string(),
                            m.as_str().to_string(),
                            format!("{:.4}", c.mean),
                            format!("{:.4}", c.std),
                            c.best.to_string(),
                            c.markers(),
                        ])
                        .expect("in-memory csv");
                    }
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }
}

/// JSON description of a table: `{"title": .., "conditions": [{"model": ..,
/// "scheme": "a", "runs": "path/to/runs.csv"}]}`. Relative run paths resolve
/// against the plan's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportPlan {
    pub title: String,
    pub conditions: Vec<PlannedCondition>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannedCondition {
    pub model: String,
    pub scheme: Scheme,
    pub runs: PathBuf,
}

impl ReportPlan {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut plan: ReportPlan = serde_json::from_str(&text).map_err(|e| EvalError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut plan.conditions {
            if c.runs.is_relative() {
                c.runs = base.join(&c.runs);
            }
        }
        Ok(plan)
    }

    pub fn build(&self) -> Result<Report> {
        let conditions = self
            .conditions
            .iter()
            .map(|c| {
                Ok(Condition {
                    model: c.model.clone(),
                    scheme: c.scheme,
                    runs: read_runs_csv(&c.runs)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        build_report(&self.title, &conditions)
    }
}
