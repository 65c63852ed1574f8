//! Benchmark suites: datasets × methods, written as CSV, JSON records and a text table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cempca::data::LabeledDataset;

use crate::config::{Method, Settings};
use crate::record::{Metrics, RunRecord};
use crate::run::{fit_record, load_dataset, Generator, LabelSource};
use crate::{CliError, Result};

/// Suite file layout.
///
/// ```json
/// {
///   "seed": 1,
///   "datasets": [{"shape": "atom"}, {"name": "mine", "path": "mine.csv"}],
///   "methods": [{"method": "kmeans"}, {"name": "kmeans-pca(2)", "method": "kmeans-pca", "p": 2}],
///   "overrides": [{"dataset": "atom", "method": "kmeans", "restarts": 50}]
/// }
/// ```
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    /// Seed for datasets and methods that set none.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub datasets: Vec<DatasetSpec>,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub overrides: Vec<Override>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// Row label in the table; defaults to the shape or file stem.
    pub name: Option<String>,
    /// Generator name (an FCPS shape or `chang`).
    pub shape: Option<String>,
    /// CSV file with a header row; relative paths resolve against the suite file.
    pub path: Option<PathBuf>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub label_column: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSpec {
    /// Column label in the table; defaults to the method name.
    pub name: Option<String>,
    pub method: Method,
    #[serde(flatten)]
    pub settings: Settings,
}

impl MethodSpec {
    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.method.name().to_owned())
    }
}

/// Settings for one dataset/method cell, applied over the method's own.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Override {
    pub dataset: String,
    /// Method column label.
    pub method: String,
    #[serde(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone)]
pub enum CellOutcome {
    Done(Box<RunRecord>),
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub dataset: String,
    pub method: String,
    pub outcome: CellOutcome,
}

impl Cell {
    pub fn metrics(&self) -> Option<Metrics> {
        match &self.outcome {
            CellOutcome::Done(r) => r.metrics,
            CellOutcome::Failed(_) => None,
        }
    }
}

pub struct Report {
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    /// Row-major: dataset, then method.
    pub cells: Vec<Cell>,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid suite {}: {e}", path.display())))
    }

    fn dataset(&self, spec: &DatasetSpec, base: &Path) -> Result<LabeledDataset> {
        let mut ds = match (&spec.shape, &spec.path) {
            (Some(shape), None) => {
                let mut ds =
                    Generator::parse(shape)?.generate(spec.n, spec.seed.unwrap_or(self.seed))?;
                ds.name = shape.to_lowercase();
                ds
            }
            (None, Some(path)) => {
                let labels = spec
                    .label_column
                    .clone()
                    .map_or(LabelSource::Auto, LabelSource::Column);
                load_dataset(&base.join(path), &labels)?
            }
            _ => {
                return Err(CliError::Usage(
                    "each dataset needs exactly one of 'shape' and 'path'".into(),
                ))
            }
        };
        if let Some(name) = &spec.name {
            ds.name = name.clone();
        }
        Ok(ds)
    }

    /// Runs every cell; failures are recorded and the suite carries on.
    pub fn run(&self, base: &Path) -> Result<Report> {
        let datasets: Vec<std::result::Result<LabeledDataset, String>> = self
            .datasets
            .iter()
            .map(|spec| self.dataset(spec, base).map_err(|e| e.to_string()))
            .collect();
        let names: Vec<String> = self
            .datasets
            .iter()
            .zip(&datasets)
            .map(|(spec, ds)| match ds {
                Ok(ds) => ds.name.clone(),
                Err(_) => spec
                    .name
                    .clone()
                    .or(spec.shape.clone())
                    .unwrap_or_else(|| "?".into()),
            })
            .collect();
        let methods: Vec<String> = self.methods.iter().map(MethodSpec::label).collect();
        let jobs: Vec<(usize, usize)> = (0..datasets.len())
            .flat_map(|i| (0..self.methods.len()).map(move |j| (i, j)))
            .collect();
        let cells = jobs
            .par_iter()
            .map(|&(i, j)| {
                let outcome = match &datasets[i] {
                    Err(e) => CellOutcome::Failed(e.clone()),
                    Ok(ds) => match self.cell(ds, &names[i], &self.methods[j]) {
                        Ok(record) => CellOutcome::Done(Box::new(record)),
                        Err(e) => CellOutcome::Failed(e.to_string()),
                    },
                };
                Cell {
                    dataset: names[i].clone(),
                    method: methods[j].clone(),
                    outcome,
                }
            })
            .collect();
        Ok(Report {
            datasets: names,
            methods,
            cells,
        })
    }

    fn cell(&self, ds: &LabeledDataset, dataset: &str, spec: &MethodSpec) -> Result<RunRecord> {
        let mut settings = Settings {
            seed: Some(self.seed),
            ..Settings::default()
        }
        .overlay(&spec.settings);
        for o in &self.overrides {
            if o.dataset == dataset && o.method == spec.label() {
                settings = settings.overlay(&o.settings);
            }
        }
        let config = settings.resolve(spec.method, ds.n(), ds.d(), ds.class_count())?;
        Ok(fit_record(ds, &config)?.0)
    }
}

impl Report {
    pub fn cell(&self, dataset: usize, method: usize) -> &Cell {
        &self.cells[dataset * self.methods.len() + method]
    }

    /// Iteration counts of every completed CEM-PCA cell.
    pub fn cempca_iterations(&self) -> Vec<usize> {
        self.cells
            .iter()
            .filter_map(|c| match &c.outcome {
                CellOutcome::Done(r) if r.config.method == Method::Cempca => Some(r.iterations),
                _ => None,
            })
            .collect()
    }

    pub fn csv(&self) -> Result<String> {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record([
            "dataset",
            "method",
            "status",
            "nmi",
            "ari",
            "acc",
            "iterations",
            "objective",
            "wall_time",
            "seed",
        ])?;
        for cell in &self.cells {
            let row: Vec<String> = match &cell.outcome {
                CellOutcome::Done(r) => {
                    let m = |f: fn(&Metrics) -> f64| {
                        r.metrics
                            .as_ref()
                            .map_or(String::new(), |m| f(m).to_string())
                    };
                    vec![
                        cell.dataset.clone(),
                        cell.method.clone(),
                        "ok".into(),
                        m(|m| m.nmi),
                        m(|m| m.ari),
                        m(|m| m.acc),
                        r.iterations.to_string(),
                        r.objective_final.to_string(),
                        r.wall_time.to_string(),
                        r.seed.to_string(),
                    ]
                }
                CellOutcome::Failed(e) => {
                    let mut row = vec![
                        cell.dataset.clone(),
                        cell.method.clone(),
                        format!("failed: {e}"),
                    ];
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row
                }
            };
            out.write_record(&row)?;
        }
        String::from_utf8(
            out.into_inner()
                .map_err(|e| CliError::Data(e.to_string()))?,
        )
        .map_err(|e| CliError::Data(e.to_string()))
    }

    /// Aligned table of `NMI/ARI/Acc` with two decimals; `*` marks the best NMI per row.
    pub fn table(&self) -> String {
        let fmt = |m: &Metrics| format!("{:.2}/{:.2}/{:.2}", m.nmi, m.ari, m.acc);
        let mut rows: Vec<Vec<String>> = vec![std::iter::once("dataset".to_owned())
            .chain(self.methods.iter().cloned())
            .collect()];
        for (i, dataset) in self.datasets.iter().enumerate() {
            let best = (0..self.methods.len())
                .filter_map(|j| self.cell(i, j).metrics())
                .map(|m| (m.nmi * 100.0).round())
                .fold(f64::NEG_INFINITY, f64::max);
            let mut row = vec![dataset.clone()];
            for j in 0..self.methods.len() {
                let cell = self.cell(i, j);
                row.push(match (&cell.outcome, cell.metrics()) {
                    (CellOutcome::Failed(_), _) => "failed".into(),
                    (_, None) => "n/a".into(),
                    (_, Some(m)) if (m.nmi * 100.0).round() == best => format!("*{}", fmt(&m)),
                    (_, Some(m)) => fmt(&m),
                });
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:>w$}"))
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
        }
        let iterations = self.cempca_iterations();
        if !iterations.is_empty() {
            let mut sorted = iterations.clone();
            sorted.sort_unstable();
            let mid = sorted.len() / 2;
            let median = if sorted.len().is_multiple_of(2) {
                (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
            } else {
                sorted[mid] as f64
            };
            writeln!(
                out,
                "cempca iterations: median {median}, max {} over {} runs",
                sorted.last().unwrap(),
                sorted.len()
            )
            .unwrap();
        }
        out
    }

    /// Writes `results.csv`, `runs.json` and `table.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("results.csv"), self.csv()?)?;
        let records: Vec<&RunRecord> = self
            .cells
            .iter()
            .filter_map(|c| match &c.outcome {
                CellOutcome::Done(r) => Some(r.as_ref()),
                CellOutcome::Failed(_) => None,
            })
            .collect();
        fs::write(
            dir.join("runs.json"),
            serde_json::to_string_pretty(&records)?,
        )?;
        fs::write(dir.join("table.txt"), self.table())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn suite(json: &str) -> Suite {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn empty_suite_gives_an_empty_table() {
        let report = Suite::default().run(Path::new(".")).unwrap();
        assert!(report.cells.is_empty());
        assert_eq!(report.table().trim(), "dataset");
        assert_eq!(report.csv().unwrap().lines().count(), 1);
    }

    #[test]
    fn failures_are_recorded_and_the_suite_continues() {
        let s = suite(
            r#"{"seed": 1, "datasets": [{"shape": "tetra", "n": 80}],
                "methods": [{"method": "kmeans", "restarts": 2},
                            {"name": "bad", "method": "kmeans", "g": 500}]}"#,
        );
        let report = s.run(Path::new(".")).unwrap();
        assert!(matches!(report.cell(0, 0).outcome, CellOutcome::Done(_)));
        assert!(matches!(report.cell(0, 1).outcome, CellOutcome::Failed(_)));
        assert!(report.table().contains("failed"));
    }

    #[test]
    fn overrides_apply_to_their_cell_only() {
        let s = suite(
            r#"{"datasets": [{"shape": "hepta", "n": 140}, {"shape": "tetra", "n": 80}],
                "methods": [{"method": "kmeans", "restarts": 1}],
                "overrides": [{"dataset": "tetra", "method": "kmeans", "restarts": 3}]}"#,
        );
        let report = s.run(Path::new(".")).unwrap();
        let restarts = |i| match &report.cell(i, 0).outcome {
            CellOutcome::Done(r) => r.config.restarts,
            CellOutcome::Failed(e) => panic!("{e}"),
        };
        assert_eq!((restarts(0), restarts(1)), (1, 3));
    }

    #[test]
    fn table_and_csv_carry_the_same_numbers() {
        let s = suite(
            r#"{"seed": 2, "datasets": [{"shape": "hepta", "n": 140}],
                "methods": [{"method": "kmeans", "restarts": 3}, {"method": "em-gmm", "restarts": 2}]}"#,
        );
        let report = s.run(Path::new(".")).unwrap();
        let csv = report.csv().unwrap();
        let table = report.table();
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let rounded: Vec<String> = fields[3..6]
                .iter()
                .map(|v| format!("{:.2}", v.parse::<f64>().unwrap()))
                .collect();
            assert!(table.contains(&rounded.join("/")), "{table}\n{line}");
        }
        assert!(table.contains('*'));
    }

    #[test]
    fn datasets_need_exactly_one_source() {
        let s = suite(r#"{"datasets": [{"name": "x"}], "methods": [{"method": "kmeans"}]}"#);
        let report = s.run(Path::new(".")).unwrap();
        assert!(matches!(report.cell(0, 0).outcome, CellOutcome::Failed(_)));
    }
}
