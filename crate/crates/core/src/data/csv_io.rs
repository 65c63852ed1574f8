use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Selects the column holding ground-truth labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// Header name; requires a header line.
    Name(String),
    /// Zero-based column index.
    Index(usize),
}

/// Reads a comma-separated file of reals.
///
/// Labels are kept verbatim when every label parses as a non-negative integer, otherwise
/// they are numbered in order of first appearance.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: Option<&LabelColumn>,
    has_header: bool,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Option<Vec<String>> = if has_header {
        let h = reader.headers().map_err(|e| csv_error(e, 1))?;
        Some(h.iter().map(str::to_owned).collect())
    } else {
        None
    };

    let label_idx = match label_column {
        None => None,
        Some(LabelColumn::Index(i)) => Some(*i),
        Some(LabelColumn::Name(name)) => {
            let h = header.as_ref().ok_or_else(|| {
                Error::invalid(format!(
                    "label column '{name}' given by name but file has no header"
                ))
            })?;
            Some(
                h.iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::invalid(format!("no column named '{name}' in header")))?,
            )
        }
    };

    let first_data_line = if has_header { 2 } else { 1 };
    let mut width: Option<usize> = header.as_ref().map(Vec::len);
    let mut values: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut rows = 0usize;

    for (r, record) in reader.records().enumerate() {
        let line = first_data_line + r;
        let record = record.map_err(|e| csv_error(e, line))?;
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    row: line,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        if let Some(li) = label_idx {
            if li >= record.len() {
                return Err(Error::invalid(format!(
                    "label column {li} out of range for {} columns",
                    record.len()
                )));
            }
        }
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_idx {
                raw_labels.push(cell.to_owned());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: c + 1,
                message: format!("'{cell}' is not a real number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: c + 1,
                    message: format!("'{cell}' is not finite"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }

    let d = width.unwrap_or(0) - usize::from(label_idx.is_some() && width.is_some());
    let x = Matrix::from_row_slice(rows, d, &values);
    let labels = label_idx.map(|_| encode_labels(&raw_labels));
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    LabeledDataset::new(x, labels, name)
}

fn csv_error(e: csv::Error, line: usize) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            row: line,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

fn encode_labels(raw: &[String]) -> Vec<usize> {
    if let Ok(numeric) = raw
        .iter()
        .map(|s| s.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
    {
        return numeric;
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    raw.iter()
        .map(|s| {
            let next = seen.len();
            *seen.entry(s.as_str()).or_insert(next)
        })
        .collect()
}

/// Writes `x0..x{d-1}` columns plus a trailing `label` column when labels are present.
pub fn write_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    let mut header: Vec<String> = (0..dataset.d()).map(|j| format!("x{j}")).collect();
    if dataset.labels.is_some() {
        header.push("label".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..dataset.n() {
        let mut cells: Vec<String> = dataset.x.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(labels) = &dataset.labels {
            cells.push(labels[i].to_string());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn temp_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn label_column_by_index() {
        let f = temp_file("1,2,a\n3,4,a\n5,6,b\n");
        let ds = load_csv(f.path(), Some(&LabelColumn::Index(2)), false).unwrap();
        assert_eq!(ds.x.shape(), (3, 2));
        assert_eq!(ds.labels, Some(vec![0, 0, 1]));
        assert_eq!(ds.x[(2, 1)], 6.0);
    }

    #[test]
    fn header_without_labels() {
        let f = temp_file("x,y\n1,2\n3,4\n5,6\n7,8\n");
        let ds = load_csv(f.path(), None, true).unwrap();
        assert_eq!(ds.n(), 4);
        assert!(ds.labels.is_none());
    }

    #[test]
    fn label_column_by_name() {
        let f = temp_file("label,x\n2,0.5\n0,1.5\n");
        let ds = load_csv(f.path(), Some(&LabelColumn::Name("label".into())), true).unwrap();
        assert_eq!(ds.labels, Some(vec![2, 0]));
        assert_eq!(ds.x.shape(), (2, 1));
    }

    #[test]
    fn name_without_header_is_rejected() {
        let f = temp_file("1,2\n");
        let err = load_csv(f.path(), Some(&LabelColumn::Name("y".into())), false).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn ragged_rows_report_location() {
        let f = temp_file("1,2\n3\n");
        match load_csv(f.path(), None, false).unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn bad_cell_reports_row_and_column() {
        let f = temp_file("a,b\n1,2\n3,zz\n");
        match load_csv(f.path(), None, true).unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (3, 2)),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/nonexistent/definitely/missing.csv", None, false).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn write_then_load_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = Matrix::from_fn(10, 4, |_, _| rng.random::<f64>() * 200.0 - 100.0);
        let labels: Vec<usize> = (0..10).map(|i| i % 3).collect();
        let ds = LabeledDataset::new(x, Some(labels), "rt").unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, f.path()).unwrap();
        let back = load_csv(f.path(), Some(&LabelColumn::Name("label".into())), true).unwrap();
        assert_eq!(back.labels, ds.labels);
        assert!((back.x - &ds.x).amax() <= 1e-12);
    }
}
