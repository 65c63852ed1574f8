//! Reading label vectors from result JSON files or CSV columns.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use crate::{CliError, Result};

/// Column used when none is named and the file has one.
pub const DEFAULT_LABEL_COLUMN: &str = "label";

/// Header of a CSV file, or `None` for an empty file.
pub fn csv_header(path: &Path) -> Result<Option<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let header = reader.headers()?;
    Ok((!header.is_empty()).then(|| header.iter().map(str::to_owned).collect()))
}

/// Labels as integers numbered by first appearance.
pub fn encode(raw: &[String]) -> Vec<usize> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    raw.iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l.as_str()).or_insert(next)
        })
        .collect()
}

/// Reads one label vector.
///
/// `.json` files must hold an `assignments` array (as written by `fit`). CSV files need a
/// header; the column is `column` if given, else `label` if present, else the only or the
/// last column.
pub fn read_labels(path: &Path, column: Option<&str>) -> Result<Vec<String>> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        let value: serde_json::Value = serde_json::from_reader(File::open(path)?)?;
        let assignments = value
            .get("assignments")
            .and_then(|a| a.as_array())
            .ok_or_else(|| {
                CliError::Data(format!("{} has no 'assignments' array", path.display()))
            })?;
        return assignments
            .iter()
            .map(|a| match a {
                serde_json::Value::Number(n) => Ok(n.to_string()),
                serde_json::Value::String(s) => Ok(s.clone()),
                other => Err(CliError::Data(format!("unexpected assignment {other}"))),
            })
            .collect();
    }
    let header =
        csv_header(path)?.ok_or_else(|| CliError::Data(format!("{} is empty", path.display())))?;
    let idx = match column {
        Some(name) => header.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Data(format!("no column named '{name}' in {}", path.display()))
        })?,
        None => header
            .iter()
            .position(|h| h == DEFAULT_LABEL_COLUMN)
            .unwrap_or(header.len() - 1),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(File::open(path)?);
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = record.get(idx).ok_or_else(|| {
            CliError::Data(format!(
                "row {} of {} has no column {idx}",
                row + 2,
                path.display()
            ))
        })?;
        labels.push(cell.to_owned());
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(name: &str, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        (dir, path)
    }

    #[test]
    fn encoding_follows_first_appearance() {
        let raw: Vec<String> = ["b", "a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(encode(&raw), vec![0, 1, 0, 2]);
    }

    #[test]
    fn label_column_is_preferred_over_the_last_one() {
        let (_d, path) = file("x.csv", "x0,label,x1\n1,a,2\n3,b,4\n");
        assert_eq!(read_labels(&path, None).unwrap(), vec!["a", "b"]);
        assert_eq!(read_labels(&path, Some("x1")).unwrap(), vec!["2", "4"]);
    }

    #[test]
    fn single_column_files_need_no_name() {
        let (_d, path) = file("p.csv", "cluster\n0\n1\n1\n");
        assert_eq!(read_labels(&path, None).unwrap(), vec!["0", "1", "1"]);
    }

    #[test]
    fn result_json_assignments_are_read() {
        let (_d, path) = file("r.json", r#"{"assignments": [1, 0, 2]}"#);
        assert_eq!(read_labels(&path, None).unwrap(), vec!["1", "0", "2"]);
    }

    #[test]
    fn missing_column_is_a_data_error() {
        let (_d, path) = file("x.csv", "a,b\n1,2\n");
        assert_eq!(read_labels(&path, Some("zzz")).unwrap_err().exit_code(), 3);
    }
}
