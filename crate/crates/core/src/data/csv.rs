use std::path::Path;

use ndarray::Array2;

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Loads a headered CSV. The label column holds non-negative integers; every
/// other column is numeric and is min-max normalized to [0, 1] (constant
/// columns become 0).
pub fn load_csv(path: &Path, label_column: &str) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column)
}

pub(crate) fn read_csv<R: std::io::Read>(reader: R, label_column: &str) -> Result<LabeledDataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("reading CSV header: {e}")))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            Error::Schema(format!(
                "label column '{label_column}' not found in header [{}]",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_idx).collect();

    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Format(format!("CSV row {row}: {e}")))?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let label: usize = cell(label_idx).parse().map_err(|_| Error::Parse {
            row,
            column: label_column.to_string(),
            message: format!("'{}' is not a non-negative integer label", cell(label_idx)),
        })?;
        labels.push(label);
        for &c in &feature_cols {
            let v: f64 = cell(c).parse().map_err(|_| Error::Parse {
                row,
                column: headers[c].to_string(),
                message: format!("'{}' is not numeric", cell(c)),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[c].to_string(),
                    message: format!("'{}' is not finite", cell(c)),
                });
            }
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Schema("CSV has a header but no data rows".into()));
    }

    let mut features = Array2::from_shape_vec((labels.len(), feature_cols.len()), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    for mut column in features.columns_mut() {
        let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            column.mapv_inplace(|v| (v - lo) / (hi - lo));
        } else {
            column.fill(0.0);
        }
    }
    let num_classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    LabeledDataset::new(features, labels, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_two_classes() {
        let data = read_csv("a,b,y\n1,5,0\n2,5,1\n3,5,0\n".as_bytes(), "y").unwrap();
        assert_eq!((data.len(), data.dim(), data.num_classes()), (3, 2, 2));
        assert_eq!(data.features().column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(data.features().column(1).to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn label_column_may_sit_anywhere() {
        let data = read_csv("y,a\n2,0.5\n0,1.5\n".as_bytes(), "y").unwrap();
        assert_eq!(data.true_labels(), &[2, 0]);
        assert_eq!(data.num_classes(), 3);
    }

    #[test]
    fn non_numeric_cell_names_its_location() {
        let err = read_csv("a,b,y\n1,2,0\n3,abc,1\n".as_bytes(), "y").unwrap_err();
        match err {
            Error::Parse { row, column, message } => {
                assert_eq!((row, column.as_str()), (2, "b"));
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_label_column_is_a_schema_error() {
        let err = read_csv("a,b\n1,2\n".as_bytes(), "label").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }
}
