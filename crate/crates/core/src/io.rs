//! Line-oriented CSV helpers shared by the library and the CLI.
//!
//! Floats are written with 17 significant digits so that every `f64`
//! round-trips exactly.

use std::fs::File;
use std::path::Path;

use crate::{Error, Matrix, Result};

/// Formats `x` with 17 significant digits (`{:.16e}`).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a headered CSV table.
pub fn write_table<S: AsRef<str>>(
    path: impl AsRef<Path>,
    header: &[S],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Headerless numeric matrix, row `i` = node `i`.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("bad number `{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// One label per line (headerless).
pub fn write_labels_csv(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for l in labels {
        w.write_record([l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    r.records()
        .enumerate()
        .map(|(idx, rec)| {
            let rec = rec?;
            let s = rec.get(0).unwrap_or("");
            s.parse::<usize>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("bad label `{s}`: {e}"),
            })
        })
        .collect()
}

/// Real-valued targets, one per line.
pub fn read_values_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let m = read_matrix_csv(path)?;
    Ok(m.column(0).iter().copied().collect())
}

/// Serde adapter storing a matrix as `{rows, cols, data}` with `data` row-major.
pub mod row_major {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::Matrix;

    #[derive(Serialize, Deserialize)]
    pub(crate) struct Record {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    impl From<&Matrix> for Record {
        fn from(m: &Matrix) -> Self {
            Self {
                rows: m.nrows(),
                cols: m.ncols(),
                data: m.transpose().as_slice().to_vec(),
            }
        }
    }

    impl TryFrom<Record> for Matrix {
        type Error = String;
        fn try_from(r: Record) -> Result<Self, String> {
            if r.data.len() != r.rows * r.cols {
                return Err(format!(
                    "{}x{} matrix with {} values",
                    r.rows,
                    r.cols,
                    r.data.len()
                ));
            }
            Ok(Matrix::from_row_slice(r.rows, r.cols, &r.data))
        }
    }

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        Record::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        Matrix::try_from(Record::deserialize(d)?).map_err(serde::de::Error::custom)
    }

    /// The same layout for a list of matrices.
    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[Matrix], s: S) -> Result<S::Ok, S::Error> {
            ms.iter().map(Record::from).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Matrix>, D::Error> {
            Vec::<Record>::deserialize(d)?
                .into_iter()
                .map(|r| Matrix::try_from(r).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}
