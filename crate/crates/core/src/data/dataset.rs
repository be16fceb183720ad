use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::data::Schema;
use crate::error::{Error, Result};

/// `n` records of coded categorical values, stored row-major with 0-based codes.
///
/// Record ids are the row positions; every transformation in this crate keeps them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalDataset {
    schema: Arc<Schema>,
    codes: Vec<u16>,
    n: usize,
}

impl CategoricalDataset {
    /// Builds a dataset from 0-based level codes, validating every cell.
    pub fn from_rows(schema: Arc<Schema>, rows: Vec<Vec<u16>>) -> Result<Self> {
        let p = schema.len();
        if rows.is_empty() {
            return Err(Error::invalid("dataset needs at least one record"));
        }
        let mut codes = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::invalid(format!(
                    "row {} has {} values, schema has {p} variables",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v as usize >= schema.levels(j) {
                    return Err(Error::OutOfRange {
                        row: i + 1,
                        column: schema.name(j).to_string(),
                        value: v as i64 + 1,
                        levels: schema.levels(j),
                    });
                }
            }
            codes.extend_from_slice(row);
        }
        Ok(CategoricalDataset {
            schema,
            codes,
            n: rows.len(),
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, i: usize) -> &[u16] {
        let p = self.p();
        &self.codes[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u16]> {
        self.codes.chunks_exact(self.p())
    }

    pub fn value(&self, i: usize, var: usize) -> u16 {
        self.codes[i * self.p() + var]
    }

    pub fn column(&self, var: usize) -> Vec<u16> {
        self.rows().map(|r| r[var]).collect()
    }

    pub fn sensitive_column(&self) -> Vec<u16> {
        self.column(self.schema.sensitive_index())
    }

    /// Copy of this dataset with the sensitive column replaced; key columns are untouched.
    pub fn with_sensitive_column(&self, values: &[u16]) -> Result<Self> {
        if values.len() != self.n {
            return Err(Error::invalid(format!(
                "replacement column has {} values for {} records",
                values.len(),
                self.n
            )));
        }
        let s = self.schema.sensitive_index();
        let g = self.schema.sensitive_levels();
        let p = self.p();
        let mut codes = self.codes.clone();
        for (i, &v) in values.iter().enumerate() {
            if v as usize >= g {
                return Err(Error::OutOfRange {
                    row: i + 1,
                    column: self.schema.name(s).to_string(),
                    value: v as i64 + 1,
                    levels: g,
                });
            }
            codes[i * p + s] = v;
        }
        Ok(CategoricalDataset {
            schema: Arc::clone(&self.schema),
            codes,
            n: self.n,
        })
    }

    /// True when every non-sensitive cell matches `other` exactly.
    pub fn keys_identical(&self, other: &CategoricalDataset) -> bool {
        if self.schema != other.schema || self.n != other.n {
            return false;
        }
        let s = self.schema.sensitive_index();
        self.rows()
            .zip(other.rows())
            .all(|(a, b)| a.iter().zip(b).enumerate().all(|(j, (x, y))| j == s || x == y))
    }
}

/// Reads a delimiter-separated file with a header row; `#` lines are comments.
///
/// Columns may appear in any order but must match the schema names exactly.
pub fn load_dataset(path: impl AsRef<Path>, schema: Arc<Schema>) -> Result<CategoricalDataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let header = reader.headers().map_err(csv_err)?.clone();

    let mut column_of = vec![usize::MAX; schema.len()];
    for (c, name) in header.iter().enumerate() {
        let j = schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        column_of[j] = c;
    }
    if let Some(j) = column_of.iter().position(|&c| c == usize::MAX) {
        return Err(Error::MissingColumn(schema.name(j).to_string()));
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let mut row = Vec::with_capacity(schema.len());
        for (j, &c) in column_of.iter().enumerate() {
            let raw = record.get(c).unwrap_or("");
            let value: i64 = raw.parse().map_err(|_| Error::MissingValue {
                row: i + 1,
                column: schema.name(j).to_string(),
                raw: raw.to_string(),
            })?;
            if value < 1 || value as usize > schema.levels(j) {
                return Err(Error::OutOfRange {
                    row: i + 1,
                    column: schema.name(j).to_string(),
                    value,
                    levels: schema.levels(j),
                });
            }
            row.push((value - 1) as u16);
        }
        rows.push(row);
    }
    CategoricalDataset::from_rows(schema, rows)
}

/// Renders the dataset in the ingest format, optionally preceded by a `#` provenance line.
pub fn dataset_to_string(data: &CategoricalDataset, provenance: Option<&str>) -> String {
    let mut out = String::with_capacity(data.n() * data.p() * 4 + 64);
    if let Some(line) = provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let names: Vec<&str> = data.schema().variables().iter().map(|v| v.name.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in data.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&(*v as u32 + 1).to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(
    path: impl AsRef<Path>,
    data: &CategoricalDataset,
    provenance: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(dataset_to_string(data, provenance).as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Variable;

    fn two_var_schema() -> Arc<Schema> {
        Arc::new(
            Schema::new(vec![Variable::key("age", 5), Variable::sensitive("county", 3)]).unwrap(),
        )
    }

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn loads_minimal_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "d.csv", "age,county\n1,1\n1,1\n1,1\n");
        let data = load_dataset(&path, two_var_schema()).unwrap();
        assert_eq!(data.n(), 3);
        assert!(data.rows().all(|r| r == [0, 0]));
    }

    #[test]
    fn out_of_range_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "d.csv", "age,county\n1,1\n6,2\n");
        match load_dataset(&path, two_var_schema()) {
            Err(Error::OutOfRange { row, column, value, levels }) => {
                assert_eq!((row, column.as_str(), value, levels), (2, "age", 6, 5));
            }
            other => panic!("expected out-of-range, got {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_cell_unknown_column_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "d.csv", "age,county\n1,\n");
        assert!(matches!(
            load_dataset(&path, two_var_schema()),
            Err(Error::MissingValue { row: 1, .. })
        ));
        let path = write(&dir, "e.csv", "age,county,zip\n1,1,1\n");
        assert!(matches!(
            load_dataset(&path, two_var_schema()),
            Err(Error::UnknownColumn(c)) if c == "zip"
        ));
        let path = write(&dir, "f.csv", "age\n1\n");
        assert!(matches!(
            load_dataset(&path, two_var_schema()),
            Err(Error::MissingColumn(c)) if c == "county"
        ));
        assert!(matches!(
            load_dataset(dir.path().join("nope.csv"), two_var_schema()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn header_order_is_free_and_comments_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "d.csv", "# provenance\ncounty,age\n3,5\n");
        let data = load_dataset(&path, two_var_schema()).unwrap();
        assert_eq!(data.row(0), &[4, 2]);
    }

    #[test]
    fn replacing_sensitive_keeps_keys() {
        let schema = two_var_schema();
        let data =
            CategoricalDataset::from_rows(schema, vec![vec![0, 0], vec![4, 1], vec![2, 2]]).unwrap();
        let synth = data.with_sensitive_column(&[2, 2, 2]).unwrap();
        assert!(data.keys_identical(&synth));
        assert_eq!(synth.sensitive_column(), vec![2, 2, 2]);
        assert!(data.with_sensitive_column(&[3, 0, 0]).is_err());
        assert!(data.with_sensitive_column(&[0]).is_err());
    }
}
