use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use selinf::DesignMatrix;

/// Numeric table read from a comma-separated file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: usize,
    pub cols: usize,
    /// Row-major values.
    pub values: Vec<f64>,
}

/// Reads a comma-separated numeric table. A first row whose first cell does
/// not parse as a number is taken as a header and skipped.
pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);

    let mut values = Vec::new();
    let mut cols = 0;
    let mut rows = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if k == 0 && record.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        if cols == 0 {
            cols = record.len();
        } else if record.len() != cols {
            bail!(
                "{}: line {line}: expected {cols} fields, found {}",
                path.display(),
                record.len()
            );
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                anyhow::anyhow!(
                    "{}: line {line}, column {}: cannot parse {cell:?} as a number",
                    path.display(),
                    c + 1
                )
            })?;
            if !v.is_finite() {
                bail!("{}: line {line}, column {}: value is not finite", path.display(), c + 1);
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        bail!("{}: no data rows", path.display());
    }
    Ok(Table { rows, cols, values })
}

pub fn read_design(path: &Path) -> Result<DesignMatrix> {
    let t = read_table(path)?;
    DesignMatrix::from_row_slice(t.rows, t.cols, &t.values)
        .with_context(|| format!("{}: invalid design", path.display()))
}

pub fn read_response(path: &Path) -> Result<Vec<f64>> {
    let t = read_table(path)?;
    if t.cols != 1 {
        bail!("{}: response must have one column, found {}", path.display(), t.cols);
    }
    Ok(t.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_is_detected() {
        let f = write("a,b\n1,2\n3,4\n");
        let t = read_table(f.path()).unwrap();
        assert_eq!((t.rows, t.cols), (2, 2));
        assert_eq!(t.values, vec![1.0, 2.0, 3.0, 4.0]);
        let g = write("1,2\n3,4\n");
        assert_eq!(read_table(g.path()).unwrap(), t);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let f = write("x\n1\n2\nthree\n");
        let err = read_table(f.path()).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        let g = write("1,2\n3\n");
        let err = format!("{:#}", read_table(g.path()).unwrap_err());
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn response_must_be_one_column() {
        let f = write("1,2\n");
        assert!(read_response(f.path()).is_err());
        assert!(read_table(Path::new("/definitely/missing.csv")).is_err());
    }
}
