// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

//! Plain CSV tables: `#` comment lines, one column-name row, LF endings,
//! numbers in 17 significant digits.

use std::io::{self, BufRead, Write};

use crate::error::{DiadError, Result};

/// Lossless decimal form of `v` (17 significant digits).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes comment lines, the column row and numeric rows.
pub fn write_table<W: Write>(
    mut w: W,
    comments: &[String],
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

/// A parsed table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Parses a table written by [`write_table`], checking every row's width.
pub fn read_table<R: BufRead>(r: R) -> Result<Table> {
    let mut comments = Vec::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim_start().to_string());
            continue;
        }
        match &columns {
            None => columns = Some(line.split(',').map(str::to_string).collect()),
            Some(cols) => {
                let row: std::result::Result<Vec<f64>, _> =
                    line.split(',').map(|c| c.trim().parse::<f64>()).collect();
                let row =
                    row.map_err(|e| DiadError::Validation(format!("line {}: {e}", lineno + 1)))?;
                if row.len() != cols.len() {
                    return Err(DiadError::Validation(format!(
                        "line {}: {} cells, expected {}",
                        lineno + 1,
                        row.len(),
                        cols.len()
                    )));
                }
                rows.push(row);
            }
        }
    }
    Ok(Table {
        comments,
        columns: columns.ok_or_else(|| DiadError::Validation("missing column row".into()))?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trips_bitwise(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..40)) {
            let mut buf = Vec::new();
            let rows: Vec<Vec<f64>> = values.chunks(2).map(|c| vec![c[0], *c.last().unwrap()]).collect();
            write_table(&mut buf, &["k=v".to_string()], &["a", "b"], rows.clone()).unwrap();
            let t = read_table(buf.as_slice()).unwrap();
            prop_assert_eq!(t.comments, vec!["k=v".to_string()]);
            prop_assert_eq!(t.rows, rows);
        }
    }

    #[test]
    fn rejects_ragged_rows() {
        let text = "a,b\n1,2\n3\n";
        assert!(read_table(text.as_bytes()).is_err());
    }
}
