//! Long-format result tables and their CSV form.
//!
//! Floats are written in Rust's shortest round-trip form with a forced
//! decimal point or exponent (`1.0`, `2.5e-7`), integers without one and
//! missing values as empty fields, so a CSV parses back to the same table.

use std::io::{Read, Write};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("no column named `{0}`")]
    MissingColumn(String),
    #[error("row has {got} cells, expected {expected}")]
    RowLength { expected: usize, got: usize },
    #[error("column `{column}` holds a non-numeric value in row {row}")]
    NotNumeric { column: String, row: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Float(x) => Some(x),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:?}"),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn parse(field: &str) -> Cell {
        if field.is_empty() {
            Cell::Missing
        } else if let Ok(i) = field.parse::<i64>() {
            Cell::Int(i)
        } else if let Ok(x) = field.parse::<f64>() {
            Cell::Float(x)
        } else {
            Cell::Text(field.to_string())
        }
    }

    /// Text form used for grouping and labels.
    pub fn label(&self) -> String {
        self.render()
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<(), TableError> {
        if row.len() != self.columns.len() {
            return Err(TableError::RowLength { expected: self.columns.len(), got: row.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, TableError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| TableError::MissingColumn(name.to_string()))
    }

    pub fn cell(&self, row: usize, column: &str) -> Result<&Cell, TableError> {
        Ok(&self.rows[row][self.column_index(column)?])
    }

    /// All values of a numeric column; missing cells become `None`.
    pub fn numbers(&self, column: &str) -> Result<Vec<Option<f64>>, TableError> {
        let c = self.column_index(column)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| match &row[c] {
                Cell::Missing => Ok(None),
                cell => cell
                    .as_f64()
                    .map(Some)
                    .ok_or_else(|| TableError::NotNumeric { column: column.to_string(), row: r }),
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TableError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, TableError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, TableError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let mut table = Self { columns, rows: Vec::new() };
        for record in r.records() {
            let row = record?.iter().map(Cell::parse).collect();
            table.push(row)?;
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_types_and_bits() {
        let mut t = ResultTable::new(["i", "x", "s", "gap"]);
        t.push(vec![3usize.into(), 1.0.into(), "tail-slope".into(), Cell::Missing]).unwrap();
        t.push(vec![0usize.into(), 0.1f64.into(), "a,b".into(), 2.5e-17.into()]).unwrap();
        t.push(vec![7usize.into(), 1e300.into(), "x".into(), (-0.0f64).into()]).unwrap();
        let csv = t.to_csv_string().unwrap();
        assert!(!csv.contains('\r'));
        assert_eq!(ResultTable::read_csv(csv.as_bytes()).unwrap(), t);
    }

    #[test]
    fn wrong_row_length_is_rejected() {
        let mut t = ResultTable::new(["a", "b"]);
        assert!(matches!(t.push(vec![1usize.into()]), Err(TableError::RowLength { expected: 2, got: 1 })));
    }
}
