//! Plain numeric CSV tables.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! every value reads back bit-exactly. Separator `,`, newline `\n`, UTF-8.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Index(Vec<usize>),
    Float(Vec<f64>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Index(v) => v.len(),
            Column::Float(v) => v.len(),
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Column-oriented table with a header row.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    headers: Vec<String>,
    columns: Vec<Column>,
}

impl CsvTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn index(mut self, name: &str, values: Vec<usize>) -> Self {
        self.headers.push(name.to_string());
        self.columns.push(Column::Index(values));
        self
    }

    pub fn float(mut self, name: &str, values: Vec<f64>) -> Self {
        self.headers.push(name.to_string());
        self.columns.push(Column::Float(values));
        self
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn render(&self) -> Result<String> {
        let rows = self.columns.first().map_or(0, Column::len);
        if self.columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidArgument("ragged CSV columns".into()));
        }
        let mut out = self.headers.join(",");
        out.push('\n');
        for i in 0..rows {
            for (j, col) in self.columns.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                match col {
                    Column::Index(v) => write!(out, "{}", v[i]).expect("write to string"),
                    Column::Float(v) => out.push_str(&fmt_f64(v[i])),
                }
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()?)?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let headers: Vec<String> = header.split(',').map(|h| h.trim().to_string()).collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != headers.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    headers.len()
                )));
            }
            for (c, f) in cols.iter_mut().zip(fields) {
                let v = f.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {}: bad number `{}`", lineno + 2, f.trim()))
                })?;
                c.push(v);
            }
        }
        Ok(Self {
            headers,
            columns: cols.into_iter().map(Column::Float).collect(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Column by header name, as floats.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
        Ok(match &self.columns[j] {
            Column::Float(v) => v.clone(),
            Column::Index(v) => v.iter().map(|&i| i as f64).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_read_back_exactly() {
        let vals = vec![0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0];
        let t = CsvTable::new()
            .index("k", vec![0, 1, 2, 3, 4])
            .float("v", vals.clone());
        let text = t.render().unwrap();
        assert!(text.starts_with("k,v\n0,"));
        let back = CsvTable::parse(&text).unwrap();
        assert_eq!(back.column("v").unwrap(), vals);
        assert_eq!(back.column("k").unwrap(), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn at_least_fifteen_significant_digits() {
        let s = fmt_f64(1.0 / 7.0);
        let mantissa: String = s
            .split('e')
            .next()
            .unwrap()
            .chars()
            .filter(|c| c.is_ascii_digit())
            .collect();
        assert!(mantissa.len() >= 15);
    }

    #[test]
    fn ragged_rejected() {
        let t = CsvTable::new().float("a", vec![1.0]).float("b", vec![]);
        assert!(t.render().is_err());
    }
}
