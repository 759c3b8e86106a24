//! Field dumps and report files.
//!
//! Fields are written either as CSV with columns `i,j,x1,x2,value` in node
//! order, or as a binary file: one line of JSON header followed by the nodal
//! values as little-endian `f64`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use pqreg_core::{DiscreteField, Grid};
use serde::{Deserialize, Serialize};

pub const FIELD_CSV_HEADER: &str = "i,j,x1,x2,value";
pub const BINARY_FORMAT: &str = "pqreg-field";
pub const BINARY_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

pub fn write_field_csv<W: Write>(field: &DiscreteField, out: W) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    let grid = field.grid();
    writeln!(out, "{FIELD_CSV_HEADER}")?;
    for (k, v) in field.values().iter().enumerate() {
        let (i, j) = grid.ij(k);
        let x = grid.coord(i, j);
        // `{:?}` prints the shortest representation that round-trips
        writeln!(out, "{i},{j},{:?},{:?},{:?}", x[0], x[1], v)?;
    }
    out.flush()
}

/// Reads a CSV field. The grid is recovered from the node count and the
/// coordinates of node `(0, 0)`.
pub fn read_field_csv<R: Read>(input: R) -> Result<DiscreteField, IoError> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| format_err("empty file"))??;
    if header.trim() != FIELD_CSV_HEADER {
        return Err(format_err(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(format_err(format!("line {}: expected 5 columns", lineno + 2)));
        }
        let num = |s: &str| -> Result<f64, IoError> {
            s.trim()
                .parse()
                .map_err(|_| format_err(format!("line {}: bad number {s:?}", lineno + 2)))
        };
        rows.push((num(cols[0])? as usize, num(cols[1])? as usize, num(cols[2])?, num(cols[4])?));
    }
    let n = (rows.len() as f64).sqrt().round() as usize;
    if n * n != rows.len() || rows.is_empty() {
        return Err(format_err(format!("{} rows is not a square grid", rows.len())));
    }
    let half_width = -rows[0].2;
    let grid = Grid::new(n, half_width).map_err(|e| format_err(e.to_string()))?;
    let mut values = vec![f64::NAN; n * n];
    for (i, j, _, v) in rows {
        if i >= n || j >= n {
            return Err(format_err(format!("node ({i}, {j}) outside the grid")));
        }
        values[grid.index(i, j)] = v;
    }
    DiscreteField::new(grid, values).map_err(|e| format_err(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryHeader {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub half_width: f64,
    pub dtype: String,
    pub count: usize,
}

pub fn write_field_binary<W: Write>(field: &DiscreteField, out: W) -> Result<(), IoError> {
    let mut out = BufWriter::new(out);
    let grid = field.grid();
    let header = BinaryHeader {
        format: BINARY_FORMAT.into(),
        version: BINARY_VERSION,
        n: grid.n(),
        half_width: grid.half_width(),
        dtype: "f64le".into(),
        count: grid.node_count(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_field_binary<R: Read>(input: R) -> Result<DiscreteField, IoError> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: BinaryHeader = serde_json::from_str(line.trim_end())?;
    if header.format != BINARY_FORMAT || header.version != BINARY_VERSION {
        return Err(format_err(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    if header.dtype != "f64le" {
        return Err(format_err(format!("unsupported dtype {}", header.dtype)));
    }
    let grid = Grid::new(header.n, header.half_width).map_err(|e| format_err(e.to_string()))?;
    if header.count != grid.node_count() {
        return Err(format_err("node count does not match the grid"));
    }
    let mut bytes = Vec::with_capacity(8 * header.count);
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * header.count {
        return Err(format_err(format!(
            "expected {} bytes of data, found {}",
            8 * header.count,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DiscreteField::new(grid, values).map_err(|e| format_err(e.to_string()))
}

pub fn save_field(field: &DiscreteField, path: &Path, binary: bool) -> Result<(), IoError> {
    let file = File::create(path)?;
    if binary {
        write_field_binary(field, file)
    } else {
        Ok(write_field_csv(field, file)?)
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Table with a fixed header; numbers use round-trip formatting.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        CsvTable {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

pub fn num(x: f64) -> String {
    format!("{x:?}")
}
