//! ESRI ASCII grid (`.asc`) reading and writing.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::raster::{CellIndex, CellRecord, GridSpec};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct Header {
    ncols: Option<usize>,
    nrows: Option<usize>,
    xll: Option<(f64, bool)>,
    yll: Option<(f64, bool)>,
    cellsize: Option<f64>,
    nodata: Option<f64>,
}

/// Reads an ASCII grid, returning its spec and one record per cell that is
/// not NODATA. Rows are top row first.
pub fn read_ascii_grid<R: BufRead>(reader: R) -> Result<(GridSpec, Vec<CellRecord>)> {
    let mut header = Header::default();
    let mut lines = reader.lines().enumerate().peekable();

    while let Some((idx, line)) = lines.peek() {
        let lineno = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        let mut tokens = line.split_whitespace();
        let Some(key) = tokens.next() else {
            lines.next();
            continue;
        };
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let value = tokens
            .next()
            .ok_or_else(|| parse_err(lineno, format!("header key `{key}` has no value")))?;
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("header `{key}` is not a number: `{v}`")))
        };
        let count = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| parse_err(lineno, format!("header `{key}` is not a count: `{v}`")))
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => header.ncols = Some(count(value)?),
            "nrows" => header.nrows = Some(count(value)?),
            "xllcorner" => header.xll = Some((num(value)?, false)),
            "xllcenter" => header.xll = Some((num(value)?, true)),
            "yllcorner" => header.yll = Some((num(value)?, false)),
            "yllcenter" => header.yll = Some((num(value)?, true)),
            "cellsize" => header.cellsize = Some(num(value)?),
            "nodata_value" => header.nodata = Some(num(value)?),
            _ => return Err(parse_err(lineno, format!("unknown header key `{key}`"))),
        }
        lines.next();
    }

    let missing = |k: &str| Error::Format(format!("missing header key `{k}`"));
    let ncols = header.ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = header.nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize = header.cellsize.ok_or_else(|| missing("cellsize"))?;
    let (xll, x_center) = header.xll.ok_or_else(|| missing("xllcorner"))?;
    let (yll, y_center) = header.yll.ok_or_else(|| missing("yllcorner"))?;
    let half = cellsize / 2.0;
    let left_lon = if x_center { xll - half } else { xll };
    let bottom_lat = if y_center { yll - half } else { yll };
    let spec = GridSpec::new(bottom_lat + nrows as f64 * cellsize, left_lon, cellsize, nrows, ncols)?;

    let mut records = Vec::new();
    let mut row = 0usize;
    let mut last_line = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if row >= nrows {
            return Err(parse_err(lineno, format!("row count mismatch: expected {nrows} rows")));
        }
        let mut col = 0usize;
        for token in line.split_whitespace() {
            if col >= ncols {
                return Err(parse_err(
                    lineno,
                    format!("column count mismatch: expected {ncols} values"),
                ));
            }
            let value: f64 = token
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("non-numeric cell value `{token}`")))?;
            if header.nodata != Some(value) {
                records.push(CellRecord {
                    cell: CellIndex::new(row, col),
                    value,
                });
            }
            col += 1;
        }
        if col != ncols {
            return Err(parse_err(
                lineno,
                format!("column count mismatch: expected {ncols} values, found {col}"),
            ));
        }
        row += 1;
    }
    if row != nrows {
        return Err(parse_err(
            last_line,
            format!("row count mismatch: expected {nrows} rows, found {row}"),
        ));
    }
    Ok((spec, records))
}

/// Writes a dense matrix as an ASCII grid with corner-registered origin.
pub fn write_ascii_grid<W: Write>(mut w: W, spec: &GridSpec, data: &[Vec<f64>], nodata: f64) -> Result<()> {
    if data.len() != spec.nrows || data.iter().any(|r| r.len() != spec.ncols) {
        return Err(Error::DimensionMismatch(format!(
            "matrix does not match a {}x{} grid",
            spec.nrows, spec.ncols
        )));
    }
    writeln!(w, "ncols {}", spec.ncols)?;
    writeln!(w, "nrows {}", spec.nrows)?;
    writeln!(w, "xllcorner {}", spec.left_lon)?;
    writeln!(w, "yllcorner {}", spec.bottom_lat())?;
    writeln!(w, "cellsize {}", spec.cell_size)?;
    writeln!(w, "NODATA_value {nodata}")?;
    for row in data {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
