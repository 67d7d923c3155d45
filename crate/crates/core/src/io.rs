//! Persistence: CSV grids, sweep tables, greymaps and JSON records.
//!
//! Field CSV layout: a first line `nx,ny,h`, then one line per grid row
//! (row `j = 0` first), `nx` values each. Values use Rust's shortest
//! round-trip formatting, so a write/read cycle is exact and reruns are
//! byte-identical.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::plap::SweepRow;

/// A grid read back from CSV, not yet attached to a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGrid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub values: Vec<f64>,
}

pub fn write_field_csv_to<W: Write>(field: &ScalarField, mut w: W) -> Result<()> {
    let d = field.domain();
    writeln!(w, "{},{},{}", d.nx(), d.ny(), d.h())?;
    for row in field.values().chunks(d.nx()) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_field_csv(field: &ScalarField, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    write_field_csv_to(field, BufWriter::new(File::create(path)?))
}

pub fn read_field_csv_from<R: BufRead>(r: R) -> Result<RawGrid> {
    let mut lines = r.lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field file".into()))??;
    let parts: Vec<&str> = head.trim().split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!(
            "bad header `{head}`, expected nx,ny,h"
        )));
    }
    let nx: usize = parse(parts[0], 1)?;
    let ny: usize = parse(parts[1], 1)?;
    let h: f64 = parse(parts[2], 1)?;
    let mut values = Vec::with_capacity(nx * ny);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| parse(t, i + 2))
            .collect::<Result<_>>()?;
        if row.len() != nx {
            return Err(Error::Parse(format!(
                "line {}: {} values, expected {nx}",
                i + 2,
                row.len()
            )));
        }
        values.extend(row);
    }
    if values.len() != nx * ny {
        return Err(Error::Parse(format!(
            "{} rows, expected {ny}",
            values.len() / nx.max(1)
        )));
    }
    Ok(RawGrid { nx, ny, h, values })
}

pub fn read_field_csv(path: &Path) -> Result<RawGrid> {
    read_field_csv_from(BufReader::new(File::open(path)?))
}

fn parse<T: std::str::FromStr>(t: &str, line: usize) -> Result<T> {
    t.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: cannot parse `{}`", t.trim())))
}

pub const SWEEP_HEADER: &str = "p,q,lambda_root,iterations,grad_norm,converged";

pub fn write_sweep_csv_to<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.p, r.q, r.lambda_root, r.iterations, r.grad_norm, r.converged
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    ensure_parent(path)?;
    write_sweep_csv_to(rows, BufWriter::new(File::create(path)?))
}

/// Generic CSV table with a header line.
pub fn write_table_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Binary 8-bit greymap, top row = largest `y`. Values map linearly from
/// `[0, max]` to `[0, 254]`; cells listed in `overlay` are drawn at 255.
pub fn write_pgm_to<W: Write>(field: &ScalarField, overlay: &[usize], mut w: W) -> Result<()> {
    let d = field.domain();
    let (nx, ny) = (d.nx(), d.ny());
    let top = field.values().iter().copied().fold(0.0f64, f64::max);
    let mut px: Vec<u8> = field
        .values()
        .iter()
        .map(|&v| {
            if top > 0.0 {
                (v.max(0.0) / top * 254.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    for &k in overlay {
        if k < px.len() {
            px[k] = 255;
        }
    }
    write!(w, "P5\n{nx} {ny}\n255\n")?;
    for j in (0..ny).rev() {
        w.write_all(&px[j * nx..(j + 1) * nx])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pgm(field: &ScalarField, overlay: &[usize], path: &Path) -> Result<()> {
    ensure_parent(path)?;
    write_pgm_to(field, overlay, BufWriter::new(File::create(path)?))
}

/// Pretty-printed JSON record.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            fs::create_dir_all(p)?;
        }
    }
    Ok(())
}
