//! Plain-text snapshot format.
//!
//! Header lines `N`, `h`, `shape`, `t` (key then value, whitespace
//! separated), optionally followed by extra scalar header lines (expander
//! profiles record `c` and `residual`), then one node value per line in row
//! major order at full double precision (17 significant digits).

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{BoundaryPolicy, GraphField, GraphGrid};

pub fn write_snapshot(
    field: &GraphField,
    extra: &[(&str, f64)],
    w: &mut impl Write,
) -> std::io::Result<()> {
    let g = &field.grid;
    writeln!(w, "N {}", g.dim)?;
    writeln!(w, "h {:.16e}", g.h)?;
    if g.dim == 1 {
        writeln!(w, "shape {}", g.counts[0])?;
    } else {
        writeln!(w, "shape {} {}", g.counts[0], g.counts[1])?;
    }
    writeln!(w, "t {:.16e}", field.time)?;
    for (k, v) in extra {
        writeln!(w, "{k} {v:.16e}")?;
    }
    for v in &field.values {
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}

pub fn save_snapshot(field: &GraphField, extra: &[(&str, f64)], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot(field, extra, &mut f)?;
    f.flush()?;
    Ok(())
}

/// Reads a snapshot. The grid is reconstructed centered on the origin (the
/// format does not carry an offset) with a linear-extrapolation policy;
/// extra header lines come back as key-value pairs.
pub fn read_snapshot(path: &Path) -> Result<(GraphField, Vec<(String, f64)>)> {
    let f = std::fs::File::open(path)?;
    let reader = BufReader::new(f);
    let mut dim = 0usize;
    let mut h = 0.0f64;
    let mut counts = [0usize; 2];
    let mut t = 0.0f64;
    let mut extra = Vec::new();
    let mut values = Vec::new();
    let mut in_header = true;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Config(format!("snapshot line {}: {m}", lineno + 1));
        if in_header {
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap();
            if let Ok(v) = key.parse::<f64>() {
                in_header = false;
                values.push(v);
                continue;
            }
            match key {
                "N" => {
                    dim = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad N"))?
                }
                "h" => {
                    h = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad h"))?
                }
                "shape" => {
                    counts[0] = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad shape"))?;
                    counts[1] = parts.next().and_then(|s| s.parse().ok()).unwrap_or(1);
                }
                "t" => {
                    t = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad t"))?
                }
                other => {
                    let v: f64 = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad(&format!("bad header value for {other}")))?;
                    extra.push((other.to_string(), v));
                }
            }
        } else {
            values.push(line.parse::<f64>().map_err(|_| bad("bad node value"))?);
        }
    }

    if dim == 0 || h <= 0.0 || counts[0] == 0 {
        return Err(Error::Config("snapshot missing N, h or shape header".into()));
    }
    if values.len() != counts[0] * counts[1] {
        return Err(Error::Config(format!(
            "snapshot has {} values, shape wants {}",
            values.len(),
            counts[0] * counts[1]
        )));
    }
    let origin = [
        -(counts[0] as f64 - 1.0) / 2.0 * h,
        if dim == 2 { -(counts[1] as f64 - 1.0) / 2.0 * h } else { 0.0 },
    ];
    let grid = GraphGrid::new(dim, h, counts, origin, BoundaryPolicy::LinearExtrapolation)?;
    Ok((GraphField { grid, values, time: t }, extra))
}
