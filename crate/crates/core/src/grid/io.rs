//! Field CSV (`x,y,component_0,...`) and grid metadata JSON.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! a write/read cycle is lossless and output is byte-stable.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{DiscGrid, Field, Rank};
use crate::error::{Error, Result};

pub fn write_field_csv<W: Write>(mut w: W, field: &Field) -> Result<()> {
    let g = field.grid();
    let k = field.comps().len();
    let mut header = String::from("x,y");
    for c in 0..k {
        header.push_str(&format!(",component_{c}"));
    }
    writeln!(w, "{header}")?;
    for p in 0..g.len() {
        let [x, y] = g.pos(p);
        write!(w, "{x},{y}")?;
        for c in field.comps() {
            write!(w, ",{}", c[p])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.json` (grid metadata) into `dir`.
pub fn save_field(dir: &Path, stem: &str, field: &Field) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    write_field_csv(std::io::BufWriter::new(f), field)?;
    let meta = serde_json::to_string_pretty(&field.grid().metadata())?;
    std::fs::write(dir.join(format!("{stem}.json")), meta + "\n")?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`] back onto `grid`. Rows must
/// be in node order and their coordinates must match the grid.
pub fn read_field_csv<R: BufRead>(r: R, grid: std::sync::Arc<DiscGrid>, rank: Rank) -> Result<Field> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty field file".into()))??;
    let ncols = header.split(',').count();
    if ncols != rank.components() + 2 || !header.starts_with("x,y") {
        return Err(Error::InvalidInput(format!("unexpected header {header:?}")));
    }
    let mut comps = vec![Vec::with_capacity(grid.len()); rank.components()];
    let mut p = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("row {p}: {e}")))?;
        if vals.len() != ncols {
            return Err(Error::InvalidInput(format!("row {p}: {} columns", vals.len())));
        }
        if p >= grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: p + 1,
            });
        }
        let [x, y] = grid.pos(p);
        let tol = 1e-9 * grid.h();
        if (vals[0] - x).abs() > tol || (vals[1] - y).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "row {p}: coordinates do not match the grid"
            )));
        }
        for (c, v) in comps.iter_mut().zip(&vals[2..]) {
            c.push(*v);
        }
        p += 1;
    }
    Field::new(grid, rank, comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Lattice;

    #[test]
    fn csv_round_trip_is_lossless() {
        let g = DiscGrid::new(0.2, Lattice::CellCentered).unwrap();
        let f = Field::vector(
            g.clone(),
            [g.sample(|x, y| x.sin() / 3.0 + y), g.sample(|x, _| x.exp())],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,component_0,component_1\n"));
        let back = read_field_csv(&buf[..], g.clone(), Rank::Vector).unwrap();
        assert_eq!(back.comps(), f.comps());
        assert!(read_field_csv(&buf[..], g, Rank::Scalar).is_err());
    }

    #[test]
    fn metadata_has_required_keys() {
        let g = DiscGrid::new(0.25, Lattice::NodeCentered).unwrap();
        let m = g.metadata();
        assert_eq!(m["h"], 0.25);
        assert_eq!(m["mask"], "unit_disc");
    }
}
