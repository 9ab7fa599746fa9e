//! Plain-text artifacts: grid dumps and CSV tables.
//!
//! Numbers are written with `{:e}` (shortest round-trip form), so identical
//! runs produce identical bytes.
//!
//! Grid dump layout:
//!
//! ```text
//! # segsolve grid
//! d 2
//! lower 0e0 0e0
//! upper 3e0 3e0
//! h 1e-1
//! shape 31 31
//! <values along axis 1 for axis-0 index 0>
//! ...
//! ```
//!
//! The grid covers the closed box, boundary nodes included; axis 0 varies
//! slowest. In 1D each line holds one value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::Field;

/// `{:e}` for finite values, `nan`/`inf`/`-inf` otherwise.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ")
}

/// Grid dump of a field over the closed box.
pub fn grid_string(u: &Field, domain: &Domain) -> String {
    let d = domain.dim();
    let pad = domain.pad();
    let cells = domain.cells();
    let n0 = cells[0] + 1;
    let n1 = if d == 2 { cells[1] + 1 } else { 1 };
    let mut s = String::new();
    s.push_str("# segsolve grid\n");
    let _ = writeln!(s, "d {d}");
    let _ = writeln!(s, "lower {}", join(&domain.lower()[..d]));
    let _ = writeln!(s, "upper {}", join(&domain.upper()[..d]));
    let _ = writeln!(s, "h {}", num(domain.h()));
    if d == 2 {
        let _ = writeln!(s, "shape {n0} {n1}");
    } else {
        let _ = writeln!(s, "shape {n0}");
    }
    for i in 0..n0 {
        let row: Vec<f64> = (0..n1)
            .map(|j| {
                let ij = if d == 2 { [i + pad, j + pad] } else { [i + pad, 0] };
                u[domain.lattice_index(ij)]
            })
            .collect();
        s.push_str(&join(&row));
        s.push('\n');
    }
    s
}

pub fn write_grid(path: &Path, u: &Field, domain: &Domain) -> Result<()> {
    fs::write(path, grid_string(u, domain))?;
    Ok(())
}

/// Parsed grid dump.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
    /// Row-major, axis 0 slowest.
    pub values: Vec<f64>,
}

fn parse_num(tok: &str) -> Result<f64> {
    match tok {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| Error::InvalidArgument(format!("bad number `{tok}` in grid"))),
    }
}

pub fn parse_grid(text: &str) -> Result<Grid> {
    let bad = |m: &str| Error::InvalidArgument(format!("malformed grid: {m}"));
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let mut header = |key: &str| -> Result<Vec<String>> {
        let line = lines.next().ok_or_else(|| bad("truncated header"))?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(bad(&format!("expected `{key}`")));
        }
        Ok(toks.map(str::to_string).collect())
    };
    let dim: usize = header("d")?.first().and_then(|t| t.parse().ok()).ok_or_else(|| bad("d"))?;
    let lower = header("lower")?.iter().map(|t| parse_num(t)).collect::<Result<Vec<_>>>()?;
    let upper = header("upper")?.iter().map(|t| parse_num(t)).collect::<Result<Vec<_>>>()?;
    let h = header("h")?.first().map(|t| parse_num(t)).transpose()?.ok_or_else(|| bad("h"))?;
    let shape: Vec<usize> =
        header("shape")?.iter().map(|t| t.parse().map_err(|_| bad("shape"))).collect::<Result<_>>()?;
    let mut values = Vec::new();
    for line in lines {
        for tok in line.split_whitespace() {
            values.push(parse_num(tok)?);
        }
    }
    if values.len() != shape.iter().product::<usize>() {
        return Err(bad("value count does not match shape"));
    }
    Ok(Grid { dim, lower, upper, h, shape, values })
}

/// Comma-separated table with a fixed header; cells are preformatted.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        Self { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip() {
        let d = Domain::new(&[0.0, 0.0], &[1.0, 0.5], 0.25).unwrap();
        let u = Field::from_fn(&d, |x| x[0] + 10.0 * x[1]);
        let g = parse_grid(&grid_string(&u, &d)).unwrap();
        assert_eq!(g.dim, 2);
        assert_eq!(g.shape, vec![5, 3]);
        assert_eq!(g.h, 0.25);
        assert_eq!(g.values[3 * 2 + 1], 0.5 + 2.5);
    }

    #[test]
    fn grid_1d_layout() {
        let d = Domain::new(&[-1.0], &[1.0], 0.5).unwrap();
        let u = Field::from_fn(&d, |x| x[0]);
        let s = grid_string(&u, &d);
        assert!(s.ends_with("-1e0\n-5e-1\n0e0\n5e-1\n1e0\n"), "{s}");
        assert_eq!(parse_grid(&s).unwrap().values, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn numbers() {
        assert_eq!(num(0.1), "1e-1");
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(parse_num("1e-300").unwrap(), 1e-300);
    }
}
