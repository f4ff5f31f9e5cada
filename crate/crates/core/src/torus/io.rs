//! Field snapshot file format: one header line `N n time`, then n^N
//! whitespace-separated values in row-major axis order.

use super::{ScalarField, TorusGrid};
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

pub fn write_field(w: &mut impl Write, field: &ScalarField, time: f64) -> Result<()> {
    let grid = field.grid();
    writeln!(w, "{} {} {}", grid.dim(), grid.points_per_axis(), time)?;
    for v in field.values() {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn read_field(r: &mut impl BufRead) -> Result<(ScalarField, f64)> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let mut parts = header.split_whitespace();
    let parse_err = |line: usize, message: &str| Error::Parse {
        line,
        message: message.to_string(),
    };
    let dim: usize = parts
        .next()
        .ok_or_else(|| parse_err(1, "missing dimension"))?
        .parse()
        .map_err(|_| parse_err(1, "bad dimension"))?;
    let n: usize = parts
        .next()
        .ok_or_else(|| parse_err(1, "missing points_per_axis"))?
        .parse()
        .map_err(|_| parse_err(1, "bad points_per_axis"))?;
    let time: f64 = parts
        .next()
        .ok_or_else(|| parse_err(1, "missing time"))?
        .parse()
        .map_err(|_| parse_err(1, "bad time"))?;
    let grid = TorusGrid::new(dim, n)?;
    let mut values = Vec::with_capacity(grid.cells());
    let mut body = String::new();
    r.read_to_string(&mut body)?;
    for tok in body.split_whitespace() {
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(2, "bad field value"))?;
        values.push(v);
    }
    let field = ScalarField::from_values(grid, values)?;
    Ok((field, time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    #[test]
    fn round_trip_preserves_bits() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let u = ScalarField::from_fn(grid, |x| (x[0] * 7.3 - x[1]).sin() / 3.0);
        let mut buf = Vec::new();
        write_field(&mut buf, &u, 0.125).unwrap();
        let (v, t) = read_field(&mut BufReader::new(&buf[..])).unwrap();
        assert_eq!(t, 0.125);
        assert_eq!(u.grid(), v.grid());
        for (a, b) in u.values().iter().zip(v.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_malformed_header() {
        let data = b"2\n1.0\n";
        let r = read_field(&mut BufReader::new(&data[..]));
        assert!(r.is_err());
    }
}
