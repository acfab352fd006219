//! Text dump format for sampled fields.
//!
//! ```text
//! torus-field v1; dim=2; sizes=64,64; components=2; time=2.5e-1[; kind=velocity][; config=<hash>]
//! <c0>,<c1>          one row per grid point, row-major (axis 0 slowest)
//! ```
//!
//! Several blocks may be concatenated to form a snapshot series. Samples are
//! written with 17 significant digits so decimal round-trip is exact.

use std::io::{BufRead, Write};

use super::field::{ScalarField, VectorField};
use super::grid::TorusGrid;
use super::ops::Field;
use crate::error::{Error, Result};

pub const HEADER_TAG: &str = "torus-field v1";

/// One parsed block of a dump file.
#[derive(Clone, Debug)]
pub struct FieldRecord {
    pub grid: TorusGrid,
    pub time: f64,
    pub kind: Option<String>,
    pub config: Option<String>,
    pub components: Vec<ScalarField>,
}

impl FieldRecord {
    pub fn into_vector(self) -> Result<VectorField> {
        VectorField::new(self.components)
    }

    pub fn into_scalar(mut self) -> Result<ScalarField> {
        if self.components.len() != 1 {
            return Err(Error::config("record does not hold a scalar field"));
        }
        Ok(self.components.remove(0))
    }
}

/// Writes one block. `kind` tags the content (e.g. `velocity`, `vorticity`).
pub fn write_field<W: Write, F: Field>(
    out: &mut W,
    field: &F,
    time: f64,
    kind: Option<&str>,
    config: Option<&str>,
) -> Result<()> {
    let grid = field.grid();
    let slices = field.slices();
    let sizes: Vec<String> = grid.sizes().iter().map(|s| s.to_string()).collect();
    write!(
        out,
        "{HEADER_TAG}; dim={}; sizes={}; components={}; time={:.16e}",
        grid.dim(),
        sizes.join(","),
        slices.len(),
        time
    )?;
    if let Some(k) = kind {
        write!(out, "; kind={k}")?;
    }
    if let Some(c) = config {
        write!(out, "; config={c}")?;
    }
    writeln!(out)?;
    let mut line = String::new();
    for i in 0..grid.len() {
        line.clear();
        for (a, s) in slices.iter().enumerate() {
            if a > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:.16e}", s[i]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn parse_header(line: &str, lineno: usize) -> Result<(TorusGrid, usize, f64, Option<String>, Option<String>)> {
    let err = |m: String| Error::Parse {
        line: lineno,
        message: m,
    };
    let mut parts = line.split(';').map(str::trim);
    if parts.next() != Some(HEADER_TAG) {
        return Err(err(format!("expected header starting with '{HEADER_TAG}'")));
    }
    let (mut dim, mut sizes, mut comps, mut time) = (None, None, None, None);
    let (mut kind, mut config) = (None, None);
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| err(format!("malformed header field '{p}'")))?;
        match k.trim() {
            "dim" => dim = Some(v.parse::<usize>().map_err(|e| err(format!("dim: {e}")))?),
            "sizes" => {
                sizes = Some(
                    v.split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| err(format!("sizes: {e}")))?,
                )
            }
            "components" => {
                comps = Some(v.parse::<usize>().map_err(|e| err(format!("components: {e}")))?)
            }
            "time" => time = Some(v.parse::<f64>().map_err(|e| err(format!("time: {e}")))?),
            "kind" => kind = Some(v.to_string()),
            "config" => config = Some(v.to_string()),
            other => return Err(err(format!("unknown header field '{other}'"))),
        }
    }
    let dim = dim.ok_or_else(|| err("missing dim".into()))?;
    let sizes = sizes.ok_or_else(|| err("missing sizes".into()))?;
    if sizes.len() != dim || sizes.iter().any(|&s| s != sizes[0]) {
        return Err(err("sizes must list one equal size per axis".into()));
    }
    let grid = TorusGrid::new(dim, sizes[0]).map_err(|e| err(e.to_string()))?;
    Ok((
        grid,
        comps.ok_or_else(|| err("missing components".into()))?,
        time.ok_or_else(|| err("missing time".into()))?,
        kind,
        config,
    ))
}

/// Reads every block in a dump.
pub fn read_fields<R: BufRead>(input: R) -> Result<Vec<FieldRecord>> {
    let mut lines = input.lines().enumerate().peekable();
    let mut records = Vec::new();
    while let Some((i, line)) = lines.next() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (grid, ncomp, time, kind, config) = parse_header(&line, i + 1)?;
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); ncomp];
        for _ in 0..grid.len() {
            let (j, row) = lines.next().ok_or(Error::Parse {
                line: i + 1,
                message: "unexpected end of data".into(),
            })?;
            let row = row?;
            let vals: Vec<&str> = row.split(',').collect();
            if vals.len() != ncomp {
                return Err(Error::Parse {
                    line: j + 1,
                    message: format!("expected {ncomp} values, found {}", vals.len()),
                });
            }
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: j + 1,
                    message: e.to_string(),
                })?);
            }
        }
        let components = cols
            .into_iter()
            .map(|c| ScalarField::new(grid, c))
            .collect::<Result<Vec<_>>>()?;
        records.push(FieldRecord {
            grid,
            time,
            kind,
            config,
            components,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn header_round_trip_and_errors() {
        let g = TorusGrid::square(8).unwrap();
        let u = VectorField::from_fn(g, |p| [(2.0 * PI * p[0]).sin() / 3.0, p[1].exp()]);
        let mut buf = Vec::new();
        write_field(&mut buf, &u, 0.125, Some("velocity"), Some("abc")).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("torus-field v1; dim=2; sizes=8,8; components=2; time="));
        let recs = read_fields(&buf[..]).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].kind.as_deref(), Some("velocity"));
        assert_eq!(recs[0].config.as_deref(), Some("abc"));
        assert_eq!(recs[0].time, 0.125);
        let back = recs[0].clone().into_vector().unwrap();
        assert_eq!(back.component(0).values(), u.component(0).values());
        assert_eq!(back.component(1).values(), u.component(1).values());

        let bad = b"torus-field v1; dim=1; sizes=8; components=1; time=0\n1.0\n2.0\n";
        match read_fields(&bad[..]) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("end of data")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
