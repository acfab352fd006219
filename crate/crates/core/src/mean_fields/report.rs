//! Residual reports and their text form.
//!
//! ```text
//! residual-report v1; equation=<name>; orientation=<o>; grid=<n|nxn>; dt=<dt>; M=<paths>; fd_order=<k>[; config=<hash>]
//! time,l2,linf,orientation,M,grid,dt,se,fd_error,pressure_l2
//! <one row per time sample; optional columns left empty>
//! ```

use std::fmt;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::torus::TorusGrid;

pub const REPORT_TAG: &str = "residual-report v1";
pub const COLUMNS: &str = "time,l2,linf,orientation,M,grid,dt,se,fd_error,pressure_l2";

/// Which way a time-reversed equation is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// The equation as literally written in `t`.
    Forward,
    /// The equation in the reversed time `τ = T − t`.
    Reversed,
    /// Not a time-reversed equation.
    None,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Forward => "forward",
            Self::Reversed => "reversed",
            Self::None => "none",
        })
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Self::Forward),
            "reversed" => Ok(Self::Reversed),
            "none" => Ok(Self::None),
            other => Err(Error::config(format!("unknown orientation '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualRecord {
    pub time: f64,
    pub l2: f64,
    pub linf: f64,
    /// Largest pointwise Monte Carlo standard error of the residual.
    pub se: Option<f64>,
    /// Estimated time-differencing error in the max norm.
    pub fd_error: Option<f64>,
    /// RMS of the pressure used at this time.
    pub pressure_l2: Option<f64>,
}

impl ResidualRecord {
    pub fn new(time: f64, l2: f64, linf: f64) -> Self {
        Self {
            time,
            l2,
            linf,
            se: None,
            fd_error: None,
            pressure_l2: None,
        }
    }

    /// `max(5·SE, 10·FD error)`, the acceptance band of Monte Carlo residuals.
    pub fn tolerance(&self) -> f64 {
        (5.0 * self.se.unwrap_or(0.0)).max(10.0 * self.fd_error.unwrap_or(0.0))
    }

    pub fn within_tolerance(&self) -> bool {
        self.linf <= self.tolerance()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub equation: String,
    pub orientation: Orientation,
    pub grid: TorusGrid,
    pub dt: f64,
    pub paths: usize,
    pub fd_order: u32,
    pub config: Option<String>,
    pub records: Vec<ResidualRecord>,
}

impl ResidualReport {
    pub fn new(equation: impl Into<String>, orientation: Orientation, grid: TorusGrid, dt: f64) -> Self {
        Self {
            equation: equation.into(),
            orientation,
            grid,
            dt,
            paths: 0,
            fd_order: 2,
            config: None,
            records: Vec::new(),
        }
    }

    pub fn max_linf(&self) -> f64 {
        self.records.iter().map(|r| r.linf).fold(0.0, f64::max)
    }

    pub fn max_l2(&self) -> f64 {
        self.records.iter().map(|r| r.l2).fold(0.0, f64::max)
    }

    /// Every record within `max(5·SE, 10·FD error)`.
    pub fn all_within_tolerance(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(ResidualRecord::within_tolerance)
    }

    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(
            out,
            "{REPORT_TAG}; equation={}; orientation={}; grid={}; dt={:e}; M={}; fd_order={}",
            self.equation, self.orientation, self.grid, self.dt, self.paths, self.fd_order
        )?;
        if let Some(c) = &self.config {
            write!(out, "; config={c}")?;
        }
        writeln!(out)?;
        writeln!(out, "{COLUMNS}")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for r in &self.records {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{},{},{},{:e},{},{},{}",
                r.time,
                r.l2,
                r.linf,
                self.orientation,
                self.paths,
                self.grid,
                self.dt,
                opt(r.se),
                opt(r.fd_error),
                opt(r.pressure_l2)
            )?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let perr = |line: usize, m: String| Error::Parse { line, message: m };
        let (_, head) = lines.next().ok_or_else(|| perr(1, "empty report".into()))?;
        let head = head?;
        let mut parts = head.split(';').map(str::trim);
        if parts.next() != Some(REPORT_TAG) {
            return Err(perr(1, format!("expected '{REPORT_TAG}'")));
        }
        let mut report = ResidualReport::new("", Orientation::None, TorusGrid::line(8)?, 0.0);
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| perr(1, format!("malformed field '{p}'")))?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| perr(1, format!("{k}: {e}")));
            match k {
                "equation" => report.equation = v.to_string(),
                "orientation" => report.orientation = v.parse().map_err(|e: Error| perr(1, e.to_string()))?,
                "grid" => report.grid = parse_grid(v).map_err(|e| perr(1, e.to_string()))?,
                "dt" => report.dt = num(v)?,
                "M" => report.paths = v.parse().map_err(|e| perr(1, format!("M: {e}")))?,
                "fd_order" => report.fd_order = v.parse().map_err(|e| perr(1, format!("fd_order: {e}")))?,
                "config" => report.config = Some(v.to_string()),
                other => return Err(perr(1, format!("unknown field '{other}'"))),
            }
        }
        match lines.next() {
            Some((_, Ok(c))) if c.trim() == COLUMNS => {}
            _ => return Err(perr(2, format!("expected column line '{COLUMNS}'"))),
        }
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 10 {
                return Err(perr(i + 1, format!("expected 10 columns, found {}", cols.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| perr(i + 1, e.to_string()));
            let opt = |s: &str| if s.trim().is_empty() { Ok(None) } else { num(s).map(Some) };
            report.records.push(ResidualRecord {
                time: num(cols[0])?,
                l2: num(cols[1])?,
                linf: num(cols[2])?,
                se: opt(cols[7])?,
                fd_error: opt(cols[8])?,
                pressure_l2: opt(cols[9])?,
            });
        }
        Ok(report)
    }
}

/// Parses `"n"` (1D) or `"nxn"` (2D).
pub fn parse_grid(s: &str) -> Result<TorusGrid> {
    let sizes: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>().map_err(|e| Error::config(format!("grid '{s}': {e}"))))
        .collect::<Result<_>>()?;
    if sizes.iter().any(|&n| n != sizes[0]) {
        return Err(Error::config(format!("grid '{s}' must have equal sizes per axis")));
    }
    TorusGrid::new(sizes.len(), sizes[0])
}
