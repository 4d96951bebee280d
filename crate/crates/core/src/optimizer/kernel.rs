use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{JointPmf, Schema, ROW_TOL};
use crate::error::{Error, Result};

/// Where a kernel came from: the configuration fingerprint and solver settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub fingerprint: String,
    pub tol: f64,
    pub objective: String,
    pub solver: String,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fingerprint={} tol={:e} objective={} solver={}",
            if self.fingerprint.is_empty() { "-" } else { &self.fingerprint },
            self.tol,
            if self.objective.is_empty() { "-" } else { &self.objective },
            if self.solver.is_empty() { "-" } else { &self.solver },
        )
    }
}

impl Provenance {
    fn parse(line: &str) -> Provenance {
        let mut p = Provenance::default();
        for tok in line.split_whitespace() {
            let Some((k, v)) = tok.split_once('=') else { continue };
            let v = if v == "-" { "" } else { v };
            match k {
                "fingerprint" => p.fingerprint = v.to_string(),
                "tol" => p.tol = v.parse().unwrap_or(0.0),
                "objective" => p.objective = v.to_string(),
                "solver" => p.solver = v.to_string(),
                _ => {}
            }
        }
        p
    }
}

const PROVENANCE_PREFIX: &str = "# provenance ";

/// Row-stochastic map from every (d, x, y) cell to a distribution over (x_hat, y_hat).
#[derive(Debug, Clone, PartialEq)]
pub struct TransformKernel {
    schema: Schema,
    probs: Vec<f64>,
    provenance: Provenance,
}

impl TransformKernel {
    pub fn identity(schema: &Schema) -> Self {
        let nxy = schema.n_xy();
        let mut probs = vec![0.0; schema.n_cells() * nxy];
        for c in 0..schema.n_cells() {
            probs[c * nxy + c % nxy] = 1.0;
        }
        TransformKernel { schema: schema.clone(), probs, provenance: Provenance::default() }
    }

    /// Validates nonnegativity and row sums (within 1e-9).
    pub fn from_probs(schema: &Schema, probs: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let nxy = schema.n_xy();
        if probs.len() != schema.n_cells() * nxy {
            return Err(Error::SupportMismatch(schema.n_cells() * nxy, probs.len()));
        }
        for (c, row) in probs.chunks(nxy).enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidPmf(format!("row {} has a negative entry", schema.cell_label(c))));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidPmf(format!("row {} sums to {s}", schema.cell_label(c))));
            }
        }
        Ok(TransformKernel { schema: schema.clone(), probs, provenance })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, cell: usize) -> &[f64] {
        let nxy = self.schema.n_xy();
        &self.probs[cell * nxy..(cell + 1) * nxy]
    }

    pub fn prob(&self, cell: usize, out: usize) -> f64 {
        self.probs[cell * self.schema.n_xy() + out]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Largest deviation of a row sum from 1.
    pub fn max_row_error(&self) -> f64 {
        self.probs
            .chunks(self.schema.n_xy())
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Distribution of the transformed (x_hat, y_hat) under `pmf`.
    pub fn pushforward(&self, pmf: &JointPmf) -> Vec<f64> {
        let nxy = self.schema.n_xy();
        let mut out = vec![0.0; nxy];
        for (c, &m) in pmf.mass().iter().enumerate() {
            if m > 0.0 {
                for (o, k) in self.row(c).iter().enumerate() {
                    out[o] += m * k;
                }
            }
        }
        out
    }

    /// Joint of D and the transformed (x_hat, y_hat), indexed `d * n_xy + out`.
    pub fn joint_with_groups(&self, pmf: &JointPmf) -> Vec<f64> {
        let nxy = self.schema.n_xy();
        let mut out = vec![0.0; self.schema.d_card() * nxy];
        for (c, &m) in pmf.mass().iter().enumerate() {
            if m > 0.0 {
                let d = c / nxy;
                for (o, k) in self.row(c).iter().enumerate() {
                    out[d * nxy + o] += m * k;
                }
            }
        }
        out
    }

    /// Writes `d,x,y,x_hat,y_hat,prob` rows grouped by input cell, after a
    /// provenance comment line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{PROVENANCE_PREFIX}{}", self.provenance)?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["d", "x", "y", "x_hat", "y_hat", "prob"])?;
        let s = &self.schema;
        for c in 0..s.n_cells() {
            let (d, x, y) = s.split_cell(c);
            let (dl, xl, yl) = (s.d_label(d), s.x_label(x), s.y_label(y));
            for (o, p) in self.row(c).iter().enumerate() {
                let (xh, yh) = s.split_xy(o);
                wr.write_record([&dl, &xl, yl, &s.x_label(xh), s.y_label(yh), &format!("{p:.16e}")])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Parses the format written by [`TransformKernel::write_csv`]. Entries not listed are 0.
    pub fn read_csv<R: BufRead>(reader: R, schema: &Schema) -> Result<Self> {
        let mut provenance = Provenance::default();
        let mut body = String::new();
        for line in reader.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix(PROVENANCE_PREFIX) {
                provenance = Provenance::parse(rest);
            } else if !line.starts_with('#') {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != ["d", "x", "y", "x_hat", "y_hat", "prob"] {
            return Err(Error::Parse { row: 0, msg: format!("unexpected kernel header {header:?}") });
        }
        let nxy = schema.n_xy();
        let mut probs = vec![0.0; schema.n_cells() * nxy];
        let mut seen = vec![false; schema.n_cells()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Parse { row: row + 1, msg: format!("unknown {what} label") };
            let d = schema.parse_d_label(&rec[0]).ok_or_else(|| bad("d"))?;
            let x = schema.parse_x_label(&rec[1]).ok_or_else(|| bad("x"))?;
            let y = schema.parse_y_label(&rec[2]).ok_or_else(|| bad("y"))?;
            let xh = schema.parse_x_label(&rec[3]).ok_or_else(|| bad("x_hat"))?;
            let yh = schema.parse_y_label(&rec[4]).ok_or_else(|| bad("y_hat"))?;
            let p: f64 = rec[5]
                .parse()
                .map_err(|_| Error::Parse { row: row + 1, msg: format!("bad probability `{}`", &rec[5]) })?;
            let cell = schema.cell(d, x, y);
            seen[cell] = true;
            probs[cell * nxy + schema.xy(xh, yh)] = p;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::Parse { row: 0, msg: format!("no rows for cell {}", schema.cell_label(c)) });
        }
        Self::from_probs(schema, probs, provenance)
    }
}
