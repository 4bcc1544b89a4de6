//! CSV and field-dump formats.
//!
//! Every number is written with 17 significant digits so that a read-back
//! reproduces the original `f64` exactly.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::closure::{self, ClosureParams, Tolerance};
use crate::config::ClosureTableSpec;
use crate::dynamics::StepDiagnostics;
use crate::energy::{EnergyAudit, EnergyReport, EnergySample};
use crate::grid::{GridError, PeriodicGrid, ScalarField};
use crate::gronwall::{GronwallError, GronwallTrace};
use crate::harness::{PairDiagnostics, SweepReport, SweepRow};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Gronwall(#[from] GronwallError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Write `rows` under `header` to any sink.
pub fn write_csv_to<W: Write, R: AsRef<[f64]>>(
    sink: W,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<R: AsRef<[f64]>>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_csv_to(BufWriter::new(file), header, rows).map_err(csv_err(path))
}

/// Numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<Table, IoError> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let row = record
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| format_err(path, format!("row {}: `{s}` is not a number", k + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn require(table: &Table, path: &Path, name: &str) -> Result<Vec<f64>, IoError> {
    table
        .column(name)
        .ok_or_else(|| format_err(path, format!("missing column `{name}`")))
}

pub fn diagnostics_row(d: &StepDiagnostics) -> [f64; 10] {
    [
        d.t,
        d.dt,
        d.mass_r,
        d.mass_q,
        d.energy,
        d.dissipation,
        d.min_r,
        d.min_q,
        d.max_u,
        d.floor_hits as f64,
    ]
}

pub fn write_diagnostics(path: &Path, diags: &[StepDiagnostics]) -> Result<(), IoError> {
    write_csv(
        path,
        &StepDiagnostics::CSV_HEADER,
        diags.iter().map(diagnostics_row),
    )
}

/// Energy samples from a per-step diagnostics CSV (or an energy CSV, which
/// also carries the kinetic and internal parts). Missing parts read as NaN.
pub fn read_energy_samples(path: &Path) -> Result<Vec<EnergySample>, IoError> {
    let table = read_csv(path)?;
    let t = require(&table, path, "t")?;
    let n = t.len();
    let kinetic = table.column("kinetic");
    let internal = table.column("internal");
    let total = match table.column("energy") {
        Some(e) => e,
        None => match (&kinetic, &internal) {
            (Some(k), Some(i)) => k.iter().zip(i).map(|(a, b)| a + b).collect(),
            _ => return Err(format_err(path, "missing column `energy`")),
        },
    };
    let rate = match table.column("dissipation") {
        Some(d) => d,
        None => require(&table, path, "dissipation_rate")?,
    };
    let kinetic = kinetic.unwrap_or_else(|| vec![f64::NAN; n]);
    let internal = internal.unwrap_or_else(|| vec![f64::NAN; n]);
    Ok((0..n)
        .map(|k| EnergySample {
            t: t[k],
            kinetic: kinetic[k],
            internal: internal[k],
            total: total[k],
            dissipation_rate: rate[k],
        })
        .collect())
}

pub fn energy_row(r: &EnergyReport) -> [f64; 6] {
    [
        r.t,
        r.kinetic,
        r.internal,
        r.dissipation_rate,
        r.cumulative_dissipation,
        r.defect,
    ]
}

pub fn write_energy(path: &Path, audit: &EnergyAudit) -> Result<(), IoError> {
    write_csv(
        path,
        &EnergyReport::CSV_HEADER,
        audit.reports.iter().map(energy_row),
    )
}

pub fn write_compare(path: &Path, diags: &[PairDiagnostics]) -> Result<(), IoError> {
    write_csv(
        path,
        &PairDiagnostics::CSV_HEADER,
        diags.iter().map(PairDiagnostics::csv_row),
    )
}

pub fn write_sweep(path: &Path, report: &SweepReport) -> Result<(), IoError> {
    write_csv(
        path,
        &SweepRow::CSV_HEADER,
        report.rows.iter().map(SweepRow::csv_row),
    )
}

pub fn write_trace(path: &Path, trace: &GronwallTrace) -> Result<(), IoError> {
    let rows = (0..trace.len()).map(|k| {
        [
            trace.t()[k],
            trace.f()[k],
            trace.gprime()[k],
            trace.alpha()[k],
            trace.beta()[k],
        ]
    });
    write_csv(path, &GronwallTrace::CSV_HEADER, rows)
}

pub fn read_trace(path: &Path) -> Result<GronwallTrace, IoError> {
    let table = read_csv(path)?;
    let cols = GronwallTrace::CSV_HEADER
        .iter()
        .map(|name| require(&table, path, name))
        .collect::<Result<Vec<_>, _>>()?;
    let [t, f, gprime, alpha, beta]: [Vec<f64>; 5] = cols.try_into().expect("five columns");
    Ok(GronwallTrace::new(t, f, gprime, alpha, beta)?)
}

pub const CLOSURE_TABLE_HEADER: [&str; 10] = [
    "R",
    "Q",
    "gamma_plus",
    "gamma_minus",
    "Z",
    "alpha",
    "p",
    "dZdR",
    "dZdQ",
    "residual",
];

/// Closure values on a uniform `points x points` grid of `[0, r_max] x
/// [0, q_max]`. Derivatives are NaN at vacuum.
pub fn closure_table(
    spec: &ClosureTableSpec,
    params: &ClosureParams,
    tol: &Tolerance,
) -> Result<Vec<[f64; 10]>, closure::ClosureError> {
    let axis = |max: f64, k: usize| max * k as f64 / (spec.points - 1) as f64;
    let mut rows = Vec::with_capacity(spec.points * spec.points);
    for i in 0..spec.points {
        for j in 0..spec.points {
            let (r, q) = (axis(spec.r_max, i), axis(spec.q_max, j));
            let point = closure::solve_z(r, q, params, tol)?;
            let dr = closure::dz_dr(&point, params).unwrap_or(f64::NAN);
            let dq = closure::dz_dq(&point, params).unwrap_or(f64::NAN);
            rows.push([
                r,
                q,
                params.gamma_plus(),
                params.gamma_minus(),
                point.z,
                point.alpha,
                closure::pressure(point.z, params),
                dr,
                dq,
                closure::residual(r, q, point.z, params.gamma()),
            ]);
        }
    }
    Ok(rows)
}

/// Write one scalar field: `# dim n L t name`, then the values in row-major
/// order, one per line.
pub fn write_field(path: &Path, field: &ScalarField, t: f64, name: &str) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let g = field.grid();
    let mut body = || -> io::Result<()> {
        writeln!(
            w,
            "# {} {} {} {} {}",
            g.dim(),
            g.n(),
            fmt_f64(g.length()),
            fmt_f64(t),
            name
        )?;
        for &v in field.values() {
            writeln!(w, "{}", fmt_f64(v))?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

/// Read a field dump back; returns the field, its time and its name.
pub fn read_field(path: &Path) -> Result<(ScalarField, f64, String), IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err(path, "empty field dump"))?
        .map_err(io_err(path))?;
    let parts: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    if parts.len() != 5 {
        return Err(format_err(path, "header must read `# dim n L t name`"));
    }
    let bad = || format_err(path, "malformed header");
    let dim: usize = parts[0].parse().map_err(|_| bad())?;
    let n: usize = parts[1].parse().map_err(|_| bad())?;
    let length: f64 = parts[2].parse().map_err(|_| bad())?;
    let t: f64 = parts[3].parse().map_err(|_| bad())?;
    let grid = PeriodicGrid::new(dim, n, length)?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        values.push(
            line.trim()
                .parse::<f64>()
                .map_err(|_| format_err(path, format!("`{line}` is not a number")))?,
        );
    }
    if values.len() != grid.len() {
        return Err(format_err(
            path,
            format!("expected {} values, found {}", grid.len(), values.len()),
        ));
    }
    Ok((
        ScalarField::from_values(grid, values),
        t,
        parts[4].to_string(),
    ))
}
