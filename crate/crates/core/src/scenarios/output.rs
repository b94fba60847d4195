//! Run output files.
//!
//! - `timeseries.csv`: `t,dt,kinetic_energy,helicity_integral,helicity_signed,grad_sup_norm,theta_min,theta_max`,
//!   one row per step, flushed as it is written.
//! - `snapshot_t<time>.vtk`: VTK legacy ASCII structured points,
//!   `n_side × n_side × 1` with spacing `h`, scalars `theta` and `schlieren`.
//! - `snapshot_t<time>.txt`: the same buoyancy as a plain grid, one mesh row
//!   (fixed `x2`) per line.
//! - `errors.csv`: `dofs,L1,rate,L2,rate,Linf,rate`; rates are empty on the
//!   first row.
//! - `spectrum_t<time>.csv`: `m,modulus`.
//! - `run_manifest.json`: status, step count, final time, mesh, code
//!   version and the full config as key/value strings.
//!
//! Floating-point values are written with 17 significant digits, so they
//! parse back bit-exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::assembly::FemOperators;
use crate::diagnostics::{convergence_rates, schlieren, ErrorNorms, Spectrum};
use crate::error::{Result, SqgError};

use super::config::RunConfig;
use super::run::TimeRow;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const ERRORS_FILE: &str = "errors.csv";
pub const TIMESERIES_HEADER: [&str; 8] = [
    "t",
    "dt",
    "kinetic_energy",
    "helicity_integral",
    "helicity_signed",
    "grad_sup_norm",
    "theta_min",
    "theta_max",
];
pub const ERRORS_HEADER: [&str; 7] = ["dofs", "L1", "rate", "L2", "rate", "Linf", "rate"];

/// Decimal with 17 significant digits.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Compact time label for file names: `8`, `7.5`, `0.125`.
pub fn time_label(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".into()
    } else {
        s.into()
    }
}

fn csv_error(e: csv::Error) -> SqgError {
    SqgError::Io(e.into())
}

/// Run lifecycle recorded in the manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Running,
    Completed,
    Aborted,
}

impl RunStatus {
    fn name(self) -> &'static str {
        match self {
            Self::Running => "running",
            Self::Completed => "completed",
            Self::Aborted => "aborted",
        }
    }
}

/// Streaming writer for one run directory.
pub struct RunOutput {
    dir: PathBuf,
    timeseries: csv::Writer<File>,
}

impl RunOutput {
    /// Creates the directory, writes a `running` manifest and the
    /// time-series header. Fails before any step if the directory is not
    /// writable.
    pub fn create(dir: &Path, cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir)?;
        write_manifest(dir, cfg, RunStatus::Running, 0, 0.0, None)?;
        let mut timeseries =
            csv::Writer::from_path(dir.join(TIMESERIES_FILE)).map_err(csv_error)?;
        timeseries
            .write_record(TIMESERIES_HEADER)
            .map_err(csv_error)?;
        timeseries.flush()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            timeseries,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends and flushes one time-series row.
    pub fn row(&mut self, row: &TimeRow) -> Result<()> {
        self.timeseries
            .write_record(row.values().map(fmt_value))
            .map_err(csv_error)?;
        self.timeseries.flush()?;
        Ok(())
    }

    pub fn snapshot(&self, ops: &FemOperators, t: f64, theta: &[f64]) -> Result<()> {
        let label = time_label(t);
        write_vtk(
            &self.dir.join(format!("snapshot_t{label}.vtk")),
            ops,
            t,
            theta,
        )?;
        write_grid(
            &self.dir.join(format!("snapshot_t{label}.txt")),
            ops.mesh.n_side(),
            theta,
        )
    }

    pub fn spectrum(&self, t: f64, spectrum: &Spectrum) -> Result<()> {
        write_spectrum(
            &self.dir.join(format!("spectrum_t{}.csv", time_label(t))),
            spectrum,
        )
    }

    pub fn errors(&self, rows: &[(usize, ErrorNorms)]) -> Result<()> {
        write_error_table(&self.dir.join(ERRORS_FILE), rows)
    }

    pub fn finish(
        &self,
        cfg: &RunConfig,
        status: RunStatus,
        steps: usize,
        time: f64,
        error: Option<&str>,
    ) -> Result<()> {
        write_manifest(&self.dir, cfg, status, steps, time, error)
    }
}

/// Writes `run_manifest.json`.
pub fn write_manifest(
    dir: &Path,
    cfg: &RunConfig,
    status: RunStatus,
    steps: usize,
    time: f64,
    error: Option<&str>,
) -> Result<()> {
    let config: Map<String, Value> = cfg
        .to_pairs()
        .into_iter()
        .map(|(k, v)| (k.to_string(), Value::String(v)))
        .collect();
    let manifest = json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "parallel": crate::par::is_parallel(),
        "status": status.name(),
        "steps": steps,
        "final_time": time,
        "mesh": { "n_side": cfg.n_side, "h": cfg.h(), "dofs": cfg.n_side * cfg.n_side },
        "config": config,
        "error": error,
    });
    // write then rename, so an interrupted write never leaves a torn manifest
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    let mut w = BufWriter::new(File::create(&tmp)?);
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| SqgError::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    drop(w);
    fs::rename(tmp, dir.join(MANIFEST_FILE))?;
    Ok(())
}

/// VTK legacy ASCII structured points with `theta` and `schlieren` scalars.
pub fn write_vtk(path: &Path, ops: &FemOperators, t: f64, theta: &[f64]) -> Result<()> {
    let n = ops.mesh.n_side();
    let h = ops.mesh.h();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(
        w,
        "buoyancy t={} n_side={n} h={}",
        fmt_value(t),
        fmt_value(h)
    )?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {n} {n} 1")?;
    writeln!(w, "ORIGIN 0 0 0")?;
    writeln!(w, "SPACING {} {} 1", fmt_value(h), fmt_value(h))?;
    writeln!(w, "POINT_DATA {}", n * n)?;
    for (name, values) in [
        ("theta", theta.to_vec()),
        ("schlieren", schlieren(ops, theta)),
    ] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(w, "{}", fmt_value(v))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plain-text grid, row `i2` on line `i2`.
pub fn write_grid(path: &Path, n_side: usize, theta: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in theta.chunks(n_side) {
        let line: Vec<String> = row.iter().map(|v| fmt_value(*v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum(path: &Path, spectrum: &Spectrum) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["m", "modulus"]).map_err(csv_error)?;
    for (m, v) in spectrum.modulus.iter().enumerate() {
        w.write_record([m.to_string(), fmt_value(*v)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Error table with observed rates between consecutive rows.
pub fn write_error_table(path: &Path, rows: &[(usize, ErrorNorms)]) -> Result<()> {
    let rates = |f: fn(&ErrorNorms) -> f64| {
        let r = convergence_rates(&rows.iter().map(|(_, e)| f(e)).collect::<Vec<_>>());
        std::iter::once(None).chain(r).collect::<Vec<_>>()
    };
    let (r1, r2, rinf) = (rates(|e| e.l1), rates(|e| e.l2), rates(|e| e.linf));
    let rate = |r: Option<f64>| r.map_or(String::new(), fmt_value);
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(ERRORS_HEADER).map_err(csv_error)?;
    for (k, (dofs, e)) in rows.iter().enumerate() {
        w.write_record([
            dofs.to_string(),
            fmt_value(e.l1),
            rate(r1[k]),
            fmt_value(e.l2),
            rate(r2[k]),
            fmt_value(e.linf),
            rate(rinf[k]),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `timeseries.csv` back into rows.
pub fn read_timeseries(path: &Path) -> Result<Vec<TimeRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let header = r.headers().map_err(csv_error)?;
    if header.iter().ne(TIMESERIES_HEADER) {
        return Err(SqgError::InvalidParameter {
            name: path.display().to_string(),
            reason: "unexpected time-series header".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let v: Vec<f64> = rec
            .iter()
            .map(|f| {
                f.parse().map_err(|_| SqgError::InvalidParameter {
                    name: path.display().to_string(),
                    reason: format!("invalid number `{f}`"),
                })
            })
            .collect::<Result<_>>()?;
        rows.push(TimeRow::from_values(&v)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_format_round_trips() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
            -0.0,
        ] {
            let s = fmt_value(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn time_labels() {
        assert_eq!(time_label(8.0), "8");
        assert_eq!(time_label(7.5), "7.5");
        assert_eq!(time_label(0.0), "0");
        assert_eq!(time_label(0.125), "0.125");
    }

    #[test]
    fn error_table_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let e = |x: f64| ErrorNorms {
            l1: x,
            l2: x,
            linf: x,
        };
        write_error_table(&path, &[(100, e(0.4)), (400, e(0.1))]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "dofs,L1,rate,L2,rate,Linf,rate");
        assert!(lines[1].starts_with("100,") && lines[1].ends_with(','));
        let rate: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert!((rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn grid_has_one_line_per_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        let theta: Vec<f64> = (0..12).map(f64::from).collect();
        write_grid(&path, 4, &theta).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[1].split(' ').next().unwrap().parse::<f64>().unwrap(),
            4.0
        );
    }
}
