//! CSV artifacts. Every file starts with the `# schema=1` comment line,
//! then a header row; floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nldisp_core::compactness::{CheckKind, CheckRecord, DiagnosticsReport};
use nldisp_core::speed::{DispersionPoint, FrontFit};
use nldisp_core::{Error, GridFunction, Result, SpeedReport, Trajectory};

pub const SCHEMA_LINE: &str = "# schema=1";

/// Round-trippable float formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text built row by row.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = String::with_capacity(4096);
        text.push_str(SCHEMA_LINE);
        text.push('\n');
        text.push_str(&header.join(","));
        text.push('\n');
        Csv {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        debug_assert_eq!(cells.len(), self.columns);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(x) => self.text.push_str(&fmt_f64(*x)),
                Cell::I(n) => {
                    let _ = write!(self.text, "{n}");
                }
                Cell::B(b) => self.text.push_str(if *b { "true" } else { "false" }),
                Cell::S(s) => {
                    if s.contains([',', '"', '\n']) {
                        let _ = write!(self.text, "\"{}\"", s.replace('"', "\"\""));
                    } else {
                        self.text.push_str(s);
                    }
                }
            }
        }
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

pub enum Cell<'a> {
    F(f64),
    I(i64),
    B(bool),
    S(&'a str),
}

/// Long-form `(t, x, u)` rows, every `stride`-th grid point.
pub fn trajectory_csv(traj: &Trajectory<'_>, stride: usize) -> Csv {
    let mut csv = Csv::new(&["t", "x", "u"]);
    let grid = traj.model().grid();
    for (t, s) in traj.times().iter().zip(traj.states()) {
        for (i, u) in s.values().iter().enumerate().step_by(stride.max(1)) {
            csv.row(&[Cell::F(*t), Cell::F(grid.x(i)), Cell::F(*u)]);
        }
    }
    csv
}

pub fn grid_function_csv(u: &GridFunction, value_name: &str) -> Csv {
    let mut csv = Csv::new(&["x", value_name]);
    for (i, v) in u.values().iter().enumerate() {
        csv.row(&[Cell::F(u.grid().x(i)), Cell::F(*v)]);
    }
    csv
}

pub fn speed_csv(report: &SpeedReport) -> Csv {
    let mut csv = Csv::new(&["mu_star", "c_star", "c_observed", "level", "residual"]);
    csv.row(&[
        Cell::F(report.mu_star),
        Cell::F(report.c_star),
        Cell::F(report.c_observed),
        Cell::F(report.level),
        Cell::F(report.fit_residual),
    ]);
    csv
}

pub fn fronts_csv(fit: &FrontFit) -> Csv {
    let mut csv = Csv::new(&["t", "front"]);
    for (t, x) in fit.times.iter().zip(&fit.positions) {
        csv.row(&[Cell::F(*t), Cell::F(*x)]);
    }
    csv
}

pub fn dispersion_csv(points: &[DispersionPoint]) -> Csv {
    let mut csv = Csv::new(&["mu", "lambda", "c"]);
    for p in points {
        csv.row(&[Cell::F(p.mu), Cell::F(p.lambda), Cell::F(p.c)]);
    }
    csv
}

pub fn diagnostics_csv(report: &DiagnosticsReport) -> Csv {
    let mut csv = Csv::new(&[
        "t",
        "proxy_diameter",
        "theoretical_factor",
        "ingredients_pass",
    ]);
    for i in 0..report.times.len() {
        csv.row(&[
            Cell::F(report.times[i]),
            Cell::F(report.proxy_diameters[i]),
            Cell::F(report.theoretical_factor[i]),
            Cell::B(report.ingredients_pass[i]),
        ]);
    }
    csv
}

pub fn checks_csv(checks: &[CheckRecord]) -> Csv {
    let mut csv = Csv::new(&[
        "check",
        "kind",
        "trials",
        "worst_slack",
        "tolerance",
        "passed",
    ]);
    for c in checks {
        let kind = match c.kind {
            CheckKind::Inequality => "inequality",
            CheckKind::Equality => "equality",
        };
        csv.row(&[
            Cell::S(&c.name),
            Cell::S(kind),
            Cell::I(c.trials as i64),
            Cell::F(c.worst_slack),
            Cell::F(c.tolerance),
            Cell::B(c.passed),
        ]);
    }
    csv
}

/// Numeric rows of a CSV written by this module (or by hand), skipping
/// comment lines and a non-numeric header.
pub fn read_numeric_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if !seen_header && rows.is_empty() => seen_header = true,
            Err(e) => {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("{e} in `{line}`"),
                })
            }
        }
    }
    Ok(rows)
}

/// Tabulated kernel samples: two columns `x, J(x)`.
pub fn read_tabulated_kernel(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let rows = read_numeric_rows(&text)?;
    let mut xs = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 2 columns, got {}", r.len()),
            });
        }
        xs.push(r[0]);
        values.push(r[1]);
    }
    Ok((xs, values))
}
