//! Result tables, pass/fail reports and gnuplot scripts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::CliError;

/// A CSV table. Cells are formatted on insertion so output is reproducible.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Fixed-format float cell: `{:.12e}` for finite values.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// Gnuplot axes: column indices (1-based) and log scaling.
#[derive(Debug, Clone, Copy)]
pub struct PlotSpec {
    pub x_col: usize,
    pub y_col: usize,
    pub logscale: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub checks: Vec<Check>,
    pub plot: PlotSpec,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn report(&self, name: &str, kind: &str) -> String {
        let mut s = format!("experiment {name} ({kind})\n");
        for n in &self.notes {
            let _ = writeln!(s, "  {n}");
        }
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let _ = writeln!(
            s,
            "{} of {} checks passed",
            self.checks.len() - failed,
            self.checks.len()
        );
        s
    }

    pub fn plot_script(&self, name: &str) -> String {
        let h = &self.table.header;
        let col = |i: usize| h.get(i - 1).map_or("?", String::as_str);
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set key autotitle columnhead");
        let _ = writeln!(s, "set title '{name}'");
        let _ = writeln!(s, "set xlabel '{}'", col(self.plot.x_col));
        let _ = writeln!(s, "set ylabel '{}'", col(self.plot.y_col));
        if self.plot.logscale {
            let _ = writeln!(s, "set logscale xy");
        }
        let _ = writeln!(
            s,
            "plot 'results.csv' using {}:{} with linespoints",
            self.plot.x_col, self.plot.y_col
        );
        s
    }

    pub fn write(&self, dir: &Path, name: &str, kind: &str) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("results.csv"), self.table.to_csv())?;
        fs::write(dir.join("report.txt"), self.report(name, kind))?;
        fs::write(dir.join("plot.gp"), self.plot_script(name))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_lf_and_fixed_floats() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(0.5), num(f64::INFINITY)]);
        assert_eq!(t.to_csv(), "a,b\n5.000000000000e-1,inf\n");
    }

    #[test]
    fn plot_references_only_the_csv() {
        let o = Outcome {
            table: Table::new(&["n", "err"]),
            checks: vec![],
            plot: PlotSpec {
                x_col: 1,
                y_col: 2,
                logscale: true,
            },
            notes: vec![],
        };
        let s = o.plot_script("x");
        assert!(s.contains("'results.csv' using 1:2") && s.contains("set ylabel 'err'"));
    }
}
