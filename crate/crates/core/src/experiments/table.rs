use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adapt::LevelRecord;
use crate::Result;

/// C-style `%.6e`: six digits after the point and a signed exponent of at
/// least two digits, e.g. `2.292400e-04`.
pub fn fmt_e(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.6e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Observed order between two errors at parameters `p1`, `p2`:
/// `log(e1 / e2) / log(p1 / p2)`. With `p2 = p1 / 2` this is `log2(e1 / e2)`.
pub fn eoc(e1: f64, e2: f64, p1: f64, p2: f64) -> f64 {
    (e1 / e2).ln() / (p1 / p2).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EocParameter {
    /// Mesh size; rows are grouped by `rho`.
    H,
    /// Regularisation parameter.
    Rho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EocRow {
    pub rho: f64,
    pub h: f64,
    pub n: usize,
    pub dofs: usize,
    pub errors: Vec<f64>,
    pub eoc: Vec<Option<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub failure: Option<String>,
}

impl EocRow {
    pub fn ok(&self) -> bool {
        self.failure.is_none() && self.converged
    }
}

/// Error table with observed orders of convergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EocTable {
    pub parameter: EocParameter,
    pub error_names: Vec<String>,
    pub rows: Vec<EocRow>,
}

impl EocTable {
    pub fn new(parameter: EocParameter, error_names: &[&str]) -> Self {
        Self {
            parameter,
            error_names: error_names.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row and fills its eoc column from the previous row of the
    /// same group. The first row of a group has no eoc.
    pub fn push(&mut self, mut row: EocRow) {
        row.eoc = vec![None; row.errors.len()];
        if let Some(prev) = self.rows.last() {
            let same_group = match self.parameter {
                EocParameter::H => prev.rho == row.rho,
                EocParameter::Rho => true,
            };
            if same_group && prev.ok() && row.ok() {
                let (p1, p2) = match self.parameter {
                    EocParameter::H => (prev.h, row.h),
                    EocParameter::Rho => (prev.rho, row.rho),
                };
                for (k, (&e1, &e2)) in prev.errors.iter().zip(&row.errors).enumerate() {
                    if e1 > 0.0 && e2 > 0.0 && p1 != p2 {
                        row.eoc[k] = Some(eoc(e1, e2, p1, p2));
                    }
                }
            }
        }
        self.rows.push(row);
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }

    /// Row with the given `rho` and `n`.
    pub fn row(&self, rho: f64, n: usize) -> Option<&EocRow> {
        self.rows.iter().find(|r| r.rho == rho && r.n == n)
    }

    fn header(&self, timing: bool) -> String {
        let mut h = String::from("rho,h,n,dofs");
        for name in &self.error_names {
            h += &format!(",{name},{name}_eoc");
        }
        h += ",iterations,status";
        if timing {
            h += ",setup_seconds,solve_seconds";
        }
        h
    }

    /// CSV with a header line. The timing columns come last so that runs
    /// can be compared with them stripped.
    pub fn write_csv(&self, mut w: impl Write, timing: bool) -> Result<()> {
        writeln!(w, "{}", self.header(timing))?;
        for r in &self.rows {
            let mut line = format!("{},{},{},{}", fmt_e(r.rho), fmt_e(r.h), r.n, r.dofs);
            for (e, o) in r.errors.iter().zip(&r.eoc) {
                line += &format!(",{},{}", fmt_e(*e), o.map(fmt_e).unwrap_or_default());
            }
            line += &format!(",{},{}", r.iterations, if r.ok() { "ok" } else { "failed" });
            if timing {
                line += &format!(",{},{}", fmt_e(r.setup_seconds), fmt_e(r.solve_seconds));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Whitespace-separated blocks, one per `rho` for h-tables, separated by
    /// two blank lines as gnuplot's `index` expects.
    pub fn write_gnuplot(&self, mut w: impl Write) -> Result<()> {
        let mut last: Option<f64> = None;
        for r in &self.rows {
            let new_block = match self.parameter {
                EocParameter::H => last != Some(r.rho),
                EocParameter::Rho => last.is_none(),
            };
            if new_block {
                if last.is_some() {
                    writeln!(w, "\n")?;
                }
                match self.parameter {
                    EocParameter::H => writeln!(w, "# rho = {}", fmt_e(r.rho))?,
                    EocParameter::Rho => writeln!(w, "# rho sweep")?,
                }
                writeln!(w, "# {} dofs {}", if self.parameter == EocParameter::H { "h" } else { "rho" }, self.error_names.join(" "))?;
                last = Some(r.rho);
            }
            let p = if self.parameter == EocParameter::H { r.h } else { r.rho };
            let errs: Vec<String> = r.errors.iter().map(|&e| fmt_e(e)).collect();
            writeln!(w, "{} {} {}", fmt_e(p), r.dofs, errs.join(" "))?;
        }
        Ok(())
    }
}

/// One preconditioner benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub precond: String,
    pub rho: f64,
    pub h: f64,
    pub n: usize,
    pub p: Option<usize>,
    pub dofs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub failure: Option<String>,
}

impl BenchRow {
    pub fn ok(&self) -> bool {
        self.failure.is_none() && self.converged
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }

    pub fn iterations(&self, rho: f64, n: usize, p: Option<usize>) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.rho == rho && r.n == n && r.p == p)
            .map(|r| r.iterations)
    }

    pub fn write_csv(&self, mut w: impl Write, timing: bool) -> Result<()> {
        write!(w, "precond,rho,h,n,p,dofs,iterations,status")?;
        writeln!(w, "{}", if timing { ",setup_seconds,solve_seconds" } else { "" })?;
        for r in &self.rows {
            write!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.precond,
                fmt_e(r.rho),
                fmt_e(r.h),
                r.n,
                r.p.map(|p| p.to_string()).unwrap_or_default(),
                r.dofs,
                r.iterations,
                if r.ok() { "ok" } else { "failed" }
            )?;
            if timing {
                write!(w, ",{},{}", fmt_e(r.setup_seconds), fmt_e(r.solve_seconds))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Iteration counts, one block per `p` (or a single block), rows by `h`
    /// and columns by `rho`.
    pub fn write_gnuplot(&self, mut w: impl Write) -> Result<()> {
        let mut ps: Vec<Option<usize>> = self.rows.iter().map(|r| r.p).collect();
        ps.dedup();
        ps.sort();
        ps.dedup();
        for (b, p) in ps.iter().enumerate() {
            if b > 0 {
                writeln!(w, "\n")?;
            }
            writeln!(w, "# p = {}", p.map(|p| p.to_string()).unwrap_or_else(|| "-".into()))?;
            writeln!(w, "# rho n iterations setup_seconds solve_seconds")?;
            for r in self.rows.iter().filter(|r| r.p == *p) {
                writeln!(
                    w,
                    "{} {} {} {} {}",
                    fmt_e(r.rho),
                    r.n,
                    r.iterations,
                    fmt_e(r.setup_seconds),
                    fmt_e(r.solve_seconds)
                )?;
            }
        }
        Ok(())
    }
}

/// Per-level history of adaptive runs.
pub fn write_history_csv(mut w: impl Write, runs: &[(f64, Vec<LevelRecord>)], timing: bool) -> Result<()> {
    write!(w, "rho,level,dofs,tets,eta,l2_error_sq,hminus1_error_sq,iterations,marked,status")?;
    writeln!(w, "{}", if timing { ",seconds" } else { "" })?;
    for (rho, levels) in runs {
        for l in levels {
            write!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_e(*rho),
                l.level,
                l.dofs,
                l.tets,
                fmt_e(l.eta),
                fmt_e(l.l2_error_sq),
                fmt_e(l.hminus1_error_sq),
                l.iterations,
                l.marked,
                if l.converged { "ok" } else { "failed" }
            )?;
            if timing {
                write!(w, ",{}", fmt_e(l.seconds))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Gnuplot blocks of the adaptive history, one per `rho`.
pub fn write_history_gnuplot(mut w: impl Write, runs: &[(f64, Vec<LevelRecord>)]) -> Result<()> {
    for (b, (rho, levels)) in runs.iter().enumerate() {
        if b > 0 {
            writeln!(w, "\n")?;
        }
        writeln!(w, "# rho = {}", fmt_e(*rho))?;
        writeln!(w, "# level dofs eta l2_error_sq hminus1_error_sq iterations seconds")?;
        for l in levels {
            writeln!(
                w,
                "{} {} {} {} {} {} {}",
                l.level,
                l.dofs,
                fmt_e(l.eta),
                fmt_e(l.l2_error_sq),
                fmt_e(l.hminus1_error_sq),
                l.iterations,
                fmt_e(l.seconds)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_scientific() {
        assert_eq!(fmt_e(2.2924e-4), "2.292400e-04");
        assert_eq!(fmt_e(1.0), "1.000000e+00");
        assert_eq!(fmt_e(-123456.789), "-1.234568e+05");
        assert_eq!(fmt_e(0.0), "0.000000e+00");
        assert_eq!(fmt_e(1e-300), "1.000000e-300");
        assert_eq!(fmt_e(f64::NAN), "nan");
    }

    #[test]
    fn eoc_conventions() {
        assert!((eoc(4.0, 1.0, 0.5, 0.25) - 2.0).abs() < 1e-15);
        // squared norms over a decade of rho
        assert!((eoc(1.03388e-4, 1.08962e-6, 1e-3, 1e-4) - 1.977).abs() < 1e-3);
    }

    fn row(rho: f64, n: usize, e: f64) -> EocRow {
        EocRow {
            rho,
            h: 1.0 / n as f64,
            n,
            dofs: (n - 1).pow(3),
            errors: vec![e],
            eoc: vec![],
            iterations: 3,
            converged: true,
            setup_seconds: 0.5,
            solve_seconds: 0.25,
            failure: None,
        }
    }

    #[test]
    fn eoc_restarts_per_group() {
        let mut t = EocTable::new(EocParameter::H, &["l2"]);
        t.push(row(1.0, 4, 1.6e-2));
        t.push(row(1.0, 8, 4e-3));
        t.push(row(1e-4, 4, 1.0));
        assert_eq!(t.rows[0].eoc, vec![None]);
        assert!((t.rows[1].eoc[0].unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(t.rows[2].eoc, vec![None]);
        let mut csv = Vec::new();
        t.write_csv(&mut csv, false).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "rho,h,n,dofs,l2,l2_eoc,iterations,status");
        assert_eq!(lines[1], "1.000000e+00,2.500000e-01,4,27,1.600000e-02,,3,ok");
        assert_eq!(lines[2], "1.000000e+00,1.250000e-01,8,343,4.000000e-03,2.000000e+00,3,ok");
    }

    #[test]
    fn single_row_has_empty_eoc() {
        let mut t = EocTable::new(EocParameter::Rho, &["l2"]);
        t.push(row(1e-2, 10, 1.0));
        assert_eq!(t.rows[0].eoc, vec![None]);
    }

    #[test]
    fn failed_rows_break_the_eoc_chain() {
        let mut t = EocTable::new(EocParameter::H, &["l2"]);
        let mut bad = row(1.0, 4, f64::NAN);
        bad.failure = Some("diverged".into());
        t.push(bad);
        t.push(row(1.0, 8, 1.0));
        assert_eq!(t.failed_rows(), 1);
        assert_eq!(t.rows[1].eoc, vec![None]);
    }

    #[test]
    fn gnuplot_blocks() {
        let mut t = EocTable::new(EocParameter::H, &["l2"]);
        t.push(row(1.0, 4, 1.0));
        t.push(row(1e-2, 4, 1.0));
        let mut out = Vec::new();
        t.write_gnuplot(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s.matches("# rho = ").count(), 2);
        assert!(s.contains("\n\n\n"));
    }
}
