use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const TABLE_HEADER: &str = "k,h,err_inf,err_l2,err_h1";

/// Final-time errors of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub k: f64,
    pub h: f64,
    pub err_inf: f64,
    pub err_l2: f64,
    pub err_h1: f64,
}

impl ErrorRow {
    pub fn errors(&self) -> [f64; 3] {
        [self.err_inf, self.err_l2, self.err_h1]
    }
}

/// Error rows of a refinement ladder with least-squares orders.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    rows: Vec<ErrorRow>,
    orders: Option<[f64; 3]>,
}

impl ConvergenceTable {
    /// Sorts rows by decreasing `k`, then decreasing `h`, and fits orders
    /// against `k`, or against `h` when all rows share one time step.
    pub fn new(mut rows: Vec<ErrorRow>) -> Result<Self> {
        rows.sort_by(|a, b| b.k.total_cmp(&a.k).then(b.h.total_cmp(&a.h)));
        let orders = if rows.len() >= 2 {
            let same_k = rows.iter().all(|r| r.k == rows[0].k);
            let x = |r: &ErrorRow| if same_k { r.h } else { r.k };
            let mut o = [0.0; 3];
            for (c, slot) in o.iter_mut().enumerate() {
                let pts: Vec<_> = rows.iter().map(|r| (x(r), r.errors()[c])).collect();
                *slot = fit_order(&pts)?;
            }
            Some(o)
        } else {
            None
        };
        Ok(Self { rows, orders })
    }

    pub fn rows(&self) -> &[ErrorRow] {
        &self.rows
    }

    /// Fitted `(inf, l2, h1)` orders; `None` with fewer than two rows.
    pub fn orders(&self) -> Option<[f64; 3]> {
        self.orders
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{TABLE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                sci(r.k),
                sci(r.h),
                sci(r.err_inf),
                sci(r.err_l2),
                sci(r.err_h1)
            )?;
        }
        if let Some(o) = self.orders {
            writeln!(out, "order,,{},{},{}", sci(o[0]), sci(o[1]), sci(o[2]))?;
        }
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        write_file(path, |f| self.write_csv(f))
    }

    /// Reads a table written by [`write_csv`](Self::write_csv). Orders are
    /// refitted from the rows.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == TABLE_HEADER => {}
            _ => return Err(Error::Parse(format!("expected header `{TABLE_HEADER}`"))),
        }
        let mut rows = Vec::new();
        for line in lines {
            if line.starts_with("order") {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad row `{line}`")))
                })
                .collect::<Result<_>>()?;
            if v.len() != 5 {
                return Err(Error::Parse(format!(
                    "row `{line}` has {} columns",
                    v.len()
                )));
            }
            rows.push(ErrorRow {
                k: v[0],
                h: v[1],
                err_inf: v[2],
                err_l2: v[3],
                err_h1: v[4],
            });
        }
        Self::new(rows)
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>12} {:>12} {:>12} {:>12} {:>12}",
            "k", "h", "inf", "l2", "h1"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                r.k, r.h, r.err_inf, r.err_l2, r.err_h1
            )?;
        }
        if let Some(o) = self.orders {
            writeln!(
                f,
                "{:>12} {:>12} {:>12.3} {:>12.3} {:>12.3}",
                "order", "", o[0], o[1], o[2]
            )?;
        }
        Ok(())
    }
}

/// `err_inf` over a `(k, h)` grid of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTable {
    pub steps: Vec<f64>,
    pub spacings: Vec<f64>,
    /// `err_inf[i][j]` belongs to `steps[i]` and `spacings[j]`; `None` where
    /// the pair was not run.
    pub err_inf: Vec<Vec<Option<f64>>>,
}

impl StabilityTable {
    pub fn from_runs(runs: &[(f64, f64, f64)]) -> Self {
        let mut steps: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let mut spacings: Vec<f64> = runs.iter().map(|r| r.1).collect();
        steps.sort_by(|a, b| b.total_cmp(a));
        steps.dedup();
        spacings.sort_by(|a, b| b.total_cmp(a));
        spacings.dedup();
        let mut err_inf = vec![vec![None; spacings.len()]; steps.len()];
        for &(k, h, e) in runs {
            let i = steps.iter().position(|&s| s == k).unwrap();
            let j = spacings.iter().position(|&s| s == h).unwrap();
            err_inf[i][j] = Some(e);
        }
        Self {
            steps,
            spacings,
            err_inf,
        }
    }

    pub fn get(&self, k: f64, h: f64) -> Option<f64> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        let i = self.steps.iter().position(|&s| close(s, k))?;
        let j = self.spacings.iter().position(|&s| close(s, h))?;
        self.err_inf[i][j]
    }

    /// Long format, header `k,h,err_inf`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "k,h,err_inf")?;
        for (k, row) in self.steps.iter().zip(&self.err_inf) {
            for (h, e) in self.spacings.iter().zip(row) {
                if let Some(e) = e {
                    writeln!(out, "{},{},{}", sci(*k), sci(*h), sci(*e))?;
                }
            }
        }
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        write_file(path, |f| self.write_csv(f))
    }
}

impl fmt::Display for StabilityTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>11}", "k \\ h")?;
        for h in &self.spacings {
            write!(f, " {h:>11.4e}")?;
        }
        writeln!(f)?;
        for (k, row) in self.steps.iter().zip(&self.err_inf) {
            write!(f, "{k:>11.4e}")?;
            for e in row {
                match e {
                    Some(e) => write!(f, " {e:>11.4e}")?,
                    None => write!(f, " {:>11}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Scientific notation that round-trips an `f64` exactly.
fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn write_file(
    path: &Path,
    body: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

/// Least-squares slope of `ln(error)` against `ln(step)`.
pub fn fit_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "order fit needs at least two points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.0 > 0.0 && p.1 > 0.0) || !p.0.is_finite() || !p.1.is_finite())
    {
        return Err(Error::InvalidParameter(format!(
            "order fit needs positive finite data, got ({}, {})",
            p.0, p.1
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "order fit needs at least two distinct steps".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Reads `(step, error)` pairs from CSV text. A header line is skipped,
/// `order` footer rows are ignored. With `column` set, the header must name
/// it and the step is taken from the first column.
pub fn read_pairs(text: &str, column: Option<&str>) -> Result<Vec<(f64, f64)>> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .peekable();
    let first_is_header = lines
        .peek()
        .map(|l| {
            l.split(',')
                .next()
                .is_some_and(|c| c.trim().parse::<f64>().is_err())
        })
        .unwrap_or(false);
    let header: Vec<String> = if first_is_header {
        lines
            .next()
            .unwrap()
            .split(',')
            .map(|c| c.trim().to_string())
            .collect()
    } else {
        Vec::new()
    };
    let col = match column {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("no column named `{name}`")))?,
        None => 1,
    };
    let mut pts = Vec::new();
    for line in lines {
        if line.starts_with("order") {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64> {
            cells
                .get(i)
                .ok_or_else(|| Error::Parse(format!("row `{line}` has no column {}", i + 1)))?
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number in row `{line}`")))
        };
        pts.push((get(0)?, get(col)?));
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_power_laws() {
        let pts: Vec<_> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&k| (k, 3.0 * k * k))
            .collect();
        assert!((fit_order(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_order(&pts[..1]).is_err());
        assert!(fit_order(&[(1.0, 1.0), (0.5, 0.0)]).is_err());
        assert!(fit_order(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn reference_l2_column_order() {
        let errs = [4.115e-5, 1.053e-5, 2.648e-6, 6.627e-7, 1.657e-7];
        let pts: Vec<_> = errs
            .iter()
            .enumerate()
            .map(|(i, &e)| (5e-3 / (1 << i) as f64, e))
            .collect();
        assert!((fit_order(&pts).unwrap() - 1.990).abs() < 5e-4);
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ConvergenceTable::new(Vec::new()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{TABLE_HEADER}\n"));
        assert!(t.orders().is_none());
    }

    #[test]
    fn one_row_has_no_orders() {
        let r = ErrorRow {
            k: 0.1,
            h: 0.1,
            err_inf: 1.0,
            err_l2: 1.0,
            err_h1: 1.0,
        };
        assert!(ConvergenceTable::new(vec![r]).unwrap().orders().is_none());
    }

    #[test]
    fn csv_round_trip() {
        let rows: Vec<_> = (0..4)
            .map(|i| {
                let k = 0.1 / (1 << i) as f64;
                ErrorRow {
                    k,
                    h: 0.05,
                    err_inf: 0.3 * k * k,
                    err_l2: std::f64::consts::PI * k * k,
                    err_h1: 1.7 * k.powf(1.9),
                }
            })
            .collect();
        let t = ConvergenceTable::new(rows).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().last().unwrap().starts_with("order,,"));
        let back = ConvergenceTable::parse_csv(&text).unwrap();
        assert_eq!(back, t);
        let pairs = read_pairs(&text, Some("err_l2")).unwrap();
        assert_eq!(pairs.len(), 4);
        assert_eq!(pairs[2].1, t.rows()[2].err_l2);
    }

    #[test]
    fn reads_headerless_pairs() {
        let p = read_pairs("0.1, 0.02\n0.05,0.005\n", None).unwrap();
        assert_eq!(p, vec![(0.1, 0.02), (0.05, 0.005)]);
        assert!(read_pairs("step,err\n0.1,x\n", None).is_err());
    }

    #[test]
    fn stability_grid_lookup() {
        let t = StabilityTable::from_runs(&[(0.2, 0.1, 1.0), (0.1, 0.1, 0.5), (0.2, 0.05, 0.9)]);
        assert_eq!(t.steps, vec![0.2, 0.1]);
        assert_eq!(t.get(0.2, 0.05), Some(0.9));
        assert_eq!(t.get(0.1, 0.05), None);
    }
}
