//! Text formats for sinograms, disk grids, coefficient tables and moment
//! tables. Floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::basis::{BasisIndex, CoeffTable};
use crate::boundary::MomentReport;
use crate::error::{Error, Result};
use crate::xray::{BoundaryGrid, DiskGrid};

pub const SINOGRAM_HEADER: &str = "beta,alpha,re,im";
pub const DISK_HEADER: &str = "rho,omega,re,im";
pub const MOMENT_HEADER: &str = "n,k,abs_inner";

/// Tolerance on node coordinates when matching a file against a grid.
const NODE_TOL: f64 = 1e-12;

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

pub fn sinogram_csv(g: &BoundaryGrid) -> String {
    let mut s = String::from(SINOGRAM_HEADER);
    s.push('\n');
    for i in 0..g.n_beta() {
        for j in 0..g.n_alpha() {
            let v = g.value(i, j);
            let _ = writeln!(s, "{},{},{},{}", fmt(g.beta(i)), fmt(g.alpha(j)), fmt(v.re), fmt(v.im));
        }
    }
    s
}

pub fn disk_csv(d: &DiskGrid) -> String {
    let mut s = String::from(DISK_HEADER);
    s.push('\n');
    for (i, &r) in d.rho().iter().enumerate() {
        for j in 0..d.n_omega() {
            let v = d.value(i, j);
            let _ = writeln!(s, "{},{},{},{}", fmt(r), fmt(d.omega(j)), fmt(v.re), fmt(v.im));
        }
    }
    s
}

pub fn moments_csv(report: &MomentReport) -> String {
    let mut s = String::from(MOMENT_HEADER);
    s.push('\n');
    for e in &report.entries {
        let _ = writeln!(s, "{},{},{}", e.n, e.k, fmt(e.abs_inner));
    }
    s
}

/// Splits a CSV body into numbered rows after checking the header.
fn rows<'a>(path: &Path, text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h == header => {}
        Some((n, h)) => return Err(parse_err(path, n, format!("expected header `{header}`, found `{h}`"))),
        None => return Err(parse_err(path, 1, "empty file")),
    }
    Ok(lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| (n, l.split(',').map(str::trim).collect()))
        .collect())
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, cells: &[&str], col: usize, name: &str) -> Result<T> {
    let cell = cells
        .get(col)
        .ok_or_else(|| parse_err(path, line, format!("missing column `{name}`")))?;
    cell.parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse `{cell}` as {name}")))
}

/// Reads a sinogram into a copy of `template`, checking that every row
/// sits on the template's node.
pub fn read_sinogram(path: &Path, template: &BoundaryGrid) -> Result<BoundaryGrid> {
    let text = read_text(path)?;
    let rows = rows(path, &text, SINOGRAM_HEADER)?;
    let (nb, na) = (template.n_beta(), template.n_alpha());
    if rows.len() != nb * na {
        return Err(Error::GridMismatch(format!(
            "{} has {} samples, the configured grid has {nb} x {na} = {}",
            path.display(),
            rows.len(),
            nb * na
        )));
    }
    let mut values = Vec::with_capacity(rows.len());
    for (idx, (line, cells)) in rows.iter().enumerate() {
        if cells.len() != 4 {
            return Err(parse_err(path, *line, format!("expected 4 columns, found {}", cells.len())));
        }
        let beta: f64 = field(path, *line, cells, 0, "beta")?;
        let alpha: f64 = field(path, *line, cells, 1, "alpha")?;
        let re: f64 = field(path, *line, cells, 2, "re")?;
        let im: f64 = field(path, *line, cells, 3, "im")?;
        let (i, j) = (idx / na, idx % na);
        if (beta - template.beta(i)).abs() > NODE_TOL || (alpha - template.alpha(j)).abs() > NODE_TOL {
            return Err(Error::GridMismatch(format!(
                "{}, line {line}: node ({beta}, {alpha}) differs from the configured node ({}, {})",
                path.display(),
                template.beta(i),
                template.alpha(j)
            )));
        }
        values.push(Complex64::new(re, im));
    }
    template.with_values(values)
}

pub fn coeff_json(c: &CoeffTable) -> String {
    let mut s = format!("{{\n  \"kappa\": {},\n  \"nmax\": {},\n  \"entries\": [", fmt(c.kappa), c.nmax);
    let mut first = true;
    for (idx, v) in c.iter() {
        s.push_str(if first { "\n" } else { ",\n" });
        first = false;
        let _ = write!(
            s,
            "    {{\"n\": {}, \"k\": {}, \"re\": {}, \"im\": {}}}",
            idx.n,
            idx.k,
            fmt(v.re),
            fmt(v.im)
        );
    }
    s.push_str(if first { "]\n}\n" } else { "\n  ]\n}\n" });
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffFile {
    kappa: f64,
    nmax: usize,
    entries: Vec<CoeffEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffEntry {
    n: i64,
    k: i64,
    re: f64,
    #[serde(default)]
    im: f64,
}

/// Parses a coefficient table; entries must be disk indices within `nmax`.
pub fn parse_coeffs(path: &Path, text: &str) -> Result<CoeffTable> {
    let file: CoeffFile = serde_json::from_str(text).map_err(|e| parse_err(path, e.line(), e.to_string()))?;
    let mut table = CoeffTable::new(file.kappa, file.nmax);
    for e in file.entries {
        let idx = if e.n >= 0 { Some(BasisIndex::new(e.n, e.k)) } else { None };
        match idx {
            Some(i) if i.is_disk() && e.n <= file.nmax as i64 => {
                table.insert(i, Complex64::new(e.re, e.im))?;
            }
            _ => {
                let line = entry_line(text, e.n, e.k);
                return Err(parse_err(
                    path,
                    line,
                    format!("entry (n = {}, k = {}) needs 0 <= k <= n <= nmax = {}", e.n, e.k, file.nmax),
                ));
            }
        }
    }
    Ok(table)
}

pub fn read_coeffs(path: &Path) -> Result<CoeffTable> {
    parse_coeffs(path, &read_text(path)?)
}

/// Best-effort line of the entry `(n, k)` for error messages.
fn entry_line(text: &str, n: i64, k: i64) -> usize {
    let compact: Vec<String> = text.lines().map(|l| l.split_whitespace().collect()).collect();
    let (pn, pk) = (format!("\"n\":{n},"), format!("\"k\":{k}"));
    compact
        .iter()
        .position(|l| l.contains(&pn) && l.contains(&pk))
        .map_or(1, |p| p + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurvatureParam;

    #[test]
    fn coeff_roundtrip() {
        let mut c = CoeffTable::new(0.3, 4);
        c.insert(BasisIndex::new(0, 0), Complex64::new(1.0, 0.0)).unwrap();
        c.insert(BasisIndex::new(3, 2), Complex64::new(-0.1, 1.0 / 3.0)).unwrap();
        let back = parse_coeffs(Path::new("x"), &coeff_json(&c)).unwrap();
        assert_eq!(back, c);
        let empty = CoeffTable::new(0.0, 0);
        assert_eq!(parse_coeffs(Path::new("x"), &coeff_json(&empty)).unwrap(), empty);
    }

    #[test]
    fn coeff_errors_carry_lines() {
        let text = "{\n  \"kappa\": 0.0,\n  \"nmax\": 2,\n  \"entries\": [\n    {\"n\": 1, \"k\": 0, \"re\": 1.0},\n    {\"n\": 1, \"k\": 3, \"re\": 1.0}\n  ]\n}\n";
        match parse_coeffs(Path::new("c.json"), text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
        let broken = "{\n  \"kappa\": 0.0,\n  \"nmax\": x\n}";
        match parse_coeffs(Path::new("c.json"), broken) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sinogram_roundtrip_and_mismatch() {
        let cp = CurvatureParam::new(-0.2).unwrap();
        let g = BoundaryGrid::new(4, 6, &cp)
            .unwrap()
            .sampled(&|b: f64, a: f64| Complex64::new(b.sin(), a * a));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_text(&p, &sinogram_csv(&g)).unwrap();
        let back = read_sinogram(&p, &g.zeros_like()).unwrap();
        assert_eq!(back.values(), g.values());

        let other = BoundaryGrid::new(4, 8, &cp).unwrap();
        assert!(matches!(read_sinogram(&p, &other), Err(Error::GridMismatch(_))));

        let mut text = sinogram_csv(&g);
        text = text.replacen("e-1,", "x,", 1);
        write_text(&p, &text).unwrap();
        assert!(matches!(read_sinogram(&p, &g), Err(Error::Parse { .. }) | Err(Error::GridMismatch(_))));
    }
}
