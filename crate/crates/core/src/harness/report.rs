//! Sub-optimality tables: CSV with 6 significant digits and SVG curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "algo,n,mean_subopt,ci_low,ci_high,trials,seconds";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub algo: String,
    pub n: usize,
    pub mean: f64,
    /// 95% half-width across trials.
    pub half_width: f64,
    pub trials: usize,
    pub seconds: f64,
}

impl ReportRow {
    pub fn ci_low(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn ci_high(&self) -> f64 {
        self.mean + self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubOptReport {
    pub bandit: String,
    pub rows: Vec<ReportRow>,
}

impl SubOptReport {
    /// Row for `algo` at sample size `n`.
    pub fn row(&self, algo: &str, n: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.algo == algo && r.n == n)
    }

    /// Algorithm ids in first-appearance order.
    pub fn algos(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.algo.as_str()) {
                seen.push(&r.algo);
            }
        }
        seen
    }
}

/// `%g`-style rendering with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn sig6(x: f64) -> String {
    format_sig(x, 6)
}

pub fn csv_string(report: &SubOptReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.algo,
            r.n,
            sig6(r.mean),
            sig6(r.ci_low()),
            sig6(r.ci_high()),
            r.trials,
            sig6(r.seconds)
        );
    }
    out
}

/// One parsed `results.csv` line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub algo: String,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
    pub seconds: f64,
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<CsvRow>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(err(1, "missing results header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err(i + 1, format!("expected 7 fields, found {}", f.len())));
        }
        let num = |j: usize| -> Result<f64> {
            f[j].parse().map_err(|_| err(i + 1, format!("bad number {:?}", f[j])))
        };
        let int = |j: usize| -> Result<usize> {
            f[j].parse().map_err(|_| err(i + 1, format!("bad integer {:?}", f[j])))
        };
        rows.push(CsvRow {
            algo: f[0].to_string(),
            n: int(1)?,
            mean: num(2)?,
            ci_low: num(3)?,
            ci_high: num(4)?,
            trials: int(5)?,
            seconds: num(6)?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Line chart of mean sub-optimality against `n`, one series per
/// algorithm, with the confidence interval shaded.
pub fn svg_string(report: &SubOptReport) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 30.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
    let n_max = report.rows.iter().map(|r| r.n).max().unwrap_or(1).max(1) as f64;
    let n_min = report.rows.iter().map(|r| r.n).min().unwrap_or(0) as f64;
    let y_max = report
        .rows
        .iter()
        .map(|r| finite(r.ci_high()))
        .fold(0.0f64, f64::max);
    let y_min = report
        .rows
        .iter()
        .map(|r| finite(r.ci_low()))
        .fold(0.0f64, f64::min);
    let y_span = if y_max > y_min { y_max - y_min } else { 1.0 };
    let x_span = if n_max > n_min { n_max - n_min } else { 1.0 };
    let sx = |n: f64| left + (n - n_min) / x_span * pw;
    let sy = |v: f64| top + (1.0 - (finite(v) - y_min) / y_span) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(&report.bandit)
    );
    let _ = writeln!(
        s,
        r##"<path d="M{left},{top} V{} H{}" fill="none" stroke="#333"/>"##,
        top + ph,
        left + pw
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let v = y_min + frac * y_span;
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="#333"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 4.0,
            left - 6.0,
            y + 4.0,
            format_sig(v, 3)
        );
        let n = n_min + frac * x_span;
        let x = sx(n);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#333"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 4.0,
            top + ph + 18.0,
            n.round()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">sub-optimality</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (k, algo) in report.algos().into_iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.algo == algo).collect();
        let upper: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.n as f64), sy(r.ci_high())))
            .collect();
        let lower: Vec<String> = rows
            .iter()
            .rev()
            .map(|r| format!("{:.2},{:.2}", sx(r.n as f64), sy(r.ci_low())))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.n as f64), sy(r.mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = top + 10.0 + 18.0 * k as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(algo)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn file_stem_for(bandit: &str) -> String {
    let cleaned: String = bandit
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if cleaned.is_empty() {
        "bandit".into()
    } else {
        cleaned
    }
}

/// Writes `results.csv` and `<bandit>.svg` into `dir` (created if missing)
/// and returns both paths.
pub fn emit_outputs(report: &SubOptReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("results.csv");
    std::fs::write(&csv, csv_string(report)).map_err(|e| Error::io(&csv, e))?;
    let svg = dir.join(format!("{}.svg", file_stem_for(&report.bandit)));
    std::fs::write(&svg, svg_string(report)).map_err(|e| Error::io(&svg, e))?;
    Ok(vec![csv, svg])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(1.0, 6), "1");
        assert_eq!(format_sig(0.123456789, 6), "0.123457");
        assert_eq!(format_sig(123456.7, 6), "123457");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e+06");
        assert_eq!(format_sig(0.0000123456789, 6), "1.23457e-05");
        assert_eq!(format_sig(-2.5, 6), "-2.5");
        assert_eq!(format_sig(9.999999, 6), "10");
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(csv_string(&SubOptReport::default()), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn bad_csv_is_rejected() {
        let p = Path::new("x.csv");
        assert!(parse_csv("nope\n", p).is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\na,1,2\n"), p).is_err());
    }

    #[test]
    fn svg_has_one_band_per_algorithm() {
        let row = |algo: &str, n| ReportRow {
            algo: algo.into(),
            n,
            mean: 0.5,
            half_width: 0.1,
            trials: 3,
            seconds: 0.0,
        };
        let report = SubOptReport {
            bandit: "h1".into(),
            rows: vec![row("a", 10), row("a", 20), row("b", 10), row("b", 20)],
        };
        let svg = svg_string(&report);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.ends_with("</svg>\n"));
    }
}
