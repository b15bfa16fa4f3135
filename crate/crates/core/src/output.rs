//! Plain CSV and key–value text output with a fixed number format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

/// Formats a float with 17 significant digits (`1.2345678901234567e0`).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders a CSV document: header line, then one line per row, `\n` endings.
pub fn csv_string<I, R>(header: &[String], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let mut first = true;
        for x in row.as_ref() {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&fmt_f64(*x));
        }
        out.push('\n');
    }
    out
}

pub fn write_csv<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    fs::write(path, csv_string(header, rows))?;
    Ok(())
}

/// Ordered `key: value` report, one entry per line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.push(key, fmt_f64(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn extend(&mut self, prefix: &str, other: &Report) {
        for (k, v) in &other.entries {
            self.entries.push((format!("{prefix}{k}"), v.clone()));
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = fmt_f64(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn csv_layout() {
        let header = vec!["a".to_string(), "b".to_string()];
        let s = csv_string(&header, [[1.0, 2.0], [3.0, -0.5]]);
        assert_eq!(
            s,
            "a,b\n1.0000000000000000e0,2.0000000000000000e0\n3.0000000000000000e0,-5.0000000000000000e-1\n"
        );
    }

    #[test]
    fn report_round_trip() {
        let mut r = Report::new();
        r.push("x", 3).push_f64("y", 0.25);
        assert_eq!(r.get("x"), Some("3"));
        assert_eq!(r.render(), "x: 3\ny: 2.5000000000000000e-1\n");
    }
}
