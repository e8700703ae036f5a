//! CSV output: header row, '.' decimal separator, 17 significant digits.

use std::fmt::Write as _;

/// Formats a float with 17 significant digits so values round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    format!("{x:.16e}")
}

/// A small in-memory CSV table; written in one piece so failed runs leave
/// no partial files.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatted_floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0_f64.sqrt(), 1e-300, -7.25] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s} did not round-trip");
        }
    }

    #[test]
    fn table_renders_with_header() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), fmt_f64(0.5)]);
        let text = t.render();
        assert!(text.starts_with("a,b\n"));
        assert!(text.contains("5.0000000000000000e-1"));
    }
}
