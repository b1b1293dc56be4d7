//! Tiny CSV builder with the fixed numeric format of the artifact schema:
//! snake_case headers, floats at 9 significant digits.

/// Format a float with 9 significant digits (scientific notation); NaN
/// renders as `nan`.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.8e}")
    }
}

#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable { header: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn body(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Parse a CSV body produced by [`CsvTable::body`] back into header + rows.
pub fn parse_simple_csv(body: &str) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = body.lines();
    let header: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Some((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_nine_significant_digits() {
        assert_eq!(fmt_float(0.5), "5.00000000e-1");
        assert_eq!(fmt_float(123.456789012), "1.23456789e2");
        assert_eq!(fmt_float(f64::NAN), "nan");
    }

    #[test]
    fn round_trip_table() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push_row(vec!["1".into(), fmt_float(2.5)]);
        let (h, rows) = parse_simple_csv(&t.body()).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows, vec![vec!["1".to_string(), "2.50000000e0".to_string()]]);
    }
}
