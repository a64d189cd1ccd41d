//! CSV helpers shared by the exporters.

use std::fmt::Write as _;

/// Formats a float with 17 significant digits so the value round-trips.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // keep the sign of negative zero out of CSV output
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Builds a CSV document from a header and pre-formatted rows.
pub fn csv_table<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
