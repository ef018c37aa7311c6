//! CSV formatting (`%.12g`-style floats, comma separator, LF endings) and
//! small JSON report types.

use std::fmt::Write as _;

/// Formats like C's `%.12g`: 12 significant digits, scientific notation
/// outside the exponent window, trailing zeros trimmed.
pub fn fmt_g(x: f64) -> String {
    const PREC: i32 = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{:.*e}", (PREC - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("numeric exponent");
    if exp < -4 || exp >= PREC {
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{mant}e{}{:02}", if exp < 0 { "-" } else { "+" }, exp.abs())
    } else {
        let decimals = (PREC - 1 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    }
}

/// Renders a CSV table with a header row.
pub fn csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_g(*v));
            first = false;
        }
        out.push('\n');
    }
    out
}
