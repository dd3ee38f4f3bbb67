//! Fixed-precision rendering for CSV output.

use std::fmt::Write as _;

/// Formats `x` with six significant digits, ties to even. Decimal exponents
/// in `[-5, 6)` use positional notation, anything else scientific.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = mantissa.strip_prefix('-').map_or(("", mantissa), |m| ("-", m));
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    if !(-5..6).contains(&exp) {
        return format!("{sign}{mantissa}e{exp}");
    }
    let mut out = String::from(sign);
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    } else {
        let split = exp as usize + 1;
        out.push_str(&digits[..split]);
        if split < digits.len() {
            out.push('.');
            out.push_str(&digits[split..]);
        }
    }
    out
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => sig6(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// A header plus rows, rendered as CSV with `\n` line endings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_range() {
        assert_eq!(sig6(0.531004104), "0.531004");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(70601.56), "70601.6");
        assert_eq!(sig6(123456.4), "123456");
        assert_eq!(sig6(-2.0069868), "-2.00699");
        assert_eq!(sig6(1.5e-5), "0.0000150000");
        assert_eq!(sig6(0.0), "0.00000");
    }

    #[test]
    fn scientific_range() {
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(3.2e-7), "3.20000e-7");
        assert_eq!(sig6(-9.99999e20), "-9.99999e20");
    }

    #[test]
    fn exact_ties_go_to_even() {
        // both values are exactly representable, so these are true ties
        assert_eq!(sig6(100000.5), "100000");
        assert_eq!(sig6(100001.5), "100002");
    }

    #[test]
    fn rounding_carries_into_exponent() {
        assert_eq!(sig6(999999.7), "1.00000e6");
        assert_eq!(sig6(0.99999999), "1.00000");
    }

    #[test]
    fn csv_rendering() {
        let mut t = Table::new(&["k", "value", "ok", "note"]);
        t.push(vec![1usize.into(), 0.25.into(), true.into(), "a,b".into()]);
        assert_eq!(t.to_csv(), "k,value,ok,note\n1,0.250000,true,\"a,b\"\n");
    }
}
