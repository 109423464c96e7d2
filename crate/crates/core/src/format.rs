//! Fixed numeric formatting for CSV and summary output.

/// Significant digits written for every number.
pub const SIGNIFICANT_DIGITS: usize = 6;

/// Formats `x` with six significant digits in plain decimal notation
/// (`-56.9041`, `0.00123457`, `114559000000`). Infinities are written as
/// `inf` / `-inf`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (_, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let rounded: f64 = sci.parse().expect("round trip");
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig(-56.90412345), "-56.9041");
        assert_eq!(fmt_sig(0.001234567), "0.00123457");
        assert_eq!(fmt_sig(114_559_123_456.0), "114559000000");
        assert_eq!(fmt_sig(3.0), "3.00000");
        assert_eq!(fmt_sig(999_999.7), "1000000");
        assert_eq!(fmt_sig(9.999996), "10.0000");
    }

    #[test]
    fn special_values() {
        assert_eq!(fmt_sig(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-0.0), "0");
    }
}
