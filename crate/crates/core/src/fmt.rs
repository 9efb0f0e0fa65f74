//! Decimal formatting with a fixed number of significant digits.

/// Formats `x` in plain decimal notation with `digits` significant digits.
///
/// Non-finite values use `inf`, `-inf` and `NaN` so they parse back with
/// `str::parse::<f64>`.
pub fn sig_digits(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Round through scientific notation first so the exponent accounts for
    // carries such as 9.9999999999995 -> 10.0000000000.
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let (_, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let mut s = format!("{:.*}", decimals, x);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}
