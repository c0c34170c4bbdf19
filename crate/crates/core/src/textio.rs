//! Plain-decimal number formatting for CSV and report output.

/// Formats `x` in plain decimal with `digits` significant digits. Values
/// whose magnitude falls outside a sane plain-decimal window fall back to
/// scientific notation. Output is locale-free and deterministic.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i64;
    if !(-9..=20).contains(&exponent) {
        return format!("{:.*e}", digits - 1, x);
    }
    let decimals = (digits as i64 - 1 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn formats_plain_decimal() {
        assert_eq!(fmt_sig(0.0, 12), "0");
        assert_eq!(fmt_sig(0.3, 12), "0.300000000000");
        assert_eq!(fmt_sig(1.0, 12), "1.00000000000");
        assert_eq!(fmt_sig(0.15930132192321565, 12), "0.159301321923");
        assert_eq!(fmt_sig(-2.5, 3), "-2.50");
        assert_eq!(fmt_sig(123456.0, 4), "123456");
    }

    #[test]
    fn tiny_values_fall_back_to_scientific() {
        assert!(fmt_sig(1e-15, 12).contains('e'));
    }
}
