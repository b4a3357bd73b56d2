//! Deterministic number formatting for CSV output.

/// Formats `x` with at most 9 significant digits, trailing zeros trimmed.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding may carry into a new digit, which only shortens the tail
        trim_zeros(&s).to_string()
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, e) = s.split_once('e').expect("exponent");
        format!("{}e{}", trim_zeros(mantissa), e)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Joins formatted fields with commas.
pub fn csv_row<I: IntoIterator<Item = String>>(fields: I) -> String {
    fields.into_iter().collect::<Vec<_>>().join(",")
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(-0.5), "-0.5");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(123456.789012), "123456.789");
        assert_eq!(fmt_sig9(1e-7), "1e-7");
        assert_eq!(fmt_sig9(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_sig9(f64::NAN), "nan");
    }

    #[test]
    fn round_trips_to_nine_digits() {
        for &x in &[std::f64::consts::PI, -2.718281828459045, 0.00012345678912, 98765.4321] {
            let y: f64 = fmt_sig9(x).parse().unwrap();
            assert!(((x - y) / x).abs() < 1e-8, "{x} -> {y}");
        }
    }
}
