/// Formats `x` with `digits` significant digits, like C's `%.*g`: plain
/// decimal for moderate exponents, scientific otherwise, trailing zeros
/// dropped.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim(&format!("{:.*}", decimals, x)).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Nine significant digits, the precision of every float written to CSV.
pub fn f9(x: f64) -> String {
    sig(x, 9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_digits() {
        assert_eq!(f9(0.04156354), "0.04156354");
        assert_eq!(f9(1.150305871234), "1.15030587");
        assert_eq!(f9(123456789012.0), "1.23456789e+11");
        assert_eq!(f9(0.0000012345678912), "1.23456789e-06");
        assert_eq!(f9(2.0), "2");
        assert_eq!(f9(0.0), "0");
        assert_eq!(f9(-0.5), "-0.5");
        assert_eq!(f9(1e-5), "1e-05");
        assert_eq!(f9(1e-4), "0.0001");
    }
}
