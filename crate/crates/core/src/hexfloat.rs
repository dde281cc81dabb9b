//! Exact text form for `f64` and complex matrices: C99 hexadecimal floats.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::matrix::CMat;

/// `0x1.<hex>p<exp>` with trailing zero digits removed; `inf`, `-inf`, `nan` for the rest.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let frac = if digits.is_empty() { String::new() } else { format!(".{digits}") };
    let esign = if e >= 0 { "+" } else { "-" };
    format!("{sign}0x{lead}{frac}p{esign}{}", e.abs())
}

pub fn parse_f64(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    hexf_parse::parse_hexf64(t, false).map_err(|e| LabError::Argument(format!("bad hex float {t:?}: {e}")))
}

/// `rows cols` on the first line, then one line per row of `re im` pairs.
pub fn format_matrix(m: &CMat) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{} {}", format_f64(m[(i, j)].re), format_f64(m[(i, j)].im)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(s: &str) -> Result<CMat> {
    let mut lines = s.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| LabError::Argument("empty matrix text".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| LabError::Argument(format!("bad dimension {t:?}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(LabError::Argument(format!("header must be `rows cols`, got {header:?}")));
    };
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| LabError::Argument(format!("missing row {i}")))?;
        let vals: Vec<f64> = line.split_whitespace().map(parse_f64).collect::<Result<_>>()?;
        if vals.len() != 2 * cols {
            return Err(LabError::Argument(format!("row {i} has {} numbers, expected {}", vals.len(), 2 * cols)));
        }
        for j in 0..cols {
            m[(i, j)] = Complex64::new(vals[2 * j], vals[2 * j + 1]);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(format_f64(1.0), "0x1p+0");
        assert_eq!(format_f64(-0.5), "-0x1p-1");
        assert_eq!(format_f64(3.0), "0x1.8p+1");
        assert_eq!(format_f64(0.0), "0x0p+0");
        assert_eq!(format_f64(-0.0), "-0x0p+0");
        assert_eq!(format_f64(f64::MIN_POSITIVE / 4.0), "0x0.4p-1022");
        assert_eq!(parse_f64("0x1.8p+1").unwrap(), 3.0);
        assert!(parse_f64("nan").unwrap().is_nan());
        assert!(parse_f64("1.5").is_err());
    }

    #[test]
    fn matrix_roundtrip() {
        let m = CMat::from_fn(2, 3, |i, j| Complex64::new(0.1 * i as f64 - j as f64, 1.0 / (1.0 + (i + j) as f64)));
        let text = format_matrix(&m);
        assert_eq!(parse_matrix(&text).unwrap(), m);
        assert!(parse_matrix("2 2\n0x1p+0 0x0p+0\n").is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            let back = parse_f64(&format_f64(x)).unwrap();
            if x.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), x.to_bits());
            }
        }
    }
}
