//! Inclusive `start:stop:count` grids, comma lists and single values.

use mapmom_core::{Error, Result};

/// A decimal literal as `mantissa · 10^{−scale}`.
fn decimal(text: &str, what: &str) -> Result<(i128, u32)> {
    let bad = || Error::validation(what, format!("not a decimal number: {text:?}"));
    let s = text.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let m: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    Ok((if neg { -m } else { m }, frac.len() as u32))
}

fn value(text: &str, what: &str) -> Result<f64> {
    let t = text.trim();
    if let Ok((m, s)) = decimal(t, what) {
        return Ok(m as f64 / 10f64.powi(s as i32));
    }
    // scientific notation falls back to the standard parser
    t.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::validation(what, format!("not a number: {t:?}")))
}

/// Parses `start:stop:count`, `a,b,c` or a single value.
pub fn parse_grid(text: &str, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let n: usize = count
                .trim()
                .parse()
                .map_err(|_| Error::validation(what, format!("grid count must be a positive integer, got {count:?}")))?;
            if n == 0 {
                return Err(Error::validation(what, "grid count must be at least 1"));
            }
            let (a, sa) = decimal(start, what)?;
            let (b, sb) = decimal(stop, what)?;
            let scale = sa.max(sb);
            let a = a * 10i128.pow(scale - sa);
            let b = b * 10i128.pow(scale - sb);
            if n == 1 {
                return Ok(vec![a as f64 / 10f64.powi(scale as i32)]);
            }
            let den = (n as i128 - 1) * 10i128.pow(scale);
            // one correctly rounded division per point
            Ok((0..n as i128)
                .map(|k| (a * (n as i128 - 1 - k) + b * k) as f64 / den as f64)
                .collect())
        }
        [_] => text.split(',').map(|p| value(p, what)).collect(),
        _ => Err(Error::validation(what, format!("expected start:stop:count, got {text:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusive_grid() {
        let g = parse_grid("0:1:11", "t").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[10], 1.0);
        assert_eq!(parse_grid("0.5:2:4", "t").unwrap(), vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("2:2:1", "t").unwrap(), vec![2.0]);
    }

    #[test]
    fn lists_and_values() {
        assert_eq!(parse_grid("0.5,1,2", "lags").unwrap(), vec![0.5, 1.0, 2.0]);
        assert_eq!(parse_grid("1e-3", "t").unwrap(), vec![1e-3]);
        assert_eq!(parse_grid("-1.25", "w").unwrap(), vec![-1.25]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_grid("0:1", "t").unwrap_err().is_validation());
        assert!(parse_grid("0:1:0", "t").is_err());
        assert!(parse_grid("a:1:3", "t").is_err());
        assert!(parse_grid("nan", "t").is_err());
    }
}
