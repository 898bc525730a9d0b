//! Exact parsing of unit-suffixed quantities.

use super::CliError;

const UNITS_PS: [(&str, u128); 8] = [
    ("ps", 1),
    ("ns", 1_000),
    ("us", 1_000_000),
    ("µs", 1_000_000),
    ("ms", 1_000_000_000),
    ("s", 1_000_000_000_000),
    ("min", 60_000_000_000_000),
    ("h", 3_600_000_000_000_000),
];

/// Decimal literal as `(negative, mantissa, exponent)`, value
/// `mantissa * 10^exponent`.
fn parse_decimal(s: &str) -> Option<(bool, u128, i32)> {
    let (neg, s) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (num, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int, frac) = num.split_once('.').unwrap_or((num, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let digits = digits.trim_start_matches('0');
    let mantissa = if digits.is_empty() { 0 } else { digits.parse::<u128>().ok()? };
    Some((neg, mantissa, exp.checked_sub(frac.len() as i32)?))
}

fn scale_exact(mantissa: u128, unit: u128, exp: i32) -> Option<u128> {
    let mut v = mantissa.checked_mul(unit)?;
    if exp >= 0 {
        for _ in 0..exp {
            v = v.checked_mul(10)?;
        }
        Some(v)
    } else {
        let mut d: u128 = 1;
        for _ in 0..(-exp) {
            d = d.checked_mul(10)?;
        }
        (v % d == 0).then(|| v / d)
    }
}

fn split_unit(s: &str) -> Option<(&str, u128)> {
    let s = s.trim();
    UNITS_PS
        .iter()
        .filter(|(u, _)| s.ends_with(u))
        .max_by_key(|(u, _)| u.len())
        .map(|(u, ps)| (s[..s.len() - u.len()].trim_end(), *ps))
}

/// Signed duration in whole picoseconds. A unit suffix is required.
pub fn parse_duration_ps(s: &str) -> Result<i128, CliError> {
    let bad = |why: &str| CliError::Parse(format!("duration `{s}`: {why}"));
    let (num, unit) = split_unit(s).ok_or_else(|| bad("missing unit suffix (ps, ns, us, ms, s, min, h)"))?;
    let (neg, m, e) = parse_decimal(num).ok_or_else(|| bad("not a decimal number"))?;
    let ps = scale_exact(m, unit, e).ok_or_else(|| bad("not a whole number of picoseconds"))?;
    let ps = i128::try_from(ps).map_err(|_| bad("too large"))?;
    Ok(if neg { -ps } else { ps })
}

/// Duration in nanoseconds, for window edges.
pub fn parse_duration_ns(s: &str) -> Result<f64, CliError> {
    Ok(parse_duration_ps(s)? as f64 / 1e3)
}

/// Nonnegative duration in seconds.
pub fn parse_duration_s(s: &str) -> Result<f64, CliError> {
    let ps = parse_duration_ps(s)?;
    if ps < 0 {
        return Err(CliError::Parse(format!("duration `{s}` is negative")));
    }
    Ok(ps as f64 / 1e12)
}

/// Nonnegative integer count; accepts exponent notation when the value is
/// whole, such as `1.5e8`.
pub fn parse_count(s: &str) -> Result<u64, CliError> {
    let bad = || CliError::Parse(format!("count `{s}` is not a nonnegative integer"));
    let (neg, m, e) = parse_decimal(s.trim()).ok_or_else(bad)?;
    if neg && m != 0 {
        return Err(bad());
    }
    let v = scale_exact(m, 1, e).ok_or_else(bad)?;
    u64::try_from(v).map_err(|_| bad())
}

/// Pump grid as `start:stop:step` (inclusive) or a comma list, in mW.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Parse(format!("pump grid `{s}`: {why}"));
    let num = |t: &str| t.trim().trim_end_matches("mW").trim().parse::<f64>().map_err(|_| bad("not a number"));
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || b < a {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        if n > 1_000_000 {
            return Err(bad("more than 10^6 points"));
        }
        (0..=n).map(|i| a + step * i as f64).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(bad("values must be finite and >= 0"));
    }
    Ok(values)
}
