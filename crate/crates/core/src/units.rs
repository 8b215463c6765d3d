//! Time units and the fixed-point microsecond text representation used by
//! every CSV format in the crate.

/// Integer nanoseconds. Used for both instants and durations.
pub type Nanos = i64;

pub const NS_PER_US: Nanos = 1_000;
pub const NS_PER_S: Nanos = 1_000_000_000;

/// Whole microseconds to nanoseconds.
pub const fn us(x: i64) -> Nanos {
    x * NS_PER_US
}

/// Fractional microseconds to the nearest nanosecond.
pub fn us_f64(x: f64) -> Nanos {
    (x * NS_PER_US as f64).round() as Nanos
}

pub fn to_us_f64(t: Nanos) -> f64 {
    t as f64 / NS_PER_US as f64
}

pub fn to_seconds(t: Nanos) -> f64 {
    t as f64 / NS_PER_S as f64
}

/// Formats nanoseconds as microseconds with exactly three decimals.
pub fn format_us(t: Nanos) -> String {
    let sign = if t < 0 { "-" } else { "" };
    let a = t.unsigned_abs();
    format!("{sign}{}.{:03}", a / 1000, a % 1000)
}

/// Parses a decimal microsecond value into nanoseconds without going
/// through floating point. At most three fractional digits are accepted.
pub fn parse_us(s: &str) -> Option<Nanos> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if frac.len() > 3
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let whole: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let mut f: i64 = if frac.is_empty() {
        0
    } else {
        frac.parse().ok()?
    };
    for _ in frac.len()..3 {
        f *= 10;
    }
    let v = whole.checked_mul(1000)?.checked_add(f)?;
    Some(if neg { -v } else { v })
}
