//! File formats: keyed parameter text, event CSV files and result tables.

pub mod events;
pub mod params_text;
pub mod tables;

use crate::scalar::Real;

pub use events::{ingest, ingest_str, write_events, IngestConfig, IngestReport, Ingested};
pub use params_text::{deserialize_params, serialize_params};
pub use tables::Table;

/// Scientific notation with 17 significant digits.
pub fn fmt17<T: Real>(x: T) -> String {
    format!("{x:.16e}")
}

/// Shortest decimal that reads back to `x`, scaled by `10^shift`, written
/// without an exponent. Used for millisecond timestamps so that
/// seconds -> milliseconds -> seconds is exact.
pub fn fmt_scaled<T: Real>(x: T, shift: i32) -> String {
    if x == T::zero() {
        return "0".into();
    }
    let sci = format!("{x:e}");
    let (mant, exp) = sci
        .split_once('e')
        .expect("LowerExp output has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant),
    };
    let digits: String = mant.chars().filter(|c| *c != '.').collect();
    // value = 0.d1d2... * 10^(point)
    let point = exp + shift + 1;
    let len = digits.len() as i32;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point >= len {
        format!("{}{}", digits, "0".repeat((point - len) as usize))
    } else {
        format!(
            "{}.{}",
            &digits[..point as usize],
            &digits[point as usize..]
        )
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// Parses a decimal and scales it by `10^-shift` with a single rounding.
pub fn parse_scaled<T: Real>(s: &str, shift: i32) -> Option<T> {
    let s = s.trim();
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    if mant.is_empty() {
        return None;
    }
    format!("{mant}e{}", exp - shift).parse().ok()
}
