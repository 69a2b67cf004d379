//! Keyed text format for parameter sets.
//!
//! ```text
//! version = 1
//! assets = 1
//! baseline.0.ask.up = 5.0000000000000000e-1
//! decay.0.ask.up = 2.0000000000000000e0
//! impact_exponent.0.ask.up = 5.0000000000000000e-1
//! mark_rate.0.ask.up = 1.0000000000000000e0
//! branching.0.ask.up.0.ask.up = 6.0000000000000000e-1
//! ```
//!
//! Every stream needs its four scalar keys and every cell allowed by the
//! bid/ask pattern needs a `branching` key. Forbidden cells may be listed only
//! with value 0. Numbers carry 17 significant digits so that reading back a
//! written file reproduces the parameters bit for bit. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::orderbook::InteractionPattern;
use crate::params::{ExpKernel, Matrix, ParameterSet, PowerImpact};
use crate::scalar::Real;
use crate::stream::StreamId;

pub const FORMAT_VERSION: u32 = 1;

pub fn serialize_params<T: Real>(p: &ParameterSet<T>) -> String {
    let mut out = String::new();
    let streams: Vec<StreamId> = StreamId::all(p.assets()).collect();
    let pattern = InteractionPattern::table(p.assets());
    writeln!(out, "version = {FORMAT_VERSION}").unwrap();
    writeln!(out, "assets = {}", p.assets()).unwrap();
    for &s in &streams {
        writeln!(out, "baseline.{} = {}", s.key(), fmt17(p.baseline(s))).unwrap();
    }
    for &s in &streams {
        writeln!(out, "decay.{} = {}", s.key(), fmt17(p.kernel(s).rate)).unwrap();
    }
    for &s in &streams {
        writeln!(
            out,
            "impact_exponent.{} = {}",
            s.key(),
            fmt17(p.impact(s).exponent)
        )
        .unwrap();
    }
    for &s in &streams {
        writeln!(
            out,
            "mark_rate.{} = {}",
            s.key(),
            fmt17(p.impact(s).mark_rate)
        )
        .unwrap();
    }
    for &t in &streams {
        for &s in &streams {
            if pattern.allowed(t.index(), s.index()) {
                writeln!(
                    out,
                    "branching.{}.{} = {}",
                    t.key(),
                    s.key(),
                    fmt17(p.branching_entry(t, s))
                )
                .unwrap();
            }
        }
    }
    out
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn deserialize_params<T: Real>(text: &str) -> Result<ParameterSet<T>> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut last_line = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(perr(
                line,
                format!("expected `key = value`, found `{content}`"),
            ));
        };
        let key = key.trim().to_string();
        if let Some(prev) = entries.get(&key) {
            return Err(perr(
                line,
                format!("duplicate key `{key}` (first on line {})", prev.line),
            ));
        }
        entries.insert(
            key,
            Entry {
                line,
                value: value.trim().to_string(),
                used: false,
            },
        );
    }
    let eof = last_line + 1;

    let mut take = |key: &str| -> Result<(usize, String)> {
        match entries.get_mut(key) {
            Some(e) => {
                e.used = true;
                Ok((e.line, e.value.clone()))
            }
            None => Err(perr(
                eof,
                format!("missing key `{key}` (input ends at line {last_line})"),
            )),
        }
    };

    let (line, version) = take("version")?;
    match version.parse::<u32>() {
        Ok(FORMAT_VERSION) => {}
        Ok(v) => {
            return Err(perr(
                line,
                format!("version: unsupported format version {v} (expected {FORMAT_VERSION})"),
            ))
        }
        Err(_) => {
            return Err(perr(
                line,
                format!("version: `{version}` is not an integer"),
            ))
        }
    }
    let (line, assets) = take("assets")?;
    let assets: usize = match assets.parse() {
        Ok(a) if a >= 1 => a,
        _ => {
            return Err(perr(
                line,
                format!("assets: `{assets}` is not a positive integer"),
            ))
        }
    };

    let mut number = |key: &str, positive: bool| -> Result<T> {
        let (line, raw) = take(key)?;
        let v: T = raw
            .parse()
            .map_err(|_| perr(line, format!("{key}: `{raw}` is not a number")))?;
        if !v.is_finite() {
            return Err(perr(line, format!("{key}: value must be finite")));
        }
        if positive && !(v > T::zero()) {
            return Err(perr(
                line,
                format!("{key}: value must be positive, got {raw}"),
            ));
        }
        if !(v >= T::zero()) {
            return Err(perr(
                line,
                format!("{key}: value must be non-negative, got {raw}"),
            ));
        }
        Ok(v)
    };

    let streams: Vec<StreamId> = StreamId::all(assets).collect();
    let n = streams.len();
    let mut baseline = Vec::with_capacity(n);
    let mut kernels = Vec::with_capacity(n);
    let mut impacts = Vec::with_capacity(n);
    for &s in &streams {
        baseline.push(number(&format!("baseline.{}", s.key()), false)?);
    }
    for &s in &streams {
        kernels.push(ExpKernel::new(number(
            &format!("decay.{}", s.key()),
            true,
        )?)?);
    }
    let exponents: Vec<T> = streams
        .iter()
        .map(|s| number(&format!("impact_exponent.{}", s.key()), false))
        .collect::<Result<_>>()?;
    for (k, &s) in streams.iter().enumerate() {
        let rate = number(&format!("mark_rate.{}", s.key()), true)?;
        impacts.push(PowerImpact::new(exponents[k], rate)?);
    }
    let pattern = InteractionPattern::table(assets);
    let mut branching = Matrix::zeros(n);
    for &t in &streams {
        for &s in &streams {
            let key = format!("branching.{}.{}", t.key(), s.key());
            if pattern.allowed(t.index(), s.index()) {
                branching.set(t.index(), s.index(), number(&key, false)?);
            }
        }
    }

    // Anything left over is either a forbidden cell (allowed only as 0) or unknown.
    for (key, e) in entries.iter().filter(|(_, e)| !e.used) {
        let cell = key.strip_prefix("branching.").and_then(|rest| {
            let parts: Vec<&str> = rest.split('.').collect();
            if parts.len() != 6 {
                return None;
            }
            let t = StreamId::parse_key(&parts[..3].join("."))?;
            let s = StreamId::parse_key(&parts[3..].join("."))?;
            (t.asset < assets && s.asset < assets).then_some((t, s))
        });
        match cell {
            Some((t, s)) => {
                let v: f64 = e
                    .value
                    .parse()
                    .map_err(|_| perr(e.line, format!("{key}: `{}` is not a number", e.value)))?;
                if v != 0.0 {
                    return Err(perr(
                        e.line,
                        Error::ForbiddenCell {
                            target: t.key(),
                            source_stream: s.key(),
                            value: v,
                        }
                        .to_string(),
                    ));
                }
            }
            None => return Err(perr(e.line, format!("unknown key `{key}`"))),
        }
    }

    ParameterSet::new(assets, baseline, branching, kernels, impacts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SymmetricSpec;

    fn sample() -> ParameterSet<f64> {
        SymmetricSpec {
            baseline: 0.1 + 0.2,
            self_excitation: 1.0 / 3.0,
            side_coupling: 0.1,
            cross_same_direction: 0.05,
            cross_opposite_direction: std::f64::consts::PI / 100.0,
            decay: 2.0,
            impact_exponent: 0.5,
            mark_rate: 1.7,
        }
        .build(2)
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        let text = serialize_params(&p);
        let q: ParameterSet<f64> = deserialize_params(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(text, serialize_params(&q));
    }

    #[test]
    fn round_trip_f32() {
        let p = SymmetricSpec {
            baseline: 0.3f32,
            self_excitation: 1.0 / 3.0,
            side_coupling: 0.1,
            cross_same_direction: 0.0,
            cross_opposite_direction: 0.0,
            decay: 2.0,
            impact_exponent: 0.5,
            mark_rate: 1.7,
        }
        .build(1)
        .unwrap();
        let q: ParameterSet<f32> = deserialize_params(&serialize_params(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn forbidden_cell_named() {
        let mut text = serialize_params(&sample());
        text.push_str("branching.0.ask.down.0.ask.up = 0.25\n");
        let err = deserialize_params::<f64>(&text).unwrap_err().to_string();
        assert!(
            err.contains("0.ask.down") && err.contains("0.ask.up"),
            "{err}"
        );
        let mut ok = serialize_params(&sample());
        ok.push_str("branching.0.ask.down.0.ask.up = 0\n");
        assert!(deserialize_params::<f64>(&ok).is_ok());
    }

    #[test]
    fn truncated_file_reports_line() {
        let text = serialize_params(&sample());
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        match deserialize_params::<f64>(&cut) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 11);
                assert!(message.contains("missing key"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        let text = serialize_params(&sample());
        let neg = text.replacen("decay.0.ask.up = 2", "decay.0.ask.up = -2", 1);
        let err = deserialize_params::<f64>(&neg).unwrap_err().to_string();
        assert!(err.contains("decay.0.ask.up"), "{err}");
        let ver = text.replacen("version = 1", "version = 7", 1);
        assert!(deserialize_params::<f64>(&ver).is_err());
        let junk = format!("{text}colour = blue\n");
        assert!(deserialize_params::<f64>(&junk)
            .unwrap_err()
            .to_string()
            .contains("colour"));
    }
}
