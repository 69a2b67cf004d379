//! Tick files: `timestamp_ms,asset,side,direction,price,volume`.
//!
//! Lines starting with `#` are comments; `# key = value` comments carry
//! metadata (`assets`, `start`, `end`, `volume_unit`). Timestamps are
//! milliseconds and become seconds by an exact decimal shift.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{fmt17, fmt_scaled, parse_scaled};
use crate::orderbook::PricePath;
use crate::scalar::Real;
use crate::stream::{Direction, EventStream, MarkedEvent, Side, StreamId};

pub const COLUMNS: [&str; 6] = [
    "timestamp_ms",
    "asset",
    "side",
    "direction",
    "price",
    "volume",
];
const DAY: f64 = 86_400.0;

#[derive(Debug, Clone)]
pub struct IngestConfig<T> {
    /// Price grid; off-lattice prices are logged, and dropped when `strict`.
    pub tick_size: Option<T>,
    pub strict: bool,
    /// Rows earlier than the latest time seen by more than this are dropped;
    /// smaller inversions are re-sorted.
    pub order_tolerance: T,
    /// Drop rows where the quoted spread exceeds this multiple of the median.
    pub spread_multiple: Option<T>,
    /// Drop rows within this many seconds of midnight.
    pub midnight_window: Option<T>,
    /// Abort when more than this fraction of rows cannot be parsed.
    pub max_bad_fraction: T,
    /// Seconds subtracted from every time; default: midnight (UTC) of the
    /// first row's day, or 0 when the file declares its own horizon.
    pub epoch: Option<T>,
    /// Asset symbols in index order; default from metadata, else sorted.
    pub assets: Option<Vec<String>>,
}

impl<T: Real> Default for IngestConfig<T> {
    fn default() -> Self {
        Self {
            tick_size: None,
            strict: false,
            order_tolerance: T::one(),
            spread_multiple: Some(T::lit(10.0)),
            midnight_window: None,
            max_bad_fraction: T::lit(0.05),
            epoch: None,
            assets: None,
        }
    }
}

/// Row counts for every cleaning step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub rows: usize,
    pub unparseable: usize,
    pub non_positive: usize,
    pub out_of_order_dropped: usize,
    pub out_of_order_sorted: usize,
    pub duplicates: usize,
    pub off_lattice: usize,
    pub off_lattice_dropped: usize,
    pub midnight: usize,
    pub wide_spread: usize,
    pub unchanged_price: usize,
    pub no_reference_quote: usize,
    pub direction_inferred: bool,
    pub events: usize,
    pub volume_unit: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Ingested<T> {
    pub symbols: Vec<String>,
    pub events: EventStream<T>,
    /// Quoted price of each event, aligned with `events.events()`.
    pub prices: Vec<T>,
    pub report: IngestReport,
}

#[derive(Debug, Clone, PartialEq)]
struct Row<T> {
    line: usize,
    time: T,
    asset: String,
    side: Side,
    direction: Option<Direction>,
    price: T,
    volume: T,
}

fn parse_side(s: &str) -> Option<Side> {
    match s.to_ascii_lowercase().as_str() {
        "a" | "ask" => Some(Side::Ask),
        "b" | "bid" => Some(Side::Bid),
        _ => None,
    }
}

fn parse_direction(s: &str) -> Option<Direction> {
    match s.to_ascii_lowercase().as_str() {
        "+" | "up" => Some(Direction::Up),
        "-" | "down" => Some(Direction::Down),
        _ => None,
    }
}

fn metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn ingest<T: Real>(path: &Path, cfg: &IngestConfig<T>) -> Result<Ingested<T>> {
    let text = std::fs::read_to_string(path)?;
    ingest_str(&text, cfg)
}

pub fn ingest_str<T: Real>(text: &str, cfg: &IngestConfig<T>) -> Result<Ingested<T>> {
    let meta = metadata(text);
    let mut report = IngestReport {
        volume_unit: meta.get("volume_unit").cloned(),
        ..Default::default()
    };
    let declared_start: Option<T> = meta.get("start").and_then(|s| s.parse().ok());
    let declared_end: Option<T> = meta.get("end").and_then(|s| s.parse().ok());

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    let has_direction;
    if header.iter().all(|h| h.is_empty()) {
        has_direction = true;
    } else {
        let col = |name: &str| header.iter().position(|h| h == name);
        for h in &header {
            if !COLUMNS.contains(&h.as_str()) {
                return Err(Error::InvalidInput(format!("unknown column `{h}`")));
            }
        }
        let need = |name: &str| {
            col(name).ok_or_else(|| Error::InvalidInput(format!("missing column `{name}`")))
        };
        let (ts, asset, side, price, volume) = (
            need("timestamp_ms")?,
            need("asset")?,
            need("side")?,
            need("price")?,
            need("volume")?,
        );
        let dir = col("direction");
        has_direction = dir.is_some();
        for rec in reader.records() {
            report.rows += 1;
            let rec = match rec {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("unreadable row: {e}");
                    report.unparseable += 1;
                    continue;
                }
            };
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let field = |i: usize| rec.get(i).unwrap_or("");
            let parsed = (|| {
                Some(Row {
                    line,
                    time: parse_scaled::<T>(field(ts), 3)?,
                    asset: Some(field(asset).to_string()).filter(|s| !s.is_empty())?,
                    side: parse_side(field(side))?,
                    direction: match dir {
                        Some(d) => Some(parse_direction(field(d))?),
                        None => None,
                    },
                    price: field(price).parse().ok()?,
                    volume: field(volume).parse().ok()?,
                })
            })();
            match parsed {
                Some(r) if r.time.is_finite() && rec.len() == header.len() => rows.push(r),
                _ => {
                    log::warn!("line {line}: unparseable row");
                    report.unparseable += 1;
                }
            }
        }
    }
    if report.rows > 0
        && T::from_usize_lossy(report.unparseable)
            > cfg.max_bad_fraction * T::from_usize_lossy(report.rows)
    {
        return Err(Error::InvalidInput(format!(
            "{} of {} rows unparseable (limit {})",
            report.unparseable, report.rows, cfg.max_bad_fraction
        )));
    }

    rows.retain(|r| {
        let ok = r.price > T::zero()
            && r.volume > T::zero()
            && r.price.is_finite()
            && r.volume.is_finite();
        if !ok {
            log::info!("line {}: non-positive price or volume dropped", r.line);
            report.non_positive += 1;
        }
        ok
    });

    let epoch = cfg.epoch.unwrap_or_else(|| {
        if declared_start.is_some() {
            T::zero()
        } else {
            rows.first()
                .map_or(T::zero(), |r| (r.time / T::lit(DAY)).floor() * T::lit(DAY))
        }
    });
    if epoch != T::zero() {
        for r in &mut rows {
            r.time = r.time - epoch;
        }
    }

    let mut latest = T::neg_infinity();
    let mut inverted = 0;
    rows.retain(|r| {
        if r.time < latest - cfg.order_tolerance {
            log::info!(
                "line {}: out of order by more than the tolerance, dropped",
                r.line
            );
            report.out_of_order_dropped += 1;
            return false;
        }
        if r.time < latest {
            inverted += 1;
        }
        latest = latest.max(r.time);
        true
    });
    report.out_of_order_sorted = inverted;
    rows.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let before = rows.len();
    rows.dedup_by(|b, a| {
        a.time == b.time
            && a.asset == b.asset
            && a.side == b.side
            && a.direction == b.direction
            && a.price == b.price
            && a.volume == b.volume
    });
    report.duplicates = before - rows.len();

    if let Some(tick) = cfg.tick_size {
        rows.retain(|r| {
            let q = r.price / tick;
            let on = (q - q.round()).abs() <= T::lit(1e-6) * q.abs().max(T::one());
            if !on {
                report.off_lattice += 1;
                log::warn!(
                    "line {}: price {} is off the {} tick grid",
                    r.line,
                    r.price,
                    tick
                );
                if cfg.strict {
                    report.off_lattice_dropped += 1;
                    return false;
                }
            }
            true
        });
    }

    if let Some(w) = cfg.midnight_window {
        rows.retain(|r| {
            let tod = r.time - (r.time / T::lit(DAY)).floor() * T::lit(DAY);
            let near = tod < w || T::lit(DAY) - tod < w;
            if near {
                report.midnight += 1;
            }
            !near
        });
    }

    if let Some(k) = cfg.spread_multiple {
        let mut quotes: BTreeMap<&str, (Option<T>, Option<T>)> = BTreeMap::new();
        let mut spreads = Vec::with_capacity(rows.len());
        for r in &rows {
            let q = quotes.entry(r.asset.as_str()).or_default();
            match r.side {
                Side::Ask => q.0 = Some(r.price),
                Side::Bid => q.1 = Some(r.price),
            }
            spreads.push(match *q {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            });
        }
        let mut sorted: Vec<T> = spreads.iter().flatten().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        if let Some(&median) = sorted.get(sorted.len() / 2) {
            if median > T::zero() {
                let limit = k * median;
                let mut keep = spreads.iter().map(|s| s.is_none_or(|s| s <= limit));
                let before = rows.len();
                rows.retain(|r| {
                    let ok = keep.next().unwrap_or(true);
                    if !ok {
                        log::info!("line {}: spread beyond {limit}, dropped", r.line);
                    }
                    ok
                });
                report.wide_spread = before - rows.len();
            }
        }
    }

    if !has_direction {
        report.direction_inferred = true;
        let mut last: BTreeMap<(String, u8), T> = BTreeMap::new();
        rows.retain_mut(|r| {
            let key = (r.asset.clone(), r.side as u8);
            let prev = last.insert(key, r.price);
            match prev {
                None => {
                    report.no_reference_quote += 1;
                    false
                }
                Some(p) if r.price > p => {
                    r.direction = Some(Direction::Up);
                    true
                }
                Some(p) if r.price < p => {
                    r.direction = Some(Direction::Down);
                    true
                }
                Some(_) => {
                    report.unchanged_price += 1;
                    false
                }
            }
        });
    }

    let symbols: Vec<String> = match (&cfg.assets, meta.get("assets")) {
        (Some(list), _) => list.clone(),
        (None, Some(list)) => list.split(',').map(|s| s.trim().to_string()).collect(),
        (None, None) => {
            let mut s: Vec<String> = rows.iter().map(|r| r.asset.clone()).collect();
            s.sort();
            s.dedup();
            s
        }
    };
    let index: BTreeMap<&str, usize> = symbols
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut tagged = Vec::with_capacity(rows.len());
    for r in &rows {
        let Some(&a) = index.get(r.asset.as_str()) else {
            return Err(Error::InvalidInput(format!(
                "line {}: asset `{}` not among the declared assets",
                r.line, r.asset
            )));
        };
        let dir = r.direction.expect("direction set or inferred");
        tagged.push((
            MarkedEvent::new(r.time, StreamId::new(a, r.side, dir), r.volume),
            r.price,
        ));
    }
    tagged.sort_by(|x, y| crate::stream::event_order(&x.0, &y.0));
    let start = declared_start
        .or_else(|| tagged.first().map(|e| e.0.time))
        .unwrap_or(T::zero());
    let end = declared_end
        .or_else(|| tagged.last().map(|e| e.0.time))
        .unwrap_or(start);
    let (events, prices): (Vec<_>, Vec<_>) = tagged.into_iter().unzip();
    report.events = events.len();
    let events = EventStream::new(symbols.len().max(1), events, start, end)?;
    Ok(Ingested {
        symbols,
        events,
        prices,
        report,
    })
}

/// Quote of each event's side just after the event.
pub fn event_prices<T: Real>(events: &EventStream<T>, paths: &[PricePath<T>]) -> Vec<T> {
    let mut cursor = vec![0usize; paths.len()];
    let mut out = Vec::with_capacity(events.len());
    for ev in events.events() {
        let a = ev.stream.asset;
        let path = &paths[a];
        let k = cursor[a];
        cursor[a] += 1;
        let ticks = match ev.stream.side {
            Side::Ask => path.ask_ticks[k],
            Side::Bid => path.bid_ticks[k],
        };
        out.push(path.p0 + T::from_i64(ticks).expect("tick count fits scalar") * path.tick);
    }
    out
}

/// Serializes events in the tick-file format with the horizon and asset
/// list as metadata.
pub fn write_events<T: Real>(
    events: &EventStream<T>,
    prices: &[T],
    symbols: &[String],
    volume_unit: Option<&str>,
) -> Result<String> {
    if prices.len() != events.len() {
        return Err(Error::InvalidInput(format!(
            "{} prices for {} events",
            prices.len(),
            events.len()
        )));
    }
    if symbols.len() != events.assets() {
        return Err(Error::InvalidInput(format!(
            "{} symbols for {} assets",
            symbols.len(),
            events.assets()
        )));
    }
    let mut head = format!(
        "# assets = {}\n# start = {}\n# end = {}\n",
        symbols.join(","),
        fmt17(events.start()),
        fmt17(events.end())
    );
    if let Some(u) = volume_unit {
        head.push_str(&format!("# volume_unit = {u}\n"));
    }
    let mut w = csv::Writer::from_writer(head.into_bytes());
    w.write_record(COLUMNS)?;
    for (ev, &p) in events.events().iter().zip(prices) {
        w.write_record([
            fmt_scaled(ev.time, 3),
            symbols[ev.stream.asset].clone(),
            ev.stream.side.as_char().to_string(),
            ev.stream.direction.as_char().to_string(),
            fmt17(p),
            fmt17(ev.volume),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
