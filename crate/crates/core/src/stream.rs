//! Stream labels, marked events and time-ordered event streams.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Ask = 0,
    Bid = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up = 0,
    Down = 1,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Ask, Side::Bid];

    pub fn as_char(self) -> char {
        match self {
            Side::Ask => 'a',
            Side::Bid => 'b',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Ask => "ask",
            Side::Bid => "bid",
        }
    }
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Up, Direction::Down];

    pub fn as_char(self) -> char {
        match self {
            Direction::Up => '+',
            Direction::Down => '-',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }

    /// +1 for up moves, -1 for down moves.
    pub fn sign(self) -> i64 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }
}

/// One of the four price-moving event streams of an asset.
///
/// Streams are flattened as `asset * 4 + side * 2 + direction`, so within an
/// asset the order is ask-up, ask-down, bid-up, bid-down. That order is also
/// the tie-break for simultaneous events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StreamId {
    pub asset: usize,
    pub side: Side,
    pub direction: Direction,
}

impl StreamId {
    pub const PER_ASSET: usize = 4;

    pub fn new(asset: usize, side: Side, direction: Direction) -> Self {
        Self {
            asset,
            side,
            direction,
        }
    }

    pub fn index(self) -> usize {
        self.asset * Self::PER_ASSET + (self.side as usize) * 2 + self.direction as usize
    }

    pub fn from_index(index: usize) -> Self {
        let asset = index / Self::PER_ASSET;
        let rem = index % Self::PER_ASSET;
        let side = if rem < 2 { Side::Ask } else { Side::Bid };
        let direction = if rem.is_multiple_of(2) {
            Direction::Up
        } else {
            Direction::Down
        };
        Self::new(asset, side, direction)
    }

    /// All `4 * assets` streams in index order.
    pub fn all(assets: usize) -> impl Iterator<Item = StreamId> {
        (0..assets * Self::PER_ASSET).map(StreamId::from_index)
    }

    /// Key used in text formats, e.g. `0.ask.up`.
    pub fn key(self) -> String {
        format!(
            "{}.{}.{}",
            self.asset,
            self.side.name(),
            self.direction.name()
        )
    }

    pub fn parse_key(key: &str) -> Option<Self> {
        let mut parts = key.split('.');
        let asset = parts.next()?.parse().ok()?;
        let side = match parts.next()? {
            "ask" => Side::Ask,
            "bid" => Side::Bid,
            _ => return None,
        };
        let direction = match parts.next()? {
            "up" => Direction::Up,
            "down" => Direction::Down,
            _ => return None,
        };
        if parts.next().is_some() {
            return None;
        }
        Some(Self::new(asset, side, direction))
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.key())
    }
}

/// An order event: time, the stream it belongs to, and its volume mark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkedEvent<T> {
    pub time: T,
    pub stream: StreamId,
    pub volume: T,
}

impl<T: Real> MarkedEvent<T> {
    pub fn new(time: T, stream: StreamId, volume: T) -> Self {
        Self {
            time,
            stream,
            volume,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.time.is_finite() {
            return Err(Error::InvalidInput(format!(
                "event time {} is not finite",
                self.time
            )));
        }
        if !(self.volume > T::zero()) || !self.volume.is_finite() {
            return Err(Error::InvalidInput(format!(
                "event volume {} must be positive and finite",
                self.volume
            )));
        }
        Ok(())
    }
}

/// Canonical order of events: by time, then by stream index.
pub fn event_order<T: Real>(a: &MarkedEvent<T>, b: &MarkedEvent<T>) -> Ordering {
    a.time
        .partial_cmp(&b.time)
        .unwrap_or(Ordering::Equal)
        .then(a.stream.index().cmp(&b.stream.index()))
}

/// Time-ordered marked events of a `d`-asset system observed on `[start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStream<T> {
    assets: usize,
    events: Vec<MarkedEvent<T>>,
    start: T,
    end: T,
    /// `false` when events before `start` are known to be missing.
    complete: bool,
}

impl<T: Real> EventStream<T> {
    /// Builds a stream from events already in canonical order.
    pub fn new(assets: usize, events: Vec<MarkedEvent<T>>, start: T, end: T) -> Result<Self> {
        if assets == 0 {
            return Err(Error::InvalidInput("asset count must be >= 1".into()));
        }
        if !(start.is_finite() && end.is_finite()) || end < start {
            return Err(Error::InvalidInput(format!(
                "invalid horizon [{start}, {end}]"
            )));
        }
        for (i, ev) in events.iter().enumerate() {
            ev.validate()?;
            if ev.stream.asset >= assets {
                return Err(Error::InvalidInput(format!(
                    "event {i} references asset {} but the stream has {assets} asset(s)",
                    ev.stream.asset
                )));
            }
            if ev.time < start || ev.time > end {
                return Err(Error::OutOfHorizon {
                    time: ev.time.as_f64(),
                    start: start.as_f64(),
                    end: end.as_f64(),
                });
            }
            if i > 0 && event_order(&events[i - 1], ev) == Ordering::Greater {
                return Err(Error::Unsorted { index: i });
            }
        }
        Ok(Self {
            assets,
            events,
            start,
            end,
            complete: true,
        })
    }

    /// Sorts the events into canonical order before building the stream.
    pub fn from_unsorted(
        assets: usize,
        mut events: Vec<MarkedEvent<T>>,
        start: T,
        end: T,
    ) -> Result<Self> {
        events.sort_by(event_order);
        Self::new(assets, events, start, end)
    }

    pub fn empty(assets: usize, start: T, end: T) -> Result<Self> {
        Self::new(assets, Vec::new(), start, end)
    }

    /// Marks the history as left-truncated: events before `start` exist but
    /// are not recorded.
    pub fn with_incomplete_prefix(mut self) -> Self {
        self.complete = false;
        self
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn stream_count(&self) -> usize {
        self.assets * StreamId::PER_ASSET
    }

    pub fn events(&self) -> &[MarkedEvent<T>] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn end(&self) -> T {
        self.end
    }

    pub fn span(&self) -> T {
        self.end - self.start
    }

    /// Events of one stream, in order.
    pub fn of_stream(&self, stream: StreamId) -> impl Iterator<Item = &MarkedEvent<T>> {
        self.events.iter().filter(move |e| e.stream == stream)
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.stream_count()];
        for e in &self.events {
            counts[e.stream.index()] += 1;
        }
        counts
    }

    /// Events of the stream restricted to `[from, to]`, horizon narrowed to match.
    pub fn window(&self, from: T, to: T) -> Result<Self> {
        let events = self
            .events
            .iter()
            .filter(|e| e.time >= from && e.time <= to)
            .copied()
            .collect();
        let mut out = Self::new(self.assets, events, from, to)?;
        out.complete = self.complete && from <= self.start;
        Ok(out)
    }

    /// Same events with every time shifted by `offset`.
    pub fn shifted(&self, offset: T) -> Result<Self> {
        let events = self
            .events
            .iter()
            .map(|e| MarkedEvent::new(e.time + offset, e.stream, e.volume))
            .collect();
        Self::new(self.assets, events, self.start + offset, self.end + offset)
    }

    /// Appends an event at or after the last one, extending the horizon end if needed.
    pub fn push(&mut self, event: MarkedEvent<T>) -> Result<()> {
        event.validate()?;
        if event.stream.asset >= self.assets {
            return Err(Error::InvalidInput(format!(
                "asset {} out of range",
                event.stream.asset
            )));
        }
        if let Some(last) = self.events.last() {
            if event_order(last, &event) == Ordering::Greater {
                return Err(Error::Unsorted {
                    index: self.events.len(),
                });
            }
        }
        if event.time < self.start {
            return Err(Error::OutOfHorizon {
                time: event.time.as_f64(),
                start: self.start.as_f64(),
                end: self.end.as_f64(),
            });
        }
        if event.time > self.end {
            self.end = event.time;
        }
        self.events.push(event);
        Ok(())
    }

    /// Extends the observation window to `end` without adding events.
    pub fn extend_to(&mut self, end: T) -> Result<()> {
        if end < self.end {
            return Err(Error::InvalidInput(format!(
                "cannot shrink horizon end from {} to {end}",
                self.end
            )));
        }
        self.end = end;
        Ok(())
    }
}

/// Iterates over maximal runs of events sharing one timestamp.
pub(crate) fn time_groups<T: Real>(
    events: &[MarkedEvent<T>],
) -> impl Iterator<Item = &[MarkedEvent<T>]> {
    let mut rest = events;
    std::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        let t = rest[0].time;
        let n = rest.iter().take_while(|e| e.time == t).count();
        let (head, tail) = rest.split_at(n);
        rest = tail;
        Some(head)
    })
}
