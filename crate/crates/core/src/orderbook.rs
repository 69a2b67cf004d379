//! Bid/ask wiring of the streams: the interaction pattern and the conversion
//! of event counts into first-line price paths.

use serde::Serialize;

use crate::analytics::{RegularGrid, StepSeries};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stream::{EventStream, Side, StreamId};

/// Which branching cells may be non-zero.
///
/// Within an asset only same-direction streams interact (ask-up and bid-up
/// excite each other, as do ask-down and bid-down). Across assets only
/// same-side streams interact, in either direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InteractionPattern {
    assets: usize,
    allowed: Vec<bool>,
}

impl InteractionPattern {
    /// Full pattern for `assets` assets.
    pub fn table(assets: usize) -> Self {
        Self::table_filtered(assets, |_, _| true)
    }

    /// Full pattern intersected with a caller-supplied filter on `(target, source)`.
    pub fn table_filtered(assets: usize, keep: impl Fn(StreamId, StreamId) -> bool) -> Self {
        let n = assets * StreamId::PER_ASSET;
        let mut allowed = vec![false; n * n];
        for t in StreamId::all(assets) {
            for s in StreamId::all(assets) {
                let ok = if t.asset == s.asset {
                    t.direction == s.direction
                } else {
                    t.side == s.side
                };
                allowed[t.index() * n + s.index()] = ok && keep(t, s);
            }
        }
        Self { assets, allowed }
    }

    /// Only the diagonal (pure self-excitation).
    pub fn self_only(assets: usize) -> Self {
        Self::table_filtered(assets, |t, s| t == s)
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn dim(&self) -> usize {
        self.assets * StreamId::PER_ASSET
    }

    pub fn allowed(&self, target: usize, source: usize) -> bool {
        self.allowed[target * self.dim() + source]
    }

    pub fn allowed_count(&self) -> usize {
        self.allowed.iter().filter(|&&b| b).count()
    }

    /// `true` when every allowed cell is also allowed by the full pattern.
    pub fn is_within_table(&self) -> bool {
        let full = Self::table(self.assets);
        self.allowed
            .iter()
            .zip(&full.allowed)
            .all(|(&mine, &theirs)| !mine || theirs)
    }
}

pub fn build_pattern(assets: usize) -> Result<InteractionPattern> {
    if assets == 0 {
        return Err(Error::InvalidInput("asset count must be >= 1".into()));
    }
    Ok(InteractionPattern::table(assets))
}

/// Best ask and best bid of one asset as step functions of time. Prices are
/// stored as integer tick offsets from `p0`, so every price lies exactly on
/// the tick lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricePath<T> {
    pub asset: usize,
    pub p0: T,
    pub tick: T,
    pub start: T,
    pub end: T,
    /// Ask offset in ticks before the first event.
    pub initial_ask_ticks: i64,
    /// Time of each event touching this asset.
    pub times: Vec<T>,
    /// Ask offset in ticks after each event.
    pub ask_ticks: Vec<i64>,
    /// Bid offset in ticks after each event.
    pub bid_ticks: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceConfig<T> {
    pub p0: T,
    pub tick: T,
    /// Initial spread in ticks, added to the ask.
    pub initial_spread_ticks: i64,
}

impl<T: Real> PriceConfig<T> {
    pub fn new(p0: T, tick: T, initial_spread_ticks: i64) -> Result<Self> {
        if !(p0 > T::zero()) || !p0.is_finite() {
            return Err(Error::param("p0", format!("{p0} must be > 0")));
        }
        if !(tick > T::zero()) || !tick.is_finite() {
            return Err(Error::param("tick", format!("{tick} must be > 0")));
        }
        if initial_spread_ticks < 0 {
            return Err(Error::param("initial_spread", "must be >= 0 ticks"));
        }
        Ok(Self {
            p0,
            tick,
            initial_spread_ticks,
        })
    }
}

/// Price paths with both quotes starting at `p0` (zero initial spread).
pub fn prices_from_counts<T: Real>(
    events: &EventStream<T>,
    p0: T,
    tick: T,
) -> Result<Vec<PricePath<T>>> {
    price_paths(events, &PriceConfig::new(p0, tick, 0)?)
}

/// One price path per asset: `p_a(t) = p0 + s0 + (N_a+(t) - N_a-(t)) tick`
/// and `p_b(t) = p0 + (N_b+(t) - N_b-(t)) tick`.
pub fn price_paths<T: Real>(
    events: &EventStream<T>,
    cfg: &PriceConfig<T>,
) -> Result<Vec<PricePath<T>>> {
    let mut paths: Vec<PricePath<T>> = (0..events.assets())
        .map(|asset| PricePath {
            asset,
            p0: cfg.p0,
            tick: cfg.tick,
            start: events.start(),
            end: events.end(),
            initial_ask_ticks: cfg.initial_spread_ticks,
            times: Vec::new(),
            ask_ticks: Vec::new(),
            bid_ticks: Vec::new(),
        })
        .collect();
    let mut state: Vec<(i64, i64)> = vec![(cfg.initial_spread_ticks, 0); events.assets()];
    for ev in events.events() {
        let (ask, bid) = &mut state[ev.stream.asset];
        match ev.stream.side {
            Side::Ask => *ask += ev.stream.direction.sign(),
            Side::Bid => *bid += ev.stream.direction.sign(),
        }
        let path = &mut paths[ev.stream.asset];
        path.times.push(ev.time);
        path.ask_ticks.push(*ask);
        path.bid_ticks.push(*bid);
    }
    Ok(paths)
}

impl<T: Real> PricePath<T> {
    fn price(&self, ticks: i64) -> T {
        self.p0 + T::from_i64(ticks).expect("tick count fits scalar") * self.tick
    }

    /// Number of events at or before `t`.
    fn applied(&self, t: T) -> usize {
        self.times.partition_point(|&x| x <= t)
    }

    pub fn ask_ticks_at(&self, t: T) -> i64 {
        match self.applied(t) {
            0 => self.initial_ask_ticks,
            k => self.ask_ticks[k - 1],
        }
    }

    pub fn bid_ticks_at(&self, t: T) -> i64 {
        match self.applied(t) {
            0 => 0,
            k => self.bid_ticks[k - 1],
        }
    }

    pub fn ask_at(&self, t: T) -> T {
        self.price(self.ask_ticks_at(t))
    }

    pub fn bid_at(&self, t: T) -> T {
        self.price(self.bid_ticks_at(t))
    }

    pub fn spread_ticks_at(&self, t: T) -> i64 {
        self.ask_ticks_at(t) - self.bid_ticks_at(t)
    }

    pub fn spread_at(&self, t: T) -> T {
        T::from_i64(self.spread_ticks_at(t)).expect("tick count fits scalar") * self.tick
    }

    fn series(&self, value: impl Fn(i64, i64) -> T) -> StepSeries<T> {
        let mut times = Vec::with_capacity(self.times.len() + 1);
        let mut values = Vec::with_capacity(self.times.len() + 1);
        times.push(self.start);
        values.push(value(self.initial_ask_ticks, 0));
        for k in 0..self.times.len() {
            times.push(self.times[k]);
            values.push(value(self.ask_ticks[k], self.bid_ticks[k]));
        }
        StepSeries::new(times, values).expect("event times are sorted")
    }

    pub fn ask_series(&self) -> StepSeries<T> {
        self.series(|a, _| self.price(a))
    }

    pub fn bid_series(&self) -> StepSeries<T> {
        self.series(|_, b| self.price(b))
    }

    /// Mid price `(p_a + p_b) / 2`.
    pub fn mid_series(&self) -> StepSeries<T> {
        self.series(|a, b| (self.price(a) + self.price(b)) * T::lit(0.5))
    }

    pub fn spread_step_series(&self) -> StepSeries<T> {
        self.series(|a, b| T::from_i64(a - b).expect("tick count fits scalar") * self.tick)
    }

    /// Number of events after which the bid exceeds the ask.
    pub fn crossed_events(&self) -> usize {
        self.ask_ticks
            .iter()
            .zip(&self.bid_ticks)
            .filter(|(a, b)| b > a)
            .count()
    }

    /// Fraction of the horizon during which the book is crossed.
    pub fn crossed_fraction(&self) -> T {
        let span = self.end - self.start;
        if span <= T::zero() {
            return T::zero();
        }
        let mut crossed = T::zero();
        let mut t_prev = self.start;
        let mut spread_prev = self.initial_ask_ticks;
        for k in 0..self.times.len() {
            if spread_prev < 0 {
                crossed = crossed + (self.times[k] - t_prev);
            }
            t_prev = self.times[k];
            spread_prev = self.ask_ticks[k] - self.bid_ticks[k];
        }
        if spread_prev < 0 {
            crossed = crossed + (self.end - t_prev);
        }
        crossed / span
    }
}

/// Spread sampled on a grid with the previous-tick rule.
pub fn spread_series<T: Real>(path: &PricePath<T>, grid: &RegularGrid<T>) -> Vec<T> {
    grid.points().map(|t| path.spread_at(t)).collect()
}
