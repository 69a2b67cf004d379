//! Stylized-fact diagnostics: previous-tick sampling, signature plot, Epps
//! effect and intertrade durations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orderbook::PricePath;
use crate::scalar::Real;
use crate::stream::{EventStream, StreamId};

/// Regular sampling grid `start, start + step, …` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularGrid<T> {
    pub start: T,
    pub step: T,
    pub count: usize,
}

impl<T: Real> RegularGrid<T> {
    pub fn new(start: T, step: T, count: usize) -> Result<Self> {
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::InvalidInput(format!("grid step {step} must be > 0")));
        }
        if count == 0 {
            return Err(Error::InvalidInput("grid needs at least one point".into()));
        }
        Ok(Self { start, step, count })
    }

    /// Largest grid of the given step fitting inside `[start, end]`.
    pub fn covering(start: T, end: T, step: T) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidInput(format!(
                "empty interval [{start}, {end}]"
            )));
        }
        let n = ((end - start) / step + T::lit(1e-9)).floor();
        let count = n
            .to_usize()
            .ok_or_else(|| Error::InvalidInput("grid too large".into()))?
            + 1;
        Self::new(start, step, count)
    }

    pub fn point(&self, k: usize) -> T {
        self.start + T::from_usize_lossy(k) * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.count).map(|k| self.point(k))
    }

    pub fn span(&self) -> T {
        T::from_usize_lossy(self.count - 1) * self.step
    }
}

/// Right-continuous step function given by observations `(t_k, x_k)`: the
/// value `x_k` holds on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSeries<T> {
    times: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> StepSeries<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(
                "step series needs as many values as times".into(),
            ));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Unsorted { index: i + 1 });
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Last observation at or before `t`.
    pub fn value_at(&self, t: T) -> Option<T> {
        match self.times.partition_point(|&x| x <= t) {
            0 => None,
            k => Some(self.values[k - 1]),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// What to do with grid points earlier than the first observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeforeFirst<T> {
    Reject,
    Fill(T),
}

/// Previous-tick ("tick estimator") sampling: each grid point takes the last
/// observation at or before it.
pub fn previous_tick_sample<T: Real>(
    series: &StepSeries<T>,
    grid: &RegularGrid<T>,
    before_first: BeforeFirst<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(grid.count);
    let mut k = 0usize;
    let times = series.times();
    for t in grid.points() {
        while k < times.len() && times[k] <= t {
            k += 1;
        }
        if k == 0 {
            match before_first {
                BeforeFirst::Reject => {
                    return Err(Error::InvalidInput(format!(
                        "grid point {t} precedes the first observation"
                    )))
                }
                BeforeFirst::Fill(v) => out.push(v),
            }
        } else {
            out.push(series.values()[k - 1]);
        }
    }
    Ok(out)
}

/// One row of a lag table; `value` is `None` where the statistic is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagValue<T> {
    pub tau: T,
    pub value: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagTable<T> {
    pub rows: Vec<LagValue<T>>,
    /// Lags dropped because they exceed the sampled span.
    pub dropped: Vec<T>,
}

fn lag_multiple<T: Real>(tau: T, step: T) -> Result<usize> {
    let ratio = tau / step;
    let k = ratio.round();
    if !(tau > T::zero()) || k < T::one() || (ratio - k).abs() > T::lit(1e-6) * ratio.max(T::one())
    {
        return Err(Error::InvalidInput(format!(
            "lag {tau} is not a positive multiple of the grid step {step}"
        )));
    }
    k.to_usize()
        .ok_or_else(|| Error::InvalidInput(format!("lag {tau} too large")))
}

/// Realized covariation per unit time of two sampled series at lag `k` steps,
/// over the increments fully contained in the sample.
fn covariation<T: Real>(x: &[T], y: &[T], k: usize, span: T) -> T {
    let m = (x.len() - 1) / k;
    let mut sum = T::zero();
    for n in 0..m {
        let dx = x[(n + 1) * k] - x[n * k];
        let dy = y[(n + 1) * k] - y[n * k];
        sum = sum + dx * dy;
    }
    sum / span
}

fn lag_rows<T: Real>(
    len: usize,
    step: T,
    taus: &[T],
    mut stat: impl FnMut(usize, T) -> Option<T>,
) -> Result<LagTable<T>> {
    if len < 2 {
        return Err(Error::InvalidInput(
            "need at least two sampled points".into(),
        ));
    }
    let span = T::from_usize_lossy(len - 1) * step;
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for &tau in taus {
        let k = lag_multiple(tau, step)?;
        if k > len - 1 {
            log::warn!("lag {tau} exceeds the sampled span {span}; dropped");
            dropped.push(tau);
            continue;
        }
        rows.push(LagValue {
            tau,
            value: stat(k, span),
        });
    }
    Ok(LagTable { rows, dropped })
}

/// Signature plot `V(τ) = (1/T) Σ_n (X((n+1)τ) - X(nτ))²` of a log-price
/// sampled on a grid of step `step`.
pub fn signature_plot<T: Real>(log_price: &[T], step: T, taus: &[T]) -> Result<LagTable<T>> {
    lag_rows(log_price.len(), step, taus, |k, span| {
        Some(covariation(log_price, log_price, k, span))
    })
}

/// Epps curve `ρ(τ) = Co(τ) / sqrt(V_1(τ) V_2(τ))` of two log-prices sampled
/// on the same grid.
pub fn epps<T: Real>(
    log_price1: &[T],
    log_price2: &[T],
    step: T,
    taus: &[T],
) -> Result<LagTable<T>> {
    if log_price1.len() != log_price2.len() {
        return Err(Error::InvalidInput(
            "Epps needs both series on the same grid".into(),
        ));
    }
    lag_rows(log_price1.len(), step, taus, |k, span| {
        let v1 = covariation(log_price1, log_price1, k, span);
        let v2 = covariation(log_price2, log_price2, k, span);
        if v1 <= T::zero() || v2 <= T::zero() {
            log::debug!("zero variance at lag {k} steps; correlation undefined");
            return None;
        }
        let rho = covariation(log_price1, log_price2, k, span) / (v1 * v2).sqrt();
        Some(rho.max(-T::one()).min(T::one()))
    })
}

/// Lags `step, 2 step, …` up to `max_tau`.
pub fn default_taus<T: Real>(step: T, max_tau: T) -> Vec<T> {
    let n = (max_tau / step + T::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(0);
    (1..=n).map(|k| T::from_usize_lossy(k) * step).collect()
}

/// Least-squares fit of `log value = log prefactor + exponent * log τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit<T> {
    pub exponent: T,
    pub prefactor: T,
    pub r_squared: T,
    pub points: usize,
}

pub fn power_law_fit<T: Real>(table: &LagTable<T>) -> Option<PowerLawFit<T>> {
    let pts: Vec<(T, T)> = table
        .rows
        .iter()
        .filter_map(|r| match r.value {
            Some(v) if v > T::zero() && r.tau > T::zero() => Some((r.tau.ln(), v.ln())),
            _ => None,
        })
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = T::from_usize_lossy(n);
    let mx = pts.iter().map(|p| p.0).sum::<T>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<T>() / nf;
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    let syy = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<T>();
    if sxx <= T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > T::zero() {
        (sxy * sxy) / (sxx * syy)
    } else {
        T::one()
    };
    Some(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
        points: n,
    })
}

/// Equal-weight average of lag tables computed on separate windows. Rows are
/// matched by position; undefined entries are skipped.
pub fn average_tables<T: Real>(tables: &[LagTable<T>]) -> Option<LagTable<T>> {
    let first = tables.first()?;
    let rows = first
        .rows
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let vals: Vec<T> = tables
                .iter()
                .filter_map(|t| t.rows.get(k).and_then(|r| r.value))
                .collect();
            let value = if vals.is_empty() {
                None
            } else {
                Some(vals.iter().copied().sum::<T>() / T::from_usize_lossy(vals.len()))
            };
            LagValue {
                tau: row.tau,
                value,
            }
        })
        .collect();
    Some(LagTable {
        rows,
        dropped: first.dropped.clone(),
    })
}

/// Durations `d_k = t_k - t_{k-1}` between consecutive events accepted by `filter`.
pub fn durations<T: Real>(events: &EventStream<T>, filter: impl Fn(StreamId) -> bool) -> Vec<T> {
    duration_volume(events, filter)
        .into_iter()
        .map(|(d, _)| d)
        .collect()
}

/// `(duration, volume)` pairs, one per filtered event after the first.
pub fn duration_volume<T: Real>(
    events: &EventStream<T>,
    filter: impl Fn(StreamId) -> bool,
) -> Vec<(T, T)> {
    let mut out = Vec::new();
    let mut prev: Option<T> = None;
    for ev in events.events().iter().filter(|e| filter(e.stream)) {
        if let Some(p) = prev {
            out.push((ev.time - p, ev.volume));
        }
        prev = Some(ev.time);
    }
    out
}

/// Last-trade price: buy market orders (ask-up) trade at the ask before the
/// move, sell market orders (bid-down) at the bid before the move. Starts at
/// the initial mid.
pub fn last_trade_series<T: Real>(path: &PricePath<T>) -> StepSeries<T> {
    let price = |ticks: i64| path.p0 + T::from_i64(ticks).expect("tick count fits") * path.tick;
    let mut times = vec![path.start];
    let mut values = vec![(price(path.initial_ask_ticks) + price(0)) * T::lit(0.5)];
    let (mut ask, mut bid) = (path.initial_ask_ticks, 0i64);
    for k in 0..path.times.len() {
        let (na, nb) = (path.ask_ticks[k], path.bid_ticks[k]);
        if na > ask {
            times.push(path.times[k]);
            values.push(price(ask));
        } else if nb < bid {
            times.push(path.times[k]);
            values.push(price(bid));
        }
        ask = na;
        bid = nb;
    }
    StepSeries::new(times, values).expect("event times are sorted")
}
