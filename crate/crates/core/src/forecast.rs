//! Next-event forecasting and transaction-cost accounting.
//!
//! Two forecasting modes are offered. *Frozen history* evaluates the survival
//! `exp(-[Λ(t₀+τ) - Λ(t₀)])` assuming no event arrives in `[t₀, t₀+τ]`.
//! *Rollout* simulates forward from `t₀`, regenerating marks from the
//! exponential mark law and feeding each simulated event back into the
//! history.

use rand::distr::{Distribution, Open01};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intensity::RecursionState;
use crate::orderbook::PricePath;
use crate::params::ParameterSet;
use crate::scalar::Real;
use crate::simulator::{rng_for, thin};
use crate::stream::{EventStream, StreamId};

fn check_tau<T: Real>(tau: T) -> Result<()> {
    if !(tau >= T::zero()) {
        return Err(Error::param("tau", format!("must be >= 0, got {tau}")));
    }
    Ok(())
}

/// Frozen state at the end of `history`.
fn state_at_end<'a, T: Real>(
    params: &'a ParameterSet<T>,
    history: &EventStream<T>,
) -> Result<RecursionState<'a, T>> {
    let mut st = RecursionState::from_history(params, history)?;
    st.advance_to(history.end())?;
    Ok(st)
}

/// Probability that `stream` has no event in `(t₀, t₀ + τ]`, `t₀ = history.end()`,
/// under frozen history.
pub fn survival<T: Real>(
    params: &ParameterSet<T>,
    history: &EventStream<T>,
    stream: StreamId,
    tau: T,
) -> Result<T> {
    check_tau(tau)?;
    let st = state_at_end(params, history)?;
    Ok((-st.compensator_increment(stream, tau)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve<T> {
    pub stream: StreamId,
    pub taus: Vec<T>,
    pub survival: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NextEventForecast<T> {
    pub at: T,
    /// `λ_j(t₀)` per stream.
    pub hazards: Vec<T>,
    /// `λ_j(t₀) / Σ λ(t₀)`; all zero when the total vanishes.
    pub hazard_share: Vec<T>,
    /// Largest hazard share; ties go to the lowest stream index.
    pub most_probable: StreamId,
    pub curves: Vec<SurvivalCurve<T>>,
    /// Survival of the first event of any stream.
    pub any_survival: Vec<T>,
    /// `∫ S_j(τ) dτ` under frozen history; `None` when `μ_j = 0` (the
    /// stream may never fire).
    pub expected_next: Vec<Option<T>>,
}

#[allow(clippy::too_many_arguments)]
fn simpson<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, fa: T, fm: T, fb: T, tol: T, depth: u32) -> T {
    let m = (a + b) / T::lit(2.0);
    let lm = (a + m) / T::lit(2.0);
    let rm = (m + b) / T::lit(2.0);
    let (flm, frm) = (f(lm), f(rm));
    let h = (b - a) / T::lit(12.0);
    let whole = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    let left = h * (fa + T::lit(4.0) * flm + fm);
    let right = h * (fm + T::lit(4.0) * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= T::lit(15.0) * tol {
        return left + right + diff / T::lit(15.0);
    }
    let half = tol / T::lit(2.0);
    simpson(f, a, m, fa, flm, fm, half, depth - 1) + simpson(f, m, b, fm, frm, fb, half, depth - 1)
}

fn integrate<T: Real>(f: impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    let (fa, fb) = (f(a), f(b));
    let fm = f((a + b) / T::lit(2.0));
    simpson(&f, a, b, fa, fm, fb, tol, 40)
}

/// Frozen-history forecast at `t₀ = history.end()` on the given lags.
pub fn next_event_forecast<T: Real>(
    params: &ParameterSet<T>,
    history: &EventStream<T>,
    taus: &[T],
) -> Result<NextEventForecast<T>> {
    for &tau in taus {
        check_tau(tau)?;
    }
    let st = state_at_end(params, history)?;
    let t0 = history.end();
    let streams: Vec<StreamId> = StreamId::all(params.assets()).collect();
    let hazards = st.intensities_at(t0);
    let total: T = hazards.iter().copied().sum();
    let hazard_share: Vec<T> = hazards
        .iter()
        .map(|&h| {
            if total > T::zero() {
                h / total
            } else {
                T::zero()
            }
        })
        .collect();
    let mut most = 0;
    for (i, &s) in hazard_share.iter().enumerate() {
        if s > hazard_share[most] {
            most = i;
        }
    }
    let curves = streams
        .iter()
        .map(|&s| SurvivalCurve {
            stream: s,
            taus: taus.to_vec(),
            survival: taus
                .iter()
                .map(|&tau| (-st.compensator_increment(s, tau)).exp())
                .collect(),
        })
        .collect();
    let any_survival = taus
        .iter()
        .map(|&tau| {
            let c: T = streams
                .iter()
                .map(|&s| st.compensator_increment(s, tau))
                .sum();
            (-c).exp()
        })
        .collect();
    let expected_next = streams
        .iter()
        .map(|&s| {
            let mu = params.baseline(s);
            if !(mu > T::zero()) {
                return None;
            }
            // Past 40 decay times the excitation has vanished and the tail is
            // exactly exponential with rate μ.
            let cut = T::lit(40.0) / params.kernel(s).rate;
            let surv = |tau: T| (-st.compensator_increment(s, tau)).exp();
            let body = integrate(surv, T::zero(), cut, T::lit(1e-10));
            Some(body + surv(cut) / mu)
        })
        .collect();
    Ok(NextEventForecast {
        at: t0,
        hazards,
        hazard_share,
        most_probable: streams[most],
        curves,
        any_survival,
        expected_next,
    })
}

/// First simulated event per stream in each rollout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rollouts<T> {
    pub at: T,
    pub horizon: T,
    /// `first[r][j]`: delay until the first event of stream `j` in rollout `r`.
    pub first: Vec<Vec<Option<T>>>,
    /// Delay and stream of the very first event of each rollout.
    pub first_any: Vec<Option<(T, StreamId)>>,
}

impl<T: Real> Rollouts<T> {
    /// Fraction of rollouts where `stream` had no event within `τ ≤ horizon`.
    pub fn empirical_survival(&self, stream: StreamId, tau: T) -> T {
        let j = stream.index();
        let alive = self
            .first
            .iter()
            .filter(|r| r[j].is_none_or(|d| d > tau))
            .count();
        T::from_usize_lossy(alive) / T::from_usize_lossy(self.first.len().max(1))
    }

    /// Frequency with which each stream fired first.
    pub fn first_stream_frequencies(&self, streams: usize) -> Vec<T> {
        let mut c = vec![0usize; streams];
        for (_, s) in self.first_any.iter().flatten() {
            c[s.index()] += 1;
        }
        let n = T::from_usize_lossy(self.first_any.len().max(1));
        c.into_iter().map(|k| T::from_usize_lossy(k) / n).collect()
    }
}

/// Monte Carlo rollouts from `t₀ = history.end()` up to `t₀ + horizon`.
/// Rollout `r` uses random stream `r + 1` of `seed`.
pub fn rollout<T: Real>(
    params: &ParameterSet<T>,
    history: &EventStream<T>,
    horizon: T,
    rollouts: usize,
    seed: u64,
) -> Result<Rollouts<T>> {
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::param("horizon", "must be positive and finite"));
    }
    let base = state_at_end(params, history)?;
    let t0 = history.end();
    let n = params.stream_count();
    type Run<T> = (Vec<Option<T>>, Option<(T, StreamId)>);
    let runs: Vec<Run<T>> = (0..rollouts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, r as u64 + 1);
            let mut st = base.clone();
            let mut first = vec![None; n];
            let mut first_any = None;
            let mut seen = 0;
            let mut proposals = 0;
            thin(
                &mut st,
                t0 + horizon,
                &mut rng,
                usize::MAX,
                &mut proposals,
                |ev| {
                    let d = ev.time - t0;
                    if first_any.is_none() {
                        first_any = Some((d, ev.stream));
                    }
                    let slot = &mut first[ev.stream.index()];
                    if slot.is_none() {
                        *slot = Some(d);
                        seen += 1;
                    }
                    seen < n
                },
            )?;
            Ok((first, first_any))
        })
        .collect::<Result<_>>()?;
    let (first, first_any) = runs.into_iter().unzip();
    Ok(Rollouts {
        at: t0,
        horizon,
        first,
        first_any,
    })
}

/// Volumes available at increasing tick offsets beyond the best quote.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactLadder<T> {
    levels: Vec<(i64, T)>,
}

impl<T: Real> ImpactLadder<T> {
    /// Offsets must start at 0 and increase strictly; volumes must be positive.
    pub fn new(levels: Vec<(i64, T)>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::param("ladder", "needs at least one level"));
        }
        if levels[0].0 != 0 {
            return Err(Error::param("ladder", "first level must sit at offset 0"));
        }
        for (k, w) in levels.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(Error::param(
                    format!("ladder[{}]", k + 1),
                    "offsets must increase strictly",
                ));
            }
        }
        if let Some(k) = levels
            .iter()
            .position(|l| !(l.1 > T::zero()) || !l.1.is_finite())
        {
            return Err(Error::param(
                format!("ladder[{k}]"),
                "volume must be positive",
            ));
        }
        Ok(Self { levels })
    }

    /// Consecutive offsets `0, 1, …` with volumes drawn `Exp(rate)`.
    pub fn simulated<R: Rng + ?Sized>(rate: T, levels: usize, rng: &mut R) -> Result<Self> {
        let levels = (0..levels)
            .map(|k| {
                let u: f64 = Open01.sample(rng);
                (k as i64, -T::lit(u).ln() / rate)
            })
            .collect();
        Self::new(levels)
    }

    pub fn levels(&self) -> &[(i64, T)] {
        &self.levels
    }

    pub fn depth(&self) -> T {
        self.levels.iter().map(|l| l.1).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactCost<T> {
    pub quantity: T,
    pub cost: T,
    /// `(offset, filled volume)` per consumed level.
    pub fills: Vec<(i64, T)>,
    pub unfilled: T,
}

impl<T: Real> ImpactCost<T> {
    pub fn complete(&self) -> bool {
        self.unfilled == T::zero()
    }
}

/// Walks the ladder best-first; the cost is `Σ k_i x_i tick` over consumed
/// volume, the last level possibly partial.
pub fn market_impact_cost<T: Real>(
    ladder: &ImpactLadder<T>,
    quantity: T,
    tick: T,
) -> Result<ImpactCost<T>> {
    if !(quantity > T::zero()) || !quantity.is_finite() {
        return Err(Error::param("quantity", "must be positive and finite"));
    }
    if !(tick > T::zero()) {
        return Err(Error::param("tick", "must be positive"));
    }
    let mut left = quantity;
    // volume-weighted tick offsets; scaled by the tick once at the end
    let mut ticks = T::zero();
    let mut fills = Vec::new();
    for &(x, k) in &ladder.levels {
        if left <= T::zero() {
            break;
        }
        let take = k.min(left);
        ticks = ticks + take * T::from_i64(x).expect("offset fits scalar");
        fills.push((x, take));
        left = left - take;
    }
    Ok(ImpactCost {
        quantity,
        cost: ticks * tick,
        fills,
        unfilled: left.max(T::zero()),
    })
}

/// Cost of buying `k` at the ask at `t_in` and selling at the bid at
/// `t_out`: `k · s(t_out)`, plus the ladder impact of `k` on each leg when a
/// ladder is supplied.
pub fn round_trip_cost<T: Real>(
    path: &PricePath<T>,
    t_in: T,
    t_out: T,
    k: T,
    ladder: Option<&ImpactLadder<T>>,
) -> Result<T> {
    for t in [t_in, t_out] {
        if !(t >= path.start && t <= path.end) {
            return Err(Error::OutOfHorizon {
                time: t.as_f64(),
                start: path.start.as_f64(),
                end: path.end.as_f64(),
            });
        }
    }
    if t_out < t_in {
        return Err(Error::param("t_out", "must not precede t_in"));
    }
    if !(k >= T::zero()) {
        return Err(Error::param("k", "must be non-negative"));
    }
    let mut cost = k * path.spread_at(t_out);
    if let Some(l) = ladder {
        if k > T::zero() {
            cost = cost + T::lit(2.0) * market_impact_cost(l, k, path.tick)?.cost;
        }
    }
    Ok(cost)
}
