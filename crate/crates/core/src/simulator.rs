//! Ogata thinning simulation of the marked Hawkes system.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`), a counter-based
//! generator: a run is keyed by its 64-bit seed, and independent sub-streams
//! (e.g. Monte Carlo rollouts) are selected with `set_stream`.

use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intensity::RecursionState;
use crate::orderbook::{price_paths, PriceConfig, PricePath};
use crate::params::ParameterSet;
use crate::scalar::Real;
use crate::spectral::spectral_radius;
use crate::stream::{EventStream, MarkedEvent, StreamId};

/// Generator for run `seed`, sub-stream `stream`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn open01<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let u: f64 = Open01.sample(rng);
    T::lit(u)
}

/// Exponential volume mark with rate `beta` (mean `1/beta`).
pub fn draw_mark<T: Real, R: Rng + ?Sized>(beta: T, rng: &mut R) -> T {
    -open01::<T, R>(rng).ln() / beta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig<T> {
    pub horizon_end: T,
    pub seed: u64,
    pub price: PriceConfig<T>,
    pub max_events: usize,
    /// Simulate even when the branching matrix has spectral radius >= 1.
    pub allow_nonstationary: bool,
}

impl<T: Real> SimConfig<T> {
    pub fn new(horizon_end: T, seed: u64) -> Self {
        Self {
            horizon_end,
            seed,
            price: PriceConfig {
                p0: T::one(),
                tick: T::lit(1e-5),
                initial_spread_ticks: 1,
            },
            max_events: 10_000_000,
            allow_nonstationary: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon_end >= T::zero()) || !self.horizon_end.is_finite() {
            return Err(Error::param(
                "horizon_end",
                format!("{} must be >= 0", self.horizon_end),
            ));
        }
        if self.max_events == 0 {
            return Err(Error::param("max_events", "must be > 0"));
        }
        PriceConfig::new(
            self.price.p0,
            self.price.tick,
            self.price.initial_spread_ticks,
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Simulation<T> {
    pub events: EventStream<T>,
    pub paths: Vec<PricePath<T>>,
    /// The event cap was hit; `events` ends at the last accepted event.
    pub truncated: bool,
    pub proposals: usize,
}

/// Why a thinning run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stop {
    Horizon,
    Extinct,
    Cap,
    Requested,
}

/// Runs thinning from `state.last_time()` to `end`, pushing accepted events
/// into `state` and passing each to `on_event`, which returns `false` to stop.
pub(crate) fn thin<T: Real, R: Rng + ?Sized>(
    state: &mut RecursionState<'_, T>,
    end: T,
    rng: &mut R,
    max_events: usize,
    proposals: &mut usize,
    mut on_event: impl FnMut(&MarkedEvent<T>) -> bool,
) -> Result<Stop> {
    let params = state.params();
    let n = params.stream_count();
    let mut t = state.last_time();
    let mut accepted = 0usize;
    let mut lam = vec![T::zero(); n];
    loop {
        // Intensities only decay until the next event, so the total at the
        // current time bounds them up to the next proposal.
        let bound = state.total_intensity_at(t);
        if !(bound > T::zero()) {
            return Ok(Stop::Extinct);
        }
        if !bound.is_finite() {
            return Err(Error::Numerical(format!(
                "intensity bound {bound} at t = {t}"
            )));
        }
        t = t - open01::<T, R>(rng).ln() / bound;
        if t > end {
            return Ok(Stop::Horizon);
        }
        *proposals += 1;
        let mut total = T::zero();
        for (i, l) in lam.iter_mut().enumerate() {
            *l = state.intensity_at(StreamId::from_index(i), t);
            total = total + *l;
        }
        debug_assert!(
            total <= bound * (T::one() + T::lit(1e-9)),
            "thinning bound violated: {total} > {bound}"
        );
        let u = open01::<T, R>(rng) * bound;
        if u >= total {
            continue;
        }
        let mut cum = T::zero();
        let mut chosen = n - 1;
        for (i, l) in lam.iter().enumerate() {
            cum = cum + *l;
            if u < cum {
                chosen = i;
                break;
            }
        }
        let stream = StreamId::from_index(chosen);
        let volume = draw_mark(params.impact(stream).mark_rate, rng);
        let ev = MarkedEvent::new(t, stream, volume);
        state.push(&ev)?;
        accepted += 1;
        if !on_event(&ev) {
            return Ok(Stop::Requested);
        }
        if accepted >= max_events {
            return Ok(Stop::Cap);
        }
    }
}

fn check_stationary<T: Real>(params: &ParameterSet<T>, allow: bool) -> Result<()> {
    let radius = spectral_radius(params.branching())?;
    if radius >= T::one() && !allow {
        return Err(Error::NonStationary {
            radius: radius.as_f64(),
        });
    }
    Ok(())
}

/// Simulates events on `[0, horizon_end]` and the resulting price paths.
pub fn simulate<T: Real>(params: &ParameterSet<T>, cfg: &SimConfig<T>) -> Result<Simulation<T>> {
    cfg.validate()?;
    params.validate()?;
    check_stationary(params, cfg.allow_nonstationary)?;
    let mut rng = rng_for(cfg.seed, 0);
    let mut state = RecursionState::new(params, T::zero());
    let mut events = Vec::new();
    let mut proposals = 0;
    let stop = thin(
        &mut state,
        cfg.horizon_end,
        &mut rng,
        cfg.max_events,
        &mut proposals,
        |ev| {
            events.push(*ev);
            true
        },
    )?;
    let truncated = stop == Stop::Cap;
    let end = if truncated {
        events.last().map(|e| e.time).unwrap_or(cfg.horizon_end)
    } else {
        cfg.horizon_end
    };
    if truncated {
        log::warn!(
            "simulation truncated at {} events (t = {end})",
            events.len()
        );
    }
    let events = EventStream::new(params.assets(), events, T::zero(), end)?;
    let paths = price_paths(&events, &cfg.price)?;
    Ok(Simulation {
        events,
        paths,
        truncated,
        proposals,
    })
}

/// Independent runs, one per seed, executed in parallel.
pub fn simulate_batch<T: Real>(
    params: &ParameterSet<T>,
    cfg: &SimConfig<T>,
    seeds: &[u64],
) -> Result<Vec<Simulation<T>>> {
    seeds
        .par_iter()
        .map(|&seed| simulate(params, &SimConfig { seed, ..*cfg }))
        .collect()
}

/// Event rate of `stream` after discarding the first `burn_in` fraction of
/// the horizon.
pub fn empirical_rate<T: Real>(events: &EventStream<T>, stream: StreamId, burn_in: T) -> T {
    let from = events.start() + burn_in * events.span();
    let window = events.end() - from;
    if window <= T::zero() {
        return T::zero();
    }
    let count = events.of_stream(stream).filter(|e| e.time >= from).count();
    T::from_usize_lossy(count) / window
}
