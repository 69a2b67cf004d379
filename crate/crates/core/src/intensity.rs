//! Conditional intensities and compensators of the marked Hawkes system.
//!
//! With target-indexed exponential kernels the intensity of stream `i` is
//!
//! `λ_i(t) = μ_i + Σ_j ν_ij Σ_{t_k^j < t} α_i e^{-α_i (t - t_k^j)} g_j(v_k^j)`
//!
//! and its compensator over `[T_-, t]` has the closed form
//!
//! `Λ_i(t) = μ_i (t - T_-) + Σ_j ν_ij Σ_{t_k^j < t} g_j(v_k^j) (1 - e^{-α_i (t - t_k^j)})`.

use crate::error::{Error, Result};
use crate::params::ParameterSet;
use crate::scalar::{decay_factor, Real};
use crate::stream::{EventStream, MarkedEvent, StreamId};

fn check_query<T: Real>(history: &EventStream<T>, t: T) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("query time {t} is not finite")));
    }
    if !history.is_complete() {
        if let Some(first) = history.events().first() {
            if t < first.time {
                return Err(Error::TruncatedHistory { time: t.as_f64() });
            }
        }
    }
    if t < history.start() {
        return Err(Error::OutOfHorizon {
            time: t.as_f64(),
            start: history.start().as_f64(),
            end: history.end().as_f64(),
        });
    }
    Ok(())
}

fn check_dims<T: Real>(params: &ParameterSet<T>, history: &EventStream<T>) -> Result<()> {
    if params.assets() != history.assets() {
        return Err(Error::InvalidInput(format!(
            "parameters describe {} asset(s) but the history has {}",
            params.assets(),
            history.assets()
        )));
    }
    Ok(())
}

/// Intensity of `stream` at time `t` by direct summation over the history.
/// Events at exactly `t` do not contribute.
pub fn intensity<T: Real>(
    params: &ParameterSet<T>,
    history: &EventStream<T>,
    stream: StreamId,
    t: T,
) -> Result<T> {
    check_dims(params, history)?;
    check_query(history, t)?;
    let i = stream.index();
    let kernel = params.kernel(stream);
    let row = params.branching().row(i);
    let scales: Vec<T> = params.impacts().iter().map(|g| g.scale()).collect();
    let mut excitation = T::zero();
    for ev in history.events().iter().take_while(|e| e.time < t) {
        let j = ev.stream.index();
        let nu = row[j];
        if nu > T::zero() {
            excitation = excitation
                + nu * kernel.density(t - ev.time)
                    * params.impacts()[j].value_scaled(ev.volume, scales[j]);
        }
    }
    Ok(params.baseline(stream) + excitation)
}

/// Compensator `Λ(t)` of `stream` over `[T_-, t]`, closed form.
pub fn compensator<T: Real>(
    params: &ParameterSet<T>,
    history: &EventStream<T>,
    stream: StreamId,
    t: T,
) -> Result<T> {
    check_dims(params, history)?;
    check_query(history, t)?;
    if t > history.end() {
        return Err(Error::OutOfHorizon {
            time: t.as_f64(),
            start: history.start().as_f64(),
            end: history.end().as_f64(),
        });
    }
    let i = stream.index();
    let kernel = params.kernel(stream);
    let row = params.branching().row(i);
    let scales: Vec<T> = params.impacts().iter().map(|g| g.scale()).collect();
    let mut total = params.baseline(stream) * (t - history.start());
    for ev in history.events().iter().take_while(|e| e.time < t) {
        let j = ev.stream.index();
        let nu = row[j];
        if nu > T::zero() {
            let g = params.impacts()[j].value_scaled(ev.volume, scales[j]);
            total = total + nu * g * kernel.integral(t - ev.time);
        }
    }
    Ok(total)
}

/// O(1)-per-event state of the exponential-kernel recursion.
///
/// `acc[i][j] = α_i Σ_{k ∈ j} e^{-α_i (t_last - t_k)} g_j(v_k)` over all events
/// pushed so far, and `cum[j] = Σ_{k ∈ j} g_j(v_k)`. Values queried at
/// `t == last_time` include the events pushed at `last_time`; to evaluate the
/// left limit at an event time, query before pushing.
#[derive(Debug, Clone)]
pub struct RecursionState<'a, T> {
    params: &'a ParameterSet<T>,
    start: T,
    last_time: T,
    acc: Vec<T>,
    cum: Vec<T>,
    pushed: usize,
}

impl<'a, T: Real> RecursionState<'a, T> {
    pub fn new(params: &'a ParameterSet<T>, start: T) -> Self {
        let n = params.stream_count();
        Self {
            params,
            start,
            last_time: start,
            acc: vec![T::zero(); n * n],
            cum: vec![T::zero(); n],
            pushed: 0,
        }
    }

    /// State after replaying a whole history.
    pub fn from_history(params: &'a ParameterSet<T>, history: &EventStream<T>) -> Result<Self> {
        check_dims(params, history)?;
        let mut st = Self::new(params, history.start());
        for ev in history.events() {
            st.push(ev)?;
        }
        Ok(st)
    }

    pub fn params(&self) -> &'a ParameterSet<T> {
        self.params
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn last_time(&self) -> T {
        self.last_time
    }

    pub fn pushed(&self) -> usize {
        self.pushed
    }

    fn dim(&self) -> usize {
        self.cum.len()
    }

    /// Accumulator of the `(target, source)` pair at `last_time`.
    pub fn accumulator(&self, target: StreamId, source: StreamId) -> T {
        self.acc[target.index() * self.dim() + source.index()]
    }

    /// Advances the state to `event.time` and adds the event's jump.
    pub fn push(&mut self, event: &MarkedEvent<T>) -> Result<()> {
        if event.time < self.last_time {
            return Err(Error::Unsorted { index: self.pushed });
        }
        let n = self.dim();
        let j = event.stream.index();
        if j >= n {
            return Err(Error::InvalidInput(format!(
                "event stream {} outside the {n}-stream system",
                event.stream
            )));
        }
        let dt = event.time - self.last_time;
        let g = self.params.impacts()[j].value(event.volume);
        for (i, kernel) in self.params.kernels().iter().enumerate() {
            let row = &mut self.acc[i * n..(i + 1) * n];
            if dt > T::zero() {
                let f = decay_factor(kernel.rate, dt);
                for a in row.iter_mut() {
                    *a = *a * f;
                }
            }
            row[j] = row[j] + kernel.rate * g;
        }
        self.cum[j] = self.cum[j] + g;
        self.last_time = event.time;
        self.pushed += 1;
        Ok(())
    }

    /// Decays the state to `t` without adding an event.
    pub fn advance_to(&mut self, t: T) -> Result<()> {
        if t < self.last_time {
            return Err(Error::OutOfHorizon {
                time: t.as_f64(),
                start: self.last_time.as_f64(),
                end: f64::INFINITY,
            });
        }
        let n = self.dim();
        let dt = t - self.last_time;
        if dt > T::zero() {
            for (i, kernel) in self.params.kernels().iter().enumerate() {
                let f = decay_factor(kernel.rate, dt);
                for a in &mut self.acc[i * n..(i + 1) * n] {
                    *a = *a * f;
                }
            }
        }
        self.last_time = t;
        Ok(())
    }

    /// Consuming form of [`push`](Self::push).
    pub fn advanced(mut self, event: &MarkedEvent<T>) -> Result<Self> {
        self.push(event)?;
        Ok(self)
    }

    fn excitation(&self, i: usize, t: T) -> T {
        let n = self.dim();
        let f = decay_factor(self.params.kernels()[i].rate, t - self.last_time);
        let row = self.params.branching().row(i);
        let acc = &self.acc[i * n..(i + 1) * n];
        let mut sum = T::zero();
        for j in 0..n {
            if row[j] > T::zero() {
                sum = sum + row[j] * acc[j];
            }
        }
        sum * f
    }

    /// Intensity of stream index `i` at `t >= last_time`.
    pub fn intensity_at(&self, stream: StreamId, t: T) -> T {
        let i = stream.index();
        self.params.baselines()[i] + self.excitation(i, t)
    }

    /// Per-stream intensities at `t >= last_time`.
    pub fn intensities_at(&self, t: T) -> Vec<T> {
        (0..self.dim())
            .map(|i| self.params.baselines()[i] + self.excitation(i, t))
            .collect()
    }

    pub fn total_intensity_at(&self, t: T) -> T {
        (0..self.dim())
            .map(|i| self.params.baselines()[i] + self.excitation(i, t))
            .sum()
    }

    /// Compensator of `stream` over `[start, t]` for `t >= last_time`,
    /// assuming no further events before `t`.
    pub fn compensator_at(&self, stream: StreamId, t: T) -> T {
        let i = stream.index();
        let n = self.dim();
        let kernel = self.params.kernels()[i];
        let f = decay_factor(kernel.rate, t - self.last_time);
        let row = self.params.branching().row(i);
        let acc = &self.acc[i * n..(i + 1) * n];
        let mut total = self.params.baselines()[i] * (t - self.start);
        for j in 0..n {
            if row[j] > T::zero() {
                total = total + row[j] * (self.cum[j] - acc[j] * f / kernel.rate);
            }
        }
        total
    }

    /// `Λ(t + τ) - Λ(t)` from `t = last_time` with no new events.
    pub fn compensator_increment(&self, stream: StreamId, tau: T) -> T {
        let i = stream.index();
        let n = self.dim();
        let kernel = self.params.kernels()[i];
        let row = self.params.branching().row(i);
        let acc = &self.acc[i * n..(i + 1) * n];
        let mut excited = T::zero();
        for j in 0..n {
            if row[j] > T::zero() {
                excited = excited + row[j] * acc[j];
            }
        }
        self.params.baselines()[i] * tau + excited / kernel.rate * kernel.integral(tau)
    }
}
