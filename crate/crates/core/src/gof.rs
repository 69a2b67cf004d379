//! Goodness of fit through the time-rescaling theorem: compensator
//! increments between consecutive events of a stream are i.i.d. Exp(1), and
//! the time-changed marked process is compound Poisson with unit rate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::intensity::RecursionState;
use crate::params::ParameterSet;
use crate::scalar::Real;
use crate::special::kolmogorov_q;
use crate::stream::{time_groups, EventStream, MarkedEvent, StreamId};

/// Supremum distance between the empirical CDF of `sample` and `cdf`.
pub fn ks_statistic<T: Real>(sample: &[T], cdf: impl Fn(T) -> T) -> T {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = T::from_usize_lossy(sorted.len());
    let mut d = T::zero();
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = T::from_usize_lossy(i) / n;
        let hi = T::from_usize_lossy(i + 1) / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult<T> {
    pub n: usize,
    pub distance: T,
    /// Asymptotic Kolmogorov p-value with Stephens' finite-n correction.
    pub p_value: T,
}

impl<T: Real> KsResult<T> {
    pub fn rejects_at(&self, level: T) -> bool {
        self.p_value < level
    }
}

fn ks_p_value<T: Real>(n: usize, d: T) -> T {
    let sn = T::from_usize_lossy(n).sqrt();
    kolmogorov_q((sn + T::lit(0.12) + T::lit(0.11) / sn) * d)
}

/// One-sample KS test against `Exp(rate)`.
pub fn ks_exponential_rate<T: Real>(sample: &[T], rate: T) -> Result<KsResult<T>> {
    if sample.is_empty() {
        return Err(Error::InvalidInput(
            "KS test needs a non-empty sample".into(),
        ));
    }
    if let Some(x) = sample.iter().find(|x| !(**x >= T::zero())) {
        return Err(Error::InvalidInput(format!(
            "KS exponential test needs non-negative values, got {x}"
        )));
    }
    let d = ks_statistic(sample, |x| T::one() - (-rate * x).exp());
    Ok(KsResult {
        n: sample.len(),
        distance: d,
        p_value: ks_p_value(sample.len(), d),
    })
}

/// One-sample KS test against `Exp(1)`.
pub fn ks_exponential<T: Real>(sample: &[T]) -> Result<KsResult<T>> {
    ks_exponential_rate(sample, T::one())
}

/// Compensator at every event time, per stream, in event order.
fn compensators_at_events<T: Real>(
    params: &ParameterSet<T>,
    data: &EventStream<T>,
) -> Result<Vec<Vec<T>>> {
    if params.assets() != data.assets() {
        return Err(Error::InvalidInput(format!(
            "parameters describe {} asset(s) but the data has {}",
            params.assets(),
            data.assets()
        )));
    }
    let mut out = vec![Vec::new(); params.stream_count()];
    let mut state = RecursionState::new(params, data.start());
    for group in time_groups(data.events()) {
        let t = group[0].time;
        for ev in group {
            out[ev.stream.index()].push(state.compensator_at(ev.stream, t));
        }
        for ev in group {
            state.push(ev)?;
        }
    }
    Ok(out)
}

/// Residuals of one stream, with a flag when fewer than two events exist.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals<T> {
    pub stream: StreamId,
    pub values: Vec<T>,
    pub too_short: bool,
}

/// `τ_k = Λ(t_k) - Λ(t_{k-1})` over consecutive events of `stream`.
pub fn rescaled_residuals<T: Real>(
    params: &ParameterSet<T>,
    data: &EventStream<T>,
    stream: StreamId,
) -> Result<Residuals<T>> {
    let mut all = all_residuals(params, data)?;
    Ok(std::mem::replace(
        &mut all[stream.index()],
        Residuals {
            stream,
            values: Vec::new(),
            too_short: true,
        },
    ))
}

/// Residuals for every stream in one pass.
pub fn all_residuals<T: Real>(
    params: &ParameterSet<T>,
    data: &EventStream<T>,
) -> Result<Vec<Residuals<T>>> {
    let comps = compensators_at_events(params, data)?;
    Ok(comps
        .into_iter()
        .enumerate()
        .map(|(i, c)| Residuals {
            stream: StreamId::from_index(i),
            values: c.windows(2).map(|w| w[1] - w[0]).collect(),
            too_short: c.len() < 2,
        })
        .collect())
}

/// Random time change `(t, v) -> (Λ_i(t), v)` applied stream by stream. The
/// result lives on `[0, max_i Λ_i(T^+)]`.
pub fn time_change<T: Real>(
    params: &ParameterSet<T>,
    data: &EventStream<T>,
) -> Result<EventStream<T>> {
    let comps = compensators_at_events(params, data)?;
    let mut cursor = vec![0usize; comps.len()];
    let mut events = Vec::with_capacity(data.len());
    for ev in data.events() {
        let i = ev.stream.index();
        events.push(MarkedEvent::new(comps[i][cursor[i]], ev.stream, ev.volume));
        cursor[i] += 1;
    }
    let state = RecursionState::from_history(params, data)?;
    let end = StreamId::all(data.assets())
        .map(|s| state.compensator_at(s, data.end()))
        .fold(T::zero(), T::max);
    EventStream::from_unsorted(data.assets(), events, T::zero(), end)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamGof<T> {
    pub stream: StreamId,
    pub events: usize,
    pub residual_mean: Option<T>,
    pub ks: Option<KsResult<T>>,
    /// KS of `β v` against Exp(1) for the marks of the stream.
    pub mark_ks: Option<KsResult<T>>,
    pub flagged_short: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofReport<T> {
    pub level: T,
    pub streams: Vec<StreamGof<T>>,
    /// All residuals pooled into one sample.
    pub pooled: Option<KsResult<T>>,
    /// Per-stream level after Bonferroni correction over the tested streams.
    pub bonferroni_level: T,
    pub note: String,
}

impl<T: Real> GofReport<T> {
    /// No tested stream rejects at the Bonferroni-corrected level.
    pub fn passes(&self) -> bool {
        self.streams
            .iter()
            .filter_map(|s| s.ks)
            .all(|ks| !ks.rejects_at(self.bonferroni_level))
    }
}

pub fn gof_report<T: Real>(
    params: &ParameterSet<T>,
    data: &EventStream<T>,
    level: T,
) -> Result<GofReport<T>> {
    let residuals = all_residuals(params, data)?;
    let mut streams = Vec::new();
    let mut pooled = Vec::new();
    for r in &residuals {
        let marks: Vec<T> = data
            .of_stream(r.stream)
            .map(|e| e.volume * params.impact(r.stream).mark_rate)
            .collect();
        let ks = if r.values.is_empty() {
            None
        } else {
            Some(ks_exponential(&r.values)?)
        };
        let mean = if r.values.is_empty() {
            None
        } else {
            Some(r.values.iter().copied().sum::<T>() / T::from_usize_lossy(r.values.len()))
        };
        streams.push(StreamGof {
            stream: r.stream,
            events: marks.len(),
            residual_mean: mean,
            ks,
            mark_ks: if marks.is_empty() {
                None
            } else {
                Some(ks_exponential(&marks)?)
            },
            flagged_short: r.too_short,
        });
        pooled.extend_from_slice(&r.values);
    }
    let tested = streams.iter().filter(|s| s.ks.is_some()).count().max(1);
    Ok(GofReport {
        level,
        bonferroni_level: level / T::from_usize_lossy(tested),
        pooled: if pooled.is_empty() {
            None
        } else {
            Some(ks_exponential(&pooled)?)
        },
        note: format!(
            "per-stream tests at level {level}; compare against the Bonferroni level for {tested} simultaneous tests"
        ),
        streams,
    })
}
