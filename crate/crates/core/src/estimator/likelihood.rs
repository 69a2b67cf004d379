//! Log-likelihood of the ground process and its analytic gradient.
//!
//! For each target stream `i` the recursion keeps, per active source `j`,
//!
//! - `R = Σ e^{-α_i (t - t_k)} g_k`
//! - `S = Σ (t - t_k) e^{-α_i (t - t_k)} g_k` (for `∂/∂α_i`)
//! - `Q = Σ e^{-α_i (t - t_k)} g_k ∂ln g_k/∂γ_j` (for the impact exponent)
//!
//! so the value and the full gradient cost one pass over the events per target.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ParameterSet;
use crate::scalar::{decay_factor, Real};
use crate::stream::{time_groups, EventStream, StreamId};

/// Gradient of the log-likelihood in the natural parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalGradient<T> {
    pub baseline: Vec<T>,
    /// Row-major `(target, source)`.
    pub branching: Vec<T>,
    pub decay: Vec<T>,
    pub impact_exponent: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLikelihood<T> {
    pub value: T,
    pub per_stream: Vec<T>,
    /// First owned event at which the intensity vanished, if any.
    pub zero_intensity_at: Option<(usize, StreamId)>,
}

struct TargetTerms<T> {
    loglik: T,
    zero_at: Option<usize>,
    d_mu: T,
    d_decay: T,
    /// `(source, ∂/∂ν_ij)`.
    d_nu: Vec<(usize, T)>,
    /// `(source, ∂/∂γ_j)` contribution from this target.
    d_exp: Vec<(usize, T)>,
}

struct EventImpacts<T> {
    g: Vec<T>,
    dlog: Vec<T>,
}

fn event_impacts<T: Real>(
    params: &ParameterSet<T>,
    data: &EventStream<T>,
    with_grad: bool,
) -> EventImpacts<T> {
    let impacts = params.impacts();
    let scales: Vec<T> = impacts.iter().map(|g| g.scale()).collect();
    let g = data
        .events()
        .iter()
        .map(|e| {
            let j = e.stream.index();
            impacts[j].value_scaled(e.volume, scales[j])
        })
        .collect();
    let dlog = if with_grad {
        data.events()
            .iter()
            .map(|e| impacts[e.stream.index()].log_derivative(e.volume))
            .collect()
    } else {
        Vec::new()
    };
    EventImpacts { g, dlog }
}

fn target_terms<T: Real>(
    params: &ParameterSet<T>,
    data: &EventStream<T>,
    imp: &EventImpacts<T>,
    i: usize,
    with_grad: bool,
) -> TargetTerms<T> {
    let n = params.stream_count();
    let a = params.kernels()[i].rate;
    let mu = params.baselines()[i];
    let row = params.branching().row(i);
    let active: Vec<usize> = (0..n).filter(|&j| row[j] > T::zero()).collect();
    let mut slot = vec![usize::MAX; n];
    for (k, &j) in active.iter().enumerate() {
        slot[j] = k;
    }
    let m = active.len();
    let nu: Vec<T> = active.iter().map(|&j| row[j]).collect();
    let mut r = vec![T::zero(); m];
    let mut s = vec![T::zero(); m];
    let mut q = vec![T::zero(); m];
    let mut cum_g = vec![T::zero(); m];
    let mut cum_gl = vec![T::zero(); m];

    let mut out = TargetTerms {
        loglik: T::zero(),
        zero_at: None,
        d_mu: T::zero(),
        d_decay: T::zero(),
        d_nu: active.iter().map(|&j| (j, T::zero())).collect(),
        d_exp: active.iter().map(|&j| (j, T::zero())).collect(),
    };

    let mut last = data.start();
    let mut offset = 0usize;
    for group in time_groups(data.events()) {
        let t = group[0].time;
        let dt = t - last;
        if dt > T::zero() && m > 0 {
            let f = decay_factor(a, dt);
            for k in 0..m {
                if with_grad {
                    s[k] = f * (s[k] + dt * r[k]);
                    q[k] = f * q[k];
                }
                r[k] = f * r[k];
            }
        }
        last = t;
        for (off, ev) in group.iter().enumerate() {
            if ev.stream.index() != i {
                continue;
            }
            let mut lam = mu;
            for k in 0..m {
                lam = lam + nu[k] * a * r[k];
            }
            if !(lam > T::zero()) {
                if out.zero_at.is_none() {
                    out.zero_at = Some(offset + off);
                }
                out.loglik = T::neg_infinity();
                continue;
            }
            out.loglik = out.loglik + lam.ln();
            if with_grad {
                let inv = lam.recip();
                out.d_mu = out.d_mu + inv;
                let mut da = T::zero();
                for k in 0..m {
                    out.d_nu[k].1 = out.d_nu[k].1 + a * r[k] * inv;
                    da = da + nu[k] * (r[k] - a * s[k]);
                    out.d_exp[k].1 = out.d_exp[k].1 + nu[k] * a * q[k] * inv;
                }
                out.d_decay = out.d_decay + da * inv;
            }
        }
        for (off, ev) in group.iter().enumerate() {
            let k = slot[ev.stream.index()];
            if k == usize::MAX {
                continue;
            }
            let idx = offset + off;
            let g = imp.g[idx];
            r[k] = r[k] + g;
            cum_g[k] = cum_g[k] + g;
            if with_grad {
                let gl = g * imp.dlog[idx];
                q[k] = q[k] + gl;
                cum_gl[k] = cum_gl[k] + gl;
            }
        }
        offset += group.len();
    }

    let dt = data.end() - last;
    let f = decay_factor(a, dt);
    for k in 0..m {
        if with_grad {
            s[k] = f * (s[k] + dt * r[k]);
            q[k] = f * q[k];
        }
        r[k] = f * r[k];
    }
    let span = data.end() - data.start();
    let mut comp = mu * span;
    for k in 0..m {
        comp = comp + nu[k] * (cum_g[k] - r[k]);
    }
    out.loglik = out.loglik - comp;
    if with_grad {
        out.d_mu = out.d_mu - span;
        for k in 0..m {
            out.d_nu[k].1 = out.d_nu[k].1 - (cum_g[k] - r[k]);
            out.d_decay = out.d_decay - nu[k] * s[k];
            out.d_exp[k].1 = out.d_exp[k].1 - nu[k] * (cum_gl[k] - q[k]);
        }
    }
    out
}

fn check<T: Real>(params: &ParameterSet<T>, data: &EventStream<T>) -> Result<()> {
    if params.assets() != data.assets() {
        return Err(Error::InvalidInput(format!(
            "parameters describe {} asset(s) but the data has {}",
            params.assets(),
            data.assets()
        )));
    }
    Ok(())
}

fn all_terms<T: Real>(
    params: &ParameterSet<T>,
    data: &EventStream<T>,
    with_grad: bool,
) -> Vec<TargetTerms<T>> {
    let imp = event_impacts(params, data, with_grad);
    (0..params.stream_count())
        .into_par_iter()
        .map(|i| target_terms(params, data, &imp, i, with_grad))
        .collect()
}

/// `Σ_i Σ_{k ∈ i} ln λ_i(t_k) - Σ_i Λ_i(T^+)`, with per-stream terms and a
/// diagnostic for vanishing intensities.
pub fn log_likelihood_detailed<T: Real>(
    params: &ParameterSet<T>,
    data: &EventStream<T>,
) -> Result<LogLikelihood<T>> {
    check(params, data)?;
    let terms = all_terms(params, data, false);
    let per_stream: Vec<T> = terms.iter().map(|t| t.loglik).collect();
    let zero = terms
        .iter()
        .filter_map(|t| t.zero_at)
        .min()
        .map(|idx| (idx, data.events()[idx].stream));
    if let Some((idx, s)) = zero {
        log::warn!("intensity of stream {s} vanishes at event {idx}; log-likelihood is -inf");
    }
    Ok(LogLikelihood {
        value: per_stream.iter().copied().sum(),
        per_stream,
        zero_intensity_at: zero,
    })
}

pub fn log_likelihood<T: Real>(params: &ParameterSet<T>, data: &EventStream<T>) -> Result<T> {
    Ok(log_likelihood_detailed(params, data)?.value)
}

/// Log-likelihood and its gradient in the natural parameters.
pub fn log_likelihood_gradient<T: Real>(
    params: &ParameterSet<T>,
    data: &EventStream<T>,
) -> Result<(T, NaturalGradient<T>)> {
    check(params, data)?;
    let n = params.stream_count();
    let terms = all_terms(params, data, true);
    let mut grad = NaturalGradient {
        baseline: vec![T::zero(); n],
        branching: vec![T::zero(); n * n],
        decay: vec![T::zero(); n],
        impact_exponent: vec![T::zero(); n],
    };
    let mut value = T::zero();
    for (i, t) in terms.iter().enumerate() {
        value = value + t.loglik;
        grad.baseline[i] = t.d_mu;
        grad.decay[i] = t.d_decay;
        for &(j, d) in &t.d_nu {
            grad.branching[i * n + j] = d;
        }
        for &(j, d) in &t.d_exp {
            grad.impact_exponent[j] = grad.impact_exponent[j] + d;
        }
    }
    Ok((value, grad))
}

/// `Σ_k ln f(v_k)` under the exponential mark law of each stream. Constant in
/// the Hawkes parameters; reported separately from the ground likelihood.
pub fn mark_log_likelihood<T: Real>(params: &ParameterSet<T>, data: &EventStream<T>) -> T {
    data.events()
        .iter()
        .map(|e| {
            params.impacts()[e.stream.index()]
                .mark_density(e.volume)
                .ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ExpKernel, Matrix, PowerImpact};
    use crate::stream::{Direction, MarkedEvent, Side};

    fn poisson_params(mu: f64) -> ParameterSet<f64> {
        ParameterSet::new(
            1,
            vec![mu; 4],
            Matrix::zeros(4),
            vec![ExpKernel::new(1.0).unwrap(); 4],
            vec![PowerImpact::new(0.0, 1.0).unwrap(); 4],
        )
        .unwrap()
    }

    #[test]
    fn poisson_likelihood() {
        let s = StreamId::new(0, Side::Ask, Direction::Up);
        let evs = (1..=5)
            .map(|k| MarkedEvent::new(k as f64, s, 1.0))
            .collect();
        let data = EventStream::new(1, evs, 0.0, 10.0).unwrap();
        let p = poisson_params(0.7);
        let ll = log_likelihood(&p, &data).unwrap();
        // the other three streams have no events: each contributes -mu T
        let expected = 5.0 * 0.7f64.ln() - 4.0 * 0.7 * 10.0;
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_intensity_gives_neg_infinity() {
        let s = StreamId::new(0, Side::Ask, Direction::Up);
        let data = EventStream::new(1, vec![MarkedEvent::new(1.0, s, 1.0)], 0.0, 2.0).unwrap();
        let p = poisson_params(0.0);
        let ll = log_likelihood_detailed(&p, &data).unwrap();
        assert_eq!(ll.value, f64::NEG_INFINITY);
        assert_eq!(ll.zero_intensity_at, Some((0, s)));
    }
}
