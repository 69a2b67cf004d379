//! Maximum-likelihood estimation of the Hawkes parameters.
//!
//! The optimizer works in a reduced space of log-parameters: one coordinate
//! per tied baseline pair, per free branching cell, and per decay and impact
//! exponent group. Every iterate therefore satisfies positivity, the sparsity
//! pattern and the ask/bid baseline equalities exactly.

pub mod likelihood;
pub mod marks;
pub mod optimizer;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orderbook::InteractionPattern;
use crate::params::{ExpKernel, Matrix, ParameterSet, PowerImpact};
use crate::scalar::Real;
use crate::spectral::spectral_radius;
use crate::stream::{Direction, EventStream, Side, StreamId};

pub use likelihood::{
    log_likelihood, log_likelihood_detailed, log_likelihood_gradient, mark_log_likelihood,
    LogLikelihood, NaturalGradient,
};
pub use marks::{fit_marks, FamilyFit, MarkFamily, MarkFit, TailPoint};
pub use optimizer::{minimize, OptimOptions, OptimResult};

#[derive(Debug, Clone, Copy)]
pub struct FitOptions<T> {
    /// One impact exponent shared by all streams.
    pub tie_impact_exponent: bool,
    /// One decay rate shared by all streams.
    pub tie_decay: bool,
    pub max_iterations: usize,
    /// Relative change of the log-likelihood treated as converged.
    pub tolerance: T,
    /// Baseline assigned to direction groups without any event.
    pub mu_floor: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            tie_impact_exponent: false,
            tie_decay: false,
            max_iterations: 500,
            tolerance: T::lit(1e-8),
            mu_floor: T::lit(1e-10),
        }
    }
}

/// Equalities and exclusions applied during the fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSet {
    /// Pairs of streams whose baselines are forced equal.
    pub baseline_equalities: Vec<(String, String)>,
    pub free_branching_cells: usize,
    /// Allowed cells fixed at zero because a stream has no events.
    pub fixed_zero_cells: usize,
    pub forbidden_cells: usize,
    pub tied_decay: bool,
    pub tied_impact_exponent: bool,
    pub free_parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport<T> {
    pub params: ParameterSet<T>,
    pub loglik: T,
    pub mark_loglik: T,
    /// Recomputed from the fitted branching matrix.
    pub spectral_radius: T,
    pub stationary: bool,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub constraints: ConstraintSet,
    pub mark_fits: Vec<Option<MarkFit<T>>>,
    pub event_counts: Vec<usize>,
    pub flags: Vec<String>,
}

/// Maps reduced log-coordinates to a full parameter set.
struct Layout<T> {
    assets: usize,
    n: usize,
    /// Baseline coordinate per stream (`None`: fixed at `mu_fixed`).
    mu_slot: Vec<Option<usize>>,
    mu_fixed: T,
    /// `(target, source, coordinate)` for every free cell.
    cells: Vec<(usize, usize, usize)>,
    decay_slot: Vec<Option<usize>>,
    decay_fixed: Vec<T>,
    exp_slot: Vec<Option<usize>>,
    exp_fixed: Vec<T>,
    mark_rates: Vec<T>,
    dim: usize,
}

impl<T: Real> Layout<T> {
    fn params(&self, x: &[T]) -> Result<ParameterSet<T>> {
        let baseline = (0..self.n)
            .map(|i| self.mu_slot[i].map_or(self.mu_fixed, |k| x[k].exp()))
            .collect();
        let mut branching = Matrix::zeros(self.n);
        for &(i, j, k) in &self.cells {
            branching.set(i, j, x[k].exp());
        }
        let kernels = (0..self.n)
            .map(|i| ExpKernel::new(self.decay_slot[i].map_or(self.decay_fixed[i], |k| x[k].exp())))
            .collect::<Result<Vec<_>>>()?;
        let impacts = (0..self.n)
            .map(|j| {
                PowerImpact::new(
                    self.exp_slot[j].map_or(self.exp_fixed[j], |k| x[k].exp()),
                    self.mark_rates[j],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        ParameterSet::new(self.assets, baseline, branching, kernels, impacts)
    }

    /// Chain rule from the natural gradient to the log-coordinates.
    fn reduce(&self, p: &ParameterSet<T>, g: &NaturalGradient<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for i in 0..self.n {
            if let Some(k) = self.mu_slot[i] {
                out[k] = out[k] + g.baseline[i] * p.baselines()[i];
            }
            if let Some(k) = self.decay_slot[i] {
                out[k] = out[k] + g.decay[i] * p.kernels()[i].rate;
            }
            if let Some(k) = self.exp_slot[i] {
                out[k] = out[k] + g.impact_exponent[i] * p.impacts()[i].exponent;
            }
        }
        for &(i, j, k) in &self.cells {
            out[k] = out[k] + g.branching[i * self.n + j] * p.branching().get(i, j);
        }
        out
    }
}

fn median<T: Real>(mut v: Vec<T>) -> Option<T> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / T::lit(2.0)
    })
}

fn stream_durations<T: Real>(data: &EventStream<T>, s: StreamId) -> Vec<T> {
    let times: Vec<T> = data.of_stream(s).map(|e| e.time).collect();
    times
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > T::zero())
        .collect()
}

/// Fits the parameters of `data` under `pattern`.
pub fn fit<T: Real>(
    data: &EventStream<T>,
    pattern: &InteractionPattern,
    opts: &FitOptions<T>,
) -> Result<FitReport<T>> {
    let assets = data.assets();
    if pattern.assets() != assets {
        return Err(Error::InvalidInput(format!(
            "pattern describes {} asset(s) but the data has {}",
            pattern.assets(),
            assets
        )));
    }
    if !pattern.is_within_table() {
        return Err(Error::InvalidInput(
            "interaction pattern allows cells outside the bid/ask table".into(),
        ));
    }
    if !(data.span() > T::zero()) {
        return Err(Error::InvalidInput(
            "observation window has zero length".into(),
        ));
    }
    if !(opts.mu_floor > T::zero()) {
        return Err(Error::param("mu_floor", "must be positive"));
    }
    let n = data.stream_count();
    let counts = data.counts();
    let span = data.span();
    let mut flags = Vec::new();

    // Marks first: the exponential rate is closed-form and held fixed.
    let mut mark_fits = Vec::with_capacity(n);
    let mut mark_rates = Vec::with_capacity(n);
    for s in StreamId::all(assets) {
        let vols: Vec<T> = data.of_stream(s).map(|e| e.volume).collect();
        let f = fit_marks(&vols)?;
        match &f {
            Some(m) => {
                if m.low_confidence {
                    flags.push(format!(
                        "{s}: only {} marks, mark fit is low-confidence",
                        m.n
                    ));
                }
                mark_rates.push(m.rate());
            }
            None => mark_rates.push(T::one()),
        }
        mark_fits.push(f);
    }

    let mut dim = 0usize;
    let mut x0 = Vec::new();
    let mut mu_slot = vec![None; n];
    let mut equalities = Vec::new();
    for a in 0..assets {
        for d in Direction::ALL {
            let ask = StreamId::new(a, Side::Ask, d);
            let bid = StreamId::new(a, Side::Bid, d);
            equalities.push((ask.key(), bid.key()));
            let c = counts[ask.index()] + counts[bid.index()];
            if c == 0 {
                flags.push(format!(
                    "asset {a} direction {}: no events, baseline fixed at the floor",
                    d.name()
                ));
                continue;
            }
            mu_slot[ask.index()] = Some(dim);
            mu_slot[bid.index()] = Some(dim);
            let mu0 = T::lit(0.5) * T::from_usize_lossy(c) / (T::lit(2.0) * span);
            x0.push(mu0.ln());
            dim += 1;
        }
    }

    let mut cells = Vec::new();
    let mut fixed_zero = 0;
    let mut row_free = vec![0usize; n];
    let mut col_free = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if !pattern.allowed(i, j) {
                continue;
            }
            if counts[i] == 0 || counts[j] == 0 {
                fixed_zero += 1;
                continue;
            }
            row_free[i] += 1;
            col_free[j] = true;
            cells.push((i, j, 0));
        }
    }
    for c in cells.iter_mut() {
        c.2 = dim;
        let nu0 = T::lit(0.3).min(T::lit(0.9) / T::from_usize_lossy(row_free[c.0]));
        x0.push(nu0.ln());
        dim += 1;
    }

    let pooled = median(
        StreamId::all(assets)
            .flat_map(|s| stream_durations(data, s))
            .collect(),
    );
    let decay_init: Vec<T> = StreamId::all(assets)
        .map(|s| {
            median(stream_durations(data, s))
                .or(pooled)
                .map_or(T::one(), |m| m.recip())
        })
        .collect();
    let mut decay_slot = vec![None; n];
    if opts.tie_decay {
        if row_free.iter().any(|&c| c > 0) {
            let init = median(decay_init.clone()).unwrap_or(T::one());
            decay_slot = vec![Some(dim); n];
            x0.push(init.ln());
            dim += 1;
        }
    } else {
        for i in 0..n {
            if row_free[i] > 0 {
                decay_slot[i] = Some(dim);
                x0.push(decay_init[i].ln());
                dim += 1;
            }
        }
    }
    let mut exp_slot = vec![None; n];
    if opts.tie_impact_exponent {
        if col_free.iter().any(|&b| b) {
            exp_slot = vec![Some(dim); n];
            x0.push(T::zero());
            dim += 1;
        }
    } else {
        for j in 0..n {
            if col_free[j] {
                exp_slot[j] = Some(dim);
                x0.push(T::zero());
                dim += 1;
            }
        }
    }

    let layout = Layout {
        assets,
        n,
        mu_slot,
        mu_fixed: opts.mu_floor,
        cells,
        decay_slot,
        decay_fixed: decay_init,
        exp_slot,
        exp_fixed: vec![T::one(); n],
        mark_rates,
        dim,
    };
    let constraints = ConstraintSet {
        baseline_equalities: equalities,
        free_branching_cells: layout.cells.len(),
        fixed_zero_cells: fixed_zero,
        forbidden_cells: n * n - pattern.allowed_count(),
        tied_decay: opts.tie_decay,
        tied_impact_exponent: opts.tie_impact_exponent,
        free_parameters: dim,
    };

    let scale = T::from_usize_lossy(data.len().max(1)).recip();
    let objective = |x: &[T]| -> (T, Vec<T>) {
        let Ok(p) = layout.params(x) else {
            return (T::infinity(), vec![T::zero(); x.len()]);
        };
        match log_likelihood_gradient(&p, data) {
            Ok((ll, g)) if ll.is_finite() => {
                let grad = layout
                    .reduce(&p, &g)
                    .into_iter()
                    .map(|v| -v * scale)
                    .collect();
                (-ll * scale, grad)
            }
            _ => (T::infinity(), vec![T::zero(); x.len()]),
        }
    };
    let optim = OptimOptions {
        max_iterations: opts.max_iterations,
        rel_tolerance: opts.tolerance,
        ..OptimOptions::default()
    };
    let result = if dim == 0 {
        let (v, g) = objective(&[]);
        OptimResult {
            x: Vec::new(),
            value: v,
            gradient: g,
            iterations: 0,
            evaluations: 1,
            converged: true,
        }
    } else {
        minimize(objective, x0, &optim)
    };
    if !result.converged {
        flags.push(format!(
            "optimizer stopped after {} iterations without meeting the tolerance",
            result.iterations
        ));
    }
    let params = layout.params(&result.x)?;
    let loglik = log_likelihood(&params, data)?;
    if !loglik.is_finite() {
        return Err(Error::Numerical(
            "log-likelihood is not finite at the best parameters found".into(),
        ));
    }
    let radius = spectral_radius(params.branching())?;
    let stationary = radius < T::one();
    if !stationary {
        log::warn!("fitted branching matrix has spectral radius {radius} >= 1");
        flags.push(format!("non-stationary fit: spectral radius {radius}"));
    }
    Ok(FitReport {
        mark_loglik: mark_log_likelihood(&params, data),
        params,
        loglik,
        spectral_radius: radius,
        stationary,
        converged: result.converged,
        iterations: result.iterations,
        evaluations: result.evaluations,
        constraints,
        mark_fits,
        event_counts: counts,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowedFit<T> {
    pub window: T,
    pub reports: Vec<FitReport<T>>,
    /// Equal-weight average of the per-window parameters.
    pub average: ParameterSet<T>,
    pub average_spectral_radius: T,
}

/// Fits consecutive windows of length `window` and averages the results. A
/// trailing remainder shorter than half a window is merged into the last one.
pub fn fit_windowed<T: Real>(
    data: &EventStream<T>,
    pattern: &InteractionPattern,
    opts: &FitOptions<T>,
    window: T,
) -> Result<WindowedFit<T>> {
    if !(window > T::zero()) || !window.is_finite() {
        return Err(Error::param("window", "must be positive and finite"));
    }
    let mut bounds = Vec::new();
    let mut from = data.start();
    while from < data.end() {
        let mut to = from + window;
        if data.end() - to < window * T::lit(0.5) {
            to = data.end();
        }
        bounds.push((from, to));
        from = to;
    }
    let mut reports = Vec::with_capacity(bounds.len());
    for (from, to) in bounds {
        reports.push(fit(&data.window(from, to)?, pattern, opts)?);
    }
    if reports.is_empty() {
        return Err(Error::InvalidInput("no window to fit".into()));
    }
    let average = average_params(reports.iter().map(|r| &r.params))?;
    Ok(WindowedFit {
        window,
        average_spectral_radius: spectral_radius(average.branching())?,
        average,
        reports,
    })
}

fn average_params<'a, T: Real>(
    sets: impl Iterator<Item = &'a ParameterSet<T>>,
) -> Result<ParameterSet<T>> {
    let sets: Vec<_> = sets.collect();
    let first = sets[0];
    let n = first.stream_count();
    let k = T::from_usize_lossy(sets.len());
    let mean = |f: &dyn Fn(&ParameterSet<T>) -> T| sets.iter().map(|p| f(p)).sum::<T>() / k;
    let baseline = (0..n).map(|i| mean(&|p| p.baselines()[i])).collect();
    let mut branching = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            branching.set(i, j, mean(&|p| p.branching().get(i, j)));
        }
    }
    let kernels = (0..n)
        .map(|i| ExpKernel::new(mean(&|p| p.kernels()[i].rate)))
        .collect::<Result<Vec<_>>>()?;
    let impacts = (0..n)
        .map(|i| {
            PowerImpact::new(
                mean(&|p| p.impacts()[i].exponent),
                mean(&|p| p.impacts()[i].mark_rate),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ParameterSet::new(first.assets(), baseline, branching, kernels, impacts)
}
