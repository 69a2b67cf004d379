//! Model parameters: baselines, branching matrix, decay kernels and mark
//! impact functions for a `d`-asset system of `4d` streams.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orderbook::InteractionPattern;
use crate::scalar::{decay_factor, Real};
use crate::special::{digamma, gamma};
use crate::stream::{Direction, Side, StreamId};

/// Exponential decay kernel `h(t) = α e^{-α t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpKernel<T> {
    pub rate: T,
}

impl<T: Real> ExpKernel<T> {
    pub fn new(rate: T) -> Result<Self> {
        if !(rate > T::zero()) || !rate.is_finite() {
            return Err(Error::param("decay", format!("rate {rate} must be > 0")));
        }
        Ok(Self { rate })
    }

    pub fn density(&self, dt: T) -> T {
        self.rate * decay_factor(self.rate, dt)
    }

    /// `∫_0^dt h = 1 - e^{-α dt}`.
    pub fn integral(&self, dt: T) -> T {
        T::one() - decay_factor(self.rate, dt)
    }
}

/// Power-law impact of the volume mark, normalized against an exponential
/// mark law of rate `mark_rate`:
/// `g(v) = β^α v^α / Γ(α + 1)`, so that `E[g(V)] = 1` for `V ~ Exp(β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerImpact<T> {
    pub exponent: T,
    pub mark_rate: T,
}

impl<T: Real> PowerImpact<T> {
    pub fn new(exponent: T, mark_rate: T) -> Result<Self> {
        if !(exponent >= T::zero()) || !exponent.is_finite() {
            return Err(Error::param(
                "impact_exponent",
                format!("{exponent} must be >= 0"),
            ));
        }
        if !(mark_rate > T::zero()) || !mark_rate.is_finite() {
            return Err(Error::param(
                "mark_rate",
                format!("{mark_rate} must be > 0"),
            ));
        }
        Ok(Self {
            exponent,
            mark_rate,
        })
    }

    /// Impact of a volume `v > 0`.
    pub fn eval(&self, v: T) -> Result<T> {
        if !(v > T::zero()) || !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "impact volume {v} must be positive and finite"
            )));
        }
        Ok(self.value(v))
    }

    pub(crate) fn value(&self, v: T) -> T {
        self.value_scaled(v, self.scale())
    }

    /// `1 / Γ(α + 1)`; hoisted out of loops that evaluate many volumes.
    pub(crate) fn scale(&self) -> T {
        T::one() / gamma(self.exponent + T::one())
    }

    pub(crate) fn value_scaled(&self, v: T, scale: T) -> T {
        if self.exponent == T::zero() {
            return T::one();
        }
        (self.mark_rate * v).powf(self.exponent) * scale
    }

    /// `∂ ln g / ∂α = ln(β v) - ψ(α + 1)`.
    pub(crate) fn log_derivative(&self, v: T) -> T {
        (self.mark_rate * v).ln() - digamma(self.exponent + T::one())
    }

    /// Density of the exponential mark law.
    pub fn mark_density(&self, v: T) -> T {
        self.mark_rate * (-self.mark_rate * v).exp()
    }
}

/// Square matrix stored row-major; entry `(target, source)` is the branching
/// coefficient from `source` events into the `target` intensity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, target: usize, source: usize) -> T {
        self.data[target * self.n + source]
    }

    #[inline]
    pub fn set(&mut self, target: usize, source: usize, value: T) {
        self.data[target * self.n + source] = value;
    }

    pub fn row(&self, target: usize) -> &[T] {
        &self.data[target * self.n..(target + 1) * self.n]
    }

    pub fn entries(&self) -> &[T] {
        &self.data
    }
}

/// Full parameter set of the marked Hawkes system.
///
/// Invariants, checked on every construction path:
/// - all baselines and branching entries are finite and `>= 0`;
/// - branching entries outside the bid/ask interaction pattern are exactly 0;
/// - per asset, the ask and bid baselines agree for each direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSet<T> {
    assets: usize,
    baseline: Vec<T>,
    branching: Matrix<T>,
    kernels: Vec<ExpKernel<T>>,
    impacts: Vec<PowerImpact<T>>,
}

impl<T: Real> ParameterSet<T> {
    pub fn new(
        assets: usize,
        baseline: Vec<T>,
        branching: Matrix<T>,
        kernels: Vec<ExpKernel<T>>,
        impacts: Vec<PowerImpact<T>>,
    ) -> Result<Self> {
        let p = Self {
            assets,
            baseline,
            branching,
            kernels,
            impacts,
        };
        p.validate()?;
        Ok(p)
    }

    /// Zero baselines and branching, unit decay, constant impact, unit mark rate.
    pub fn zeros(assets: usize) -> Self {
        let n = assets * StreamId::PER_ASSET;
        Self {
            assets,
            baseline: vec![T::zero(); n],
            branching: Matrix::zeros(n),
            kernels: vec![ExpKernel { rate: T::one() }; n],
            impacts: vec![
                PowerImpact {
                    exponent: T::zero(),
                    mark_rate: T::one()
                };
                n
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.stream_count();
        if self.assets == 0 {
            return Err(Error::param("assets", "must be >= 1"));
        }
        if self.baseline.len() != n || self.kernels.len() != n || self.impacts.len() != n {
            return Err(Error::param(
                "assets",
                format!("expected {n} per-stream entries"),
            ));
        }
        if self.branching.dim() != n {
            return Err(Error::param(
                "branching",
                format!(
                    "expected a {n}x{n} matrix, got {0}x{0}",
                    self.branching.dim()
                ),
            ));
        }
        for s in StreamId::all(self.assets) {
            let i = s.index();
            let mu = self.baseline[i];
            if !(mu >= T::zero()) || !mu.is_finite() {
                return Err(Error::param(
                    format!("baseline.{s}"),
                    format!("{mu} must be >= 0"),
                ));
            }
            ExpKernel::new(self.kernels[i].rate)
                .map_err(|_| Error::param(format!("decay.{s}"), "rate must be > 0"))?;
            let g = self.impacts[i];
            PowerImpact::new(g.exponent, g.mark_rate).map_err(|e| match e {
                Error::InvalidParameter { field, reason } => {
                    Error::param(format!("{field}.{s}"), reason)
                }
                other => other,
            })?;
        }
        let pattern = InteractionPattern::table(self.assets);
        for t in 0..n {
            for src in 0..n {
                let v = self.branching.get(t, src);
                let ts = StreamId::from_index(t);
                let ss = StreamId::from_index(src);
                if !(v >= T::zero()) || !v.is_finite() {
                    return Err(Error::param(
                        format!("branching.{ts}.{ss}"),
                        format!("{v} must be >= 0"),
                    ));
                }
                if v != T::zero() && !pattern.allowed(t, src) {
                    return Err(Error::ForbiddenCell {
                        target: ts.key(),
                        source_stream: ss.key(),
                        value: v.as_f64(),
                    });
                }
            }
        }
        for asset in 0..self.assets {
            for dir in Direction::ALL {
                let a = self.baseline[StreamId::new(asset, Side::Ask, dir).index()];
                let b = self.baseline[StreamId::new(asset, Side::Bid, dir).index()];
                if a != b {
                    return Err(Error::param(
                        format!("baseline.{asset}.{}", dir.name()),
                        format!("ask ({a}) and bid ({b}) baselines must be equal"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn stream_count(&self) -> usize {
        self.assets * StreamId::PER_ASSET
    }

    pub fn baseline(&self, stream: StreamId) -> T {
        self.baseline[stream.index()]
    }

    pub fn baselines(&self) -> &[T] {
        &self.baseline
    }

    pub fn branching(&self) -> &Matrix<T> {
        &self.branching
    }

    pub fn branching_entry(&self, target: StreamId, source: StreamId) -> T {
        self.branching.get(target.index(), source.index())
    }

    pub fn kernel(&self, stream: StreamId) -> ExpKernel<T> {
        self.kernels[stream.index()]
    }

    pub fn kernels(&self) -> &[ExpKernel<T>] {
        &self.kernels
    }

    pub fn impact(&self, stream: StreamId) -> PowerImpact<T> {
        self.impacts[stream.index()]
    }

    pub fn impacts(&self) -> &[PowerImpact<T>] {
        &self.impacts
    }

    /// Sets the shared ask/bid baseline of one asset and direction.
    pub fn with_baseline(mut self, asset: usize, direction: Direction, value: T) -> Result<Self> {
        for side in Side::ALL {
            self.baseline[StreamId::new(asset, side, direction).index()] = value;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn with_branching(mut self, target: StreamId, source: StreamId, value: T) -> Result<Self> {
        self.branching.set(target.index(), source.index(), value);
        self.validate()?;
        Ok(self)
    }

    pub fn with_decay(mut self, stream: StreamId, rate: T) -> Result<Self> {
        self.kernels[stream.index()] = ExpKernel::new(rate)?;
        Ok(self)
    }

    pub fn with_impact(mut self, stream: StreamId, impact: PowerImpact<T>) -> Result<Self> {
        self.impacts[stream.index()] = PowerImpact::new(impact.exponent, impact.mark_rate)?;
        Ok(self)
    }

    /// Same parameters with every baseline multiplied by `factor`.
    pub fn scale_baselines(&self, factor: T) -> Result<Self> {
        let mut p = self.clone();
        for mu in &mut p.baseline {
            *mu = *mu * factor;
        }
        p.validate()?;
        Ok(p)
    }

    /// Parameters under a change of clock `t' = factor * t`: rates divide by
    /// `factor`, dimensionless quantities are unchanged.
    pub fn rescale_time(&self, factor: T) -> Result<Self> {
        let mut p = self.clone();
        for mu in &mut p.baseline {
            *mu = *mu / factor;
        }
        for k in &mut p.kernels {
            k.rate = k.rate / factor;
        }
        p.validate()?;
        Ok(p)
    }
}

/// Symmetric one-line configuration used to build parameter sets quickly:
/// identical values for every asset and side.
#[derive(Debug, Clone, Copy)]
pub struct SymmetricSpec<T> {
    pub baseline: T,
    /// Self-excitation of each stream.
    pub self_excitation: T,
    /// Ask-up <-> bid-up and ask-down <-> bid-down coupling within an asset.
    pub side_coupling: T,
    /// Same-side coupling across assets, same direction.
    pub cross_same_direction: T,
    /// Same-side coupling across assets, opposite direction.
    pub cross_opposite_direction: T,
    pub decay: T,
    pub impact_exponent: T,
    pub mark_rate: T,
}

impl<T: Real> SymmetricSpec<T> {
    pub fn build(&self, assets: usize) -> Result<ParameterSet<T>> {
        let n = assets * StreamId::PER_ASSET;
        let mut branching = Matrix::zeros(n);
        let pattern = InteractionPattern::table(assets);
        for t in StreamId::all(assets) {
            for s in StreamId::all(assets) {
                if !pattern.allowed(t.index(), s.index()) {
                    continue;
                }
                let v = if t == s {
                    self.self_excitation
                } else if t.asset == s.asset {
                    self.side_coupling
                } else if t.direction == s.direction {
                    self.cross_same_direction
                } else {
                    self.cross_opposite_direction
                };
                branching.set(t.index(), s.index(), v);
            }
        }
        ParameterSet::new(
            assets,
            vec![self.baseline; n],
            branching,
            vec![ExpKernel::new(self.decay)?; n],
            vec![PowerImpact::new(self.impact_exponent, self.mark_rate)?; n],
        )
    }
}
