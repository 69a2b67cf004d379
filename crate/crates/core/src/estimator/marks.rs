//! Mark (volume) distribution fits: exponential against Gaussian.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gof::ks_statistic;
use crate::scalar::Real;
use crate::special::normal_cdf;

/// Below this many observations a fit is flagged as low-confidence.
pub const MIN_MARKS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MarkFamily<T> {
    Exponential { rate: T },
    Gaussian { mean: T, std: T },
}

impl<T: Real> MarkFamily<T> {
    pub fn cdf(&self, x: T) -> T {
        match *self {
            Self::Exponential { rate } => {
                if x <= T::zero() {
                    T::zero()
                } else {
                    T::one() - (-rate * x).exp()
                }
            }
            Self::Gaussian { mean, std } => normal_cdf((x - mean) / std),
        }
    }

    pub fn tail(&self, x: T) -> T {
        T::one() - self.cdf(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyFit<T> {
    pub family: MarkFamily<T>,
    pub ks_distance: T,
}

/// `P(V > x)` sampled on a log-spaced grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint<T> {
    pub x: T,
    pub empirical: T,
    pub exponential: T,
    pub gaussian: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkFit<T> {
    pub n: usize,
    pub exponential: FamilyFit<T>,
    pub gaussian: FamilyFit<T>,
    pub tail: Vec<TailPoint<T>>,
    pub low_confidence: bool,
    /// All observations equal: the Gaussian std was floored.
    pub degenerate: bool,
}

impl<T: Real> MarkFit<T> {
    pub fn rate(&self) -> T {
        match self.exponential.family {
            MarkFamily::Exponential { rate } => rate,
            MarkFamily::Gaussian { .. } => {
                unreachable!("exponential slot holds an exponential fit")
            }
        }
    }
}

const TAIL_POINTS: usize = 40;

/// Fits both families to one sample of volumes. `None` for an empty sample.
pub fn fit_marks<T: Real>(volumes: &[T]) -> Result<Option<MarkFit<T>>> {
    if let Some(v) = volumes
        .iter()
        .find(|v| !(**v > T::zero()) || !v.is_finite())
    {
        return Err(Error::InvalidInput(format!(
            "volumes must be positive and finite, got {v}"
        )));
    }
    if volumes.is_empty() {
        return Ok(None);
    }
    let n = T::from_usize_lossy(volumes.len());
    let mean = volumes.iter().copied().sum::<T>() / n;
    let var = volumes.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let degenerate = !(var > T::zero());
    let std = if degenerate {
        mean * T::lit(1e-6)
    } else {
        var.sqrt()
    };
    let exp = MarkFamily::Exponential { rate: mean.recip() };
    let gauss = MarkFamily::Gaussian { mean, std };

    let mut sorted = volumes.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let lo = sorted[0].ln();
    let hi = sorted[sorted.len() - 1].ln();
    let count = if hi > lo { TAIL_POINTS } else { 1 };
    let tail = (0..count)
        .map(|k| {
            let x = if count == 1 {
                sorted[0]
            } else {
                (lo + (hi - lo) * T::from_usize_lossy(k) / T::from_usize_lossy(count - 1)).exp()
            };
            let above = sorted.len() - sorted.partition_point(|&v| v <= x);
            TailPoint {
                x,
                empirical: T::from_usize_lossy(above) / n,
                exponential: exp.tail(x),
                gaussian: gauss.tail(x),
            }
        })
        .collect();

    Ok(Some(MarkFit {
        n: volumes.len(),
        exponential: FamilyFit {
            family: exp,
            ks_distance: ks_statistic(volumes, |x| exp.cdf(x)),
        },
        gaussian: FamilyFit {
            family: gauss,
            ks_distance: ks_statistic(volumes, |x| gauss.cdf(x)),
        },
        tail,
        low_confidence: volumes.len() < MIN_MARKS,
        degenerate,
    }))
}
