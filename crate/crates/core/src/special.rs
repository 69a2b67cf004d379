//! Special functions for generic scalars. Gamma, digamma and erfc delegate
//! to `statrs` in double precision; the Kolmogorov limiting distribution is
//! summed here.

use statrs::function::{erf, gamma as sg};

use crate::scalar::Real;

/// `(x - 1)!` for integral `x` in `[1, 21]`, where the product is exact.
fn small_factorial(x: f64) -> Option<f64> {
    if (1.0..=21.0).contains(&x) && x.fract() == 0.0 {
        Some((1..x as u32).fold(1.0, |acc, k| acc * k as f64))
    } else {
        None
    }
}

/// Gamma function; exact at small positive integers.
pub fn gamma<T: Real>(x: T) -> T {
    let x = x.as_f64();
    T::lit(small_factorial(x).unwrap_or_else(|| sg::gamma(x)))
}

pub fn ln_gamma<T: Real>(x: T) -> T {
    let x = x.as_f64();
    T::lit(small_factorial(x).map_or_else(|| sg::ln_gamma(x), f64::ln))
}

pub fn digamma<T: Real>(x: T) -> T {
    T::lit(sg::digamma(x.as_f64()))
}

pub fn erfc<T: Real>(x: T) -> T {
    T::lit(erf::erfc(x.as_f64()))
}

/// Standard normal CDF.
pub fn normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * erfc(-x / T::SQRT_2())
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_q<T: Real>(lambda: T) -> T {
    if lambda <= T::lit(1e-3) {
        return T::one();
    }
    let l2 = lambda * lambda;
    let mut sum = T::zero();
    let mut sign = T::one();
    let mut prev = T::zero();
    for k in 1..=100 {
        let kf = T::from_usize_lossy(k);
        let term = (T::lit(-2.0) * kf * kf * l2).exp();
        sum = sum + sign * term;
        if term <= T::lit(1e-12) * sum.abs() || term <= T::epsilon() * prev {
            break;
        }
        prev = term;
        sign = -sign;
    }
    (T::lit(2.0) * sum).max(T::zero()).min(T::one())
}
