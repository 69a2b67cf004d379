//! Multivariate marked Hawkes processes for the first line of a limit order
//! book: simulation, likelihood fitting, goodness of fit, market-microstructure
//! analytics, next-event forecasting and transaction-cost accounting.
//!
//! Numerical code is generic over the scalar type through [`Real`]; the
//! `*64`/`*32` aliases below fix it for callers that don't care.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod forecast;
pub mod gof;
pub mod intensity;
pub mod io;
pub mod orderbook;
pub mod params;
pub mod scalar;
pub mod simulator;
pub mod special;
pub mod spectral;
pub mod stream;

pub use error::{Error, Result};
pub use scalar::Real;
pub use stream::{Direction, EventStream, MarkedEvent, Side, StreamId};

pub type ParameterSet64 = params::ParameterSet<f64>;
pub type ParameterSet32 = params::ParameterSet<f32>;
pub type EventStream64 = EventStream<f64>;
pub type EventStream32 = EventStream<f32>;
pub type MarkedEvent64 = MarkedEvent<f64>;
pub type PricePath64 = orderbook::PricePath<f64>;
pub type FitReport64 = estimator::FitReport<f64>;
pub type Simulation64 = simulator::Simulation<f64>;
