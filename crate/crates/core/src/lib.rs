//! Real-option valuation of salmon farming under stochastic lice-driven
//! mortality.
//!
//! The crate simulates salmon and soy prices with a two-factor commodity
//! model, host-parasite dynamics with threshold-triggered lice treatments,
//! and the resulting harvest payoffs; it calibrates the lice model to weekly
//! count data and solves the optimal harvesting problem by regression-based
//! backward induction, comparing rules built on stochastic and deterministic
//! mortality models.

// Negated comparisons double as NaN rejection in parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beta;
pub mod biology;
pub mod calibrate;
pub mod commodity;
pub mod config;
pub mod economics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod ingest;
pub mod pipeline;
pub mod rng;
pub mod stopping;
pub mod synthetic;
pub mod world;

pub use error::{Error, Result};
