//! Partially synthetic categorical microdata.
//!
//! Two Bayesian nonparametric synthesizers replace one sensitive categorical variable:
//! a truncated Dirichlet-process mixture of products of multinomials ([`dpmpm`]) and a
//! Poisson-lognormal count model over (pattern, level) cells with DP-mixed random effects
//! ([`areal`]). The [`utility`], [`risk`] and [`bounds`] modules audit the released
//! replicates against the original data.

pub mod areal;
pub mod bounds;
pub mod config;
pub mod data;
pub mod dpmpm;
pub mod error;
pub mod pipeline;
pub mod prob;
pub mod risk;
pub mod simulate;
pub mod synth;
pub mod utility;

pub use error::{Error, Result};
