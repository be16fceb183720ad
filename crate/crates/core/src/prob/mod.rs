//! Random variates, stick-breaking weights and the adaptive random-walk kernel shared by
//! both synthesizers.

mod adaptive;
mod rng;
mod stick;
mod variates;

pub use adaptive::{adaptive_rw_update, AdaptiveStep, ADAPT_BATCH, TARGET_ACCEPT};
pub use rng::{streams, RngStream};
pub use stick::{stick_breaking, STICK_CLAMP};
pub use variates::{
    normalize_log_weights, sample_beta, sample_categorical, sample_dirichlet, sample_gamma,
    sample_ln_gamma, sample_normal, sample_poisson,
};

pub(crate) use stick::{prior_sticks, update_sticks};
pub(crate) use variates::{categorical_with_total, sample_log_categorical};
