use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::sample_normal;

/// Iterations per Robbins–Monro adaptation batch.
pub const ADAPT_BATCH: u32 = 50;
/// Target acceptance rate for scalar random-walk updates.
pub const TARGET_ACCEPT: f64 = 0.44;

/// Proposal scale state of a scalar random-walk Metropolis kernel.
///
/// While adapting, every [`ADAPT_BATCH`] updates the log scale moves by
/// `(batch_rate - target) / sqrt(batch_count)`. After [`AdaptiveStep::freeze`] it never changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveStep {
    log_scale: f64,
    target_accept: f64,
    adapting: bool,
    batch_accepted: u32,
    batch_len: u32,
    batches: u64,
    proposals: u64,
    accepted: u64,
}

impl AdaptiveStep {
    pub fn new(initial_scale: f64) -> Self {
        Self::with_target(initial_scale, TARGET_ACCEPT)
    }

    pub fn with_target(initial_scale: f64, target_accept: f64) -> Self {
        assert!(initial_scale > 0.0 && (0.0..1.0).contains(&target_accept));
        AdaptiveStep {
            log_scale: initial_scale.ln(),
            target_accept,
            adapting: true,
            batch_accepted: 0,
            batch_len: 0,
            batches: 0,
            proposals: 0,
            accepted: 0,
        }
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn target_accept(&self) -> f64 {
        self.target_accept
    }

    pub fn is_adapting(&self) -> bool {
        self.adapting
    }

    /// Ends the adaptation phase; the proposal scale is fixed from here on.
    pub fn freeze(&mut self) {
        self.adapting = false;
    }

    /// Acceptance rate over every proposal made so far.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    fn record(&mut self, accepted: bool) {
        self.proposals += 1;
        self.accepted += accepted as u64;
        if !self.adapting {
            return;
        }
        self.batch_len += 1;
        self.batch_accepted += accepted as u32;
        if self.batch_len == ADAPT_BATCH {
            self.batches += 1;
            let rate = self.batch_accepted as f64 / ADAPT_BATCH as f64;
            self.log_scale += (rate - self.target_accept) / (self.batches as f64).sqrt();
            self.batch_len = 0;
            self.batch_accepted = 0;
        }
    }
}

/// One Gaussian random-walk Metropolis update of a scalar.
///
/// Returns the new point and whether the proposal was accepted. A NaN log density at the
/// current point is an error; a NaN at the proposal counts as a rejection.
pub fn adaptive_rw_update<R, F>(
    mut logdensity: F,
    current: f64,
    step: &mut AdaptiveStep,
    rng: &mut R,
) -> Result<(f64, bool)>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    let current_ld = logdensity(current);
    if current_ld.is_nan() {
        return Err(Error::numeric(
            "random-walk update",
            format!("log density is NaN at current point {current}"),
        ));
    }
    let proposal = current + sample_normal(rng, 0.0, step.scale());
    let proposal_ld = logdensity(proposal);
    let log_ratio = proposal_ld - current_ld;
    let accepted = !log_ratio.is_nan()
        && (log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio);
    step.record(accepted);
    Ok((if accepted { proposal } else { current }, accepted))
}
