//! DP-areal synthesizer: a Poisson-lognormal model on (pattern, level) cell counts.
//!
//! For pattern `b` and sensitive level `i`:
//!
//! ```text
//! c_bi ~ Poisson(lambda_bi)
//! ln lambda_bi ~ Normal(mu + theta*_{z_bi} + sum_r phi*_{z_bi, r} X_br, 1 / tau_lambda)
//! z_bi ~ Categorical(pi),  pi from truncated stick-breaking
//! theta*_k ~ Normal(0, 1 / tau_theta),  phi*_kr ~ Normal(0, sigma_r^2),  mu ~ Normal(0, 1 / tau_mu)
//! ```
//!
//! `X_b` is the one-hot encoding of pattern `b` over all key levels. Synthesis draws each
//! record's level from `lambda_b / sum_i lambda_bi`.
//!
//! Conjugate blocks are Gibbs updates; `ln lambda` and `sigma` use the adaptive random-walk
//! kernel from [`crate::prob`], with burn-in serving as the adaptation phase.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    combination_counts, full_pattern_index, CategoricalDataset, CountMatrix, PatternIndex, Schema,
};
use crate::error::{Error, Result};
use crate::prob::{
    adaptive_rw_update, categorical_with_total, prior_sticks, sample_gamma, sample_log_categorical,
    sample_normal, stick_breaking, streams, update_sticks, AdaptiveStep, RngStream,
};
use crate::synth::{RunShape, SyntheticBundle, Synthesizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceMode {
    /// Independent `Normal(0, sigma_r^2)` priors on each covariate effect.
    #[default]
    Diagonal,
    /// Full covariance with an LKJ correlation prior. Declared, not implemented.
    FullLkj,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub const UNIT: GammaPrior = GammaPrior {
        shape: 1.0,
        rate: 1.0,
    };
}

/// Parameters held fixed instead of sampled. Used by oracle checks on reduced models.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FixedParameters {
    pub mu: Option<f64>,
    pub tau_lambda: Option<f64>,
    /// Holds every `theta*` and `phi*` at zero.
    pub pin_effects: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpArealHyper {
    pub k: usize,
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub tau_theta: GammaPrior,
    pub tau_mu: GammaPrior,
    pub tau_lambda: GammaPrior,
    /// Degrees of freedom of the half-t prior on each `sigma_r`.
    pub sigma_phi_df: f64,
    pub sigma_phi_scale: f64,
    pub covariance: CovarianceMode,
    pub fixed: FixedParameters,
}

impl Default for DpArealHyper {
    fn default() -> Self {
        DpArealHyper {
            k: 50,
            a_alpha: 1.0,
            b_alpha: 1.0,
            tau_theta: GammaPrior::UNIT,
            tau_mu: GammaPrior::UNIT,
            tau_lambda: GammaPrior::UNIT,
            sigma_phi_df: 3.0,
            sigma_phi_scale: 1.0,
            covariance: CovarianceMode::Diagonal,
            fixed: FixedParameters::default(),
        }
    }
}

impl DpArealHyper {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("truncation level K must be at least 1".into()));
        }
        let positive = [
            ("a_alpha", self.a_alpha),
            ("b_alpha", self.b_alpha),
            ("tau_theta.shape", self.tau_theta.shape),
            ("tau_theta.rate", self.tau_theta.rate),
            ("tau_mu.shape", self.tau_mu.shape),
            ("tau_mu.rate", self.tau_mu.rate),
            ("tau_lambda.shape", self.tau_lambda.shape),
            ("tau_lambda.rate", self.tau_lambda.rate),
            ("sigma_phi_df", self.sigma_phi_df),
            ("sigma_phi_scale", self.sigma_phi_scale),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        if let Some(t) = self.fixed.tau_lambda {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("fixed tau_lambda must be positive, got {t}")));
            }
        }
        if self.covariance == CovarianceMode::FullLkj {
            return Err(Error::Unimplemented(
                "covariance_mode `full-lkj`; use `diagonal`".into(),
            ));
        }
        Ok(())
    }
}

/// Binary pattern × covariate design: one-hot over every level of every pattern key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Design {
    r: usize,
    /// Column indices of the ones in each row.
    ones: Vec<Vec<usize>>,
}

impl Design {
    pub fn from_patterns(patterns: &PatternIndex, schema: &Schema) -> Self {
        let mut offsets = Vec::new();
        let mut r = 0;
        for &j in patterns.key_vars() {
            offsets.push(r);
            r += schema.levels(j);
        }
        let ones = patterns
            .patterns()
            .iter()
            .map(|p| {
                p.key
                    .iter()
                    .zip(&offsets)
                    .map(|(&level, &off)| off + level as usize)
                    .collect()
            })
            .collect();
        Design { r, ones }
    }

    /// Design with explicit rows of one-positions.
    pub fn from_ones(r: usize, ones: Vec<Vec<usize>>) -> Result<Self> {
        if ones.iter().flatten().any(|&c| c >= r) {
            return Err(Error::invalid("design column index out of range"));
        }
        Ok(Design { r, ones })
    }

    pub fn rows(&self) -> usize {
        self.ones.len()
    }

    /// Number of covariate columns R.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn ones(&self, b: usize) -> &[usize] {
        &self.ones[b]
    }

    pub fn dense_row(&self, b: usize) -> Vec<u8> {
        let mut row = vec![0u8; self.r];
        self.ones[b].iter().for_each(|&c| row[c] = 1);
        row
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpArealState {
    pub b: usize,
    pub g: usize,
    pub mu: f64,
    /// Row-major B × G.
    pub log_lambda: Vec<f64>,
    /// Row-major B × G, 0-based cluster ids.
    pub z_comb: Vec<usize>,
    pub beta: Vec<f64>,
    pub pi: Vec<f64>,
    pub alpha: f64,
    pub theta_star: Vec<f64>,
    /// Row-major K × R.
    pub phi_star: Vec<f64>,
    pub tau_lambda: f64,
    pub tau_theta: f64,
    pub tau_mu: f64,
    pub sigma_phi: Vec<f64>,
    pub design: Design,
    pub lambda_steps: Vec<AdaptiveStep>,
    pub sigma_steps: Vec<AdaptiveStep>,
    pub iteration: usize,
}

impl DpArealState {
    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn r(&self) -> usize {
        self.design.r()
    }

    pub fn lambda(&self, b: usize, i: usize) -> f64 {
        self.log_lambda[b * self.g + i].exp()
    }

    /// `theta*_k + phi*_k . X_b`.
    fn effect(&self, k: usize, b: usize) -> f64 {
        let phi = &self.phi_star[k * self.r()..(k + 1) * self.r()];
        self.theta_star[k] + self.design.ones(b).iter().map(|&c| phi[c]).sum::<f64>()
    }

    fn effect_table(&self) -> Vec<f64> {
        let k = self.k();
        let mut out = vec![0.0; k * self.b];
        for c in 0..k {
            for b in 0..self.b {
                out[c * self.b + b] = self.effect(c, b);
            }
        }
        out
    }

    /// Mean of `ln lambda_bi` under the current effects.
    pub fn cell_mean(&self, b: usize, i: usize) -> f64 {
        self.mu + self.effect(self.z_comb[b * self.g + i], b)
    }

    pub fn occupied_clusters(&self) -> usize {
        let mut seen = vec![false; self.k()];
        self.z_comb.iter().for_each(|&c| seen[c] = true);
        seen.into_iter().filter(|&s| s).count()
    }

    /// Ends adaptation of every random-walk kernel.
    pub fn freeze_adaptation(&mut self) {
        self.lambda_steps.iter_mut().for_each(AdaptiveStep::freeze);
        self.sigma_steps.iter_mut().for_each(AdaptiveStep::freeze);
    }

    pub fn check_invariants(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::numeric("dp-areal state", msg));
        let cells = self.b * self.g;
        if self.log_lambda.len() != cells || self.z_comb.len() != cells {
            return bad("cell arrays do not match B × G".into());
        }
        if self.design.rows() != self.b {
            return bad("design rows do not match B".into());
        }
        let k = self.k();
        if self.z_comb.iter().any(|&z| z >= k) {
            return bad("cluster id out of range".into());
        }
        if (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 || self.pi.iter().any(|&p| p < 0.0) {
            return bad("pi is not a simplex".into());
        }
        for (name, v) in [
            ("tau_lambda", self.tau_lambda),
            ("tau_theta", self.tau_theta),
            ("tau_mu", self.tau_mu),
            ("alpha", self.alpha),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} = {v} is not positive"));
            }
        }
        if self.sigma_phi.len() != self.r() || self.sigma_phi.iter().any(|&s| !(s > 0.0)) {
            return bad("sigma_phi must be positive with length R".into());
        }
        if let Some(at) = self.log_lambda.iter().position(|x| !x.is_finite()) {
            return bad(format!("log_lambda[{}][{}] not finite", at / self.g, at % self.g));
        }
        Ok(())
    }
}

fn half_t_draw<R: Rng + ?Sized>(rng: &mut R, df: f64, scale: f64) -> f64 {
    // |N(0,1)| / sqrt(chi2_df / df)
    let z = sample_normal(rng, 0.0, 1.0).abs();
    let chi2 = sample_gamma(rng, df / 2.0, 0.5);
    (scale * z / (chi2 / df).sqrt()).max(1e-6)
}

pub fn dp_areal_init<R: Rng + ?Sized>(
    counts: &CountMatrix,
    design: &Design,
    hyper: &DpArealHyper,
    rng: &mut R,
) -> Result<DpArealState> {
    hyper.validate()?;
    if counts.rows() != design.rows() {
        return Err(Error::invalid(format!(
            "counts have {} patterns but design has {} rows",
            counts.rows(),
            design.rows()
        )));
    }
    if counts.rows() == 0 || counts.cols() == 0 {
        return Err(Error::invalid("count matrix is empty"));
    }
    let (b, g, k, r) = (counts.rows(), counts.cols(), hyper.k, design.r());
    let fixed = hyper.fixed;

    let log_lambda = counts.as_slice().iter().map(|&c| (c as f64 + 0.5).ln()).collect();
    let tau_lambda = fixed
        .tau_lambda
        .unwrap_or_else(|| sample_gamma(rng, hyper.tau_lambda.shape, hyper.tau_lambda.rate));
    let tau_theta = sample_gamma(rng, hyper.tau_theta.shape, hyper.tau_theta.rate);
    let tau_mu = sample_gamma(rng, hyper.tau_mu.shape, hyper.tau_mu.rate);
    let mu = fixed
        .mu
        .unwrap_or_else(|| sample_normal(rng, 0.0, 1.0 / tau_mu.sqrt()));
    let sigma_phi: Vec<f64> = (0..r)
        .map(|_| half_t_draw(rng, hyper.sigma_phi_df, hyper.sigma_phi_scale))
        .collect();
    let (theta_star, phi_star) = if fixed.pin_effects {
        (vec![0.0; k], vec![0.0; k * r])
    } else {
        let theta = (0..k)
            .map(|_| sample_normal(rng, 0.0, 1.0 / tau_theta.sqrt()))
            .collect();
        let phi = (0..k * r)
            .map(|idx| sample_normal(rng, 0.0, sigma_phi[idx % r]))
            .collect();
        (theta, phi)
    };
    let alpha = sample_gamma(rng, hyper.a_alpha, hyper.b_alpha).max(f64::MIN_POSITIVE);
    let beta = prior_sticks(rng, k, alpha);
    let pi = stick_breaking(&beta)?;
    let z_comb = (0..b * g).map(|_| rng.random_range(0..k)).collect();

    let state = DpArealState {
        b,
        g,
        mu,
        log_lambda,
        z_comb,
        beta,
        pi,
        alpha,
        theta_star,
        phi_star,
        tau_lambda,
        tau_theta,
        tau_mu,
        sigma_phi,
        design: design.clone(),
        lambda_steps: vec![AdaptiveStep::new(0.5); b * g],
        sigma_steps: vec![AdaptiveStep::new(0.5); r],
        iteration: 0,
    };
    state.check_invariants()?;
    Ok(state)
}

fn nan_guard(value: f64, what: &str) -> Result<f64> {
    if value.is_nan() {
        Err(Error::numeric("dp-areal sweep", format!("{what} is NaN")))
    } else {
        Ok(value)
    }
}

/// One full scan of the DP-areal sampler.
pub fn dp_areal_sweep<R: Rng + ?Sized>(
    state: &mut DpArealState,
    counts: &CountMatrix,
    hyper: &DpArealHyper,
    rng: &mut R,
) -> Result<()> {
    let (nb, ng, k, r) = (state.b, state.g, state.k(), state.r());
    let fixed = hyper.fixed;
    let n_cells = nb * ng;

    // (a) log rates, one random-walk step per cell
    let effects = state.effect_table();
    for b in 0..nb {
        for i in 0..ng {
            let cell = b * ng + i;
            let c = counts.get(b, i) as f64;
            let mean = state.mu + effects[state.z_comb[cell] * nb + b];
            let tau = state.tau_lambda;
            let (x, _) = adaptive_rw_update(
                |x: f64| c * x - x.exp() - 0.5 * tau * (x - mean).powi(2),
                state.log_lambda[cell],
                &mut state.lambda_steps[cell],
                rng,
            )
            .map_err(|e| {
                Error::numeric("dp-areal sweep", format!("log_lambda[{b}][{i}]: {e}"))
            })?;
            state.log_lambda[cell] = x;
        }
    }

    if !fixed.pin_effects {
        // (b) cluster assignments
        let ln_pi: Vec<f64> = state.pi.iter().map(|p| p.ln()).collect();
        let mut scratch = vec![0.0; k];
        let half_tau = 0.5 * state.tau_lambda;
        for b in 0..nb {
            for i in 0..ng {
                let cell = b * ng + i;
                let resid = state.log_lambda[cell] - state.mu;
                for (c, slot) in scratch.iter_mut().enumerate() {
                    let d = resid - effects[c * nb + b];
                    *slot = ln_pi[c] - half_tau * d * d;
                }
                state.z_comb[cell] = sample_log_categorical(rng, &mut scratch);
            }
        }

        // (c) sticks and concentration
        let mut occupancy = vec![0usize; k];
        state.z_comb.iter().for_each(|&c| occupancy[c] += 1);
        let (beta, pi, alpha) =
            update_sticks(rng, &occupancy, state.alpha, hyper.a_alpha, hyper.b_alpha);
        state.beta = beta;
        state.pi = pi;
        state.alpha = nan_guard(alpha, "alpha")?;

        // per (cluster, pattern) member count and sum of log rates
        let mut members = vec![0usize; k * nb];
        let mut sums = vec![0.0; k * nb];
        for b in 0..nb {
            for i in 0..ng {
                let cell = b * ng + i;
                let c = state.z_comb[cell];
                members[c * nb + b] += 1;
                sums[c * nb + b] += state.log_lambda[cell];
            }
        }

        // (d) cluster intercepts
        for c in 0..k {
            let mut n_c = 0usize;
            let mut resid = 0.0;
            for b in 0..nb {
                let m = members[c * nb + b];
                if m == 0 {
                    continue;
                }
                let phi_x = state.effect(c, b) - state.theta_star[c];
                n_c += m;
                resid += sums[c * nb + b] - m as f64 * (state.mu + phi_x);
            }
            let prec = state.tau_theta + n_c as f64 * state.tau_lambda;
            let mean = state.tau_lambda * resid / prec;
            state.theta_star[c] =
                nan_guard(sample_normal(rng, mean, prec.sqrt().recip()), &format!("theta*[{c}]"))?;
        }

        // (e) cluster covariate effects, componentwise under the diagonal prior
        for c in 0..k {
            for col in 0..r {
                let mut n_c = 0usize;
                let mut resid = 0.0;
                for b in 0..nb {
                    let m = members[c * nb + b];
                    if m == 0 || !state.design.ones(b).contains(&col) {
                        continue;
                    }
                    let others = state.effect(c, b) - state.phi_star[c * r + col];
                    n_c += m;
                    resid += sums[c * nb + b] - m as f64 * (state.mu + others);
                }
                let prec = state.sigma_phi[col].powi(-2) + n_c as f64 * state.tau_lambda;
                let mean = state.tau_lambda * resid / prec;
                state.phi_star[c * r + col] = nan_guard(
                    sample_normal(rng, mean, prec.sqrt().recip()),
                    &format!("phi*[{c}][{col}]"),
                )?;
            }
        }
    }

    // (f) precisions
    let effects = state.effect_table();
    if fixed.tau_lambda.is_none() {
        let ss: f64 = (0..n_cells)
            .map(|cell| {
                let b = cell / ng;
                let d = state.log_lambda[cell] - state.mu - effects[state.z_comb[cell] * nb + b];
                d * d
            })
            .sum();
        state.tau_lambda = nan_guard(
            sample_gamma(
                rng,
                hyper.tau_lambda.shape + 0.5 * n_cells as f64,
                hyper.tau_lambda.rate + 0.5 * ss,
            ),
            "tau_lambda",
        )?;
    }
    let ss_theta: f64 = state.theta_star.iter().map(|t| t * t).sum();
    state.tau_theta = nan_guard(
        sample_gamma(
            rng,
            hyper.tau_theta.shape + 0.5 * k as f64,
            hyper.tau_theta.rate + 0.5 * ss_theta,
        ),
        "tau_theta",
    )?;
    state.tau_mu = nan_guard(
        sample_gamma(
            rng,
            hyper.tau_mu.shape + 0.5,
            hyper.tau_mu.rate + 0.5 * state.mu * state.mu,
        ),
        "tau_mu",
    )?;

    // (g) intercept
    match fixed.mu {
        Some(mu) => state.mu = mu,
        None => {
            let resid: f64 = (0..n_cells)
                .map(|cell| state.log_lambda[cell] - effects[state.z_comb[cell] * nb + cell / ng])
                .sum();
            let prec = state.tau_mu + n_cells as f64 * state.tau_lambda;
            state.mu = nan_guard(
                sample_normal(rng, state.tau_lambda * resid / prec, prec.sqrt().recip()),
                "mu",
            )?;
        }
    }

    // (h) effect scales, random walk on ln sigma with the half-t prior
    if !fixed.pin_effects {
        let (df, scale) = (hyper.sigma_phi_df, hyper.sigma_phi_scale);
        for col in 0..r {
            let ss: f64 = (0..k).map(|c| state.phi_star[c * r + col].powi(2)).sum();
            let kf = k as f64;
            let logdens = |u: f64| {
                let s2 = (2.0 * u).exp();
                -0.5 * (df + 1.0) * (1.0 + s2 / (df * scale * scale)).ln() + u
                    - kf * u
                    - 0.5 * ss / s2
            };
            let (u, _) = adaptive_rw_update(
                logdens,
                state.sigma_phi[col].ln(),
                &mut state.sigma_steps[col],
                rng,
            )
            .map_err(|e| Error::numeric("dp-areal sweep", format!("sigma_phi[{col}]: {e}")))?;
            state.sigma_phi[col] = u.exp();
        }
    }

    state.iteration += 1;
    Ok(())
}

/// Per-pattern synthesis probabilities `lambda_bi / sum_i lambda_bi`.
pub fn synthesis_probabilities(state: &DpArealState) -> Vec<Vec<f64>> {
    (0..state.b)
        .map(|b| {
            let row = &state.log_lambda[b * state.g..(b + 1) * state.g];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let rates: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
            let total: f64 = rates.iter().sum();
            rates.into_iter().map(|v| v / total).collect()
        })
        .collect()
}

/// Draws each record's sensitive level from its pattern's normalised rates.
pub fn dp_areal_synthesize<R: Rng + ?Sized>(
    state: &DpArealState,
    data: &CategoricalDataset,
    patterns: &PatternIndex,
    rng: &mut R,
) -> Result<CategoricalDataset> {
    let probs = synthesis_probabilities(state);
    synthesize_from(&probs, data, patterns, rng)
}

fn synthesize_from<R: Rng + ?Sized>(
    probs: &[Vec<f64>],
    data: &CategoricalDataset,
    patterns: &PatternIndex,
    rng: &mut R,
) -> Result<CategoricalDataset> {
    if probs.len() != patterns.len() {
        return Err(Error::invalid(format!(
            "state has {} patterns, index has {}",
            probs.len(),
            patterns.len()
        )));
    }
    if probs.first().map(Vec::len) != Some(data.schema().sensitive_levels()) {
        return Err(Error::invalid("state level count differs from the schema"));
    }
    let mut synthetic = vec![0u16; data.n()];
    for (pattern, p) in patterns.patterns().iter().zip(probs) {
        let total: f64 = p.iter().sum();
        for &i in &pattern.records {
            synthetic[i] = categorical_with_total(rng, p, total) as u16;
        }
    }
    data.with_sensitive_column(&synthetic)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpArealTraceRow {
    pub iteration: usize,
    pub mu: f64,
    pub tau_lambda: f64,
    pub occupied_clusters: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DpArealDiagnostics {
    pub burn_in: usize,
    pub trace: Vec<DpArealTraceRow>,
    /// Largest `|sum_i p_bi - 1|` over every pattern of every synthesis event.
    pub max_normalization_error: f64,
    /// Mean post-adaptation acceptance rate of the log-rate kernels.
    pub lambda_acceptance: f64,
}

impl DpArealDiagnostics {
    /// Delimiter-separated trace: `iteration,mu,tau_lambda,occupied_clusters,alpha`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,mu,tau_lambda,occupied_clusters,alpha\n");
        for t in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t.iteration, t.mu, t.tau_lambda, t.occupied_clusters, t.alpha
            ));
        }
        out
    }
}

/// Pattern index, counts and design for a dataset, as used by [`dp_areal_run`].
pub fn areal_inputs(data: &CategoricalDataset) -> (PatternIndex, CountMatrix, Design) {
    let patterns = full_pattern_index(data);
    let counts = combination_counts(data, &patterns);
    let design = Design::from_patterns(&patterns, data.schema());
    (patterns, counts, design)
}

/// Runs one chain over the observed patterns and draws `shape.m` replicates.
pub fn dp_areal_run(
    data: &CategoricalDataset,
    hyper: &DpArealHyper,
    shape: RunShape,
    seed: u64,
) -> Result<(SyntheticBundle, DpArealDiagnostics)> {
    let selected = shape.selected_iterations()?;
    let (patterns, counts, design) = areal_inputs(data);
    let mut rng = RngStream::new(seed, streams::CHAIN);
    let mut state = dp_areal_init(&counts, &design, hyper, &mut rng)?;
    let mut diagnostics = DpArealDiagnostics {
        burn_in: shape.burn_in,
        trace: Vec::with_capacity(shape.iterations),
        ..Default::default()
    };
    let mut replicates = Vec::with_capacity(shape.m);
    let mut next = selected.iter().peekable();
    for _ in 0..shape.iterations {
        dp_areal_sweep(&mut state, &counts, hyper, &mut rng)?;
        if state.iteration == shape.burn_in {
            state.freeze_adaptation();
        }
        diagnostics.trace.push(DpArealTraceRow {
            iteration: state.iteration,
            mu: state.mu,
            tau_lambda: state.tau_lambda,
            occupied_clusters: state.occupied_clusters(),
            alpha: state.alpha,
        });
        if next.peek() == Some(&&state.iteration) {
            next.next();
            let probs = synthesis_probabilities(&state);
            for p in &probs {
                let err = (p.iter().sum::<f64>() - 1.0).abs();
                diagnostics.max_normalization_error = diagnostics.max_normalization_error.max(err);
            }
            let mut synth_rng = RngStream::new(seed, streams::replicate(replicates.len()));
            replicates.push(synthesize_from(&probs, data, &patterns, &mut synth_rng)?);
        }
        if state.iteration % 500 == 0 {
            log::debug!(
                "dp-areal iteration {} mu {:.3} tau_lambda {:.3} clusters {}",
                state.iteration,
                state.mu,
                state.tau_lambda,
                state.occupied_clusters()
            );
        }
    }
    diagnostics.lambda_acceptance = state
        .lambda_steps
        .iter()
        .map(AdaptiveStep::acceptance_rate)
        .sum::<f64>()
        / state.lambda_steps.len() as f64;
    Ok((
        SyntheticBundle {
            synthesizer: Synthesizer::DpAreal,
            seed,
            source_iterations: selected,
            replicates,
        },
        diagnostics,
    ))
}
