//! Truncated Dirichlet-process mixture of products of multinomials.
//!
//! Each record belongs to one of `K` latent classes; within a class every variable is an
//! independent categorical draw. Class weights follow a truncated stick-breaking prior with a
//! Gamma-distributed concentration. The blocked Gibbs sweep updates, in order, the class
//! assignments, the stick fractions, the concentration and the per-class level probabilities.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CategoricalDataset, Schema};
use crate::error::{Error, Result};
use crate::prob::{
    prior_sticks, sample_dirichlet, sample_gamma, sample_log_categorical, stick_breaking, streams,
    update_sticks, RngStream,
};
use crate::synth::{RunShape, SyntheticBundle, Synthesizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpmpmHyper {
    /// Truncation level.
    pub k: usize,
    pub a_alpha: f64,
    pub b_alpha: f64,
    /// Dirichlet prior concentrations, one vector of length `d_j` per schema variable.
    pub dirichlet_a: Vec<Vec<f64>>,
}

impl DpmpmHyper {
    pub const DEFAULT_K: usize = 40;
    pub const DEFAULT_A_ALPHA: f64 = 0.25;
    pub const DEFAULT_B_ALPHA: f64 = 0.25;

    /// K = 40, Gamma(0.25, 0.25) on the concentration, flat Dirichlet priors.
    pub fn defaults(schema: &Schema) -> Self {
        Self::uniform(
            schema,
            Self::DEFAULT_K,
            Self::DEFAULT_A_ALPHA,
            Self::DEFAULT_B_ALPHA,
            1.0,
        )
    }

    /// Same concentration `a` on every level of every variable.
    pub fn uniform(schema: &Schema, k: usize, a_alpha: f64, b_alpha: f64, a: f64) -> Self {
        DpmpmHyper {
            k,
            a_alpha,
            b_alpha,
            dirichlet_a: schema
                .variables()
                .iter()
                .map(|v| vec![a; v.levels])
                .collect(),
        }
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        // K = 1 is allowed: it degenerates to the independence model
        if self.k == 0 {
            return Err(Error::Config("truncation level K must be at least 1".into()));
        }
        if !(self.a_alpha > 0.0 && self.b_alpha > 0.0) {
            return Err(Error::Config("a_alpha and b_alpha must be positive".into()));
        }
        if self.dirichlet_a.len() != schema.len() {
            return Err(Error::Config(format!(
                "dirichlet_a has {} vectors for {} variables",
                self.dirichlet_a.len(),
                schema.len()
            )));
        }
        for (j, a) in self.dirichlet_a.iter().enumerate() {
            if a.len() != schema.levels(j) {
                return Err(Error::Config(format!(
                    "dirichlet_a for `{}` has {} entries, variable has {} levels",
                    schema.name(j),
                    a.len(),
                    schema.levels(j)
                )));
            }
            if a.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(Error::Config(format!(
                    "dirichlet_a for `{}` must be positive",
                    schema.name(j)
                )));
            }
        }
        Ok(())
    }
}

/// Full chain state. Class ids are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpmpmState {
    pub z: Vec<usize>,
    pub beta: Vec<f64>,
    pub pi: Vec<f64>,
    pub alpha: f64,
    /// `theta[k][j]` is the level pmf of variable `j` in class `k`.
    pub theta: Vec<Vec<Vec<f64>>>,
    pub iteration: usize,
}

impl DpmpmState {
    pub fn k(&self) -> usize {
        self.pi.len()
    }

    /// Checks every structural invariant of the state against `data`.
    pub fn check_invariants(&self, data: &CategoricalDataset) -> Result<()> {
        let k = self.k();
        let bad = |msg: String| Err(Error::numeric("dpmpm state", msg));
        if self.z.len() != data.n() {
            return bad(format!("{} assignments for {} records", self.z.len(), data.n()));
        }
        if let Some(&zi) = self.z.iter().find(|&&zi| zi >= k) {
            return bad(format!("class id {zi} outside 0..{k}"));
        }
        if self.beta.len() != k || self.beta[k - 1] != 1.0 {
            return bad("last stick fraction must be 1".into());
        }
        let expected = stick_breaking(&self.beta)?;
        if expected
            .iter()
            .zip(&self.pi)
            .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return bad("pi does not match stick-breaking of beta".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("concentration {} not positive", self.alpha));
        }
        for (c, per_class) in self.theta.iter().enumerate() {
            for (j, pmf) in per_class.iter().enumerate() {
                if pmf.len() != data.schema().levels(j)
                    || pmf.iter().any(|&p| !(p >= 0.0))
                    || (pmf.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return bad(format!("theta[{c}][{j}] is not a simplex"));
                }
            }
        }
        Ok(())
    }
}

pub fn occupied_classes(state: &DpmpmState) -> usize {
    let mut seen = vec![false; state.k()];
    state.z.iter().for_each(|&c| seen[c] = true);
    seen.into_iter().filter(|&s| s).count()
}

pub fn dpmpm_init<R: Rng + ?Sized>(
    data: &CategoricalDataset,
    hyper: &DpmpmHyper,
    rng: &mut R,
) -> Result<DpmpmState> {
    hyper.validate(data.schema())?;
    let k = hyper.k;
    let z = (0..data.n()).map(|_| rng.random_range(0..k)).collect();
    let alpha = sample_gamma(rng, hyper.a_alpha, hyper.b_alpha).max(f64::MIN_POSITIVE);
    let beta = prior_sticks(rng, k, alpha);
    let pi = stick_breaking(&beta)?;
    let theta = (0..k)
        .map(|_| {
            hyper
                .dirichlet_a
                .iter()
                .map(|a| sample_dirichlet(rng, a))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DpmpmState {
        z,
        beta,
        pi,
        alpha,
        theta,
        iteration: 0,
    })
}

/// Flattened `ln theta[k][j][level]` with per-variable offsets.
struct LogTheta {
    offsets: Vec<usize>,
    stride: usize,
    values: Vec<f64>,
}

impl LogTheta {
    fn new(state: &DpmpmState) -> Self {
        let mut offsets = Vec::new();
        let mut stride = 0;
        for pmf in &state.theta[0] {
            offsets.push(stride);
            stride += pmf.len();
        }
        let values = state
            .theta
            .iter()
            .flat_map(|per_class| per_class.iter().flatten().map(|p| p.ln()))
            .collect();
        LogTheta {
            offsets,
            stride,
            values,
        }
    }

    #[inline]
    fn get(&self, class: usize, var: usize, level: u16) -> f64 {
        self.values[class * self.stride + self.offsets[var] + level as usize]
    }

    /// `ln pi_k + sum_{j in vars} ln theta[k][j][x_j]` for every class.
    fn class_log_weights(&self, ln_pi: &[f64], row: &[u16], vars: &[usize], out: &mut [f64]) {
        for (c, slot) in out.iter_mut().enumerate() {
            let mut lw = ln_pi[c];
            for &j in vars {
                lw += self.get(c, j, row[j]);
            }
            *slot = lw;
        }
    }
}

/// One blocked Gibbs scan over `z`, `beta`/`pi`, `alpha` and `theta`.
pub fn dpmpm_sweep<R: Rng + ?Sized>(
    state: &mut DpmpmState,
    data: &CategoricalDataset,
    hyper: &DpmpmHyper,
    rng: &mut R,
) -> Result<()> {
    let k = state.k();
    let all_vars: Vec<usize> = (0..data.p()).collect();

    // (a) class assignments, weights in log space
    let log_theta = LogTheta::new(state);
    let ln_pi: Vec<f64> = state.pi.iter().map(|p| p.ln()).collect();
    let mut scratch = vec![0.0; k];
    for (i, row) in data.rows().enumerate() {
        log_theta.class_log_weights(&ln_pi, row, &all_vars, &mut scratch);
        if scratch.iter().all(|w| *w == f64::NEG_INFINITY) {
            return Err(Error::numeric(
                "dpmpm class assignment",
                format!("record {} has zero likelihood under every class", i + 1),
            ));
        }
        state.z[i] = sample_log_categorical(rng, &mut scratch);
    }

    // (b) sticks and (c) concentration
    let mut occupancy = vec![0usize; k];
    state.z.iter().for_each(|&c| occupancy[c] += 1);
    let (beta, pi, alpha) = update_sticks(rng, &occupancy, state.alpha, hyper.a_alpha, hyper.b_alpha);
    state.beta = beta;
    state.pi = pi;
    state.alpha = alpha;

    // (d) per-class level probabilities
    let mut counts: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|_| hyper.dirichlet_a.clone())
        .collect();
    for (row, &c) in data.rows().zip(&state.z) {
        for (j, &x) in row.iter().enumerate() {
            counts[c][j][x as usize] += 1.0;
        }
    }
    for (c, per_class) in counts.iter().enumerate() {
        for (j, a) in per_class.iter().enumerate() {
            state.theta[c][j] = sample_dirichlet(rng, a)?;
        }
    }
    state.iteration += 1;
    Ok(())
}

/// How the latent class of each record is chosen when generating its synthetic value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthesisMode {
    /// Class drawn from `pi_k * prod_{j in keys} theta_k(x_ij)`: conditions on the released
    /// keys, never on the record's true sensitive value.
    #[default]
    FullConditionalKeys,
    /// Class drawn from `pi` alone.
    Marginal,
    /// Class taken from the chain's current assignment (which saw the true value).
    ChainState,
}

impl fmt::Display for SynthesisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthesisMode::FullConditionalKeys => "full-conditional-keys",
            SynthesisMode::Marginal => "marginal",
            SynthesisMode::ChainState => "chain-state",
        })
    }
}

impl FromStr for SynthesisMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-conditional-keys" => Ok(SynthesisMode::FullConditionalKeys),
            "marginal" => Ok(SynthesisMode::Marginal),
            "chain-state" => Ok(SynthesisMode::ChainState),
            other => Err(Error::Config(format!("unknown synthesis mode `{other}`"))),
        }
    }
}

/// Replaces the sensitive column with draws from the current state.
pub fn dpmpm_synthesize<R: Rng + ?Sized>(
    state: &DpmpmState,
    data: &CategoricalDataset,
    mode: SynthesisMode,
    rng: &mut R,
) -> Result<CategoricalDataset> {
    let k = state.k();
    let s = data.schema().sensitive_index();
    let keys = data.schema().key_indices();
    let log_theta = LogTheta::new(state);
    let ln_pi: Vec<f64> = state.pi.iter().map(|p| p.ln()).collect();
    let mut scratch = vec![0.0; k];
    let mut synthetic = Vec::with_capacity(data.n());
    for (i, row) in data.rows().enumerate() {
        let class = match mode {
            SynthesisMode::FullConditionalKeys => {
                log_theta.class_log_weights(&ln_pi, row, keys, &mut scratch);
                sample_log_categorical(rng, &mut scratch)
            }
            SynthesisMode::Marginal => {
                scratch.copy_from_slice(&ln_pi);
                sample_log_categorical(rng, &mut scratch)
            }
            SynthesisMode::ChainState => state.z[i],
        };
        let pmf = &state.theta[class][s];
        let total: f64 = pmf.iter().sum();
        synthetic.push(crate::prob::categorical_with_total(rng, pmf, total) as u16);
    }
    data.with_sensitive_column(&synthetic)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpmpmTraceRow {
    pub iteration: usize,
    pub occupied_classes: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DpmpmDiagnostics {
    pub burn_in: usize,
    pub trace: Vec<DpmpmTraceRow>,
}

impl DpmpmDiagnostics {
    fn post_burn_in(&self) -> impl Iterator<Item = &DpmpmTraceRow> {
        self.trace.iter().filter(move |r| r.iteration > self.burn_in)
    }

    /// Most frequent post-burn-in occupied-class count (smallest on ties).
    pub fn occupied_mode(&self) -> Option<usize> {
        let counts = self
            .post_burn_in()
            .fold(std::collections::BTreeMap::new(), |mut acc, r| {
                *acc.entry(r.occupied_classes).or_insert(0usize) += 1;
                acc
            });
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
    }

    /// Empirical central interval of the post-burn-in occupied-class counts.
    pub fn occupied_interval(&self, level: f64) -> Option<(usize, usize)> {
        let mut xs: Vec<usize> = self.post_burn_in().map(|r| r.occupied_classes).collect();
        if xs.is_empty() {
            return None;
        }
        xs.sort_unstable();
        let tail = (1.0 - level) / 2.0;
        let at = |q: f64| xs[((q * (xs.len() - 1) as f64).round() as usize).min(xs.len() - 1)];
        Some((at(tail), at(1.0 - tail)))
    }

    /// Delimiter-separated trace: `iteration,occupied_classes,alpha`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,occupied_classes,alpha\n");
        for r in &self.trace {
            out.push_str(&format!("{},{},{}\n", r.iteration, r.occupied_classes, r.alpha));
        }
        out
    }
}

/// Runs one chain and generates `shape.m` replicates from evenly spaced post-burn-in states.
///
/// The chain uses stream [`streams::CHAIN`]; replicate `l` is drawn with stream
/// [`streams::replicate`]`(l)`, both under `seed`.
pub fn dpmpm_run(
    data: &CategoricalDataset,
    hyper: &DpmpmHyper,
    shape: RunShape,
    mode: SynthesisMode,
    seed: u64,
) -> Result<(SyntheticBundle, DpmpmDiagnostics)> {
    let selected = shape.selected_iterations()?;
    let mut rng = RngStream::new(seed, streams::CHAIN);
    let mut state = dpmpm_init(data, hyper, &mut rng)?;
    let mut diagnostics = DpmpmDiagnostics {
        burn_in: shape.burn_in,
        trace: Vec::with_capacity(shape.iterations),
    };
    let mut replicates = Vec::with_capacity(shape.m);
    let mut next = selected.iter().peekable();
    for _ in 0..shape.iterations {
        dpmpm_sweep(&mut state, data, hyper, &mut rng)?;
        diagnostics.trace.push(DpmpmTraceRow {
            iteration: state.iteration,
            occupied_classes: occupied_classes(&state),
            alpha: state.alpha,
        });
        if next.peek() == Some(&&state.iteration) {
            next.next();
            let mut synth_rng = RngStream::new(seed, streams::replicate(replicates.len()));
            replicates.push(dpmpm_synthesize(&state, data, mode, &mut synth_rng)?);
        }
        if state.iteration % 1000 == 0 {
            log::debug!(
                "dpmpm iteration {} occupied {} alpha {:.3}",
                state.iteration,
                occupied_classes(&state),
                state.alpha
            );
        }
    }
    Ok((
        SyntheticBundle {
            synthesizer: Synthesizer::Dpmpm,
            seed,
            source_iterations: selected,
            replicates,
        },
        diagnostics,
    ))
}
