//! JSON run configuration shared by every subcommand.
//!
//! Relative paths resolve against the directory holding the config file. Only `seed` is
//! mandatory; omitted blocks take the default run shapes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::areal::{CovarianceMode, DpArealHyper};
use crate::bounds::Scenario;
use crate::data::Schema;
use crate::dpmpm::{DpmpmHyper, SynthesisMode};
use crate::error::{Error, Result};
use crate::risk::{default_known_cases, KnownCase};
use crate::simulate::GeneratorSpec;
use crate::synth::{RunShape, Synthesizer};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "PSYNTH_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpmpmBlock {
    pub iterations: usize,
    pub burn_in: usize,
    pub k: usize,
    pub a_alpha: f64,
    pub b_alpha: f64,
    /// Same Dirichlet concentration on every level of every variable.
    pub dirichlet_a: f64,
    pub synthesis_mode: SynthesisMode,
}

impl Default for DpmpmBlock {
    fn default() -> Self {
        DpmpmBlock {
            iterations: 10_000,
            burn_in: 5_000,
            k: DpmpmHyper::DEFAULT_K,
            a_alpha: DpmpmHyper::DEFAULT_A_ALPHA,
            b_alpha: DpmpmHyper::DEFAULT_B_ALPHA,
            dirichlet_a: 1.0,
            synthesis_mode: SynthesisMode::default(),
        }
    }
}

impl DpmpmBlock {
    pub fn hyper(&self, schema: &Schema) -> DpmpmHyper {
        DpmpmHyper::uniform(schema, self.k, self.a_alpha, self.b_alpha, self.dirichlet_a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpArealBlock {
    pub iterations: usize,
    pub burn_in: usize,
    pub k: usize,
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub covariance_mode: CovarianceMode,
}

impl Default for DpArealBlock {
    fn default() -> Self {
        let h = DpArealHyper::default();
        DpArealBlock {
            iterations: 4_000,
            burn_in: 2_000,
            k: h.k,
            a_alpha: h.a_alpha,
            b_alpha: h.b_alpha,
            covariance_mode: h.covariance,
        }
    }
}

impl DpArealBlock {
    pub fn hyper(&self) -> DpArealHyper {
        DpArealHyper {
            k: self.k,
            a_alpha: self.a_alpha,
            b_alpha: self.b_alpha,
            covariance: self.covariance_mode,
            ..DpArealHyper::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsBlock {
    #[serde(rename = "S")]
    pub s: usize,
    pub scenarios: Vec<Scenario>,
}

impl Default for BoundsBlock {
    fn default() -> Self {
        BoundsBlock {
            s: 100,
            scenarios: vec![Scenario::Min, Scenario::Max],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default = "default_synthesizer")]
    pub synthesizer: Synthesizer,
    #[serde(default)]
    pub dpmpm: DpmpmBlock,
    #[serde(default)]
    pub dp_areal: DpArealBlock,
    #[serde(default = "default_m")]
    pub m: usize,
    pub seed: u64,
    /// Known-variable cases by key name; defaults depend on the schema.
    #[serde(default)]
    pub known_cases: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub bounds: BoundsBlock,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Generator used by `simulate`.
    #[serde(default)]
    pub simulate: Option<GeneratorSpec>,
}

fn default_synthesizer() -> Synthesizer {
    Synthesizer::Dpmpm
}

fn default_m() -> usize {
    20
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("psynth-out")
}

impl RunConfig {
    /// Parse JSON; relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.input.as_mut().map(resolve);
        cfg.schema.as_mut().map(resolve);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    /// Command-line and environment overrides; `None` leaves the configured value.
    pub fn apply_overrides(&mut self, seed: Option<u64>, output_dir: Option<PathBuf>) {
        if let Some(seed) = seed {
            self.seed = seed;
            if let Some(spec) = self.simulate.as_mut() {
                spec.seed = None;
            }
        }
        if let Some(dir) = output_dir {
            self.output_dir = dir;
        }
    }

    pub fn dpmpm_shape(&self) -> RunShape {
        RunShape::new(self.dpmpm.iterations, self.dpmpm.burn_in, self.m)
    }

    pub fn dp_areal_shape(&self) -> RunShape {
        RunShape::new(self.dp_areal.iterations, self.dp_areal.burn_in, self.m)
    }

    fn existing(&self, what: &str, path: &Option<PathBuf>) -> Result<PathBuf> {
        let path = path
            .as_ref()
            .ok_or_else(|| Error::Config(format!("`{what}` path is required")))?;
        if !path.is_file() {
            return Err(Error::Config(format!(
                "`{what}` path {} does not exist",
                path.display()
            )));
        }
        Ok(path.clone())
    }

    pub fn input_path(&self) -> Result<PathBuf> {
        self.existing("input", &self.input)
    }

    pub fn schema_path(&self) -> Result<PathBuf> {
        self.existing("schema", &self.schema)
    }

    /// Configured known-variable cases, or the schema defaults.
    pub fn known_cases(&self, schema: &Schema) -> Result<Vec<KnownCase>> {
        match &self.known_cases {
            None => Ok(default_known_cases(schema)),
            Some(cases) if cases.is_empty() => {
                Err(Error::Config("known_cases must not be empty".into()))
            }
            Some(cases) => cases
                .iter()
                .map(|c| {
                    KnownCase::resolve(schema, c)
                        .map_err(|e| Error::Config(format!("known_cases: {e}")))
                })
                .collect(),
        }
    }

    /// Checks that do not need the data: run shapes, hyper-parameters, bounds.
    pub fn validate_settings(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::Config(_) | Error::Unimplemented(_) => e,
            other => Error::Config(other.to_string()),
        };
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        match self.synthesizer {
            Synthesizer::Dpmpm => {
                self.dpmpm_shape().selected_iterations().map_err(cfg_err)?;
                if !(self.dpmpm.dirichlet_a.is_finite() && self.dpmpm.dirichlet_a > 0.0) {
                    return Err(Error::Config("dpmpm.dirichlet_a must be positive".into()));
                }
            }
            Synthesizer::DpAreal => {
                self.dp_areal_shape().selected_iterations().map_err(cfg_err)?;
                self.dp_areal.hyper().validate().map_err(cfg_err)?;
            }
        }
        if self.bounds.s == 0 {
            return Err(Error::Config("bounds.S must be at least 1".into()));
        }
        if self.bounds.scenarios.is_empty() {
            return Err(Error::Config("bounds.scenarios must not be empty".into()));
        }
        Ok(())
    }
}
