//! Types shared by both synthesizers: run shapes, replicate selection and bundles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Synthesizer {
    Dpmpm,
    DpAreal,
}

impl fmt::Display for Synthesizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Synthesizer::Dpmpm => "dpmpm",
            Synthesizer::DpAreal => "dp-areal",
        })
    }
}

impl FromStr for Synthesizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dpmpm" => Ok(Synthesizer::Dpmpm),
            "dp-areal" => Ok(Synthesizer::DpAreal),
            other => Err(Error::Config(format!("unknown synthesizer `{other}`"))),
        }
    }
}

/// Iteration budget of one chain and the number of replicates drawn from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunShape {
    pub iterations: usize,
    pub burn_in: usize,
    pub m: usize,
}

impl RunShape {
    pub fn new(iterations: usize, burn_in: usize, m: usize) -> Self {
        RunShape {
            iterations,
            burn_in,
            m,
        }
    }

    /// 1-based iterations whose states generate the replicates: evenly spaced after burn-in,
    /// `floor((iterations - burn_in) / m)` apart, the last one at or before the final iteration.
    pub fn selected_iterations(&self) -> Result<Vec<usize>> {
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        let available = self.iterations - self.burn_in;
        let spacing = available / self.m;
        if spacing == 0 {
            return Err(Error::Config(format!(
                "m = {} exceeds the {available} post-burn-in states",
                self.m
            )));
        }
        Ok((1..=self.m).map(|l| self.burn_in + l * spacing).collect())
    }
}

/// `m` replicate datasets that differ from the original only in the sensitive column.
#[derive(Debug, Clone)]
pub struct SyntheticBundle {
    pub synthesizer: Synthesizer,
    pub seed: u64,
    /// Chain iteration that produced each replicate.
    pub source_iterations: Vec<usize>,
    pub replicates: Vec<CategoricalDataset>,
}

impl SyntheticBundle {
    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    /// Provenance line written at the top of replicate file `l` (0-based).
    pub fn provenance(&self, l: usize) -> String {
        format!(
            "synthesizer={} replicate={} seed={} iteration={}",
            self.synthesizer,
            l + 1,
            self.seed,
            self.source_iterations[l]
        )
    }
}
