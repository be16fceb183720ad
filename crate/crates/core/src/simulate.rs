//! Finite latent-class generator for test and demo datasets with known ground truth.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{write_dataset, CategoricalDataset, Schema, Variable};
use crate::error::{Error, Result};
use crate::prob::{sample_categorical, sample_dirichlet, streams, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub levels: usize,
}

fn default_weight_concentration() -> f64 {
    1.0
}

/// Records are drawn from `classes` latent classes with Dirichlet(`weight_concentration`)
/// class weights and independent Dirichlet(`concentration`) pmfs per class and variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n: usize,
    pub keys: Vec<VariableSpec>,
    pub sensitive: VariableSpec,
    pub classes: usize,
    pub concentration: f64,
    #[serde(default = "default_weight_concentration")]
    pub weight_concentration: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for GeneratorSpec {
    /// Survey-shaped default: 2/4/5-level keys, 133 counties, 6208 records.
    fn default() -> Self {
        let var = |name: &str, levels| VariableSpec {
            name: name.to_string(),
            levels,
        };
        GeneratorSpec {
            n: 6208,
            keys: vec![var("gender", 2), var("income", 4), var("age", 5)],
            sensitive: var("county", 133),
            classes: 10,
            concentration: 1.0,
            weight_concentration: 1.0,
            seed: None,
        }
    }
}

impl GeneratorSpec {
    pub fn schema(&self) -> Result<Schema> {
        let mut vars: Vec<Variable> = self
            .keys
            .iter()
            .map(|v| Variable::key(v.name.clone(), v.levels))
            .collect();
        vars.push(Variable::sensitive(
            self.sensitive.name.clone(),
            self.sensitive.levels,
        ));
        Schema::new(vars).map_err(|e| Error::Config(format!("generator schema: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("generator needs n >= 1".into());
        }
        if self.classes == 0 {
            return bad("generator needs C >= 1 latent classes".into());
        }
        if self.sensitive.levels < 2 {
            return bad(format!("generator needs G >= 2, got {}", self.sensitive.levels));
        }
        if self.keys.is_empty() {
            return bad("generator needs at least one key variable".into());
        }
        for (what, c) in [
            ("concentration", self.concentration),
            ("weight_concentration", self.weight_concentration),
        ] {
            if !(c.is_finite() && c > 0.0) {
                return bad(format!("generator {what} must be positive, got {c}"));
            }
        }
        self.schema().map(|_| ())
    }
}

/// Exact generating parameters of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTruth {
    pub spec: GeneratorSpec,
    pub seed: u64,
    pub weights: Vec<f64>,
    /// `pmfs[c][j][level]` in schema variable order (keys first, sensitive last).
    pub pmfs: Vec<Vec<Vec<f64>>>,
}

impl GeneratorTruth {
    /// Conditional pmf of the sensitive variable given 0-based key codes (schema key order).
    pub fn conditional_sensitive_pmf(&self, keys: &[u16]) -> Vec<f64> {
        let p = self.spec.keys.len();
        let g = self.spec.sensitive.levels;
        let mut out = vec![0.0; g];
        for (c, w) in self.weights.iter().enumerate() {
            let mut joint = *w;
            for (j, &k) in keys.iter().enumerate() {
                joint *= self.pmfs[c][j][k as usize];
            }
            for (l, o) in out.iter_mut().enumerate() {
                *o += joint * self.pmfs[c][p][l];
            }
        }
        let total: f64 = out.iter().sum();
        if total > 0.0 {
            out.iter_mut().for_each(|o| *o /= total);
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Draw parameters and `spec.n` records on the simulation stream of `seed`.
pub fn simulate(spec: &GeneratorSpec, seed: u64) -> Result<(CategoricalDataset, GeneratorTruth)> {
    spec.validate()?;
    let schema = Arc::new(spec.schema()?);
    let mut rng = RngStream::new(seed, streams::SIMULATE);
    let weights = sample_dirichlet(&mut rng, &vec![spec.weight_concentration; spec.classes])?;
    let pmfs = (0..spec.classes)
        .map(|_| {
            schema
                .variables()
                .iter()
                .map(|v| sample_dirichlet(&mut rng, &vec![spec.concentration; v.levels]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let c = sample_categorical(&mut rng, &weights)?;
        let row = pmfs[c]
            .iter()
            .map(|pmf| sample_categorical(&mut rng, pmf).map(|l| l as u16))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let data = CategoricalDataset::from_rows(schema, rows)?;
    let mut spec = spec.clone();
    spec.seed = Some(seed);
    Ok((
        data,
        GeneratorTruth {
            spec,
            seed,
            weights,
            pmfs,
        },
    ))
}

pub const DATA_FILE: &str = "data.csv";
pub const SCHEMA_FILE: &str = "schema.json";
pub const TRUTH_FILE: &str = "truth.json";

/// Write `data.csv`, `schema.json` and `truth.json` into `dir`.
pub fn write_simulation(
    dir: impl AsRef<Path>,
    data: &CategoricalDataset,
    truth: &GeneratorTruth,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let provenance = format!(
        "simulated latent-class generator seed={} n={} classes={}",
        truth.seed,
        data.n(),
        truth.spec.classes
    );
    write_dataset(dir.join(DATA_FILE), data, Some(&provenance))?;
    let schema_path = dir.join(SCHEMA_FILE);
    std::fs::write(&schema_path, data.schema().to_json()).map_err(|e| Error::io(&schema_path, e))?;
    let truth_path = dir.join(TRUTH_FILE);
    let json = serde_json::to_string_pretty(truth).expect("truth serializes");
    std::fs::write(&truth_path, json + "\n").map_err(|e| Error::io(&truth_path, e))
}
