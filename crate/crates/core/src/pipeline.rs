//! Subcommand bodies: simulate, synthesize, audit and bounds over one output directory.
//!
//! Layout of `output_dir`:
//!
//! ```text
//! manifest.json
//! data.csv, schema.json, truth.json        simulate
//! replicates/replicate_NN.csv              synthesize
//! trace.csv, diagnostics.json              synthesize
//! audit/utility.json, deviations.csv, signed_deviations.csv, pattern_pmfs.csv,
//!       risk.json, identification.csv, attribute.csv
//! bounds/{min,max}.json, {min,max}_iterations.csv, {min,max}_histograms.csv
//! ```
//!
//! Outputs carry no timestamps or absolute paths, so equal configs give equal bytes.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};

use crate::bounds::{bounds_run, BoundsReport, Scenario};
use crate::config::{BoundsBlock, DpArealBlock, DpmpmBlock, RunConfig};
use crate::data::{load_dataset, write_dataset, CategoricalDataset, Schema};
use crate::dpmpm::dpmpm_run;
use crate::error::{Error, Result};
use crate::risk::{risk_report, KnownCase, RiskReport};
use crate::simulate::{simulate, write_simulation, GeneratorSpec};
use crate::synth::{SyntheticBundle, Synthesizer};
use crate::utility::{utility_report, UtilityReport};
use crate::areal::dp_areal_run;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Effective settings after defaults and overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSettings {
    pub synthesizer: Synthesizer,
    pub m: usize,
    pub seed: u64,
    pub dpmpm: DpmpmBlock,
    pub dp_areal: DpArealBlock,
    pub bounds: BoundsBlock,
    /// Known-variable cases; empty until a schema is available.
    pub known_cases: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRecord {
    pub seed: u64,
    pub spec: GeneratorSpec,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizeRecord {
    pub synthesizer: Synthesizer,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub k: usize,
    pub m: usize,
    pub source_iterations: Vec<usize>,
    /// Relative to the output directory.
    pub replicate_files: Vec<String>,
    pub trace_file: String,
    pub diagnostics_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub m: usize,
    pub known_cases: Vec<Vec<String>>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRecord {
    #[serde(rename = "S")]
    pub s: usize,
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
    pub known_cases: Vec<Vec<String>>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// File names only.
    pub input: Option<String>,
    pub schema: Option<String>,
    pub settings: ResolvedSettings,
    pub simulate: Option<SimulateRecord>,
    pub synthesize: Option<SynthesizeRecord>,
    pub audit: Option<AuditRecord>,
    pub bounds: Option<BoundsRecord>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
    }
}

fn file_name(path: &Option<PathBuf>) -> Option<String> {
    path.as_ref()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
}

fn settings(cfg: &RunConfig, cases: &[KnownCase]) -> ResolvedSettings {
    ResolvedSettings {
        synthesizer: cfg.synthesizer,
        m: cfg.m,
        seed: cfg.seed,
        dpmpm: cfg.dpmpm.clone(),
        dp_areal: cfg.dp_areal.clone(),
        bounds: cfg.bounds.clone(),
        known_cases: cases.iter().map(|c| c.names.clone()).collect(),
    }
}

/// Merge this command's section into the directory's manifest, keeping the others.
fn update_manifest(
    cfg: &RunConfig,
    cases: &[KnownCase],
    edit: impl FnOnce(&mut Manifest),
) -> Result<Manifest> {
    let dir = &cfg.output_dir;
    let mut manifest = Manifest::load(dir).unwrap_or(Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        input: None,
        schema: None,
        settings: settings(cfg, cases),
        simulate: None,
        synthesize: None,
        audit: None,
        bounds: None,
    });
    if cfg.input.is_some() {
        manifest.input = file_name(&cfg.input);
        manifest.schema = file_name(&cfg.schema);
    }
    let known = if cases.is_empty() {
        manifest.settings.known_cases.clone()
    } else {
        cases.iter().map(|c| c.names.clone()).collect()
    };
    manifest.settings = ResolvedSettings {
        known_cases: known,
        ..settings(cfg, &[])
    };
    edit(&mut manifest);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(dir, MANIFEST_FILE, &(json + "\n"))?;
    Ok(manifest)
}

fn write_text(dir: &Path, rel: &str, text: &str) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn write_json<T: Serialize>(dir: &Path, rel: &str, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("report serializes");
    write_text(dir, rel, &(json + "\n"))
}

/// Original data and settings validated before any computation.
struct Prepared {
    data: CategoricalDataset,
    cases: Vec<KnownCase>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate_settings()?;
    let schema_path = cfg.schema_path()?;
    let input_path = cfg.input_path()?;
    let schema = Arc::new(Schema::load(&schema_path)?);
    let cases = cfg.known_cases(&schema)?;
    let data = load_dataset(&input_path, schema)?;
    if data.n() == 0 {
        return Err(Error::Schema(format!(
            "{} holds no records",
            input_path.display()
        )));
    }
    Ok(Prepared { data, cases })
}

pub fn replicate_file(l: usize, m: usize) -> String {
    let width = m.to_string().len().max(2);
    format!("replicates/replicate_{:0width$}.csv", l + 1)
}

pub const TRACE_FILE: &str = "trace.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

/// Generate a dataset from the configured (or default) latent-class generator.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateRecord> {
    let spec = cfg.simulate.clone().unwrap_or_default();
    spec.validate()?;
    let seed = spec.seed.unwrap_or(cfg.seed);
    info!("simulating {} records with {} classes", spec.n, spec.classes);
    let (data, truth) = simulate(&spec, seed)?;
    write_simulation(&cfg.output_dir, &data, &truth)?;
    let record = SimulateRecord {
        seed,
        spec: truth.spec.clone(),
        files: vec![
            crate::simulate::DATA_FILE.to_string(),
            crate::simulate::SCHEMA_FILE.to_string(),
            crate::simulate::TRUTH_FILE.to_string(),
        ],
    };
    let cases = crate::risk::default_known_cases(data.schema());
    update_manifest(cfg, &cases, |m| m.simulate = Some(record.clone()))?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub synthesizer: Synthesizer,
    pub burn_in: usize,
    pub occupied_mode: Option<usize>,
    pub occupied_interval_95: Option<(usize, usize)>,
    pub final_alpha: Option<f64>,
    /// DP-areal only.
    pub max_normalization_error: Option<f64>,
    pub lambda_acceptance: Option<f64>,
}

fn mode_and_interval(occupied: &[usize]) -> (Option<usize>, Option<(usize, usize)>) {
    if occupied.is_empty() {
        return (None, None);
    }
    let mut xs = occupied.to_vec();
    xs.sort_unstable();
    let mut best = (xs[0], 0usize);
    let mut i = 0;
    while i < xs.len() {
        let j = xs[i..].iter().take_while(|&&x| x == xs[i]).count();
        if j > best.1 {
            best = (xs[i], j);
        }
        i += j;
    }
    let at = |q: f64| xs[((q * (xs.len() - 1) as f64).round() as usize).min(xs.len() - 1)];
    (Some(best.0), Some((at(0.025), at(0.975))))
}

/// Fit the configured synthesizer and write `m` replicates, the trace and diagnostics.
pub fn cmd_synthesize(cfg: &RunConfig) -> Result<(SyntheticBundle, SynthesizeRecord)> {
    let Prepared { data, cases } = prepare(cfg)?;
    let (bundle, trace, summary, shape, k) = match cfg.synthesizer {
        Synthesizer::Dpmpm => {
            let hyper = cfg.dpmpm.hyper(data.schema());
            hyper.validate(data.schema())?;
            let shape = cfg.dpmpm_shape();
            info!("dpmpm: {} iterations, burn-in {}, K = {}", shape.iterations, shape.burn_in, hyper.k);
            let (bundle, diag) = dpmpm_run(&data, &hyper, shape, cfg.dpmpm.synthesis_mode, cfg.seed)?;
            let summary = DiagnosticsSummary {
                synthesizer: Synthesizer::Dpmpm,
                burn_in: diag.burn_in,
                occupied_mode: diag.occupied_mode(),
                occupied_interval_95: diag.occupied_interval(0.95),
                final_alpha: diag.trace.last().map(|r| r.alpha),
                max_normalization_error: None,
                lambda_acceptance: None,
            };
            (bundle, diag.to_csv(), summary, shape, hyper.k)
        }
        Synthesizer::DpAreal => {
            let hyper = cfg.dp_areal.hyper();
            hyper.validate()?;
            let shape = cfg.dp_areal_shape();
            info!("dp-areal: {} iterations, burn-in {}, K = {}", shape.iterations, shape.burn_in, hyper.k);
            let (bundle, diag) = dp_areal_run(&data, &hyper, shape, cfg.seed)?;
            let occupied: Vec<usize> = diag
                .trace
                .iter()
                .filter(|r| r.iteration > diag.burn_in)
                .map(|r| r.occupied_clusters)
                .collect();
            let (occupied_mode, occupied_interval_95) = mode_and_interval(&occupied);
            let summary = DiagnosticsSummary {
                synthesizer: Synthesizer::DpAreal,
                burn_in: diag.burn_in,
                occupied_mode,
                occupied_interval_95,
                final_alpha: diag.trace.last().map(|r| r.alpha),
                max_normalization_error: Some(diag.max_normalization_error),
                lambda_acceptance: Some(diag.lambda_acceptance),
            };
            (bundle, diag.to_csv(), summary, shape, hyper.k)
        }
    };
    let dir = &cfg.output_dir;
    let mut files = Vec::with_capacity(bundle.len());
    for (l, rep) in bundle.replicates.iter().enumerate() {
        let rel = replicate_file(l, bundle.len());
        let path = dir.join(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_dataset(&path, rep, Some(&bundle.provenance(l)))?;
        files.push(rel);
    }
    write_text(dir, TRACE_FILE, &trace)?;
    write_json(dir, DIAGNOSTICS_FILE, &summary)?;
    let record = SynthesizeRecord {
        synthesizer: bundle.synthesizer,
        seed: bundle.seed,
        iterations: shape.iterations,
        burn_in: shape.burn_in,
        k,
        m: shape.m,
        source_iterations: bundle.source_iterations.clone(),
        replicate_files: files,
        trace_file: TRACE_FILE.to_string(),
        diagnostics_file: DIAGNOSTICS_FILE.to_string(),
    };
    update_manifest(cfg, &cases, |m| {
        m.synthesize = Some(record.clone());
        // earlier audit results describe a different bundle
        m.audit = None;
    })?;
    Ok((bundle, record))
}

/// Replicates listed by the manifest in `cfg.output_dir`, checked against `original`.
pub fn load_bundle(cfg: &RunConfig, original: &CategoricalDataset) -> Result<Vec<CategoricalDataset>> {
    let manifest = Manifest::load(&cfg.output_dir).map_err(|e| {
        Error::Config(format!(
            "no synthesized bundle in {} ({e}); run synthesize first",
            cfg.output_dir.display()
        ))
    })?;
    let record = manifest.synthesize.ok_or_else(|| {
        Error::Config(format!(
            "manifest in {} lists no replicates; run synthesize first",
            cfg.output_dir.display()
        ))
    })?;
    record
        .replicate_files
        .iter()
        .map(|rel| {
            let path = cfg.output_dir.join(rel);
            let rep = load_dataset(&path, original.schema_arc().clone())?;
            if rep.n() != original.n() || !rep.keys_identical(original) {
                return Err(Error::Schema(format!(
                    "{} does not match the original keys",
                    path.display()
                )));
            }
            Ok(rep)
        })
        .collect()
}

pub const AUDIT_FILES: [&str; 7] = [
    "audit/utility.json",
    "audit/deviations.csv",
    "audit/signed_deviations.csv",
    "audit/pattern_pmfs.csv",
    "audit/risk.json",
    "audit/identification.csv",
    "audit/attribute.csv",
];

/// Utility and risk reports of the synthesized bundle against the original.
pub fn cmd_audit(cfg: &RunConfig) -> Result<(UtilityReport, RiskReport)> {
    let Prepared { data, cases } = prepare(cfg)?;
    let replicates = load_bundle(cfg, &data)?;
    audit_bundle(cfg, &data, &replicates, &cases)
}

/// Audit an in-memory bundle and write the report files.
pub fn audit_bundle(
    cfg: &RunConfig,
    original: &CategoricalDataset,
    replicates: &[CategoricalDataset],
    cases: &[KnownCase],
) -> Result<(UtilityReport, RiskReport)> {
    info!("auditing {} replicates", replicates.len());
    let utility = utility_report(original, replicates)?;
    let risk = risk_report(original, replicates, cases)?;
    let dir = &cfg.output_dir;
    write_json(dir, AUDIT_FILES[0], &utility)?;
    write_text(dir, AUDIT_FILES[1], &utility.deviations_csv())?;
    write_text(dir, AUDIT_FILES[2], &utility.signed_deviations_csv())?;
    write_text(dir, AUDIT_FILES[3], &utility.pattern_pmfs_csv())?;
    write_json(dir, AUDIT_FILES[4], &risk)?;
    write_text(dir, AUDIT_FILES[5], &risk.identification_csv())?;
    write_text(dir, AUDIT_FILES[6], &risk.attribute_csv())?;
    let record = AuditRecord {
        m: replicates.len(),
        known_cases: cases.iter().map(|c| c.names.clone()).collect(),
        files: AUDIT_FILES.iter().map(|f| f.to_string()).collect(),
    };
    update_manifest(cfg, cases, |m| m.audit = Some(record))?;
    Ok((utility, risk))
}

pub fn bounds_files(scenario: Scenario) -> [String; 3] {
    [
        format!("bounds/{scenario}.json"),
        format!("bounds/{scenario}_iterations.csv"),
        format!("bounds/{scenario}_histograms.csv"),
    ]
}

/// Min/max resampling scenarios on the original data.
pub fn cmd_bounds(cfg: &RunConfig) -> Result<Vec<BoundsReport>> {
    let Prepared { data, cases } = prepare(cfg)?;
    let mut reports = Vec::with_capacity(cfg.bounds.scenarios.len());
    let mut files = Vec::new();
    for &scenario in &cfg.bounds.scenarios {
        info!("bounds: {scenario} scenario, S = {}", cfg.bounds.s);
        let report = bounds_run(&data, scenario, cfg.bounds.s, &cases, cfg.seed)?;
        let [json, iters, hist] = bounds_files(scenario);
        write_json(&cfg.output_dir, &json, &report)?;
        write_text(&cfg.output_dir, &iters, &report.iterations_csv())?;
        write_text(&cfg.output_dir, &hist, &report.histograms_csv())?;
        files.extend([json, iters, hist]);
        reports.push(report);
    }
    let record = BoundsRecord {
        s: cfg.bounds.s,
        seed: cfg.seed,
        scenarios: cfg.bounds.scenarios.clone(),
        known_cases: cases.iter().map(|c| c.names.clone()).collect(),
        files,
    };
    update_manifest(cfg, &cases, |m| m.bounds = Some(record))?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replicate_names_are_padded() {
        assert_eq!(replicate_file(0, 3), "replicates/replicate_01.csv");
        assert_eq!(replicate_file(99, 100), "replicates/replicate_100.csv");
        assert_eq!(replicate_file(4, 100), "replicates/replicate_005.csv");
    }

    #[test]
    fn mode_and_interval_of_counts() {
        let (mode, interval) = mode_and_interval(&[3, 4, 4, 5, 4, 3]);
        assert_eq!(mode, Some(4));
        assert_eq!(interval, Some((3, 5)));
        assert_eq!(mode_and_interval(&[]), (None, None));
    }
}
