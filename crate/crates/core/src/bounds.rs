//! Minimum and maximum inherent-risk scenarios obtained by repeated pseudo-synthesis.
//!
//! The max scenario redraws each record's sensitive value from the empirical distribution of
//! its key pattern (the record included). The min scenario draws uniformly over all labels.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{full_pattern_index, CategoricalDataset, PatternIndex};
use crate::error::{Error, Result};
use crate::prob::{streams, RngStream};
use crate::risk::{
    attribute_disclosures, fmt_rate, match_statistics, IdentificationSummary, KnownCase, Range,
};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Min,
    Max,
}

impl Scenario {
    fn stream_tag(self) -> u64 {
        match self {
            Scenario::Min => 1,
            Scenario::Max => 2,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Min => "min",
            Scenario::Max => "max",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Scenario::Min),
            "max" => Ok(Scenario::Max),
            other => Err(Error::invalid(format!("unknown scenario `{other}`"))),
        }
    }
}

fn check_patterns(original: &CategoricalDataset, patterns: &PatternIndex) -> Result<()> {
    let keys = original.schema().key_indices();
    if patterns.key_vars() != keys
        || patterns.patterns().iter().map(|p| p.records.len()).sum::<usize>() != original.n()
    {
        return Err(Error::invalid(
            "resampling needs the pattern index over the full key set of this dataset",
        ));
    }
    Ok(())
}

/// Redraw each sensitive value from its pattern's empirical pmf; keys are unchanged.
pub fn resample_max<R: Rng + ?Sized>(
    original: &CategoricalDataset,
    patterns: &PatternIndex,
    rng: &mut R,
) -> Result<CategoricalDataset> {
    check_patterns(original, patterns)?;
    let s = original.schema().sensitive_index();
    let mut values = vec![0u16; original.n()];
    for pattern in patterns.patterns() {
        let members = &pattern.records;
        for &i in members {
            // a uniformly chosen member's label is a draw from the empirical pmf
            let donor = members[rng.random_range(0..members.len())];
            values[i] = original.value(donor, s);
        }
    }
    original.with_sensitive_column(&values)
}

/// Redraw each sensitive value uniformly over the first `g` labels; keys are unchanged.
pub fn resample_min<R: Rng + ?Sized>(
    original: &CategoricalDataset,
    patterns: &PatternIndex,
    rng: &mut R,
    g: usize,
) -> Result<CategoricalDataset> {
    check_patterns(original, patterns)?;
    let levels = original.schema().sensitive_levels();
    if g < 2 || g > levels {
        return Err(Error::invalid(format!(
            "uniform resampling needs 2 <= G <= {levels}, got {g}"
        )));
    }
    let values: Vec<u16> = (0..original.n())
        .map(|_| rng.random_range(0..g) as u16)
        .collect();
    original.with_sensitive_column(&values)
}

/// Risk summaries of one resampling iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    /// 1-based.
    pub iteration: usize,
    /// One summary per known-variable case, in case order.
    pub cases: Vec<IdentificationSummary>,
    pub attribute_count: usize,
    pub attribute_proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins spanning the observed range; `None` for no values. A degenerate
    /// range is widened to `value +- 0.5`.
    pub fn equal_width(values: &[f64], bins: usize) -> Option<Histogram> {
        if values.is_empty() || bins == 0 {
            return None;
        }
        let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|b| lo + b as f64 * width).collect();
        edges.push(hi);
        let mut counts = vec![0usize; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Some(Histogram { edges, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Whether the scenario's value bounds acceptable risk from above or below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundRole {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub bound: BoundRole,
    /// `None` when the metric is undefined in every iteration.
    pub range: Option<Range>,
    pub histogram: Option<Histogram>,
}

impl MetricSummary {
    fn new(metric: &str, bound: BoundRole, values: Vec<f64>) -> Self {
        MetricSummary {
            metric: metric.to_string(),
            bound,
            range: Range::of(values.iter().copied()),
            histogram: Histogram::equal_width(&values, HISTOGRAM_BINS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub known: Vec<String>,
    pub expected_risk: MetricSummary,
    pub true_match_rate: MetricSummary,
    pub false_match_rate: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub scenario: Scenario,
    #[serde(rename = "S")]
    pub s: usize,
    pub seed: u64,
    pub iterations: Vec<IterationRow>,
    pub cases: Vec<CaseSummary>,
    pub attribute_count: MetricSummary,
}

fn roles(scenario: Scenario) -> (BoundRole, BoundRole) {
    // (risk-like metrics, false match rate)
    match scenario {
        Scenario::Max => (BoundRole::Upper, BoundRole::Lower),
        Scenario::Min => (BoundRole::Lower, BoundRole::Upper),
    }
}

/// `s_iter` resampling iterations of `scenario`, each on its own stream of `seed`, with the
/// full risk suite per iteration.
pub fn bounds_run(
    original: &CategoricalDataset,
    scenario: Scenario,
    s_iter: usize,
    known_cases: &[KnownCase],
    seed: u64,
) -> Result<BoundsReport> {
    if s_iter == 0 {
        return Err(Error::invalid("bounds need S >= 1"));
    }
    let patterns = full_pattern_index(original);
    let g = original.schema().sensitive_levels();
    let iterations = (0..s_iter)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::new(seed, streams::bounds(scenario.stream_tag(), t));
            let synth = match scenario {
                Scenario::Max => resample_max(original, &patterns, &mut rng)?,
                Scenario::Min => resample_min(original, &patterns, &mut rng, g)?,
            };
            let cases = known_cases
                .iter()
                .map(|c| {
                    match_statistics(original, &synth, &c.vars)
                        .map(|st| IdentificationSummary::from_stats(&st))
                })
                .collect::<Result<Vec<_>>>()?;
            let (attribute_count, attribute_proportion) = attribute_disclosures(original, &synth)?;
            Ok(IterationRow {
                iteration: t + 1,
                cases,
                attribute_count,
                attribute_proportion,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (risk_role, fmr_role) = roles(scenario);
    let cases = known_cases
        .iter()
        .enumerate()
        .map(|(c, case)| {
            let col = |f: &dyn Fn(&IdentificationSummary) -> Option<f64>| -> Vec<f64> {
                iterations.iter().filter_map(|r| f(&r.cases[c])).collect()
            };
            CaseSummary {
                known: case.names.clone(),
                expected_risk: MetricSummary::new(
                    "expected_risk",
                    risk_role,
                    col(&|s| Some(s.expected_risk)),
                ),
                true_match_rate: MetricSummary::new(
                    "true_match_rate",
                    risk_role,
                    col(&|s| Some(s.true_match_rate)),
                ),
                false_match_rate: MetricSummary::new(
                    "false_match_rate",
                    fmr_role,
                    col(&|s| s.false_match_rate),
                ),
            }
        })
        .collect();
    let attribute_count = MetricSummary::new(
        "attribute_count",
        risk_role,
        iterations.iter().map(|r| r.attribute_count as f64).collect(),
    );
    Ok(BoundsReport {
        scenario,
        s: s_iter,
        seed,
        iterations,
        cases,
        attribute_count,
    })
}

impl BoundsReport {
    /// `scenario,iteration,case,expected_risk,true_match_rate,false_match_rate,attribute_count`.
    pub fn iterations_csv(&self) -> String {
        let mut out = String::from(
            "scenario,iteration,case,expected_risk,true_match_rate,false_match_rate,attribute_count\n",
        );
        for row in &self.iterations {
            for (case, s) in self.cases.iter().zip(&row.cases) {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    self.scenario,
                    row.iteration,
                    case.known.join("+"),
                    s.expected_risk,
                    s.true_match_rate,
                    fmt_rate(s.false_match_rate),
                    row.attribute_count
                ));
            }
        }
        out
    }

    /// `scenario,case,metric,bin_left,bin_right,count`; the attribute count uses case `all`.
    pub fn histograms_csv(&self) -> String {
        let mut out = String::from("scenario,case,metric,bin_left,bin_right,count\n");
        let mut emit = |case: &str, m: &MetricSummary| {
            if let Some(h) = &m.histogram {
                for (b, count) in h.counts.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        self.scenario,
                        case,
                        m.metric,
                        h.edges[b],
                        h.edges[b + 1],
                        count
                    ));
                }
            }
        };
        for case in &self.cases {
            let label = case.known.join("+");
            emit(&label, &case.expected_risk);
            emit(&label, &case.true_match_rate);
            emit(&label, &case.false_match_rate);
        }
        emit("all", &self.attribute_count);
        out
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::{Schema, Variable};

    fn dataset(rows: Vec<Vec<u16>>, g: usize) -> CategoricalDataset {
        let schema = Schema::new(vec![
            Variable::key("gender", 2),
            Variable::key("age", 3),
            Variable::sensitive("county", g),
        ])
        .unwrap();
        CategoricalDataset::from_rows(Arc::new(schema), rows).unwrap()
    }

    #[test]
    fn homogeneous_pattern_resamples_to_itself() {
        let data = dataset(vec![vec![0, 0, 3], vec![0, 0, 3], vec![0, 0, 3], vec![1, 2, 0]], 5);
        let idx = full_pattern_index(&data);
        let mut rng = RngStream::new(1, 0);
        for _ in 0..50 {
            let syn = resample_max(&data, &idx, &mut rng).unwrap();
            assert_eq!(syn.sensitive_column(), data.sensitive_column());
            assert!(syn.keys_identical(&data));
        }
    }

    #[test]
    fn two_record_pattern_is_a_fair_coin() {
        let data = dataset(vec![vec![0, 1, 0], vec![0, 1, 1]], 3);
        let idx = full_pattern_index(&data);
        let mut rng = RngStream::new(9, 0);
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|_| {
                let syn = resample_max(&data, &idx, &mut rng).unwrap();
                syn.value(0, 2) == 0
            })
            .count() as f64;
        let se = (0.25 / trials as f64).sqrt();
        assert!((hits / trials as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn min_scenario_attribute_count_near_n_over_g() {
        let rows = (0..200)
            .map(|i| vec![(i % 2) as u16, (i % 3) as u16, (i % 10) as u16])
            .collect();
        let data = dataset(rows, 10);
        let cases = vec![KnownCase::resolve(data.schema(), &["gender"]).unwrap()];
        let report = bounds_run(&data, Scenario::Min, 1000, &cases, 5).unwrap();
        let mean = report.attribute_count.range.unwrap().mean;
        let se = (200.0 * 0.1 * 0.9 / 1000.0f64).sqrt();
        assert!((mean - 20.0).abs() < 3.0 * se, "mean {mean}");
        assert!(report.iterations.iter().all(|r| r.cases.len() == 1));
    }

    #[test]
    fn g_bounds_rejected() {
        let data = dataset(vec![vec![0, 0, 0]], 4);
        let idx = full_pattern_index(&data);
        let mut rng = RngStream::new(0, 0);
        assert!(resample_min(&data, &idx, &mut rng, 1).is_err());
        assert!(resample_min(&data, &idx, &mut rng, 5).is_err());
        assert!(resample_min(&data, &idx, &mut rng, 4).is_ok());
    }

    #[test]
    fn single_iteration_mean_equals_row() {
        let data = dataset(vec![vec![0, 0, 1], vec![0, 0, 2], vec![1, 1, 0]], 3);
        let cases = vec![KnownCase::resolve(data.schema(), &["gender", "age"]).unwrap()];
        let report = bounds_run(&data, Scenario::Max, 1, &cases, 3).unwrap();
        assert_eq!(report.iterations.len(), 1);
        let row = &report.iterations[0];
        let er = report.cases[0].expected_risk.range.unwrap();
        assert_eq!(er.mean, row.cases[0].expected_risk);
        assert_eq!(report.attribute_count.range.unwrap().mean, row.attribute_count as f64);
        assert_eq!(report.attribute_count.histogram.as_ref().unwrap().total(), 1);
        assert!(bounds_run(&data, Scenario::Max, 0, &cases, 3).is_err());
    }

    #[test]
    fn no_unique_matches_leaves_false_rate_undefined() {
        // homogeneous pairs: every target always has exactly two matches
        let rows = vec![vec![0, 0, 0], vec![0, 0, 0], vec![1, 0, 1], vec![1, 0, 1]];
        let data = dataset(rows, 2);
        let cases = vec![KnownCase::resolve(data.schema(), &["gender"]).unwrap()];
        let report = bounds_run(&data, Scenario::Max, 20, &cases, 11).unwrap();
        assert!(report
            .iterations
            .iter()
            .all(|r| r.cases[0].s == 0 && r.cases[0].false_match_rate.is_none()));
        let fmr = &report.cases[0].false_match_rate;
        assert!(fmr.range.is_none() && fmr.histogram.is_none());
        assert!(report.iterations_csv().lines().skip(1).all(|l| l.contains(",NaN,")));
        assert_eq!(fmr.bound, BoundRole::Lower);
        assert_eq!(report.cases[0].expected_risk.bound, BoundRole::Upper);
    }

    #[test]
    fn histograms_cover_every_iteration() {
        let rows = (0..60)
            .map(|i| vec![(i % 2) as u16, (i % 3) as u16, ((i * 7) % 5) as u16])
            .collect();
        let data = dataset(rows, 5);
        let cases = vec![KnownCase::resolve(data.schema(), &["gender", "age"]).unwrap()];
        for scenario in [Scenario::Min, Scenario::Max] {
            let report = bounds_run(&data, scenario, 37, &cases, 2).unwrap();
            let h = report.cases[0].expected_risk.histogram.as_ref().unwrap();
            assert_eq!(h.total(), 37);
            assert_eq!(h.edges.len(), HISTOGRAM_BINS + 1);
            assert_eq!(report.attribute_count.histogram.as_ref().unwrap().total(), 37);
            assert_eq!(report.iterations_csv().lines().count(), 38);
            assert_eq!(report.histograms_csv().lines().count(), 1 + 3 * HISTOGRAM_BINS + HISTOGRAM_BINS);
        }
    }

    #[test]
    fn degenerate_histogram_range() {
        let h = Histogram::equal_width(&[2.0, 2.0], 20).unwrap();
        assert_eq!(h.edges[0], 1.5);
        assert_eq!(*h.edges.last().unwrap(), 2.5);
        assert_eq!(h.total(), 2);
        assert!(Histogram::equal_width(&[], 20).is_none());
    }

    #[test]
    fn runs_are_reproducible() {
        let rows = (0..30)
            .map(|i| vec![(i % 2) as u16, (i % 3) as u16, ((i * 3) % 4) as u16])
            .collect();
        let data = dataset(rows, 4);
        let cases = vec![KnownCase::resolve(data.schema(), &["gender"]).unwrap()];
        let a = bounds_run(&data, Scenario::Max, 15, &cases, 77).unwrap();
        let b = bounds_run(&data, Scenario::Max, 15, &cases, 77).unwrap();
        assert_eq!(a.iterations_csv(), b.iterations_csv());
    }
}
