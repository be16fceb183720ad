//! Identification and attribute disclosure risk of partially synthetic replicates.
//!
//! The intruder knows each target's true values of `known_vars` and of the sensitive
//! variable, and matches them against the released replicate. For target `i`:
//!
//! - `c_i`: records `j` sharing `i`'s known-key values whose synthetic sensitive value equals
//!   `i`'s true value;
//! - `T_i`: 1 when `i`'s own synthetic value equals its true value (so `i` is in its match set);
//! - `K_i = 1` iff `c_i = 1` and `T_i = 1`; `F_i = 1` iff `c_i = 1` and `T_i = 0`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{CategoricalDataset, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub record: usize,
    pub c: usize,
    pub t: bool,
    pub k_flag: bool,
    pub f_flag: bool,
}

fn check_pair(original: &CategoricalDataset, synthetic: &CategoricalDataset) -> Result<()> {
    if original.schema() != synthetic.schema() || original.n() != synthetic.n() {
        return Err(Error::invalid(
            "original and synthetic datasets differ in schema or size",
        ));
    }
    Ok(())
}

/// Match-set size and true/false unique-match flags for every target record.
pub fn match_statistics(
    original: &CategoricalDataset,
    synthetic: &CategoricalDataset,
    known_vars: &[usize],
) -> Result<Vec<MatchRecord>> {
    check_pair(original, synthetic)?;
    let schema = original.schema();
    let s = schema.sensitive_index();
    for &j in known_vars {
        if j >= schema.len() {
            return Err(Error::invalid(format!("variable index {j} out of range")));
        }
        if j == s {
            return Err(Error::invalid(format!(
                "known variables must be keys; `{}` is sensitive",
                schema.name(j)
            )));
        }
    }
    let key_of = |i: usize| -> Vec<u16> { known_vars.iter().map(|&j| original.value(i, j)).collect() };

    // tally of released (known key, synthetic value) combinations
    let mut tally: HashMap<(Vec<u16>, u16), usize> = HashMap::with_capacity(original.n());
    for i in 0..original.n() {
        *tally.entry((key_of(i), synthetic.value(i, s))).or_default() += 1;
    }
    Ok((0..original.n())
        .map(|i| {
            let truth = original.value(i, s);
            let c = tally.get(&(key_of(i), truth)).copied().unwrap_or(0);
            let t = synthetic.value(i, s) == truth;
            MatchRecord {
                record: i,
                c,
                t,
                k_flag: c == 1 && t,
                f_flag: c == 1 && !t,
            }
        })
        .collect())
}

/// `sum_i T_i / c_i`, with records whose match set is empty contributing 0.
pub fn expected_match_risk(stats: &[MatchRecord]) -> f64 {
    stats
        .iter()
        .filter(|r| r.t && r.c > 0)
        .map(|r| 1.0 / r.c as f64)
        .sum()
}

/// Proportion of targets with a true unique match.
pub fn true_match_rate(stats: &[MatchRecord]) -> f64 {
    if stats.is_empty() {
        return 0.0;
    }
    stats.iter().filter(|r| r.k_flag).count() as f64 / stats.len() as f64
}

/// Number of targets with exactly one match (`s`).
pub fn unique_matches(stats: &[MatchRecord]) -> usize {
    stats.iter().filter(|r| r.c == 1).count()
}

/// Proportion of unique matches that are false; `None` when there are no unique matches.
pub fn false_match_rate(stats: &[MatchRecord]) -> Option<f64> {
    let s = unique_matches(stats);
    (s > 0).then(|| stats.iter().filter(|r| r.f_flag).count() as f64 / s as f64)
}

/// Exact attribute disclosures: count and proportion of records whose synthetic sensitive
/// value equals the true one.
pub fn attribute_disclosures(
    original: &CategoricalDataset,
    synthetic: &CategoricalDataset,
) -> Result<(usize, f64)> {
    check_pair(original, synthetic)?;
    let s = original.schema().sensitive_index();
    let count = (0..original.n())
        .filter(|&i| original.value(i, s) == synthetic.value(i, s))
        .count();
    Ok((count, count as f64 / original.n() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentificationSummary {
    pub expected_risk: f64,
    pub true_match_rate: f64,
    /// `None` (NaN in flat files) when `s = 0`.
    pub false_match_rate: Option<f64>,
    pub s: usize,
    pub true_unique: usize,
    pub false_unique: usize,
}

impl IdentificationSummary {
    pub fn from_stats(stats: &[MatchRecord]) -> Self {
        IdentificationSummary {
            expected_risk: expected_match_risk(stats),
            true_match_rate: true_match_rate(stats),
            false_match_rate: false_match_rate(stats),
            s: unique_matches(stats),
            true_unique: stats.iter().filter(|r| r.k_flag).count(),
            false_unique: stats.iter().filter(|r| r.f_flag).count(),
        }
    }
}

/// Key variables assumed known to the intruder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownCase {
    pub names: Vec<String>,
    #[serde(skip)]
    pub vars: Vec<usize>,
}

impl KnownCase {
    pub fn resolve<S: AsRef<str>>(schema: &Schema, names: &[S]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::invalid("a known-variable case needs at least one key"));
        }
        Ok(KnownCase {
            names: names.iter().map(|n| n.as_ref().to_string()).collect(),
            vars: schema.resolve_keys(names)?,
        })
    }

    pub fn label(&self) -> String {
        self.names.join("+")
    }
}

/// Known-variable cases `{gender}`, `{gender, age}`, `{gender, age, income}` when the schema
/// has those keys, otherwise the nested prefixes of the schema's keys.
pub fn default_known_cases(schema: &Schema) -> Vec<KnownCase> {
    let named = [
        vec!["gender"],
        vec!["gender", "age"],
        vec!["gender", "age", "income"],
    ];
    if let Ok(cases) = named
        .iter()
        .map(|n| KnownCase::resolve(schema, n))
        .collect::<Result<Vec<_>>>()
    {
        return cases;
    }
    let keys = schema.key_indices();
    (1..=keys.len())
        .map(|len| KnownCase {
            names: keys[..len].iter().map(|&j| schema.name(j).to_string()).collect(),
            vars: keys[..len].to_vec(),
        })
        .collect()
}

/// Minimum, mean and maximum of a statistic over replicates or iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Number of values the range was computed from.
    pub defined: usize,
}

impl Range {
    /// Range over the defined values; `None` when there are none.
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Option<Range> {
        let mut n = 0usize;
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for v in values {
            n += 1;
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        (n > 0).then(|| Range {
            min,
            mean: sum / n as f64,
            max,
            defined: n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub known: Vec<String>,
    pub per_replicate: Vec<IdentificationSummary>,
    pub expected_risk: Range,
    pub true_match_rate: Range,
    /// Over replicates with `s > 0`; `None` when every replicate has `s = 0`.
    pub false_match_rate: Option<Range>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeRow {
    pub replicate: usize,
    pub count: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub per_replicate: Vec<AttributeRow>,
    pub count: Range,
    pub proportion: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub n: usize,
    pub m: usize,
    pub cases: Vec<CaseReport>,
    pub attribute: AttributeReport,
}

/// Identification summaries per case and replicate, attribute disclosures per replicate,
/// and their ranges over replicates.
pub fn risk_report(
    original: &CategoricalDataset,
    replicates: &[CategoricalDataset],
    known_cases: &[KnownCase],
) -> Result<RiskReport> {
    if replicates.is_empty() {
        return Err(Error::invalid("risk report needs at least one replicate"));
    }
    let mut cases = Vec::with_capacity(known_cases.len());
    for case in known_cases {
        let per_replicate = replicates
            .iter()
            .map(|r| {
                match_statistics(original, r, &case.vars)
                    .map(|stats| IdentificationSummary::from_stats(&stats))
            })
            .collect::<Result<Vec<_>>>()?;
        cases.push(CaseReport {
            known: case.names.clone(),
            expected_risk: Range::of(per_replicate.iter().map(|s| s.expected_risk))
                .expect("nonempty"),
            true_match_rate: Range::of(per_replicate.iter().map(|s| s.true_match_rate))
                .expect("nonempty"),
            false_match_rate: Range::of(per_replicate.iter().filter_map(|s| s.false_match_rate)),
            per_replicate,
        });
    }
    let per_replicate = replicates
        .iter()
        .enumerate()
        .map(|(l, r)| {
            attribute_disclosures(original, r).map(|(count, proportion)| AttributeRow {
                replicate: l + 1,
                count,
                proportion,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskReport {
        n: original.n(),
        m: replicates.len(),
        cases,
        attribute: AttributeReport {
            count: Range::of(per_replicate.iter().map(|r| r.count as f64)).expect("nonempty"),
            proportion: Range::of(per_replicate.iter().map(|r| r.proportion)).expect("nonempty"),
            per_replicate,
        },
    })
}

pub(crate) fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

impl RiskReport {
    /// `case,replicate,expected_risk,true_match_rate,false_match_rate,s`.
    pub fn identification_csv(&self) -> String {
        let mut out =
            String::from("case,replicate,expected_risk,true_match_rate,false_match_rate,s\n");
        for case in &self.cases {
            let label = case.known.join("+");
            for (l, s) in case.per_replicate.iter().enumerate() {
                out.push_str(&format!(
                    "{label},{},{},{},{},{}\n",
                    l + 1,
                    s.expected_risk,
                    s.true_match_rate,
                    fmt_rate(s.false_match_rate),
                    s.s
                ));
            }
        }
        out
    }

    /// `replicate,attribute_count,attribute_pct` with the proportion in `[0, 1]`.
    pub fn attribute_csv(&self) -> String {
        let mut out = String::from("replicate,attribute_count,attribute_pct\n");
        for r in &self.attribute.per_replicate {
            out.push_str(&format!("{},{},{}\n", r.replicate, r.count, r.proportion));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::Variable;

    fn schema() -> Arc<Schema> {
        Arc::new(
            Schema::new(vec![
                Variable::key("gender", 2),
                Variable::key("age", 3),
                Variable::sensitive("county", 3),
            ])
            .unwrap(),
        )
    }

    fn pair(keys: &[u16], truth: &[u16], synth: &[u16]) -> (CategoricalDataset, CategoricalDataset) {
        let rows = keys.iter().zip(truth).map(|(&k, &t)| vec![k, 0, t]).collect();
        let orig = CategoricalDataset::from_rows(schema(), rows).unwrap();
        let syn = orig.with_sensitive_column(synth).unwrap();
        (orig, syn)
    }

    #[test]
    fn four_record_hand_case() {
        // keys (A,A,B,B), truth (1,2,1,1), synthetic (1,1,2,1), 0-based below
        let (orig, syn) = pair(&[0, 0, 1, 1], &[0, 1, 0, 0], &[0, 0, 1, 0]);
        let stats = match_statistics(&orig, &syn, &[0]).unwrap();
        let c: Vec<usize> = stats.iter().map(|r| r.c).collect();
        let t: Vec<bool> = stats.iter().map(|r| r.t).collect();
        let k: Vec<bool> = stats.iter().map(|r| r.k_flag).collect();
        let f: Vec<bool> = stats.iter().map(|r| r.f_flag).collect();
        assert_eq!(c, vec![2, 0, 1, 1]);
        assert_eq!(t, vec![true, false, false, true]);
        assert_eq!(k, vec![false, false, false, true]);
        assert_eq!(f, vec![false, false, true, false]);
        assert_eq!(expected_match_risk(&stats), 1.5);
        assert_eq!(true_match_rate(&stats), 0.25);
        assert_eq!(unique_matches(&stats), 2);
        assert_eq!(false_match_rate(&stats), Some(0.5));
        assert_eq!(attribute_disclosures(&orig, &syn).unwrap(), (2, 0.5));
    }

    #[test]
    fn perfect_copy_of_unique_rows() {
        let (orig, syn) = pair(&[0, 0, 1, 1], &[0, 1, 0, 2], &[0, 1, 0, 2]);
        let stats = match_statistics(&orig, &syn, &[0]).unwrap();
        assert!(stats.iter().all(|r| r.c == 1 && r.t && r.k_flag && !r.f_flag));
        assert_eq!(expected_match_risk(&stats), 4.0);
        assert_eq!(true_match_rate(&stats), 1.0);
        assert_eq!(false_match_rate(&stats), Some(0.0));
        assert_eq!(attribute_disclosures(&orig, &syn).unwrap(), (4, 1.0));
    }

    #[test]
    fn no_true_values_released() {
        let (orig, syn) = pair(&[0, 1, 0], &[0, 0, 0], &[1, 2, 1]);
        let stats = match_statistics(&orig, &syn, &[0]).unwrap();
        assert!(stats.iter().all(|r| !r.t && r.c == 0));
        assert_eq!(expected_match_risk(&stats), 0.0);
        assert_eq!(true_match_rate(&stats), 0.0);
        assert_eq!(false_match_rate(&stats), None);
        assert_eq!(attribute_disclosures(&orig, &syn).unwrap().0, 0);
    }

    #[test]
    fn sensitive_known_var_rejected() {
        let (orig, syn) = pair(&[0], &[0], &[0]);
        assert!(match_statistics(&orig, &syn, &[2]).is_err());
    }

    #[test]
    fn default_cases_follow_named_keys() {
        let schema = Schema::new(vec![
            Variable::key("gender", 2),
            Variable::key("income", 4),
            Variable::key("age", 5),
            Variable::sensitive("county", 133),
        ])
        .unwrap();
        let cases = default_known_cases(&schema);
        let names: Vec<Vec<String>> = cases.iter().map(|c| c.names.clone()).collect();
        assert_eq!(
            names,
            vec![
                vec!["gender".to_string()],
                vec!["gender".into(), "age".into()],
                vec!["gender".into(), "age".into(), "income".into()],
            ]
        );
        assert_eq!(cases[2].vars, vec![0, 2, 1]);

        let other = Schema::new(vec![
            Variable::key("x", 2),
            Variable::key("y", 2),
            Variable::sensitive("s", 2),
        ])
        .unwrap();
        let cases = default_known_cases(&other);
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[1].vars, vec![0, 1]);
    }

    #[test]
    fn identical_replicates_have_equal_summaries() {
        let (orig, syn) = pair(&[0, 0, 1, 1, 1], &[0, 1, 0, 2, 2], &[0, 0, 0, 2, 1]);
        let cases = vec![KnownCase::resolve(orig.schema(), &["gender"]).unwrap()];
        let report = risk_report(&orig, &[syn.clone(), syn.clone(), syn], &cases).unwrap();
        let case = &report.cases[0];
        assert!(case.per_replicate.iter().all(|s| *s == case.per_replicate[0]));
        assert_eq!(case.expected_risk.mean, case.per_replicate[0].expected_risk);
        assert_eq!(case.expected_risk.min, case.expected_risk.max);
        assert_eq!(report.attribute.count.mean, report.attribute.per_replicate[0].count as f64);
    }

    #[test]
    fn ranges_match_direct_recomputation() {
        let (orig, a) = pair(&[0, 0, 1, 1], &[0, 1, 0, 0], &[0, 0, 1, 0]);
        let b = orig.with_sensitive_column(&[0, 1, 0, 0]).unwrap();
        let cases = vec![KnownCase::resolve(orig.schema(), &["gender"]).unwrap()];
        let report = risk_report(&orig, &[a.clone(), b.clone()], &cases).unwrap();
        let ea = expected_match_risk(&match_statistics(&orig, &a, &[0]).unwrap());
        let eb = expected_match_risk(&match_statistics(&orig, &b, &[0]).unwrap());
        let r = report.cases[0].expected_risk;
        assert_eq!((r.min, r.max), (ea.min(eb), ea.max(eb)));
        assert_eq!(r.mean, (ea + eb) / 2.0);
        assert!(report.identification_csv().lines().count() == 3);
        assert!(report.attribute_csv().contains("\n2,4,1\n"));
    }

    proptest::proptest! {
        #[test]
        fn unique_true_matches_bounded_by_expected_risk(
            rows in proptest::collection::vec((0u16..2, 0u16..3, 0u16..3, 0u16..3), 1..40)
        ) {
            let keys: Vec<u16> = rows.iter().map(|r| r.0).collect();
            let truth: Vec<u16> = rows.iter().map(|r| r.2).collect();
            let synth: Vec<u16> = rows.iter().map(|r| r.3).collect();
            let (orig, syn) = pair(&keys, &truth, &synth);
            let stats = match_statistics(&orig, &syn, &[0]).unwrap();
            let k = stats.iter().filter(|r| r.k_flag).count() as f64;
            proptest::prop_assert!(k <= expected_match_risk(&stats) + 1e-12);
            for r in &stats {
                // a target whose own value was released sits in its match set
                if r.t { proptest::prop_assert!(r.c >= 1); }
                proptest::prop_assert!(!(r.k_flag && r.f_flag));
            }
            // adding a known key can only shrink match sets
            let finer = match_statistics(&orig, &syn, &[0, 1]).unwrap();
            for (a, b) in stats.iter().zip(&finer) {
                proptest::prop_assert!(b.c <= a.c);
            }
        }
    }

    #[test]
    fn empty_bundle_rejected() {
        let (orig, _) = pair(&[0], &[0], &[0]);
        assert!(risk_report(&orig, &[], &[]).is_err());
    }
}
