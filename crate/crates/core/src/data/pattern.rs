use std::collections::BTreeMap;

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    /// 0-based level codes over the index's key variables.
    pub key: Vec<u16>,
    /// Record ids (row positions), ascending.
    pub records: Vec<usize>,
}

/// Partition of records by their observed combination of key variables.
///
/// Patterns are ordered lexicographically by key codes so ordinals are stable across runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternIndex {
    key_vars: Vec<usize>,
    patterns: Vec<Pattern>,
    ordinal: Vec<usize>,
}

impl PatternIndex {
    pub fn key_vars(&self) -> &[usize] {
        &self.key_vars
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Pattern ordinal of record `i`.
    pub fn pattern_of(&self, record: usize) -> usize {
        self.ordinal[record]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.patterns.iter().map(|p| p.records.len()).collect()
    }
}

pub fn build_pattern_index(data: &CategoricalDataset, key_vars: &[usize]) -> Result<PatternIndex> {
    if key_vars.is_empty() {
        return Err(Error::invalid("pattern index needs at least one key variable"));
    }
    let schema = data.schema();
    for &j in key_vars {
        if j >= schema.len() {
            return Err(Error::invalid(format!("variable index {j} out of range")));
        }
        if j == schema.sensitive_index() {
            return Err(Error::invalid(format!(
                "`{}` is the sensitive variable and cannot define patterns",
                schema.name(j)
            )));
        }
    }
    let mut groups: BTreeMap<Vec<u16>, Vec<usize>> = BTreeMap::new();
    for (i, row) in data.rows().enumerate() {
        let key: Vec<u16> = key_vars.iter().map(|&j| row[j]).collect();
        groups.entry(key).or_default().push(i);
    }
    let mut ordinal = vec![0; data.n()];
    let patterns: Vec<Pattern> = groups
        .into_iter()
        .enumerate()
        .map(|(b, (key, records))| {
            for &i in &records {
                ordinal[i] = b;
            }
            Pattern { key, records }
        })
        .collect();
    Ok(PatternIndex {
        key_vars: key_vars.to_vec(),
        patterns,
        ordinal,
    })
}

/// Pattern index over every key variable of the schema.
pub fn full_pattern_index(data: &CategoricalDataset) -> PatternIndex {
    build_pattern_index(data, data.schema().key_indices()).expect("schema keys are valid")
}
