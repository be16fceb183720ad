//! Utility of partially synthetic replicates: global table deviations and within-pattern
//! distributions of the sensitive variable.

use serde::{Deserialize, Serialize};

use crate::data::{cross_tabulate, full_pattern_index, CategoricalDataset, PatternIndex, Schema};
use crate::error::{Error, Result};

/// Tables of a given arity, each containing the sensitive variable.
///
/// Arity 1 is the sensitive variable alone, arity 2 pairs it with one key, arity 3 with two.
pub fn table_family(schema: &Schema, arity: usize) -> Result<Vec<Vec<usize>>> {
    let s = schema.sensitive_index();
    let keys = schema.key_indices();
    match arity {
        1 => Ok(vec![vec![s]]),
        2 => Ok(keys.iter().map(|&a| vec![a, s]).collect()),
        3 => Ok(keys
            .iter()
            .enumerate()
            .flat_map(|(x, &a)| keys[x + 1..].iter().map(move |&b| vec![a, b, s]))
            .collect()),
        other => Err(Error::invalid(format!("table arity must be 1, 2 or 3, got {other}"))),
    }
}

fn check_comparable(original: &CategoricalDataset, synthetic: &CategoricalDataset) -> Result<()> {
    if original.schema() != synthetic.schema() {
        return Err(Error::invalid("original and synthetic schemas differ"));
    }
    if original.n() != synthetic.n() {
        return Err(Error::invalid(format!(
            "original has {} records, synthetic has {}",
            original.n(),
            synthetic.n()
        )));
    }
    Ok(())
}

/// Signed cell differences (synthetic minus original) for one table.
fn signed_cells(
    original: &CategoricalDataset,
    synthetic: &CategoricalDataset,
    dims: &[usize],
) -> Result<Vec<i64>> {
    let a = cross_tabulate(original, dims)?;
    let b = cross_tabulate(synthetic, dims)?;
    Ok(a.cells()
        .iter()
        .zip(b.cells())
        .map(|(&o, &s)| s as i64 - o as i64)
        .collect())
}

/// Sum over every table of the family and every cell of `|original - synthetic|`.
pub fn table_deviation(
    original: &CategoricalDataset,
    synthetic: &CategoricalDataset,
    arity: usize,
) -> Result<u64> {
    check_comparable(original, synthetic)?;
    let mut total = 0u64;
    for dims in table_family(original.schema(), arity)? {
        total += signed_cells(original, synthetic, &dims)?
            .iter()
            .map(|d| d.unsigned_abs())
            .sum::<u64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternComparison {
    pub pattern: usize,
    pub original: Vec<f64>,
    pub synthetic: Vec<f64>,
    /// Total-variation distance between the two pmfs.
    pub tv: f64,
}

fn empirical_pmf(data: &CategoricalDataset, records: &[usize], g: usize) -> Vec<f64> {
    let s = data.schema().sensitive_index();
    let mut pmf = vec![0.0; g];
    for &i in records {
        pmf[data.value(i, s) as usize] += 1.0;
    }
    let n = records.len() as f64;
    pmf.iter_mut().for_each(|p| *p /= n);
    pmf
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Empirical pmf of the sensitive variable in each pattern, original vs synthetic.
pub fn pattern_pmfs(
    original: &CategoricalDataset,
    synthetic: &CategoricalDataset,
    patterns: &PatternIndex,
) -> Result<Vec<PatternComparison>> {
    check_comparable(original, synthetic)?;
    let g = original.schema().sensitive_levels();
    Ok(patterns
        .patterns()
        .iter()
        .enumerate()
        .map(|(b, p)| {
            let o = empirical_pmf(original, &p.records, g);
            let s = empirical_pmf(synthetic, &p.records, g);
            let tv = total_variation(&o, &s);
            PatternComparison {
                pattern: b,
                original: o,
                synthetic: s,
                tv,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    /// 1-based replicate index.
    pub replicate: usize,
    pub one_way: u64,
    pub two_way: u64,
    pub three_way: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationMeans {
    pub one_way: f64,
    pub two_way: f64,
    pub three_way: f64,
}

impl DeviationMeans {
    /// Means divided by 100, the presentation scale of published deviation tables.
    pub fn scaled(&self) -> DeviationMeans {
        DeviationMeans {
            one_way: self.one_way / 100.0,
            two_way: self.two_way / 100.0,
            three_way: self.three_way / 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedCell {
    pub replicate: usize,
    pub arity: usize,
    /// Variable names joined with `x`.
    pub table: String,
    /// 1-based level codes, one per table variable.
    pub cell: Vec<u16>,
    /// Synthetic count minus original count.
    pub deviation: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternPmfRecord {
    pub pattern: usize,
    /// 1-based key levels of the pattern.
    pub key: Vec<u16>,
    pub size: usize,
    /// `original` or `replicate-<l>`.
    pub source: String,
    pub pmf: Vec<f64>,
    /// Distance to the original pmf; 0 for the original itself.
    pub tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub m: usize,
    pub per_replicate: Vec<DeviationRow>,
    pub mean: DeviationMeans,
    pub mean_scaled: DeviationMeans,
    pub signed_deviations: Vec<SignedCell>,
    pub pattern_pmfs: Vec<PatternPmfRecord>,
}

fn cell_levels(mut flat: usize, shape: &[usize]) -> Vec<u16> {
    let mut out = vec![0u16; shape.len()];
    for (slot, &d) in out.iter_mut().zip(shape).rev() {
        *slot = (flat % d) as u16 + 1;
        flat /= d;
    }
    out
}

/// Per-replicate deviations at every arity, their means, signed cells and pattern pmfs.
pub fn utility_report(
    original: &CategoricalDataset,
    replicates: &[CategoricalDataset],
) -> Result<UtilityReport> {
    if replicates.is_empty() {
        return Err(Error::invalid("utility report needs at least one replicate"));
    }
    let patterns = &full_pattern_index(original);
    let schema = original.schema();
    let mut per_replicate = Vec::with_capacity(replicates.len());
    let mut signed_deviations = Vec::new();
    let mut pattern_records = Vec::new();

    for (b, p) in patterns.patterns().iter().enumerate() {
        pattern_records.push(PatternPmfRecord {
            pattern: b,
            key: p.key.iter().map(|v| v + 1).collect(),
            size: p.records.len(),
            source: "original".into(),
            pmf: empirical_pmf(original, &p.records, schema.sensitive_levels()),
            tv: 0.0,
        });
    }

    for (l, synth) in replicates.iter().enumerate() {
        check_comparable(original, synth)?;
        let mut sums = [0u64; 3];
        for arity in 1..=3 {
            for dims in table_family(schema, arity)? {
                let shape: Vec<usize> = dims.iter().map(|&d| schema.levels(d)).collect();
                let name = dims
                    .iter()
                    .map(|&d| schema.name(d))
                    .collect::<Vec<_>>()
                    .join("x");
                for (flat, d) in signed_cells(original, synth, &dims)?.into_iter().enumerate() {
                    sums[arity - 1] += d.unsigned_abs();
                    signed_deviations.push(SignedCell {
                        replicate: l + 1,
                        arity,
                        table: name.clone(),
                        cell: cell_levels(flat, &shape),
                        deviation: d,
                    });
                }
            }
        }
        per_replicate.push(DeviationRow {
            replicate: l + 1,
            one_way: sums[0],
            two_way: sums[1],
            three_way: sums[2],
        });
        for cmp in pattern_pmfs(original, synth, patterns)? {
            let p = &patterns.patterns()[cmp.pattern];
            pattern_records.push(PatternPmfRecord {
                pattern: cmp.pattern,
                key: p.key.iter().map(|v| v + 1).collect(),
                size: p.records.len(),
                source: format!("replicate-{}", l + 1),
                pmf: cmp.synthetic,
                tv: cmp.tv,
            });
        }
    }

    let m = replicates.len() as f64;
    let mean = DeviationMeans {
        one_way: per_replicate.iter().map(|r| r.one_way as f64).sum::<f64>() / m,
        two_way: per_replicate.iter().map(|r| r.two_way as f64).sum::<f64>() / m,
        three_way: per_replicate.iter().map(|r| r.three_way as f64).sum::<f64>() / m,
    };
    Ok(UtilityReport {
        m: replicates.len(),
        per_replicate,
        mean,
        mean_scaled: mean.scaled(),
        signed_deviations,
        pattern_pmfs: pattern_records,
    })
}

impl UtilityReport {
    /// `arity,replicate,deviation`, one row per arity and replicate.
    pub fn deviations_csv(&self) -> String {
        let mut out = String::from("arity,replicate,deviation\n");
        for r in &self.per_replicate {
            for (arity, v) in [(1, r.one_way), (2, r.two_way), (3, r.three_way)] {
                out.push_str(&format!("{arity},{},{v}\n", r.replicate));
            }
        }
        out
    }

    /// `replicate,arity,table,cell,deviation` with `cell` as `-`-joined 1-based levels.
    pub fn signed_deviations_csv(&self) -> String {
        let mut out = String::from("replicate,arity,table,cell,deviation\n");
        for c in &self.signed_deviations {
            let cell = c
                .cell
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("-");
            out.push_str(&format!(
                "{},{},{},{cell},{}\n",
                c.replicate, c.arity, c.table, c.deviation
            ));
        }
        out
    }

    /// `pattern,county,source,probability` in long format, 1-based levels.
    pub fn pattern_pmfs_csv(&self) -> String {
        let mut out = String::from("pattern,county,source,probability\n");
        for r in &self.pattern_pmfs {
            for (i, p) in r.pmf.iter().enumerate() {
                out.push_str(&format!("{},{},{},{p}\n", r.pattern + 1, i + 1, r.source));
            }
        }
        out
    }

    /// Report without the bulky per-cell and per-pattern lists.
    pub fn summary(&self) -> UtilityReport {
        UtilityReport {
            signed_deviations: Vec::new(),
            pattern_pmfs: Vec::new(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::data::{build_pattern_index, full_pattern_index, Variable};

    fn schema(g: usize) -> Arc<Schema> {
        Arc::new(
            Schema::new(vec![
                Variable::key("a", 2),
                Variable::key("b", 3),
                Variable::key("c", 2),
                Variable::sensitive("county", g),
            ])
            .unwrap(),
        )
    }

    fn dataset(keys: &[[u16; 3]], counties: &[u16], g: usize) -> CategoricalDataset {
        let rows = keys
            .iter()
            .zip(counties)
            .map(|(k, &c)| vec![k[0], k[1], k[2], c])
            .collect();
        CategoricalDataset::from_rows(schema(g), rows).unwrap()
    }

    #[test]
    fn family_sizes() {
        let s = schema(4);
        assert_eq!(table_family(&s, 1).unwrap(), vec![vec![3]]);
        assert_eq!(table_family(&s, 2).unwrap().len(), 3);
        assert_eq!(table_family(&s, 3).unwrap(), vec![vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]);
        assert!(table_family(&s, 4).is_err());
    }

    #[test]
    fn identity_has_zero_deviation() {
        let data = dataset(&[[0, 1, 0], [1, 2, 1], [0, 0, 1]], &[0, 1, 2], 3);
        for arity in 1..=3 {
            assert_eq!(table_deviation(&data, &data, arity).unwrap(), 0);
        }
    }

    #[test]
    fn hand_one_way() {
        let keys = [[0, 0, 0]; 4];
        let orig = dataset(&keys, &[0, 0, 1, 1], 2);
        let synth = orig.with_sensitive_column(&[0, 1, 1, 1]).unwrap();
        assert_eq!(table_deviation(&orig, &synth, 1).unwrap(), 2);
    }

    #[test]
    fn within_pattern_swap_is_invisible() {
        let keys = [[0, 0, 0], [0, 0, 0], [1, 1, 1]];
        let orig = dataset(&keys, &[0, 2, 1], 3);
        let swapped = orig.with_sensitive_column(&[2, 0, 1]).unwrap();
        for arity in 1..=3 {
            assert_eq!(table_deviation(&orig, &swapped, arity).unwrap(), 0);
        }
    }

    #[test]
    fn two_record_pattern_tv() {
        let keys = [[0, 0, 0]; 2];
        let orig = dataset(&keys, &[0, 0], 2);
        let synth = orig.with_sensitive_column(&[0, 1]).unwrap();
        let cmp = pattern_pmfs(&orig, &synth, &full_pattern_index(&orig)).unwrap();
        assert_eq!(cmp.len(), 1);
        assert_eq!(cmp[0].tv, 0.5);
        assert_eq!(cmp[0].original, vec![1.0, 0.0]);
    }

    #[test]
    fn report_of_identity_bundle() {
        let data = dataset(&[[0, 1, 0], [1, 2, 1], [0, 0, 1], [0, 1, 0]], &[0, 1, 2, 2], 3);
        let bundle = vec![data.clone(); 3];
        let report = utility_report(&data, &bundle).unwrap();
        assert_eq!(report.per_replicate.len(), 3);
        assert_eq!(report.mean.one_way, 0.0);
        assert_eq!(report.mean.three_way, 0.0);
        assert!(report.signed_deviations.iter().all(|c| c.deviation == 0));
        assert!(report.pattern_pmfs.iter().all(|r| r.tv == 0.0));
        assert!(report
            .pattern_pmfs
            .iter()
            .all(|r| (r.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn mean_is_mean_of_replicates() {
        let keys = [[0, 0, 0], [1, 1, 1], [0, 2, 1], [1, 0, 0]];
        let orig = dataset(&keys, &[0, 1, 2, 3], 4);
        let reps = vec![
            orig.with_sensitive_column(&[1, 1, 2, 3]).unwrap(),
            orig.with_sensitive_column(&[3, 2, 1, 0]).unwrap(),
        ];
        let report = utility_report(&orig, &reps).unwrap();
        let direct: Vec<u64> = reps
            .iter()
            .map(|r| table_deviation(&orig, r, 2).unwrap())
            .collect();
        assert_eq!(report.mean.two_way, (direct[0] + direct[1]) as f64 / 2.0);
        assert_eq!(report.mean_scaled.two_way, report.mean.two_way / 100.0);
        let signed_abs: u64 = report
            .signed_deviations
            .iter()
            .filter(|c| c.replicate == 1 && c.arity == 2)
            .map(|c| c.deviation.unsigned_abs())
            .sum();
        assert_eq!(signed_abs, direct[0]);
        assert!(report.deviations_csv().starts_with("arity,replicate,deviation\n1,1,"));
    }

    fn random_triple() -> impl Strategy<Value = (Vec<[u16; 3]>, Vec<u16>, Vec<u16>, Vec<u16>)> {
        (1usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec((0u16..2, 0u16..3, 0u16..2).prop_map(|(a, b, c)| [a, b, c]), n),
                proptest::collection::vec(0u16..4, n),
                proptest::collection::vec(0u16..4, n),
                proptest::collection::vec(0u16..4, n),
            )
        })
    }

    proptest! {
        #[test]
        fn deviation_is_a_pseudometric((keys, x, y, z) in random_triple()) {
            let a = dataset(&keys, &x, 4);
            let b = a.with_sensitive_column(&y).unwrap();
            let c = a.with_sensitive_column(&z).unwrap();
            for arity in 1..=3 {
                let ab = table_deviation(&a, &b, arity).unwrap();
                let ba = table_deviation(&b, &a, arity).unwrap();
                let bc = table_deviation(&b, &c, arity).unwrap();
                let ac = table_deviation(&a, &c, arity).unwrap();
                prop_assert_eq!(ab, ba);
                prop_assert!(ac <= ab + bc);
                prop_assert_eq!(table_deviation(&a, &a, arity).unwrap(), 0);
            }
        }

        #[test]
        fn pattern_pmfs_recover_full_key_table((keys, x, y, _z) in random_triple()) {
            let a = dataset(&keys, &x, 4);
            let b = a.with_sensitive_column(&y).unwrap();
            let idx = build_pattern_index(&a, &[0, 1, 2]).unwrap();
            let cmp = pattern_pmfs(&a, &b, &idx).unwrap();
            let weighted: f64 = cmp
                .iter()
                .zip(idx.sizes())
                .map(|(c, size)| 2.0 * c.tv * size as f64)
                .sum();
            let o = cross_tabulate(&a, &[0, 1, 2, 3]).unwrap();
            let s = cross_tabulate(&b, &[0, 1, 2, 3]).unwrap();
            let direct: u64 = o.cells().iter().zip(s.cells()).map(|(p, q)| p.abs_diff(*q)).sum();
            prop_assert!((weighted - direct as f64).abs() < 1e-9);
            for c in &cmp {
                prop_assert!((0.0..=1.0).contains(&c.tv));
                prop_assert!((c.synthetic.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
