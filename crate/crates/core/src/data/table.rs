use crate::data::{CategoricalDataset, PatternIndex};
use crate::error::{Error, Result};

/// Dense, zero-filled count table over the full level cross-product of `dims`.
///
/// Cells are row-major with the last dimension varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    dims: Vec<usize>,
    shape: Vec<usize>,
    cells: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn flat_index(shape: &[usize], levels: &[u16]) -> usize {
        levels
            .iter()
            .zip(shape)
            .fold(0, |acc, (&l, &d)| acc * d + l as usize)
    }

    /// Count at 0-based level codes, one per dim.
    pub fn get(&self, levels: &[u16]) -> u64 {
        assert_eq!(levels.len(), self.dims.len());
        self.cells[Self::flat_index(&self.shape, levels)]
    }

    /// Sums out dimension `axis` (position within `dims`).
    pub fn marginalize(&self, axis: usize) -> ContingencyTable {
        assert!(axis < self.dims.len() && self.dims.len() > 1);
        let outer: usize = self.shape[..axis].iter().product();
        let width = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut cells = vec![0u64; outer * inner];
        for o in 0..outer {
            for w in 0..width {
                for i in 0..inner {
                    cells[o * inner + i] += self.cells[(o * width + w) * inner + i];
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.remove(axis);
        let mut shape = self.shape.clone();
        shape.remove(axis);
        ContingencyTable {
            dims,
            shape,
            cells,
            total: self.total,
        }
    }
}

pub fn cross_tabulate(data: &CategoricalDataset, dims: &[usize]) -> Result<ContingencyTable> {
    if dims.is_empty() {
        return Err(Error::invalid("cross-tabulation needs at least one variable"));
    }
    for (a, &d) in dims.iter().enumerate() {
        if d >= data.p() {
            return Err(Error::invalid(format!("variable index {d} out of range")));
        }
        if dims[..a].contains(&d) {
            return Err(Error::invalid(format!("variable index {d} repeated")));
        }
    }
    let shape: Vec<usize> = dims.iter().map(|&d| data.schema().levels(d)).collect();
    let mut cells = vec![0u64; shape.iter().product()];
    let mut levels = vec![0u16; dims.len()];
    for row in data.rows() {
        for (slot, &d) in levels.iter_mut().zip(dims) {
            *slot = row[d];
        }
        cells[ContingencyTable::flat_index(&shape, &levels)] += 1;
    }
    Ok(ContingencyTable {
        dims: dims.to_vec(),
        shape,
        cells,
        total: data.n() as u64,
    })
}

/// B × G matrix of (pattern, sensitive level) counts, zero-filled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl CountMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "count matrix data has {} entries, expected {rows}×{cols}",
                data.len()
            )));
        }
        Ok(CountMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, b: usize, i: usize) -> u32 {
        self.data[b * self.cols + i]
    }

    pub fn row(&self, b: usize) -> &[u32] {
        &self.data[b * self.cols..(b + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.data
    }
}

pub fn combination_counts(data: &CategoricalDataset, patterns: &PatternIndex) -> CountMatrix {
    let g = data.schema().sensitive_levels();
    let s = data.schema().sensitive_index();
    let mut counts = vec![0u32; patterns.len() * g];
    for (b, pattern) in patterns.patterns().iter().enumerate() {
        for &i in &pattern.records {
            counts[b * g + data.value(i, s) as usize] += 1;
        }
    }
    CountMatrix {
        rows: patterns.len(),
        cols: g,
        data: counts,
    }
}
