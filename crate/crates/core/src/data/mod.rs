//! Coded categorical microdata: schema, records, patterns and contingency tables.

mod dataset;
mod pattern;
mod schema;
mod table;

pub use dataset::{dataset_to_string, load_dataset, write_dataset, CategoricalDataset};
pub use pattern::{build_pattern_index, full_pattern_index, Pattern, PatternIndex};
pub use schema::{Role, Schema, Variable};
pub use table::{combination_counts, cross_tabulate, ContingencyTable, CountMatrix};
