use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a variable is released as-is (key) or replaced by synthesis (sensitive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Key,
    Sensitive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub levels: usize,
    pub role: Role,
}

impl Variable {
    pub fn key(name: impl Into<String>, levels: usize) -> Self {
        Variable {
            name: name.into(),
            levels,
            role: Role::Key,
        }
    }

    pub fn sensitive(name: impl Into<String>, levels: usize) -> Self {
        Variable {
            name: name.into(),
            levels,
            role: Role::Sensitive,
        }
    }
}

#[derive(Deserialize, Serialize)]
struct SchemaFile {
    variables: Vec<Variable>,
}

/// Ordered list of coded categorical variables with exactly one sensitive variable.
///
/// Level codes are `1..=levels` in files and `0..levels` in memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct Schema {
    variables: Vec<Variable>,
    sensitive: usize,
    keys: Vec<usize>,
}

impl TryFrom<SchemaFile> for Schema {
    type Error = Error;

    fn try_from(file: SchemaFile) -> Result<Self> {
        Schema::new(file.variables)
    }
}

impl From<Schema> for SchemaFile {
    fn from(schema: Schema) -> Self {
        SchemaFile {
            variables: schema.variables,
        }
    }
}

impl Schema {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut seen = HashSet::new();
        for v in &variables {
            if v.name.trim().is_empty() {
                return Err(Error::Schema("variable with empty name".into()));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable `{}`", v.name)));
            }
            if v.levels < 2 {
                return Err(Error::Schema(format!(
                    "variable `{}` has {} levels; at least 2 required",
                    v.name, v.levels
                )));
            }
            if v.levels > u16::MAX as usize {
                return Err(Error::Schema(format!(
                    "variable `{}` has too many levels ({})",
                    v.name, v.levels
                )));
            }
        }
        let sensitive: Vec<usize> = variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.role == Role::Sensitive)
            .map(|(j, _)| j)
            .collect();
        if sensitive.len() != 1 {
            return Err(Error::Schema(format!(
                "exactly one sensitive variable required, found {}",
                sensitive.len()
            )));
        }
        let keys: Vec<usize> = (0..variables.len())
            .filter(|&j| j != sensitive[0])
            .collect();
        if keys.is_empty() {
            return Err(Error::Schema("at least one key variable required".into()));
        }
        Ok(Schema {
            variables,
            sensitive: sensitive[0],
            keys,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::Json {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SchemaFile = serde_json::from_str(text).map_err(|source| Error::Json {
            path: "<schema>".into(),
            source,
        })?;
        Schema::new(file.variables)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn levels(&self, var: usize) -> usize {
        self.variables[var].levels
    }

    pub fn name(&self, var: usize) -> &str {
        &self.variables[var].name
    }

    pub fn sensitive_index(&self) -> usize {
        self.sensitive
    }

    /// Number of levels of the sensitive variable (G).
    pub fn sensitive_levels(&self) -> usize {
        self.variables[self.sensitive].levels
    }

    /// Key variable indices in schema order.
    pub fn key_indices(&self) -> &[usize] {
        &self.keys
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Resolves variable names to key indices, rejecting the sensitive variable.
    pub fn resolve_keys<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                let j = self
                    .index_of(n)
                    .ok_or_else(|| Error::invalid(format!("unknown variable `{n}`")))?;
                if j == self.sensitive {
                    return Err(Error::invalid(format!(
                        "`{n}` is the sensitive variable, not a key"
                    )));
                }
                Ok(j)
            })
            .collect()
    }
}
