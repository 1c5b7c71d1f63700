//! Declarative column schema.
//!
//! Schemas are TOML documents:
//!
//! ```toml
//! label_column = "class"
//! anomaly_value = "attack"     # rows whose label equals this are anomalies
//! # normal_value = "negative"  # alternatively: every other label is an anomaly
//!
//! [[columns]]
//! name = "age"
//! kind = "continuous"
//!
//! [[columns]]
//! name = "sex"
//! kind = "discrete"
//! categories = ["F", "M"]
//! ```
//!
//! A discrete column's cardinality is the length of its category list.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Discrete { categories: Vec<String> },
}

impl ColumnKind {
    pub fn cardinality(&self) -> Option<usize> {
        match self {
            ColumnKind::Continuous => None,
            ColumnKind::Discrete { categories } => Some(categories.len()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ColumnKind::Discrete { .. })
    }

    /// Number of encoded dimensions this column expands to.
    pub fn width(&self) -> usize {
        self.cardinality().unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl Column {
    pub fn continuous(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn discrete<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Discrete {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<Column>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomaly_value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_value: Option<String>,
}

impl FeatureSchema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let schema = FeatureSchema {
            columns,
            label_column: None,
            anomaly_value: None,
            normal_value: None,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn with_label(mut self, label_column: impl Into<String>, anomaly_value: impl Into<String>) -> Result<Self> {
        self.label_column = Some(label_column.into());
        self.anomaly_value = Some(anomaly_value.into());
        self.validate()?;
        Ok(self)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: FeatureSchema = toml::from_str(text).map_err(|e| Error::InvalidSchema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::InvalidSchema("no feature columns".into()));
        }
        let mut seen = HashSet::new();
        for col in &self.columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate column `{}`", col.name)));
            }
            if let ColumnKind::Discrete { categories } = &col.kind {
                if categories.len() < 2 {
                    return Err(Error::InvalidSchema(format!(
                        "discrete column `{}` needs at least 2 categories",
                        col.name
                    )));
                }
                let distinct: HashSet<_> = categories.iter().collect();
                if distinct.len() != categories.len() {
                    return Err(Error::InvalidSchema(format!(
                        "discrete column `{}` repeats a category",
                        col.name
                    )));
                }
            }
        }
        if let Some(label) = &self.label_column {
            if seen.contains(label.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "label column `{label}` is also a feature column"
                )));
            }
            if self.anomaly_value.is_none() && self.normal_value.is_none() {
                return Err(Error::InvalidSchema(
                    "label column given without anomaly_value or normal_value".into(),
                ));
            }
        }
        if self.anomaly_value.is_some() && self.normal_value.is_some() {
            return Err(Error::InvalidSchema(
                "set only one of anomaly_value and normal_value".into(),
            ));
        }
        Ok(())
    }

    /// Raw (pre-one-hot) column count.
    pub fn raw_width(&self) -> usize {
        self.columns.len()
    }

    /// Encoded dimension m.
    pub fn encoded_width(&self) -> usize {
        self.columns.iter().map(|c| c.kind.width()).sum()
    }

    pub fn is_anomaly_label(&self, raw: &str) -> bool {
        match (&self.anomaly_value, &self.normal_value) {
            (Some(a), _) => raw == a,
            (None, Some(n)) => raw != n,
            (None, None) => false,
        }
    }
}
