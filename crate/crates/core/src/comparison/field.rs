use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LinkError, Result};

/// Default cap on the number of values that may be flagged as very common.
pub const MAX_COMMON_VALUES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    String,
    Numeric,
    Categorical,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::String => "string",
            FieldKind::Numeric => "numeric",
            FieldKind::Categorical => "categorical",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single field value. Categorical codes are stored as text.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            Value::Int(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Text(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

/// How one field is compared and discretized into disagreement levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default)]
    pub cutpoints: Vec<f64>,
    /// Values whose exact agreement gets their own (last) level.
    #[serde(default)]
    pub common_values: Vec<String>,
    #[serde(default = "default_prefix_weight")]
    pub prefix_weight: f64,
    /// Lifts the cap of ten common values.
    #[serde(default)]
    pub allow_many_common: bool,
}

fn default_prefix_weight() -> f64 {
    0.1
}

impl FieldSpec {
    pub fn string(name: &str, cutpoints: &[f64]) -> Self {
        FieldSpec {
            name: name.to_string(),
            kind: FieldKind::String,
            cutpoints: cutpoints.to_vec(),
            common_values: Vec::new(),
            prefix_weight: default_prefix_weight(),
            allow_many_common: false,
        }
    }

    pub fn numeric(name: &str, cutpoints: &[f64]) -> Self {
        FieldSpec {
            kind: FieldKind::Numeric,
            prefix_weight: 0.0,
            ..FieldSpec::string(name, cutpoints)
        }
    }

    pub fn categorical(name: &str) -> Self {
        FieldSpec {
            kind: FieldKind::Categorical,
            prefix_weight: 0.0,
            ..FieldSpec::string(name, &[])
        }
    }

    pub fn with_prefix_weight(mut self, w: f64) -> Self {
        self.prefix_weight = w;
        self
    }

    pub fn with_common_values<S: AsRef<str>>(mut self, values: &[S]) -> Self {
        self.common_values = values.iter().map(|v| v.as_ref().to_string()).collect();
        self
    }

    /// Levels produced by the comparator before common-value relabeling.
    pub fn base_levels(&self) -> usize {
        match self.kind {
            FieldKind::String | FieldKind::Numeric => self.cutpoints.len() + 1,
            FieldKind::Categorical => 2,
        }
    }

    /// `L_f`, including the common level when configured.
    pub fn num_levels(&self) -> usize {
        self.base_levels() + usize::from(self.has_common_level())
    }

    pub fn has_common_level(&self) -> bool {
        !self.common_values.is_empty()
    }

    /// The distinguished common level, stored last (`L_f`).
    pub fn common_level(&self) -> Option<u8> {
        self.has_common_level().then(|| self.num_levels() as u8)
    }

    /// Display label for a 1-based level ("C" for the common level).
    pub fn level_label(&self, level: u8) -> String {
        if Some(level) == self.common_level() {
            "C".to_string()
        } else {
            level.to_string()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(LinkError::Config(format!("field `{}`: {msg}", self.name)));
        if self.cutpoints.iter().any(|c| !c.is_finite()) {
            return err("cutpoints must be finite".into());
        }
        if self.cutpoints.windows(2).any(|w| w[0] >= w[1]) {
            return err("cutpoints must be strictly increasing".into());
        }
        match self.kind {
            FieldKind::String => {
                if self.cutpoints.iter().any(|&c| c <= 0.0 || c >= 1.0) {
                    return err("string cutpoints must lie in (0, 1)".into());
                }
                if !(0.0..=0.25).contains(&self.prefix_weight) {
                    return err(format!("prefix_weight {} outside [0, 0.25]", self.prefix_weight));
                }
            }
            FieldKind::Numeric => {
                if self.has_common_level() {
                    return err("common values apply to string and categorical fields".into());
                }
            }
            FieldKind::Categorical => {
                if !self.cutpoints.is_empty() {
                    return err("categorical fields take no cutpoints".into());
                }
            }
        }
        if self.num_levels() < 2 {
            return err("a field needs at least two disagreement levels".into());
        }
        if self.num_levels() > u8::MAX as usize {
            return err("too many levels".into());
        }
        if self.common_values.len() > MAX_COMMON_VALUES && !self.allow_many_common {
            return err(format!(
                "{} common values listed; at most {MAX_COMMON_VALUES} unless allow_many_common is set",
                self.common_values.len()
            ));
        }
        Ok(())
    }

    /// Checks that `value` has the representation this field expects.
    pub fn accepts(&self, value: &Value) -> bool {
        match (self.kind, value) {
            (FieldKind::Numeric, Value::Int(_)) => true,
            (FieldKind::String | FieldKind::Categorical, Value::Text(_)) => true,
            _ => false,
        }
    }
}

/// A record: an opaque identifier plus one value per field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub values: Vec<Value>,
}

/// An ordered collection of records sharing a schema.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DataFile {
    pub records: Vec<Record>,
}

impl DataFile {
    pub fn new(records: Vec<Record>) -> Self {
        DataFile { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records at the given positions, in that order.
    pub fn subset(&self, indices: &[usize]) -> DataFile {
        DataFile {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub fn validate(&self, specs: &[FieldSpec]) -> Result<()> {
        if self.records.is_empty() {
            return Err(LinkError::Schema("data file has no records".into()));
        }
        for r in &self.records {
            if r.values.len() != specs.len() {
                return Err(LinkError::Schema(format!(
                    "record `{}` has {} values, schema has {} fields",
                    r.id,
                    r.values.len(),
                    specs.len()
                )));
            }
            for (v, s) in r.values.iter().zip(specs) {
                if !s.accepts(v) {
                    return Err(LinkError::Schema(format!(
                        "record `{}`: value `{v}` does not fit {} field `{}`",
                        r.id, s.kind, s.name
                    )));
                }
            }
        }
        Ok(())
    }
}
