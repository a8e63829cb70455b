//! Per-field comparators, selected by field kind through a registry.

use std::sync::LazyLock;

use super::field::{FieldKind, FieldSpec, Value};
use super::jaro::jaro_winkler_distance;
use crate::error::Result;
use crate::registry::Registry;

/// Maps a pair of field values to a 1-based disagreement level.
pub trait FieldComparator: Send + Sync {
    fn kind(&self) -> &'static str;

    /// Level before common-value relabeling, in `1..=base_levels`.
    fn level(&self, a: &Value, b: &Value) -> u8;
}

pub type ComparatorFactory = fn(&FieldSpec) -> Box<dyn FieldComparator>;

pub static COMPARATORS: LazyLock<Registry<ComparatorFactory>> = LazyLock::new(|| {
    let mut reg: Registry<ComparatorFactory> = Registry::new("field comparator");
    reg.register("string", |s| {
        Box::new(JaroWinklerComparator {
            cutpoints: s.cutpoints.clone(),
            prefix_weight: s.prefix_weight,
        })
    })
    .register("numeric", |s| {
        Box::new(NumericComparator {
            cutpoints: s.cutpoints.clone(),
        })
    })
    .register("categorical", |_| Box::new(CategoricalComparator));
    reg
});

/// 1 + number of cutpoints strictly below `d`.
pub fn discretize_distance(d: f64, cutpoints: &[f64]) -> u8 {
    1 + cutpoints.iter().take_while(|&&c| c < d).count() as u8
}

pub fn compare_numeric(a: i64, b: i64, cutpoints: &[f64]) -> u8 {
    let diff = (a as f64 - b as f64).abs();
    discretize_distance(diff, cutpoints)
}

pub fn compare_categorical(a: &str, b: &str) -> u8 {
    if a == b {
        1
    } else {
        2
    }
}

/// Moves an exact agreement on a listed value to the common level.
pub fn relabel_common<S: AsRef<str>>(
    level: u8,
    value_a: &str,
    value_b: &str,
    common_values: &[S],
    common_level: u8,
) -> u8 {
    if value_a == value_b && common_values.iter().any(|c| c.as_ref() == value_a) {
        common_level
    } else {
        level
    }
}

pub struct JaroWinklerComparator {
    cutpoints: Vec<f64>,
    prefix_weight: f64,
}

impl FieldComparator for JaroWinklerComparator {
    fn kind(&self) -> &'static str {
        "string"
    }

    fn level(&self, a: &Value, b: &Value) -> u8 {
        let (a, b) = (a.as_text().unwrap_or(""), b.as_text().unwrap_or(""));
        if a == b {
            return 1;
        }
        discretize_distance(jaro_winkler_distance(a, b, self.prefix_weight), &self.cutpoints)
    }
}

pub struct NumericComparator {
    cutpoints: Vec<f64>,
}

impl FieldComparator for NumericComparator {
    fn kind(&self) -> &'static str {
        "numeric"
    }

    fn level(&self, a: &Value, b: &Value) -> u8 {
        match (a.as_int(), b.as_int()) {
            (Some(x), Some(y)) => compare_numeric(x, y, &self.cutpoints),
            _ => self.cutpoints.len() as u8 + 1,
        }
    }
}

pub struct CategoricalComparator;

impl FieldComparator for CategoricalComparator {
    fn kind(&self) -> &'static str {
        "categorical"
    }

    fn level(&self, a: &Value, b: &Value) -> u8 {
        if a == b {
            1
        } else {
            2
        }
    }
}

/// A field's comparator plus its common-value relabeling.
pub struct FieldComparison {
    comparator: Box<dyn FieldComparator>,
    common_values: Vec<String>,
    common_level: Option<u8>,
}

impl FieldComparison {
    pub fn new(spec: &FieldSpec) -> Result<Self> {
        spec.validate()?;
        let factory = COMPARATORS.get(spec.kind.name())?;
        Ok(FieldComparison {
            comparator: factory(spec),
            common_values: spec.common_values.clone(),
            common_level: spec.common_level(),
        })
    }

    pub fn kind(&self) -> FieldKind {
        match self.comparator.kind() {
            "numeric" => FieldKind::Numeric,
            "categorical" => FieldKind::Categorical,
            _ => FieldKind::String,
        }
    }

    pub fn level(&self, a: &Value, b: &Value) -> u8 {
        let level = self.comparator.level(a, b);
        match (self.common_level, a, b) {
            (Some(c), Value::Text(x), Value::Text(y)) => {
                relabel_common(level, x, y, &self.common_values, c)
            }
            _ => level,
        }
    }
}
