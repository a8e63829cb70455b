//! Name-keyed registries of interchangeable strategies.
//!
//! Each pluggable family (field comparators, Step-3 matching kernels, point
//! estimators) registers constructor functions under a stable name. Callers
//! select an implementation at runtime from configuration or the CLI.

use std::collections::BTreeMap;

use crate::error::{LinkError, Result};

/// A map from strategy name to constructor.
pub struct Registry<F> {
    kind: &'static str,
    entries: BTreeMap<&'static str, F>,
}

impl<F: Copy> Registry<F> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, constructor: F) -> &mut Self {
        self.entries.insert(name, constructor);
        self
    }

    pub fn get(&self, name: &str) -> Result<F> {
        self.entries
            .get(name)
            .copied()
            .ok_or_else(|| LinkError::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
