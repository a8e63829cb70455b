//! Blocking on initial-letter groups and global disagreement margins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::comparison::{DataFile, FieldLevelTable, FieldSpec, Record, Value};
use crate::error::{LinkError, Result};

/// How one field contributes to the block key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BlockRule {
    /// Group label of the first character; multi-character prefixes win over
    /// single initials.
    Initial {
        groups: Vec<String>,
        #[serde(default)]
        prefixes: Vec<String>,
        #[serde(default = "default_fallback")]
        fallback: String,
    },
    /// The value itself (categorical or numeric fields).
    Exact,
}

fn default_fallback() -> String {
    "OTHER".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockField {
    pub field: String,
    #[serde(flatten)]
    pub rule: BlockRule,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockScheme {
    pub fields: Vec<BlockField>,
}

fn groups(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

impl BlockScheme {
    /// First-name and last-name initial groups, with the "Jo" first-name prefix.
    pub fn default_names(first: &str, last: &str) -> Self {
        BlockScheme {
            fields: vec![
                BlockField {
                    field: first.to_string(),
                    rule: BlockRule::Initial {
                        groups: groups(&["AEIOUY", "BFP", "CKQSXZ", "DT", "GJ", "HMN", "LR", "VW"]),
                        prefixes: groups(&["Jo"]),
                        fallback: default_fallback(),
                    },
                },
                BlockField {
                    field: last.to_string(),
                    rule: BlockRule::Initial {
                        groups: groups(&[
                            "AEIOUY", "B", "CKQX", "DT", "FP", "GJ", "H", "LNR", "M", "SZ", "VW",
                        ]),
                        prefixes: Vec::new(),
                        fallback: default_fallback(),
                    },
                },
            ],
        }
    }

    /// A scheme that puts every record in one block.
    pub fn single_block() -> Self {
        BlockScheme::default()
    }

    pub fn validate(&self, specs: &[FieldSpec]) -> Result<()> {
        for bf in &self.fields {
            if !specs.iter().any(|s| s.name == bf.field) {
                return Err(LinkError::Config(format!("blocked field `{}` is not in the schema", bf.field)));
            }
            if let BlockRule::Initial { groups, prefixes, .. } = &bf.rule {
                for c in 'A'..='Z' {
                    if !groups.iter().any(|g| g.to_ascii_uppercase().contains(c)) {
                        return Err(LinkError::Config(format!(
                            "blocked field `{}`: letter {c} is in no group",
                            bf.field
                        )));
                    }
                }
                if prefixes.iter().any(|p| p.is_empty()) {
                    return Err(LinkError::Config("empty block prefix".into()));
                }
            }
        }
        Ok(())
    }

    fn field_positions(&self, specs: &[FieldSpec]) -> Result<Vec<usize>> {
        self.fields
            .iter()
            .map(|bf| {
                specs
                    .iter()
                    .position(|s| s.name == bf.field)
                    .ok_or_else(|| LinkError::Config(format!("unknown blocked field `{}`", bf.field)))
            })
            .collect()
    }
}

fn initial_group(value: &str, groups: &[String], prefixes: &[String], fallback: &str) -> String {
    let lower = value.to_lowercase();
    let mut by_length: Vec<&String> = prefixes.iter().collect();
    by_length.sort_by_key(|p| std::cmp::Reverse(p.chars().count()));
    if let Some(p) = by_length.into_iter().find(|p| lower.starts_with(&p.to_lowercase())) {
        return p.clone();
    }
    let first = value.chars().next().map(|c| c.to_ascii_uppercase());
    match first {
        Some(c) if c.is_ascii_alphabetic() => groups
            .iter()
            .find(|g| g.to_ascii_uppercase().contains(c))
            .cloned()
            .unwrap_or_else(|| fallback.to_string()),
        _ => fallback.to_string(),
    }
}

/// Block key of `record`, or `None` when a blocked field is empty.
pub fn block_key(record: &Record, scheme: &BlockScheme, specs: &[FieldSpec]) -> Result<Option<String>> {
    let positions = scheme.field_positions(specs)?;
    Ok(key_at(record, scheme, &positions))
}

fn key_at(record: &Record, scheme: &BlockScheme, positions: &[usize]) -> Option<String> {
    let mut parts = Vec::with_capacity(positions.len());
    for (bf, &pos) in scheme.fields.iter().zip(positions) {
        let value = &record.values[pos];
        let part = match (&bf.rule, value) {
            (_, Value::Text(s)) if s.trim().is_empty() => return None,
            (BlockRule::Initial { groups, prefixes, fallback }, Value::Text(s)) => {
                initial_group(s.trim(), groups, prefixes, fallback)
            }
            (BlockRule::Initial { .. }, Value::Int(v)) | (BlockRule::Exact, Value::Int(v)) => {
                v.to_string()
            }
            (BlockRule::Exact, Value::Text(s)) => s.clone(),
        };
        parts.push(part);
    }
    Some(parts.join("|"))
}

/// Records of both files sharing a block key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub key: String,
    /// Positions in file A and file B.
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Block {
    /// The model's A side is the smaller one.
    pub fn swapped(&self) -> bool {
        self.a.len() > self.b.len()
    }

    /// (model A, model B) positions, with `swapped()` telling which file each is from.
    pub fn model_sides(&self) -> (&[usize], &[usize]) {
        if self.swapped() {
            (&self.b, &self.a)
        } else {
            (&self.a, &self.b)
        }
    }

    /// Blocks with an empty side cannot contain a match and are skipped.
    pub fn skipped(&self) -> bool {
        self.a.is_empty() || self.b.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    /// Sorted by key.
    pub blocks: Vec<Block>,
    pub rejected_a: Vec<usize>,
    pub rejected_b: Vec<usize>,
}

pub fn partition(a: &DataFile, b: &DataFile, scheme: &BlockScheme, specs: &[FieldSpec]) -> Result<Partition> {
    scheme.validate(specs)?;
    let positions = scheme.field_positions(specs)?;
    let mut map: BTreeMap<String, Block> = BTreeMap::new();
    let mut out = Partition::default();
    for (side, file) in [a, b].into_iter().enumerate() {
        for (idx, record) in file.records.iter().enumerate() {
            match key_at(record, scheme, &positions) {
                Some(key) => {
                    let block = map.entry(key.clone()).or_insert_with(|| Block {
                        key,
                        a: Vec::new(),
                        b: Vec::new(),
                    });
                    if side == 0 {
                        block.a.push(idx);
                    } else {
                        block.b.push(idx);
                    }
                }
                None if side == 0 => out.rejected_a.push(idx),
                None => out.rejected_b.push(idx),
            }
        }
    }
    out.blocks = map.into_values().collect();
    Ok(out)
}

/// Distribution of disagreement levels over all cross-file pairs, for the
/// fields subject to U-correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginTable {
    /// Schema positions of the corrected fields.
    pub fields: Vec<usize>,
    /// Per corrected field: probabilities over levels `1..=L_f`.
    pub pooled: Vec<Vec<f64>>,
    /// Per record of the left file, per corrected field.
    pub per_record: Option<Vec<Vec<Vec<f64>>>>,
}

impl MarginTable {
    /// Keeps the per-record rows of `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> MarginTable {
        MarginTable {
            fields: self.fields.clone(),
            pooled: self.pooled.clone(),
            per_record: self
                .per_record
                .as_ref()
                .map(|rows| indices.iter().map(|&i| rows[i].clone()).collect()),
        }
    }

    /// Position of schema field `field` among the corrected fields.
    pub fn slot(&self, field: usize) -> Option<usize> {
        self.fields.iter().position(|&f| f == field)
    }
}

/// Margins over all `n_A × n_B` pairs, computed from frequency-weighted
/// unique value pairs. With `per_record`, also one margin per record of `a`
/// over its `n_B` pairs.
pub fn global_margins(
    a: &DataFile,
    b: &DataFile,
    specs: &[FieldSpec],
    fields: &[usize],
    per_record: bool,
) -> Result<MarginTable> {
    a.validate(specs)?;
    b.validate(specs)?;
    let n_a = a.len() as f64;
    let n_b = b.len() as f64;
    let mut pooled = Vec::with_capacity(fields.len());
    let mut by_record: Vec<Vec<Vec<f64>>> = if per_record {
        vec![Vec::with_capacity(fields.len()); a.len()]
    } else {
        Vec::new()
    };
    for &f in fields {
        let spec = specs
            .get(f)
            .ok_or_else(|| LinkError::Config(format!("margin field {f} out of range")))?;
        let table = FieldLevelTable::build(a, b, f, spec)?;
        let levels = spec.num_levels();
        let nub = table.n_b_unique();
        // per unique A value: B records at each level
        let unique_rows: Vec<Vec<u64>> = (0..table.a_counts.len())
            .map(|ua| {
                let mut row = vec![0u64; levels];
                for (ub, &cb) in table.b_counts.iter().enumerate() {
                    row[table.levels[ua * nub + ub] as usize - 1] += cb;
                }
                row
            })
            .collect();
        let mut total = vec![0u64; levels];
        for (row, &ca) in unique_rows.iter().zip(&table.a_counts) {
            for (t, &c) in total.iter_mut().zip(row) {
                *t += ca * c;
            }
        }
        pooled.push(total.iter().map(|&c| c as f64 / (n_a * n_b)).collect());
        if per_record {
            for (i, out) in by_record.iter_mut().enumerate() {
                let row = &unique_rows[table.a_index[i] as usize];
                out.push(row.iter().map(|&c| c as f64 / n_b).collect());
            }
        }
    }
    Ok(MarginTable {
        fields: fields.to_vec(),
        pooled,
        per_record: per_record.then_some(by_record),
    })
}
